"""Truncated Wiener-chaos basis: Hermite polynomials, multi-indices, Wick features.

A multi-index alpha assigns a non-negative integer to each (noise channel
i, temporal mode j) pair, i <= I, j <= J, with total order |alpha| =
sum(alpha_ij) <= K. The truncated basis has exactly

    (I*J + K)! / ((I*J)! K!)

members. Indices are stored densely as flat tuples of length I*J in
row-major (i, j) order. The canonical ordering — ascending order |alpha|,
ties broken lexicographically on the flattened entries — is part of the
dataset contract: feature positions must be stable across runs and
languages, and the ordering digest is recorded in every manifest.

Hermite polynomials follow the probabilists' convention (h2(x) = x^2 - 1,
h3(x) = x^3 - 3x) via the recurrence h_{k+1} = x h_k - k h_{k-1}.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import WickfieldError

# Recurrence coefficients grow like sqrt(k!); beyond this order float64
# loses the polynomial tail entirely.
HERMITE_MAX_ORDER = 64

# Refuse to materialize enumerations past this size.
ENUMERATION_LIMIT = 50_000_000

MultiIndex = tuple[int, ...]


@dataclass(frozen=True)
class ChaosBasisSpec:
    """Truncation parameters: I noise channels, J temporal modes, order K."""

    I: int
    J: int
    K: int

    def __post_init__(self) -> None:
        if self.I < 1 or self.J < 1 or self.K < 0:
            raise WickfieldError(f"invalid chaos spec (I={self.I}, J={self.J}, K={self.K})")

    @property
    def n_variables(self) -> int:
        return self.I * self.J

    def count(self) -> int:
        """Closed-form basis size (IJ + K choose K), exact."""
        return math.comb(self.n_variables + self.K, self.K)


@dataclass
class WickFeatureVector:
    """Evaluated Wick features for one noise realization.

    ``values`` is aligned with ``ordering``; the entry for alpha = 0 is
    always exactly 1. For batched evaluation ``values`` may carry leading
    sample axes; the feature axis is last.
    """

    basis: ChaosBasisSpec
    ordering: list[MultiIndex]
    values: np.ndarray


def hermite(k: int, x) -> np.ndarray | float:
    """Probabilists' Hermite polynomial h_k evaluated elementwise."""
    if k < 0:
        raise WickfieldError("Hermite order must be non-negative")
    if k > HERMITE_MAX_ORDER:
        raise WickfieldError(f"Hermite order {k} exceeds supported maximum {HERMITE_MAX_ORDER}")
    x = np.asarray(x, dtype=np.float64)
    return _hermite_all(k, x)[k] if x.ndim else float(_hermite_all(k, x)[k])


def _hermite_all(k_max: int, x: np.ndarray) -> list[np.ndarray]:
    """h_0 .. h_kmax at x, sharing the recurrence across orders."""
    values = [np.ones_like(x)]
    if k_max >= 1:
        values.append(x.copy())
    for k in range(1, k_max):
        values.append(x * values[k] - k * values[k - 1])
    return values


def enumerate_indices(spec: ChaosBasisSpec) -> list[MultiIndex]:
    """All multi-indices of the truncated set in canonical order.

    Enumeration is by chaos level: within level k, compositions of k into
    I*J slots are generated directly in lexicographic order of the dense
    tuple, so no sort is needed.
    """
    if spec.count() > ENUMERATION_LIMIT:
        raise WickfieldError(
            f"basis size {spec.count()} exceeds enumeration limit {ENUMERATION_LIMIT}"
        )
    n = spec.n_variables
    out: list[MultiIndex] = []
    for level in range(spec.K + 1):
        out.extend(_compositions(level, n))
    return out


def _compositions(total: int, slots: int) -> list[MultiIndex]:
    if slots == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        for rest in _compositions(total - first, slots - 1):
            out.append((first,) + rest)
    return out


def ordering_digest(spec: ChaosBasisSpec) -> str:
    """SHA-256 over the canonical ordering; recorded in dataset manifests."""
    payload = f"I={spec.I};J={spec.J};K={spec.K};" + ";".join(
        ",".join(map(str, alpha)) for alpha in enumerate_indices(spec)
    )
    return hashlib.sha256(payload.encode("ascii")).hexdigest()


def wick_features(xi, spec: ChaosBasisSpec) -> WickFeatureVector:
    """Evaluate all features xi_alpha = prod h_{alpha_ij}(xi_ij) / sqrt(alpha!).

    ``xi`` holds the underlying Gaussian integrals, last axis of length
    I*J in the same row-major (i, j) order as the multi-index entries.
    Leading axes are treated as independent samples.
    """
    xi = np.asarray(xi, dtype=np.float64)
    n = spec.n_variables
    if xi.shape[-1:] != (n,):
        raise WickfieldError(f"expected last axis of length {n}, got shape {xi.shape}")
    ordering = enumerate_indices(spec)
    # hermite_table[k][v] = h_k(xi[..., v]) for all variables at once
    hermite_table = _hermite_all(spec.K, xi)
    values = np.empty(xi.shape[:-1] + (len(ordering),))
    for pos, alpha in enumerate(ordering):
        acc = np.ones(xi.shape[:-1])
        norm = 1.0
        for v, k in enumerate(alpha):
            if k:
                acc = acc * hermite_table[k][..., v]
                norm *= math.factorial(k)
        values[..., pos] = acc / math.sqrt(norm)
    return WickFeatureVector(spec, ordering, values)
