"""FiLM-conditioned Fourier neural operator.

The backbone is a standard FNO stack: pointwise lift, spectral
convolutions over retained low modes with a parallel 1x1 convolution,
GELU between layers, pointwise projection to one output channel — its
output is the smooth-remainder estimate. A small convolutional
conditioning network maps the same input (Wick feature channels,
coordinates, time) to per-point modulation fields (gamma, tau), and the
prediction is the affine recombination

    u_hat = (1 + gamma) * v_hat + tau,

so a zeroed conditioning network is exactly the identity on the backbone
output. The final conditioning layer is zero-initialized: training starts
from the unmodulated backbone.

Spectral weights are stored as real (in, out, m1, m2, 2) parameter pairs
and viewed as complex in the forward pass, which keeps the module usable
in float64 for finite-difference gradient checks.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import torch
from torch import nn

from .data import SCHEMES, input_channels


@dataclass
class ModelConfig:
    chaos: tuple[int, int, int] = (1, 4, 3)
    scheme: str = "w"
    modes: int = 8
    width: int = 24
    n_layers: int = 3
    cond_width: int = 32
    lr: float = 2e-3
    epochs: int = 40
    batch_size: int = 64
    val_fraction: float = 0.125

    def __post_init__(self) -> None:
        self.chaos = tuple(self.chaos)
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def in_channels(self) -> int:
        return input_channels(self.chaos, self.scheme)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)


class SpectralConv2d(nn.Module):
    """Complex multiplication on the lowest modes of the 2-d real FFT."""

    def __init__(self, in_channels: int, out_channels: int, modes: int):
        super().__init__()
        self.modes = modes
        scale = 1.0 / (in_channels * out_channels)
        shape = (in_channels, out_channels, modes, modes, 2)
        self.weight_pos = nn.Parameter(scale * torch.randn(*shape))
        self.weight_neg = nn.Parameter(scale * torch.randn(*shape))
        self.out_channels = out_channels

    @staticmethod
    def _mul(x_ft: torch.Tensor, weight: torch.Tensor) -> torch.Tensor:
        return torch.einsum("bixy,ioxy->boxy", x_ft, torch.view_as_complex(weight))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        B, _, H, W = x.shape
        m = self.modes
        x_ft = torch.fft.rfft2(x)
        out_ft = torch.zeros(
            B, self.out_channels, H, W // 2 + 1, dtype=x_ft.dtype, device=x.device
        )
        out_ft[:, :, :m, :m] = self._mul(x_ft[:, :, :m, :m], self.weight_pos)
        out_ft[:, :, -m:, :m] = self._mul(x_ft[:, :, -m:, :m], self.weight_neg)
        return torch.fft.irfft2(out_ft, s=(H, W))


class FnoBackbone(nn.Module):
    def __init__(self, in_channels: int, width: int, modes: int, n_layers: int):
        super().__init__()
        self.lift = nn.Conv2d(in_channels, width, 1)
        self.spectral = nn.ModuleList(
            SpectralConv2d(width, width, modes) for _ in range(n_layers)
        )
        self.pointwise = nn.ModuleList(
            nn.Conv2d(width, width, 1) for _ in range(n_layers)
        )
        self.project = nn.Sequential(
            nn.Conv2d(width, width, 1), nn.GELU(), nn.Conv2d(width, 1, 1)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.lift(x)
        last = len(self.spectral) - 1
        for k, (spec, pw) in enumerate(zip(self.spectral, self.pointwise)):
            y = spec(x) + pw(x)
            x = torch.nn.functional.gelu(y) if k < last else y
        return self.project(x)


class ConditioningNet(nn.Module):
    """Conv2d stack producing the per-point FiLM fields (gamma, tau)."""

    def __init__(self, in_channels: int, width: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(in_channels, width, 3, padding=1, padding_mode="circular"),
            nn.GELU(),
            nn.Conv2d(width, width, 3, padding=1, padding_mode="circular"),
            nn.GELU(),
        )
        self.head = nn.Conv2d(width, 2, 3, padding=1, padding_mode="circular")
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        fields = self.head(self.body(x))
        return fields[:, 0:1], fields[:, 1:2]


class WceFilmNo(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        c = config.in_channels
        self.backbone = FnoBackbone(c, config.width, config.modes, config.n_layers)
        self.conditioner = ConditioningNet(c, config.cond_width)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        v_hat = self.backbone(x)
        gamma, tau = self.conditioner(x)
        u_hat = (1.0 + gamma) * v_hat + tau
        return u_hat[:, 0]

    def backbone_only(self, x: torch.Tensor) -> torch.Tensor:
        return self.backbone(x)[:, 0]

    def zero_conditioning_(self) -> None:
        """Zero every conditioning parameter: modulation becomes the identity."""
        with torch.no_grad():
            for p in self.conditioner.parameters():
                p.zero_()
