"""Fully factorized learned density over quantized latent features.

Each latent channel gets an independent monotone scalar CDF built from small
affine-plus-gated-tanh layers; the likelihood of a (noisy or rounded) feature
value is the CDF difference across a unit-width bin. Likelihoods convert to
per-coordinate symbol budgets, which are snapped onto the admissible length
list driving the switchable JSCC layers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

LIKELIHOOD_FLOOR = 1e-9

DEFAULT_KLIST = (2, 4, 6, 8, 12, 16)


class FactorizedDensity(nn.Module):
    """Per-channel monotone CDF stack (default 3 hidden layers of width 3).

    Monotonicity comes from softplus-positive layer matrices and gated-tanh
    nonlinearities with gates in (-1, 1); the final sigmoid pins the limits
    to 0 and 1.
    """

    def __init__(self, channels: int, filters=(3, 3, 3), init_scale: float = 4.0):
        super().__init__()
        self.channels = channels
        dims = (1,) + tuple(filters) + (1,)
        scale = init_scale ** (1.0 / (len(filters) + 1))
        self._matrices = nn.ParameterList()
        self._biases = nn.ParameterList()
        self._gates = nn.ParameterList()
        for i in range(len(dims) - 1):
            init = math.log(math.expm1(1.0 / scale / dims[i + 1]))
            self._matrices.append(nn.Parameter(torch.full((channels, dims[i + 1], dims[i]), init)))
            bias = torch.empty(channels, dims[i + 1], 1).uniform_(-0.5, 0.5)
            self._biases.append(nn.Parameter(bias))
            if i < len(dims) - 2:
                self._gates.append(nn.Parameter(torch.zeros(channels, dims[i + 1], 1)))

    def cdf_logits(self, values: torch.Tensor) -> torch.Tensor:
        """Pre-sigmoid CDF at `values`, shape (channels, 1, n)."""
        v = values
        n_layers = len(self._matrices)
        for i in range(n_layers):
            v = F.softplus(self._matrices[i]) @ v + self._biases[i]
            if i < n_layers - 1:
                v = v + torch.tanh(self._gates[i]) * torch.tanh(v)
        return v

    def cdf(self, values: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.cdf_logits(values))

    def channel_likelihood(self, f_tilde: torch.Tensor) -> torch.Tensor:
        """Bin probability c(f+1/2) - c(f-1/2) per channel, floored at 1e-9.

        f_tilde: (n, channels) -> (n, channels).
        """
        if f_tilde.shape[-1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {f_tilde.shape[-1]}")
        v = f_tilde.t().unsqueeze(1)  # (channels, 1, n)
        upper = self.cdf(v + 0.5)
        lower = self.cdf(v - 0.5)
        p = (upper - lower).squeeze(1).t()
        return p.clamp_min(LIKELIHOOD_FLOOR)

    def forward(self, f_tilde: torch.Tensor) -> torch.Tensor:
        return likelihood(self, f_tilde)


def likelihood(density: FactorizedDensity, f_tilde) -> torch.Tensor:
    """Per-coordinate likelihood: product of the channel bin probabilities."""
    if not torch.is_tensor(f_tilde):
        f_tilde = torch.as_tensor(np.asarray(f_tilde, dtype=np.float64))
    if f_tilde.dim() == 1:
        f_tilde = f_tilde.unsqueeze(0)
    return density.channel_likelihood(f_tilde).prod(dim=1)


def quantize_proxy(f, mode: str = "eval", seed: int | None = None,
                   generator: torch.Generator | None = None):
    """Quantization stand-in: additive U(-1/2, 1/2) noise in train mode, rounding in eval."""
    was_tensor = torch.is_tensor(f)
    t = f if was_tensor else torch.as_tensor(np.asarray(f, dtype=np.float64))
    if mode == "eval":
        out = torch.round(t)
    elif mode == "train":
        if generator is None:
            generator = torch.Generator()
            if seed is not None:
                generator.manual_seed(seed)
        noise = torch.rand(t.shape, generator=generator, dtype=t.dtype) - 0.5
        out = t + noise
    else:
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    return out if was_tensor else out.numpy()


def symbol_budget(p, eta: float):
    """Real-valued symbol count -eta * log2(P) for likelihood(s) P."""
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    arr = p if torch.is_tensor(p) else np.asarray(p, dtype=np.float64)
    if torch.is_tensor(arr):
        if bool((arr <= 0).any()):
            raise ValueError("nonpositive likelihood")
        return -eta * torch.log2(arr)
    if np.any(arr <= 0):
        raise ValueError("nonpositive likelihood")
    out = -eta * np.log2(arr)
    return float(out) if np.isscalar(p) or arr.ndim == 0 else out


def quantize_budget(k_real, klist):
    """Snap real budgets to the nearest admissible length; ties round up."""
    klist = sorted(klist)
    if not klist:
        raise ValueError("empty klist")
    arr = np.atleast_1d(np.asarray(k_real, dtype=np.float64))
    mids = (np.asarray(klist[:-1]) + np.asarray(klist[1:])) / 2.0
    idx = np.searchsorted(mids, arr, side="right")
    out = np.asarray(klist, dtype=np.int64)[idx]
    if np.isscalar(k_real) or np.asarray(k_real).ndim == 0:
        return int(out[0])
    return out


def total_bandwidth(k) -> int:
    """Total symbol count K = sum of the per-coordinate quantized lengths."""
    return int(np.sum(np.asarray(k, dtype=np.int64))) if len(k) else 0


def derive_klist(budgets, n_entries: int = 6, lo: int = 2) -> tuple[int, ...]:
    """Admissible length list from the empirical budget distribution (quantiles)."""
    arr = np.asarray(budgets, dtype=np.float64)
    if arr.size == 0:
        return DEFAULT_KLIST
    qs = np.linspace(0.1, 0.95, n_entries)
    vals = np.maximum(np.rint(np.quantile(arr, qs)).astype(int), lo)
    uniq = sorted(set(int(v) for v in vals))
    return tuple(uniq) if len(uniq) >= 2 else DEFAULT_KLIST


@dataclass
class RateAllocation:
    """Quantized symbol length per latent coordinate plus the governing knobs."""

    k: np.ndarray  # (n,) int
    eta: float
    klist: tuple = field(default_factory=lambda: DEFAULT_KLIST)

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=np.int64).reshape(-1)
        self.klist = tuple(sorted(self.klist))
        if self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        members = set(self.klist)
        if any(int(v) not in members for v in self.k):
            raise ValueError("allocation contains lengths outside klist")

    @property
    def indices(self) -> np.ndarray:
        lookup = {v: i for i, v in enumerate(self.klist)}
        return np.asarray([lookup[int(v)] for v in self.k], dtype=np.int64)

    def total(self) -> int:
        return total_bandwidth(self.k)


def allocate(density: FactorizedDensity, f_tilde: torch.Tensor, eta: float,
             klist=DEFAULT_KLIST) -> RateAllocation:
    """Budget every coordinate from its likelihood and snap onto klist."""
    with torch.no_grad():
        p = likelihood(density, f_tilde)
        k_real = symbol_budget(p, eta).cpu().numpy()
    return RateAllocation(quantize_budget(k_real, klist), eta, tuple(klist))
