"""AWGN and flat Rayleigh channel simulation with MMSE equalization.

Symbols are unit-average-power complex values; noise variance follows from the
target SNR as 10^(-snr_db/10). Rayleigh fading is block fading by default: one
CSI draw per latent coordinate's symbol block, redrawn across blocks (pass
per-symbol blocks for fully independent fading). The capacity model converts
side-information bits into complex channel uses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

_ERGODIC_MC_SEED = 0x5EED
_ERGODIC_MC_DRAWS = 1 << 16


def noise_variance(snr_db: float) -> float:
    return float(10.0 ** (-snr_db / 10.0))


@dataclass
class ChannelRealization:
    """One transmission's fading coefficients and noise, reproducible per seed."""

    kind: str
    snr_db: float
    h: np.ndarray      # complex, one entry per symbol (all ones for AWGN)
    noise: np.ndarray  # complex, scaled to noise_var
    noise_var: float
    seed: int

    def __post_init__(self):
        if self.kind not in ("awgn", "rayleigh"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")


def make_realization(kind: str, snr_db: float, n_symbols: int, seed: int,
                     block_lengths=None) -> ChannelRealization:
    """Draw CSI and noise for `n_symbols` complex uses.

    block_lengths: complex-symbol counts per fading block (Rayleigh only);
    omitted means one independent draw per symbol.
    """
    var = noise_variance(snr_db)
    rng = np.random.default_rng(seed)
    std = np.sqrt(var / 2.0)
    noise = rng.normal(0.0, std, n_symbols) + 1j * rng.normal(0.0, std, n_symbols)
    if kind == "awgn":
        h = np.ones(n_symbols, dtype=np.complex128)
    elif kind == "rayleigh":
        if block_lengths is None:
            blocks = np.ones(n_symbols, dtype=np.int64)
        else:
            blocks = np.asarray(block_lengths, dtype=np.int64)
            if blocks.sum() != n_symbols:
                raise ValueError(
                    f"block lengths sum to {blocks.sum()}, expected {n_symbols}"
                )
        draws = (rng.normal(0.0, np.sqrt(0.5), len(blocks))
                 + 1j * rng.normal(0.0, np.sqrt(0.5), len(blocks)))
        h = np.repeat(draws, blocks)
    else:
        raise ValueError(f"unknown channel kind {kind!r}")
    return ChannelRealization(kind, snr_db, h, noise, var, seed)


def transmit(s, ch: ChannelRealization) -> np.ndarray:
    """Elementwise h * s + n."""
    s = np.asarray(s, dtype=np.complex128)
    if s.shape != ch.h.shape:
        raise ValueError(f"{s.shape[0] if s.ndim else 0} symbols vs realization of {ch.h.shape[0]}")
    return ch.h * s + ch.noise


def equalize(s_hat, ch: ChannelRealization) -> np.ndarray:
    """Perfect-CSI MMSE per symbol; AWGN passes through."""
    s_hat = np.asarray(s_hat, dtype=np.complex128)
    if ch.kind == "awgn":
        return s_hat
    return np.conj(ch.h) * s_hat / (np.abs(ch.h) ** 2 + ch.noise_var)


def transmit_pairs(pairs: torch.Tensor, ch: ChannelRealization) -> torch.Tensor:
    """Training-path transmit on (n, 2) real-pair tensors.

    CSI and noise enter as constants, so gradients flow to the symbols only
    (reparameterized noise).
    """
    if pairs.shape[0] != ch.h.shape[0]:
        raise ValueError(f"{pairs.shape[0]} symbols vs realization of {ch.h.shape[0]}")
    hr = torch.as_tensor(ch.h.real, dtype=pairs.dtype)
    hi = torch.as_tensor(ch.h.imag, dtype=pairs.dtype)
    nr = torch.as_tensor(ch.noise.real, dtype=pairs.dtype)
    ni = torch.as_tensor(ch.noise.imag, dtype=pairs.dtype)
    re = hr * pairs[:, 0] - hi * pairs[:, 1] + nr
    im = hr * pairs[:, 1] + hi * pairs[:, 0] + ni
    return torch.stack([re, im], dim=1)


def equalize_pairs(pairs: torch.Tensor, ch: ChannelRealization) -> torch.Tensor:
    if ch.kind == "awgn":
        return pairs
    hr = torch.as_tensor(ch.h.real, dtype=pairs.dtype)
    hi = torch.as_tensor(ch.h.imag, dtype=pairs.dtype)
    denom = hr * hr + hi * hi + ch.noise_var
    re = (hr * pairs[:, 0] + hi * pairs[:, 1]) / denom
    im = (hr * pairs[:, 1] - hi * pairs[:, 0]) / denom
    return torch.stack([re, im], dim=1)


def capacity_bits_per_symbol(kind: str, snr_db: float, margin_db: float = 0.0) -> float:
    """log2(1 + SNR) per complex use; ergodic (fixed-seed Monte Carlo) for Rayleigh."""
    gamma = 10.0 ** ((snr_db - margin_db) / 10.0)
    if kind == "awgn":
        return float(np.log2(1.0 + gamma))
    rng = np.random.default_rng(_ERGODIC_MC_SEED)
    g = (rng.normal(0.0, np.sqrt(0.5), _ERGODIC_MC_DRAWS) ** 2
         + rng.normal(0.0, np.sqrt(0.5), _ERGODIC_MC_DRAWS) ** 2)
    return float(np.mean(np.log2(1.0 + g * gamma)))


def bits_to_symbols(n_bits: int, ch: ChannelRealization, margin_db: float = 2.0) -> int:
    """Complex channel uses needed to carry `n_bits` through an ideal capacity-threshold code."""
    if n_bits < 0:
        raise ValueError("n_bits must be >= 0")
    if n_bits == 0:
        return 0
    c = capacity_bits_per_symbol(ch.kind, ch.snr_db, margin_db)
    return int(np.ceil(n_bits / c))
