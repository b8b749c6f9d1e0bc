"""Entropy-guided deep JSCC codec with switchable fully connected layers.

Every latent coordinate is encoded independently of the channel realization:
its features are concatenated with a learned rating embedding identifying the
assigned symbol length, refined by a sparse Inception-Residual block, then
mapped by the FC layer whose output width equals that length. Consecutive real
outputs pair into complex channel symbols and the whole sequence is normalized
to unit average power. The decoder mirrors the structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn

from .entropy import RateAllocation
from .sparse import InceptionResBlock, SparseTensor, coord_keys


@dataclass
class SymbolSequence:
    """Variable-length channel input: complex symbols plus per-coordinate lengths.

    `pairs` holds (re, im) rows; `lengths[i]` real outputs belong to latent
    coordinate i, concatenated in canonical coordinate order (an odd total is
    padded with one zero real before pairing).
    """

    pairs: torch.Tensor  # (n_complex, 2)
    lengths: np.ndarray  # (n_coords,) int
    scale: float = 1.0
    degenerate: bool = False

    def __post_init__(self):
        self.lengths = np.asarray(self.lengths, dtype=np.int64).reshape(-1)

    @property
    def n_complex(self) -> int:
        return self.pairs.shape[0]

    @property
    def total_reals(self) -> int:
        return int(self.lengths.sum())

    @property
    def complex(self) -> np.ndarray:
        arr = self.pairs.detach().cpu().numpy().astype(np.float64)
        return arr[:, 0] + 1j * arr[:, 1]

    def with_pairs(self, pairs: torch.Tensor) -> "SymbolSequence":
        return SymbolSequence(pairs, self.lengths, self.scale, self.degenerate)


def pack_reals(reals: torch.Tensor) -> torch.Tensor:
    """Pair consecutive reals (r0, r1) -> r0 + i*r1, zero-padding an odd tail."""
    if reals.numel() % 2 == 1:
        reals = torch.cat([reals, reals.new_zeros(1)])
    return reals.reshape(-1, 2)


def unpack_reals(pairs: torch.Tensor, total: int) -> torch.Tensor:
    return pairs.reshape(-1)[:total]


def power_normalize(s):
    """Scale a complex vector to unit average power; returns (scaled, scale).

    A zero (or empty) vector comes back unchanged with scale 1 — callers can
    detect the degenerate case via `normalize_pairs`.
    """
    arr = np.asarray(s, dtype=np.complex128)
    if arr.size == 0:
        return arr, 1.0
    mean_power = float(np.mean(np.abs(arr) ** 2))
    if mean_power <= 0.0:
        return arr, 1.0
    scale = 1.0 / np.sqrt(mean_power)
    return arr * scale, scale


def normalize_pairs(pairs: torch.Tensor):
    """Torch twin of power_normalize on (n, 2) real pairs: (scaled, scale, degenerate)."""
    if pairs.shape[0] == 0:
        return pairs, 1.0, True
    mean_power = (pairs ** 2).sum(dim=1).mean()
    if float(mean_power.detach()) <= 0.0:
        return pairs, 1.0, True
    scale = torch.rsqrt(mean_power)
    return pairs * scale, float(scale.detach()), False


def _group_rows(k_indices: np.ndarray, n_groups: int):
    for g in range(n_groups):
        rows = np.nonzero(k_indices == g)[0]
        if rows.size:
            yield g, torch.from_numpy(rows)


class JSCCEncoder(nn.Module):
    """Latent features + rating embedding -> IRN -> per-length FC -> unit-power symbols."""

    def __init__(self, d_y: int = 8, d_e: int = 4, klist=(2, 4, 6, 8, 12, 16),
                 kernel_size: int = 3):
        super().__init__()
        self.d_y = d_y
        self.d_e = d_e
        self.klist = tuple(sorted(klist))
        self.embed = nn.Embedding(len(self.klist), d_e)
        self.irn = InceptionResBlock(d_y + d_e, kernel_size)
        self.fcs = nn.ModuleList(nn.Linear(d_y + d_e, k) for k in self.klist)

    def forward(self, y_tilde: SparseTensor, alloc: RateAllocation) -> SymbolSequence:
        if len(alloc.k) != y_tilde.n_points:
            raise ValueError(
                f"allocation covers {len(alloc.k)} coordinates, latent has {y_tilde.n_points}"
            )
        if tuple(alloc.klist) != self.klist:
            raise ValueError(f"allocation klist {alloc.klist} != encoder klist {self.klist}")
        lengths = alloc.k
        if y_tilde.n_points == 0:
            return SymbolSequence(y_tilde.feats.new_zeros((0, 2)), lengths)
        idx = alloc.indices
        z = torch.cat([y_tilde.feats, self.embed(torch.from_numpy(idx))], dim=1)
        z = self.irn(SparseTensor(y_tilde.coords, z, y_tilde.stride, _canonical=True)).feats

        starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        total = int(lengths.sum())
        flat = z.new_zeros(total)
        for g, rows in _group_rows(idx, len(self.klist)):
            out = self.fcs[g](z[rows])  # (n_g, k_g)
            k_g = self.klist[g]
            pos = starts[rows.numpy()][:, None] + np.arange(k_g)[None, :]
            flat = flat.index_put((torch.from_numpy(pos.reshape(-1)),), out.reshape(-1))
        pairs, scale, degenerate = normalize_pairs(pack_reals(flat))
        return SymbolSequence(pairs, lengths, scale, degenerate)


class JSCCDecoder(nn.Module):
    """Mirrored switchable FCs: noisy symbols -> per-length FC -> IRN -> latent features.

    Each FC maps its k received reals back to d_y + d_e channels; after IRN
    refinement the first d_y channels are the reconstructed latent features.
    """

    def __init__(self, d_y: int = 8, d_e: int = 4, klist=(2, 4, 6, 8, 12, 16),
                 kernel_size: int = 3):
        super().__init__()
        self.d_y = d_y
        self.d_e = d_e
        self.klist = tuple(sorted(klist))
        self.fcs = nn.ModuleList(nn.Linear(k, d_y + d_e) for k in self.klist)
        self.irn = InceptionResBlock(d_y + d_e, kernel_size)

    def forward(self, s_hat: SymbolSequence, coords, alloc: RateAllocation,
                stride: int = 8) -> SparseTensor:
        coords = coords if torch.is_tensor(coords) else torch.as_tensor(np.asarray(coords))
        coords = coords.long().reshape(-1, 3)
        if coords.shape[0] > 1:
            keys = coord_keys(coords)
            if not bool((keys[1:] > keys[:-1]).all()):
                raise ValueError("coordinates must be unique and in canonical order")
        lengths = np.asarray(alloc.k, dtype=np.int64)
        if len(lengths) != coords.shape[0]:
            raise ValueError(
                f"length list covers {len(lengths)} coordinates, got {coords.shape[0]}"
            )
        if not np.array_equal(lengths, s_hat.lengths):
            raise ValueError("symbol layout does not match the allocation lengths")
        if coords.shape[0] == 0:
            return SparseTensor(coords, s_hat.pairs.new_zeros((0, self.d_y)), stride)
        total = int(lengths.sum())
        if s_hat.n_complex != (total + 1) // 2:
            raise ValueError(
                f"expected {(total + 1) // 2} complex symbols, got {s_hat.n_complex}"
            )
        flat = unpack_reals(s_hat.pairs, total)
        idx = alloc.indices
        starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        z = flat.new_zeros((coords.shape[0], self.d_y + self.d_e))
        for g, rows in _group_rows(idx, len(self.klist)):
            k_g = self.klist[g]
            pos = starts[rows.numpy()][:, None] + np.arange(k_g)[None, :]
            received = flat[torch.from_numpy(pos.reshape(-1))].reshape(-1, k_g)
            z = z.index_copy(0, rows, self.fcs[g](received))
        z = self.irn(SparseTensor(coords, z, stride, _canonical=True)).feats
        return SparseTensor(coords, z[:, : self.d_y], stride, _canonical=True)
