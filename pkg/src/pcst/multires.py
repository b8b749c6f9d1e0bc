"""Progressive multiscale resampling codec.

The encoder halves the lattice three times (stride-2 sparse conv + IRN blocks
each stage) and projects to the latent width with a 1x1x1 conv. The decoder
mirrors it: each stage upsamples with a transposed conv, refines with IRN
blocks, scores candidate voxels with a binary occupancy head (sigmoid), and
keeps the top-k by probability, where k is the transmitted ground-truth count
for that scale. During training the ground-truth coordinate set at every scale
supervises a BCE on the candidates and is also what survives to the next stage.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .sparse import (
    InceptionResBlock,
    SparseConv,
    SparseConvTranspose,
    SparseTensor,
    coord_keys,
    prune,
)

log = logging.getLogger(__name__)

N_STAGES = 3


@dataclass
class ScalePointCounts:
    """Ground-truth occupancy counts at the three upsampling target scales (coarse to fine)."""

    counts: tuple[int, int, int]

    def __post_init__(self):
        self.counts = tuple(int(c) for c in self.counts)
        if len(self.counts) != N_STAGES:
            raise ValueError(f"expected {N_STAGES} counts, got {len(self.counts)}")
        if any(c <= 0 for c in self.counts):
            raise ValueError(f"counts must be strictly positive, got {self.counts}")

    @property
    def original(self) -> int:
        return self.counts[-1]

    def __iter__(self):
        return iter(self.counts)


def topk_prune(candidates: SparseTensor, probs, k: int) -> SparseTensor:
    """Keep the min(k, n) highest-probability voxels; ties break by canonical order."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    p = probs.detach().cpu().numpy() if torch.is_tensor(probs) else np.asarray(probs)
    p = p.reshape(-1)
    if p.shape[0] != candidates.n_points:
        raise ValueError(f"{p.shape[0]} probabilities for {candidates.n_points} candidates")
    if k >= candidates.n_points:
        return candidates
    # stable sort on (-prob, canonical position): equal probabilities keep coord order
    order = np.lexsort((np.arange(p.shape[0]), -p))
    keep = np.zeros(p.shape[0], dtype=bool)
    keep[order[:k]] = True
    return prune(candidates, keep)


def occupancy_logits(parent: SparseTensor, head: SparseConv):
    """Score every candidate voxel: returns (candidates, one logit per candidate)."""
    return parent, head(parent).feats[:, 0]


def membership_labels(candidates: SparseTensor, target_coords: torch.Tensor) -> torch.Tensor:
    """1.0 where a candidate coordinate belongs to the target set."""
    if target_coords.shape[0] == 0:
        return torch.zeros(candidates.n_points)
    tk = torch.sort(coord_keys(target_coords)).values
    ck = candidates.keys()
    idx = torch.searchsorted(tk, ck).clamp(max=tk.numel() - 1)
    return (tk[idx] == ck).to(torch.float32)


class MultiResEncoder(nn.Module):
    """Three stride-2 stages (conv + IRN blocks) and a 1x1x1 projection to the latent width."""

    def __init__(self, channels=(16, 32, 64), d_y: int = 8, kernel_size: int = 3,
                 irn_per_stage: int = 2):
        super().__init__()
        if len(channels) != N_STAGES:
            raise ValueError(f"need {N_STAGES} stage widths, got {channels}")
        self.d_y = d_y
        self.downs = nn.ModuleList()
        prev = 1
        for ch in channels:
            self.downs.append(SparseConv(prev, ch, kernel_size, stride=2))
            prev = ch
        self.irns = nn.ModuleList(
            nn.ModuleList(InceptionResBlock(ch, kernel_size) for _ in range(irn_per_stage))
            for ch in channels
        )
        self.project = SparseConv(prev, d_y, kernel_size=1)

    def forward(self, x: SparseTensor):
        """Returns (latent, counts, target coordinate sets coarse-to-fine)."""
        if x.n_points == 0:
            raise ValueError("cannot encode an empty tensor")
        if x.n_channels != 1:
            raise ValueError("encoder expects a 1-channel occupancy tensor")
        targets = [x.coords]  # stride 1 (finest)
        for stage in range(N_STAGES):
            x = self.downs[stage](x).relu()
            for block in self.irns[stage]:
                x = block(x)
            if stage < N_STAGES - 1:
                targets.append(x.coords)
        latent = self.project(x)
        targets = targets[::-1]  # coarse (stride 4) first
        counts = ScalePointCounts(tuple(t.shape[0] for t in targets))
        return latent, counts, targets

    def encode(self, x: SparseTensor):
        latent, counts, _ = self.forward(x)
        return latent, counts


class MultiResDecoder(nn.Module):
    """Mirrored upsampling stages with per-scale occupancy classification and pruning."""

    def __init__(self, d_y: int = 8, channels=(64, 32, 16), kernel_size: int = 3,
                 irn_per_stage: int = 2):
        super().__init__()
        if len(channels) != N_STAGES:
            raise ValueError(f"need {N_STAGES} stage widths, got {channels}")
        self.expand = SparseConv(d_y, channels[0], kernel_size=1)
        stage_out = list(channels[1:]) + [channels[-1]]
        self.ups = nn.ModuleList()
        self.irns = nn.ModuleList()
        self.heads = nn.ModuleList()
        prev = channels[0]
        for ch in stage_out:
            self.ups.append(SparseConvTranspose(prev, ch))
            self.irns.append(
                nn.ModuleList(InceptionResBlock(ch, kernel_size) for _ in range(irn_per_stage))
            )
            self.heads.append(SparseConv(ch, 1, kernel_size))
            prev = ch

    def _stage(self, x: SparseTensor, stage: int):
        x = self.ups[stage](x).relu()
        for block in self.irns[stage]:
            x = block(x)
        return occupancy_logits(x, self.heads[stage])

    def forward(self, latent: SparseTensor, counts: ScalePointCounts,
                mode: str = "topk") -> SparseTensor:
        """Reconstruct the stride-1 occupancy tensor from latent features and counts."""
        if latent.n_points == 0:
            raise ValueError("empty latent")
        x = self.expand(latent)
        for stage, n_keep in enumerate(counts):
            x, logits = self._stage(x, stage)
            probs = torch.sigmoid(logits)
            if mode == "topk":
                if n_keep > x.n_points:
                    log.warning(
                        "stage %d: requested %d voxels but only %d candidates; keeping all",
                        stage, n_keep, x.n_points,
                    )
                x = topk_prune(x, probs, n_keep)
            elif mode == "threshold":
                thr = min(n_keep / max(x.n_points, 1), 1.0)
                keep = probs.detach().cpu().numpy() >= thr
                if not keep.any():
                    keep[int(probs.argmax())] = True
                x = prune(x, keep)
            else:
                raise ValueError(f"unknown decode mode {mode!r}")
        return x

    def training_forward(self, latent: SparseTensor, targets):
        """Teacher-forced pass: per stage returns (logits, labels); ground truth survives.

        `targets` are the coordinate sets from the encoder, coarse to fine.
        """
        x = self.expand(latent)
        supervision = []
        for stage, target in enumerate(targets):
            x, logits = self._stage(x, stage)
            labels = membership_labels(x, target)
            supervision.append((logits, labels))
            x = prune(x, labels.bool())
        return supervision, x
