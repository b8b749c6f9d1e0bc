"""Sparse voxel tensors and differentiable sparse 3-D convolution.

The computational substrate for every network in the package: coordinates are
integer sites on a strided 3-D lattice, features are one row per site, and all
convolutions are evaluated by coordinate hashing (sorted int64 keys +
``searchsorted``) followed by dense gather/matmul, so autograd covers both
features and kernel weights.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

# Packs a (shifted) integer 3-vector into one int64 key. The shift tolerates
# the small negative coordinates that appear while probing kernel neighbors.
_KEY_BASE = 1 << 21
_KEY_SHIFT = 1 << 19


def coord_keys(coords: torch.Tensor) -> torch.Tensor:
    """int64 key per coordinate row; key order == lexicographic coordinate order."""
    c = coords.long() + _KEY_SHIFT
    return (c[:, 0] * _KEY_BASE + c[:, 1]) * _KEY_BASE + c[:, 2]


def _as_coords(coords) -> torch.Tensor:
    t = torch.as_tensor(np.asarray(coords) if not torch.is_tensor(coords) else coords)
    t = t.long().reshape(-1, 3)
    return t


class SparseTensor:
    """Voxelized geometry or latent features as a {coords, feats} pair.

    coords: (N, 3) integer sites, unique, every entry a multiple of `stride`,
    kept in canonical (lexicographic) order. feats: (N, C) float tensor,
    row-aligned with coords.
    """

    def __init__(self, coords, feats, stride: int = 1, _canonical: bool = False,
                 _cache: dict | None = None):
        coords = _as_coords(coords)
        if not torch.is_tensor(feats):
            feats = torch.as_tensor(np.asarray(feats, dtype=np.float32))
        if feats.dim() == 1:
            feats = feats.reshape(-1, 1)
        if stride < 1:
            raise ValueError(f"stride must be positive, got {stride}")
        if feats.shape[0] != coords.shape[0]:
            raise ValueError(
                f"{feats.shape[0]} feature rows for {coords.shape[0]} coordinates"
            )
        if not _canonical and coords.shape[0] > 0:
            if stride > 1 and bool((coords % stride != 0).any()):
                raise ValueError(f"coordinates not aligned to stride {stride}")
            keys = coord_keys(coords)
            order = torch.argsort(keys)
            coords, feats, keys = coords[order], feats[order], keys[order]
            if bool((keys[1:] == keys[:-1]).any()):
                raise ValueError("duplicate coordinates")
        self.coords = coords
        self.feats = feats
        self.stride = int(stride)
        # kernel maps keyed by (op, kernel geometry); shared by same-coordinate
        # tensors so stacked convolutions pay the neighbor search once
        self._cache = {} if _cache is None else _cache

    @property
    def n_points(self) -> int:
        return self.coords.shape[0]

    @property
    def n_channels(self) -> int:
        return self.feats.shape[1]

    def keys(self) -> torch.Tensor:
        return coord_keys(self.coords)

    def with_feats(self, feats: torch.Tensor) -> "SparseTensor":
        """Same coordinate set, new feature rows (kernel maps carry over)."""
        return SparseTensor(self.coords, feats, self.stride, _canonical=True,
                            _cache=self._cache)

    def relu(self) -> "SparseTensor":
        return self.with_feats(F.relu(self.feats))

    def coords_array(self) -> np.ndarray:
        return self.coords.cpu().numpy()

    def __repr__(self):
        return f"SparseTensor(n={self.n_points}, channels={self.n_channels}, stride={self.stride})"


def ones_tensor(coords, stride: int = 1, dtype=torch.float32) -> SparseTensor:
    """Occupancy tensor: all-ones single-channel features."""
    coords = _as_coords(coords)
    return SparseTensor(coords, torch.ones(coords.shape[0], 1, dtype=dtype), stride)


def _centered_offsets(kernel_size: int) -> torch.Tensor:
    r = torch.arange(kernel_size) - (kernel_size - 1) // 2
    grid = torch.stack(torch.meshgrid(r, r, r, indexing="ij"), dim=-1)
    return grid.reshape(-1, 3).long()


def _corner_offsets() -> torch.Tensor:
    r = torch.arange(2)
    grid = torch.stack(torch.meshgrid(r, r, r, indexing="ij"), dim=-1)
    return grid.reshape(-1, 3).long()


def _lookup(sorted_keys: torch.Tensor, query: torch.Tensor):
    """Row indices of `query` keys inside `sorted_keys` plus a found mask."""
    if sorted_keys.numel() == 0:
        idx = torch.zeros_like(query)
        return idx, torch.zeros(query.shape, dtype=torch.bool)
    idx = torch.searchsorted(sorted_keys, query)
    idx = idx.clamp(max=sorted_keys.numel() - 1)
    return idx, sorted_keys[idx] == query


def _unique_sorted_coords(coords: torch.Tensor) -> torch.Tensor:
    keys = coord_keys(coords)
    uniq, inverse = torch.unique(keys, sorted=True, return_inverse=True)
    first = torch.zeros_like(uniq)
    first.scatter_reduce_(
        0, inverse, torch.arange(coords.shape[0]), reduce="amin", include_self=False
    )
    return coords[first]


class SparseConv(nn.Module):
    """Sparse 3-D convolution kernel.

    `weight` is indexed (kernel offset, in channel, out channel) over the
    kernel_size**3 centered window; one bias per out channel. stride 1 is
    submanifold (output sites == input sites); stride 2 emits each input site
    rounded down to the twice-coarser lattice.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3,
                 stride: int = 1, bias: bool = True):
        super().__init__()
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and positive, got {kernel_size}")
        if stride not in (1, 2):
            raise ValueError(f"stride must be 1 or 2, got {stride}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.register_buffer("offsets", _centered_offsets(kernel_size), persistent=False)
        volume = kernel_size ** 3
        std = (2.0 / (volume * in_channels)) ** 0.5
        self.weight = nn.Parameter(torch.randn(volume, in_channels, out_channels) * std)
        # nonzero bias init: keeps degenerate zero feature rows off ReLU kinks
        bound = (volume * in_channels) ** -0.5
        self.bias = (
            nn.Parameter(torch.empty(out_channels).uniform_(-bound, bound)) if bias else None
        )

    def forward(self, x: SparseTensor) -> SparseTensor:
        return sparse_conv(x, self)

    def extra_repr(self):
        return f"{self.in_channels}->{self.out_channels}, k={self.kernel_size}, stride={self.stride}"


def sparse_conv(x: SparseTensor, kernel: SparseConv) -> SparseTensor:
    """Convolve a sparse tensor with `kernel` (see SparseConv for semantics)."""
    if x.n_channels != kernel.in_channels:
        raise ValueError(
            f"kernel expects {kernel.in_channels} channels, input has {x.n_channels}"
        )
    out_stride = x.stride * kernel.stride
    if x.n_points == 0:
        empty = x.feats.new_zeros((0, kernel.out_channels))
        return SparseTensor(x.coords, empty, out_stride, _canonical=True)
    if kernel.stride == 1 and kernel.kernel_size == 1:
        feats = x.feats.to(kernel.weight.dtype) @ kernel.weight[0]
        if kernel.bias is not None:
            feats = feats + kernel.bias
        return x.with_feats(feats)
    out_coords, idx, found = _kernel_map(x, kernel)
    feats = _gather_accumulate(x.feats, idx, found, kernel.weight)
    if kernel.bias is not None:
        feats = feats + kernel.bias
    share = x._cache if kernel.stride == 1 else None
    return SparseTensor(out_coords, feats, out_stride, _canonical=True, _cache=share)


def _kernel_map(x: SparseTensor, kernel: SparseConv):
    """(out_coords, gather indices (V, M), found mask (V, M)), cached per coordinate set."""
    key = ("conv", kernel.kernel_size, kernel.stride)
    hit = x._cache.get(key)
    if hit is not None:
        return hit
    if kernel.stride == 1:
        out_coords = x.coords
    else:
        out_coords = _unique_sorted_coords(
            torch.div(x.coords, 2 * x.stride, rounding_mode="floor") * (2 * x.stride)
        )
    nb = out_coords.unsqueeze(0) + (kernel.offsets * x.stride).unsqueeze(1)  # (V, M, 3)
    v, m = nb.shape[0], nb.shape[1]
    idx, found = _lookup(x.keys(), coord_keys(nb.reshape(-1, 3)))
    entry = (out_coords, idx.reshape(v, m), found.reshape(v, m))
    x._cache[key] = entry
    return entry


def _gather_accumulate(feats: torch.Tensor, idx: torch.Tensor, found: torch.Tensor,
                       weight: torch.Tensor) -> torch.Tensor:
    # parameter dtype is authoritative (occupancy inputs may arrive as float32)
    v, m = idx.shape
    feats = feats.to(weight.dtype)
    gathered = feats[idx.reshape(-1)] * found.reshape(-1, 1).to(weight.dtype)
    out = torch.bmm(gathered.reshape(v, m, -1), weight)
    return out.sum(dim=0)


class SparseConvTranspose(nn.Module):
    """Stride-halving transposed sparse convolution with a {0,1}^3 window.

    Each parent site at stride s spawns the 8 child sites parent + o * (s/2),
    o in {0,1}^3; child features accumulate parent_feats @ weight[o]. The
    2^3 generative window makes the coordinate rule and the feature rule
    coincide, so the op matches a dense kernel-2 stride-2 transposed conv.
    """

    def __init__(self, in_channels: int, out_channels: int, bias: bool = True):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.register_buffer("offsets", _corner_offsets(), persistent=False)
        std = (2.0 / (8 * in_channels)) ** 0.5
        self.weight = nn.Parameter(torch.randn(8, in_channels, out_channels) * std)
        bound = (8 * in_channels) ** -0.5
        self.bias = (
            nn.Parameter(torch.empty(out_channels).uniform_(-bound, bound)) if bias else None
        )

    def forward(self, x: SparseTensor, target_stride: int | None = None) -> SparseTensor:
        return sparse_conv_transpose(x, self, target_stride)

    def extra_repr(self):
        return f"{self.in_channels}->{self.out_channels}, window=2"


def sparse_conv_transpose(x: SparseTensor, kernel: SparseConvTranspose,
                          target_stride: int | None = None) -> SparseTensor:
    """Upsample `x` from stride s to s/2, expanding each site into its 8 children."""
    if target_stride is None:
        target_stride = x.stride // 2
    if x.stride % 2 != 0 or target_stride * 2 != x.stride:
        raise ValueError(
            f"target_stride {target_stride} must be half of input stride {x.stride}"
        )
    if x.n_channels != kernel.in_channels:
        raise ValueError(
            f"kernel expects {kernel.in_channels} channels, input has {x.n_channels}"
        )
    if x.n_points == 0:
        empty = x.feats.new_zeros((0, kernel.out_channels))
        return SparseTensor(x.coords, empty, target_stride, _canonical=True)
    out_coords, rows = _transpose_map(x, kernel, target_stride)
    src = x.feats.to(kernel.weight.dtype)
    per_offset = torch.bmm(src.unsqueeze(0).expand(8, -1, -1), kernel.weight)  # (8, N, Cout)
    feats = src.new_zeros((out_coords.shape[0], kernel.out_channels))
    feats = feats.index_add(0, rows.reshape(-1), per_offset.reshape(-1, kernel.out_channels))
    if kernel.bias is not None:
        feats = feats + kernel.bias
    return SparseTensor(out_coords, feats, target_stride, _canonical=True)


def _transpose_map(x: SparseTensor, kernel: SparseConvTranspose, target_stride: int):
    """(out_coords, (8, N) target rows per offset), cached per coordinate set."""
    key = ("convT", target_stride)
    hit = x._cache.get(key)
    if hit is not None:
        return hit
    offsets = kernel.offsets * target_stride
    children = (x.coords.unsqueeze(1) + offsets.unsqueeze(0)).reshape(-1, 3)
    out_coords = _unique_sorted_coords(children)
    out_keys = coord_keys(out_coords)
    rows = torch.empty((8, x.n_points), dtype=torch.long)
    for o in range(8):
        r, found = _lookup(out_keys, coord_keys(x.coords + offsets[o]))
        assert bool(found.all())  # every child was inserted above
        rows[o] = r
    entry = (out_coords, rows)
    x._cache[key] = entry
    return entry


def prune(x: SparseTensor, keep: np.ndarray | torch.Tensor) -> SparseTensor:
    """Keep exactly the sites where `keep` is true, feature rows staying aligned."""
    mask = torch.as_tensor(np.asarray(keep) if not torch.is_tensor(keep) else keep)
    mask = mask.bool().reshape(-1)
    if mask.numel() != x.n_points:
        raise ValueError(f"mask length {mask.numel()} != {x.n_points} coordinates")
    return SparseTensor(x.coords[mask], x.feats[mask], x.stride, _canonical=True)


class InceptionResBlock(nn.Module):
    """Residual block with three parallel stride-1 conv branches.

    Branch widths split the channel count as (1/4, 1/4, rest): a 1x1x1 conv,
    a single kxkxk conv, and a stacked kxkxk -> ReLU -> kxkxk pair; the
    concatenated branches match the input width and add onto the residual path.
    """

    def __init__(self, channels: int, kernel_size: int = 3):
        super().__init__()
        if channels < 4:
            raise ValueError(f"needs >= 4 channels, got {channels}")
        c4 = channels // 4
        c2 = channels - 2 * c4
        self.channels = channels
        self.branch_1x1 = SparseConv(channels, c4, kernel_size=1)
        self.branch_3x3 = SparseConv(channels, c4, kernel_size=kernel_size)
        self.branch_stack_a = SparseConv(channels, c2, kernel_size=kernel_size)
        self.branch_stack_b = SparseConv(c2, c2, kernel_size=kernel_size)

    def forward(self, x: SparseTensor) -> SparseTensor:
        if x.n_channels != self.channels:
            raise ValueError(f"block expects {self.channels} channels, got {x.n_channels}")
        f0 = self.branch_1x1(x).feats
        f1 = self.branch_3x3(x).feats
        f2 = self.branch_stack_b(self.branch_stack_a(x).relu()).feats
        return x.with_feats(x.feats + torch.cat([f0, f1, f2], dim=1))


def irn_block(x: SparseTensor, block: InceptionResBlock) -> SparseTensor:
    return block(x)
