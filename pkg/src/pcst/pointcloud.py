"""Point cloud ingest, voxelization and synthetic shape generation.

PLY support covers ASCII and binary-little-endian files with x/y/z vertex
properties (float32 or float64); every other element and property is ignored.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sparse import SparseTensor, ones_tensor


@dataclass
class PointCloud:
    """Raw positions plus the per-axis precision they are (to be) quantized at."""

    points: np.ndarray  # (N, 3) float64
    bit_depth: int = 0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)

    def __len__(self):
        return self.points.shape[0]

    def scaled(self, factor: float) -> "PointCloud":
        return PointCloud(self.points * factor, self.bit_depth)


_PLY_TYPES = {
    "float": ("f", 4), "float32": ("f", 4),
    "double": ("d", 8), "float64": ("d", 8),
    "char": ("b", 1), "int8": ("b", 1),
    "uchar": ("B", 1), "uint8": ("B", 1),
    "short": ("h", 2), "int16": ("h", 2),
    "ushort": ("H", 2), "uint16": ("H", 2),
    "int": ("i", 4), "int32": ("i", 4),
    "uint": ("I", 4), "uint32": ("I", 4),
}


def load_ply(path) -> PointCloud:
    """Read vertex positions from an ASCII or binary-little-endian PLY file."""
    path = Path(path)
    with open(path, "rb") as f:
        raw = f.read()
    end = raw.find(b"end_header")
    if not raw.startswith(b"ply") or end < 0:
        raise ValueError(f"{path}: malformed PLY header")
    header_end = raw.index(b"\n", end) + 1
    header = raw[:header_end].decode("ascii", errors="replace").splitlines()

    fmt = None
    elements = []  # (name, count, [(prop_name, type_code, size)])
    for line in header[1:]:
        tok = line.strip().split()
        if not tok:
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise ValueError(f"{path}: property before element")
            if tok[1] == "list":
                raise ValueError(f"{path}: list properties are not supported")
            if tok[1] not in _PLY_TYPES:
                raise ValueError(f"{path}: unsupported property type {tok[1]}")
            code, size = _PLY_TYPES[tok[1]]
            elements[-1][2].append((tok[2], code, size))
    if fmt not in ("ascii", "binary_little_endian"):
        raise ValueError(f"{path}: unsupported format {fmt!r}")

    vertex = next((e for e in elements if e[0] == "vertex"), None)
    if vertex is None:
        raise ValueError(f"{path}: no vertex element")
    names = [p[0] for p in vertex[2]]
    if not {"x", "y", "z"} <= set(names):
        raise ValueError(f"{path}: vertex element missing x/y/z")
    xyz_cols = [names.index(a) for a in ("x", "y", "z")]

    body = raw[header_end:]
    count = vertex[1]
    if fmt == "ascii":
        rows = body.decode("ascii").split("\n")
        vals = []
        taken = 0
        for row in rows:
            if taken >= count:
                break
            row = row.strip()
            if not row:
                continue
            parts = row.split()
            vals.append([float(parts[c]) for c in xyz_cols])
            taken += 1
        if taken < count:
            raise ValueError(f"{path}: expected {count} vertices, found {taken}")
        pts = np.asarray(vals, dtype=np.float64).reshape(-1, 3)
    else:
        if elements[0][0] != "vertex":
            raise ValueError(f"{path}: binary reader expects vertex element first")
        np_codes = {"f": "<f4", "d": "<f8", "b": "i1", "B": "u1",
                    "h": "<i2", "H": "<u2", "i": "<i4", "I": "<u4"}
        dtype = np.dtype([(f"f{j}", np_codes[p[1]]) for j, p in enumerate(vertex[2])])
        if len(body) < dtype.itemsize * count:
            raise ValueError(f"{path}: truncated vertex data")
        arr = np.frombuffer(body[: dtype.itemsize * count], dtype=dtype)
        pts = np.stack([arr[f"f{c}"] for c in xyz_cols], axis=1).astype(np.float64)
    return PointCloud(pts)


def write_ply(path, cloud, binary: bool = False) -> None:
    """Write x/y/z positions; accepts a PointCloud, an (N, 3) array or a SparseTensor."""
    if isinstance(cloud, SparseTensor):
        pts = cloud.coords_array().astype(np.float64)
    elif isinstance(cloud, PointCloud):
        pts = cloud.points
    else:
        pts = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    path = Path(path)
    ptype = "double" if binary else "float"
    header = (
        "ply\n"
        f"format {'binary_little_endian' if binary else 'ascii'} 1.0\n"
        f"element vertex {len(pts)}\n"
        f"property {ptype} x\nproperty {ptype} y\nproperty {ptype} z\n"
        "end_header\n"
    )
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        if binary:
            f.write(pts.astype("<f8").tobytes())
        else:
            for p in pts:
                f.write(f"{p[0]:g} {p[1]:g} {p[2]:g}\n".encode("ascii"))


def voxelize(cloud: PointCloud, bit_depth: int) -> SparseTensor:
    """Quantize a cloud onto the [0, 2^bit_depth - 1] integer lattice.

    The min corner shifts to the origin; a single global factor downscales
    clouds whose extent exceeds the lattice (aspect ratio preserved, never
    upscaled, so already-voxelized clouds pass through unchanged). Duplicate
    cells collapse to the first occurrence; features are all-ones occupancy.
    """
    if not 3 <= bit_depth <= 10:
        raise ValueError(f"bit_depth must be in [3, 10], got {bit_depth}")
    if len(cloud) == 0:
        raise ValueError("cannot voxelize an empty cloud")
    peak = (1 << bit_depth) - 1
    pts = cloud.points - cloud.points.min(axis=0)
    extent = pts.max() if pts.size else 0.0
    if extent > peak:
        pts = pts * (peak / extent)
    q = np.rint(pts).astype(np.int64)
    np.clip(q, 0, peak, out=q)
    _, first = np.unique(q, axis=0, return_index=True)
    q = q[np.sort(first)]
    return ones_tensor(q, stride=1)


def _rotation_matrix(rng: np.random.Generator) -> np.ndarray:
    # uniform random rotation via QR of a Gaussian matrix
    m = rng.standard_normal((3, 3))
    q, r = np.linalg.qr(m)
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def synth_shape(kind: str, n_points: int, seed: int,
                extent: float = 1.0, rotate: bool = True) -> PointCloud:
    """Sample a synthetic surface: sphere, torus, box or a composite of the three.

    Deterministic given the seed. `extent` scales the shape's bounding size;
    `rotate` applies a random rotation (off for analytic surface checks).
    """
    if n_points < 1:
        raise ValueError(f"n_points must be >= 1, got {n_points}")
    rng = np.random.default_rng(seed)
    if kind == "sphere":
        pts = _sphere(rng, n_points, radius=0.5 * extent)
    elif kind == "torus":
        pts = _torus(rng, n_points, major=0.35 * extent, minor=0.15 * extent)
    elif kind == "box":
        pts = _box(rng, n_points, half=0.5 * extent)
    elif kind == "composite":
        n1 = n_points // 2
        n2 = (n_points - n1) // 2
        n3 = n_points - n1 - n2
        parts = [_sphere(rng, max(n1, 1), radius=0.3 * extent)]
        if n2 > 0:
            parts.append(_torus(rng, n2, major=0.38 * extent, minor=0.1 * extent))
        if n3 > 0:
            parts.append(_box(rng, n3, half=0.2 * extent) + 0.25 * extent)
        pts = np.concatenate(parts, axis=0)[:n_points]
    else:
        raise ValueError(f"unknown shape kind {kind!r}")
    if rotate:
        pts = pts @ _rotation_matrix(rng).T
    return PointCloud(pts)


def _sphere(rng, n, radius):
    v = rng.standard_normal((n, 3))
    v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-30)
    return v * radius


def _torus(rng, n, major, minor):
    u = rng.uniform(0, 2 * math.pi, n)
    v = rng.uniform(0, 2 * math.pi, n)
    x = (major + minor * np.cos(v)) * np.cos(u)
    y = (major + minor * np.cos(v)) * np.sin(u)
    z = minor * np.sin(v)
    return np.stack([x, y, z], axis=1)


def _box(rng, n, half):
    # pick a face uniformly by area (cube: all equal), then a point on it
    face = rng.integers(0, 6, n)
    uv = rng.uniform(-half, half, (n, 2))
    pts = np.empty((n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, -half, half)
    for a in range(3):
        m = axis == a
        others = [i for i in range(3) if i != a]
        pts[m, a] = sign[m]
        pts[m, others[0]] = uv[m, 0]
        pts[m, others[1]] = uv[m, 1]
    return pts


def split_dataset(items, train_fraction: float, seed: int):
    """Disjoint, exhaustive train/validation split after a seeded shuffle."""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    items = list(items)
    if not items:
        raise ValueError("empty dataset")
    order = np.random.default_rng(seed).permutation(len(items))
    # epsilon guards float fuzz so e.g. 0.8 * 10 still ceils to exactly 8
    n_train = min(len(items), math.ceil(train_fraction * len(items) - 1e-9))
    train = [items[i] for i in order[:n_train]]
    val = [items[i] for i in order[n_train:]]
    return train, val
