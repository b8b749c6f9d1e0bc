"""Geometry fidelity metrics and transmission bookkeeping.

D1 is point-to-point PSNR, D2 point-to-plane; both symmetrize by taking the
worse direction and use the 3 * peak^2 numerator so values line up with the
MPEG pc_error tool. Zero-error pairs report a 100 dB cap to keep plots finite.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

PSNR_CAP_DB = 100.0
DEFAULT_NORMAL_KNN = 9


def cbr(total_symbols: int, n_points: int) -> float:
    """Channel bandwidth ratio: symbols over the cloud's 3N coordinate scalars."""
    if n_points <= 0:
        raise ValueError("n_points must be positive")
    return total_symbols / (3.0 * n_points)


def _as_points(c) -> np.ndarray:
    from .sparse import SparseTensor

    if isinstance(c, SparseTensor):
        return c.coords_array().astype(np.float64)
    return np.asarray(c, dtype=np.float64).reshape(-1, 3)


def _psnr(err: float, peak: float) -> float:
    if err <= 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(3.0 * peak * peak / err), PSNR_CAP_DB)


def d1_psnr(a, b, peak: float) -> float:
    """Point-to-point PSNR; symmetric error is the worse of the two directions."""
    a, b = _as_points(a), _as_points(b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty cloud")
    d_ab = cKDTree(b).query(a)[0]
    d_ba = cKDTree(a).query(b)[0]
    err = max(float(np.mean(d_ab ** 2)), float(np.mean(d_ba ** 2)))
    return _psnr(err, peak)


def estimate_normals(cloud, k_nn: int = DEFAULT_NORMAL_KNN):
    """Per-point unit normal from the covariance of the k nearest neighbors.

    Signs are canonicalized toward the cloud centroid. Degenerate (collinear)
    neighborhoods fall back to (0, 0, 1) and are flagged in the returned mask.
    """
    pts = _as_points(cloud)
    if k_nn < 3:
        raise ValueError("k_nn must be >= 3")
    if len(pts) <= k_nn:
        raise ValueError(f"need more than {k_nn} points, got {len(pts)}")
    _, idx = cKDTree(pts).query(pts, k=k_nn + 1)
    nbrs = pts[idx]  # (n, k+1, 3), column 0 is the point itself
    centered = nbrs - nbrs.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / (k_nn + 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    normals = eigvecs[:, :, 0]  # smallest-eigenvalue direction
    degenerate = eigvals[:, 1] <= 1e-12 * np.maximum(eigvals[:, 2], 1e-30)
    normals[degenerate] = (0.0, 0.0, 1.0)
    normals /= np.maximum(np.linalg.norm(normals, axis=1, keepdims=True), 1e-30)
    toward = (pts.mean(axis=0) - pts) * normals
    flip = toward.sum(axis=1) < 0
    normals[flip] = -normals[flip]
    return normals, degenerate


def _plane_error(a: np.ndarray, b: np.ndarray, normals_b: np.ndarray) -> float:
    _, nn = cKDTree(b).query(a)
    diff = a - b[nn]
    proj = np.einsum("ij,ij->i", diff, normals_b[nn])
    return float(np.mean(proj ** 2))


def d2_psnr(a, b, normals_b=None, peak: float = 255.0, normals_a=None,
            k_nn: int = DEFAULT_NORMAL_KNN) -> float:
    """Point-to-plane PSNR, symmetrized by the worse direction.

    Normals are estimated when not supplied (each direction projects onto the
    reference cloud's normals).
    """
    a, b = _as_points(a), _as_points(b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty cloud")
    if normals_b is None:
        normals_b, _ = estimate_normals(b, k_nn)
    if normals_a is None:
        normals_a, _ = estimate_normals(a, k_nn)
    err = max(_plane_error(a, b, np.asarray(normals_b, dtype=np.float64)),
              _plane_error(b, a, np.asarray(normals_a, dtype=np.float64)))
    return _psnr(err, peak)


@dataclass
class TransmissionReport:
    """CBR breakdown plus quality numbers for one (or one averaged) transmission."""

    cbr_latent: float
    cbr_side: float
    d1_psnr_db: float
    d2_psnr_db: float
    n_points_in: int
    n_points_out: int
    snr_db: float
    channel_kind: str
    lambda_id: str = ""
    d1_std_db: float = 0.0
    d2_std_db: float = 0.0
    extra: dict = dataclasses.field(default_factory=dict)

    @property
    def cbr_total(self) -> float:
        return self.cbr_latent + self.cbr_side

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d["cbr_total"] = self.cbr_total
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "TransmissionReport":
        d = json.loads(line)
        d.pop("cbr_total", None)
        return cls(**d)


def write_reports(path, reports) -> None:
    """Line-delimited JSON records, one per report."""
    with open(path, "w", encoding="utf-8") as f:
        for r in reports:
            f.write(r.to_json() + "\n")


def read_reports(path) -> list[TransmissionReport]:
    with open(path, "r", encoding="utf-8") as f:
        return [TransmissionReport.from_json(line) for line in f if line.strip()]
