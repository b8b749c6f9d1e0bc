"""Classical separate source-channel coding reference.

Octree source coding of the geometry (optionally depth-truncated for lossy
rate points) followed by an idealized capacity-threshold channel code: decoding
is perfect at or above the configured SNR threshold and collapses below it --
the cliff effect, by construction. Rayleigh runs decide success per fading
block from the instantaneous effective SNR (outage model).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .metrics import TransmissionReport, cbr, d1_psnr, d2_psnr, DEFAULT_NORMAL_KNN
from .sideinfo import octree_decode, octree_encode
from .sparse import SparseTensor, ones_tensor

# (threshold dB, spectral efficiency bits/symbol); stand-in MCS menu
DEFAULT_AMC_TABLE = ((0.0, 0.5), (4.0, 1.0), (8.0, 2.0), (12.0, 3.0), (16.0, 4.0))

PROTECTED_PREFIX_LEVELS = 3


@dataclass
class SSCCConfig:
    """Chosen modulation-and-coding point plus the source-coding depth."""

    code_rate_bits_per_symbol: float
    threshold_snr_db: float
    octree_depth: int

    def __post_init__(self):
        if self.code_rate_bits_per_symbol <= 0:
            raise ValueError("code rate must be positive")
        if self.octree_depth < 1:
            raise ValueError("octree depth must be >= 1")


def amc_select(snr_db: float, table=DEFAULT_AMC_TABLE, margin_db: float = 2.0,
               octree_depth: int = 6) -> SSCCConfig:
    """Highest-rate entry whose threshold fits under snr - margin (most robust otherwise)."""
    entries = sorted(table)
    if not entries:
        raise ValueError("empty AMC table")
    eligible = [e for e in entries if e[0] <= snr_db - margin_db]
    threshold, rate = max(eligible, key=lambda e: e[1]) if eligible else entries[0]
    return SSCCConfig(rate, threshold, octree_depth)


def _truncate(coords: np.ndarray, bit_depth: int, octree_depth: int):
    shift = bit_depth - octree_depth
    if shift < 0:
        raise ValueError(f"octree depth {octree_depth} exceeds bit depth {bit_depth}")
    return np.unique(coords >> shift, axis=0), shift


def _cells_to_points(cells: np.ndarray, shift: int) -> np.ndarray:
    # cell centers back at full resolution
    return (cells << shift) + (((1 << shift) >> 1) if shift > 0 else 0)


def sscc_transmit(cloud: SparseTensor, cfg: SSCCConfig, ch: ChannelRealization,
                  bit_depth: int, compute_d2: bool = True):
    """Source-code, threshold-decode, reconstruct; failure is an in-band outcome.

    Returns (reconstruction SparseTensor, TransmissionReport); the report's
    extra fields carry success/failure and the failure mode.
    """
    coords = cloud.coords_array()
    cells, shift = _truncate(coords, bit_depth, cfg.octree_depth)
    bits = 8 * len(octree_encode(cells, cfg.octree_depth))
    symbols = int(np.ceil(bits / cfg.code_rate_bits_per_symbol))

    gamma = 10.0 ** (ch.snr_db / 10.0)
    if ch.kind == "rayleigh" and ch.h.size:
        eff_snr_db = 10.0 * np.log10(np.abs(ch.h) ** 2 * gamma)
        success = bool(np.min(eff_snr_db) >= cfg.threshold_snr_db)
    else:
        success = bool(ch.snr_db >= cfg.threshold_snr_db)

    if success:
        decoded = octree_decode(octree_encode(cells, cfg.octree_depth), cfg.octree_depth)
        points = _cells_to_points(decoded, shift)
        failure_mode = ""
    else:
        # prefix-protection assumption: the strongest MCS shields the first levels
        prefix_depth = min(PROTECTED_PREFIX_LEVELS, cfg.octree_depth)
        if ch.snr_db >= DEFAULT_AMC_TABLE[0][0]:
            prefix_cells, prefix_shift = _truncate(coords, bit_depth, prefix_depth)
            points = _cells_to_points(prefix_cells, prefix_shift)
            failure_mode = f"decoded {prefix_depth}-level prefix only"
        else:
            points = np.round(coords.mean(axis=0, keepdims=True)).astype(np.int64)
            failure_mode = "no decodable prefix"

    recon = ones_tensor(points)
    peak = float((1 << bit_depth) - 1)
    d1 = d1_psnr(recon, cloud, peak)
    if compute_d2 and min(recon.n_points, cloud.n_points) > DEFAULT_NORMAL_KNN:
        d2 = d2_psnr(recon, cloud, peak=peak)
    else:
        d2 = d1
    report = TransmissionReport(
        cbr_latent=cbr(symbols, cloud.n_points),
        cbr_side=0.0,
        d1_psnr_db=d1,
        d2_psnr_db=d2,
        n_points_in=cloud.n_points,
        n_points_out=recon.n_points,
        snr_db=ch.snr_db,
        channel_kind=ch.kind,
        lambda_id="sscc",
        extra={
            "success": success,
            "failure_mode": failure_mode,
            "source_bits": bits,
            "symbols": symbols,
            "octree_depth": cfg.octree_depth,
            "code_rate": cfg.code_rate_bits_per_symbol,
            "threshold_snr_db": cfg.threshold_snr_db,
        },
    )
    return recon, report
