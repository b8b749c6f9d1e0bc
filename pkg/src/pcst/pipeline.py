"""Full transmission chain wiring the codec, entropy model, JSCC and channel."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .channel import equalize_pairs, make_realization, transmit_pairs
from .entropy import (
    DEFAULT_KLIST,
    FactorizedDensity,
    RateAllocation,
    quantize_budget,
    symbol_budget,
)
from .jscc import JSCCDecoder, JSCCEncoder
from .metrics import DEFAULT_NORMAL_KNN, TransmissionReport, cbr, d1_psnr, d2_psnr
from .multires import MultiResDecoder, MultiResEncoder, ScalePointCounts
from .sideinfo import account_side_bits, build_payload
from .sparse import SparseTensor


@dataclass
class ModelConfig:
    """Architecture and rate knobs shared by training and evaluation."""

    bit_depth: int = 6
    d_y: int = 8
    d_e: int = 4
    enc_channels: tuple = (16, 32, 64)
    dec_channels: tuple = (64, 32, 16)
    klist: tuple = DEFAULT_KLIST
    eta: float = 0.25
    kernel_size: int = 3
    irn_per_stage: int = 2
    decode_mode: str = "topk"

    def __post_init__(self):
        self.enc_channels = tuple(self.enc_channels)
        self.dec_channels = tuple(self.dec_channels)
        self.klist = tuple(sorted(self.klist))

    @property
    def peak(self) -> float:
        return float((1 << self.bit_depth) - 1)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class PCSTModel(nn.Module):
    """Encoder, factorized density, switchable JSCC codec and mirrored decoder."""

    LATENT_STRIDE = 8

    def __init__(self, cfg: ModelConfig | None = None):
        super().__init__()
        self.cfg = cfg or ModelConfig()
        c = self.cfg
        self.encoder = MultiResEncoder(c.enc_channels, c.d_y, c.kernel_size, c.irn_per_stage)
        self.decoder = MultiResDecoder(c.d_y, c.dec_channels, c.kernel_size, c.irn_per_stage)
        self.density = FactorizedDensity(c.d_y)
        self.jscc_enc = JSCCEncoder(c.d_y, c.d_e, c.klist, c.kernel_size)
        self.jscc_dec = JSCCDecoder(c.d_y, c.d_e, c.klist, c.kernel_size)

    def allocate(self, f_tilde: torch.Tensor) -> RateAllocation:
        """Quantized per-coordinate symbol lengths from the current density."""
        with torch.no_grad():
            p = self.density.channel_likelihood(f_tilde).prod(dim=1)
            k_real = symbol_budget(p, self.cfg.eta).cpu().numpy()
        return RateAllocation(quantize_budget(k_real, self.cfg.klist), self.cfg.eta, self.cfg.klist)


def complex_block_lengths(lengths: np.ndarray) -> np.ndarray:
    """Complex-symbol count per coordinate block after pairing the concatenated reals.

    A symbol straddling two coordinates is attributed to the one owning its
    first real component.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    total = int(lengths.sum())
    n_complex = (total + 1) // 2
    if n_complex == 0:
        return np.zeros(0, dtype=np.int64)
    first_real = np.arange(n_complex) * 2
    bounds = np.cumsum(lengths)
    owner = np.searchsorted(bounds, first_real, side="right")
    return np.bincount(owner, minlength=len(lengths))


def transmit_cloud(model: PCSTModel, x: SparseTensor, snr_db: float, kind: str,
                   seed: int, margin_db: float = 2.0, compute_d2: bool = True,
                   alloc_override: RateAllocation | None = None):
    """Run one eval-mode transmission; returns (reconstruction, TransmissionReport).

    CBR accounting: the latent numerator is the quantized bandwidth K = sum(k_i)
    (the symbol count entering the bandwidth cost), the side-info numerator is
    the capacity-model channel uses for the three lossless streams.
    `alloc_override` pins the per-coordinate lengths (equal-budget comparisons).
    """
    cfg = model.cfg
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            latent, counts, _ = model.encoder(x)
            f_tilde = torch.round(latent.feats)
            y_tilde = latent.with_feats(f_tilde)
            alloc = alloc_override if alloc_override is not None else model.allocate(f_tilde)
            if len(alloc.k) != latent.n_points:
                raise ValueError("allocation override does not cover the latent coordinates")
            sym = model.jscc_enc(y_tilde, alloc)

            payload = build_payload(
                latent.coords_array(), latent.stride, cfg.bit_depth,
                alloc.indices, list(counts), len(cfg.klist),
            )
            blocks = complex_block_lengths(alloc.k)
            ch = make_realization(kind, snr_db, sym.n_complex, seed,
                                  block_lengths=blocks if kind == "rayleigh" else None)
            side_symbols = account_side_bits(payload, ch, margin_db)

            rx = equalize_pairs(transmit_pairs(sym.pairs, ch), ch)
            f_hat = model.jscc_dec(sym.with_pairs(rx), latent.coords, alloc, latent.stride)
            recon = model.decoder(f_hat, counts, mode=cfg.decode_mode)
    finally:
        model.train(was_training)

    n = counts.original
    d1 = d1_psnr(recon, x, cfg.peak)
    if compute_d2 and min(recon.n_points, x.n_points) > DEFAULT_NORMAL_KNN:
        d2 = d2_psnr(recon, x, peak=cfg.peak)
    else:
        d2 = d1
    report = TransmissionReport(
        cbr_latent=cbr(alloc.total(), n),
        cbr_side=cbr(side_symbols, n),
        d1_psnr_db=d1,
        d2_psnr_db=d2,
        n_points_in=x.n_points,
        n_points_out=recon.n_points,
        snr_db=snr_db,
        channel_kind=kind,
        extra={
            "seed": seed,
            "latent_coords": latent.n_points,
            "bandwidth_symbols": alloc.total(),
            "complex_symbols": sym.n_complex,
            "side_symbols": side_symbols,
            "side_bits_coord": payload.coord_bit_count,
            "side_bits_klen": payload.klen_bit_count,
            "side_bits_count": payload.count_bit_count,
        },
    )
    return recon, report
