"""End-to-end rate-distortion training with channel noise in the loop.

Each step: sample clouds and an SNR from the training range, run the chain
encode -> uniform-noise quantization -> likelihood/allocation -> JSCC encode ->
channel (reparameterized noise) -> equalize -> JSCC decode -> teacher-forced
multiscale decode, then minimize K + lambda * D where K is the continuous
bandwidth surrogate sum(-eta * log2 P) and D the multiscale occupancy BCE.
The discrete klist assignment is a straight-through choice: recomputed from
the current likelihoods every step, constant within the step.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .channel import equalize_pairs, make_realization, transmit_pairs
from .checkpoint import load_checkpoint, save_checkpoint
from .entropy import RateAllocation, quantize_budget
from .metrics import TransmissionReport
from .pipeline import ModelConfig, PCSTModel, complex_block_lengths, transmit_cloud
from .sparse import SparseTensor

log = logging.getLogger(__name__)

_SEED_RANGE = 2**31 - 1


@dataclass
class LossConfig:
    """Training knobs; `lmbda` is the distortion weight in K + lambda * D."""

    lmbda: float = 1.0
    eta: float = 0.25
    snr_range_db: tuple = (4.0, 14.0)
    channel_kind: str = "awgn"
    batch_size: int = 4
    steps: int = 800
    learning_rate: float = 1e-3
    seed: int = 7
    checkpoint_interval: int = 200
    plateau_patience: int = 3
    plateau_window: int = 50

    def __post_init__(self):
        if self.lmbda <= 0:
            raise ValueError(f"lambda must be positive, got {self.lmbda}")
        lo, hi = self.snr_range_db
        if lo > hi:
            raise ValueError(f"snr range low {lo} > high {hi}")
        self.snr_range_db = (float(lo), float(hi))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LossConfig":
        d = dict(d)
        if "lambda" in d:
            d["lmbda"] = d.pop("lambda")
        known = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def bce_distortion(truth, probs) -> torch.Tensor:
    """Mean binary cross-entropy over candidate voxels (natural log, clamped probs)."""
    truth = truth if torch.is_tensor(truth) else torch.as_tensor(np.asarray(truth, dtype=np.float64))
    probs = probs if torch.is_tensor(probs) else torch.as_tensor(np.asarray(probs, dtype=np.float64))
    if truth.shape != probs.shape:
        raise ValueError(f"shape mismatch: {tuple(truth.shape)} vs {tuple(probs.shape)}")
    p = probs.clamp(1e-7, 1 - 1e-7)
    t = truth.to(p.dtype)
    return -(t * p.log() + (1 - t) * (1 - p).log()).mean()


def rd_loss(rate_bits, distortion, lmbda: float) -> torch.Tensor:
    """K + lambda * D with the continuous (pre-quantization) rate surrogate."""
    rate_bits = rate_bits if torch.is_tensor(rate_bits) else torch.as_tensor(float(rate_bits))
    distortion = distortion if torch.is_tensor(distortion) else torch.as_tensor(float(distortion))
    if not (torch.isfinite(rate_bits) and torch.isfinite(distortion)):
        raise ValueError("non-finite loss component")
    return rate_bits + lmbda * distortion


@dataclass
class FixedStepInputs:
    """Frozen randomness for one step: used by the finite-difference harness."""

    q_noise: torch.Tensor
    alloc: RateAllocation
    channel: object


def training_loss(model: PCSTModel, x: SparseTensor, lmbda: float,
                  snr_db: float = 10.0, kind: str = "awgn",
                  generator: torch.Generator | None = None,
                  fixed: FixedStepInputs | None = None):
    """One cloud's rate-distortion loss with gradients through the whole chain."""
    cfg = model.cfg
    latent, counts, targets = model.encoder(x)
    if fixed is not None:
        q_noise = fixed.q_noise
    else:
        q_noise = torch.rand(latent.feats.shape, generator=generator,
                             dtype=latent.feats.dtype) - 0.5
    f_tilde = latent.feats + q_noise

    p_chan = model.density.channel_likelihood(f_tilde)
    rate_bits = -(cfg.eta * torch.log2(p_chan)).sum()

    if fixed is not None:
        alloc, ch = fixed.alloc, fixed.channel
    else:
        with torch.no_grad():
            k_real = -cfg.eta * torch.log2(p_chan.prod(dim=1)).cpu().numpy()
        alloc = RateAllocation(quantize_budget(k_real, cfg.klist), cfg.eta, cfg.klist)
        seed = int(torch.randint(0, _SEED_RANGE, (1,), generator=generator))
        blocks = complex_block_lengths(alloc.k)
        n_complex = int(blocks.sum() if len(blocks) else 0)
        ch = make_realization(kind, snr_db, n_complex, seed,
                              block_lengths=blocks if kind == "rayleigh" else None)

    sym = model.jscc_enc(latent.with_feats(f_tilde), alloc)
    rx = equalize_pairs(transmit_pairs(sym.pairs, ch), ch)
    f_hat = model.jscc_dec(sym.with_pairs(rx), latent.coords, alloc, latent.stride)

    supervision, _ = model.decoder.training_forward(f_hat, targets)
    logits = torch.cat([s[0] for s in supervision])
    labels = torch.cat([s[1] for s in supervision]).to(logits.dtype)
    distortion = bce_distortion(labels, torch.sigmoid(logits))

    loss = rd_loss(rate_bits, distortion, lmbda)
    parts = {
        "rate_bits": float(rate_bits.detach()),
        "distortion": float(distortion.detach()),
        "bandwidth_symbols": alloc.total(),
    }
    return loss, parts


def _state_for_checkpoint(model: PCSTModel) -> dict:
    return {k: v.detach().clone() for k, v in model.state_dict().items()}


def train_model(cfg: LossConfig, dataset, model_cfg: ModelConfig | None = None,
                out_dir=None, log_every: int = 50):
    """Adam training over voxelized clouds; deterministic given cfg.seed.

    Returns (model, history) and, when out_dir is given, writes numbered
    checkpoints plus a final one and a loss-history CSV.
    """
    dataset = list(dataset)
    if not dataset:
        raise ValueError("empty dataset")
    # single-threaded math: multi-thread CPU reductions are not bitwise
    # reproducible run-to-run (and are slower at these op sizes anyway)
    prev_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        return _train_model(cfg, dataset, model_cfg, out_dir, log_every)
    finally:
        torch.set_num_threads(prev_threads)


def _train_model(cfg: LossConfig, dataset, model_cfg, out_dir, log_every):
    torch.manual_seed(cfg.seed)
    model_cfg = model_cfg or ModelConfig()
    model_cfg.eta = cfg.eta
    model = PCSTModel(model_cfg)
    gen = torch.Generator().manual_seed(cfg.seed + 1)
    rng = random.Random(cfg.seed + 2)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    history = []
    window, best_window, stalls, halvings = [], math.inf, 0, 0
    good_state = _state_for_checkpoint(model)
    diverged = False

    for step in range(cfg.steps):
        batch = [dataset[rng.randrange(len(dataset))] for _ in range(cfg.batch_size)]
        snr = rng.uniform(*cfg.snr_range_db)
        opt.zero_grad()
        losses, rates, dists = [], [], []
        for x in batch:
            loss, parts = training_loss(model, x, cfg.lmbda, snr, cfg.channel_kind, gen)
            losses.append(loss)
            rates.append(parts["rate_bits"])
            dists.append(parts["distortion"])
        total = torch.stack(losses).mean()
        if not torch.isfinite(total):
            log.warning("loss diverged at step %d; keeping last good checkpoint", step)
            diverged = True
            model.load_state_dict(good_state)
            break
        total.backward()
        opt.step()

        value = float(total.detach())
        history.append({
            "step": step, "loss": value,
            "rate_bits": float(np.mean(rates)), "distortion": float(np.mean(dists)),
            "snr_db": snr, "lr": opt.param_groups[0]["lr"],
        })
        window.append(value)
        if len(window) >= cfg.plateau_window:
            mean = float(np.mean(window))
            window.clear()
            if mean < best_window - 1e-6:
                best_window = mean
                stalls = 0
            else:
                stalls += 1
                if stalls >= cfg.plateau_patience and halvings < 2:
                    halvings += 1
                    stalls = 0
                    for group in opt.param_groups:
                        group["lr"] *= 0.5
                    log.info("halved learning rate to %g", opt.param_groups[0]["lr"])

        if log_every and (step + 1) % log_every == 0:
            log.info("step %d  loss %.3f  rate %.1f bits  D %.4f",
                     step + 1, value, history[-1]["rate_bits"], history[-1]["distortion"])
        good_state = _state_for_checkpoint(model)
        if out_dir is not None and cfg.checkpoint_interval and \
                (step + 1) % cfg.checkpoint_interval == 0:
            _write_checkpoint(out_dir / f"ckpt_{step + 1:06d}.pcst", model, cfg, step + 1, diverged)

    if out_dir is not None:
        _write_checkpoint(out_dir / "ckpt_final.pcst", model, cfg, len(history), diverged)
        _write_history_csv(out_dir / "loss_history.csv", history)
    meta = {"steps_run": len(history), "diverged": diverged, "train_config": cfg.to_dict()}
    return model, history, meta


def _write_checkpoint(path, model: PCSTModel, cfg: LossConfig, step: int, diverged: bool):
    save_checkpoint(
        path,
        model.state_dict(),
        model.cfg.to_dict(),
        meta={"step": step, "diverged": diverged, "train_config": cfg.to_dict()},
    )


def _write_history_csv(path, history):
    with open(path, "w", encoding="utf-8") as f:
        f.write("step,loss,rate_bits,distortion,snr_db,lr\n")
        for h in history:
            f.write(f"{h['step']},{h['loss']:.6f},{h['rate_bits']:.3f},"
                    f"{h['distortion']:.6f},{h['snr_db']:.3f},{h['lr']:.2e}\n")


def load_model(path) -> tuple[PCSTModel, dict]:
    """Rebuild a PCSTModel from a PCSTCKPT/1 file."""
    state, model_cfg, meta = load_checkpoint(path)
    model = PCSTModel(ModelConfig.from_dict(model_cfg))
    model.load_state_dict(state)
    model.eval()
    return model, meta


def evaluate(model: PCSTModel, clouds, snr_db: float, channel_kind: str,
             n_trials: int = 1, seed: int = 0, lambda_id: str = "",
             compute_d2: bool = True) -> list[TransmissionReport]:
    """Mean/std report per cloud over n_trials independent channel realizations."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    reports = []
    for ci, x in enumerate(clouds):
        d1s, d2s, per_trial = [], [], []
        for t in range(n_trials):
            _, rep = transmit_cloud(model, x, snr_db, channel_kind,
                                    seed=seed + 1009 * ci + t, compute_d2=compute_d2)
            d1s.append(rep.d1_psnr_db)
            d2s.append(rep.d2_psnr_db)
            per_trial.append(rep)
        base = per_trial[0]
        reports.append(TransmissionReport(
            cbr_latent=base.cbr_latent,
            cbr_side=base.cbr_side,
            d1_psnr_db=float(np.mean(d1s)),
            d2_psnr_db=float(np.mean(d2s)),
            d1_std_db=float(np.std(d1s)),
            d2_std_db=float(np.std(d2s)),
            n_points_in=base.n_points_in,
            n_points_out=base.n_points_out,
            snr_db=snr_db,
            channel_kind=channel_kind,
            lambda_id=lambda_id,
            extra={"n_trials": n_trials, "cloud_index": ci, **base.extra},
        ))
    return reports
