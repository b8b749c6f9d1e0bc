"""Command-line entry points: dataset prep, training, transmission, sweeps, plots.

Cloud paths resolve against $PCST_DATA_DIR when set. Config files are flat JSON
objects whose keys mirror LossConfig/ModelConfig fields (see README).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .baseline import DEFAULT_AMC_TABLE, amc_select, sscc_transmit
from .channel import make_realization
from .metrics import read_reports, write_reports
from .pipeline import ModelConfig, transmit_cloud
from .plots import plot_psnr_vs_snr, plot_rd_curve
from .pointcloud import load_ply, split_dataset, synth_shape, voxelize, write_ply
from .train import LossConfig, evaluate, load_model, train_model

DEFAULT_SHAPES = ("sphere", "torus", "box", "composite")


def _data_dir() -> Path:
    return Path(os.environ.get("PCST_DATA_DIR", "."))


def _resolve(path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() or p.exists() else _data_dir() / p


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _load_cloud(path: str, bit_depth: int):
    return voxelize(load_ply(_resolve(path)), bit_depth)


def _snr_grid(spec: str):
    if ":" in spec:
        lo, hi, step = (float(v) for v in spec.split(":"))
        return [float(v) for v in np.arange(lo, hi + 1e-9, step)]
    return [float(v) for v in spec.split(",")]


def cmd_prep(args) -> int:
    cfg = _load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_shapes = int(cfg.get("n_shapes", 24))
    n_points = int(cfg.get("n_points", 4096))
    bit_depth = int(cfg.get("bit_depth", 6))
    extent = float((1 << bit_depth) - 1)
    paths = []
    for i in range(n_shapes):
        kind = DEFAULT_SHAPES[i % len(DEFAULT_SHAPES)]
        cloud = synth_shape(kind, n_points, seed=args.seed + i, extent=extent)
        path = out / f"{kind}_{i:03d}.ply"
        write_ply(path, cloud, binary=True)
        paths.append(str(path))
    train, val = split_dataset(paths, float(cfg.get("train_fraction", 0.8)), args.seed)
    (out / "manifest_train.txt").write_text("\n".join(train) + "\n", encoding="utf-8")
    (out / "manifest_val.txt").write_text("\n".join(val) + "\n", encoding="utf-8")
    print(f"wrote {len(train)} train / {len(val)} val clouds to {out}")
    return 0


def cmd_train(args) -> int:
    raw = _load_config(args.config)
    cfg = LossConfig.from_dict(raw)
    if args.seed is not None:
        cfg.seed = args.seed
    model_keys = {"bit_depth", "d_y", "d_e", "enc_channels", "dec_channels",
                  "klist", "kernel_size", "irn_per_stage", "decode_mode"}
    model_cfg = ModelConfig.from_dict({k: raw[k] for k in model_keys if k in raw})
    manifest = raw.get("manifest")
    if manifest:
        lines = Path(_resolve(manifest)).read_text(encoding="utf-8").splitlines()
        clouds = [_load_cloud(line.strip(), model_cfg.bit_depth) for line in lines if line.strip()]
    else:
        extent = model_cfg.peak
        clouds = [
            voxelize(synth_shape(DEFAULT_SHAPES[i % 4], int(raw.get("n_points", 2048)),
                                 seed=cfg.seed + i, extent=extent), model_cfg.bit_depth)
            for i in range(int(raw.get("n_shapes", 16)))
        ]
    out = Path(args.out)
    _, history, meta = train_model(cfg, clouds, model_cfg, out_dir=out)
    print(f"trained {meta['steps_run']} steps; final loss "
          f"{history[-1]['loss']:.3f}; checkpoint at {out / 'ckpt_final.pcst'}")
    return 0


def cmd_transmit(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        print(f"error: checkpoint not found: {ckpt}", file=sys.stderr)
        return 2
    model, _ = load_model(ckpt)
    cloud = _load_cloud(args.cloud, model.cfg.bit_depth)
    recon, report = transmit_cloud(model, cloud, args.snr_db, args.channel, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ply(out / "reconstruction.ply", recon)
    write_reports(out / "report.jsonl", [report])
    print(f"CBR={report.cbr_total:.5f} (latent {report.cbr_latent:.5f}, "
          f"side {report.cbr_side:.5f})  D1={report.d1_psnr_db:.2f} dB  "
          f"D2={report.d2_psnr_db:.2f} dB")
    return 0


def cmd_sweep(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snrs = _snr_grid(args.snr_db)
    if not snrs:
        print("error: empty SNR grid", file=sys.stderr)
        return 2
    clouds = []
    bit_depth = None
    reports = []
    for ck in args.checkpoints:
        path = Path(ck)
        if not path.exists():
            print(f"error: checkpoint not found: {path}", file=sys.stderr)
            return 2
        model, meta = load_model(path)
        if bit_depth is None:
            bit_depth = model.cfg.bit_depth
            clouds = [_load_cloud(c, bit_depth) for c in args.clouds]
        label = meta.get("train_config", {}).get("lmbda", path.stem)
        for snr in snrs:
            reports.extend(
                evaluate(model, clouds, snr, args.channel, n_trials=args.trials,
                         seed=args.seed, lambda_id=f"lambda={label}")
            )
    baseline_reports = []
    if args.baseline:
        for snr in snrs:
            cfg = amc_select(args.baseline_design_snr if args.baseline_design_snr is not None
                             else snrs[-1], DEFAULT_AMC_TABLE, octree_depth=bit_depth)
            for ci, cloud in enumerate(clouds):
                ch = make_realization(args.channel, snr, 1024, seed=args.seed + ci)
                _, rep = sscc_transmit(cloud, cfg, ch, bit_depth)
                baseline_reports.append(rep)
    write_reports(out / "sweep.jsonl", reports + baseline_reports)
    if len(snrs) == 1:
        plot_rd_curve(reports, out / "rd_curve", baseline_reports=baseline_reports or None)
    else:
        plot_psnr_vs_snr(reports, out / "psnr_vs_snr", baseline_reports=baseline_reports or None)
    print(f"wrote {len(reports) + len(baseline_reports)} records to {out / 'sweep.jsonl'}")
    return 0


def cmd_baseline(args) -> int:
    bit_depth = args.bit_depth
    cloud = _load_cloud(args.cloud, bit_depth)
    cfg = amc_select(args.design_snr_db if args.design_snr_db is not None else args.snr_db,
                     DEFAULT_AMC_TABLE, octree_depth=args.depth or bit_depth)
    ch = make_realization(args.channel, args.snr_db, 1024, seed=args.seed)
    recon, report = sscc_transmit(cloud, cfg, ch, bit_depth)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ply(out / "baseline_reconstruction.ply", recon)
    write_reports(out / "baseline_report.jsonl", [report])
    status = "ok" if report.extra["success"] else f"FAILED ({report.extra['failure_mode']})"
    print(f"SSCC {status}: CBR={report.cbr_total:.5f}  D1={report.d1_psnr_db:.2f} dB")
    return 0


def cmd_plot(args) -> int:
    reports = []
    for path in args.reports:
        reports.extend(read_reports(path))
    pcst = [r for r in reports if r.lambda_id != "sscc"]
    sscc = [r for r in reports if r.lambda_id == "sscc"] or None
    out = Path(args.out)
    snrs = {r.snr_db for r in pcst}
    if len(snrs) > 1:
        files = plot_psnr_vs_snr(pcst, out / "psnr_vs_snr", baseline_reports=sscc)
    else:
        files = plot_rd_curve(pcst, out / "rd_curve", baseline_reports=sscc)
    print("wrote " + ", ".join(str(f) for f in files))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcst", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("prep", help="generate a synthetic dataset + manifests")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_prep)

    sp = sub.add_parser("train", help="train a model from a config file")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("transmit", help="run one transmission end to end")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--cloud", required=True)
    sp.add_argument("--snr-db", type=float, default=10.0)
    sp.add_argument("--channel", choices=("awgn", "rayleigh"), default="awgn")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_transmit)

    sp = sub.add_parser("sweep", help="evaluate checkpoints over an SNR grid")
    sp.add_argument("--checkpoints", nargs="+", required=True)
    sp.add_argument("--clouds", nargs="+", required=True)
    sp.add_argument("--snr-db", default="10", help="'lo:hi:step' or comma list")
    sp.add_argument("--channel", choices=("awgn", "rayleigh"), default="awgn")
    sp.add_argument("--trials", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--baseline", action="store_true", help="overlay the SSCC reference")
    sp.add_argument("--baseline-design-snr", type=float, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("baseline", help="run the SSCC reference once")
    sp.add_argument("--cloud", required=True)
    sp.add_argument("--snr-db", type=float, default=10.0)
    sp.add_argument("--design-snr-db", type=float, default=None)
    sp.add_argument("--channel", choices=("awgn", "rayleigh"), default="awgn")
    sp.add_argument("--depth", type=int, default=None)
    sp.add_argument("--bit-depth", type=int, default=6)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("plot", help="re-emit figures from report files")
    sp.add_argument("--reports", nargs="+", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    import torch

    torch.set_num_threads(1)  # every command reproducible from (config, seed)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
