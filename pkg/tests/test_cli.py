import json

import numpy as np
import pytest

from pcst.cli import main
from pcst.metrics import read_reports
from pcst.pointcloud import load_ply, synth_shape, write_ply

TRAIN_CFG = {
    "lambda": 50.0,
    "eta": 0.5,
    "steps": 4,
    "batch_size": 1,
    "n_shapes": 2,
    "n_points": 300,
    "bit_depth": 5,
    "d_y": 4,
    "d_e": 4,
    "enc_channels": [4, 4, 8],
    "dec_channels": [8, 4, 4],
    "klist": [2, 4],
    "checkpoint_interval": 0,
}


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "cfg.json"
    cfg_path.write_text(json.dumps(TRAIN_CFG))
    out = root / "run"
    assert main(["train", "--config", str(cfg_path), "--out", str(out), "--seed", "1"]) == 0
    cloud = synth_shape("sphere", 300, seed=9, extent=28.0)
    ply = root / "eval.ply"
    write_ply(ply, cloud)
    return out / "ckpt_final.pcst", ply, root


class TestPrep:
    def test_writes_manifests(self, tmp_path):
        cfg = tmp_path / "prep.json"
        cfg.write_text(json.dumps({"n_shapes": 5, "n_points": 100, "bit_depth": 5}))
        out = tmp_path / "data"
        assert main(["prep", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
        train = (out / "manifest_train.txt").read_text().splitlines()
        val = (out / "manifest_val.txt").read_text().splitlines()
        assert len(train) == 4 and len(val) == 1
        assert load_ply(train[0]).points.shape == (100, 3)


class TestTransmit:
    def test_missing_checkpoint_exit_2(self, tmp_path, capsys):
        rc = main([
            "transmit", "--checkpoint", str(tmp_path / "missing.pcst"),
            "--cloud", "x.ply", "--out", str(tmp_path),
        ])
        assert rc == 2
        assert "missing.pcst" in capsys.readouterr().err

    def test_runs_and_reports(self, trained, tmp_path, capsys):
        ckpt, ply, _ = trained
        out = tmp_path / "tx"
        rc = main([
            "transmit", "--checkpoint", str(ckpt), "--cloud", str(ply),
            "--snr-db", "10", "--channel", "awgn", "--seed", "5", "--out", str(out),
        ])
        assert rc == 0
        assert "D1=" in capsys.readouterr().out
        assert (out / "reconstruction.ply").exists()
        reports = read_reports(out / "report.jsonl")
        assert len(reports) == 1 and reports[0].snr_db == 10.0

    def test_same_seed_byte_identical_reports(self, trained, tmp_path):
        ckpt, ply, _ = trained
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            main([
                "transmit", "--checkpoint", str(ckpt), "--cloud", str(ply),
                "--seed", "7", "--out", str(out),
            ])
            outs.append((out / "report.jsonl").read_bytes())
        assert outs[0] == outs[1]


class TestSweep:
    def test_rd_points_and_plots(self, trained, tmp_path):
        ckpt, ply, _ = trained
        out = tmp_path / "sweep"
        rc = main([
            "sweep", "--checkpoints", str(ckpt), str(ckpt), "--clouds", str(ply),
            "--snr-db", "10", "--trials", "2", "--out", str(out),
        ])
        assert rc == 0
        reports = read_reports(out / "sweep.jsonl")
        assert len(reports) == 2
        assert (out / "rd_curve.svg").exists() and (out / "rd_curve.png").exists()

    def test_snr_grid_with_baseline(self, trained, tmp_path):
        ckpt, ply, _ = trained
        out = tmp_path / "grid"
        rc = main([
            "sweep", "--checkpoints", str(ckpt), "--clouds", str(ply),
            "--snr-db", "6:10:2", "--trials", "2", "--baseline",
            "--baseline-design-snr", "10", "--out", str(out),
        ])
        assert rc == 0
        reports = read_reports(out / "sweep.jsonl")
        sscc = [r for r in reports if r.lambda_id == "sscc"]
        pcst = [r for r in reports if r.lambda_id != "sscc"]
        assert len(pcst) == 3 and len(sscc) == 3
        assert (out / "psnr_vs_snr.svg").exists()

    def test_std_columns_populated_with_trials(self, trained, tmp_path):
        ckpt, ply, _ = trained
        out = tmp_path / "std"
        main([
            "sweep", "--checkpoints", str(ckpt), "--clouds", str(ply),
            "--snr-db", "8", "--trials", "5", "--out", str(out),
        ])
        rep = read_reports(out / "sweep.jsonl")[0]
        assert rep.extra["n_trials"] == 5
        assert rep.d1_std_db > 0.0


class TestBaselineCmd:
    def test_runs(self, trained, tmp_path, capsys):
        _, ply, _ = trained
        out = tmp_path / "base"
        rc = main([
            "baseline", "--cloud", str(ply), "--snr-db", "10", "--bit-depth", "5",
            "--seed", "2", "--out", str(out),
        ])
        assert rc == 0
        assert "SSCC" in capsys.readouterr().out
        assert (out / "baseline_report.jsonl").exists()


class TestPlotCmd:
    def test_replots_from_records(self, trained, tmp_path):
        ckpt, ply, _ = trained
        sweep_out = tmp_path / "s"
        main([
            "sweep", "--checkpoints", str(ckpt), "--clouds", str(ply),
            "--snr-db", "6,10", "--trials", "1", "--out", str(sweep_out),
        ])
        plot_out = tmp_path / "p"
        rc = main(["plot", "--reports", str(sweep_out / "sweep.jsonl"),
                   "--out", str(plot_out)])
        assert rc == 0
        assert (plot_out / "psnr_vs_snr.png").exists()
