import numpy as np
import pytest
import torch

from pcst.checkpoint import load_checkpoint, save_checkpoint
from pcst.entropy import RateAllocation
from pcst.pipeline import ModelConfig, PCSTModel, transmit_cloud
from pcst.pointcloud import synth_shape, voxelize
from pcst.train import evaluate, load_model

TINY = dict(bit_depth=5, d_y=4, d_e=4, enc_channels=(4, 4, 8), dec_channels=(8, 4, 4),
            klist=(2, 4), eta=0.5)


@pytest.fixture(scope="module")
def setup():
    torch.manual_seed(0)
    model = PCSTModel(ModelConfig(**TINY))
    cloud = voxelize(synth_shape("sphere", 600, seed=2, extent=28.0), 5)
    return model, cloud


class TestModelConfig:
    def test_dict_round_trip(self):
        cfg = ModelConfig(**TINY)
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg

    def test_peak(self):
        assert ModelConfig(bit_depth=6).peak == 63.0


class TestTransmitCloud:
    def test_reconstruction_count_contract(self, setup):
        model, cloud = setup
        recon, report = transmit_cloud(model, cloud, 10.0, "awgn", seed=1)
        assert recon.n_points == cloud.n_points
        assert report.n_points_out == cloud.n_points

    def test_cbr_accounting_exact(self, setup):
        model, cloud = setup
        _, report = transmit_cloud(model, cloud, 10.0, "awgn", seed=1)
        n = cloud.n_points
        k_total = report.extra["bandwidth_symbols"]
        assert report.cbr_latent == pytest.approx(k_total / (3 * n))
        assert report.cbr_side == pytest.approx(report.extra["side_symbols"] / (3 * n))
        assert report.cbr_total == pytest.approx(report.cbr_latent + report.cbr_side)
        # pairing bookkeeping
        assert report.extra["complex_symbols"] == (k_total + 1) // 2

    def test_deterministic_given_seed(self, setup):
        model, cloud = setup
        _, a = transmit_cloud(model, cloud, 8.0, "rayleigh", seed=42)
        _, b = transmit_cloud(model, cloud, 8.0, "rayleigh", seed=42)
        assert a.to_json() == b.to_json()

    def test_different_seeds_differ(self, setup):
        model, cloud = setup
        _, a = transmit_cloud(model, cloud, 8.0, "rayleigh", seed=1)
        _, b = transmit_cloud(model, cloud, 8.0, "rayleigh", seed=2)
        assert a.d1_psnr_db != b.d1_psnr_db

    def test_alloc_override_must_cover(self, setup):
        model, cloud = setup
        bad = RateAllocation(np.array([2]), eta=0.5, klist=(2, 4))
        with pytest.raises(ValueError, match="cover"):
            transmit_cloud(model, cloud, 10.0, "awgn", seed=1, alloc_override=bad)

    def test_d2_not_below_d1(self, setup):
        model, cloud = setup
        _, report = transmit_cloud(model, cloud, 10.0, "awgn", seed=3)
        assert report.d2_psnr_db >= report.d1_psnr_db

    def test_noiseless_limit_matches_channel_free_codec(self, setup):
        # as snr -> inf the channel is the identity: D1 equals the channel-free
        # codec's D1 and no longer depends on the noise seed
        model, cloud = setup
        _, a = transmit_cloud(model, cloud, 300.0, "awgn", seed=1)
        _, b = transmit_cloud(model, cloud, 300.0, "awgn", seed=999)
        assert a.d1_psnr_db == b.d1_psnr_db


class TestEvaluate:
    def test_mean_and_std_populated(self, setup):
        model, cloud = setup
        reports = evaluate(model, [cloud], 10.0, "awgn", n_trials=5, seed=4,
                           compute_d2=False)
        assert len(reports) == 1
        assert reports[0].extra["n_trials"] == 5
        assert reports[0].d1_std_db >= 0.0

    def test_single_trial_deterministic(self, setup):
        model, cloud = setup
        a = evaluate(model, [cloud], 10.0, "awgn", n_trials=1, seed=5, compute_d2=False)
        b = evaluate(model, [cloud], 10.0, "awgn", n_trials=1, seed=5, compute_d2=False)
        assert a[0].to_json() == b[0].to_json()

    def test_bad_trials(self, setup):
        model, cloud = setup
        with pytest.raises(ValueError):
            evaluate(model, [cloud], 10.0, "awgn", n_trials=0)


class TestCheckpointRoundTrip:
    def test_save_load_identity(self, setup, tmp_path):
        model, cloud = setup
        path = tmp_path / "m.pcst"
        save_checkpoint(path, model.state_dict(), model.cfg.to_dict(), {"step": 3})
        state, cfg, meta = load_checkpoint(path)
        assert meta["step"] == 3
        assert ModelConfig.from_dict(cfg) == model.cfg
        for k, v in model.state_dict().items():
            assert torch.equal(state[k], v)

    def test_loaded_model_behaves_identically(self, setup, tmp_path):
        model, cloud = setup
        path = tmp_path / "m.pcst"
        save_checkpoint(path, model.state_dict(), model.cfg.to_dict())
        loaded, _ = load_model(path)
        _, a = transmit_cloud(model, cloud, 10.0, "awgn", seed=6)
        _, b = transmit_cloud(loaded, cloud, 10.0, "awgn", seed=6)
        assert a.to_json() == b.to_json()

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "nope.pcst")

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "junk.pcst"
        p.write_bytes(b"garbage" * 4)
        with pytest.raises(ValueError, match="PCSTCKPT"):
            load_checkpoint(p)

    def test_byte_deterministic(self, setup, tmp_path):
        model, _ = setup
        a, b = tmp_path / "a.pcst", tmp_path / "b.pcst"
        save_checkpoint(a, model.state_dict(), model.cfg.to_dict(), {"step": 1})
        save_checkpoint(b, model.state_dict(), model.cfg.to_dict(), {"step": 1})
        assert a.read_bytes() == b.read_bytes()
