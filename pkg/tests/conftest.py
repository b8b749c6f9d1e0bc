import os
from pathlib import Path

import pytest
import torch

# bitwise reproducibility across runs (multi-thread CPU reductions are not),
# and single-threaded math is faster at these op sizes anyway
torch.set_num_threads(1)

# Acceptance-experiment recipe: two rate-distortion operating points trained
# on the same synthetic bit-depth-6 shapes. eta=0.5 keeps quantized budgets
# off the klist floor so the lambda sweep separates in CBR.
ACCEPT_BIT_DEPTH = 6
ACCEPT_EXTENT = 40.0
ACCEPT_N_POINTS = 1536
ACCEPT_ETA = 0.5
ACCEPT_STEPS = 500
ACCEPT_LAMBDAS = (400.0, 6400.0)
ACCEPT_SEED = 11


def _build_dataset():
    from pcst.pointcloud import synth_shape, voxelize

    kinds = ("sphere", "torus", "box", "composite")
    return [
        voxelize(synth_shape(kinds[i % 4], ACCEPT_N_POINTS, seed=100 + i,
                             extent=ACCEPT_EXTENT), ACCEPT_BIT_DEPTH)
        for i in range(8)
    ]


def _held_out_clouds():
    from pcst.pointcloud import synth_shape, voxelize

    return [
        voxelize(synth_shape(kind, ACCEPT_N_POINTS, seed=990 + i,
                             extent=ACCEPT_EXTENT), ACCEPT_BIT_DEPTH)
        for i, kind in enumerate(("sphere", "torus"))
    ]


@pytest.fixture(scope="session")
def held_out_clouds():
    return _held_out_clouds()


@pytest.fixture(scope="session")
def trained_models(tmp_path_factory):
    """Two trained rate points (low/high lambda). ~15-20 min of desk training.

    Set PCST_TEST_CACHE to a directory to reuse checkpoints across test runs
    (developer convenience; leave unset for a from-scratch acceptance run).
    """
    from pcst.train import LossConfig, load_model, train_model

    cache = os.environ.get("PCST_TEST_CACHE")
    cache_dir = Path(cache) if cache else None
    models = {}
    dataset = None
    for lam in ACCEPT_LAMBDAS:
        tag = f"accept_lam{int(lam)}_s{ACCEPT_STEPS}.pcst"
        if cache_dir is not None and (cache_dir / tag).exists():
            model, _ = load_model(cache_dir / tag)
            models[lam] = model
            continue
        if dataset is None:
            dataset = _build_dataset()
        cfg = LossConfig(lmbda=lam, eta=ACCEPT_ETA, steps=ACCEPT_STEPS,
                         batch_size=2, seed=ACCEPT_SEED, checkpoint_interval=0)
        out_dir = (cache_dir if cache_dir is not None
                   else tmp_path_factory.mktemp("accept"))
        model, _, _ = train_model(cfg, dataset, out_dir=out_dir)
        if cache_dir is not None:
            (out_dir / "ckpt_final.pcst").rename(cache_dir / tag)
        models[lam] = model
    return models
