import numpy as np
import pytest
import torch

from pcst.entropy import RateAllocation, total_bandwidth
from pcst.jscc import (
    JSCCDecoder,
    JSCCEncoder,
    SymbolSequence,
    normalize_pairs,
    pack_reals,
    power_normalize,
)
from pcst.sparse import SparseTensor

KLIST = (2, 4, 6, 8)


def latent_fixture(n, d_y=8, seed=0, spread=10):
    rng = np.random.default_rng(seed)
    coords = np.unique(rng.integers(0, spread, (n * 3, 3)), axis=0)[:n] * 8
    feats = torch.tensor(rng.standard_normal((len(coords), d_y)), dtype=torch.float32)
    return SparseTensor(coords, feats, stride=8)


def alloc_fixture(n, k=4, eta=0.25):
    return RateAllocation(np.full(n, k), eta=eta, klist=KLIST)


class TestPowerNormalize:
    def test_hand_arithmetic(self):
        scaled, scale = power_normalize(np.array([3 + 4j]))
        assert scale == pytest.approx(1 / 5)
        assert abs(scaled[0]) == pytest.approx(1.0)

    def test_already_unit(self):
        s = np.array([1.0 + 0j, -1.0 + 0j])
        out, scale = power_normalize(s)
        assert scale == pytest.approx(1.0)
        np.testing.assert_allclose(out, s)

    def test_empty(self):
        out, scale = power_normalize(np.array([], dtype=complex))
        assert out.size == 0 and scale == 1.0

    def test_zero_vector_degenerate(self):
        pairs, scale, degenerate = normalize_pairs(torch.zeros(4, 2))
        assert degenerate and scale == 1.0
        assert torch.equal(pairs, torch.zeros(4, 2))


class TestEncoder:
    def test_length_bookkeeping(self):
        torch.manual_seed(0)
        enc = JSCCEncoder(d_y=8, d_e=4, klist=KLIST)
        y = latent_fixture(10)
        sym = enc(y, alloc_fixture(10, k=4))
        assert sym.total_reals == 40
        assert sym.n_complex == 20

    def test_zero_weights_degenerate_power(self):
        enc = JSCCEncoder(d_y=8, d_e=4, klist=KLIST)
        with torch.no_grad():
            for p in enc.parameters():
                p.zero_()
        sym = enc(latent_fixture(5), alloc_fixture(5))
        assert sym.degenerate
        assert torch.equal(sym.pairs, torch.zeros_like(sym.pairs))

    def test_unit_average_power(self):
        torch.manual_seed(1)
        enc = JSCCEncoder(d_y=8, d_e=4, klist=KLIST)
        rng = np.random.default_rng(2)
        y = latent_fixture(40, seed=3)
        ks = rng.choice(KLIST, 40)
        sym = enc(y, RateAllocation(ks, eta=0.25, klist=KLIST))
        power = float((sym.pairs ** 2).sum(dim=1).mean())
        assert power == pytest.approx(1.0, abs=1e-6)

    def test_total_matches_entropy_bandwidth(self):
        torch.manual_seed(2)
        enc = JSCCEncoder(d_y=8, d_e=4, klist=KLIST)
        rng = np.random.default_rng(4)
        ks = rng.choice(KLIST, 25)
        sym = enc(latent_fixture(25, seed=5), RateAllocation(ks, eta=0.25, klist=KLIST))
        assert sym.total_reals == total_bandwidth(ks)
        assert sym.n_complex == (total_bandwidth(ks) + 1) // 2

    def test_allocation_size_mismatch(self):
        enc = JSCCEncoder(d_y=8, d_e=4, klist=KLIST)
        with pytest.raises(ValueError, match="coordinates"):
            enc(latent_fixture(4), alloc_fixture(5))

    def test_klist_mismatch(self):
        enc = JSCCEncoder(d_y=8, d_e=4, klist=KLIST)
        bad = RateAllocation(np.full(4, 4), eta=0.25, klist=(4, 16))
        with pytest.raises(ValueError, match="klist"):
            enc(latent_fixture(4), bad)

    def test_empty_latent(self):
        enc = JSCCEncoder(d_y=8, d_e=4, klist=KLIST)
        y = SparseTensor(np.zeros((0, 3)), torch.zeros(0, 8), stride=8)
        sym = enc(y, RateAllocation(np.zeros(0, dtype=int), eta=0.25, klist=KLIST))
        assert sym.n_complex == 0


class TestDecoder:
    def test_empty(self):
        dec = JSCCDecoder(d_y=8, d_e=4, klist=KLIST)
        sym = SymbolSequence(torch.zeros(0, 2), np.zeros(0, dtype=int))
        out = dec(sym, np.zeros((0, 3), dtype=int),
                  RateAllocation(np.zeros(0, dtype=int), eta=0.25, klist=KLIST))
        assert out.n_points == 0 and out.n_channels == 8

    def test_round_trip_shapes(self):
        torch.manual_seed(3)
        enc = JSCCEncoder(d_y=8, d_e=4, klist=KLIST)
        dec = JSCCDecoder(d_y=8, d_e=4, klist=KLIST)
        y = latent_fixture(12, seed=6)
        rng = np.random.default_rng(7)
        alloc = RateAllocation(rng.choice(KLIST, 12), eta=0.25, klist=KLIST)
        sym = enc(y, alloc)
        out = dec(sym, y.coords, alloc)
        assert out.n_points == 12 and out.n_channels == 8
        assert np.array_equal(out.coords_array(), y.coords_array())

    def test_layout_mismatch_raises(self):
        dec = JSCCDecoder(d_y=8, d_e=4, klist=KLIST)
        y = latent_fixture(3, seed=8)
        sym = SymbolSequence(torch.zeros(6, 2), np.array([4, 4, 4]))
        with pytest.raises(ValueError, match="layout|complex"):
            dec(sym, y.coords, RateAllocation(np.array([4, 4, 2]), eta=0.25, klist=KLIST))

    def test_permutation_equivariance_on_isolated_coords(self):
        """Swapping two coordinates' symbol blocks (and k entries) swaps their
        decoded feature rows, provided the coords are isolated (no conv overlap)."""
        torch.manual_seed(4)
        dec = JSCCDecoder(d_y=8, d_e=4, klist=KLIST)
        coords = np.array([[0, 0, 0], [80, 0, 0], [160, 0, 0]])
        lengths = np.array([4, 6, 4])
        alloc = RateAllocation(lengths, eta=0.25, klist=KLIST)
        rng = np.random.default_rng(9)
        reals = torch.tensor(rng.standard_normal(14), dtype=torch.float32)
        sym = SymbolSequence(pack_reals(reals), lengths)
        base = dec(sym, coords, alloc).feats.detach().numpy()

        # swap blocks of coord 0 (len 4) and coord 2 (len 4)
        swapped = torch.cat([reals[10:14], reals[4:10], reals[0:4]])
        sym2 = SymbolSequence(pack_reals(swapped), lengths)
        out2 = dec(sym2, coords, alloc).feats.detach().numpy()
        np.testing.assert_allclose(out2[0], base[2], rtol=1e-5, atol=1e-6)
        np.testing.assert_allclose(out2[2], base[0], rtol=1e-5, atol=1e-6)
        np.testing.assert_allclose(out2[1], base[1], rtol=1e-5, atol=1e-6)

    def test_deterministic(self):
        torch.manual_seed(5)
        enc = JSCCEncoder(d_y=8, d_e=4, klist=KLIST)
        dec = JSCCDecoder(d_y=8, d_e=4, klist=KLIST)
        y = latent_fixture(9, seed=10)
        alloc = alloc_fixture(9, k=6)
        a = dec(enc(y, alloc), y.coords, alloc).feats
        b = dec(enc(y, alloc), y.coords, alloc).feats
        assert torch.equal(a, b)
