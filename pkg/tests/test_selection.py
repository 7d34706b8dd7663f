"""Tests for parameter counting, BIC, and the model-search sweep."""

import numpy as np
import pytest

from ghmix.inference import FitConfig, fit
from ghmix.selection import ModelScore, bic, count_free_params, select
from helpers import blob_data


class TestCountFreeParams:
    def test_single_weight_family(self):
        # per component: 2p location/skew + p(p+1)/2 scale + 2 hyper
        assert count_free_params("mghd", 2, 2) == 2 * (4 + 3 + 2) + 1 == 19

    def test_multiple_scaled_families(self):
        assert count_free_params("mmsghd", 2, 2) == 2 * (4 + 1 + 2 + 4) + 1 == 23
        assert count_free_params("mcmsghd", 2, 2) == 23

    def test_coalesced_family(self):
        assert count_free_params("mcghd", 2, 2) == 2 * (4 + 1 + 2 + 4 + 3) + 1 == 29

    def test_mixing_proportions_term(self):
        for G in (1, 2, 5):
            per = count_free_params("mghd", 1, 3)
            assert count_free_params("mghd", G, 3) == G * per + (G - 1)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            count_free_params("bogus", 1, 1)
        with pytest.raises(ValueError):
            count_free_params("mghd", 0, 1)


class TestBIC:
    def test_arithmetic(self):
        from ghmix.densities import MixtureModel
        from ghmix.inference import FitResult
        from helpers import random_component

        rng = np.random.default_rng(0)
        comps = [random_component(rng, 2, varpi=1.0) for _ in range(2)]
        model = MixtureModel("mghd", [0.5, 0.5], comps)
        res = FitResult(model=model, loglik_trace=np.array([-120.0, -100.0]),
                        bic=0.0, map_labels=np.ones(100, dtype=int),
                        converged=True, n_iter=2)
        value = bic(res, n=100)
        assert value == pytest.approx(2.0 * -100.0 - 19 * np.log(100), abs=1e-12)
        assert value == pytest.approx(-287.498, abs=1e-3)

    def test_penalty_ordering(self):
        # equal log-likelihoods: fewer parameters wins
        loglik = -250.0
        n = 200
        b1 = 2 * loglik - count_free_params("mghd", 2, 2) * np.log(n)
        b2 = 2 * loglik - count_free_params("mcghd", 2, 2) * np.log(n)
        assert b1 > b2

    def test_recomputable_from_fit(self):
        rng = np.random.default_rng(1)
        data, _ = blob_data(rng, 60, np.zeros((1, 2)))
        res = fit(data, FitConfig(family="mghd", G=1, max_iter=30, seed=2))
        assert res.bic == pytest.approx(bic(res, len(data)), abs=1e-9)


class TestSelect:
    def test_single_blob_selects_one_component(self):
        rng = np.random.default_rng(2)
        data, _ = blob_data(rng, 90, np.zeros((1, 2)))
        cfg = FitConfig(family="mghd", G=1, max_iter=40, seed=3)
        best, scores = select(data, [1, 2, 3], ["mghd"], cfg)
        assert best.G == 1
        assert len(scores) == 3
        assert all(s.status in ("ok", "failed") for s in scores)

    def test_two_blobs_select_two_components(self):
        rng = np.random.default_rng(3)
        data, _ = blob_data(rng, 90, np.array([[0.0, 0.0], [40.0, 40.0]]))
        cfg = FitConfig(family="mghd", G=1, max_iter=40, seed=4)
        best, scores = select(data, [1, 2, 3], ["mghd"], cfg)
        assert best.G == 2

    def test_score_table_complete(self):
        rng = np.random.default_rng(4)
        data, _ = blob_data(rng, 60, np.zeros((1, 2)))
        cfg = FitConfig(family="mghd", G=1, max_iter=25, seed=5)
        best, scores = select(data, [1, 2], ["mghd", "mmsghd"], cfg)
        assert len(scores) == 4
        keys = {(s.family, s.G) for s in scores}
        assert keys == {("mghd", 1), ("mghd", 2), ("mmsghd", 1), ("mmsghd", 2)}
        for s in scores:
            if s.status == "ok":
                assert s.bic == pytest.approx(
                    2 * s.loglik - s.rho * np.log(len(data)), abs=1e-9
                )

    def test_failed_pairs_flagged_not_fatal(self):
        rng = np.random.default_rng(5)
        data, _ = blob_data(rng, 5, np.zeros((1, 2)))  # n=5: G=2 infeasible
        cfg = FitConfig(family="mghd", G=1, max_iter=25, seed=6)
        best, scores = select(data, [1, 2], ["mghd"], cfg)
        assert best.G == 1
        failed = [s for s in scores if s.G == 2]
        assert failed[0].status == "failed"
        assert failed[0].message

    def test_tie_break_prefers_smaller_g_and_earlier_family(self):
        scores = [
            ModelScore("mmsghd", 1, -10.0, 5, -100.0),
            ModelScore("mghd", 1, -10.0, 5, -100.0),
            ModelScore("mghd", 2, -10.0, 5, -100.0),
        ]
        best = max(scores, key=lambda s: (s.bic, -s.G,
                                          -["mghd", "mmsghd", "mcmsghd", "mcghd"].index(s.family)))
        assert (best.family, best.G) == ("mghd", 1)

    def test_empty_ranges_rejected(self):
        rng = np.random.default_rng(6)
        data, _ = blob_data(rng, 30, np.zeros((1, 2)))
        cfg = FitConfig(family="mghd", G=1, max_iter=25, seed=7)
        with pytest.raises(ValueError):
            select(data, [], ["mghd"], cfg)
        with pytest.raises(ValueError):
            select(data, [1], ["bogus"], cfg)
