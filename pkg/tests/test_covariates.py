import numpy as np
import pytest

from windfuse.covariates import (
    ImportanceVector,
    importance_future,
    importance_historical,
    parse_selection_report,
    ridge_fit,
    select,
    write_selection_report,
)
from windfuse.errors import NumericError


class TestRidge:
    def test_identity_design_recovers_unit_vector(self):
        x = np.eye(4)
        y = np.array([1.0, 0.0, 0.0, 0.0])
        w = ridge_fit(x, y, lam=1e-9)
        assert np.allclose(w, y, atol=1e-6)

    def test_planted_linear_model(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(300, 2))
        y = 2.0 * x[:, 0] + 0.0 * x[:, 1]
        w = ridge_fit(x, y, lam=1e-6)
        assert np.allclose(w, [2.0, 0.0], atol=1e-4)

    def test_heavy_regularization_shrinks_to_zero(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(100, 3))
        y = rng.normal(size=100)
        w = ridge_fit(x, y, lam=1e12)
        assert np.max(np.abs(w)) < 1e-6

    def test_singular_system_advises_regularization(self):
        x = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(NumericError, match="regularization"):
            ridge_fit(x, np.array([1.0, 2.0]), lam=0.0)


def planted_series(rng, n=400, noise=0.3):
    """Latent AR(1) drives the target; one candidate sees the latent state."""
    z = np.zeros(n)
    for t in range(1, n):
        z[t] = 0.9 * z[t - 1] + rng.normal(0, 0.5)
    y = z + rng.normal(0, noise, size=n)
    informative = z + rng.normal(0, 0.1, size=n)
    noise_covs = rng.normal(size=(n, 3))
    return y, informative, noise_covs


class TestImportanceHistorical:
    def test_planted_informative_beats_noise(self):
        rng = np.random.default_rng(42)
        y, informative, noise_covs = planted_series(rng)
        names = ["planted", "n1", "n2", "n3"]
        x = np.column_stack([informative, noise_covs])
        vec = importance_historical(y, names, x, self_name="self", k=12)
        by_name = dict(zip(vec.ids, vec.values))
        assert all(by_name["planted"] > by_name[f"n{i}"] for i in (1, 2, 3))
        assert by_name["planted"] > 0.2

    def test_identical_covariate_scores_high_noise_scores_low(self):
        rng = np.random.default_rng(7)
        y, _, noise_covs = planted_series(rng)
        x = np.column_stack([y, noise_covs[:, 0]])
        vec = importance_historical(y, ["copy", "noise"], x, self_name="self", k=8)
        by_name = dict(zip(vec.ids, vec.values))
        assert by_name["copy"] > 0.5
        assert by_name["noise"] < 0.15

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(3)
        y, informative, noise_covs = planted_series(rng)
        x = np.column_stack([informative, noise_covs])
        names = ["a", "b", "c", "d"]
        vec = importance_historical(y, names, x, self_name="self", k=6)
        perm = [2, 0, 3, 1]
        vec_p = importance_historical(
            y, [names[i] for i in perm], x[:, perm], self_name="self", k=6
        )
        orig = dict(zip(vec.ids, vec.values))
        permuted = dict(zip(vec_p.ids, vec_p.values))
        for name in names:
            assert np.isclose(orig[name], permuted[name], atol=1e-12)

    def test_ranking_invariant_to_positive_target_rescaling(self):
        rng = np.random.default_rng(9)
        y, informative, noise_covs = planted_series(rng)
        x = np.column_stack([informative, noise_covs])
        vec1 = importance_historical(y, list("abcd"), x, self_name="self", k=6)
        vec2 = importance_historical(7.5 * y, list("abcd"), x, self_name="self", k=6)
        assert np.array_equal(np.argsort(vec1.values), np.argsort(vec2.values))
        # min-max cancels a pure rescaling exactly
        assert np.allclose(vec1.values, vec2.values, atol=1e-9)

    def test_duplicated_informative_does_not_lift_noise(self):
        rng = np.random.default_rng(21)
        y, informative, noise_covs = planted_series(rng)
        x = np.column_stack([informative, informative.copy(), noise_covs[:, 0]])
        vec = importance_historical(y, ["p1", "p2", "noise"], x, self_name="self", k=8)
        by_name = dict(zip(vec.ids, vec.values))
        assert by_name["noise"] < min(by_name["p1"], by_name["p2"])


class TestImportanceFuture:
    def test_perfect_forecast_candidate_scores_one(self):
        rng = np.random.default_rng(5)
        y = rng.normal(size=300)
        y_f = y + rng.normal(0, 0.05, size=300)
        cands = np.column_stack([y.copy(), rng.normal(size=300)])
        vec = importance_future(y, y_f, ["copy", "noise"], cands, self_name="self")
        by_name = dict(zip(vec.ids, vec.values))
        assert max(by_name["self"], by_name["copy"]) == 1.0
        assert by_name["noise"] < 0.1

    def test_all_noise_candidates_leaves_only_self(self):
        rng = np.random.default_rng(6)
        y = np.zeros(300)
        z = rng.normal(size=300)
        y = z + rng.normal(0, 0.1, size=300)
        vec = importance_future(y, z, ["n1", "n2"], rng.normal(size=(300, 2)), self_name="self")
        assert select([vec], 0.2) == ("self",)


class TestSelect:
    def deployment_profile(self):
        # importance profile recorded from a real multi-station deployment
        hist = ImportanceVector(
            branch="historical",
            ids=("v", "vx", "vy", "theta", "rh", "slp", "tp"),
            values=np.array([0.9440, 0.3493, 0.4479, 0.1325, 0.0038, 0.3713, 0.3101]),
            degenerate_horizons=0,
        )
        fut = ImportanceVector(
            branch="future",
            ids=("v", "vx", "vy", "theta", "rh", "slp", "tp"),
            values=np.array([1.0, 0.2066, 0.1092, 0.0203, 0.0001, 0.0296, 0.0444]),
            degenerate_horizons=0,
        )
        return hist, fut

    def test_threshold_on_recorded_profile(self):
        hist, fut = self.deployment_profile()
        assert set(select([hist], 0.2)) == {"v", "vx", "vy", "slp", "tp"}
        # future branch keeps self plus the one candidate above threshold
        assert set(select([fut], 0.2)) == {"v", "vx"}

    def test_self_always_kept(self):
        vec = ImportanceVector("future", ("self", "a"), np.array([0.05, 0.01]), 0)
        assert select([vec], 0.2) == ("self",)

    def test_station_averaging(self):
        a = ImportanceVector("historical", ("self", "x"), np.array([1.0, 0.5]), 0)
        b = ImportanceVector("historical", ("self", "x"), np.array([1.0, 0.0]), 0)
        assert select([a, b], 0.2) == ("self", "x")
        assert select([a, b], 0.3) == ("self",)

    def test_mismatched_vectors_rejected(self):
        a = ImportanceVector("historical", ("self", "x"), np.array([1.0, 0.5]), 0)
        b = ImportanceVector("future", ("self", "x"), np.array([1.0, 0.5]), 0)
        with pytest.raises(ValueError):
            select([a, b])


def test_report_round_trip(tmp_path):
    hist = ImportanceVector("historical", ("v", "tp"), np.array([0.9, 0.31]), 0)
    fut = ImportanceVector("future", ("v", "tp"), np.array([1.0, 0.05]), 0)
    path = tmp_path / "report.txt"
    write_selection_report(path, "v", 0.2, [hist], [fut])
    parsed = parse_selection_report(path)
    assert parsed["target"] == "v"
    assert parsed["threshold"] == 0.2
    assert parsed["selected"]["historical"] == ("v", "tp")
    assert parsed["selected"]["future"] == ("v",)
    assert np.isclose(parsed["importance"]["historical"]["tp"], 0.31)
