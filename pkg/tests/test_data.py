import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windfuse.data import (
    Fold,
    assign_windows,
    build_frame,
    compute_stats,
    correlation_diagnostics,
    decompose_wind,
    eligible_fcts,
    fill_frame,
    fill_missing,
    fold_index_ranges,
    make_windows,
    month_intervals,
    normalize,
    denormalize,
    normalize_frame,
    plan_splits,
    series_stats,
)
from windfuse.errors import DataError
from windfuse.synth import SynthSpec, synthesize_files


class TestFillMissing:
    def test_two_sided_average(self):
        assert fill_missing([1.0, np.nan, 3.0]).tolist() == [1.0, 2.0, 3.0]

    def test_boundary_copies_neighbour(self):
        assert fill_missing([np.nan, 5.0, 5.0]).tolist() == [5.0, 5.0, 5.0]
        assert fill_missing([2.0, 4.0, np.nan]).tolist() == [2.0, 4.0, 4.0]

    def test_no_missing_unchanged(self):
        src = [1.0, 4.0, 2.0]
        assert fill_missing(src).tolist() == src

    def test_run_of_gaps_uses_run_endpoints(self):
        assert fill_missing([1.0, np.nan, np.nan, 5.0]).tolist() == [1.0, 3.0, 3.0, 5.0]

    def test_all_missing_raises(self):
        with pytest.raises(DataError):
            fill_missing([np.nan, np.nan])

    @given(st.lists(st.one_of(st.none(), st.floats(-50, 50)), min_size=1, max_size=30))
    @settings(max_examples=150, deadline=None)
    def test_fill_properties(self, raw):
        series = np.array([np.nan if x is None else x for x in raw])
        if np.all(np.isnan(series)):
            with pytest.raises(DataError):
                fill_missing(series)
            return
        out = fill_missing(series)
        assert not np.any(np.isnan(out))
        present = ~np.isnan(series)
        assert np.array_equal(out[present], series[present])


class TestNormalize:
    def test_example(self):
        assert normalize([1.0, 2.0, 3.0], 2.0, 1.0).tolist() == [-1.0, 0.0, 1.0]

    def test_round_trip(self):
        x = np.array([3.0, -1.5, 2.25])
        mean, std = series_stats(x)
        assert np.allclose(denormalize(normalize(x, mean, std), mean, std), x, atol=1e-12)

    def test_constant_series_fallback(self):
        mean, std = series_stats([4.0, 4.0, 4.0])
        assert std == 1.0
        assert np.allclose(normalize([4.0, 4.0], mean, std), 0.0)


@pytest.fixture(scope="module")
def frame_and_paths(tmp_path_factory):
    td = tmp_path_factory.mktemp("data")
    obs, nwp = synthesize_files(SynthSpec(stations=2, days=5, seed=3), td)
    return build_frame(obs, nwp), obs, nwp


class TestFrame:
    def test_components_rederived_on_fill(self, frame_and_paths):
        frame = fill_frame(frame_and_paths[0])
        for st in frame.stations:
            v = frame.obs_series(st, "v")
            theta = frame.obs_series(st, "theta")
            vx, vy = decompose_wind(v, theta)
            assert np.allclose(frame.obs_series(st, "vx"), vx, atol=1e-9)
            assert np.allclose(frame.obs_series(st, "vy"), vy, atol=1e-9)

    def test_fill_frame_preserves_present_values(self, tmp_path):
        obs, nwp = synthesize_files(SynthSpec(stations=1, days=4, seed=0), tmp_path)
        text = obs.read_text().splitlines()
        # blank out one v measurement (keep the line parseable)
        parts = text[5].split(",")
        parts[2] = ""
        text[5] = ",".join(parts)
        obs.write_text("\n".join(text) + "\n")
        frame = build_frame(obs, nwp)
        assert np.isnan(frame.obs[4, 0, 0])
        filled = fill_frame(frame)
        assert not np.any(np.isnan(filled.obs))
        assert np.isclose(filled.obs[4, 0, 0], 0.5 * (frame.obs[3, 0, 0] + frame.obs[5, 0, 0]))

    def test_missing_nwp_value_is_hard_error(self, tmp_path):
        obs, nwp = synthesize_files(SynthSpec(stations=1, days=4, seed=0), tmp_path)
        lines = nwp.read_text().splitlines()
        parts = lines[3].split(",")
        parts[1] = ""
        lines[3] = ",".join(parts)
        nwp.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataError):
            build_frame(obs, nwp)

    def test_negative_speed_rejected(self, tmp_path):
        obs, nwp = synthesize_files(SynthSpec(stations=1, days=4, seed=0), tmp_path)
        lines = obs.read_text().splitlines()
        parts = lines[2].split(",")
        parts[2] = "-1.0"
        lines[2] = ",".join(parts)
        obs.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataError):
            build_frame(obs, nwp)

    def test_stats_use_training_range_only(self, frame_and_paths):
        frame = fill_frame(frame_and_paths[0])
        stats = compute_stats(frame, (0, 48))
        normed = normalize_frame(frame, stats)
        # test-segment values are scaled with train stats, not their own
        raw = frame.obs_series(frame.stations[0], "v")[48:]
        mean = frame.obs_series(frame.stations[0], "v")[:48].mean()
        std = frame.obs_series(frame.stations[0], "v")[:48].std()
        assert np.allclose(normed.obs_series(frame.stations[0], "v")[48:], (raw - mean) / std)


class TestWindows:
    def make_filled(self, tmp_path, days, stations=1, seed=0):
        obs, nwp = synthesize_files(SynthSpec(stations=stations, days=days, seed=seed), tmp_path)
        return fill_frame(build_frame(obs, nwp))

    def test_three_days_two_windows(self, tmp_path):
        frame = self.make_filled(tmp_path, 3)
        windows = make_windows(frame, "S1", "v")
        assert len(windows) == 2

    def test_one_day_no_windows(self, tmp_path):
        frame = self.make_filled(tmp_path, 3)
        short = type(frame)(frame.timeline[:24], frame.stations, frame.obs[:24], frame.nwp[:24])
        assert make_windows(short, "S1", "v") == []

    def test_window_geometry(self, tmp_path):
        frame = self.make_filled(tmp_path, 4)
        hours = frame.hour_of_day()
        for win in make_windows(frame, "S1", "v"):
            lo, hi = win.span
            assert lo == win.fct - 23
            assert hi == win.fct + 24
            assert hours[win.fct + 1] == 0  # first target hour
            assert win.history.shape == (24, 1)
            assert win.future.shape == (24, 1)
            assert win.target.shape == (24,)

    def test_window_contents_and_no_leakage(self, tmp_path):
        frame = self.make_filled(tmp_path, 3)
        win = make_windows(frame, "S1", "v", hist_covariates=("tp",), fut_covariates=("vx",))[0]
        t = win.fct
        vi = frame.var_index("v")
        assert np.array_equal(win.history[:, 0], frame.obs[t - 23 : t + 1, vi, 0])
        assert np.array_equal(win.history[:, 1], frame.obs[t - 23 : t + 1, frame.var_index("tp"), 0])
        assert np.array_equal(win.future[:, 0], frame.nwp[t + 1 : t + 25, vi])
        assert np.array_equal(win.target, frame.obs[t + 1 : t + 25, vi, 0])


def hourly_timeline(start: str, n_hours: int) -> np.ndarray:
    return np.datetime64(start, "h") + np.arange(n_hours).astype("timedelta64[h]")


class TestSplits:
    def test_rolling_first_fold_matches_layout(self):
        plan = plan_splits(18, "rolling")
        assert len(plan.folds) == 12
        first = plan.folds[0]
        assert first.train == (0, 1, 2, 3, 4)   # intervals 1..5, one-based
        assert first.val == 5                   # interval 6
        assert first.test == 6                  # interval 7

    def test_incremental_last_fold(self):
        plan = plan_splits(18, "incremental")
        last = plan.folds[-1]
        assert last.train == tuple(range(16))   # intervals 1..16
        assert last.val == 16
        assert last.test == 17

    def test_tests_cover_last_intervals_disjointly(self):
        for mode in ("rolling", "incremental"):
            plan = plan_splits(18, mode)
            tests = [f.test for f in plan.folds]
            assert tests == list(range(6, 18))
            assert len(set(tests)) == len(tests)

    def test_too_few_intervals(self):
        with pytest.raises(ValueError):
            plan_splits(6, "rolling")
        with pytest.raises(ValueError):
            plan_splits(2, "incremental")

    def test_fold_count_shrinks_when_short(self):
        assert len(plan_splits(7, "rolling").folds) == 1
        assert len(plan_splits(13, "incremental").folds) == 11

    def test_month_intervals_drop_partials(self):
        # mid-January through mid-April: only February and March are whole
        tl = hourly_timeline("2021-01-15T00", 24 * (17 + 28 + 31 + 10))
        intervals = month_intervals(tl)
        assert len(intervals) == 2
        lo, hi = intervals[0]
        assert str(tl[lo]) == "2021-02-01T00"
        assert str(tl[hi - 1]) == "2021-02-28T23"

    def test_assignment_excludes_straddling_windows(self):
        class FakeWin:
            def __init__(self, lo, hi):
                self.span = (lo, hi)

        ranges = {"train": (0, 100), "val": (100, 200)}
        wins = [FakeWin(0, 50), FakeWin(90, 120), FakeWin(120, 150)]
        out = assign_windows(wins, ranges)
        assert [w.span for w in out["train"]] == [(0, 50)]
        assert [w.span for w in out["val"]] == [(120, 150)]

    def test_fold_ranges_are_contiguous_and_ordered(self):
        tl = hourly_timeline("2020-01-01T00", 24 * 366 + 24 * 181)  # 18 months
        intervals = month_intervals(tl)
        assert len(intervals) == 18
        plan = plan_splits(18, "rolling")
        ranges = fold_index_ranges(intervals, plan.folds[0])
        assert ranges["train"][1] == ranges["val"][0]
        assert ranges["val"][1] == ranges["test"][0]


class TestDiagnostics:
    def test_lag_zero_autocorrelation_is_one(self, tmp_path):
        obs, nwp = synthesize_files(SynthSpec(stations=2, days=6, seed=1), tmp_path)
        frame = fill_frame(build_frame(obs, nwp))
        diag = correlation_diagnostics(frame, "v", max_lag=30)
        for st in frame.stations:
            assert np.isclose(diag.auto[st][0], 1.0)

    def test_daily_sine_peaks_at_lag_24(self, tmp_path):
        obs, nwp = synthesize_files(
            SynthSpec(stations=1, days=8, seed=1, ar_noise=0.0, nwp_noise=0.0,
                      nwp_bias=0.0, spatial_strength=0.0), tmp_path)
        frame = fill_frame(build_frame(obs, nwp))
        diag = correlation_diagnostics(frame, "v", max_lag=24)
        assert diag.auto["S1"][24] > 0.999

    def test_shifted_station_peaks_at_shift_lag(self, tmp_path):
        obs, nwp = synthesize_files(SynthSpec(stations=2, days=6, seed=5), tmp_path)
        frame = fill_frame(build_frame(obs, nwp))
        lag = 3
        obs2 = frame.obs.copy()
        obs2[lag:, frame.var_index("v"), 1] = obs2[: -lag or None, frame.var_index("v"), 0][: len(obs2) - lag]
        shifted = type(frame)(frame.timeline, frame.stations, obs2, frame.nwp)
        diag = correlation_diagnostics(shifted, "v", max_lag=6)
        vals = diag.spatial[("S1", "S2")]
        assert np.argmax(vals) == lag
        assert vals[lag] > 0.99

    def test_constant_series_flagged_zero(self, tmp_path):
        obs, nwp = synthesize_files(SynthSpec(stations=1, days=6, seed=1), tmp_path)
        frame = fill_frame(build_frame(obs, nwp))
        obs2 = frame.obs.copy()
        obs2[:, frame.var_index("rh"), 0] = 33.0
        flat = type(frame)(frame.timeline, frame.stations, obs2, frame.nwp)
        diag = correlation_diagnostics(flat, "rh", max_lag=4)
        assert np.allclose(diag.auto["S1"], 0.0)
        assert "S1:rh" in diag.constant_series
