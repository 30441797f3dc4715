import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from upres.errors import DataError, ReferenceAuditError
from upres.series import (
    Normalization,
    ResamplingTask,
    TimeSeries,
    downsample,
    linear_init,
    load_csv,
    make_dataset,
    synth_waveform,
    window_align,
)

finite_values = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=4, max_size=40
)


class TestTimeSeries:
    def test_rejects_nan(self):
        with pytest.raises(DataError, match="index 1"):
            TimeSeries(values=[0.0, np.nan, 1.0], step=1.0)

    def test_rejects_short_and_bad_step(self):
        with pytest.raises(DataError):
            TimeSeries(values=[1.0], step=1.0)
        with pytest.raises(DataError):
            TimeSeries(values=[1.0, 2.0], step=0.0)

    def test_times_are_uniform(self):
        s = TimeSeries(values=[1.0, 2.0, 3.0], step=2.5, start_time=10.0)
        np.testing.assert_allclose(s.times, [10.0, 12.5, 15.0])

    def test_values_immutable(self):
        s = TimeSeries(values=[1.0, 2.0], step=1.0)
        with pytest.raises(ValueError):
            s.values[0] = 5.0


class TestLoadCsv:
    def test_reads_back_uniform_rows(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("ts,load\n0,1.0\n900,2.0\n1800,3.0\n2700,4.0\n")
        s = load_csv(p, "load")
        assert s.step == 900.0 and len(s) == 4
        np.testing.assert_allclose(s.values, [1, 2, 3, 4])

    def test_iso_timestamps(self, tmp_path):
        p = tmp_path / "iso.csv"
        p.write_text(
            "time,v\n2023-01-01T00:00:00Z,1\n2023-01-01T00:15:00Z,2\n2023-01-01T00:30:00Z,3\n"
        )
        s = load_csv(p, "v", step_hint=900.0)
        assert s.step == 900.0

    def test_nan_row_named(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("ts,v\n0,1.0\n900,\n1800,3.0\n")
        with pytest.raises(DataError, match="row 1"):
            load_csv(p, "v")

    def test_gap_rejected(self, tmp_path):
        # 1800 s gap inside a 900 s grid must be rejected, naming the offending row
        p = tmp_path / "gap.csv"
        p.write_text("ts,v\n0,1\n900,2\n2700,3\n3600,4\n")
        with pytest.raises(DataError, match="non-uniform"):
            load_csv(p, "v")

    def test_missing_column(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("ts,v\n0,1\n900,2\n")
        with pytest.raises(DataError, match="missing column"):
            load_csv(p, "power")

    def test_step_hint_mismatch(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("ts,v\n0,1\n900,2\n1800,3\n")
        with pytest.raises(DataError, match="step_hint"):
            load_csv(p, "v", step_hint=300.0)

    def test_unsorted_rows_are_sorted(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("ts,v\n900,2\n0,1\n1800,3\n")
        s = load_csv(p, "v")
        np.testing.assert_allclose(s.values, [1, 2, 3])


class TestDownsample:
    def test_mean_blocks(self):
        s = TimeSeries(values=[0.0, 1.0, 2.0, 3.0], step=1.0)
        out = downsample(s, 2, "mean")
        np.testing.assert_allclose(out.values, [0.5, 2.5])
        assert out.step == 2.0

    def test_point_takes_first(self):
        s = TimeSeries(values=[0.0, 1.0, 2.0, 3.0], step=1.0)
        np.testing.assert_allclose(downsample(s, 2, "point").values, [0.0, 2.0])

    @pytest.mark.parametrize("mode", ["mean", "point"])
    def test_constant_stays_constant(self, mode):
        s = TimeSeries(values=[7.5] * 12, step=1.0)
        np.testing.assert_allclose(downsample(s, 3, mode).values, [7.5] * 4)

    def test_non_divisible_rejected(self):
        with pytest.raises(DataError):
            downsample(TimeSeries(values=[1.0, 2.0, 3.0], step=1.0), 2)

    @given(finite_values, st.sampled_from([2, 4]), st.floats(-3, 3), st.floats(-5, 5))
    @settings(max_examples=50, deadline=None)
    def test_mean_commutes_with_affine(self, values, factor, a, b):
        values = values[: len(values) - len(values) % factor]
        if len(values) < 2 * factor:
            return
        s = TimeSeries(values=values, step=1.0)
        scaled = TimeSeries(values=a * np.asarray(values) + b, step=1.0)
        lhs = downsample(scaled, factor, "mean").values
        rhs = a * downsample(s, factor, "mean").values + b
        np.testing.assert_allclose(lhs, rhs, atol=1e-6)


class TestLinearInit:
    def test_hand_case_with_hold_tail(self):
        s = TimeSeries(values=[0.0, 2.0], step=1.0)
        out = linear_init(s, 2)
        np.testing.assert_allclose(out.values, [0.0, 1.0, 2.0, 2.0])
        assert out.step == 0.5

    def test_constant_series(self):
        s = TimeSeries(values=[3.0] * 5, step=1.0)
        np.testing.assert_allclose(linear_init(s, 4).values, 3.0)

    @given(finite_values, st.sampled_from([2, 3, 5]))
    @settings(max_examples=50, deadline=None)
    def test_anchors_preserved_exactly(self, values, factor):
        s = TimeSeries(values=values, step=1.0)
        out = linear_init(s, factor)
        assert len(out) == len(s) * factor
        np.testing.assert_array_equal(out.values[::factor], s.values)

    def test_factor_below_two_rejected(self):
        with pytest.raises(DataError):
            linear_init(TimeSeries(values=[1.0, 2.0], step=1.0), 1)


class TestWindowAlign:
    def test_block_mean(self):
        s = TimeSeries(values=[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], step=1.0)
        np.testing.assert_allclose(window_align(s, 3, "mean").values, [1.0, 4.0])

    @given(finite_values, st.sampled_from([2, 3, 4]))
    @settings(max_examples=50, deadline=None)
    def test_point_after_linear_init_is_identity(self, values, factor):
        s = TimeSeries(values=values, step=1.0)
        back = window_align(linear_init(s, factor), factor, "point")
        np.testing.assert_array_equal(back.values, s.values)
        assert back.step == s.step

    def test_constant(self):
        s = TimeSeries(values=[2.0] * 6, step=1.0)
        np.testing.assert_allclose(window_align(s, 2, "mean").values, 2.0)

    def test_non_divisible_rejected(self):
        with pytest.raises(DataError):
            window_align(TimeSeries(values=[1.0, 2.0, 3.0], step=1.0), 2)


class TestSynthWaveform:
    def test_sine_quarter_periods(self):
        out = synth_waveform("sine", 4, period=4)
        np.testing.assert_allclose(out.values, [0.0, 1.0, 0.0, -1.0], atol=1e-12)

    def test_line_ramp(self):
        np.testing.assert_allclose(synth_waveform("line", 3, amplitude=2.0).values, [0.0, 1.0, 2.0])

    def test_square_half_period_signs(self):
        # sign flips each half period: oracle is the (k mod p) < p/2 rule
        out = synth_waveform("square", 8, period=4)
        k = np.arange(8)
        expected = np.where((k % 4) < 2, 1.0, -1.0)
        np.testing.assert_array_equal(out.values, expected)

    def test_triangle_peaks(self):
        out = synth_waveform("triangle", 8, period=8, amplitude=2.0)
        assert out.values.max() == pytest.approx(2.0)
        assert out.values.min() == pytest.approx(-2.0)

    def test_noise_free_is_seed_independent(self):
        a = synth_waveform("sine", 16, period=8, seed=1)
        b = synth_waveform("sine", 16, period=8, seed=99)
        np.testing.assert_array_equal(a.values, b.values)

    def test_noisy_is_seed_deterministic(self):
        a = synth_waveform("sine", 16, period=8, noise_std=0.1, seed=7)
        b = synth_waveform("sine", 16, period=8, noise_std=0.1, seed=7)
        c = synth_waveform("sine", 16, period=8, noise_std=0.1, seed=8)
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown waveform"):
            synth_waveform("saw", 8, period=4)


class TestMakeDataset:
    def _series(self, n_windows=10, w=96):
        values = np.sin(np.linspace(0, 20 * np.pi, n_windows * w)) + 0.1
        return TimeSeries(values=values, step=900.0)

    def test_window_counts(self):
        data = make_dataset(self._series(), ResamplingTask(factor=3, window_samples=96), 0.8)
        assert len(data.train) == 8 and len(data.test) == 2

    def test_train_inputs_standardized(self):
        data = make_dataset(self._series(), ResamplingTask(factor=3, window_samples=96), 0.8)
        train_in, _ = data.split_arrays("train")
        assert abs(train_in.mean()) < 1e-6
        assert abs(train_in.std() - 1.0) < 1e-6

    def test_normalization_roundtrip(self, rng):
        norm = Normalization(mean=3.2, std=1.7)
        x = rng.normal(size=50)
        np.testing.assert_allclose(norm.denormalize(norm.normalize(x)), x, atol=1e-9)

    def test_init_window_lengths(self):
        task = ResamplingTask(factor=3, window_samples=96)
        data = make_dataset(self._series(), task, 0.8)
        for ex in data.train + data.test:
            assert ex.x_init.shape == (task.output_samples,)

    def test_too_short_rejected(self):
        s = TimeSeries(values=np.arange(100, dtype=float), step=1.0)
        with pytest.raises(DataError):
            make_dataset(s, ResamplingTask(factor=2, window_samples=96), 0.8)

    def test_misaligned_reference_rejected(self):
        s = self._series(4)
        ref = TimeSeries(values=np.zeros(len(s) * 3 - 3), step=300.0)
        with pytest.raises(DataError):
            make_dataset(s, ResamplingTask(factor=3, window_samples=96), 0.5, reference=ref)

    def _with_reference(self):
        s = self._series(5)
        ref = TimeSeries(values=np.repeat(s.values, 3), step=300.0, start_time=s.start_time)
        return make_dataset(s, ResamplingTask(factor=3, window_samples=96), 0.6, reference=ref)

    def test_reference_access_is_counted(self):
        data = self._with_reference()
        _ = data.train[0].reference
        assert data.reference_reads == 1

    def test_guarded_reference_access_raises(self):
        data = self._with_reference()
        with data.guard_references():
            with pytest.raises(ReferenceAuditError):
                _ = data.train[0].reference
        assert data.guarded_access_attempts == 1
        # back outside the guard, access works again
        assert data.train[0].reference is not None
