import numpy as np
import pytest

from upres.baselines import GpConfig, _chol_with_jitter, upsample_gp, upsample_linear
from upres.errors import DataError, KernelNotPositiveDefiniteError
from upres.series import TimeSeries, linear_init


def dense_posterior_mean_oracle(s: TimeSeries, factor: int, length_scale: float,
                                signal_variance: float, noise_variance: float) -> np.ndarray:
    """Closed-form posterior mean via a plain dense solve (no cholesky)."""
    n = len(s)
    t = np.arange(n) * s.step
    tq = np.arange(n * factor) * (s.step / factor)

    def kern(a, b):
        return signal_variance * np.exp(-0.5 * ((a[:, None] - b[None, :]) / length_scale) ** 2)

    offset = s.values.mean()
    y = s.values - offset
    mean = kern(tq, t) @ np.linalg.solve(kern(t, t) + noise_variance * np.eye(n), y) + offset
    mean[(n - 1) * factor + 1 :] = s.values[-1]
    return mean


class TestGpConfig:
    def test_bad_hyperparameters_rejected(self):
        with pytest.raises(DataError):
            GpConfig(length_scale=-1.0)
        with pytest.raises(DataError):
            GpConfig(noise_variance=0.0)


class TestUpsampleGp:
    def test_anchor_reproduction(self, rng):
        s = TimeSeries(values=rng.normal(size=8), step=900.0)
        out = upsample_gp(s, 3, GpConfig(noise_variance=1e-6))
        np.testing.assert_allclose(out.values[::3], s.values, atol=1e-4)

    def test_constant_input_exact(self):
        s = TimeSeries(values=np.full(6, 5.25), step=60.0)
        out = upsample_gp(s, 4)
        np.testing.assert_allclose(out.values, 5.25, atol=1e-6)

    def test_three_anchor_dense_oracle(self):
        s = TimeSeries(values=[1.0, -0.5, 2.0], step=10.0)
        cfg = GpConfig(length_scale=10.0, signal_variance=1.0, noise_variance=1e-6)
        out = upsample_gp(s, 4, cfg)
        expected = dense_posterior_mean_oracle(s, 4, 10.0, 1.0, 1e-6)
        np.testing.assert_allclose(out.values, expected, atol=1e-6)

    def test_ten_anchor_dense_oracle(self, rng):
        s = TimeSeries(values=rng.normal(size=10), step=300.0)
        cfg = GpConfig(length_scale=450.0, signal_variance=2.0, noise_variance=1e-5)
        out = upsample_gp(s, 3, cfg)
        expected = dense_posterior_mean_oracle(s, 3, 450.0, 2.0, 1e-5)
        np.testing.assert_allclose(out.values, expected, atol=1e-6)

    def test_output_shape_and_step(self):
        s = TimeSeries(values=np.arange(5, dtype=float), step=900.0)
        out = upsample_gp(s, 3)
        assert len(out) == 15 and out.step == pytest.approx(300.0)

    def test_hold_tail_matches_linear_seed_policy(self, rng):
        s = TimeSeries(values=rng.normal(size=6), step=1.0)
        out = upsample_gp(s, 4)
        tail = out.values[5 * 4 + 1 :]
        np.testing.assert_allclose(tail, s.values[-1])
        np.testing.assert_allclose(linear_init(s, 4).values[5 * 4 + 1 :], s.values[-1])

    def test_linear_in_observations(self, rng):
        values = rng.normal(size=7)
        s = TimeSeries(values=values, step=5.0)
        scaled = TimeSeries(values=3.0 * values - 2.0, step=5.0)
        cfg = GpConfig(length_scale=5.0)
        lhs = upsample_gp(scaled, 2, cfg).values
        rhs = 3.0 * upsample_gp(s, 2, cfg).values - 2.0
        np.testing.assert_allclose(lhs, rhs, atol=1e-8)

    def test_tiny_length_scale_falls_back_to_prior_mean(self, rng):
        values = rng.normal(size=8)
        values -= values.mean()  # normalized, zero-mean units
        s = TimeSeries(values=values, step=100.0)
        out = upsample_gp(s, 4, GpConfig(length_scale=1.0))  # step / 100
        interior_offgrid = [i for i in range(4, len(out) - 4) if i % 4 == 2]
        np.testing.assert_allclose(out.values[interior_offgrid], 0.0, atol=1e-6)

    def test_optimize_smoke(self, rng):
        s = TimeSeries(values=np.sin(np.linspace(0, 3 * np.pi, 12)), step=60.0)
        cfg = GpConfig(optimize=True, optimize_steps=20)
        out = upsample_gp(s, 2, cfg)
        assert np.all(np.isfinite(out.values))
        np.testing.assert_allclose(out.values[::2], s.values, atol=0.05)

    def test_factor_below_two_rejected(self):
        with pytest.raises(DataError):
            upsample_gp(TimeSeries(values=[1.0, 2.0], step=1.0), 1)


class TestJitterLadder:
    def test_reports_ladder_on_indefinite_matrix(self):
        bad = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
        with pytest.raises(KernelNotPositiveDefiniteError) as err:
            _chol_with_jitter(bad)
        assert len(err.value.jitter_tried) == 6

    def test_mild_indefiniteness_recovered_by_jitter(self):
        base = np.eye(3)
        base[0, 0] = -1e-9  # slightly indefinite; the ladder must rescue it
        chol, jitter = _chol_with_jitter(base)
        assert jitter > 0
        assert np.all(np.isfinite(chol))


class TestLinearBaseline:
    def test_is_linear_init(self, rng):
        s = TimeSeries(values=rng.normal(size=9), step=2.0)
        np.testing.assert_array_equal(upsample_linear(s, 3).values, linear_init(s, 3).values)
