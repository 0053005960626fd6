import math

import numpy as np
import pytest

from rcacusum.simulate import (Break, ExplosiveOverflowError, RcaParams, RcaSimSpec, TimeSeries,
                               estimate_lyapunov, simulate_rca)

# E ln|Z| for standard normal Z, frozen from a 40-digit quadrature (tests/oracles.py)
E_LOG_ABS_NORMAL = -0.6351814227307391
# E ln|1.05 + 0.1 Z|, same oracle
E_LOG_EXPLOSIVE = 0.044191353378533


def noiseless(beta, n, breaks=(), y0=1.0):
    return RcaSimSpec(RcaParams(beta, 0.0, 0.0), n, breaks, burn_in=0, y0=y0)


class TestRcaParams:
    def test_rejects_negative_variance(self):
        with pytest.raises(ValueError):
            RcaParams(0.5, -0.1, 0.5)
        with pytest.raises(ValueError):
            RcaParams(0.5, 0.1, -0.5)

    def test_rejects_nonfinite_beta(self):
        with pytest.raises(ValueError):
            RcaParams(float("nan"))


class TestBreak:
    def test_needs_a_change(self):
        with pytest.raises(ValueError):
            Break(0.5)

    @pytest.mark.parametrize("tau", [0.0, 1.0, -0.2])
    def test_fraction_inside_unit_interval(self, tau):
        with pytest.raises(ValueError):
            Break(tau, beta=1.0)

    def test_start_index(self):
        assert Break(0.5, beta=1).start(100) == 51
        assert Break(0.5, beta=1, inclusive=True).start(100) == 50
        assert Break(0.9, beta=1, inclusive=True).start(401) == math.ceil(0.9 * 401)

    def test_tied_breaks_rejected(self):
        with pytest.raises(ValueError):
            RcaSimSpec(RcaParams(0.5), 100, (Break(0.5, beta=1), Break(0.501, beta=0.2)))

    def test_same_fraction_different_index_allowed(self):
        spec = RcaSimSpec(RcaParams(0.5), 100, (Break(0.5, beta=0.7, inclusive=True),
                                                Break(0.5, scale2=1.5)))
        beta, _, var2 = spec.regime_arrays()
        assert beta[49] == 0.7 and beta[48] == 0.5
        assert var2[50] == 0.75 and var2[49] == 0.5

    def test_decreasing_fractions_rejected(self):
        with pytest.raises(ValueError):
            RcaSimSpec(RcaParams(0.5), 100, (Break(0.6, beta=1), Break(0.3, beta=0.2)))


class TestSimulateRca:
    def test_noiseless_geometric(self):
        s = simulate_rca(noiseless(0.5, 10))
        np.testing.assert_array_equal(s.values[:6], [1, 0.5, 0.25, 0.125, 0.0625, 0.03125])
        assert s.n == 10

    def test_minimum_length(self):
        with pytest.raises(ValueError):
            noiseless(0.5, 5)

    def test_noiseless_exact_powers(self):
        s = simulate_rca(noiseless(0.97, 200, y0=2.0))
        expected = 2.0 * 0.97 ** np.arange(201)
        np.testing.assert_allclose(s.values, expected, rtol=1e-12)

    def test_mid_break_coefficient(self):
        # inclusive convention: the new coefficient applies from i = N/2 on
        s = simulate_rca(noiseless(0.5, 10, (Break(0.5, beta=0.7, inclusive=True),), y0=1.0))
        ratios = s.values[1:] / s.values[:-1]
        np.testing.assert_allclose(ratios[:4], 0.5)
        np.testing.assert_allclose(ratios[4:], 0.7)

    def test_default_break_never_early(self):
        s = simulate_rca(noiseless(0.5, 10, (Break(0.5, beta=0.9),)))
        ratios = s.values[1:] / s.values[:-1]
        np.testing.assert_allclose(ratios[:5], 0.5)
        np.testing.assert_allclose(ratios[5:], 0.9)

    def test_reproducible(self):
        spec = RcaSimSpec(RcaParams(0.75), 300, seed=9)
        a, b = simulate_rca(spec), simulate_rca(spec)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, simulate_rca(RcaSimSpec(RcaParams(0.75), 300, seed=10)).values)

    def test_variance_scale_after_break(self):
        # with beta0 = 0 and no coefficient noise, y_i is the additive shock itself
        spec = RcaSimSpec(RcaParams(0.0, 0.0, 0.5), 40_000, (Break(0.5, scale2=1.5),), burn_in=0, seed=3)
        y = simulate_rca(spec).values[1:]
        ratio = y[20_000:].var() / y[:20_000].var()
        assert ratio == pytest.approx(1.5, rel=0.05)

    def test_burn_in_discarded(self):
        s = simulate_rca(RcaSimSpec(RcaParams(0.5), 50, burn_in=100, seed=1))
        assert len(s) == 51
        assert s.values[0] != 0.0

    def test_overflow_raises_with_index(self):
        with pytest.raises(ExplosiveOverflowError) as err:
            simulate_rca(RcaSimSpec(RcaParams(10.0, 0.0, 0.5), 400, burn_in=0, seed=0))
        assert 290 < err.value.index < 310

    def test_series_is_read_only(self):
        s = simulate_rca(RcaSimSpec(RcaParams(0.5), 20))
        with pytest.raises(ValueError):
            s.values[0] = 1.0


class TestTimeSeries:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="index 2"):
            TimeSeries([1.0, 2.0, float("inf")])

    def test_segment_offsets(self):
        s = TimeSeries(np.arange(10.0))
        seg = s.segment(3, 7)
        np.testing.assert_array_equal(seg.values, [3, 4, 5, 6, 7])
        assert seg.n == 4
        assert seg.segment(1, 3).meta["offset"] == 4


class TestLyapunov:
    def test_degenerate_noise_exact(self):
        assert estimate_lyapunov(RcaParams(0.5, 0.0)) == math.log(0.5)

    def test_standard_normal(self):
        est = estimate_lyapunov(RcaParams(0.0, 1.0), n_draws=10**6, seed=1)
        assert est == pytest.approx(E_LOG_ABS_NORMAL, abs=0.005)

    def test_explosive_sign_and_value(self):
        p = RcaParams(1.05, 0.01)
        est = estimate_lyapunov(p, n_draws=10**6, seed=2)
        se = 0.1 / 1.05 / math.sqrt(10**6)  # sd of ln|1.05 + 0.1 Z| is close to 0.1/1.05
        assert est > 0
        assert abs(est - E_LOG_EXPLOSIVE) < 3 * se * 1.1

    def test_needs_enough_draws(self):
        with pytest.raises(ValueError):
            estimate_lyapunov(RcaParams(0.5, 0.1), n_draws=100)

    def test_zero_draws_clipped_with_warning(self, monkeypatch):
        class Zeros:
            def standard_normal(self, n):
                return np.zeros(n)

        monkeypatch.setattr(np.random, "default_rng", lambda seed=None: Zeros())
        with pytest.warns(UserWarning, match="clipped"):
            est = estimate_lyapunov(RcaParams(0.0, 1.0), n_draws=10**4)
        assert est == pytest.approx(math.log(np.finfo(float).tiny))
