import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coherent_lora import analytic as A
from coherent_lora.chirp import LoraParams
from coherent_lora.errors import ConfigurationError, DomainError, NumericalError, NumericalWarning
from coherent_lora.interference import InterfererConfig, projection_closed_form, received_pattern
from coherent_lora.montecarlo import TrialConfig, simulate_symbols

P7 = LoraParams(7)
# Ten offsets, four phases, eight symbol pairs: enough to exercise every code path quickly.
COARSE = A.QuadratureSpec(eps=12.8, pair_samples=8, pair_seed=3)


def q_oracle(x):
    with mpmath.workdps(40):
        return float(mpmath.erfc(mpmath.mpf(x) / mpmath.sqrt(2)) / 2)


class TestQFunction:
    def test_zero(self):
        assert A.q_function(0.0) == 0.5

    def test_one(self):
        assert A.q_function(1.0) == pytest.approx(0.15865525393145705, rel=1e-14)

    def test_far_tail_underflows(self):
        assert A.q_function(40.0) < 1e-300

    def test_relative_accuracy(self):
        xs = np.linspace(-8, 8, 161)
        got = A.q_function(xs)
        want = np.array([q_oracle(x) for x in xs])
        assert np.max(np.abs(got / want - 1)) < 1e-12


class TestQPowerApprox:
    @pytest.mark.xfail(strict=True, reason="exponential fit is 1.8% low at x=2 (see notes)")
    def test_single_power_at_two_within_one_percent(self):
        assert A.q_power_approx(2.0, 1) == pytest.approx(A.q_function(2.0), rel=0.01)

    def test_single_power_at_two_observed(self):
        assert A.q_power_approx(2.0, 1) / A.q_function(2.0) == pytest.approx(0.98186, abs=2e-4)

    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_origin_within_five_percent(self, q):
        assert A.q_power_approx(0.0, q) == pytest.approx(0.5 ** q, rel=0.05)

    @pytest.mark.xfail(strict=True, reason="fit value at the origin is 0.4921, error compounds with q")
    @pytest.mark.parametrize("q", [4, 5, 6, 7, 8])
    def test_origin_within_five_percent_high_powers(self, q):
        assert A.q_power_approx(0.0, q) == pytest.approx(0.5 ** q, rel=0.05)

    def test_origin_value(self):
        assert A.q_power_approx(0.0, 1) == pytest.approx(1.4 / (1.135 * math.sqrt(2 * math.pi)), rel=1e-14)

    @given(st.floats(-10, 10), st.floats(0, 5), st.integers(1, 64))
    def test_nonincreasing(self, x, dx, q):
        assert A.q_power_approx(x + dx, q) <= A.q_power_approx(x, q) + 1e-15

    def test_rejects_zero_power(self):
        with pytest.raises(DomainError):
            A.q_power_approx(1.0, 0)


class TestQuadratureSpec:
    @pytest.mark.parametrize("kw", [dict(eps=0), dict(rho=-1), dict(y_points=2), dict(pair_samples=0)])
    def test_validation(self, kw):
        with pytest.raises(ConfigurationError):
            A.QuadratureSpec(**kw)

    def test_grids(self):
        q = A.QuadratureSpec()
        assert len(q.tau_grid(128)) == 640
        assert q.tau_grid(128)[1] == pytest.approx(0.2)
        np.testing.assert_allclose(q.omega_grid(), [0, np.pi / 2, np.pi, 3 * np.pi / 2])

    def test_pair_subsample_is_deterministic_and_distinct(self):
        q = A.QuadratureSpec(pair_samples=50, pair_seed=4)
        a1, a2 = q.pairs(128)
        b1, b2 = q.pairs(128)
        np.testing.assert_array_equal(a1, b1)
        assert len(set(zip(a1, a2))) == 50

    def test_all_pairs_by_default(self):
        s1, s2 = A.QuadratureSpec().pairs(16)
        assert s1.size == 256


class TestAwgnExact:
    def test_high_snr_vanishes(self):
        assert A.ser_awgn_exact(P7, 50.0).value < 1e-12

    @pytest.mark.parametrize("snr_db", [-3.0, 0.0, 3.0, 8.0])
    def test_two_bin_reduction(self, snr_db):
        sigma = float(A.noise_sigma(2, snr_db))
        assert A.awgn_error_probability(2, snr_db) == pytest.approx(
            A.q_function(2 / (math.sqrt(2) * sigma)), rel=1e-10)

    def test_decreasing_in_snr(self):
        vals = [A.ser_awgn_exact(P7, s).value for s in np.arange(-16, -4, 0.5)]
        assert np.all(np.diff(vals) < 0)

    def test_low_snr_is_random_guessing(self):
        assert A.ser_awgn_exact(P7, -80.0).value == pytest.approx(127 / 128, abs=1e-4)

    def test_sf12_log_domain_is_finite(self):
        v = A.ser_awgn_exact(LoraParams(12), -20.0).value
        assert 0 < v < 1

    def test_frozen_values(self):
        assert A.ser_awgn_exact(P7, -6.0).value == pytest.approx(8.742804803410947e-07, rel=1e-9)

    @pytest.mark.slow
    def test_matches_monte_carlo(self):
        snr = -10.0
        est = simulate_symbols(TrialConfig(P7, snr, n_trials=10 ** 6, seed=11))
        lo, hi = est.ci95
        assert lo <= A.ser_awgn_exact(P7, snr).value <= hi


class TestAwgnBinomial:
    def test_full_order_matches_exact(self):
        for snr in (-14.0, -11.0, -8.0):
            full = A.ser_awgn_binomial(P7, snr, q_max=None)
            exact = A.ser_awgn_exact(P7, snr).value
            assert full.value == pytest.approx(exact, rel=1e-3)
            assert full.remainder_bound == 0.0

    def test_default_truncation_is_flagged(self):
        with pytest.warns(NumericalWarning):
            with pytest.raises(NumericalError):
                A.ser_awgn_binomial(P7, -6.0)

    def test_first_term_upper_bounds(self):
        with pytest.warns(NumericalWarning):
            one = A.ser_awgn_binomial(P7, -6.0, q_max=1).value
        assert one >= A.ser_awgn_binomial(P7, -6.0, q_max=None).value

    def test_high_snr_vanishes(self):
        assert A.ser_awgn_binomial(P7, 30.0, q_max=None).value == 0.0

    def test_small_n_default_is_full(self):
        p = LoraParams(7)
        assert A.ser_awgn_binomial(p, -8.0, q_max=1000).value == pytest.approx(
            A.ser_awgn_binomial(p, -8.0, q_max=None).value, rel=1e-12)


class TestAwgnFitted:
    @given(st.integers(7, 12), st.floats(-30, 5), st.floats(0.01, 5))
    def test_decreasing(self, sf, snr, step):
        a = A.awgn_fitted_value(sf, snr)
        b = A.awgn_fitted_value(sf, snr + step)
        # Strict until the tail underflows to zero.
        assert b < a or a == b == 0.0

    def test_low_snr_limit(self):
        assert A.ser_awgn_fitted(P7, -80.0).value == pytest.approx(127 / 128, abs=1e-3)

    @pytest.mark.xfail(strict=True, reason="fitted form deviates up to about 34% from the exact integral at SF7")
    def test_within_ten_percent_of_exact(self):
        for snr in np.arange(-14, -3.9, 0.5):
            exact = A.ser_awgn_exact(P7, snr).value
            if 1e-4 <= exact <= 1e-1:
                assert A.ser_awgn_fitted(P7, snr).value == pytest.approx(exact, rel=0.10)

    def test_awgn_ser_forms(self):
        assert A.awgn_ser(P7, -8.0, "exact") == A.ser_awgn_exact(P7, -8.0).value
        assert A.awgn_ser(P7, -8.0) == A.ser_awgn_fitted(P7, -8.0).value
        assert A.awgn_ser(P7, np.array([-8.0, -7.0]), "exact").shape == (2,)
        with pytest.raises(ConfigurationError):
            A.awgn_ser(P7, -8.0, "other")


class TestConditionalExact:
    cfg = InterfererConfig(83, 4, 88.0, p_i_db=20.0)

    def test_no_interference_is_awgn(self):
        quiet = InterfererConfig(83, 4, 88.4, 0.4, p_i_db=-300.0)
        for s in (0, 60, 127):
            assert A.ser_conditional_exact(s, quiet, P7, -9.0) == pytest.approx(
                A.ser_awgn_exact(P7, -9.0).value, rel=1e-9)

    def test_noiseless_correct(self):
        weak = InterfererConfig(83, 4, 88.0, p_i_db=0.0)
        v = projection_closed_form(None, weak, P7)
        assert np.max(np.delete(v, 10)) < 128 + v[10]
        assert A.ser_conditional_exact(10, weak, P7, 60.0) == pytest.approx(0.0, abs=1e-12)

    def test_noiseless_wrong(self):
        v = projection_closed_form(None, self.cfg, P7)
        assert np.max(np.delete(v, 60)) > 128 + v[60]
        assert A.ser_conditional_exact(60, self.cfg, P7, 60.0) == pytest.approx(1.0, abs=1e-12)

    def test_phase_period(self):
        a = InterfererConfig(83, 4, 88.4, 0.4, omega=0.3)
        b = InterfererConfig(83, 4, 88.4, 0.4, omega=0.3 + 2 * np.pi)
        assert A.ser_conditional_exact(7, a, P7, -6.0) == pytest.approx(
            A.ser_conditional_exact(7, b, P7, -6.0), rel=1e-9)

    def test_rejects_bad_symbol(self):
        with pytest.raises(DomainError):
            A.ser_conditional_exact(128, self.cfg, P7, 0.0)

    @pytest.mark.slow
    def test_matches_conditional_monte_carlo(self):
        cfg = InterfererConfig(83, 4, 88.4, 0.4, omega=0.0)
        s, snr_db = 123, -6.0
        R = received_pattern(cfg, P7)
        mean = R.copy()
        mean[s] += 128
        sigma = float(A.noise_sigma(128, snr_db))
        rng = np.random.default_rng(99)
        errors, trials = 0, 10 ** 6
        for _ in range(trials // 50_000):
            # Only the real parts enter the coherent decision.
            y = mean.real + sigma * rng.standard_normal((50_000, 128))
            errors += int(np.count_nonzero(np.argmax(y, axis=1) != s))
        from coherent_lora.montecarlo import wilson_interval

        lo, hi = wilson_interval(errors, trials)
        assert lo <= A.ser_conditional_exact(s, cfg, P7, snr_db) <= hi


class TestInterferenceEvaluators:
    def test_ordering_chain(self):
        for snr in (-8.0, -4.0):
            red = A.ser_bound_qmax(P7, snr, -3.0, 0.2, COARSE, search="reduced").value
            full = A.ser_bound_qmax(P7, snr, -3.0, 0.2, COARSE, search="full").value
            exact = A.ser_interference_full(P7, snr, -3.0, 0.2, COARSE).value
            assert red <= full + 1e-15
            assert full <= exact + 1e-9

    def test_exact_reduces_to_awgn(self):
        v = A.ser_interference_full(P7, -9.0, -200.0, 0.0, COARSE).value
        assert v == pytest.approx(A.ser_awgn_exact(P7, -9.0).value, abs=1e-6)

    def test_bound_reduces_to_pairwise_awgn(self):
        v = A.ser_bound_qmax(P7, -9.0, -200.0, 0.0, COARSE).value
        assert v == pytest.approx(A.q_function(math.sqrt(128 * A.snr_linear(-9.0))), abs=1e-6)

    def test_approx_reduces_to_fitted(self):
        v = A.ser_approx(P7, -9.0, -200.0, 0.0, COARSE).value
        assert v == pytest.approx(A.ser_awgn_fitted(P7, -9.0).value, abs=1e-9)

    def test_approx_low_snr_is_random_guessing(self):
        assert A.ser_approx(P7, -80.0, -3.0, 0.0, COARSE, awgn="exact").value == pytest.approx(127 / 128, abs=1e-4)

    def test_high_snr_bound_without_interference(self):
        assert A.ser_bound_qmax(P7, 20.0, -200.0, 0.0, COARSE).value < 1e-12

    def test_profile_shape(self):
        prof = A.interference_profile(P7, [-8.0, -4.0], -3.0, 0.0, COARSE)
        assert prof.values.shape == (10, 2)
        assert prof.cost > 0 and prof.method == "approx"

    def test_interference_raises_error(self):
        quiet = A.ser_approx(P7, -4.0, -200.0, 0.0, COARSE).value
        loud = A.ser_approx(P7, -4.0, 0.0, 0.0, COARSE).value
        assert loud > quiet

    def test_cost_guard(self):
        with pytest.raises(ConfigurationError):
            A.ser_interference_full(LoraParams(10), -10.0, -3.0)

    def test_bad_method_and_width(self):
        with pytest.raises(ConfigurationError):
            A.interference_profile(P7, -8.0, -3.0, method="nope")
        with pytest.raises(DomainError):
            A.ser_approx(P7, -8.0, -3.0, 0.0, COARSE, K=4)

    def test_scalar_snr_required(self):
        with pytest.raises(DomainError):
            A.ser_approx(P7, [-8.0, -4.0], -3.0, 0.0, COARSE)

    @given(st.floats(0, 2 * np.pi))
    def test_projection_has_full_turn_period(self, omega):
        cfg = InterfererConfig(5, 9, 12.8, 0.3, omega=omega)
        cfg2 = InterfererConfig(5, 9, 12.8, 0.3, omega=omega + 2 * np.pi)
        np.testing.assert_allclose(projection_closed_form(None, cfg, P7),
                                   projection_closed_form(None, cfg2, P7), atol=1e-9)


class TestFer:
    def test_single_symbol_frame_is_ser(self):
        prof = A.interference_profile(P7, [-8.0, -5.0], 0.0, 0.5, COARSE)
        fer = A.fer_from_profile(prof, 1, P7)
        np.testing.assert_allclose(fer, A.symbol_error_given_tau(prof, P7).mean(axis=0), rtol=1e-12)

    def test_monotone_in_frame_length(self):
        snrs = np.array([-10.0, -6.0, -2.0])
        prof = A.interference_profile(P7, snrs, 0.0, 0.0, COARSE)
        f1 = A.fer_from_profile(prof, 1, P7)
        f20 = A.fer_from_profile(prof, 20, P7)
        assert np.all(f20 >= f1)

    def test_partial_bounded_by_collision(self):
        snrs = np.array([-10.0, -6.0, -2.0])
        prof = A.interference_profile(P7, snrs, 0.0, 0.0, COARSE)
        assert np.all(A.fer_partial_from_profile(prof, 20, P7) <= A.fer_from_profile(prof, 20, P7) + 1e-15)

    def test_partial_single_symbol_equals_collision(self):
        prof = A.interference_profile(P7, [-7.0], -3.0, 0.0, COARSE)
        assert A.fer_partial_from_profile(prof, 1, P7)[0] == pytest.approx(A.fer_from_profile(prof, 1, P7)[0])

    def test_no_interference_limit(self):
        pn = A.ser_awgn_fitted(P7, -8.0).value
        want = 1 - (1 - pn) ** 20
        assert A.fer_collision(20, P7, -8.0, -200.0, 0.0, COARSE) == pytest.approx(want, rel=1e-9)
        assert A.fer_partial_average(20, P7, -8.0, -200.0, 0.0, COARSE) == pytest.approx(want, rel=1e-9)

    def test_exact_and_bound_methods(self):
        for method in ("bound", "exact"):
            v = A.fer_collision(5, P7, -6.0, -200.0, 0.0, COARSE, method=method)
            assert 0 <= v <= 1

    def test_array_and_scalar_returns(self):
        arr = A.fer_collision(20, P7, np.array([-8.0, -4.0]), 0.0, 0.0, COARSE)
        assert arr.shape == (2,)
        assert isinstance(A.fer_collision(20, P7, -8.0, 0.0, 0.0, COARSE), float)

    def test_rejects_empty_frame(self):
        with pytest.raises(DomainError):
            A.fer_collision(0, P7, -8.0, 0.0)


def test_checked_rejects_out_of_range():
    with pytest.raises(NumericalError):
        A._checked(1.01, "x")
    with pytest.raises(NumericalError):
        A._checked(np.nan, "x")
    assert A._checked(1 + 1e-12, "x") == 1.0


@pytest.mark.slow
def test_quadrature_convergence_at_collision_points():
    """Halving both steps moves the collision FER by under 5%."""
    snrs = np.array([-10.0, -6.0, -2.0])
    base = A.QuadratureSpec(pair_samples=2048, pair_seed=1)
    fine = A.QuadratureSpec(eps=0.1, rho=np.pi / 4, pair_samples=2048, pair_seed=1)
    for lam in (0.0, 0.5):
        a = A.fer_collision(20, P7, snrs, 0.0, lam, base)
        b = A.fer_collision(20, P7, snrs, 0.0, lam, fine)
        np.testing.assert_allclose(b, a, rtol=0.05)
