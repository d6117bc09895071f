import math

import numpy as np
import pytest

from skwiretap.numerics import DomainError, gaussian_capacity, q_function, rate_distortion
from skwiretap.schemes import (
    REFERENCE_PARAMS,
    ChannelParams,
    CorruptedStateError,
    SchemeState,
    Variant,
    alpha_closed_form,
    empirical_power,
    exact_excess_probability,
    initialize,
    excess_probability_bound,
    monte_carlo_excess_probability,
    monte_carlo_excess_sweep,
    run_scheme,
    sample_final_errors,
    step,
)

P2 = REFERENCE_PARAMS


def error_variance_by_propagation(variant, params, N):
    """Variance of the final error from its coefficients on (S, eta_1..eta_N)."""
    basis = np.eye(N + 1)
    state = run_scheme(variant, params, basis[0], list(basis[1:]))
    w = np.r_[params.sigma_s2, np.full(N, params.sigma_eta2)]
    return float(np.sum(w * state.error**2)), state.error


class TestChannelParams:
    def test_reference_params(self):
        assert P2.kappa == pytest.approx(30 / 31)
        assert P2.lam == 1.0

    @pytest.mark.parametrize("field", ["sigma_s2", "sigma_eta2", "sigma_e2", "sigma_e2_tilde", "P"])
    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
    def test_rejects_nonpositive(self, field, bad):
        kwargs = dict(sigma_s2=1.0, sigma_eta2=30.0, sigma_e2=30.0, sigma_e2_tilde=40.0, P=1.0)
        kwargs[field] = bad
        with pytest.raises(DomainError):
            ChannelParams(**kwargs)


class TestInitialize:
    def test_classic_zero_forcing(self):
        params = ChannelParams(1.0, 2.0, 1.0, 1.0, 4.0)
        st = initialize(Variant.CLASSIC, params, s=0.7, eta1=0.3)
        # Y_1 = 2 * 0.7 + 0.3 = 1.7; estimate Y_1 / 2
        assert st.estimate == pytest.approx(0.85)
        assert st.error == pytest.approx(0.15)
        assert st.alpha == pytest.approx(2.0 * 1.0 / 4.0)

    def test_modified_mmse(self):
        params = ChannelParams(1.0, 2.0, 1.0, 1.0, 4.0)
        st = initialize("modified", params, s=0.7, eta1=0.3)
        assert st.estimate == pytest.approx(2.0 / 6.0 * 1.7)
        assert st.alpha == pytest.approx(1.0 * 2.0 / 6.0)

    def test_modified_beats_classic_at_every_step(self):
        for n in (1, 2, 10, 100):
            assert alpha_closed_form("modified", P2, n) < alpha_closed_form("classic", P2, n)


class TestStep:
    def test_hand_computed_step(self):
        params = ChannelParams(1.0, 1.0, 1.0, 1.0, 1.0)
        st = SchemeState(step=1, estimate=0.5, error=0.5, alpha=0.5, source=0.0)
        nxt = step(st, params, eta=0.1)
        # X = sqrt(1/0.5) * 0.5, Y = X + 0.1, beta = sqrt(0.5) / 2
        x = math.sqrt(2.0) * 0.5
        beta = math.sqrt(0.5) / 2.0
        assert nxt.estimate == pytest.approx(0.5 - beta * (x + 0.1))
        assert nxt.alpha == pytest.approx(0.25)
        assert nxt.step == 2

    def test_rejects_corrupted_alpha(self):
        st = SchemeState(step=1, estimate=0.0, error=0.0, alpha=0.0, source=0.0)
        with pytest.raises(CorruptedStateError):
            step(st, P2, 0.0)

    def test_rejects_underflowed_alpha(self):
        params = ChannelParams(1.0, 0.1, 1.0, 1.0, 10.0)
        with pytest.raises(CorruptedStateError, match="underflow"):
            run_scheme("modified", params, 0.3, [0.0] * 200)

    def test_rejects_corrupted_step(self):
        st = SchemeState(step=0, estimate=0.0, error=0.0, alpha=1.0, source=0.0)
        with pytest.raises(CorruptedStateError):
            step(st, P2, 0.0)


class TestAlpha:
    @pytest.mark.parametrize("variant", list(Variant))
    def test_recursion_matches_closed_form(self, variant):
        st = initialize(variant, P2, 0.0, 0.0)
        for n in range(2, 60):
            st = step(st, P2, 0.0)
            assert st.alpha == pytest.approx(alpha_closed_form(variant, P2, n), rel=1e-12)

    @pytest.mark.parametrize("variant", list(Variant))
    @pytest.mark.parametrize("N", [1, 2, 7, 40])
    def test_alpha_is_true_error_variance(self, variant, N):
        # oracle: the error is linear in (S, eta); its exact variance from the coefficients
        var, _ = error_variance_by_propagation(variant, P2, N)
        assert var == pytest.approx(alpha_closed_form(variant, P2, N), rel=1e-10)

    def test_domain(self):
        with pytest.raises(DomainError):
            alpha_closed_form("classic", P2, 0)


class TestExcessProbability:
    def test_formula(self):
        a = alpha_closed_form("classic", P2, 10)
        assert exact_excess_probability("classic", P2, 10, 0.5) == pytest.approx(2 * q_function(math.sqrt(0.5 / a)))

    @pytest.mark.parametrize("N", [1, 5, 50, 200])
    @pytest.mark.parametrize("d", [0.1, 0.5, 0.9])
    def test_modified_equals_bound_expression(self, N, d):
        assert exact_excess_probability("modified", P2, N, d) == pytest.approx(excess_probability_bound(P2, N, d), rel=1e-12)

    def test_bound_expression_by_hand(self):
        r, c = rate_distortion(0.5, 1.0), gaussian_capacity(1.0, 30.0)
        assert excess_probability_bound(P2, 3, 0.5) == pytest.approx(2 * q_function(math.exp(-r + 3 * c)))

    def test_decreasing_in_N(self):
        p = [exact_excess_probability("modified", P2, n, 0.5) for n in range(1, 100)]
        assert np.all(np.diff(p) < 0)

    @pytest.mark.parametrize("d", [0.0, 1.0])
    def test_domain(self, d):
        with pytest.raises(DomainError):
            exact_excess_probability("classic", P2, 5, d)


class TestMonteCarlo:
    @pytest.mark.parametrize("variant", list(Variant))
    def test_error_moments(self, variant):
        N, n = 30, 200_000
        err = sample_final_errors(variant, P2, N, n, seed=11)
        alpha = alpha_closed_form(variant, P2, N)
        assert abs(err.mean()) <= 5 * math.sqrt(alpha / n)
        # Var of the sample variance of a Gaussian is 2 alpha^2 / n
        assert abs(err.var() - alpha) <= 5 * alpha * math.sqrt(2.0 / n)

    def test_estimate_within_interval(self):
        rep = monte_carlo_excess_probability("modified", P2, 20, 0.5, 300_000, seed=2)
        exact = exact_excess_probability("modified", P2, 20, 0.5)
        assert abs(rep.estimate - exact) <= rep.ci_halfwidth
        assert rep.trials == 300_000 and rep.seed == 2
        assert rep.hits == round(rep.estimate * rep.trials)

    def test_sweep_matches_single(self):
        sweep = monte_carlo_excess_sweep("classic", P2, 5, [0.1, 0.5], 70_000, seed=9)
        single = monte_carlo_excess_probability("classic", P2, 5, 0.5, 70_000, seed=9)
        assert sweep[1] == single

    def test_worker_invariance(self):
        a = monte_carlo_excess_sweep("modified", P2, 8, [0.2, 0.6], 200_000, seed=5, workers=1)
        b = monte_carlo_excess_sweep("modified", P2, 8, [0.2, 0.6], 200_000, seed=5, workers=3)
        assert a == b

    def test_seed_changes_result(self):
        a = monte_carlo_excess_probability("modified", P2, 8, 0.5, 100_000, seed=5)
        b = monte_carlo_excess_probability("modified", P2, 8, 0.5, 100_000, seed=6)
        assert a.hits != b.hits

    def test_rejects_bad_arguments(self):
        with pytest.raises(DomainError):
            monte_carlo_excess_probability("modified", P2, 8, 0.5, 0, seed=1)
        with pytest.raises(ValueError):
            monte_carlo_excess_probability("modified", P2, 8, 0.5, 10, seed=-1)


class TestEmpiricalPower:
    @pytest.mark.parametrize("variant", list(Variant))
    def test_every_step_meets_power(self, variant):
        prof = empirical_power(variant, P2, 12, 200_000, seed=4)
        assert prof.mean.shape == (12,)
        np.testing.assert_array_less(np.abs(prof.mean - P2.P), 5 * prof.stderr)
