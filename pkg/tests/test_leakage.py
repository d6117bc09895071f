import math

import numpy as np
import pytest
import sympy as sp

from skwiretap.leakage import (
    exact_leakage,
    f2_bound,
    input_linear_forms,
    leakage_covariance,
    leakage_profile,
    modified_input_closed_form,
    n3_search,
    ntilde2_classic,
)
from skwiretap.numerics import DomainError
from skwiretap.schemes import REFERENCE_PARAMS, ChannelParams, Variant, empirical_power

P2 = REFERENCE_PARAMS


def _symbolic_one_shot_leakage():
    """I(S; lam S + eta_e, lam S + eta + eta_e~) from 2x2 and 3x3 determinants."""
    ss, se, sh, st, p = sp.symbols("sigma_s2 sigma_e2 sigma_eta2 sigma_e2_tilde P", positive=True)
    lam = sp.sqrt(p / ss)
    cov = sp.Matrix(
        [
            [ss, lam * ss, lam * ss],
            [lam * ss, p + se, p],
            [lam * ss, p, p + sh + st],
        ]
    )
    ratio = sp.simplify(ss * cov[1:, 1:].det() / cov.det())
    closed = 1 + p / se + p / (sh + st)
    assert sp.simplify(ratio - closed) == 0
    return sp.lambdify((ss, sh, se, st, p), sp.log(ratio) / 2, "mpmath")


ONE_SHOT = _symbolic_one_shot_leakage()


def random_params(rng):
    v = 10 ** rng.uniform(-1, 2, size=4)
    return ChannelParams(sigma_s2=v[0], sigma_eta2=v[1], sigma_e2=v[2], sigma_e2_tilde=v[3], P=rng.uniform(0.1, 10))


class TestLinearForms:
    @pytest.mark.parametrize("variant", list(Variant))
    def test_first_input(self, variant):
        f = input_linear_forms(variant, P2, 1)[0]
        assert f.s_coeff == pytest.approx(math.sqrt(P2.P / P2.sigma_s2))
        assert f.noise_coeffs == ()
        assert f.step == 1

    def test_modified_matches_closed_form(self):
        rng = np.random.default_rng(8)
        for params in [P2] + [random_params(rng) for _ in range(10)]:
            forms = input_linear_forms("modified", params, 40)
            for n, f in enumerate(forms, 1):
                ref = modified_input_closed_form(params, n)
                assert f.s_coeff == pytest.approx(ref.s_coeff, abs=1e-10)
                np.testing.assert_allclose(f.noise_coeffs, ref.noise_coeffs, atol=1e-10)

    @pytest.mark.parametrize("variant", list(Variant))
    def test_matches_state_machine(self, variant):
        # oracle: drive the scheme's own step() with basis vectors
        from skwiretap.schemes import channel_input, initialize, step

        rng = np.random.default_rng(12)
        for params in [P2] + [random_params(rng) for _ in range(5)]:
            n = 30
            basis = np.eye(n + 1)
            state = initialize(variant, params, basis[0], basis[1])
            forms = input_linear_forms(variant, params, n)
            for i in range(2, n + 1):
                x = channel_input(state, params)
                assert forms[i - 1].s_coeff == pytest.approx(x[0], rel=1e-9, abs=1e-13)
                np.testing.assert_allclose(forms[i - 1].noise_coeffs, x[1:i], rtol=1e-9, atol=1e-13)
                state = step(state, params, basis[i])

    def test_survives_error_variance_underflow(self):
        # kappa ~ 0.0099, so alpha_200 ~ 1e-400 is not representable
        params = ChannelParams(1.0, 0.1, 1.0, 1.0, 10.0)
        forms = input_linear_forms("modified", params, 200)
        ref = modified_input_closed_form(params, 200)
        assert forms[-1].s_coeff == pytest.approx(ref.s_coeff, rel=1e-9)
        np.testing.assert_allclose(forms[-1].noise_coeffs, ref.noise_coeffs, rtol=1e-9, atol=1e-300)
        assert forms[-1].variance(params) == pytest.approx(params.P, rel=1e-10)
        value = exact_leakage("modified", params, 200)
        assert math.isfinite(value) and value <= f2_bound(params, 200) + 1e-10

    def test_classic_later_inputs_carry_no_source(self):
        forms = input_linear_forms("classic", P2, 10)
        assert forms[1].s_coeff == pytest.approx(0.0, abs=1e-15)
        assert forms[1].noise_coeffs == pytest.approx((math.sqrt(P2.P / P2.sigma_eta2),))
        for f in forms[1:]:
            assert abs(f.s_coeff) < 1e-12

    @pytest.mark.parametrize("variant", list(Variant))
    def test_per_step_power(self, variant):
        rng = np.random.default_rng(1)
        for params in [P2] + [random_params(rng) for _ in range(10)]:
            for f in input_linear_forms(variant, params, 60):
                assert f.variance(params) == pytest.approx(params.P, rel=1e-10)
                assert len(f.noise_coeffs) == f.step - 1

    @pytest.mark.parametrize("variant", list(Variant))
    def test_power_agrees_with_simulation(self, variant):
        prof = empirical_power(variant, P2, 6, 200_000, seed=21)
        analytic = np.array([f.variance(P2) for f in input_linear_forms(variant, P2, 6)])
        np.testing.assert_array_less(np.abs(prof.mean - analytic), 5 * prof.stderr)

    def test_domain(self):
        with pytest.raises(DomainError):
            input_linear_forms("classic", P2, 0)


class TestExactLeakage:
    @pytest.mark.parametrize("variant", list(Variant))
    def test_one_shot_symbolic_oracle(self, variant):
        rng = np.random.default_rng(4)
        for params in [P2] + [random_params(rng) for _ in range(20)]:
            expected = float(ONE_SHOT(params.sigma_s2, params.sigma_eta2, params.sigma_e2, params.sigma_e2_tilde, params.P))
            assert exact_leakage(variant, params, 1) == pytest.approx(expected, rel=1e-10)

    def test_pure_noise_eavesdropper(self):
        params = ChannelParams(1.0, 30.0, 1e12, 1e12, 1.0)
        for N in (1, 10, 100):
            assert exact_leakage("modified", params, N) < 1e-6

    def test_covariance_shape_and_symmetry(self):
        c = leakage_covariance("modified", P2, 5)
        assert c.shape == (11, 11)
        np.testing.assert_allclose(c, c.T, atol=0)
        np.testing.assert_allclose(np.diag(c)[1:6], P2.P + P2.sigma_e2)
        np.testing.assert_allclose(np.diag(c)[6:], P2.P + P2.sigma_eta2 + P2.sigma_e2_tilde)

    def test_covariance_by_sampling(self):
        # oracle: sample covariance of simulated (S, Z, Z~) built directly from the channel model
        from skwiretap.schemes import channel_input, initialize, step

        rng = np.random.default_rng(12)
        n, N = 400_000, 3
        s = rng.standard_normal(n)
        eta = rng.standard_normal((N, n)) * math.sqrt(P2.sigma_eta2)
        xs = [P2.lam * s]
        st = initialize("modified", P2, s, eta[0])
        for i in range(1, N):
            xs.append(channel_input(st, P2))
            st = step(st, P2, eta[i])
        z = [x + rng.standard_normal(n) * math.sqrt(P2.sigma_e2) for x in xs]
        zt = [x + e + rng.standard_normal(n) * math.sqrt(P2.sigma_e2_tilde) for x, e in zip(xs, eta)]
        emp = np.cov(np.vstack([s] + z + zt))
        np.testing.assert_allclose(emp, leakage_covariance("modified", P2, N), atol=0.5)
        np.testing.assert_allclose(emp[0], leakage_covariance("modified", P2, N)[0], atol=0.02)

    @pytest.mark.parametrize("variant", list(Variant))
    def test_total_information_nondecreasing(self, variant):
        total = [n * exact_leakage(variant, P2, n) for n in range(1, 80)]
        assert np.all(np.diff(total) >= -1e-12)

    def test_more_eavesdropper_noise_less_leakage(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            p = random_params(rng)
            base = exact_leakage("modified", p, 10)
            noisier_e = ChannelParams(p.sigma_s2, p.sigma_eta2, 2 * p.sigma_e2, p.sigma_e2_tilde, p.P)
            noisier_t = ChannelParams(p.sigma_s2, p.sigma_eta2, p.sigma_e2, 2 * p.sigma_e2_tilde, p.P)
            assert exact_leakage("modified", noisier_e, 10) < base
            assert exact_leakage("modified", noisier_t, 10) < base

    def test_profile(self):
        prof = leakage_profile("modified", P2, 30, workers=2)
        assert prof.N_max == 30 and len(prof.exact) == len(prof.f2) == 30
        assert all(e <= f for e, f in zip(prof.exact, prof.f2))
        assert np.all(np.diff(prof.f2) < 0)
        assert prof.exact == leakage_profile("modified", P2, 30).exact


class TestF2:
    def test_one_shot(self):
        assert f2_bound(P2, 1) == pytest.approx(70 / 2400, rel=1e-14)

    def test_prefactor(self):
        # F2(N) * 2N / (1 - kappa^N) recovers the prefactor 31 * 70 / 1200
        N = 7
        assert f2_bound(P2, N) * 2 * N / (1 - P2.kappa**N) == pytest.approx(31 * 70 / 1200, rel=1e-13)

    def test_limit(self):
        assert f2_bound(P2, 10**6) < 1e-5

    def test_strictly_decreasing(self):
        f = np.array([f2_bound(P2, n) for n in range(1, 2000)])
        assert np.all(f > 0) and np.all(np.diff(f) < 0)

    def test_domain(self):
        with pytest.raises(DomainError):
            f2_bound(P2, 0)


class TestSecrecyBlocklengths:
    def test_n3_two_sided(self):
        n3 = n3_search(P2, 0.01)
        assert f2_bound(P2, n3 - 1) > 0.01 >= f2_bound(P2, n3)
        assert n3 == 85

    def test_n3_boundary(self):
        assert n3_search(P2, f2_bound(P2, 1)) == 1
        assert n3_search(P2, 1.0) == 1

    @pytest.mark.parametrize("delta", [0.3, 0.05, 0.01, 1e-3, 1e-4])
    def test_n3_matches_linear_scan(self, delta):
        rng = np.random.default_rng(31)
        for params in [P2] + [random_params(rng) for _ in range(5)]:
            n = 1
            while f2_bound(params, n) > delta:
                n += 1
            assert n3_search(params, delta) == n

    def test_n3_monotone_in_delta(self):
        deltas = [0.02, 0.01, 0.005, 0.0025]
        ns = [n3_search(P2, d) for d in deltas]
        assert ns == sorted(ns)

    def test_ntilde2_reference(self):
        import mpmath as mp

        mp.mp.dps = 40
        value = mp.mpf(50) * mp.log(mp.mpf(31) / 30 * mp.mpf(41) / 40)
        assert ntilde2_classic(P2, 0.01) == int(mp.ceil(value)) == 3

    def test_ntilde2_tiny_power(self):
        assert ntilde2_classic(ChannelParams(1.0, 30.0, 30.0, 40.0, 1e-300), 0.01) == 1

    def test_ntilde2_doubling_delta(self):
        params = ChannelParams(1.0, 1.0, 0.5, 0.7, 3.0)
        pre = (math.log1p(3.0 / 0.5) + math.log1p(3.0 / 0.7)) / (2 * 0.001)
        assert ntilde2_classic(params, 0.001) == math.ceil(pre)
        assert ntilde2_classic(params, 0.002) == math.ceil(pre / 2)

    @pytest.mark.parametrize("delta", [0.0, -1.0, float("nan")])
    def test_delta_domain(self, delta):
        with pytest.raises(DomainError):
            n3_search(P2, delta)
        with pytest.raises(DomainError):
            ntilde2_classic(P2, delta)
