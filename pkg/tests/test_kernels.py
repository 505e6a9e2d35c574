import math

import numpy as np
import pytest
from scipy import integrate

import levymaps as lm
from levymaps.kernels import exp_integral, exp_integral_inverse, parse_p_expression


class TestKernelFromP:
    def test_exponential_weight(self):
        k = lm.kernel_from_p(lambda u: math.exp(-u), math.inf)
        assert k.s0 == pytest.approx(1.0, abs=1e-12)
        assert k.f_eval(1.0 / math.e) == pytest.approx(1.0, abs=1e-10)

    def test_flat_weight(self):
        k = lm.kernel_from_p(lambda u: 1.0, 1.0)
        for s in (0.1, 0.5, 0.9):
            assert k.f_eval(s) == pytest.approx(1.0 - s, abs=1e-10)

    def test_gaussian_weight_s0(self):
        k = lm.kernel_from_p(lambda u: math.exp(-u * u), math.inf)
        oracle = integrate.quad(lambda u: math.exp(-u * u), 0, np.inf)[0]
        assert k.s0 == pytest.approx(math.sqrt(math.pi) / 2, abs=1e-10)
        assert k.s0 == pytest.approx(oracle, abs=1e-10)

    def test_nonmonotone_weight_rejected(self):
        with pytest.raises(ValueError):
            lm.kernel_from_p(lambda u: u * math.exp(-u), math.inf)

    def test_divergent_moment_rejected(self):
        with pytest.raises((ValueError, lm.QuadratureError)):
            lm.kernel_from_p(lambda u: 1.0 / (1.0 + u), math.inf)


class TestBuiltins:
    def test_names(self, kernels):
        assert set(kernels) == {"u", "upsilon", "g", "phi", "psi"}
        assert kernels["psi"].is_composition

    def test_u_inverse(self, kernels):
        assert lm.f_eval(kernels["u"], 0.25) == 0.75
        assert lm.f_eval(kernels["u"], 0.1) == pytest.approx(0.9)

    def test_upsilon_inverse(self, kernels):
        assert lm.f_eval(kernels["upsilon"], 0.5) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_g_roundtrip(self, kernels):
        g = kernels["g"]
        assert lm.f_eval(g, g.g(1.0)) == pytest.approx(1.0, abs=1e-9)
        assert g.s0 == pytest.approx(math.sqrt(math.pi) / 2, abs=1e-15)

    def test_psi_alpha_minus_one_is_upsilon(self, kernels):
        pa = lm.builtin_kernel("psi_alpha", alpha=-1.0)
        for s in (0.05, 0.3, 0.5, 0.7, 0.95):
            assert pa.f_eval(s) == pytest.approx(kernels["upsilon"].f_eval(s), abs=1e-9)

    def test_phi_beta_alpha_special_case_matches_u(self, kernels):
        pb = lm.builtin_kernel("phi_beta_alpha", alpha=-1.0, beta=-2.0)
        assert pb.s0 == pytest.approx(1.0)
        for s in (0.1, 0.5, 0.9):
            assert pb.f_eval(s) == pytest.approx(kernels["u"].f_eval(s), abs=1e-12)
        # cumulant transforms agree as well (reflection invariance of the flat weight)
        tr = lm.LevyTriplet(np.array([[1.0]]), None, np.array([0.4]))
        for z0 in (0.7, 2.1):
            a = lm.map_cumulant(pb, tr, [z0])
            b = lm.map_cumulant(kernels["u"], tr, [z0])
            assert a == pytest.approx(b, rel=1e-10)

    def test_psi_alpha_general(self):
        pa = lm.builtin_kernel("psi_alpha", alpha=-0.5)
        assert pa.s0 == pytest.approx(math.gamma(0.5), rel=1e-13)
        s = 0.4 * pa.s0
        assert pa.g(pa.f_eval(s)) == pytest.approx(s, abs=1e-12)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            lm.builtin_kernel("psi_alpha", alpha=0.5)
        with pytest.raises(ValueError):
            lm.builtin_kernel("phi_beta_alpha", alpha=-0.5, beta=-1.0)
        with pytest.raises(ValueError):
            lm.builtin_kernel("nonsense")

    def test_out_of_range_s(self, kernels):
        with pytest.raises(ValueError):
            lm.f_eval(kernels["u"], 1.5)
        with pytest.raises(ValueError):
            lm.f_eval(kernels["upsilon"], 0.0)


class TestKernelInvariants:
    @pytest.mark.parametrize("name", ["u", "upsilon", "g"])
    def test_g_endpoints_and_roundtrip(self, name):
        k = lm.builtin_kernel(name)
        hi = k.t0 if math.isfinite(k.t0) else 6.0
        ts = np.linspace(hi * 1e-3, hi * 0.999, 24)
        gs = np.array([k.g(t) for t in ts])
        assert np.all(np.diff(gs) < 0)
        # g(0+) = s0 and g vanishes toward the end of the weight's reach
        assert k.g(hi * 1e-9) == pytest.approx(k.s0, rel=1e-8)
        assert k.g(k.effective_reach()) < 1e-6 * k.s0
        for t in ts[::6]:
            assert k.f_eval(k.g(t)) == pytest.approx(t, rel=1e-9)

    @pytest.mark.parametrize("name", ["u", "upsilon", "g"])
    def test_square_integral_substitution_identity(self, name):
        # ∫_0^s0 f(s)^2 ds computed directly in s equals ∫ t^2 p(t) dt
        k = lm.builtin_kernel(name)
        direct = integrate.quad(lambda s: k.f_eval(s) ** 2, 0, k.s0, limit=300)[0]
        assert k.square_integral() == pytest.approx(direct, abs=1e-8)

    def test_numeric_kernel_substitution_identity(self):
        k = lm.kernel_from_p(lambda u: 1.0 / (1.0 + u) ** 4, math.inf)
        direct = integrate.quad(lambda s: k.f_eval(s) ** 2, 0, k.s0, limit=300)[0]
        assert k.square_integral() == pytest.approx(direct, abs=1e-8)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0])
    def test_upsilon_power_integrals_are_gamma(self, alpha):
        k = lm.builtin_kernel("upsilon")
        oracle = integrate.quad(lambda s: math.log(1.0 / s) ** alpha, 0, 1, limit=300)[0]
        assert k.weight_integral(alpha) == pytest.approx(math.gamma(alpha + 1.0), abs=1e-8)
        assert oracle == pytest.approx(math.gamma(alpha + 1.0), abs=1e-8)


class TestDiagnostics:
    def test_exp_integral_inverse_roundtrip(self):
        for t in (0.05, 0.5, 2.0):
            assert exp_integral_inverse(exp_integral(t)) == pytest.approx(t, rel=1e-10)


class TestKernelSpecs:
    def test_expression_parser(self):
        p = parse_p_expression("exp(-u^2)")
        assert p(1.0) == pytest.approx(math.exp(-1.0))
        p2 = parse_p_expression("1/(1+u)^4")
        assert p2(1.0) == pytest.approx(1.0 / 16.0)

    def test_expression_rejects_unsafe(self):
        with pytest.raises(lm.SchemaError):
            parse_p_expression("__import__('os')")
        with pytest.raises(lm.SchemaError):
            parse_p_expression("u.denominator")

    def test_kernel_from_spec(self):
        k = lm.kernel_from_spec({"name": "upsilon"})
        assert k.name == "upsilon"
        k2 = lm.kernel_from_spec({"p": "exp(-u)", "t0": 1e9})
        assert k2.s0 == pytest.approx(1.0, abs=1e-9)
        with pytest.raises(lm.SchemaError):
            lm.kernel_from_spec({"p": "exp(-u)"})
        with pytest.raises(lm.SchemaError):
            lm.kernel_from_spec({"name": "wat"})
