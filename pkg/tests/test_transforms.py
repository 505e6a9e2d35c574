import math

import numpy as np
import pytest
from scipy import integrate

import levymaps as lm
from conftest import polar, single_ray

SQRT_PI_4 = math.sqrt(math.pi) / 4.0


class TestMapCumulant:
    def test_gaussian_variance_factors(self, kernels):
        gauss = lm.LevyTriplet(np.array([[1.0]]), None, np.array([0.0]))
        z = np.array([1.5])
        expected = {"upsilon": 2.0, "u": 1.0 / 3.0, "g": SQRT_PI_4, "phi": 0.5}
        for name, factor in expected.items():
            got = lm.map_cumulant(kernels[name], gauss, z)
            assert got == pytest.approx(-0.5 * factor * z[0] ** 2, rel=1e-10)

    def test_phi_requires_log_moment(self, kernels):
        grid = np.geomspace(1e-6, 1e6, 2048)
        vals = np.where(grid > math.e, 1.0 / (grid * np.log(np.maximum(grid, 2.0)) ** 2), 0.0)
        bad = lm.LevyTriplet(np.zeros((1, 1)), single_ray(lm.GridRadial(grid, vals)), np.zeros(1))
        with pytest.raises(lm.DomainError):
            lm.map_cumulant(kernels["phi"], bad, [1.0])
        with pytest.raises(lm.DomainError):
            lm.map_triplet(kernels["phi"], bad)

    def test_cumulant_fn_symmetry(self, kernels, battery):
        fn = lm.mapped_cumulant_fn(kernels["upsilon"], battery["mix"])
        zs = [np.array([v]) for v in (0.5, 1.9)]
        lm.transforms.validate_cumulant_fn(fn, zs)


class TestMapTriplet:
    def test_upsilon_on_gaussian(self, kernels):
        gauss = lm.LevyTriplet(np.array([[1.0]]), None, np.array([0.0]))
        out = lm.map_triplet(kernels["upsilon"], gauss)
        assert out.A[0, 0] == pytest.approx(2.0, abs=1e-10)
        assert out.nu is None
        assert out.provenance == ("upsilon",)

    def test_drift_only_scales_by_first_integral(self, kernels):
        tr = lm.LevyTriplet(np.zeros((1, 1)), None, np.array([0.7]))
        for name in ("u", "upsilon", "g", "phi"):
            k = kernels[name]
            out = lm.map_triplet(k, tr)
            assert out.gamma[0] == pytest.approx(0.7 * k.first_integral(), rel=1e-10)

    @pytest.mark.parametrize("name", ["u", "upsilon", "g", "phi", "psi"])
    def test_path_consistency(self, kernels, battery, name):
        # two independent computation paths: triplet transform + exponent
        # evaluation versus direct cumulant transform
        kernel = kernels[name]
        rng = np.random.default_rng(7)
        for member in ("cp_atom", "tempered"):
            tr = battery[member]
            mapped = lm.map_triplet(kernel, tr)
            for z in rng.uniform(-3.0, 3.0, size=(10, 1)):
                a = lm.cumulant_eval(mapped, z)
                b = lm.map_cumulant(kernel, tr, z)
                assert abs(a - b) < 1e-6


class TestMapRadial:
    def test_atom_maps_to_weight(self, kernels):
        atom = lm.AtomicRadial(((1.0, 1.0),))
        grid = np.geomspace(1e-3, 1e3, 256)
        checks = {
            "upsilon": lambda u: np.exp(-u),
            "u": lambda u: (u < 1.0).astype(float),
            "g": lambda u: np.exp(-(u**2)),
        }
        for name, pfun in checks.items():
            out = lm.map_radial(kernels[name], atom, grid=grid)
            assert np.max(np.abs(out.values - pfun(out.r))) < 1e-6

    def test_power_law_under_upsilon_gamma_factor(self, kernels):
        alpha = 0.7
        dens = lm.transforms.radial_transform_density(kernels["upsilon"], lm.PowerLawRadial(alpha, 1.0))
        for u in (0.3, 1.0, 2.5):
            assert dens(u) * u ** (alpha + 1.0) == pytest.approx(math.gamma(alpha + 1.0), rel=1e-6)

    @pytest.mark.parametrize("name", ["u", "upsilon", "g"])
    def test_tail_preservation(self, kernels, name):
        # independent double-quadrature oracle: ∫_v^inf l(u) du =
        # ∫_0^s0 nu((v / f(s), inf)) ds
        kernel = kernels[name]
        rm = lm.TemperedRadial(0.5, 1.0, 1.0)
        mapped = lm.map_radial(kernel, rm)
        for v in (0.5, 1.0, 2.0):
            oracle = integrate.quad(
                lambda s: rm.tail(v / kernel.f_eval(s)), 0, kernel.s0,
                epsabs=1e-11, epsrel=1e-10, limit=300,
            )[0]
            assert mapped.tail(v) == pytest.approx(oracle, abs=1e-6)

    @pytest.mark.parametrize("name", ["u", "upsilon", "g", "phi", "psi"])
    def test_output_nonnegative_decreasing(self, kernels, name):
        seed = lm.AtomicRadial(((0.5, 1.0), (2.0, 0.5)))
        out = lm.map_radial(kernels[name], seed, grid=np.geomspace(1e-3, 1e3, 200))
        assert np.all(out.values >= 0)
        rises = np.diff(out.values)
        scale = np.maximum(np.abs(out.values[:-1]), 1e-30)
        assert np.max(rises / scale) < 1e-9


class TestIterateMap:
    def test_double_u_on_gaussian(self, kernels):
        gauss = lm.LevyTriplet(np.array([[1.0]]), None, np.array([0.0]))
        out = lm.iterate_map(kernels["u"], gauss, 2)
        assert out.A[0, 0] == pytest.approx(1.0 / 9.0, rel=1e-10)
        assert out.provenance == ("u", "u")

    def test_single_iteration_equals_map(self, kernels, battery):
        a = lm.iterate_map(kernels["upsilon"], battery["cp_atom"], 1)
        b = lm.map_triplet(kernels["upsilon"], battery["cp_atom"])
        assert np.array_equal(a.A, b.A)
        assert np.array_equal(a.gamma, b.gamma)
        assert np.allclose(a.nu.rays[0].radial.values, b.nu.rays[0].radial.values)

    def test_upsilon_iterates_on_atom(self, kernels, battery):
        grid = np.geomspace(1e-5, 1e4, 1024)
        one = lm.iterate_map(kernels["upsilon"], battery["cp_atom"], 1, grid=grid)
        rm1 = one.nu.rays[0].radial
        assert np.max(np.abs(rm1.values - np.exp(-grid))) < 1e-8
        two = lm.map_triplet(kernels["upsilon"], one, grid=grid)
        rm2 = two.nu.rays[0].radial
        # oracle: ∫ e^{-u/r} r^{-1} e^{-r} dr by quadrature
        for u in (0.2, 1.0, 3.0):
            oracle = integrate.quad(
                lambda r: math.exp(-u / r) / r * math.exp(-r), 0, np.inf,
                epsabs=1e-12, epsrel=1e-11, limit=300,
            )[0]
            assert rm2.density(u) == pytest.approx(oracle, rel=1e-6)
        assert np.all(rm2.values >= 0)
        assert np.all(np.diff(rm2.values) <= 1e-12)

    def test_domain_violation_names_stage(self, kernels):
        grid = np.geomspace(1e-6, 1e6, 2048)
        vals = np.where(grid > math.e, 1.0 / (grid * np.log(np.maximum(grid, 2.0)) ** 2), 0.0)
        bad = lm.LevyTriplet(np.zeros((1, 1)), single_ray(lm.GridRadial(grid, vals)), np.zeros(1))
        with pytest.raises(lm.DomainError, match="stage 1"):
            lm.iterate_map(kernels["phi"], bad, 2)


class TestCommutativity:
    def test_atom_pair(self, kernels, battery, z_grid):
        rep = lm.verify_commutativity(kernels["u"], kernels["upsilon"], battery["cp_atom"], z_grid)
        assert rep.max_deviation < 1e-6

    def test_identical_kernels_exact(self, kernels, battery, z_grid):
        rep = lm.verify_commutativity(kernels["u"], kernels["u"], battery["cp_atom"], z_grid)
        assert rep.max_deviation < 1e-12

    def test_gaussian_scale_factors_multiply(self, kernels):
        gauss = lm.LevyTriplet(np.array([[1.0]]), None, np.array([0.0]))
        z = np.array([1.0])
        both = 2.0 * SQRT_PI_4
        a = lm.map_cumulant(kernels["g"], lm.mapped_cumulant_fn(kernels["upsilon"], gauss), z)
        b = lm.map_cumulant(kernels["upsilon"], lm.mapped_cumulant_fn(kernels["g"], gauss), z)
        assert a == pytest.approx(-0.5 * both, rel=1e-8)
        assert b == pytest.approx(-0.5 * both, rel=1e-8)

    def test_infinite_length_rejected(self, kernels, battery, z_grid):
        with pytest.raises(lm.DomainError):
            lm.verify_commutativity(kernels["phi"], kernels["u"], battery["cp_atom"], z_grid)


class TestCompositionIdentity:
    def test_psi_equals_both_orders(self, kernels, battery, z_grid):
        psi, phi, ups = kernels["psi"], kernels["phi"], kernels["upsilon"]
        for member in ("cp_atom", "tempered"):
            tr = battery[member]
            for z in z_grid:
                a = lm.map_cumulant(psi, tr, z)
                b = lm.map_cumulant(ups, lm.mapped_cumulant_fn(phi, tr), z)
                c = lm.map_cumulant(phi, lm.mapped_cumulant_fn(ups, tr), z)
                assert abs(a - b) < 1e-6
                assert abs(a - c) < 1e-6
