import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from afheat.core import ModelParams, build_grid_1d, build_grid_2d, project_initial_1d, project_initial_2d
from afheat.limits import (
    LIMIT_FAMILIES_2D,
    LimitState1D,
    LimitState2D,
    heat_reference,
    limit_error_norms,
    limit_operator_1d,
    limit_operator_2d,
    limit_rhs_1d,
    limit_rhs_js_2d,
    spectrum_2d_from_samples,
    spectrum_from_samples,
    square_wave_spectrum,
    total_l1,
)
from afheat.core import FAMILIES_2D
from afheat.dirk import integrate
from afheat.ops1d import assemble_operator_1d
from afheat.ops2d import assemble_operator_2d

VARIANTS = ["js", "alt"]


def lim1d(g, f):
    s = project_initial_1d(f, np.zeros_like, g)
    return LimitState1D.from_state(s)


def lim2d(g, f):
    zero = lambda x, y: np.zeros_like(x)  # noqa: E731
    return LimitState2D.from_state(project_initial_2d(f, zero, zero, g))


def schur_reduction(L, p_idx):
    """``-L_pu L_uu^{-1} L_up``: the u-unknowns eliminated from the dense operator."""
    L = L.toarray()
    u_idx = np.setdiff1d(np.arange(L.shape[0]), p_idx)
    return L[np.ix_(p_idx, p_idx)], -L[np.ix_(p_idx, u_idx)] @ np.linalg.solve(
        L[np.ix_(u_idx, u_idx)], L[np.ix_(u_idx, p_idx)])


class TestOneDimensional:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_constant_is_steady(self, variant):
        g = build_grid_1d(0, 1, 10)
        s = LimitState1D(g, np.full(10, 3.0), np.full(10, 3.0))
        d = limit_rhs_1d(s, 2.0, variant)
        np.testing.assert_allclose(d.to_vector(), 0, atol=1e-10)

    @pytest.mark.parametrize("variant", VARIANTS)
    @pytest.mark.parametrize("sigma", [1.0, 4.0])
    def test_quadratic_exactness(self, variant, sigma):
        g = build_grid_1d(0, 1, 16)
        d = limit_rhs_1d(lim1d(g, lambda x: 0.5 * x**2 - x + 2), sigma, variant)
        interior = slice(3, -3)
        np.testing.assert_allclose(d.avg_p[interior], 1 / sigma, rtol=1e-9)
        np.testing.assert_allclose(d.pt_p[interior], 1 / sigma, rtol=1e-9)

    @pytest.mark.parametrize("variant", VARIANTS)
    @given(st.integers(0, 2**31 - 1))
    def test_conservation(self, variant, seed):
        g = build_grid_1d(0, 1, 12)
        r = np.random.default_rng(seed)
        d = limit_rhs_1d(LimitState1D(g, r.standard_normal(12), r.standard_normal(12)), 1.5, variant)
        assert abs(d.avg_p.sum()) <= 1e-12 * np.abs(d.avg_p).max()

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_average_update_second_order(self, variant):
        errs = []
        for n in (16, 32, 64, 128):
            g = build_grid_1d(0, 2 * math.pi, n)
            d = limit_rhs_1d(lim1d(g, np.sin), 2.0, variant)
            errs.append(np.abs(d.avg_p - lim1d(g, lambda x: -np.sin(x) / 2.0).avg_p).max())
        assert np.log2(np.array(errs[:-1]) / errs[1:]).min() >= 1.9

    def test_alt_point_update_truncation_is_first_order(self):
        # -D+ acting on u1 = -D- p / sigma: the dx^2 error of the point values of u1
        # is divided by dx, so the pointwise truncation error is O(dx)
        errs = []
        for n in (32, 64, 128):
            g = build_grid_1d(0, 2 * math.pi, n)
            d = limit_rhs_1d(lim1d(g, np.sin), 1.0, "alt")
            errs.append(np.abs(d.pt_p - lim1d(g, lambda x: -np.sin(x)).pt_p).max())
        np.testing.assert_allclose(np.log2(np.array(errs[:-1]) / errs[1:]), 1.0, atol=0.02)

    @pytest.mark.parametrize("variant,orders", [("js", (1.9, 1.9)), ("alt", (3.8, 2.9))])
    def test_solution_convergence(self, variant, orders):
        errs = []
        for n in (16, 32, 64, 128):
            g = build_grid_1d(0, 2 * math.pi, n)
            w = integrate(lim1d(g, np.sin).to_vector(), 1.0, 0.2 * g.dx, limit_operator_1d(2.0, g, variant)).w
            e = np.abs(w - lim1d(g, lambda x: math.exp(-0.5) * np.sin(x)).to_vector())
            errs.append((e[:n].max(), e[n:].max()))
        errs = np.array(errs)
        rates = np.log2(errs[:-1] / errs[1:])
        assert rates[:, 0].min() >= orders[0]
        assert rates[:, 1].min() >= orders[1]

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_operator_matches_rhs(self, variant, rng):
        g = build_grid_1d(0, 1, 9)
        L = limit_operator_1d(1.3, g, variant)
        s = LimitState1D.from_vector(g, rng.standard_normal(18))
        np.testing.assert_allclose(L @ s.to_vector(), limit_rhs_1d(s, 1.3, variant).to_vector(), atol=1e-9)

    def test_alt_equals_exact_schur_complement(self):
        g = build_grid_1d(0, 1, 12)
        n = 12
        p_idx = np.r_[0:n, 2 * n:3 * n]
        lim = limit_operator_1d(2.0, g, "alt").toarray()
        for eps in (1e-2, 1e-6):
            Lpp, red = schur_reduction(assemble_operator_1d(ModelParams(eps, 2.0, "alt"), g), p_idx)
            assert not Lpp.any()
            assert np.abs(red - lim).max() <= 1e-12 * np.abs(lim).max()

    def test_js_is_eps_limit_of_reduction(self):
        g = build_grid_1d(0, 1, 12)
        n = 12
        p_idx = np.r_[0:n, 2 * n:3 * n]
        lim = limit_operator_1d(2.0, g, "js").toarray()
        dist = []
        for eps in (1e-4, 1e-6, 1e-8):
            _, red = schur_reduction(assemble_operator_1d(ModelParams(eps, 2.0, "js"), g), p_idx)
            dist.append(np.abs(red - lim).max() / np.abs(lim).max())
        # O(eps) approach; frozen from this oracle: 1.35e-3, 1.35e-5, 1.35e-7
        np.testing.assert_allclose(np.array(dist) / [1e-4, 1e-6, 1e-8], 13.5, rtol=0.01)


class TestTwoDimensional:
    def test_constant_is_steady(self):
        g = build_grid_2d((0, 1), (0, 1), 5)
        s = lim2d(g, lambda x, y: np.full_like(x, 2.0))
        d = limit_rhs_js_2d(s, 1.0)
        np.testing.assert_allclose(d.to_vector(), 0, atol=1e-10)

    @staticmethod
    def _lift_x_only(s1, n2):
        """x-only 2D data from a 1D limit state; y-faces carry the Simpson-consistent centre value."""
        mid = (6 * s1.avg_p - np.roll(s1.pt_p, 1) - s1.pt_p) / 4
        tile = lambda a: np.tile(a[:, None], (1, n2))  # noqa: E731
        return {"avg_p": tile(s1.avg_p), "facex_p": tile(s1.pt_p),
                "corner_p": tile(s1.pt_p), "facey_p": tile(mid)}

    def test_x_only_averages_reduce_to_1d(self, rng):
        g2 = build_grid_2d((0, 2), (0, 1), 9, 5)
        g1 = build_grid_1d(0, 2, 9)
        s1 = LimitState1D(g1, rng.standard_normal(9), rng.standard_normal(9))
        d2 = limit_rhs_js_2d(LimitState2D(g2, self._lift_x_only(s1, 5)), 1.5)
        d1 = limit_rhs_1d(s1, 1.5, "js")
        scale = np.abs(d1.to_vector()).max()
        assert np.abs(d2["avg_p"] - d1.avg_p[:, None]).max() <= 1e-12 * scale

    def test_x_only_points_agree_to_fourth_order(self):
        # the 2D limit recovers the cell-centre u from y-face values that are plain
        # differences, so point updates match the 1D stencil only up to O(dx^4)
        diffs = []
        for n in (16, 32, 64, 128):
            g1 = build_grid_1d(0, 2 * math.pi, n)
            g2 = build_grid_2d((0, 2 * math.pi), (0, 1), n, 4)
            s1 = lim1d(g1, np.sin)
            d2 = limit_rhs_js_2d(LimitState2D(g2, self._lift_x_only(s1, 4)), 1.0)
            d1 = limit_rhs_1d(s1, 1.0, "js")
            diffs.append(max(np.abs(d2[k] - d1.pt_p[:, None]).max() for k in ("facex_p", "corner_p")))
        rates = np.log2(np.array(diffs[:-1]) / diffs[1:])
        assert rates.min() >= 3.8

    def test_conservation(self, rng):
        g = build_grid_2d((0, 1), (0, 1), 6, 4)
        s = LimitState2D.from_vector(g, rng.standard_normal(4 * 24))
        d = limit_rhs_js_2d(s, 1.0)
        assert abs(d["avg_p"].sum()) <= 1e-12 * np.abs(d["avg_p"]).max()

    def test_product_mode_order(self):
        f = lambda x, y: np.sin(x) * np.sin(y)  # noqa: E731
        errs = []
        for n in (8, 16, 32, 64):
            g = build_grid_2d((0, 2 * math.pi), (0, 2 * math.pi), n)
            d = limit_rhs_js_2d(lim2d(g, f), 2.0)
            exact = lim2d(g, lambda x, y: -f(x, y))  # (p_xx + p_yy) / sigma = -2 p / 2
            errs.append(max(np.abs(d[k] - exact[k]).max() for k in LIMIT_FAMILIES_2D))
        rates = np.log2(np.array(errs[:-1]) / errs[1:])
        assert rates[-1] >= 2.0 - 0.1

    def test_operator_is_eps_limit_of_reduction(self):
        g = build_grid_2d((0, 1), (0, 1), 5)
        m = 25
        p_idx = np.concatenate([np.arange(k * m, (k + 1) * m)
                                for k, f in enumerate(FAMILIES_2D) if f.endswith("_p")])
        assert [f for f in FAMILIES_2D if f.endswith("_p")] == list(LIMIT_FAMILIES_2D)
        lim = limit_operator_2d(2.0, g).toarray()
        dist = []
        for eps in (1e-4, 1e-6):
            _, red = schur_reduction(assemble_operator_2d(ModelParams(eps, 2.0), g), p_idx)
            dist.append(np.abs(red - lim).max() / np.abs(lim).max())
        assert dist[1] <= 1e-5
        assert dist[0] / dist[1] == pytest.approx(100, rel=0.01)


class TestHeatReference:
    def test_single_mode(self):
        g = build_grid_1d(0, 2 * math.pi, 20)
        spectrum = spectrum_from_samples(np.sin, 0.0, 2 * math.pi, 8)
        ref = heat_reference(spectrum, 1.0, 0.7, g)
        exact = lim1d(g, lambda x: math.exp(-0.7) * np.sin(x))
        np.testing.assert_allclose(ref.avg_p, exact.avg_p, atol=1e-13)
        np.testing.assert_allclose(ref.pt_p, exact.pt_p, atol=1e-13)

    def test_t_zero_reproduces_projection(self):
        f = lambda x: np.cos(x) + 0.5 * np.sin(2 * x) + 0.1  # noqa: E731
        g = build_grid_1d(0, 2 * math.pi, 16)
        ref = heat_reference(spectrum_from_samples(f, 0.0, 2 * math.pi, 8), 1.0, 0.0, g)
        exact = lim1d(g, f)
        np.testing.assert_allclose(ref.to_vector(), exact.to_vector(), atol=1e-13)

    def test_square_wave_truncation(self):
        g = build_grid_1d(-1, 1, 160)
        a = heat_reference(square_wave_spectrum(1024), 1.0, 0.04, g)
        b = heat_reference(square_wave_spectrum(2048), 1.0, 0.04, g)
        assert total_l1(limit_error_norms(a, b)) < 1e-8

    def test_square_wave_mass(self):
        g = build_grid_1d(-1, 1, 40)
        ref = heat_reference(square_wave_spectrum(), 1.0, 0.04, g)
        # mass of 2 on [-0.5, 0.5] and 1 elsewhere on [-1, 1]
        assert ref.avg_p.sum() * g.dx == pytest.approx(3.0, abs=1e-12)

    def test_two_dimensional_mode(self):
        f = lambda x, y: np.sin(x) * np.cos(2 * y)  # noqa: E731
        g = build_grid_2d((0, 2 * math.pi), (0, 2 * math.pi), 8)
        spectrum = spectrum_2d_from_samples(f, (0, 2 * math.pi), (0, 2 * math.pi), 4)
        ref = heat_reference(spectrum, 2.0, 0.3, g)
        exact = lim2d(g, lambda x, y: math.exp(-5 * 0.3 / 2) * f(x, y))
        for k in LIMIT_FAMILIES_2D:
            np.testing.assert_allclose(ref[k], exact[k], atol=1e-13)

    def test_rejects_bad_input(self):
        g = build_grid_1d(-1, 1, 8)
        with pytest.raises(ValueError):
            heat_reference(square_wave_spectrum(8), 0.0, 0.1, g)
        with pytest.raises(ValueError):
            heat_reference(square_wave_spectrum(8), 1.0, -0.1, g)
