import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from afheat.core import build_grid_1d, project_initial_1d
from afheat.fourier import (
    DegenerateModesError,
    classify_modes,
    decompose_mode,
    error_split_report,
    fit_order,
    pde_symbol,
    physical_eigenvalue_error,
    prefactor,
    project_mode,
    scheme_symbol,
    series_eigenvalues,
    symbol_matrix,
    well_prepared_u,
    write_symbol_csv,
)

COARSE = [2 * math.pi / n for n in (16, 32, 64, 128, 256)]


class TestPdeSymbol:
    def test_real_eigenvalues(self):
        sym = pde_symbol(1.0, 0.5, 2.0)
        assert sym.s == pytest.approx(math.sqrt(3))
        assert sym.eigenvalues[0] == pytest.approx(2 * (-2 + math.sqrt(3)), rel=1e-14)
        assert sym.eigenvalues[1] == pytest.approx(2 * (-2 - math.sqrt(3)), rel=1e-14)

    def test_hyperbolic_regime(self):
        l1, l2 = pde_symbol(1.0, 0.5, 0.0).eigenvalues
        assert {complex(round(l1.real, 12), round(l1.imag, 12)),
                complex(round(l2.real, 12), round(l2.imag, 12))} == {2j, -2j}

    @given(st.floats(0.1, 5.0), st.floats(1e-3, 2.0), st.floats(0.0, 10.0))
    def test_trace_and_determinant(self, omega, eps, sigma):
        sym = pde_symbol(omega, eps, sigma)
        l1, l2 = sym.eigenvalues
        assert abs(l1 + l2 + sigma / eps**2) <= 1e-13 * max(1.0, sigma / eps**2)
        assert abs(l1 * l2 - omega**2 / eps**2) <= 1e-13 * max(1.0, abs(l1 * l2), abs(l2) ** 2)
        assert abs(np.trace(sym.matrix) - (l1 + l2)) <= 1e-13 * max(1.0, sigma / eps**2)

    def test_diffusive_limit(self):
        assert pde_symbol(2.0, 1e-5, 4.0).eigenvalues[0].real == pytest.approx(-1.0, rel=1e-8)

    def test_eigenvector_split_sums_to_data(self):
        sym = pde_symbol(1.0, 0.3, 1.0)
        V1, V2 = sym.eigenvectors(1.0, 0.5j)
        np.testing.assert_allclose(V1 + V2, [1.0, 0.5j], atol=1e-15)
        np.testing.assert_allclose(sym.matrix @ V1, sym.eigenvalues[0] * V1, atol=1e-13)


class TestSchemeSymbol:
    @pytest.mark.parametrize("variant", ["js", "alt"])
    def test_constant_mode_in_kernel(self, variant):
        G = symbol_matrix(variant, 0.0, 0.1, 0.3, 2.0)
        np.testing.assert_allclose(G @ np.array([1, 0, 1, 0]), 0, atol=1e-12)

    @pytest.mark.parametrize("variant", ["js", "alt"])
    @pytest.mark.parametrize("eps", [1.0, 1e-2, 1e-6])
    def test_stable_spectrum(self, variant, eps):
        for omega in (1, 5, 20):
            lam = scheme_symbol(variant, omega, 2 * math.pi / 64, eps, 1.0).eigenvalues
            assert np.all(lam.real <= 1e-10 * np.abs(lam).max())

    def test_js_physical_error_slope_and_coefficient(self):
        err = [physical_eigenvalue_error("js", 1, h, 0.5, 1, pair_mean=True) for h in COARSE]
        assert fit_order(COARSE, np.abs(err)) == pytest.approx(3.0, abs=0.05)
        # series shift -dx^3 omega^4 / (72 eps)
        ratio = err[-1].real / (-COARSE[-1] ** 3 / 36)
        assert ratio == pytest.approx(1.0, abs=1e-3)

    def test_alt_physical_error_slope_and_coefficient(self):
        err = np.array([physical_eigenvalue_error("alt", 1, h, 0.3, 1) for h in COARSE])
        assert fit_order(COARSE, np.abs(err)) == pytest.approx(4.0, abs=0.05)
        s = pde_symbol(1, 0.3, 1).s.real
        assert err[-1].real / (COARSE[-1] ** 4 / (540 * s)) == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
    def test_js_prefactor_scales_like_inverse_eps(self, eps):
        dxs = [eps * 2.0**-k for k in range(2, 7)]
        err = [abs(physical_eigenvalue_error("js", 1, h, eps, 1)) for h in dxs]
        assert fit_order(dxs, err) == pytest.approx(3.0, abs=0.05)
        # frozen from this sweep: 72 eps * prefactor = 0.98421
        assert 72 * eps * prefactor(dxs, err, 3.0) == pytest.approx(0.98421, rel=1e-4)

    def test_js_spurious_magnitude(self):
        lam = scheme_symbol("js", 1, 1e-3, 0.5, 1).eigenvalues
        big = np.sort(np.abs(lam))[2:]
        np.testing.assert_allclose(big, 6 / (0.5 * 1e-3), rtol=0.05)

    def test_alt_spurious_series(self):
        sym = scheme_symbol("alt", 1, 1e-3, 0.5, 2)
        cls = classify_modes(sym)
        spur = np.sort_complex(sym.eigenvalues[list(cls.spurious)])
        series = np.sort_complex(series_eigenvalues("alt", 1, 1e-3, 0.5, 2)[2:])
        np.testing.assert_allclose(spur, series, rtol=1e-8)
        assert spur[0].real == pytest.approx(-2 / (2 * 0.25), rel=1e-4)

    def test_js_series_matches_numerical(self):
        sym = scheme_symbol("js", 1, 1e-3, 0.3, 1)
        cls = classify_modes(sym)
        series = series_eigenvalues("js", 1, 1e-3, 0.3, 1)
        np.testing.assert_allclose(sym.eigenvalues[list(cls.physical)], series[:2], rtol=1e-9)

    def test_merged_clusters_are_flagged(self):
        # the two spurious eigenvalues sit at -1e12 and agree to ~1e-11
        with pytest.raises(DegenerateModesError):
            classify_modes(scheme_symbol("alt", 1, 1.0, 1e-6, 1))

    def test_double_pde_root_is_flagged_unless_allowed(self):
        sym = scheme_symbol("js", 1, 0.1, 0.5, 1)
        with pytest.raises(DegenerateModesError):
            classify_modes(sym)
        assert not classify_modes(sym, require_labels=False).labeled


class TestProjection:
    def test_zero_frequency(self):
        np.testing.assert_allclose(project_mode(2.0, 3.0, 0.0, 0.1), [2, 3, 2, 3])

    def test_half_wavelength_cell(self):
        w = project_mode(1.0, 0.0, math.pi, 1.0)
        assert w[0] == pytest.approx(2 / math.pi)

    @pytest.mark.parametrize("omega", [1, 3, 7])
    def test_matches_cell_projection(self, omega):
        g = build_grid_1d(0.0, 2 * math.pi, 24)
        re = project_initial_1d(lambda x: np.cos(omega * x), lambda x: -np.sin(omega * x), g)
        im = project_initial_1d(lambda x: np.sin(omega * x), lambda x: np.cos(omega * x), g)
        w = project_mode(1.0, 1j, omega, g.dx)
        phase = np.exp(1j * omega * g.centers)
        for k, (a, b) in enumerate([(re.avg_p, im.avg_p), (re.avg_u, im.avg_u),
                                    (re.pt_p, im.pt_p), (re.pt_u, im.pt_u)]):
            np.testing.assert_allclose(a + 1j * b, w[k] * phase, atol=1e-12)


class TestDecomposition:
    def test_completeness(self, rng):
        sym = scheme_symbol("js", 2, 0.1, 0.3, 1)
        w0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        d = decompose_mode(w0, sym)
        assert d.completeness_residual() <= 1e-12

    def test_js_spurious_size_third_order(self):
        u0 = well_prepared_u(1.0, 1, 0.5, 1)
        sizes = []
        for h in COARSE:
            sym = scheme_symbol("js", 1, h, 0.5, 1)
            d = decompose_mode(None, sym, 1.0, u0, classification=classify_modes(sym, require_labels=False))
            sizes.append(d.spurious_size())
        assert fit_order(COARSE, sizes) == pytest.approx(3.0, abs=0.1)

    def test_leading_eigenvector_error_in_diffusive_regime(self):
        eps = 1e-6
        h = eps / 8
        sym = scheme_symbol("js", 1, h, eps, 1)
        d = decompose_mode(None, sym, 1.0, well_prepared_u(1.0, 1, eps, 1))
        ratio = d.errors[0, 3] / (1j * h**3 / 72)
        assert abs(ratio - 1) <= 0.1

    def test_well_prepared_data_has_no_layer(self):
        sym = pde_symbol(1.0, 0.3, 1.0)
        _, V2 = sym.eigenvectors(1.0, well_prepared_u(1.0, 1.0, 0.3, 1.0))
        np.testing.assert_allclose(V2, 0, atol=1e-15)


class TestErrorSplit:
    def test_t_zero_has_no_exponential_mismatch(self):
        rep = error_split_report("js", 1, 0.3, 1, 0.0, COARSE[:3])
        assert np.all(rep.column("exponential_term") == 0)

    def test_alt_prefactor_is_eps_independent(self):
        pref = [error_split_report("alt", 1, eps, 1, 1.0, COARSE).eigenvalue_prefactor
                for eps in (1e-2, 1e-4, 1e-6)]
        assert max(pref) / min(pref) <= 2.0
        assert pref[0] == pytest.approx(0.001856, rel=1e-3)

    def test_degenerate_point_uses_pair_mean(self, tmp_path):
        rep = error_split_report("js", 1, 0.5, 1, 1.0, COARSE)
        assert rep.orders["eigenvalue_error"] == pytest.approx(3.0, abs=0.05)
        assert rep.eigenvalue_prefactor == pytest.approx(1 / 36, rel=1e-3)
        assert np.all(np.isnan(rep.column("eigenvector_term")))
        path = tmp_path / "sym.csv"
        write_symbol_csv(rep, path)
        rows = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
        assert len(rows) == 1 + len(COARSE)
