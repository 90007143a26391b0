"""Limit (eps -> 0) schemes of the AF discretizations and exact heat-equation references.

At leading order the u-type unknowns vanish, the order ``1/eps`` balance gives
the flux variable ``u1 = -(1/sigma) * (discrete gradient of p0)`` at every
u-location, and ``p0`` is then driven by the discrete divergence of ``u1``.
The resulting schemes discretize ``p_t = (p_xx + p_yy) / sigma``.
"""

from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
import scipy.sparse as sp

from .core import GridSpec1D, GridSpec2D, GridError, Variant
from .ops1d import _finalize, d_minus, d_plus
from .ops2d import _one_sided_x, _one_sided_y, _xm, _ym, cell_centers, simpson_flux

LIMIT_FAMILIES_1D = ("avg_p", "pt_p")
LIMIT_FAMILIES_2D = ("avg_p", "facex_p", "facey_p", "corner_p")


def _check_sigma(sigma):
    sigma = float(sigma)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return sigma


@dataclass
class LimitState1D:
    grid: GridSpec1D
    avg_p: np.ndarray
    pt_p: np.ndarray

    def to_vector(self):
        return np.concatenate([self.avg_p, self.pt_p])

    @classmethod
    def from_vector(cls, grid, vec):
        n = grid.n_cells
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (2 * n,):
            raise GridError(f"expected {2 * n} values, got {vec.shape}")
        return cls(grid, vec[:n].copy(), vec[n:].copy())

    @classmethod
    def from_state(cls, state):
        """Pressure part of a full :class:`State1D`."""
        return cls(state.grid, state.avg_p.copy(), state.pt_p.copy())

    def families(self):
        return {"avg_p": self.avg_p, "pt_p": self.pt_p}


@dataclass
class LimitState2D:
    grid: GridSpec2D
    arrays: Dict[str, np.ndarray]

    def __getitem__(self, name):
        return self.arrays[name]

    def to_vector(self):
        return np.concatenate([self.arrays[f].ravel() for f in LIMIT_FAMILIES_2D])

    @classmethod
    def from_vector(cls, grid, vec):
        m = grid.n1 * grid.n2
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (4 * m,):
            raise GridError(f"expected {4 * m} values, got {vec.shape}")
        return cls(grid, {f: vec[k * m:(k + 1) * m].reshape(grid.shape).copy()
                          for k, f in enumerate(LIMIT_FAMILIES_2D)})

    @classmethod
    def from_state(cls, state):
        return cls(state.grid, {f: state[f].copy() for f in LIMIT_FAMILIES_2D})

    def families(self):
        return dict(self.arrays)


# ---------------------------------------------------------------------------
# 1D


def limit_rhs_js_1d(state: LimitState1D, sigma: float, grid: GridSpec1D = None) -> LimitState1D:
    """Leading-order pressure evolution of the Jacobian-splitting scheme."""
    grid = state.grid if grid is None else grid
    sigma = _check_sigma(sigma)
    dx = grid.dx
    p, a = state.pt_p, state.avg_p
    # -sigma u1 = (D+ + D-) p / 2 at each interface
    grad = 0.5 * (d_plus(p, a, dx) + d_minus(p, a, dx))
    d_avg = (grad - np.roll(grad, 1)) / (sigma * dx)

    r = lambda k: np.roll(p, -k)  # noqa: E731  p_{i+1/2+k}
    ra = lambda k: np.roll(a, -k)  # noqa: E731  avg_{i+k}
    d_pt = (r(-2) - 3 * ra(-1) + 3 * r(-1) + 3 * a - 8 * p + 3 * ra(1) + 3 * r(1) - 3 * ra(2) + r(2)) / (sigma * dx**2)
    return LimitState1D(grid, d_avg, d_pt)


def limit_rhs_alt_1d(state: LimitState1D, sigma: float, grid: GridSpec1D = None) -> LimitState1D:
    """Leading-order pressure evolution of the alternating-flux scheme."""
    grid = state.grid if grid is None else grid
    sigma = _check_sigma(sigma)
    dx = grid.dx
    p, a = state.pt_p, state.avg_p
    u1 = -d_minus(p, a, dx) / sigma
    u1_avg = -(p - np.roll(p, 1)) / (sigma * dx)
    d_avg = -(u1 - np.roll(u1, 1)) / dx
    d_pt = -d_plus(u1, u1_avg, dx)
    return LimitState1D(grid, d_avg, d_pt)


def limit_rhs_1d(state: LimitState1D, sigma: float, variant=Variant.JS) -> LimitState1D:
    if Variant(variant) is Variant.JS:
        return limit_rhs_js_1d(state, sigma)
    return limit_rhs_alt_1d(state, sigma)


# ---------------------------------------------------------------------------
# 2D


def flux_variables_2d(p: Dict[str, np.ndarray], sigma: float, dx: float, dy: float):
    """``u1``, ``v1`` at every DOF location from the leading-order pressure."""
    centre = cell_centers(p["avg_p"], p["facex_p"], p["facey_p"], p["corner_p"])
    fx = simpson_flux(_ym(p["corner_p"]), p["facex_p"], p["corner_p"])
    fy = simpson_flux(_xm(p["corner_p"]), p["facey_p"], p["corner_p"])

    def mean_one_sided(pair):
        return 0.5 * (pair[0] + pair[1])

    u = {
        "avg": -(fx - _xm(fx)) / (sigma * dx),
        "facex": -mean_one_sided(_one_sided_x(p["facex_p"], centre, dx)) / sigma,
        "facey": -(p["corner_p"] - _xm(p["corner_p"])) / (sigma * dx),
        "corner": -mean_one_sided(_one_sided_x(p["corner_p"], p["facey_p"], dx)) / sigma,
    }
    v = {
        "avg": -(fy - _ym(fy)) / (sigma * dy),
        "facex": -(p["corner_p"] - _ym(p["corner_p"])) / (sigma * dy),
        "facey": -mean_one_sided(_one_sided_y(p["facey_p"], centre, dy)) / sigma,
        "corner": -mean_one_sided(_one_sided_y(p["corner_p"], p["facex_p"], dy)) / sigma,
    }
    return u, v


def limit_rhs_js_2d(state: LimitState2D, sigma: float, grid: GridSpec2D = None) -> LimitState2D:
    grid = state.grid if grid is None else grid
    sigma = _check_sigma(sigma)
    dx, dy = grid.dx, grid.dy
    u, v = flux_variables_2d(state.arrays, sigma, dx, dy)
    uc = cell_centers(u["avg"], u["facex"], u["facey"], u["corner"])
    vc = cell_centers(v["avg"], v["facex"], v["facey"], v["corner"])

    fx = simpson_flux(_ym(u["corner"]), u["facex"], u["corner"])
    fy = simpson_flux(_xm(v["corner"]), v["facey"], v["corner"])
    out = {"avg_p": -(fx - _xm(fx)) / dx - (fy - _ym(fy)) / dy}

    def avg_x(same, half):
        dp, dm = _one_sided_x(same, half, dx)
        return 0.5 * (dp + dm)

    def avg_y(same, half):
        dp, dm = _one_sided_y(same, half, dy)
        return 0.5 * (dp + dm)

    out["facex_p"] = -avg_x(u["facex"], uc) - (v["corner"] - _ym(v["corner"])) / dy
    out["facey_p"] = -(u["corner"] - _xm(u["corner"])) / dx - avg_y(v["facey"], vc)
    out["corner_p"] = -avg_x(u["corner"], u["facey"]) - avg_y(v["corner"], v["facex"])
    return LimitState2D(grid, out)


# ---------------------------------------------------------------------------
# operators


def assemble_limit_operator(rhs, grid, sigma, state_cls):
    """Sparse matrix of a linear limit right-hand side, one probe per unknown."""
    n = _limit_size(grid)
    cols = []
    e = np.zeros(n)
    for k in range(n):
        e[k] = 1.0
        cols.append(sp.csc_matrix(rhs(state_cls.from_vector(grid, e), sigma).to_vector()[:, None]))
        e[k] = 0.0
    return _finalize(sp.hstack(cols))


def _limit_size(grid):
    return 2 * grid.n_cells if isinstance(grid, GridSpec1D) else 4 * grid.n1 * grid.n2


def limit_operator_1d(sigma: float, grid: GridSpec1D, variant=Variant.JS):
    rhs = limit_rhs_js_1d if Variant(variant) is Variant.JS else limit_rhs_alt_1d
    return assemble_limit_operator(rhs, grid, sigma, LimitState1D)


def limit_operator_2d(sigma: float, grid: GridSpec2D):
    return assemble_limit_operator(limit_rhs_js_2d, grid, sigma, LimitState2D)


# ---------------------------------------------------------------------------
# heat-equation references


@dataclass(frozen=True)
class HeatSpectrum:
    """Periodic data ``sum_k c_k exp(i 2 pi (k . (x - origin)) / period)``.

    ``wavenumbers`` has shape ``(m,)`` in 1D and ``(m, 2)`` in 2D.
    """

    wavenumbers: np.ndarray
    coefficients: np.ndarray
    origin: tuple
    period: tuple
    tail_bound: float = 0.0

    @property
    def dim(self):
        return len(self.period)

    def truncated(self, kmax: int) -> "HeatSpectrum":
        k = self.wavenumbers.reshape(len(self.coefficients), -1)
        keep = np.abs(k).max(axis=1) <= kmax
        return HeatSpectrum(self.wavenumbers[keep], self.coefficients[keep], self.origin, self.period)


def square_wave_spectrum(n_modes: int = 2048, inner: float = 2.0, outer: float = 1.0,
                         half_width: float = 0.5) -> HeatSpectrum:
    """Exact coefficients of ``inner`` on ``|x| < half_width``, ``outer`` elsewhere, on [-1, 1].

    ``tail_bound`` is the magnitude bound ``(inner - outer) / (pi n_modes)`` of
    every omitted coefficient; at time ``t`` they are further damped by
    ``exp(-(pi n_modes)^2 t / sigma)``.
    """
    k = np.arange(-n_modes, n_modes + 1)
    jump = inner - outer
    c = np.empty(len(k))
    nz = k != 0
    c[nz] = jump * np.sin(np.pi * k[nz] * half_width) / (np.pi * k[nz])
    c[~nz] = outer + jump * half_width
    return HeatSpectrum(k, c.astype(complex), (0.0,), (2.0,), tail_bound=abs(jump) / (np.pi * n_modes))


def spectrum_from_samples(f, x_min: float, length: float, n_modes: int = 64) -> HeatSpectrum:
    """Coefficients of a smooth periodic function from ``4 n_modes`` equispaced samples."""
    m = 4 * n_modes
    x = x_min + length * np.arange(m) / m
    c = np.fft.fft(f(x)) / m
    k = np.fft.fftfreq(m, 1.0 / m).astype(int)
    keep = np.abs(k) <= n_modes
    return HeatSpectrum(k[keep], c[keep], (x_min,), (length,))


def spectrum_2d_from_samples(f, x_range, y_range, n_modes: int = 16) -> HeatSpectrum:
    m = 4 * n_modes
    (x0, x1), (y0, y1) = x_range, y_range
    X, Y = np.meshgrid(x0 + (x1 - x0) * np.arange(m) / m, y0 + (y1 - y0) * np.arange(m) / m, indexing="ij")
    c = np.fft.fft2(f(X, Y)) / m**2
    k = np.fft.fftfreq(m, 1.0 / m).astype(int)
    KX, KY = np.meshgrid(k, k, indexing="ij")
    keep = (np.abs(KX) <= n_modes) & (np.abs(KY) <= n_modes) & (np.abs(c) > 1e-15 * np.abs(c).max())
    return HeatSpectrum(np.stack([KX[keep], KY[keep]], axis=1), c[keep], (x0, y0), (x1 - x0, y1 - y0))


def _sinc_avg(kappa, h):
    # mean of exp(i kappa x) over [x - h/2, x + h/2] relative to its centre value
    return np.sinc(kappa * h / (2 * np.pi))


def _decayed(spectrum: HeatSpectrum, sigma, t):
    k = spectrum.wavenumbers.reshape(len(spectrum.coefficients), -1)
    kappa = 2 * np.pi * k / np.array(spectrum.period)
    return kappa, spectrum.coefficients * np.exp(-(kappa**2).sum(axis=1) * t / sigma)


def _evaluate(kappa, coef, coords, origin, widths=None):
    """``sum c exp(i kappa.(x - origin))``, averaged over boxes of ``widths`` if given."""
    shape = coords[0].shape
    pts = [np.ravel(c) - o for c, o in zip(coords, origin)]
    out = np.zeros(pts[0].shape, dtype=complex)
    for kap, cf in zip(kappa, coef):
        term = cf * np.ones_like(out)
        for d, x in enumerate(pts):
            term = term * np.exp(1j * kap[d] * x)
            if widths is not None:
                term = term * _sinc_avg(kap[d], widths[d])
        out += term
    return out.real.reshape(shape)


def heat_reference(spectrum: HeatSpectrum, sigma: float, t: float, grid):
    """Exact solution of ``p_t = Laplace(p) / sigma`` on the limit DOFs of ``grid``."""
    sigma = _check_sigma(sigma)
    if t < 0:
        raise ValueError("t must be non-negative")
    kappa, coef = _decayed(spectrum, sigma, t)
    if isinstance(grid, GridSpec1D):
        if spectrum.dim != 1:
            raise GridError("1D grid needs a 1D spectrum")
        avg = _evaluate(kappa, coef, [grid.centers], spectrum.origin, [grid.dx])
        pt = _evaluate(kappa, coef, [grid.interfaces], spectrum.origin)
        return LimitState1D(grid, avg, pt)
    if spectrum.dim != 2:
        raise GridError("2D grid needs a 2D spectrum")
    out = {"avg_p": _evaluate(kappa, coef, grid.coordinates("avg"), spectrum.origin, [grid.dx, grid.dy])}
    for loc in ("facex", "facey", "corner"):
        out[f"{loc}_p"] = _evaluate(kappa, coef, grid.coordinates(loc), spectrum.origin)
    return LimitState2D(grid, out)


def limit_error_norms(numerical, reference) -> Dict[str, Dict[str, float]]:
    """L1/L2/Linf of the pressure families (works for full or limit states)."""
    grid = reference.grid
    w = grid.dx if isinstance(grid, GridSpec1D) else grid.dx * grid.dy
    num = numerical.families()
    out = {}
    for name, ref in reference.families().items():
        e = np.abs(num[name] - ref).ravel()
        out[name] = {"L1": float(w * e.sum()), "L2": float(np.sqrt(w * e @ e)), "Linf": float(e.max())}
    return out


def total_l1(norms: Dict[str, Dict[str, float]], families: Sequence[str] = None) -> float:
    fams = norms if families is None else families
    return float(sum(norms[f]["L1"] for f in fams))
