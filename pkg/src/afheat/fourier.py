"""Fourier (von Neumann) analysis of the 1D hyperbolic heat system and its AF schemes.

A PDE mode ``[p0, u0] exp(i w x)`` evolves with the 2x2 matrix ``E``; a discrete
mode ``w_hat exp(i w x_i)`` (averages of cell ``i`` and the point values at its
right interface) evolves with the 4x4 matrix ``G``. Entries of ``G`` reach
``sigma / eps^2`` while the quantities of interest (eigenvalue errors of order
``dx^4``) are tiny, so the eigen-decomposition runs in extended precision with
mpmath and is rounded to double afterwards.
"""

import csv
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from .core import Variant

DEFAULT_DPS = 60
DEGENERATE_GAP = 1e-8


class DegenerateModesError(ValueError):
    """Eigenvalues too close to be told apart (or an eigenbasis is singular)."""


# ---------------------------------------------------------------------------
# PDE symbol


@dataclass(frozen=True)
class PdeSymbol:
    omega: float
    epsilon: float
    sigma: float
    matrix: np.ndarray
    s: complex
    eigenvalues: Tuple[complex, complex]

    def eigenvectors(self, p_hat0, u_hat0):
        """Split ``[p0, u0]`` into ``V1 + V2`` along the eigenvectors of ``E``."""
        s, sig = self.s, self.sigma
        iew = 2j * self.epsilon * self.omega
        V1 = np.array([p_hat0 * (s + sig) - iew * u_hat0, u_hat0 * (s - sig) - iew * p_hat0]) / (2 * s)
        V2 = np.array([p_hat0 * (s - sig) + iew * u_hat0, u_hat0 * (s + sig) + iew * p_hat0]) / (2 * s)
        return V1, V2


def _pde_lambdas_mp(omega, epsilon, sigma):
    s = mpmath.sqrt(mpmath.mpc(sigma) ** 2 - 4 * mpmath.mpf(epsilon) ** 2 * mpmath.mpf(omega) ** 2)
    e2 = 2 * mpmath.mpf(epsilon) ** 2
    return (-sigma + s) / e2, (-sigma - s) / e2, s


def pde_symbol(omega: float, epsilon: float, sigma: float) -> PdeSymbol:
    """``E = -(1/eps) [[0, i w], [i w, sigma/eps]]`` with its eigen-data.

    ``s = sqrt(sigma^2 - 4 eps^2 w^2)`` is the principal root, so ``s`` is
    either non-negative real or on the positive imaginary axis and
    ``lambda_1`` is the eigenvalue that stays bounded as ``eps -> 0``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    E = -np.array([[0.0, 1j * omega], [1j * omega, sigma / epsilon]]) / epsilon
    with mpmath.workdps(DEFAULT_DPS):
        l1, l2, s = _pde_lambdas_mp(omega, epsilon, sigma)
        return PdeSymbol(omega, epsilon, sigma, E, complex(s), (complex(l1), complex(l2)))


# ---------------------------------------------------------------------------
# scheme symbol


def _symbol_entries(variant, omega, dx, epsilon, sigma, lib):
    """Rows of ``G`` built with ``lib`` (numpy or mpmath) arithmetic."""
    tx = lib.exp(1j * omega * dx) if lib is np else mpmath.expjpi(omega * dx / mpmath.pi)
    ti = 1 / tx
    relax = sigma * dx / epsilon
    if variant is Variant.JS:
        mid = -(ti + 4 + tx)
        rows = [
            [0, 0, 0, ti - 1],
            [0, -relax, ti - 1, 0],
            [3 * (1 + tx), 3 * (1 - tx), mid, tx - ti],
            [3 * (1 - tx), 3 * (1 + tx), tx - ti, mid - relax],
        ]
    else:
        rows = [
            [0, 0, 0, ti - 1],
            [0, -relax, ti - 1, 0],
            [0, 6, 0, -4 - 2 * ti],
            [-6 * tx, 0, 4 + 2 * tx, -relax],
        ]
    scale = 1 / (epsilon * dx)
    return [[scale * a for a in row] for row in rows]


def symbol_matrix(variant, omega: float, dx: float, epsilon: float, sigma: float) -> np.ndarray:
    """Double-precision ``G`` acting on ``[p_avg, u_avg, p_pt, u_pt]``."""
    if not dx > 0:
        raise ValueError("dx must be positive")
    variant = Variant(variant)
    return np.array(_symbol_entries(variant, omega, dx, epsilon, sigma, np), dtype=complex)


@dataclass
class SchemeSymbol:
    variant: Variant
    omega: float
    dx: float
    epsilon: float
    sigma: float
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    dps: int = DEFAULT_DPS
    _mp: dict = field(default=None, repr=False)

    @property
    def s_tilde(self) -> complex:
        return complex(np.sqrt(complex(self.sigma**2 - 36 * self.epsilon**2 * self.omega**2)))


def scheme_symbol(variant, omega: float, dx: float, epsilon: float, sigma: float,
                  dps: int = DEFAULT_DPS) -> SchemeSymbol:
    """Assemble ``G`` and diagonalize it in ``dps``-digit arithmetic."""
    variant = Variant(variant)
    if not dx > 0:
        raise ValueError("dx must be positive")
    with mpmath.workdps(dps):
        G = mpmath.matrix(_symbol_entries(variant, mpmath.mpf(omega), mpmath.mpf(dx),
                                          mpmath.mpf(epsilon), mpmath.mpf(sigma), mpmath))
        try:
            vals, vecs = mpmath.eig(G)
        except Exception as exc:  # mpmath raises plain exceptions on non-convergence
            raise DegenerateModesError(f"eigensolver failed: {exc}") from exc
        lam = np.array([complex(v) for v in vals])
        V = np.array([[complex(vecs[r, c]) for c in range(4)] for r in range(4)])
        mp = {"G": G, "vals": list(vals), "vecs": vecs}
    return SchemeSymbol(variant, omega, dx, epsilon, sigma,
                        symbol_matrix(variant, omega, dx, epsilon, sigma), lam, V, dps, mp)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ModeClassification:
    """Eigenvalue indices: ``physical[0]`` tracks lambda_1, ``physical[1]`` lambda_2.

    ``labeled`` is False when lambda_1 = lambda_2 (``s = 0``): the physical pair
    is then known only as a set and is listed by decreasing real part.
    """

    physical: Tuple[int, int]
    spurious: Tuple[int, int]
    min_gap: float
    labeled: bool = True

    @property
    def order(self) -> Tuple[int, int, int, int]:
        return self.physical + self.spurious


def _rel_gap(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def classify_modes(symbol: SchemeSymbol, gap: float = DEGENERATE_GAP,
                   require_labels: bool = True) -> ModeClassification:
    """Label the eigenvalues nearest (relative distance) to lambda_1, lambda_2 as physical.

    Raises :class:`DegenerateModesError` when two eigenvalues of ``G`` coincide
    to relative ``gap``, and also when the two PDE targets do unless
    ``require_labels`` is False, in which case an unlabeled physical pair is
    returned.
    """
    with mpmath.workdps(symbol.dps):
        vals = symbol._mp["vals"]
        l1, l2, _ = _pde_lambdas_mp(symbol.omega, symbol.epsilon, symbol.sigma)
        gaps = [float(_rel_gap(vals[i], vals[j])) for i in range(4) for j in range(i + 1, 4)]
        min_gap = min(gaps)
        if min_gap < gap:
            raise DegenerateModesError(f"eigenvalues of G coincide (relative gap {min_gap:.2e})")
        coincident = float(_rel_gap(l1, l2)) < gap
        if coincident and require_labels:
            raise DegenerateModesError("PDE eigenvalues coincide (s = 0)")
        d1 = [float(_rel_gap(v, l1)) for v in vals]
        d2 = [float(_rel_gap(v, l2)) for v in vals]
    if coincident:
        pair = sorted(range(4), key=lambda k: d1[k])[:2]
        pair = tuple(sorted(pair, key=lambda k: -symbol.eigenvalues[k].real))
        rest = tuple(sorted((k for k in range(4) if k not in pair),
                            key=lambda k: (symbol.eigenvalues[k].imag, symbol.eigenvalues[k].real)))
        return ModeClassification(pair, rest, min_gap, labeled=False)
    best, best_cost = None, np.inf
    for i in range(4):
        for j in range(4):
            if i != j and d1[i] + d2[j] < best_cost:
                best, best_cost = (i, j), d1[i] + d2[j]
    rest = tuple(k for k in range(4) if k not in best)
    # spurious ordered by imaginary part, then real part, for reproducibility
    rest = tuple(sorted(rest, key=lambda k: (symbol.eigenvalues[k].imag, symbol.eigenvalues[k].real)))
    return ModeClassification(best, rest, min_gap)


def continue_classification(prev: SchemeSymbol, prev_cls: ModeClassification,
                            symbol: SchemeSymbol) -> ModeClassification:
    """Carry labels to a neighbouring symbol by nearest eigenvalue in the complex plane."""
    old = prev.eigenvalues[list(prev_cls.order)]
    new = symbol.eigenvalues
    taken, order = set(), []
    for lam in old:
        cand = [k for k in range(4) if k not in taken]
        k = min(cand, key=lambda k: _rel_gap(new[k], lam))
        taken.add(k)
        order.append(k)
    gaps = [_rel_gap(new[i], new[j]) for i in range(4) for j in range(i + 1, 4)]
    return ModeClassification(tuple(order[:2]), tuple(order[2:]), float(min(gaps)), prev_cls.labeled)


# ---------------------------------------------------------------------------
# series expansions (to the printed orders only)


def series_eigenvalues(variant, omega, dx, epsilon, sigma) -> np.ndarray:
    """Truncated power series in ``dx`` for the four eigenvalues of ``G``."""
    variant = Variant(variant)
    l1, l2 = pde_symbol(omega, epsilon, sigma).eigenvalues
    w, h, e = omega, dx, epsilon
    if variant is Variant.JS:
        st = np.sqrt(complex(sigma**2 - 36 * e**2 * w**2))
        shift = -h**3 * w**4 / (72 * e)
        common = -6 / (e * h) + w**2 * h / e - 5 * h**3 * w**4 / (72 * e)
        return np.array([
            l1 + shift,
            l2 + shift,
            common - (st + sigma) / (2 * e**2) - 2 * h**2 * w**4 / st,
            common + (st - sigma) / (2 * e**2) + 2 * h**2 * w**4 / st,
        ])
    s = pde_symbol(omega, epsilon, sigma).s
    if s == 0:
        raise DegenerateModesError("ALT series is singular at s = 0")
    corr = w**6 * h**4 / (540 * s)
    tail = 1j * h * (12 * e**2 * w**2 + sigma**2) / (48 * e**3)
    return np.array([
        l1 + corr,
        l2 - corr,
        -6j / (e * h) - sigma / (2 * e**2) + tail,
        6j / (e * h) - sigma / (2 * e**2) - tail,
    ])


def physical_eigenvalue_error(variant, omega, dx, epsilon, sigma, dps: int = DEFAULT_DPS,
                              pair_mean: bool = False) -> complex:
    """``lambda~_1 - lambda_1`` evaluated in extended precision.

    With ``pair_mean`` the mean of the two physical eigenvalues is compared with
    the mean of lambda_1 and lambda_2 instead. This is the quantity that stays
    smooth in ``dx`` where ``s = 0``: there the pair splits like ``dx^2`` around
    the double root while its mean follows the series shift.
    """
    sym = scheme_symbol(variant, omega, dx, epsilon, sigma, dps)
    cls = classify_modes(sym, require_labels=not pair_mean)
    vals = sym._mp["vals"]
    with mpmath.workdps(dps):
        l1, l2, _ = _pde_lambdas_mp(omega, epsilon, sigma)
        if pair_mean:
            i, j = cls.physical
            return complex((vals[i] + vals[j]) / 2 - (l1 + l2) / 2)
        return complex(vals[cls.physical[0]] - l1)


# ---------------------------------------------------------------------------
# projection and decomposition


def project_mode(p_hat0, u_hat0, omega: float, dx: float) -> np.ndarray:
    """DOF coefficients ``[avg_p, avg_u, pt_p, pt_u]`` of the PDE mode on cell ``i``."""
    if not dx > 0:
        raise ValueError("dx must be positive")
    half = omega * dx / 2
    avg = 1.0 if half == 0 else np.sin(half) / half
    shift = np.exp(1j * half)
    return np.array([p_hat0 * avg, u_hat0 * avg, p_hat0 * shift, u_hat0 * shift], dtype=complex)


def _project_mode_mp(p_hat0, u_hat0, omega, dx):
    half = mpmath.mpf(omega) * mpmath.mpf(dx) / 2
    avg = mpmath.mpf(1) if half == 0 else mpmath.sin(half) / half
    shift = mpmath.expj(half)
    p, u = mpmath.mpmathify(p_hat0), mpmath.mpmathify(u_hat0)
    return mpmath.matrix([p * avg, u * avg, p * shift, u * shift])


def well_prepared_u(p_hat0, omega, epsilon, sigma):
    """``u0`` making the initial-layer component ``V2`` vanish exactly."""
    s = pde_symbol(omega, epsilon, sigma).s
    return -2j * epsilon * omega * p_hat0 / (s + sigma)


@dataclass
class ModeDecomposition:
    w0_hat: np.ndarray
    coefficients: np.ndarray  # ordered physical 1, physical 2, spurious, spurious
    components: np.ndarray  # rows V~_1..V~_4
    eigenvalues: np.ndarray  # matching order
    projected: np.ndarray  # rows pi V_1, pi V_2
    classification: ModeClassification
    errors: np.ndarray  # rows pi V_k - V~_k, k = 1, 2 (subtracted before rounding)

    def error_norms(self) -> np.ndarray:
        return np.linalg.norm(self.errors, axis=1)

    def spurious_size(self) -> float:
        return float(np.linalg.norm(self.components[2]) + np.linalg.norm(self.components[3]))

    def completeness_residual(self) -> float:
        return float(np.abs(self.components.sum(axis=0) - self.w0_hat).max())


def decompose_mode(w0_hat, symbol: SchemeSymbol, p_hat0=None, u_hat0=None,
                   classification: Optional[ModeClassification] = None) -> ModeDecomposition:
    """Expand ``w0_hat`` over the eigenvectors of ``G``.

    ``p_hat0``/``u_hat0`` define the PDE mode whose eigen-split is projected for
    comparison; by default they are read off the point-value entries. With
    ``w0_hat=None`` the projection of that mode is formed in extended
    precision: the spurious components can be far below the rounding error of
    a double-precision ``w0_hat`` once ``dx`` is small.
    """
    if w0_hat is None:
        if p_hat0 is None or u_hat0 is None:
            raise ValueError("w0_hat=None needs p_hat0 and u_hat0")
        with mpmath.workdps(symbol.dps):
            rhs = _project_mode_mp(p_hat0, u_hat0, symbol.omega, symbol.dx)
        w0_hat = np.array([complex(z) for z in rhs])
    else:
        w0_hat = np.asarray(w0_hat, dtype=complex)
        rhs = None
    cls = classify_modes(symbol) if classification is None else classification
    shift = np.exp(1j * symbol.omega * symbol.dx / 2)
    if p_hat0 is None:
        p_hat0 = w0_hat[2] / shift
    if u_hat0 is None:
        u_hat0 = w0_hat[3] / shift
    order = list(cls.order)
    with mpmath.workdps(symbol.dps):
        vecs = symbol._mp["vecs"]
        Vm = mpmath.matrix(4, 4)
        for c, k in enumerate(order):
            for r in range(4):
                Vm[r, c] = vecs[r, k]
        if rhs is None:
            rhs = mpmath.matrix([mpmath.mpc(z.real, z.imag) for z in w0_hat])
        try:
            coef = mpmath.lu_solve(Vm, rhs)
        except ZeroDivisionError as exc:
            raise DegenerateModesError("eigenvector basis is singular") from exc
        comps_mp = [[coef[c] * Vm[r, c] for r in range(4)] for c in range(4)]
        comps = np.array([[complex(z) for z in row] for row in comps_mp])
        coef = np.array([complex(coef[c]) for c in range(4)])
        _, _, s = _pde_lambdas_mp(symbol.omega, symbol.epsilon, symbol.sigma)
        if cls.labeled and s != 0:
            p0, u0 = mpmath.mpc(complex(p_hat0)), mpmath.mpc(complex(u_hat0))
            sig, iew = mpmath.mpf(symbol.sigma), 2j * mpmath.mpf(symbol.epsilon) * mpmath.mpf(symbol.omega)
            V1 = [(p0 * (s + sig) - iew * u0) / (2 * s), (u0 * (s - sig) - iew * p0) / (2 * s)]
            V2 = [(p0 * (s - sig) + iew * u0) / (2 * s), (u0 * (s + sig) + iew * p0) / (2 * s)]
            proj = [_project_mode_mp(V[0], V[1], symbol.omega, symbol.dx) for V in (V1, V2)]
            projected = np.array([[complex(z) for z in P] for P in proj])
            errors = np.array([[complex(proj[k][r] - comps_mp[k][r]) for r in range(4)] for k in range(2)])
        else:  # no eigen-split of the PDE mode to compare with
            projected = np.full((2, 4), np.nan, dtype=complex)
            errors = projected.copy()
    return ModeDecomposition(w0_hat, coef, comps, symbol.eigenvalues[order], projected, cls, errors)


# ---------------------------------------------------------------------------
# error split


def fit_order(dxs, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(dx)``."""
    dxs, errors = np.asarray(dxs, float), np.asarray(errors, float)
    if len(dxs) < 2 or np.any(errors <= 0):
        return float("nan")
    return float(np.polyfit(np.log(dxs), np.log(errors), 1)[0])


def prefactor(dxs, errors, order: float) -> float:
    """Geometric mean of ``error / dx^order``."""
    dxs, errors = np.asarray(dxs, float), np.asarray(errors, float)
    return float(np.exp(np.mean(np.log(errors) - order * np.log(dxs))))


NOMINAL_EIGENVALUE_ORDER = {Variant.JS: 3.0, Variant.ALT: 4.0}


@dataclass
class ErrorSplitRow:
    variant: str
    omega: float
    dx: float
    epsilon: float
    sigma: float
    t: float
    eigenvalues: Tuple[complex, ...]
    eigenvalue_error: float  # |lambda~_1 - lambda_1|
    eigenvector_term: float  # sum_k ||pi V_k - V~_k|| |exp(lambda_k t)|
    exponential_term: float  # sum_k ||V~_k|| |exp(lambda_k t) - exp(lambda~_k t)|
    exponential_bound: float  # t |lambda_1 - lambda~_1|
    spurious_term: float  # sum_{3,4} ||V~_k|| |exp(lambda~_k t)|
    spurious_size: float  # ||V~_3|| + ||V~_4||


@dataclass
class ErrorSplitReport:
    rows: List[ErrorSplitRow]
    orders: Dict[str, float]
    eigenvalue_prefactor: float

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def error_split_report(variant, omega: float = 1.0, epsilon: float = 0.5, sigma: float = 1.0,
                       t: float = 1.0, dxs: Sequence[float] = (), p_hat0: complex = 1.0,
                       u_hat0: Optional[complex] = None, dps: int = DEFAULT_DPS) -> ErrorSplitReport:
    """Tabulate the three error contributions of the modal error bound over a ``dx`` sweep.

    ``u_hat0=None`` selects well-prepared data. Labels are carried from one
    ``dx`` to the next by continuation; the sweep runs from the finest mesh up.
    Where ``s = 0`` the physical pair is unlabeled: ``eigenvalue_error`` is then
    the distance of the pair mean from the double root and the eigenvector
    terms are NaN.
    """
    variant = Variant(variant)
    if u_hat0 is None:
        u_hat0 = well_prepared_u(p_hat0, omega, epsilon, sigma)
    l1, l2 = pde_symbol(omega, epsilon, sigma).eigenvalues
    exact = np.array([l1, l2])
    rows = {}
    prev = prev_cls = None
    for dx in sorted(dxs):
        sym = scheme_symbol(variant, omega, dx, epsilon, sigma, dps)
        if prev is None:
            cls = classify_modes(sym, require_labels=False)
        else:
            cls = continue_classification(prev, prev_cls, sym)
        dec = decompose_mode(None, sym, p_hat0, u_hat0, cls)
        lam = dec.eigenvalues
        with mpmath.workdps(dps):
            lm1, lm2, _ = _pde_lambdas_mp(omega, epsilon, sigma)
            vals = sym._mp["vals"]
            if cls.labeled:
                lam_err = float(abs(vals[cls.physical[0]] - lm1))
            else:
                i, j = cls.physical
                lam_err = float(abs((vals[i] + vals[j]) / 2 - (lm1 + lm2) / 2))
        growth = np.abs(np.exp(exact * t))
        norms = np.linalg.norm(dec.components, axis=1)
        rows[dx] = ErrorSplitRow(
            variant.value, omega, dx, epsilon, sigma, t, tuple(lam), lam_err,
            float(np.sum(dec.error_norms() * growth)),
            float(np.sum(norms[:2] * np.abs(np.exp(exact * t) - np.exp(lam[:2] * t)))),
            t * lam_err,
            float(np.sum(norms[2:] * np.abs(np.exp(lam[2:] * t)))),
            dec.spurious_size(),
        )
        prev, prev_cls = sym, cls
    ordered = [rows[dx] for dx in sorted(rows)]
    d = np.array([r.dx for r in ordered])
    orders = {name: fit_order(d, [getattr(r, name) for r in ordered])
              for name in ("eigenvalue_error", "eigenvector_term", "spurious_size")}
    pf = prefactor(d, [r.eigenvalue_error for r in ordered], NOMINAL_EIGENVALUE_ORDER[variant]) if len(d) else float("nan")
    return ErrorSplitReport(ordered, orders, pf)


SYMBOL_CSV_FIELDS = ["variant", "omega", "dx", "epsilon", "sigma", "t",
                     "lambda1_re", "lambda1_im", "lambda2_re", "lambda2_im",
                     "lambda3_re", "lambda3_im", "lambda4_re", "lambda4_im",
                     "eigenvalue_error", "eigenvector_term", "exponential_term",
                     "exponential_bound", "spurious_term", "spurious_size"]


def write_symbol_csv(report: ErrorSplitReport, path, metadata: Optional[dict] = None):
    """One row per sweep point, followed by ``# order`` lines with the fitted slopes.

    ``metadata`` goes into a leading ``# {json}`` line.
    """
    with open(path, "w", newline="") as fh:
        if metadata is not None:
            fh.write("# " + json.dumps(metadata, sort_keys=True, default=str) + "\n")
        writer = csv.writer(fh)
        writer.writerow(SYMBOL_CSV_FIELDS)
        for r in report.rows:
            lam = [f"{x:.17g}" for z in r.eigenvalues for x in (z.real, z.imag)]
            writer.writerow([r.variant, r.omega, r.dx, r.epsilon, r.sigma, r.t, *lam,
                             *(f"{getattr(r, k):.17g}" for k in SYMBOL_CSV_FIELDS[14:])])
        for name, val in report.orders.items():
            fh.write(f"# order {name} {val:.6f}\n")
        fh.write(f"# eigenvalue_prefactor {report.eigenvalue_prefactor:.17g}\n")
