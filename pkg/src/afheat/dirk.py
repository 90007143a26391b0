"""Diagonally implicit Runge-Kutta integration of the linear system ``w' = L w``."""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import numpy as np

from .linsolve import SolverError, StageSolver


class TableauError(ValueError):
    pass


@dataclass(frozen=True)
class ButcherTableau:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    name: str = ""

    @property
    def stages(self) -> int:
        return len(self.b)

    def stability_function(self, z):
        """``R(z)`` for ``y' = lambda y`` with ``z = lambda dt``, evaluated pointwise.

        Stage values come from forward substitution on the lower-triangular
        ``A``; for a stiffly accurate tableau ``R`` is the last stage value,
        which stays accurate at very large ``|z|`` where ``1 + z b^T Y`` cancels.
        """
        A, b = self.A, self.b
        s = self.stages
        stiff = np.array_equal(A[-1], b)
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.empty_like(z)
        for k, zk in enumerate(z):
            Y = np.zeros(s, dtype=complex)
            for i in range(s):
                Y[i] = (1.0 + zk * (A[i, :i] @ Y[:i])) / (1.0 - zk * A[i, i])
            out[k] = Y[-1] if stiff else 1.0 + zk * (b @ Y)
        return out


def _esdirk3_4l2sa():
    # ESDIRK3(2)4L[2]SA of Kennedy & Carpenter (implicit part of ARK3(2)4L[2]SA)
    g = Fraction(1767732205903, 4055673282236)
    b = [
        Fraction(1471266399579, 7840856788654),
        Fraction(-4482444167858, 7529755066697),
        Fraction(11266239266428, 11593286722821),
        g,
    ]
    a31 = Fraction(2746238789719, 10658868560708)
    a32 = Fraction(-640167445237, 6845629431997)
    A = [
        [0, 0, 0, 0],
        [g, g, 0, 0],
        [a31, a32, g, 0],
        b,
    ]
    c = [0, 2 * g, Fraction(3, 5), 1]
    to = lambda rows: np.array(rows, dtype=float)  # noqa: E731
    return ButcherTableau(to(A), to(b), to(c), name="ESDIRK3(2)4L[2]SA")


ESDIRK3_4L2SA = _esdirk3_4l2sa()
DEFAULT_TABLEAU = ESDIRK3_4L2SA


@dataclass
class TableauReport:
    residuals: Dict[str, float]
    tol: float

    @property
    def violated(self) -> List[str]:
        return [k for k, v in self.residuals.items() if not abs(v) <= self.tol]

    @property
    def ok(self) -> bool:
        return not self.violated


def tableau_residuals(tab: ButcherTableau) -> Dict[str, float]:
    A, b, c = tab.A, tab.b, tab.c
    strictly_upper = np.triu(A, 1)
    return {
        "lower_triangular": float(np.abs(strictly_upper).max()),
        "row_sum_c": float(np.abs(A.sum(axis=1) - c).max()),
        "stiffly_accurate": float(np.abs(A[-1] - b).max()),
        "sum_b": float(b.sum() - 1.0),
        "order2_bc": float(b @ c - 0.5),
        "order3_bc2": float(b @ c**2 - 1.0 / 3.0),
        "order3_bAc": float(b @ A @ c - 1.0 / 6.0),
        "implicit_diagonal": float(0.0 if np.all(np.diag(A)[1:] > 0) else 1.0),
    }


def validate_tableau(tab: ButcherTableau, tol: float = 1e-12, stages: int = 4) -> TableauReport:
    """Check shape, stiff accuracy and the third-order conditions; raise on violation."""
    if tab.A.shape != (stages, stages) or tab.b.shape != (stages,) or tab.c.shape != (stages,):
        raise TableauError(f"tableau must have {stages} stages")
    report = TableauReport(tableau_residuals(tab), tol)
    if not report.ok:
        detail = ", ".join(f"{k}={report.residuals[k]:.3e}" for k in report.violated)
        raise TableauError(f"tableau {tab.name or '?'} violates: {detail}")
    return report


# ---------------------------------------------------------------------------
# stepping


def dirk_step(w, dt: float, L=None, solver: Optional[StageSolver] = None,
              tableau: ButcherTableau = DEFAULT_TABLEAU):
    """One step; stage ``i`` solves ``(I - dt a_ii L) W_i = w + dt sum_{j<i} a_ij L W_j``.

    The tableau is stiffly accurate, so the last stage is returned.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if solver is None:
        solver = StageSolver(L)
    L = solver.L
    A = tableau.A
    w = np.asarray(w, dtype=float)
    K = []
    W = w
    for i in range(tableau.stages):
        rhs = w.copy()
        for j in range(i):
            if A[i, j] != 0.0:
                rhs += dt * A[i, j] * K[j]
        if A[i, i] == 0.0:
            W = rhs
        else:
            try:
                W = solver(dt * A[i, i], rhs)
            except SolverError as exc:
                raise SolverError(f"stage {i + 1}: {exc}", exc.residual, exc.iterations) from exc
        K.append(L @ W)
    return W


@dataclass
class TimeStepPolicy:
    """How the step size is chosen.

    ``cfl``: ``dt = cfl * min(dx, dy)``; ``accuracy1d``: ``dt = prefactor * dx**exponent``;
    ``fixed``: ``dt`` as given.
    """

    mode: str = "cfl"
    cfl: float = 1.0
    prefactor: float = 0.2
    exponent: float = 4.0 / 3.0
    dt: Optional[float] = None

    def step_size(self, *spacings) -> float:
        h = min(spacings) if spacings else None
        if self.mode == "cfl":
            dt = self.cfl * h
        elif self.mode == "accuracy1d":
            dt = self.prefactor * h**self.exponent
        elif self.mode == "fixed":
            dt = self.dt
        else:
            raise ValueError(f"unknown time-step mode {self.mode!r}")
        if dt is None or not dt > 0:
            raise ValueError(f"time-step policy produced dt={dt}")
        return float(dt)


def step_sequence(T: float, dt: float) -> List[float]:
    """Constant steps with the last one clipped to land exactly on ``T``."""
    if not T > 0:
        raise ValueError("T must be positive")
    n_full = int(np.floor(T / dt * (1 + 1e-12)))
    steps = [dt] * n_full
    rest = T - n_full * dt
    if rest > 1e-12 * T:
        steps.append(rest)
    return steps


@dataclass
class IntegrationResult:
    w: np.ndarray
    t: float
    n_steps: int
    dt: float
    snapshots: Dict[float, np.ndarray] = field(default_factory=dict)
    solver_stats: list = field(default_factory=list)


def integrate(w0, T: float, dt: float, L, solver: Optional[StageSolver] = None,
              tableau: ButcherTableau = DEFAULT_TABLEAU, snapshot_times: Sequence[float] = (),
              mode: str = "direct") -> IntegrationResult:
    """Advance ``w0`` to time ``T`` with constant step ``dt`` (final step clipped).

    Snapshot times are hit exactly by splitting the step sequence there.
    """
    if solver is None:
        solver = StageSolver(L, mode=mode)
    marks = sorted({float(s) for s in snapshot_times if 0 < s < T} | {float(T)})
    w = np.asarray(w0, dtype=float).copy()
    t, n = 0.0, 0
    snaps = {}
    for mark in marks:
        for h in step_sequence(mark - t, dt):
            w = dirk_step(w, h, solver=solver, tableau=tableau)
            n += 1
        t = mark
        if mark in snapshot_times or mark != T:
            snaps[mark] = w.copy()
    return IntegrationResult(w, t, n, dt, snaps, list(solver.log))
