import numpy as np
import pytest
import scipy.sparse as sp

from afheat.core import ModelParams, build_grid_1d, build_grid_2d
from afheat.linsolve import (
    SolverError,
    StageSolver,
    append_solver_log,
    build_stage_matrix,
    solve,
)
from afheat.ops1d import assemble_operator_1d
from afheat.ops2d import assemble_operator_2d


def test_stage_matrix_trivial_cases(rng):
    L = sp.random(8, 8, density=0.5, random_state=1, format="csr")
    eye = np.eye(8)
    np.testing.assert_array_equal(build_stage_matrix(sp.csr_matrix((8, 8)), 0.3).matrix.toarray(), eye)
    np.testing.assert_array_equal(build_stage_matrix(L, 0.0).matrix.toarray(), eye)
    w = rng.standard_normal(8)
    M = build_stage_matrix(L, 0.1).matrix
    np.testing.assert_allclose(M @ w, w - 0.1 * (L @ w), rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        build_stage_matrix(L, -1.0)


def test_identity_and_scaled_identity():
    sysI = build_stage_matrix(sp.csr_matrix((5, 5)), 0.5)
    b = np.arange(5.0)
    x, stats = solve(sysI, b)
    np.testing.assert_array_equal(x, b)
    sys2 = build_stage_matrix(-sp.identity(5, format="csr"), 1.0)  # M = 2I
    x, _ = solve(sys2, np.ones(5))
    np.testing.assert_allclose(x, 0.5)


@pytest.mark.parametrize("mode", ["direct", "gmres"])
def test_random_diagonally_dominant_against_dense(mode, rng):
    n = 50
    A = sp.random(n, n, density=0.1, random_state=7).toarray()
    A -= np.diag(np.abs(A).sum(axis=1) + 1.0)  # I - L is then diagonally dominant
    system = build_stage_matrix(sp.csr_matrix(A), 1.0, mode)
    b = rng.standard_normal(n)
    x, stats = solve(system, b)
    ref = np.linalg.solve(np.eye(n) - A, b)
    assert np.linalg.norm(x - ref) <= 1e-10 * np.linalg.norm(ref)
    assert stats.mode == mode and stats.n == n


def test_zero_rhs_short_circuits():
    system = build_stage_matrix(sp.identity(4, format="csr"), 0.1)
    x, stats = solve(system, np.zeros(4))
    assert not x.any() and stats.iterations == 0


def test_rejects_non_finite_rhs():
    system = build_stage_matrix(sp.identity(3, format="csr"), 0.1)
    with pytest.raises(SolverError):
        solve(system, np.array([1.0, np.nan, 0.0]))


def test_singular_matrix_is_reported():
    # L = I and alpha = 1 gives M = 0 on every row
    system = build_stage_matrix(sp.identity(4, format="csr"), 1.0)
    with pytest.raises(SolverError):
        solve(system, np.ones(4))


def test_unknown_mode():
    with pytest.raises(ValueError):
        build_stage_matrix(sp.identity(3, format="csr"), 0.1, mode="cg")


@pytest.mark.parametrize("eps", [1.0, 1e-6])
def test_stiff_stage_system_backward_error(eps, rng):
    g = build_grid_1d(0, 1, 40)
    L = assemble_operator_1d(ModelParams(eps, 1.0, "js"), g)
    solver = StageSolver(L)
    b = rng.standard_normal(g.n_dofs)
    alpha = 0.4 * g.dx
    x = solver(alpha, b)
    M = build_stage_matrix(L, alpha).matrix
    D = 1.0 / abs(M).max(axis=1).toarray().ravel()
    err = np.linalg.norm(D * (M @ x - b)) / (np.linalg.norm(abs(sp.diags(D) @ M) @ np.abs(x)) + np.linalg.norm(D * b))
    assert err <= 1e-12
    assert solver.log[-1].residual <= 1e-12
    # the factorization is cached per alpha
    solver(alpha, b)
    assert len(solver._systems) == 1


def test_gmres_agrees_with_direct_in_2d(rng):
    g = build_grid_2d((-1, 1), (-1, 1), 8)
    L = assemble_operator_2d(ModelParams(1.0, lambda x, y: 1 + 1e4 * (np.abs(x) < 0.3)), g)
    b = rng.standard_normal(g.n_dofs)
    xd = StageSolver(L, "direct")(g.dx, b)
    xg = StageSolver(L, "gmres")(g.dx, b)
    assert np.linalg.norm(xd - xg) <= 1e-8 * np.linalg.norm(xd)


def test_solver_log_csv(tmp_path):
    solver = StageSolver(sp.csr_matrix((3, 3)))
    solver(0.1, np.ones(3))
    path = tmp_path / "log.csv"
    append_solver_log(solver.log, path, leg="a")
    append_solver_log(solver.log, path, leg="b")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("leg,mode") and len(lines) == 3
