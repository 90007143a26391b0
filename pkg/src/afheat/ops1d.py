"""Semi-discrete Active Flux right-hand sides for the 1D hyperbolic heat system.

    p_t + u_x / eps = 0,    u_t + p_x / eps + sigma u / eps^2 = 0

Point values ``pt[i]`` live at the right interface ``x_{i+1/2}`` of cell ``i``;
all index arithmetic is periodic.
"""

import numpy as np
import scipy.sparse as sp

from .core import GridSpec1D, ModelParams, State1D, Variant


def upwind_derivatives(pt, avg, i, side, dx):
    """Derivative at ``x_{i+1/2}`` of the parabola reconstructed in the upwind cell.

    ``side="plus"`` uses cell ``i`` (left of the interface), ``"minus"`` uses
    cell ``i+1``. ``i`` may be an integer or an index array.
    """
    n = len(pt)
    i = np.asarray(i)
    if side == "plus":
        return (2.0 * pt[(i - 1) % n] - 6.0 * avg[i % n] + 4.0 * pt[i % n]) / dx
    if side == "minus":
        return (-4.0 * pt[i % n] + 6.0 * avg[(i + 1) % n] - 2.0 * pt[(i + 1) % n]) / dx
    raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")


def d_plus(pt, avg, dx):
    return (2.0 * np.roll(pt, 1) - 6.0 * avg + 4.0 * pt) / dx


def d_minus(pt, avg, dx):
    return (-4.0 * pt + 6.0 * np.roll(avg, -1) - 2.0 * np.roll(pt, -1)) / dx


def _sigmas(params: ModelParams, grid: GridSpec1D):
    # cell centers for averages, interfaces for point values
    return params.sigma_at(grid.centers), params.sigma_at(grid.interfaces)


def _average_rhs(state, params, grid, sig_c):
    eps, dx = params.epsilon, grid.dx
    d_avg_p = -(state.pt_u - np.roll(state.pt_u, 1)) / (eps * dx)
    d_avg_u = -(state.pt_p - np.roll(state.pt_p, 1)) / (eps * dx) - sig_c / eps**2 * state.avg_u
    return d_avg_p, d_avg_u


def rhs_js_1d(state: State1D, params: ModelParams, grid: GridSpec1D = None) -> State1D:
    """Time derivatives of all DOFs with the Jacobian-splitting point update."""
    grid = state.grid if grid is None else grid
    state.check_finite()
    eps, dx = params.epsilon, grid.dx
    sig_c, sig_f = _sigmas(params, grid)
    d_avg_p, d_avg_u = _average_rhs(state, params, grid, sig_c)

    dpp, dmp = d_plus(state.pt_p, state.avg_p, dx), d_minus(state.pt_p, state.avg_p, dx)
    dpu, dmu = d_plus(state.pt_u, state.avg_u, dx), d_minus(state.pt_u, state.avg_u, dx)
    d_pt_p = -0.5 / eps * ((dpp - dmp) + (dpu + dmu))
    d_pt_u = -0.5 / eps * ((dpp + dmp) + (dpu - dmu)) - sig_f / eps**2 * state.pt_u
    return State1D(grid, d_avg_p, d_avg_u, d_pt_p, d_pt_u)


def rhs_alt_1d(state: State1D, params: ModelParams, grid: GridSpec1D = None) -> State1D:
    """Time derivatives with the alternating (p right-biased on u, u left-biased on p) update."""
    grid = state.grid if grid is None else grid
    state.check_finite()
    eps, dx = params.epsilon, grid.dx
    sig_c, sig_f = _sigmas(params, grid)
    d_avg_p, d_avg_u = _average_rhs(state, params, grid, sig_c)

    d_pt_p = -d_plus(state.pt_u, state.avg_u, dx) / eps
    d_pt_u = -d_minus(state.pt_p, state.avg_p, dx) / eps - sig_f / eps**2 * state.pt_u
    return State1D(grid, d_avg_p, d_avg_u, d_pt_p, d_pt_u)


def rhs_1d(state: State1D, params: ModelParams, grid: GridSpec1D = None) -> State1D:
    if params.variant is Variant.JS:
        return rhs_js_1d(state, params, grid)
    return rhs_alt_1d(state, params, grid)


# ---------------------------------------------------------------------------
# sparse assembly


def shift(n, k):
    """Periodic shift ``(S a)[i] = a[i + k]`` as a CSR matrix."""
    rows = np.arange(n)
    return sp.csr_matrix((np.ones(n), (rows, (rows + k) % n)), shape=(n, n))


def _finalize(L):
    L = sp.csr_matrix(L)
    L.sum_duplicates()
    L.eliminate_zeros()
    L.sort_indices()
    return L


def assemble_operator_1d(params: ModelParams, grid: GridSpec1D) -> sp.csr_matrix:
    """Matrix ``L`` with ``L @ w == rhs(w).to_vector()`` for the flat 1D layout."""
    n, dx, eps = grid.n_cells, grid.dx, params.epsilon
    sig_c, sig_f = _sigmas(params, grid)
    I, Sm, Sp = sp.identity(n, format="csr"), shift(n, -1), shift(n, 1)
    Z = sp.csr_matrix((n, n))

    diff = (I - Sm) / (eps * dx)  # a[i] - a[i-1]
    # D+ and D- split into their action on (pt, avg)
    dplus_pt, dplus_avg = (2.0 * Sm + 4.0 * I) / dx, -6.0 * I / dx
    dminus_pt, dminus_avg = (-4.0 * I - 2.0 * Sp) / dx, 6.0 * Sp / dx
    relax_c = sp.diags(sig_c / eps**2)
    relax_f = sp.diags(sig_f / eps**2)

    if params.variant is Variant.JS:
        c = -0.5 / eps
        # blocks act on [avg_p, avg_u, pt_p, pt_u]
        row_pt_p = [
            c * (dplus_avg - dminus_avg),
            c * (dplus_avg + dminus_avg),
            c * (dplus_pt - dminus_pt),
            c * (dplus_pt + dminus_pt),
        ]
        row_pt_u = [
            c * (dplus_avg + dminus_avg),
            c * (dplus_avg - dminus_avg),
            c * (dplus_pt + dminus_pt),
            c * (dplus_pt - dminus_pt) - relax_f,
        ]
    else:
        row_pt_p = [Z, -dplus_avg / eps, Z, -dplus_pt / eps]
        row_pt_u = [-dminus_avg / eps, Z, -dminus_pt / eps, -relax_f]

    L = sp.bmat(
        [
            [Z, Z, Z, -diff],
            [Z, -relax_c, -diff, Z],
            row_pt_p,
            row_pt_u,
        ],
        format="csr",
    )
    return _finalize(L)


def write_triplets(L, path):
    """Write ``row col value`` lines (17 significant digits), row-major order."""
    L = sp.csr_matrix(L)
    L.sort_indices()
    coo = L.tocoo()
    with open(path, "w") as fh:
        fh.write(f"# shape {L.shape[0]} {L.shape[1]} nnz {L.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")


def read_triplets(path):
    with open(path) as fh:
        head = fh.readline().split()
        shape = (int(head[2]), int(head[3]))
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix(shape)
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=shape)
