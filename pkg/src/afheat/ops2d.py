"""2D Active Flux scheme (Jacobian splitting) on a periodic Cartesian grid.

Arrays are indexed ``[i, j]`` with ``i`` along x. ``facex[i, j]`` sits at
``(x_{i+1/2}, y_j)``, ``facey[i, j]`` at ``(x_i, y_{j+1/2})`` and
``corner[i, j]`` at ``(x_{i+1/2}, y_{j+1/2})``.

The one-sided differences along grid lines use three points spaced by half a
cell, ``(a_{-1} - 4 a_{-1/2} + 3 a_0) / dx``, i.e. they are scaled by the mesh
size so every update is a derivative. The transverse difference at a face
centre spans one cell and is divided by that cell size.
"""

import numpy as np
import scipy.sparse as sp

from .core import FAMILIES_2D, VARIABLES_2D, GridSpec2D, ModelParams, State2D
from .ops1d import _finalize, shift


def simpson_flux(endpoint_a, midpoint, endpoint_b):
    return (endpoint_a + 4.0 * midpoint + endpoint_b) / 6.0


def cell_center_value(avg, face_w, face_e, face_s, face_n, corners):
    """Point value at the cell centre from the nine DOFs of one cell."""
    c1, c2, c3, c4 = corners
    return (36.0 * avg - 4.0 * (face_w + face_e + face_s + face_n) - (c1 + c2 + c3 + c4)) / 16.0


def _xm(a):  # a[i-1, j]
    return np.roll(a, 1, axis=0)


def _xp(a):  # a[i+1, j]
    return np.roll(a, -1, axis=0)


def _ym(a):
    return np.roll(a, 1, axis=1)


def _yp(a):
    return np.roll(a, -1, axis=1)


def cell_centers(avg, facex, facey, corner):
    return cell_center_value(
        avg, _xm(facex), facex, _ym(facey), facey,
        (_xm(_ym(corner)), _ym(corner), _xm(corner), corner),
    )


def _one_sided_x(same, half, dx):
    """D+ and D- at ``x_{i+1/2}``; ``half`` holds the values at ``x_i``."""
    dp = (_xm(same) - 4.0 * half + 3.0 * same) / dx
    dm = (-3.0 * same + 4.0 * _xp(half) - _xp(same)) / dx
    return dp, dm


def _one_sided_y(same, half, dy):
    dp = (_ym(same) - 4.0 * half + 3.0 * same) / dy
    dm = (-3.0 * same + 4.0 * _yp(half) - _yp(same)) / dy
    return dp, dm


def _sigma_fields(params: ModelParams, grid: GridSpec2D):
    return {loc: params.sigma_at(*grid.coordinates(loc)) for loc in ("avg", "facex", "facey", "corner")}


def rhs_js_2d(state: State2D, params: ModelParams, grid: GridSpec2D = None) -> State2D:
    grid = state.grid if grid is None else grid
    state.check_finite()
    eps, dx, dy = params.epsilon, grid.dx, grid.dy
    sig = _sigma_fields(params, grid)
    relax = 1.0 / eps**2
    s = state.arrays
    out = {}

    # averages, Simpson fluxes along the faces
    fx = {q: simpson_flux(_ym(s[f"corner_{q}"]), s[f"facex_{q}"], s[f"corner_{q}"]) for q in VARIABLES_2D}
    fy = {q: simpson_flux(_xm(s[f"corner_{q}"]), s[f"facey_{q}"], s[f"corner_{q}"]) for q in VARIABLES_2D}
    out["avg_p"] = -(fx["u"] - _xm(fx["u"])) / (eps * dx) - (fy["v"] - _ym(fy["v"])) / (eps * dy)
    out["avg_u"] = -(fx["p"] - _xm(fx["p"])) / (eps * dx) - relax * sig["avg"] * s["avg_u"]
    out["avg_v"] = -(fy["p"] - _ym(fy["p"])) / (eps * dy) - relax * sig["avg"] * s["avg_v"]

    center = {q: cell_centers(s[f"avg_{q}"], s[f"facex_{q}"], s[f"facey_{q}"], s[f"corner_{q}"])
              for q in VARIABLES_2D}
    p, u, v = "p", "u", "v"

    # x-face centres
    a, b = s["facex_p"] + s["facex_u"], s["facex_p"] - s["facex_u"]
    dxp, _ = _one_sided_x(a, center[p] + center[u], dx)
    _, dxm = _one_sided_x(b, center[p] - center[u], dx)
    dy_v = (s["corner_v"] - _ym(s["corner_v"])) / dy
    dy_p = (s["corner_p"] - _ym(s["corner_p"])) / dy
    out["facex_p"] = -0.5 / eps * (dxp - dxm) - dy_v / eps
    out["facex_u"] = -0.5 / eps * (dxp + dxm) - relax * sig["facex"] * s["facex_u"]
    out["facex_v"] = -dy_p / eps - relax * sig["facex"] * s["facex_v"]

    # y-face centres
    a, b = s["facey_p"] + s["facey_v"], s["facey_p"] - s["facey_v"]
    dyp, _ = _one_sided_y(a, center[p] + center[v], dy)
    _, dym = _one_sided_y(b, center[p] - center[v], dy)
    dx_u = (s["corner_u"] - _xm(s["corner_u"])) / dx
    dx_p = (s["corner_p"] - _xm(s["corner_p"])) / dx
    out["facey_p"] = -dx_u / eps - 0.5 / eps * (dyp - dym)
    out["facey_u"] = -dx_p / eps - relax * sig["facey"] * s["facey_u"]
    out["facey_v"] = -0.5 / eps * (dyp + dym) - relax * sig["facey"] * s["facey_v"]

    # corners: x-lines pass through y-face centres, y-lines through x-face centres
    cp, cu, cv = s["corner_p"], s["corner_u"], s["corner_v"]
    dxp, _ = _one_sided_x(cp + cu, s["facey_p"] + s["facey_u"], dx)
    _, dxm = _one_sided_x(cp - cu, s["facey_p"] - s["facey_u"], dx)
    dyp, _ = _one_sided_y(cp + cv, s["facex_p"] + s["facex_v"], dy)
    _, dym = _one_sided_y(cp - cv, s["facex_p"] - s["facex_v"], dy)
    out["corner_p"] = -0.5 / eps * (dxp - dxm) - 0.5 / eps * (dyp - dym)
    out["corner_u"] = -0.5 / eps * (dxp + dxm) - relax * sig["corner"] * cu
    out["corner_v"] = -0.5 / eps * (dyp + dym) - relax * sig["corner"] * cv

    return State2D(grid, out)


# ---------------------------------------------------------------------------
# sparse assembly
#
# A linear expression is a dict {family: sparse block}; blocks act on the
# flattened (C-order) array of that family.


def _add(*terms):
    out = {}
    for coef, expr in terms:
        for fam, block in expr.items():
            out[fam] = out[fam] + coef * block if fam in out else coef * block
    return out


class _Shifts:
    def __init__(self, n1, n2):
        self.I1, self.I2 = sp.identity(n1, format="csr"), sp.identity(n2, format="csr")
        self.n1, self.n2 = n1, n2
        self.I = sp.identity(n1 * n2, format="csr")

    def x(self, k):
        return sp.kron(shift(self.n1, k), self.I2, format="csr")

    def y(self, k):
        return sp.kron(self.I1, shift(self.n2, k), format="csr")


def assemble_operator_2d(params: ModelParams, grid: GridSpec2D) -> sp.csr_matrix:
    """Matrix ``L`` with ``L @ w == rhs_js_2d(w).to_vector()`` for the flat 2D layout."""
    S = _Shifts(grid.n1, grid.n2)
    I, Xm, Xp, Ym, Yp = S.I, S.x(-1), S.x(1), S.y(-1), S.y(1)
    eps, dx, dy = params.epsilon, grid.dx, grid.dy
    sig = {loc: sp.diags(val.ravel() / eps**2) for loc, val in _sigma_fields(params, grid).items()}

    def fam(name, block=I):
        return {name: block}

    def center(q):
        return _add(
            (36.0 / 16.0, fam(f"avg_{q}")),
            (-4.0 / 16.0, fam(f"facex_{q}", Xm + I)),
            (-4.0 / 16.0, fam(f"facey_{q}", Ym + I)),
            (-1.0 / 16.0, fam(f"corner_{q}", Xm @ Ym + Ym + Xm + I)),
        )

    def simpson_x(q):
        return _add((1 / 6, fam(f"corner_{q}", Ym + I)), (4 / 6, fam(f"facex_{q}")))

    def simpson_y(q):
        return _add((1 / 6, fam(f"corner_{q}", Xm + I)), (4 / 6, fam(f"facey_{q}")))

    def comb(q1, q2, sgn, loc):
        return _add((1.0, fam(f"{loc}_{q1}")), (sgn, fam(f"{loc}_{q2}")))

    def comb_center(q1, q2, sgn):
        return _add((1.0, center(q1)), (sgn, center(q2)))

    def dplus_x(same, half, h=dx):
        # (a[i-1] + 3 a[i]) on same-type points, -4 on the half point
        return _add((1.0 / h, {k: (Xm + 3 * I) @ v for k, v in same.items()}), (-4.0 / h, half))

    def dminus_x(same, half, h=dx):
        return _add((1.0 / h, {k: (-3 * I - Xp) @ v for k, v in same.items()}),
                    (4.0 / h, {k: Xp @ v for k, v in half.items()}))

    def dplus_y(same, half, h=dy):
        return _add((1.0 / h, {k: (Ym + 3 * I) @ v for k, v in same.items()}), (-4.0 / h, half))

    def dminus_y(same, half, h=dy):
        return _add((1.0 / h, {k: (-3 * I - Yp) @ v for k, v in same.items()}),
                    (4.0 / h, {k: Yp @ v for k, v in half.items()}))

    def diff(expr, M, h):
        return {k: (I - M) @ v / h for k, v in expr.items()}

    rows = {}
    c = -0.5 / eps
    rows["avg_p"] = _add((-1 / eps, diff(simpson_x("u"), Xm, dx)), (-1 / eps, diff(simpson_y("v"), Ym, dy)))
    rows["avg_u"] = _add((-1 / eps, diff(simpson_x("p"), Xm, dx)), (-1.0, fam("avg_u", sig["avg"])))
    rows["avg_v"] = _add((-1 / eps, diff(simpson_y("p"), Ym, dy)), (-1.0, fam("avg_v", sig["avg"])))

    dxp = dplus_x(comb("p", "u", 1, "facex"), comb_center("p", "u", 1))
    dxm = dminus_x(comb("p", "u", -1, "facex"), comb_center("p", "u", -1))
    dy_v = diff(fam("corner_v"), Ym, dy)
    dy_p = diff(fam("corner_p"), Ym, dy)
    rows["facex_p"] = _add((c, dxp), (-c, dxm), (-1 / eps, dy_v))
    rows["facex_u"] = _add((c, dxp), (c, dxm), (-1.0, fam("facex_u", sig["facex"])))
    rows["facex_v"] = _add((-1 / eps, dy_p), (-1.0, fam("facex_v", sig["facex"])))

    dyp = dplus_y(comb("p", "v", 1, "facey"), comb_center("p", "v", 1))
    dym = dminus_y(comb("p", "v", -1, "facey"), comb_center("p", "v", -1))
    dx_u = diff(fam("corner_u"), Xm, dx)
    dx_p = diff(fam("corner_p"), Xm, dx)
    rows["facey_p"] = _add((-1 / eps, dx_u), (c, dyp), (-c, dym))
    rows["facey_u"] = _add((-1 / eps, dx_p), (-1.0, fam("facey_u", sig["facey"])))
    rows["facey_v"] = _add((c, dyp), (c, dym), (-1.0, fam("facey_v", sig["facey"])))

    dxp = dplus_x(comb("p", "u", 1, "corner"), comb("p", "u", 1, "facey"))
    dxm = dminus_x(comb("p", "u", -1, "corner"), comb("p", "u", -1, "facey"))
    dyp = dplus_y(comb("p", "v", 1, "corner"), comb("p", "v", 1, "facex"))
    dym = dminus_y(comb("p", "v", -1, "corner"), comb("p", "v", -1, "facex"))
    rows["corner_p"] = _add((c, dxp), (-c, dxm), (c, dyp), (-c, dym))
    rows["corner_u"] = _add((c, dxp), (c, dxm), (-1.0, fam("corner_u", sig["corner"])))
    rows["corner_v"] = _add((c, dyp), (c, dym), (-1.0, fam("corner_v", sig["corner"])))

    blocks = [[rows[r].get(col) for col in FAMILIES_2D] for r in FAMILIES_2D]
    n = grid.n1 * grid.n2
    blocks[0][0] = blocks[0][0] if blocks[0][0] is not None else sp.csr_matrix((n, n))
    return _finalize(sp.bmat(blocks, format="csr"))
