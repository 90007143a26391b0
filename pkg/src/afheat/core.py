"""Grids, degree-of-freedom containers, initial-data projection and error norms.

Every other module works on the flat-vector form of the states defined here.
The 1D layout is ``[avg_p, avg_u, pt_p, pt_u]`` (each of length N); the 2D
layout is location-major, ``[avg, facex, facey, corner]`` with ``(p, u, v)``
inside each location, every block an ``N1*N2`` C-ordered array.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Optional, Union

import numpy as np

FAMILIES_1D = ("avg_p", "avg_u", "pt_p", "pt_u")
LOCATIONS_2D = ("avg", "facex", "facey", "corner")
VARIABLES_2D = ("p", "u", "v")
FAMILIES_2D = tuple(f"{loc}_{q}" for loc in LOCATIONS_2D for q in VARIABLES_2D)

MIN_CELLS = 4

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(5)


class Variant(str, Enum):
    """Point-value update used by the 1D scheme."""

    JS = "js"
    ALT = "alt"


class GridError(ValueError):
    pass


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridSpec1D:
    x_min: float
    x_max: float
    n_cells: int

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def interfaces(self) -> np.ndarray:
        """Right interface ``x_{i+1/2}`` of every cell."""
        return self.x_min + (np.arange(self.n_cells) + 1.0) * self.dx

    @property
    def n_dofs(self) -> int:
        return 4 * self.n_cells

    def wrap(self, i):
        return np.mod(i, self.n_cells)


@dataclass(frozen=True)
class GridSpec2D:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    n1: int
    n2: int

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n1

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.n2

    @property
    def shape(self):
        return (self.n1, self.n2)

    @property
    def n_dofs(self) -> int:
        return 12 * self.n1 * self.n2

    @property
    def xc(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n1) + 0.5) * self.dx

    @property
    def yc(self) -> np.ndarray:
        return self.y_min + (np.arange(self.n2) + 0.5) * self.dy

    @property
    def xf(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n1) + 1.0) * self.dx

    @property
    def yf(self) -> np.ndarray:
        return self.y_min + (np.arange(self.n2) + 1.0) * self.dy

    def coordinates(self, location: str):
        """Meshgrid ``(X, Y)`` of the points carrying the given DOF location.

        For ``avg`` the cell centers are returned.
        """
        xs = self.xf if location in ("facex", "corner") else self.xc
        ys = self.yf if location in ("facey", "corner") else self.yc
        return np.meshgrid(xs, ys, indexing="ij")

    def line_x(self) -> GridSpec1D:
        return GridSpec1D(self.x_min, self.x_max, self.n1)

    def line_y(self) -> GridSpec1D:
        return GridSpec1D(self.y_min, self.y_max, self.n2)


def build_grid_1d(x_min: float, x_max: float, n_cells: int) -> GridSpec1D:
    """Uniform periodic 1D grid; at least four cells so every stencil fits."""
    if not (np.isfinite(x_min) and np.isfinite(x_max)) or not x_max > x_min:
        raise GridError(f"empty interval [{x_min}, {x_max}]")
    if int(n_cells) != n_cells or n_cells < MIN_CELLS:
        raise GridError(f"n_cells must be an integer >= {MIN_CELLS}, got {n_cells}")
    return GridSpec1D(float(x_min), float(x_max), int(n_cells))


def build_grid_2d(x_range, y_range, n1: int, n2: Optional[int] = None) -> GridSpec2D:
    n2 = n1 if n2 is None else n2
    gx = build_grid_1d(x_range[0], x_range[1], n1)
    gy = build_grid_1d(y_range[0], y_range[1], n2)
    return GridSpec2D(gx.x_min, gx.x_max, gy.x_min, gy.x_max, gx.n_cells, gy.n_cells)


# ---------------------------------------------------------------------------
# model parameters

SigmaSpec = Union[float, Callable[..., np.ndarray]]


@dataclass(frozen=True)
class ModelParams:
    """Scaling parameter, relaxation coefficient and point-update choice.

    ``sigma`` is either a positive number or a callable evaluated at the DOF
    coordinates (``sigma(x)`` in 1D, ``sigma(x, y)`` in 2D).
    """

    epsilon: float
    sigma: SigmaSpec = 1.0
    variant: Variant = Variant.JS

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        object.__setattr__(self, "variant", Variant(self.variant))
        if not callable(self.sigma) and not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def constant_sigma(self) -> bool:
        return not callable(self.sigma)

    def sigma_at(self, *coords) -> np.ndarray:
        shape = np.shape(coords[0])
        if callable(self.sigma):
            values = np.broadcast_to(np.asarray(self.sigma(*coords), dtype=float), shape)
        else:
            values = np.full(shape, float(self.sigma))
        if not np.all(values > 0) or not np.all(np.isfinite(values)):
            raise ValueError("sigma must be positive and finite at every DOF")
        return np.array(values)


# ---------------------------------------------------------------------------
# states


def _check_finite(name, values):
    if not np.all(np.isfinite(values)):
        raise FloatingPointError(f"non-finite values in {name}")


@dataclass
class State1D:
    grid: GridSpec1D
    avg_p: np.ndarray
    avg_u: np.ndarray
    pt_p: np.ndarray
    pt_u: np.ndarray

    def __post_init__(self):
        n = self.grid.n_cells
        for name in FAMILIES_1D:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
            setattr(self, name, arr)

    def families(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in FAMILIES_1D}

    def to_vector(self) -> np.ndarray:
        return np.concatenate([getattr(self, name) for name in FAMILIES_1D])

    @classmethod
    def from_vector(cls, grid: GridSpec1D, vec) -> "State1D":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (grid.n_dofs,):
            raise ValueError(f"vector of length {vec.size} does not match grid")
        return cls(grid, *np.split(vec.copy(), 4))

    @classmethod
    def zeros(cls, grid: GridSpec1D) -> "State1D":
        return cls.from_vector(grid, np.zeros(grid.n_dofs))

    def check_finite(self):
        for name, arr in self.families().items():
            _check_finite(name, arr)


@dataclass
class State2D:
    grid: GridSpec2D
    arrays: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        shape = self.grid.shape
        arrays = {}
        for name in FAMILIES_2D:
            arr = np.asarray(self.arrays.get(name, np.zeros(shape)), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            arrays[name] = arr
        unknown = set(self.arrays) - set(FAMILIES_2D)
        if unknown:
            raise ValueError(f"unknown families {sorted(unknown)}")
        self.arrays = arrays

    def __getitem__(self, name) -> np.ndarray:
        return self.arrays[name]

    def families(self) -> Dict[str, np.ndarray]:
        return dict(self.arrays)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.arrays[name].ravel() for name in FAMILIES_2D])

    @classmethod
    def from_vector(cls, grid: GridSpec2D, vec) -> "State2D":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (grid.n_dofs,):
            raise ValueError(f"vector of length {vec.size} does not match grid")
        blocks = np.split(vec.copy(), 12)
        return cls(grid, {name: b.reshape(grid.shape) for name, b in zip(FAMILIES_2D, blocks)})

    @classmethod
    def zeros(cls, grid: GridSpec2D) -> "State2D":
        return cls(grid)

    def check_finite(self):
        for name, arr in self.arrays.items():
            _check_finite(name, arr)


# ---------------------------------------------------------------------------
# projection of initial data


def _evaluate(f, *coords):
    values = np.asarray(f(*coords), dtype=float)
    values = np.broadcast_to(values, np.shape(coords[0])).copy()
    _check_finite(getattr(f, "__name__", "initial data"), values)
    return values


def cell_averages_1d(f, grid: GridSpec1D) -> np.ndarray:
    """Cell averages by 5-point Gauss-Legendre quadrature (exact to degree 9)."""
    x = grid.centers[:, None] + 0.5 * grid.dx * _GAUSS_NODES[None, :]
    return 0.5 * _evaluate(f, x) @ _GAUSS_WEIGHTS


def cell_averages_2d(f, grid: GridSpec2D) -> np.ndarray:
    x = grid.xc[:, None, None, None] + 0.5 * grid.dx * _GAUSS_NODES[None, None, :, None]
    y = grid.yc[None, :, None, None] + 0.5 * grid.dy * _GAUSS_NODES[None, None, None, :]
    x, y = np.broadcast_arrays(x, y)
    w = np.outer(_GAUSS_WEIGHTS, _GAUSS_WEIGHTS)
    return 0.25 * np.einsum("ijab,ab->ij", _evaluate(f, x, y), w)


def project_initial_1d(f_p, f_u, grid: GridSpec1D) -> State1D:
    """Cell averages of ``f_p``/``f_u`` plus their values at the right interfaces."""
    xf = grid.interfaces
    return State1D(
        grid,
        avg_p=cell_averages_1d(f_p, grid),
        avg_u=cell_averages_1d(f_u, grid),
        pt_p=_evaluate(f_p, xf),
        pt_u=_evaluate(f_u, xf),
    )


def project_initial_2d(f_p, f_u, f_v, grid: GridSpec2D) -> State2D:
    arrays = {}
    for q, f in zip(VARIABLES_2D, (f_p, f_u, f_v)):
        arrays[f"avg_{q}"] = cell_averages_2d(f, grid)
        for loc in LOCATIONS_2D[1:]:
            arrays[f"{loc}_{q}"] = _evaluate(f, *grid.coordinates(loc))
    return State2D(grid, arrays)


def dirac_1d(grid: GridSpec1D, cell: Optional[int] = None) -> State1D:
    """Unit mass in one cell average (default: the cell containing the midpoint)."""
    state = State1D.zeros(grid)
    if cell is None:
        cell = min(int((0.5 * (grid.x_min + grid.x_max) - grid.x_min) // grid.dx), grid.n_cells - 1)
    state.avg_p[cell] = 1.0 / grid.dx
    return state


def dirac_2d(grid: GridSpec2D, cell=None) -> State2D:
    """Unit mass ``1/(dx*dy)`` in the cell containing the domain center, all else zero."""
    if cell is None:
        i = min(int((0.5 * (grid.x_max - grid.x_min)) // grid.dx), grid.n1 - 1)
        j = min(int((0.5 * (grid.y_max - grid.y_min)) // grid.dy), grid.n2 - 1)
        cell = (i, j)
    state = State2D.zeros(grid)
    state.arrays["avg_p"][cell] = 1.0 / (grid.dx * grid.dy)
    return state


def square_wave(x, inside=2.0, outside=1.0, half_width=0.5, tol=1e-12):
    """Square pulse; exactly at the jump the mean of both one-sided limits is returned."""
    x = np.asarray(x, dtype=float)
    r = np.abs(x)
    out = np.where(r < half_width, inside, outside).astype(float)
    return np.where(np.abs(r - half_width) <= tol, 0.5 * (inside + outside), out)


# ---------------------------------------------------------------------------
# error norms


@dataclass
class ErrorReport:
    """Discrete L1, L2 and Linf norms of ``numerical - reference`` per DOF family.

    ``L1 = w * sum|e|`` and ``L2 = sqrt(w * sum e^2)`` with the cell measure
    ``w`` (``dx`` or ``dx*dy``), ``Linf = max|e|``. 2D reports also carry
    ``pt_p``, ``pt_u``, ``pt_v``: the face and corner errors of a variable pooled. With domain measure ``|O|``
    these satisfy ``L1 <= sqrt(|O|) L2 <= |O| Linf``.
    """

    norms: Dict[str, Dict[str, float]]
    measure: float

    def __getitem__(self, family):
        return self.norms[family]

    def get(self, family, norm="L1") -> float:
        return self.norms[family][norm]

    @property
    def families(self):
        return tuple(self.norms)


def error_norms(numerical, reference) -> ErrorReport:
    if type(numerical) is not type(reference):
        raise GridError("states of different dimension")
    if numerical.grid != reference.grid:
        raise GridError("grid mismatch between numerical and reference state")
    grid = numerical.grid
    if isinstance(grid, GridSpec1D):
        weight, measure = grid.dx, grid.length
    else:
        weight = grid.dx * grid.dy
        measure = (grid.x_max - grid.x_min) * (grid.y_max - grid.y_min)
    ref = reference.families()
    diffs = {name: np.abs(values - ref[name]).ravel() for name, values in numerical.families().items()}
    if isinstance(grid, GridSpec2D):
        # pooled point-value error per variable over faces and corners
        for q in VARIABLES_2D:
            diffs[f"pt_{q}"] = np.concatenate([diffs[f"{loc}_{q}"] for loc in ("facex", "facey", "corner")])
    norms = {}
    for name, e in diffs.items():
        norms[name] = {
            "L1": float(weight * e.sum()),
            "L2": float(math.sqrt(weight * float(e @ e))),
            "Linf": float(e.max()),
        }
    return ErrorReport(norms, measure)


# ---------------------------------------------------------------------------
# CSV serialization


def _grid_to_dict(grid):
    kind = "1d" if isinstance(grid, GridSpec1D) else "2d"
    return {"kind": kind, **grid.__dict__}


def _grid_from_dict(d):
    d = dict(d)
    kind = d.pop("kind")
    return GridSpec1D(**d) if kind == "1d" else GridSpec2D(**d)


def write_state_csv(state, path, metadata: Optional[dict] = None):
    """Write a state as one row per DOF; values carry 17 significant digits.

    The first line is a ``#`` comment holding the grid (and optional metadata)
    as JSON so that :func:`read_state_csv` can rebuild the state exactly.
    """
    grid = state.grid
    header = {"grid": _grid_to_dict(grid)}
    if metadata:
        header["meta"] = metadata
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True, default=str) + "\n")
        writer = csv.writer(fh)
        if isinstance(state, State1D):
            writer.writerow(["family", "index", "x", "value"])
            for name, values in state.families().items():
                xs = grid.centers if name.startswith("avg") else grid.interfaces
                for i, (x, v) in enumerate(zip(xs, values)):
                    writer.writerow([name, i, f"{x:.17g}", f"{v:.17g}"])
        else:
            writer.writerow(["family", "i", "j", "x", "y", "value"])
            for name, values in state.families().items():
                X, Y = grid.coordinates(name.split("_")[0])
                for (i, j), v in np.ndenumerate(values):
                    writer.writerow([name, i, j, f"{X[i, j]:.17g}", f"{Y[i, j]:.17g}", f"{v:.17g}"])


def read_state_csv(path):
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing grid header line")
        grid = _grid_from_dict(json.loads(first[2:])["grid"])
        rows = list(csv.DictReader(fh))
    if isinstance(grid, GridSpec1D):
        state = State1D.zeros(grid)
        for row in rows:
            getattr(state, row["family"])[int(row["index"])] = float(row["value"])
    else:
        state = State2D.zeros(grid)
        for row in rows:
            state.arrays[row["family"]][int(row["i"]), int(row["j"])] = float(row["value"])
    return state


def write_contour_grid(state: State2D, family: str, path, metadata: Optional[dict] = None):
    """Plain structured-grid text: ``n1 n2`` then one ``x y value`` row per point.

    With ``metadata`` a ``# {json}`` comment line precedes the header.
    """
    X, Y = state.grid.coordinates(family.split("_")[0])
    values = state[family]
    with open(path, "w") as fh:
        if metadata is not None:
            fh.write("# " + json.dumps(metadata, sort_keys=True, default=str) + "\n")
        fh.write(f"{values.shape[0]} {values.shape[1]}\n")
        for (i, j), v in np.ndenumerate(values):
            fh.write(f"{X[i, j]:.17g} {Y[i, j]:.17g} {v:.17g}\n")
