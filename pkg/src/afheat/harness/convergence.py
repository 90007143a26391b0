"""Observed convergence rates between successive dyadic meshes."""

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from ..core import ErrorReport, GridSpec1D, State1D

NORMS = ("L1", "L2", "Linf")


class RefinementError(ValueError):
    pass


@dataclass
class ConvergenceTable:
    """Errors per mesh and the rates ``log2(e_coarse / e_fine)`` between neighbours.

    ``errors[family][norm]`` is aligned with ``meshes``; ``rates[family][norm]``
    has one entry fewer.
    """

    meshes: List[int]
    dx: List[float]
    errors: Dict[str, Dict[str, List[float]]]
    rates: Dict[str, Dict[str, List[float]]] = field(default_factory=dict)
    label: str = ""

    @property
    def families(self):
        return tuple(self.errors)

    def rate(self, family: str, norm: str = "L1", pair: int = -1) -> float:
        return self.rates[family][norm][pair]

    def finest_rate(self, family: str, norm: str = "L1") -> float:
        return self.rate(family, norm, -1)

    def coarsest_rate(self, family: str, norm: str = "L1") -> float:
        return self.rate(family, norm, 0)

    def rows(self):
        """One dict per (mesh, family) with errors and the rate from the previous mesh."""
        out = []
        for k, (n, h) in enumerate(zip(self.meshes, self.dx)):
            for fam in self.errors:
                row = {"N": n, "dx": h, "family": fam}
                for norm in self.errors[fam]:
                    row[norm] = self.errors[fam][norm][k]
                    row[f"rate_{norm}"] = self.rates[fam][norm][k - 1] if k > 0 else float("nan")
                out.append(row)
        return out

    def format(self, norm: str = "L1") -> str:
        fams = list(self.errors)
        lines = [f"{'N':>6} " + " ".join(f"{f:>20}" for f in fams)]
        for k, n in enumerate(self.meshes):
            cells = []
            for f in fams:
                e = self.errors[f][norm][k]
                r = self.rates[f][norm][k - 1] if k else float("nan")
                cells.append(f"{e:11.3e} ({r:5.2f})" if k else f"{e:11.3e}        ")
            lines.append(f"{n:>6} " + " ".join(f"{c:>20}" for c in cells))
        return "\n".join(lines)

    def to_csv(self, path, metadata=None):
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            if metadata is not None:
                fh.write("# " + json.dumps(metadata, sort_keys=True, default=str) + "\n")
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items()})


def _as_norm_dict(err):
    if isinstance(err, ErrorReport):
        return err.norms
    return err


def convergence_rates(meshes: Sequence[int], errors: Sequence, dx: Sequence[float] = None,
                      label: str = "") -> ConvergenceTable:
    """Build a :class:`ConvergenceTable` from per-mesh error reports.

    ``errors[k]`` is an :class:`ErrorReport`, a ``{family: {norm: value}}`` dict
    or a plain number (stored as family ``"error"``, norm ``L1``). Consecutive
    meshes must differ by exactly a factor two.
    """
    meshes = [int(n) for n in meshes]
    if len(meshes) < 2 or len(errors) != len(meshes):
        raise RefinementError("need at least two meshes with one error report each")
    dx = [1.0 / n for n in meshes] if dx is None else [float(h) for h in dx]
    for (n0, n1), (h0, h1) in zip(zip(meshes, meshes[1:]), zip(dx, dx[1:])):
        if n1 != 2 * n0 or not math.isclose(h0, 2 * h1, rel_tol=1e-12):
            raise RefinementError(f"non-dyadic refinement {n0} -> {n1}")
    reports = [_as_norm_dict(e) if not np.isscalar(e) else {"error": {"L1": float(e)}} for e in errors]
    table_errors = {}
    rates = {}
    for fam in reports[0]:
        table_errors[fam] = {}
        rates[fam] = {}
        for norm in reports[0][fam]:
            seq = [float(r[fam][norm]) for r in reports]
            table_errors[fam][norm] = seq
            rates[fam][norm] = [math.log2(a / b) if a > 0 and b > 0 else float("nan")
                                for a, b in zip(seq, seq[1:])]
    return ConvergenceTable(meshes, dx, table_errors, rates, label)


def read_error_csv(path) -> Dict[str, ConvergenceTable]:
    """Read an error CSV (as written by :meth:`ConvergenceTable.to_csv`) back into tables.

    Rows are grouped by every column that is neither a norm, a rate, ``N``,
    ``dx`` nor ``family``; one table per group.
    """
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    if not rows:
        raise ValueError(f"{path}: no rows")
    fixed = {"N", "dx", "family"} | set(NORMS) | {f"rate_{n}" for n in NORMS}
    group_cols = [c for c in rows[0] if c not in fixed]
    norms = [n for n in NORMS if n in rows[0]]
    groups: Dict[tuple, Dict[int, dict]] = {}
    for row in rows:
        key = tuple(row[c] for c in group_cols)
        mesh = groups.setdefault(key, {}).setdefault(int(row["N"]), {"dx": float(row["dx"]), "errors": {}})
        mesh["errors"][row["family"]] = {n: float(row[n]) for n in norms}
    tables = {}
    for key, per_mesh in groups.items():
        ns = sorted(per_mesh)
        label = ",".join(f"{c}={v}" for c, v in zip(group_cols, key))
        tables[label] = convergence_rates(ns, [per_mesh[n]["errors"] for n in ns],
                                          dx=[per_mesh[n]["dx"] for n in ns], label=label)
    return tables


def restrict_1d(fine: State1D, grid: GridSpec1D) -> State1D:
    """Restrict a fine-mesh state onto a coarser nested mesh.

    Averages are block means of the fine averages, point values are read at the
    coinciding interfaces (every coarse interface is a fine one).
    """
    k = fine.grid.n_cells // grid.n_cells
    if k * grid.n_cells != fine.grid.n_cells or fine.grid.x_min != grid.x_min or fine.grid.x_max != grid.x_max:
        raise RefinementError("meshes are not nested")
    return State1D(
        grid,
        avg_p=fine.avg_p.reshape(-1, k).mean(axis=1),
        avg_u=fine.avg_u.reshape(-1, k).mean(axis=1),
        pt_p=fine.pt_p[k - 1::k].copy(),
        pt_u=fine.pt_u[k - 1::k].copy(),
    )
