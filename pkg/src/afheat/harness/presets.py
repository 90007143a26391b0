"""Experiment presets: configuration, execution and structured output.

A preset is a dict of defaults plus a runner. :func:`run_preset` resolves the
defaults with user overrides into an :class:`ExperimentConfig`, runs every leg
(one per variant/epsilon/mesh), evaluates the preset's checks and, when an
output directory is given, writes CSV data and a JSON manifest.
"""

import concurrent.futures
import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .. import __version__
from ..core import (
    FAMILIES_1D,
    ModelParams,
    State1D,
    State2D,
    Variant,
    build_grid_1d,
    build_grid_2d,
    dirac_2d,
    error_norms,
    project_initial_1d,
    project_initial_2d,
    square_wave,
    write_contour_grid,
    write_state_csv,
)
from ..dirk import DEFAULT_TABLEAU, TimeStepPolicy, integrate
from ..fourier import NOMINAL_EIGENVALUE_ORDER, error_split_report, write_symbol_csv
from ..limits import (
    LimitState1D,
    heat_reference,
    limit_error_norms,
    limit_operator_1d,
    square_wave_spectrum,
    total_l1,
)
from ..linsolve import append_solver_log
from ..ops1d import assemble_operator_1d
from ..ops2d import assemble_operator_2d
from .convergence import ConvergenceTable, convergence_rates, restrict_1d

TWO_PI = 2.0 * math.pi
CONSERVATION_TOL = 1e-9


class PresetError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# coefficient fields


def quadratic_sigma(x, *_):
    return 1.0 + (10.0 * np.asarray(x)) ** 2


def radiation_boxes(x, y, inside=1e4, outside=1.0):
    """``inside`` on the eight boxes mirrored from the first quadrant pair, else ``outside``."""
    ax, ay = np.abs(np.asarray(x)), np.abs(np.asarray(y))

    def box(a, b):
        return (a >= 3 / 16) & (a <= 7 / 16) & (b >= 9 / 16) & (b <= 13 / 16)

    return np.where(box(ax, ay) | box(ay, ax), inside, outside)


SIGMA_FIELDS: Dict[str, Callable] = {
    "quadratic10": quadratic_sigma,
    "radiation_boxes": radiation_boxes,
}


def resolve_sigma(value):
    if isinstance(value, str):
        try:
            return SIGMA_FIELDS[value]
        except KeyError:
            raise PresetError(f"unknown sigma field {value!r}; known: {sorted(SIGMA_FIELDS)}") from None
    return float(value)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """Fully resolved run plan of one preset.

    ``T`` is either one final time or a list aligned with ``epsilons``.
    ``options`` holds the preset-specific settings (see ``PRESETS``).
    """

    preset: str
    meshes: List[int]
    epsilons: List[float]
    variants: List[str] = field(default_factory=lambda: ["js"])
    sigma: Union[float, str] = 1.0
    T: Union[float, List[float]] = 1.0
    domain: List[float] = field(default_factory=lambda: [0.0, TWO_PI])
    dt_mode: str = "cfl"
    cfl: float = 1.0
    dt_prefactor: float = 0.2
    dt_exponent: float = 4.0 / 3.0
    dt: Optional[float] = None
    solver: str = "direct"
    snapshot_times: List[float] = field(default_factory=list)
    workers: int = 1
    options: Dict[str, Any] = field(default_factory=dict)

    def policy(self) -> TimeStepPolicy:
        return TimeStepPolicy(self.dt_mode, self.cfl, self.dt_prefactor, self.dt_exponent, self.dt)

    def final_time(self, k: int) -> float:
        return float(self.T[k]) if isinstance(self.T, (list, tuple)) else float(self.T)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def parse_override(text: str):
    """``key=value`` with ``value`` read as JSON when possible, else as a string."""
    if "=" not in text:
        raise PresetError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def resolve_config(name: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    if name not in PRESETS:
        raise PresetError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    base = json.loads(json.dumps(PRESETS[name]["defaults"]))
    options = base.pop("options", {})
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key, value in (overrides or {}).items():
        if key.startswith("options."):
            key = key[len("options."):]
            if key not in options:
                raise PresetError(f"preset {name!r} has no option {key!r}")
            options[key] = value
        elif key in fields and key not in ("preset", "options"):
            base[key] = value
        elif key in options:
            options[key] = value
        else:
            raise PresetError(f"unknown config key {key!r} for preset {name!r}")
    for key in ("meshes", "epsilons", "variants"):
        if key in base and not isinstance(base[key], list):
            base[key] = [base[key]]
    cfg = ExperimentConfig(preset=name, options=options, **base)
    if isinstance(cfg.T, list) and len(cfg.T) != len(cfg.epsilons):
        raise PresetError("a list of final times must match the list of epsilons")
    if cfg.solver not in ("direct", "gmres"):
        raise PresetError(f"unknown solver {cfg.solver!r}")
    return cfg


# ---------------------------------------------------------------------------
# results


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    values: Dict[str, Any] = field(default_factory=dict)


@dataclass
class RunBundle:
    config: ExperimentConfig
    tables: Dict[str, ConvergenceTable] = field(default_factory=dict)
    states: Dict[str, Any] = field(default_factory=dict)
    checks: List[CheckResult] = field(default_factory=list)
    metrics: Dict[str, Any] = field(default_factory=dict)
    solver_stats: Dict[str, list] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def add_check(self, name, passed, detail="", **values):
        self.checks.append(CheckResult(name, bool(passed), detail, values))


def _label(variant, eps, n=None):
    out = f"{variant}_eps{eps:g}"
    return out if n is None else f"{out}_N{n}"


def output_metadata(cfg: ExperimentConfig) -> dict:
    return {"config": cfg.to_dict(), "code": {"package": "afheat", "version": __version__},
            "tableau": DEFAULT_TABLEAU.name}


# ---------------------------------------------------------------------------
# shared machinery


@dataclass
class LegResult:
    state: Any
    initial: Any
    drift: float
    n_steps: int
    dt: float
    stats: list
    snapshots: Dict[float, Any] = field(default_factory=dict)


def evolve(state0, params: ModelParams, T: float, policy: TimeStepPolicy, solver: str = "direct",
           snapshot_times=()) -> LegResult:
    """Integrate a full AF state to ``T``; records the relative drift of sum(avg_p)."""
    grid = state0.grid
    if isinstance(state0, State1D):
        L = assemble_operator_1d(params, grid)
        dt = policy.step_size(grid.dx)
        mass = lambda s: float(np.sum(s.avg_p))  # noqa: E731
        cls = State1D
    else:
        L = assemble_operator_2d(params, grid)
        dt = policy.step_size(grid.dx, grid.dy)
        mass = lambda s: float(np.sum(s["avg_p"]))  # noqa: E731
        cls = State2D
    res = integrate(state0.to_vector(), T, dt, L, snapshot_times=snapshot_times, mode=solver)
    state = cls.from_vector(grid, res.w)
    state.check_finite()
    m0 = mass(state0)
    drift = abs(mass(state) - m0) / max(1.0, abs(m0))
    snaps = {t: cls.from_vector(grid, w) for t, w in res.snapshots.items()}
    return LegResult(state, state0, drift, res.n_steps, res.dt, res.solver_stats, snaps)


def _map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _record_leg(bundle: RunBundle, label: str, leg: LegResult):
    bundle.states[label] = leg.state
    bundle.solver_stats[label] = leg.stats
    bundle.metrics.setdefault("conservation", {})[label] = leg.drift
    bundle.metrics.setdefault("steps", {})[label] = {"n_steps": leg.n_steps, "dt": leg.dt}
    for t, s in leg.snapshots.items():
        bundle.states[f"{label}_t{t:g}"] = s


def _conservation_check(bundle: RunBundle):
    drifts = bundle.metrics.get("conservation", {})
    if drifts:
        worst = max(drifts.values())
        bundle.add_check("conservation", worst <= CONSERVATION_TOL,
                         f"max relative drift of sum(avg_p) {worst:.2e}", max_drift=worst)


def _rates_within(table: ConvergenceTable, families, lo=-np.inf, hi=np.inf, pairs=None):
    bad = []
    for fam in families:
        rates = table.rates[fam]["L1"]
        for k in (range(len(rates)) if pairs is None else pairs):
            r = rates[k]
            if not lo <= r <= hi:
                bad.append(f"{fam}[{table.meshes[k]}->{table.meshes[k + 1]}]={r:.2f}")
    return bad


def _rate_check(bundle, name, table, families, lo=-np.inf, hi=np.inf, pairs=None):
    bad = _rates_within(table, families, lo, hi, pairs)
    rates = {f: [round(r, 3) for r in table.rates[f]["L1"]] for f in families}
    detail = "ok" if not bad else "out of range: " + ", ".join(bad)
    bundle.add_check(name, not bad, detail, rates=rates, band=[lo, hi])


# ---------------------------------------------------------------------------
# exact solutions


def exact_1d(epsilon: float, t: float):
    """Decaying mode ``p = e^{rt} sin(x) / r``, ``u = eps e^{rt} cos(x)`` (sigma = 1)."""
    r = -2.0 / (1.0 + math.sqrt(1.0 - 4.0 * epsilon**2))
    g = math.exp(r * t)
    return (lambda x: g * np.sin(x) / r), (lambda x: epsilon * g * np.cos(x))


def exact_2d(epsilon: float, t: float):
    r = -4.0 / (1.0 + math.sqrt(1.0 - 8.0 * epsilon**2))
    g = math.exp(r * t)
    return (lambda x, y: 2.0 * g * np.sin(x) * np.sin(y) / r,
            lambda x, y: epsilon * g * np.cos(x) * np.sin(y),
            lambda x, y: epsilon * g * np.sin(x) * np.cos(y))


# ---------------------------------------------------------------------------
# diagnostics for the qualitative presets


def front_positions(state: State1D, threshold: float = 0.25):
    """Interfaces where ``|avg_p[i+1] - avg_p[i]|`` has a local maximum above ``threshold`` times the largest jump."""
    jump = np.abs(np.roll(state.avg_p, -1) - state.avg_p)
    peaks = (jump >= np.roll(jump, 1)) & (jump > np.roll(jump, -1)) & (jump >= threshold * jump.max())
    return np.sort(state.grid.interfaces[peaks])


def ray_profiles(state: State2D, radii, family: str = "avg_p"):
    """Mean of ``family`` along the four axis rays and the four diagonal rays from the domain center.

    Values are interpolated linearly from the DOF locations of ``family``.
    """
    grid = state.grid
    X, Y = grid.coordinates(family.split("_")[0])
    interp = RegularGridInterpolator((X[:, 0], Y[0, :]), state[family])
    cx, cy = 0.5 * (grid.x_min + grid.x_max), 0.5 * (grid.y_min + grid.y_max)
    r = np.asarray(radii, dtype=float)

    def mean_over(angles):
        return np.mean([interp(np.c_[cx + r * math.cos(a), cy + r * math.sin(a)]) for a in angles], axis=0)

    quarter = [k * math.pi / 2 for k in range(4)]
    return mean_over(quarter), mean_over([a + math.pi / 4 for a in quarter])


def radial_anisotropy(state: State2D, radii, family: str = "avg_p"):
    """Axis-vs-diagonal difference at each radius, relative to the largest ``|family|``.

    Normalising by the peak keeps the measure meaningful where the profile
    crosses zero.
    """
    axes, diags = ray_profiles(state, radii, family)
    peak = np.abs(state[family]).max()
    return {float(r): float(abs(a - b) / peak) for r, a, b in zip(radii, axes, diags)}


def front_radii(state: State2D, r_max: float, family: str = "avg_p", samples: int = 2001):
    """Radius of the maximum of ``family`` along the axis rays and along the diagonal rays."""
    r = np.linspace(0.0, r_max, samples)[1:]
    axes, diags = ray_profiles(state, r, family)
    return float(r[np.argmax(axes)]), float(r[np.argmax(diags)])


def box_depression(state: State2D, sigma_field=radiation_boxes, high: float = 1e4):
    """Per box: mean avg_p inside vs mean avg_p of the non-box cells in the same radius band."""
    grid = state.grid
    X, Y = grid.coordinates("avg")
    R = np.hypot(X, Y)
    inside = sigma_field(X, Y) >= high
    p = state["avg_p"]
    out = []
    for sx in (1, -1):
        for sy in (1, -1):
            for (x0, x1), (y0, y1) in (((3 / 16, 7 / 16), (9 / 16, 13 / 16)), ((9 / 16, 13 / 16), (3 / 16, 7 / 16))):
                xs, ys = sx * X, sy * Y
                cells = inside & (xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1)
                band = (~inside) & (R >= R[cells].min()) & (R <= R[cells].max())
                out.append({"box": [sx * x0, sx * x1, sy * y0, sy * y1],
                            "inside": float(p[cells].mean()), "exterior": float(p[band].mean())})
    return out


# ---------------------------------------------------------------------------
# legs (module level so that worker processes can pickle them)


def _leg_accuracy1d(args):
    variant, eps, n, cfg = args
    grid = build_grid_1d(0.0, TWO_PI, n)
    s0 = project_initial_1d(*exact_1d(eps, 0.0), grid)
    T = float(cfg["T"])
    leg = evolve(s0, ModelParams(eps, 1.0, variant), T, TimeStepPolicy(**cfg["policy"]), cfg["solver"])
    ref = project_initial_1d(*exact_1d(eps, T), grid)
    return leg, error_norms(leg.state, ref)


def _leg_nwp(args):
    variant, eps, n, cfg = args
    grid = build_grid_1d(0.0, TWO_PI, n)
    u0 = float(cfg["u0"])
    p0 = exact_1d(eps, 0.0)[0]
    s0 = project_initial_1d(p0, lambda x: np.full_like(x, u0), grid)
    return evolve(s0, ModelParams(eps, 1.0, variant), float(cfg["T"]), TimeStepPolicy(**cfg["policy"]),
                  cfg["solver"])


def _leg_accuracy2d(args):
    eps, n, cfg = args
    grid = build_grid_2d((0.0, TWO_PI), (0.0, TWO_PI), n)
    s0 = project_initial_2d(*exact_2d(eps, 0.0), grid)
    T = float(cfg["T"])
    leg = evolve(s0, ModelParams(eps, 1.0, "js"), T, TimeStepPolicy(**cfg["policy"]), cfg["solver"])
    ref = project_initial_2d(*exact_2d(eps, T), grid)
    return leg, error_norms(leg.state, ref)


def _leg_cfg(cfg: ExperimentConfig, k: int = 0, **extra):
    policy = dataclasses.asdict(cfg.policy())
    return {"T": cfg.final_time(k), "policy": policy, "solver": cfg.solver, **extra}


# ---------------------------------------------------------------------------
# runners


def _run_accuracy1d(cfg: ExperimentConfig, bundle: RunBundle):
    jobs = [(v, eps, n, _leg_cfg(cfg, k)) for v in cfg.variants for k, eps in enumerate(cfg.epsilons)
            for n in cfg.meshes]
    results = _map(_leg_accuracy1d, jobs, cfg.workers)
    for v in cfg.variants:
        for eps in cfg.epsilons:
            reports = []
            for (jv, je, n, _), (leg, rep) in zip(jobs, results):
                if (jv, je) == (v, eps):
                    _record_leg(bundle, _label(v, eps, n), leg)
                    reports.append(rep)
            bundle.tables[_label(v, eps)] = convergence_rates(
                cfg.meshes, reports, dx=[TWO_PI / n for n in cfg.meshes], label=_label(v, eps))
    t = bundle.tables
    if "js_eps0.5" in t:
        _rate_check(bundle, "js_eps0.5_third_order", t["js_eps0.5"], FAMILIES_1D, lo=2.7, pairs=[-1])
    if "js_eps1e-06" in t:
        _rate_check(bundle, "js_eps1e-06_second_order", t["js_eps1e-06"], ("avg_p", "avg_u", "pt_p"), 1.6, 2.4)
        _rate_check(bundle, "js_eps1e-06_pt_u_fourth_order", t["js_eps1e-06"], ("pt_u",), lo=3.5)
    if "alt_eps1e-06" in t:
        _rate_check(bundle, "alt_eps1e-06_fourth_order", t["alt_eps1e-06"], ("avg_p", "pt_u"), lo=3.5)
        _rate_check(bundle, "alt_eps1e-06_third_order", t["alt_eps1e-06"], ("avg_u", "pt_p"), 2.6, 3.4)
    if "js_eps0.01" in t:
        tab = t["js_eps0.01"]
        fams = ("avg_p", "avg_u", "pt_p")
        bad = _rates_within(tab, fams + ("pt_u",), lo=2.5, pairs=[-1]) + _rates_within(tab, fams, hi=2.5, pairs=[0])
        bundle.add_check("js_eps0.01_crossover", not bad, "ok" if not bad else ", ".join(bad),
                         rates={f: tab.rates[f]["L1"] for f in FAMILIES_1D})
    _conservation_check(bundle)


def _run_accuracy1d_nwp(cfg: ExperimentConfig, bundle: RunBundle):
    factor = int(cfg.options["reference_factor"])
    fine = factor * max(cfg.meshes)
    jobs = []
    for v in cfg.variants:
        for k, eps in enumerate(cfg.epsilons):
            for n in list(cfg.meshes) + [fine]:
                jobs.append((v, eps, n, _leg_cfg(cfg, k, u0=cfg.options["u0"])))
    results = dict(zip([(j[0], j[1], j[2]) for j in jobs], _map(_leg_nwp, jobs, cfg.workers)))
    for v in cfg.variants:
        for eps in cfg.epsilons:
            ref = results[(v, eps, fine)]
            _record_leg(bundle, _label(v, eps, fine), ref)
            reports = []
            for n in cfg.meshes:
                leg = results[(v, eps, n)]
                _record_leg(bundle, _label(v, eps, n), leg)
                reports.append(error_norms(leg.state, restrict_1d(ref.state, leg.state.grid)))
            bundle.tables[_label(v, eps)] = convergence_rates(
                cfg.meshes, reports, dx=[TWO_PI / n for n in cfg.meshes], label=_label(v, eps))
    if "js_eps1e-06" in bundle.tables:
        tab = bundle.tables["js_eps1e-06"]
        _rate_check(bundle, "nwp_avg_u_second_order", tab, ("avg_u",), 1.5, 2.5)
        _rate_check(bundle, "nwp_first_order", tab, ("avg_p", "pt_p", "pt_u"), 0.5, 1.5)
    _conservation_check(bundle)


def _square_wave_state(grid):
    return project_initial_1d(square_wave, lambda x: np.zeros_like(x), grid)


def _run_square_wave(cfg: ExperimentConfig, bundle: RunBundle):
    opts = cfg.options
    x0, x1 = cfg.domain
    sigma = resolve_sigma(cfg.sigma)
    for v in cfg.variants:
        for k, eps in enumerate(cfg.epsilons):
            for n in cfg.meshes:
                grid = build_grid_1d(x0, x1, n)
                leg = evolve(_square_wave_state(grid), ModelParams(eps, sigma, v), cfg.final_time(k),
                             cfg.policy(), cfg.solver, cfg.snapshot_times)
                _record_leg(bundle, _label(v, eps, n), leg)
                if eps >= opts["transport_epsilon"]:
                    T = cfg.final_time(k)
                    fronts = front_positions(leg.state)
                    expected = np.sort(np.concatenate([s * (0.5 + np.array([-1, 1]) * T / eps) for s in (-1, 1)]))
                    ok = len(fronts) == 4 and np.all(np.abs(fronts - expected) <= 2 * grid.dx)
                    bundle.add_check(f"fronts_{_label(v, eps, n)}", ok,
                                     f"fronts at {np.round(fronts, 3).tolist()}, expected {np.round(expected, 3).tolist()}",
                                     fronts=fronts.tolist(), expected=expected.tolist())

    if opts.get("ap_meshes"):
        _square_wave_ap(cfg, bundle, sigma)
    _conservation_check(bundle)


def _square_wave_ap(cfg, bundle, sigma):
    """Distance to the exact heat solution over meshes, and to the limit scheme over epsilon."""
    opts = cfg.options
    x0, x1 = cfg.domain
    policy = TimeStepPolicy("cfl", cfl=opts["ap_cfl"])
    T, eps = opts["ap_T"], opts["ap_epsilon"]
    spectrum = square_wave_spectrum(int(opts["heat_modes"]))
    bundle.metrics["heat_reference_tail_bound"] = spectrum.tail_bound
    for v in opts["ap_variants"]:
        reports = []
        for n in opts["ap_meshes"]:
            grid = build_grid_1d(x0, x1, n)
            leg = evolve(_square_wave_state(grid), ModelParams(eps, sigma, v), T, policy, cfg.solver)
            _record_leg(bundle, f"ap_{_label(v, eps, n)}", leg)
            reports.append(limit_error_norms(leg.state, heat_reference(spectrum, sigma, T, grid)))
        tab = convergence_rates(opts["ap_meshes"], reports, dx=[(x1 - x0) / n for n in opts["ap_meshes"]],
                                label=f"heat_{v}")
        bundle.tables[f"heat_{v}"] = tab
        _rate_check(bundle, f"heat_rate_{v}", tab, ("avg_p", "pt_p"), 1.6, 2.4)

        n = int(opts["limit_mesh"])
        grid = build_grid_1d(x0, x1, n)
        s0 = _square_wave_state(grid)
        lim = integrate(LimitState1D.from_state(s0).to_vector(), T, policy.step_size(grid.dx),
                        limit_operator_1d(sigma, grid, v), mode=cfg.solver)
        limit_state = LimitState1D.from_vector(grid, lim.w)
        bundle.states[f"limit_{v}_N{n}"] = limit_state
        dists = []
        for e in opts["limit_epsilons"]:
            leg = evolve(s0, ModelParams(e, sigma, v), T, policy, cfg.solver)
            dists.append(total_l1(limit_error_norms(leg.state, limit_state)))
        bundle.metrics[f"limit_distance_{v}"] = dict(zip(map(str, opts["limit_epsilons"]), dists))
        ok = all(b < a for a, b in zip(dists, dists[1:]))
        bundle.add_check(f"limit_monotone_{v}", ok, "L1 distances " + ", ".join(f"{d:.4e}" for d in dists),
                         distances=dists, epsilons=list(opts["limit_epsilons"]))


def _run_variable_sigma(cfg: ExperimentConfig, bundle: RunBundle):
    _run_square_wave(cfg, bundle)


def _run_accuracy2d(cfg: ExperimentConfig, bundle: RunBundle):
    jobs = [(eps, n, _leg_cfg(cfg, k)) for k, eps in enumerate(cfg.epsilons) for n in cfg.meshes]
    results = _map(_leg_accuracy2d, jobs, cfg.workers)
    for eps in cfg.epsilons:
        reports = []
        for (je, n, _), (leg, rep) in zip(jobs, results):
            if je == eps:
                _record_leg(bundle, _label("js", eps, n), leg)
                reports.append(rep)
        bundle.tables[_label("js", eps)] = convergence_rates(
            cfg.meshes, reports, dx=[TWO_PI / n for n in cfg.meshes], label=_label("js", eps))
    t = bundle.tables
    if "js_eps0.3" in t:
        _rate_check(bundle, "eps0.3_third_order", t["js_eps0.3"], ("avg_p", "avg_u", "avg_v", "pt_p"), lo=2.7)
        _rate_check(bundle, "eps0.3_point_u_v", t["js_eps0.3"], ("pt_u", "pt_v"), lo=1.7)
    if "js_eps1e-06" in t:
        tab = t["js_eps1e-06"]
        _rate_check(bundle, "eps1e-06_second_order", tab, tab.families, 1.6, 2.4)
    _conservation_check(bundle)


def _run_dirac2d(cfg: ExperimentConfig, bundle: RunBundle):
    x0, x1 = cfg.domain
    sigma = resolve_sigma(cfg.sigma)
    for k, eps in enumerate(cfg.epsilons):
        for n in cfg.meshes:
            grid = build_grid_2d((x0, x1), (x0, x1), n)
            leg = evolve(dirac_2d(grid), ModelParams(eps, sigma, "js"), cfg.final_time(k), cfg.policy(),
                         cfg.solver, cfg.snapshot_times)
            label = _label("js", eps, n)
            _record_leg(bundle, label, leg)
            opts = cfg.options
            aniso = radial_anisotropy(leg.state, opts["radii"])
            r_axis, r_diag = front_radii(leg.state, opts["front_search_radius"])
            front = abs(r_axis - r_diag) / (0.5 * (r_axis + r_diag))
            bundle.metrics[f"anisotropy_{label}"] = {"profile": aniso, "front_radius_axis": r_axis,
                                                     "front_radius_diagonal": r_diag, "front": front}
            worst = max(aniso.values())
            limit = opts["max_anisotropy"]
            bundle.add_check(f"circular_{label}", worst <= limit and front <= limit,
                             f"front radius {r_axis:.4f} (axes) vs {r_diag:.4f} (diagonals), {front:.2%}; "
                             "profile " + ", ".join(f"r={r:g}: {a:.2%}" for r, a in aniso.items()),
                             anisotropy=aniso, front=front)
    _conservation_check(bundle)


def _run_radiation2d(cfg: ExperimentConfig, bundle: RunBundle):
    x0, x1 = cfg.domain
    sigma = resolve_sigma(cfg.sigma)

    def p0(x, y):
        return 1e-3 + 100.0 * np.exp(-(x**2 + y**2) / 0.01)

    def zero(x, y):
        return np.zeros_like(x)

    for k, eps in enumerate(cfg.epsilons):
        for n in cfg.meshes:
            grid = build_grid_2d((x0, x1), (x0, x1), n)
            leg = evolve(project_initial_2d(p0, zero, zero, grid), ModelParams(eps, sigma, "js"),
                         cfg.final_time(k), cfg.policy(), cfg.solver, cfg.snapshot_times)
            label = _label("js", eps, n)
            _record_leg(bundle, label, leg)
            boxes = box_depression(leg.state, sigma if callable(sigma) else radiation_boxes)
            bundle.metrics[f"boxes_{label}"] = boxes
            ok = all(b["inside"] < b["exterior"] for b in boxes)
            ratio = max(b["inside"] / b["exterior"] for b in boxes)
            bundle.add_check(f"boxes_depressed_{label}", ok,
                             f"largest inside/exterior ratio {ratio:.3f} over {len(boxes)} boxes", boxes=boxes)
    _conservation_check(bundle)


def _run_symbol_study(cfg: ExperimentConfig, bundle: RunBundle):
    opts = cfg.options
    reports = {}
    for sweep in opts["sweeps"]:
        v, eps = sweep["variant"], float(sweep["epsilon"])
        if "meshes" in sweep:
            dxs = [TWO_PI / n for n in sweep["meshes"]]
        else:
            dxs = [eps * 2.0**-k for k in sweep["eps_fractions"]]
        rep = error_split_report(v, opts["omega"], eps, opts["sigma"], opts["t"], dxs)
        key = f"{v}_eps{eps:g}_{sweep.get('tag', 'sweep')}"
        reports[key] = rep
        bundle.states[key] = rep
        bundle.metrics[key] = {"orders": rep.orders, "eigenvalue_prefactor": rep.eigenvalue_prefactor}
    om = opts["omega"]
    js = reports.get("js_eps0.5_coarse")
    if js is not None:
        coef = om**4 / (72 * 0.5)
        slope, pf = js.orders["eigenvalue_error"], js.eigenvalue_prefactor
        bundle.add_check("js_eigenvalue_series", abs(slope - 3) <= 0.2 and abs(pf / coef - 1) <= 0.1,
                         f"slope {slope:.3f}, prefactor {pf:.5g} vs {coef:.5g}", slope=slope, prefactor=pf)
    alts = [r for k, r in reports.items() if k.startswith("alt_") and k.endswith("_coarse")]
    if alts:
        slopes = [r.orders["eigenvalue_error"] for r in alts]
        pfs = [r.eigenvalue_prefactor for r in alts]
        ok = all(abs(s - NOMINAL_EIGENVALUE_ORDER[Variant.ALT]) <= 0.2 for s in slopes) and max(pfs) / min(pfs) <= 2
        bundle.add_check("alt_eigenvalue_eps_uniform", ok,
                         f"slopes {np.round(slopes, 3).tolist()}, prefactors {[f'{p:.4g}' for p in pfs]}",
                         slopes=slopes, prefactors=pfs)
    spur = {k: r.orders["spurious_size"] for k, r in reports.items()
            if k in ("js_eps0.5_coarse", "js_eps1e-06_fine")}
    if spur:
        ok = all(abs(s - 3) <= 0.3 for s in spur.values())
        bundle.add_check("js_spurious_third_order", ok,
                         ", ".join(f"{k}: {s:.3f}" for k, s in spur.items()), slopes=spur)


# ---------------------------------------------------------------------------
# registry

_ACC1D_POLICY = {"dt_mode": "accuracy1d", "dt_prefactor": 0.2, "dt_exponent": 4.0 / 3.0}

PRESETS: Dict[str, Dict[str, Any]] = {
    "accuracy1d": {
        "run": _run_accuracy1d,
        "defaults": {"meshes": [20, 40, 80, 160, 320], "epsilons": [0.5, 1e-2, 1e-6],
                     "variants": ["js", "alt"], "T": 1.0, "domain": [0.0, TWO_PI], **_ACC1D_POLICY},
    },
    "accuracy1d_nwp": {
        "run": _run_accuracy1d_nwp,
        "defaults": {"meshes": [20, 40, 80, 160], "epsilons": [1e-6, 1e-2], "variants": ["js"], "T": 1.0,
                     "domain": [0.0, TWO_PI], **_ACC1D_POLICY,
                     "options": {"u0": 0.1, "reference_factor": 8}},
    },
    "square_wave": {
        "run": _run_square_wave,
        "defaults": {"meshes": [40], "epsilons": [0.7, 1e-6], "T": [0.25, 0.04], "domain": [-1.0, 1.0],
                     "cfl": 1.0, "snapshot_times": [],
                     "options": {"transport_epsilon": 0.1, "ap_meshes": [40, 80, 160], "ap_epsilon": 1e-6,
                                 "ap_T": 0.04, "ap_cfl": 0.2, "ap_variants": ["js", "alt"],
                                 "heat_modes": 2048, "limit_mesh": 40,
                                 "limit_epsilons": [1e-2, 1e-4, 1e-6]}},
    },
    "variable_sigma": {
        "run": _run_variable_sigma,
        "defaults": {"meshes": [40], "epsilons": [1.0], "sigma": "quadratic10", "T": 0.25,
                     "domain": [-1.0, 1.0], "cfl": 1.0,
                     "options": {"transport_epsilon": 10.0, "ap_meshes": []}},
    },
    "accuracy2d": {
        "run": _run_accuracy2d,
        "defaults": {"meshes": [16, 32, 64], "epsilons": [0.3, 1e-2, 1e-6], "T": 0.1,
                     "domain": [0.0, TWO_PI], "cfl": 0.2},
    },
    "dirac2d": {
        "run": _run_dirac2d,
        "defaults": {"meshes": [101], "epsilons": [1.0], "sigma": 1.0, "T": 0.5, "domain": [-1.0, 1.0],
                     "cfl": 1.0, "options": {"radii": [0.1, 0.2, 0.3], "front_search_radius": 0.9,
                                 "max_anisotropy": 0.05}},
    },
    "radiation2d": {
        "run": _run_radiation2d,
        "defaults": {"meshes": [200], "epsilons": [1.0], "sigma": "radiation_boxes", "T": 0.75,
                     "domain": [-1.0, 1.0], "cfl": 1.0},
    },
    "symbol_study": {
        "run": _run_symbol_study,
        "defaults": {"meshes": [], "epsilons": [], "variants": ["js", "alt"],
                     "options": {"omega": 1.0, "sigma": 1.0, "t": 1.0, "sweeps": [
                         {"variant": "js", "epsilon": 0.5, "meshes": [16, 32, 64, 128, 256], "tag": "coarse"},
                         {"variant": "js", "epsilon": 0.3, "meshes": [32, 64, 128, 256, 512], "tag": "coarse"},
                         {"variant": "js", "epsilon": 1e-6, "eps_fractions": [2, 3, 4, 5, 6], "tag": "fine"},
                         {"variant": "alt", "epsilon": 1e-2, "meshes": [16, 32, 64, 128, 256], "tag": "coarse"},
                         {"variant": "alt", "epsilon": 1e-4, "meshes": [16, 32, 64, 128, 256], "tag": "coarse"},
                         {"variant": "alt", "epsilon": 1e-6, "meshes": [16, 32, 64, 128, 256], "tag": "coarse"},
                     ]}},
    },
}


def run_preset(name: str, overrides: Optional[Dict[str, Any]] = None,
               out_dir: Optional[str] = None) -> RunBundle:
    """Run a preset; with ``out_dir`` every table, state and the manifest are written there."""
    cfg = resolve_config(name, overrides)
    bundle = RunBundle(cfg)
    try:
        PRESETS[name]["run"](cfg, bundle)
    except PresetError:
        raise
    except Exception as exc:
        raise PresetError(f"preset {name!r} failed: {type(exc).__name__}: {exc}") from exc
    if out_dir is not None:
        write_bundle(bundle, out_dir)
    return bundle


# ---------------------------------------------------------------------------
# output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def write_bundle(bundle: RunBundle, out_dir: str):
    """Write errors, rates, states, solver log and ``manifest.json`` (deterministic content)."""
    os.makedirs(out_dir, exist_ok=True)
    meta = output_metadata(bundle.config)
    files = []

    if bundle.tables:
        path = os.path.join(out_dir, "errors.csv")
        _write_errors(bundle.tables, path, meta)
        files.append("errors.csv")

    for label, state in bundle.states.items():
        if isinstance(state, (State1D, LimitState1D)):
            name = f"state_{label}.csv"
            if isinstance(state, State1D):
                write_state_csv(state, os.path.join(out_dir, name), meta)
            else:
                _write_limit_state(state, os.path.join(out_dir, name), meta)
            files.append(name)
        elif isinstance(state, State2D):
            name = f"state_{label}.csv"
            write_state_csv(state, os.path.join(out_dir, name), meta)
            files.append(name)
            for fam in ("avg_p", "avg_u", "avg_v"):
                cname = f"contour_{label}_{fam}.txt"
                write_contour_grid(state, fam, os.path.join(out_dir, cname), _jsonable(meta))
                files.append(cname)
        elif hasattr(state, "rows"):
            name = f"symbol_{label}.csv"
            write_symbol_csv(state, os.path.join(out_dir, name), _jsonable(meta))
            files.append(name)

    if bundle.solver_stats:
        log = os.path.join(out_dir, "solver_log.csv")
        if os.path.exists(log):
            os.remove(log)
        for label, stats in bundle.solver_stats.items():
            append_solver_log(stats, log, _jsonable(meta) if not os.path.exists(log) else None, leg=label)
        files.append("solver_log.csv")

    bundle.files = files + ["manifest.json"]
    manifest = {
        **meta,
        "preset": bundle.config.preset,
        "passed": bundle.passed,
        "checks": [dataclasses.asdict(c) for c in bundle.checks],
        "metrics": bundle.metrics,
        "rates": {k: t.rates for k, t in bundle.tables.items()},
        "files": bundle.files,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _write_errors(tables: Dict[str, ConvergenceTable], path, meta):
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(_jsonable(meta), sort_keys=True, default=str) + "\n")
        writer = None
        for label, table in tables.items():
            for row in table.rows():
                row = {"case": label, **row}
                if writer is None:
                    writer = csv.DictWriter(fh, fieldnames=list(row))
                    writer.writeheader()
                writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items()})


def _write_limit_state(state: LimitState1D, path, meta):
    grid = state.grid
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(_jsonable(meta), sort_keys=True, default=str) + "\n")
        fh.write("family,index,x,value\n")
        for name, values in state.families().items():
            xs = grid.centers if name.startswith("avg") else grid.interfaces
            for i, (x, v) in enumerate(zip(xs, values)):
                fh.write(f"{name},{i},{x:.17g},{v:.17g}\n")
