"""Benchmark orchestration: scenario configs, reference solutions, reports.

Two scenarios are built in: a linear heat/advection problem with a known
quadratic value function, and a viscous Burgers problem evaluated through
closed-loop cost functionals.  ``run_table1``/``run_table2`` sweep the
reduction methods over a list of basis orders and produce a
:class:`ComparisonReport`; per-cell failures are recorded rather than
aborting the sweep.
"""

import dataclasses
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import ConfigError
from .hjb import ValueIterationSolver, closed_loop
from .models import (
    Trajectory,
    build_advection_diffusion,
    build_burgers,
    simulate,
)
from .reduction import (
    METHODS,
    AdjointPODReducer,
    BalancedTruncationReducer,
    PODReducer,
    RiccatiReducer,
)

__all__ = [
    "ScenarioConfig",
    "heat_config",
    "burgers_config",
    "load_config",
    "build_system",
    "control_set",
    "initial_state",
    "LqrSolution",
    "run_lqr_reference",
    "closed_loop_lqr",
    "quadrature_cost",
    "ComparisonReport",
    "run_table1",
    "run_table2",
    "emit_report",
    "write_series",
]

_METHOD_ALIASES = {
    "pod": "POD",
    "podadj": "PODadj",
    "pod_adjoint": "PODadj",
    "bt": "BT",
    "ricc": "Ricc",
    "riccati": "Ricc",
}


@dataclass
class ScenarioConfig:
    """Flat bag of benchmark parameters; see :func:`heat_config` for defaults.

    ``nodes_per_axis`` is indexed by basis order (entry i applies to order
    i+1, the last entry to any larger order).
    """

    benchmark: str = "heat"
    n: int = 61
    mu_diff: float = 0.2
    mu_adv: float = 2.0
    nu: float = 0.2
    advection_coeff: float = 5.0
    omega_b: tuple = (-0.5, -0.1)
    omega_c: tuple = (0.1, 0.6)
    output_weight: float = 20.0
    control_weight: float = 0.1
    discount: float = 0.0
    radius: float = 0.2
    orders: tuple = (1, 2, 3, 4)
    methods: tuple = ("POD", "PODadj", "BT", "Ricc")
    control_min: float = -2.0
    control_max: float = 2.0
    control_count: int = 301
    nodes_per_axis: tuple = (641, 161, 41, 15)
    hjb_dt: float = 0.01
    hjb_tol: float = 1e-6
    hjb_max_iter: int = 5000
    dt_sim: float = 1e-4
    horizon: float = 3.0
    snapshot_horizon: float = 2.0 * math.pi
    seed: int = 12345
    n_samples: int = 50
    stencil_memory_mb: float = 3072.0

    def nodes_for(self, order):
        spec = self.nodes_per_axis
        return int(spec[min(order, len(spec)) - 1])

    def validate(self):
        if self.benchmark not in ("heat", "burgers"):
            raise ConfigError(f"unknown benchmark {self.benchmark!r}")
        for name in (
            "mu_diff",
            "nu",
            "output_weight",
            "control_weight",
            "radius",
            "hjb_dt",
            "hjb_tol",
            "dt_sim",
            "horizon",
            "snapshot_horizon",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.discount < 0:
            raise ConfigError("discount must be nonnegative")
        if self.n < 3:
            raise ConfigError("n must be at least 3")
        if self.control_count < 1:
            raise ConfigError("control_count must be at least 1")
        if not self.orders or any(o < 1 for o in self.orders):
            raise ConfigError("orders must be positive")
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        return self


def heat_config(**overrides):
    """Linear advection-diffusion scenario with its published constants."""
    return dataclasses.replace(ScenarioConfig(), **overrides).validate()


def burgers_config(**overrides):
    """Viscous Burgers scenario: discounted cost and wider control range."""
    cfg = ScenarioConfig(
        benchmark="burgers",
        omega_b=(-0.7, -0.5),
        output_weight=100.0,
        discount=1.0,
        control_min=-5.0,
        control_max=5.0,
        control_count=41,
        # 41 controls keep the l=4 grid affordable at a finer resolution
        nodes_per_axis=(641, 161, 41, 21),
        hjb_dt=0.005,
        horizon=5.0,
    )
    return dataclasses.replace(cfg, **overrides).validate()


def _parse_interval(raw):
    parts = [p for p in raw.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ConfigError(f"expected two numbers, got {raw!r}")
    return (float(parts[0]), float(parts[1]))


def _parse_int_tuple(raw):
    parts = [p for p in raw.replace(",", " ").split() if p]
    if not parts:
        raise ConfigError("expected at least one integer")
    return tuple(int(p) for p in parts)


def _parse_methods(raw):
    out = []
    for p in raw.replace(",", " ").split():
        key = p.strip().lower()
        if key not in _METHOD_ALIASES:
            raise ConfigError(f"unknown method {p!r}")
        out.append(_METHOD_ALIASES[key])
    return tuple(out)


_FIELD_PARSERS = {
    "benchmark": str.strip,
    "n": int,
    "mu_diff": float,
    "mu_adv": float,
    "nu": float,
    "advection_coeff": float,
    "omega_b": _parse_interval,
    "omega_c": _parse_interval,
    "output_weight": float,
    "control_weight": float,
    "discount": float,
    "radius": float,
    "orders": _parse_int_tuple,
    "methods": _parse_methods,
    "control_min": float,
    "control_max": float,
    "control_count": int,
    "nodes_per_axis": _parse_int_tuple,
    "hjb_dt": float,
    "hjb_tol": float,
    "hjb_max_iter": int,
    "dt_sim": float,
    "horizon": float,
    "snapshot_horizon": float,
    "seed": int,
    "n_samples": int,
    "stencil_memory_mb": float,
}


def _parse_config_text(text):
    """Key/value pairs from flat ``key = value`` text with [section] scoping."""
    entries = []
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip().lower()
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = stripped.split("=", 1)
        entries.append((section, key.strip().lower(), raw.strip()))
    return entries


def _coerce(key, raw):
    parser = _FIELD_PARSERS.get(key)
    if parser is None:
        raise ConfigError(f"unknown configuration key {key!r}")
    try:
        return parser(raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc


def load_config(path=None, overrides=()):
    """Scenario from an optional config file plus ``key=value`` overrides.

    Resolution order: benchmark defaults, then unsectioned file keys, then
    the file section matching the benchmark, then overrides.  The benchmark
    itself may be set by file or override; it defaults to ``heat``.
    """
    entries = []
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                entries = _parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    parsed_overrides = []
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        parsed_overrides.append((key.strip().lower(), raw.strip()))

    benchmark = "heat"
    for section, key, raw in entries:
        if key == "benchmark" and section is None:
            benchmark = _coerce(key, raw)
    for key, raw in parsed_overrides:
        if key == "benchmark":
            benchmark = _coerce(key, raw)

    if benchmark == "burgers":
        cfg = burgers_config()
    elif benchmark == "heat":
        cfg = heat_config()
    else:
        raise ConfigError(f"unknown benchmark {benchmark!r}")

    updates = {}
    for section, key, raw in entries:
        if section is not None and section != benchmark:
            continue
        updates[key] = _coerce(key, raw)
    for key, raw in parsed_overrides:
        updates[key] = _coerce(key, raw)
    updates["benchmark"] = benchmark
    return dataclasses.replace(cfg, **updates).validate()


def build_system(cfg):
    """Full-order ControlSystem for the configured benchmark."""
    if cfg.benchmark == "heat":
        return build_advection_diffusion(
            cfg.n,
            cfg.mu_diff,
            cfg.mu_adv,
            cfg.omega_b,
            cfg.omega_c,
            output_weight=cfg.output_weight,
            control_weight=cfg.control_weight,
            discount=cfg.discount,
        )
    return build_burgers(
        cfg.n,
        cfg.nu,
        cfg.advection_coeff,
        cfg.omega_b,
        output_weight=cfg.output_weight,
        control_weight=cfg.control_weight,
        discount=cfg.discount,
    )


def control_set(cfg):
    return np.linspace(cfg.control_min, cfg.control_max, cfg.control_count)


def initial_state(cfg, system, name):
    """Named initial states: benchmark figure and table vectors.

    ``fig``: heat uses the indicator of (-0.8, -0.6), Burgers the parabola
    ``radius*(1 - xi^2)``.  Burgers also provides ``x01`` (scaled input
    indicator) and ``x02`` (``radius*(1 - xi)^2``).  ``zero`` is always
    available.
    """
    xi = system.grid
    a = cfg.radius
    if name == "zero":
        return np.zeros(system.dim)
    if cfg.benchmark == "heat":
        if name == "fig":
            return a * ((xi > -0.8) & (xi < -0.6)).astype(float)
    else:
        if name == "fig":
            return a * (1.0 - xi**2)
        if name == "x01":
            return a * system.b[:, 0]
        if name == "x02":
            return a * (1.0 - xi) ** 2
    raise ConfigError(f"unknown initial state {name!r} for {cfg.benchmark}")


@dataclass
class LqrSolution:
    """Riccati solution ``p`` with gain ``k`` so that ``u = -k x``."""

    p: np.ndarray
    gain: np.ndarray

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, self.p, x)

    def control(self, x):
        return -self.gain @ np.asarray(x, dtype=float)


def run_lqr_reference(system):
    """Exact infinite-horizon solution of the (linearized) problem."""
    a_lin = system.linearized_a()
    p = linalg.solve_are(
        a_lin, system.b, system.q_cost, system.r_cost, system.discount
    )
    gain = np.linalg.solve(system.r_cost, system.b.T @ p)
    return LqrSolution(p=p, gain=gain)


def closed_loop_lqr(system, lqr, x0, dt, horizon):
    """Simulate the full (possibly nonlinear) system under ``u = -k y``."""
    closed = dataclasses.replace(system, a=system.a - system.b @ lqr.gain)
    traj = simulate(closed, x0, None, dt, horizon)
    controls = -traj.states @ lqr.gain.T
    return Trajectory(traj.times, traj.states, controls, traj.outputs)


def quadrature_cost(traj, output_weight, control_weight, discount):
    """Trapezoidal approximation of the discounted quadratic cost.

    Integrates ``(output_weight*|z|^2 + control_weight*|u|^2) * exp(-discount*t)``
    over the trajectory's uniform time grid.
    """
    integrand = output_weight * np.sum(traj.outputs**2, axis=1)
    integrand = integrand + control_weight * np.sum(traj.controls**2, axis=1)
    integrand = integrand * np.exp(-discount * traj.times)
    return float(np.trapezoid(integrand, traj.times))


@dataclass
class ComparisonReport:
    """Method-by-order metric matrix, with one table per report section."""

    name: str
    kind: str
    methods: tuple
    orders: tuple
    tables: dict
    failures: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def cell(self, method, order, section=None):
        section = section if section is not None else next(iter(self.tables))
        i = self.methods.index(method)
        j = self.orders.index(order)
        return float(self.tables[section][i, j])


def _fit_reducer(cfg, method, order, system, forward):
    if method == "POD":
        return PODReducer(order, max_snapshots=500).fit(forward)
    if method == "PODadj":
        reducer = AdjointPODReducer(
            order, dt=cfg.dt_sim, horizon=cfg.snapshot_horizon, max_snapshots=500
        )
        return reducer.fit(system, forward=forward)
    if method == "BT":
        return BalancedTruncationReducer(order).fit(system)
    if method == "Ricc":
        return RiccatiReducer(order).fit(system)
    raise ValueError(f"unknown method {method!r}")


def fit_hjb_cell(cfg, method, order, system, forward):
    """Reducer + converged value-iteration solver for one report cell."""
    reducer = _fit_reducer(cfg, method, order, system, forward)
    rsys = reducer.reduce(system, cfg.radius)
    solver = ValueIterationSolver(
        control_set(cfg),
        dt=cfg.hjb_dt,
        tol=cfg.hjb_tol,
        max_iter=cfg.hjb_max_iter,
        nodes_per_axis=cfg.nodes_for(order),
        stencil_memory_mb=cfg.stencil_memory_mb,
    )
    return reducer, solver.fit(rsys)


def snapshot_forward(cfg, system):
    """Forward simulation under ``u(t) = sin t`` used for snapshot bases."""
    return simulate(
        system, np.zeros(system.dim), np.sin, cfg.dt_sim, cfg.snapshot_horizon
    )


def run_table1(cfg):
    """Mean relative value-function error against the exact LQR solution.

    For each (method, order) the reduced HJB solution is evaluated at
    ``n_samples`` seeded uniform draws from the sup-norm ball and compared
    with ``x^T P x``; samples with near-zero exact value are excluded.
    """
    cfg.validate()
    if cfg.benchmark != "heat":
        raise ConfigError("table1 is defined for the heat benchmark")
    system = build_system(cfg)
    lqr = run_lqr_reference(system)
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    samples = rng.uniform(-cfg.radius, cfg.radius, (cfg.n_samples, system.dim))
    exact = lqr.value(samples)
    keep = np.abs(exact) >= 1e-12

    forward = snapshot_forward(cfg, system)
    table = np.full((len(cfg.methods), len(cfg.orders)), np.nan)
    failures = {}
    timings = {}
    for i, method in enumerate(cfg.methods):
        for j, order in enumerate(cfg.orders):
            started = time.perf_counter()
            try:
                _, solver = fit_hjb_cell(cfg, method, order, system, forward)
                approx = solver.value(samples)
                rel = np.abs(approx[keep] - exact[keep]) / np.abs(exact[keep])
                table[i, j] = float(np.mean(rel))
            except Exception as exc:  # per-cell failures are not fatal
                failures[("error", method, order)] = f"{type(exc).__name__}: {exc}"
            timings[(method, order)] = time.perf_counter() - started
    return ComparisonReport(
        name="table1",
        kind="mean relative value error",
        methods=tuple(cfg.methods),
        orders=tuple(cfg.orders),
        tables={"error": table},
        failures=failures,
        metadata={"seed": cfg.seed, "nodes_per_axis": cfg.nodes_per_axis,
                  "timings": timings},
    )


def run_table2(cfg):
    """Closed-loop cost functionals for the Burgers benchmark.

    Sections ``x01`` and ``x02`` hold the costs from the two table initial
    vectors; an ``LQR`` row (feedback from the linearization, constant
    across orders) is appended after the configured methods.
    """
    cfg.validate()
    if cfg.benchmark != "burgers":
        raise ConfigError("table2 is defined for the burgers benchmark")
    system = build_system(cfg)
    lqr = run_lqr_reference(system)
    ics = {
        "x01": initial_state(cfg, system, "x01"),
        "x02": initial_state(cfg, system, "x02"),
    }
    methods = tuple(cfg.methods) + ("LQR",)
    tables = {
        sec: np.full((len(methods), len(cfg.orders)), np.nan) for sec in ics
    }
    failures = {}
    timings = {}

    forward = snapshot_forward(cfg, system)
    for i, method in enumerate(cfg.methods):
        for j, order in enumerate(cfg.orders):
            started = time.perf_counter()
            try:
                _, solver = fit_hjb_cell(cfg, method, order, system, forward)
                for sec, x0 in ics.items():
                    traj = closed_loop(solver, system, x0, cfg.dt_sim, cfg.horizon)
                    tables[sec][i, j] = quadrature_cost(
                        traj, cfg.output_weight, cfg.control_weight, cfg.discount
                    )
            except Exception as exc:
                for sec in ics:
                    failures[(sec, method, order)] = f"{type(exc).__name__}: {exc}"
            timings[(method, order)] = time.perf_counter() - started

    for sec, x0 in ics.items():
        try:
            traj = closed_loop_lqr(system, lqr, x0, cfg.dt_sim, cfg.horizon)
            cost = quadrature_cost(
                traj, cfg.output_weight, cfg.control_weight, cfg.discount
            )
            tables[sec][-1, :] = cost
        except Exception as exc:
            for order in cfg.orders:
                failures[(sec, "LQR", order)] = f"{type(exc).__name__}: {exc}"
    return ComparisonReport(
        name="table2",
        kind="closed-loop cost",
        methods=methods,
        orders=tuple(cfg.orders),
        tables=tables,
        failures=failures,
        metadata={"seed": cfg.seed, "nodes_per_axis": cfg.nodes_per_axis,
                  "timings": timings},
    )


def emit_report(report, out_dir):
    """Write one CSV per report section; returns the written paths.

    A single-section report writes ``<name>.csv``, otherwise
    ``<name>_<section>.csv``.  Cells use 17 significant digits; failed cells
    are ``nan``.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    single = len(report.tables) == 1
    for section, table in report.tables.items():
        fname = f"{report.name}.csv" if single else f"{report.name}_{section}.csv"
        path = os.path.join(out_dir, fname)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("method," + ",".join(f"l{o}" for o in report.orders) + "\n")
            for i, method in enumerate(report.methods):
                cells = ",".join(format(v, ".17g") for v in table[i])
                fh.write(f"{method},{cells}\n")
        paths.append(path)
    return paths


def write_series(path, columns, header=None):
    """Whitespace-separated plot data: one row per sample, 17 digits."""
    columns = [np.asarray(c, dtype=float).reshape(-1) for c in columns]
    length = len(columns[0])
    if any(len(c) != length for c in columns):
        raise ValueError("all series must have equal length")
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write("# " + " ".join(header) + "\n")
        for row in zip(*columns):
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")
