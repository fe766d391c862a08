"""Fixed-step closed-loop simulation of the extended servo system."""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import units
from .controller import ControllerMode, ControlLaw
from .errors import ModelError, SimulationDiverged

GRID_RTOL = 1e-9


@dataclass(frozen=True)
class CommandSchedule:
    """Piecewise-constant command: ``y_cmd = commands[i]`` from ``times[i]`` on."""

    times: tuple
    commands: tuple
    horizon: float

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        commands = tuple(tuple(float(c) for c in np.atleast_1d(cmd)) for cmd in self.commands)
        if not times or times[0] != 0.0:
            raise ModelError("schedule must start at t = 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ModelError("schedule times must be strictly increasing")
        if len(commands) != len(times):
            raise ModelError("one command vector per schedule time is required")
        if len({len(c) for c in commands}) != 1:
            raise ModelError("command vectors must have equal length")
        if self.horizon <= 0:
            raise ModelError("horizon must be positive")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "commands", commands)
        object.__setattr__(self, "horizon", float(self.horizon))

    @classmethod
    def constant(cls, y_cmd, horizon):
        return cls((0.0,), (tuple(y_cmd),), horizon)

    def at(self, t):
        i = np.searchsorted(self.times, t + 1e-12, side="right") - 1
        return np.array(self.commands[max(i, 0)])


@dataclass(frozen=True)
class SimConfig:
    mode: ControllerMode = ControllerMode.AUGMENTED
    dt: float = 1e-3
    T: float | None = None
    x0: tuple | None = None
    violation_tolerance: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "mode", ControllerMode(self.mode))
        if not self.dt > 0:
            raise ModelError("dt must be positive")
        if self.T is not None and self.T < self.dt:
            raise ModelError("T must be at least dt")


@dataclass(eq=False)
class SimTrace:
    """Uniformly sampled closed-loop signals (internal units)."""

    t: np.ndarray
    x_p: np.ndarray
    e_yI: np.ndarray
    u_bl: np.ndarray
    v: np.ndarray
    w: np.ndarray
    u_total: np.ndarray
    y_reg: np.ndarray
    z_lim: np.ndarray
    delta: np.ndarray
    y_cmd: np.ndarray
    mode: ControllerMode = ControllerMode.BASELINE
    plant: object = field(default=None, repr=False)

    def __len__(self):
        return self.t.size

    @property
    def x(self):
        return np.hstack([self.e_yI, self.x_p])


@dataclass
class ViolationReport:
    """Over-limit excursions per constraint channel plus integrator windup.

    The constraint channels are the limited outputs of the extended system,
    ``[u_bl; z_lim]``: inputs first, then plant outputs. The applied command
    ``u_total = u_bl + w`` is scanned separately in ``applied_excursion``
    because output-constraint augmentation may push it past the input box
    while ``u_bl`` stays inside.
    """

    labels: list
    excursion: np.ndarray
    relative: np.ndarray
    first_violation: list
    applied_excursion: np.ndarray
    windup: np.ndarray
    tolerance: float

    def satisfied(self, tolerance=None):
        tol = self.tolerance if tolerance is None else tolerance
        return bool(np.all(self.relative <= tol))


def rk4_step(f, x, dt, k1=None):
    """Classical fourth-order Runge-Kutta step of ``dx/dt = f(x)``."""
    if k1 is None:
        k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate_ode(f, x0, dt, T):
    """Integrate an autonomous ODE on a uniform grid; returns ``(t, X)``."""
    n_steps = _grid_steps(T, dt)
    X = np.empty((n_steps + 1, np.size(x0)))
    X[0] = x0
    x = np.asarray(x0, dtype=float)
    for k in range(n_steps):
        x = rk4_step(f, x, dt)
        if not np.all(np.isfinite(x)):
            raise SimulationDiverged((k + 1) * dt)
        X[k + 1] = x
    return np.arange(n_steps + 1) * dt, X


def _grid_steps(T, dt):
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > GRID_RTOL * max(T, 1.0):
        raise ModelError(f"horizon {T} is not a multiple of dt {dt}")
    return n


def _check_gains(ext, gains):
    if gains is not None and gains is not ext.gains:
        if not np.array_equal(gains.K_x, ext.gains.K_x):
            raise ModelError("gains differ from those the extended system was built with")


def step(ext, design, gains, mode, x, y_cmd, dt):
    """Advance the closed loop by one RK4 step with the command held fixed."""
    _check_gains(ext, gains)
    law = ControlLaw(mode, ext, design)
    y_cmd = np.asarray(y_cmd, dtype=float)
    A, B = ext.A, ext.B
    x_next = rk4_step(lambda z: A @ z + B @ law(z, y_cmd), np.asarray(x, dtype=float), dt)
    if not np.all(np.isfinite(x_next)):
        raise SimulationDiverged(dt)
    return x_next


def run(ext, design, gains, mode, schedule, cfg=None):
    """Simulate one controller mode over a command schedule.

    The controller is re-evaluated at every RK4 stage; command switches fall
    exactly on grid points.
    """
    _check_gains(ext, gains)
    cfg = SimConfig(mode=mode) if cfg is None else cfg
    mode = ControllerMode(mode)
    dt = cfg.dt
    T = schedule.horizon if cfg.T is None else cfg.T
    n_steps = _grid_steps(T, dt)
    for ts in schedule.times[1:]:
        _grid_steps(ts, dt)
    plant = ext.plant
    m, n = ext.m, ext.n
    if len(schedule.commands[0]) != m:
        raise ModelError(f"commands have {len(schedule.commands[0])} entries, expected {m}")

    law = ControlLaw(mode, ext, design)
    A, B = ext.A, ext.B
    x = np.zeros(n) if cfg.x0 is None else np.array(cfg.x0, dtype=float)
    if x.shape != (n,):
        raise ModelError(f"x0 must have {n} entries")

    N = n_steps + 1
    rec = {k: np.empty((N, m)) for k in ("u_bl", "v", "w", "u_total", "y_cmd")}
    X = np.empty((N, n))
    delta = np.empty((N, 2 * m), dtype=np.int8)
    for k in range(N):
        t = k * dt
        y_cmd = schedule.at(t)
        d = law.decide(x, y_cmd)
        X[k] = x
        rec["u_bl"][k] = d.u_bl
        rec["v"][k] = d.v
        rec["w"][k] = d.w
        rec["u_total"][k] = d.u_total
        rec["y_cmd"][k] = y_cmd
        delta[k] = d.delta
        if k == n_steps:
            break
        k1 = A @ x + B @ np.concatenate([d.v - y_cmd, d.u_total])
        x = rk4_step(lambda z: A @ z + B @ law(z, y_cmd), x, dt, k1=k1)
        if not np.all(np.isfinite(x)):
            raise SimulationDiverged(t + dt)

    e_yI, x_p = X[:, :m], X[:, m:]
    y_reg = x_p @ plant.C_p_reg.T + rec["u_total"] @ plant.D_p_reg.T
    z_lim = x_p @ plant.C_p_lim.T
    return SimTrace(
        t=np.arange(N) * dt, x_p=x_p, e_yI=e_yI, u_bl=rec["u_bl"], v=rec["v"], w=rec["w"],
        u_total=rec["u_total"], y_reg=y_reg, z_lim=z_lim, delta=delta, y_cmd=rec["y_cmd"],
        mode=mode, plant=plant,
    )


def _over(values, lo, hi):
    return np.maximum(np.maximum(values - hi, lo - values), 0.0)


def analyze(trace, box, tolerance=0.01):
    """Excursions of ``[u_bl; z_lim]`` and of ``u_total`` beyond the box, and windup."""
    values = np.hstack([trace.u_bl, trace.z_lim])
    lo, hi = box.y_min, box.y_max
    over = _over(values, lo, hi)
    excursion = over.max(axis=0)
    span = hi - lo
    finite = np.isfinite(span)
    relative = np.where(finite, excursion / np.where(finite, span, 1.0), 0.0)
    first = []
    for j in range(values.shape[1]):
        idx = np.flatnonzero(over[:, j] > tolerance * span[j])
        first.append(float(trace.t[idx[0]]) if idx.size else None)
    plant = trace.plant
    labels = list(plant.input_labels + plant.lim_labels) if plant is not None else [
        f"y{j}" for j in range(values.shape[1])
    ]
    applied = _over(trace.u_total, box.u_min, box.u_max).max(axis=0)
    return ViolationReport(
        labels=labels, excursion=excursion, relative=relative, first_violation=first,
        applied_excursion=applied, windup=np.abs(trace.e_yI).max(axis=0), tolerance=tolerance,
    )


def trace_columns(trace):
    """``(header, columns)`` in display units (degrees for angles)."""
    p = trace.plant
    cols = [("t(s)", trace.t)]

    def add(prefix, data, labels, unit_list):
        for j, (lab, unit) in enumerate(zip(labels, unit_list)):
            disp, factor = units.to_display(unit)
            cols.append((f"{prefix}[{lab}]({disp})", data[:, j] * factor))

    add("x_p", trace.x_p, p.state_labels, p.state_units)
    add("e_yI", trace.e_yI, p.reg_labels, [units.integrated(u) for u in p.reg_units])
    add("u_bl", trace.u_bl, p.input_labels, p.input_units)
    add("v", trace.v, p.reg_labels, p.reg_units)
    add("w", trace.w, p.input_labels, p.input_units)
    add("u_total", trace.u_total, p.input_labels, p.input_units)
    add("y_reg", trace.y_reg, p.reg_labels, p.reg_units)
    add("z_lim", trace.z_lim, p.lim_labels, p.lim_units)
    add("y_cmd", trace.y_cmd, p.reg_labels, p.reg_units)
    for j, lab in enumerate(p.input_labels + p.lim_labels):
        cols.append((f"delta[{lab}]", trace.delta[:, j].astype(float)))
    return [c[0] for c in cols], np.column_stack([c[1] for c in cols])


def write_csv(path, header, data):
    """Comma-separated, one header row, 9 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in data:
            writer.writerow([f"{v:.9g}" for v in row])


def write_trace_csv(trace, path):
    header, data = trace_columns(trace)
    write_csv(path, header, data)
