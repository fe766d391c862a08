"""Study configuration: JSON loading, validation and unit conversion.

Plant matrices are taken as given (their channel units are declared for
labelling only). Bounds, commands and initial states carry a unit per
channel and are converted to radians exactly once, here.
"""

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import units
from .controller import ControllerMode
from .design import PolynomialSpec, build_sensitivities, lqr_pi_design
from .errors import ConfigError, FcsError
from .margins import default_grid
from .model import ConstraintBox, Plant, build_extended
from .simulate import CommandSchedule, SimConfig

BUNDLED = "aircraft_lateral.json"


def bundled_config_path(name=BUNDLED):
    return Path(str(resources.files("fcs") / "data" / name))


@dataclass(frozen=True, eq=False)
class StudyConfig:
    name: str
    plant: Plant
    box: ConstraintBox
    Q: np.ndarray
    R: np.ndarray
    poly: PolynomialSpec
    schedule: CommandSchedule
    sim: SimConfig
    grid: np.ndarray = field(repr=False)
    output_dir: str = "fcs_out"
    source: str = ""

    def with_dt(self, dt):
        sim = SimConfig(mode=self.sim.mode, dt=dt, T=self.sim.T, x0=self.sim.x0,
                        violation_tolerance=self.sim.violation_tolerance)
        return StudyConfig(self.name, self.plant, self.box, self.Q, self.R, self.poly,
                           self.schedule, sim, self.grid, self.output_dir, self.source)


@dataclass(frozen=True, eq=False)
class Study:
    """Synthesized artifacts of a configuration."""

    config: StudyConfig
    gains: object
    ext: object
    design: object


def json_safe(obj):
    """Recursively replace non-finite floats by ``"inf"``/``"-inf"``/``"nan"`` strings."""
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return json_safe(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(json_safe(obj), fh, indent=2, allow_nan=False)
        fh.write("\n")


def _get(d, key, path, default=...):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return default
    return d[key]


def _number(value, path):
    if isinstance(value, str) and value in ("inf", "-inf"):
        return float(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _vector(value, path, size=None):
    if not isinstance(value, list):
        raise ConfigError(path, "expected a list of numbers")
    out = np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(value)])
    if size is not None and out.size != size:
        raise ConfigError(path, f"expected {size} entries, got {out.size}")
    return out


def _matrix(value, path):
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a non-empty list of rows")
    rows = [_vector(r, f"{path}[{i}]") for i, r in enumerate(value)]
    if len({r.size for r in rows}) != 1:
        raise ConfigError(path, "rows have unequal lengths")
    return np.vstack(rows)


def _channels(value, path, size):
    if not isinstance(value, list) or len(value) != size:
        raise ConfigError(path, f"expected {size} channel descriptors")
    labels, unit_list = [], []
    for i, ch in enumerate(value):
        labels.append(str(_get(ch, "label", f"{path}[{i}]")))
        unit_list.append(str(_get(ch, "unit", f"{path}[{i}]", "-")))
    return tuple(labels), tuple(unit_list)


def _converted(values, unit_list, path):
    """Scale values to internal units; ``unit_list`` may be a single string."""
    if isinstance(unit_list, str):
        unit_list = [unit_list] * values.size
    if len(unit_list) != values.size:
        raise ConfigError(path, f"expected {values.size} units")
    for u in unit_list:
        if not units.is_known(u):
            raise ConfigError(path, f"unknown unit {u!r}")
    factors = np.array([units.to_internal(u)[1] for u in unit_list])
    return values * factors


def _plant(d, path):
    A = _matrix(_get(d, "A_p", path), f"{path}.A_p")
    B = _matrix(_get(d, "B_p", path), f"{path}.B_p")
    n_p, m = A.shape[0], B.shape[1]
    kwargs = {}
    for kind, key, size in (("state", "states", n_p), ("input", "inputs", m),
                            ("reg", "regulated", m), ("lim", "limited", m)):
        if key in d:
            labels, unit_list = _channels(d[key], f"{path}.{key}", size)
            kwargs[f"{kind}_labels"] = labels
            kwargs[f"{kind}_units"] = unit_list
    try:
        return Plant(
            A, B,
            _matrix(_get(d, "C_p_reg", path), f"{path}.C_p_reg"),
            _matrix(_get(d, "D_p_reg", path), f"{path}.D_p_reg"),
            _matrix(_get(d, "C_p_lim", path), f"{path}.C_p_lim"),
            **kwargs,
        )
    except FcsError as exc:
        raise ConfigError(path, str(exc)) from exc


def _box(d, path, m):
    parts = {}
    for key in ("inputs", "limited"):
        sub = _get(d, key, path)
        p = f"{path}.{key}"
        unit_list = _get(sub, "unit", p, "rad")
        lo = _converted(_vector(_get(sub, "min", p), f"{p}.min", m), unit_list, f"{p}.unit")
        hi = _converted(_vector(_get(sub, "max", p), f"{p}.max", m), unit_list, f"{p}.unit")
        parts[key] = (lo, hi)
    try:
        return ConstraintBox(parts["inputs"][0], parts["inputs"][1],
                             parts["limited"][0], parts["limited"][1])
    except FcsError as exc:
        raise ConfigError(path, str(exc)) from exc


def _weights(d, path, n, m):
    Q = _get(d, "Q", path)
    R = _get(d, "R", path)
    Q = _matrix(Q, f"{path}.Q") if Q and isinstance(Q[0], list) else _vector(Q, f"{path}.Q", n)
    R = _matrix(R, f"{path}.R") if R and isinstance(R[0], list) else _vector(R, f"{path}.R", m)
    Q = np.diag(Q) if Q.ndim == 1 else Q
    R = np.diag(R) if R.ndim == 1 else R
    if Q.shape != (n, n):
        raise ConfigError(f"{path}.Q", f"expected {n}x{n}")
    if R.shape != (m, m):
        raise ConfigError(f"{path}.R", f"expected {m}x{m}")
    if not np.allclose(Q, Q.T) or np.linalg.eigvalsh(Q).min() < -1e-12:
        raise ConfigError(f"{path}.Q", "must be symmetric positive semidefinite")
    if not np.allclose(R, R.T) or np.linalg.eigvalsh(R).min() <= 0:
        raise ConfigError(f"{path}.R", "must be symmetric positive definite")
    return Q, R


def _poly(d, path, m):
    try:
        if "roots" in d:
            roots = _get(d, "roots", path)
            if not isinstance(roots, list) or len(roots) != 2 * m:
                raise ConfigError(f"{path}.roots", f"expected {2 * m} root lists")
            return PolynomialSpec(tuple(tuple(_vector(r, f"{path}.roots[{i}]")) for i, r in enumerate(roots)))
        alpha = _vector(_get(d, "alpha", path), f"{path}.alpha", 2 * m)
        if np.any(alpha <= 0):
            raise ConfigError(f"{path}.alpha", "slopes must be positive")
        return PolynomialSpec.from_alpha(alpha)
    except ConfigError:
        raise
    except FcsError as exc:
        raise ConfigError(path, str(exc)) from exc


def _schedule(d, path, m):
    times = _vector(_get(d, "times", path), f"{path}.times")
    cmds = _get(d, "commands", path)
    if not isinstance(cmds, list) or len(cmds) != times.size:
        raise ConfigError(f"{path}.commands", "need one command vector per time")
    unit_list = _get(d, "unit", path, "rad")
    commands = [
        tuple(_converted(_vector(c, f"{path}.commands[{i}]", m), unit_list, f"{path}.unit"))
        for i, c in enumerate(cmds)
    ]
    horizon = _number(_get(d, "horizon", path), f"{path}.horizon")
    try:
        return CommandSchedule(tuple(times), tuple(commands), horizon)
    except FcsError as exc:
        raise ConfigError(path, str(exc)) from exc


def _sim(d, path, n):
    dt = _number(_get(d, "dt", path, 1e-3), f"{path}.dt")
    T = _get(d, "T", path, None)
    T = None if T is None else _number(T, f"{path}.T")
    tol = _number(_get(d, "violation_tolerance", path, 0.01), f"{path}.violation_tolerance")
    x0 = _get(d, "x0", path, None)
    if x0 is not None:
        x0 = _vector(x0, f"{path}.x0", n)
        # order is [e_yI; x_p]; values are in the plant's declared units unless x0_unit says otherwise
        x0 = tuple(_converted(x0, _get(d, "x0_unit", path, "rad"), f"{path}.x0_unit"))
    mode = _get(d, "mode", path, ControllerMode.AUGMENTED.value)
    try:
        return SimConfig(mode=ControllerMode(mode), dt=dt, T=T, x0=x0, violation_tolerance=tol)
    except ValueError as exc:
        raise ConfigError(f"{path}.mode", str(exc)) from exc
    except FcsError as exc:
        raise ConfigError(path, str(exc)) from exc


def _grid(d, path):
    g = _get(d, "grid", path, {})
    lo = _number(_get(g, "min", f"{path}.grid", 1e-3), f"{path}.grid.min")
    hi = _number(_get(g, "max", f"{path}.grid", 1e4), f"{path}.grid.max")
    pts = _get(g, "points", f"{path}.grid", 4000)
    if not isinstance(pts, int) or pts < 2:
        raise ConfigError(f"{path}.grid.points", "expected an integer >= 2")
    if not 0 < lo < hi:
        raise ConfigError(f"{path}.grid", "need 0 < min < max")
    if (lo, hi, pts) == (1e-3, 1e4, 4000):
        return default_grid()
    return np.logspace(np.log10(lo), np.log10(hi), pts)


def parse_config(data, source=""):
    """Validate a decoded JSON document into a :class:`StudyConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("$", "top level must be an object")
    plant = _plant(_get(data, "plant", "$"), "$.plant")
    m, n = plant.m, plant.n_p + plant.m
    box = _box(_get(data, "constraints", "$"), "$.constraints", m)
    Q, R = _weights(_get(data, "lqr", "$"), "$.lqr", n, m)
    poly = _poly(_get(data, "augmentation", "$"), "$.augmentation", m)
    schedule = _schedule(_get(data, "schedule", "$"), "$.schedule", m)
    sim = _sim(_get(data, "simulation", "$", {}), "$.simulation", n)
    grid = _grid(_get(data, "margins", "$", {}), "$.margins")
    return StudyConfig(
        name=str(data.get("name", "study")), plant=plant, box=box, Q=Q, R=R, poly=poly,
        schedule=schedule, sim=sim, grid=grid,
        output_dir=str(data.get("output_dir", "fcs_out")), source=str(source),
    )


def load_config(path=None):
    """Load and validate a study configuration (the bundled asset by default)."""
    path = bundled_config_path() if path is None else Path(path)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(str(path), "file not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    return parse_config(data, source=path)


def build_study(cfg):
    """Run the offline synthesis for a configuration."""
    gains = lqr_pi_design(cfg.plant, cfg.Q, cfg.R)
    ext = build_extended(cfg.plant, gains, cfg.box)
    design = build_sensitivities(ext, gains, cfg.poly)
    return Study(cfg, gains, ext, design)
