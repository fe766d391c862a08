"""``fcs`` command-line front-end.

    fcs <design|simulate|margins|tradestudy> -c <config.json> [-o PATH]
        [--mode M] [--delta BITS] [--dt S]

Without ``-c`` the bundled aircraft study is used. Failures print a JSON
error object on stderr and exit non-zero. ``FCS_THREADS`` caps the number
of concurrent workers used by ``tradestudy``.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import margins, simulate, units
from .config import build_study, dump_json, load_config
from .controller import ControllerMode
from .design import design_record
from .errors import ConfigError, FcsError

TRADE_MODES = (ControllerMode.BASELINE, ControllerMode.HARD_SATURATION, ControllerMode.AUGMENTED)
FIGURES = {
    ControllerMode.BASELINE: "fig_baseline",
    ControllerMode.HARD_SATURATION: "fig_saturation",
    ControllerMode.AUGMENTED: "fig_augmented",
}


def thread_count():
    raw = os.environ.get("FCS_THREADS", "")
    try:
        return max(1, int(raw)) if raw else min(4, os.cpu_count() or 1)
    except ValueError:
        raise ConfigError("FCS_THREADS", f"expected a positive integer, got {raw!r}") from None


def _study(args):
    cfg = load_config(args.config)
    if args.dt is not None:
        cfg = cfg.with_dt(args.dt)
    return build_study(cfg)


def _out(args, default):
    path = Path(args.output) if args.output else Path(default)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    return path


def cmd_design(args):
    study = _study(args)
    record = design_record(study.ext, study.design)
    record["config"] = study.config.name
    path = _out(args, "design.json")
    dump_json(record, path)
    return [path]


def _run(study, mode):
    cfg = study.config
    sim_cfg = simulate.SimConfig(mode=mode, dt=cfg.sim.dt, T=cfg.sim.T, x0=cfg.sim.x0,
                                 violation_tolerance=cfg.sim.violation_tolerance)
    return simulate.run(study.ext, study.design, study.gains, mode, cfg.schedule, sim_cfg)


def cmd_simulate(args):
    study = _study(args)
    mode = ControllerMode(args.mode) if args.mode else study.config.sim.mode
    trace = _run(study, mode)
    path = _out(args, f"trace_{mode.value}.csv")
    simulate.write_trace_csv(trace, path)
    return [path]


def cmd_margins(args):
    study = _study(args)
    grid = study.config.grid
    if args.delta:
        pattern = margins.DeltaPattern.parse(args.delta, study.ext.m)
        model = margins.build_loop_model(study.ext, study.gains, study.design, pattern)
        result = margins.mimo_margins(model, grid).as_dict()
    else:
        result = [r.as_dict() for r in margins.table2_report(study.ext, study.gains, study.design, grid)]
    path = _out(args, "margins.json")
    dump_json(result, path)
    return [path]


def violation_summary(report, plant):
    """Violation report in display units (degrees for angles)."""
    chans = []
    unit_list = plant.input_units + plant.lim_units
    for lab, unit, e, r, fv in zip(report.labels, unit_list, report.excursion, report.relative,
                                   report.first_violation):
        disp, f = units.to_display(unit)
        chans.append({"label": lab, "unit": disp, "excursion": float(e) * f,
                      "relative": float(r), "first_violation": fv})
    applied = []
    for lab, unit, e in zip(plant.input_labels, plant.input_units, report.applied_excursion):
        disp, f = units.to_display(unit)
        applied.append({"label": lab, "unit": disp, "excursion": float(e) * f})
    windup = []
    for lab, unit, w in zip(plant.reg_labels, plant.reg_units, report.windup):
        disp, f = units.to_display(units.integrated(unit))
        windup.append({"label": lab, "unit": disp, "max_abs_e_yI": float(w) * f})
    return {"channels": chans, "applied_input": applied, "windup": windup, "tolerance": report.tolerance,
            "satisfied": report.satisfied()}


def _panels(trace, box):
    """Two plot panels per run: limited signals with bounds, and states/integrators."""
    p = trace.plant
    lim_cols = [("t(s)", trace.t)]
    sig = [(lab, unit, trace.u_total[:, j]) for j, (lab, unit) in enumerate(zip(p.input_labels, p.input_units))]
    sig += [(lab, unit, trace.z_lim[:, j]) for j, (lab, unit) in enumerate(zip(p.lim_labels, p.lim_units))]
    for (lab, unit, y), lo, hi in zip(sig, box.y_min, box.y_max):
        disp, f = units.to_display(unit)
        lim_cols.append((f"{lab}({disp})", y * f))
        lim_cols.append((f"{lab}_min({disp})", np.full_like(y, lo * f)))
        lim_cols.append((f"{lab}_max({disp})", np.full_like(y, hi * f)))
    st_cols = [("t(s)", trace.t)]
    for j, (lab, unit) in enumerate(zip(p.state_labels, p.state_units)):
        disp, f = units.to_display(unit)
        st_cols.append((f"{lab}({disp})", trace.x_p[:, j] * f))
    for j, (lab, unit) in enumerate(zip(p.reg_labels, p.reg_units)):
        disp, f = units.to_display(unit)
        st_cols.append((f"{lab}({disp})", trace.y_reg[:, j] * f))
        st_cols.append((f"{lab}_cmd({disp})", trace.y_cmd[:, j] * f))
        disp_i, f_i = units.to_display(units.integrated(unit))
        st_cols.append((f"e_yI[{lab}]({disp_i})", trace.e_yI[:, j] * f_i))
    return {
        "limits": ([c[0] for c in lim_cols], np.column_stack([c[1] for c in lim_cols])),
        "states": ([c[0] for c in st_cols], np.column_stack([c[1] for c in st_cols])),
    }


def cmd_tradestudy(args):
    study = _study(args)
    cfg = study.config
    out_dir = Path(args.output or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        traces = dict(zip(TRADE_MODES, pool.map(lambda md: _run(study, md), TRADE_MODES)))
        table = pool.submit(margins.table2_report, study.ext, study.gains, study.design, cfg.grid)
        table = table.result()

    runs = {}
    for mode in TRADE_MODES:
        trace = traces[mode]
        path = out_dir / f"trace_{mode.value}.csv"
        simulate.write_trace_csv(trace, path)
        written.append(path)
        for panel, (header, data) in _panels(trace, cfg.box).items():
            p = out_dir / f"{FIGURES[mode]}_{panel}.csv"
            simulate.write_csv(p, header, data)
            written.append(p)
        report = simulate.analyze(trace, cfg.box, cfg.sim.violation_tolerance)
        runs[mode.value] = violation_summary(report, cfg.plant)

    lim_labels = list(cfg.plant.input_labels + cfg.plant.lim_labels)
    beta_idx = lim_labels.index("beta") if "beta" in lim_labels else len(lim_labels) - 1
    summary = {
        "config": cfg.name,
        "dt": cfg.sim.dt,
        "runs": runs,
        "checks": {
            "baseline_limited_output_violated": runs["baseline"]["channels"][beta_idx]["excursion"] > 0,
            "augmented_within_tolerance": runs["augmented"]["satisfied"],
            "saturation_windup_exceeds_augmented": [
                a["max_abs_e_yI"] > b["max_abs_e_yI"]
                for a, b in zip(runs["saturation"]["windup"], runs["augmented"]["windup"])
            ],
        },
        "margins": [r.as_dict() for r in table],
    }
    path = out_dir / "summary.json"
    dump_json(summary, path)
    written.append(path)
    return written


COMMANDS = {
    "design": cmd_design,
    "simulate": cmd_simulate,
    "margins": cmd_margins,
    "tradestudy": cmd_tradestudy,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fcs", description="Constrained PI servo design and analysis.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("-c", "--config", default=None, help="study JSON (default: bundled aircraft study)")
    parser.add_argument("-o", "--output", default=None, help="output file, or directory for tradestudy")
    parser.add_argument("--mode", choices=[m.value for m in ControllerMode], default=None)
    parser.add_argument("--delta", default=None, help="activity pattern, e.g. 1000")
    parser.add_argument("--dt", type=float, default=None, help="integration step in seconds")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        written = COMMANDS[args.command](args)
    except (FcsError, OSError, ValueError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ConfigError):
            err["path"] = exc.path
        print(json.dumps(err), file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
