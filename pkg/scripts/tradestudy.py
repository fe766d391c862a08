"""Run the baseline / saturation / augmented comparison and print violation metrics.

Usage: python3 scripts/tradestudy.py [--dt S] [--config PATH]
"""

import argparse

import numpy as np

from fcs import build_study, load_config
from fcs.simulate import SimConfig, analyze, run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=None)
    parser.add_argument("--dt", type=float, default=None)
    args = parser.parse_args()
    cfg = load_config(args.config)
    if args.dt is not None:
        cfg = cfg.with_dt(args.dt)
    study = build_study(cfg)
    labels = cfg.plant.input_labels + cfg.plant.lim_labels
    print(f"{'mode':11} " + " ".join(f"{lab + ' exc(deg)':>16}" for lab in labels) + f" {'windup':>18}")
    for mode in ("baseline", "saturation", "augmented"):
        trace = run(study.ext, study.design, study.gains, mode, cfg.schedule,
                    SimConfig(mode=mode, dt=cfg.sim.dt))
        rep = analyze(trace, cfg.box, cfg.sim.violation_tolerance)
        exc = " ".join(f"{np.degrees(e):16.4f}" for e in rep.excursion)
        windup = ", ".join(f"{w:.4f}" for w in rep.windup)
        print(f"{mode:11} {exc} {windup:>18}")


if __name__ == "__main__":
    main()
