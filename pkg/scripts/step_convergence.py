"""Constraint excursion of the augmented run as the integration step shrinks.

Usage: python3 scripts/step_convergence.py
"""

from fcs import build_study, load_config
from fcs.simulate import SimConfig, analyze, run


def main():
    study = build_study(load_config())
    cfg = study.config
    for dt in (4e-3, 2e-3, 1e-3, 5e-4):
        trace = run(study.ext, study.design, study.gains, "augmented", cfg.schedule,
                    SimConfig(mode="augmented", dt=dt))
        rep = analyze(trace, cfg.box)
        print(f"dt={dt:g}  max relative excursion {rep.relative.max():.3e}  "
              f"applied-input excursion {rep.applied_excursion.max():.3e} rad")


if __name__ == "__main__":
    main()
