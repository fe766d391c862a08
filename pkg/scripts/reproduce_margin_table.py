"""Print the gain/phase margin table of the bundled aircraft study.

Usage: python3 scripts/reproduce_margin_table.py [config.json]
"""

import sys
import time

from fcs import build_study, load_config
from fcs.margins import table2_report


def fmt_gm(gm):
    return "-" if gm is None else f"[{gm[0]:7.2f}, {gm[1]:7.2f}] dB"


def main(argv):
    study = build_study(load_config(argv[1] if len(argv) > 1 else None))
    t0 = time.perf_counter()
    reports = table2_report(study.ext, study.gains, study.design, study.config.grid)
    print(f"{'pattern':8} {'treatment':13} {'gain margin':24} {'phase':>8}  note")
    for r in reports:
        pm = "-" if r.pm_deg is None else f"{r.pm_deg:7.2f}"
        print(f"{r.pattern:8} {r.treatment:13} {fmt_gm(r.gm_db):24} {pm:>8}  {r.note}")
    print(f"elapsed {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main(sys.argv)
