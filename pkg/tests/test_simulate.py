import csv

import numpy as np
import pytest

from fcs.controller import ControllerMode
from fcs.errors import ModelError, SimulationDiverged
from fcs.model import ConstraintBox
from fcs.simulate import (
    CommandSchedule, SimConfig, SimTrace, analyze, rk4_step, run, simulate_ode, step,
    write_trace_csv,
)

from cases import scalar_limited_state, siso_active_input


def test_rk4_fourth_order():
    errs = []
    for dt in (0.1, 0.05):
        _, X = simulate_ode(lambda x: -x, np.array([1.0]), dt, 1.0)
        errs.append(abs(X[-1, 0] - np.exp(-1.0)))
    assert 14.0 < errs[0] / errs[1] < 18.0


def test_rk4_step_reuses_first_stage():
    f = lambda x: np.array([x[1], -x[0]])
    x = np.array([1.0, 0.0])
    assert np.array_equal(rk4_step(f, x, 0.1), rk4_step(f, x, 0.1, k1=f(x)))


@pytest.mark.parametrize("mode", list(ControllerMode))
def test_equilibrium_stays_at_origin(aircraft, mode):
    x = step(aircraft.ext, aircraft.design, aircraft.gains, mode, np.zeros(5), np.zeros(2), 1e-3)
    assert np.array_equal(x, np.zeros(5))


@pytest.mark.parametrize("mode", list(ControllerMode))
def test_zero_schedule_gives_zero_trace(aircraft, mode):
    sched = CommandSchedule.constant([0.0, 0.0], 0.5)
    tr = run(aircraft.ext, aircraft.design, aircraft.gains, mode, sched, SimConfig(mode=mode))
    assert len(tr) == 501
    for name in ("x_p", "e_yI", "u_bl", "v", "w", "u_total", "y_reg", "z_lim", "delta"):
        assert not np.any(getattr(tr, name)), name


def test_trace_length_and_switch_times(aircraft):
    sched = CommandSchedule((0.0, 0.1), ((0.1, 0.0), (0.0, 0.0)), 0.25)
    tr = run(aircraft.ext, aircraft.design, aircraft.gains, "augmented", sched, SimConfig(dt=0.01))
    assert len(tr) == 26
    assert tr.y_cmd[9, 0] == 0.1 and tr.y_cmd[10, 0] == 0.0


def test_schedule_validation(aircraft):
    with pytest.raises(ModelError):
        CommandSchedule((0.5,), ((0.0, 0.0),), 1.0)
    with pytest.raises(ModelError):
        CommandSchedule((0.0, 0.0), ((0.0, 0.0), (1.0, 1.0)), 1.0)
    off_grid = CommandSchedule((0.0, 0.0105), ((0.0, 0.0), (1.0, 1.0)), 1.0)
    with pytest.raises(ModelError):
        run(aircraft.ext, aircraft.design, aircraft.gains, "baseline", off_grid, SimConfig(dt=1e-3))
    with pytest.raises(ModelError):
        SimConfig(dt=0.0)


def test_divergence_reports_time():
    with pytest.raises(SimulationDiverged) as info:
        simulate_ode(lambda x: x * x, np.array([1e200]), 0.1, 1.0)
    assert info.value.t == pytest.approx(0.1)


def test_scalar_active_branch_matches_exponential():
    t, x, ref = scalar_limited_state(0.5, 1.0, 0.6, 2.0, -1.0, 1.0, 2.0)
    assert np.max(np.abs(x - ref)) <= 1e-6


def test_siso_active_input_matches_exponential():
    sim, ref, *_ = siso_active_input(7)
    assert np.max(np.abs(sim - ref)) <= 1e-6


def test_siso_aw_only_mode_matches_exponential():
    sim, ref, *_ = siso_active_input(8, mode=ControllerMode.AW_ONLY)
    assert np.max(np.abs(sim - ref)) <= 1e-6


def test_deterministic(aircraft):
    sched = CommandSchedule.constant([0.2, 0.01], 1.0)
    a = run(aircraft.ext, aircraft.design, aircraft.gains, "augmented", sched)
    b = run(aircraft.ext, aircraft.design, aircraft.gains, "augmented", sched)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.u_total, b.u_total)


def _synthetic_trace(u, z, e):
    n = len(u)
    zeros = np.zeros((n, 1))
    return SimTrace(
        t=np.arange(n) * 0.1, x_p=zeros, e_yI=np.array(e)[:, None], u_bl=np.array(u)[:, None],
        v=zeros, w=zeros, u_total=np.array(u)[:, None], y_reg=zeros, z_lim=np.array(z)[:, None],
        delta=np.zeros((n, 2), dtype=int), y_cmd=zeros,
    )


def test_analyze_interior_and_excursion():
    box = ConstraintBox([-1.0], [1.0], [-2.0], [2.0])
    rep = analyze(_synthetic_trace([0.0, 0.5, -0.5], [1.0, -1.0, 0.0], [0.1, -0.3, 0.2]), box)
    assert np.array_equal(rep.excursion, [0.0, 0.0]) and rep.satisfied()
    assert rep.first_violation == [None, None]
    assert rep.windup[0] == pytest.approx(0.3)
    rep = analyze(_synthetic_trace([0.0, 1.5, -0.5], [0.0, -2.5, 0.0], [0.0, 0.0, 0.0]), box)
    assert np.allclose(rep.excursion, [0.5, 0.5])
    assert np.allclose(rep.relative, [0.25, 0.125])
    assert rep.first_violation == [pytest.approx(0.1), pytest.approx(0.1)]
    assert not rep.satisfied()


def test_csv_export_degrees_and_digits(aircraft, tmp_path):
    sched = CommandSchedule.constant([np.radians(15.0), 0.0312], 0.01)
    tr = run(aircraft.ext, aircraft.design, aircraft.gains, "augmented", sched, SimConfig(dt=1e-3))
    path = tmp_path / "trace.csv"
    write_trace_csv(tr, path)
    rows = list(csv.reader(open(path)))
    header = rows[0]
    assert header[0] == "t(s)"
    assert "y_cmd[p_s](deg/s)" in header and "u_total[rudder](deg)" in header
    assert "y_cmd[N_y](g)" in header and "e_yI[N_y](g*s)" in header
    col = header.index("y_cmd[p_s](deg/s)")
    assert float(rows[1][col]) == pytest.approx(15.0, rel=1e-9)
    assert len(rows) == len(tr) + 1
    mantissas = [v.split("e")[0].lstrip("-").replace(".", "").lstrip("0") for r in rows[1:] for v in r]
    assert max(len(m) for m in mantissas) <= 9


def test_aircraft_baseline_violates_sideslip(aircraft_traces):
    beta = np.degrees(aircraft_traces["baseline"].z_lim[:, 1])
    assert np.abs(beta).max() > 0.5


def test_aircraft_augmented_within_tolerance(aircraft, aircraft_traces):
    rep = analyze(aircraft_traces["augmented"], aircraft.config.box)
    assert rep.satisfied(0.01)


def test_aircraft_saturation_windup_exceeds_augmented(aircraft, aircraft_traces):
    box = aircraft.config.box
    sat = analyze(aircraft_traces["saturation"], box)
    aug = analyze(aircraft_traces["augmented"], box)
    assert sat.windup[1] > aug.windup[1]
    assert np.all(sat.applied_excursion == 0.0)
