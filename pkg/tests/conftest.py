import numpy as np
import pytest

from fcs import build_study, load_config
from fcs.model import ConstraintBox, Plant


@pytest.fixture(scope="session")
def aircraft():
    """Bundled lateral-directional study, synthesized once per session."""
    return build_study(load_config())


def random_hurwitz(rng, n, margin=0.2):
    """Random real matrix shifted so every eigenvalue has Re <= -margin."""
    M = rng.standard_normal((n, n))
    shift = np.linalg.eigvals(M).real.max() + margin + rng.uniform(0.0, 1.0)
    return M - shift * np.eye(n)


def random_plant(rng, n_p, m, hurwitz=True):
    A_p = random_hurwitz(rng, n_p) if hurwitz else rng.standard_normal((n_p, n_p))
    return Plant(
        A_p,
        rng.standard_normal((n_p, m)),
        rng.standard_normal((m, n_p)),
        np.zeros((m, m)),
        rng.standard_normal((m, n_p)),
    )


def wide_box(m, u=1.0, z=np.inf):
    return ConstraintBox(-u * np.ones(m), u * np.ones(m), -z * np.ones(m), z * np.ones(m))


@pytest.fixture(scope="session")
def aircraft_traces(aircraft):
    """Full 40 s scenario under the three compared controllers at the default step."""
    from cases import aircraft_trace

    return {mode: aircraft_trace(aircraft, mode) for mode in ("baseline", "saturation", "augmented")}


ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    """Store the one-line verdict of an acceptance criterion."""
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
