import math

import numpy as np
import pytest

from hoptraj import dynamics as dyn
from hoptraj.params import nominal_params
from hoptraj.trajectory import TouchdownSpec, make_hop_trajectory


def lo_state(theta_deg=30.0, speed=5.0, phi_deg=0.0, pos=(0.0, 0.0, 0.17)):
    eta = (math.radians(phi_deg), math.radians(theta_deg), 0.0)
    R = dyn.euler_to_rotation(eta)
    return dyn.make_state(pos, speed * R[:, 2], eta)


TD_SPECS = {
    "T1": TouchdownSpec((None, None, 0.2), (0.0, 0.0, 0.0), 5.0),
    "T2": TouchdownSpec((1.5, 0.0, None), (0.0, math.radians(-30), 0.0), 5.0),
    "T3": TouchdownSpec((1.5, 0.0, 0.2), (0.0, 0.0, 0.0), 5.0),
}


@pytest.fixture(scope="session")
def params():
    return nominal_params()


@pytest.fixture(scope="session")
def t3_traj(params):
    return make_hop_trajectory(params, lo_state(), "T3", TD_SPECS["T3"], 1.75, 0.05, True)


def make_traj(params, ttype, drag_comp=True, **kw):
    return make_hop_trajectory(params, lo_state(**kw), ttype, TD_SPECS[ttype], 1.75, 0.05, drag_comp)


def vee(S):
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


ACCEPTANCE = {}


@pytest.fixture
def record(request):
    """Store and print one verdict line for an acceptance criterion."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def _record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE[number] = line
        with capman.global_and_fixture_disabled():
            print("\n" + line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
