import csv
import itertools
import json
import math
from importlib import resources

import numpy as np
import pytest

from hoptraj import sim
from hoptraj.hop_cycle import Phase


def shipped_dict(name):
    return json.loads(resources.files("hoptraj.scenarios").joinpath(f"{name}.json").read_text())


@pytest.fixture(scope="module")
def fig2h_log():
    return sim.run_scenario(sim.load_scenario("fig2h"))


@pytest.fixture(scope="module")
def short_log():
    return sim.run_scenario(sim.load_scenario("hover_short"))


def synthetic_log(desired, actual, phase=None, hop=None):
    n = len(desired)
    phase = np.array([Phase.AERIAL.value] * n if phase is None else phase, dtype=object)
    return sim.TrajectoryLog(
        t=np.arange(n) * 1e-3,
        desired=np.asarray(desired, dtype=float),
        U1_d=np.zeros(n),
        actual=np.asarray(actual, dtype=float),
        U=np.zeros((n, 4)),
        phase=phase,
        hop=np.zeros(n, dtype=int) if hop is None else np.asarray(hop),
        thrust_clamped=np.zeros(n, dtype=bool),
        rotor_saturated=np.zeros(n, dtype=bool),
        V=np.zeros(n),
        V_dot_design=np.zeros(n),
    )


def test_shipped_scenarios_load():
    names = sim.shipped_scenarios()
    for n in ("fig2a", "fig2b", "fig2c", "fig2d", "fig2e", "fig2f", "fig2g", "fig2h", "fig3a", "fig3b", "fig4"):
        assert n in names
    for n in names:
        sc = sim.load_scenario(n)
        assert sc.total_time > 0 and sc.dt_physics <= sc.dt_control


def test_scenario_validation():
    d = shipped_dict("fig2h")
    d["dt_physics"] = 0.01
    with pytest.raises(ValueError):
        sim.scenario_from_dict(d)
    d = shipped_dict("fig2h")
    d["total_time"] = 0.0
    with pytest.raises(ValueError):
        sim.scenario_from_dict(d)
    with pytest.raises(FileNotFoundError):
        sim.load_scenario("no_such_scenario")


def test_initial_state_from_contact():
    sc = sim.load_scenario("fig2h")
    x0 = sc.initial_state
    assert x0[7] == pytest.approx(math.radians(30))
    assert np.linalg.norm(x0[3:6]) == pytest.approx(5.0)
    # foot tip on the ground
    assert x0[2] == pytest.approx(sc.foot_len * math.cos(math.radians(30)))


def test_fig2h_completes_hops(fig2h_log):
    done = fig2h_log.completed_hops
    assert len(done) >= 3
    for h in done:
        assert h.td_position_error <= 0.15
        assert h.td_attitude_error_deg <= 2.0


def test_phase_alternation(fig2h_log):
    runs = [k for k, _ in itertools.groupby(fig2h_log.phase)]
    assert runs[0] == Phase.AERIAL.value
    assert all(a != b for a, b in zip(runs, runs[1:]))
    assert np.all(np.diff(fig2h_log.t) > 0)


def test_zero_attitude_hops_keep_V(fig2h_log):
    # upright touchdown: stance does not raise V
    for h in fig2h_log.completed_hops:
        assert h.delta_V <= 1e-6


def test_zero_hop_partial_log(short_log):
    assert len(short_log) == 500
    assert np.all(short_log.aerial)
    assert short_log.completed_hops == []
    assert len(short_log.hops) == 1


def test_design_rate_never_positive(fig2h_log):
    assert np.all(fig2h_log.V_dot_design <= 0.0)
    assert np.all(fig2h_log.V >= 0.0)


def test_deterministic_with_seed():
    d = shipped_dict("fig2h_exact")
    d["total_time"] = 2.2
    a = sim.run_scenario(sim.scenario_from_dict(d))
    b = sim.run_scenario(sim.scenario_from_dict(d))
    assert a.equals(b)
    d["seed"] = 8
    c = sim.run_scenario(sim.scenario_from_dict(d))
    assert not a.equals(c)


def test_rmse_perfect_and_constant():
    rng = np.random.default_rng(0)
    d = rng.normal(size=(50, 12))
    r = sim.rmse(synthetic_log(d, d))
    assert (r.rmse_pos, r.rmse_vel) == (0.0, 0.0)
    a = d.copy()
    a[:, 0] -= 0.1
    r = sim.rmse(synthetic_log(d, a))
    assert r.rmse_pos == pytest.approx(0.1, abs=1e-12) and r.rmse_vel == 0.0
    assert r.rmse_pos_axis[0] == pytest.approx(0.1, abs=1e-12)


def test_rmse_accumulation_oracle():
    rng = np.random.default_rng(1)
    d, a = rng.normal(size=(200, 12)), rng.normal(size=(200, 12))
    phase = [Phase.AERIAL.value if i % 7 else Phase.STANCE.value for i in range(200)]
    r = sim.rmse(synthetic_log(d, a, phase))
    acc_p = acc_v = 0.0
    n = 0
    for i in range(200):
        if phase[i] != Phase.AERIAL.value:
            continue
        n += 1
        acc_p += sum((d[i, k] - a[i, k]) ** 2 for k in range(3))
        acc_v += sum((d[i, k] - a[i, k]) ** 2 for k in range(3, 6))
    assert r.n_samples == n
    assert r.rmse_pos == pytest.approx(math.sqrt(acc_p / n), rel=1e-12)
    assert r.rmse_vel == pytest.approx(math.sqrt(acc_v / n), rel=1e-12)


def test_rmse_concatenation_additivity():
    rng = np.random.default_rng(2)
    parts = [(rng.normal(size=(n, 12)), rng.normal(size=(n, 12))) for n in (13, 40, 7)]
    whole = sim.rmse(synthetic_log(np.vstack([p[0] for p in parts]), np.vstack([p[1] for p in parts])))
    reps = [sim.rmse(synthetic_log(*p)) for p in parts]
    n = sum(r.n_samples for r in reps)
    combined = math.sqrt(sum(r.n_samples * r.rmse_pos**2 for r in reps) / n)
    assert whole.rmse_pos == pytest.approx(combined, rel=1e-12)


def test_rmse_empty_rejected():
    d = np.zeros((3, 12))
    with pytest.raises(ValueError):
        sim.rmse(synthetic_log(d, d, [Phase.STANCE.value] * 3))


def test_compare_drag_no_drag_plant_identical():
    d = shipped_dict("hover_short")
    d["params_override"] = {"C_T": [[0, 0, 0]] * 3}
    cmp = sim.compare_drag(sim.scenario_from_dict(d))
    assert np.abs(cmp.log_on.actual - cmp.log_off.actual).max() <= 1e-12
    assert abs(cmp.on.rmse_pos - cmp.off.rmse_pos) <= 1e-12


def test_compare_drag_labels_runs():
    cmp = sim.compare_drag(sim.load_scenario("hover_short"))
    assert cmp.on.drag_comp is True and cmp.off.drag_comp is False


def test_csv_empty_and_single(tmp_path, short_log):
    empty = synthetic_log(np.zeros((0, 12)), np.zeros((0, 12)))
    p = sim.emit_csv(empty, tmp_path / "e.csv")
    lines = p.read_text().splitlines()
    assert lines == [",".join(sim.CSV_COLUMNS)]
    one = synthetic_log(np.ones((1, 12)), np.ones((1, 12)))
    p = sim.emit_csv(one, tmp_path / "one.csv")
    assert len(p.read_text().splitlines()) == 2


def test_csv_roundtrip_exact(tmp_path, short_log):
    p = sim.emit_csv(short_log, tmp_path / "log.csv")
    back = sim.read_csv(p)
    for a in ("t", "desired", "U1_d", "actual", "U", "V"):
        assert np.array_equal(getattr(back, a), getattr(short_log, a))
    assert np.array_equal(back.phase, short_log.phase)
    with p.open() as fh:
        header = next(csv.reader(fh))
    assert tuple(header) == sim.CSV_COLUMNS


def test_plot_data_files(tmp_path, short_log):
    paths = sim.emit_plot_data(short_log, tmp_path, "s")
    assert sorted(p.name for p in paths) == ["s_plane_yx.csv", "s_plane_zx.csv", "s_states.csv"]
    for p in paths:
        assert len(p.read_text().splitlines()) == len(short_log) + 1


def test_generation_failure_reports_hop():
    d = shipped_dict("hover_short")
    # vertical hop far shorter than its flight time: thrust must pass through zero
    d["initial"]["euler_deg"] = [0, 0, 0]
    d["hops"][0]["t_m"] = 0.6
    d["hops"][0]["td"]["position"] = [0.0, 0.0, "contact"]
    with pytest.raises(sim.GenerationFailure) as e:
        sim.run_scenario(sim.scenario_from_dict(d))
    assert e.value.hop_index == 0
