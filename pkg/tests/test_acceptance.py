"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (see ``conftest.py``) before
asserting, so the verdicts are printed even when a criterion fails.
"""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import vee
from hoptraj import cli, sim
from hoptraj import dynamics as dyn
from hoptraj import flatness as fl
from hoptraj import hop_cycle as hc
from hoptraj import trajectory as tg
from hoptraj.trajectory import ExtraConstraint, TouchdownSpec

TESTS = Path(__file__).parent


def random_hop_case(rng):
    """Random liftoff state and touchdown spec of a random type."""
    ttype = str(rng.choice(["T1", "T2", "T3"]))
    eta = (rng.uniform(-0.3, 0.3), rng.uniform(-0.6, 0.6), rng.uniform(-0.5, 0.5))
    R = dyn.euler_to_rotation(eta)
    x0 = dyn.make_state(rng.normal(scale=0.5, size=3), rng.uniform(2.0, 6.0) * R[:, 2], eta)
    pos = x0[:3] + rng.uniform(-2, 2, 3)
    att = (rng.uniform(-0.4, 0.4), rng.uniform(-0.6, 0.6), rng.uniform(-0.5, 0.5))
    if ttype == "T1":
        pos = (None, None, pos[2])
    elif ttype == "T2":
        pos = (pos[0], pos[1], None)
    td = TouchdownSpec(tuple(pos), att, rng.uniform(2.0, 6.0), rng.uniform(0.1, 0.5) * 9.81)
    return ttype, x0, td


def test_c1_keyframe_exactness(params, record):
    rng = np.random.default_rng(2024)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(1000):
        ttype, x0, td = random_hop_case(rng)
        t_m = rng.uniform(0.5, 3.0)
        dt = rng.uniform(0.02, 0.2)
        traj = tg.make_hop_trajectory(params, x0, ttype, td, t_m, dt, True, check_thrust=False, use_cache=False)
        worst = max(worst, float(np.abs(traj.keyframe_residuals()).max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 10.0
    record(1, ok, f"max keyframe residual {worst:.2e} (<= 1e-8), 1000 trajectories in {elapsed:.2f} s (< 10 s)")
    assert ok


def test_c2_null_space_contract(params, record):
    rng = np.random.default_rng(7)
    worst_fit = worst_kf = worst_ls = 0.0
    for trial in range(30):
        ttype, x0, td = random_hop_case(rng)
        t_m = rng.uniform(0.8, 3.0)
        base = tg.make_hop_trajectory(params, x0, ttype, td, t_m, 0.05, True, check_thrust=False)
        for s in (1, 2):
            ts = rng.uniform(0.1, t_m - 0.2, s)
            extras = [ExtraConstraint(float(t), int(rng.integers(0, 3)), int(k), float(rng.normal()))
                      for t, k in zip(ts, rng.permutation(2)[:s])]
            if s == 2 and extras[0].j == extras[1].j and abs(ts[0] - ts[1]) < 0.05:
                continue
            traj = tg.make_hop_trajectory(params, x0, ttype, td, t_m, 0.05, True, extras, check_thrust=False)
            for e in extras:
                worst_fit = max(worst_fit, abs(traj.evaluate(e.t, e.j, e.k) - e.value))
            worst_kf = max(worst_kf, float(np.abs(traj.keyframe_residuals() - base.keyframe_residuals()).max()))
        # five extras on one output: least squares on the null-space coordinates
        kfs = base.keyframes
        j = 2
        P_wide, nu = tg.build_system(ttype, kfs, j, 2)
        n = P_wide.shape[0]
        c = np.zeros(n + 2)
        c[:n] = tg.solve_base(P_wide[:, :n], nu)
        N = tg.null_space_basis(ttype, kfs, 2, j)
        extras = [ExtraConstraint(float(t), j, 0, float(v)) for t, v in
                  zip(np.linspace(0.15, t_m - 0.15, 5), rng.normal(size=5))]
        P_N, nu_x = tg.extra_rows(extras, len(c))
        cN = tg.solve_null_coefficients(P_N, N, c, nu_x)
        oracle, *_ = np.linalg.lstsq(P_N @ N, nu_x - P_N @ c, rcond=None)
        worst_ls = max(worst_ls, float(np.abs(cN - oracle).max()))
    ok = worst_fit <= 1e-8 and worst_kf <= 1e-10 and worst_ls <= 1e-8
    record(2, ok, f"extra fit {worst_fit:.1e} (<= 1e-8), keyframe change {worst_kf:.1e} (<= 1e-10), "
                  f"s=5 vs lstsq {worst_ls:.1e} (<= 1e-8)")
    assert ok


def test_c3_flatness_dynamics_consistency(params, record):
    specs = {
        "T1": TouchdownSpec((None, None, 0.2), (0.0, math.radians(-20), 0.0), 5.0),
        "T2": TouchdownSpec((1.5, 0.0, None), (0.0, math.radians(-30), 0.0), 5.0),
        "T3": TouchdownSpec((1.5, 0.3, 0.2), (0.05, 0.0, 0.2), 5.0),
    }
    eta0 = (math.radians(4), math.radians(30), 0.0)
    x0 = dyn.make_state((0, 0, 0.17), 5.0 * dyn.euler_to_rotation(eta0)[:, 2], eta0)
    worst_res = worst_w = 0.0
    h = 1e-5
    for ttype, td in specs.items():
        traj = tg.make_hop_trajectory(params, x0, ttype, td, 1.75, 0.05, True)
        prev = None
        for t in np.arange(0.0, traj.t2 + 1e-12, 1e-3):
            s = traj.sample(t)
            fs = fl.flat_to_state(params, s, prev, True, traj)
            prev = fs
            worst_res = max(worst_res, float(np.linalg.norm(fl.eq1_residual(params, s, fs))))
            if h <= t <= traj.t2 - h:
                _, Rp = fl.thrust_attitude(params, traj.sample(t + h), fs.R)
                _, Rm = fl.thrust_attitude(params, traj.sample(t - h), fs.R)
                w_fd = vee(fs.R.T @ (Rp - Rm) / (2 * h))
                worst_w = max(worst_w, float(np.abs(fs.x_d[9:12] - w_fd).max()))
    bound = 1e-9 * params.m_r * params.g
    ok = worst_res <= bound and worst_w <= 1e-3
    record(3, ok, f"force residual {worst_res:.1e} N (<= {bound:.1e}), rate mismatch {worst_w:.1e} rad/s (<= 1e-3)")
    assert ok


def test_c4_closed_loop_t3_hops(record):
    log_ = sim.run_scenario(sim.load_scenario("fig2h"))
    done = log_.completed_hops
    # hops still in the air when time runs out are the only incomplete ones
    unfinished = [h for h in log_.hops if not h.completed]
    only_last = all(h.index == log_.hops[-1].index for h in unfinished)
    pos = max(h.td_position_error for h in done)
    att = max(h.td_attitude_error_deg for h in done)
    ok = len(done) >= 3 and only_last and pos <= 0.15 and att <= 2.0
    record(4, ok, f"{len(done)} hops completed in {log_.t[-1]:.2f} s, worst touchdown error "
                  f"{pos * 100:.2f} cm (<= 15 cm), {att:.3f} deg (<= 2 deg)")
    assert ok


def test_c5_drag_compensation_trend(record):
    gaps = {}
    detail = []
    for off, on in (("fig2g", "fig2h"), ("fig3a", "fig3b"), ("fig2a", "fig2b"), ("fig2c", "fig2d"), ("fig2e", "fig2f")):
        r_off = sim.rmse(sim.run_scenario(sim.load_scenario(off)))
        r_on = sim.rmse(sim.run_scenario(sim.load_scenario(on)))
        gaps[on] = (r_off, r_on)
        detail.append(f"{off}/{on} pos {r_off.rmse_pos:.4f}->{r_on.rmse_pos:.4f} vel {r_off.rmse_vel:.4f}->{r_on.rmse_vel:.4f}")
    t3_off, t3_on = gaps["fig2h"]
    gg_off, gg_on = gaps["fig3b"]
    trend = t3_on.rmse_pos < t3_off.rmse_pos and gg_on.rmse_pos < gg_off.rmse_pos and gg_on.rmse_vel < gg_off.rmse_vel
    t3_gap = t3_off.rmse_pos - t3_on.rmse_pos
    free = {k: abs(gaps[k][0].rmse_pos - gaps[k][1].rmse_pos) for k in ("fig2b", "fig2d", "fig2f")}
    small = all(g <= 0.5 * abs(t3_gap) for g in free.values())
    ok = trend and small
    free_txt = ", ".join(f"{k} {v:.4f}" for k, v in free.items())
    record(5, ok, f"on<off: {'yes' if trend else 'no'}; free-TD gaps {free_txt} vs limit {0.5 * abs(t3_gap):.4f} "
                  f"(half the T3 gap); " + "; ".join(detail))
    assert ok


def _aerial_rate_violations(log_, skip=0.05, tol=1e-6):
    dt = np.diff(log_.t)
    rate = np.diff(log_.V) / dt
    same = (log_.hop[1:] == log_.hop[:-1]) & log_.aerial[1:] & log_.aerial[:-1]
    settled = np.zeros(len(log_) - 1, dtype=bool)
    for h in np.unique(log_.hop):
        m = np.flatnonzero((log_.hop == h) & log_.aerial)
        if m.size:
            t_lo = log_.t[m[0]]
            settled |= (log_.hop[:-1] == h) & (log_.t[:-1] >= t_lo + skip - 1e-12)
    check = same & settled
    bad = check & (rate > tol)
    return int(bad.sum()), int(check.sum()), float(rate[check].max()) if check.any() else 0.0


def test_c6_lyapunov_behavior(record):
    log_ = sim.run_scenario(sim.load_scenario("fig2h_matched"))
    n_bad, n, worst = _aerial_rate_violations(log_)
    design_ok = bool(np.all(log_.V_dot_design <= 0.0))
    ok = n_bad == 0 and design_ok
    record(6, ok, f"dV/dt > 1e-6 on {n_bad} of {n} settled aerial ticks (max {worst:.3g}/s); "
                  f"V_dot_design <= 0 everywhere: {design_ok}")
    assert ok


def test_c7_gamma_adaptation(record):
    a = hc.GammaAdapter()
    arith = (
        hc.update_gamma(a, 0.5, 0.6, "theta").gamma_theta == 1.0 - 0.1 * abs(0.5 - 0.6)
        and hc.update_gamma(a, 0.5, -0.2, "theta").gamma_theta == 1.0 + 0.1 * abs(0.5 + 0.2)
        and hc.update_gamma(a, 0.3, 0.3, "phi") == a
    )
    sc = sim.load_scenario("gamma_pitch")
    log_ = sim.run_scenario(sc)
    theta_d = sc.hops[0].attitude[1]
    gaps = [abs(theta_d - h.theta_LO) for h in log_.hops if h.lo_state is not None]
    have = len(gaps) >= 20
    ratio = gaps[19] / gaps[0] if have else float("nan")
    ok = arith and have and ratio <= 0.2
    record(7, ok, f"rule arithmetic exact: {arith}; |theta_TD - theta_LO| hop 1 {math.degrees(gaps[0]):.3f} deg, "
                  f"hop 20 {math.degrees(gaps[19]) if have else float('nan'):.3f} deg, ratio {ratio:.3f} (<= 0.2)")
    assert ok


def test_c8_realtime_bench(record, capsys):
    assert cli.main(["bench", "--n", "500"]) == cli.EXIT_OK
    out = capsys.readouterr().out.splitlines()
    med = {l.split("\t")[0]: float(l.split("\t")[2]) for l in out[1:4]}
    worst = max(med.values())
    ok = worst <= 1e6
    record(8, ok, "median latency " + ", ".join(f"{k} {v / 1e3:.0f} us" for k, v in med.items()) + " (<= 1000 us)")
    assert ok


def test_c9_dynamics_core(params, record):
    p = params.without_drag()
    rng = np.random.default_rng(9)
    x = dyn.make_state((0, 0, 10.0), (1.0, -2.0, 3.0), (0.2, -0.3, 0.1), (1.0, -0.5, 0.7))
    I = np.asarray(p.I_r)

    def energy(s):
        return 0.5 * p.m_r * s[3:6] @ s[3:6] + p.m_r * p.g * s[2] + 0.5 * s[9:12] @ (I * s[9:12])

    e0 = energy(x)
    for _ in range(10000):
        x = dyn.integrate_step(p, x, np.zeros(4), 1e-4)
    drift = abs(energy(x) - e0) / abs(e0)
    worst_mix = 0.0
    for _ in range(200):
        w = rng.uniform(100, 900, 4)
        U = dyn.input_mixing(params, w)
        back = dyn.input_mixing(params, dyn.inverse_mixing(params, U).speeds)
        worst_mix = max(worst_mix, float(np.abs(back - U).max() / max(1.0, np.abs(U).max())))
    files = ["test_dynamics.py", "test_flatness.py", "test_trajectory.py", "test_controller.py", "test_hop_cycle.py"]
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *[str(TESTS / f) for f in files]],
                          capture_output=True, text=True, cwd=TESTS.parent)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = drift <= 1e-6 and worst_mix <= 1e-9 and proc.returncode == 0
    record(9, ok, f"energy drift {drift:.1e} (<= 1e-6), mixing round-trip {worst_mix:.1e} (<= 1e-9), "
                  f"module example suites: {summary}")
    assert ok
