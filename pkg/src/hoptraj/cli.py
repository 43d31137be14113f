"""Command line entry point: ``hoptraj run | rmse | bench | list``.

Results go to stdout as tab-separated tables; files (log CSV, plot data,
PNG figures, JSON summaries) go to ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import sim
from .errors import HopTrajError, SingularityError
from .params import nominal_params
from .trajectory import TouchdownSpec, make_hop_trajectory

MAX_WORKERS_ENV = "HOPTRAJ_MAX_WORKERS"

EXIT_OK = 0
EXIT_GENERATION = 3
EXIT_SINGULARITY = 4
EXIT_OTHER = 5


def max_workers(n_jobs: int) -> int:
    cap = os.environ.get(MAX_WORKERS_ENV)
    n = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n, n_jobs))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(type(o).__name__)


def _run_one(sc: sim.Scenario, flag, out: Path, stem: str, plots: bool) -> dict:
    lg = sim.run_scenario(sc, flag)
    rep = sim.rmse(lg)
    files = [sim.emit_csv(lg, out / f"{stem}.csv")]
    files += sim.emit_plot_data(lg, out, stem)
    if plots:
        from .plotting import render

        files += render(lg, out, stem)
    summary = {
        "scenario": sc.name,
        "drag_comp": flag,
        "rmse": rep.as_dict(),
        "hops": sim.hop_summary(lg),
        "trajectories": [h.trajectory for h in lg.hops],
    }
    p = out / f"{stem}_summary.json"
    p.write_text(json.dumps(summary, indent=1, default=_json_default))
    files.append(p)
    return {"stem": stem, "drag_comp": flag, "rmse": rep, "log": lg, "files": files}


def _job(args):
    sc, flag, out, stem, plots = args
    try:
        return _run_one(sc, flag, out, stem, plots)
    except HopTrajError as exc:
        return {"stem": stem, "error": exc}


def cmd_run(ns) -> int:
    sc = sim.load_scenario(ns.scenario)
    if ns.dt_control is not None:
        sc = replace(sc, dt_control=ns.dt_control, dt_physics=min(sc.dt_physics, ns.dt_control))
    if ns.seed is not None:
        sc = replace(sc, seed=ns.seed)
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    flags = {"on": [True], "off": [False], "both": [True, False], "scenario": [None]}[ns.drag_comp]
    stems = {True: f"{sc.name}_comp_on", False: f"{sc.name}_comp_off", None: sc.name}
    jobs = [(sc, f, out, stems[f], not ns.no_plots) for f in flags]

    n = max_workers(len(jobs))
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]

    code = EXIT_OK
    print("stem\tdrag_comp\trmse_pos_m\trmse_vel_mps\thops_completed\tsamples")
    for r in results:
        if "error" in r:
            exc = r["error"]
            if isinstance(exc, sim.GenerationFailure):
                code = max(code, EXIT_GENERATION)
            elif isinstance(exc, SingularityError):
                code = max(code, EXIT_SINGULARITY)
            else:
                code = max(code, EXIT_OTHER)
            where = ""
            if getattr(exc, "hop_index", None) is not None:
                where = f" (hop {exc.hop_index})"
            print(f"error: {r['stem']}{where}: {exc}", file=sys.stderr)
            continue
        rep, lg = r["rmse"], r["log"]
        flag = "scenario" if r["drag_comp"] is None else ("on" if r["drag_comp"] else "off")
        print(f"{r['stem']}\t{flag}\t{rep.rmse_pos:.6g}\t{rep.rmse_vel:.6g}\t{len(lg.completed_hops)}\t{rep.n_samples}")
    ok = [r for r in results if "error" not in r]
    if ok:
        print("---")
        print("stem\thop\tcompleted\ttd_pos_err_m\ttd_att_err_deg\twarnings")
        for r in ok:
            for h in r["log"].hops:
                pe = "" if h.td_position_error is None else f"{h.td_position_error:.4g}"
                ae = "" if h.td_attitude_error_deg is None else f"{h.td_attitude_error_deg:.4g}"
                print(f"{r['stem']}\t{h.index}\t{int(h.completed)}\t{pe}\t{ae}\t{'; '.join(h.warnings)}")
        print("---")
        for r in ok:
            for f in r["files"]:
                print(f"file\t{f}")
    return code


def cmd_rmse(ns) -> int:
    lg = sim.read_csv(ns.log)
    rep = sim.rmse(lg)
    print("rmse_pos_m\trmse_vel_mps\trmse_x\trmse_y\trmse_z\tsamples")
    ax = "\t".join(f"{v:.6g}" for v in rep.rmse_pos_axis)
    print(f"{rep.rmse_pos:.6g}\t{rep.rmse_vel:.6g}\t{ax}\t{rep.n_samples}")
    return EXIT_OK


def bench_cases(rng: np.random.Generator, n: int):
    """Random liftoff states paired with one touchdown spec per trajectory type."""
    import math

    from . import dynamics as dyn

    tds = {
        "T1": TouchdownSpec((None, None, 0.17), (0.0, math.radians(-20), 0.0), 5.0),
        "T2": TouchdownSpec((1.5, 0.0, None), (0.0, math.radians(-30), 0.0), 5.0),
        "T3": TouchdownSpec((1.5, 0.0, 0.17), (0.0, 0.0, 0.0), 5.0),
    }
    cases = []
    for _ in range(n):
        eta = (rng.uniform(-0.1, 0.1), rng.uniform(0.2, 0.6), rng.uniform(-0.1, 0.1))
        R = dyn.euler_to_rotation(eta)
        x0 = dyn.make_state((0.0, 0.0, 0.17), rng.uniform(4.0, 5.0) * R[:, 2], eta)
        cases.append(x0)
    return tds, cases


def cmd_bench(ns) -> int:
    params = nominal_params()
    rng = np.random.default_rng(ns.seed)
    tds, cases = bench_cases(rng, ns.n)
    print("type\tn\tmedian_ns\tp99_ns")
    worst = 0.0
    for name, td in tds.items():
        for x0 in cases[: min(10, ns.n)]:  # warm-up
            make_hop_trajectory(params, x0, name, td, ns.t_m, 0.05, True, n_star=2, check_thrust=False)
        ts = np.empty(ns.n)
        for i, x0 in enumerate(cases):
            t0 = time.perf_counter_ns()
            make_hop_trajectory(params, x0, name, td, ns.t_m, 0.05, True, n_star=2, check_thrust=not ns.no_check)
            ts[i] = time.perf_counter_ns() - t0
        med, p99 = float(np.median(ts)), float(np.percentile(ts, 99))
        worst = max(worst, med)
        print(f"{name}\t{ns.n}\t{med:.0f}\t{p99:.0f}")
    print("---")
    print(f"max_median_ns\t{worst:.0f}\ttarget_ns\t1000000\t{'PASS' if worst <= 1e6 else 'FAIL'}")
    return EXIT_OK


def cmd_list(ns) -> int:
    for name in sim.shipped_scenarios():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hoptraj", description="Hopping trajectory generation and tracking simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="simulate a scenario file or shipped scenario name")
    r.add_argument("scenario")
    r.add_argument("--drag-comp", choices=("on", "off", "both", "scenario"), default="scenario")
    r.add_argument("--out", default="out")
    r.add_argument("--dt-control", type=float, default=None, metavar="S")
    r.add_argument("--seed", type=int, default=None, metavar="N")
    r.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("rmse", help="RMSE of a log CSV")
    m.add_argument("log")
    m.set_defaults(func=cmd_rmse)

    b = sub.add_parser("bench", help="make_hop_trajectory latency")
    b.add_argument("--n", type=int, default=500)
    b.add_argument("--t-m", type=float, default=1.75)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--no-check", action="store_true", help="skip the thrust feasibility scan")
    b.set_defaults(func=cmd_bench)

    ls = sub.add_parser("list", help="list shipped scenarios")
    ls.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return ns.func(ns)
    except FileNotFoundError as exc:
        print(f"error: no such file or scenario: {exc}", file=sys.stderr)
        return EXIT_OTHER
    except sim.GenerationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except SingularityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULARITY


if __name__ == "__main__":
    sys.exit(main())
