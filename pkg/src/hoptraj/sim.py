"""Scenario-driven multi-hop closed-loop simulation.

Each hop: generate a trajectory from the current liftoff state, track it at
the control rate with the Lyapunov controller, detect touchdown on the
scenario surfaces, apply the stance map, update the touchdown-angle
adaptation, and start over until the scenario time runs out.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dynamics as dyn
from .controller import Gains, compute_errors, control, lyapunov_rate
from .errors import HopTrajError, SingularityError
from .flatness import FlatState, flat_to_state
from .hop_cycle import (
    DEFAULT_FOOT_LEN,
    GammaAdapter,
    Phase,
    StanceModel,
    Surface,
    detect_touchdown,
    hybrid_check,
    stance_map,
    update_gamma,
)
from .params import RobotParams, load_params
from .trajectory import (
    ExtraConstraint,
    PolynomialTrajectory,
    TouchdownSpec,
    TrajectoryType,
    make_hop_trajectory,
)

log = logging.getLogger(__name__)

STATE_NAMES = ("x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi", "p", "q", "r")
CSV_COLUMNS = (
    ("t",)
    + tuple(f"d_{n}" for n in STATE_NAMES)
    + ("d_U1",)
    + STATE_NAMES
    + ("U1", "U2", "U3", "U4", "phase", "V")
)


class GenerationFailure(HopTrajError):
    def __init__(self, hop_index: int, cause: Exception):
        super().__init__(f"trajectory generation failed at hop {hop_index}: {cause}")
        self.hop_index = hop_index
        self.cause = cause


@dataclass
class HopPlan:
    ttype: TrajectoryType
    position: list  # float | None | "contact" per axis
    relative: tuple = (False, False, False)
    attitude: tuple = (0.0, 0.0, 0.0)  # rad
    v_TD: float = 5.0
    U1_TD: float | None = None
    surface: int | None = None
    t_m: float = 1.75
    delta_t: float = 0.05
    drag_comp: bool = True
    extras: list = field(default_factory=list)
    lo_U1: float | None = None


@dataclass
class Scenario:
    params: RobotParams
    gains: Gains
    surfaces: list
    initial_state: np.ndarray
    hops: list
    total_time: float = 6.0
    dt_control: float = 1e-3
    dt_physics: float = 1e-3
    seed: int = 0
    name: str = "scenario"
    repeat: str = "last"
    foot_len: float = DEFAULT_FOOT_LEN
    stance: StanceModel = StanceModel()
    adapt_gamma: bool = False
    mu: float = 0.1
    td_window: float = 0.03
    initial_noise: float = 0.0
    law: str = "table"  # or "exact", see controller.exact_laws
    input_hold: str = "zoh"  # or "stage": control re-evaluated at every RK4 stage
    saturate: bool = True
    # std of a state kick applied right after each hop is planned: (pos, vel, angle, rate)
    lo_disturbance: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.input_hold not in ("zoh", "stage"):
            raise ValueError("input_hold must be 'zoh' or 'stage'")
        if self.total_time <= 0:
            raise ValueError("total_time must be positive")
        if self.dt_physics > self.dt_control + 1e-15:
            raise ValueError("dt_physics must not exceed dt_control")
        if not self.hops:
            raise ValueError("scenario needs at least one hop")

    def hop(self, i: int) -> HopPlan:
        if i < len(self.hops):
            return self.hops[i]
        if self.repeat == "cycle":
            return self.hops[i % len(self.hops)]
        return self.hops[-1]

    def with_drag_comp(self, on: bool) -> "Scenario":
        return replace(self, hops=[replace(h, drag_comp=on) for h in self.hops])


def _deg(v):
    return tuple(math.radians(float(a)) for a in v)


def _parse_hop(d: dict) -> HopPlan:
    td = d["td"]
    pos = list(td.get("position", [None, None, None]))
    extras = [ExtraConstraint(float(e["t"]), int(e["j"]), int(e["k"]), float(e["value"])) for e in d.get("extras", [])]
    att = _deg(td["euler_deg"]) if "euler_deg" in td else tuple(td.get("euler", (0.0, 0.0, 0.0)))
    return HopPlan(
        ttype=TrajectoryType(d["type"]),
        position=pos,
        relative=tuple(td.get("relative", (False, False, False))),
        attitude=att,
        v_TD=float(td.get("v_td", 5.0)),
        U1_TD=td.get("U1_td"),
        surface=td.get("surface"),
        t_m=float(d.get("t_m", 1.75)),
        delta_t=float(d.get("delta_t", 0.05)),
        drag_comp=bool(d.get("drag_comp", True)),
        extras=extras,
        lo_U1=d.get("U1_lo"),
    )


def scenario_from_dict(d: dict, base_dir: Path | None = None) -> Scenario:
    """Build a :class:`Scenario` from its JSON form (see README for the schema)."""
    pfile = d.get("params")
    if pfile is not None and base_dir is not None and not Path(pfile).is_absolute():
        pfile = base_dir / pfile
    params = load_params(pfile)
    if d.get("params_override"):
        params = params.replace(**d["params_override"])
    gains = Gains.from_dict(d["gains"]) if d.get("gains") else Gains()
    surfaces = [Surface(s["kind"], float(s.get("offset", 0.0)), tuple(s.get("normal", (0, 0, 1)))) for s in d.get("surfaces", [])]
    foot_len = float(d.get("foot_len", DEFAULT_FOOT_LEN))

    ini = d["initial"]
    eta = _deg(ini.get("euler_deg", (0, 0, 0)))
    R0 = dyn.euler_to_rotation(eta)
    pos = list(ini.get("position", [0.0, 0.0, "contact"]))
    surf = ini.get("surface", 0 if surfaces else None)
    for i, p in enumerate(pos):
        if p == "contact":
            s = surfaces[surf]
            if s.axis != i:
                raise ValueError(f"initial position axis {i} cannot be set by contact with surface {surf}")
            pos[i] = s.contact_coordinate(R0[:, 2], foot_len)
    vel = float(ini.get("speed", 0.0)) * R0[:, 2]
    if "velocity" in ini:
        vel = np.asarray(ini["velocity"], dtype=float)
    x0 = dyn.make_state(pos, vel, eta)

    st = d.get("stance", {})
    stance = StanceModel(
        eta_e=float(st.get("eta_e", 0.9)),
        t_s=float(st.get("t_s", 0.08)),
        apply_gravity_torque=bool(st.get("apply_gravity_torque", True)),
    )
    gamma = d.get("gamma", {})
    ctrl = d.get("controller", {})
    return Scenario(
        params=params,
        gains=gains,
        surfaces=surfaces,
        initial_state=x0,
        hops=[_parse_hop(h) for h in d["hops"]],
        total_time=float(d.get("total_time", 6.0)),
        dt_control=float(d.get("dt_control", 1e-3)),
        dt_physics=float(d.get("dt_physics", d.get("dt_control", 1e-3))),
        seed=int(d.get("seed", 0)),
        name=str(d.get("name", "scenario")),
        repeat=str(d.get("repeat", "last")),
        foot_len=foot_len,
        stance=stance,
        adapt_gamma=bool(gamma.get("enabled", False)),
        mu=float(gamma.get("mu", 0.1)),
        td_window=float(d.get("td_window", 0.03)),
        initial_noise=float(ini.get("noise_std", 0.0)),
        lo_disturbance=tuple(float(v) for v in d.get("lo_disturbance_std", (0.0, 0.0, 0.0, 0.0))),
        law=str(ctrl.get("law", "table")),
        input_hold=str(ctrl.get("input_hold", "zoh")),
        saturate=bool(ctrl.get("saturate", True)),
    )


def load_scenario(path) -> Scenario:
    """Load a scenario file; bare names resolve to the shipped scenarios."""
    p = Path(path)
    if not p.exists():
        name = p.name if p.suffix else p.name + ".json"
        shipped = resources.files("hoptraj.scenarios").joinpath(name)
        if not shipped.is_file():
            raise FileNotFoundError(path)
        return scenario_from_dict(json.loads(shipped.read_text()), None)
    return scenario_from_dict(json.loads(p.read_text()), p.parent)


def shipped_scenarios() -> list[str]:
    return sorted(
        f.name[:-5] for f in resources.files("hoptraj.scenarios").iterdir() if f.name.endswith(".json")
    )


@dataclass
class HopRecord:
    index: int
    ttype: str
    t_LO: float
    t_TD: float | None = None
    trajectory: dict | None = None
    td_desired: np.ndarray | None = None
    td_state: np.ndarray | None = None
    lo_state: np.ndarray | None = None
    td_position_error: float | None = None
    td_attitude_error_deg: float | None = None
    V_TD: float | None = None
    V_LO_next: float | None = None
    delta_V: float | None = None
    gamma: tuple = (1.0, 1.0)
    forced_touchdown: bool = False
    early_touchdown: bool = False
    completed: bool = False
    warnings: list = field(default_factory=list)

    @property
    def theta_TD(self) -> float:
        return float(self.td_state[7])

    @property
    def theta_LO(self) -> float:
        return float(self.lo_state[7])


@dataclass
class TrajectoryLog:
    t: np.ndarray
    desired: np.ndarray
    U1_d: np.ndarray
    actual: np.ndarray
    U: np.ndarray
    phase: np.ndarray
    hop: np.ndarray
    thrust_clamped: np.ndarray
    rotor_saturated: np.ndarray
    V: np.ndarray
    V_dot_design: np.ndarray
    hops: list = field(default_factory=list)
    drag_comp: bool | None = None
    name: str = ""

    def __len__(self):
        return len(self.t)

    @property
    def aerial(self) -> np.ndarray:
        return self.phase == Phase.AERIAL.value

    @property
    def completed_hops(self) -> list:
        return [h for h in self.hops if h.completed]

    def equals(self, other: "TrajectoryLog") -> bool:
        arrays = ("t", "desired", "U1_d", "actual", "U", "V", "V_dot_design", "hop")
        return all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays) and np.array_equal(
            self.phase, other.phase
        )


class _LogBuilder:
    def __init__(self):
        self.rows = {k: [] for k in ("t", "desired", "U1_d", "actual", "U", "phase", "hop", "tc", "rs", "V", "Vd")}

    def add(self, t, desired: FlatState, actual, U, phase, hop, tc, rs, V, Vd):
        r = self.rows
        r["t"].append(t)
        r["desired"].append(desired.x_d)
        r["U1_d"].append(desired.U1_d)
        r["actual"].append(np.asarray(actual, dtype=float).copy())
        r["U"].append(np.asarray(U, dtype=float))
        r["phase"].append(phase.value)
        r["hop"].append(hop)
        r["tc"].append(tc)
        r["rs"].append(rs)
        r["V"].append(V)
        r["Vd"].append(Vd)

    def build(self, hops, drag_comp, name) -> TrajectoryLog:
        r = self.rows
        n = len(r["t"])
        return TrajectoryLog(
            t=np.array(r["t"], dtype=float),
            desired=np.array(r["desired"], dtype=float).reshape(n, 12),
            U1_d=np.array(r["U1_d"], dtype=float),
            actual=np.array(r["actual"], dtype=float).reshape(n, 12),
            U=np.array(r["U"], dtype=float).reshape(n, 4),
            phase=np.array(r["phase"], dtype=object),
            hop=np.array(r["hop"], dtype=int),
            thrust_clamped=np.array(r["tc"], dtype=bool),
            rotor_saturated=np.array(r["rs"], dtype=bool),
            V=np.array(r["V"], dtype=float),
            V_dot_design=np.array(r["Vd"], dtype=float),
            hops=hops,
            drag_comp=drag_comp,
            name=name,
        )


class _Extended:
    """Trajectory view that keeps evaluating past its end time."""

    t_start = 0.0
    t_end = math.inf

    def __init__(self, traj: PolynomialTrajectory):
        self.traj = traj

    def sample(self, t):
        return self.traj.sample(t, extrapolate=True)


def resolve_touchdown(sc: Scenario, plan: HopPlan, lo_state, adapter: GammaAdapter) -> TouchdownSpec:
    phi, theta, psi = plan.attitude
    if sc.adapt_gamma:
        phi, theta = phi * adapter.gamma_phi, theta * adapter.gamma_theta
    att = (phi, theta, psi)
    z_B = dyn.euler_to_rotation(att)[:, 2]
    pos = []
    for i, p in enumerate(plan.position):
        if p == "contact":
            s = sc.surfaces[plan.surface]
            if s.axis != i:
                raise ValueError(f"hop touchdown axis {i} cannot be set by contact with its surface")
            pos.append(s.contact_coordinate(z_B, sc.foot_len))
        elif p is None:
            pos.append(None)
        else:
            pos.append(float(p) + (float(lo_state[i]) if plan.relative[i] else 0.0))
    return TouchdownSpec(pos, att, plan.v_TD, plan.U1_TD)


def rotation_angle_deg(R_a, R_b) -> float:
    c = (np.trace(np.asarray(R_a).T @ np.asarray(R_b)) - 1.0) / 2.0
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


def _actuate(sc: Scenario, U) -> dyn.Saturated:
    if sc.saturate:
        return dyn.saturate_input(sc.params, U)
    return dyn.Saturated(np.asarray(U, dtype=float), False, False)


def _stage_policy(sc: Scenario, view, drag_comp: bool):
    """Continuous-time control law ``(tau, x) -> U`` for stage-wise input evaluation."""
    params, gains = sc.params, sc.gains
    cache: dict = {}

    def policy(tau, x):
        d = cache.get(tau)
        if d is None:
            if len(cache) > 8:
                cache.clear()
            d = cache[tau] = flat_to_state(params, view.sample(tau), None, drag_comp, view)
        return _actuate(sc, control(params, gains, x, d, None, sc.law)).U

    return policy


def run_scenario(sc: Scenario, drag_comp: bool | None = None) -> TrajectoryLog:
    """Simulate the scenario; ``drag_comp`` overrides every hop's flag when given."""
    if drag_comp is not None:
        sc = sc.with_drag_comp(drag_comp)
    params, gains = sc.params, sc.gains
    dt_c = sc.dt_control
    n_sub = max(1, int(round(dt_c / sc.dt_physics)))
    dt_p = dt_c / n_sub
    n_stance = int(round(sc.stance.t_s / dt_c))

    state = np.array(sc.initial_state, dtype=float)
    rng = np.random.default_rng(sc.seed)
    kick = np.repeat(np.asarray(sc.lo_disturbance, dtype=float), 3)
    if sc.initial_noise > 0.0:
        state[dyn.POS] += rng.normal(0.0, sc.initial_noise, 3)
        state[dyn.VEL] += rng.normal(0.0, sc.initial_noise, 3)

    builder = _LogBuilder()
    hops: list[HopRecord] = []
    adapter = GammaAdapter(mu=sc.mu)
    t_hop = 0.0
    i_hop = 0
    eps = 1e-9

    t = 0.0
    try:
        while t_hop < sc.total_time - eps:
            plan = sc.hop(i_hop)
            td = resolve_touchdown(sc, plan, state, adapter)
            try:
                traj = make_hop_trajectory(
                    params, state, plan.ttype, td, plan.t_m, plan.delta_t, plan.drag_comp, plan.extras, plan.lo_U1
                )
            except HopTrajError as exc:
                raise GenerationFailure(i_hop, exc) from exc
            rec = HopRecord(i_hop, plan.ttype.value, t_hop, trajectory=traj.to_dict(), gamma=(adapter.gamma_phi, adapter.gamma_theta))
            hops.append(rec)
            view = _Extended(traj)
            if kick.any():
                state = state + rng.normal(0.0, 1.0, 12) * kick

            prev: FlatState | None = None
            policy = _stage_policy(sc, view, plan.drag_comp)
            if hops[:-1]:
                # hybrid bookkeeping for the preceding stance
                last = hops[-2]
                d0 = flat_to_state(params, traj.sample(0.0), None, plan.drag_comp, view)
                V_LO, _ = lyapunov_rate(gains, compute_errors(gains, state, d0))
                last.V_LO_next = V_LO
                if last.V_TD is not None:
                    last.delta_V = hybrid_check(last.V_TD, V_LO).delta_V

            k = 0
            contact = None
            t_limit = plan.t_m + sc.td_window
            guard = 0.1 * plan.t_m
            while True:
                tau = k * dt_c
                t = t_hop + tau
                if t >= sc.total_time - eps:
                    break
                try:
                    desired = flat_to_state(params, view.sample(tau), prev, plan.drag_comp, view)
                except HopTrajError as exc:
                    log.warning("hop %d: %s", i_hop, exc)
                    raise
                prev = desired
                err = compute_errors(gains, state, desired)
                V, Vd = lyapunov_rate(gains, err)
                sat = _actuate(sc, control(params, gains, state, desired, err, sc.law))
                builder.add(t, desired, state, sat.U, Phase.AERIAL, i_hop, sat.thrust_clamped, sat.rotor_saturated, V, Vd)

                for sub in range(n_sub):
                    if sc.input_hold == "stage":
                        new = dyn.integrate_feedback_step(params, state, tau + sub * dt_p, dt_p, policy)
                    else:
                        new = dyn.integrate_step(params, state, sat.U, dt_p)
                    t_new = t + (sub + 1) * dt_p
                    if tau + (sub + 1) * dt_p > guard:
                        for surf in sc.surfaces:
                            c = detect_touchdown(new, surf, sc.foot_len, state, t_new, t_new - dt_p)
                            if c.contact:
                                new = state + c.fraction * (new - state)
                                contact = (c.t, surf)
                                break
                    state = new
                    if contact:
                        break
                if contact:
                    break
                k += 1
                if k * dt_c > t_limit + eps:
                    break

            if contact is None and t_hop + k * dt_c < sc.total_time - eps:
                rec.forced_touchdown = True
                rec.warnings.append("no surface contact within the touchdown window; forcing touchdown")
                log.warning("hop %d: %s", i_hop, rec.warnings[-1])
            elif contact is None:
                break  # ran out of scenario time mid-flight

            t_TD = contact[0] if contact else t_hop + k * dt_c
            tau_TD = t_TD - t_hop
            if tau_TD < plan.t_m - sc.td_window:
                rec.early_touchdown = True
                rec.warnings.append(f"touchdown {plan.t_m - tau_TD:.3f} s before the keyframe time")
                log.warning("hop %d: %s", i_hop, rec.warnings[-1])

            d_TD = flat_to_state(params, traj.sample(plan.t_m), prev, plan.drag_comp, view)
            rec.t_TD = t_TD
            rec.td_state = state.copy()
            rec.td_desired = d_TD.x_d.copy()
            rec.td_position_error = float(np.linalg.norm(state[dyn.POS] - d_TD.x_d[dyn.POS]))
            rec.td_attitude_error_deg = rotation_angle_deg(dyn.euler_to_rotation(state[dyn.EULER]), td.rotation)
            rec.V_TD = lyapunov_rate(gains, compute_errors(gains, state, d_TD))[0]

            x_LO = stance_map(params, state, sc.stance, foot_len=sc.foot_len)
            rec.lo_state = x_LO.copy()
            if sc.adapt_gamma:
                phi_d, theta_d, _ = plan.attitude
                adapter = update_gamma(adapter, phi_d, float(x_LO[6]), "phi")
                adapter = update_gamma(adapter, theta_d, float(x_LO[7]), "theta")

            t_stance_end = t_TD + sc.stance.t_s
            for s in range(n_stance):
                ts = t_TD + s * dt_c
                if ts >= sc.total_time - eps:
                    break
                builder.add(ts, d_TD, state, np.zeros(4), Phase.STANCE, i_hop, False, False, rec.V_TD, 0.0)
            if t_stance_end > sc.total_time - eps:
                break
            rec.completed = True
            state = x_LO
            t_hop = t_stance_end
            i_hop += 1
    except SingularityError as exc:
        exc.t, exc.hop_index = t, i_hop
        log.error("t = %.4f s, hop %d: %s", t, i_hop, exc)
        raise

    first_flag = sc.hops[0].drag_comp if all(h.drag_comp == sc.hops[0].drag_comp for h in sc.hops) else None
    return builder.build(hops, first_flag, sc.name)


@dataclass
class RmseReport:
    rmse_pos: float
    rmse_vel: float
    rmse_pos_axis: np.ndarray
    rmse_vel_axis: np.ndarray
    n_samples: int
    per_hop: list = field(default_factory=list)
    drag_comp: bool | None = None

    def as_dict(self) -> dict:
        return {
            "rmse_pos": self.rmse_pos,
            "rmse_vel": self.rmse_vel,
            "rmse_pos_axis": self.rmse_pos_axis.tolist(),
            "rmse_vel_axis": self.rmse_vel_axis.tolist(),
            "n_samples": self.n_samples,
            "drag_comp": self.drag_comp,
            "per_hop": self.per_hop,
        }


def _rmse_arrays(desired, actual):
    e_pos = desired[:, dyn.POS] - actual[:, dyn.POS]
    e_vel = desired[:, dyn.VEL] - actual[:, dyn.VEL]
    return (
        float(np.sqrt(np.mean(np.sum(e_pos**2, axis=1)))),
        float(np.sqrt(np.mean(np.sum(e_vel**2, axis=1)))),
        np.sqrt(np.mean(e_pos**2, axis=0)),
        np.sqrt(np.mean(e_vel**2, axis=0)),
    )


def rmse(log_: TrajectoryLog) -> RmseReport:
    """RMSE of the position / velocity error norm over aerial ticks."""
    mask = log_.aerial
    if not mask.any():
        raise ValueError("log has no aerial samples")
    pos, vel, pos_ax, vel_ax = _rmse_arrays(log_.desired[mask], log_.actual[mask])
    per_hop = []
    for h in np.unique(log_.hop[mask]):
        m = mask & (log_.hop == h)
        p, v, _, _ = _rmse_arrays(log_.desired[m], log_.actual[m])
        per_hop.append({"hop": int(h), "rmse_pos": p, "rmse_vel": v, "n": int(m.sum())})
    return RmseReport(pos, vel, pos_ax, vel_ax, int(mask.sum()), per_hop, log_.drag_comp)


@dataclass
class DragComparison:
    on: RmseReport
    off: RmseReport
    log_on: TrajectoryLog
    log_off: TrajectoryLog

    @property
    def pos_gap(self) -> float:
        return self.off.rmse_pos - self.on.rmse_pos

    @property
    def vel_gap(self) -> float:
        return self.off.rmse_vel - self.on.rmse_vel


def compare_drag(sc: Scenario) -> DragComparison:
    """Run with and without drag compensation in the planner (plant drag stays on)."""
    log_on = run_scenario(sc, drag_comp=True)
    log_off = run_scenario(sc, drag_comp=False)
    return DragComparison(rmse(log_on), rmse(log_off), log_on, log_off)


def _fmt(v) -> str:
    return repr(float(v))


def emit_csv(log_: TrajectoryLog, path) -> Path:
    """One row per tick, columns :data:`CSV_COLUMNS`, shortest round-trip floats."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for i in range(len(log_)):
            row = [_fmt(log_.t[i])]
            row += [_fmt(v) for v in log_.desired[i]]
            row.append(_fmt(log_.U1_d[i]))
            row += [_fmt(v) for v in log_.actual[i]]
            row += [_fmt(v) for v in log_.U[i]]
            row.append(log_.phase[i])
            row.append(_fmt(log_.V[i]))
            w.writerow(row)
    return path


def read_csv(path) -> TrajectoryLog:
    """Parse a log written by :func:`emit_csv` (per-hop metadata is not stored)."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header = tuple(rows[0])
    if header != CSV_COLUMNS:
        raise ValueError("unexpected CSV header")
    body = rows[1:]
    n = len(body)
    num = np.array([[float(v) for i, v in enumerate(r) if header[i] != "phase"] for r in body], dtype=float).reshape(n, len(header) - 1)
    phase = np.array([r[header.index("phase")] for r in body], dtype=object)
    return TrajectoryLog(
        t=num[:, 0],
        desired=num[:, 1:13],
        U1_d=num[:, 13],
        actual=num[:, 14:26],
        U=num[:, 26:30],
        phase=phase,
        hop=np.zeros(n, dtype=int),
        thrust_clamped=np.zeros(n, dtype=bool),
        rotor_saturated=np.zeros(n, dtype=bool),
        V=num[:, 30],
        V_dot_design=np.zeros(n),
    )


def emit_plot_data(log_: TrajectoryLog, out_dir, stem: str) -> list[Path]:
    """Plane projections and state histories for the three figure panels."""
    out_dir = Path(out_dir)
    paths = []
    d, a = log_.desired, log_.actual
    for name, (i, j) in {"zx": (0, 2), "yx": (0, 1)}.items():
        p = out_dir / f"{stem}_plane_{name}.csv"
        h = {0: "x", 1: "y", 2: "z"}
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", f"d_{h[i]}", f"d_{h[j]}", h[i], h[j], "phase"])
            for k in range(len(log_)):
                w.writerow([_fmt(log_.t[k]), _fmt(d[k, i]), _fmt(d[k, j]), _fmt(a[k, i]), _fmt(a[k, j]), log_.phase[k]])
        paths.append(p)
    p = out_dir / f"{stem}_states.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "hop", "phase"] + list(STATE_NAMES) + ["U1", "U2", "U3", "U4", "V", "V_dot_design"])
        for k in range(len(log_)):
            w.writerow(
                [_fmt(log_.t[k]), int(log_.hop[k]), log_.phase[k]]
                + [_fmt(v) for v in a[k]]
                + [_fmt(v) for v in log_.U[k]]
                + [_fmt(log_.V[k]), _fmt(log_.V_dot_design[k])]
            )
    paths.append(p)
    return paths


def hop_summary(log_: TrajectoryLog) -> list[dict]:
    out = []
    for h in log_.hops:
        out.append({
            "hop": h.index,
            "type": h.ttype,
            "t_LO": h.t_LO,
            "t_TD": h.t_TD,
            "completed": h.completed,
            "td_position_error_m": h.td_position_error,
            "td_attitude_error_deg": h.td_attitude_error_deg,
            "V_TD": h.V_TD,
            "V_LO_next": h.V_LO_next,
            "delta_V": h.delta_V,
            "gamma": list(h.gamma),
            "theta_TD": None if h.td_state is None else h.theta_TD,
            "theta_LO": None if h.lo_state is None else h.theta_LO,
            "warnings": h.warnings,
        })
    return out
