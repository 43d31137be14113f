"""Keyframe polynomial trajectories from liftoff to touchdown.

Each flat output ``j`` in ``(x, y, z, psi)`` is a single monomial polynomial
over ``[0, t_m]`` pinned by three keyframes: liftoff (t = 0), reorientation
(``t_1 = t_m - delta_t``, acceleration only) and touchdown (``t_m``).  The
polynomial order is one less than the number of pinned entries, so the base
system is square.  ``n_star`` extra orders add a null space that can bend the
path through additional samples without moving any keyframe value.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy import optimize

from . import dynamics as dyn
from .errors import (
    ConditioningError,
    ConstraintPatternError,
    DomainError,
    HopTrajError,
    InfeasibleTrajectoryError,
)
from .flatness import EPS_THRUST_FRACTION, FlatSample, flat_heading, thrust_attitude
from .params import RobotParams

OUTPUTS = ("x", "y", "z", "psi")
N_DERIV = 4  # value, velocity, acceleration, jerk
MAX_CONDITION = 1e12
DEFAULT_N_STAR = 2
U1_LO_FRACTION = 0.9
U1_TD_FRACTION = 0.2


class TrajectoryType(enum.Enum):
    T1 = "T1"  # touchdown on horizontal surface, TD x, y free
    T2 = "T2"  # touchdown on vertical surface, TD z free
    T3 = "T3"  # touchdown at a fully specified state


def _mask(ttype: TrajectoryType) -> np.ndarray:
    """Desired flags, indexed ``[keyframe, output, derivative]``."""
    m = np.zeros((3, 4, N_DERIV), dtype=bool)
    m[0, :3, :] = True
    m[0, 3, :2] = True
    m[1, :3, 2] = True
    m[2, :3, :] = True
    m[2, 3, :2] = True
    if ttype is TrajectoryType.T1:
        m[2, :2, 0] = False
    elif ttype is TrajectoryType.T2:
        m[2, 2, 0] = False
    m.setflags(write=False)
    return m


DESIRED_MASKS = {t: _mask(t) for t in TrajectoryType}


def as_type(ttype) -> TrajectoryType:
    return ttype if isinstance(ttype, TrajectoryType) else TrajectoryType(str(ttype))


@dataclass
class Keyframe:
    """Timed values ``[output, derivative]`` with a desired/free flag per entry."""

    t: float
    values: np.ndarray
    desired: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(4, N_DERIV)
        self.desired = np.asarray(self.desired, dtype=bool).reshape(4, N_DERIV)


@dataclass(frozen=True)
class ExtraConstraint:
    t: float
    j: int
    k: int
    value: float


@dataclass
class TouchdownSpec:
    """Desired touchdown.  ``position`` entries may be ``None`` where free."""

    position: Sequence[float | None]
    attitude: Sequence[float] = (0.0, 0.0, 0.0)  # ZYX Euler (rad)
    v_TD: float = 5.0
    U1_TD: float | None = None
    psi_TD: float | None = None

    def __post_init__(self):
        if self.v_TD <= 0:
            raise ValueError("v_TD must be positive")
        if self.U1_TD is not None and self.U1_TD < 0:
            raise ValueError("U1_TD must be non-negative")

    @property
    def rotation(self) -> np.ndarray:
        return dyn.euler_to_rotation(self.attitude)

    @property
    def yaw(self) -> float:
        """Flat-output yaw; by default the heading of the touchdown attitude."""
        return flat_heading(self.rotation) if self.psi_TD is None else float(self.psi_TD)


def keyframe_times(keyframes: Sequence[Keyframe]) -> tuple[float, float, float]:
    return tuple(float(kf.t) for kf in keyframes)


def check_pattern(ttype, keyframes: Sequence[Keyframe]) -> None:
    mask = DESIRED_MASKS[as_type(ttype)]
    if len(keyframes) != 3:
        raise ConstraintPatternError("exactly three keyframes are required")
    for i, kf in enumerate(keyframes):
        if not np.array_equal(kf.desired, mask[i]):
            raise ConstraintPatternError(
                f"keyframe {i} flags do not match {as_type(ttype).value}"
            )
    t0, t1, t2 = keyframe_times(keyframes)
    if t0 != 0.0:
        raise ConstraintPatternError("first keyframe must sit at t = 0")
    if not 0.0 < t1 < t2:
        raise ConstraintPatternError("keyframe times must satisfy 0 < t1 < t2")


def make_keyframes(ttype, t1, t2, alpha0, alpha1, alpha2) -> list[Keyframe]:
    """Keyframes with the Table-style desired flags of ``ttype``."""
    mask = DESIRED_MASKS[as_type(ttype)]
    vals = [np.nan_to_num(np.asarray(a, dtype=float).reshape(4, N_DERIV)) for a in (alpha0, alpha1, alpha2)]
    return [Keyframe(t, v, mask[i]) for i, (t, v) in enumerate(zip((0.0, t1, t2), vals))]


def monomial_row(t: float, k: int, ncols: int) -> np.ndarray:
    """``d^k/dt^k [1, t, ..., t^(ncols-1)]``."""
    row = np.zeros(ncols)
    for i in range(k, ncols):
        row[i] = math.perm(i, k) * t ** (i - k)
    return row


def _constraint_rows(mask, times, j):
    return [(times[i], k) for i in range(3) for k in range(N_DERIV) if mask[i, j, k]]


@lru_cache(maxsize=256)
def _structure(ttype: TrajectoryType, t1: float, t2: float, j: int, n_star: int):
    """Factorised base system and orthonormal null-space basis for one output."""
    rows = _constraint_rows(DESIRED_MASKS[ttype], (0.0, t1, t2), j)
    P_wide = np.array([monomial_row(t, k, len(rows) + n_star) for t, k in rows])
    return _factor(P_wide[:, : len(rows)]), _null_basis(P_wide, n_star)


def _factor(P):
    n = P.shape[0]
    # column equilibration; monomials of different degree differ by orders of magnitude
    scale = 1.0 / np.max(np.abs(P), axis=0)
    Ps = P * scale
    lu = sla.lu_factor(Ps, check_finite=False)
    rcond = _rcond(Ps, lu)
    cond = np.inf if rcond == 0.0 else 1.0 / rcond
    return lu, scale, cond, n


def _rcond(A, lu):
    anorm = np.max(np.sum(np.abs(A), axis=0))
    gecon = sla.get_lapack_funcs("gecon", (lu[0],))
    rcond, info = gecon(lu[0], anorm, norm="1")
    return float(rcond)


def _null_basis(P_wide, n_star):
    n = P_wide.shape[0]
    if n_star == 0:
        return np.zeros((n, 0))
    lu, scale, cond, _ = _factor(P_wide[:, :n])
    if cond > MAX_CONDITION:
        raise ConditioningError("base constraint system is singular", cond)
    X = -scale[:, None] * sla.lu_solve(lu, P_wide[:, n:], check_finite=False)
    N0 = np.vstack([X, np.eye(n_star)])
    Q, _ = np.linalg.qr(N0)
    return Q


def build_system(ttype, keyframes: Sequence[Keyframe], j: int, n_star: int = 0):
    """Constraint matrix and right-hand side for output ``j``.

    Rows follow keyframe order, then derivative order, skipping free entries.
    With ``n_star = 0`` the matrix is square; otherwise it is widened by
    ``n_star`` higher-order columns.
    """
    ttype = as_type(ttype)
    check_pattern(ttype, keyframes)
    times = keyframe_times(keyframes)
    rows = _constraint_rows(DESIRED_MASKS[ttype], times, j)
    P = np.array([monomial_row(t, k, len(rows) + n_star) for t, k in rows])
    nu = np.array([keyframes[i].values[j, k] for i in range(3) for k in range(N_DERIV) if keyframes[i].desired[j, k]])
    return P, nu


def solve_base(P, nu) -> np.ndarray:
    """Coefficients of the square base system ``P c = nu``."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("base system must be square")
    lu, scale, cond, _ = _factor(P)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise ConditioningError("base constraint system is singular or ill-conditioned", cond)
    return scale * sla.lu_solve(lu, np.asarray(nu, dtype=float), check_finite=False)


def null_space_basis(ttype, keyframes: Sequence[Keyframe], n_star: int, j: int) -> np.ndarray:
    """Orthonormal basis (columns) of the widened constraint matrix null space."""
    if n_star < 1:
        raise ValueError("n_star must be at least 1")
    P_wide, _ = build_system(ttype, keyframes, j, n_star)
    N = _null_basis(P_wide, n_star)
    if N.shape[1] != n_star or np.linalg.matrix_rank(P_wide) != P_wide.shape[0]:
        raise ConditioningError("constraint matrix lost rank")
    return N


def extra_rows(extras: Sequence[ExtraConstraint], ncols: int):
    P_N = np.array([monomial_row(e.t, e.k, ncols) for e in extras]).reshape(len(extras), ncols)
    nu = np.array([e.value for e in extras], dtype=float)
    return P_N, nu


def solve_null_coefficients(P_N, N_l, c_star_padded, nu_extra, jitter: float = 1e-12) -> np.ndarray:
    """Null-space weights that best fit the extra samples.

    Solves ``(M1^T M1) c_N = M1^T M2`` with ``M1 = P_N N_l`` and
    ``M2 = nu_extra - P_N c_star_padded``.  When there are fewer extras than
    basis vectors the normal matrix is rank deficient by construction, so
    the smallest-norm exact fit ``M1^T (M1 M1^T)^-1 M2`` is used instead.
    """
    P_N = np.atleast_2d(np.asarray(P_N, dtype=float))
    N_l = np.asarray(N_l, dtype=float)
    s, n_star = P_N.shape[0], N_l.shape[1]
    if s == 0:
        raise ValueError("at least one extra constraint is required")
    M1 = P_N @ N_l
    M2 = np.asarray(nu_extra, dtype=float) - P_N @ np.asarray(c_star_padded, dtype=float)
    G = M1.T @ M1
    b = M1.T @ M2

    sv = np.linalg.svd(M1, compute_uv=False)
    expected = min(s, n_star)
    if sv[0] == 0.0 or (expected > 1 and sv[expected - 1] < 1e-10 * sv[0]):
        raise ConditioningError(
            "extra constraints are dependent in the null-space image",
            np.inf if sv[expected - 1] == 0 else float(sv[0] / sv[expected - 1]),
        )
    if s < n_star:
        # underdetermined: minimum-norm exact fit via the s x s dual system,
        # which avoids squaring the condition number of a rank deficient G
        H = M1 @ M1.T
        H = H + jitter * np.trace(H) * np.eye(s)
        try:
            cf = sla.cho_factor(H, check_finite=False)
        except np.linalg.LinAlgError:
            raise ConditioningError("null-space normal equations are singular") from None
        return M1.T @ sla.cho_solve(cf, M2, check_finite=False)
    try:
        cf = sla.cho_factor(G, check_finite=False)
    except np.linalg.LinAlgError:
        raise ConditioningError("null-space normal equations are singular") from None
    return sla.cho_solve(cf, b, check_finite=False)


@dataclass
class PolynomialTrajectory:
    """Piecewise-free polynomial per flat output over ``[0, t_m]``.

    ``coeffs[j]`` holds monomial coefficients ``a_0 .. a_(n_j + n_star)``.
    """

    coeffs: list
    orders: tuple
    n_star: int
    t1: float
    t2: float
    ttype: TrajectoryType = TrajectoryType.T3
    drag_comp: bool = True
    keyframes: list = field(default_factory=list, repr=False)
    extras: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.coeffs = [np.asarray(c, dtype=float) for c in self.coeffs]
        self.ttype = as_type(self.ttype)
        width = max(len(c) for c in self.coeffs)
        n_k = max(width, 5)
        # _deriv[k, j, i] = d^k/dt^k coefficient of t^i for output j
        self._deriv = np.zeros((n_k, 4, width))
        for j, c in enumerate(self.coeffs):
            for k in range(n_k):
                for i in range(len(c) - k):
                    self._deriv[k, j, i] = c[i + k] * math.perm(i + k, k)
        self._width = width

    t_start = 0.0

    @property
    def t_end(self) -> float:
        return self.t2

    @property
    def t_m(self) -> float:
        return self.t2

    def _check(self, t, extrapolate):
        if not extrapolate and not (0.0 <= t <= self.t2):
            raise DomainError(f"t = {t} outside [0, {self.t2}]")

    def evaluate(self, t: float, j: int, k: int = 0, extrapolate: bool = False) -> float:
        self._check(t, extrapolate)
        if k >= self._deriv.shape[0]:
            return 0.0
        powers = float(t) ** np.arange(self._width)
        return float(self._deriv[k, j] @ powers)

    def derivatives(self, t: float, kmax: int = 4, extrapolate: bool = False) -> np.ndarray:
        """Array ``[k, j]`` of all outputs and derivatives ``0..kmax`` at ``t``."""
        self._check(t, extrapolate)
        powers = float(t) ** np.arange(self._width)
        return self._deriv[: kmax + 1] @ powers

    def evaluate_many(self, ts, j: int, k: int = 0) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if k >= self._deriv.shape[0]:
            return np.zeros_like(ts)
        V = ts[:, None] ** np.arange(self._width)
        return V @ self._deriv[k, j]

    def sample(self, t: float, extrapolate: bool = False) -> FlatSample:
        d = self.derivatives(t, 4, extrapolate)
        return FlatSample(
            t=float(t),
            r=d[0, :3].copy(),
            r_dot=d[1, :3].copy(),
            r_ddot=d[2, :3].copy(),
            r_jerk=d[3, :3].copy(),
            r_snap=d[4, :3].copy(),
            psi=float(d[0, 3]),
            psi_dot=float(d[1, 3]),
            psi_ddot=float(d[2, 3]),
        )

    def keyframe_residuals(self) -> np.ndarray:
        """Evaluated minus desired value for every desired keyframe entry."""
        out = []
        for kf in self.keyframes:
            for j in range(4):
                for k in range(N_DERIV):
                    if kf.desired[j, k]:
                        out.append(self.evaluate(kf.t, j, k) - kf.values[j, k])
        return np.array(out)

    def to_dict(self) -> dict:
        return {
            "type": self.ttype.value,
            "t1": self.t1,
            "t2": self.t2,
            "n_star": self.n_star,
            "orders": list(self.orders),
            "drag_comp": self.drag_comp,
            "coefficients": {name: c.tolist() for name, c in zip(OUTPUTS, self.coeffs)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "PolynomialTrajectory":
        return cls(
            coeffs=[d["coefficients"][name] for name in OUTPUTS],
            orders=tuple(d["orders"]),
            n_star=d["n_star"],
            t1=d["t1"],
            t2=d["t2"],
            ttype=TrajectoryType(d["type"]),
            drag_comp=d.get("drag_comp", True),
        )


def solve_trajectory(
    ttype,
    keyframes: Sequence[Keyframe],
    n_star: int = DEFAULT_N_STAR,
    extras: Sequence[ExtraConstraint] = (),
    drag_comp: bool = True,
    use_cache: bool = True,
) -> PolynomialTrajectory:
    """Base solve plus (optional) null-space shaping for all four outputs."""
    ttype = as_type(ttype)
    check_pattern(ttype, keyframes)
    _, t1, t2 = keyframe_times(keyframes)
    for e in extras:
        if not 0.0 <= e.t <= t2:
            raise DomainError(f"extra constraint time {e.t} outside [0, {t2}]")
        if any(abs(e.t - tk) < 1e-12 for tk in (0.0, t1, t2)):
            raise ValueError("extra constraints may not sit on keyframe times")
    coeffs, orders = [], []
    for j in range(4):
        if use_cache:
            (lu, scale, cond, n), N_l = _structure(ttype, float(t1), float(t2), j, n_star)
        else:
            P_wide, _ = build_system(ttype, keyframes, j, n_star)
            n = P_wide.shape[0]
            lu, scale, cond, _ = _factor(P_wide[:, :n])
            N_l = _null_basis(P_wide, n_star)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise ConditioningError(f"base system for output {OUTPUTS[j]} is ill-conditioned", cond)
        kf = keyframes
        nu = np.array([kf[i].values[j, k] for i in range(3) for k in range(N_DERIV) if kf[i].desired[j, k]])
        c = np.zeros(n + n_star)
        c[:n] = scale * sla.lu_solve(lu, nu, check_finite=False)
        mine = [e for e in extras if e.j == j]
        if mine and n_star > 0:
            P_N, nu_x = extra_rows(mine, n + n_star)
            c = c + N_l @ solve_null_coefficients(P_N, N_l, c, nu_x)
        coeffs.append(c)
        orders.append(n - 1)
    return PolynomialTrajectory(coeffs, tuple(orders), n_star, float(t1), float(t2), ttype, drag_comp, list(keyframes), list(extras))


def liftoff_keyframe(params: RobotParams, lo_state, lo_U1: float | None = None, drag_comp: bool = False) -> np.ndarray:
    """Liftoff keyframe values from the (estimated) liftoff state.

    With ``drag_comp`` the acceleration carries the drag force so that the
    flatness attitude at liftoff equals the measured attitude.
    """
    x = np.asarray(lo_state, dtype=float)
    U1 = U1_LO_FRACTION * params.weight if lo_U1 is None else lo_U1
    R = dyn.euler_to_rotation(x[dyn.EULER])
    vals = np.zeros((4, N_DERIV))
    vals[:3, 0] = x[dyn.POS]
    vals[:3, 1] = x[dyn.VEL]
    vals[:3, 2] = U1 / params.m_r * R[:, 2] - params.g * dyn.Z_W
    if drag_comp:
        vals[:3, 2] -= dyn.translational_drag(params, R, x[dyn.VEL]) / params.m_r
    vals[3, 0], vals[3, 1] = flat_heading(R, x[dyn.RATES])
    return vals


def touchdown_keyframe(params: RobotParams, ttype, td: TouchdownSpec, drag_comp: bool = True) -> np.ndarray:
    """Touchdown keyframe values; velocity aligned with the desired body z-axis."""
    mask = DESIRED_MASKS[as_type(ttype)][2]
    R_d = td.rotation
    z_Bd = R_d[:, 2]
    U1 = U1_TD_FRACTION * params.weight if td.U1_TD is None else td.U1_TD
    vel = -td.v_TD * z_Bd
    acc = U1 / params.m_r * z_Bd - params.g * dyn.Z_W
    if drag_comp:
        acc = acc - dyn.translational_drag(params, R_d, vel) / params.m_r
    vals = np.zeros((4, N_DERIV))
    for i in range(3):
        p = td.position[i]
        if p is None:
            if mask[i, 0]:
                raise ConstraintPatternError(f"touchdown {OUTPUTS[i]} is required for {as_type(ttype).value}")
            p = np.nan
        vals[i, 0] = p
    vals[:3, 1] = vel
    vals[:3, 2] = acc
    vals[3, 0] = td.yaw
    return vals


def make_hop_trajectory(
    params: RobotParams,
    lo_state,
    ttype,
    td: TouchdownSpec,
    t_m: float,
    delta_t: float,
    drag_comp: bool = True,
    extras: Sequence[ExtraConstraint] = (),
    lo_U1: float | None = None,
    n_star: int = DEFAULT_N_STAR,
    check_thrust: bool = True,
    use_cache: bool = True,
) -> PolynomialTrajectory:
    """Liftoff-to-touchdown trajectory through the three hop keyframes."""
    if not 0.0 < delta_t < t_m:
        raise ValueError("need 0 < delta_t < t_m")
    ttype = as_type(ttype)
    a0 = liftoff_keyframe(params, lo_state, lo_U1, drag_comp)
    a2 = touchdown_keyframe(params, ttype, td, drag_comp)
    a1 = np.zeros((4, N_DERIV))
    a1[:3, 2] = a2[:3, 2]
    kfs = make_keyframes(ttype, t_m - delta_t, t_m, a0, a1, a2)
    traj = solve_trajectory(ttype, kfs, n_star, extras, drag_comp, use_cache)
    if check_thrust:
        check_thrust_feasible(params, traj)
    return traj


def check_thrust_feasible(params: RobotParams, traj: PolynomialTrajectory, n_points: int = 100) -> None:
    """Reject trajectories that ask for (near) zero thrust anywhere."""
    ts = np.linspace(0.0, traj.t2, n_points)
    acc = np.column_stack([traj.evaluate_many(ts, j, 2) for j in range(3)])
    a = acc + params.g * dyn.Z_W
    if traj.drag_comp and params.C_T.any():
        # isotropic-magnitude estimate; exact attitude not needed for a thrust floor
        vel = np.column_stack([traj.evaluate_many(ts, j, 1) for j in range(3)])
        drag = np.linalg.norm(params.C_T, 2) * vel * vel / params.m_r
        U1 = params.m_r * (np.linalg.norm(a, axis=1) - np.linalg.norm(drag, axis=1))
    else:
        U1 = params.m_r * np.linalg.norm(a, axis=1)
    floor = EPS_THRUST_FRACTION * params.weight
    suspect = np.flatnonzero(U1 < floor)
    if suspect.size and traj.drag_comp and params.C_T.any():
        # the drag bound is loose; confirm with the exact thrust
        exact = []
        for i in suspect:
            try:
                exact.append(thrust_attitude(params, traj.sample(float(ts[i])))[0])
            except HopTrajError:
                exact.append(0.0)
        suspect = suspect[np.asarray(exact) < floor]
    if suspect.size:
        i = int(suspect[np.argmin(U1[suspect])])
        raise InfeasibleTrajectoryError("trajectory passes through free-fall thrust", float(ts[i]))

    # the thrust vector reversing between two samples means it may pass
    # through zero in between; locate the minimum magnitude there
    flips = np.flatnonzero(np.einsum("ij,ij->i", a[:-1], a[1:]) < 0.0)
    for i in flips:
        def mag(t):
            return float(np.linalg.norm([traj.evaluate(t, j, 2) for j in range(3)] + params.g * dyn.Z_W))

        res = optimize.minimize_scalar(mag, bounds=(ts[i], ts[i + 1]), method="bounded", options={"xatol": 1e-10})
        t_min = float(res.x)
        U1_min = params.m_r * res.fun
        if traj.drag_comp and params.C_T.any():
            try:
                U1_min = thrust_attitude(params, traj.sample(t_min))[0]
            except HopTrajError:
                U1_min = 0.0
        if U1_min < floor:
            raise InfeasibleTrajectoryError("trajectory passes through free-fall thrust", t_min)
