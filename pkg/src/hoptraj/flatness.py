"""Flat outputs (position, yaw and derivatives) to full desired state.

The attitude comes from the thrust direction ``a = r'' + g z_W + D_T / m``,
the body rates from the drag-adjusted jerk, and the angular acceleration
from a central difference of the body-rate map along the trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import dynamics as dyn
from .errors import DomainError, SingularityError
from .params import RobotParams

EPS_ACCEL = 1e-6
EPS_YAW_ALIGN = 1e-6
EPS_THRUST_FRACTION = 1e-4

JERK_MODES = ("full", "symmetric", "previous-omega")


@dataclass
class FlatSample:
    t: float
    r: np.ndarray
    r_dot: np.ndarray
    r_ddot: np.ndarray
    r_jerk: np.ndarray = field(default_factory=lambda: np.zeros(3))
    r_snap: np.ndarray = field(default_factory=lambda: np.zeros(3))
    psi: float = 0.0
    psi_dot: float = 0.0
    psi_ddot: float = 0.0

    def __post_init__(self):
        for name in ("r", "r_dot", "r_ddot", "r_jerk", "r_snap"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))

    @classmethod
    def hover(cls, r=(0.0, 0.0, 0.0), psi=0.0, t=0.0) -> "FlatSample":
        z = np.zeros(3)
        return cls(t, np.asarray(r, dtype=float), z, z, z, z, psi)


@dataclass
class FlatState:
    """Desired 12-state, accelerations ``[r'', p', q', r']`` and feedforward thrust."""

    x_d: np.ndarray
    x_dd: np.ndarray
    U1_d: float
    R: np.ndarray
    t: float = 0.0

    @property
    def omega(self) -> np.ndarray:
        return self.x_d[dyn.RATES]


def _skew(w) -> np.ndarray:
    x, y, z = w
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _frame(ax, ay, az, c, s, t):
    # columns x_B, y_B, z_B flattened row-major, as plain floats
    norm = math.sqrt(ax * ax + ay * ay + az * az)
    if norm <= EPS_ACCEL:
        raise SingularityError("free-fall singularity: thrust direction undefined", t)
    zx, zy, zz = ax / norm, ay / norm, az / norm
    # y_B = z_B x x_psi
    yx, yy, yz = -zz * s, zz * c, zx * s - zy * c
    ny = math.sqrt(yx * yx + yy * yy + yz * yz)
    if ny <= EPS_YAW_ALIGN:
        raise SingularityError("yaw-alignment singularity: z_B parallel to heading", t)
    yx, yy, yz = yx / ny, yy / ny, yz / ny
    # x_B = y_B x z_B keeps the frame right-handed
    xx, xy, xz = yy * zz - yz * zy, yz * zx - yx * zz, yx * zy - yy * zx
    return (xx, yx, zx, xy, yy, zy, xz, yz, zz)


def attitude_from_thrust(a_U1, psi, t=None) -> np.ndarray:
    """Rotation whose z-axis is along ``a_U1`` with heading set by ``psi``."""
    ax, ay, az = (float(v) for v in a_U1)
    return np.array(_frame(ax, ay, az, math.cos(psi), math.sin(psi), t)).reshape(3, 3)


def flat_heading(R_BW, omega=None):
    """Flat-output yaw of an attitude, and its rate when ``omega`` is given.

    Inverse of the heading convention of :func:`attitude_from_thrust`
    (``y_B`` orthogonal to ``x_psi``); equals the ZYX yaw at zero roll.
    """
    R = np.asarray(R_BW)
    yx, yy = float(R[0, 1]), float(R[1, 1])
    psi = math.atan2(-yx, yy)
    if omega is None:
        return psi
    p, _, r = omega
    # d/dt y_B = R (w x e2) = R (-r, 0, p)
    dyx = -r * float(R[0, 0]) + p * float(R[0, 2])
    dyy = -r * float(R[1, 0]) + p * float(R[1, 2])
    return psi, (yx * dyy - yy * dyx) / (yx * yx + yy * yy)


def thrust_attitude(
    params: RobotParams,
    sample: FlatSample,
    R_prev=None,
    drag_comp: bool = True,
    max_iter: int = 50,
    tol: float = 1e-11,
) -> tuple[float, np.ndarray]:
    """Feedforward thrust ``U1`` and attitude ``R_BW`` for a flat sample.

    With ``drag_comp`` the drag term depends on the attitude it helps define;
    that loop is closed by fixed-point iteration warm-started from ``R_prev``
    (or the drag-free attitude), stopping once the attitude moves less than
    ``tol`` (max-abs entry change) or after ``max_iter`` passes.
    """
    m = params.m_r
    a0 = sample.r_ddot + params.g * dyn.Z_W
    if not drag_comp or not params.C_T.any():
        R = attitude_from_thrust(a0, sample.psi, sample.t)
        return m * float(np.linalg.norm(a0)), R

    t = sample.t
    c, s = math.cos(sample.psi), math.sin(sample.psi)
    v = sample.r_dot
    # D_T = sign(v) * (R w) with w = C_T v^2 fixed for this sample
    wx, wy, wz = (float(e) for e in params.C_T @ (v * v))
    sx, sy, sz = (float(e) / m for e in np.sign(v))
    a0x, a0y, a0z = (float(e) for e in a0)
    if R_prev is None:
        F = _frame(a0x, a0y, a0z, c, s, t)
    else:
        F = tuple(float(e) for e in np.asarray(R_prev).ravel())
    for _ in range(max_iter):
        r0, r1, r2, r3, r4, r5, r6, r7, r8 = F
        G = _frame(
            a0x + sx * (r0 * wx + r1 * wy + r2 * wz),
            a0y + sy * (r3 * wx + r4 * wy + r5 * wz),
            a0z + sz * (r6 * wx + r7 * wy + r8 * wz),
            c, s, t,
        )
        change = max(abs(g - f) for g, f in zip(G, F))
        F = G
        if change < tol:
            break
    else:
        # drag comparable to thrust: the plain iteration need not contract
        F = _solve_thrust_vector(a0, (sx, sy, sz), (wx, wy, wz), c, s, t, tol, F)
    R = np.array(F).reshape(3, 3)
    a = a0 + dyn.translational_drag(params, R, v) / m
    return m * float(np.linalg.norm(a)), R


def _solve_thrust_vector(a0, sgn, w, c, s, t, tol, last=None):
    """Root of ``a = a0 + sign(v)/m o (R(a) w)`` by Powell's hybrid method.

    Several deterministic starts; among the roots found the one closest to
    the drag-free thrust vector is kept.
    """
    a0 = np.asarray(a0, dtype=float)
    sgn, w = np.asarray(sgn), np.asarray(w)

    def resid(a):
        R = np.array(_frame(a[0], a[1], a[2], c, s, t)).reshape(3, 3)
        return a - a0 - sgn * (R @ w)

    starts = [a0, a0 + sgn * w, a0 - sgn * w]
    if last is not None:
        R = np.array(last).reshape(3, 3)
        starts.append(a0 + sgn * (R @ w))
    best = None
    for x0 in starts:
        try:
            sol = optimize.root(resid, x0, method="hybr", options={"xtol": 1e-14})
            ok = sol.success and np.abs(resid(sol.x)).max() <= 1e-10 * (1.0 + np.linalg.norm(a0))
        except SingularityError:
            ok = False
        if ok and (best is None or np.linalg.norm(sol.x - a0) < np.linalg.norm(best - a0)):
            best = sol.x
    if best is None:
        raise SingularityError("thrust direction and drag admit no consistent attitude", t)
    return _frame(best[0], best[1], best[2], c, s, t)


def drag_adjusted_jerk(params: RobotParams, sample: FlatSample, R_BW, omega_est, mode="previous-omega"):
    """Jerk plus the time derivative of the drag force divided by mass.

    ``full`` and ``previous-omega`` evaluate the same expression for a given
    body-rate estimate; ``full`` is resolved self-consistently by
    :func:`body_rates`.  ``symmetric`` uses the scalar drag shortcut and
    ignores the attitude rate.  The Dirac term at velocity zero crossings is
    dropped.
    """
    if mode not in JERK_MODES:
        raise ValueError(f"unknown jerk mode {mode!r}")
    m = params.m_r
    v, a = sample.r_dot, sample.r_ddot
    if mode == "symmetric":
        c = float(np.trace(params.C_T)) / 3.0
        return sample.r_jerk + np.sign(v) * (2.0 * c * v * a) / m
    R = np.asarray(R_BW)
    R_dot = R @ _skew(omega_est)
    drag_rate = (R_dot @ params.C_T) @ (v * v) + 2.0 * ((R @ params.C_T) @ (v * a))
    return sample.r_jerk + np.sign(v) * drag_rate / m


def angular_velocity(params: RobotParams, sample: FlatSample, U1, R_BW, r_jerk_star, yaw_rate="exact"):
    """Body rates ``(p, q, r)`` from the drag-adjusted jerk.

    ``p`` and ``q`` come from the projection of the jerk orthogonal to
    ``z_B``.  ``yaw_rate="projected"`` uses ``r = psi_dot z_W . z_B``;
    ``"exact"`` differentiates the heading constraint ``y_B . x_psi = 0``
    instead, which agrees with the projected form whenever the body x-axis
    stays in the heading plane and is otherwise the consistent choice.
    """
    if U1 <= EPS_THRUST_FRACTION * params.m_r * params.g:
        raise SingularityError(f"near-zero thrust singularity (U1 = {U1:.3e} N)", sample.t)
    R = np.asarray(R_BW)
    x_B, y_B, z_B = R[:, 0], R[:, 1], R[:, 2]
    j = np.asarray(r_jerk_star, dtype=float)
    h_w = params.m_r / U1 * (j - (z_B @ j) * z_B)
    p = -float(h_w @ y_B)
    q = float(h_w @ x_B)
    if yaw_rate == "projected":
        r = sample.psi_dot * float(z_B[2])
    elif yaw_rate == "exact":
        cs, sn = math.cos(sample.psi), math.sin(sample.psi)
        x_psi = np.array([cs, sn, 0.0])
        y_psi = np.array([-sn, cs, 0.0])
        r = (p * float(z_B @ x_psi) + sample.psi_dot * float(y_B @ y_psi)) / float(x_B @ x_psi)
    else:
        raise ValueError(f"unknown yaw_rate option {yaw_rate!r}")
    return np.array([p, q, r])


def body_rates(
    params: RobotParams,
    sample: FlatSample,
    U1,
    R_BW,
    omega_est=None,
    drag_comp=True,
    mode="full",
    yaw_rate="exact",
) -> np.ndarray:
    """Drag-adjusted jerk followed by :func:`angular_velocity`.

    In ``full`` mode the rates inside the drag derivative are the returned
    rates themselves; both maps are affine in the rates, so this is a 3x3
    linear solve and ``omega_est`` is ignored.
    """
    w = np.zeros(3) if omega_est is None else np.asarray(omega_est, dtype=float)
    if not drag_comp or not params.C_T.any():
        return angular_velocity(params, sample, U1, R_BW, sample.r_jerk, yaw_rate)
    if mode != "full":
        jerk = drag_adjusted_jerk(params, sample, R_BW, w, mode)
        return angular_velocity(params, sample, U1, R_BW, jerk, yaw_rate)
    return _consistent_rates(params, sample, U1, R_BW, yaw_rate)


def _consistent_rates(params, sample, U1, R_BW, yaw_rate):
    # Both maps are affine: jerk* = j0 + J w and w = M jerk* + c, so the
    # self-consistent rates solve (I - M J) w = M j0 + c.
    R = np.asarray(R_BW)
    v = sample.r_dot
    j0 = drag_adjusted_jerk(params, sample, R, np.zeros(3), "full")
    # (R w^ C_T) v^2 = R (w x C_T v^2) = -R [C_T v^2]^ w
    J = -(np.sign(v)[:, None] * (R @ _skew(params.C_T @ (v * v)))) / params.m_r
    b = angular_velocity(params, sample, U1, R, j0, yaw_rate)  # M j0 + c
    x_B, y_B, z_B = R[:, 0], R[:, 1], R[:, 2]
    M = np.empty((3, 3))
    M[0] = -y_B
    M[1] = x_B
    if yaw_rate == "exact":
        x_psi = np.array([math.cos(sample.psi), math.sin(sample.psi), 0.0])
        M[2] = -(z_B @ x_psi) / (x_B @ x_psi) * y_B
    else:
        M[2] = 0.0
    M *= params.m_r / U1
    return np.linalg.solve(np.eye(3) - M @ J, b)


def _rates_at(params, traj, t, R_guess, omega_est, drag_comp, mode, yaw_rate):
    s = traj.sample(t)
    U1, R = thrust_attitude(params, s, R_guess, drag_comp)
    return body_rates(params, s, U1, R, omega_est, drag_comp, mode, yaw_rate)


def angular_acceleration(
    params: RobotParams,
    traj,
    t: float,
    h: float = 1e-4,
    drag_comp: bool = True,
    R_guess=None,
    omega_est=None,
    mode="full",
    yaw_rate="exact",
    one_sided: bool = False,
) -> np.ndarray:
    """``(p', q', r')`` by central difference of the body-rate map.

    ``traj`` needs ``sample(t)``, ``t_start`` and ``t_end``.  With
    ``one_sided`` a second-order forward/backward stencil is used when the
    central one would leave the domain; otherwise that raises DomainError.
    """
    t0, t1 = traj.t_start, traj.t_end
    rates = lambda tt: _rates_at(params, traj, tt, R_guess, omega_est, drag_comp, mode, yaw_rate)  # noqa: E731
    if t - h >= t0 and t + h <= t1:
        return (rates(t + h) - rates(t - h)) / (2.0 * h)
    if not one_sided or t < t0 or t > t1 or t1 - t0 < 2 * h:
        raise DomainError(f"t = {t} +/- {h} outside [{t0}, {t1}]")
    if t - h < t0:
        return (-3.0 * rates(t) + 4.0 * rates(t + h) - rates(t + 2 * h)) / (2.0 * h)
    return (3.0 * rates(t) - 4.0 * rates(t - h) + rates(t - 2 * h)) / (2.0 * h)


def flat_to_state(
    params: RobotParams,
    sample: FlatSample,
    prev: FlatState | None = None,
    drag_comp: bool = True,
    traj=None,
    h: float = 1e-4,
    mode: str = "full",
    yaw_rate: str = "exact",
) -> FlatState:
    """Full desired state for one flat sample.

    ``prev`` warm-starts the attitude and body-rate estimates.  Angular
    acceleration needs the trajectory (``traj``) for the finite difference;
    without it the desired angular acceleration is zero.
    """
    R_guess = None if prev is None else prev.R
    w_est = None if prev is None else prev.omega
    U1, R = thrust_attitude(params, sample, R_guess, drag_comp)
    omega = body_rates(params, sample, U1, R, w_est, drag_comp, mode, yaw_rate)
    if traj is not None:
        omega_dot = angular_acceleration(
            params, traj, sample.t, h, drag_comp, R, omega, mode, yaw_rate, one_sided=True
        )
    else:
        omega_dot = np.zeros(3)
    try:
        eta = dyn.rotation_to_euler(R)
    except SingularityError as exc:
        raise SingularityError(str(exc), sample.t) from None
    x_d = np.concatenate([sample.r, sample.r_dot, eta, omega])
    x_dd = np.concatenate([sample.r_ddot, omega_dot])
    return FlatState(x_d, x_dd, U1, R, sample.t)


def eq1_residual(params: RobotParams, sample: FlatSample, state: FlatState) -> np.ndarray:
    """``m r'' + m g z_W + D_T - U1 z_B`` for a flat sample and its state."""
    m = params.m_r
    D_T = dyn.translational_drag(params, state.R, sample.r_dot)
    return m * sample.r_ddot + m * params.g * dyn.Z_W + D_T - state.U1_d * state.R[:, 2]
