"""Lyapunov-based tracking controller.

Errors are ``desired - actual``; translational position and velocity errors
are expressed in the body frame of the actual attitude.  The four composite
errors ``e_U1..e_U4`` each get a quadratic Lyapunov term, and the inputs are
chosen so that ``d/dt (e_Ui^2 / 2) = -k_Ui e_Ui^2 / 2``.

The roll and pitch laws come out as a force at the torque arm ``L_t``; the
body torque handed to the plant is ``L_t`` times that value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import dynamics as dyn
from .flatness import FlatState
from .params import RobotParams


@dataclass(frozen=True)
class Gains:
    # order: x, y, z, phi, theta, psi
    k_p: tuple = (10.0, 10.0, 10.0, 30.0, 30.0, 30.0)
    k_d: tuple = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    k_U: tuple = (10.0, 80.0, 80.0, 80.0)

    def __post_init__(self):
        object.__setattr__(self, "k_p", tuple(float(v) for v in self.k_p))
        object.__setattr__(self, "k_d", tuple(float(v) for v in self.k_d))
        object.__setattr__(self, "k_U", tuple(float(v) for v in self.k_U))
        if len(self.k_p) != 6 or len(self.k_d) != 6 or len(self.k_U) != 4:
            raise ValueError("expected 6 k_p, 6 k_d and 4 k_U gains")
        if min(self.k_p) < 0 or min(self.k_d) <= 0 or min(self.k_U) <= 0:
            raise ValueError("need k_p >= 0, k_d > 0, k_U > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "Gains":
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in asdict(self).items()}

    def scaled_k_U(self, factor: float) -> "Gains":
        return Gains(self.k_p, self.k_d, tuple(factor * k for k in self.k_U))


@dataclass
class ErrorState:
    e_pos: np.ndarray  # body frame, e_y negated
    e_vel: np.ndarray  # body frame, e_y_dot negated
    e_eta: np.ndarray  # (phi, theta, psi), psi wrapped
    e_rates: np.ndarray
    e_U: np.ndarray = field(default_factory=lambda: np.zeros(4))

    @property
    def V(self) -> float:
        return 0.5 * float(self.e_U @ self.e_U)


def wrap_angle(a: float) -> float:
    """Wrap to ``(-pi, pi]``."""
    w = math.remainder(a, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


def composite_errors(gains: Gains, e_pos, e_vel, e_eta, e_rates) -> np.ndarray:
    kpx, kpy, kpz, kpf, kpt, kpp = gains.k_p
    kdx, kdy, kdz, kdf, kdt, kdp = gains.k_d
    ex, ey, ez = e_pos
    dx, dy, dz = e_vel
    return np.array([
        kpz * ez + kdz * dz,
        kpy * ey + kdy * dy + kpf * e_eta[0] + kdf * e_rates[0],
        kpx * ex + kdx * dx + kpt * e_eta[1] + kdt * e_rates[1],
        kpp * e_eta[2] + kdp * e_rates[2],
    ])


def compute_errors(gains: Gains, state, desired: FlatState) -> ErrorState:
    x = np.asarray(state, dtype=float)
    xd = desired.x_d
    R = dyn.euler_to_rotation(x[dyn.EULER])
    e_pos = R.T @ (xd[dyn.POS] - x[dyn.POS])
    e_vel = R.T @ (xd[dyn.VEL] - x[dyn.VEL])
    # y errors flipped so that roll acts in the right direction
    e_pos[1] = -e_pos[1]
    e_vel[1] = -e_vel[1]
    e_eta = xd[dyn.EULER] - x[dyn.EULER]
    e_eta[2] = wrap_angle(e_eta[2])
    e_rates = xd[dyn.RATES] - x[dyn.RATES]
    e_U = composite_errors(gains, e_pos, e_vel, e_eta, e_rates)
    return ErrorState(e_pos, e_vel, e_eta, e_rates, e_U)


def lyapunov_rate(gains: Gains, errors: ErrorState) -> tuple[float, float]:
    """``V`` and its designed rate ``-sum(k_Ui e_Ui^2) / 2``."""
    e = errors.e_U
    return 0.5 * float(e @ e), -0.5 * float(np.asarray(gains.k_U) @ (e * e))


def _sigmas(params: RobotParams, eta, D):
    phi, theta, psi = eta
    sf, cf = math.sin(phi), math.cos(phi)
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(psi), math.cos(psi)
    m, g = params.m_r, params.g
    Dx, Dy, Dz = D
    s1 = -Dx * (sf * sp + cf * cp * st) / m + Dy * (cp * sf - cf * sp * st) / m - cf * ct * (Dz - g * m) / m
    s2 = Dx * (cf * sp - cp * sf * st) / m - Dy * (cf * cp + sf * sp * st) / m - ct * sf * (Dz - g * m) / m
    s3 = (Dx * cp * ct + Dy * ct * sp - (Dz - g * m) * st) / m
    return s1, s2, s3


def control_laws(params: RobotParams, gains: Gains, state, desired: FlatState, errors: ErrorState | None = None):
    """The four closed-form laws ``(U1, U2, U3, U4)``.

    ``U2`` and ``U3`` are returned in the form divided by ``L_t`` (a force);
    see :func:`control` for the torques.  Drag terms use the current state
    and the negated-drag convention of :mod:`hoptraj.dynamics`.
    """
    x = np.asarray(state, dtype=float)
    err = compute_errors(gains, x, desired) if errors is None else errors
    kpx, kpy, kpz, kpf, kpt, kpp = gains.k_p
    kdx, kdy, kdz, kdf, kdt, kdp = gains.k_d
    kU1, kU2, kU3, kU4 = gains.k_U
    m, L = params.m_r, params.L_t
    Ix, Iy, Iz = params.I_r
    eta = x[dyn.EULER]
    p, q, r = x[dyn.RATES]
    R = dyn.euler_to_rotation(eta)

    D = -dyn.translational_drag(params, R, x[dyn.VEL])
    D_phi, D_theta, D_psi = -dyn.rotational_drag(params, x[dyn.RATES])
    s1, s2, s3 = _sigmas(params, eta, D)

    # desired translational acceleration in the body frame, same as the errors
    acc_d = R.T @ desired.x_dd[:3]
    xdd_d, ydd_d, zdd_d = acc_d
    pd_dot, qd_dot, rd_dot = desired.x_dd[3:]

    ex, ey, ez = err.e_pos
    dex, dey, dez = err.e_vel
    e_phi, e_theta, e_psi = err.e_eta
    e_p, e_q, e_r = err.e_rates

    U1 = m * ((zdd_d + s1) + dez * kpz) + kU1 * m * (dez * kdz + ez * kpz) / (2 * kdz)
    U2 = (
        Ix * (kdy * (ydd_d + s2) + dey * kpy + e_p * kpf) / (L * kdf)
        - Ix * (D_phi / Ix - pd_dot + r * q * (Iy - Iz) / Ix) / L
        + Ix * kU2 * (dey * kdy + e_p * kdf + e_phi * kpf + ey * kpy) / (2 * L * kdf)
    )
    U3 = (
        Iy * (dex * kpx + e_q * kpt - kdx * (-xdd_d + s3)) / (L * kdt)
        + Iy * (qd_dot - D_theta / Iy + p * r * (Ix - Iz) / Iy) / L
        + Iy * kU3 * (dex * kdx + e_q * kdt + e_theta * kpt + ex * kpx) / (2 * L * kdt)
    )
    U4 = Iz * rd_dot - D_psi + (Iz * e_r * kpp + Iz * e_psi * kU4 * kpp / 2) / kdp
    return np.array([U1, U2, U3, U4])


def exact_laws(params: RobotParams, gains: Gains, state, desired: FlatState, errors: ErrorState | None = None) -> np.ndarray:
    """Inputs that realise ``d/dt e_Ui = -k_Ui e_Ui / 2`` for the 6-DOF plant.

    Same errors, composites and gains as :func:`control_laws`, but derived
    with the full error kinematics: the ``-w x e`` terms of the rotating body
    frame, Euler rates instead of body rates for the angle errors, the
    gyroscopic and drag torques on every axis, and the y-error sign flip
    applied to the lateral acceleration as well.  Returns
    ``[U1, tau_phi, tau_theta, tau_psi]`` (torques, not the divided form).
    """
    x = np.asarray(state, dtype=float)
    err = compute_errors(gains, x, desired) if errors is None else errors
    kpx, kpy, kpz, kpf, kpt, kpp = gains.k_p
    kdx, kdy, kdz, kdf, kdt, kdp = gains.k_d
    kU = gains.k_U
    m = params.m_r
    Ix, Iy, Iz = params.I_r
    R = dyn.euler_to_rotation(x[dyn.EULER])
    w = x[dyn.RATES]
    p, q, r = w
    xd = desired.x_d

    flip = np.array([1.0, -1.0, 1.0])
    ep, ev = flip * err.e_pos, flip * err.e_vel
    # body accel = U1/m e3 - g_b
    g_b = R.T @ (params.g * dyn.Z_W + dyn.translational_drag(params, R, x[dyn.VEL]) / m)
    d_ep = flip * (ev - np.cross(w, ep))
    d_ev = flip * (R.T @ desired.x_dd[:3] + g_b - np.cross(w, ev))  # minus U1/m on z
    d_eta = dyn.euler_rates(xd[dyn.EULER], xd[dyn.RATES]) - dyn.euler_rates(x[dyn.EULER], w)
    gyro = np.array([q * r * (Iy - Iz), p * r * (Iz - Ix), p * q * (Ix - Iy)])
    D_R = dyn.rotational_drag(params, w)
    eU = err.e_U
    w_dot_d = desired.x_dd[3:]

    U1 = m * (kpz * d_ep[2] + kdz * d_ev[2] + 0.5 * kU[0] * eU[0]) / kdz
    rot = np.array([
        (kpy * d_ep[1] + kdy * d_ev[1] + kpf * d_eta[0] + 0.5 * kU[1] * eU[1]) / kdf,
        (kpx * d_ep[0] + kdx * d_ev[0] + kpt * d_eta[1] + 0.5 * kU[2] * eU[2]) / kdt,
        (kpp * d_eta[2] + 0.5 * kU[3] * eU[3]) / kdp,
    ])
    tau = np.asarray(params.I_r) * (rot + w_dot_d) - gyro + D_R
    return np.array([U1, tau[0], tau[1], tau[2]])


LAWS = ("table", "exact")


def control(
    params: RobotParams,
    gains: Gains,
    state,
    desired: FlatState,
    errors: ErrorState | None = None,
    law: str = "table",
) -> np.ndarray:
    """Unsaturated input ``[U1, tau_phi, tau_theta, tau_psi]`` for the plant.

    ``law="table"`` applies the closed-form laws with ``U2, U3`` scaled by
    ``L_t``; ``law="exact"`` uses :func:`exact_laws`.
    """
    if law == "exact":
        return exact_laws(params, gains, state, desired, errors)
    if law != "table":
        raise ValueError(f"law must be one of {LAWS}, got {law!r}")
    U = control_laws(params, gains, state, desired, errors)
    U[1] *= params.L_t
    U[2] *= params.L_t
    return U


def hover_desired(params: RobotParams, r=(0.0, 0.0, 0.0), psi: float = 0.0) -> FlatState:
    x_d = dyn.make_state(r=r, eta=(0.0, 0.0, psi))
    return FlatState(x_d, np.zeros(6), params.weight, dyn.euler_to_rotation((0.0, 0.0, psi)))
