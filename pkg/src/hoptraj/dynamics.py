"""6-DOF rigid-body model of the aerial phase.

The 12-state vector is laid out as::

    x = [x, y, z, vx, vy, vz, phi, theta, psi, p, q, r]

world position and velocity, ZYX Euler angles, and body rates.  Inputs are
``U = [U1, U2, U3, U4]``: collective thrust (N) and body torques (N m).

Drag sign convention: ``D_T`` and ``D_R`` below are the resisting drag
vectors that get *subtracted* in the Newton-Euler form
``m r'' = -m g z_W + U1 z_B - D_T``.  The expanded per-axis equations add
``D_x .. D_psi``; those are the already negated components, ``D_i = -D_T[i]``
and ``D_phi.. = -D_R[i]``, so both forms describe the same model.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import SingularityError
from .params import RobotParams

POS = slice(0, 3)
VEL = slice(3, 6)
EULER = slice(6, 9)
RATES = slice(9, 12)

Z_W = np.array([0.0, 0.0, 1.0])

# |theta| must stay below pi/2 - EULER_GUARD
EULER_GUARD = 1e-6


def make_state(r=(0, 0, 0), v=(0, 0, 0), eta=(0, 0, 0), omega=(0, 0, 0)) -> np.ndarray:
    return np.concatenate([np.asarray(a, dtype=float).reshape(3) for a in (r, v, eta, omega)])


def hover_input(params: RobotParams) -> np.ndarray:
    return np.array([params.m_r * params.g, 0.0, 0.0, 0.0])


def _check_pitch(theta):
    if abs(theta) >= math.pi / 2 - EULER_GUARD:
        raise SingularityError(f"ZYX Euler singularity, |theta| = {abs(theta):.9f} rad")


def euler_to_rotation(eta) -> np.ndarray:
    """Body-to-world rotation ``R_BW = Rz(psi) Ry(theta) Rx(phi)``.

    Columns are the body axes ``[x_B, y_B, z_B]`` expressed in the world frame.
    """
    phi, theta, psi = (float(a) for a in eta)
    _check_pitch(theta)
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.array([
        [cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf],
        [sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf],
        [-st, ct * sf, ct * cf],
    ])


def rotation_to_euler(R) -> np.ndarray:
    """ZYX Euler angles ``(phi, theta, psi)`` of a body-to-world rotation."""
    R = np.asarray(R, dtype=float)
    theta = math.asin(max(-1.0, min(1.0, -R[2, 0])))
    _check_pitch(theta)
    phi = math.atan2(R[2, 1], R[2, 2])
    psi = math.atan2(R[1, 0], R[0, 0])
    return np.array([phi, theta, psi])


def euler_rates(eta, omega) -> np.ndarray:
    """Map body rates ``(p, q, r)`` to ZYX Euler angle rates."""
    phi, theta, _ = eta
    _check_pitch(theta)
    p, q, r = omega
    cf, sf = math.cos(phi), math.sin(phi)
    ct, tt = math.cos(theta), math.tan(theta)
    return np.array([
        p + sf * tt * q + cf * tt * r,
        cf * q - sf * r,
        (sf * q + cf * r) / ct,
    ])


def body_rates_from_euler_rates(eta, eta_dot) -> np.ndarray:
    """Inverse of :func:`euler_rates`."""
    phi, theta, _ = eta
    dphi, dtheta, dpsi = eta_dot
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    return np.array([
        dphi - st * dpsi,
        cf * dtheta + sf * ct * dpsi,
        -sf * dtheta + cf * ct * dpsi,
    ])


def translational_drag(params: RobotParams, R_BW, v_world) -> np.ndarray:
    """``D_T = sign(v) o ((R_BW C_T) (v o v))`` with ``sign(0) = 0``."""
    v = np.asarray(v_world, dtype=float)
    return np.sign(v) * ((R_BW @ params.C_T) @ (v * v))


def rotational_drag(params: RobotParams, omega) -> np.ndarray:
    """``D_R = sign(w) o (C_R (w o w))`` with ``sign(0) = 0``."""
    w = np.asarray(omega, dtype=float)
    return np.sign(w) * (params.C_R @ (w * w))


def state_derivative(params: RobotParams, state, U) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    U1, U2, U3, U4 = (float(u) for u in U)
    v = state[VEL]
    eta = state[EULER]
    omega = state[RATES]
    R = euler_to_rotation(eta)
    m = params.m_r
    Ix, Iy, Iz = params.I_r
    p, q, r = omega

    D = -translational_drag(params, R, v)
    D_rot = -rotational_drag(params, omega)

    acc = (U1 * R[:, 2] + D) / m
    acc[2] -= params.g
    omega_dot = np.array([
        (q * r * (Iy - Iz) + U2 + D_rot[0]) / Ix,
        (p * r * (Iz - Ix) + U3 + D_rot[1]) / Iy,
        (p * q * (Ix - Iy) + U4 + D_rot[2]) / Iz,
    ])
    return np.concatenate([v, acc, euler_rates(eta, omega), omega_dot])


def integrate_step(params: RobotParams, state, U, dt: float) -> np.ndarray:
    """One classical RK4 step with the input held constant over ``dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(state, dtype=float)
    k1 = state_derivative(params, x, U)
    k2 = state_derivative(params, x + 0.5 * dt * k1, U)
    k3 = state_derivative(params, x + 0.5 * dt * k2, U)
    k4 = state_derivative(params, x + dt * k3, U)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_feedback_step(params: RobotParams, state, t: float, dt: float, policy) -> np.ndarray:
    """RK4 step with the input re-evaluated as ``policy(t, x)`` at every stage."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(state, dtype=float)
    h = 0.5 * dt
    k1 = state_derivative(params, x, policy(t, x))
    x2 = x + h * k1
    k2 = state_derivative(params, x2, policy(t + h, x2))
    x3 = x + h * k2
    k3 = state_derivative(params, x3, policy(t + h, x3))
    x4 = x + dt * k3
    k4 = state_derivative(params, x4, policy(t + dt, x4))
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(params: RobotParams, state, U, duration: float, dt: float) -> np.ndarray:
    """Fixed-step integration over ``duration`` (rounded to whole steps)."""
    n = max(1, int(round(duration / dt)))
    x = np.asarray(state, dtype=float)
    for _ in range(n):
        x = integrate_step(params, x, U, dt)
    return x


def mixing_matrix(params: RobotParams) -> np.ndarray:
    zt, zd, L = params.zeta_t, params.zeta_d, params.L_m
    return np.array([
        [zt, zt, zt, zt],
        [-zt * L, -zt * L, zt * L, zt * L],
        [-zt * L, zt * L, zt * L, -zt * L],
        [zd, -zd, zd, -zd],
    ])


def input_mixing(params: RobotParams, rotor_speeds) -> np.ndarray:
    """Rotor speeds (rad/s) to ``[U1, U2, U3, U4]``."""
    w = np.asarray(rotor_speeds, dtype=float)
    if (w < 0).any():
        raise ValueError("rotor speeds must be non-negative")
    return mixing_matrix(params) @ (w * w)


class RotorCommand(NamedTuple):
    speeds: np.ndarray
    saturated_low: np.ndarray
    saturated_high: np.ndarray
    infeasible: bool

    @property
    def saturated(self) -> bool:
        return bool(self.saturated_low.any() or self.saturated_high.any())


def inverse_mixing(params: RobotParams, U) -> RotorCommand:
    """Rotor speeds realising ``U``, clamped to ``[0, omega_rotor_max]``.

    ``infeasible`` is set when some squared speed came out below ``-1e-9``.
    """
    sq = np.linalg.solve(mixing_matrix(params), np.asarray(U, dtype=float))
    infeasible = bool((sq < -1e-9).any())
    low = sq < 0.0
    w = np.sqrt(np.maximum(sq, 0.0))
    high = w > params.omega_rotor_max
    w = np.minimum(w, params.omega_rotor_max)
    return RotorCommand(w, low, high, infeasible)


class Saturated(NamedTuple):
    U: np.ndarray
    thrust_clamped: bool
    rotor_saturated: bool


def saturate_input(params: RobotParams, U) -> Saturated:
    """Project a commanded input onto what the rotors can deliver.

    Thrust is clamped to ``[0, 4 zeta_t w_max^2]`` first, then the torques
    follow from re-mixing the clamped rotor speeds.
    """
    U = np.array(U, dtype=float)
    U1 = min(max(U[0], 0.0), params.max_thrust)
    thrust_clamped = U1 != U[0]
    U[0] = U1
    cmd = inverse_mixing(params, U)
    if not cmd.saturated:
        return Saturated(U, thrust_clamped, False)
    return Saturated(input_mixing(params, cmd.speeds), thrust_clamped, True)


def mechanical_energy(params: RobotParams, state) -> float:
    x = np.asarray(state, dtype=float)
    v = x[VEL]
    w = x[RATES]
    return float(
        0.5 * params.m_r * v @ v
        + params.m_r * params.g * x[2]
        + 0.5 * w @ (np.asarray(params.I_r) * w)
    )
