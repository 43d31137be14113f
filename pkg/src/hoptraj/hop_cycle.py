"""Touchdown detection, the discrete stance map and touchdown-angle adaptation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import dynamics as dyn
from .errors import ContactError
from .params import RobotParams

DEFAULT_FOOT_LEN = 0.2
CONTACT_TOL = 1e-6


class Phase(enum.Enum):
    AERIAL = "aerial"
    STANCE = "stance"


@dataclass(frozen=True)
class Surface:
    """Ground plane ``z = offset`` or axis-aligned wall.

    For a wall, ``normal`` is the horizontal unit normal pointing into free
    space and ``offset`` the plane position along that normal's axis.
    """

    kind: str
    offset: float = 0.0
    normal: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if self.kind == "ground":
            n = np.array([0.0, 0.0, 1.0])
        elif self.kind == "wall":
            if abs(n[2]) > 1e-12 or abs(np.linalg.norm(n) - 1.0) > 1e-9:
                raise ValueError("wall normal must be a horizontal unit vector")
            if np.count_nonzero(np.abs(n) > 1e-12) != 1:
                raise ValueError("walls must be axis aligned")
        else:
            raise ValueError(f"unknown surface kind {self.kind!r}")
        object.__setattr__(self, "normal", tuple(float(v) for v in n))

    @classmethod
    def ground(cls, z0: float = 0.0) -> "Surface":
        return cls("ground", z0)

    @classmethod
    def wall(cls, position: float, normal) -> "Surface":
        return cls("wall", position, tuple(normal))

    @property
    def axis(self) -> int:
        return int(np.argmax(np.abs(self.normal)))

    def signed_distance(self, point) -> float:
        """Distance of ``point`` from the plane, positive on the free side."""
        a = self.axis
        return float(self.normal[a] * (point[a] - self.offset))

    def contact_coordinate(self, z_B, foot_len: float) -> float:
        """Coordinate along the surface axis that puts the foot tip on the plane."""
        return self.offset + foot_len * float(z_B[self.axis])


def foot_tip(state, foot_len: float = DEFAULT_FOOT_LEN) -> np.ndarray:
    x = np.asarray(state, dtype=float)
    R = dyn.euler_to_rotation(x[dyn.EULER])
    return x[dyn.POS] - foot_len * R[:, 2]


def foot_distance(state, surface: Surface, foot_len: float = DEFAULT_FOOT_LEN) -> float:
    return surface.signed_distance(foot_tip(state, foot_len))


def foot_velocity(state, foot_len: float = DEFAULT_FOOT_LEN) -> np.ndarray:
    x = np.asarray(state, dtype=float)
    R = dyn.euler_to_rotation(x[dyn.EULER])
    # d/dt(-L z_B) = -L R (w x e3)
    p, q, _ = x[dyn.RATES]
    return x[dyn.VEL] - foot_len * (R @ np.array([q, -p, 0.0]))


@dataclass
class Contact:
    contact: bool
    t: float | None = None
    fraction: float | None = None  # in (0, 1] between the two samples


def detect_touchdown(
    state,
    surface: Surface,
    foot_len: float = DEFAULT_FOOT_LEN,
    prev_state=None,
    t: float = 0.0,
    t_prev: float | None = None,
) -> Contact:
    """Contact when the foot tip reaches the plane while moving inward.

    With a previous sample the contact time is linearly interpolated from the
    signed distances at the two samples.
    """
    d = foot_distance(state, surface, foot_len)
    n = np.asarray(surface.normal)
    inward = float(foot_velocity(state, foot_len) @ n) < 0.0
    if d > CONTACT_TOL or not inward:
        return Contact(False)
    if prev_state is None or t_prev is None:
        return Contact(True, t, 1.0)
    d0 = foot_distance(prev_state, surface, foot_len)
    if d0 <= 0.0:
        return Contact(True, t, 1.0)
    frac = d0 / (d0 - d) if d0 != d else 1.0
    frac = min(max(frac, 0.0), 1.0)
    return Contact(True, t_prev + frac * (t - t_prev), frac)


@dataclass(frozen=True)
class StanceModel:
    eta_e: float = 0.9
    t_s: float = 0.08
    apply_gravity_torque: bool = True
    n_steps: int = 80

    def __post_init__(self):
        if not 0.0 < self.eta_e <= 1.0:
            raise ValueError("eta_e must be in (0, 1]")
        if self.t_s < 0.0:
            raise ValueError("t_s must be non-negative")


def gravity_tilt(params: RobotParams, R, foot_len: float, t_s: float, n_steps: int = 80) -> np.ndarray:
    """Rotate a rigid body pivoting on its foot under gravity for ``t_s``.

    The foot is a fixed pivot at ``-foot_len z_B`` from the centre of mass;
    the only moment is gravity's, which tips the body further away from
    vertical.  Semi-implicit Euler on the world-frame angular velocity with a
    scalar pivot inertia ``mean(I_x, I_y) + m L^2``.
    """
    R = np.array(R, dtype=float)
    if t_s <= 0.0 or foot_len <= 0.0:
        return R
    m, g = params.m_r, params.g
    I_piv = 0.5 * (params.I_r[0] + params.I_r[1]) + m * foot_len**2
    w = np.zeros(3)
    dt = t_s / n_steps
    for _ in range(n_steps):
        lever = foot_len * R[:, 2]
        torque = np.cross(lever, np.array([0.0, 0.0, -m * g]))
        w = w + dt * torque / I_piv
        angle = float(np.linalg.norm(w)) * dt
        if angle > 0.0:
            axis = w / np.linalg.norm(w)
            K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
            dR = np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)
            R = dR @ R
    return R


def stance_map(
    params: RobotParams,
    x_TD,
    model: StanceModel = StanceModel(),
    next_LO_speed: float | None = None,
    foot_len: float = DEFAULT_FOOT_LEN,
    surface: Surface | None = None,
) -> np.ndarray:
    """Liftoff state from the touchdown state.

    Position is held, the velocity is reflected along the touchdown body
    z-axis with speed ``|v_TD| sqrt(eta_e)`` (or ``next_LO_speed``), body
    rates are zeroed.  Roll and pitch drift under the gravity moment about
    the foot when enabled; yaw is held.
    """
    x = np.array(x_TD, dtype=float)
    if surface is not None and foot_distance(x, surface, foot_len) > 1e-3:
        raise ContactError("stance map called on a state that is not in contact")
    eta = x[dyn.EULER]
    R = dyn.euler_to_rotation(eta)
    speed = float(np.linalg.norm(x[dyn.VEL]))
    speed = speed * math.sqrt(model.eta_e) if next_LO_speed is None else float(next_LO_speed)
    out = x.copy()
    out[dyn.VEL] = speed * R[:, 2]
    out[dyn.RATES] = 0.0
    if model.apply_gravity_torque and model.t_s > 0.0:
        R_lo = gravity_tilt(params, R, foot_len, model.t_s, model.n_steps)
        phi, theta, _ = dyn.rotation_to_euler(R_lo)
        out[dyn.EULER] = (phi, theta, eta[2])
    return out


@dataclass
class GammaAdapter:
    gamma_phi: float = 1.0
    gamma_theta: float = 1.0
    mu: float = 0.1

    def gamma(self, axis: str) -> float:
        return self.gamma_phi if axis == "phi" else self.gamma_theta


def update_gamma(adapter: GammaAdapter, beta_TD: float, beta_LO: float, axis: str) -> GammaAdapter:
    """``gamma -= mu sign(beta_TD) sign(beta_LO) |beta_TD - beta_LO|`` on one axis."""
    step = adapter.mu * np.sign(beta_TD) * np.sign(beta_LO) * abs(beta_TD - beta_LO)
    if axis == "phi":
        return GammaAdapter(adapter.gamma_phi - step, adapter.gamma_theta, adapter.mu)
    if axis == "theta":
        return GammaAdapter(adapter.gamma_phi, adapter.gamma_theta - step, adapter.mu)
    raise ValueError(f"axis must be 'phi' or 'theta', got {axis!r}")


def apply_gamma(adapter: GammaAdapter, td_roll_pitch) -> tuple[float, float]:
    phi, theta = td_roll_pitch
    return phi * adapter.gamma_phi, theta * adapter.gamma_theta


@dataclass
class HybridReport:
    V_TD: float
    V_LO: float
    delta_V: float
    bound: float
    ok: bool


def hybrid_check(V_TD: float, V_LO: float, bound: float = 0.0, tol: float = 1e-6) -> HybridReport:
    dV = V_LO - V_TD
    return HybridReport(V_TD, V_LO, dV, bound, dV <= bound + tol)
