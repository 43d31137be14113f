"""Robot parameter set and JSON loading."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from importlib import resources
from pathlib import Path

import numpy as np

NOMINAL_PARAMS_FILE = "nominal_params.json"


@dataclass(frozen=True)
class RobotParams:
    """Physical parameters of the hopping robot (SI units).

    ``C_T`` and ``C_R`` already contain the factor ``0.5 * rho * A``.
    ``L_t`` is the torque arm appearing in the roll/pitch control laws; it
    defaults to ``L_m`` when not given.
    """

    m_r: float
    I_r: tuple[float, float, float]
    g: float
    zeta_t: float
    zeta_d: float
    L_m: float
    C_T: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    C_R: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    omega_rotor_max: float = np.inf
    L_t: float | None = None

    def __post_init__(self):
        I_r = tuple(float(v) for v in self.I_r)
        C_T = np.array(self.C_T, dtype=float).reshape(3, 3)
        C_R = np.array(self.C_R, dtype=float).reshape(3, 3)
        C_T.setflags(write=False)
        C_R.setflags(write=False)
        object.__setattr__(self, "I_r", I_r)
        object.__setattr__(self, "C_T", C_T)
        object.__setattr__(self, "C_R", C_R)
        if self.L_t is None:
            object.__setattr__(self, "L_t", float(self.L_m))

        if self.m_r <= 0 or self.g <= 0 or self.zeta_t <= 0 or self.L_m <= 0:
            raise ValueError("m_r, g, zeta_t and L_m must be positive")
        if min(I_r) <= 0:
            raise ValueError("inertia entries must be positive")
        if self.zeta_d <= 0:
            raise ValueError("zeta_d must be positive (mixing matrix must be invertible)")
        if self.L_t <= 0:
            raise ValueError("L_t must be positive")
        if (C_T < 0).any() or (C_R < 0).any():
            raise ValueError("drag coefficient matrices must be entrywise non-negative")
        if self.omega_rotor_max <= 0:
            raise ValueError("omega_rotor_max must be positive")

    @property
    def inertia(self) -> np.ndarray:
        return np.diag(self.I_r)

    @property
    def max_thrust(self) -> float:
        return 4.0 * self.zeta_t * self.omega_rotor_max**2

    @property
    def weight(self) -> float:
        return self.m_r * self.g

    def without_drag(self) -> "RobotParams":
        return self.replace(C_T=np.zeros((3, 3)), C_R=np.zeros((3, 3)))

    def replace(self, **changes) -> "RobotParams":
        d = self.to_dict()
        d.update(changes)
        return RobotParams.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["I_r"] = list(self.I_r)
        d["C_T"] = self.C_T.tolist()
        d["C_R"] = self.C_R.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RobotParams":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
        return cls(**d)


def load_params(path: str | Path | None = None) -> RobotParams:
    """Load parameters from a JSON file; ``None`` loads the shipped nominal set."""
    if path is None:
        text = resources.files("hoptraj.data").joinpath(NOMINAL_PARAMS_FILE).read_text()
    else:
        text = Path(path).read_text()
    d = json.loads(text)
    d.pop("_comment", None)
    return RobotParams.from_dict(d)


def nominal_params() -> RobotParams:
    return load_params(None)
