"""Joint models assembled from the elastic core.

Covers the variable-stiffness elbow (AA and D2 layouts), the 2-DoF
parallel wrist with three redundant elastic legs plus its serial
pronation/supination drive, the two commercial wrist options, and the
one/two-synergy adaptive hands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .elastic import (
    DeflectionLimitError,
    SpringParams,
    spring_stiffness,
    spring_torque,
)


class RangeError(ValueError):
    """Commanded or reached pose outside the joint's range of motion."""


# ---------------------------------------------------------------------------
# Elbow


class ElbowVariant(str, Enum):
    AA = "AA"
    D2 = "D2"


@dataclass
class ElbowModel:
    variant: ElbowVariant = ElbowVariant.AA
    spring: SpringParams = field(default_factory=SpringParams)
    rom: tuple[float, float] = (math.radians(-45.0), math.radians(100.0))
    inertia: float = 0.07  # kg*m^2, bare forearm about the elbow axis
    damping: float = 1.5  # N*m*s/rad
    link_length: float = 0.30  # m, elbow axis to payload point
    link_mass: float = 0.6  # kg
    phi_max: float = 1.0
    p_max: float = 0.8
    # (theta1, theta2) for AA, (theta_pos, p) for D2
    motor_refs: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.rom[0] < self.rom[1]:
            raise ValueError(f"elbow rom {self.rom} must satisfy q_min < q_max")
        if not self.inertia > 0:
            raise ValueError("elbow inertia must be > 0")
        if self.damping < 0:
            raise ValueError("elbow damping must be >= 0")

    def torque(self, q: float, motors: tuple[float, float] | None = None) -> float:
        """VSA torque at joint angle q for the given motor angles."""
        th_a, th_b = motors if motors is not None else self.motor_refs
        s = self.spring
        if self.variant is ElbowVariant.AA:
            return spring_torque(s, th_a - q, self.phi_max) - spring_torque(
                s, q - th_b, self.phi_max
            )
        delta = q - th_a
        if abs(delta) + th_b > self.phi_max:
            raise DeflectionLimitError(
                f"|delta|+p = {abs(delta) + th_b:.4g} exceeds phi_max {self.phi_max:.4g}"
            )
        return -(s.a * math.sinh(s.b * (delta + th_b)) + s.a * math.sinh(s.b * (delta - th_b)))

    def stiffness(self, q: float, motors: tuple[float, float] | None = None) -> float:
        th_a, th_b = motors if motors is not None else self.motor_refs
        s = self.spring
        if self.variant is ElbowVariant.AA:
            return spring_stiffness(s, th_a - q, self.phi_max) + spring_stiffness(
                s, q - th_b, self.phi_max
            )
        delta = q - th_a
        return 2.0 * s.a * s.b * math.cosh(s.b * delta) * math.cosh(s.b * th_b)

    def inertia_with_payload(self, payload: float) -> float:
        return self.inertia + payload * self.link_length**2

    def gravity_coeff(self, payload: float, g: float = 9.81) -> float:
        """Coefficient G of the gravity torque -G*cos(q); q=0 is horizontal."""
        return (self.link_mass * 0.5 * self.link_length + payload * self.link_length) * g


# ---------------------------------------------------------------------------
# Variable-stiffness wrist (parallel manipulator + serial PS)

_AZIMUTHS = np.radians([0.0, 120.0, 240.0])


@dataclass
class WristVSModel:
    r: float = 0.04  # moment-arm radius, m
    spring_linear: SpringParams = field(default_factory=lambda: SpringParams(a=50.0, b=200.0))
    motor_refs: tuple[float, float, float] = (0.0, 0.0, 0.0)  # leg lengths lambda, m
    ps_angle: float = 0.0
    rom_cone: float = math.radians(60.0)
    ps_rom: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    c_max: float = 0.01  # m
    phi_max: float = 0.02  # m, per-leg deflection limit


def wrist_leg_coordinates(x: tuple[float, float], r: float) -> np.ndarray:
    """Leg extensions for wrist pose x=(wFE, RUD): l_i = r*(wFE*cos psi_i + RUD*sin psi_i)."""
    wfe, rud = x
    return r * (wfe * np.cos(_AZIMUTHS) + rud * np.sin(_AZIMUTHS))


def wrist_jacobian(r: float) -> np.ndarray:
    """3x2 map d(l)/d(x); constant rows r*(cos psi_i, sin psi_i)."""
    return r * np.column_stack([np.cos(_AZIMUTHS), np.sin(_AZIMUTHS)])


def check_rom_cone(m: WristVSModel, x: tuple[float, float]) -> None:
    if math.hypot(x[0], x[1]) > m.rom_cone:
        raise RangeError(f"wrist pose {x} outside ROM cone of {m.rom_cone:.4g} rad")


def wrist_leg_forces(m: WristVSModel, x: tuple[float, float]) -> np.ndarray:
    phi = np.asarray(m.motor_refs) - wrist_leg_coordinates(x, m.r)
    if np.any(np.abs(phi) > m.phi_max):
        raise DeflectionLimitError(f"leg deflection {phi} exceeds phi_max {m.phi_max:.4g}")
    s = m.spring_linear
    return s.a * np.sinh(s.b * phi)


def wrist_torque(m: WristVSModel, x: tuple[float, float]) -> np.ndarray:
    """Platform torque (tau_FE, tau_RUD) = J^T f from the three leg spring forces."""
    return wrist_jacobian(m.r).T @ wrist_leg_forces(m, x)


def wrist_stiffness_matrix(m: WristVSModel, x: tuple[float, float]) -> np.ndarray:
    """2x2 joint stiffness K = J^T diag(a*b*cosh(b*phi_i)) J; symmetric positive definite."""
    phi = np.asarray(m.motor_refs) - wrist_leg_coordinates(x, m.r)
    s = m.spring_linear
    sigma = s.a * s.b * np.cosh(s.b * phi)
    J = wrist_jacobian(m.r)
    return J.T @ (sigma[:, None] * J)


def wrist_internal_preload(m: WristVSModel, x: tuple[float, float], c: float) -> np.ndarray:
    """Leg targets that hold pose x with uniform co-contraction c (null-space preload)."""
    if not 0.0 <= c <= m.c_max:
        raise RangeError(f"preload c={c} outside [0, {m.c_max}]")
    return wrist_leg_coordinates(x, m.r) + c


def wrist_stiffness_scalar(m: WristVSModel, c: float) -> float:
    """Diagonal wFE/RUD stiffness at uniform co-contraction c: 1.5*r^2*a*b*cosh(b*c)."""
    s = m.spring_linear
    return 1.5 * m.r**2 * s.a * s.b * math.cosh(s.b * c)


def wrist_preload_for_stiffness(m: WristVSModel, k_target: float) -> tuple[float, bool]:
    """Invert the uniform-preload diagonal stiffness k = 1.5*r^2*a*b*cosh(b*c)."""
    s = m.spring_linear
    k_min = 1.5 * m.r**2 * s.a * s.b
    if k_target <= k_min:
        return 0.0, k_target < k_min
    c = math.acosh(k_target / k_min) / s.b
    if c > m.c_max:
        return m.c_max, True
    return c, False


def ps_step(
    ps_angle: float,
    angle_ref: float,
    rate_limit: float,
    dt: float,
    ps_rom: tuple[float, float] = (-math.pi / 2, math.pi / 2),
) -> tuple[float, bool]:
    """Rate-limited tracking of the pronation/supination reference.

    Returns the new angle and a clamp flag raised when the reference had
    to be clamped into the ROM.
    """
    clamped = not ps_rom[0] <= angle_ref <= ps_rom[1]
    ref = min(max(angle_ref, ps_rom[0]), ps_rom[1])
    step = min(max(ref - ps_angle, -rate_limit * dt), rate_limit * dt)
    return ps_angle + step, clamped


# ---------------------------------------------------------------------------
# Commercial wrists


class WristCommercialVariant(str, Enum):
    ROTATOR = "Rotator"
    QUICK_DISCONNECT = "QuickDisconnect"


@dataclass
class WristCommercialModel:
    variant: WristCommercialVariant = WristCommercialVariant.ROTATOR
    ps_angle: float = 0.0
    ps_rom: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    ps_rate: float = 2.0  # rad/s
    locked: bool = False

    def step(self, angle_ref: float, dt: float) -> bool:
        """Advance the motor-driven variant; passive variant ignores motor refs."""
        if self.variant is WristCommercialVariant.QUICK_DISCONNECT or self.locked:
            return False
        self.ps_angle, clamped = ps_step(self.ps_angle, angle_ref, self.ps_rate, dt, self.ps_rom)
        return clamped

    def manual_reposition(self, angle: float) -> None:
        """Contralateral-arm repositioning; only the passive variant supports it."""
        if self.variant is not WristCommercialVariant.QUICK_DISCONNECT:
            raise RangeError("manual_reposition is only supported by the QuickDisconnect wrist")
        if not self.ps_rom[0] <= angle <= self.ps_rom[1]:
            raise RangeError(f"angle {angle} outside ps rom {self.ps_rom}")
        self.ps_angle = angle


# ---------------------------------------------------------------------------
# Hands

N_HAND_JOINTS = 19
# thumb has two segments (3 joints incl. CMC); the four fingers get 4 each
_FINGER_JOINTS = {"thumb": 3, "index": 4, "middle": 4, "ring": 4, "little": 4}
FINGERS = list(_FINGER_JOINTS)


class HandVariant(str, Enum):
    SOFTHAND_PRO = "SoftHandPro"
    SOFTHAND_2 = "SoftHand2"


def _default_synergies(n: int) -> np.ndarray:
    """Closure map: synergy 1 closes all joints uniformly, synergy 2 reshapes
    thumb/index/middle toward opposition."""
    full_close = math.radians(80.0)
    s1 = np.full(N_HAND_JOINTS, full_close)
    if n == 1:
        return s1[:, None]
    s2 = np.zeros(N_HAND_JOINTS)
    i = 0
    for finger, nj in _FINGER_JOINTS.items():
        if finger in ("thumb", "index", "middle"):
            s2[i : i + nj] = math.radians(25.0)
        else:
            s2[i : i + nj] = -math.radians(15.0)
        i += nj
    return np.column_stack([s1, s2])


@dataclass
class GraspObject:
    diameter: float  # m
    fingers: tuple[str, ...] = tuple(FINGERS)


@dataclass
class HandModel:
    variant: HandVariant = HandVariant.SOFTHAND_PRO
    tendon_stiffness: float = 20.0  # N per unit synergy past contact
    max_aperture: float = 0.10  # m, fingertip opening at sigma=0
    sigma: np.ndarray = field(default_factory=lambda: np.zeros(1))
    synergy_matrix: np.ndarray = field(default_factory=lambda: _default_synergies(1))

    def __post_init__(self):
        n = 2 if self.variant is HandVariant.SOFTHAND_2 else 1
        if self.synergy_matrix.shape != (N_HAND_JOINTS, n):
            self.synergy_matrix = _default_synergies(n)
        if self.sigma.shape != (n,):
            self.sigma = np.zeros(n)

    @property
    def n_synergies(self) -> int:
        return self.synergy_matrix.shape[1]


def contact_fraction(h: HandModel, obj: GraspObject) -> float:
    """Synergy level at which a finger first meets the object.

    Linear aperture model: aperture(sigma) = max_aperture*(1 - sigma).
    """
    return min(max(1.0 - obj.diameter / h.max_aperture, 0.0), 1.0)


def hand_close_step(
    h: HandModel, sigma_cmd: np.ndarray, obj: Optional[GraspObject]
) -> tuple[np.ndarray, dict[str, float]]:
    """Adaptive closure: fingers stop on contact, the differential keeps
    pressing the rest; past contact the tendon builds equal grasp force.

    Returns the 19 joint angles and the per-finger forces (N).
    """
    sigma_cmd = np.clip(np.asarray(sigma_cmd, dtype=float), 0.0, 1.0)
    h.sigma = sigma_cmd.copy()
    s_close = float(sigma_cmd[0])
    forces: dict[str, float] = {}
    sigma_eff = sigma_cmd.copy()
    per_finger_close: dict[str, float] = {}
    for finger in FINGERS:
        if obj is not None and finger in obj.fingers:
            s_star = contact_fraction(h, obj)
            per_finger_close[finger] = min(s_close, s_star)
            forces[finger] = h.tendon_stiffness * max(0.0, s_close - s_star)
        else:
            per_finger_close[finger] = s_close
            forces[finger] = 0.0
    angles = np.empty(N_HAND_JOINTS)
    i = 0
    for finger, nj in _FINGER_JOINTS.items():
        sigma_f = sigma_eff.copy()
        sigma_f[0] = per_finger_close[finger]
        angles[i : i + nj] = h.synergy_matrix[i : i + nj] @ sigma_f
        i += nj
    return angles, forces


def hand_posture(h: HandModel, in_contact: bool = False) -> str:
    """Classify the grasp from the synergy activations."""
    s1 = float(h.sigma[0])
    s2 = float(h.sigma[1]) if h.n_synergies > 1 else 0.0
    if s2 >= 0.6 and 0.2 <= s1 <= 0.7:
        return "tripod"
    if s1 <= 0.1:
        return "open"
    if s1 >= 0.8 and in_contact:
        return "power"
    return "other"
