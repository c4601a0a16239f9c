"""Nonlinear elastic element models and closed-form variable-stiffness maps.

Two actuator layouts are covered:

* agonist-antagonist (AA): two opposing elastic branches, their difference
  sets the joint position and their co-activation sets the stiffness;
* explicit stiffness variation (ESV): one motor sets position, a second
  motor sets a symmetric spring preload.

The elastic element follows tau(phi) = a*sinh(b*phi), which keeps the
unloaded equilibrium exactly invariant under co-contraction and gives a
closed-form stiffness a*b*cosh(b*phi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

DEFAULT_PHI_MAX = 1.0  # rad (or m for linear elements)
DEFAULT_P_MAX = 0.8


class DeflectionLimitError(ValueError):
    """Spring deflection exceeds the configured mechanical limit."""


@dataclass(frozen=True)
class SpringParams:
    """Nonlinear spring: torque scale `a` (N*m or N) and shape rate `b` (1/rad or 1/m)."""

    a: float = 1.0
    b: float = 5.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"spring a must be > 0, got {self.a}")
        if not self.b > 0:
            raise ValueError(f"spring b must be > 0, got {self.b}")


@dataclass(frozen=True)
class AAJointConfig:
    """Agonist-antagonist layout: two motor angles pulling against each other."""

    spring: SpringParams
    theta1: float  # agonist motor angle, rad
    theta2: float  # antagonist motor angle, rad
    phi_max: float = DEFAULT_PHI_MAX

    def __post_init__(self):
        if abs(self.theta1 - self.theta2) > 2.0 * self.phi_max:
            raise DeflectionLimitError(
                f"|theta1-theta2|={abs(self.theta1 - self.theta2):.4g} exceeds "
                f"2*phi_max={2 * self.phi_max:.4g}"
            )


@dataclass(frozen=True)
class ESVJointConfig:
    """Explicit stiffness variation layout: position motor plus preload motor."""

    spring: SpringParams
    theta_pos: float  # position motor angle, rad
    p: float  # preload, rad
    phi_max: float = DEFAULT_PHI_MAX
    p_max: float = DEFAULT_P_MAX

    def __post_init__(self):
        if not 0.0 <= self.p <= self.p_max:
            raise ValueError(f"preload p={self.p} outside [0, {self.p_max}]")


def _check_phi(phi: float, phi_max: float) -> None:
    if abs(phi) > phi_max:
        raise DeflectionLimitError(f"deflection {phi:.4g} exceeds phi_max {phi_max:.4g}")


def spring_torque(spring: SpringParams, phi: float, phi_max: float = DEFAULT_PHI_MAX) -> float:
    """Elastic torque a*sinh(b*phi); odd and strictly increasing in phi."""
    _check_phi(phi, phi_max)
    return spring.a * math.sinh(spring.b * phi)


def spring_stiffness(spring: SpringParams, phi: float, phi_max: float = DEFAULT_PHI_MAX) -> float:
    """Tangent stiffness d(tau)/d(phi) = a*b*cosh(b*phi); even, minimum a*b at phi=0."""
    _check_phi(phi, phi_max)
    return spring.a * spring.b * math.cosh(spring.b * phi)


def aa_torque(cfg: AAJointConfig, q: float) -> float:
    """Net joint torque of the two opposing branches at joint angle q."""
    return spring_torque(cfg.spring, cfg.theta1 - q, cfg.phi_max) - spring_torque(
        cfg.spring, q - cfg.theta2, cfg.phi_max
    )


def aa_equilibrium(cfg: AAJointConfig) -> float:
    """Unloaded equilibrium angle; the mean of the motor angles by odd symmetry."""
    return 0.5 * (cfg.theta1 + cfg.theta2)


def aa_stiffness(cfg: AAJointConfig, q: float) -> float:
    """Joint stiffness -d(aa_torque)/dq; at equilibrium equals 2ab*cosh(b*p)."""
    return spring_stiffness(cfg.spring, cfg.theta1 - q, cfg.phi_max) + spring_stiffness(
        cfg.spring, q - cfg.theta2, cfg.phi_max
    )


def esv_torque(cfg: ESVJointConfig, q: float) -> float:
    """Joint torque of the symmetric-preload layout; zero at q=theta_pos for any preload."""
    delta = q - cfg.theta_pos
    if abs(delta) + cfg.p > cfg.phi_max:
        raise DeflectionLimitError(
            f"|delta|+p = {abs(delta) + cfg.p:.4g} exceeds phi_max {cfg.phi_max:.4g}"
        )
    s = cfg.spring
    return -(s.a * math.sinh(s.b * (delta + cfg.p)) + s.a * math.sinh(s.b * (delta - cfg.p)))


def esv_stiffness(cfg: ESVJointConfig, q: float) -> float:
    """Joint stiffness 2ab*cosh(b*delta)*cosh(b*p); even in delta."""
    delta = q - cfg.theta_pos
    if abs(delta) + cfg.p > cfg.phi_max:
        raise DeflectionLimitError(
            f"|delta|+p = {abs(delta) + cfg.p:.4g} exceeds phi_max {cfg.phi_max:.4g}"
        )
    s = cfg.spring
    return 2.0 * s.a * s.b * math.cosh(s.b * delta) * math.cosh(s.b * cfg.p)


class PreloadResult(NamedTuple):
    p: float
    clamped: bool


def preload_for_stiffness(
    spring: SpringParams, k_target: float, p_max: float = DEFAULT_P_MAX
) -> PreloadResult:
    """Invert the equilibrium stiffness map k = 2ab*cosh(b*p).

    Targets below the 2ab floor or above the p_max ceiling clamp to the
    nearest achievable preload; `clamped` reports it.
    """
    k_min = 2.0 * spring.a * spring.b
    if k_target <= k_min:
        return PreloadResult(0.0, k_target < k_min)
    p = math.acosh(k_target / k_min) / spring.b
    if p > p_max:
        return PreloadResult(p_max, True)
    return PreloadResult(p, False)


def stiffness_at_preload(spring: SpringParams, p: float) -> float:
    """Equilibrium stiffness 2ab*cosh(b*p) realized by a symmetric preload."""
    return 2.0 * spring.a * spring.b * math.cosh(spring.b * p)
