"""DC gearmotor model with worm-drive self-locking and supply power accounting.

The 20 kHz PWM drive is abstracted to its average voltage duty*V_bus; the
control loop runs three orders of magnitude slower, so ripple never
reaches any observable quantity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

BUS_VOLTAGE = 24.0


@dataclass(frozen=True)
class MotorUnit:
    """Output-side state of one gearmotor.

    Units are radians for rotary drives; the same first-order model serves
    the wrist leg actuators with metres (gear_ratio absorbs the screw pitch).
    """

    theta: float = 0.0
    omega: float = 0.0
    gear_ratio: float = 400.0
    kt: float = 0.02  # N*m/A
    ke: float = 0.02  # V*s/rad (motor side)
    R: float = 1.5  # ohm
    rotor_inertia: float = 0.05  # kg*m^2 reflected to the output side
    max_speed: float = 3.0  # rad/s, output side
    nonbackdrivable: bool = True

    def __post_init__(self):
        if self.gear_ratio <= 0 or self.R <= 0:
            raise ValueError("gear_ratio and R must be > 0")

    @property
    def no_load_speed(self) -> float:
        """Output-side steady speed at full duty with no load."""
        return BUS_VOLTAGE / (self.ke * self.gear_ratio)

    @property
    def time_constant(self) -> float:
        return self.rotor_inertia * self.R / (self.kt * self.ke * self.gear_ratio**2)

    def current(self, duty: float) -> float:
        """Winding current at the present speed."""
        v = duty * BUS_VOLTAGE
        return (v - self.ke * self.gear_ratio * self.omega) / self.R


def motor_step(m: MotorUnit, duty: float, load_torque: float, dt: float) -> MotorUnit:
    """Advance the motor one step under average-voltage drive.

    Exact discretization of the first-order speed dynamics
    J*omega_dot = G*kt*(V - ke*G*omega)/R - tau_load, so single large steps
    match the continuous response. At zero duty a non-backdrivable drive
    self-locks: position held exactly, no motion, no current.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    duty = min(max(duty, -1.0), 1.0)
    if duty == 0.0 and m.nonbackdrivable:
        return replace(m, omega=0.0)
    v = duty * BUS_VOLTAGE
    # steady speed under this voltage and load
    damping = m.kt * m.ke * m.gear_ratio**2 / m.R
    omega_ss = (m.gear_ratio * m.kt * v / m.R - load_torque) / damping
    tau_c = m.rotor_inertia / damping
    decay = math.exp(-dt / tau_c)
    omega_new = omega_ss + (m.omega - omega_ss) * decay
    theta_new = m.theta + omega_ss * dt + (m.omega - omega_ss) * tau_c * (1.0 - decay)
    if abs(omega_new) > m.max_speed:
        omega_new = math.copysign(m.max_speed, omega_new)
    return replace(m, theta=theta_new, omega=omega_new)


@dataclass
class PowerLedger:
    """Supply-side electrical power and energy, summed over all motors."""

    bus_voltage: float = BUS_VOLTAGE
    instantaneous_power: float = 0.0
    energy: float = 0.0


def power_update(
    ledger: PowerLedger, motors: list[MotorUnit], duties: list[float], dt: float
) -> PowerLedger:
    """Accumulate sum(|V*I|)*dt; exactly zero when every duty is zero."""
    p = 0.0
    for m, duty in zip(motors, duties):
        if duty == 0.0:
            continue
        v = duty * ledger.bus_voltage
        p += abs(v * m.current(duty))
    ledger.instantaneous_power = p
    ledger.energy += p * dt
    return ledger
