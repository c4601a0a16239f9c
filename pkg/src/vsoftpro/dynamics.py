"""Fixed-step simulation of the arm chain.

Physics runs at 1 kHz (RK4 for the elbow, quasi-static equilibrium
tracking for the wrist), the control stack at 200 Hz; one control tick
wraps five physics sub-steps. Everything is deterministic: identical
worlds and inputs produce bit-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels, control, elastic, joints
from .actuation import MotorUnit, PowerLedger, motor_step, power_update
from .control import CONTROL_DT, EmgFrame, PidState, References, pid_step

PHYS_DT = 0.001
SUBSTEPS = 5


@dataclass
class EnvObject:
    id: str
    position: float  # m along the 1-D task axis
    knock_force: float = 3.0  # N
    contact_stiffness: float = 500.0  # N/m
    contact_damping: float = 5.0  # N*s/m
    knocked: bool = False

    def __post_init__(self):
        if self.knock_force <= 0:
            raise ValueError("knock_force must be > 0")


@dataclass
class Disturbance:
    joint_id: str
    t0: float
    t1: float
    torque: float  # N*m

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise ValueError(f"disturbance window [{self.t0}, {self.t1}] must have t0 < t1")


def contact_step(
    endpoint: float, endpoint_vel: float, objects: list[EnvObject], dt: float
) -> float:
    """Penalty contact against the object line; knocked state latches.

    Returns the total (non-negative) contact force pushing back on the arm.
    """
    total = 0.0
    for obj in objects:
        pen = endpoint - obj.position
        if pen <= 0.0:
            continue
        f = obj.contact_stiffness * pen + obj.contact_damping * endpoint_vel
        if f <= 0.0:
            continue
        if f > obj.knock_force:
            obj.knocked = True
        total += f
    return total


def elbow_dynamics_step(
    elbow: joints.ElbowModel,
    q: float,
    qd: float,
    motors: tuple[float, float],
    tau_ext: float,
    payload: float,
    gravity: float,
    dt: float,
    n: int = 1,
) -> tuple[float, float, bool]:
    """RK4 update of I*qdd = tau_vsa + tau_ext - d*qd - G*cos(q).

    q = 0 is the horizontal forearm (worst-case gravity torque). Hitting a
    ROM limit is a hard stop: the angle clamps, velocity zeroes, and the
    flag is raised.
    """
    q, qd = _kernels.elbow_rk4(
        q,
        qd,
        motors[0],
        motors[1],
        elbow.variant is joints.ElbowVariant.D2,
        elbow.spring.a,
        elbow.spring.b,
        elbow.inertia_with_payload(payload),
        elbow.damping,
        elbow.gravity_coeff(payload, gravity),
        tau_ext,
        dt,
        n,
    )
    hit = False
    if q < elbow.rom[0]:
        q, qd, hit = elbow.rom[0], 0.0, True
    elif q > elbow.rom[1]:
        q, qd, hit = elbow.rom[1], 0.0, True
    return q, qd, hit


def elbow_energy(
    elbow: joints.ElbowModel,
    q: float,
    qd: float,
    motors: tuple[float, float],
    payload: float,
    gravity: float,
) -> float:
    """Kinetic + gravitational + spring potential energy (motors frozen)."""
    s = elbow.spring
    th_a, th_b = motors
    if elbow.variant is joints.ElbowVariant.AA:
        u_spring = (s.a / s.b) * (math.cosh(s.b * (th_a - q)) + math.cosh(s.b * (q - th_b)))
    else:
        d = q - th_a
        u_spring = (s.a / s.b) * (math.cosh(s.b * (d + th_b)) + math.cosh(s.b * (d - th_b)))
    u_grav = elbow.gravity_coeff(payload, gravity) * math.sin(q)
    return 0.5 * elbow.inertia_with_payload(payload) * qd**2 + u_grav + u_spring


def wrist_quasistatic_step(
    m: joints.WristVSModel,
    x: np.ndarray,
    tau_ext: np.ndarray,
    dt: float,
    rate_limit: float = 2.0,
    max_iter: int = 50,
    tol: float = 1e-12,
) -> tuple[np.ndarray, bool]:
    """Track the wrist equilibrium J^T f(lambda - l(x)) + tau_ext = 0.

    Damped Newton from the previous pose, with the per-tick motion capped
    at rate_limit*dt. Returns (new pose, converged flag); on
    non-convergence the previous pose is held.
    """
    J = joints.wrist_jacobian(m.r)
    s = m.spring_linear
    lam = np.asarray(m.motor_refs)

    def residual(xv):
        phi = lam - J @ xv
        return J.T @ (s.a * np.sinh(s.b * phi)) + tau_ext

    xv = np.array(x, dtype=float)
    g = residual(xv)
    converged = float(np.linalg.norm(g)) <= tol
    for _ in range(max_iter):
        if converged:
            break
        phi = lam - J @ xv
        K = J.T @ ((s.a * s.b * np.cosh(s.b * phi))[:, None] * J)
        dx = np.linalg.solve(K, g)
        step = 1.0
        gn = float(np.linalg.norm(g))
        for _ in range(20):
            x_try = xv + step * dx
            g_try = residual(x_try)
            if float(np.linalg.norm(g_try)) < gn:
                xv, g = x_try, g_try
                break
            step *= 0.5
        else:
            break
        converged = float(np.linalg.norm(g)) <= tol
    if not converged and float(np.linalg.norm(residual(xv))) > 1e-6:
        return np.array(x, dtype=float), False
    dx_total = xv - np.asarray(x)
    n = float(np.linalg.norm(dx_total))
    cap = rate_limit * dt
    if n > cap:
        xv = np.asarray(x) + dx_total * (cap / n)
    # stay inside the ROM cone
    polar = float(np.hypot(xv[0], xv[1]))
    if polar > m.rom_cone:
        xv *= m.rom_cone / polar
    return xv, True


# ---------------------------------------------------------------------------
# World


def _default_motor(kind: str) -> MotorUnit:
    if kind == "elbow":
        return MotorUnit()
    if kind == "leg":  # linear drive, metres; gear absorbs the screw pitch
        return MotorUnit(gear_ratio=24000.0, max_speed=0.05, rotor_inertia=0.02)
    if kind == "ps":
        return MotorUnit(gear_ratio=600.0, max_speed=2.0)
    if kind == "hand":
        return MotorUnit(gear_ratio=480.0, max_speed=2.5)
    raise ValueError(kind)


def _default_pid(kind: str, gains: dict) -> PidState:
    if kind == "leg":
        return PidState(kp=2000.0, ki=2000.0, kd=0.0)
    return PidState(kp=gains.get("kp", 12.0), ki=gains.get("ki", 20.0), kd=gains.get("kd", 0.1))


@dataclass
class World:
    """Complete simulation state for one assembled platform."""

    elbow: joints.ElbowModel
    wrist: joints.WristVSModel | joints.WristCommercialModel
    hand: Optional[joints.HandModel]
    gains: dict = field(default_factory=dict)
    emg_thresholds: control.EmgThresholds = field(default_factory=control.EmgThresholds)
    payload: float = 0.0
    gravity: float = 9.81
    objects: list[EnvObject] = field(default_factory=list)
    disturbances: list[Disturbance] = field(default_factory=list)
    grasp_object: Optional[joints.GraspObject] = None
    mode: str = "direct"  # or "emg"
    emg_provider: Optional[Callable[[float], Optional[EmgFrame]]] = None

    def __post_init__(self):
        self.t = 0.0
        self.q = 0.0
        self.qd = 0.0
        self.wrist_x = np.zeros(2)
        self.refs = References()
        self.refs.elbow_k = 2.0 * self.elbow.spring.a * self.elbow.spring.b
        self.ledger = PowerLedger()
        self.duties_frozen = False
        self.paused = False
        self.flags: list[str] = []
        self.contact_force = 0.0
        self.emg = EmgFrame(0.0, 0.0, 0.0)
        self.hand_forces: dict[str, float] = {}
        self.hand_angles = np.zeros(joints.N_HAND_JOINTS)
        self.last_duties: dict[str, float] = {}

        self.motors: dict[str, MotorUnit] = {
            "elbow_m1": _default_motor("elbow"),
            "elbow_m2": _default_motor("elbow"),
        }
        self.pids: dict[str, PidState] = {
            "elbow_m1": _default_pid("elbow", self.gains),
            "elbow_m2": _default_pid("elbow", self.gains),
        }
        if isinstance(self.wrist, joints.WristVSModel):
            for i in (1, 2, 3):
                self.motors[f"wrist_leg{i}"] = _default_motor("leg")
                self.pids[f"wrist_leg{i}"] = _default_pid("leg", self.gains)
            self.motors["wrist_ps"] = _default_motor("ps")
            self.pids["wrist_ps"] = _default_pid("ps", self.gains)
        elif self.wrist.variant is joints.WristCommercialVariant.ROTATOR:
            self.motors["wrist_ps"] = _default_motor("ps")
            self.pids["wrist_ps"] = _default_pid("ps", self.gains)
        if self.hand is not None:
            for i in range(1, self.hand.n_synergies + 1):
                self.motors[f"hand_s{i}"] = _default_motor("hand")
                self.pids[f"hand_s{i}"] = _default_pid("hand", self.gains)

        if self.mode == "emg":
            self.sequencer = control.make_sequencer(self.joint_ids())
            self.detector = control.CocontractionDetector(self.emg_thresholds)
        else:
            self.sequencer = None
            self.detector = None

    # -- structure ---------------------------------------------------------

    def joint_ids(self) -> list[str]:
        ids = ["elbow"]
        if isinstance(self.wrist, joints.WristVSModel):
            ids += ["wrist_ps", "wrist_fe", "wrist_rud"]
        elif self.wrist.variant is joints.WristCommercialVariant.ROTATOR:
            ids.append("wrist_ps")
        if self.hand is not None:
            ids += [f"hand_s{i}" for i in range(1, self.hand.n_synergies + 1)]
        return ids

    @property
    def ps_angle(self) -> float:
        if isinstance(self.wrist, joints.WristVSModel):
            return self.motors["wrist_ps"].theta
        if self.wrist.variant is joints.WristCommercialVariant.ROTATOR:
            return self.motors["wrist_ps"].theta
        return self.wrist.ps_angle  # passive QuickDisconnect

    @property
    def sigma(self) -> np.ndarray:
        if self.hand is None:
            return np.zeros(0)
        return np.array(
            [
                min(max(self.motors[f"hand_s{i}"].theta, 0.0), 1.0)
                for i in range(1, self.hand.n_synergies + 1)
            ]
        )

    def elbow_motor_angles(self) -> tuple[float, float]:
        return self.motors["elbow_m1"].theta, self.motors["elbow_m2"].theta

    def realized_elbow_stiffness(self) -> float:
        th_a, th_b = self.elbow_motor_angles()
        s = self.elbow.spring
        if self.elbow.variant is joints.ElbowVariant.AA:
            return s.a * s.b * (math.cosh(s.b * (th_a - self.q)) + math.cosh(s.b * (self.q - th_b)))
        d = self.q - th_a
        return 2.0 * s.a * s.b * math.cosh(s.b * d) * math.cosh(s.b * th_b)

    def realized_wrist_stiffness(self) -> float:
        if not isinstance(self.wrist, joints.WristVSModel):
            return 0.0
        self.wrist.motor_refs = tuple(self.motors[f"wrist_leg{i}"].theta for i in (1, 2, 3))
        J = joints.wrist_jacobian(self.wrist.r)
        s = self.wrist.spring_linear
        phi = np.asarray(self.wrist.motor_refs) - J @ self.wrist_x
        K = J.T @ ((s.a * s.b * np.cosh(s.b * phi))[:, None] * J)
        return 0.5 * float(K[0, 0] + K[1, 1])

    # -- stepping ----------------------------------------------------------

    def _disturbance_torque(self, joint_id: str, t: float) -> float:
        tau = 0.0
        for d in self.disturbances:
            if d.joint_id == joint_id and d.t0 <= t < d.t1:
                tau += d.torque
        return tau

    def _control_update(self) -> dict[str, float]:
        if self.emg_provider is not None:
            frame = self.emg_provider(self.t)
            if frame is not None:
                self.emg = frame
        if self.mode == "emg" and self.sequencer is not None:
            emg = EmgFrame(self.t, self.emg.e1, self.emg.e2)
            event = self.detector.step(emg, CONTROL_DT)
            k_min = 2.0 * self.elbow.spring.a * self.elbow.spring.b
            k_max = elastic.stiffness_at_preload(self.elbow.spring, self.elbow.p_max)
            control.sequencer_step(
                self.sequencer,
                event,
                emg,
                self.refs,
                self.joint_ids(),
                CONTROL_DT,
                self.emg_thresholds,
                (k_min, k_max),
            )
        targets, flags = control.refs_to_motor_targets(
            self.elbow,
            self.wrist,
            self.hand,
            self.refs,
        )
        self.flags.extend(f for f in flags if f not in self.flags)
        duties: dict[str, float] = {}
        for name, target in targets.items():
            if name not in self.motors:
                continue
            if self.duties_frozen:
                duties[name] = 0.0
                continue
            err = target - self.motors[name].theta
            duty, self.pids[name] = pid_step(self.pids[name], err, CONTROL_DT)
            duties[name] = duty
        self.last_duties = duties
        return duties

    def _elbow_motor_loads(self) -> tuple[float, float]:
        th_a, th_b = self.elbow_motor_angles()
        s = self.elbow.spring
        if self.elbow.variant is joints.ElbowVariant.AA:
            return s.a * math.sinh(s.b * (th_a - self.q)), -s.a * math.sinh(s.b * (self.q - th_b))
        d = self.q - th_a
        load_pos = s.a * (math.sinh(s.b * (d + th_b)) + math.sinh(s.b * (d - th_b)))
        load_pre = s.a * (math.sinh(s.b * (d + th_b)) - math.sinh(s.b * (d - th_b)))
        return load_pos, load_pre

    def tick(self) -> None:
        """One 200 Hz control tick wrapping five 1 ms physics sub-steps."""
        duties = self._control_update()
        motor_names = list(self.motors)
        leg_forces = np.zeros(3)
        if isinstance(self.wrist, joints.WristVSModel):
            s = self.wrist.spring_linear
            J = joints.wrist_jacobian(self.wrist.r)
        for _ in range(SUBSTEPS):
            loads: dict[str, float] = {name: 0.0 for name in motor_names}
            loads["elbow_m1"], loads["elbow_m2"] = self._elbow_motor_loads()
            if isinstance(self.wrist, joints.WristVSModel):
                lam = np.array([self.motors[f"wrist_leg{i}"].theta for i in (1, 2, 3)])
                phi = lam - J @ self.wrist_x
                leg_forces = s.a * np.sinh(s.b * phi)
                for i in (1, 2, 3):
                    loads[f"wrist_leg{i}"] = float(leg_forces[i - 1])
            for name in motor_names:
                self.motors[name] = motor_step(
                    self.motors[name], duties.get(name, 0.0), loads[name], PHYS_DT
                )
            endpoint = self.elbow.link_length * self.q
            endpoint_vel = self.elbow.link_length * self.qd
            self.contact_force = contact_step(endpoint, endpoint_vel, self.objects, PHYS_DT)
            tau_ext = self._disturbance_torque("elbow", self.t)
            tau_ext -= self.contact_force * self.elbow.link_length
            self.q, self.qd, hit = elbow_dynamics_step(
                self.elbow,
                self.q,
                self.qd,
                self.elbow_motor_angles(),
                tau_ext,
                self.payload,
                self.gravity,
                PHYS_DT,
            )
            if hit and "elbow_rom_stop" not in self.flags:
                self.flags.append("elbow_rom_stop")
            power_update(
                self.ledger,
                [self.motors[n] for n in motor_names],
                [duties.get(n, 0.0) for n in motor_names],
                PHYS_DT,
            )
            self.t += PHYS_DT
        if isinstance(self.wrist, joints.WristVSModel):
            self.wrist.motor_refs = tuple(self.motors[f"wrist_leg{i}"].theta for i in (1, 2, 3))
            tau_w = np.array(
                [
                    self._disturbance_torque("wrist_fe", self.t),
                    self._disturbance_torque("wrist_rud", self.t),
                ]
            )
            self.wrist_x, ok = wrist_quasistatic_step(self.wrist, self.wrist_x, tau_w, CONTROL_DT)
            if not ok and "wrist_solver_stall" not in self.flags:
                self.flags.append("wrist_solver_stall")
        if self.hand is not None:
            self.hand_angles, self.hand_forces = joints.hand_close_step(
                self.hand, self.sigma, self.grasp_object
            )

    def knocked_count(self) -> int:
        return sum(1 for o in self.objects if o.knocked)

    def active_joint(self) -> str:
        if self.sequencer is not None:
            return self.sequencer.active_joint
        return ""

    def control_mode(self) -> str:
        if self.sequencer is not None:
            return self.sequencer.mode
        return "direct"
