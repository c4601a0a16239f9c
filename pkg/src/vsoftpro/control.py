"""200 Hz control stack.

Per-motor PID with anti-windup, the reference manager that turns user
(position, stiffness) references into motor targets through the inverse
elastic maps, and the sequential two-channel EMG controller with
co-contraction switching.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import elastic, joints

CONTROL_RATE_HZ = 200.0
CONTROL_DT = 1.0 / CONTROL_RATE_HZ


# ---------------------------------------------------------------------------
# PID


@dataclass(frozen=True)
class PidState:
    kp: float = 12.0
    ki: float = 20.0
    kd: float = 0.1
    integ: float = 0.0
    prev_err: float = 0.0
    u_min: float = -1.0
    u_max: float = 1.0

    def __post_init__(self):
        if self.kp < 0 or self.ki < 0 or self.kd < 0:
            raise ValueError("PID gains must be >= 0")


def pid_step(s: PidState, err: float, dt: float) -> tuple[float, PidState]:
    """One PID update with derivative on error and conditional-integration
    anti-windup; the output is clamped to [u_min, u_max]."""
    deriv = (err - s.prev_err) / dt
    integ = s.integ + err * dt
    u = s.kp * err + s.ki * integ + s.kd * deriv
    if u > s.u_max:
        u = s.u_max
        if err > 0:  # would wind further up
            integ = s.integ
    elif u < s.u_min:
        u = s.u_min
        if err < 0:
            integ = s.integ
    return u, replace(s, integ=integ, prev_err=err)


# ---------------------------------------------------------------------------
# References


@dataclass
class JointReference:
    joint_id: str
    q_ref: Optional[float] = None
    k_ref: Optional[float] = None


@dataclass
class References:
    """Current reference set for a platform; unknown joints are rejected
    and out-of-range values clamp with a flag."""

    elbow_q: float = 0.0
    elbow_k: float = 0.0  # 0 = minimum achievable
    wfe: float = 0.0
    rud: float = 0.0
    wrist_k: float = 0.0
    ps: float = 0.0
    hand: np.ndarray = field(default_factory=lambda: np.zeros(2))
    clamp_flags: list[str] = field(default_factory=list)

    def apply(self, ref: JointReference, joint_ids: Iterable[str]) -> None:
        jid = ref.joint_id
        if jid not in joint_ids:
            raise KeyError(f"unknown joint id {jid!r}")
        if ref.q_ref is not None:
            if jid == "elbow":
                self.elbow_q = ref.q_ref
            elif jid == "wrist_fe":
                self.wfe = ref.q_ref
            elif jid == "wrist_rud":
                self.rud = ref.q_ref
            elif jid == "wrist_ps":
                self.ps = ref.q_ref
            elif jid == "hand_s1":
                self.hand[0] = ref.q_ref
            elif jid == "hand_s2":
                self.hand[1] = ref.q_ref
        if ref.k_ref is not None:
            if jid == "elbow":
                self.elbow_k = ref.k_ref
            elif jid in ("wrist_fe", "wrist_rud"):
                self.wrist_k = ref.k_ref


def refs_to_motor_targets(
    elbow: joints.ElbowModel,
    wrist,
    hand: Optional[joints.HandModel],
    refs: References,
) -> tuple[dict[str, float], list[str]]:
    """Translate (position, stiffness) references into motor-side targets.

    AA elbow: theta1 = q + p, theta2 = q - p; D2 elbow: (theta_pos, p);
    VS wrist: leg lengths with null-space preload; PS and hand map directly.
    """
    flags: list[str] = []
    targets: dict[str, float] = {}

    q = min(max(refs.elbow_q, elbow.rom[0]), elbow.rom[1])
    if q != refs.elbow_q:
        flags.append("elbow_q_clamped")
    p, clamped = elastic.preload_for_stiffness(elbow.spring, refs.elbow_k, elbow.p_max)
    if clamped and refs.elbow_k > 0:
        flags.append("elbow_k_clamped")
    if elbow.variant is joints.ElbowVariant.AA:
        targets["elbow_m1"] = q + p
        targets["elbow_m2"] = q - p
    else:
        targets["elbow_m1"] = q
        targets["elbow_m2"] = p

    if isinstance(wrist, joints.WristVSModel):
        x = (refs.wfe, refs.rud)
        polar = math.hypot(*x)
        if polar > wrist.rom_cone:
            scale = wrist.rom_cone / polar
            x = (x[0] * scale, x[1] * scale)
            flags.append("wrist_x_clamped")
        c, clamped = joints.wrist_preload_for_stiffness(wrist, refs.wrist_k)
        if clamped and refs.wrist_k > 0:
            flags.append("wrist_k_clamped")
        lam = joints.wrist_internal_preload(wrist, x, c)
        targets["wrist_leg1"], targets["wrist_leg2"], targets["wrist_leg3"] = lam
        targets["wrist_ps"] = min(max(refs.ps, wrist.ps_rom[0]), wrist.ps_rom[1])
        if targets["wrist_ps"] != refs.ps:
            flags.append("ps_clamped")
    elif isinstance(wrist, joints.WristCommercialModel):
        if wrist.variant is joints.WristCommercialVariant.ROTATOR:
            targets["wrist_ps"] = min(max(refs.ps, wrist.ps_rom[0]), wrist.ps_rom[1])
            if targets["wrist_ps"] != refs.ps:
                flags.append("ps_clamped")

    if hand is not None:
        for i in range(hand.n_synergies):
            v = min(max(float(refs.hand[i]), 0.0), 1.0)
            if v != refs.hand[i]:
                flags.append(f"hand_s{i + 1}_clamped")
            targets[f"hand_s{i + 1}"] = v
    return targets, flags


# ---------------------------------------------------------------------------
# EMG


@dataclass(frozen=True)
class EmgFrame:
    t: float
    e1: float
    e2: float

    def __post_init__(self):
        if not (0.0 <= self.e1 <= 1.0 and 0.0 <= self.e2 <= 1.0):
            raise ValueError(f"EMG envelopes must be in [0,1], got ({self.e1}, {self.e2})")


def read_emg_csv(path: str | Path) -> list[EmgFrame]:
    """Read `t,e1,e2` rows; t must be strictly increasing."""
    frames: list[EmgFrame] = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != ["t", "e1", "e2"]:
            raise ValueError(f"expected header t,e1,e2 in {path}, got {reader.fieldnames}")
        for row in reader:
            frame = EmgFrame(float(row["t"]), float(row["e1"]), float(row["e2"]))
            if frames and frame.t <= frames[-1].t:
                raise ValueError(f"non-increasing t at row {len(frames) + 1} of {path}")
            frames.append(frame)
    return frames


@dataclass
class EmgThresholds:
    on: float = 0.6  # co-contraction threshold
    off: float = 0.2  # relaxation threshold
    switch_min_ms: float = 100.0
    switch_max_ms: float = 400.0
    stiffness_entry_ms: float = 700.0
    refractory_ms: float = 500.0
    velocity_gain: float = 2.0  # rad/s (or units/s) per unit envelope difference


class CocontractionDetector:
    """Detects short co-activation bursts as joint-switch events.

    A switch fires on the falling edge of a burst whose duration lies in
    the [switch_min, switch_max] window; longer holds are left to the
    sequencer's stiffness-mode entry. A refractory period suppresses
    re-triggering.
    """

    def __init__(self, th: EmgThresholds | None = None):
        self.th = th or EmgThresholds()
        self.burst_ms = 0.0
        self.since_event_ms = math.inf

    def step(self, frame: EmgFrame, dt: float) -> bool:
        th = self.th
        self.since_event_ms += dt * 1000.0
        active = frame.e1 > th.on and frame.e2 > th.on
        if active:
            self.burst_ms += dt * 1000.0
            return False
        duration, self.burst_ms = self.burst_ms, 0.0
        if (
            th.switch_min_ms <= duration <= th.switch_max_ms
            and self.since_event_ms >= th.refractory_ms
        ):
            self.since_event_ms = 0.0
            return True
        return False


JOINT_CYCLE = ["elbow", "wrist_ps", "wrist_fe", "wrist_rud", "hand_s1"]


@dataclass
class SequencerState:
    cycle: list[str]
    active_idx: int = 0
    mode: str = "position"  # or "stiffness"
    cocon_ms: float = 0.0

    @property
    def active_joint(self) -> str:
        return self.cycle[self.active_idx]


def make_sequencer(joint_ids: Iterable[str]) -> SequencerState:
    ids = set(joint_ids)
    cycle = [j for j in JOINT_CYCLE if j in ids]
    if not cycle:
        raise ValueError("no sequencer-controllable joints in this configuration")
    return SequencerState(cycle=cycle)


# joints whose stiffness the sequencer may regulate
_STIFFNESS_JOINTS = {"elbow", "wrist_fe", "wrist_rud"}


def sequencer_step(
    s: SequencerState,
    switch_event: bool,
    emg: EmgFrame,
    refs: References,
    joint_ids: Iterable[str],
    dt: float,
    th: EmgThresholds | None = None,
    k_range: tuple[float, float] = (10.0, 270.0),
) -> SequencerState:
    """Advance the sequential controller one tick, mutating `refs`.

    Position mode drives the active joint at velocity_gain*(e1-e2);
    a sustained co-contraction enters stiffness mode on stiffness-capable
    joints, where k_ref tracks the mean envelope level; relaxation below
    the off threshold exits. A tick updates position or stiffness, never
    both.
    """
    th = th or EmgThresholds()
    cocontracting = emg.e1 > th.on and emg.e2 > th.on
    s.cocon_ms = s.cocon_ms + dt * 1000.0 if cocontracting else 0.0

    if switch_event:
        s.active_idx = (s.active_idx + 1) % len(s.cycle)
        s.mode = "position"
        return s

    if s.mode == "stiffness":
        if max(emg.e1, emg.e2) < th.off:
            s.mode = "position"
            return s
        level = 0.5 * (emg.e1 + emg.e2)
        k = k_range[0] + level * (k_range[1] - k_range[0])
        refs.apply(JointReference(s.active_joint, k_ref=k), joint_ids)
        return s

    if s.cocon_ms > th.stiffness_entry_ms and s.active_joint in _STIFFNESS_JOINTS:
        s.mode = "stiffness"
        return s

    if not cocontracting:
        delta = th.velocity_gain * (emg.e1 - emg.e2) * dt
        if delta != 0.0:
            jid = s.active_joint
            if jid == "elbow":
                refs.apply(JointReference(jid, q_ref=refs.elbow_q + delta), joint_ids)
            elif jid == "wrist_ps":
                refs.apply(JointReference(jid, q_ref=refs.ps + delta), joint_ids)
            elif jid == "wrist_fe":
                refs.apply(JointReference(jid, q_ref=refs.wfe + delta), joint_ids)
            elif jid == "wrist_rud":
                refs.apply(JointReference(jid, q_ref=refs.rud + delta), joint_ids)
            elif jid == "hand_s1":
                refs.apply(
                    JointReference(jid, q_ref=min(max(refs.hand[0] + delta, 0.0), 1.0)),
                    joint_ids,
                )
    return s
