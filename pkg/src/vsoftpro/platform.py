"""Modular platform assembly: config validation, DoF accounting, world building.

A configuration picks exactly one elbow, wrist, and hand variant plus
control and environment parameters. Validation is strict (unknown keys
are rejected) and reports every violation, not just the first.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import control, dynamics, joints
from .elastic import SpringParams


class ConfigError(ValueError):
    """Carries the full list of (path, message) violations."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        super().__init__("; ".join(f"{p}: {m}" for p, m in errors))


@dataclass
class PlatformConfig:
    elbow: joints.ElbowModel
    wrist: joints.WristVSModel | joints.WristCommercialModel
    hand: joints.HandModel
    gains: dict = field(default_factory=dict)
    emg_thresholds: control.EmgThresholds = field(default_factory=control.EmgThresholds)
    environment: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def elbow_variant(self) -> str:
        return self.elbow.variant.value

    @property
    def wrist_variant(self) -> str:
        if isinstance(self.wrist, joints.WristVSModel):
            return "VSWrist"
        return self.wrist.variant.value

    @property
    def hand_variant(self) -> str:
        return self.hand.variant.value


class _Ctx:
    def __init__(self):
        self.errors: list[tuple[str, str]] = []

    def fail(self, path: str, msg: str) -> None:
        self.errors.append((path, msg))

    def check_keys(self, doc: dict, allowed: set[str], path: str) -> None:
        for key in doc:
            if key not in allowed:
                self.fail(f"{path}.{key}" if path else key, "unknown field")

    def number(self, doc: dict, key: str, path: str, default, lo=None, hi=None):
        if key not in doc:
            return default
        v = doc[key]
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            self.fail(f"{path}.{key}", f"expected a number, got {type(v).__name__}")
            return default
        if lo is not None and v < lo:
            self.fail(f"{path}.{key}", f"must be >= {lo}, got {v}")
            return default
        if hi is not None and v > hi:
            self.fail(f"{path}.{key}", f"must be <= {hi}, got {v}")
            return default
        return float(v)

    def spring(self, doc: dict, path: str, default: SpringParams) -> SpringParams:
        sub = doc.get("spring")
        if sub is None:
            return default
        if not isinstance(sub, dict):
            self.fail(f"{path}.spring", "expected an object")
            return default
        self.check_keys(sub, {"a", "b"}, f"{path}.spring")
        a = self.number(sub, "a", f"{path}.spring", default.a)
        b = self.number(sub, "b", f"{path}.spring", default.b)
        if a <= 0:
            self.fail(f"{path}.spring.a", f"must be > 0, got {a}")
            a = default.a
        if b <= 0:
            self.fail(f"{path}.spring.b", f"must be > 0, got {b}")
            b = default.b
        return SpringParams(a=a, b=b)


def _validate_elbow(doc: Any, ctx: _Ctx) -> joints.ElbowModel:
    default = joints.ElbowModel()
    if not isinstance(doc, dict):
        ctx.fail("elbow", "missing or not an object")
        return default
    ctx.check_keys(
        doc,
        {
            "variant",
            "spring",
            "rom_deg",
            "inertia",
            "damping",
            "link_length",
            "link_mass",
            "phi_max",
            "p_max",
        },
        "elbow",
    )
    variant = doc.get("variant", "AA")
    if variant not in ("AA", "D2"):
        ctx.fail("elbow.variant", f"must be 'AA' or 'D2', got {variant!r}")
        variant = "AA"
    rom = default.rom
    if "rom_deg" in doc:
        v = doc["rom_deg"]
        if (
            isinstance(v, list)
            and len(v) == 2
            and all(isinstance(x, (int, float)) for x in v)
            and v[0] < v[1]
        ):
            rom = (math.radians(v[0]), math.radians(v[1]))
        else:
            ctx.fail("elbow.rom_deg", f"expected [min, max] degrees with min < max, got {v!r}")
    return joints.ElbowModel(
        variant=joints.ElbowVariant(variant),
        spring=ctx.spring(doc, "elbow", default.spring),
        rom=rom,
        inertia=ctx.number(doc, "inertia", "elbow", default.inertia, lo=1e-6),
        damping=ctx.number(doc, "damping", "elbow", default.damping, lo=0.0),
        link_length=ctx.number(doc, "link_length", "elbow", default.link_length, lo=0.01),
        link_mass=ctx.number(doc, "link_mass", "elbow", default.link_mass, lo=0.0),
        phi_max=ctx.number(doc, "phi_max", "elbow", default.phi_max, lo=0.01),
        p_max=ctx.number(doc, "p_max", "elbow", default.p_max, lo=0.0),
    )


def _validate_wrist(doc: Any, ctx: _Ctx):
    if not isinstance(doc, dict):
        ctx.fail("wrist", "missing or not an object")
        return joints.WristVSModel()
    variant = doc.get("variant", "VSWrist")
    if variant not in ("VSWrist", "Rotator", "QuickDisconnect"):
        ctx.fail(
            "wrist.variant",
            f"must be 'VSWrist', 'Rotator' or 'QuickDisconnect', got {variant!r}",
        )
        variant = "VSWrist"
    ps_rom = (-math.pi / 2, math.pi / 2)
    if "ps_rom_deg" in doc:
        v = doc["ps_rom_deg"]
        if (
            isinstance(v, list)
            and len(v) == 2
            and all(isinstance(x, (int, float)) for x in v)
            and v[0] < v[1]
        ):
            ps_rom = (math.radians(v[0]), math.radians(v[1]))
        else:
            ctx.fail("wrist.ps_rom_deg", f"expected [min, max] degrees with min < max, got {v!r}")
    if variant == "VSWrist":
        default = joints.WristVSModel()
        ctx.check_keys(
            doc,
            {"variant", "r", "spring", "c_max", "rom_cone_deg", "ps_rom_deg", "phi_max"},
            "wrist",
        )
        rom_cone = math.radians(ctx.number(doc, "rom_cone_deg", "wrist", 60.0, lo=1.0, hi=90.0))
        return joints.WristVSModel(
            r=ctx.number(doc, "r", "wrist", default.r, lo=1e-4),
            spring_linear=ctx.spring(doc, "wrist", default.spring_linear),
            c_max=ctx.number(doc, "c_max", "wrist", default.c_max, lo=0.0),
            rom_cone=rom_cone,
            ps_rom=ps_rom,
            phi_max=ctx.number(doc, "phi_max", "wrist", default.phi_max, lo=1e-4),
        )
    ctx.check_keys(doc, {"variant", "ps_rom_deg", "ps_rate"}, "wrist")
    return joints.WristCommercialModel(
        variant=joints.WristCommercialVariant(variant),
        ps_rom=ps_rom,
        ps_rate=ctx.number(doc, "ps_rate", "wrist", 2.0, lo=0.01),
    )


def _validate_hand(doc: Any, ctx: _Ctx) -> joints.HandModel:
    default = joints.HandModel()
    if not isinstance(doc, dict):
        ctx.fail("hand", "missing or not an object")
        return default
    ctx.check_keys(doc, {"variant", "tendon_stiffness", "max_aperture"}, "hand")
    variant = doc.get("variant", "SoftHandPro")
    if variant not in ("SoftHandPro", "SoftHand2"):
        ctx.fail("hand.variant", f"must be 'SoftHandPro' or 'SoftHand2', got {variant!r}")
        variant = "SoftHandPro"
    return joints.HandModel(
        variant=joints.HandVariant(variant),
        tendon_stiffness=ctx.number(doc, "tendon_stiffness", "hand", default.tendon_stiffness, lo=0.0),
        max_aperture=ctx.number(doc, "max_aperture", "hand", default.max_aperture, lo=0.01),
    )


def _validate_control(doc: Any, ctx: _Ctx) -> tuple[dict, control.EmgThresholds]:
    gains: dict = {}
    th = control.EmgThresholds()
    if doc is None:
        return gains, th
    if not isinstance(doc, dict):
        ctx.fail("control", "expected an object")
        return gains, th
    ctx.check_keys(doc, {"kp", "ki", "kd", "emg"}, "control")
    for g in ("kp", "ki", "kd"):
        if g in doc:
            gains[g] = ctx.number(doc, g, "control", 0.0, lo=0.0)
    emg = doc.get("emg")
    if emg is not None:
        if not isinstance(emg, dict):
            ctx.fail("control.emg", "expected an object")
            return gains, th
        ctx.check_keys(
            emg,
            {"on", "off", "switch_min_ms", "switch_max_ms", "stiffness_entry_ms", "refractory_ms", "velocity_gain"},
            "control.emg",
        )
        th = control.EmgThresholds(
            on=ctx.number(emg, "on", "control.emg", th.on, lo=0.0, hi=1.0),
            off=ctx.number(emg, "off", "control.emg", th.off, lo=0.0, hi=1.0),
            switch_min_ms=ctx.number(emg, "switch_min_ms", "control.emg", th.switch_min_ms, lo=0.0),
            switch_max_ms=ctx.number(emg, "switch_max_ms", "control.emg", th.switch_max_ms, lo=0.0),
            stiffness_entry_ms=ctx.number(
                emg, "stiffness_entry_ms", "control.emg", th.stiffness_entry_ms, lo=0.0
            ),
            refractory_ms=ctx.number(emg, "refractory_ms", "control.emg", th.refractory_ms, lo=0.0),
            velocity_gain=ctx.number(emg, "velocity_gain", "control.emg", th.velocity_gain, lo=0.0),
        )
    return gains, th


def _validate_environment(doc: Any, ctx: _Ctx) -> dict:
    env = {"gravity": 9.81, "contact_stiffness": 500.0, "contact_damping": 5.0, "knock_force": 3.0}
    if doc is None:
        return env
    if not isinstance(doc, dict):
        ctx.fail("environment", "expected an object")
        return env
    ctx.check_keys(doc, set(env), "environment")
    env["gravity"] = ctx.number(doc, "gravity", "environment", env["gravity"], lo=0.0)
    env["contact_stiffness"] = ctx.number(
        doc, "contact_stiffness", "environment", env["contact_stiffness"], lo=0.0
    )
    env["contact_damping"] = ctx.number(
        doc, "contact_damping", "environment", env["contact_damping"], lo=0.0
    )
    env["knock_force"] = ctx.number(doc, "knock_force", "environment", env["knock_force"], lo=1e-3)
    return env


def validate(doc: dict) -> PlatformConfig:
    """Validate and default a raw config document; raises ConfigError with
    the full violation list."""
    ctx = _Ctx()
    if not isinstance(doc, dict):
        raise ConfigError([("", "config must be a JSON object")])
    ctx.check_keys(doc, {"elbow", "wrist", "hand", "control", "environment"}, "")
    for slot in ("elbow", "wrist", "hand"):
        if slot not in doc:
            ctx.fail(slot, "missing required slot")
    elbow = _validate_elbow(doc.get("elbow", {}), ctx)
    wrist = _validate_wrist(doc.get("wrist", {}), ctx)
    hand = _validate_hand(doc.get("hand", {}), ctx)
    gains, th = _validate_control(doc.get("control"), ctx)
    env = _validate_environment(doc.get("environment"), ctx)
    if ctx.errors:
        raise ConfigError(ctx.errors)
    return PlatformConfig(
        elbow=elbow, wrist=wrist, hand=hand, gains=gains, emg_thresholds=th,
        environment=env, raw=doc,
    )


def load_config(path: str | Path) -> PlatformConfig:
    with open(path) as f:
        return validate(json.load(f))


def resolved_doc(cfg: PlatformConfig) -> dict:
    """Fully-defaulted config document (what the simulation actually uses)."""
    elbow = cfg.elbow
    doc: dict[str, Any] = {
        "elbow": {
            "variant": cfg.elbow_variant,
            "spring": {"a": elbow.spring.a, "b": elbow.spring.b},
            "rom_deg": [math.degrees(elbow.rom[0]), math.degrees(elbow.rom[1])],
            "inertia": elbow.inertia,
            "damping": elbow.damping,
            "link_length": elbow.link_length,
            "link_mass": elbow.link_mass,
            "phi_max": elbow.phi_max,
            "p_max": elbow.p_max,
        },
        "hand": {
            "variant": cfg.hand_variant,
            "tendon_stiffness": cfg.hand.tendon_stiffness,
            "max_aperture": cfg.hand.max_aperture,
        },
        "control": dict(cfg.gains),
        "environment": dict(cfg.environment),
    }
    if isinstance(cfg.wrist, joints.WristVSModel):
        w = cfg.wrist
        doc["wrist"] = {
            "variant": "VSWrist",
            "r": w.r,
            "spring": {"a": w.spring_linear.a, "b": w.spring_linear.b},
            "c_max": w.c_max,
            "rom_cone_deg": math.degrees(w.rom_cone),
            "ps_rom_deg": [math.degrees(w.ps_rom[0]), math.degrees(w.ps_rom[1])],
            "phi_max": w.phi_max,
        }
    else:
        doc["wrist"] = {
            "variant": cfg.wrist_variant,
            "ps_rom_deg": [math.degrees(cfg.wrist.ps_rom[0]), math.degrees(cfg.wrist.ps_rom[1])],
            "ps_rate": cfg.wrist.ps_rate,
        }
    return doc


@dataclass(frozen=True)
class DofAccounting:
    kinematic: int
    stiffness: int
    active: int
    passive: int


def dof_accounting(cfg: PlatformConfig) -> DofAccounting:
    """Kinematic and stiffness DoF counts; hands count synergies, not the
    19 mechanical joints. Passive DoFs (QuickDisconnect wPS) count as
    kinematic but not active."""
    kin, active, passive, stiff = 1, 1, 0, 1  # elbow
    if isinstance(cfg.wrist, joints.WristVSModel):
        kin += 3
        active += 3
        stiff += 1
    elif cfg.wrist.variant is joints.WristCommercialVariant.ROTATOR:
        kin += 1
        active += 1
    else:  # QuickDisconnect: passive wPS
        kin += 1
        passive += 1
    n_syn = cfg.hand.n_synergies
    kin += n_syn
    active += n_syn
    return DofAccounting(kinematic=kin, stiffness=stiff, active=active, passive=passive)


def assemble(cfg: PlatformConfig, payload: float = 0.0) -> dynamics.World:
    """Build a fresh simulation world from a validated config."""
    import copy

    env = cfg.environment or {}
    world = dynamics.World(
        elbow=copy.deepcopy(cfg.elbow),
        wrist=copy.deepcopy(cfg.wrist),
        hand=copy.deepcopy(cfg.hand),
        gains=dict(cfg.gains),
        emg_thresholds=copy.deepcopy(cfg.emg_thresholds),
        payload=payload,
        gravity=env.get("gravity", 9.81),
    )
    return world
