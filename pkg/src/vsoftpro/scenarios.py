"""Scenario scripting, deterministic execution, and run metrics.

A scenario is a timed script of reference setpoints, disturbances, and
environment objects driving one simulation run. Canned scenarios that
reproduce the platform demonstrations ship as JSON fixtures in
`vsoftpro/data/`.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import control, dynamics, joints
from .control import CONTROL_DT, EmgFrame, JointReference
from .platform import ConfigError, PlatformConfig, assemble, resolved_doc


class DivergenceError(RuntimeError):
    """Simulation produced a non-finite state; run aborted with partial log."""


@dataclass
class Setpoint:
    t: float
    joint: str
    q_ref: Optional[float] = None
    k_ref: Optional[float] = None


@dataclass
class Scenario:
    name: str
    duration: float
    timeline: list[Setpoint] = field(default_factory=list)
    disturbances: list[dynamics.Disturbance] = field(default_factory=list)
    objects: list[dynamics.EnvObject] = field(default_factory=list)
    grasp_object: Optional[joints.GraspObject] = None
    emg_source: str = "none"  # none | file | synthetic
    emg_path: Optional[str] = None
    emg_segments: list[EmgFrame] = field(default_factory=list)
    mode: str = "direct"  # direct | emg
    payload: float = 0.0
    gravity: Optional[float] = None  # None = config environment default
    interp: str = "hold"  # hold | ramp
    duty_freeze_t: Optional[float] = None


def validate_scenario(doc: dict, cfg: PlatformConfig, base_dir: Path | None = None) -> Scenario:
    """Validate a raw scenario document against a platform config."""
    errors: list[tuple[str, str]] = []
    if not isinstance(doc, dict):
        raise ConfigError([("", "scenario must be a JSON object")])
    allowed = {
        "name", "duration", "timeline", "disturbances", "objects", "grasp_object",
        "emg", "mode", "payload", "gravity", "interp", "duty_freeze_t",
    }
    for key in doc:
        if key not in allowed:
            errors.append((key, "unknown field"))
    name = doc.get("name", "unnamed")
    duration = doc.get("duration")
    if not isinstance(duration, (int, float)) or duration <= 0:
        errors.append(("duration", f"must be a positive number, got {duration!r}"))
        duration = 1.0
    world_joints = set(assemble(cfg).joint_ids())

    timeline: list[Setpoint] = []
    last_t = -math.inf
    for i, sp in enumerate(doc.get("timeline", [])):
        path = f"timeline[{i}]"
        if not isinstance(sp, dict):
            errors.append((path, "expected an object"))
            continue
        t = sp.get("t", 0.0)
        if t < last_t:
            errors.append((path + ".t", "timeline must be sorted by t"))
        last_t = max(last_t, t)
        jid = sp.get("joint")
        if jid not in world_joints:
            errors.append((path + ".joint", f"{jid!r} not present in this configuration"))
            continue
        timeline.append(Setpoint(t=float(t), joint=jid, q_ref=sp.get("q_ref"), k_ref=sp.get("k_ref")))

    disturbances = []
    for i, d in enumerate(doc.get("disturbances", [])):
        path = f"disturbances[{i}]"
        jid = d.get("joint")
        if jid not in world_joints:
            errors.append((path + ".joint", f"{jid!r} not present in this configuration"))
            continue
        try:
            disturbances.append(
                dynamics.Disturbance(jid, float(d["t0"]), float(d["t1"]), float(d["torque"]))
            )
        except (KeyError, ValueError) as exc:
            errors.append((path, str(exc)))

    objects = []
    env = cfg.environment or {}
    for i, o in enumerate(doc.get("objects", [])):
        try:
            objects.append(
                dynamics.EnvObject(
                    id=str(o.get("id", f"obj{i}")),
                    position=float(o["position"]),
                    knock_force=float(o.get("knock_force", env.get("knock_force", 3.0))),
                    contact_stiffness=float(
                        o.get("contact_stiffness", env.get("contact_stiffness", 500.0))
                    ),
                    contact_damping=float(
                        o.get("contact_damping", env.get("contact_damping", 5.0))
                    ),
                )
            )
        except (KeyError, ValueError) as exc:
            errors.append((f"objects[{i}]", str(exc)))

    grasp = None
    if doc.get("grasp_object") is not None:
        g = doc["grasp_object"]
        if not isinstance(g, dict) or "diameter" not in g:
            errors.append(("grasp_object", "expected an object with a 'diameter'"))
        else:
            grasp = joints.GraspObject(diameter=float(g["diameter"]))

    emg_source, emg_path, emg_segments = "none", None, []
    emg = doc.get("emg")
    if emg is not None:
        emg_source = emg.get("source", "none")
        if emg_source == "file":
            emg_path = emg.get("path")
            if emg_path is None:
                errors.append(("emg.path", "required for file source"))
            else:
                p = Path(emg_path)
                if base_dir is not None and not p.is_absolute():
                    p = base_dir / p
                if not p.exists():
                    errors.append(("emg.path", f"no such file: {p}"))
                else:
                    emg_path = str(p)
        elif emg_source == "synthetic":
            try:
                emg_segments = [
                    EmgFrame(float(s["t"]), float(s["e1"]), float(s["e2"]))
                    for s in emg.get("segments", [])
                ]
            except (KeyError, ValueError) as exc:
                errors.append(("emg.segments", str(exc)))
        elif emg_source != "none":
            errors.append(("emg.source", f"must be none, file or synthetic, got {emg_source!r}"))

    mode = doc.get("mode", "direct")
    if mode not in ("direct", "emg"):
        errors.append(("mode", f"must be 'direct' or 'emg', got {mode!r}"))
        mode = "direct"
    interp = doc.get("interp", "hold")
    if interp not in ("hold", "ramp"):
        errors.append(("interp", f"must be 'hold' or 'ramp', got {interp!r}"))
        interp = "hold"

    if errors:
        raise ConfigError(errors)
    return Scenario(
        name=name,
        duration=float(duration),
        timeline=timeline,
        disturbances=disturbances,
        objects=objects,
        grasp_object=grasp,
        emg_source=emg_source,
        emg_path=emg_path,
        emg_segments=emg_segments,
        mode=mode,
        payload=float(doc.get("payload", 0.0)),
        gravity=doc.get("gravity"),
        interp=interp,
        duty_freeze_t=doc.get("duty_freeze_t"),
    )


def _emg_provider(scenario: Scenario):
    if scenario.emg_source == "file":
        frames = control.read_emg_csv(scenario.emg_path)
    elif scenario.emg_source == "synthetic":
        frames = scenario.emg_segments
    else:
        return None
    times = [f.t for f in frames]

    def provider(t: float) -> Optional[EmgFrame]:
        i = bisect_right(times, t) - 1
        return frames[i] if i >= 0 else None

    return provider


class _TimelineTrack:
    """Piecewise reference trajectory of one (joint, field) pair."""

    def __init__(self, points: list[tuple[float, float]], interp: str):
        self.ts = [p[0] for p in points]
        self.vs = [p[1] for p in points]
        self.interp = interp

    def value(self, t: float) -> Optional[float]:
        i = bisect_right(self.ts, t) - 1
        if i < 0:
            return None
        if self.interp == "ramp" and i + 1 < len(self.ts):
            t0, t1 = self.ts[i], self.ts[i + 1]
            if t1 > t0:
                f = (t - t0) / (t1 - t0)
                return self.vs[i] + f * (self.vs[i + 1] - self.vs[i])
        return self.vs[i]


def reference_tracks(scenario: Scenario) -> dict[tuple[str, str], _TimelineTrack]:
    points: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for sp in scenario.timeline:
        if sp.q_ref is not None:
            points.setdefault((sp.joint, "q"), []).append((sp.t, sp.q_ref))
        if sp.k_ref is not None:
            points.setdefault((sp.joint, "k"), []).append((sp.t, sp.k_ref))
    return {key: _TimelineTrack(pts, scenario.interp) for key, pts in points.items()}


@dataclass
class RunMetrics:
    tracking_rmse: dict[str, float]
    peak_contact_force: float
    objects_knocked: int
    settling_time: Optional[float]
    steady_sag: float
    energy_J: float
    disturbance_deflection: Optional[float]
    diverged: bool = False

    def to_dict(self) -> dict:
        return {
            "tracking_rmse": self.tracking_rmse,
            "peak_contact_force": self.peak_contact_force,
            "objects_knocked": self.objects_knocked,
            "settling_time": self.settling_time,
            "steady_sag": self.steady_sag,
            "energy_J": self.energy_J,
            "disturbance_deflection": self.disturbance_deflection,
            "diverged": self.diverged,
        }


def log_header(n_synergies: int) -> list[str]:
    cols = ["t", "q_elbow", "qd_elbow", "wfe", "rud", "ps"]
    cols += ["sigma1", "sigma2"][:n_synergies]
    cols += ["k_elbow", "k_wrist", "contact_force", "power_W", "active_joint", "knocked_count"]
    return cols


def setup_world(cfg: PlatformConfig, scenario: Scenario) -> dynamics.World:
    """Assemble a fresh world configured for one scenario run."""
    world = assemble(cfg, payload=scenario.payload)
    world.mode = scenario.mode
    if scenario.mode == "emg":
        world.sequencer = control.make_sequencer(world.joint_ids())
        world.detector = control.CocontractionDetector(world.emg_thresholds)
    if scenario.gravity is not None:
        world.gravity = float(scenario.gravity)
    world.objects = [
        dynamics.EnvObject(o.id, o.position, o.knock_force, o.contact_stiffness, o.contact_damping)
        for o in scenario.objects
    ]
    world.disturbances = list(scenario.disturbances)
    world.grasp_object = scenario.grasp_object
    world.emg_provider = _emg_provider(scenario)
    return world


def apply_timeline(
    world: dynamics.World, tracks: dict[tuple[str, str], _TimelineTrack], joint_ids: list[str]
) -> None:
    for (jid, which), track in tracks.items():
        v = track.value(world.t)
        if v is None:
            continue
        ref = JointReference(jid, q_ref=v) if which == "q" else JointReference(jid, k_ref=v)
        world.refs.apply(ref, joint_ids)


def run_scenario(
    cfg: PlatformConfig, scenario: Scenario, seed: int | None = None
) -> tuple[RunMetrics, list[list], list[str]]:
    """Execute a scenario deterministically; returns (metrics, log rows, header).

    The seed is recorded for reproducibility but the simulation itself is
    noise-free; identical inputs always give identical logs.
    """
    world = setup_world(cfg, scenario)
    tracks = reference_tracks(scenario)
    joint_ids = world.joint_ids()
    header = log_header(world.hand.n_synergies if world.hand else 0)
    rows: list[list] = []
    n_ticks = int(round(scenario.duration / CONTROL_DT))
    diverged = False
    for _ in range(n_ticks):
        if scenario.mode == "direct":
            apply_timeline(world, tracks, joint_ids)
        if scenario.duty_freeze_t is not None and world.t >= scenario.duty_freeze_t:
            world.duties_frozen = True
        world.tick()
        if not math.isfinite(world.q) or not math.isfinite(world.qd):
            diverged = True
            break
        sigma = world.sigma
        row = [world.t, world.q, world.qd, float(world.wrist_x[0]), float(world.wrist_x[1]),
               world.ps_angle]
        row += [float(s) for s in sigma]
        row += [
            world.realized_elbow_stiffness(),
            world.realized_wrist_stiffness(),
            world.contact_force,
            world.ledger.instantaneous_power,
            world.active_joint(),
            world.knocked_count(),
        ]
        rows.append(row)
    metrics = metrics_from_log(rows, header, scenario)
    metrics.diverged = diverged
    if diverged:
        raise DivergenceError(f"non-finite state at t={world.t:.3f}s in scenario {scenario.name}")
    return metrics, rows, header


_JOINT_COLUMNS = {
    "elbow": "q_elbow",
    "wrist_fe": "wfe",
    "wrist_rud": "rud",
    "wrist_ps": "ps",
    "hand_s1": "sigma1",
    "hand_s2": "sigma2",
}


def metrics_from_log(rows: list[list], header: list[str], scenario: Scenario) -> RunMetrics:
    """Compute RunMetrics from log rows; pure in (log, scenario)."""
    col = {name: i for i, name in enumerate(header)}
    tracks = reference_tracks(scenario)
    if not rows:
        return RunMetrics({}, 0.0, 0, None, 0.0, 0.0, None)
    ts = [r[col["t"]] for r in rows]

    rmse: dict[str, float] = {}
    for (jid, which), track in tracks.items():
        if which != "q" or jid not in _JOINT_COLUMNS:
            continue
        c = col.get(_JOINT_COLUMNS[jid])
        if c is None:
            continue
        errs = []
        for r in rows:
            ref = track.value(r[col["t"]])
            if ref is not None:
                errs.append(r[c] - ref)
        if errs:
            rmse[jid] = float(np.sqrt(np.mean(np.square(errs))))

    peak_contact = max(r[col["contact_force"]] for r in rows)
    knocked = int(rows[-1][col["knocked_count"]])
    energy = sum(r[col["power_W"]] for r in rows) * CONTROL_DT

    settling = None
    steady_sag = 0.0
    elbow_track = tracks.get(("elbow", "q"))
    if elbow_track is not None:
        final_ref = elbow_track.value(ts[-1])
        t_last = elbow_track.ts[-1]
        prev_ref = elbow_track.vs[-2] if len(elbow_track.vs) > 1 else 0.0
        band = max(0.02 * abs(elbow_track.vs[-1] - prev_ref), 1e-3)
        qc = col["q_elbow"]
        inside = [abs(r[qc] - final_ref) <= band for r in rows]
        for i in range(len(rows)):
            if ts[i] >= t_last and all(inside[i:]):
                settling = ts[i] - t_last
                break
        tail = [r[qc] for r, t in zip(rows, ts) if t >= ts[-1] - 0.1 * scenario.duration]
        steady_sag = float(final_ref - np.mean(tail))

    deflection = None
    windows = [(d.t0, d.t1) for d in scenario.disturbances if d.joint_id == "elbow"]
    if windows:
        qc = col["q_elbow"]
        deflection = 0.0
        for t0, t1 in windows:
            before = [r[qc] for r, t in zip(rows, ts) if t < t0]
            base = before[-1] if before else 0.0
            during = [abs(r[qc] - base) for r, t in zip(rows, ts) if t0 <= t < t1]
            if during:
                deflection = max(deflection, max(during))

    return RunMetrics(
        tracking_rmse=rmse,
        peak_contact_force=float(peak_contact),
        objects_knocked=knocked,
        settling_time=settling,
        steady_sag=steady_sag,
        energy_J=float(energy),
        disturbance_deflection=deflection,
    )


# ---------------------------------------------------------------------------
# Output and fixtures


def write_log_csv(path: Path, rows: list[list], header: list[str]) -> None:
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def read_log_csv(path: Path) -> tuple[list[list], list[str]]:
    with open(path) as f:
        header = f.readline().strip().split(",")
        rows = []
        for line in f:
            cells = line.rstrip("\n").split(",")
            row: list = []
            for name, cell in zip(header, cells):
                if name == "active_joint":
                    row.append(cell)
                elif name == "knocked_count":
                    row.append(int(cell))
                else:
                    row.append(float(cell))
            rows.append(row)
    return rows, header


def write_run_outputs(
    out_dir: Path,
    cfg: PlatformConfig,
    metrics: RunMetrics,
    rows: list[list],
    header: list[str],
    seed: int | None = None,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_log_csv(out_dir / "log.csv", rows, header)
    doc = metrics.to_dict()
    if seed is not None:
        doc["seed"] = seed
    with open(out_dir / "metrics.json", "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    with open(out_dir / "config.resolved.json", "w") as f:
        json.dump(resolved_doc(cfg), f, indent=2, sort_keys=True)
        f.write("\n")


def list_canned() -> list[str]:
    files = resources.files("vsoftpro.data")
    return sorted(
        p.name[: -len(".json")]
        for p in files.iterdir()
        if p.name.endswith(".json") and not p.name.startswith("config")
    )


def load_canned(name: str) -> dict:
    path = resources.files("vsoftpro.data") / f"{name}.json"
    with path.open() as f:
        return json.load(f)


def sweep(
    cfg_doc: dict,
    scenario_doc: dict,
    param_path: str,
    values: list[float],
    base_dir: Path | None = None,
) -> tuple[list[str], list[list]]:
    """Run the scenario once per value of a dotted parameter path.

    Paths start with `config.` or `scenario.` and may index lists, e.g.
    `scenario.timeline[0].k_ref`. Returns an aggregated metrics table.
    """
    from . import platform as plat

    header = None
    table: list[list] = []
    for v in values:
        cfg_i = json.loads(json.dumps(cfg_doc))
        scen_i = json.loads(json.dumps(scenario_doc))
        if param_path.startswith("config."):
            _set_path(cfg_i, param_path[len("config."):], v)
        elif param_path.startswith("scenario."):
            _set_path(scen_i, param_path[len("scenario."):], v)
        else:
            raise ConfigError([(param_path, "path must start with 'config.' or 'scenario.'")])
        cfg = plat.validate(cfg_i)
        scenario = validate_scenario(scen_i, cfg, base_dir)
        metrics, _, _ = run_scenario(cfg, scenario)
        d = metrics.to_dict()
        rmse = d.pop("tracking_rmse")
        d["tracking_rmse_max"] = max(rmse.values()) if rmse else 0.0
        if header is None:
            header = [param_path] + sorted(d)
        table.append([v] + [d[k] for k in sorted(d)])
    return header or [param_path], table


def _set_path(doc, path: str, value) -> None:
    import re

    tokens = []
    for part in path.split("."):
        m = re.fullmatch(r"([^\[\]]+)((\[\d+\])*)", part)
        if m is None:
            raise ConfigError([(path, f"bad path segment {part!r}")])
        tokens.append(m.group(1))
        for idx in re.findall(r"\[(\d+)\]", m.group(2)):
            tokens.append(int(idx))
    target = doc
    try:
        for tok in tokens[:-1]:
            target = target[tok]
        target[tokens[-1]] = value
    except (KeyError, IndexError, TypeError) as exc:
        raise ConfigError([(path, f"path does not address an existing field ({exc})")])
