"""Live telemetry server.

Advances one simulation world in wall-clock-paced ticks, streams state
frames to any number of clients, and applies operator commands between
ticks. The wire protocol is newline-delimited JSON (UTF-8), carried over
a WebSocket endpoint at ``/ws`` and a plain TCP socket on ``port + 1``
with identical payloads.

Wire messages::

    {"type": "config", ...}                        # server -> client, on connect
    {"type": "frame", "t": ..., "joints": {...}}   # server -> client, at --rate Hz
    {"type": "cmd", "id": 7, "cmd": "set_ref", ...}# client -> server
    {"type": "ack", "id": 7, "flags": [...]}       # reply, correlation id echoed
    {"type": "err", "id": 7, "error": "..."}       # reply on rejected command

Commands: ``set_ref {joint, q_ref?, k_ref?}``, ``set_mode {mode}``,
``emg_override {e1, e2}``, ``manual_reposition {angle}`` (passive wrist
only), ``pause``, ``resume``, ``load_scenario {name}``. Rejected
commands leave the world untouched.
"""

from __future__ import annotations

import asyncio
import json
import math
import time
from dataclasses import dataclass
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import control, joints, scenarios
from .control import CONTROL_DT, EmgFrame, JointReference
from .platform import ConfigError, PlatformConfig, assemble, resolved_doc

# ---------------------------------------------------------------------------
# Codec


def encode(msg: dict) -> bytes:
    """Serialize one protocol message to a newline-terminated JSON line."""
    return (json.dumps(msg, separators=(",", ":"), sort_keys=True) + "\n").encode("utf-8")


@dataclass
class DecodeFailure:
    """A line that failed to parse; the stream resumes at the next newline."""

    offset: int  # byte offset of the offending line in the stream
    error: str


class LineDecoder:
    """Incremental newline-delimited JSON decoder with byte-offset errors."""

    def __init__(self):
        self._buf = b""
        self._offset = 0  # bytes fully consumed so far

    def feed(self, data: bytes) -> list[dict | DecodeFailure]:
        self._buf += data
        out: list[dict | DecodeFailure] = []
        while True:
            nl = self._buf.find(b"\n")
            if nl < 0:
                break
            line, self._buf = self._buf[:nl], self._buf[nl + 1 :]
            start = self._offset
            self._offset += nl + 1
            if not line.strip():
                continue
            try:
                msg = json.loads(line)
                if not isinstance(msg, dict):
                    raise ValueError("message must be a JSON object")
                out.append(msg)
            except ValueError as exc:
                out.append(DecodeFailure(offset=start, error=str(exc)))
        return out

    def flush(self) -> Optional[DecodeFailure]:
        """Report a trailing partial line (stream ended mid-message)."""
        if not self._buf.strip():
            return None
        fail = DecodeFailure(offset=self._offset, error="truncated line at end of stream")
        self._offset += len(self._buf)
        self._buf = b""
        return fail


# ---------------------------------------------------------------------------
# Session


class Session:
    """One live simulation session: a world plus command handling.

    The session is transport-agnostic and synchronous; the server wraps it
    in an asyncio loop. Commands are dictionaries straight off the wire and
    every one gets an ``ack`` or ``err`` reply carrying its correlation id.
    """

    def __init__(self, cfg: PlatformConfig, rate: float = 50.0):
        self.cfg = cfg
        self.rate = float(rate)
        self.world = assemble(cfg)
        self.paused = False
        self.scenario: Optional[scenarios.Scenario] = None
        self._tracks: dict = {}
        self.frame_stride = max(1, int(round(control.CONTROL_RATE_HZ / self.rate)))
        self._tick_count = 0

    # -- wire messages -----------------------------------------------------

    def config_message(self) -> dict:
        """Handshake message advertising the joint set and its ranges."""
        doc = resolved_doc(self.cfg)
        elbow = self.cfg.elbow
        k_min = 2.0 * elbow.spring.a * elbow.spring.b
        k_max = k_min * math.cosh(elbow.spring.b * elbow.p_max)
        joints_out: dict[str, dict] = {}
        for jid in self.world.joint_ids():
            if jid == "elbow":
                joints_out[jid] = {
                    "q_range": list(elbow.rom),
                    "k_range": [k_min, k_max],
                }
            elif jid == "wrist_ps":
                joints_out[jid] = {"q_range": list(self.cfg.wrist.ps_rom), "k_range": None}
            elif jid in ("wrist_fe", "wrist_rud"):
                w = self.cfg.wrist
                wk_min = joints.wrist_stiffness_scalar(w, 0.0)
                wk_max = joints.wrist_stiffness_scalar(w, w.c_max)
                joints_out[jid] = {
                    "q_range": [-w.rom_cone, w.rom_cone],
                    "k_range": [wk_min, wk_max],
                }
            else:  # hand synergies
                joints_out[jid] = {"q_range": [0.0, 1.0], "k_range": None}
        return {
            "type": "config",
            "rate": self.rate,
            "config": doc,
            "joints": joints_out,
        }

    def frame(self) -> dict:
        w = self.world
        refs = w.refs
        jstate: dict[str, dict] = {}
        for jid in w.joint_ids():
            if jid == "elbow":
                jstate[jid] = {
                    "q": w.q,
                    "qd": w.qd,
                    "q_ref": refs.elbow_q,
                    "k_ref": refs.elbow_k,
                    "k_realized": w.realized_elbow_stiffness(),
                }
            elif jid == "wrist_fe":
                jstate[jid] = {
                    "q": float(w.wrist_x[0]),
                    "qd": 0.0,
                    "q_ref": refs.wfe,
                    "k_ref": refs.wrist_k,
                    "k_realized": w.realized_wrist_stiffness(),
                }
            elif jid == "wrist_rud":
                jstate[jid] = {
                    "q": float(w.wrist_x[1]),
                    "qd": 0.0,
                    "q_ref": refs.rud,
                    "k_ref": refs.wrist_k,
                    "k_realized": w.realized_wrist_stiffness(),
                }
            elif jid == "wrist_ps":
                jstate[jid] = {
                    "q": w.ps_angle,
                    "qd": 0.0,
                    "q_ref": refs.ps,
                    "k_ref": None,
                    "k_realized": None,
                }
            else:  # hand_s1 / hand_s2
                i = int(jid[-1]) - 1
                sig = w.sigma
                jstate[jid] = {
                    "q": float(sig[i]) if i < len(sig) else 0.0,
                    "qd": 0.0,
                    "q_ref": float(refs.hand[i]),
                    "k_ref": None,
                    "k_realized": None,
                }
        return {
            "type": "frame",
            "t": w.t,
            "joints": jstate,
            "emg": {"e1": w.emg.e1, "e2": w.emg.e2},
            "active_joint": w.active_joint(),
            "mode": w.control_mode() if w.mode == "emg" else "direct",
            "contact_force": w.contact_force,
            "power_W": w.ledger.instantaneous_power,
            "knocked": [o.id for o in w.objects if o.knocked],
            "paused": self.paused,
        }

    # -- commands ----------------------------------------------------------

    def apply_command(self, msg: dict) -> dict:
        cid = msg.get("id")

        def err(text: str) -> dict:
            return {"type": "err", "id": cid, "error": text}

        if msg.get("type") != "cmd":
            return err(f"unknown message type {msg.get('type')!r}")
        cmd = msg.get("cmd")
        try:
            if cmd == "set_ref":
                return self._cmd_set_ref(msg, cid)
            if cmd == "set_mode":
                return self._cmd_set_mode(msg, cid)
            if cmd == "emg_override":
                frame = EmgFrame(self.world.t, float(msg["e1"]), float(msg["e2"]))
                self.world.emg = frame
                return {"type": "ack", "id": cid, "flags": []}
            if cmd == "manual_reposition":
                return self._cmd_manual_reposition(msg, cid)
            if cmd == "pause":
                self.paused = True
                return {"type": "ack", "id": cid, "flags": []}
            if cmd == "resume":
                self.paused = False
                return {"type": "ack", "id": cid, "flags": []}
            if cmd == "load_scenario":
                return self._cmd_load_scenario(msg, cid)
        except (KeyError, TypeError, ValueError) as exc:
            return err(str(exc))
        return err(f"unknown command {cmd!r}")

    def _cmd_set_ref(self, msg: dict, cid) -> dict:
        jid = msg.get("joint")
        ref = JointReference(
            joint_id=jid,
            q_ref=None if msg.get("q_ref") is None else float(msg["q_ref"]),
            k_ref=None if msg.get("k_ref") is None else float(msg["k_ref"]),
        )
        if ref.q_ref is None and ref.k_ref is None:
            return {"type": "err", "id": cid, "error": "set_ref needs q_ref or k_ref"}
        try:
            self.world.refs.apply(ref, self.world.joint_ids())
        except KeyError as exc:
            return {"type": "err", "id": cid, "error": str(exc.args[0])}
        # report clamping immediately via the same map the control tick uses
        _, flags = control.refs_to_motor_targets(
            self.world.elbow, self.world.wrist, self.world.hand, self.world.refs
        )
        return {"type": "ack", "id": cid, "flags": flags}

    def _cmd_set_mode(self, msg: dict, cid) -> dict:
        mode = msg.get("mode")
        if mode not in ("direct", "emg"):
            return {"type": "err", "id": cid, "error": f"mode must be direct or emg, got {mode!r}"}
        self.world.mode = mode
        if mode == "emg":
            self.world.sequencer = control.make_sequencer(self.world.joint_ids())
            self.world.detector = control.CocontractionDetector(self.world.emg_thresholds)
        else:
            self.world.sequencer = None
            self.world.detector = None
        return {"type": "ack", "id": cid, "flags": []}

    def _cmd_manual_reposition(self, msg: dict, cid) -> dict:
        wrist = self.world.wrist
        if not (
            isinstance(wrist, joints.WristCommercialModel)
            and wrist.variant is joints.WristCommercialVariant.QUICK_DISCONNECT
        ):
            return {"type": "err", "id": cid, "error": "unsupported for this wrist"}
        try:
            wrist.manual_reposition(float(msg["angle"]))
        except joints.RangeError as exc:
            return {"type": "err", "id": cid, "error": str(exc)}
        return {"type": "ack", "id": cid, "flags": []}

    def _cmd_load_scenario(self, msg: dict, cid) -> dict:
        name = msg.get("name")
        try:
            doc = scenarios.load_canned(str(name))
            scenario = scenarios.validate_scenario(doc, self.cfg)
        except FileNotFoundError:
            return {"type": "err", "id": cid, "error": f"no such scenario {name!r}"}
        except ConfigError as exc:
            detail = "; ".join(f"{p}: {m}" for p, m in exc.errors)
            return {"type": "err", "id": cid, "error": f"scenario invalid: {detail}"}
        self.world = scenarios.setup_world(self.cfg, scenario)
        self.scenario = scenario
        self._tracks = scenarios.reference_tracks(scenario)
        self._tick_count = 0
        return {"type": "ack", "id": cid, "flags": []}

    # -- stepping ----------------------------------------------------------

    def tick(self) -> Optional[dict]:
        """Advance one control tick; returns a frame on broadcast ticks."""
        if self.paused:
            return None
        if self.scenario is not None and self.world.mode == "direct":
            scenarios.apply_timeline(self.world, self._tracks, self.world.joint_ids())
        self.world.tick()
        self._tick_count += 1
        if self._tick_count % self.frame_stride == 0:
            return self.frame()
        return None


# ---------------------------------------------------------------------------
# Server


class _Hub:
    """Fan-out of frames to client queues; slow clients drop old frames."""

    def __init__(self, maxsize: int = 16):
        self.queues: set[asyncio.Queue] = set()
        self.maxsize = maxsize

    def subscribe(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue(maxsize=self.maxsize)
        self.queues.add(q)
        return q

    def unsubscribe(self, q: asyncio.Queue) -> None:
        self.queues.discard(q)

    def broadcast(self, payload: bytes) -> None:
        for q in self.queues:
            if q.full():
                try:
                    q.get_nowait()
                except asyncio.QueueEmpty:
                    pass
            q.put_nowait(payload)


async def _sim_loop(
    session: Session,
    commands: asyncio.Queue,
    hub: _Hub,
    speed: float,
) -> None:
    """Advance the world in wall-clock-paced ticks, one writer only.

    Commands are drained and applied between ticks in arrival order; the
    pacing never changes numerical results, only wall-clock spacing.
    """
    tick_wall = CONTROL_DT / speed
    next_deadline = time.monotonic()
    while True:
        while not commands.empty():
            msg, reply_cb = commands.get_nowait()
            reply = session.apply_command(msg)
            reply_cb(encode(reply))
        frame = session.tick()
        if frame is not None:
            hub.broadcast(encode(frame))
        next_deadline += tick_wall
        delay = next_deadline - time.monotonic()
        if delay > 0:
            await asyncio.sleep(delay)
        else:  # fell behind; don't accumulate debt
            next_deadline = time.monotonic()
            await asyncio.sleep(0)


async def _client_io(
    session: Session,
    commands: asyncio.Queue,
    hub: _Hub,
    recv_bytes,
    send_bytes,
) -> None:
    """Shared per-client protocol loop for both transports."""
    out: asyncio.Queue = asyncio.Queue()
    frames = hub.subscribe()
    await send_bytes(encode(session.config_message()))
    decoder = LineDecoder()

    async def reader():
        while True:
            data = await recv_bytes()
            if not data:
                break
            for item in decoder.feed(data):
                if isinstance(item, DecodeFailure):
                    out.put_nowait(
                        encode({"type": "err", "error": item.error, "offset": item.offset})
                    )
                else:
                    commands.put_nowait((item, out.put_nowait))
        fail = decoder.flush()
        if fail is not None:
            out.put_nowait(encode({"type": "err", "error": fail.error, "offset": fail.offset}))

    async def writer():
        get_frame = asyncio.ensure_future(frames.get())
        get_reply = asyncio.ensure_future(out.get())
        try:
            while True:
                done, _ = await asyncio.wait(
                    {get_frame, get_reply}, return_when=asyncio.FIRST_COMPLETED
                )
                # replies first so command acks are never starved by frames
                if get_reply in done:
                    await send_bytes(get_reply.result())
                    get_reply = asyncio.ensure_future(out.get())
                if get_frame in done:
                    await send_bytes(get_frame.result())
                    get_frame = asyncio.ensure_future(frames.get())
        finally:
            get_frame.cancel()
            get_reply.cancel()

    w = asyncio.ensure_future(writer())
    try:
        await reader()
    finally:
        w.cancel()
        hub.unsubscribe(frames)


def _make_app(session: Session, commands: asyncio.Queue, hub: _Hub) -> FastAPI:
    app = FastAPI(title="vsoftpro telemetry")

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()

        async def recv() -> bytes:
            try:
                msg = await ws.receive()
            except RuntimeError:
                return b""
            if msg.get("type") == "websocket.disconnect":
                return b""
            data = msg.get("bytes")
            if data is None:
                data = (msg.get("text") or "").encode("utf-8")
            # ws messages may omit the trailing newline; the codec needs it
            if data and not data.endswith(b"\n"):
                data += b"\n"
            return data

        async def send(payload: bytes) -> None:
            await ws.send_text(payload.decode("utf-8"))

        try:
            await _client_io(session, commands, hub, recv, send)
        except WebSocketDisconnect:
            pass

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "t": session.world.t, "paused": session.paused}

    return app


async def _tcp_handler(session, commands, hub, reader, writer):
    async def recv() -> bytes:
        return await reader.read(4096)

    async def send(payload: bytes) -> None:
        writer.write(payload)
        await writer.drain()

    try:
        await _client_io(session, commands, hub, recv, send)
    except (ConnectionResetError, BrokenPipeError):
        pass
    finally:
        writer.close()


async def serve_async(
    cfg: PlatformConfig,
    port: int = 8765,
    rate: float = 50.0,
    speed: float = 1.0,
    host: str = "127.0.0.1",
    ready: Optional[asyncio.Event] = None,
) -> None:
    """Run the telemetry session: WebSocket on `port`, raw TCP on `port+1`."""
    import uvicorn

    session = Session(cfg, rate=rate)
    commands: asyncio.Queue = asyncio.Queue()
    hub = _Hub()

    sim = asyncio.ensure_future(_sim_loop(session, commands, hub, speed))
    tcp_server = await asyncio.start_server(
        lambda r, w: _tcp_handler(session, commands, hub, r, w), host, port + 1
    )
    app = _make_app(session, commands, hub)
    config = uvicorn.Config(app, host=host, port=port, log_level="warning", ws="auto")
    server = uvicorn.Server(config)
    if ready is not None:
        orig_startup = server.startup

        async def startup(**kw):
            await orig_startup(**kw)
            ready.set()

        server.startup = startup
    try:
        await server.serve()
    finally:
        sim.cancel()
        tcp_server.close()
        await tcp_server.wait_closed()


def serve(cfg: PlatformConfig, port: int = 8765, rate: float = 50.0, speed: float = 1.0) -> None:
    """Blocking entry point used by the `vsoftpro serve` CLI command."""
    if rate <= 0 or speed <= 0:
        raise ConfigError([("serve", "rate and speed must be > 0")])
    print(f"telemetry: ws://127.0.0.1:{port}/ws  tcp://127.0.0.1:{port + 1}  rate={rate}Hz")
    try:
        asyncio.run(serve_async(cfg, port=port, rate=rate, speed=speed))
    except KeyboardInterrupt:
        pass
