"""Wire codec, session command semantics, and live server tests."""

import asyncio
import json
import socket

import pytest

from vsoftpro import scenarios, telemetry
from vsoftpro.control import CONTROL_DT
from vsoftpro.platform import validate
from vsoftpro.telemetry import DecodeFailure, LineDecoder, Session, encode

# ---------------------------------------------------------------------------
# Codec


def test_codec_round_trip_corpus(codec_corpus):
    """The shared fixture corpus also drives the operator panel's codec."""
    for msg in codec_corpus["messages"]:
        dec = LineDecoder()
        out = dec.feed(encode(msg))
        assert out == [msg]


def test_codec_corpus_invalid_lines_all_fail(codec_corpus):
    for line in codec_corpus["invalid_lines"]:
        dec = LineDecoder()
        out = dec.feed(line.encode() + b"\n")
        assert len(out) == 1 and isinstance(out[0], DecodeFailure)


def test_decoder_handles_split_and_coalesced_lines():
    msgs = [{"type": "cmd", "id": i, "cmd": "pause"} for i in range(3)]
    stream = b"".join(encode(m) for m in msgs)
    dec = LineDecoder()
    got = []
    for i in range(0, len(stream), 7):  # drip-feed in awkward chunks
        got += dec.feed(stream[i : i + 7])
    assert got == msgs


def test_decoder_resynchronizes_after_bad_line_with_offset():
    dec = LineDecoder()
    good = {"type": "cmd", "id": 1, "cmd": "resume"}
    out = dec.feed(b'{"broken\n' + encode(good))
    assert isinstance(out[0], DecodeFailure)
    assert out[0].offset == 0
    assert out[1] == good
    # offsets keep counting across feeds
    out = dec.feed(b"also bad\n")
    assert out[0].offset == 9 + len(encode(good))


def test_decoder_flush_reports_truncated_tail():
    dec = LineDecoder()
    assert dec.feed(b'{"type": "cmd"') == []
    fail = dec.flush()
    assert isinstance(fail, DecodeFailure)
    assert dec.flush() is None


def test_decoder_non_object_payload_is_an_error():
    out = LineDecoder().feed(b"[1,2]\n")
    assert isinstance(out[0], DecodeFailure)


# ---------------------------------------------------------------------------
# Session


@pytest.fixture
def session(config1):
    return Session(config1, rate=50.0)


def test_config_message_advertises_joints_and_ranges(session):
    msg = session.config_message()
    assert msg["type"] == "config"
    assert sorted(msg["joints"]) == ["elbow", "hand_s1", "wrist_fe", "wrist_ps", "wrist_rud"]
    k_lo, k_hi = msg["joints"]["elbow"]["k_range"]
    assert (k_lo, k_hi) == (pytest.approx(10.0), pytest.approx(273.08232836016487))
    assert msg["joints"]["wrist_fe"]["k_range"] == [pytest.approx(24.0), pytest.approx(90.29269658600715)]
    assert msg["joints"]["hand_s1"]["q_range"] == [0.0, 1.0]


def test_frame_stride_matches_rate(session):
    frames = [f for f in (session.tick() for _ in range(40)) if f]
    assert len(frames) == 10  # 200 Hz / 50 Hz = every 4th tick
    spacing = frames[1]["t"] - frames[0]["t"]
    assert spacing == pytest.approx(1.0 / 50.0, abs=CONTROL_DT)
    assert frames[0]["type"] == "frame"


def test_set_ref_ack_and_effect(session):
    reply = session.apply_command(
        {"type": "cmd", "id": 5, "cmd": "set_ref", "joint": "elbow", "q_ref": 0.4}
    )
    assert reply == {"type": "ack", "id": 5, "flags": []}
    assert session.world.refs.elbow_q == 0.4


def test_set_ref_below_stiffness_floor_acks_with_clamp_flag(session):
    reply = session.apply_command(
        {"type": "cmd", "id": 6, "cmd": "set_ref", "joint": "elbow", "k_ref": 1.0}
    )
    assert reply["type"] == "ack"
    assert "elbow_k_clamped" in reply["flags"]


def test_rejected_commands_leave_state_untouched(session):
    before = session.world.refs.elbow_q
    reply = session.apply_command(
        {"type": "cmd", "id": 7, "cmd": "set_ref", "joint": "shoulder", "q_ref": 1.0}
    )
    assert reply["type"] == "err" and reply["id"] == 7
    assert session.world.refs.elbow_q == before
    assert session.apply_command({"type": "cmd", "id": 8, "cmd": "set_ref", "joint": "elbow"})[
        "type"
    ] == "err"
    assert session.apply_command({"type": "frame", "id": 9})["type"] == "err"
    assert session.apply_command({"type": "cmd", "id": 10, "cmd": "warp"})["type"] == "err"


def test_manual_reposition_rejected_on_vs_wrist(session):
    reply = session.apply_command(
        {"type": "cmd", "id": 1, "cmd": "manual_reposition", "angle": 0.2}
    )
    assert reply == {"type": "err", "id": 1, "error": "unsupported for this wrist"}


def test_manual_reposition_on_quick_disconnect():
    doc = scenarios.load_canned("config1")
    doc["wrist"] = {"variant": "QuickDisconnect"}
    s = Session(validate(doc))
    reply = s.apply_command({"type": "cmd", "id": 2, "cmd": "manual_reposition", "angle": -0.4})
    assert reply["type"] == "ack"
    assert s.world.ps_angle == -0.4
    reply = s.apply_command({"type": "cmd", "id": 3, "cmd": "manual_reposition", "angle": 9.0})
    assert reply["type"] == "err"


def test_pause_resume_stops_and_restarts_time(session):
    session.apply_command({"type": "cmd", "id": 1, "cmd": "pause"})
    assert session.tick() is None
    t0 = session.world.t
    session.apply_command({"type": "cmd", "id": 2, "cmd": "resume"})
    session.tick()
    assert session.world.t > t0


def test_emg_override_feeds_controller(session):
    session.apply_command({"type": "cmd", "id": 1, "cmd": "set_mode", "mode": "emg"})
    reply = session.apply_command(
        {"type": "cmd", "id": 2, "cmd": "emg_override", "e1": 0.8, "e2": 0.2}
    )
    assert reply["type"] == "ack"
    q0 = session.world.refs.elbow_q
    for _ in range(10):
        session.tick()
    assert session.world.refs.elbow_q > q0  # proportional velocity on e1>e2


def test_load_scenario_swaps_world(session):
    session.tick()
    reply = session.apply_command(
        {"type": "cmd", "id": 4, "cmd": "load_scenario", "name": "step_response"}
    )
    assert reply["type"] == "ack"
    assert session.world.t == 0.0
    assert session.apply_command(
        {"type": "cmd", "id": 5, "cmd": "load_scenario", "name": "missing"}
    )["type"] == "err"


def test_frame_serializes_losslessly(session):
    for _ in range(4):
        frame = session.tick() or {}
    assert json.loads(encode(frame)) == frame


# ---------------------------------------------------------------------------
# Live server (TCP transport; the WebSocket shares the same client loop)


def _free_port_pair() -> int:
    """Find a port p with p and p+1 both free."""
    for _ in range(50):
        with socket.socket() as s1:
            s1.bind(("127.0.0.1", 0))
            p = s1.getsockname()[1]
            try:
                with socket.socket() as s2:
                    s2.bind(("127.0.0.1", p + 1))
                return p
            except OSError:
                continue
    raise RuntimeError("no free port pair")


def test_tcp_end_to_end(config1):
    async def scenario():
        port = _free_port_pair()
        ready = asyncio.Event()
        server = asyncio.ensure_future(
            telemetry.serve_async(config1, port=port, rate=50, speed=10.0, ready=ready)
        )
        try:
            await asyncio.wait_for(ready.wait(), 15)
            reader, writer = await asyncio.open_connection("127.0.0.1", port + 1)
            handshake = json.loads(await reader.readline())
            assert handshake["type"] == "config"
            # two commands from one client arrive in send order
            writer.write(
                encode({"type": "cmd", "id": 1, "cmd": "set_ref", "joint": "elbow", "q_ref": 0.8})
                + encode(
                    {"type": "cmd", "id": 2, "cmd": "set_ref", "joint": "elbow",
                     "q_ref": 0.5, "k_ref": 273.0}
                )
            )
            await writer.drain()
            acks, last = [], None
            frames = 0
            while frames < 250:  # ~5 simulated seconds at speed 10
                msg = json.loads(await asyncio.wait_for(reader.readline(), 15))
                if msg["type"] in ("ack", "err"):
                    acks.append(msg)
                elif msg["type"] == "frame":
                    frames += 1
                    last = msg
            assert [a["id"] for a in acks] == [1, 2]
            assert all(a["type"] == "ack" for a in acks)
            # the later command wins: elbow converges to 0.5
            assert abs(last["joints"]["elbow"]["q"] - 0.5) < 0.02
            writer.close()
        finally:
            server.cancel()
            try:
                await server
            except (asyncio.CancelledError, Exception):
                pass

    asyncio.run(asyncio.wait_for(scenario(), 60))
