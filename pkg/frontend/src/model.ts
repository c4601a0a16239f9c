/**
 * UI session store. One instance owns everything the panel displays;
 * the frame consumer and the user-event handlers both go through it, and
 * each update is a single synchronous transaction.
 *
 * Time is always passed in explicitly (milliseconds) so staleness rules
 * are testable with fake clocks.
 */

import {
  AckMessage,
  CommandMessage,
  ConfigMessage,
  ErrMessage,
  FrameMessage,
  WireMessage,
} from "./codec.js";

export type ConnectionState = "disconnected" | "connecting" | "live" | "stale";

export interface SliderState {
  q_ref: number;
  k_ref: number | null;
}

interface PendingCommand {
  cmd: CommandMessage;
  /** slider values to restore if the server rejects the command */
  revert: { joint: string; slider: SliderState } | null;
  sentAt: number;
}

export interface HistoryPoint {
  t: number;
  frame: FrameMessage;
}

const HISTORY_SECONDS = 30;
/** a badge appears after this many consecutive missed frames */
const MISSED_FRAME_LIMIT = 3;

export class UiSessionModel {
  config: ConfigMessage | null = null;
  latestFrame: FrameMessage | null = null;
  history: HistoryPoint[] = [];
  sliders: Record<string, SliderState> = {};
  pending = new Map<number, PendingCommand>();
  toasts: string[] = [];
  mode = "direct";
  private connected = false;
  private lastFrameAt: number | null = null;
  private nextId = 1;
  private outbox: CommandMessage[] = [];

  // -- connection lifecycle ------------------------------------------------

  onOpen(): void {
    this.connected = true;
  }

  onClose(): void {
    // no phantom data: drop live state, keep only the strip-chart history
    this.connected = false;
    this.latestFrame = null;
    this.lastFrameAt = null;
    this.pending.clear();
  }

  connectionState(nowMs: number): ConnectionState {
    if (!this.connected) return "disconnected";
    if (this.config === null || this.lastFrameAt === null) return "connecting";
    if (this.isStale(nowMs)) return "stale";
    return "live";
  }

  /** True once 3 consecutive expected frames have been missed. */
  isStale(nowMs: number): boolean {
    if (this.lastFrameAt === null || this.config === null) return true;
    const frameMs = 1000 / this.config.rate;
    return nowMs - this.lastFrameAt > MISSED_FRAME_LIMIT * frameMs;
  }

  // -- inbound messages ----------------------------------------------------

  onMessage(msg: WireMessage, nowMs: number): void {
    switch (msg.type) {
      case "config":
        this.applyConfig(msg);
        break;
      case "frame":
        this.applyFrame(msg, nowMs);
        break;
      case "ack":
        this.applyAck(msg);
        break;
      case "err":
        this.applyErr(msg);
        break;
      default:
        this.toasts.push(`unknown message type ${(msg as { type?: string }).type}`);
    }
  }

  private applyConfig(msg: ConfigMessage): void {
    this.config = msg;
    this.sliders = {};
    for (const [joint, ranges] of Object.entries(msg.joints)) {
      this.sliders[joint] = {
        q_ref: clamp(0, ranges.q_range[0], ranges.q_range[1]),
        k_ref: ranges.k_range === null ? null : ranges.k_range[0],
      };
    }
  }

  private applyFrame(frame: FrameMessage, nowMs: number): void {
    this.latestFrame = frame;
    this.lastFrameAt = nowMs;
    this.mode = frame.mode;
    this.history.push({ t: frame.t, frame });
    const cutoff = frame.t - HISTORY_SECONDS;
    while (this.history.length > 0 && this.history[0]!.t < cutoff) {
      this.history.shift();
    }
  }

  private applyAck(msg: AckMessage): void {
    if (msg.id !== null) this.pending.delete(msg.id);
    for (const flag of msg.flags) this.toasts.push(`server clamped: ${flag}`);
  }

  private applyErr(msg: ErrMessage): void {
    this.toasts.push(msg.error);
    if (msg.id === undefined || msg.id === null) return;
    const pending = this.pending.get(msg.id);
    if (pending === undefined) return;
    this.pending.delete(msg.id);
    if (pending.revert !== null) {
      this.sliders[pending.revert.joint] = pending.revert.slider;
    }
  }

  // -- outbound commands ---------------------------------------------------

  /** Queue a command; the transport drains the outbox in send order. */
  private enqueue(body: { cmd: string } & Record<string, unknown>, revert: PendingCommand["revert"], nowMs: number): CommandMessage {
    const full: CommandMessage = { ...body, type: "cmd", id: this.nextId++ };
    this.pending.set(full.id, { cmd: full, revert, sentAt: nowMs });
    this.outbox.push(full);
    return full;
  }

  takeOutbox(): CommandMessage[] {
    const out = this.outbox;
    this.outbox = [];
    return out;
  }

  /**
   * Move a slider and emit set_ref. Values clamp to the advertised ranges
   * before anything goes on the wire; an err reply reverts the slider.
   */
  sendReference(joint: string, opts: { q_ref?: number; k_ref?: number }, nowMs: number): CommandMessage {
    const ranges = this.config?.joints[joint];
    if (ranges === undefined) throw new Error(`unknown joint ${joint}`);
    const slider = this.sliders[joint]!;
    const revert = { joint, slider: { ...slider } };
    const payload: Record<string, number> = {};
    if (opts.q_ref !== undefined) {
      const q = clamp(opts.q_ref, ranges.q_range[0], ranges.q_range[1]);
      slider.q_ref = q;
      payload.q_ref = q;
    }
    if (opts.k_ref !== undefined && ranges.k_range !== null) {
      const k = clamp(opts.k_ref, ranges.k_range[0], ranges.k_range[1]);
      slider.k_ref = k;
      payload.k_ref = k;
    }
    return this.enqueue({ cmd: "set_ref", joint, ...payload }, revert, nowMs);
  }

  setMode(mode: "direct" | "emg", nowMs: number): CommandMessage {
    return this.enqueue({ cmd: "set_mode", mode }, null, nowMs);
  }

  emgOverride(e1: number, e2: number, nowMs: number): CommandMessage {
    return this.enqueue(
      { cmd: "emg_override", e1: clamp(e1, 0, 1), e2: clamp(e2, 0, 1) },
      null,
      nowMs,
    );
  }

  loadScenario(name: string, nowMs: number): CommandMessage {
    return this.enqueue({ cmd: "load_scenario", name }, null, nowMs);
  }

  pause(nowMs: number): CommandMessage {
    return this.enqueue({ cmd: "pause" }, null, nowMs);
  }

  resume(nowMs: number): CommandMessage {
    return this.enqueue({ cmd: "resume" }, null, nowMs);
  }
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}
