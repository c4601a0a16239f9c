/**
 * Wire codec for the telemetry protocol: newline-delimited JSON objects,
 * UTF-8. Must stay byte-compatible with the server codec; both sides run
 * the same round-trip fixture corpus.
 */

export interface JointState {
  q: number;
  qd: number;
  q_ref: number;
  k_ref: number | null;
  k_realized: number | null;
}

export interface JointRanges {
  q_range: [number, number];
  k_range: [number, number] | null;
}

export interface ConfigMessage {
  type: "config";
  rate: number;
  config: Record<string, unknown>;
  joints: Record<string, JointRanges>;
}

export interface FrameMessage {
  type: "frame";
  t: number;
  joints: Record<string, JointState>;
  emg: { e1: number; e2: number };
  active_joint: string;
  mode: string;
  contact_force: number;
  power_W: number;
  knocked: string[];
  paused: boolean;
}

export interface CommandMessage {
  type: "cmd";
  id: number;
  cmd: string;
  [key: string]: unknown;
}

export interface AckMessage {
  type: "ack";
  id: number | null;
  flags: string[];
}

export interface ErrMessage {
  type: "err";
  id?: number | null;
  error: string;
  offset?: number;
}

export type WireMessage =
  | ConfigMessage
  | FrameMessage
  | CommandMessage
  | AckMessage
  | ErrMessage;

export interface DecodeFailure {
  offset: number;
  error: string;
}

export function encode(msg: object): string {
  return JSON.stringify(msg) + "\n";
}

/** Incremental newline-delimited JSON decoder with byte-offset errors. */
export class LineDecoder {
  private buf = "";
  private offset = 0;

  feed(chunk: string): Array<WireMessage | DecodeFailure> {
    this.buf += chunk;
    const out: Array<WireMessage | DecodeFailure> = [];
    for (;;) {
      const nl = this.buf.indexOf("\n");
      if (nl < 0) break;
      const line = this.buf.slice(0, nl);
      this.buf = this.buf.slice(nl + 1);
      const start = this.offset;
      this.offset += byteLength(line) + 1;
      if (line.trim() === "") continue;
      try {
        const msg = JSON.parse(line);
        if (typeof msg !== "object" || msg === null || Array.isArray(msg)) {
          throw new Error("message must be a JSON object");
        }
        out.push(msg as WireMessage);
      } catch (exc) {
        out.push({ offset: start, error: String((exc as Error).message ?? exc) });
      }
    }
    return out;
  }

  /** Report a trailing partial line (stream ended mid-message). */
  flush(): DecodeFailure | null {
    if (this.buf.trim() === "") return null;
    const fail = { offset: this.offset, error: "truncated line at end of stream" };
    this.offset += byteLength(this.buf);
    this.buf = "";
    return fail;
  }
}

export function isDecodeFailure(m: WireMessage | DecodeFailure): m is DecodeFailure {
  return !("type" in m);
}

function byteLength(s: string): number {
  return new TextEncoder().encode(s).length;
}
