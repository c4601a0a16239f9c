/**
 * Transport glue between the session store and a byte stream. The
 * transport is injectable (browser WebSocket in main.ts, a TCP socket in
 * the end-to-end tests), so the protocol handling stays testable.
 */

import { encode, isDecodeFailure, LineDecoder } from "./codec.js";
import { UiSessionModel } from "./model.js";

export interface Transport {
  send(data: string): void;
  close(): void;
  onData(cb: (chunk: string) => void): void;
  onClose(cb: () => void): void;
}

export type TransportFactory = () => Promise<Transport>;

export interface ConnectionOptions {
  /** reconnect backoff schedule in ms; the last entry repeats */
  backoffMs?: number[];
  now?: () => number;
  setTimer?: (cb: () => void, ms: number) => unknown;
}

/**
 * Owns one session: connects, feeds inbound messages into the model,
 * drains the model's outbox, and reconnects with backoff on failure.
 */
export class Connection {
  readonly model = new UiSessionModel();
  private transport: Transport | null = null;
  private attempts = 0;
  private closedByUser = false;
  private readonly backoff: number[];
  private readonly now: () => number;
  private readonly setTimer: (cb: () => void, ms: number) => unknown;

  constructor(private readonly factory: TransportFactory, opts: ConnectionOptions = {}) {
    this.backoff = opts.backoffMs ?? [250, 500, 1000, 2000, 5000];
    this.now = opts.now ?? (() => Date.now());
    this.setTimer = opts.setTimer ?? ((cb, ms) => setTimeout(cb, ms));
  }

  async connect(): Promise<void> {
    this.closedByUser = false;
    try {
      const transport = await this.factory();
      this.transport = transport;
      this.attempts = 0;
      const decoder = new LineDecoder();
      this.model.onOpen();
      transport.onData((chunk) => {
        for (const msg of decoder.feed(chunk)) {
          if (isDecodeFailure(msg)) {
            this.model.toasts.push(`protocol error at byte ${msg.offset}: ${msg.error}`);
          } else {
            this.model.onMessage(msg, this.now());
          }
        }
        this.drain();
      });
      transport.onClose(() => {
        this.model.onClose();
        this.transport = null;
        this.scheduleReconnect();
      });
    } catch {
      this.model.onClose();
      this.scheduleReconnect();
    }
  }

  /** Push queued commands onto the wire, in enqueue order. */
  drain(): void {
    if (this.transport === null) return;
    for (const cmd of this.model.takeOutbox()) {
      this.transport.send(encode(cmd));
    }
  }

  close(): void {
    this.closedByUser = true;
    this.transport?.close();
    this.transport = null;
    this.model.onClose();
  }

  private scheduleReconnect(): void {
    if (this.closedByUser) return;
    const delay = this.backoff[Math.min(this.attempts, this.backoff.length - 1)]!;
    this.attempts += 1;
    this.setTimer(() => void this.connect(), delay);
  }
}
