/**
 * Full-stack check: spawn the real simulator server, connect over the
 * plain TCP telemetry port with the panel's own connection stack, and
 * verify that a slider command steers the simulated elbow.
 */

import { spawn, ChildProcess } from "node:child_process";
import { connect, Socket } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { FrameMessage } from "../src/codec.js";
import { Connection, Transport } from "../src/connection.js";

const PORT = 20000 + Math.floor(Math.random() * 20000);
const TCP_PORT = PORT + 1;

let server: ChildProcess;

function tcpTransport(port: number): Promise<Transport> {
  return new Promise((resolve, reject) => {
    const sock: Socket = connect({ host: "127.0.0.1", port }, () => {
      sock.setEncoding("utf8");
      resolve({
        send: (d) => sock.write(d),
        close: () => sock.destroy(),
        onData: (cb) => sock.on("data", cb),
        onClose: (cb) => sock.on("close", cb),
      });
    });
    sock.on("error", reject);
  });
}

async function connectWithRetry(port: number, timeoutMs: number): Promise<Transport> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      return await tcpTransport(port);
    } catch (exc) {
      if (Date.now() > deadline) throw exc;
      await new Promise((r) => setTimeout(r, 200));
    }
  }
}

function waitFor(check: () => boolean, timeoutMs: number, what: string): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  return new Promise((resolve, reject) => {
    const poll = () => {
      if (check()) return resolve();
      if (Date.now() > deadline) return reject(new Error(`timed out waiting for ${what}`));
      setTimeout(poll, 20);
    };
    poll();
  });
}

beforeAll(() => {
  server = spawn(
    "python3",
    ["-m", "vsoftpro.cli", "serve", "--config", "config1", "--port", String(PORT), "--speed", "10"],
    { cwd: "..", stdio: ["ignore", "ignore", "pipe"] },
  );
  server.stderr!.setEncoding("utf8");
  server.stderr!.on("data", (d: string) => {
    if (process.env.E2E_DEBUG) console.error(d);
  });
});

afterAll(() => {
  server.kill("SIGTERM");
});

describe("panel against the live simulator", () => {
  it("handshakes, steers the elbow, and sees it settle within 2 simulated seconds", async () => {
    const conn = new Connection(() => connectWithRetry(TCP_PORT, 20000), {
      // the test owns reconnection; do not let a flap spin timers forever
      setTimer: () => undefined,
    });
    await conn.connect();

    await waitFor(() => conn.model.config !== null, 20000, "config handshake");
    const joints = Object.keys(conn.model.config!.joints);
    expect(joints).toContain("elbow");
    expect(joints).toContain("wrist_fe");
    expect(joints).toContain("hand_s1");
    const elbow = conn.model.config!.joints["elbow"]!;
    expect(elbow.k_range![0]).toBeCloseTo(10.0, 9);
    expect(elbow.k_range![1]).toBeCloseTo(273.08232836016487, 6);

    await waitFor(() => conn.model.latestFrame !== null, 20000, "first frame");

    // stiff + displaced: the arm should track the new reference closely
    const cmd = conn.model.sendReference("elbow", { q_ref: 0.5, k_ref: 273.0 }, Date.now());
    conn.drain();
    await waitFor(() => !conn.model.pending.has(cmd.id), 10000, "command ack");
    expect(conn.model.toasts.filter((t) => t.startsWith("protocol error"))).toEqual([]);

    const t0 = (conn.model.latestFrame as FrameMessage).t;
    let settled: FrameMessage | null = null;
    await waitFor(
      () => {
        const f = conn.model.latestFrame;
        if (f === null) return false;
        if (Math.abs(f.joints["elbow"]!.q - 0.5) < 0.02) {
          settled = f;
          return true;
        }
        return f.t - t0 > 2.5; // give up only after the budget is blown
      },
      30000,
      "elbow settling",
    );
    expect(settled).not.toBeNull();
    expect(settled!.t - t0).toBeLessThanOrEqual(2.0);
    expect(Math.abs(settled!.joints["elbow"]!.q_ref - 0.5)).toBeLessThan(1e-9);

    conn.close();
  }, 60000);
});
