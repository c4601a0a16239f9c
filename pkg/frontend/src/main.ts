/**
 * Browser entry: wires the session store to a WebSocket, builds the
 * slider panels from the advertised config, and paints the scene on a
 * canvas at the display refresh rate.
 */

import { ConfigMessage } from "./codec.js";
import { Connection, Transport } from "./connection.js";
import { renderState } from "./render.js";

function wsTransport(url: string): Promise<Transport> {
  return new Promise((resolve, reject) => {
    const ws = new WebSocket(url);
    const dataCbs: Array<(c: string) => void> = [];
    const closeCbs: Array<() => void> = [];
    ws.onopen = () =>
      resolve({
        send: (d) => ws.send(d),
        close: () => ws.close(),
        onData: (cb) => dataCbs.push(cb),
        onClose: (cb) => closeCbs.push(cb),
      });
    ws.onerror = () => reject(new Error("connection failed"));
    ws.onmessage = (ev) => {
      const text = typeof ev.data === "string" ? ev.data : "";
      const chunk = text.endsWith("\n") ? text : text + "\n";
      for (const cb of dataCbs) cb(chunk);
    };
    ws.onclose = () => {
      for (const cb of closeCbs) cb();
    };
  });
}

function el<K extends keyof HTMLElementTagNameMap>(tag: K, cls?: string): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  return node;
}

function buildJointPanels(conn: Connection, cfg: ConfigMessage, root: HTMLElement): void {
  root.textContent = "";
  for (const [joint, ranges] of Object.entries(cfg.joints)) {
    const panel = el("div", "joint-panel");
    const title = el("h3");
    title.textContent = joint;
    panel.append(title);

    const qSlider = el("input");
    qSlider.type = "range";
    qSlider.min = String(ranges.q_range[0]);
    qSlider.max = String(ranges.q_range[1]);
    qSlider.step = "0.01";
    qSlider.value = "0";
    qSlider.oninput = () => {
      conn.model.sendReference(joint, { q_ref: Number(qSlider.value) }, Date.now());
      conn.drain();
    };
    const qLabel = el("label");
    qLabel.textContent = "position";
    panel.append(qLabel, qSlider);

    if (ranges.k_range !== null) {
      const kSlider = el("input");
      kSlider.type = "range";
      kSlider.min = String(ranges.k_range[0]);
      kSlider.max = String(ranges.k_range[1]);
      kSlider.step = "0.1";
      kSlider.value = String(ranges.k_range[0]);
      kSlider.oninput = () => {
        conn.model.sendReference(joint, { k_ref: Number(kSlider.value) }, Date.now());
        conn.drain();
      };
      const kLabel = el("label");
      kLabel.textContent = "stiffness";
      panel.append(kLabel, kSlider);
    }
    const readout = el("div", "readout");
    readout.dataset.joint = joint;
    panel.append(readout);
    root.append(panel);
  }
}

function buildEmgLevers(conn: Connection, root: HTMLElement): void {
  const box = el("div", "emg-levers");
  const levers: HTMLInputElement[] = [];
  for (const name of ["e1", "e2"]) {
    const lever = el("input");
    lever.type = "range";
    lever.min = "0";
    lever.max = "1";
    lever.step = "0.01";
    lever.value = "0";
    const label = el("label");
    label.textContent = `EMG ${name}`;
    box.append(label, lever);
    levers.push(lever);
  }
  const push = () => {
    conn.model.emgOverride(Number(levers[0]!.value), Number(levers[1]!.value), Date.now());
    conn.drain();
  };
  levers.forEach((l) => (l.oninput = push));
  root.append(box);
}

function paint(conn: Connection, canvas: HTMLCanvasElement, badge: HTMLElement): void {
  const ctx = canvas.getContext("2d")!;
  const draw = () => {
    const now = Date.now();
    badge.textContent = conn.model.connectionState(now);
    badge.className = `badge badge-${conn.model.connectionState(now)}`;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const frame = conn.model.latestFrame;
    const cfg = conn.model.config;
    if (frame !== null && cfg !== null && !conn.model.isStale(now)) {
      const scene = renderState(frame, cfg.joints);
      const sx = 400;
      const ox = canvas.width / 2;
      const oy = canvas.height / 2;
      for (const seg of scene.segments) {
        ctx.beginPath();
        ctx.moveTo(ox + seg.x0 * sx, oy - seg.y0 * sx);
        ctx.lineTo(ox + seg.x1 * sx, oy - seg.y1 * sx);
        ctx.lineWidth = seg.kind === "forearm" ? 6 : 4;
        ctx.strokeStyle = seg.kind === "wrist_cone" ? "#888" : "#222";
        ctx.stroke();
      }
      const hand = scene.segments[scene.segments.length - 1]!;
      ctx.beginPath();
      ctx.arc(ox + hand.x1 * sx, oy - hand.y1 * sx, 14 * (1 - 0.6 * scene.handClosure), 0, 2 * Math.PI);
      ctx.stroke();
      for (const ro of document.querySelectorAll<HTMLElement>(".readout")) {
        const js = frame.joints[ro.dataset.joint ?? ""];
        if (js) ro.textContent = `q=${js.q.toFixed(3)} k=${js.k_realized?.toFixed(1) ?? "-"}`;
      }
    }
    requestAnimationFrame(draw);
  };
  requestAnimationFrame(draw);
}

export function start(): void {
  const url = `ws://${location.host}/ws`;
  const conn = new Connection(() => wsTransport(url));
  const badge = document.getElementById("badge")!;
  const joints = document.getElementById("joints")!;
  const canvas = document.getElementById("scene") as HTMLCanvasElement;
  const controls = document.getElementById("controls")!;

  const origApply = conn.model.onMessage.bind(conn.model);
  conn.model.onMessage = (msg, now) => {
    const hadConfig = conn.model.config !== null;
    origApply(msg, now);
    if (!hadConfig && conn.model.config !== null) {
      buildJointPanels(conn, conn.model.config, joints);
    }
  };

  buildEmgLevers(conn, controls);
  const modeBtn = el("button");
  modeBtn.textContent = "toggle direct/EMG mode";
  modeBtn.onclick = () => {
    conn.model.setMode(conn.model.mode === "direct" ? "emg" : "direct", Date.now());
    conn.drain();
  };
  controls.append(modeBtn);

  void conn.connect();
  paint(conn, canvas, badge);
}

if (typeof document !== "undefined" && document.getElementById("scene") !== null) {
  start();
}
