// Entry point: socket lifecycle with backoff, keyboard capture, 30 Hz
// command pump, and an animation-tick render loop.

import { CommandLoop, KeyTracker, RobotKind, commandFor } from "./input.js";
import { encodeClientMsg, parseServerMsg, splitFrames } from "./protocol.js";
import {
  SessionState,
  applyMessage,
  initialSession,
  onConnected,
  onDisconnected,
  onReset,
  reconnectDelayMs,
} from "./session.js";
import { Viewport, drawScene } from "./render.js";

const params = new URLSearchParams(window.location.search);
const url = params.get("ws") ?? "ws://127.0.0.1:8723";
const kind: RobotKind = params.get("robot") === "integrator2d" ? "integrator2d" : "dubins";

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const viewport: Viewport = {
  widthPx: canvas.width,
  heightPx: canvas.height,
  worldBound: 3.0,
};

let session: SessionState = initialSession();
let ws: WebSocket | null = null;
let attempt = 0;

const keys = new KeyTracker();
const pump = new CommandLoop(
  (u) => {
    if (ws && ws.readyState === WebSocket.OPEN) {
      ws.send(encodeClientMsg({ type: "cmd", u }));
    }
  },
  () => commandFor(kind, keys),
);

function connect(): void {
  ws = new WebSocket(url);
  ws.onopen = () => {
    attempt = 0;
    session = onConnected(session);
    pump.start();
  };
  ws.onmessage = (event: MessageEvent) => {
    for (const line of splitFrames(String(event.data))) {
      const msg = parseServerMsg(line);
      if (msg) session = applyMessage(session, msg, performance.now());
    }
  };
  ws.onclose = () => {
    session = onDisconnected(session);
    pump.stop();
    attempt += 1;
    setTimeout(connect, reconnectDelayMs(attempt));
  };
  ws.onerror = () => ws?.close();
}

window.addEventListener("keydown", (e) => {
  if (e.code === "KeyR") {
    session = onReset(session);
    ws?.send(encodeClientMsg({ type: "reset", seed: Math.floor(Math.random() * 1e6) }));
    return;
  }
  if (e.code === "KeyP") {
    ws?.send(encodeClientMsg({ type: "pause" }));
    return;
  }
  keys.press(e.code);
});
window.addEventListener("keyup", (e) => keys.release(e.code));
window.addEventListener("blur", () => keys.clear());

function frame(): void {
  drawScene(ctx, session, viewport, performance.now());
  requestAnimationFrame(frame);
}

connect();
requestAnimationFrame(frame);
