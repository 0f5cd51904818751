// Client-side session state: a pure reducer over server messages. The UI
// renders only what the server streamed; there is no client-side physics,
// so reconnecting rebuilds the same picture from the stream.

import { EventMsg, GridMsg, ServerMsg, StateMsg } from "./protocol.js";

export const H_HISTORY_MS = 10_000;
export const STALE_MS = 500;

export interface FlashEvent {
  kind: EventMsg["kind"];
  margin: number | null;
  atMs: number;
}

export interface SessionState {
  connected: boolean;
  lastFrameMs: number | null;
  state: StateMsg | null;
  grid: GridMsg | null;
  hHistory: { t: number; h: number }[];
  events: FlashEvent[];
  collided: boolean;
  reachedGoal: boolean;
}

export function initialSession(): SessionState {
  return {
    connected: false,
    lastFrameMs: null,
    state: null,
    grid: null,
    hHistory: [],
    events: [],
    collided: false,
    reachedGoal: false,
  };
}

export function applyMessage(
  s: SessionState,
  msg: ServerMsg,
  nowMs: number,
): SessionState {
  const next = { ...s, lastFrameMs: nowMs };
  switch (msg.type) {
    case "state": {
      next.state = msg;
      if (msg.h !== null) {
        const hist = s.hHistory.concat([{ t: msg.t, h: msg.h }]);
        const cutoff = msg.t - H_HISTORY_MS / 1000;
        next.hHistory = hist.filter((p) => p.t >= cutoff);
      }
      return next;
    }
    case "grid":
      next.grid = msg;
      return next;
    case "event": {
      next.events = s.events
        .concat([{ kind: msg.kind, margin: msg.margin, atMs: nowMs }])
        .slice(-50);
      if (msg.kind === "collision") next.collided = true;
      if (msg.kind === "goal") next.reachedGoal = true;
      return next;
    }
  }
}

export function onConnected(s: SessionState): SessionState {
  return { ...s, connected: true };
}

export function onDisconnected(s: SessionState): SessionState {
  return { ...s, connected: false };
}

export function onReset(s: SessionState): SessionState {
  return { ...initialSession(), connected: s.connected, lastFrameMs: s.lastFrameMs };
}

export function isStale(s: SessionState, nowMs: number): boolean {
  if (!s.connected || s.lastFrameMs === null) return true;
  return nowMs - s.lastFrameMs > STALE_MS;
}

/** Filter override: the safe command visibly differs from the request. */
export function isOverridden(state: StateMsg, tol = 1e-9): boolean {
  if (state.u_nom.length !== state.u_star.length) return true;
  return state.u_nom.some((v, i) => Math.abs(v - state.u_star[i]) > tol);
}

/** Exponential backoff for reconnect attempts, capped at 5 s. */
export function reconnectDelayMs(attempt: number): number {
  return Math.min(500 * 2 ** Math.max(0, attempt), 5000);
}
