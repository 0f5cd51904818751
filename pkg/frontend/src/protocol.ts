// Wire protocol shared with the teleop server: newline-delimited JSON text
// frames over a WebSocket.

export interface StateMsg {
  type: "state";
  t: number;
  x: number[];
  h: number | null;
  u_nom: number[];
  u_star: number[];
  infeasible: boolean;
}

export interface GridMsg {
  type: "grid";
  resolution: number;
  origin: [number, number];
  rows: string[];
}

export type EventKind = "collision" | "goal" | "obs_update";

export interface EventMsg {
  type: "event";
  kind: EventKind;
  margin: number | null;
}

export type ServerMsg = StateMsg | GridMsg | EventMsg;

export interface CmdMsg {
  type: "cmd";
  u: number[];
}

export interface ResetMsg {
  type: "reset";
  seed: number;
}

export interface PauseMsg {
  type: "pause";
}

export type ClientMsg = CmdMsg | ResetMsg | PauseMsg;

function isNumberArray(v: unknown): v is number[] {
  return Array.isArray(v) && v.every((e) => typeof e === "number" && isFinite(e));
}

export function parseServerMsg(line: string): ServerMsg | null {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const msg = raw as Record<string, unknown>;
  switch (msg.type) {
    case "state": {
      if (
        typeof msg.t !== "number" ||
        !isNumberArray(msg.x) ||
        !(msg.h === null || typeof msg.h === "number") ||
        !isNumberArray(msg.u_nom) ||
        !isNumberArray(msg.u_star) ||
        typeof msg.infeasible !== "boolean"
      ) {
        return null;
      }
      return msg as unknown as StateMsg;
    }
    case "grid": {
      if (
        typeof msg.resolution !== "number" ||
        !isNumberArray(msg.origin) ||
        (msg.origin as number[]).length !== 2 ||
        !Array.isArray(msg.rows) ||
        !(msg.rows as unknown[]).every(
          (r) => typeof r === "string" && /^[01]*$/.test(r),
        )
      ) {
        return null;
      }
      return msg as unknown as GridMsg;
    }
    case "event": {
      if (
        msg.kind !== "collision" &&
        msg.kind !== "goal" &&
        msg.kind !== "obs_update"
      ) {
        return null;
      }
      if (!(msg.margin === null || typeof msg.margin === "number")) return null;
      return msg as unknown as EventMsg;
    }
    default:
      return null;
  }
}

export function encodeClientMsg(msg: ClientMsg): string {
  return JSON.stringify(msg) + "\n";
}

/** Split a websocket text frame into newline-delimited payload lines. */
export function splitFrames(data: string): string[] {
  return data.split("\n").filter((l) => l.trim().length > 0);
}
