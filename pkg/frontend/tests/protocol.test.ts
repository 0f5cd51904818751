import { describe, expect, it } from "vitest";
import {
  encodeClientMsg,
  parseServerMsg,
  splitFrames,
} from "../src/protocol.js";

// frames copied verbatim from the server implementation's output
const STATE_LINE =
  '{"type": "state", "t": 1.25, "x": [0.1, -0.2, 0.5], "h": 0.42, ' +
  '"u_nom": [0.5], "u_star": [0.12], "infeasible": false}';
const GRID_LINE =
  '{"type": "grid", "resolution": 0.1, "origin": [-3.0, -3.0], ' +
  '"rows": ["0110", "0000", "1001", "0000"]}';
const EVENT_LINE = '{"type": "event", "kind": "obs_update", "margin": 0.37}';

describe("parseServerMsg", () => {
  it("parses state frames", () => {
    const msg = parseServerMsg(STATE_LINE);
    expect(msg).not.toBeNull();
    if (msg?.type !== "state") throw new Error("wrong type");
    expect(msg.t).toBe(1.25);
    expect(msg.x).toEqual([0.1, -0.2, 0.5]);
    expect(msg.h).toBe(0.42);
    expect(msg.infeasible).toBe(false);
  });

  it("parses a null h (unfiltered method)", () => {
    const line = STATE_LINE.replace('"h": 0.42', '"h": null');
    const msg = parseServerMsg(line);
    expect(msg?.type).toBe("state");
    if (msg?.type === "state") expect(msg.h).toBeNull();
  });

  it("parses grid frames", () => {
    const msg = parseServerMsg(GRID_LINE);
    if (msg?.type !== "grid") throw new Error("wrong type");
    expect(msg.rows).toHaveLength(4);
    expect(msg.origin).toEqual([-3.0, -3.0]);
  });

  it("parses event frames", () => {
    const msg = parseServerMsg(EVENT_LINE);
    if (msg?.type !== "event") throw new Error("wrong type");
    expect(msg.kind).toBe("obs_update");
    expect(msg.margin).toBeCloseTo(0.37);
  });

  it("rejects malformed frames", () => {
    expect(parseServerMsg("not json")).toBeNull();
    expect(parseServerMsg('{"type": "state"}')).toBeNull();
    expect(parseServerMsg('{"type": "grid", "resolution": "x"}')).toBeNull();
    expect(parseServerMsg('{"type": "event", "kind": "explosion"}')).toBeNull();
    expect(parseServerMsg('{"type": "grid", "resolution": 0.1, "origin": [0, 0], "rows": ["012"]}')).toBeNull();
    expect(parseServerMsg("[1, 2, 3]")).toBeNull();
  });
});

describe("encodeClientMsg", () => {
  it("emits newline-terminated JSON", () => {
    const line = encodeClientMsg({ type: "cmd", u: [0.5] });
    expect(line.endsWith("\n")).toBe(true);
    expect(JSON.parse(line)).toEqual({ type: "cmd", u: [0.5] });
  });

  it("encodes reset and pause", () => {
    expect(JSON.parse(encodeClientMsg({ type: "reset", seed: 7 }))).toEqual({
      type: "reset",
      seed: 7,
    });
    expect(JSON.parse(encodeClientMsg({ type: "pause" }))).toEqual({ type: "pause" });
  });
});

describe("splitFrames", () => {
  it("splits newline-delimited payloads and drops blanks", () => {
    const chunk = STATE_LINE + "\n" + EVENT_LINE + "\n\n";
    expect(splitFrames(chunk)).toHaveLength(2);
  });
});
