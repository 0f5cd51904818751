// Canvas drawing. The geometry helpers are pure (tested); the draw calls
// are a thin layer over them.

import { GridMsg, StateMsg } from "./protocol.js";
import { FlashEvent, SessionState, isOverridden, isStale } from "./session.js";

export interface Viewport {
  widthPx: number;
  heightPx: number;
  worldBound: number; // world is [-b, b]^2
}

export function worldToScreen(
  v: Viewport,
  wx: number,
  wy: number,
): [number, number] {
  const scale = Math.min(v.widthPx, v.heightPx) / (2 * v.worldBound);
  return [
    v.widthPx / 2 + wx * scale,
    v.heightPx / 2 - wy * scale, // world y is up, canvas y is down
  ];
}

export function metersToPixels(v: Viewport, meters: number): number {
  return (meters * Math.min(v.widthPx, v.heightPx)) / (2 * v.worldBound);
}

/** Map h history samples into sparkline polyline points. */
export function sparklinePoints(
  history: { t: number; h: number }[],
  widthPx: number,
  heightPx: number,
  hRange: [number, number],
): [number, number][] {
  if (history.length === 0) return [];
  const t0 = history[0].t;
  const t1 = history[history.length - 1].t;
  const span = Math.max(1e-9, t1 - t0);
  const [lo, hi] = hRange;
  return history.map(({ t, h }) => {
    const clamped = Math.min(hi, Math.max(lo, h));
    return [
      ((t - t0) / span) * widthPx,
      heightPx - ((clamped - lo) / (hi - lo)) * heightPx,
    ];
  });
}

export function zeroLineY(
  heightPx: number,
  hRange: [number, number],
): number | null {
  const [lo, hi] = hRange;
  if (lo > 0 || hi < 0) return null;
  return heightPx - ((0 - lo) / (hi - lo)) * heightPx;
}

const FLASH_MS = 900;

export function activeFlashes(events: FlashEvent[], nowMs: number): FlashEvent[] {
  return events.filter((e) => nowMs - e.atMs < FLASH_MS);
}

function drawArrow(
  ctx: CanvasRenderingContext2D,
  from: [number, number],
  dx: number,
  dy: number,
  color: string,
): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(from[0], from[1]);
  ctx.lineTo(from[0] + dx, from[1] + dy);
  ctx.stroke();
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  session: SessionState,
  v: Viewport,
  nowMs: number,
): void {
  ctx.clearRect(0, 0, v.widthPx, v.heightPx);
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, v.widthPx, v.heightPx);

  if (session.grid) drawGrid(ctx, session.grid, v);
  if (session.state) drawRobot(ctx, session.state, v);
  drawSparkline(ctx, session, v);
  drawBanners(ctx, session, v, nowMs);
}

function drawGrid(ctx: CanvasRenderingContext2D, grid: GridMsg, v: Viewport): void {
  const res = grid.resolution;
  const cell = Math.ceil(metersToPixels(v, res));
  ctx.fillStyle = "#b3402a";
  for (let iy = 0; iy < grid.rows.length; iy++) {
    const row = grid.rows[iy];
    for (let ix = 0; ix < row.length; ix++) {
      if (row[ix] === "1") {
        const [px, py] = worldToScreen(
          v,
          grid.origin[0] + ix * res,
          grid.origin[1] + (iy + 1) * res,
        );
        ctx.fillRect(px, py, cell, cell);
      }
    }
  }
  // observation window outline
  const extent = grid.rows.length * res;
  const [x0, y0] = worldToScreen(v, grid.origin[0], grid.origin[1] + extent);
  const side = metersToPixels(v, extent);
  ctx.strokeStyle = "#4d6a92";
  ctx.lineWidth = 1;
  ctx.strokeRect(x0, y0, side, side);
}

function drawRobot(ctx: CanvasRenderingContext2D, state: StateMsg, v: Viewport): void {
  const [px, py] = worldToScreen(v, state.x[0], state.x[1]);
  const r = Math.max(4, metersToPixels(v, 0.12));
  ctx.fillStyle = "#e8e2d0";
  ctx.beginPath();
  ctx.arc(px, py, r, 0, 2 * Math.PI);
  ctx.fill();
  if (state.x.length === 3) {
    // heading tick for the Dubins car
    const th = state.x[2];
    drawArrow(ctx, [px, py], 2.2 * r * Math.cos(th), -2.2 * r * Math.sin(th), "#e8e2d0");
  } else if (state.x.length === 4) {
    drawArrow(
      ctx,
      [px, py],
      metersToPixels(v, state.x[2]) * 0.5,
      -metersToPixels(v, state.x[3]) * 0.5,
      "#9fb8d8",
    );
  }
  // command arrows: nominal gray, filtered green (red when overriding)
  const scale = metersToPixels(v, 1.2);
  const [nx, ny] = commandVector(state.u_nom, state.x);
  const [sx, sy] = commandVector(state.u_star, state.x);
  drawArrow(ctx, [px, py], nx * scale, -ny * scale, "#8a8a8a");
  drawArrow(ctx, [px, py], sx * scale, -sy * scale,
    isOverridden(state) ? "#d8434e" : "#51b06c");
}

/** Visualize a command as a planar vector (steering commands are shown as
 * lateral deflection relative to the heading). */
export function commandVector(u: number[], x: number[]): [number, number] {
  if (x.length === 3 && u.length === 1) {
    const th = x[2];
    // forward unit vector plus steering deflection to its left
    return [
      Math.cos(th) - u[0] * Math.sin(th),
      Math.sin(th) + u[0] * Math.cos(th),
    ];
  }
  if (u.length === 2) return [u[0], u[1]];
  return [0, 0];
}

const SPARK_H = 72;

function drawSparkline(ctx: CanvasRenderingContext2D, s: SessionState, v: Viewport): void {
  const y0 = v.heightPx - SPARK_H;
  ctx.fillStyle = "rgba(10,12,16,0.85)";
  ctx.fillRect(0, y0, v.widthPx, SPARK_H);
  const hist = s.hHistory;
  if (hist.length < 2) return;
  const hs = hist.map((p) => p.h);
  const range: [number, number] = [Math.min(...hs, -0.1), Math.max(...hs, 0.1)];
  const zl = zeroLineY(SPARK_H, range);
  if (zl !== null) {
    ctx.strokeStyle = "#777";
    ctx.setLineDash([4, 3]);
    ctx.beginPath();
    ctx.moveTo(0, y0 + zl);
    ctx.lineTo(v.widthPx, y0 + zl);
    ctx.stroke();
    ctx.setLineDash([]);
  }
  const pts = sparklinePoints(hist, v.widthPx, SPARK_H, range);
  ctx.strokeStyle = "#51b06c";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y0 + y) : ctx.lineTo(x, y0 + y)));
  ctx.stroke();
}

function drawBanners(
  ctx: CanvasRenderingContext2D,
  s: SessionState,
  v: Viewport,
  nowMs: number,
): void {
  ctx.font = "14px monospace";
  if (isStale(s, nowMs)) {
    ctx.fillStyle = "#d8a243";
    ctx.fillText(s.connected ? "stale stream" : "disconnected", 12, 22);
  }
  if (s.state?.infeasible) {
    ctx.strokeStyle = "#d8434e";
    ctx.lineWidth = 6;
    ctx.strokeRect(0, 0, v.widthPx, v.heightPx);
    ctx.fillStyle = "#d8434e";
    ctx.fillText("QP infeasible: best-effort control", 12, 42);
  }
  if (s.collided) {
    ctx.fillStyle = "#d8434e";
    ctx.fillText("COLLISION - press R to reset", 12, 62);
  } else if (s.reachedGoal) {
    ctx.fillStyle = "#51b06c";
    ctx.fillText("goal reached - press R to reset", 12, 62);
  }
  for (const ev of activeFlashes(s.events, nowMs)) {
    if (ev.kind === "obs_update" && ev.margin !== null && ev.margin < 0) {
      ctx.fillStyle = "#d8a243";
      ctx.fillText(`obs update margin ${ev.margin.toFixed(3)}`, 12, 82);
    }
  }
}
