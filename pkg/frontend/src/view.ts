// Top-down scene rendering. Pure projection helpers plus a canvas renderer
// that draws only the latest received state message (no extrapolation).

import { AgentStateMsg, StateMessage } from "./protocol.js";

export interface MapData {
  bounds: [number, number, number, number];
  sidewalks: number[][][];
  drivable: number[][][];
  crosswalks: number[][][];
  parking: number[][][];
  goal_region: number[][] | null;
}

export interface ViewState {
  centerX: number;
  centerY: number;
  scale: number;           // px per meter
  width: number;           // canvas CSS px
  height: number;
  latest: StateMessage | null;
  map: MapData | null;
  role: string;
  connection: string;      // "connected" | "closed" | ...
  recording: boolean;
  staleness_ms: number;
  dropped: number;
}

// grayscale classes shared with the PGM exporter: off-map 0, sidewalk 64,
// drivable 128, parking 160, crosswalk 200
export const LAYER_GRAY = { offmap: 0, sidewalk: 64, drivable: 128, parking: 160, crosswalk: 200 };

const gray = (v: number) => `rgb(${v},${v},${v})`;

/** World meters to screen px (y flipped so north is up). */
export function worldToScreen(view: Pick<ViewState, "centerX" | "centerY" | "scale" | "width" | "height">,
                              wx: number, wy: number): [number, number] {
  return [
    (wx - view.centerX) * view.scale + view.width / 2,
    view.height / 2 - (wy - view.centerY) * view.scale,
  ];
}

/** A yaw-oriented rectangle footprint's corners in world coordinates. */
export function footprintCorners(a: Pick<AgentStateMsg, "x" | "y" | "yaw" | "shape">): [number, number][] {
  const [length, width] = a.shape;
  const h = (a.yaw * Math.PI) / 180;
  const c = Math.cos(h);
  const s = Math.sin(h);
  const hl = length / 2;
  const hw = width / 2;
  const local: [number, number][] = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
  return local.map(([dx, dy]) => [a.x + dx * c - dy * s, a.y + dx * s + dy * c]);
}

function drawPolygon(ctx: CanvasRenderingContext2D, view: ViewState,
                     poly: number[][], fill: string): void {
  if (poly.length < 3) return;
  ctx.fillStyle = fill;
  ctx.beginPath();
  poly.forEach(([x, y], i) => {
    const [sx, sy] = worldToScreen(view, x, y);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  ctx.closePath();
  ctx.fill();
}

export function renderFrame(ctx: CanvasRenderingContext2D, view: ViewState): void {
  ctx.fillStyle = view.map ? gray(LAYER_GRAY.offmap) : "#16161a";
  ctx.fillRect(0, 0, view.width, view.height);

  if (view.map) {
    // ascending priority: later layers paint over earlier ones
    for (const poly of view.map.sidewalks) drawPolygon(ctx, view, poly, gray(LAYER_GRAY.sidewalk));
    for (const poly of view.map.drivable) drawPolygon(ctx, view, poly, gray(LAYER_GRAY.drivable));
    for (const poly of view.map.parking) drawPolygon(ctx, view, poly, gray(LAYER_GRAY.parking));
    for (const poly of view.map.crosswalks) drawPolygon(ctx, view, poly, gray(LAYER_GRAY.crosswalk));
    if (view.map.goal_region) drawPolygon(ctx, view, view.map.goal_region, "rgba(60,180,90,0.45)");
  } else {
    ctx.fillStyle = "#b33";
    ctx.fillRect(0, 0, view.width, 26);
    ctx.fillStyle = "#fff";
    ctx.font = "13px monospace";
    ctx.fillText("no map received; showing agents only", 10, 17);
  }

  const state = view.latest;
  if (state) {
    for (const agent of state.agents) {
      if (agent.kind === "car") {
        ctx.fillStyle = "#3a7bd5";
        ctx.strokeStyle = "#dfe8f5";
        ctx.beginPath();
        footprintCorners(agent).forEach(([x, y], i) => {
          const [sx, sy] = worldToScreen(view, x, y);
          if (i === 0) ctx.moveTo(sx, sy);
          else ctx.lineTo(sx, sy);
        });
        ctx.closePath();
        ctx.fill();
        ctx.stroke();
        // heading tick
        const h = (agent.yaw * Math.PI) / 180;
        const [nx, ny] = worldToScreen(view, agent.x + Math.cos(h) * agent.shape[0] / 2,
                                       agent.y + Math.sin(h) * agent.shape[0] / 2);
        const [cx, cy] = worldToScreen(view, agent.x, agent.y);
        ctx.beginPath();
        ctx.moveTo(cx, cy);
        ctx.lineTo(nx, ny);
        ctx.stroke();
      } else {
        const [sx, sy] = worldToScreen(view, agent.x, agent.y);
        ctx.fillStyle = "#e8a33d";
        ctx.beginPath();
        ctx.arc(sx, sy, Math.max(3, (agent.shape[1] / 2) * view.scale), 0, Math.PI * 2);
        ctx.fill();
      }
    }
  }

  // HUD: timer, recording dot, role, latency/staleness, drops
  ctx.fillStyle = "rgba(0,0,0,0.55)";
  ctx.fillRect(0, view.height - 28, view.width, 28);
  ctx.fillStyle = "#eee";
  ctx.font = "13px monospace";
  const t = state ? state.sim_time.toFixed(2) : "--";
  const frame = state ? state.frame : 0;
  ctx.fillText(
    `t=${t}s  frame=${frame}  role=${view.role}  ${view.connection}  ` +
    `stale=${view.staleness_ms.toFixed(0)}ms  drops=${view.dropped}`,
    30, view.height - 9);
  if (view.recording) {
    ctx.fillStyle = "#e33";
    ctx.beginPath();
    ctx.arc(14, view.height - 14, 6, 0, Math.PI * 2);
    ctx.fill();
  }
}

/** Camera fitting a map's bounds into the canvas with a margin. */
export function fitCamera(bounds: [number, number, number, number],
                          width: number, height: number): { centerX: number; centerY: number; scale: number } {
  const [xmin, ymin, xmax, ymax] = bounds;
  const scale = Math.min(width / (xmax - xmin + 4), height / (ymax - ymin + 4));
  return { centerX: (xmin + xmax) / 2, centerY: (ymin + ymax) / 2, scale };
}
