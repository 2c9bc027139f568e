// Wire protocol shared with the session service. Builders sanitize and clamp
// so that every emitted message validates against the server's parser.

export const WALK_SPEED = 1.4;     // m/s, keys held without sprint
export const SPRINT_SPEED = 3.0;   // m/s, Shift held
export const MAX_PED_SPEED = 3.0;  // server clamp; never exceed it client-side
export const MAX_INPUT_HZ = 60;

export type Role = "pedestrian" | "vehicle" | "observer";

export interface PedestrianInput {
  type: "input";
  seq: number;
  client_time_ms: number;
  move: [number, number];
  yaw?: number;
}

export interface VehicleInput {
  type: "input";
  seq: number;
  client_time_ms: number;
  throttle: number;
  steer: number;
}

export type InputMessage = PedestrianInput | VehicleInput;

export interface AgentStateMsg {
  id: number;
  kind: "car" | "pedestrian";
  x: number;
  y: number;
  yaw: number;
  vx: number;
  vy: number;
  shape: [number, number];
}

export interface StateMessage {
  type: "state";
  frame: number;
  sim_time: number;
  session: string;
  agents: AgentStateMsg[];
}

export interface EventMessage {
  type: "event";
  event: string;
  [key: string]: unknown;
}

export type ServerMessage = StateMessage | EventMessage;

const finite = (v: number): number => (Number.isFinite(v) ? v : 0);

const clamp = (v: number, lo: number, hi: number): number =>
  Math.min(hi, Math.max(lo, finite(v)));

/** Clamp a planar velocity to the pedestrian speed limit. */
export function clampSpeed(vx: number, vy: number, max = MAX_PED_SPEED): [number, number] {
  const x = finite(vx);
  const y = finite(vy);
  const speed = Math.hypot(x, y);
  if (speed <= max || speed === 0) return [x, y];
  const scale = max / speed;
  return [x * scale, y * scale];
}

/** Held-key axes to a world velocity: W north (+y), D east (+x); diagonals
 * are normalized so the magnitude never exceeds the walk/sprint speed. */
export function keysToVelocity(up: boolean, down: boolean, left: boolean,
                               right: boolean, sprint: boolean): [number, number] {
  let x = (right ? 1 : 0) - (left ? 1 : 0);
  let y = (up ? 1 : 0) - (down ? 1 : 0);
  const mag = Math.hypot(x, y);
  if (mag === 0) return [0, 0];
  const speed = sprint ? SPRINT_SPEED : WALK_SPEED;
  return [(x / mag) * speed, (y / mag) * speed];
}

export function buildPedestrianInput(seq: number, timeMs: number,
                                     move: [number, number],
                                     yaw: number | null): PedestrianInput {
  const [vx, vy] = clampSpeed(move[0], move[1]);
  const msg: PedestrianInput = {
    type: "input",
    seq: Math.max(0, Math.floor(finite(seq))),
    client_time_ms: finite(timeMs),
    move: [vx, vy],
  };
  if (yaw !== null && Number.isFinite(yaw)) {
    msg.yaw = normalizeYaw(yaw);
  }
  return msg;
}

export function buildVehicleInput(seq: number, timeMs: number,
                                  throttle: number, steer: number): VehicleInput {
  return {
    type: "input",
    seq: Math.max(0, Math.floor(finite(seq))),
    client_time_ms: finite(timeMs),
    throttle: clamp(throttle, -1, 1),
    steer: clamp(steer, -1, 1),
  };
}

export function normalizeYaw(yaw: number): number {
  const y = ((finite(yaw) + 180) % 360 + 360) % 360 - 180;
  return y;
}

/** Mirror of the server-side parser, used by tests to prove wire fidelity. */
export function validatesAsServerInput(msg: unknown, role: Role): boolean {
  if (typeof msg !== "object" || msg === null) return false;
  const m = msg as Record<string, unknown>;
  if (m.type !== "input") return false;
  if (!Number.isInteger(m.seq)) return false;
  if (typeof m.client_time_ms !== "number" || !Number.isFinite(m.client_time_ms)) return false;
  if (role === "pedestrian") {
    const move = m.move;
    if (!Array.isArray(move) || move.length !== 2) return false;
    if (!move.every((v) => typeof v === "number" && Number.isFinite(v))) return false;
    if (m.yaw !== undefined &&
        (typeof m.yaw !== "number" || !Number.isFinite(m.yaw))) return false;
    return true;
  }
  if (role === "vehicle") {
    for (const key of ["throttle", "steer"]) {
      const v = m[key];
      if (typeof v !== "number" || !Number.isFinite(v) || Math.abs(v) > 1) return false;
    }
    return true;
  }
  return false;
}
