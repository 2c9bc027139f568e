// Keyboard state tracking and input sampling. The sampler is a pure function
// of the captured key state, so it is testable without a DOM.

import {
  InputMessage,
  Role,
  buildPedestrianInput,
  buildVehicleInput,
  keysToVelocity,
  normalizeYaw,
} from "./protocol.js";

export const YAW_KEY_RATE = 120; // deg/s while Q or E is held

export interface KeyState {
  up: boolean;
  down: boolean;
  left: boolean;
  right: boolean;
  sprint: boolean;
  turnLeft: boolean;   // Q
  turnRight: boolean;  // E
}

export function emptyKeys(): KeyState {
  return { up: false, down: false, left: false, right: false,
           sprint: false, turnLeft: false, turnRight: false };
}

const KEY_MAP: Record<string, keyof KeyState> = {
  w: "up", s: "down", a: "left", d: "right",
  W: "up", S: "down", A: "left", D: "right",
  ArrowUp: "up", ArrowDown: "down", ArrowLeft: "left", ArrowRight: "right",
  Shift: "sprint", q: "turnLeft", e: "turnRight", Q: "turnLeft", E: "turnRight",
};

export function applyKey(keys: KeyState, key: string, pressed: boolean): boolean {
  const field = KEY_MAP[key];
  if (field === undefined) return false;
  keys[field] = pressed;
  return true;
}

/** Advance the facing angle from held turn keys. */
export function updateYaw(yaw: number, keys: KeyState, dtSeconds: number): number {
  let next = yaw;
  if (keys.turnLeft) next += YAW_KEY_RATE * dtSeconds;
  if (keys.turnRight) next -= YAW_KEY_RATE * dtSeconds;
  return normalizeYaw(next);
}

/** Build the wire message for the current key state. Pedestrians face their
 * motion direction unless turn keys set an explicit yaw. */
export function sampleInput(role: Role, keys: KeyState, seq: number,
                            timeMs: number, yaw: number): InputMessage {
  if (role === "vehicle") {
    const throttle = (keys.up ? 1 : 0) - (keys.down ? 1 : 0);
    const steer = (keys.turnLeft || keys.left ? 1 : 0) - (keys.turnRight || keys.right ? 1 : 0);
    return buildVehicleInput(seq, timeMs, throttle, steer);
  }
  const move = keysToVelocity(keys.up, keys.down, keys.left, keys.right, keys.sprint);
  let facing = yaw;
  if ((move[0] !== 0 || move[1] !== 0) && !keys.turnLeft && !keys.turnRight) {
    facing = (Math.atan2(move[1], move[0]) * 180) / Math.PI;
  }
  return buildPedestrianInput(seq, timeMs, move, facing);
}

/** Attach listeners that maintain a KeyState; returns a detach function. */
export function bindKeyboard(target: Pick<Document, "addEventListener" | "removeEventListener">,
                             keys: KeyState): () => void {
  const onDown = (e: Event) => {
    if (applyKey(keys, (e as KeyboardEvent).key, true)) e.preventDefault();
  };
  const onUp = (e: Event) => {
    if (applyKey(keys, (e as KeyboardEvent).key, false)) e.preventDefault();
  };
  target.addEventListener("keydown", onDown);
  target.addEventListener("keyup", onUp);
  return () => {
    target.removeEventListener("keydown", onDown);
    target.removeEventListener("keyup", onUp);
  };
}
