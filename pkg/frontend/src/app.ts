// Session UI wiring: scenario list, lobby, role selection, the 30 Hz input
// sampler, and the render loop over the latest received state.

import { bindKeyboard, emptyKeys, sampleInput, updateYaw } from "./input.js";
import { SessionSocket } from "./net.js";
import { MAX_INPUT_HZ, Role } from "./protocol.js";
import { MapData, ViewState, fitCamera, renderFrame } from "./view.js";

const INPUT_HZ = 30; // well under the 60 Hz wire budget

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function fetchJson(url: string, options?: RequestInit): Promise<any> {
  const response = await fetch(url, options);
  if (!response.ok) throw new Error(`${url}: ${response.status} ${await response.text()}`);
  return response.json();
}

class App {
  private canvas = el<HTMLCanvasElement>("scene");
  private ctx = this.canvas.getContext("2d")!;
  private status = el<HTMLDivElement>("status");
  private keys = emptyKeys();
  private socket: SessionSocket | null = null;
  private sessionId: string | null = null;
  private view: ViewState = {
    centerX: 0, centerY: 0, scale: 8, width: 960, height: 540,
    latest: null, map: null, role: "observer", connection: "idle",
    recording: false, staleness_ms: 0, dropped: 0,
  };
  private yaw = 90;
  private inputTimer: number | null = null;

  constructor() {
    bindKeyboard(document, this.keys);
    el<HTMLButtonElement>("create").onclick = () => void this.createSession();
    el<HTMLButtonElement>("join").onclick = () => void this.join();
    el<HTMLButtonElement>("start").onclick = () => void this.start();
    el<HTMLButtonElement>("stop").onclick = () => void this.stop();
    void this.loadScenarios();
    requestAnimationFrame(() => this.draw());
  }

  private log(text: string): void {
    this.status.textContent = text;
  }

  private async loadScenarios(): Promise<void> {
    const scenarios = await fetchJson("/scenarios");
    const select = el<HTMLSelectElement>("scenario");
    select.innerHTML = "";
    for (const s of scenarios) {
      const opt = document.createElement("option");
      opt.value = s.id;
      opt.textContent = `${s.id} (roles: ${s.roles.join(", ") || "none"})`;
      select.appendChild(opt);
    }
    this.log("pick a scenario, create a session, then join and start");
  }

  private async createSession(): Promise<void> {
    const scenario = el<HTMLSelectElement>("scenario").value;
    const seed = parseInt(el<HTMLInputElement>("seed").value, 10) || 0;
    const created = await fetchJson("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ scenario, seed }),
    });
    el<HTMLInputElement>("session").value = created.session_id;
    this.log(`session ${created.session_id} created (roles: ${created.roles.join(", ")})`);
  }

  private async join(): Promise<void> {
    const sessionId = el<HTMLInputElement>("session").value.trim();
    if (!sessionId) return this.log("enter a session id first");
    const role = el<HTMLSelectElement>("role").value as Role;
    this.sessionId = sessionId;
    this.view.role = role;
    this.socket?.close();

    const map = (await fetchJson(`/sessions/${sessionId}/map`)) as MapData;
    this.view.map = map;
    const cam = fitCamera(map.bounds, this.view.width, this.view.height);
    Object.assign(this.view, cam);

    this.socket = new SessionSocket(sessionId, role, {
      onEvent: (ev) => {
        if (ev.event === "start") this.view.recording = true;
        if (ev.event === "finish") {
          this.view.recording = false;
          this.log(`finished (${ev["reason"]}): scene=${ev["scene"] ?? "none"} replay=${ev["replay"]}`);
          this.stopInputLoop();
        }
        if (ev.event === "lobby") this.log(`joined as ${role}; waiting for start`);
      },
      onClose: () => {
        this.view.connection = "closed";
        this.stopInputLoop();
      },
    });
    this.view.connection = "connected";
    if (role !== "observer") this.startInputLoop();
  }

  private startInputLoop(): void {
    this.stopInputLoop();
    const period = 1000 / Math.min(INPUT_HZ, MAX_INPUT_HZ);
    this.inputTimer = window.setInterval(() => {
      if (!this.socket?.open) return;
      this.yaw = updateYaw(this.yaw, this.keys, period / 1000);
      this.socket.send((seq, t) =>
        sampleInput(this.socket!.role, this.keys, seq, t, this.yaw));
    }, period);
  }

  private stopInputLoop(): void {
    if (this.inputTimer !== null) {
      window.clearInterval(this.inputTimer);
      this.inputTimer = null;
    }
  }

  private async start(): Promise<void> {
    if (!this.sessionId) return this.log("join a session first");
    await fetchJson(`/sessions/${this.sessionId}/start`, { method: "POST" });
    this.log("running; WASD to walk, Shift to sprint, Q/E to turn "
      + "(vehicle: up/down throttle, left/right steer)");
  }

  private async stop(): Promise<void> {
    if (!this.sessionId) return;
    await fetchJson(`/sessions/${this.sessionId}/stop`, { method: "POST" });
  }

  private draw(): void {
    this.canvas.width = this.view.width;
    this.canvas.height = this.view.height;
    if (this.socket) {
      this.view.latest = this.socket.latest;
      this.view.staleness_ms = this.socket.lastStateAt
        ? performance.now() - this.socket.lastStateAt : 0;
    }
    renderFrame(this.ctx, this.view);
    requestAnimationFrame(() => this.draw());
  }
}

new App();
