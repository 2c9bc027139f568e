// WebSocket client: strictly increasing seq per connection, a latest-state
// slot (the renderer never sees stale frames), and lifecycle callbacks.

import { InputMessage, Role, ServerMessage, StateMessage } from "./protocol.js";

export interface NetCallbacks {
  onState?: (msg: StateMessage) => void;
  onEvent?: (msg: ServerMessage & { type: "event" }) => void;
  onClose?: () => void;
}

export class SessionSocket {
  readonly role: Role;
  latest: StateMessage | null = null;
  lastStateAt = 0;
  received = 0;
  private ws: WebSocket;
  private seq = 0;

  constructor(sessionId: string, role: Role, callbacks: NetCallbacks = {},
              base: string = "") {
    this.role = role;
    const proto = location.protocol === "https:" ? "wss" : "ws";
    const host = base || location.host;
    this.ws = new WebSocket(`${proto}://${host}/ws/${sessionId}?role=${role}`);
    this.ws.onmessage = (ev) => {
      let msg: ServerMessage;
      try {
        msg = JSON.parse(ev.data as string) as ServerMessage;
      } catch {
        return;
      }
      if (msg.type === "state") {
        this.latest = msg;
        this.lastStateAt = performance.now();
        this.received += 1;
        callbacks.onState?.(msg);
      } else if (msg.type === "event") {
        callbacks.onEvent?.(msg);
      }
    };
    this.ws.onclose = () => callbacks.onClose?.();
  }

  get open(): boolean {
    return this.ws.readyState === WebSocket.OPEN;
  }

  /** Send with a fresh (strictly increasing) sequence number. */
  send(build: (seq: number, timeMs: number) => InputMessage): void {
    if (!this.open) return;
    this.seq += 1;
    this.ws.send(JSON.stringify(build(this.seq, performance.now())));
  }

  close(): void {
    this.ws.close();
  }
}
