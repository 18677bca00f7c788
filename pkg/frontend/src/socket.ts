/** Managed websocket session: reconnect with backoff, stall watchdog. */

import { Backoff, isStalled } from "./backoff.js";
import { ControlMessage, ServerMessage, parseServerMessage } from "./protocol.js";

export type ConnectionState = "connecting" | "open" | "closed";

export interface SessionHandlers {
  onMessage(message: ServerMessage): void;
  onState(state: ConnectionState): void;
  onStall(stalled: boolean): void;
  onBadPayload(detail: string): void;
}

export class Session {
  private ws: WebSocket | null = null;
  private readonly backoff = new Backoff();
  private lastMessageAt: number | null = null;
  private stalled = false;
  private closedByUser = false;

  constructor(
    private readonly url: string,
    private readonly handlers: SessionHandlers,
  ) {
    setInterval(() => this.checkStall(), 250);
  }

  connect(): void {
    this.handlers.onState("connecting");
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.backoff.reset();
      this.handlers.onState("open");
    };
    this.ws.onmessage = (event) => {
      this.lastMessageAt = Date.now();
      this.setStalled(false);
      const message = parseServerMessage(String(event.data));
      if (message === null) {
        // malformed payload: surface it, keep the connection
        this.handlers.onBadPayload(String(event.data).slice(0, 120));
        return;
      }
      this.handlers.onMessage(message);
    };
    this.ws.onclose = () => {
      this.ws = null;
      this.handlers.onState("closed");
      if (!this.closedByUser) {
        setTimeout(() => this.connect(), this.backoff.next());
      }
    };
    this.ws.onerror = () => {
      this.ws?.close();
    };
  }

  send(message: ControlMessage): boolean {
    if (this.ws === null || this.ws.readyState !== WebSocket.OPEN) return false;
    this.ws.send(JSON.stringify(message));
    return true;
  }

  close(): void {
    this.closedByUser = true;
    this.ws?.close();
  }

  private checkStall(): void {
    this.setStalled(isStalled(this.lastMessageAt, Date.now()));
  }

  private setStalled(stalled: boolean): void {
    if (stalled !== this.stalled) {
      this.stalled = stalled;
      this.handlers.onStall(stalled);
    }
  }
}
