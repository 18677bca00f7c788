/** JSON message types spoken over the gateway's /ws channel. */

export type Mode = "MANUAL" | "AUTONOMOUS" | "EXPERT";
export type Steer = -1 | 0 | 1;

export interface TelemetryMessage {
  kind: "telemetry";
  step: number;
  frame: string; // base64 PGM payload
  pose: [number, number, number];
  offset: number;
  mode: Mode;
  recording: boolean;
  last_cmd: Steer;
  dataset_counts: Record<string, number>;
}

export interface AckMessage {
  kind: "ack";
  of: string;
}

export interface ErrorMessage {
  kind: "error";
  message: string;
}

export type ServerMessage = TelemetryMessage | AckMessage | ErrorMessage;

export type ControlMessage =
  | { kind: "STEER"; steer: Steer }
  | { kind: "SET_MODE"; mode: Mode }
  | { kind: "SET_RECORDING"; recording: boolean }
  | { kind: "RESET" };

const MODES: Mode[] = ["MANUAL", "AUTONOMOUS", "EXPERT"];

/** Parse one server frame; returns null for anything malformed. */
export function parseServerMessage(text: string): ServerMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const msg = raw as Record<string, unknown>;
  switch (msg.kind) {
    case "ack":
      return typeof msg.of === "string" ? { kind: "ack", of: msg.of } : null;
    case "error":
      return typeof msg.message === "string"
        ? { kind: "error", message: msg.message }
        : null;
    case "telemetry": {
      if (
        typeof msg.step !== "number" ||
        typeof msg.frame !== "string" ||
        !Array.isArray(msg.pose) ||
        msg.pose.length !== 3 ||
        typeof msg.offset !== "number" ||
        !MODES.includes(msg.mode as Mode) ||
        typeof msg.recording !== "boolean" ||
        ![-1, 0, 1].includes(msg.last_cmd as number) ||
        typeof msg.dataset_counts !== "object" ||
        msg.dataset_counts === null
      ) {
        return null;
      }
      return msg as unknown as TelemetryMessage;
    }
    default:
      return null;
  }
}

/** Mode after pressing the cycle key. */
export function nextMode(mode: Mode): Mode {
  return MODES[(MODES.indexOf(mode) + 1) % MODES.length];
}
