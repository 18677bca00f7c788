import { describe, expect, it } from "vitest";

import { nextMode, parseServerMessage } from "../src/protocol.js";

const telemetry = {
  kind: "telemetry",
  step: 1,
  frame: "UDU...",
  pose: [0, 0, 0],
  offset: 0,
  mode: "MANUAL",
  recording: false,
  last_cmd: 0,
  dataset_counts: { "-1": 0, "0": 0, "1": 0 },
};

describe("parseServerMessage", () => {
  it("accepts well-formed telemetry", () => {
    const message = parseServerMessage(JSON.stringify(telemetry));
    expect(message?.kind).toBe("telemetry");
  });

  it("accepts acks and errors", () => {
    expect(parseServerMessage('{"kind":"ack","of":"STEER"}'))
      .toEqual({ kind: "ack", of: "STEER" });
    expect(parseServerMessage('{"kind":"error","message":"no"}'))
      .toEqual({ kind: "error", message: "no" });
  });

  it("rejects malformed payloads without throwing", () => {
    expect(parseServerMessage("not json")).toBeNull();
    expect(parseServerMessage('{"kind":"telemetry"}')).toBeNull();
    expect(parseServerMessage('{"kind":"mystery"}')).toBeNull();
    expect(parseServerMessage(JSON.stringify({ ...telemetry, mode: "TURBO" }))).toBeNull();
    expect(parseServerMessage(JSON.stringify({ ...telemetry, last_cmd: 3 }))).toBeNull();
  });
});

describe("nextMode", () => {
  it("cycles through all three modes", () => {
    expect(nextMode("MANUAL")).toBe("AUTONOMOUS");
    expect(nextMode("AUTONOMOUS")).toBe("EXPERT");
    expect(nextMode("EXPERT")).toBe("MANUAL");
  });
});
