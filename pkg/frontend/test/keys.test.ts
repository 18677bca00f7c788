import { describe, expect, it } from "vitest";

import { KeyTracker, ServerView } from "../src/keys.js";

const server: ServerView = { mode: "MANUAL", recording: false };

describe("KeyTracker", () => {
  it("emits exactly one STEER per hold, ignoring auto-repeat", () => {
    const keys = new KeyTracker();
    expect(keys.keydown("ArrowLeft", server)).toEqual([{ kind: "STEER", steer: -1 }]);
    expect(keys.keydown("ArrowLeft", server)).toEqual([]);
    expect(keys.keydown("ArrowLeft", server)).toEqual([]);
  });

  it("returns to STEER 0 when all arrows are released", () => {
    const keys = new KeyTracker();
    keys.keydown("ArrowRight", server);
    expect(keys.keyup("ArrowRight")).toEqual([{ kind: "STEER", steer: 0 }]);
  });

  it("most recent press wins when both arrows are held", () => {
    const keys = new KeyTracker();
    expect(keys.keydown("ArrowLeft", server)).toEqual([{ kind: "STEER", steer: -1 }]);
    expect(keys.keydown("ArrowRight", server)).toEqual([{ kind: "STEER", steer: 1 }]);
    // releasing the newer arrow falls back to the older held one
    expect(keys.keyup("ArrowRight")).toEqual([{ kind: "STEER", steer: -1 }]);
    expect(keys.keyup("ArrowLeft")).toEqual([{ kind: "STEER", steer: 0 }]);
  });

  it("keyup of an arrow that is not held changes nothing", () => {
    const keys = new KeyTracker();
    expect(keys.keyup("ArrowLeft")).toEqual([]);
  });

  it("R toggles against the server's confirmed recording state", () => {
    const keys = new KeyTracker();
    expect(keys.keydown("r", { mode: "MANUAL", recording: false }))
      .toEqual([{ kind: "SET_RECORDING", recording: true }]);
    expect(keys.keydown("R", { mode: "MANUAL", recording: true }))
      .toEqual([{ kind: "SET_RECORDING", recording: false }]);
  });

  it("M cycles modes from the server's confirmed mode", () => {
    const keys = new KeyTracker();
    expect(keys.keydown("m", { mode: "MANUAL", recording: false }))
      .toEqual([{ kind: "SET_MODE", mode: "AUTONOMOUS" }]);
    expect(keys.keydown("m", { mode: "AUTONOMOUS", recording: false }))
      .toEqual([{ kind: "SET_MODE", mode: "EXPERT" }]);
    expect(keys.keydown("m", { mode: "EXPERT", recording: false }))
      .toEqual([{ kind: "SET_MODE", mode: "MANUAL" }]);
  });

  it("other keys are inert", () => {
    const keys = new KeyTracker();
    expect(keys.keydown("w", server)).toEqual([]);
    expect(keys.keyup("w")).toEqual([]);
  });
});
