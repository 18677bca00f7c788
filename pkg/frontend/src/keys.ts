/** Keyboard state machine: held arrows steer, R/M toggle server state.
 *
 * One ControlMessage per distinct intent change; auto-repeat keydown
 * events produce nothing. When both arrows are held the most recent
 * press wins, and releasing back to no arrows returns STEER 0.
 */

import { ControlMessage, Mode, Steer, nextMode } from "./protocol.js";

export interface ServerView {
  mode: Mode;
  recording: boolean;
}

export class KeyTracker {
  private leftHeld = false;
  private rightHeld = false;
  private lastArrow: "left" | "right" | null = null;
  private sentSteer: Steer = 0;

  private currentSteer(): Steer {
    if (this.leftHeld && this.rightHeld) {
      return this.lastArrow === "right" ? 1 : -1;
    }
    if (this.leftHeld) return -1;
    if (this.rightHeld) return 1;
    return 0;
  }

  private steerChange(): ControlMessage[] {
    const steer = this.currentSteer();
    if (steer === this.sentSteer) return [];
    this.sentSteer = steer;
    return [{ kind: "STEER", steer }];
  }

  /** server: the last CONFIRMED mode/recording, from telemetry. */
  keydown(key: string, server: ServerView): ControlMessage[] {
    switch (key) {
      case "ArrowLeft":
        if (this.leftHeld) return []; // auto-repeat
        this.leftHeld = true;
        this.lastArrow = "left";
        return this.steerChange();
      case "ArrowRight":
        if (this.rightHeld) return [];
        this.rightHeld = true;
        this.lastArrow = "right";
        return this.steerChange();
      case "r":
      case "R":
        return [{ kind: "SET_RECORDING", recording: !server.recording }];
      case "m":
      case "M":
        return [{ kind: "SET_MODE", mode: nextMode(server.mode) }];
      default:
        return [];
    }
  }

  keyup(key: string): ControlMessage[] {
    switch (key) {
      case "ArrowLeft":
        this.leftHeld = false;
        return this.steerChange();
      case "ArrowRight":
        this.rightHeld = false;
        return this.steerChange();
      default:
        return [];
    }
  }
}
