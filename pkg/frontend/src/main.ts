/** Wires the DOM: viewport canvas, HUD, key handling, websocket session. */

import { KeyTracker } from "./keys.js";
import { base64ToBytes, decodePgm } from "./pgm.js";
import { Mode, TelemetryMessage } from "./protocol.js";
import { frameToRgba, hudLines, scaleFor } from "./render.js";
import { Session } from "./socket.js";

const canvas = document.getElementById("viewport") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
ctx.imageSmoothingEnabled = false; // pixels are data: nearest-neighbor only

const hud = document.getElementById("hud")!;
const banner = document.getElementById("banner")!;
const keys = new KeyTracker();

// mode/recording shown and toggled from are always the server's last word
let serverView = { mode: "MANUAL" as Mode, recording: false };
let staging: HTMLCanvasElement | null = null;

function showBanner(text: string, kind: "info" | "bad") {
  banner.textContent = text;
  banner.className = kind;
  banner.style.display = text ? "block" : "none";
}

function paint(t: TelemetryMessage) {
  let frame;
  try {
    frame = decodePgm(base64ToBytes(t.frame));
  } catch (err) {
    showBanner(`bad frame payload: ${err}`, "bad");
    return;
  }
  if (staging === null || staging.width !== frame.width) {
    staging = document.createElement("canvas");
    staging.width = frame.width;
    staging.height = frame.height;
  }
  const sctx = staging.getContext("2d")!;
  sctx.putImageData(
    new ImageData(frameToRgba(frame), frame.width, frame.height), 0, 0);
  const scale = scaleFor(frame.width, canvas.width);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(staging, 0, 0, frame.width, frame.height,
    0, 0, frame.width * scale, frame.height * scale);
  hud.textContent = hudLines(t).join("\n");
}

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const session = new Session(wsUrl, {
  onMessage(message) {
    if (message.kind === "telemetry") {
      serverView = { mode: message.mode, recording: message.recording };
      paint(message);
    } else if (message.kind === "error") {
      showBanner(message.message, "bad");
    }
  },
  onState(state) {
    if (state === "open") showBanner("", "info");
    else showBanner(state === "connecting" ? "connecting..." : "disconnected - retrying", "bad");
  },
  onStall(stalled) {
    if (stalled) showBanner("stalled: no telemetry for 2 s", "bad");
  },
  onBadPayload(detail) {
    showBanner(`malformed message: ${detail}`, "bad");
  },
});
session.connect();

document.addEventListener("keydown", (event) => {
  if (["ArrowLeft", "ArrowRight"].includes(event.key)) event.preventDefault();
  for (const msg of keys.keydown(event.key, serverView)) session.send(msg);
});
document.addEventListener("keyup", (event) => {
  for (const msg of keys.keyup(event.key)) session.send(msg);
});
