/** Pure helpers behind the viewport and HUD: same telemetry, same pixels. */

import { GrayFrame } from "./pgm.js";
import { TelemetryMessage } from "./protocol.js";

/** Expand a grayscale frame to RGBA bytes for ImageData. */
export function frameToRgba(frame: GrayFrame): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(frame.width * frame.height * 4);
  for (let i = 0; i < frame.pixels.length; i++) {
    const v = frame.pixels[i];
    const j = i * 4;
    out[j] = v;
    out[j + 1] = v;
    out[j + 2] = v;
    out[j + 3] = 255;
  }
  return out;
}

const STEER_GLYPH: Record<string, string> = { "-1": "left", "0": "straight", "1": "right" };

/** HUD lines shown next to the viewport. */
export function hudLines(t: TelemetryMessage): string[] {
  const counts = t.dataset_counts;
  return [
    `step ${t.step}`,
    `mode ${t.mode}`,
    t.recording ? "REC on" : "REC off",
    `cmd ${STEER_GLYPH[String(t.last_cmd)]}`,
    `offset ${t.offset.toFixed(3)} m`,
    `samples L:${counts["-1"] ?? 0} S:${counts["0"] ?? 0} R:${counts["1"] ?? 0}`,
  ];
}

/** Integer nearest-neighbor scale factor for a square canvas. */
export function scaleFor(frameSide: number, canvasSide: number): number {
  return Math.max(1, Math.floor(canvasSide / frameSide));
}
