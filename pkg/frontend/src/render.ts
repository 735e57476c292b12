/**
 * Pure view math: grayscale expansion to RGBA, canvas scaling, HUD text,
 * and the spectate probability bars.  Kept DOM-free so it is testable;
 * main.ts owns the actual canvas calls.
 */

import { DecodedFrame } from "./session.js";

/** Integer upscale factor that fits the frame into the canvas. */
export function scaleFor(canvasSize: number, cameraSize: number): number {
  if (cameraSize <= 0 || canvasSize < cameraSize) {
    return 1;
  }
  return Math.floor(canvasSize / cameraSize);
}

/** Grayscale bytes -> RGBA bytes for ImageData (alpha opaque). */
export function grayscaleToRgba(pixels: Uint8Array): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(pixels.length * 4);
  for (let i = 0; i < pixels.length; i++) {
    const v = pixels[i];
    out[4 * i] = v;
    out[4 * i + 1] = v;
    out[4 * i + 2] = v;
    out[4 * i + 3] = 255;
  }
  return out;
}

export interface HudLines {
  speed: string;
  elapsed: string;
  distance: string;
}

export function hudLines(frame: DecodedFrame): HudLines {
  const hud = frame.hud;
  return {
    speed: `${(hud.speed ?? 0).toFixed(2)} m/s`,
    elapsed: `${(hud.elapsed ?? 0).toFixed(1)} s`,
    distance: `${(hud.distance ?? 0).toFixed(1)} m`,
  };
}

export interface Bar {
  label: "L" | "S" | "R";
  height: number; // pixels
  value: number;
}

/** Three probability bars (left, straight, right), heights in pixels. */
export function probBars(
  probs: [number, number, number],
  maxHeight: number,
): Bar[] {
  const labels: Bar["label"][] = ["L", "S", "R"];
  return probs.map((value, i) => ({
    label: labels[i],
    height: Math.round(Math.min(1, Math.max(0, value)) * maxHeight),
    value,
  }));
}
