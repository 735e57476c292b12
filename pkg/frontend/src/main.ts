/**
 * Browser entry point: wires the websocket, canvas, keyboard and gamepad
 * together.  All logic lives in session/input/render; this file only touches
 * the DOM.
 */

import { CLIENT_TICK_MS, InputLoop } from "./input.js";
import { grayscaleToRgba, hudLines, probBars, scaleFor } from "./render.js";
import { ClientSession, SessionMode } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function boot(url: string): void {
  const canvas = el<HTMLCanvasElement>("view");
  const banner = el<HTMLDivElement>("banner");
  const hudBox = el<HTMLDivElement>("hud");
  const probsBox = el<HTMLCanvasElement>("probs");
  const modeBadge = el<HTMLDivElement>("mode-badge");
  const summaryBox = el<HTMLDivElement>("summary");
  const smoothToggle = el<HTMLInputElement>("smooth");

  const ws = new WebSocket(url);
  const session = new ClientSession({ send: (text) => ws.send(text) });
  const input = new InputLoop((lin, ang, ts) => {
    session.sendCommand(lin, ang, ts);
  });

  ws.onmessage = (event) => {
    session.handleMessage(String(event.data));
    if (session.status === "error" && session.errorBanner) {
      banner.textContent = session.errorBanner;
      banner.style.display = "block";
      return;
    }
    if (session.latestFrame) paint();
    if (session.summary) {
      const s = session.summary;
      summaryBox.textContent =
        `trial over: ${s.termination}, ${s.distance.toFixed(1)} m in ` +
        `${s.time.toFixed(1)} s${s.recorded ? " (recorded)" : ""}`;
      input.stop();
    }
  };
  ws.onclose = () => input.stop();

  function paint(): void {
    const frame = session.latestFrame;
    if (!frame) return;
    const scale = scaleFor(canvas.width, frame.width);
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const rgba = grayscaleToRgba(frame.pixels);
    const image = new ImageData(rgba, frame.width, frame.height);
    // draw at native size, then upscale with the chosen filter
    const off = new OffscreenCanvas(frame.width, frame.height);
    const offCtx = off.getContext("2d");
    if (!offCtx) return;
    offCtx.putImageData(image, 0, 0);
    ctx.imageSmoothingEnabled = smoothToggle.checked;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.drawImage(off, 0, 0, frame.width * scale, frame.height * scale);

    const lines = hudLines(frame);
    hudBox.textContent = `${lines.speed} · ${lines.elapsed} · ${lines.distance}`;

    if (frame.probs) {
      const pctx = probsBox.getContext("2d");
      if (pctx) {
        pctx.clearRect(0, 0, probsBox.width, probsBox.height);
        const bars = probBars(frame.probs, probsBox.height - 14);
        const barWidth = probsBox.width / 3 - 8;
        bars.forEach((bar, i) => {
          const x = i * (barWidth + 8) + 4;
          pctx.fillStyle = "#4caf50";
          pctx.fillRect(x, probsBox.height - 12 - bar.height, barWidth, bar.height);
          pctx.fillStyle = "#ddd";
          pctx.fillText(bar.label, x + barWidth / 2 - 3, probsBox.height - 2);
        });
      }
      modeBadge.textContent = frame.mode ?? "";
    }
  }

  function startTrial(mode: SessionMode): void {
    const plan = el<HTMLSelectElement>("plan").value;
    session.startTrial(plan, mode, mode === "practice");
    if (mode !== "spectate") {
      input.start();
    }
  }

  el<HTMLButtonElement>("start-human").onclick = () => startTrial("human");
  el<HTMLButtonElement>("start-practice").onclick = () => startTrial("practice");
  el<HTMLButtonElement>("start-spectate").onclick = () => startTrial("spectate");
  el<HTMLButtonElement>("end").onclick = () => session.endTrial();

  window.addEventListener("keydown", (e) => input.keyDown(e.code));
  window.addEventListener("keyup", (e) => input.keyUp(e.code));
  window.addEventListener("blur", () => input.blur());
  document.addEventListener("visibilitychange", () => {
    if (document.hidden) input.blur();
  });

  // gamepad: latest-value poll folded into the input cadence
  setInterval(() => {
    const pads = navigator.getGamepads ? navigator.getGamepads() : [];
    const pad = pads && pads[0];
    if (pad) {
      // trigger (axis 1, pushed = negative) drives, stick x steers
      input.setGamepadAxes(Math.max(0, -pad.axes[1]), -pad.axes[0]);
    }
  }, CLIENT_TICK_MS);
}
