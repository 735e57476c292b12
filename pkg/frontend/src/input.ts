/**
 * Fixed-rate input loop: polls key state and gamepad axes at 20 Hz and
 * emits clamped axis pairs.  Dead-man behavior: releasing every key (or
 * losing window focus) zeroes the emitted axes on the next tick, and a
 * blur emits zeros immediately so the drone stops without waiting.
 */

import { clampAxis } from "./wire.js";

export const CLIENT_TICK_MS = 50; // 20 Hz, ahead of the 10 Hz sim loop

export interface KeyBindings {
  forward: string;
  left: string;
  right: string;
}

export const DEFAULT_BINDINGS: KeyBindings = {
  forward: "KeyW",
  left: "KeyA",
  right: "KeyD",
};

export type EmitFn = (linear: number, angular: number, timestamp: number) => void;

export class InputLoop {
  private held = new Set<string>();
  private gamepadLinear = 0;
  private gamepadAngular = 0;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly emit: EmitFn,
    private readonly bindings: KeyBindings = DEFAULT_BINDINGS,
    private readonly now: () => number = () => Date.now() / 1000,
  ) {}

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => this.tick(), CLIENT_TICK_MS);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  keyDown(code: string): void {
    this.held.add(code);
  }

  keyUp(code: string): void {
    this.held.delete(code);
  }

  /** Latest-value hold for gamepad axes; overridden by key input when held. */
  setGamepadAxes(linear: number, angular: number): void {
    this.gamepadLinear = clampAxis(linear, 0, 1);
    this.gamepadAngular = clampAxis(angular, -1, 1);
  }

  /** Window blur / visibility loss: drop everything and emit zeros at once. */
  blur(): void {
    this.held.clear();
    this.gamepadLinear = 0;
    this.gamepadAngular = 0;
    this.emit(0, 0, this.now());
  }

  axes(): { linear: number; angular: number } {
    let linear = this.gamepadLinear;
    let angular = this.gamepadAngular;
    if (this.held.has(this.bindings.forward)) linear = 1;
    if (this.held.has(this.bindings.left)) angular = 1;
    if (this.held.has(this.bindings.right)) angular = -1;
    if (
      this.held.has(this.bindings.left) &&
      this.held.has(this.bindings.right)
    ) {
      angular = 0;
    }
    return { linear: clampAxis(linear, 0, 1), angular: clampAxis(angular, -1, 1) };
  }

  tick(): void {
    const { linear, angular } = this.axes();
    this.emit(linear, angular, this.now());
  }
}
