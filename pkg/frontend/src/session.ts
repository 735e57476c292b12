/**
 * Client session state machine: handshake, frame intake with strict
 * tick ordering, HUD bookkeeping, and the read-only guarantee of
 * spectate mode (commands can only ever leave in HumanTrial/Practice).
 */

import {
  CommandMsg,
  ControlMsg,
  FrameMsg,
  ServerHello,
  TrialEnded,
  WIRE_FORMAT_VERSION,
  WireError,
  clampAxis,
  decodeFramePayload,
  decodeServerMessage,
  encodeMessage,
} from "./wire.js";

export type SessionMode = "human" | "practice" | "spectate";

export type ConnectionStatus =
  | "connecting"
  | "lobby"
  | "active"
  | "ended"
  | "error";

export interface DecodedFrame {
  tick: number;
  pixels: Uint8Array; // grayscale, row-major
  width: number;
  height: number;
  hud: { speed?: number; elapsed?: number; distance?: number };
  probs: [number, number, number] | null;
  mode: string | null;
}

export interface TrialSummary {
  distance: number;
  time: number;
  termination: string;
  recorded: boolean;
}

/** Transport abstraction so tests can run without a real websocket. */
export interface Sender {
  send(text: string): void;
}

export class ClientSession {
  status: ConnectionStatus = "connecting";
  mode: SessionMode | null = null;
  sessionId = "";
  cameraWidth = 0;
  cameraHeight = 0;
  tickRate = 0;
  errorBanner: string | null = null;
  latestFrame: DecodedFrame | null = null;
  summary: TrialSummary | null = null;
  framesRendered = 0;
  framesDropped = 0;
  commandsSent = 0;

  private lastTick = -1;

  constructor(private readonly sender: Sender) {}

  /** Route one inbound message; never throws on bad payloads, counts them. */
  handleMessage(text: string): void {
    let msg;
    try {
      msg = decodeServerMessage(text);
    } catch {
      this.framesDropped += 1;
      return;
    }
    switch (msg.type) {
      case "server_hello":
        this.onHello(msg);
        break;
      case "frame":
        this.onFrame(msg);
        break;
      case "trial_ended":
        this.onTrialEnded(msg);
        break;
    }
  }

  private onHello(msg: ServerHello): void {
    if (msg.format_version !== WIRE_FORMAT_VERSION) {
      this.status = "error";
      this.errorBanner =
        `protocol version mismatch: server speaks v${msg.format_version}, ` +
        `this client speaks v${WIRE_FORMAT_VERSION}`;
      return;
    }
    this.sessionId = msg.session_id;
    this.cameraWidth = msg.camera_width;
    this.cameraHeight = msg.camera_height;
    this.tickRate = msg.tick_rate;
    this.status = "lobby";
  }

  private onFrame(msg: FrameMsg): void {
    if (this.status !== "active") {
      this.framesDropped += 1;
      return;
    }
    if (msg.tick <= this.lastTick) {
      // ticks must strictly increase; late arrivals are stale
      this.framesDropped += 1;
      return;
    }
    let pixels: Uint8Array;
    try {
      pixels = decodeFramePayload(msg.frame, this.cameraWidth, this.cameraHeight);
    } catch (exc) {
      if (exc instanceof WireError) {
        this.framesDropped += 1;
        return;
      }
      throw exc;
    }
    this.lastTick = msg.tick;
    this.latestFrame = {
      tick: msg.tick,
      pixels,
      width: this.cameraWidth,
      height: this.cameraHeight,
      hud: msg.hud ?? {},
      probs: msg.probs ?? null,
      mode: msg.mode ?? null,
    };
    this.framesRendered += 1;
  }

  private onTrialEnded(msg: TrialEnded): void {
    this.summary = {
      distance: msg.distance,
      time: msg.time,
      termination: msg.termination,
      recorded: msg.recorded,
    };
    this.status = "ended";
  }

  startTrial(plan: string, mode: SessionMode, practice = false): void {
    if (this.status !== "lobby") {
      throw new Error(`cannot start a trial from status ${this.status}`);
    }
    this.mode = mode;
    this.lastTick = -1;
    this.summary = null;
    this.status = "active";
    const msg: ControlMsg = {
      type: "control",
      session_id: this.sessionId,
      action: "start",
      plan,
      mode,
      practice,
    };
    this.sender.send(encodeMessage(msg));
  }

  endTrial(): void {
    const msg: ControlMsg = {
      type: "control",
      session_id: this.sessionId,
      action: "end",
    };
    this.sender.send(encodeMessage(msg));
  }

  /** Commands are emitted only in HumanTrial/Practice; Spectate is read-only. */
  get mayCommand(): boolean {
    return (
      this.status === "active" &&
      (this.mode === "human" || this.mode === "practice")
    );
  }

  sendCommand(linear: number, angular: number, timestamp: number): boolean {
    if (!this.mayCommand) {
      return false;
    }
    const msg: CommandMsg = {
      type: "command",
      session_id: this.sessionId,
      linear_axis: clampAxis(linear, 0, 1),
      angular_axis: clampAxis(angular, -1, 1),
      client_timestamp: timestamp,
    };
    this.sender.send(encodeMessage(msg));
    this.commandsSent += 1;
    return true;
  }
}
