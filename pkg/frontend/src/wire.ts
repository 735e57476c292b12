/**
 * Wire protocol mirror of the gateway: JSON messages over a websocket,
 * frames as base64 raw 8-bit grayscale planes.
 */

export const WIRE_FORMAT_VERSION = 1;

export interface ServerHello {
  type: "server_hello";
  session_id: string;
  format_version: number;
  camera_width: number;
  camera_height: number;
  tick_rate: number;
  frame_encoding: string;
}

export interface FrameMsg {
  type: "frame";
  session_id: string;
  tick: number;
  frame: string; // base64 payload
  hud: { speed?: number; elapsed?: number; distance?: number };
  probs?: [number, number, number] | null;
  mode?: string | null;
}

export interface CommandMsg {
  type: "command";
  session_id: string;
  linear_axis: number;
  angular_axis: number;
  client_timestamp: number;
}

export interface ControlMsg {
  type: "control";
  session_id: string;
  action: "start" | "reset" | "end";
  plan?: string | null;
  mode?: string | null;
  practice?: boolean;
}

export interface TrialEnded {
  type: "trial_ended";
  session_id: string;
  distance: number;
  time: number;
  termination: string;
  recorded: boolean;
}

export type ServerMessage = ServerHello | FrameMsg | TrialEnded;

export class WireError extends Error {}

const SERVER_TYPES = new Set(["server_hello", "frame", "trial_ended"]);

/** Parse an inbound message; throws WireError on anything malformed. */
export function decodeServerMessage(text: string): ServerMessage {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (exc) {
    throw new WireError(`bad message: ${exc}`);
  }
  if (typeof doc !== "object" || doc === null || !("type" in doc)) {
    throw new WireError("message missing type discriminator");
  }
  const typed = doc as { type: string };
  if (!SERVER_TYPES.has(typed.type)) {
    throw new WireError(`unknown message type ${typed.type}`);
  }
  if (typed.type === "frame") {
    const f = doc as Partial<FrameMsg>;
    if (typeof f.tick !== "number" || typeof f.frame !== "string") {
      throw new WireError("frame message missing tick or payload");
    }
  }
  if (typed.type === "server_hello") {
    const h = doc as Partial<ServerHello>;
    if (
      typeof h.format_version !== "number" ||
      typeof h.camera_width !== "number" ||
      typeof h.camera_height !== "number"
    ) {
      throw new WireError("hello message missing version or camera dims");
    }
  }
  return doc as ServerMessage;
}

export function encodeMessage(msg: CommandMsg | ControlMsg): string {
  return JSON.stringify(msg);
}

function b64decode(payload: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(payload);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  // node fallback (tests)
  return new Uint8Array(Buffer.from(payload, "base64"));
}

/** Decode a base64 frame payload into grayscale bytes; checks the size. */
export function decodeFramePayload(
  payload: string,
  width: number,
  height: number,
): Uint8Array {
  let raw: Uint8Array;
  try {
    raw = b64decode(payload);
  } catch (exc) {
    throw new WireError(`bad base64 frame: ${exc}`);
  }
  if (raw.length !== width * height) {
    throw new WireError(
      `frame payload is ${raw.length} bytes, want ${width * height}`,
    );
  }
  return raw;
}

export function clampAxis(value: number, lo: number, hi: number): number {
  if (Number.isNaN(value)) return 0;
  return Math.min(hi, Math.max(lo, value));
}
