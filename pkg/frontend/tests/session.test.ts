import { beforeEach, describe, expect, it } from "vitest";

import { ClientSession, Sender } from "../src/session.js";
import { WIRE_FORMAT_VERSION, encodeMessage } from "../src/wire.js";

class FakeSender implements Sender {
  sent: string[] = [];
  send(text: string): void {
    this.sent.push(text);
  }
}

function helloText(over: Record<string, unknown> = {}): string {
  return JSON.stringify({
    type: "server_hello",
    session_id: "s1",
    format_version: WIRE_FORMAT_VERSION,
    camera_width: 4,
    camera_height: 4,
    tick_rate: 10,
    frame_encoding: "raw-u8-base64",
    ...over,
  });
}

function framePayload(width: number, height: number, fill = 7): string {
  return Buffer.from(new Uint8Array(width * height).fill(fill)).toString("base64");
}

function frameText(tick: number, over: Record<string, unknown> = {}): string {
  return JSON.stringify({
    type: "frame",
    session_id: "s1",
    tick,
    frame: framePayload(4, 4),
    hud: { speed: 0.5, elapsed: tick / 10, distance: tick * 0.05 },
    ...over,
  });
}

describe("ClientSession handshake", () => {
  let sender: FakeSender;
  let session: ClientSession;
  beforeEach(() => {
    sender = new FakeSender();
    session = new ClientSession(sender);
  });

  it("moves to lobby on a matching hello", () => {
    session.handleMessage(helloText());
    expect(session.status).toBe("lobby");
    expect(session.cameraWidth).toBe(4);
    expect(session.cameraHeight).toBe(4);
    expect(session.tickRate).toBe(10);
  });

  it("errors out on a version mismatch", () => {
    session.handleMessage(helloText({ format_version: WIRE_FORMAT_VERSION + 1 }));
    expect(session.status).toBe("error");
    expect(session.errorBanner).toContain("version");
  });
});

describe("ClientSession frame intake", () => {
  let sender: FakeSender;
  let session: ClientSession;
  beforeEach(() => {
    sender = new FakeSender();
    session = new ClientSession(sender);
    session.handleMessage(helloText());
    session.startTrial("room", "spectate");
  });

  it("renders strictly-increasing ticks and drops stale ones", () => {
    session.handleMessage(frameText(0));
    session.handleMessage(frameText(1));
    session.handleMessage(frameText(1)); // duplicate
    session.handleMessage(frameText(0)); // late arrival
    session.handleMessage(frameText(2));
    expect(session.framesRendered).toBe(3);
    expect(session.framesDropped).toBe(2);
    expect(session.latestFrame?.tick).toBe(2);
  });

  it("drops frames with a wrong-size payload", () => {
    session.handleMessage(frameText(0, { frame: framePayload(2, 2) }));
    expect(session.framesRendered).toBe(0);
    expect(session.framesDropped).toBe(1);
  });

  it("drops undecodable messages without throwing", () => {
    session.handleMessage("{garbage");
    session.handleMessage(JSON.stringify({ type: "frame", session_id: "s1" }));
    expect(session.framesDropped).toBe(2);
  });

  it("carries hud, probs, and mode through to the decoded frame", () => {
    session.handleMessage(frameText(5, { probs: [0.1, 0.7, 0.2], mode: "straight" }));
    const frame = session.latestFrame;
    expect(frame?.probs).toEqual([0.1, 0.7, 0.2]);
    expect(frame?.mode).toBe("straight");
    expect(frame?.hud.distance).toBeCloseTo(0.25);
    expect(Array.from(frame?.pixels ?? [])).toEqual(new Array(16).fill(7));
  });

  it("drops frames arriving outside an active trial", () => {
    session.handleMessage(
      JSON.stringify({
        type: "trial_ended",
        session_id: "s1",
        distance: 3,
        time: 6,
        termination: "collision",
        recorded: false,
      }),
    );
    expect(session.status).toBe("ended");
    session.handleMessage(frameText(99));
    expect(session.framesDropped).toBe(1);
  });
});

describe("ClientSession commands", () => {
  let sender: FakeSender;
  let session: ClientSession;
  beforeEach(() => {
    sender = new FakeSender();
    session = new ClientSession(sender);
    session.handleMessage(helloText());
  });

  it("sends clamped commands during a human trial", () => {
    session.startTrial("room", "human");
    const sentBefore = sender.sent.length;
    expect(session.sendCommand(1.7, -3, 0.05)).toBe(true);
    expect(session.commandsSent).toBe(1);
    const doc = JSON.parse(sender.sent[sentBefore]);
    expect(doc.type).toBe("command");
    expect(doc.linear_axis).toBe(1);
    expect(doc.angular_axis).toBe(-1);
  });

  it("refuses commands in the lobby and after the trial ends", () => {
    expect(session.sendCommand(1, 0, 0)).toBe(false);
    session.startTrial("room", "practice");
    expect(session.mayCommand).toBe(true);
    session.handleMessage(
      JSON.stringify({
        type: "trial_ended",
        session_id: "s1",
        distance: 1,
        time: 2,
        termination: "time_cap",
        recorded: false,
      }),
    );
    expect(session.sendCommand(1, 0, 0)).toBe(false);
    expect(session.commandsSent).toBe(0);
  });

  it("emits a start control message with the chosen plan and mode", () => {
    session.startTrial("hallway", "practice", true);
    const doc = JSON.parse(sender.sent[0]);
    expect(doc).toMatchObject({
      type: "control",
      action: "start",
      plan: "hallway",
      mode: "practice",
      practice: true,
    });
    expect(encodeMessage(doc)).toBeTypeOf("string");
  });
});

describe("spectate acceptance: 1000 in-order frames, zero drops, zero commands", () => {
  it("renders every frame and never emits a command", () => {
    const sender = new FakeSender();
    const session = new ClientSession(sender);
    session.handleMessage(helloText());
    session.startTrial("atrium", "spectate");
    const controlMessages = sender.sent.length; // the start control message
    for (let tick = 0; tick < 1000; tick++) {
      session.handleMessage(
        frameText(tick, { probs: [0.2, 0.6, 0.2], mode: "straight" }),
      );
      // a spectator mashing keys must still emit nothing
      expect(session.sendCommand(1, 1, tick * 0.05)).toBe(false);
    }
    expect(session.framesRendered).toBe(1000);
    expect(session.framesDropped).toBe(0);
    expect(session.commandsSent).toBe(0);
    expect(sender.sent.length).toBe(controlMessages);
    expect(session.latestFrame?.tick).toBe(999);
  });
});
