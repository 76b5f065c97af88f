// Reconnect behavior of the socket wrapper, against a scripted fake.

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { FleetSocket, type SocketLike } from "../src/socket.js";

class FakeSocket implements SocketLike {
  onopen: (() => void) | null = null;
  onmessage: ((event: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;
  sent: string[] = [];
  send(data: string): void {
    this.sent.push(data);
  }
  close(): void {
    this.onclose?.();
  }
}

describe("FleetSocket", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("dispatches messages and tracks status", () => {
    const sockets: FakeSocket[] = [];
    const messages: string[] = [];
    const statuses: string[] = [];
    const fleet = new FleetSocket("ws://test/", {
      onMessage: (raw) => messages.push(raw),
      onStatus: (s) => statuses.push(s),
    }, () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    });
    fleet.connect();
    sockets[0].onopen!();
    sockets[0].onmessage!({ data: "{\"type\":\"event\"}" });
    expect(messages).toEqual(["{\"type\":\"event\"}"]);
    expect(statuses).toEqual(["connecting", "open"]);
    expect(fleet.send({ type: "block_cell", cell: 3 })).toBe(true);
    expect(JSON.parse(sockets[0].sent[0])).toEqual(
      { type: "block_cell", cell: 3 });
  });

  it("reconnects with exponential backoff", () => {
    const sockets: FakeSocket[] = [];
    const fleet = new FleetSocket("ws://test/", {
      onMessage: () => undefined,
      onStatus: () => undefined,
    }, () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    });
    fleet.connect();
    expect(sockets.length).toBe(1);

    sockets[0].onclose!();           // drop before open: retry in 500 ms
    vi.advanceTimersByTime(499);
    expect(sockets.length).toBe(1);
    vi.advanceTimersByTime(1);
    expect(sockets.length).toBe(2);

    sockets[1].onclose!();           // second failure: 1000 ms
    vi.advanceTimersByTime(999);
    expect(sockets.length).toBe(2);
    vi.advanceTimersByTime(1);
    expect(sockets.length).toBe(3);

    sockets[2].onopen!();            // success resets the backoff
    sockets[2].onclose!();
    vi.advanceTimersByTime(500);
    expect(sockets.length).toBe(4);
  });

  it("close by the user stops reconnecting", () => {
    const sockets: FakeSocket[] = [];
    const fleet = new FleetSocket("ws://test/", {
      onMessage: () => undefined,
      onStatus: () => undefined,
    }, () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    });
    fleet.connect();
    fleet.close();
    vi.advanceTimersByTime(60_000);
    expect(sockets.length).toBe(1);
    expect(fleet.send({ type: "noop" })).toBe(false);
  });
});
