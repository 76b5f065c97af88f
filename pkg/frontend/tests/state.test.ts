// Reducer behavior: version ordering, optimism, staleness, interpolation.

import { describe, expect, it } from "vitest";

import { ConsoleState, COMMAND_TIMEOUT_MS, STALE_AFTER_MS } from "../src/state.js";
import type { MapDeltaMsg, MapSnapshotMsg } from "../src/protocol.js";

function snapshot(version = 0, blocked: number[] = []): MapSnapshotMsg {
  return { type: "map_snapshot", width: 8, height: 8, blocked, version };
}

function delta(version: number, added: number[] = [],
               removed: number[] = []): MapDeltaMsg {
  return { type: "map_delta", version, added, removed };
}

describe("map versioning", () => {
  it("applies snapshot then deltas in order", () => {
    const state = new ConsoleState();
    state.apply(snapshot(), 0);
    state.apply(delta(1, [26]), 1);
    state.apply(delta(2, [], [26]), 2);
    expect(state.grid!.version).toBe(2);
    expect(state.grid!.blocked.has(26)).toBe(false);
  });

  it("buffers out-of-order deltas and applies them in version order", () => {
    const state = new ConsoleState();
    state.apply(snapshot(3), 0);
    state.apply(delta(5, [10]), 1);   // early: depends on v4
    expect(state.grid!.version).toBe(3);
    expect(state.grid!.blocked.has(10)).toBe(false);
    state.apply(delta(4, [20]), 2);
    expect(state.grid!.version).toBe(5);
    expect(state.grid!.blocked.has(20)).toBe(true);
    expect(state.grid!.blocked.has(10)).toBe(true);
  });

  it("never decreases the rendered version", () => {
    const state = new ConsoleState();
    state.apply(snapshot(7, [1]), 0);
    state.apply(snapshot(4, []), 1);  // stale refresh
    expect(state.grid!.version).toBe(7);
    expect(state.grid!.blocked.has(1)).toBe(true);
    state.apply(delta(7, [2]), 2);    // duplicate/old delta
    expect(state.grid!.blocked.has(2)).toBe(false);
  });

  it("periodic snapshot at the same version is harmless", () => {
    const state = new ConsoleState();
    state.apply(snapshot(2, [5]), 0);
    state.apply(snapshot(2, [5]), 1);
    expect(state.grid!.version).toBe(2);
    expect([...state.grid!.blocked]).toEqual([5]);
  });
});

describe("optimistic commands", () => {
  it("shows a pending mark without touching committed state", () => {
    const state = new ConsoleState();
    state.apply(snapshot(), 0);
    state.track({ type: "block_cell", cell: 26 }, 10);
    const model = state.renderModel(20);
    expect(model.pendingBlocks.has(26)).toBe(true);
    expect(model.grid!.blocked.has(26)).toBe(false);  // not committed
  });

  it("confirming delta clears the pending mark", () => {
    const state = new ConsoleState();
    state.apply(snapshot(), 0);
    state.track({ type: "block_cell", cell: 26 }, 10);
    state.apply(delta(1, [26]), 30);
    const model = state.renderModel(40);
    expect(model.pendingBlocks.size).toBe(0);
    expect(model.grid!.blocked.has(26)).toBe(true);
  });

  it("rejection reverts the mark and raises a toast, state unchanged", () => {
    const state = new ConsoleState();
    state.apply(snapshot(), 0);
    state.track({ type: "block_cell", cell: 12 }, 10);
    state.apply({ type: "event", event: "rejected",
                  command: { type: "block_cell", cell: 12 },
                  reason: "cell 12 is occupied by Robot1" }, 50);
    const model = state.renderModel(60);
    expect(model.pendingBlocks.size).toBe(0);
    expect(model.grid!.blocked.has(12)).toBe(false);
    expect(model.toasts.some((t) => t.text.includes("occupied"))).toBe(true);
  });

  it("unanswered commands expire and revert", () => {
    const state = new ConsoleState();
    state.apply(snapshot(), 0);
    state.track({ type: "block_cell", cell: 9 }, 100);
    state.expirePending(100 + COMMAND_TIMEOUT_MS);
    const model = state.renderModel(100 + COMMAND_TIMEOUT_MS);
    expect(model.pendingBlocks.size).toBe(0);
    expect(model.toasts.length).toBe(1);
  });

  it("a path message confirms the pending goal", () => {
    const state = new ConsoleState();
    state.apply(snapshot(), 0);
    state.track({ type: "assign_goal", robot: "Robot1", cell: 7 }, 10);
    state.apply({ type: "path", robot: "Robot1", cells: [0, 1, 2],
                  mapVersion: 0 }, 20);
    const model = state.renderModel(30);
    expect(model.pendingGoals.size).toBe(0);
    expect(model.robots[0].path).toEqual([0, 1, 2]);
  });
});

describe("robots", () => {
  it("cancel clears the path overlay until a fresh one arrives", () => {
    const state = new ConsoleState();
    state.apply(snapshot(), 0);
    state.apply({ type: "path", robot: "Robot1", cells: [0, 1, 2],
                  mapVersion: 0 }, 10);
    state.apply({ type: "event", event: "cancel_published",
                  robot: "Robot1", mapVersion: 1 }, 20);
    expect(state.robots.get("Robot1")!.path).toEqual([]);
    state.apply({ type: "path", robot: "Robot1", cells: [0, 8, 16],
                  mapVersion: 1 }, 30);
    expect(state.robots.get("Robot1")!.path).toEqual([0, 8, 16]);
  });

  it("stale path (older map version) does not replace a newer one", () => {
    const state = new ConsoleState();
    state.apply({ type: "path", robot: "R", cells: [0, 1], mapVersion: 5 }, 0);
    state.apply({ type: "path", robot: "R", cells: [0, 8], mapVersion: 3 }, 1);
    expect(state.robots.get("R")!.path).toEqual([0, 1]);
  });

  it("interpolates display position between pose samples", () => {
    const state = new ConsoleState();
    state.apply({ type: "pose", robot: "R", x: 1.0, y: 0.0, cell: 1 }, 0);
    state.apply({ type: "pose", robot: "R", x: 2.0, y: 0.0, cell: 2 }, 200);
    const view = state.robots.get("R")!;
    const mid = state.displayPosition(view, 300);  // halfway to next sample
    expect(mid!.x).toBeCloseTo(2.5, 5);
    const capped = state.displayPosition(view, 10_000);
    expect(capped!.x).toBeCloseTo(3.0, 5);  // extrapolation is capped
  });
});

describe("staleness", () => {
  it("flags the view once updates stop for over 3 s", () => {
    const state = new ConsoleState();
    state.apply(snapshot(), 1000);
    expect(state.renderModel(1000 + STALE_AFTER_MS).stale).toBe(false);
    expect(state.renderModel(1001 + STALE_AFTER_MS).stale).toBe(true);
    state.apply({ type: "pose", robot: "R", x: 0, y: 0, cell: 0 }, 6000);
    expect(state.renderModel(6100).stale).toBe(false);
  });
});
