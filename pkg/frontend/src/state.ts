// Console state: everything rendered comes from server messages.
//
// Committed state only changes when the server says so; operator clicks
// create *pending* commands that show up as visually distinct optimistic
// marks and are cleared by the confirming delta/path, by an explicit
// rejection event, or by a timeout.  Map deltas apply strictly in version
// order: anything that arrives early is buffered, anything old is dropped,
// so the rendered version never decreases.

import type {
  ClientCommand,
  EventMsg,
  MapDeltaMsg,
  MapSnapshotMsg,
  PathMsg,
  PoseMsg,
  ServerMessage,
} from "./protocol.js";

export const COMMAND_TIMEOUT_MS = 3000;
export const STALE_AFTER_MS = 3000;

export interface GridView {
  width: number;
  height: number;
  blocked: Set<number>;
  version: number;
}

export interface PoseSample {
  x: number;
  y: number;
  cell: number;
  atMs: number;
}

export interface RobotView {
  name: string;
  pose: PoseSample | null;
  prevPose: PoseSample | null;
  path: number[];
  pathMapVersion: number;
  status: string;
}

export interface PendingCommand {
  id: number;
  command: ClientCommand;
  sentAtMs: number;
}

export interface Toast {
  text: string;
  atMs: number;
}

export interface RenderModel {
  grid: GridView | null;
  robots: RobotView[];
  pendingBlocks: Set<number>;
  pendingUnblocks: Set<number>;
  pendingGoals: Map<string, number>;
  stale: boolean;
  connection: string;
  toasts: Toast[];
  events: string[];
}

function commandsMatch(pending: ClientCommand, rejected: unknown): boolean {
  if (typeof rejected !== "object" || rejected === null) return false;
  const r = rejected as Record<string, unknown>;
  if (r.type !== pending.type) return false;
  if ("cell" in pending && r.cell !== pending.cell) return false;
  if ("robot" in pending && r.robot !== (pending as { robot?: string }).robot) {
    return false;
  }
  return true;
}

export class ConsoleState {
  grid: GridView | null = null;
  robots = new Map<string, RobotView>();
  pending: PendingCommand[] = [];
  connection: "connecting" | "open" | "closed" = "connecting";
  toasts: Toast[] = [];
  events: string[] = [];
  private deltaBuffer = new Map<number, MapDeltaMsg>();
  private nextCommandId = 1;
  private lastServerUpdateMs = 0;

  // ---- server side -------------------------------------------------------

  apply(message: ServerMessage, nowMs: number): void {
    this.lastServerUpdateMs = nowMs;
    switch (message.type) {
      case "map_snapshot":
        this.applySnapshot(message);
        break;
      case "map_delta":
        this.enqueueDelta(message);
        break;
      case "pose":
        this.applyPose(message, nowMs);
        break;
      case "path":
        this.applyPath(message);
        break;
      case "event":
        this.applyEvent(message, nowMs);
        break;
    }
  }

  private applySnapshot(message: MapSnapshotMsg): void {
    if (this.grid !== null && message.version < this.grid.version) {
      return; // rendered version never decreases
    }
    this.grid = {
      width: message.width,
      height: message.height,
      blocked: new Set(message.blocked),
      version: message.version,
    };
    this.drainDeltaBuffer();
  }

  private enqueueDelta(message: MapDeltaMsg): void {
    if (this.grid !== null && message.version <= this.grid.version) {
      return;
    }
    this.deltaBuffer.set(message.version, message);
    this.drainDeltaBuffer();
  }

  private drainDeltaBuffer(): void {
    if (this.grid === null) return;
    for (;;) {
      const next = this.deltaBuffer.get(this.grid.version + 1);
      if (next === undefined) break;
      this.deltaBuffer.delete(next.version);
      for (const cell of next.added) this.grid.blocked.add(cell);
      for (const cell of next.removed) this.grid.blocked.delete(cell);
      this.grid.version = next.version;
      this.confirmPendingByDelta(next);
    }
    // anything buffered at or below the applied version is dead
    for (const version of [...this.deltaBuffer.keys()]) {
      if (version <= this.grid.version) this.deltaBuffer.delete(version);
    }
  }

  private confirmPendingByDelta(delta: MapDeltaMsg): void {
    this.pending = this.pending.filter((entry) => {
      const cmd = entry.command;
      if (cmd.type === "block_cell" && delta.added.includes(cmd.cell)) {
        return false;
      }
      if (cmd.type === "unblock_cell" && delta.removed.includes(cmd.cell)) {
        return false;
      }
      return true;
    });
  }

  private robot(name: string): RobotView {
    let view = this.robots.get(name);
    if (view === undefined) {
      view = { name, pose: null, prevPose: null, path: [],
               pathMapVersion: -1, status: "unknown" };
      this.robots.set(name, view);
    }
    return view;
  }

  private applyPose(message: PoseMsg, nowMs: number): void {
    const view = this.robot(message.robot);
    view.prevPose = view.pose;
    view.pose = { x: message.x, y: message.y, cell: message.cell, atMs: nowMs };
  }

  private applyPath(message: PathMsg): void {
    const view = this.robot(message.robot);
    if (message.mapVersion < view.pathMapVersion) return;
    view.path = [...message.cells];
    view.pathMapVersion = message.mapVersion;
    view.status = "moving";
    this.pending = this.pending.filter(
      (entry) => !(entry.command.type === "assign_goal" &&
                   entry.command.robot === message.robot));
  }

  private applyEvent(message: EventMsg, nowMs: number): void {
    const name = typeof message.robot === "string" ? message.robot : null;
    switch (message.event) {
      case "rejected": {
        this.pending = this.pending.filter((entry) => {
          if (commandsMatch(entry.command, message.command)) {
            this.toast(`rejected: ${String(message.reason ?? "unknown")}`,
                       nowMs);
            return false;
          }
          return true;
        });
        break;
      }
      case "cancel_published":
      case "cancel_applied":
        if (name !== null) {
          const view = this.robot(name);
          view.path = [];
          view.status = "halted";
        }
        break;
      case "robot_arrived":
        if (name !== null) {
          const view = this.robot(name);
          view.status = "arrived";
          view.path = [];
        }
        break;
      case "robot_halted":
        if (name !== null) this.robot(name).status = "halted";
        break;
      case "goal_resolved":
        if (name !== null && message.status === "unreachable") {
          this.robot(name).status = "goal unreachable";
          this.toast(`${name}: goal unreachable`, nowMs);
        }
        break;
    }
    this.events.push(describeEvent(message));
    if (this.events.length > 200) this.events.shift();
  }

  // ---- operator side -----------------------------------------------------

  track(command: ClientCommand, nowMs: number): PendingCommand {
    const entry = { id: this.nextCommandId++, command, sentAtMs: nowMs };
    this.pending.push(entry);
    return entry;
  }

  untrack(entry: PendingCommand): void {
    this.pending = this.pending.filter((e) => e.id !== entry.id);
  }

  /** Drop pending commands older than the timeout; reverted marks toast. */
  expirePending(nowMs: number): void {
    this.pending = this.pending.filter((entry) => {
      if (nowMs - entry.sentAtMs >= COMMAND_TIMEOUT_MS) {
        this.toast(`no answer for ${entry.command.type}; reverted`, nowMs);
        return false;
      }
      return true;
    });
  }

  private toast(text: string, nowMs: number): void {
    this.toasts.push({ text, atMs: nowMs });
    if (this.toasts.length > 5) this.toasts.shift();
  }

  // ---- rendering ----------------------------------------------------------

  /** Interpolated position, cosmetic only: logic always uses pose.cell. */
  displayPosition(view: RobotView, nowMs: number): { x: number; y: number } | null {
    if (view.pose === null) return null;
    if (view.prevPose === null) return { x: view.pose.x, y: view.pose.y };
    const span = view.pose.atMs - view.prevPose.atMs;
    if (span <= 0) return { x: view.pose.x, y: view.pose.y };
    const t = Math.min(1, (nowMs - view.pose.atMs) / span);
    return {
      x: view.pose.x + (view.pose.x - view.prevPose.x) * t,
      y: view.pose.y + (view.pose.y - view.prevPose.y) * t,
    };
  }

  renderModel(nowMs: number): RenderModel {
    const pendingBlocks = new Set<number>();
    const pendingUnblocks = new Set<number>();
    const pendingGoals = new Map<string, number>();
    for (const entry of this.pending) {
      const cmd = entry.command;
      if (cmd.type === "block_cell") pendingBlocks.add(cmd.cell);
      else if (cmd.type === "unblock_cell") pendingUnblocks.add(cmd.cell);
      else pendingGoals.set(cmd.robot, cmd.cell);
    }
    return {
      grid: this.grid,
      robots: [...this.robots.values()].sort(
        (a, b) => a.name.localeCompare(b.name)),
      pendingBlocks,
      pendingUnblocks,
      pendingGoals,
      stale: this.lastServerUpdateMs > 0 &&
        nowMs - this.lastServerUpdateMs > STALE_AFTER_MS,
      connection: this.connection,
      toasts: [...this.toasts],
      events: [...this.events],
    };
  }
}

function describeEvent(message: EventMsg): string {
  const parts = [message.event];
  for (const key of ["robot", "cell", "cells", "status", "reason"]) {
    const value = message[key];
    if (value !== undefined) parts.push(`${key}=${JSON.stringify(value)}`);
  }
  return parts.join(" ");
}
