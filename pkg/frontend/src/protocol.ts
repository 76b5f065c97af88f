// Message types of the fleet console socket API.

export interface MapSnapshotMsg {
  type: "map_snapshot";
  width: number;
  height: number;
  blocked: number[];
  version: number;
}

export interface MapDeltaMsg {
  type: "map_delta";
  version: number;
  added: number[];
  removed: number[];
}

export interface PoseMsg {
  type: "pose";
  robot: string;
  x: number;
  y: number;
  cell: number;
}

export interface PathMsg {
  type: "path";
  robot: string;
  cells: number[];
  mapVersion: number;
}

export interface EventMsg {
  type: "event";
  event: string;
  [key: string]: unknown;
}

export type ServerMessage =
  | MapSnapshotMsg
  | MapDeltaMsg
  | PoseMsg
  | PathMsg
  | EventMsg;

export interface BlockCellCmd {
  type: "block_cell";
  cell: number;
}

export interface UnblockCellCmd {
  type: "unblock_cell";
  cell: number;
}

export interface AssignGoalCmd {
  type: "assign_goal";
  robot: string;
  cell: number;
}

export type ClientCommand = BlockCellCmd | UnblockCellCmd | AssignGoalCmd;

const SERVER_TYPES = new Set(["map_snapshot", "map_delta", "pose", "path", "event"]);

/** Parse one websocket frame; null for anything that is not ours. */
export function parseServerMessage(raw: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const type = (doc as { type?: unknown }).type;
  if (typeof type !== "string" || !SERVER_TYPES.has(type)) return null;
  return doc as ServerMessage;
}
