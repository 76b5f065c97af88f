// Canvas renderer: committed state in solid colors, optimistic marks
// hatched/outlined so an operator can tell them apart at a glance.

import type { ConsoleState, RenderModel, RobotView } from "./state.js";

export const CELL_PX = 64;
const ROBOT_COLORS = ["#d9453b", "#2e7d32", "#1e63c9", "#af6c0c", "#7b3fa0"];

export function robotColor(index: number): string {
  return ROBOT_COLORS[index % ROBOT_COLORS.length];
}

export function cellAtPixel(model: RenderModel,
                            px: number, py: number): number | null {
  if (model.grid === null) return null;
  const col = Math.floor(px / CELL_PX);
  const row = Math.floor(py / CELL_PX);
  if (col < 0 || row < 0 || col >= model.grid.width ||
      row >= model.grid.height) {
    return null;
  }
  return row * model.grid.width + col;
}

export function draw(ctx: CanvasRenderingContext2D, state: ConsoleState,
                     nowMs: number): void {
  const model = state.renderModel(nowMs);
  const grid = model.grid;
  if (grid === null) {
    ctx.fillStyle = "#444";
    ctx.font = "14px sans-serif";
    ctx.fillText("waiting for map snapshot...", 12, 24);
    return;
  }
  ctx.clearRect(0, 0, grid.width * CELL_PX, grid.height * CELL_PX);

  for (let row = 0; row < grid.height; row += 1) {
    for (let col = 0; col < grid.width; col += 1) {
      const cell = row * grid.width + col;
      const x = col * CELL_PX;
      const y = row * CELL_PX;
      if (grid.blocked.has(cell)) {
        ctx.fillStyle = "#3a3a3a";
        ctx.fillRect(x, y, CELL_PX, CELL_PX);
      } else if (model.pendingBlocks.has(cell)) {
        ctx.fillStyle = "rgba(58,58,58,0.35)";   // optimistic, not committed
        ctx.fillRect(x, y, CELL_PX, CELL_PX);
        ctx.strokeStyle = "#888";
        ctx.setLineDash([4, 3]);
        ctx.strokeRect(x + 2, y + 2, CELL_PX - 4, CELL_PX - 4);
        ctx.setLineDash([]);
      }
      ctx.strokeStyle = "#ccc";
      ctx.strokeRect(x, y, CELL_PX, CELL_PX);
      ctx.fillStyle = grid.blocked.has(cell) ? "#999" : "#aaa";
      ctx.font = "10px monospace";
      ctx.fillText(String(cell), x + 4, y + 12);
    }
  }

  model.robots.forEach((robot, index) => {
    drawPath(ctx, grid.width, robot, robotColor(index));
  });
  model.robots.forEach((robot, index) => {
    drawRobot(ctx, state, robot, robotColor(index), nowMs);
  });
  for (const [robotName, cell] of model.pendingGoals) {
    const index = model.robots.findIndex((r) => r.name === robotName);
    drawGoalMark(ctx, grid.width, cell, robotColor(Math.max(0, index)));
  }

  if (model.stale) {
    ctx.fillStyle = "rgba(200, 60, 60, 0.85)";
    ctx.fillRect(0, 0, grid.width * CELL_PX, 22);
    ctx.fillStyle = "#fff";
    ctx.font = "13px sans-serif";
    ctx.fillText("STALE: no server update for over 3 s", 8, 16);
  }
}

function drawPath(ctx: CanvasRenderingContext2D, width: number,
                  robot: RobotView, color: string): void {
  if (robot.path.length < 2) return;
  ctx.strokeStyle = color;
  ctx.globalAlpha = 0.55;
  ctx.lineWidth = 4;
  ctx.beginPath();
  robot.path.forEach((cell, i) => {
    const cx = (cell % width) * CELL_PX + CELL_PX / 2;
    const cy = Math.floor(cell / width) * CELL_PX + CELL_PX / 2;
    if (i === 0) ctx.moveTo(cx, cy);
    else ctx.lineTo(cx, cy);
  });
  ctx.stroke();
  ctx.globalAlpha = 1;
  ctx.lineWidth = 1;
}

function drawRobot(ctx: CanvasRenderingContext2D, state: ConsoleState,
                   robot: RobotView, color: string, nowMs: number): void {
  const pos = state.displayPosition(robot, nowMs);
  if (pos === null) return;
  const cx = pos.x * CELL_PX + CELL_PX / 2;
  const cy = pos.y * CELL_PX + CELL_PX / 2;
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(cx, cy, CELL_PX * 0.28, 0, Math.PI * 2);
  ctx.fill();
  ctx.fillStyle = "#fff";
  ctx.font = "bold 11px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(robot.name.replace(/[^0-9]/g, "") || robot.name, cx, cy + 4);
  ctx.textAlign = "left";
}

function drawGoalMark(ctx: CanvasRenderingContext2D, width: number,
                      cell: number, color: string): void {
  const x = (cell % width) * CELL_PX;
  const y = Math.floor(cell / width) * CELL_PX;
  ctx.strokeStyle = color;
  ctx.setLineDash([5, 4]);
  ctx.lineWidth = 2;
  ctx.strokeRect(x + 6, y + 6, CELL_PX - 12, CELL_PX - 12);
  ctx.setLineDash([]);
  ctx.lineWidth = 1;
}
