// Wire-up: one socket, one state object, one canvas, click handlers.
//
// Endpoint selection: ?ws=ws://host:port/ (defaults to ws://127.0.0.1:8765/).

import { parseServerMessage } from "./protocol.js";
import { FleetSocket } from "./socket.js";
import { ConsoleState } from "./state.js";
import { CELL_PX, cellAtPixel, draw } from "./render.js";

const state = new ConsoleState();

const params = new URLSearchParams(window.location.search);
const endpoint = params.get("ws") ?? "ws://127.0.0.1:8765/";

const canvas = document.getElementById("grid") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusLine = document.getElementById("status")!;
const toastBox = document.getElementById("toasts")!;
const eventBox = document.getElementById("events")!;
const modeInputs = document.querySelectorAll<HTMLInputElement>(
  "input[name=mode]");
const robotSelect = document.getElementById("robot") as HTMLSelectElement;

const socket = new FleetSocket(endpoint, {
  onMessage(raw) {
    const message = parseServerMessage(raw);
    if (message !== null) state.apply(message, Date.now());
  },
  onStatus(status) {
    state.connection = status;
  },
});
socket.connect();

function currentMode(): string {
  for (const input of modeInputs) {
    if (input.checked) return input.value;
  }
  return "block";
}

canvas.addEventListener("click", (event) => {
  const rect = canvas.getBoundingClientRect();
  const cell = cellAtPixel(state.renderModel(Date.now()),
                           event.clientX - rect.left,
                           event.clientY - rect.top);
  if (cell === null) return;
  const mode = currentMode();
  let command;
  if (mode === "block") {
    command = { type: "block_cell" as const, cell };
  } else if (mode === "unblock") {
    command = { type: "unblock_cell" as const, cell };
  } else {
    const robot = robotSelect.value;
    if (!robot) return;
    command = { type: "assign_goal" as const, robot, cell };
  }
  // optimistic mark first; a synchronous failure takes it right back
  const entry = state.track(command, Date.now());
  if (!socket.send(command)) state.untrack(entry);
});

function frame(): void {
  const now = Date.now();
  state.expirePending(now);
  const model = state.renderModel(now);

  if (model.grid !== null) {
    const w = model.grid.width * CELL_PX;
    const h = model.grid.height * CELL_PX;
    if (canvas.width !== w || canvas.height !== h) {
      canvas.width = w;
      canvas.height = h;
    }
  }
  draw(ctx, state, now);

  statusLine.textContent =
    `${endpoint} | ${model.connection}` +
    (model.grid ? ` | map v${model.grid.version}` : "");
  statusLine.className = model.connection === "open" ? "ok" : "down";

  const known = model.robots.map((r) => r.name);
  if (known.length !== robotSelect.options.length) {
    robotSelect.innerHTML = "";
    for (const name of known) {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name;
      robotSelect.appendChild(option);
    }
  }

  toastBox.innerHTML = "";
  for (const toast of model.toasts.slice(-3)) {
    const div = document.createElement("div");
    div.className = "toast";
    div.textContent = toast.text;
    toastBox.appendChild(div);
  }

  eventBox.textContent = model.events.slice(-12).join("\n");
  requestAnimationFrame(frame);
}

requestAnimationFrame(frame);
