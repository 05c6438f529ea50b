// Browser entry point: one WebSocket, one canvas, one keyboard listener.
// All game state lives in the ClientView fold; this file only shuttles
// messages and paints the draw-op list. If the socket drops, the client
// reconnects and joins again; the server keeps no resumable sessions, so a
// drop mid-study starts a fresh session (the previous logs stay on disk).

import { actionForKey } from "./keyboard.js";
import {
  parseServerMessage,
  serializeClientMessage,
  WireFormatError,
} from "./protocol.js";
import type { ClientMessage } from "./protocol.js";
import { IncompleteRankingError, RankingForm } from "./ranking.js";
import { drawCallHash, renderView } from "./render.js";
import { applyServerMessage, initialView } from "./view.js";
import type { ClientView } from "./view.js";

const CELL = 48;

const FILL: Record<string, string> = {
  counter: "#8d8d8d",
  "onion-box": "#c9a83c",
  "tomato-box": "#c0392b",
  "dish-rack": "#e8e8e8",
  pot: "#4a4a4a",
  serve: "#3a7d44",
};

const ITEM_FILL: Record<string, string> = {
  onion: "#e2c044",
  tomato: "#e74c3c",
  dish: "#fafafa",
};

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function paint(ctx: CanvasRenderingContext2D, ops: string[]): void {
  const hud: string[] = [];
  for (const op of ops) {
    const [kind, ...rest] = op.split(" ");
    if (kind === "clear") {
      const [w, h] = rest[0].split("x").map(Number);
      ctx.canvas.width = w * CELL;
      ctx.canvas.height = h * CELL + 20 * 6;
      ctx.fillStyle = "#2e2e2e";
      ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
    } else if (kind === "tile") {
      const [name, at] = rest;
      const [x, y] = at.split(",").map(Number);
      ctx.fillStyle = FILL[name] ?? "#666";
      ctx.fillRect(x * CELL + 1, y * CELL + 1, CELL - 2, CELL - 2);
      ctx.fillStyle = "#111";
      ctx.font = "10px monospace";
      ctx.fillText(name.slice(0, 6), x * CELL + 4, y * CELL + 12);
    } else if (kind === "item") {
      const [name, at] = rest;
      const [x, y] = at.split(",").map(Number);
      ctx.fillStyle = ITEM_FILL[name] ?? "#d35400";
      ctx.beginPath();
      ctx.arc(x * CELL + CELL / 2, y * CELL + CELL / 2, CELL / 5, 0, Math.PI * 2);
      ctx.fill();
    } else if (kind === "pot") {
      const [x, y] = rest[0].split(",").map(Number);
      ctx.fillStyle = "#f0f0f0";
      ctx.font = "10px monospace";
      ctx.fillText(rest.slice(1).join(" "), x * CELL + 2, y * CELL + CELL - 6);
    } else if (kind === "player") {
      const [who, at, , facing, , holding] = rest;
      const [x, y] = at.split(",").map(Number);
      ctx.fillStyle = who === "you" ? "#3498db" : "#9b59b6";
      ctx.beginPath();
      ctx.arc(x * CELL + CELL / 2, y * CELL + CELL / 2, CELL / 3, 0, Math.PI * 2);
      ctx.fill();
      ctx.fillStyle = "#fff";
      ctx.font = "10px monospace";
      ctx.fillText(`${who} ${facing}`, x * CELL + 2, y * CELL + CELL / 2 - 14);
      if (holding !== "nothing") {
        ctx.fillText(holding, x * CELL + 2, y * CELL + CELL / 2 + 24);
      }
    } else {
      hud.push(op); // hud/banner/scoreline/reveal rows go under the grid
    }
  }
  ctx.fillStyle = "#eee";
  ctx.font = "13px monospace";
  hud.forEach((line, i) => {
    ctx.fillText(line, 6, ctx.canvas.height - 20 * (hud.length - i) + 14);
  });
}

function main(): void {
  const canvas = byId<HTMLCanvasElement>("board");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  const status = byId<HTMLElement>("status");
  const warmupControls = byId<HTMLElement>("warmup-controls");
  const nextButton = byId<HTMLButtonElement>("next-game");
  const positionSelect = byId<HTMLSelectElement>("position");
  const rankingBox = byId<HTMLElement>("ranking");
  const rankingList = byId<HTMLElement>("ranking-order");
  const rankingChoices = byId<HTMLElement>("ranking-choices");
  const commentBox = byId<HTMLTextAreaElement>("comment");
  const submitRanking = byId<HTMLButtonElement>("submit-ranking");
  const frameTag = byId<HTMLElement>("frame-hash");

  let view: ClientView = initialView();
  let form: RankingForm | null = null;
  let ws: WebSocket | null = null;

  const send = (msg: ClientMessage) => {
    if (ws && ws.readyState === WebSocket.OPEN) {
      ws.send(serializeClientMessage(msg));
    }
  };

  const repaint = () => {
    const ops = renderView(view);
    paint(ctx, ops);
    frameTag.textContent = `frame ${view.game ? view.game.tick : "-"} hash ${drawCallHash(ops)}`;
    status.textContent =
      `stage: ${view.stage}` +
      (view.session ? ` | session ${view.session}` : "") +
      (view.lastError ? ` | ${view.lastError}` : "");
    const inWarmup = view.stage === "warmup" && view.game === null;
    warmupControls.style.display = inWarmup ? "" : "none";
    nextButton.style.display =
      view.stage === "exploitation" && view.game === null ? "" : "none";
    const rankable = inWarmup && form !== null;
    rankingBox.style.display = rankable ? "" : "none";
    if (rankable && form) {
      rankingList.replaceChildren(
        ...form.current().map((slot, i) => {
          const li = document.createElement("li");
          li.textContent = `${i + 1}. agent ${slot} `;
          for (const [label, delta] of [["up", -1], ["down", 1]] as const) {
            const b = document.createElement("button");
            b.textContent = label;
            b.onclick = () => {
              form?.move(slot, delta);
              repaint();
            };
            li.appendChild(b);
          }
          const drop = document.createElement("button");
          drop.textContent = "remove";
          drop.onclick = () => {
            form?.remove(slot);
            repaint();
          };
          li.appendChild(drop);
          return li;
        }),
      );
      rankingChoices.replaceChildren(
        ...form.unplaced().map((slot) => {
          const b = document.createElement("button");
          b.textContent = `place ${slot}`;
          b.onclick = () => {
            form?.pick(slot);
            repaint();
          };
          return b;
        }),
      );
      submitRanking.disabled = !form.isComplete();
    }
  };

  const connect = () => {
    const participant =
      new URLSearchParams(location.search).get("participant") ?? "anonymous";
    ws = new WebSocket(`ws://${location.hostname}:8765/`);
    ws.onopen = () => send({ type: "join", participant });
    ws.onmessage = (ev) => {
      let msg;
      try {
        msg = parseServerMessage(String(ev.data));
      } catch (e) {
        if (e instanceof WireFormatError) {
          console.error("bad frame", e.message);
          return;
        }
        throw e;
      }
      view = applyServerMessage(view, msg);
      if (msg.type === "joined") form = new RankingForm(msg.slots);
      repaint();
    };
    ws.onclose = () => {
      if (view.stage !== "done") {
        status.textContent = "connection lost, rejoining in 2s (new session)";
        setTimeout(connect, 2000);
      }
    };
  };

  document.addEventListener("keydown", (ev) => {
    const a = actionForKey(ev.key);
    if (a !== null && view.game !== null) {
      ev.preventDefault();
      send({ type: "action", a }); // same event turn: keypress to wire
    }
  });

  for (const slot of ["A", "B", "C", "D"]) {
    byId<HTMLButtonElement>(`play-${slot}`).onclick = () =>
      send({
        type: "start_game",
        slot,
        position: positionSelect.value === "2" ? 2 : 1,
      });
  }
  nextButton.onclick = () => send({ type: "start_game" });
  submitRanking.onclick = () => {
    if (!form) return;
    form.comment = commentBox.value;
    try {
      send(form.toMessage());
    } catch (e) {
      if (e instanceof IncompleteRankingError) {
        status.textContent = `ranking incomplete: ${e.message}`;
        return;
      }
      throw e;
    }
  };

  repaint();
  connect();
}

main();
