// Deterministic rendering: a view maps to an ordered list of draw
// operations (plain strings), and the browser painter is a dumb
// interpreter over that list. Hashing the list gives a cheap fingerprint
// for golden-frame tests, independent of any canvas backend.

import type { ClientView, GameView } from "./view.js";

const TILE_NAMES: Record<string, string> = {
  X: "counter",
  O: "onion-box",
  T: "tomato-box",
  D: "dish-rack",
  P: "pot",
  S: "serve",
};

const DIR_NAMES = ["up", "down", "left", "right"];

export function itemName(code: number): string {
  if (code === 0) return "nothing";
  if (code === 1) return "onion";
  if (code === 2) return "tomato";
  if (code === 3) return "dish";
  if (code >= 16) {
    const mix = code - 16;
    return `soup(${mix >> 2}on,${mix & 3}to)`;
  }
  return `item${code}`;
}

function cookLabel(cook: number): string {
  if (cook < 0) return "idle";
  if (cook === 0) return "ready";
  return `cooking(${cook})`;
}

function gameOps(game: GameView, ops: string[]): void {
  ops.push(`clear ${game.width}x${game.height}`);
  game.tiles.forEach((row, y) => {
    for (let x = 0; x < row.length; x++) {
      const name = TILE_NAMES[row[x]];
      if (name) ops.push(`tile ${name} ${x},${y}`);
    }
  });
  for (const c of game.counters) {
    ops.push(`item ${itemName(c.item)} ${c.x},${c.y}`);
  }
  for (const p of game.pots) {
    ops.push(`pot ${p.x},${p.y} onions=${p.onions} tomatoes=${p.tomatoes} ${cookLabel(p.cook)}`);
  }
  game.players.forEach((p, i) => {
    const who = i + 1 === game.position ? "you" : "partner";
    ops.push(
      `player ${who} ${p.x},${p.y} facing ${DIR_NAMES[p.dir] ?? p.dir} holding ${itemName(p.held)}`,
    );
  });
  const k =
    game.stage === "exploitation" ? ` game ${game.gameIndex + 1}/${game.totalGames}` : "";
  ops.push(`hud stage=${game.stage} slot=${game.slot}${k}`);
  ops.push(`hud score=${game.score} ticks_left=${game.ticksLeft}`);
  for (const o of game.orders) {
    ops.push(
      `hud order ${o.onions}on+${o.tomatoes}to cook=${o.cook_ticks} reward=${o.reward}`,
    );
  }
}

export function renderView(view: ClientView): string[] {
  const ops: string[] = [];
  if (view.game) {
    gameOps(view.game, ops);
  } else {
    ops.push(`banner stage=${view.stage}`);
    if (view.gamesRemaining !== null) ops.push(`banner games_remaining=${view.gamesRemaining}`);
    for (const s of view.scores) {
      const idx = s.gameIndex < 0 ? "warmup" : `#${s.gameIndex + 1}`;
      ops.push(`scoreline ${idx} slot=${s.slot} score=${s.score}`);
    }
    if (view.studyComplete && view.slotAgents) {
      for (const slot of Object.keys(view.slotAgents).sort()) {
        ops.push(`reveal slot=${slot} agent=${view.slotAgents[slot]}`);
      }
    }
  }
  if (view.lastError) ops.push(`hud error=${view.lastError}`);
  return ops;
}

// FNV-1a, 32 bit: tiny, stable across platforms, good enough to pin frames.
export function drawCallHash(ops: string[]): string {
  const text = ops.join("\n");
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h.toString(16).padStart(8, "0");
}
