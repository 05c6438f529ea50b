// The client view is a pure fold over server messages: acknowledged state
// only, strictly increasing ticks, no mutation outside the fold.

import { describe, expect, it } from "vitest";
import { parseServerMessage } from "../src/protocol.js";
import type { ServerMessage, StateMessage } from "../src/protocol.js";
import { applyServerMessage, initialView } from "../src/view.js";
import type { ClientView } from "../src/view.js";
import fixture from "./fixtures/warmup-game.json";

function messages(): ServerMessage[] {
  return fixture.map((m) => parseServerMessage(JSON.stringify(m)));
}

function walk(msgs: ServerMessage[]): ClientView {
  let view = initialView();
  for (const msg of msgs) view = applyServerMessage(view, msg);
  return view;
}

describe("view fold over the recorded session", () => {
  it("tracks the game and banks the final score", () => {
    const msgs = messages();
    let view = initialView();
    let lastTick = -1;
    let lastScore = 0;
    for (const msg of msgs) {
      view = applyServerMessage(view, msg);
      if (msg.type === "state") {
        expect(view.game).not.toBeNull();
        expect(view.game!.tick).toBe(msg.t);
        expect(view.game!.tick).toBeGreaterThan(lastTick);
        lastTick = view.game!.tick;
        lastScore = view.game!.score;
      }
    }
    const end = msgs[msgs.length - 1];
    expect(end.type).toBe("game_end");
    expect(view.game).toBeNull();
    expect(view.scores).toEqual([
      { slot: "A", stage: "warmup", gameIndex: -1, score: lastScore },
    ]);
    expect(view.stage).toBe("warmup");
    expect(view.studyComplete).toBe(false);
  });

  it("keeps layout facts from the game_start frame", () => {
    const msgs = messages();
    let view = initialView();
    for (const msg of msgs) {
      view = applyServerMessage(view, msg);
      if (msg.type === "game_start") break;
    }
    const game = view.game!;
    expect(game.width).toBe(7);
    expect(game.height).toBe(5);
    expect(game.tiles).toHaveLength(5);
    expect(game.tiles[0]).toBe("XXXXXXX");
    expect(game.episodeLength).toBe(16);
    expect(game.orders).toEqual([
      { onions: 3, tomatoes: 0, cook_ticks: 2, reward: 20 },
    ]);
    expect(game.position).toBe(1);
  });
});

describe("delta discipline", () => {
  const msgs = messages();
  const start = msgs.find((m) => m.type === "game_start")!;
  const states = msgs.filter((m): m is StateMessage => m.type === "state");

  it("drops stale and duplicate ticks", () => {
    let view = applyServerMessage(initialView(), start);
    view = applyServerMessage(view, states[5]);
    const after = applyServerMessage(view, states[2]);
    expect(after).toBe(view); // older tick: identical object, not a copy
    expect(applyServerMessage(view, states[5])).toBe(view);
    const newer = applyServerMessage(view, states[6]);
    expect(newer.game!.tick).toBe(states[6].t);
  });

  it("drops state frames that arrive with no game open", () => {
    const view = initialView();
    expect(applyServerMessage(view, states[0])).toBe(view);
  });

  it("returns frozen views that refuse mutation", () => {
    let view = applyServerMessage(initialView(), start);
    view = applyServerMessage(view, states[0]);
    expect(Object.isFrozen(view)).toBe(true);
    expect(Object.isFrozen(view.game)).toBe(true);
    expect(Object.isFrozen(view.game!.players[0])).toBe(true);
    expect(() => {
      "use strict";
      (view.game!.players[0] as { x: number }).x = 99;
    }).toThrow(TypeError);
  });

  it("treats heartbeats as no-ops", () => {
    const view = walk(messages());
    expect(applyServerMessage(view, { type: "heartbeat", t: 3 })).toBe(view);
  });
});

describe("stage transitions", () => {
  it("moves to exploitation on stage_change", () => {
    const view = applyServerMessage(walk(messages()), {
      type: "stage_change",
      stage: "exploitation",
      scheduled_games: 24,
    });
    expect(view.stage).toBe("exploitation");
    expect(view.scheduledGames).toBe(24);
  });

  it("reveals agents and closes out on the final game_end", () => {
    const view = applyServerMessage(walk(messages()), {
      type: "game_end",
      score: 60,
      slot: "D",
      stage: "exploitation",
      game_index: 23,
      games_remaining: 0,
      study_complete: true,
      slot_agents: { A: "amber", B: "coral", C: "ivory", D: "olive" },
    });
    expect(view.stage).toBe("done");
    expect(view.studyComplete).toBe(true);
    expect(view.slotAgents).toEqual({ A: "amber", B: "coral", C: "ivory", D: "olive" });
    expect(view.gamesRemaining).toBe(0);
    expect(view.scores).toHaveLength(2);
  });

  it("records errors without touching game state", () => {
    const msgs = messages();
    let view = initialView();
    for (const msg of msgs.slice(0, 6)) view = applyServerMessage(view, msg);
    const flagged = applyServerMessage(view, {
      type: "error",
      error: "BadAction",
      detail: "action must be 0..5, got 9",
    });
    expect(flagged.lastError).toBe("BadAction: action must be 0..5, got 9");
    expect(flagged.game).toBe(view.game);
  });
});
