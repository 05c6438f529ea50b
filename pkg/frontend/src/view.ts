// Client-side session state. The view is a pure fold over server messages:
// nothing in here advances game time, predicts movement, or invents state.
// Every returned view is deeply frozen, so accidental mutation outside
// applyServerMessage throws in strict mode.

import type {
  GameStartMessage,
  OrderSpec,
  PlayerState,
  ServerMessage,
  StateMessage,
} from "./protocol.js";

export interface CounterView {
  x: number;
  y: number;
  item: number;
}

export interface PotView {
  x: number;
  y: number;
  onions: number;
  tomatoes: number;
  cook: number; // -1 idle, 0 ready, n > 0 ticks to go
}

export interface GameView {
  slot: string;
  position: 1 | 2;
  stage: string;
  gameIndex: number;
  totalGames: number;
  layoutName: string;
  width: number;
  height: number;
  tiles: string[]; // grid rows, one character per cell
  episodeLength: number;
  orders: OrderSpec[];
  tick: number; // last acknowledged server tick, -1 before the first state
  gameTick: number;
  players: PlayerState[];
  counters: CounterView[];
  pots: PotView[];
  score: number;
  ticksLeft: number;
}

export interface ScoreEntry {
  slot: string;
  stage: string;
  gameIndex: number;
  score: number;
}

export interface ClientView {
  stage: string;
  session: string | null;
  tickMs: number | null;
  slots: string[];
  game: GameView | null;
  scores: ScoreEntry[];
  scheduledGames: number | null;
  gamesRemaining: number | null;
  slotAgents: Record<string, string> | null;
  studyComplete: boolean;
  lastError: string | null;
}

function deepFreeze<T>(value: T): T {
  if (typeof value === "object" && value !== null && !Object.isFrozen(value)) {
    Object.freeze(value);
    for (const key of Object.keys(value)) {
      deepFreeze((value as Record<string, unknown>)[key]);
    }
  }
  return value;
}

export function initialView(): ClientView {
  return deepFreeze({
    stage: "connecting",
    session: null,
    tickMs: null,
    slots: [],
    game: null,
    scores: [],
    scheduledGames: null,
    gamesRemaining: null,
    slotAgents: null,
    studyComplete: false,
    lastError: null,
  });
}

function freshGame(msg: GameStartMessage): GameView {
  return {
    slot: msg.slot,
    position: msg.position,
    stage: msg.stage,
    gameIndex: msg.game_index,
    totalGames: msg.total_games,
    layoutName: msg.layout.name,
    width: msg.layout.width,
    height: msg.layout.height,
    tiles: msg.layout.text.split("\n"),
    episodeLength: msg.layout.episode_length,
    orders: msg.layout.orders,
    tick: -1,
    gameTick: 0,
    players: [],
    counters: [],
    pots: [],
    score: 0,
    ticksLeft: msg.layout.episode_length,
  };
}

function applyState(game: GameView, msg: StateMessage): GameView {
  return {
    ...game,
    tick: msg.t,
    gameTick: msg.game_tick,
    players: msg.players,
    counters: msg.counters.map(([x, y, item]) => ({ x, y, item })),
    pots: msg.pots.map(([x, y, onions, tomatoes, cook]) => ({ x, y, onions, tomatoes, cook })),
    score: msg.score,
    ticksLeft: msg.ticks_left,
  };
}

export function applyServerMessage(view: ClientView, msg: ServerMessage): ClientView {
  switch (msg.type) {
    case "joined":
      return deepFreeze({
        ...view,
        stage: msg.stage,
        session: msg.session,
        tickMs: msg.tick_ms,
        slots: msg.slots,
      });
    case "game_start":
      return deepFreeze({ ...view, stage: msg.stage, game: freshGame(msg), lastError: null });
    case "state":
      // Server ticks increase strictly; anything not newer than the last
      // acknowledged tick is stale and dropped, as is a state with no game.
      if (view.game === null || msg.t <= view.game.tick) return view;
      return deepFreeze({ ...view, game: applyState(view.game, msg) });
    case "game_end": {
      const entry: ScoreEntry = {
        slot: msg.slot,
        stage: msg.stage,
        gameIndex: msg.game_index,
        score: msg.score,
      };
      return deepFreeze({
        ...view,
        game: null,
        scores: [...view.scores, entry],
        gamesRemaining: msg.games_remaining,
        studyComplete: msg.study_complete === true,
        slotAgents: msg.slot_agents ?? view.slotAgents,
        stage: msg.study_complete === true ? "done" : view.stage,
      });
    }
    case "stage_change":
      return deepFreeze({ ...view, stage: msg.stage, scheduledGames: msg.scheduled_games });
    case "heartbeat":
      return view;
    case "error":
      return deepFreeze({
        ...view,
        lastError: msg.detail ? `${msg.error}: ${msg.detail}` : msg.error,
      });
  }
}
