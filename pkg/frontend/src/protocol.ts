// Wire protocol of the kitchen study service: JSON text frames over one
// WebSocket. The types mirror the server messages field for field; the
// client never extends or reinterprets them.

export type Action = 0 | 1 | 2 | 3 | 4 | 5;

export const ACTION = {
  up: 0,
  down: 1,
  left: 2,
  right: 3,
  stay: 4,
  interact: 5,
} as const;

export interface JoinMessage {
  type: "join";
  participant: string;
}

export interface StartGameMessage {
  type: "start_game";
  // Slot and seat are client-chosen during warm-up only; the exploitation
  // schedule is dictated by the server and both fields are ignored then.
  slot?: string;
  position?: 1 | 2;
}

export interface ActionMessage {
  type: "action";
  a: Action;
}

export interface RankingMessage {
  type: "ranking";
  order: string[];
  comment?: string;
}

export interface HeartbeatMessage {
  type: "heartbeat";
}

export type ClientMessage =
  | JoinMessage
  | StartGameMessage
  | ActionMessage
  | RankingMessage
  | HeartbeatMessage;

export interface OrderSpec {
  onions: number;
  tomatoes: number;
  cook_ticks: number;
  reward: number;
}

export interface LayoutSpec {
  name: string;
  text: string;
  width: number;
  height: number;
  episode_length: number;
  orders: OrderSpec[];
}

export interface JoinedMessage {
  type: "joined";
  session: string;
  stage: string;
  slots: string[];
  layout_name: string;
  tick_ms: number;
}

export interface GameStartMessage {
  type: "game_start";
  stage: string;
  slot: string;
  position: 1 | 2;
  game_index: number;
  total_games: number;
  layout: LayoutSpec;
  tick_ms: number;
}

export interface PlayerState {
  x: number;
  y: number;
  dir: number;
  held: number;
}

export interface StateMessage {
  type: "state";
  t: number;
  game_tick: number;
  players: PlayerState[];
  counters: [number, number, number][]; // x, y, item code
  pots: [number, number, number, number, number][]; // x, y, onions, tomatoes, cook
  score: number;
  ticks_left: number;
}

export interface GameEndMessage {
  type: "game_end";
  score: number;
  slot: string;
  stage: string;
  game_index: number;
  games_remaining: number | null;
  study_complete?: boolean;
  slot_agents?: Record<string, string>;
}

export interface StageChangeMessage {
  type: "stage_change";
  stage: string;
  scheduled_games: number;
}

export interface HeartbeatReply {
  type: "heartbeat";
  t: number | null;
}

export interface ErrorMessage {
  type: "error";
  error: string;
  detail?: string;
}

export type ServerMessage =
  | JoinedMessage
  | GameStartMessage
  | StateMessage
  | GameEndMessage
  | StageChangeMessage
  | HeartbeatReply
  | ErrorMessage;

export class WireFormatError extends Error {}

function fail(what: string): never {
  throw new WireFormatError(what);
}

function num(obj: Record<string, unknown>, key: string): number {
  const v = obj[key];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    fail(`field ${key} must be a number, got ${JSON.stringify(v)}`);
  }
  return v;
}

function str(obj: Record<string, unknown>, key: string): string {
  const v = obj[key];
  if (typeof v !== "string") {
    fail(`field ${key} must be a string, got ${JSON.stringify(v)}`);
  }
  return v;
}

function arr(obj: Record<string, unknown>, key: string): unknown[] {
  const v = obj[key];
  if (!Array.isArray(v)) {
    fail(`field ${key} must be an array, got ${JSON.stringify(v)}`);
  }
  return v;
}

function rec(value: unknown, what: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    fail(`${what} must be an object`);
  }
  return value as Record<string, unknown>;
}

function position(obj: Record<string, unknown>, key: string): 1 | 2 {
  const v = num(obj, key);
  if (v !== 1 && v !== 2) fail(`field ${key} must be 1 or 2, got ${v}`);
  return v;
}

function cells(obj: Record<string, unknown>, key: string, width: number): number[][] {
  return arr(obj, key).map((row, i) => {
    if (!Array.isArray(row) || row.length !== width || row.some((v) => typeof v !== "number")) {
      fail(`${key}[${i}] must be ${width} numbers`);
    }
    return row as number[];
  });
}

export function parseServerMessage(raw: string): ServerMessage {
  let value: unknown;
  try {
    value = JSON.parse(raw);
  } catch {
    fail("frame is not valid JSON");
  }
  const obj = rec(value, "frame");
  const type = obj["type"];
  switch (type) {
    case "joined":
      return {
        type,
        session: str(obj, "session"),
        stage: str(obj, "stage"),
        slots: arr(obj, "slots").map(String),
        layout_name: str(obj, "layout_name"),
        tick_ms: num(obj, "tick_ms"),
      };
    case "game_start": {
      const lay = rec(obj["layout"], "layout");
      return {
        type,
        stage: str(obj, "stage"),
        slot: str(obj, "slot"),
        position: position(obj, "position"),
        game_index: num(obj, "game_index"),
        total_games: num(obj, "total_games"),
        layout: {
          name: str(lay, "name"),
          text: str(lay, "text"),
          width: num(lay, "width"),
          height: num(lay, "height"),
          episode_length: num(lay, "episode_length"),
          orders: arr(lay, "orders").map((o) => {
            const r = rec(o, "order");
            return {
              onions: num(r, "onions"),
              tomatoes: num(r, "tomatoes"),
              cook_ticks: num(r, "cook_ticks"),
              reward: num(r, "reward"),
            };
          }),
        },
        tick_ms: num(obj, "tick_ms"),
      };
    }
    case "state":
      return {
        type,
        t: num(obj, "t"),
        game_tick: num(obj, "game_tick"),
        players: arr(obj, "players").map((p) => {
          const r = rec(p, "player");
          return { x: num(r, "x"), y: num(r, "y"), dir: num(r, "dir"), held: num(r, "held") };
        }),
        counters: cells(obj, "counters", 3) as [number, number, number][],
        pots: cells(obj, "pots", 5) as [number, number, number, number, number][],
        score: num(obj, "score"),
        ticks_left: num(obj, "ticks_left"),
      };
    case "game_end": {
      const msg: GameEndMessage = {
        type,
        score: num(obj, "score"),
        slot: str(obj, "slot"),
        stage: str(obj, "stage"),
        game_index: num(obj, "game_index"),
        games_remaining: obj["games_remaining"] === null ? null : num(obj, "games_remaining"),
      };
      if ("study_complete" in obj) msg.study_complete = obj["study_complete"] === true;
      if ("slot_agents" in obj) {
        const agents = rec(obj["slot_agents"], "slot_agents");
        msg.slot_agents = Object.fromEntries(
          Object.entries(agents).map(([k, v]) => [k, String(v)]),
        );
      }
      return msg;
    }
    case "stage_change":
      return {
        type,
        stage: str(obj, "stage"),
        scheduled_games: num(obj, "scheduled_games"),
      };
    case "heartbeat":
      return { type, t: obj["t"] === null ? null : num(obj, "t") };
    case "error": {
      const msg: ErrorMessage = { type, error: str(obj, "error") };
      if ("detail" in obj) msg.detail = str(obj, "detail");
      return msg;
    }
    default:
      fail(`unknown server message type ${JSON.stringify(type)}`);
  }
}

export function serializeClientMessage(msg: ClientMessage): string {
  if (msg.type === "action" && (!Number.isInteger(msg.a) || msg.a < 0 || msg.a > 5)) {
    fail(`action must be an integer 0..5, got ${JSON.stringify(msg.a)}`);
  }
  if (msg.type === "ranking" && new Set(msg.order).size !== msg.order.length) {
    fail("ranking order must not repeat slots");
  }
  return JSON.stringify(msg);
}
