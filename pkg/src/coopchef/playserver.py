"""Live human-vs-agent game service with the two-stage study protocol.

A participant connects over a WebSocket carrying JSON text messages. The
session walks warm-up (free games against any of 4 anonymized agent slots,
at least one per slot), then a strict ranking of the slots, then an
exploitation stage of 24 scheduled games (4 slots x 2 seats x 3 repeats,
seed-shuffled). The server owns game time: a fixed-rate tick loop advances
the engine one step per tick using the latest buffered human action
(defaulting to stay) while the AI contributes a real action only on every
8th tick, idling the 7 in between so humans can keep up.

Game semantics are tick-indexed, never wall-clock-indexed, so timing jitter
cannot change outcomes. Every game appends to its own trajectory log, which
is verified by engine replay when the game closes.

The protocol core (``StudySession``) is sans-io and synchronous; the
asyncio/websockets layer only shuttles messages and schedules ticks, which
keeps every protocol rule unit-testable without sockets or clocks.
"""

from __future__ import annotations

import asyncio
import io
import json
import logging
import random
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from coopchef import engine, trajlog
from coopchef.policies import resolve_policy

logger = logging.getLogger(__name__)

SLOT_LABELS = ("A", "B", "C", "D")
AI_IDLE_STEPS = 7  # engine ticks the AI sits out before each of its actions


class ProtocolError(Exception):
    """Client request rejected; carries a machine-readable code."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(detail or code)
        self.code = code


@dataclass
class ServerConfig:
    layout: engine.Layout
    agents: dict[str, str]  # agent name -> policy spec (resolve_policy form)
    host: str = "127.0.0.1"
    port: int = 8765
    tick_ms: int = 150
    log_dir: str = "games"
    seed: int = 0
    ai_idle_steps: int = AI_IDLE_STEPS

    def __post_init__(self):
        if len(self.agents) != 4:
            raise ValueError(f"study needs exactly 4 agents, got {len(self.agents)}")
        if self.ai_idle_steps < 0:
            raise ValueError("ai_idle_steps must be >= 0")


def build_schedule(seed: int) -> list[tuple[str, int]]:
    """24 exploitation games: every (slot, seat) combo three times, shuffled."""
    games = [(slot, pos) for slot in SLOT_LABELS for pos in (1, 2)] * 3
    random.Random(seed).shuffle(games)
    return games


@dataclass
class _ActiveGame:
    slot: str
    position: int  # human seat, 1 or 2
    stage: str
    game_index: int  # exploitation index, -1 during warm-up
    state: engine.GameState
    ai_policy: object
    writer: trajlog.TrajectoryWriter
    log_handle: io.TextIOBase
    log_path: str
    tick_count: int = 0
    pending_action: int = engine.STAY


class StudySession:
    """One participant's protocol state machine. Single-threaded by contract."""

    def __init__(self, config: ServerConfig, session_id: str, participant_id: str):
        self.config = config
        self.session_id = session_id
        self.participant_id = participant_id
        rng = random.Random(config.seed)
        names = sorted(config.agents)
        rng.shuffle(names)
        self.slot_to_agent = dict(zip(SLOT_LABELS, names))
        self.schedule = build_schedule(config.seed)
        self.stage = "warmup"
        self.warmup_played: set[str] = set()
        self.exploitation_done = 0
        self.ranking: list[str] | None = None
        self.comment = ""
        self.game: _ActiveGame | None = None
        self.closed = False
        self._policies = {
            slot: resolve_policy(config.agents[agent], seed=config.seed + i)
            for i, (slot, agent) in enumerate(sorted(self.slot_to_agent.items()))
        }
        self._game_serial = 0
        self._dir = Path(config.log_dir) / session_id
        self._dir.mkdir(parents=True, exist_ok=True)
        self._persist_session()

    # -- message handling ---------------------------------------------------

    def handle(self, msg: dict) -> list[dict]:
        """Process one client message, returning messages to send back."""
        if self.closed:
            raise ProtocolError("SessionClosed")
        kind = msg.get("type")
        if kind == "heartbeat":
            return [{"type": "heartbeat", "t": self.game.tick_count if self.game else None}]
        if kind == "action":
            return self._on_action(msg)
        if kind == "start_game":
            return self._on_start_game(msg)
        if kind == "ranking":
            return self._on_ranking(msg)
        raise ProtocolError("UnknownMessage", f"unsupported type {kind!r}")

    def _on_action(self, msg: dict) -> list[dict]:
        if self.game is None:
            return []  # late input between games is dropped
        a = msg.get("a")
        if not isinstance(a, int) or not 0 <= a < engine.N_ACTIONS:
            raise ProtocolError("BadAction", f"action must be 0..5, got {a!r}")
        self.game.pending_action = a  # latest-wins within the tick window
        return []

    def _on_start_game(self, msg: dict) -> list[dict]:
        if self.game is not None:
            raise ProtocolError("GameInProgress")
        if self.stage == "warmup":
            slot = msg.get("slot")
            if slot not in SLOT_LABELS:
                raise ProtocolError("UnknownAgent", f"slot must be one of {SLOT_LABELS}")
            position = msg.get("position", 1)
            if position not in (1, 2):
                raise ProtocolError("BadPosition")
            game_index = -1
        elif self.stage == "exploitation":
            if self.exploitation_done >= len(self.schedule):
                raise ProtocolError("WrongStage", "all scheduled games played")
            slot, position = self.schedule[self.exploitation_done]
            game_index = self.exploitation_done
        else:
            raise ProtocolError("WrongStage", f"cannot start a game in {self.stage}")
        return self._begin_game(slot, position, game_index)

    def _begin_game(self, slot: str, position: int, game_index: int) -> list[dict]:
        lay = self.config.layout
        self._game_serial += 1
        name = f"game-{self._game_serial:03d}-{self.stage}-{slot}-p{position}.jsonl"
        path = self._dir / name
        handle = open(path, "w", encoding="utf-8")
        writer = trajlog.TrajectoryWriter(handle, lay, self.config.seed, meta={
            "session": self.session_id,
            "participant": self.participant_id,
            "stage": self.stage,
            "slot": slot,
            "human_position": position,
            "game_index": game_index,
            "ai_idle_steps": self.config.ai_idle_steps,
        })
        ai = self._policies[slot].reseeded(self.config.seed + self._game_serial)
        self.game = _ActiveGame(
            slot=slot, position=position, stage=self.stage,
            game_index=game_index, state=engine.reset(lay, self.config.seed),
            ai_policy=ai, writer=writer, log_handle=handle, log_path=str(path),
        )
        start = {
            "type": "game_start",
            "stage": self.stage,
            "slot": slot,
            "position": position,
            "game_index": game_index,
            "total_games": len(self.schedule),
            "layout": {
                "name": lay.name,
                "text": lay.text.split("\n\n")[0],
                "width": lay.width,
                "height": lay.height,
                "episode_length": lay.episode_length,
                "orders": [
                    {"onions": r.onions, "tomatoes": r.tomatoes,
                     "cook_ticks": r.cook_ticks, "reward": r.reward}
                    for r in lay.orders
                ],
            },
            "tick_ms": self.config.tick_ms,
        }
        return [start, self._state_message()]

    def _on_ranking(self, msg: dict) -> list[dict]:
        if self.stage != "warmup":
            raise ProtocolError("WrongStage", "ranking is submitted after warm-up")
        if self.game is not None:
            raise ProtocolError("GameInProgress")
        missing = set(SLOT_LABELS) - self.warmup_played
        if missing:
            raise ProtocolError(
                "WrongStage", f"play every agent first; missing {sorted(missing)}")
        order = msg.get("order")
        if (not isinstance(order, list) or sorted(order) != sorted(SLOT_LABELS)):
            raise ProtocolError("NotAPermutation",
                                f"order must be a permutation of {SLOT_LABELS}")
        self.ranking = list(order)
        self.comment = str(msg.get("comment", ""))
        self.stage = "exploitation"
        self._persist_session()
        return [{"type": "stage_change", "stage": "exploitation",
                 "scheduled_games": len(self.schedule)}]

    # -- tick loop ------------------------------------------------------------

    def tick(self) -> list[dict]:
        """Advance the active game one engine step; no-op between games."""
        g = self.game
        if g is None:
            return []
        human_action = g.pending_action
        g.pending_action = engine.STAY
        if g.tick_count % (self.config.ai_idle_steps + 1) == self.config.ai_idle_steps:
            ai_seat = 2 - g.position  # the seat the human does not occupy, 0-based
            ai_action = int(g.ai_policy(g.state, ai_seat))
        else:
            ai_action = engine.STAY
        if g.position == 1:
            a0, a1 = human_action, ai_action
        else:
            a0, a1 = ai_action, human_action
        out = engine.step(g.state, a0, a1)
        g.writer.record((a0, a1), out)
        g.state = out.state
        g.tick_count += 1
        msgs = [self._state_message()]
        if out.done:
            msgs.append(self._finish_game())
        return msgs

    def _finish_game(self) -> dict:
        g = self.game
        g.writer.finish(g.state)
        g.log_handle.close()
        self._verify_log(g.log_path, g.state.total_reward)
        self.game = None
        if g.stage == "warmup":
            self.warmup_played.add(g.slot)
        else:
            self.exploitation_done += 1
        self._persist_session()
        done_msg = {
            "type": "game_end",
            "score": g.state.total_reward,
            "slot": g.slot,
            "stage": g.stage,
            "game_index": g.game_index,
            "games_remaining": (len(self.schedule) - self.exploitation_done
                                if g.stage == "exploitation" else None),
        }
        if g.stage == "exploitation" and self.exploitation_done >= len(self.schedule):
            self.stage = "done"
            self.closed = True
            self._persist_session()
            done_msg["study_complete"] = True
            done_msg["slot_agents"] = dict(self.slot_to_agent)
        return done_msg

    def _verify_log(self, path: str, expected_score: int) -> None:
        with open(path, "r", encoding="utf-8") as f:
            record = trajlog.read_log(f)
        final = trajlog.replay_final_state(record)
        if final.total_reward != expected_score:
            raise RuntimeError(
                f"log {path} replays to {final.total_reward}, expected {expected_score}")

    def _state_message(self) -> dict:
        g = self.game
        s = g.state
        lay = self.config.layout
        return {
            "type": "state",
            "t": g.tick_count,
            "game_tick": s.tick,
            "players": [
                {"x": p % lay.width, "y": p // lay.width, "dir": d, "held": h}
                for p, d, h in (s.player(0), s.player(1))
            ],
            "counters": [
                [c % lay.width, c // lay.width, item]
                for c, item in sorted(s.counters.items())
            ],
            "pots": [
                [c % lay.width, c // lay.width, contents >> 2, contents & 3, cook]
                for c, (contents, cook) in sorted(s.pots.items())
            ],
            "score": s.total_reward,
            "ticks_left": lay.episode_length - s.tick,
        }

    def _persist_session(self) -> None:
        body = {
            "session": self.session_id,
            "participant": self.participant_id,
            "layout": self.config.layout.name,
            "seed": self.config.seed,
            "stage": self.stage,
            "slot_agents": self.slot_to_agent,
            "schedule": [[slot, pos] for slot, pos in self.schedule],
            "warmup_played": sorted(self.warmup_played),
            "ranking": self.ranking,
            "comment": self.comment,
            "exploitation_done": self.exploitation_done,
        }
        (self._dir / "session.json").write_text(
            json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def abort(self) -> None:
        """Drop the connection's active game cleanly (log closed, not counted)."""
        if self.game is not None:
            self.game.writer.finish(self.game.state)
            self.game.log_handle.close()
            self.game = None
        self.closed = True


# -- asyncio / websockets layer ---------------------------------------------


async def _client_loop(ws, config: ServerConfig) -> None:
    import websockets

    session: StudySession | None = None
    inbox: asyncio.Queue = asyncio.Queue()

    async def reader():
        try:
            async for raw in ws:
                await inbox.put(raw)
        except websockets.ConnectionClosed:
            pass
        await inbox.put(None)

    reader_task = asyncio.create_task(reader())
    try:
        raw = await inbox.get()
        if raw is None:
            return
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError:
            await ws.send(json.dumps({"type": "error", "error": "BadJson"}))
            return
        if msg.get("type") != "join":
            await ws.send(json.dumps(
                {"type": "error", "error": "ExpectedJoin"}))
            return
        participant = str(msg.get("participant", "anonymous"))
        session_id = f"s{uuid.uuid4().hex[:12]}"
        session = StudySession(config, session_id, participant)
        await ws.send(json.dumps({
            "type": "joined",
            "session": session.session_id,
            "stage": session.stage,
            "slots": list(SLOT_LABELS),
            "layout_name": config.layout.name,
            "tick_ms": config.tick_ms,
        }))

        tick_s = config.tick_ms / 1000.0
        loop = asyncio.get_running_loop()
        next_tick = loop.time() + tick_s
        while not session.closed:
            timeout = max(0.0, next_tick - loop.time())
            try:
                raw = await asyncio.wait_for(inbox.get(), timeout=timeout)
                if raw is None:
                    break
                try:
                    replies = session.handle(json.loads(raw))
                except ProtocolError as e:
                    replies = [{"type": "error", "error": e.code,
                                "detail": str(e)}]
                except json.JSONDecodeError:
                    replies = [{"type": "error", "error": "BadJson"}]
                for r in replies:
                    await ws.send(json.dumps(r))
                continue
            except asyncio.TimeoutError:
                pass
            next_tick += tick_s
            for r in session.tick():
                await ws.send(json.dumps(r))
    finally:
        reader_task.cancel()
        if session is not None:
            session.abort()


async def serve(config: ServerConfig):
    """Start the WebSocket server; returns the server object (async context)."""
    from websockets.asyncio.server import serve as ws_serve

    async def handler(ws):
        await _client_loop(ws, config)

    return await ws_serve(handler, config.host, config.port)


def run_server(config: ServerConfig) -> None:
    """Blocking entry point used by the CLI."""

    async def main():
        server = await serve(config)
        logger.info("serving %s on ws://%s:%d (tick %d ms)",
                    config.layout.name, config.host, config.port, config.tick_ms)
        await server.serve_forever()

    asyncio.run(main())
