"""Append-only JSONL trajectory logs and bit-exact replay.

A log file carries one header object (layout text, seed, format version),
then one object per tick. Serialization uses sorted keys and fixed
separators so that re-logging a replayed episode reproduces the original
file byte for byte.
"""

from __future__ import annotations

import json
from typing import IO, Iterator

from coopchef import engine

FORMAT_VERSION = 1


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class TrajectoryWriter:
    """Streams one episode to a JSONL file handle."""

    def __init__(self, fh: IO[str], layout: engine.Layout, seed: int,
                 meta: dict | None = None):
        self.fh = fh
        self.layout = layout
        header = {
            "kind": "header",
            "version": FORMAT_VERSION,
            "layout_name": layout.name,
            "layout_text": layout.text,
            "seed": seed,
        }
        if meta:
            header["meta"] = meta
        fh.write(_dumps(header) + "\n")
        self._tick = 0

    def record(self, actions: tuple[int, int], outcome: engine.StepOutcome) -> None:
        row = {
            "t": self._tick,
            "a": [actions[0], actions[1]],
            "r": outcome.reward,
        }
        nonzero = {str(i): c for i, c in enumerate(outcome.events) if c}
        if nonzero:
            row["ev"] = nonzero
            row["det"] = [list(d) for d in outcome.details]
        self.fh.write(_dumps(row) + "\n")
        self._tick += 1

    def finish(self, state: engine.GameState) -> None:
        self.fh.write(_dumps({
            "kind": "end",
            "t": state.tick,
            "total_reward": state.total_reward,
        }) + "\n")


def write_episode(fh: IO[str], layout: engine.Layout, seed: int,
                  actions: list[tuple[int, int]], meta: dict | None = None) -> engine.GameState:
    """Log a whole episode from an action sequence; returns the final state."""
    w = TrajectoryWriter(fh, layout, seed, meta)
    state = engine.reset(layout, seed)
    for a0, a1 in actions:
        out = engine.step(state, a0, a1)
        w.record((a0, a1), out)
        state = out.state
        if out.done:
            break
    w.finish(state)
    return state


class TrajectoryRecord:
    """Parsed log: header fields plus per-tick rows."""

    def __init__(self, header: dict, rows: list[dict], end: dict | None):
        self.header = header
        self.rows = rows
        self.end = end

    @property
    def layout(self) -> engine.Layout:
        return engine.parse_layout(self.header["layout_text"],
                                   name=self.header.get("layout_name", "logged"))

    @property
    def seed(self) -> int:
        return self.header["seed"]

    @property
    def actions(self) -> list[tuple[int, int]]:
        return [(r["a"][0], r["a"][1]) for r in self.rows]

    @property
    def total_reward(self) -> int:
        if self.end is not None:
            return self.end["total_reward"]
        return sum(r["r"] for r in self.rows)

    def event_totals(self) -> tuple[int, ...]:
        lay = self.layout
        totals = [0] * lay.n_events
        for r in self.rows:
            for k, c in r.get("ev", {}).items():
                totals[int(k)] += c
        return tuple(totals)


def read_log(fh: IO[str]) -> TrajectoryRecord:
    header = None
    rows: list[dict] = []
    end = None
    for line in fh:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        if obj.get("kind") == "header":
            header = obj
        elif obj.get("kind") == "end":
            end = obj
        else:
            rows.append(obj)
    if header is None:
        raise ValueError("log has no header line")
    return TrajectoryRecord(header, rows, end)


def replay(record: TrajectoryRecord) -> Iterator[tuple[engine.GameState, engine.StepOutcome]]:
    """Re-simulate a logged episode, yielding (state before, outcome) pairs.

    Raises ValueError on the first tick where the engine disagrees with the
    logged rewards or events, which catches both log corruption and engine
    drift across versions.
    """
    lay = record.layout
    state = engine.reset(lay, record.seed)
    for row in record.rows:
        out = engine.step(state, row["a"][0], row["a"][1])
        if out.reward != row["r"]:
            raise ValueError(f"tick {row['t']}: reward {out.reward} != logged {row['r']}")
        logged_ev = {int(k): c for k, c in row.get("ev", {}).items()}
        live_ev = {i: c for i, c in enumerate(out.events) if c}
        if live_ev != logged_ev:
            raise ValueError(f"tick {row['t']}: events {live_ev} != logged {logged_ev}")
        yield state, out
        state = out.state
    if record.end is not None and state.total_reward != record.end["total_reward"]:
        raise ValueError(
            f"final reward {state.total_reward} != logged {record.end['total_reward']}"
        )


def replay_final_state(record: TrajectoryRecord) -> engine.GameState:
    state = engine.reset(record.layout, record.seed)
    for _, out in replay(record):
        state = out.state
    return state
