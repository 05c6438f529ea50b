"""Study protocol state machine, tick rules, and persistence (sans-io)."""

import json
from collections import Counter
from pathlib import Path

import pytest

from coopchef import engine, evalharness, playserver, trajlog
from coopchef.playserver import (
    SLOT_LABELS, ProtocolError, ServerConfig, StudySession, build_schedule,
)

PLAY_LAB = """\
XXXXXXX
XO P TX
X1   2X
XD S XX
XXXXXXX

ingredients=O3 cook=2 reward=20
episode_length=16
"""


@pytest.fixture()
def play_layout():
    return engine.parse_layout(PLAY_LAB, name="play_lab")


@pytest.fixture()
def config(play_layout, tmp_path):
    return ServerConfig(
        layout=play_layout,
        agents={
            "alpha": "script:delivery",
            "beta": "noop",
            "gamma": "random",
            "delta": "script:onion_everywhere",
        },
        log_dir=str(tmp_path),
        seed=7,
    )


def session(config, pid="p1", sid="s-test"):
    return StudySession(config, sid, pid)


def drive_game(sess):
    """Tick until the active game ends; returns all emitted messages."""
    msgs = []
    while sess.game is not None:
        msgs.extend(sess.tick())
    return msgs


def finish_warmup(sess):
    for slot in SLOT_LABELS:
        sess.handle({"type": "start_game", "slot": slot})
        drive_game(sess)


def test_schedule_is_balanced_and_seeded():
    sched = build_schedule(3)
    assert len(sched) == 24
    assert Counter(sched) == {(s, p): 3 for s in SLOT_LABELS for p in (1, 2)}
    assert sched == build_schedule(3)
    assert sched != build_schedule(4)


def test_roster_must_have_four_agents(play_layout, tmp_path):
    with pytest.raises(ValueError, match="4 agents"):
        ServerConfig(layout=play_layout, agents={"a": "noop"},
                     log_dir=str(tmp_path))


def test_same_seed_same_session_plan(config):
    a = session(config, sid="s-a")
    b = session(config, sid="s-b")
    assert a.schedule == b.schedule
    assert a.slot_to_agent == b.slot_to_agent


def test_session_persists_plan(config):
    sess = session(config)
    body = json.loads((Path(config.log_dir) / "s-test" / "session.json").read_text())
    assert body["stage"] == "warmup"
    assert body["schedule"] == [[s, p] for s, p in sess.schedule]
    assert sorted(body["slot_agents"]) == list(SLOT_LABELS)
    assert sorted(body["slot_agents"].values()) == sorted(config.agents)


def test_warmup_game_start_and_state_messages(config):
    sess = session(config)
    replies = sess.handle({"type": "start_game", "slot": "B", "position": 2})
    assert [r["type"] for r in replies] == ["game_start", "state"]
    start, state = replies
    assert start["slot"] == "B"
    assert start["position"] == 2
    assert start["stage"] == "warmup"
    assert start["layout"]["episode_length"] == 16
    assert state["t"] == 0
    assert state["score"] == 0
    assert len(state["players"]) == 2
    assert state["ticks_left"] == 16


def test_unknown_slot_and_bad_position(config):
    sess = session(config)
    with pytest.raises(ProtocolError) as e:
        sess.handle({"type": "start_game", "slot": "Z"})
    assert e.value.code == "UnknownAgent"
    with pytest.raises(ProtocolError) as e:
        sess.handle({"type": "start_game", "slot": "A", "position": 3})
    assert e.value.code == "BadPosition"


def test_double_start_rejected(config):
    sess = session(config)
    sess.handle({"type": "start_game", "slot": "A"})
    with pytest.raises(ProtocolError) as e:
        sess.handle({"type": "start_game", "slot": "A"})
    assert e.value.code == "GameInProgress"


def test_action_validation_and_latest_wins(config):
    sess = session(config)
    sess.handle({"type": "start_game", "slot": "B", "position": 1})
    with pytest.raises(ProtocolError) as e:
        sess.handle({"type": "action", "a": 9})
    assert e.value.code == "BadAction"
    with pytest.raises(ProtocolError):
        sess.handle({"type": "action", "a": "up"})
    # Two actions inside one tick window: the later one is played.
    sess.handle({"type": "action", "a": engine.UP})
    sess.handle({"type": "action", "a": engine.RIGHT})
    sess.tick()
    # No input before the next tick: the human contributes a stay.
    sess.tick()
    sess.abort()
    with open(sess._dir / "game-001-warmup-B-p1.jsonl", encoding="utf-8") as f:
        rows = trajlog.read_log(f).rows
    assert rows[0]["a"][0] == engine.RIGHT
    assert rows[1]["a"][0] == engine.STAY


def test_actions_between_games_are_dropped(config):
    sess = session(config)
    assert sess.handle({"type": "action", "a": 0}) == []
    assert sess.tick() == []


def test_unknown_message_type(config):
    sess = session(config)
    with pytest.raises(ProtocolError) as e:
        sess.handle({"type": "dance"})
    assert e.value.code == "UnknownMessage"


def test_heartbeat(config):
    sess = session(config)
    assert sess.handle({"type": "heartbeat"}) == [{"type": "heartbeat", "t": None}]
    sess.handle({"type": "start_game", "slot": "A"})
    sess.tick()
    assert sess.handle({"type": "heartbeat"}) == [{"type": "heartbeat", "t": 1}]


def test_ai_acts_only_on_duty_ticks(config):
    sess = session(config)
    # Find the slot whose agent is the delivery script: its random-walk
    # fallback never stays put on an open floor, so every duty action moves.
    slot = next(s for s, agent in sess.slot_to_agent.items() if agent == "alpha")
    sess.handle({"type": "start_game", "slot": slot, "position": 1})
    for _ in range(16):
        sess.tick()
    with open(sess._dir / f"game-001-warmup-{slot}-p1.jsonl", encoding="utf-8") as f:
        record = trajlog.read_log(f)
    ai_actions = [r["a"][1] for r in record.rows]  # human seat 1 -> AI seat 2
    non_stay = [t for t, a in enumerate(ai_actions) if a != engine.STAY]
    assert non_stay == [7, 15]  # exactly every 8th tick
    assert record.header["meta"]["ai_idle_steps"] == 7


def test_ai_seat_follows_human_position(config):
    sess = session(config)
    slot = next(s for s, agent in sess.slot_to_agent.items() if agent == "alpha")
    sess.handle({"type": "start_game", "slot": slot, "position": 2})
    for _ in range(8):
        sess.tick()
    sess.abort()
    with open(sess._dir / f"game-001-warmup-{slot}-p2.jsonl", encoding="utf-8") as f:
        record = trajlog.read_log(f)
    assert any(r["a"][0] != engine.STAY for r in record.rows)  # AI on seat 1
    assert all(r["a"][1] == engine.STAY for r in record.rows)  # human idle


def test_ranking_gates(config):
    sess = session(config)
    with pytest.raises(ProtocolError) as e:
        sess.handle({"type": "ranking", "order": list(SLOT_LABELS)})
    assert e.value.code == "WrongStage"  # warm-up not finished
    finish_warmup(sess)
    with pytest.raises(ProtocolError) as e:
        sess.handle({"type": "ranking", "order": ["A", "A", "B", "C"]})
    assert e.value.code == "NotAPermutation"
    with pytest.raises(ProtocolError) as e:
        sess.handle({"type": "ranking", "order": ["A", "B"]})
    assert e.value.code == "NotAPermutation"
    replies = sess.handle({"type": "ranking", "order": ["C", "A", "D", "B"],
                           "comment": "notes"})
    assert replies == [{"type": "stage_change", "stage": "exploitation",
                        "scheduled_games": 24}]
    assert sess.ranking == ["C", "A", "D", "B"]
    with pytest.raises(ProtocolError) as e:
        sess.handle({"type": "ranking", "order": list(SLOT_LABELS)})
    assert e.value.code == "WrongStage"  # no re-ranking


def test_warmup_allows_repeats_but_requires_all_slots(config):
    sess = session(config)
    for _ in range(2):
        sess.handle({"type": "start_game", "slot": "A"})
        drive_game(sess)
    with pytest.raises(ProtocolError) as e:
        sess.handle({"type": "ranking", "order": list(SLOT_LABELS)})
    assert e.value.code == "WrongStage"
    assert sess.warmup_played == {"A"}


def test_full_study_walk(config):
    sess = session(config)
    finish_warmup(sess)
    sess.handle({"type": "ranking", "order": ["B", "D", "A", "C"]})

    played = []
    last = None
    for i in range(24):
        replies = sess.handle({"type": "start_game"})
        start = replies[0]
        assert start["game_index"] == i
        played.append((start["slot"], start["position"]))
        msgs = drive_game(sess)
        last = msgs[-1]
        assert last["type"] == "game_end"
    # The server dictates the schedule order, ignoring client wishes.
    assert played == sess.schedule
    assert last["study_complete"] is True
    assert last["slot_agents"] == sess.slot_to_agent
    assert last["games_remaining"] == 0
    assert sess.stage == "done"
    assert sess.closed
    with pytest.raises(ProtocolError) as e:
        sess.handle({"type": "heartbeat"})
    assert e.value.code == "SessionClosed"

    body = json.loads((Path(config.log_dir) / sess.session_id / "session.json")
                      .read_text())
    assert body["stage"] == "done"
    assert body["exploitation_done"] == 24
    assert body["warmup_played"] == list(SLOT_LABELS)
    # 4 warm-up + 24 exploitation logs, every one replayable to its score.
    logs = sorted((Path(config.log_dir) / sess.session_id).glob("game-*.jsonl"))
    assert len(logs) == 28
    for path in logs[:3]:
        with open(path, encoding="utf-8") as f:
            record = trajlog.read_log(f)
        final = trajlog.replay_final_state(record)
        assert final.total_reward == record.end["total_reward"]


def test_exploitation_requires_ranking_first(config):
    sess = session(config)
    finish_warmup(sess)
    # Still warm-up until a ranking arrives; extra games stay unscheduled.
    replies = sess.handle({"type": "start_game", "slot": "A"})
    assert replies[0]["stage"] == "warmup"
    drive_game(sess)
    assert sess.exploitation_done == 0


def test_rankings_feed_preference_scores(config):
    # Synthetic sessions: slot orders resolve to agent names server-side and
    # reduce to pairwise preference scores.
    records = []
    for pid, order in (("p1", ["A", "B", "C", "D"]), ("p2", ["B", "A", "C", "D"])):
        sess = session(config, pid=pid, sid=f"s-{pid}")
        finish_warmup(sess)
        sess.handle({"type": "ranking", "order": order})
        by_agent = tuple(sess.slot_to_agent[slot] for slot in sess.ranking)
        records.append(evalharness.RankingRecord(pid, config.layout.name, by_agent))
    a = records[0].ranking[0]  # whichever agent sits in slot A
    b = records[0].ranking[1]
    assert evalharness.preference_score(records, a, b) == 0.0
    c = records[0].ranking[2]
    assert evalharness.preference_score(records, a, c) == 1.0


def test_abort_closes_cleanly(config):
    sess = session(config)
    sess.handle({"type": "start_game", "slot": "C"})
    sess.tick()
    sess.abort()
    assert sess.game is None
    assert sess.closed
    assert sess.warmup_played == set()  # aborted games do not count
    with pytest.raises(ProtocolError):
        sess.handle({"type": "heartbeat"})


def test_state_message_reflects_world(config, play_layout):
    sess = session(config)
    slot = next(s for s, a in sess.slot_to_agent.items() if a == "beta")  # noop
    sess.handle({"type": "start_game", "slot": slot, "position": 1})
    sess.handle({"type": "action", "a": engine.INTERACT})
    msgs = sess.tick()
    state = msgs[0]
    assert state["type"] == "state"
    assert state["game_tick"] == 1
    assert state["ticks_left"] == 15
    pots = state["pots"]
    assert len(pots) == 1
    x, y, onions, tomatoes, cook = pots[0]
    assert play_layout.tiles[y * play_layout.width + x] == engine.POT
    assert (onions, tomatoes, cook) == (0, 0, engine.POT_IDLE)
