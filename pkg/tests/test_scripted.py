"""Scripted partner behavior: goal pursuit, purity, determinism."""

import pytest

from coopchef import engine, scripted
from coopchef.engine import DISH, INTERACT, POT_READY, STAY, UP
from coopchef.scripted import ScriptKind, ScriptedPolicy
from conftest import craft, fired


def rollout_events(layout, kind, seed=0, partner=None, ticks=None):
    p0 = ScriptedPolicy(kind, seed=seed)
    p1 = partner or (lambda s, i: STAY)
    s = engine.reset(layout)
    totals = [0] * layout.n_events
    for _ in range(ticks or layout.episode_length):
        out = engine.step(s, p0(s, 0), p1(s, 1))
        for i, c in enumerate(out.events):
            totals[i] += c
        s = out.state
        if out.done:
            break
    return s, totals


@pytest.mark.parametrize("kind", list(ScriptKind))
def test_scripts_stay_inside_their_event_support(tomato_lab, kind):
    support = scripted.SCRIPT_EVENT_SUPPORT[kind]
    _, totals = rollout_events(tomato_lab, kind, seed=3)
    emitted = {tomato_lab.event_names[i] for i, c in enumerate(totals) if c}
    assert emitted <= support, f"{kind}: {emitted - support} outside support"


def test_placement_scripts_actually_place(tomato_lab):
    _, totals = rollout_events(tomato_lab, ScriptKind.ONION_PLACEMENT)
    assert totals[tomato_lab.event_index["place_onion_in_pot"]] > 0
    _, totals = rollout_events(tomato_lab, ScriptKind.TOMATO_PLACEMENT)
    assert totals[tomato_lab.event_index["place_tomato_in_pot"]] > 0


def test_everywhere_scripts_litter_counters(tomato_lab):
    final, totals = rollout_events(tomato_lab, ScriptKind.ONION_EVERYWHERE)
    assert totals[tomato_lab.event_index["put_onion_on_counter"]] > 0
    assert len(final.counters) > 0


def test_delivery_script_serves_a_ready_soup(tomato_lab):
    lay = tomato_lab
    pot = lay.pos(3, 1)
    s = craft(
        lay,
        p0=(lay.pos(3, 2), UP, DISH),
        pots={pot: ((3 << 2), POT_READY)},
    )
    pol = ScriptedPolicy(ScriptKind.DELIVERY, seed=0)
    delivered = 0
    for _ in range(12):
        out = engine.step(s, pol(s, 0), STAY)
        delivered += fired(lay, out).get("delivery", 0)
        s = out.state
    assert delivered == 1
    assert s.total_reward == 20


def test_delivery_script_never_serves_without_soup(tomato_lab):
    # No soup anywhere: the script random-walks and never interacts at the
    # serving tile.
    lay = tomato_lab
    pol = ScriptedPolicy(ScriptKind.DELIVERY, seed=5)
    s = engine.reset(lay)
    for _ in range(lay.episode_length):
        a = pol(s, 0)
        if a == INTERACT:
            pos, d, _ = s.player(0)
            face = pos + lay.flat_deltas[d]
            assert lay.tiles[face] != engine.SERVE
        out = engine.step(s, a, STAY)
        s = out.state
    assert s.total_reward == 0


def test_delivery_script_waits_at_cooking_pot(tomato_lab):
    lay = tomato_lab
    pot = lay.pos(3, 1)
    s = craft(lay, p0=(lay.pos(3, 2), UP, DISH), pots={pot: ((3 << 2), 3)})
    pol = ScriptedPolicy(ScriptKind.DELIVERY, seed=0)
    assert pol(s, 0) == STAY  # soup under way: hold position, do not spam


def test_and_delivery_switches_at_half_episode(tomato_lab):
    lay = tomato_lab
    pol = ScriptedPolicy(ScriptKind.ONION_PLACEMENT_AND_DELIVERY, seed=1)
    s = engine.reset(lay)
    place_k = lay.event_index["place_onion_in_pot"]
    deliver_k = lay.event_index["delivery"]
    first, second = [0, 0], [0, 0]
    for t in range(lay.episode_length):
        out = engine.step(s, pol(s, 0), STAY)
        half = 0 if t < lay.episode_length // 2 else 1
        first[half] += out.events[place_k]
        second[half] += out.events[deliver_k]
        s = out.state
    assert first[0] > 0          # places early
    assert first[1] == 0         # stops placing after the switch
    assert second[1] >= 1        # delivers what it cooked


def test_script_is_deterministic_per_seed(tomato_lab):
    runs = []
    for _ in range(2):
        s, totals = rollout_events(tomato_lab, ScriptKind.TOMATO_PLACEMENT, seed=9)
        runs.append((s.key(), tuple(totals)))
    assert runs[0] == runs[1]
    s2, totals2 = rollout_events(tomato_lab, ScriptKind.TOMATO_PLACEMENT, seed=10)
    # Different seed may wander differently; only require a valid rollout.
    assert sum(totals2) >= 0


def test_policy_id_and_reseed():
    pol = ScriptedPolicy("delivery", seed=4)
    assert pol.policy_id == "script:delivery"
    again = pol.reseeded(8)
    assert again.kind == ScriptKind.DELIVERY
    assert again.seed == 8


def test_scripts_run_on_all_bundled_layouts():
    # Goal-directed planning must never crash on any fixture geometry.
    for name in engine.list_layouts():
        lay = engine.load_layout(name)
        for kind in (ScriptKind.ONION_PLACEMENT, ScriptKind.DELIVERY,
                     ScriptKind.ONION_TO_MIDDLE_COUNTER):
            pol = ScriptedPolicy(kind, seed=1)
            s = engine.reset(lay)
            for _ in range(30):
                out = engine.step(s, pol(s, 0), STAY)
                s = out.state
