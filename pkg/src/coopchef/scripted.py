"""Rule-based partners with strong, legible preferences. Evaluation only.

Each script pursues one obsession: hoarding an item onto counters, feeding
pots one ingredient, delivering soups, or a placement/delivery split by
episode half. All share a navigation core (breadth-first search over floor
cells, the other player treated as a wall) and a seeded random-walk fallback
for when the obsession is momentarily impossible. Scripts read ground-truth
state, not observations.
"""

from __future__ import annotations

import random
from collections import deque
from enum import Enum

from coopchef import engine
from coopchef.engine import (
    COUNTER, DISH, DISH_SOURCE, DOWN, EMPTY, INTERACT, LEFT, ONION,
    ONION_SOURCE, POT, POT_IDLE, POT_READY, RIGHT, SERVE, STAY, TOMATO,
    TOMATO_SOURCE, UP, is_soup,
)


class ScriptKind(Enum):
    ONION_EVERYWHERE = "onion_everywhere"
    TOMATO_EVERYWHERE = "tomato_everywhere"
    DISH_EVERYWHERE = "dish_everywhere"
    ONION_PLACEMENT = "onion_placement"
    TOMATO_PLACEMENT = "tomato_placement"
    DELIVERY = "delivery"
    ONION_PLACEMENT_AND_DELIVERY = "onion_placement_and_delivery"
    TOMATO_PLACEMENT_AND_DELIVERY = "tomato_placement_and_delivery"
    ONION_TO_MIDDLE_COUNTER = "onion_to_middle_counter"


_PLACEMENT_CATEGORIES = (
    "viable_placement", "optimal_placement", "catastrophic_placement",
    "useless_placement",
)
_ONION_PLACE = ("pickup_onion_from_dispenser", "place_onion_in_pot") + _PLACEMENT_CATEGORIES
_TOMATO_PLACE = (
    "pickup_tomato_from_dispenser", "useful_tomato_pickup", "place_tomato_in_pot",
    "place_tomato_in_empty_pot", "optimal_tomato_placement",
) + _PLACEMENT_CATEGORIES
_DELIVERY = (
    "pickup_dish_from_dispenser", "useful_dish_pickup", "pickup_soup_from_pot",
    "delivery",
)

# Every event a given script can legitimately emit (incidental companion
# events included); behavioral-purity checks assert rollouts stay inside.
SCRIPT_EVENT_SUPPORT: dict[ScriptKind, frozenset[str]] = {
    ScriptKind.ONION_EVERYWHERE: frozenset(
        ("pickup_onion_from_dispenser", "put_onion_on_counter")),
    ScriptKind.TOMATO_EVERYWHERE: frozenset(
        ("pickup_tomato_from_dispenser", "useful_tomato_pickup", "put_tomato_on_counter")),
    ScriptKind.DISH_EVERYWHERE: frozenset(
        ("pickup_dish_from_dispenser", "useful_dish_pickup", "put_dish_on_counter")),
    ScriptKind.ONION_PLACEMENT: frozenset(_ONION_PLACE),
    ScriptKind.TOMATO_PLACEMENT: frozenset(_TOMATO_PLACE),
    ScriptKind.DELIVERY: frozenset(_DELIVERY),
    ScriptKind.ONION_PLACEMENT_AND_DELIVERY: frozenset(
        _ONION_PLACE + _DELIVERY + ("put_onion_on_counter",)),
    ScriptKind.TOMATO_PLACEMENT_AND_DELIVERY: frozenset(
        _TOMATO_PLACE + _DELIVERY + ("put_tomato_on_counter",)),
    ScriptKind.ONION_TO_MIDDLE_COUNTER: frozenset(
        ("pickup_onion_from_dispenser", "put_onion_on_counter")),
}


def _staging_cells(layout: engine.Layout, targets, blocked: int):
    """Map floor cell -> facing direction, for cells adjacent to any target.

    Targets are iterated in sorted order and directions in canonical order;
    the first claim on a floor cell wins, keeping goal choice deterministic.
    """
    staging: dict[int, int] = {}
    size = len(layout.tiles)
    for t in sorted(targets):
        for d in (UP, DOWN, LEFT, RIGHT):
            n = t - layout.flat_deltas[d]  # stand at n, face d to hit t
            if 0 <= n < size and layout.floor[n] and n != blocked and n not in staging:
                staging[n] = d
    return staging


def _bfs_first_step(layout: engine.Layout, start: int, staging: dict[int, int],
                    blocked: int) -> tuple[int, int] | None:
    """(first action, facing at goal) for the nearest staging cell, else None.

    Neighbor expansion follows the fixed direction order, so equally near
    goals resolve the same way every time.
    """
    if start in staging:
        return (None, staging[start])
    parent_action: dict[int, int] = {start: -1}
    q = deque((start,))
    deltas = layout.flat_deltas
    floor = layout.floor
    while q:
        cur = q.popleft()
        for d in (UP, DOWN, LEFT, RIGHT):
            nxt = cur + deltas[d]
            if not floor[nxt] or nxt == blocked or nxt in parent_action:
                continue
            parent_action[nxt] = d if cur == start else parent_action[cur]
            if nxt in staging:
                return (parent_action[nxt], staging[nxt])
            q.append(nxt)
    return None


class ScriptedPolicy:
    """One player's scripted controller; callable as (state, player) -> action."""

    def __init__(self, kind: ScriptKind | str, seed: int = 0):
        self.kind = ScriptKind(kind) if isinstance(kind, str) else kind
        self.seed = seed
        self.rng = random.Random(seed)

    @property
    def policy_id(self) -> str:
        return f"script:{self.kind.value}"

    def reseeded(self, seed: int) -> "ScriptedPolicy":
        return ScriptedPolicy(self.kind, seed)

    def __call__(self, state: engine.GameState, player_index: int) -> int:
        return script_act(self.kind, state, player_index, self.rng)


def script_act(kind: ScriptKind, state: engine.GameState, player_index: int,
               rng: random.Random) -> int:
    """Next action of the script's plan, or a seeded random-walk step."""
    lay = state.layout
    pos, facing, held = state.player(player_index)
    partner_pos = state.player(1 - player_index)[0]

    goal = _mission_targets(kind, state, held)
    if goal is not None:
        staging = _staging_cells(lay, goal, partner_pos)
        hit = _bfs_first_step(lay, pos, staging, partner_pos)
        if hit is not None:
            action, face_dir = hit
            if action is not None:
                return action
            if facing != face_dir:
                return face_dir
            faced = pos + lay.flat_deltas[face_dir]
            if faced in state.pots and state.pots[faced][1] > 0:
                return STAY  # at a cooking pot: wait for the timer, don't poke it
            return INTERACT
    return _random_walk(lay, pos, partner_pos, rng)


def _mission_targets(kind: ScriptKind, state: engine.GameState, held: int):
    """Cells the script wants to interact with right now, or None for fallback."""
    lay = state.layout
    k = kind
    if k in (ScriptKind.ONION_PLACEMENT_AND_DELIVERY,
             ScriptKind.TOMATO_PLACEMENT_AND_DELIVERY):
        # Placement duty for the first half of the episode, delivery after.
        if state.tick < lay.episode_length // 2:
            k = (ScriptKind.ONION_PLACEMENT
                 if k == ScriptKind.ONION_PLACEMENT_AND_DELIVERY
                 else ScriptKind.TOMATO_PLACEMENT)
        else:
            if held in (ONION, TOMATO):
                return _empty_counters(state, lay.counter_cells) or None
            k = ScriptKind.DELIVERY

    if k == ScriptKind.ONION_EVERYWHERE:
        return _fetch_then(state, held, ONION, ONION_SOURCE,
                           lambda: _empty_counters(state, lay.counter_cells))
    if k == ScriptKind.TOMATO_EVERYWHERE:
        return _fetch_then(state, held, TOMATO, TOMATO_SOURCE,
                           lambda: _empty_counters(state, lay.counter_cells))
    if k == ScriptKind.DISH_EVERYWHERE:
        return _fetch_then(state, held, DISH, DISH_SOURCE,
                           lambda: _empty_counters(state, lay.counter_cells))
    if k == ScriptKind.ONION_TO_MIDDLE_COUNTER:
        return _fetch_then(state, held, ONION, ONION_SOURCE,
                           lambda: _empty_counters(state, lay.middle_counter_cells()))
    if k == ScriptKind.ONION_PLACEMENT:
        return _fetch_then(state, held, ONION, ONION_SOURCE,
                           lambda: _accepting_pots(state))
    if k == ScriptKind.TOMATO_PLACEMENT:
        return _fetch_then(state, held, TOMATO, TOMATO_SOURCE,
                           lambda: _accepting_pots(state))
    if k == ScriptKind.DELIVERY:
        if is_soup(held):
            return lay.serve_cells
        ready = _ready_pots(state)
        cooking = _cooking_pots(state)
        if held == DISH:
            if ready:
                return ready
            if cooking:
                return cooking  # walk over and wait for the timer
            return None
        if held == EMPTY and (ready or cooking):
            return _dispensers(lay, DISH_SOURCE)
        return None
    raise ValueError(f"unhandled script kind {kind}")


def _fetch_then(state, held, item, source_tile, targets_when_holding):
    if held == item:
        targets = targets_when_holding()
        return targets or None
    if held == EMPTY:
        return _dispensers(state.layout, source_tile)
    return None  # holding something off-mission; wander rather than misuse it


def _dispensers(layout: engine.Layout, tile: int):
    cells = tuple(i for i, t in enumerate(layout.tiles) if t == tile)
    return cells or None


def _empty_counters(state: engine.GameState, counter_cells):
    return tuple(c for c in counter_cells if c not in state.counters)


def _accepting_pots(state: engine.GameState):
    out = []
    for cell, (contents, cook) in state.pots.items():
        if cook == POT_IDLE and ((contents >> 2) + (contents & 3)) < 3:
            out.append(cell)
    return tuple(out)


def _ready_pots(state: engine.GameState):
    return tuple(cell for cell, (_, cook) in state.pots.items() if cook == POT_READY)


def _cooking_pots(state: engine.GameState):
    return tuple(cell for cell, (_, cook) in state.pots.items() if cook > 0)


def _random_walk(layout: engine.Layout, pos: int, partner_pos: int,
                 rng: random.Random) -> int:
    options = []
    for d in (UP, DOWN, LEFT, RIGHT):
        nxt = pos + layout.flat_deltas[d]
        if layout.floor[nxt] and nxt != partner_pos:
            options.append(d)
    if not options:
        return STAY
    return options[rng.randrange(len(options))]


def event_profile(kind: ScriptKind | str, layout: engine.Layout, partner,
                  episodes: int, seed: int = 0):
    """Mean episode event counts of the script paired with ``partner``."""
    from coopchef import pool

    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    script = ScriptedPolicy(kind, seed)
    partner_id = getattr(partner, "policy_id", "partner")
    return pool.expected_event_count(
        script, partner, layout, episodes, seed=seed,
        policy_id=script.policy_id, partner_id=partner_id,
    )
