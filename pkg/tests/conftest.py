"""Shared fixtures: small lab layouts and crafted-state helpers."""

import pytest

from coopchef import engine

# A compact kitchen with one of everything and a single onion order; mixed
# placements are catastrophic here, which makes every placement category
# reachable in one move.
ONION_LAB = """\
XXXXXXX
XO P TX
X1   2X
XD S XX
XXXXXXX

ingredients=O3 cook=2 reward=20
episode_length=50
"""

# Same floor plan, but with onion and tomato orders plus the extra tomato
# events switched on.
TOMATO_LAB = """\
XXXXXXX
XO P TX
X1   2X
XD S XX
XXXXXXX

ingredients=O3 cook=2 reward=20
ingredients=T3 cook=2 reward=20
episode_length=50
extra_tomato_events=true
"""


@pytest.fixture(scope="session")
def onion_lab():
    return engine.parse_layout(ONION_LAB, name="onion_lab")


@pytest.fixture(scope="session")
def tomato_lab():
    return engine.parse_layout(TOMATO_LAB, name="tomato_lab")


def craft(layout, p0=None, p1=None, counters=None, pots=None, tick=0):
    """A GameState with explicit player tuples (pos, dir, held) and contents.

    Unspecified fields fall back to the reset state. Pot cells not listed
    stay empty and idle.
    """
    base = engine.reset(layout)
    full_pots = dict(base.pots)
    if pots:
        full_pots.update(pots)
    p0 = p0 or (base.p0_pos, base.p0_dir, base.p0_held)
    p1 = p1 or (base.p1_pos, base.p1_dir, base.p1_held)
    return engine.GameState(
        layout,
        p0[0], p0[1], p0[2],
        p1[0], p1[1], p1[2],
        dict(counters or {}), full_pots, {}, tick, 0,
    )


def fired(layout, outcome):
    """Names of the events that fired in a StepOutcome, with counts."""
    return {
        layout.event_names[i]: c
        for i, c in enumerate(outcome.events)
        if c
    }
