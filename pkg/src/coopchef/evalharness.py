"""Cross-play evaluation, ranking statistics, and behavior counters.

Matchups run a policy pair over seeded episodes in a stated seating and
report reward mean/std plus the mean event fingerprint. Ranking records from
study sessions reduce to pairwise preference scores. Behavior counters
derive interpretable per-episode statistics (wrong/correct tomato
placements, middle-pot pickups, counter passes) from logged events and their
provenance details.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

import numpy as np

from coopchef import engine, trajlog


class MissingAgentError(ValueError):
    pass


class UnknownLayoutError(ValueError):
    pass


@dataclass(frozen=True)
class MatchupResult:
    policy_a_id: str
    partner_id: str
    position: int  # seat of policy A: 1 or 2
    episodes: int
    mean_reward: float
    std_reward: float
    mean_event_count: tuple[float, ...]

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.std_reward < 0:
            raise ValueError("std must be >= 0")
        if self.position not in (1, 2):
            raise ValueError("position must be 1 or 2")


def crossplay(policy_a, partner, layout: engine.Layout, position: int,
              episodes: int, seed: int = 0) -> MatchupResult:
    """Seeded episodes with ``policy_a`` in seat ``position`` (1 or 2)."""
    if position not in (1, 2):
        raise ValueError("position must be 1 or 2")
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    rewards_seen = []
    totals = np.zeros(layout.n_events)
    for ep in range(episodes):
        a = _reseeded(policy_a, seed + ep)
        b = _reseeded(partner, seed + ep)
        p0, p1 = (a, b) if position == 1 else (b, a)
        _, reward, counts = engine.run_episode(layout, p0, p1, seed=seed + ep)
        rewards_seen.append(reward)
        totals += counts
    mean = statistics.fmean(rewards_seen)
    std = statistics.pstdev(rewards_seen) if episodes > 1 else 0.0
    return MatchupResult(
        policy_a_id=getattr(policy_a, "policy_id", "policy"),
        partner_id=getattr(partner, "policy_id", "partner"),
        position=position,
        episodes=episodes,
        mean_reward=mean,
        std_reward=std,
        mean_event_count=tuple(totals / episodes),
    )


def crossplay_both_seats(policy_a, partner, layout: engine.Layout,
                         episodes: int, seed: int = 0) -> list[MatchupResult]:
    return [
        crossplay(policy_a, partner, layout, 1, episodes, seed),
        crossplay(policy_a, partner, layout, 2, episodes, seed),
    ]


def _reseeded(policy, seed: int):
    if hasattr(policy, "reseeded"):
        return policy.reseeded(seed)
    return policy


def format_matchup_table(results: list[MatchupResult],
                         bold_within: float | None = 5.0,
                         bold_mode: str = "threshold") -> str:
    """Tab-separated matchup table; the best row and near-ties get a marker.

    ``bold_mode='threshold'`` marks rows within ``bold_within`` reward of the
    best mean; ``'std'`` marks rows within ``bold_within`` of the best row's
    standard deviations. The marker is informational only.
    """
    if not results:
        return "policy\tpartner\tseat\tepisodes\tmean\tstd\tbest\n"
    best = max(r.mean_reward for r in results)
    best_std = max((r.std_reward for r in results if r.mean_reward == best), default=0.0)
    lines = ["policy\tpartner\tseat\tepisodes\tmean\tstd\tbest"]
    for r in results:
        if bold_within is None:
            flag = ""
        elif bold_mode == "threshold":
            flag = "*" if best - r.mean_reward <= bold_within else ""
        elif bold_mode == "std":
            flag = "*" if best - r.mean_reward <= bold_within * best_std else ""
        else:
            raise ValueError(f"unknown bold_mode {bold_mode!r}")
        lines.append(f"{r.policy_a_id}\t{r.partner_id}\t{r.position}\t"
                     f"{r.episodes}\t{r.mean_reward:.2f}\t{r.std_reward:.2f}\t{flag}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RankingRecord:
    """One participant's strict ordering of agent ids, best first."""

    participant_id: str
    layout_name: str
    ranking: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.ranking)) != len(self.ranking):
            raise ValueError("ranking must not repeat agents")


def preference_score(records: list[RankingRecord], agent_a: str, agent_b: str) -> float:
    """(how many rank A above B - how many rank B above A) / N."""
    if not records:
        raise ValueError("no ranking records")
    n_a = n_b = 0
    for rec in records:
        if agent_a not in rec.ranking or agent_b not in rec.ranking:
            raise MissingAgentError(
                f"record {rec.participant_id!r} does not rank both "
                f"{agent_a!r} and {agent_b!r}"
            )
        if rec.ranking.index(agent_a) < rec.ranking.index(agent_b):
            n_a += 1
        else:
            n_b += 1
    return (n_a - n_b) / len(records)


@dataclass(frozen=True)
class BehaviorStats:
    """Per-episode behavior averages recovered from trajectory logs."""

    episodes: int
    wrong_placements: float
    correct_placements: float
    middle_pot_pickups: float | None  # None when the layout has < 3 pots
    counter_onion_passes: float


def behavior_stats(records: list[trajlog.TrajectoryRecord],
                   layout: engine.Layout | None = None,
                   require_middle_pot: bool = False) -> BehaviorStats:
    """Aggregate interpretable counters across logged episodes.

    Wrong placement: an ingredient into a pot already holding at least one
    tomato such that no order can use the mix any more. Correct placement: a
    tomato placed so a tomato-using order stays achievable. Middle-pot
    pickups: soups taken from the pot between the outer pots (layouts with at
    least 3 pots). Counter passes: an onion put on a counter by one player
    and picked up by the other.
    """
    if not records:
        raise ValueError("no trajectories")
    lay = layout or records[0].layout
    eidx = lay.event_index
    cat = eidx["catastrophic_placement"]
    opt_tomato = eidx.get("optimal_tomato_placement")
    soup_from_pot = eidx["pickup_soup_from_pot"]
    put_onion = eidx["put_onion_on_counter"]
    pick_onion = eidx["pickup_onion_from_counter"]
    try:
        middle_pot = lay.middle_pot_cell()
    except engine.LayoutError:
        if require_middle_pot:
            raise UnknownLayoutError(
                f"layout {lay.name!r} has no middle pot to count"
            ) from None
        middle_pot = None

    wrong = correct = middle = passes = 0
    for rec in records:
        counter_owner: dict[int, int] = {}
        for row in rec.rows:
            for k, player, cell in row.get("det", []):
                if k == cat:
                    wrong += 1
                elif opt_tomato is not None and k == opt_tomato:
                    correct += 1
                elif k == soup_from_pot and middle_pot is not None and cell == middle_pot:
                    middle += 1
                elif k == put_onion:
                    counter_owner[cell] = player
                elif k == pick_onion:
                    owner = counter_owner.pop(cell, None)
                    if owner is not None and owner != player:
                        passes += 1
    n = len(records)
    return BehaviorStats(
        episodes=n,
        wrong_placements=wrong / n,
        correct_placements=correct / n,
        middle_pot_pickups=(middle / n) if middle_pot is not None else None,
        counter_onion_passes=passes / n,
    )
