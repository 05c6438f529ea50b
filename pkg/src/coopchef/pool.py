"""Behavioral fingerprints and diversity-driven pool assembly.

A policy's fingerprint is its expected per-episode event-count vector.
Diversity of a candidate subset is the sum over unordered pairs of
normalized L1 fingerprint distances; a pool is filtered by greedily adding
whichever candidate raises that sum the most. The final training pool mixes
the filtered biased policies with an equal number of population-trained
checkpoints.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from coopchef import engine

logger = logging.getLogger(__name__)


class KOutOfRangeError(ValueError):
    pass


class SingletonSetError(ValueError):
    pass


class InsufficientCandidatesError(ValueError):
    pass


@dataclass(frozen=True)
class EventCount:
    """Mean per-episode event totals for one policy paired with one partner."""

    per_event: tuple[float, ...]
    policy_id: str
    partner_id: str
    episodes_averaged: int

    def __post_init__(self):
        if self.episodes_averaged < 1:
            raise ValueError("episodes_averaged must be >= 1")
        if any(v < 0 for v in self.per_event):
            raise ValueError("event counts cannot be negative")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.per_event, dtype=np.float64)


def expected_event_count(policy, partner, layout: engine.Layout, episodes: int,
                         seed: int = 0, policy_id: str = "policy",
                         partner_id: str = "partner") -> EventCount:
    """Average episode-summed event vectors over seeded rollouts of the pair.

    ``policy`` plays seat 0 and ``partner`` seat 1; both follow the
    (state, player_index) -> action callable contract (see policies module).
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    totals = np.zeros(layout.n_events)
    for ep in range(episodes):
        p0 = _reseeded(policy, seed + ep)
        p1 = _reseeded(partner, seed + ep)
        _, _, counts = engine.run_episode(layout, p0, p1, seed=seed + ep)
        totals += counts
    return EventCount(
        per_event=tuple(totals / episodes),
        policy_id=policy_id,
        partner_id=partner_id,
        episodes_averaged=episodes,
    )


def _reseeded(policy, seed: int):
    # Policy handles expose reseed() for per-episode determinism; bare
    # callables are used as-is.
    if hasattr(policy, "reseeded"):
        return policy.reseeded(seed)
    return policy


def normalization_constants(ecs: list[EventCount]) -> np.ndarray:
    """c_k = 1 / max_i EC_k^(i); 0 for events nobody ever triggers."""
    if not ecs:
        raise ValueError("need at least one event count")
    stacked = np.stack([ec.as_array() for ec in ecs])
    peaks = stacked.max(axis=0)
    out = np.zeros_like(peaks)
    np.divide(1.0, peaks, out=out, where=peaks > 0)
    return out


def event_diversity(indices, ecs: list[EventCount], c: np.ndarray) -> float:
    """Sum over unordered pairs in ``indices`` of c-weighted L1 distances."""
    idx = list(indices)
    total = 0.0
    for i in range(len(idx)):
        a = ecs[idx[i]].as_array()
        for j in range(i + 1, len(idx)):
            b = ecs[idx[j]].as_array()
            total += float((c * np.abs(a - b)).sum())
    return total


def greedy_select(ecs: list[EventCount], k: int, i0: int,
                  c: np.ndarray | None = None) -> list[int]:
    """Grow a subset from ``i0``, adding the best marginal-diversity candidate.

    Ties resolve to the smallest candidate index. Returns indices in
    selection order. ``c`` defaults to normalization over all of ``ecs``.
    """
    n = len(ecs)
    if not 1 <= k <= n:
        raise KOutOfRangeError(f"k={k} out of range for {n} candidates")
    if not 0 <= i0 < n:
        raise KOutOfRangeError(f"start index {i0} out of range for {n} candidates")
    if c is None:
        c = normalization_constants(ecs)
    arrays = [ec.as_array() for ec in ecs]
    selected = [i0]
    chosen = np.zeros(n, dtype=bool)
    chosen[i0] = True
    for _ in range(k - 1):
        # Adding candidate k changes the diversity by its summed distance to
        # the current set; recompute in sorted member order so the float
        # summation order is stable and reproducible.
        members = sorted(selected)
        gain = np.full(n, -np.inf)
        for i in range(n):
            if chosen[i]:
                continue
            total = 0.0
            for j in members:
                total += float((c * np.abs(arrays[i] - arrays[j])).sum())
            gain[i] = total
        best = int(np.argmax(gain))  # argmax takes the first max: smallest index
        selected.append(best)
        chosen[best] = True
    return selected


def event_diff(policy_id: str, ec_by_id: dict[str, EventCount],
               c: np.ndarray | None = None) -> float:
    """Distance from a policy to its nearest neighbor in a set.

    ``ec_by_id`` maps each member of the set (including ``policy_id``) to its
    fingerprint measured against a common reference partner.
    """
    if policy_id not in ec_by_id:
        raise KeyError(f"{policy_id!r} not in the set")
    if len(ec_by_id) < 2:
        raise SingletonSetError("need at least two members to compare")
    refs = {ec.partner_id for ec in ec_by_id.values()}
    if len(refs) > 1:
        raise ValueError(f"fingerprints use different reference partners: {sorted(refs)}")
    if c is None:
        c = normalization_constants(list(ec_by_id.values()))
    own = ec_by_id[policy_id].as_array()
    best = np.inf
    for other_id, ec in ec_by_id.items():
        if other_id == policy_id:
            continue
        d = float((c * np.abs(own - ec.as_array())).sum())
        best = min(best, d)
    return best


@dataclass(frozen=True)
class PoolMember:
    policy_id: str
    provenance: str  # "biased" or "mep_checkpoint"
    checkpoint_path: str
    weight_seed: int | None = None
    event_count: tuple[float, ...] | None = None


@dataclass(frozen=True)
class PoolSpec:
    """The stage-2 training pool: filtered biased + population checkpoints."""

    members: tuple[PoolMember, ...]
    layout_name: str
    start_index: int | None = None  # logged greedy seed draw

    def __post_init__(self):
        ids = [m.policy_id for m in self.members]
        if len(set(ids)) != len(ids):
            raise ValueError("pool member ids must be unique")

    def to_json(self) -> str:
        return json.dumps({
            "layout": self.layout_name,
            "start_index": self.start_index,
            "members": [
                {
                    "id": m.policy_id,
                    "provenance": m.provenance,
                    "checkpoint": m.checkpoint_path,
                    "weight_seed": m.weight_seed,
                    "event_count": list(m.event_count) if m.event_count else None,
                }
                for m in self.members
            ],
        }, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "PoolSpec":
        d = json.loads(text)
        members = tuple(
            PoolMember(
                policy_id=m["id"],
                provenance=m["provenance"],
                checkpoint_path=m["checkpoint"],
                weight_seed=m.get("weight_seed"),
                event_count=tuple(m["event_count"]) if m.get("event_count") else None,
            )
            for m in d["members"]
        )
        return PoolSpec(members=members, layout_name=d["layout"],
                        start_index=d.get("start_index"))


def assemble_mixed_pool(biased: list[PoolMember], biased_ecs: list[EventCount],
                      mep: list[PoolMember], k_total: int, layout_name: str,
                      seed: int = 0) -> PoolSpec:
    """Filter biased candidates greedily to half the pool, fill with MEP.

    The greedy start index is a seeded uniform draw over the biased
    candidates, recorded on the returned PoolSpec for replay.
    """
    if k_total % 2 != 0:
        raise ValueError("k_total must be even (half biased, half checkpoints)")
    half = k_total // 2
    if len(biased) < half:
        raise InsufficientCandidatesError(
            f"{len(biased)} biased candidates for {half} slots"
        )
    if len(mep) < half:
        raise InsufficientCandidatesError(
            f"{len(mep)} checkpoint candidates for {half} slots"
        )
    if len(biased) != len(biased_ecs):
        raise ValueError("one event count required per biased candidate")
    rng = np.random.default_rng(seed)
    i0 = int(rng.integers(len(biased)))
    order = greedy_select(biased_ecs, half, i0)
    logger.info("greedy pool filter: start=%d order=%s", i0, order)
    kept = [biased[i] for i in order]
    members = tuple(kept) + tuple(mep[:half])
    return PoolSpec(members=members, layout_name=layout_name, start_index=i0)
