"""Event-based linear rewards, weight-grid sampling, and shaping schedules.

A hidden reward scores a joint step as a dot product between the step's
event-count vector and a per-event weight vector, plus the task reward scaled
by a multiplier. Weight vectors are drawn by independent uniform choice from
small per-event candidate grids, which is how the biased-partner random
search explores the behavior space. Shaping schedules add annealed bonuses
for named events during policy training.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np
import yaml

from coopchef import engine


class DimensionMismatchError(ValueError):
    """Event vector length disagrees with the weight vector."""


class EmptyCandidateSetError(ValueError):
    """A weight grid has an event with no candidate values."""


@dataclass(frozen=True)
class WeightVector:
    """Per-event weights plus a task-reward multiplier, for one layout."""

    event_names: tuple[str, ...]
    weights: tuple[float, ...]
    multiplier: float
    c_max: float

    def __post_init__(self):
        if len(self.weights) != len(self.event_names):
            raise DimensionMismatchError(
                f"{len(self.weights)} weights for {len(self.event_names)} events"
            )
        for w in self.weights:
            if abs(w) > self.c_max + 1e-12:
                raise ValueError(f"weight {w} exceeds bound {self.c_max}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)

    def to_dict(self) -> dict:
        return {
            "weights": {n: w for n, w in zip(self.event_names, self.weights) if w != 0},
            "multiplier": self.multiplier,
        }

    @staticmethod
    def from_dict(d: dict, event_names: tuple[str, ...]) -> "WeightVector":
        by_name = d.get("weights", {})
        unknown = set(by_name) - set(event_names)
        if unknown:
            raise DimensionMismatchError(f"weights for unknown events: {sorted(unknown)}")
        weights = tuple(float(by_name.get(n, 0.0)) for n in event_names)
        c_max = max((abs(w) for w in weights), default=0.0) or 1.0
        return WeightVector(event_names, weights, float(d.get("multiplier", 0.0)), c_max)


def hidden_reward(events, task_reward: float, w: WeightVector) -> float:
    """Scalar hidden reward for one step (or, by linearity, a whole episode)."""
    if len(events) != len(w.weights):
        raise DimensionMismatchError(
            f"event vector of length {len(events)}, weights of length {len(w.weights)}"
        )
    total = 0.0
    for c, wk in zip(events, w.weights):
        if c:
            total += c * wk
    return total + w.multiplier * task_reward


@dataclass(frozen=True)
class WeightGrid:
    """Candidate weight values per event, plus multiplier candidates."""

    event_names: tuple[str, ...]
    candidates: tuple[tuple[float, ...], ...]
    multiplier_candidates: tuple[float, ...]

    def __post_init__(self):
        if len(self.candidates) != len(self.event_names):
            raise DimensionMismatchError(
                f"{len(self.candidates)} candidate sets for {len(self.event_names)} events"
            )
        for name, cands in zip(self.event_names, self.candidates):
            if not cands:
                raise EmptyCandidateSetError(f"no candidates for event {name!r}")
        if not self.multiplier_candidates:
            raise EmptyCandidateSetError("no multiplier candidates")

    @property
    def c_max(self) -> float:
        """Largest candidate magnitude; the implied weight bound (read-only)."""
        return max(max(abs(v) for v in cands) for cands in self.candidates) or 1.0


def sample_weight_vector(grid: WeightGrid, seed: int) -> WeightVector:
    """Draw each coordinate independently and uniformly from its candidate set."""
    rng = random.Random(seed)
    weights = tuple(cands[rng.randrange(len(cands))] for cands in grid.candidates)
    mult = grid.multiplier_candidates[rng.randrange(len(grid.multiplier_candidates))]
    return WeightVector(grid.event_names, weights, mult, grid.c_max)


@dataclass(frozen=True)
class ShapingSchedule:
    """Annealed per-event bonus rewards for training.

    The factor interpolates linearly from 1 at step 0 down to ``end_factor``
    at ``horizon`` and stays there.
    """

    terms: tuple[tuple[str, float], ...]
    horizon: int
    end_factor: float = 0.0

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if not 0.0 <= self.end_factor <= 1.0:
            raise ValueError("end_factor must be in [0, 1]")

    def as_weights(self, event_names: tuple[str, ...]) -> np.ndarray:
        out = np.zeros(len(event_names), dtype=np.float64)
        index = {n: i for i, n in enumerate(event_names)}
        for name, value in self.terms:
            if name not in index:
                raise DimensionMismatchError(f"shaping term for unknown event {name!r}")
            out[index[name]] += value
        return out


def shaping_factor(t: int, sched: ShapingSchedule) -> float:
    if t < 0:
        raise ValueError("t must be >= 0")
    if t >= sched.horizon:
        return sched.end_factor
    return 1.0 + (sched.end_factor - 1.0) * (t / sched.horizon)


def shaped_bonus(events, t: int, sched: ShapingSchedule,
                 event_names: tuple[str, ...]) -> float:
    """Annealed shaping bonus for one step's events."""
    factor = shaping_factor(t, sched)
    if factor == 0.0:
        return 0.0
    index = {n: i for i, n in enumerate(event_names)}
    total = 0.0
    for name, value in sched.terms:
        k = index.get(name)
        if k is not None and events[k]:
            total += events[k] * value
    return factor * total


# Config plumbing. Layouts are assigned to named groups; each group pins a
# weight grid and a pair of shaping stages.

_DEFAULT_GRIDS = None
_DEFAULT_SHAPING = None


def _load_yaml(fname: str) -> dict:
    from importlib import resources

    ref = resources.files("coopchef") / "configs" / fname
    return yaml.safe_load(ref.read_text(encoding="utf-8"))


def _grid_config() -> dict:
    global _DEFAULT_GRIDS
    if _DEFAULT_GRIDS is None:
        _DEFAULT_GRIDS = _load_yaml("weight_grids.yaml")
    return _DEFAULT_GRIDS


def _shaping_config() -> dict:
    global _DEFAULT_SHAPING
    if _DEFAULT_SHAPING is None:
        _DEFAULT_SHAPING = _load_yaml("shaping.yaml")
    return _DEFAULT_SHAPING


def _group_for(layout_name: str, config: dict) -> str:
    group = config["layouts"].get(layout_name, config.get("default_group"))
    if group is None or group not in config["groups"]:
        raise KeyError(f"no config group for layout {layout_name!r}")
    return group


def grid_from_mapping(layout: engine.Layout, events: dict[str, list[float]],
                      multiplier: list[float]) -> WeightGrid:
    """Build a grid for a layout; events absent from the mapping pin to 0."""
    unknown = set(events) - set(layout.event_names)
    if unknown:
        raise DimensionMismatchError(
            f"grid names unknown events for layout {layout.name!r}: {sorted(unknown)}"
        )
    candidates = tuple(
        tuple(float(v) for v in events.get(name, [0.0])) for name in layout.event_names
    )
    return WeightGrid(layout.event_names, candidates, tuple(float(v) for v in multiplier))


def default_weight_grid(layout: engine.Layout, config: dict | None = None) -> WeightGrid:
    """The bundled random-search grid for a layout."""
    config = config or _grid_config()
    group = config["groups"][_group_for(layout.name, config)]
    return grid_from_mapping(layout, group["events"], group["multiplier"])


def default_shaping(layout: engine.Layout, stage: int, horizon: int,
                    config: dict | None = None) -> ShapingSchedule:
    """The bundled shaping schedule for a layout and training stage (1 or 2)."""
    if stage not in (1, 2):
        raise ValueError("stage must be 1 or 2")
    config = config or _shaping_config()
    group = config["groups"][_group_for(layout.name, config)]
    terms = group[f"stage{stage}"] or {}
    unknown = set(terms) - set(layout.event_names)
    if unknown:
        raise DimensionMismatchError(
            f"shaping names unknown events for layout {layout.name!r}: {sorted(unknown)}"
        )
    return ShapingSchedule(
        terms=tuple((k, float(v)) for k, v in sorted(terms.items())),
        horizon=horizon,
        end_factor=float(group.get("end_factor", 0.0)),
    )
