"""Deterministic two-player cooperative kitchen gridworld.

Two chefs move on a tile grid, fetch ingredients from dispensers, fill pots,
wait for soups to cook (cooking starts automatically on the third ingredient),
plate ready soups with a dish and deliver them to a serving tile for points.
Every step emits an integer event vector counting the discrete game events
that fired this tick (pickups, placements, deliveries, ...), which downstream
code uses both for reward shaping and as a behavioral fingerprint.

The engine is pure: ``step`` computes a successor state from its inputs with
no hidden state or randomness, so identical (layout, seed, action sequence)
triples always reproduce bit-identical trajectories. Returned states must be
treated as immutable; ``step`` shares internal containers between states as a
copy-on-write optimization, and mutating a returned state corrupts others.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

# Tile codes.
FLOOR = 0
COUNTER = 1
ONION_SOURCE = 2
TOMATO_SOURCE = 3
DISH_SOURCE = 4
POT = 5
SERVE = 6

TILE_CHARS = {
    "X": COUNTER,
    "O": ONION_SOURCE,
    "T": TOMATO_SOURCE,
    "D": DISH_SOURCE,
    "P": POT,
    "S": SERVE,
    " ": FLOOR,
}
CHAR_FOR_TILE = {v: k for k, v in TILE_CHARS.items()}

# Item codes. Soups encode their contents directly so any held or countered
# item fits in one int.
EMPTY = 0
ONION = 1
TOMATO = 2
DISH = 3
_SOUP_BASE = 16


def make_soup(onions: int, tomatoes: int) -> int:
    return _SOUP_BASE + (onions << 2) + tomatoes


def is_soup(item: int) -> bool:
    return item >= _SOUP_BASE


def soup_contents(item: int) -> tuple[int, int]:
    """(onions, tomatoes) inside a soup item."""
    v = item - _SOUP_BASE
    return v >> 2, v & 3


# Pot cook state. IDLE until the third ingredient lands, then a countdown,
# then READY (0) until someone plates the soup.
POT_IDLE = -1
POT_READY = 0

# Actions.
UP = 0
DOWN = 1
LEFT = 2
RIGHT = 3
STAY = 4
INTERACT = 5
N_ACTIONS = 6
ACTION_NAMES = ("up", "down", "left", "right", "stay", "interact")
ACTION_INDEX = {name: i for i, name in enumerate(ACTION_NAMES)}
# (dx, dy) per facing/action direction, y grows downward.
DELTAS = ((0, -1), (0, 1), (-1, 0), (1, 0))

BASE_EVENT_NAMES = (
    "put_onion_on_counter",
    "put_tomato_on_counter",
    "put_dish_on_counter",
    "put_soup_on_counter",
    "pickup_onion_from_counter",
    "pickup_tomato_from_counter",
    "pickup_dish_from_counter",
    "pickup_soup_from_counter",
    "pickup_onion_from_dispenser",
    "pickup_tomato_from_dispenser",
    "pickup_dish_from_dispenser",
    "pickup_soup_from_pot",
    "place_onion_in_pot",
    "place_tomato_in_pot",
    "viable_placement",
    "optimal_placement",
    "catastrophic_placement",
    "useless_placement",
    "useful_dish_pickup",
    "delivery",
)

# Extra events some layouts enable for reward shaping around tomato handling.
TOMATO_EXTRA_EVENT_NAMES = (
    "place_tomato_in_empty_pot",
    "optimal_tomato_placement",
    "useful_tomato_pickup",
)


class LayoutError(ValueError):
    """Raised when a layout file cannot be validated."""


class RaggedGridError(LayoutError):
    pass


class UnknownCharError(LayoutError):
    pass


class MissingStartError(LayoutError):
    pass


class NoPotError(LayoutError):
    pass


class SteppedAfterDoneError(RuntimeError):
    """step() called on a finished episode."""


@dataclass(frozen=True)
class Recipe:
    """A deliverable order: exactly three ingredients, a cook time, a payout."""

    onions: int
    tomatoes: int
    cook_ticks: int
    reward: int

    def __post_init__(self):
        if self.onions + self.tomatoes != 3:
            raise LayoutError(f"recipe must total 3 ingredients, got {self}")
        if self.cook_ticks <= 0:
            raise LayoutError(f"recipe cook_ticks must be positive, got {self}")
        if self.reward < 0:
            raise LayoutError(f"recipe reward must be >= 0, got {self}")

    @property
    def contents_code(self) -> int:
        return (self.onions << 2) + self.tomatoes


class Layout:
    """Validated static description of a kitchen, plus derived lookup tables.

    Construct via :func:`parse_layout`; instances are immutable in practice.
    Cell positions are flat indices ``y * width + x``.
    """

    __slots__ = (
        "name",
        "text",
        "width",
        "height",
        "tiles",
        "floor",
        "starts",
        "orders",
        "episode_length",
        "extra_tomato_events",
        "event_names",
        "event_index",
        "n_events",
        "zero_events",
        "pot_cells",
        "counter_cells",
        "serve_cells",
        "max_cook_ticks",
        "achievable_reward",
        "cook_ticks_for",
        "flat_deltas",
        "_obs_static",
    )

    def __init__(
        self,
        name: str,
        text: str,
        width: int,
        height: int,
        tiles: tuple[int, ...],
        starts: tuple[int, int],
        orders: tuple[Recipe, ...],
        episode_length: int,
        extra_tomato_events: bool,
    ):
        self.name = name
        self.text = text
        self.width = width
        self.height = height
        self.tiles = tiles
        self.floor = tuple(t == FLOOR for t in tiles)
        self.starts = starts
        self.orders = orders
        self.episode_length = episode_length
        self.extra_tomato_events = extra_tomato_events
        names = BASE_EVENT_NAMES + (TOMATO_EXTRA_EVENT_NAMES if extra_tomato_events else ())
        self.event_names = names
        self.event_index = {n: i for i, n in enumerate(names)}
        self.n_events = len(names)
        self.zero_events = (0,) * len(names)
        self.pot_cells = tuple(i for i, t in enumerate(tiles) if t == POT)
        self.counter_cells = tuple(i for i, t in enumerate(tiles) if t == COUNTER)
        self.serve_cells = tuple(i for i, t in enumerate(tiles) if t == SERVE)
        self.max_cook_ticks = max(r.cook_ticks for r in orders)
        # Best order reward still reachable from a pot holding (onions, tomatoes);
        # indexed by contents code, 0 when no order can absorb the contents.
        table = [0] * 16
        cook = [self.max_cook_ticks] * 16
        for on in range(4):
            for to in range(4 - on):
                code = (on << 2) + to
                best = 0
                for r in orders:
                    if r.onions >= on and r.tomatoes >= to and r.reward > best:
                        best = r.reward
                table[code] = best
                for r in orders:
                    if r.onions == on and r.tomatoes == to:
                        cook[code] = r.cook_ticks
                        break
        self.achievable_reward = tuple(table)
        self.cook_ticks_for = tuple(cook)
        self.flat_deltas = (-width, width, -1, 1)
        self._obs_static = None

    def pos(self, x: int, y: int) -> int:
        return y * self.width + x

    def xy(self, pos: int) -> tuple[int, int]:
        return pos % self.width, pos // self.width

    def delivery_reward(self, soup_item: int) -> int:
        """Reward for delivering a soup: exact recipe match or nothing."""
        on, to = soup_contents(soup_item)
        for r in self.orders:
            if r.onions == on and r.tomatoes == to:
                return r.reward
        return 0

    def middle_counter_cells(self) -> tuple[int, ...]:
        """Counter cells not on the grid boundary (the pass-through counters)."""
        w, h = self.width, self.height
        out = []
        for c in self.counter_cells:
            x, y = c % w, c // w
            if 0 < x < w - 1 and 0 < y < h - 1:
                out.append(c)
        return tuple(out)

    def middle_pot_cell(self) -> int:
        """The pot between other pots; defined for layouts with >= 3 pots."""
        if len(self.pot_cells) < 3:
            raise LayoutError(f"layout {self.name!r} has no middle pot")
        cells = sorted(self.pot_cells, key=lambda c: (c % self.width, c // self.width))
        return cells[len(cells) // 2]


def _parse_order_line(line: str, lineno: int) -> Recipe:
    parts = line.split()
    fields = {}
    for part in parts:
        if "=" not in part:
            raise LayoutError(f"line {lineno}: malformed order field {part!r}")
        k, v = part.split("=", 1)
        fields[k] = v
    try:
        spec = fields["ingredients"]
        cook = int(fields["cook"])
        reward = int(fields["reward"])
    except KeyError as e:
        raise LayoutError(f"line {lineno}: order missing field {e.args[0]}") from None
    onions = tomatoes = 0
    i = 0
    while i < len(spec):
        kind = spec[i]
        j = i + 1
        while j < len(spec) and spec[j].isdigit():
            j += 1
        if j == i + 1:
            raise LayoutError(f"line {lineno}: bad ingredient spec {spec!r}")
        count = int(spec[i + 1 : j])
        if kind == "O":
            onions += count
        elif kind == "T":
            tomatoes += count
        else:
            raise LayoutError(f"line {lineno}: unknown ingredient {kind!r} in {spec!r}")
        i = j
    return Recipe(onions=onions, tomatoes=tomatoes, cook_ticks=cook, reward=reward)


def parse_layout(text: str, name: str = "unnamed") -> Layout:
    """Parse and validate a layout file.

    Format: an ASCII grid block (X counter, O/T/D dispensers, P pot, S serving,
    space floor, 1/2 start markers), a blank line, one order per line as
    ``ingredients=O3 cook=20 reward=20``, an ``episode_length=400`` line, and
    optional ``key=value`` flags (``extra_tomato_events=true``).
    """
    raw_lines = text.split("\n")
    # Grid block runs until the first blank line.
    grid_rows: list[str] = []
    i = 0
    while i < len(raw_lines) and raw_lines[i].strip("\r") != "":
        grid_rows.append(raw_lines[i].rstrip("\r"))
        i += 1
    if not grid_rows:
        raise LayoutError("empty layout: no grid block")
    width = len(grid_rows[0])
    height = len(grid_rows)
    tiles: list[int] = []
    starts: dict[str, int] = {}
    for y, row in enumerate(grid_rows):
        if len(row) != width:
            raise RaggedGridError(
                f"row {y} has length {len(row)}, expected {width} (first row)"
            )
        for x, ch in enumerate(row):
            if ch in ("1", "2"):
                if ch in starts:
                    raise LayoutError(f"duplicate start marker {ch!r} at ({x},{y})")
                starts[ch] = y * width + x
                tiles.append(FLOOR)
            elif ch in TILE_CHARS:
                tiles.append(TILE_CHARS[ch])
            else:
                raise UnknownCharError(f"unknown tile char {ch!r} at ({x},{y})")
    for marker in ("1", "2"):
        if marker not in starts:
            raise MissingStartError(f"missing start marker {marker!r}")
    # Footer: orders, episode_length, flags.
    orders: list[Recipe] = []
    episode_length = None
    flags: dict[str, str] = {}
    for lineno in range(i, len(raw_lines)):
        line = raw_lines[lineno].strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("ingredients="):
            orders.append(_parse_order_line(line, lineno + 1))
        elif "=" in line:
            k, v = line.split("=", 1)
            flags[k.strip()] = v.strip()
        else:
            raise LayoutError(f"line {lineno + 1}: unparseable footer line {line!r}")
    if "episode_length" not in flags:
        raise LayoutError("missing episode_length line")
    episode_length = int(flags.pop("episode_length"))
    if episode_length <= 0:
        raise LayoutError("episode_length must be positive")
    extra_tomato = flags.pop("extra_tomato_events", "false").lower() in ("true", "1", "yes")
    name = flags.pop("name", name)
    if flags:
        raise LayoutError(f"unknown footer flags: {sorted(flags)}")
    if not orders:
        raise LayoutError("layout declares no orders")
    seen = set()
    for r in orders:
        if r.contents_code in seen:
            raise LayoutError(f"duplicate order for ingredients {r.onions}xO {r.tomatoes}xT")
        seen.add(r.contents_code)

    if not any(t == POT for t in tiles):
        raise NoPotError("layout has no pot tile")
    if not any(t == SERVE for t in tiles):
        raise LayoutError("layout has no serving tile")
    if not any(t in (ONION_SOURCE, TOMATO_SOURCE, DISH_SOURCE) for t in tiles):
        raise LayoutError("layout has no dispenser tile")
    for x in range(width):
        for y in (0, height - 1):
            if tiles[y * width + x] == FLOOR:
                raise LayoutError(f"boundary cell ({x},{y}) is floor")
    for y in range(height):
        for x in (0, width - 1):
            if tiles[y * width + x] == FLOOR:
                raise LayoutError(f"boundary cell ({x},{y}) is floor")
    return Layout(
        name=name,
        text=text,
        width=width,
        height=height,
        tiles=tuple(tiles),
        starts=(starts["1"], starts["2"]),
        orders=tuple(orders),
        episode_length=episode_length,
        extra_tomato_events=extra_tomato,
    )


def load_layout(name_or_path: str) -> Layout:
    """Load a layout by bundled name (``coordination_ring``) or file path."""
    if name_or_path.endswith(".layout") or "/" in name_or_path:
        with open(name_or_path, "r", encoding="utf-8") as f:
            text = f.read()
        name = name_or_path.rsplit("/", 1)[-1].removesuffix(".layout")
        return parse_layout(text, name=name)
    ref = resources.files("coopchef") / "layouts" / f"{name_or_path}.layout"
    if not ref.is_file():
        raise LayoutError(
            f"unknown layout {name_or_path!r}; bundled layouts: {list_layouts()}"
        )
    return parse_layout(ref.read_text(encoding="utf-8"), name=name_or_path)


def list_layouts() -> list[str]:
    """Names of the layouts bundled with the package."""
    root = resources.files("coopchef") / "layouts"
    return sorted(
        p.name.removesuffix(".layout") for p in root.iterdir() if p.name.endswith(".layout")
    )


class GameState:
    """Complete world snapshot; value semantics, do not mutate in place.

    ``counters`` maps flat cell -> item code for occupied counter cells only.
    ``pots`` maps flat cell -> (contents code, cook state) for every pot.
    ``placed_by`` maps occupied counter cell -> player index that put the item
    there (item provenance for pass-detection metrics).
    """

    __slots__ = (
        "layout",
        "p0_pos",
        "p0_dir",
        "p0_held",
        "p1_pos",
        "p1_dir",
        "p1_held",
        "counters",
        "pots",
        "placed_by",
        "tick",
        "total_reward",
    )

    def __init__(self, layout, p0_pos, p0_dir, p0_held, p1_pos, p1_dir, p1_held,
                 counters, pots, placed_by, tick, total_reward):
        self.layout = layout
        self.p0_pos = p0_pos
        self.p0_dir = p0_dir
        self.p0_held = p0_held
        self.p1_pos = p1_pos
        self.p1_dir = p1_dir
        self.p1_held = p1_held
        self.counters = counters
        self.pots = pots
        self.placed_by = placed_by
        self.tick = tick
        self.total_reward = total_reward

    def player(self, i: int) -> tuple[int, int, int]:
        """(flat position, facing, held item) for player i."""
        if i == 0:
            return self.p0_pos, self.p0_dir, self.p0_held
        return self.p1_pos, self.p1_dir, self.p1_held

    @property
    def done(self) -> bool:
        return self.tick >= self.layout.episode_length

    def key(self) -> tuple:
        """Hashable identity of the dynamic state (layout excluded)."""
        return (
            self.p0_pos, self.p0_dir, self.p0_held,
            self.p1_pos, self.p1_dir, self.p1_held,
            tuple(sorted(self.counters.items())),
            tuple(sorted(self.pots.items())),
            self.tick,
            self.total_reward,
        )

    def __eq__(self, other):
        return isinstance(other, GameState) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def copy(self) -> "GameState":
        return GameState(
            self.layout,
            self.p0_pos, self.p0_dir, self.p0_held,
            self.p1_pos, self.p1_dir, self.p1_held,
            dict(self.counters), dict(self.pots), dict(self.placed_by),
            self.tick, self.total_reward,
        )


def reset(layout: Layout, seed: int = 0) -> GameState:
    """Fresh episode state: players on their start tiles, empty pots and hands.

    The seed is accepted for interface stability (and is recorded by loggers);
    initial placement is currently fully determined by the layout.
    """
    del seed
    pots = {c: (0, POT_IDLE) for c in layout.pot_cells}
    return GameState(
        layout,
        layout.starts[0], DOWN, EMPTY,
        layout.starts[1], DOWN, EMPTY,
        {}, pots, {}, 0, 0,
    )


class StepOutcome:
    """Result of one tick: successor state, points scored, events fired."""

    __slots__ = ("state", "reward", "events", "done", "details")

    def __init__(self, state, reward, events, done, details):
        self.state = state
        self.reward = reward
        self.events = events
        self.done = done
        self.details = details  # tuple of (event index, player, cell)


def _count_dishes_on_counters(counters) -> int:
    n = 0
    for item in counters.values():
        if item == DISH:
            n += 1
    return n


def step(state: GameState, a0: int, a1: int) -> StepOutcome:
    """Advance one tick with both players' actions.

    Movement first (simultaneous, with stand-offs on conflicts), then
    interactions, then pot cook timers. Raises SteppedAfterDoneError past the
    episode end.
    """
    lay = state.layout
    if state.tick >= lay.episode_length:
        raise SteppedAfterDoneError(f"episode ended at tick {state.tick}")
    floor = lay.floor
    deltas = lay.flat_deltas

    p0_pos, p0_dir, p0_held = state.p0_pos, state.p0_dir, state.p0_held
    p1_pos, p1_dir, p1_held = state.p1_pos, state.p1_dir, state.p1_held

    # Movement: turning always succeeds, the move itself may be blocked.
    if a0 < STAY:
        p0_dir = a0
        t = p0_pos + deltas[a0]
        d0 = t if floor[t] else p0_pos
    else:
        d0 = p0_pos
    if a1 < STAY:
        p1_dir = a1
        t = p1_pos + deltas[a1]
        d1 = t if floor[t] else p1_pos
    else:
        d1 = p1_pos
    if d0 == d1 or (d0 == p1_pos and d1 == p0_pos):
        pass  # contested cell or swap: stand-off, nobody moves
    else:
        p0_pos, p1_pos = d0, d1

    counters = state.counters
    pots = state.pots
    placed_by = state.placed_by
    counters_copied = pots_copied = placed_copied = False
    events: list[int] | None = None
    details: list[tuple[int, int, int]] = []
    reward = 0
    eidx = lay.event_index

    if a0 == INTERACT or a1 == INTERACT:
        for pi in (0, 1):
            act = a0 if pi == 0 else a1
            if act != INTERACT:
                continue
            if pi == 0:
                pos, dirn, held = p0_pos, p0_dir, p0_held
            else:
                pos, dirn, held = p1_pos, p1_dir, p1_held
            face = pos + deltas[dirn]
            tile = lay.tiles[face]
            fired: list[str] = []

            if tile == COUNTER:
                cur = counters.get(face, EMPTY)
                if cur == EMPTY and held != EMPTY:
                    if not counters_copied:
                        counters = dict(counters)
                        counters_copied = True
                    if not placed_copied:
                        placed_by = dict(placed_by)
                        placed_copied = True
                    counters[face] = held
                    placed_by[face] = pi
                    if held == ONION:
                        fired.append("put_onion_on_counter")
                    elif held == TOMATO:
                        fired.append("put_tomato_on_counter")
                    elif held == DISH:
                        fired.append("put_dish_on_counter")
                    else:
                        fired.append("put_soup_on_counter")
                    held = EMPTY
                elif cur != EMPTY and held == EMPTY:
                    if not counters_copied:
                        counters = dict(counters)
                        counters_copied = True
                    if not placed_copied:
                        placed_by = dict(placed_by)
                        placed_copied = True
                    del counters[face]
                    placed_by.pop(face, None)
                    held = cur
                    if cur == ONION:
                        fired.append("pickup_onion_from_counter")
                    elif cur == TOMATO:
                        fired.append("pickup_tomato_from_counter")
                    elif cur == DISH:
                        fired.append("pickup_dish_from_counter")
                    else:
                        fired.append("pickup_soup_from_counter")
            elif tile == ONION_SOURCE:
                if held == EMPTY:
                    held = ONION
                    fired.append("pickup_onion_from_dispenser")
            elif tile == TOMATO_SOURCE:
                if held == EMPTY:
                    held = TOMATO
                    fired.append("pickup_tomato_from_dispenser")
                    if lay.extra_tomato_events:
                        partner_held = p1_held if pi == 0 else p0_held
                        if partner_held != TOMATO and _tomato_pot_open(pots):
                            fired.append("useful_tomato_pickup")
            elif tile == DISH_SOURCE:
                if held == EMPTY:
                    held = DISH
                    fired.append("pickup_dish_from_dispenser")
                    if _dish_is_useful(pots, counters, p0_held, p1_held):
                        fired.append("useful_dish_pickup")
            elif tile == POT:
                contents, cook = pots[face]
                if held in (ONION, TOMATO) and cook == POT_IDLE:
                    before = lay.achievable_reward[contents]
                    if held == ONION:
                        new_contents = contents + 4
                        fired.append("place_onion_in_pot")
                    else:
                        new_contents = contents + 1
                        fired.append("place_tomato_in_pot")
                        if lay.extra_tomato_events and contents == 0:
                            fired.append("place_tomato_in_empty_pot")
                    after = lay.achievable_reward[new_contents]
                    if after > 0:
                        fired.append("viable_placement")
                    if after >= before:
                        fired.append("optimal_placement")
                        if held == TOMATO and lay.extra_tomato_events:
                            fired.append("optimal_tomato_placement")
                    if before > 0 and after == 0:
                        fired.append("catastrophic_placement")
                    if before == 0:
                        fired.append("useless_placement")
                    n_items = (new_contents >> 2) + (new_contents & 3)
                    new_cook = lay.cook_ticks_for[new_contents] if n_items == 3 else POT_IDLE
                    if not pots_copied:
                        pots = dict(pots)
                        pots_copied = True
                    pots[face] = (new_contents, new_cook)
                    held = EMPTY
                elif held == DISH and cook == POT_READY:
                    if not pots_copied:
                        pots = dict(pots)
                        pots_copied = True
                    pots[face] = (0, POT_IDLE)
                    held = _SOUP_BASE + contents
                    fired.append("pickup_soup_from_pot")
            elif tile == SERVE:
                if is_soup(held):
                    reward += lay.delivery_reward(held)
                    held = EMPTY
                    fired.append("delivery")

            if fired:
                if events is None:
                    events = [0] * lay.n_events
                for name in fired:
                    k = eidx[name]
                    events[k] += 1
                    details.append((k, pi, face))
                if pi == 0:
                    p0_held = held
                else:
                    p1_held = held

    # Cook timers.
    for cell, (contents, cook) in pots.items():
        if cook > 0:
            if not pots_copied:
                pots = dict(pots)
                pots_copied = True
            pots[cell] = (contents, cook - 1)

    tick = state.tick + 1
    ns = GameState(
        lay,
        p0_pos, p0_dir, p0_held,
        p1_pos, p1_dir, p1_held,
        counters, pots, placed_by,
        tick, state.total_reward + reward,
    )
    ev = lay.zero_events if events is None else tuple(events)
    return StepOutcome(ns, reward, ev, tick >= lay.episode_length, tuple(details))


def _tomato_pot_open(pots) -> bool:
    # A non-full pot holding only tomatoes (at least one): a tomato soup in
    # progress that another tomato can still join.
    for contents, cook in pots.values():
        if cook == POT_IDLE:
            on, to = contents >> 2, contents & 3
            if on == 0 and 0 < to < 3:
                return True
    return False


def _dish_is_useful(pots, counters, p0_held, p1_held) -> bool:
    # Useful when no spare dish is on a counter and fewer dishes are in hands
    # than there are soups cooking or ready.
    for item in counters.values():
        if item == DISH:
            return False
    taken = (1 if p0_held == DISH else 0) + (1 if p1_held == DISH else 0)
    soups = 0
    for _, cook in pots.values():
        if cook != POT_IDLE:
            soups += 1
    return taken < soups


def run_episode(layout: Layout, policy0, policy1, seed: int = 0):
    """Roll one full episode; returns (final state, total reward, event totals).

    ``policy0``/``policy1`` are callables (state, player_index) -> action.
    """
    state = reset(layout, seed)
    totals = [0] * layout.n_events
    while not state.done:
        a0 = policy0(state, 0)
        a1 = policy1(state, 1)
        out = step(state, a0, a1)
        for i, c in enumerate(out.events):
            if c:
                totals[i] += c
        state = out.state
    return state, state.total_reward, tuple(totals)


# Observation encoding: per-cell feature planes plus global scalars, flattened
# to a fixed-length float32 vector. Layout order is
#   [static tile one-hots (7) | ego block | partner block
#    | counter item planes (4 + 2 soup-content) | pot planes (5)
#    | per-order scalars (4 each) | time remaining fraction].
# A player block is [position plane, facing(4), held one-hot(5), held soup
# contents(2)]. The ego/partner split makes the two players' views differ by
# a block swap only.

_N_TILE_PLANES = 7
_PLAYER_BLOCK_PLANES = 1  # position plane; facing/held are scalar groups


def observation_size(layout: Layout) -> int:
    hw = layout.width * layout.height
    static = _N_TILE_PLANES * hw
    player = hw + 4 + 5 + 2
    counters = 6 * hw
    pots = 5 * hw
    orders = 4 * len(layout.orders)
    return static + 2 * player + counters + pots + orders + 1


def _static_planes(layout: Layout) -> np.ndarray:
    if layout._obs_static is None:
        hw = layout.width * layout.height
        planes = np.zeros(_N_TILE_PLANES * hw, dtype=np.float32)
        for i, t in enumerate(layout.tiles):
            planes[t * hw + i] = 1.0
        layout._obs_static = planes
    return layout._obs_static


def observe(state: GameState, player_index: int) -> np.ndarray:
    """Flat numeric features for one player's view of the state."""
    if player_index not in (0, 1):
        raise ValueError(f"player_index must be 0 or 1, got {player_index}")
    lay = state.layout
    hw = lay.width * lay.height
    out = np.zeros(observation_size(lay), dtype=np.float32)
    out[: _N_TILE_PLANES * hw] = _static_planes(lay)
    off = _N_TILE_PLANES * hw

    order = (player_index, 1 - player_index)
    for who in order:
        pos, dirn, held = state.player(who)
        out[off + pos] = 1.0
        off += hw
        out[off + dirn] = 1.0
        off += 4
        if held == EMPTY:
            out[off] = 1.0
        elif held == ONION:
            out[off + 1] = 1.0
        elif held == TOMATO:
            out[off + 2] = 1.0
        elif held == DISH:
            out[off + 3] = 1.0
        else:
            out[off + 4] = 1.0
            on, to = soup_contents(held)
            out[off + 5] = on / 3.0
            out[off + 6] = to / 3.0
        off += 7

    for cell, item in state.counters.items():
        if item == ONION:
            out[off + cell] = 1.0
        elif item == TOMATO:
            out[off + hw + cell] = 1.0
        elif item == DISH:
            out[off + 2 * hw + cell] = 1.0
        else:
            out[off + 3 * hw + cell] = 1.0
            on, to = soup_contents(item)
            out[off + 4 * hw + cell] = on / 3.0
            out[off + 5 * hw + cell] = to / 3.0
    off += 6 * hw

    max_cook = lay.max_cook_ticks
    for cell, (contents, cook) in state.pots.items():
        on, to = contents >> 2, contents & 3
        out[off + cell] = on / 3.0
        out[off + hw + cell] = to / 3.0
        if cook > 0:
            out[off + 2 * hw + cell] = 1.0
            out[off + 4 * hw + cell] = cook / max_cook
        elif cook == POT_READY and on + to == 3:
            out[off + 3 * hw + cell] = 1.0
    off += 5 * hw

    max_reward = max(r.reward for r in lay.orders) or 1
    for r in lay.orders:
        out[off] = r.onions / 3.0
        out[off + 1] = r.tomatoes / 3.0
        out[off + 2] = r.cook_ticks / max_cook
        out[off + 3] = r.reward / max_reward
        off += 4

    out[off] = state.tick / lay.episode_length
    return out


def render_text(state: GameState) -> str:
    """ASCII snapshot for logs and debugging."""
    lay = state.layout
    rows = [list(lay.text.split("\n")[y][: lay.width]) for y in range(lay.height)]
    for y in range(lay.height):
        for x in range(lay.width):
            if rows[y][x] in ("1", "2"):
                rows[y][x] = " "
    item_char = {ONION: "o", TOMATO: "t", DISH: "d"}
    for cell, item in state.counters.items():
        x, y = lay.xy(cell)
        rows[y][x] = item_char.get(item, "s")
    for cell, (contents, cook) in state.pots.items():
        x, y = lay.xy(cell)
        n = (contents >> 2) + (contents & 3)
        rows[y][x] = "R" if cook == POT_READY and n == 3 else str(n) if cook == POT_IDLE else "C"
    arrows = "^v<>"
    for i in (0, 1):
        pos, dirn, _ = state.player(i)
        x, y = lay.xy(pos)
        rows[y][x] = arrows[dirn] if i == 0 else str(i + 1)
    head = f"t={state.tick} r={state.total_reward} held=({state.p0_held},{state.p1_held})"
    return head + "\n" + "\n".join("".join(r) for r in rows)
