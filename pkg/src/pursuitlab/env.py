"""Seeded urban-grid pursuit-evasion simulator.

The world is a ``W x W`` street grid (``W`` odd). Cells whose coordinates are
both odd hold building blocks; every other cell is road, so even rows and
even columns form unbroken streets and cells with two even coordinates are
intersections. ``N`` pursuers drive under a five-action model while the
evaders follow one scripted movement strategy drawn per episode.

Sight is blocked by buildings only. From an intersection a pursuer sees the
road cells of its row and column inside its ``M x M`` window (a cross); from
a straight road it sees only along the road axis (a line). Obstacles inside
the window are always reported, unoccluded.

Capturing is co-location: after evaders and pursuers have both moved, every
evader sharing a cell with at least one pursuer is removed, adding +1 to the
global reward, split evenly among the co-located pursuers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .errors import ContractViolation, InvalidConfig, InvalidPosition

Cell = tuple[int, int]

HEADINGS = ("N", "E", "S", "W")
HEADING_DELTA = {"N": (-1, 0), "E": (0, 1), "S": (1, 0), "W": (0, -1)}
LEFT_OF = {"N": "W", "W": "S", "S": "E", "E": "N"}
RIGHT_OF = {"N": "E", "E": "S", "S": "W", "W": "N"}

FORWARD, BACKWARD, TURN_LEFT, TURN_RIGHT, STOP = range(5)
N_ACTIONS = 5
ACTION_NAMES = ("forward", "backward", "turn_left", "turn_right", "stop")

STILL, LAT_LOOP, LONG_LOOP, CIRCLE = "Still", "LatLoop", "LongLoop", "Circle"
STRATEGY_TAGS = (STILL, LAT_LOOP, LONG_LOOP, CIRCLE)

DEFAULT_VIEW = 5
DEFAULT_HORIZON = 50


class GridMap:
    """Road/building layout: obstacles exactly where both coordinates are odd."""

    def __init__(self, width: int):
        if width < 5 or width % 2 == 0:
            raise InvalidConfig(f"grid width must be odd and >= 5, got {width}")
        self.width = width
        self.intersection_interval = 1
        mask = np.zeros((width, width), dtype=bool)
        mask[1::2, 1::2] = True
        self.obstacle_mask = mask
        self.obstacle_cells = frozenset(
            (int(i), int(j)) for i, j in zip(*np.nonzero(mask))
        )
        self.road_cells: tuple[Cell, ...] = tuple(
            (i, j)
            for i in range(width)
            for j in range(width)
            if not mask[i, j]
        )
        self._vis_cache: dict[tuple[Cell, int], frozenset[Cell]] = {}
        self._padded: dict[int, np.ndarray] = {}

    def in_bounds(self, cell: Cell) -> bool:
        i, j = cell
        return 0 <= i < self.width and 0 <= j < self.width

    def is_obstacle(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and bool(self.obstacle_mask[cell])

    def is_road(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and not self.obstacle_mask[cell]

    def is_intersection(self, cell: Cell) -> bool:
        i, j = cell
        return self.is_road(cell) and i % 2 == 0 and j % 2 == 0

    def obstacle_window(self, center: Cell, view: int) -> np.ndarray:
        """``view x view`` obstacle indicator around ``center``; off-grid is 0."""
        r = view // 2
        padded = self._padded.get(view)
        if padded is None:
            padded = np.zeros((self.width + 2 * r, self.width + 2 * r), dtype=np.uint8)
            padded[r : r + self.width, r : r + self.width] = self.obstacle_mask
            self._padded[view] = padded
        i, j = center
        return padded[i : i + view, j : j + view].copy()

    def __eq__(self, other) -> bool:
        return isinstance(other, GridMap) and other.width == self.width

    def __hash__(self) -> int:
        return hash(("GridMap", self.width))


def build_map(width: int) -> GridMap:
    """Build the interval-1 urban grid for an odd ``width >= 5``."""
    return GridMap(width)


def observable_area(grid: GridMap, pos: Cell, view: int = DEFAULT_VIEW) -> frozenset[Cell]:
    """Cells visible from ``pos`` within the ``view x view`` window.

    Intersections see a cross (row and column arms), straight-road cells see
    a line along the road axis. Arms are clipped at the grid bounds and the
    result always contains ``pos`` itself.
    """
    key = (pos, view)
    cached = grid._vis_cache.get(key)
    if cached is not None:
        return cached
    if not grid.is_road(pos):
        raise InvalidPosition(f"{pos} is not a road cell")
    i, j = pos
    if i % 2 == 0 and j % 2 == 0:
        arms = ((-1, 0), (1, 0), (0, -1), (0, 1))
    elif i % 2 == 0:
        arms = ((0, -1), (0, 1))  # horizontal street
    else:
        arms = ((-1, 0), (1, 0))  # vertical street
    cells = {pos}
    reach = view // 2
    for di, dj in arms:
        for k in range(1, reach + 1):
            cell = (i + di * k, j + dj * k)
            if not grid.in_bounds(cell):
                break
            cells.add(cell)
    area = frozenset(cells)
    grid._vis_cache[key] = area
    return area


@dataclass
class VehicleState:
    """One vehicle: grid position, heading, and (for evaders) liveness."""

    position: Cell
    heading: str
    kind: str  # "pursuer" | "evader"
    alive: bool = True


@dataclass
class EvaderStrategy:
    """Per-evader scripted motion state.

    The tag is shared by all evaders of an episode (drawn once at reset);
    ``anchor`` and ``phase`` are per-evader: the spawn cell and shuttle
    direction for the loops, or the ring block and ring index for Circle.
    """

    tag: str
    anchor: Cell
    phase: int


@dataclass
class PursuerObservation:
    """The pair of ``view x view`` masks seen by one pursuer.

    ``evaders`` is occluded by buildings (cross/line sight); ``obstacles``
    is the raw building indicator of the window, unoccluded.
    """

    evaders: np.ndarray
    obstacles: np.ndarray
    center: Cell
    view: int


@dataclass
class EnvConfig:
    width: int = 13
    n_pursuers: int = 8
    n_evaders: int = 4
    view: int = DEFAULT_VIEW
    horizon: int = DEFAULT_HORIZON
    strategy: str = ""  # pin every episode to one evader strategy; "" = uniform draw


@dataclass
class WorldState:
    """Full simulator state; owned by a single writer."""

    grid: GridMap
    pursuers: list[VehicleState]
    evaders: list[VehicleState]
    strategies: list[EvaderStrategy]
    t: int = 0
    view: int = DEFAULT_VIEW
    horizon: int = DEFAULT_HORIZON
    seed: int | None = None

    @property
    def n_pursuers(self) -> int:
        return len(self.pursuers)

    @property
    def n_alive_evaders(self) -> int:
        return sum(1 for e in self.evaders if e.alive)

    @property
    def done(self) -> bool:
        return self.t >= self.horizon or self.n_alive_evaders == 0

    def clone(self) -> "WorldState":
        return WorldState(
            grid=self.grid,
            pursuers=[replace(p) for p in self.pursuers],
            evaders=[replace(e) for e in self.evaders],
            strategies=[replace(s) for s in self.strategies],
            t=self.t,
            view=self.view,
            horizon=self.horizon,
            seed=self.seed,
        )


@dataclass
class StepOutcome:
    next: WorldState
    per_agent_reward: list[float]
    global_reward: float
    captures: list[tuple[tuple[int, ...], int]]
    done: bool


def _ring_cells(block: Cell) -> tuple[Cell, ...]:
    """The 8 road cells around one building block, in clockwise walk order."""
    a, b = block
    return (
        (a - 1, b - 1), (a - 1, b), (a - 1, b + 1), (a, b + 1),
        (a + 1, b + 1), (a + 1, b), (a + 1, b - 1), (a, b - 1),
    )


def _adjacent_blocks(grid: GridMap, cell: Cell) -> list[Cell]:
    """Building blocks whose ring contains ``cell``, in sorted order."""
    i, j = cell
    blocks = []
    for a in (i - 1, i, i + 1):
        for b in (j - 1, j, j + 1):
            if (a, b) != cell and grid.is_obstacle((a, b)):
                blocks.append((a, b))
    return sorted(blocks)


def spawn_headings(cell: Cell) -> tuple[str, ...]:
    """Orientations a vehicle can spawn with on this road cell.

    Streets orient traffic along their axis; a perpendicular heading on a
    street cell would leave a vehicle permanently unable to move (forward and
    backward face buildings and turns are legal only at intersections).
    """
    i, j = cell
    if i % 2 == 0 and j % 2 == 0:
        return HEADINGS
    if i % 2 == 0:
        return ("E", "W")
    return ("N", "S")


def reset(config: EnvConfig, seed: int) -> WorldState:
    """Spawn a fresh episode; identical ``(config, seed)`` gives an identical state.

    Vehicles land uniformly on distinct road cells, each with a heading drawn
    uniformly among the orientations its cell allows, and one evader strategy
    tag is drawn for the whole episode.
    """
    grid = build_map(config.width)
    total = config.n_pursuers + config.n_evaders
    if total > len(grid.road_cells):
        raise InvalidConfig(
            f"{total} vehicles cannot spawn on {len(grid.road_cells)} road cells"
        )
    if config.strategy and config.strategy not in STRATEGY_TAGS:
        raise InvalidConfig(
            f"unknown evader strategy {config.strategy!r}; choose from {STRATEGY_TAGS}"
        )
    rng = np.random.default_rng(seed)
    spots = rng.choice(len(grid.road_cells), size=total, replace=False)
    tag = config.strategy or STRATEGY_TAGS[int(rng.integers(0, 4))]

    def draw_heading(cell: Cell) -> str:
        options = spawn_headings(cell)
        return options[int(rng.integers(0, len(options)))]

    pursuers = []
    for k in range(config.n_pursuers):
        pos = grid.road_cells[int(spots[k])]
        pursuers.append(VehicleState(pos, draw_heading(pos), "pursuer"))
    evaders = []
    strategies = []
    for m in range(config.n_evaders):
        idx = config.n_pursuers + m
        pos = grid.road_cells[int(spots[idx])]
        heading = draw_heading(pos)
        evaders.append(VehicleState(pos, heading, "evader"))
        strategies.append(_init_strategy(grid, tag, pos, heading, rng))

    return WorldState(
        grid=grid,
        pursuers=pursuers,
        evaders=evaders,
        strategies=strategies,
        t=0,
        view=config.view,
        horizon=config.horizon,
        seed=seed,
    )


def _init_strategy(
    grid: GridMap, tag: str, spawn: Cell, heading: str, rng: np.random.Generator
) -> EvaderStrategy:
    if tag == CIRCLE:
        blocks = _adjacent_blocks(grid, spawn)
        block = blocks[int(rng.integers(0, len(blocks)))]
        phase = _ring_cells(block).index(spawn)
        return EvaderStrategy(tag, block, phase)
    if tag == LAT_LOOP:
        return EvaderStrategy(tag, spawn, +1 if heading in ("N", "E") else -1)
    if tag == LONG_LOOP:
        return EvaderStrategy(tag, spawn, +1 if heading in ("S", "E") else -1)
    return EvaderStrategy(STILL, spawn, 0)


def evader_action(
    strategy: EvaderStrategy, evader: VehicleState, grid: GridMap
) -> tuple[Cell, EvaderStrategy]:
    """Next cell for one scripted evader plus its advanced strategy state.

    Still stops; the loops shuttle one cell per step along their axis,
    reversing at obstacles or bounds (or stalling if boxed in); Circle walks
    the 8-cell ring around its anchored block, one cell per step.
    """
    if not evader.alive:
        raise ContractViolation("evader_action requires a live evader")
    i, j = evader.position
    tag = strategy.tag
    if tag == STILL:
        return evader.position, strategy
    if tag == CIRCLE:
        ring = _ring_cells(strategy.anchor)
        nxt = (strategy.phase + 1) % len(ring)
        return ring[nxt], replace(strategy, phase=nxt)
    axis = (0, 1) if tag == LAT_LOOP else (1, 0)
    d = strategy.phase
    target = (i + axis[0] * d, j + axis[1] * d)
    if grid.is_road(target):
        return target, strategy
    back = (i - axis[0] * d, j - axis[1] * d)
    if grid.is_road(back):
        return back, replace(strategy, phase=-d)
    return evader.position, strategy


def resolve_pursuer_move(
    grid: GridMap, pos: Cell, heading: str, action: int
) -> tuple[Cell, str]:
    """Apply one pursuer action; illegal moves resolve to a full stop.

    Turns are legal only at intersections and rotate the heading before the
    one-cell move; backward keeps the heading. If the target cell is an
    obstacle or off-grid the whole action is undone (heading included).
    """
    if action == STOP:
        return pos, heading
    if action == FORWARD:
        new_heading = heading
        move_dir = heading
    elif action == BACKWARD:
        new_heading = heading
        move_dir = {"N": "S", "S": "N", "E": "W", "W": "E"}[heading]
    elif action in (TURN_LEFT, TURN_RIGHT):
        if not grid.is_intersection(pos):
            return pos, heading
        new_heading = (LEFT_OF if action == TURN_LEFT else RIGHT_OF)[heading]
        move_dir = new_heading
    else:
        raise ContractViolation(f"unknown action {action}")
    di, dj = HEADING_DELTA[move_dir]
    target = (pos[0] + di, pos[1] + dj)
    if not grid.is_road(target):
        return pos, heading
    return target, new_heading


def step(world: WorldState, pursuer_actions: list[int]) -> StepOutcome:
    """Advance one tick: evaders move, pursuers move, co-location captures.

    Each captured evader adds exactly +1 to the global reward, split 1/n
    among the n pursuers on its cell (shares are computed with exact
    rationals so per-agent rewards sum back to the capture count).
    """
    if world.done:
        raise ContractViolation("step called on a finished episode")
    if len(pursuer_actions) != world.n_pursuers:
        raise ContractViolation(
            f"expected {world.n_pursuers} actions, got {len(pursuer_actions)}"
        )

    nxt = world.clone()

    for m, evader in enumerate(nxt.evaders):
        if not evader.alive:
            continue
        cell, strategy = evader_action(nxt.strategies[m], evader, nxt.grid)
        evader.position = cell
        nxt.strategies[m] = strategy

    for k, pursuer in enumerate(nxt.pursuers):
        pursuer.position, pursuer.heading = resolve_pursuer_move(
            nxt.grid, pursuer.position, pursuer.heading, int(pursuer_actions[k])
        )

    by_cell: dict[Cell, list[int]] = {}
    for k, pursuer in enumerate(nxt.pursuers):
        by_cell.setdefault(pursuer.position, []).append(k)

    captures: list[tuple[tuple[int, ...], int]] = []
    shares = [Fraction(0)] * world.n_pursuers
    for m, evader in enumerate(nxt.evaders):
        if not evader.alive:
            continue
        catchers = by_cell.get(evader.position)
        if catchers:
            evader.alive = False
            captures.append((tuple(catchers), m))
            for k in catchers:
                shares[k] += Fraction(1, len(catchers))

    nxt.t = world.t + 1
    return StepOutcome(
        next=nxt,
        per_agent_reward=[float(s) for s in shares],
        global_reward=float(len(captures)),
        captures=captures,
        done=nxt.done,
    )


def observe(world: WorldState, k: int) -> PursuerObservation:
    """Masked local view of pursuer ``k``: occluded evader hits, raw obstacles."""
    if not 0 <= k < world.n_pursuers:
        raise ContractViolation(f"pursuer index {k} out of range")
    pursuer = world.pursuers[k]
    ci, cj = pursuer.position
    view = world.view
    r = view // 2
    evader_mask = np.zeros((view, view), dtype=np.uint8)
    visible = observable_area(world.grid, pursuer.position, view)
    for evader in world.evaders:
        if evader.alive and evader.position in visible:
            i, j = evader.position
            evader_mask[i - ci + r, j - cj + r] = 1
    return PursuerObservation(
        evaders=evader_mask,
        obstacles=world.grid.obstacle_window(pursuer.position, view),
        center=pursuer.position,
        view=view,
    )


def global_state(world: WorldState) -> np.ndarray:
    """Centralized ``3 x W x W`` summary used only at training time.

    Channel 0 counts pursuers per cell, channel 1 counts live evaders,
    channel 2 is the static obstacle indicator.
    """
    w = world.grid.width
    state = np.zeros((3, w, w), dtype=np.float64)
    for pursuer in world.pursuers:
        state[0][pursuer.position] += 1.0
    for evader in world.evaders:
        if evader.alive:
            state[1][evader.position] += 1.0
    state[2] = world.grid.obstacle_mask
    return state


def render_frame(world: WorldState) -> str:
    """One text frame, one character per cell.

    ``#`` building, ``.`` road, digits for pursuer indices, ``E`` for a live
    evader, ``*`` where several vehicles overlap.
    """
    w = world.grid.width
    chars = [["#" if world.grid.obstacle_mask[i, j] else "." for j in range(w)] for i in range(w)]
    occupancy: dict[Cell, list[str]] = {}
    for k, p in enumerate(world.pursuers):
        occupancy.setdefault(p.position, []).append(str(k) if k < 10 else "P")
    for e in world.evaders:
        if e.alive:
            occupancy.setdefault(e.position, []).append("E")
    for (i, j), glyphs in occupancy.items():
        chars[i][j] = glyphs[0] if len(glyphs) == 1 else "*"
    return "\n".join("".join(row) for row in chars)


def step_record(t: int, actions: list[int], outcome: StepOutcome) -> dict:
    """Structured per-step trace record (one line of the episode trace)."""
    world = outcome.next
    return {
        "t": t,
        "pursuers": [[p.position[0], p.position[1], p.heading] for p in world.pursuers],
        "evaders": [
            [e.position[0], e.position[1], int(e.alive)] for e in world.evaders
        ],
        "actions": [ACTION_NAMES[int(a)] for a in actions],
        "rewards": outcome.per_agent_reward,
        "global_reward": outcome.global_reward,
        "captures": [[list(ks), m] for ks, m in outcome.captures],
        "done": outcome.done,
    }
