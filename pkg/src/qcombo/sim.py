"""Deterministic grid-traffic microsimulator.

Vehicles drive straight along horizontal and vertical routes crossing an
``rows x cols`` grid of signalized intersections.  Longitudinal motion follows
the Intelligent Driver Model integrated with a 0.1 s semi-implicit Euler step.
All vehicles live in flat numpy arrays sorted by (route, position descending),
so the leader of vehicle ``i`` is vehicle ``i - 1`` whenever both share a route.

Time bookkeeping is kept in integer ticks; ``clock`` is derived from it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DT = 0.1
TICKS_PER_SECOND = 10
TICKS_PER_HOUR = 36000

MAX_SPEED = 35.0
ACCEL = 1.0
DECEL = 1.5
MIN_GAP = 2.0
TAU = 1.0
DELTA = 4
VEHICLE_LENGTH = 5.0
HALT_SPEED = 0.1
EMERGENCY_DROP = 4.5
YELLOW_TICKS = 30
# followers never close a gap below this in one tick
SAFETY_MARGIN = 0.1

EW, NS = 0, 1
KEEP, SWITCH = 0, 1
# incoming lane slots, named by the side the traffic arrives from
NORTH, EAST, SOUTH, WEST = 0, 1, 2, 3

_RATE_SCALE = 1000  # accumulator works in milli-vehicles per hour


class SimulatorFault(RuntimeError):
    """Raised when the physics reaches a state that must never happen (collision)."""


@dataclass(frozen=True)
class Route:
    id: int
    axis: int  # EW or NS
    slot: int  # incoming slot it feeds at every intersection it crosses
    road: tuple[str, int]  # ("h", row) or ("v", col)
    intersections: tuple[int, ...]  # agent ids in travel order
    length: float


@dataclass(frozen=True)
class Lane:
    id: int
    route: int
    segment: int
    to_intersection: int | None
    from_intersection: int | None


@dataclass(frozen=True)
class Intersection:
    id: int
    row: int
    col: int
    incoming: tuple[int, int, int, int]  # lane ids ordered N, E, S, W
    outgoing: tuple[int, int, int, int]


@dataclass
class RoadNetwork:
    rows: int
    cols: int
    edge_length: float
    routes: list[Route]
    lanes: list[Lane]
    intersections: list[Intersection]
    adjacency: np.ndarray
    lane_offset: np.ndarray = field(repr=False)

    @property
    def n_agents(self) -> int:
        return self.rows * self.cols

    def agent_id(self, row: int, col: int) -> int:
        return row * self.cols + col


def build_grid(rows: int, cols: int, edge_length: float = 400.0) -> RoadNetwork:
    """Grid of ``rows`` horizontal and ``cols`` vertical two-way roads.

    Each route enters one edge-length before its first intersection and leaves
    one edge-length after its last, so boundary intersections also see four
    full-length incoming lanes.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"grid dimensions must be positive, got {rows}x{cols}")
    if not edge_length > 0:
        raise ValueError("edge_length must be positive")

    specs = []
    for r in range(rows):
        ids = tuple(r * cols + c for c in range(cols))
        specs.append((EW, WEST, ("h", r), ids))  # eastbound
        specs.append((EW, EAST, ("h", r), ids[::-1]))  # westbound
    for c in range(cols):
        ids = tuple(r * cols + c for r in range(rows))
        specs.append((NS, NORTH, ("v", c), ids))  # southbound
        specs.append((NS, SOUTH, ("v", c), ids[::-1]))  # northbound

    routes, lanes = [], []
    offsets = []
    incoming = [[-1] * 4 for _ in range(rows * cols)]
    outgoing = [[-1] * 4 for _ in range(rows * cols)]
    for rid, (axis, slot, road, ids) in enumerate(specs):
        k = len(ids)
        routes.append(Route(rid, axis, slot, road, ids, (k + 1) * edge_length))
        offsets.append(len(lanes))
        for seg in range(k + 1):
            to_int = ids[seg] if seg < k else None
            from_int = ids[seg - 1] if seg > 0 else None
            lane = Lane(len(lanes), rid, seg, to_int, from_int)
            lanes.append(lane)
            if to_int is not None:
                incoming[to_int][slot] = lane.id
            if from_int is not None:
                # leaving towards the side opposite to the arrival side
                outgoing[from_int][(slot + 2) % 4] = lane.id

    intersections = [
        Intersection(n, n // cols, n % cols, tuple(incoming[n]), tuple(outgoing[n]))
        for n in range(rows * cols)
    ]
    adjacency = np.zeros((rows * cols, rows * cols), dtype=bool)
    for r in range(rows):
        for c in range(cols):
            n = r * cols + c
            if c + 1 < cols:
                adjacency[n, n + 1] = adjacency[n + 1, n] = True
            if r + 1 < rows:
                adjacency[n, n + cols] = adjacency[n + cols, n] = True
    return RoadNetwork(
        rows, cols, float(edge_length), routes, lanes, intersections, adjacency,
        np.asarray(offsets, dtype=np.int64),
    )


@dataclass(frozen=True)
class FlowPeriod:
    start: int  # seconds, inclusive
    end: int  # seconds, exclusive
    horizontal: tuple[float, ...]  # veh/h per horizontal road, bottom to top
    vertical: tuple[float, ...]  # veh/h per vertical road, left to right


@dataclass(frozen=True)
class FlowProgram:
    periods: tuple[FlowPeriod, ...]
    enter_speed: float = 10.0

    def __post_init__(self):
        prev_end = None
        for p in self.periods:
            if p.end <= p.start:
                raise ValueError(f"empty flow interval {p.start}-{p.end}")
            if prev_end is not None and p.start < prev_end:
                raise ValueError("flow intervals must be ordered and non-overlapping")
            if any(x < 0 for x in p.horizontal + p.vertical):
                raise ValueError("flow rates must be non-negative")
            prev_end = p.end
        if not 0 <= self.enter_speed <= MAX_SPEED:
            raise ValueError("enter_speed out of range")

    def period_at(self, second: float) -> FlowPeriod | None:
        for p in self.periods:
            if p.start <= second < p.end:
                return p
        return None

    def route_rates(self, second: float, net: RoadNetwork) -> np.ndarray:
        """Vehicles per hour for every route at the given time (0 outside all periods)."""
        rates = np.zeros(len(net.routes))
        p = self.period_at(second)
        if p is None:
            return rates
        if len(p.horizontal) != net.rows or len(p.vertical) != net.cols:
            raise ValueError(
                f"flow period {p.start}-{p.end} has {len(p.horizontal)}x{len(p.vertical)} "
                f"rates for a {net.rows}x{net.cols} grid"
            )
        for route in net.routes:
            kind, idx = route.road
            if kind == "h":
                rates[route.id] = p.horizontal[net.rows - 1 - idx]
            else:
                rates[route.id] = p.vertical[idx]
        return rates


def idm_accel(v: float, v_lead: float | None = None, gap: float = math.inf) -> float:
    """IDM acceleration for one follower; ``v_lead=None`` means free road."""
    free = ACCEL * (1.0 - (v / MAX_SPEED) ** DELTA)
    if v_lead is None or math.isinf(gap):
        return free
    if gap <= 0:
        raise SimulatorFault(f"non-positive gap {gap} to leader")
    s_star = MIN_GAP + max(0.0, v * TAU + v * (v - v_lead) / (2.0 * math.sqrt(ACCEL * DECEL)))
    return free - ACCEL * (s_star / gap) ** 2


def _idm_vec(v, v_lead, gap):
    free = ACCEL * (1.0 - (v / MAX_SPEED) ** DELTA)
    finite = np.isfinite(gap)
    s_star = MIN_GAP + np.maximum(0.0, v * TAU + v * (v - v_lead) / (2.0 * math.sqrt(ACCEL * DECEL)))
    inter = np.zeros_like(v)
    inter[finite] = (s_star[finite] / gap[finite]) ** 2
    return free - ACCEL * inter


@dataclass(frozen=True)
class Vehicle:
    id: int
    route: int
    position: float
    speed: float
    speed_one_second_ago: float
    entry_time: float
    cumulative_waiting: float  # minutes
    last_moving_time: float


@dataclass(frozen=True)
class TrafficLight:
    intersection: int
    phase: int
    yellow_remaining: float | None
    phase_duration: float
    phase_change_count_window: int


@dataclass(frozen=True)
class LaneMetrics:
    queue: int
    vehicle_count: int
    mean_wait: float
    delay: float


@dataclass
class RewardFeatures:
    ql: float = 0.0
    wtl: float = 0.0
    dl: float = 0.0
    eml: float = 0.0
    fl: float = 0.0
    vl: float = 0.0


class World:
    """Mutable simulation state; advance it with :meth:`tick`."""

    def __init__(self, net: RoadNetwork, program: FlowProgram, seed: int = 0):
        self.net = net
        self.program = program
        self.rng = np.random.default_rng(seed)
        self.ticks = 0
        n_int = net.n_agents
        n_routes = len(net.routes)
        n_lanes = len(net.lanes)

        self.phase = np.full(n_int, EW, dtype=np.int64)
        self.yellow = np.zeros(n_int, dtype=np.int64)
        self.phase_ticks = np.zeros(n_int, dtype=np.int64)
        self.changes = np.zeros(n_int, dtype=np.int64)

        self.vid = np.zeros(0, dtype=np.int64)
        self.route = np.zeros(0, dtype=np.int64)
        self.pos = np.zeros(0)
        self.speed = np.zeros(0)
        self.hist = np.zeros((0, TICKS_PER_SECOND))
        self.entry_tick = np.zeros(0, dtype=np.int64)
        self.moving_tick = np.zeros(0, dtype=np.int64)
        self.emerg = np.zeros(0, dtype=bool)

        self.accum = np.zeros(n_routes, dtype=np.int64)
        self.inserted = np.zeros(n_routes, dtype=np.int64)
        self.exited = 0
        self.next_vid = 0

        # static per-route geometry
        self.route_len = np.array([r.length for r in net.routes])
        self.route_axis = np.array([r.axis for r in net.routes], dtype=np.int64)
        self.route_nint = np.array([len(r.intersections) for r in net.routes], dtype=np.int64)
        width = max(len(r.intersections) for r in net.routes)
        self.route_ints = np.zeros((n_routes, width + 1), dtype=np.int64)
        for r in net.routes:
            self.route_ints[r.id, : len(r.intersections)] = r.intersections
        lane_to = np.array([-1 if l.to_intersection is None else l.to_intersection for l in net.lanes])
        self.lane_is_incoming = lane_to >= 0
        self.lane_to = lane_to
        self.n_lanes = n_lanes

        # reward-window accumulators (per intersection)
        self._win = np.zeros((n_int, 6))
        self._rates_cache = (None, None)

    # -- time ---------------------------------------------------------------
    @property
    def clock(self) -> float:
        return self.ticks * DT

    @property
    def second(self) -> int:
        return self.ticks // TICKS_PER_SECOND

    # -- lights -------------------------------------------------------------
    def set_phase(self, agent: int, action: int) -> None:
        if action == SWITCH and self.yellow[agent] == 0:
            self.yellow[agent] = YELLOW_TICKS
            self.changes[agent] += 1
            self._win[agent, 4] += 1

    def apply_actions(self, actions) -> None:
        for n, a in enumerate(actions):
            self.set_phase(n, int(a))

    def light(self, agent: int) -> TrafficLight:
        y = int(self.yellow[agent])
        return TrafficLight(
            agent, int(self.phase[agent]), y * DT if y else None,
            self.phase_ticks[agent] * DT, int(self._win[agent, 4]),
        )

    def green_mask(self) -> np.ndarray:
        """(n_int, 2) boolean: which axis currently has green."""
        g = np.zeros((self.net.n_agents, 2), dtype=bool)
        idx = np.arange(self.net.n_agents)
        g[idx, self.phase] = self.yellow == 0
        return g

    # -- vehicles -----------------------------------------------------------
    @property
    def n_vehicles(self) -> int:
        return len(self.vid)

    def vehicles(self) -> list[Vehicle]:
        old = self.hist[:, self.ticks % TICKS_PER_SECOND] if len(self.vid) else []
        waits = self._waiting_minutes()
        return [
            Vehicle(int(self.vid[i]), int(self.route[i]), float(self.pos[i]), float(self.speed[i]),
                    float(old[i]), self.entry_tick[i] * DT, float(waits[i]), self.moving_tick[i] * DT)
            for i in range(len(self.vid))
        ]

    def _waiting_minutes(self) -> np.ndarray:
        halted = self.speed < HALT_SPEED
        return np.where(halted, (self.ticks - self.moving_tick) * DT / 60.0, 0.0)

    def _lane_of(self) -> np.ndarray:
        seg = np.minimum((self.pos // self.net.edge_length).astype(np.int64), self.route_nint[self.route])
        return self.net.lane_offset[self.route] + seg

    def spawn_step(self) -> list[int]:
        """Feed boundary demand for this tick; returns ids of inserted vehicles."""
        second = self.second
        if self._rates_cache[0] != second:
            rates = self.program.route_rates(second, self.net)
            self._rates_cache = (second, np.round(rates * _RATE_SCALE).astype(np.int64))
        self.accum += self._rates_cache[1]
        threshold = TICKS_PER_HOUR * _RATE_SCALE
        new_ids = []
        for rid in np.flatnonzero(self.accum >= threshold):
            end = int(np.searchsorted(self.route, rid, side="right"))
            if end > 0 and self.route[end - 1] == rid:
                if self.pos[end - 1] - VEHICLE_LENGTH < MIN_GAP:
                    continue  # boundary blocked, demand carries over
            self.accum[rid] -= threshold
            self.inserted[rid] += 1
            v = self.program.enter_speed
            self.vid = np.insert(self.vid, end, self.next_vid)
            self.route = np.insert(self.route, end, rid)
            self.pos = np.insert(self.pos, end, 0.0)
            self.speed = np.insert(self.speed, end, v)
            self.hist = np.insert(self.hist, end, np.full(TICKS_PER_SECOND, v), axis=0)
            self.entry_tick = np.insert(self.entry_tick, end, self.ticks)
            self.moving_tick = np.insert(self.moving_tick, end, self.ticks)
            self.emerg = np.insert(self.emerg, end, False)
            new_ids.append(self.next_vid)
            self.next_vid += 1
        return new_ids

    def _leaders(self):
        """Gap and speed of the effective leader (vehicle or red stop line)."""
        n = len(self.vid)
        gap = np.full(n, np.inf)
        v_lead = np.zeros(n)
        if n == 0:
            return gap, v_lead
        same = np.zeros(n, dtype=bool)
        same[1:] = self.route[1:] == self.route[:-1]
        idx = np.flatnonzero(same)
        gap[idx] = self.pos[idx - 1] - VEHICLE_LENGTH - self.pos[idx]
        v_lead[idx] = self.speed[idx - 1]

        L = self.net.edge_length
        seg = (self.pos // L).astype(np.int64)
        approaching = seg < self.route_nint[self.route]
        ai = np.flatnonzero(approaching)
        inter = self.route_ints[self.route[ai], seg[ai]]
        green = self.green_mask()[inter, self.route_axis[self.route[ai]]]
        red = ai[~green]
        # standing leader at the line itself so the speed cap can never carry a car across
        light_gap = (seg[red] + 1) * L - self.pos[red]
        closer = light_gap < gap[red]
        gap[red[closer]] = light_gap[closer]
        v_lead[red[closer]] = 0.0
        return gap, v_lead

    def tick(self) -> None:
        """Advance the world by one 0.1 s physics step."""
        self.spawn_step()
        n = len(self.vid)
        if n:
            gap, v_lead = self._leaders()
            if np.any(gap <= 0):
                bad = np.flatnonzero(gap <= 0)[0]
                raise SimulatorFault(
                    f"collision: vehicle {self.vid[bad]} gap {gap[bad]:.4f} at t={self.clock:.1f}"
                )
            acc = _idm_vec(self.speed, v_lead, gap)
            v_new = np.clip(self.speed + acc * DT, 0.0, MAX_SPEED)
            cap = np.maximum(0.0, gap - SAFETY_MARGIN) / DT
            v_new = np.minimum(v_new, cap)
            x_new = self.pos + v_new * DT

            L = self.net.edge_length
            seg_old = (self.pos // L).astype(np.int64)
            seg_new = (x_new // L).astype(np.int64)
            nint = self.route_nint[self.route]
            crossed = np.flatnonzero((seg_new > seg_old) & (seg_old < nint))
            if len(crossed):
                ints = self.route_ints[self.route[crossed], seg_old[crossed]]
                np.add.at(self._win[:, 5], ints, 1.0)

            slot = (self.ticks + 1) % TICKS_PER_SECOND
            old = self.hist[:, slot]
            emergency = (old - v_new > EMERGENCY_DROP) & ~self.emerg & (seg_new < nint)
            if emergency.any():
                ei = np.flatnonzero(emergency)
                self.emerg[ei] = True
                ints = self.route_ints[self.route[ei], seg_new[ei]]
                np.add.at(self._win[:, 3], ints, 1.0)
            self.hist[:, slot] = v_new

            self.speed = v_new
            self.pos = x_new
            self.moving_tick[v_new >= HALT_SPEED] = self.ticks + 1

            done = x_new >= self.route_len[self.route]
            if done.any():
                keep = ~done
                self.exited += int(done.sum())
                for name in ("vid", "route", "pos", "speed", "hist", "entry_tick", "moving_tick", "emerg"):
                    setattr(self, name, getattr(self, name)[keep])

        in_yellow = self.yellow > 0
        self.yellow[in_yellow] -= 1
        committed = in_yellow & (self.yellow == 0)
        self.phase[committed] = 1 - self.phase[committed]
        self.phase_ticks[committed] = 0
        self.phase_ticks[~committed] += 1

        self.ticks += 1
        if self.ticks % TICKS_PER_SECOND == 0:
            self._sample_window()

    def advance(self, seconds: int) -> None:
        for _ in range(seconds * TICKS_PER_SECOND):
            self.tick()

    # -- measurements -------------------------------------------------------
    def lane_table(self) -> np.ndarray:
        """(n_lanes, 4) array of queue, vehicle count, mean wait [min], delay."""
        out = np.zeros((self.n_lanes, 4))
        if len(self.vid) == 0:
            return out
        lane = self._lane_of()
        count = np.bincount(lane, minlength=self.n_lanes).astype(float)
        queue = np.bincount(lane, weights=(self.speed < HALT_SPEED).astype(float), minlength=self.n_lanes)
        wait = np.bincount(lane, weights=self._waiting_minutes(), minlength=self.n_lanes)
        vsum = np.bincount(lane, weights=self.speed, minlength=self.n_lanes)
        nz = count > 0
        out[:, 0] = queue
        out[:, 1] = count
        out[nz, 2] = wait[nz] / count[nz]
        out[nz, 3] = 1.0 - vsum[nz] / count[nz] / MAX_SPEED
        return out

    def lane_metrics(self, lane: int) -> LaneMetrics:
        if not 0 <= lane < self.n_lanes:
            raise IndexError(f"no lane {lane}")
        q, c, w, d = self.lane_table()[lane]
        return LaneMetrics(int(q), int(c), float(w), float(d))

    def incoming_table(self) -> np.ndarray:
        """(n_int, 4 slots, 4 metrics) for the incoming lanes of every intersection."""
        table = self.lane_table()
        inc = np.array([i.incoming for i in self.net.intersections])
        return table[inc]

    def _sample_window(self) -> None:
        inc = self.incoming_table()
        self._win[:, 0] += inc[:, :, 0].sum(axis=1)
        self._win[:, 1] += inc[:, :, 2].sum(axis=1)
        self._win[:, 2] += inc[:, :, 3].sum(axis=1)

    def pop_reward_features(self) -> list[RewardFeatures]:
        """Return the features gathered since the last call and open a new window."""
        feats = [RewardFeatures(*map(float, row)) for row in self._win]
        self._win[:] = 0.0
        self.emerg[:] = False
        return feats

    def window_array(self) -> np.ndarray:
        return self._win.copy()

    def conservation_ok(self) -> bool:
        return int(self.inserted.sum()) == len(self.vid) + self.exited
