"""Limit order book layer: digital price paths and queue replay.

Prices move on a lattice: Y_t = A N_t for an integer matrix A scaled by a
monetary unit.  The book itself is a collection of per-level queues updated
in multiples of a fixed share unit q by market orders, limit orders, and
cancellations, each of which is one component of the driving point process.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .model import PathScaledBaseline

__all__ = [
    "PriceMap",
    "BookState",
    "EventRule",
    "BookTrajectory",
    "LobError",
    "one_unit_map",
    "one_two_unit_map",
    "simultaneous_map",
    "price_path",
    "book_replay",
    "load_event_map",
    "write_trajectory_csv",
    "lob_cancellation_baseline",
]


class LobError(ValueError):
    pass


@dataclass(frozen=True)
class PriceMap:
    """Linear map from event counts to price displacements, Y = matrix @ N.

    matrix has shape (m, d) and must equal a_unit times an integer matrix.
    """

    matrix: np.ndarray
    a_unit: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise LobError("price map matrix must be two-dimensional")
        if self.a_unit <= 0:
            raise LobError("monetary unit must be positive")
        ticks = m / self.a_unit
        if not np.allclose(ticks, np.round(ticks), atol=1e-9):
            raise LobError("price map entries must be integer multiples of a_unit")
        object.__setattr__(self, "matrix", m)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]


def one_unit_map(a_unit: float = 1.0) -> PriceMap:
    """Two prices driven by four components, each jump one tick up or down."""
    A = a_unit * np.array([[1, -1, 0, 0], [0, 0, 1, -1]], dtype=float)
    return PriceMap(A, a_unit)


def one_two_unit_map(a_unit: float = 1.0) -> PriceMap:
    """Two prices, eight components, jumps of one or two ticks in each direction."""
    A = a_unit * np.array(
        [[1, 2, -1, -2, 0, 0, 0, 0], [0, 0, 0, 0, 1, 2, -1, -2]], dtype=float
    )
    return PriceMap(A, a_unit)


def simultaneous_map(a_unit: float = 1.0, sign: int = +1) -> PriceMap:
    """Two prices, six components, the last pair moving both prices at once.

    sign selects the direction in which the shared components move the second
    price; both choices are coherent, +1 is the default.
    """
    if sign not in (+1, -1):
        raise LobError("sign must be +1 or -1")
    A = a_unit * np.array(
        [[1, -1, 0, 0, 1, -1], [0, 0, 1, -1, sign, -sign]], dtype=float
    )
    return PriceMap(A, a_unit)


def price_path(pm: PriceMap, path) -> tuple[np.ndarray, np.ndarray]:
    """Price trajectory at event times: (times, Y) with Y[i] = matrix @ N_{t_i}.

    path may be a PointPath or a precomputed (times, counts) pair where counts
    holds cumulative event counts per component.  The price is piecewise
    constant between events and starts at zero.
    """
    if isinstance(path, tuple):
        times, counts = path
        times = np.asarray(times, dtype=float)
        counts = np.asarray(counts, dtype=float)
    else:
        times, comps = path.merged_events()
        counts = np.zeros((times.size, path.d))
        if times.size:
            counts[np.arange(times.size), comps] = 1.0
            counts = np.cumsum(counts, axis=0)
    if counts.shape[1] != pm.d:
        raise LobError(
            f"price map expects {pm.d} components, path has {counts.shape[1]}"
        )
    Y = counts @ pm.matrix.T
    return times, Y


@dataclass
class BookState:
    """Ask and bid queues in share counts, all multiples of the unit q."""

    ask_queues: np.ndarray
    bid_queues: np.ndarray
    q: int = 1

    def __post_init__(self):
        self.ask_queues = np.asarray(self.ask_queues, dtype=np.int64).copy()
        self.bid_queues = np.asarray(self.bid_queues, dtype=np.int64).copy()
        if self.q <= 0:
            raise LobError("share unit q must be a positive integer")
        for name, qs in (("ask", self.ask_queues), ("bid", self.bid_queues)):
            if np.any(qs < 0):
                raise LobError(f"negative {name} queue")
            if np.any(qs % self.q != 0):
                raise LobError(f"{name} queues must be multiples of q")

    def copy(self) -> "BookState":
        return BookState(self.ask_queues.copy(), self.bid_queues.copy(), self.q)

    def __eq__(self, other):
        return (
            isinstance(other, BookState)
            and self.q == other.q
            and np.array_equal(self.ask_queues, other.ask_queues)
            and np.array_equal(self.bid_queues, other.bid_queues)
        )


@dataclass(frozen=True)
class EventRule:
    """What one point-process component does to the book."""

    side: str  # "ask" | "bid"
    level: int  # zero-based level index
    kind: str  # "market" | "limit" | "cancel"

    def __post_init__(self):
        if self.side not in ("ask", "bid"):
            raise LobError(f"unknown side {self.side!r}")
        if self.kind not in ("market", "limit", "cancel"):
            raise LobError(f"unknown kind {self.kind!r}")
        if self.level < 0:
            raise LobError("level must be nonnegative")


@dataclass
class BookTrajectory:
    times: np.ndarray  # event times, first entry is the start time
    states: list  # BookState after each time (states[0] = initial)
    violations: int  # count of floored removals on empty queues
    violation_times: list = field(default_factory=list)

    @property
    def final(self) -> BookState:
        return self.states[-1]


def book_replay(initial: BookState, path, event_map) -> BookTrajectory:
    """Fold the event stream through the book, one state per event.

    event_map maps every component index to an EventRule.  Limit orders add q
    shares at the mapped level; market orders and cancellations remove q,
    floored at zero with the attempt recorded as a violation and the state
    left unchanged.
    """
    times, comps = path.merged_events()
    rules = {}
    for comp in range(path.d):
        if comp not in event_map:
            raise LobError(f"event map missing component {comp}")
        rules[comp] = event_map[comp]
    state = initial.copy()
    states = [state.copy()]
    out_times = [float(path.horizon.t0)]
    violations = 0
    violation_times = []
    for t, comp in zip(times, comps):
        rule = rules[int(comp)]
        queues = state.ask_queues if rule.side == "ask" else state.bid_queues
        if rule.level >= queues.size:
            raise LobError(
                f"component {comp} maps to level {rule.level} outside the book"
            )
        if rule.kind == "limit":
            queues[rule.level] += state.q
        else:
            if queues[rule.level] >= state.q:
                queues[rule.level] -= state.q
            else:
                violations += 1
                violation_times.append(float(t))
        states.append(state.copy())
        out_times.append(float(t))
    return BookTrajectory(
        times=np.asarray(out_times, dtype=float),
        states=states,
        violations=violations,
        violation_times=violation_times,
    )


def load_event_map(path: str) -> dict:
    """Read a JSON array of {component, side, level, kind} records."""
    with open(path) as f:
        records = json.load(f)
    if not isinstance(records, list):
        raise LobError("event map file must hold a JSON array")
    out = {}
    for rec in records:
        comp = int(rec["component"])
        if comp in out:
            raise LobError(f"duplicate component {comp} in event map")
        out[comp] = EventRule(side=rec["side"], level=int(rec["level"]), kind=rec["kind"])
    return out


def write_trajectory_csv(traj: BookTrajectory, path: str) -> None:
    """One row per (time, level, count), ask levels first, format time,level_id,count."""
    with open(path, "w") as f:
        f.write("time,level_id,count\n")
        for t, st in zip(traj.times, traj.states):
            for j, c in enumerate(st.ask_queues):
                f.write(f"{t:.17g},ask_{j},{int(c)}\n")
            for j, c in enumerate(st.bid_queues):
                f.write(f"{t:.17g},bid_{j},{int(c)}\n")


def lob_cancellation_baseline(
    traj: BookTrajectory, side: str, level: int, d: int, component: int
) -> PathScaledBaseline:
    """Baseline factor proportional to the queue size: g^component = theta_c * Q(t-)/q.

    The factor path is the left limit of the replayed queue size in units of
    q, clamped at zero, so zero-queue intervals force zero intensity for every
    value of theta_c at once.  Components other than `component` get factor 1,
    so their gamma entries stay plain constants.
    """
    if side not in ("ask", "bid"):
        raise LobError(f"unknown side {side!r}")
    counts = np.array(
        [
            (st.ask_queues if side == "ask" else st.bid_queues)[level]
            for st in traj.states
        ],
        dtype=float,
    )
    factors = np.maximum(counts / traj.states[0].q, 0.0)
    # The baseline's path lookup takes left limits, so the factor recorded at
    # traj.times[i] applies on (times[i], times[i+1]].
    keep = np.concatenate(([True], np.diff(traj.times) > 0))
    values = np.ones((int(np.sum(keep)), d))
    values[:, component] = factors[keep]
    return PathScaledBaseline(times=traj.times[keep], values=values)
