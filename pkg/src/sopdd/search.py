"""
Branch-and-bound and peel-and-bound searches over decision diagrams.

Both searches keep a priority queue ordered by relaxed bound (ties FIFO), an
incumbent fed by restricted diagrams, and report progress as
:class:`BoundEvent` records through an optional callback.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field

from .diagram import (
    Diagram,
    EmptyDiagram,
    RootState,
    build_initial_relaxation,
    build_width_one,
    full_sequence,
    root_state_of,
    shortest_path,
    shortest_path_nodes,
)
from .filtering import FilterConfig, FilterContext
from .peel import peel
from .relaxation import assignment_ordering, refine
from .restriction import build_restricted

log = logging.getLogger(__name__)

NODE_SELECT_MODES = ("last_exact", "frontier")


@dataclass(frozen=True)
class BoundEvent:
    time: float  # seconds since the search started (monotonic clock)
    iteration: int
    relaxed_bound: float
    best_solution: float
    queue_length: int

    def as_dict(self):
        return {
            "time": self.time,
            "iteration": self.iteration,
            "relaxed_bound": _num(self.relaxed_bound),
            "best_solution": _num(self.best_solution),
            "queue_length": self.queue_length,
        }


def _num(x):
    # JSON has no infinity
    return None if x is None or math.isinf(x) else x


@dataclass(frozen=True)
class SolverConfig:
    filter: FilterConfig = field(default_factory=FilterConfig)
    node_select: str = "last_exact"
    # most open diagrams kept in the peel-and-bound queue; None = unlimited
    memory_cap: int | None = None

    def __post_init__(self):
        mode = self.node_select.replace("-", "_")
        if mode not in NODE_SELECT_MODES:
            raise ValueError(f"node_select must be one of {NODE_SELECT_MODES}, got {self.node_select!r}")
        object.__setattr__(self, "node_select", mode)
        if self.memory_cap is not None and self.memory_cap < 0:
            raise ValueError("memory_cap must be non-negative")


@dataclass
class SearchResult:
    algorithm: str
    width: float
    best_value: float
    best_sequence: tuple | None
    relaxed_bound: float
    closed: bool
    elapsed: float
    iterations: int
    queue_length: int
    events: list
    filter_stats: dict

    @property
    def gap(self):
        """``(upper - lower) / upper``; 0 when closed, 1 with no incumbent."""
        if self.closed:
            return 0.0
        if math.isinf(self.best_value):
            return 1.0
        if self.best_value == 0:
            return 0.0 if self.relaxed_bound >= 0 else 1.0
        return (self.best_value - self.relaxed_bound) / self.best_value


# -- queue -----------------------------------------------------------------------

@dataclass(order=True)
class QueueEntry:
    """A queued subproblem: an open :class:`Diagram` or just a root state."""

    priority: float
    seq: int
    payload: object = field(compare=False)

    @property
    def is_diagram(self):
        return isinstance(self.payload, Diagram)


class SearchQueue:
    """Min-heap of :class:`QueueEntry` by ``(priority, insertion order)``."""

    def __init__(self):
        self._heap = []
        self._count = itertools.count()

    def __len__(self):
        return len(self._heap)

    def __iter__(self):
        return iter(self._heap)

    def push(self, priority, payload):
        entry = QueueEntry(priority, next(self._count), payload)
        heapq.heappush(self._heap, entry)
        return entry

    def peek_priority(self):
        return self._heap[0].priority if self._heap else math.inf

    def pop(self):
        return heapq.heappop(self._heap)

    def purge(self, incumbent):
        """Drop entries whose bound cannot beat ``incumbent``; returns how many."""
        before = len(self._heap)
        self._heap = [e for e in self._heap if e.priority < incumbent]
        heapq.heapify(self._heap)
        return before - len(self._heap)

    def remove(self, entries):
        gone = {id(e) for e in entries}
        self._heap = [e for e in self._heap if id(e) not in gone]
        heapq.heapify(self._heap)


def select_diagram(queue):
    """Remove and return the entry with the smallest bound (earliest on ties)."""
    if not len(queue):
        raise IndexError("select from an empty queue")
    return queue.pop()


def memory_fallback(queue, cap, incumbent=math.inf):
    """Replace open diagrams beyond ``cap`` by bare root states.

    The diagrams whose bounds are largest (closest to the incumbent, so least
    likely to be popped soon) go first.  Each is replaced by the root states
    of its exact cutset, which are rebuilt from scratch when popped; using the
    cutset rather than the diagram's own root keeps the progress made by
    earlier peels.  With ``cap = 0`` the search is branch-and-bound over
    exact-arc relaxations.
    """
    if cap is None:
        return queue
    held = [e for e in queue if e.is_diagram]
    excess = len(held) - cap
    if excess <= 0:
        return queue
    held.sort(key=lambda e: (e.priority, e.seq), reverse=True)
    dropped = held[:excess]
    queue.remove(dropped)
    for e in dropped:
        for rs, b in cutset_states(e.payload):
            b = max(b, e.priority)
            if b < incumbent:
                queue.push(b, rs)
    return queue


# -- diagram helpers ---------------------------------------------------------------

def exact_cutset(d):
    """Exact nodes with at least one non-exact child.

    Exact nodes form a prefix of every root-terminal path, so each path meets
    this set at its last exact node (and possibly earlier).  An exact diagram
    (terminal exact) has no cutset and yields ``[]``.
    """
    out = []
    for _, nodes in d.iter_layers():
        for u in nodes:
            if u is d.terminal or not u.exact:
                continue
            if any(not a.dest.exact for a in u.outs):
                out.append(u)
    return out


def select_exact_node(d, mode="last_exact"):
    """Pick the exact node on the shortest path to peel at.

    ``last_exact``: the first node on the path with a non-exact child.
    ``frontier``: the deepest exact node on the path (never the terminal).
    Falls back to the root.
    """
    mode = mode.replace("-", "_")
    if mode not in NODE_SELECT_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    path = shortest_path_nodes(d)
    chosen = d.root
    for u in path:
        if u is d.terminal or not u.exact:
            break
        chosen = u
        if mode == "last_exact" and any(not a.dest.exact for a in u.outs):
            return u
    return chosen


def root_children(d):
    """One root state per feasible label leaving ``d``'s root, with the bound
    of the paths through that arc."""
    inst = d.instance
    seq = d.root_sequence
    known = len(seq) == d.root_layer
    last = d.root.state
    out = []
    for a in d.root.outs:
        e = a.label
        if d.prefix >> e & 1 or inst.pred_mask[e] & ~d.prefix:
            continue
        if last is not None and inst.cost[last][e] < 0:
            continue
        offset = d.root_offset + (0 if last is None else inst.cost[last][e])
        child = RootState(d.prefix | 1 << e, e, d.root_layer + 1, offset,
                          seq + (e,) if known else ())
        out.append((child, d.root_offset + a.value + a.dest.t_up))
    return out


def cutset_states(d):
    """Subproblems covering every path of ``d``: ``(RootState, bound)`` per
    exact-cutset node, or per root label when the root itself is on the
    cutset.  Nodes with equal ``(visited, last)`` are merged, keeping the
    cheaper prefix and the smaller bound."""
    cut = exact_cutset(d)
    found = {}

    def keep(rs, b):
        key = (rs.visited, rs.last)
        old = found.get(key)
        if old is None:
            found[key] = (rs, b)
        else:
            found[key] = (rs if rs.offset < old[0].offset else old[0], min(b, old[1]))

    if not cut or any(u is d.root for u in cut):
        for rs, b in root_children(d):
            keep(rs, b)
    for u in cut:
        if u is not d.root:
            keep(root_state_of(d, u), d.root_offset + u.t_star + u.t_up)
    return list(found.values())


# -- the search loop ----------------------------------------------------------------

class _Search:
    def __init__(self, instance, width, time_limit, config, on_event, algorithm):
        self.instance = instance
        self.width = math.inf if width is None else width
        if self.width < 1:
            raise ValueError("width must be at least 1")
        self.time_limit = math.inf if time_limit is None else time_limit
        self.config = config or SolverConfig()
        self.on_event = on_event
        self.algorithm = algorithm
        self.ctx = FilterContext(instance, config=self.config.filter)
        self.ordering = assignment_ordering(instance)
        self.queue = SearchQueue()
        self.incumbent = math.inf
        self.best_seq = None
        self.iterations = 0
        self.events = []
        self._last = None
        self._start = time.monotonic()

    # bookkeeping
    def elapsed(self):
        return time.monotonic() - self._start

    def out_of_time(self):
        return self.elapsed() >= self.time_limit

    def offer(self, value, seq):
        if seq is None or value >= self.incumbent:
            return False
        if not self.instance.is_feasible(seq) or self.instance.sequence_cost(seq) != value:
            raise AssertionError(f"bad incumbent {value} {seq}")
        self.incumbent = value
        self.best_seq = tuple(seq)
        self.ctx.incumbent = value
        self.queue.purge(value)
        log.debug("incumbent %s at iteration %d", value, self.iterations)
        return True

    def push(self, priority, payload):
        if priority < self.incumbent:
            self.queue.push(priority, payload)

    def global_bound(self):
        return min(self.queue.peek_priority(), self.incumbent)

    def emit(self, force=False):
        key = (self.global_bound(), self.incumbent, len(self.queue))
        if not force and self._last is not None and key[:2] == self._last[:2]:
            return
        self._last = key
        ev = BoundEvent(self.elapsed(), self.iterations, key[0], key[1], key[2])
        self.events.append(ev)
        if self.on_event is not None:
            self.on_event(ev)

    def result(self):
        closed = len(self.queue) == 0
        self.emit(force=True)
        return SearchResult(
            algorithm=self.algorithm,
            width=self.width,
            best_value=self.incumbent,
            best_sequence=self.best_seq,
            relaxed_bound=self.global_bound(),
            closed=closed,
            elapsed=self.elapsed(),
            iterations=self.iterations,
            queue_length=len(self.queue),
            events=self.events,
            filter_stats=dict(self.ctx.removed),
        )

    # shared steps
    def restrict(self, rs):
        r = build_restricted(self.instance, rs, self.width, self.incumbent, self.ctx.rrb)
        if r.best_sequence is not None and len(r.best_sequence) == self.instance.n:
            self.offer(r.best_value, r.best_sequence)
        return r.is_exact

    def closes(self, d):
        """Bound of ``d`` (``inf`` if empty) and whether ``d`` is settled.

        A diagram is settled when it is empty, cannot beat the incumbent, or
        its shortest path is a feasible sequence whose true cost equals the
        bound.
        """
        try:
            value, labels = shortest_path(d)
        except EmptyDiagram:
            return math.inf, True
        seq = full_sequence(d, labels)
        if len(seq) == self.instance.n and self.instance.is_feasible(seq):
            true = self.instance.sequence_cost(seq)
            self.offer(true, seq)
            if true == value:
                return value, True
        return value, value >= self.incumbent

    # branch-and-bound
    def bnb_expand(self, rs, priority):
        if self.restrict(rs):
            return
        d = build_width_one(self.instance, rs, self.ctx)
        refine(d, self.width, self.ordering, self.ctx, revalue=True)
        value, done = self.closes(d)
        if done:
            return
        priority = max(priority, value)
        for child, bound in cutset_states(d):
            self.push(max(priority, bound), child)

    def run_bnb(self):
        root = RootState.initial()
        self.iterations = 1
        self.bnb_expand(root, -math.inf)
        self.emit(force=True)
        while len(self.queue) and not self.out_of_time():
            entry = select_diagram(self.queue)
            if entry.priority >= self.incumbent:
                continue
            self.iterations += 1
            self.bnb_expand(entry.payload, entry.priority)
            self.emit()
        return self.result()

    # peel-and-bound
    def relax_from(self, rs):
        d = build_initial_relaxation(self.instance, rs, self.ctx)
        return refine(d, self.width, self.ordering, self.ctx)

    def pnb_settle(self, d, priority):
        value, done = self.closes(d)
        if not done:
            self.push(max(priority, value), d)

    def pnb_step(self, entry):
        d = entry.payload
        priority = entry.priority
        if not isinstance(d, Diagram):
            # demoted entry: rebuild from its root state
            if self.restrict(d):
                return
            d = self.relax_from(d)
            value, done = self.closes(d)
            if done:
                return
            priority = max(priority, value)
        u = select_exact_node(d, self.config.node_select)
        if u is d.root:
            self.pnb_branch_root(d, priority)
            return
        peeled, residual = peel(d, u, self.ctx)
        if not residual.is_empty():
            self.pnb_settle(residual, priority)
        if self.restrict(root_state_of(peeled, peeled.root)):
            return
        refine(peeled, self.width, self.ordering, self.ctx)
        self.pnb_settle(peeled, priority)
        memory_fallback(self.queue, self.config.memory_cap, self.incumbent)

    def pnb_branch_root(self, d, priority):
        # the root's children on the shortest path are not exact; queue one
        # root state per label leaving the root
        for child, bound in root_children(d):
            self.push(max(priority, bound), child)

    def run_pnb(self):
        root = RootState.initial()
        self.iterations = 1
        if not self.restrict(root):
            d = self.relax_from(root)
            self.pnb_settle(d, -math.inf)
            memory_fallback(self.queue, self.config.memory_cap, self.incumbent)
        self.emit(force=True)
        while len(self.queue) and not self.out_of_time():
            entry = select_diagram(self.queue)
            if entry.priority >= self.incumbent:
                continue
            self.iterations += 1
            self.pnb_step(entry)
            self.emit()
        return self.result()


def branch_and_bound(instance, width=64, time_limit=None, config=None, on_event=None):
    """Decision-diagram branch-and-bound.

    Each popped subproblem gets a restricted diagram (incumbent) and, unless
    that was exact, a relaxed diagram grown from width one; the exact cutset of
    the relaxation becomes the next subproblems.
    """
    return _Search(instance, width, time_limit, config, on_event, "bnb").run_bnb()


def peel_and_bound(instance, width=64, time_limit=None, config=None, on_event=None):
    """Peel-and-bound: open relaxed diagrams are queued whole and split by
    peeling at an exact node on their shortest path, so refinement work is
    reused instead of rebuilt."""
    return _Search(instance, width, time_limit, config, on_event, "pnb").run_pnb()


def solve(instance, algorithm="pnb", **kwargs):
    if algorithm == "bnb":
        return branch_and_bound(instance, **kwargs)
    if algorithm == "pnb":
        return peel_and_bound(instance, **kwargs)
    raise ValueError(f"unknown algorithm {algorithm!r}")
