"""
Layered multivalued decision diagrams for sequencing.

Layer ``j`` holds the nodes reached after ``j`` sequence positions have been
filled, so a diagram rooted at a node with ``k`` placed elements spans layers
``k .. n`` and every root-terminal path has ``n - k`` arcs.  Arc values and
shortest-path values are integers; ``t_star`` is measured from the diagram's
root and ``root_offset`` carries the cost of the prefix above it.

Set-valued node states (``some_down``, ``all_down``, ``some_up``, ``all_up``,
``in_labels``) are bitmasks over elements.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .instance import INFEASIBLE

INF = math.inf

_ids = itertools.count()


class EmptyDiagram(Exception):
    """The diagram has no root-terminal path (the subproblem is infeasible or pruned)."""


class PathLimitExceeded(Exception):
    pass


class Arc:
    __slots__ = ("origin", "dest", "label", "value")

    def __init__(self, origin, dest, label, value):
        self.origin = origin
        self.dest = dest
        self.label = label
        self.value = value

    def __repr__(self):
        return f"Arc({self.origin.id}->{self.dest.id}, {self.label}:{self.value})"


class Node:
    __slots__ = (
        "id", "layer", "state", "ins", "outs",
        "some_down", "all_down", "in_labels", "t_star", "exact",
        "some_up", "all_up", "t_up",
    )

    def __init__(self, layer, state):
        self.id = next(_ids)
        self.layer = layer
        self.state = state
        # dicts used as insertion-ordered sets so iteration is deterministic
        self.ins = {}
        self.outs = {}
        self.some_down = 0
        self.all_down = 0
        self.in_labels = 0
        self.t_star = INF
        self.exact = False
        self.some_up = 0
        self.all_up = 0
        self.t_up = INF

    def __repr__(self):
        return f"Node(id={self.id}, layer={self.layer}, state={self.state})"


@dataclass(frozen=True)
class RootState:
    """Exact prefix information for the root of a (sub)problem."""

    visited: int
    last: int | None
    layer: int
    offset: int = 0
    # order in which ``visited`` was placed; empty when unknown
    sequence: tuple = ()

    @classmethod
    def initial(cls):
        return cls(visited=0, last=None, layer=0, offset=0)

    def __post_init__(self):
        if self.visited.bit_count() != self.layer:
            raise ValueError("layer must equal the number of visited elements")
        if self.sequence:
            seq = tuple(self.sequence)
            mask = 0
            for e in seq:
                mask |= 1 << e
            if len(seq) != self.layer or mask != self.visited or seq[-1] != self.last:
                raise ValueError("sequence does not match visited/last")
            object.__setattr__(self, "sequence", seq)


class Diagram:
    """A layered DAG with one root and one terminal."""

    def __init__(self, instance, root_layer, root_state=None, root_offset=0, prefix=0, root=None,
                 root_sequence=()):
        self.instance = instance
        self.n = instance.n
        self.root_layer = root_layer
        self.root_offset = root_offset
        self.prefix = prefix
        self.root_sequence = tuple(root_sequence)
        if root is None:
            root = Node(root_layer, root_state)
        self.root = root
        self.terminal = Node(self.n, None)
        self.layers = [[] for _ in range(self.n - root_layer + 1)]
        self.layers[0].append(self.root)
        if self.n > root_layer:
            self.layers[-1].append(self.terminal)
        else:
            self.terminal = self.root
        self._init_root()

    def _init_root(self):
        r = self.root
        r.some_down = r.all_down = self.prefix
        r.in_labels = 0
        r.t_star = 0
        r.exact = True

    # -- structure -----------------------------------------------------------
    def layer(self, j):
        return self.layers[j - self.root_layer]

    def iter_layers(self):
        for i, nodes in enumerate(self.layers):
            yield self.root_layer + i, nodes

    def nodes(self):
        for nodes in self.layers:
            yield from nodes

    def arcs(self):
        for u in self.nodes():
            yield from u.outs

    @property
    def width(self):
        return max(len(nodes) for nodes in self.layers)

    def node_count(self):
        return sum(len(nodes) for nodes in self.layers)

    def arc_count(self):
        return sum(len(u.outs) for u in self.nodes())

    def is_empty(self):
        return not self.terminal.ins and self.terminal is not self.root

    def add_node(self, layer, state):
        u = Node(layer, state)
        self.layers[layer - self.root_layer].append(u)
        return u

    def add_arc(self, origin, dest, label, value):
        a = Arc(origin, dest, label, value)
        origin.outs[a] = None
        dest.ins[a] = None
        return a

    def remove_arc(self, a):
        a.origin.outs.pop(a, None)
        a.dest.ins.pop(a, None)

    def redirect(self, a, new_dest):
        a.dest.ins.pop(a, None)
        a.dest = new_dest
        new_dest.ins[a] = None

    def remove_node(self, u):
        for a in list(u.ins):
            self.remove_arc(a)
        for a in list(u.outs):
            self.remove_arc(a)
        nodes = self.layers[u.layer - self.root_layer]
        try:
            nodes.remove(u)
        except ValueError:
            pass

    def contains(self, u):
        idx = u.layer - self.root_layer
        return 0 <= idx < len(self.layers) and any(v is u for v in self.layers[idx])

    def discard_dangling(self, candidates):
        """Remove interior nodes among ``candidates`` (and any nodes this
        exposes) that lack in- or out-arcs."""
        stack = list(candidates)
        root, term = self.root, self.terminal
        while stack:
            u = stack.pop()
            if u is root or u is term:
                continue
            if u.ins and u.outs:
                continue
            if not self.contains(u):
                continue
            neighbours = [a.origin for a in u.ins] + [a.dest for a in u.outs]
            self.remove_node(u)
            stack.extend(neighbours)

    # -- states --------------------------------------------------------------
    def refresh_down(self, u):
        """Recompute ``u``'s down-states from its in-arcs (parents assumed fresh)."""
        if u is self.root:
            self._init_root()
            return
        some = 0
        every = -1
        labels = 0
        best = INF
        exact = True
        pred = self.instance.pred_mask
        for a in u.ins:
            o = a.origin
            b = 1 << a.label
            some |= o.some_down | b
            every &= o.all_down | b
            labels |= b
            t = o.t_star + a.value
            if t < best:
                best = t
            # exact only if the arc extends the parent's prefix feasibly, so
            # exactness never depends on which filter rules ran
            if not o.exact or o.all_down & b or pred[a.label] & ~o.all_down:
                exact = False
        if not u.ins:
            every = 0
            exact = False
        u.some_down = some
        u.all_down = every
        u.in_labels = labels
        u.t_star = best
        single = labels & (labels - 1) == 0
        u.exact = (exact and some == every and every.bit_count() == u.layer
                   and (single or u is self.terminal))

    def refresh_up(self, u):
        if u is self.terminal:
            u.some_up = u.all_up = 0
            u.t_up = 0
            return
        some = 0
        every = -1
        best = INF
        for a in u.outs:
            d = a.dest
            b = 1 << a.label
            some |= d.some_up | b
            every &= d.all_up | b
            t = a.value + d.t_up
            if t < best:
                best = t
        if not u.outs:
            every = 0
        u.some_up = some
        u.all_up = every
        u.t_up = best


def recompute_states(d, up=True):
    """Top-down pass for down-states, ``t_star`` and exactness; bottom-up pass
    for up-states and ``t_up``."""
    for _, nodes in d.iter_layers():
        for u in nodes:
            d.refresh_down(u)
    if up:
        for nodes in reversed(d.layers):
            for u in nodes:
                d.refresh_up(u)
    return d


def is_exact_node(d, u):
    if not d.contains(u):
        raise KeyError(f"node {u!r} is not in the diagram")
    return u.exact


def prune_dangling(d):
    """Drop interior nodes with no in-arcs or no out-arcs, to a fixpoint."""
    d.discard_dangling([u for u in d.nodes() if not (u.ins and u.outs)])
    return d


def _shortest_arcs(d):
    dist = {d.root: 0}
    for _, nodes in d.iter_layers():
        for u in nodes:
            du = dist.get(u)
            if du is None:
                continue
            for a in u.outs:
                t = du + a.value
                cur = dist.get(a.dest)
                if cur is None or t < cur:
                    dist[a.dest] = t
    if d.terminal not in dist:
        raise EmptyDiagram("terminal is unreachable")
    arcs = []
    u = d.terminal
    while u is not d.root:
        best = None
        for a in u.ins:
            do = dist.get(a.origin)
            if do is None:
                continue
            key = (do + a.value, a.label)
            if best is None or key < best[0]:
                best = (key, a)
        arcs.append(best[1])
        u = best[1].origin
    arcs.reverse()
    return d.root_offset + dist[d.terminal], arcs


def shortest_path(d):
    """Return ``(value, labels)`` of a shortest root-terminal path.

    The value includes ``root_offset``.  Ties go to the lowest label.  Raises
    :class:`EmptyDiagram` if the terminal is unreachable.
    """
    if d.root is d.terminal:
        return d.root_offset, []
    value, arcs = _shortest_arcs(d)
    return value, [a.label for a in arcs]


def shortest_path_nodes(d):
    """Nodes along the witness of :func:`shortest_path`, root first."""
    if d.root is d.terminal:
        return [d.root]
    _, arcs = _shortest_arcs(d)
    return [d.root] + [a.dest for a in arcs]


def bound(d):
    """Shortest path value, or ``inf`` for an empty diagram."""
    try:
        return shortest_path(d)[0]
    except EmptyDiagram:
        return INF


def enumerate_paths(d, cap=100_000):
    """All root-terminal label sequences (a testing aid)."""
    out = []

    def walk(u, prefix):
        if u is d.terminal:
            out.append(tuple(prefix))
            if len(out) > cap:
                raise PathLimitExceeded(f"more than {cap} paths")
            return
        for a in u.outs:
            prefix.append(a.label)
            walk(a.dest, prefix)
            prefix.pop()

    if d.root is d.terminal:
        return [()]
    walk(d.root, [])
    return out


def enumerate_path_values(d, cap=100_000):
    """Like :func:`enumerate_paths` but yields ``(labels, value)`` pairs, values
    including the root offset."""
    out = []

    def walk(u, prefix, value):
        if u is d.terminal:
            out.append((tuple(prefix), value))
            if len(out) > cap:
                raise PathLimitExceeded(f"more than {cap} paths")
            return
        for a in u.outs:
            prefix.append(a.label)
            walk(a.dest, prefix, value + a.value)
            prefix.pop()

    walk(d.root, [], d.root_offset)
    return out


def prefix_labels(d, u):
    """Labels of a cheapest root-to-``u`` path (down-states must be fresh)."""
    out = []
    while u is not d.root:
        best = None
        for a in u.ins:
            key = (a.origin.t_star + a.value, a.label)
            if best is None or key < best[0]:
                best = (key, a)
        if best is None:
            raise EmptyDiagram(f"node {u.id} is not reachable from the root")
        out.append(best[1].label)
        u = best[1].origin
    out.reverse()
    return out


def full_sequence(d, labels):
    """Prepend the diagram's known prefix to a root-terminal label list."""
    return tuple(d.root_sequence) + tuple(labels)


def root_state_of(d, u):
    """Prefix information of an exact node ``u`` viewed as a subproblem root."""
    if u is d.root:
        return RootState(d.prefix, d.root.state, d.root_layer, d.root_offset, d.root_sequence)
    state = u.state
    if state is None:
        labels = u.in_labels
        if labels & (labels - 1):
            raise ValueError("node has no single state")
        state = labels.bit_length() - 1
    seq = ()
    if len(d.root_sequence) == d.root_layer:
        seq = d.root_sequence + tuple(prefix_labels(d, u))
    return RootState(u.all_down, state, u.layer, d.root_offset + u.t_star, seq)


def to_dot(d, name="mdd"):
    """Graphviz text: nodes labelled ``state|T*``, arcs ``label:value``."""
    lines = [f"digraph {name} {{", "  rankdir=TB;"]
    for j, nodes in d.iter_layers():
        ids = " ".join(f"n{u.id};" for u in nodes)
        lines.append(f"  {{ rank=same; {ids} }}")
        for u in nodes:
            state = "r" if u is d.root else "t" if u is d.terminal else u.state
            t = "inf" if u.t_star == INF else u.t_star
            shape = "box" if u.exact else "ellipse"
            lines.append(f'  n{u.id} [label="{state}|{t}", shape={shape}];')
    for a in d.arcs():
        lines.append(f'  n{a.origin.id} -> n{a.dest.id} [label="{a.label}:{a.value}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- construction --------------------------------------------------------------

def _position_windows(instance, root_state):
    """Earliest/latest 0-based sequence position for each unplaced element, or
    ``None`` when some unplaced element can no longer be placed."""
    n = instance.n
    visited = root_state.visited
    k = root_state.layer
    windows = {}
    for e in range(n):
        if visited >> e & 1:
            continue
        if instance.succ_mask[e] & visited:
            return None
        early = k + (instance.pred_mask[e] & ~visited).bit_count()
        late = n - 1 - instance.succ_mask[e].bit_count()
        if early > late:
            return None
        windows[e] = (early, late)
    return windows


def _new_diagram(instance, root_state):
    return Diagram(
        instance,
        root_layer=root_state.layer,
        root_state=root_state.last,
        root_offset=root_state.offset,
        prefix=root_state.visited,
        root_sequence=root_state.sequence,
    )


def _arc_allowed(instance, a, b):
    if a == b:
        return False
    c = instance.cost[a][b]
    if c == INFEASIBLE:
        return False
    return not (instance.pred_mask[a] >> b & 1)


def settle(d, ctx):
    """Recompute states, run one filter sweep using them, prune what the sweep
    disconnected and recompute again."""
    from .filtering import filter_pass

    recompute_states(d, up=True)
    if ctx is not None:
        filter_pass(d, ctx, use_up=True)
    prune_dangling(d)
    return recompute_states(d, up=True)


def _finish(d, ctx):
    return settle(d, ctx)


def build_initial_relaxation(instance, root_state=None, ctx=None):
    """Width-``n`` relaxation in which every node holds one element.

    Each interior layer gets one node per element that may occupy that
    position; arcs join every feasible consecutive pair, so all arcs ending at a
    node share its label and every arc value is an exact transition cost.
    """
    if root_state is None:
        root_state = RootState.initial()
    d = _new_diagram(instance, root_state)
    n = instance.n
    k = root_state.layer
    if k == n:
        return d
    windows = _position_windows(instance, root_state)
    if windows is None:
        return d
    cost = instance.cost
    prev = [d.root]
    for j in range(k + 1, n + 1):
        pos = j - 1  # sequence position decided by arcs entering layer j
        cands = [e for e, (lo, hi) in windows.items() if lo <= pos <= hi]
        if j < n:
            targets = [(d.add_node(j, e), e) for e in cands]
        else:
            targets = [(d.terminal, e) for e in cands]
        for u in prev:
            s = u.state
            for v, e in targets:
                if u is d.root:
                    if s is None:
                        value = 0
                    elif _arc_allowed(instance, s, e):
                        value = cost[s][e]
                    else:
                        continue
                    if instance.pred_mask[e] & ~root_state.visited:
                        continue
                elif _arc_allowed(instance, s, e):
                    value = cost[s][e]
                else:
                    continue
                d.add_arc(u, v, e, value)
        prev = [v for v, _ in targets] if j < n else []
    return _finish(d, ctx)


def arc_value_from_labels(instance, labels, label):
    """Cheapest transition into ``label`` from any element in ``labels``."""
    cost = instance.cost
    best = INF
    rest = labels
    while rest:
        low = rest & -rest
        s = low.bit_length() - 1
        rest ^= low
        if _arc_allowed(instance, s, label):
            c = cost[s][label]
            if c < best:
                best = c
    return best


def build_width_one(instance, root_state=None, ctx=None):
    """Width-1 relaxation: one node per layer with an arc for every element that
    may take that position.  Arc values are the cheapest transition from any
    label entering the origin, so they are lower bounds, not exact costs."""
    if root_state is None:
        root_state = RootState.initial()
    d = _new_diagram(instance, root_state)
    n = instance.n
    k = root_state.layer
    if k == n:
        return d
    windows = _position_windows(instance, root_state)
    if windows is None:
        return d
    cost = instance.cost
    u = d.root
    u_labels = None
    for j in range(k + 1, n + 1):
        pos = j - 1
        cands = [e for e, (lo, hi) in windows.items() if lo <= pos <= hi]
        v = d.add_node(j, None) if j < n else d.terminal
        labels = 0
        for e in cands:
            if u is d.root:
                s = root_state.last
                if instance.pred_mask[e] & ~root_state.visited:
                    continue
                if s is None:
                    value = 0
                elif _arc_allowed(instance, s, e):
                    value = cost[s][e]
                else:
                    continue
            else:
                value = arc_value_from_labels(instance, u_labels, e)
                if value == INF:
                    continue
            d.add_arc(u, v, e, value)
            labels |= 1 << e
        u, u_labels = v, labels
    return _finish(d, ctx)
