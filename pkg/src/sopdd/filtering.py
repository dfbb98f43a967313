"""
Arc filtering rules and the rough relaxed bound (RRB).

Rules, each of which can be switched off through :class:`FilterConfig`:

R1  the label is already on every path into the arc's origin
R2  some element that must precede the label is on no path into the origin
R3  the label must precede an element that is on every path into the origin
R4  counting: the origin's paths already use up all labels in ``some_down``;
    with fresh up-states also the symmetric suffix checks
R5  cost: path value so far + arc value + completion bound exceeds the incumbent

Rules only read node attributes (``some_down``, ``all_down``, ``t_star``,
``layer`` and, for up-checks, ``some_up``, ``all_up``, ``t_up``), so they work on
any node/arc objects that carry them.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .instance import INFEASIBLE

ALL_RULES = frozenset({"R1", "R2", "R3", "R4", "R5"})


@dataclass(frozen=True)
class FilterConfig:
    rules: frozenset = ALL_RULES
    rrb_enabled: bool = True

    def __post_init__(self):
        rules = frozenset(r.upper() for r in self.rules)
        unknown = rules - ALL_RULES
        if unknown:
            raise ValueError(f"unknown filter rules: {sorted(unknown)}")
        object.__setattr__(self, "rules", rules)

    @classmethod
    def from_mapping(cls, mapping):
        """Build from the ``{"filter.rules": [...], "rrb.enabled": bool}`` config keys."""
        rules = mapping.get("filter.rules", ALL_RULES)
        if isinstance(rules, str):
            rules = [r for r in rules.replace(" ", "").split(",") if r]
        return cls(rules=frozenset(rules), rrb_enabled=bool(mapping.get("rrb.enabled", True)))


class RrbTables:
    """Per element, the other elements sorted by (symmetric) distance.

    The distance between ``u`` and ``w`` is ``min(cost[u][w], cost[w][u])`` over
    the finite entries; pairs with no finite entry are left out.
    """

    _CACHE_LIMIT = 1 << 17

    def __init__(self, instance):
        self.n = instance.n
        cost = instance.cost
        near = []
        for u in range(self.n):
            row = []
            for w in range(self.n):
                if w == u:
                    continue
                finite = [c for c in (cost[u][w], cost[w][u]) if c != INFEASIBLE]
                if finite:
                    row.append((min(finite), w))
            row.sort()
            near.append(tuple(row))
        self.near = tuple(near)
        self._cache = {}

    def nearest_unvisited(self, unvisited):
        """Sorted list of each unvisited element's distance to its nearest
        other unvisited element."""
        cached = self._cache.get(unvisited)
        if cached is not None:
            return cached
        vals = []
        rest = unvisited
        while rest:
            low = rest & -rest
            x = low.bit_length() - 1
            rest ^= low
            for dist, w in self.near[x]:
                if unvisited >> w & 1:
                    vals.append(dist)
                    break
        vals.sort()
        prefix = [0]
        for v in vals:
            prefix.append(prefix[-1] + v)
        if len(self._cache) >= self._CACHE_LIMIT:
            self._cache.clear()
        self._cache[unvisited] = prefix
        return prefix

    def completion(self, unvisited, count):
        """Sum of the ``count`` smallest nearest-unvisited distances."""
        if count <= 0 or not unvisited:
            return 0
        prefix = self.nearest_unvisited(unvisited)
        return prefix[min(count, len(prefix) - 1)]


@dataclass
class FilterContext:
    """Everything a filter needs besides the diagram itself."""

    instance: object
    incumbent: float = math.inf
    config: FilterConfig = field(default_factory=FilterConfig)
    rrb: RrbTables | None = None
    removed: Counter = field(default_factory=Counter)

    def __post_init__(self):
        if self.rrb is None and self.config.rrb_enabled:
            self.rrb = RrbTables(self.instance)
        self.full = self.instance.full_mask


def rrb_of_arc(arc, diagram, ctx):
    """Rough relaxed bound of ``arc``: path value up to the arc's end (including
    the diagram's root offset) plus a completion estimate."""
    origin = arc.origin
    value = diagram.root_offset + origin.t_star + arc.value
    if ctx.rrb is None:
        return value
    n = ctx.instance.n
    dest_layer = origin.layer + 1
    visited = origin.all_down | (1 << arc.label)
    unvisited = ctx.full & ~visited
    # transitions among the still unvisited elements; the step out of the
    # arc's label is not covered by the distance table
    count = n - dest_layer - 1
    return value + ctx.rrb.completion(unvisited, count)


def filter_arc(diagram, arc, ctx, use_up=False):
    """Return the name of the first rule that removes ``arc``, or ``None`` to keep it.

    ``use_up`` enables the checks that read the destination's up-states; only
    pass it when those are fresh (or conservatively stale).
    """
    rules = ctx.config.rules
    inst = ctx.instance
    origin = arc.origin
    label = arc.label
    bit = 1 << label
    if "R1" in rules and origin.all_down & bit:
        return "R1"
    if "R2" in rules and inst.pred_mask[label] & ~origin.some_down:
        return "R2"
    if "R3" in rules and inst.succ_mask[label] & origin.all_down:
        return "R3"
    if "R4" in rules and origin.some_down & bit and origin.some_down.bit_count() == origin.layer:
        return "R4"
    dest = arc.dest
    if use_up:
        if "R1" in rules and dest.all_up & bit:
            return "R1"
        if "R2" in rules and inst.pred_mask[label] & dest.all_up:
            return "R2"
        if "R3" in rules and inst.succ_mask[label] & ~dest.some_up:
            return "R3"
        if "R4" in rules:
            below = inst.n - dest.layer
            if dest.some_up & bit and dest.some_up.bit_count() == below:
                return "R4"
            if (origin.some_down | bit | dest.some_up).bit_count() < inst.n:
                return "R4"
    if "R5" in rules and ctx.incumbent < math.inf:
        inc = ctx.incumbent
        value = diagram.root_offset + origin.t_star + arc.value
        if value > inc or (use_up and value + dest.t_up > inc):
            return "R5"
        rrb = ctx.rrb
        if ctx.config.rrb_enabled and rrb is not None:
            count = inst.n - origin.layer - 2
            if count > 0:
                unvisited = ctx.full & ~(origin.all_down | bit)
                prefix = rrb._cache.get(unvisited)
                if prefix is None:
                    prefix = rrb.nearest_unvisited(unvisited)
                if value + prefix[min(count, len(prefix) - 1)] > inc:
                    return "R5"
    return None


def apply_filter(diagram, arc, ctx, use_up=False):
    """Filter ``arc`` and delete it from ``diagram`` if a rule fires."""
    reason = filter_arc(diagram, arc, ctx, use_up)
    if reason is not None:
        ctx.removed[reason] += 1
        diagram.remove_arc(arc)
    return reason


def filter_pass(diagram, ctx, use_up=False):
    """One top-down sweep filtering every arc; returns the number removed.

    Down-states are refreshed layer by layer so removals on one layer tighten
    the checks on the next.  Up-states, when used, are read as they were at the
    start of the sweep; removals only shrink ``some_up`` and grow ``all_up`` and
    ``t_up``, so stale values stay on the safe side.
    """
    removed = 0
    for j, layer in diagram.iter_layers():
        if j > diagram.root_layer:
            for u in layer:
                diagram.refresh_down(u)
        for u in list(layer):
            for a in list(u.outs):
                if apply_filter(diagram, a, ctx, use_up):
                    removed += 1
    return removed
