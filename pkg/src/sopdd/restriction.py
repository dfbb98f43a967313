"""
Restricted diagrams: a width-limited greedy expansion that yields feasible
sequences (upper bounds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .diagram import Diagram, RootState, prune_dangling, recompute_states
from .instance import INFEASIBLE


@dataclass
class RestrictedResult:
    """Outcome of :func:`build_restricted`.

    ``best_value`` is ``inf`` and ``best_sequence`` is ``None`` when no
    sequence survived.  ``is_exact`` means nothing was dropped for width, so
    the diagram held every completion that could beat the incumbent.
    """

    diagram: Diagram | None
    best_value: float
    best_sequence: tuple | None
    is_exact: bool
    discarded: int = 0

    @property
    def empty(self):
        return self.best_sequence is None


def _unwind(link):
    out = []
    while link is not None:
        label, link = link
        out.append(label)
    out.reverse()
    return out


def build_restricted(instance, root_state=None, width=None, incumbent=math.inf, rrb=None,
                     keep_diagram=False):
    """Expand exact nodes top-down, keeping at most ``width`` per layer.

    When a layer is too wide the nodes with the largest path value are
    dropped (ties: larger ``(last, visited)`` goes first).  Candidate children
    whose value plus the rough completion bound ``rrb`` reaches ``incumbent``
    are never created; that does not cost exactness since none of them could
    improve on it.  No two nodes are ever merged.

    ``keep_diagram`` also builds the explicit :class:`Diagram` (for tests and
    inspection); otherwise only the best sequence is tracked.
    """
    if root_state is None:
        root_state = RootState.initial()
    if width is None:
        width = math.inf
    if width < 1:
        raise ValueError(f"width must be at least 1, got {width}")
    n = instance.n
    cost = instance.cost
    pred = instance.pred_mask
    full = instance.full_mask
    k = root_state.layer
    base = root_state.offset
    prefix = tuple(root_state.sequence)

    d = None
    if keep_diagram:
        d = Diagram(instance, root_layer=k, root_state=root_state.last, root_offset=base,
                    prefix=root_state.visited, root_sequence=prefix)

    # entry: (value, last, visited, link, node)
    layer = [(base, root_state.last, root_state.visited, None, d.root if d else None)]
    exact = True
    discarded = 0
    for j in range(k + 1, n + 1):
        # transitions among the elements still unplaced after this step
        remaining = n - j - 1
        children = []
        for value, last, visited, link, node in layer:
            free = full & ~visited
            rest = free
            while rest:
                low = rest & -rest
                e = low.bit_length() - 1
                rest ^= low
                if pred[e] & ~visited:
                    continue
                if last is None:
                    step = 0
                else:
                    step = cost[last][e]
                    if step == INFEASIBLE or pred[last] >> e & 1:
                        continue
                v = value + step
                nv = visited | low
                if incumbent < math.inf:
                    lb = v
                    if rrb is not None and remaining > 0:
                        lb += rrb.completion(full & ~nv, remaining)
                    if lb >= incumbent:
                        continue
                children.append((v, e, nv, (e, link), node, step))
        if len(children) > width:
            children.sort(key=lambda c: (c[0], c[1], c[2]))
            discarded += len(children) - width
            del children[width:]
            exact = False
        if d is not None:
            nxt = []
            for v, e, nv, link, node, step in children:
                dest = d.terminal if j == n else d.add_node(j, e)
                d.add_arc(node, dest, e, step)
                nxt.append((v, e, nv, link, dest))
            layer = nxt
        else:
            layer = [c[:5] for c in children]
        if not layer:
            break

    best_value = math.inf
    best_seq = None
    if layer and len(prefix) == k:
        for value, last, visited, link, _ in layer:
            if value < best_value:
                best_value = value
                best_seq = prefix + tuple(_unwind(link))
    elif layer:
        # prefix order unknown: report the suffix only
        for value, last, visited, link, _ in layer:
            if value < best_value:
                best_value = value
                best_seq = tuple(_unwind(link))
    if d is not None:
        prune_dangling(d)
        recompute_states(d, up=True)
    return RestrictedResult(d, best_value, best_seq, exact, discarded)

