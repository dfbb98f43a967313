"""
Peeling: move the sub-diagram induced by an exact node into its own diagram.
"""

from __future__ import annotations

from .diagram import Diagram, prefix_labels, prune_dangling, recompute_states
from .filtering import apply_filter


def peel(d, u, ctx):
    """Split ``d`` into the paths through ``u`` and the rest.

    ``u`` must be an exact, non-root, non-terminal node of ``d``.  It becomes
    the root of a new diagram; every node reached from it is separated top-down
    (in-arcs coming from the new diagram move to a copy, out-arcs are copied
    and both copies are filtered) until no arc crosses back into ``d``.

    Returns ``(peeled, residual)``; ``residual`` is ``d`` itself, modified in
    place.  Arcs are only ever moved, copied or deleted, never revalued.
    """
    if not d.contains(u):
        raise KeyError(f"node {u!r} is not in the diagram")
    if u is d.terminal or u is d.root:
        raise ValueError("cannot peel the root or the terminal")
    if not u.exact:
        raise ValueError(f"node {u.id} is not exact")
    offset = d.root_offset + u.t_star
    prefix = u.all_down
    state = u.state
    if state is None:
        state = u.in_labels.bit_length() - 1
    seq = ()
    if len(d.root_sequence) == d.root_layer:
        seq = d.root_sequence + tuple(prefix_labels(d, u))

    parents = [a.origin for a in u.ins]
    for a in list(u.ins):
        d.remove_arc(a)
    d.layer(u.layer).remove(u)

    peeled = Diagram(d.instance, root_layer=u.layer, root_offset=offset, prefix=prefix, root=u,
                     root_sequence=seq)
    u.state = state
    term_copy = peeled.terminal
    inside = {u}
    frontier = [u]
    touched = list(parents)

    for j in range(u.layer + 1, d.n + 1):
        targets = {}
        for o in frontier:
            for a in o.outs:
                m = a.dest
                if m not in inside:
                    targets.setdefault(m, []).append(a)
        if not targets:
            break
        frontier = []
        for m, moving in targets.items():
            if m is d.terminal:
                copy = term_copy
            else:
                copy = peeled.add_node(j, m.state)
            inside.add(copy)
            for a in moving:
                d.redirect(a, copy)
            peeled.refresh_down(copy)
            for a in moving:
                apply_filter(peeled, a, ctx)
            if m is d.terminal:
                continue
            peeled.refresh_down(copy)
            if copy.ins:
                for a in list(m.outs):
                    c = peeled.add_arc(copy, a.dest, a.label, a.value)
                    apply_filter(peeled, c, ctx)
            d.refresh_down(m)
            for a in list(m.outs):
                apply_filter(d, a, ctx)
            touched.append(m)
            if copy.ins and copy.outs:
                frontier.append(copy)
            else:
                _drop(peeled, copy, inside)

    d.discard_dangling(touched)
    prune_dangling(d)
    recompute_states(d, up=True)
    prune_dangling(peeled)
    recompute_states(peeled, up=True)
    return peeled, d


def _drop(peeled, node, inside):
    # a copy that lost all its arcs; its out-arcs (if any) still point into
    # the residual and must go with it
    for a in list(node.outs):
        peeled.remove_arc(a)
    for a in list(node.ins):
        peeled.remove_arc(a)
    peeled.layer(node.layer).remove(node)
    inside.discard(node)
