"""
Strengthening relaxed diagrams by splitting nodes into label classes.
"""

from __future__ import annotations

from .diagram import INF, arc_value_from_labels, prune_dangling, settle
from .filtering import apply_filter
from .instance import INFEASIBLE


def assignment_ordering(instance):
    """Static label order, most important first.

    Elements are sorted by their average finite transition cost to and from
    the other elements (descending), then by how many elements they must
    precede (descending), then by id.
    """
    n = instance.n
    cost = instance.cost
    keys = []
    for e in range(n):
        vals = []
        for j in range(n):
            if j == e:
                continue
            for c in (cost[e][j], cost[j][e]):
                if c != INFEASIBLE:
                    vals.append(c)
        avg = sum(vals) / len(vals) if vals else 0.0
        keys.append((-avg, -instance.succ_mask[e].bit_count(), e))
    keys.sort()
    return tuple(k[2] for k in keys)


def select_nodes(layer, phi):
    """Nodes on ``layer`` where ``phi`` is on some but not all incoming paths."""
    bit = 1 << phi
    return [u for u in layer if u.some_down & bit and not u.all_down & bit]


def split_node(d, u, phi, ctx):
    """Separate ``u`` into the paths that contain ``phi`` and those that do not.

    Returns the two new nodes, or ``None`` when every in-arc falls in the same
    class (the split would not change anything).  Either new node may have
    been deleted afterwards if filtering left it without arcs.
    """
    bit = 1 << phi
    if not (u.some_down & bit and not u.all_down & bit):
        raise ValueError(f"node {u.id} cannot be split on {phi}")
    with_phi = []
    without = []
    for a in u.ins:
        if (a.origin.all_down | (1 << a.label)) & bit:
            with_phi.append(a)
        else:
            without.append(a)
    if not with_phi or not without:
        return None
    u1 = d.add_node(u.layer, u.state)
    u2 = d.add_node(u.layer, u.state)
    for a in with_phi:
        d.redirect(a, u1)
    for a in without:
        d.redirect(a, u2)
    d.refresh_down(u1)
    d.refresh_down(u2)
    touched = []
    for a in with_phi + without:
        if apply_filter(d, a, ctx):
            touched.append(a.origin)
    if u1.ins or u2.ins:
        d.refresh_down(u1)
        d.refresh_down(u2)
    for a in list(u.outs):
        for nu in (u1, u2):
            if nu.ins:
                copy = d.add_arc(nu, a.dest, a.label, a.value)
                apply_filter(d, copy, ctx)
        touched.append(a.dest)
    d.remove_node(u)
    d.discard_dangling([u1, u2] + touched)
    return u1, u2


def _revalue_layer(d, j):
    """Reset each out-arc value on layer ``j`` to the cheapest transition from
    the labels now entering its origin; drops arcs that became impossible.
    Returns ``(dropped, changed)``."""
    inst = d.instance
    dead = []
    changed = False
    for u in d.layer(j):
        if u is d.root:
            continue
        for a in list(u.outs):
            value = arc_value_from_labels(inst, u.in_labels, a.label)
            if value == INF:
                d.remove_arc(a)
                dead.append(u)
                dead.append(a.dest)
            elif value != a.value:
                a.value = value
                changed = True
    d.discard_dangling(dead)
    return bool(dead), changed or bool(dead)


def _revalue_all(d):
    """Revalue every layer top-down; True if any arc value or arc changed.

    In-labels only shrink as arcs disappear, so values only go up.  Sweeps
    repeat until no arc is dropped."""
    any_change = False
    again = True
    while again:
        again = False
        for j, layer in d.iter_layers():
            if j == d.root_layer or j == d.n:
                continue
            for u in layer:
                d.refresh_down(u)
            dropped, changed = _revalue_layer(d, j)
            again = again or dropped
            any_change = any_change or changed
    return any_change


def refine(d, width, ordering, ctx, revalue=False):
    """Split nodes top-down until each layer is exact or has ``width`` nodes.

    ``revalue`` turns on the extra step needed when arcs do not carry exact
    values (diagrams grown from a width-1 start): after a layer is done, the
    values of the arcs leaving it are recomputed.
    """
    if width is None:
        width = INF
    n = d.n
    for j in range(d.root_layer + 1, n):
        layer = d.layer(j)
        for u in layer:
            d.refresh_down(u)
        stale = []
        for u in list(layer):
            for a in list(u.outs):
                if apply_filter(d, a, ctx):
                    stale.append(a.dest)
            if not u.outs:
                stale.append(u)
        d.discard_dangling(stale)

        progress = True
        while progress and len(layer) < width and any(not u.exact for u in layer):
            progress = False
            for phi in ordering:
                if len(layer) >= width:
                    break
                candidates = select_nodes(layer, phi)
                candidates.sort(key=lambda v: (v.t_star, v.id))
                for u in candidates:
                    if len(layer) >= width:
                        break
                    if not d.contains(u):
                        continue
                    if split_node(d, u, phi, ctx) is not None:
                        progress = True
        if revalue:
            _revalue_layer(d, j)

    prune_dangling(d)
    settle(d, ctx)
    if revalue:
        # filtering can shrink in-labels again; alternate until stable so
        # exact nodes end up with exact out-arc values
        while _revalue_all(d):
            settle(d, ctx)
    return d
