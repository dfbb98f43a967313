import math
from itertools import permutations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force, dfs_paths, dfs_path_values, feasible_perms, paths_to
from sopdd import from_matrix, random_instance
from sopdd.diagram import (
    Diagram,
    EmptyDiagram,
    PathLimitExceeded,
    RootState,
    bound,
    build_initial_relaxation,
    build_width_one,
    enumerate_path_values,
    enumerate_paths,
    is_exact_node,
    prune_dangling,
    recompute_states,
    root_state_of,
    shortest_path,
    to_dot,
)
from sopdd.filtering import FilterContext

instances = st.builds(
    random_instance,
    n=st.integers(3, 7),
    density=st.sampled_from([0.0, 0.2, 0.4]),
    seed=st.integers(0, 100_000),
    fixed_endpoints=st.booleans(),
)


def chain(n, cost=1):
    m = [[cost if i != j else 0 for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(i):
            m[i][j] = -1  # j before i
    return from_matrix(m)


def line_diagram(values, labels=None):
    n = len(values)
    inst = from_matrix([[0] * n for _ in range(n)])
    d = Diagram(inst, root_layer=0)
    labels = labels or list(range(n))
    prev = d.root
    for j, (v, e) in enumerate(zip(values, labels), start=1):
        nxt = d.terminal if j == n else d.add_node(j, e)
        d.add_arc(prev, nxt, e, v)
        prev = nxt
    recompute_states(d)
    return d


def test_single_path_value():
    d = line_diagram([3, 5, 9])
    assert shortest_path(d) == (17, [0, 1, 2])


def test_offset_is_additive():
    d = line_diagram([3, 5, 9])
    before = shortest_path(d)[0]
    d.root_offset += 11
    assert shortest_path(d)[0] == before + 11


def test_chain_states():
    d = line_diagram([1, 1, 1])
    t = d.terminal
    assert t.all_down == t.some_down == 0b111
    assert t.exact
    assert d.root.exact and is_exact_node(d, d.root)


def test_empty_diagram():
    inst = chain(4)
    d = Diagram(inst, root_layer=0)
    with pytest.raises(EmptyDiagram):
        shortest_path(d)
    assert bound(d) == math.inf
    assert d.is_empty()


def test_two_orders_into_one_state():
    # paths [A, B, C] and [B, A, C] meet in one node with state C
    inst = from_matrix([[0] * 4 for _ in range(4)])
    d = Diagram(inst, root_layer=0)
    a = d.add_node(1, 0)
    b = d.add_node(1, 1)
    ab = d.add_node(2, 1)
    ba = d.add_node(2, 0)
    c = d.add_node(3, 2)
    d.add_arc(d.root, a, 0, 0)
    d.add_arc(d.root, b, 1, 0)
    d.add_arc(a, ab, 1, 1)
    d.add_arc(b, ba, 0, 1)
    d.add_arc(ab, c, 2, 1)
    d.add_arc(ba, c, 2, 1)
    d.add_arc(c, d.terminal, 3, 1)
    recompute_states(d)
    assert c.some_down == c.all_down == 0b111
    assert c.exact
    # a node whose in-arcs carry different labels has no single last element
    # and is never treated as exact
    mixed = Diagram(inst, root_layer=0)
    x = mixed.add_node(1, 0)
    y = mixed.add_node(1, 1)
    m = mixed.add_node(2, None)
    mixed.add_arc(mixed.root, x, 0, 0)
    mixed.add_arc(mixed.root, y, 1, 0)
    mixed.add_arc(x, m, 1, 1)
    mixed.add_arc(y, m, 0, 1)
    recompute_states(mixed)
    assert m.some_down == m.all_down == 0b11
    assert not m.exact


def test_is_exact_node_unknown():
    d = line_diagram([1, 1])
    other = line_diagram([1, 1])
    with pytest.raises(KeyError):
        is_exact_node(d, other.layer(1)[0])


def test_prune_dangling():
    d = line_diagram([1, 2, 3])
    paths = dfs_paths(d)
    lonely = d.add_node(1, 2)
    prune_dangling(d)
    assert not d.contains(lonely)
    assert dfs_paths(d) == paths
    # idempotent
    count = d.node_count()
    prune_dangling(d)
    assert d.node_count() == count


def test_prune_cascade():
    inst = random_instance(6, 0.0, seed=3)
    d = build_initial_relaxation(inst)
    before = set(dfs_paths(d))
    # cut every arc entering the terminal with label 5
    for a in list(d.terminal.ins):
        if a.label == 5:
            d.remove_arc(a)
    prune_dangling(d)
    recompute_states(d)
    assert set(dfs_paths(d)) == {p for p in before if p[-1] != 5}
    for u in d.nodes():
        if u is not d.root:
            assert u.ins
        if u is not d.terminal:
            assert u.outs


def test_enumerate_paths_matches_dfs_and_cap():
    inst = random_instance(5, 0.2, seed=9)
    d = build_initial_relaxation(inst)
    assert sorted(enumerate_paths(d)) == dfs_paths(d)
    with pytest.raises(PathLimitExceeded):
        enumerate_paths(d, cap=1)


def test_chain_relaxation_single_path():
    inst = chain(4, cost=2)
    d = build_initial_relaxation(inst)
    assert enumerate_paths(d) == [(0, 1, 2, 3)]
    assert shortest_path(d) == (6, [0, 1, 2, 3])


def test_no_precedence_width_n():
    inst = from_matrix([[0 if i == j else i + j for j in range(4)] for i in range(4)])
    d = build_initial_relaxation(inst)
    assert d.width <= 4
    paths = set(enumerate_paths(d))
    assert set(permutations(range(4))) <= paths


@given(instances)
def test_initial_relaxation_is_sound(inst):
    d = build_initial_relaxation(inst, ctx=FilterContext(inst))
    values = dfs_path_values(d)
    for seq in feasible_perms(inst):
        assert seq in values
        # every arc is exact-valued
        assert values[seq] == inst.sequence_cost(seq)
    opt, _ = brute_force(inst)
    if opt < math.inf:
        assert bound(d) <= opt
    for a in d.arcs():
        if a.origin is not d.root:
            assert a.value == inst.cost[a.origin.state][a.label]


@given(instances)
def test_width_one_is_sound(inst):
    d = build_width_one(inst, ctx=FilterContext(inst))
    assert d.width == 1 or d.is_empty()
    values = dfs_path_values(d)
    for seq in feasible_perms(inst):
        assert values[seq] <= inst.sequence_cost(seq)


@given(instances)
def test_states_match_path_enumeration(inst):
    d = build_initial_relaxation(inst)
    for u in d.nodes():
        if u is d.root:
            continue
        sets = [set(p) for p in paths_to(d, u)]
        assert u.some_down == sum(1 << e for e in set().union(*sets))
        assert u.all_down == sum(1 << e for e in set.intersection(*sets))
        assert u.all_down & ~u.some_down == 0
        if u.state is not None:
            assert u.all_down >> u.state & 1


@given(instances)
def test_t_star_and_exactness(inst):
    d = build_initial_relaxation(inst)
    # independent layered shortest path
    dist = {d.root: 0}
    for _, nodes in d.iter_layers():
        for u in nodes:
            for a in u.outs:
                dist[a.dest] = min(dist.get(a.dest, math.inf), dist[u] + a.value)
    for u in d.nodes():
        assert u.t_star == dist[u]
        if not u.exact:
            for a in u.outs:
                assert not a.dest.exact


def test_sub_root_relaxation():
    inst = random_instance(6, 0.2, seed=11)
    opt, best = brute_force(inst)
    prefix = best[:2]
    rs = RootState(
        visited=(1 << prefix[0]) | (1 << prefix[1]),
        last=prefix[1],
        layer=2,
        offset=inst.sequence_cost(prefix),
        sequence=prefix,
    )
    d = build_initial_relaxation(inst, rs)
    assert shortest_path(d)[0] <= opt
    assert tuple(best[2:]) in set(enumerate_paths(d))
    assert root_state_of(d, d.root) == rs


def test_infeasible_root_state_gives_empty_diagram():
    inst = chain(4)
    rs = RootState(visited=1 << 2, last=2, layer=1)  # 2 placed before 0 and 1
    assert build_initial_relaxation(inst, rs).is_empty()
    assert build_width_one(inst, rs).is_empty()


def test_root_state_validation():
    with pytest.raises(ValueError):
        RootState(visited=0b11, last=1, layer=1)
    with pytest.raises(ValueError):
        RootState(visited=0b11, last=1, layer=2, sequence=(1, 0))


def test_to_dot():
    d = line_diagram([3, 5])
    text = to_dot(d)
    assert text.startswith("digraph")
    assert '"0:3"' in text and '"1:5"' in text
