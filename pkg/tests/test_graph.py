import pytest
from support import random_mdp

from horizonplan.graph import (
    ExplicitGraph,
    audit_bellman,
    dump_graph,
    expand,
    get_or_create,
    recompute_best_partial_graph,
    update_ancestors,
)
from horizonplan.heuristics import DeterministicSource, ZeroHeuristic
from horizonplan.mdp import as_cached, chain2_model
from horizonplan.oracle import backward_induction
from horizonplan.rng import SplitMix64

ZERO = DeterministicSource(ZeroHeuristic())


def fresh_graph(model=None, horizon=2):
    cached = as_cached(model or chain2_model())
    graph = ExplicitGraph(cached, horizon)
    graph.init_root(cached.initial_outcomes()[0][1], ZERO, SplitMix64(0))
    return graph, cached


def expand_all(graph, cached, rng=None):
    rng = rng or SplitMix64(0)
    while True:
        tips = [n for n in graph.nodes() if n.is_tip()]
        if not tips:
            return
        for tip in tips:
            expand(graph, tip, cached, ZERO, rng)
            update_ancestors(graph, tip, ZERO, rng)


def test_duplicate_arrival_returns_same_node():
    graph, cached = fresh_graph()
    rng = SplitMix64(0)
    a = get_or_create(graph, "x0", 1, ZERO, rng)
    b = get_or_create(graph, "x0", 1, ZERO, rng)
    assert a is b
    assert graph.counter == 2  # root plus one


def test_goal_node_is_terminal_with_zero_value():
    graph, _ = fresh_graph(horizon=4)
    node = get_or_create(graph, "goal", 3, ZERO, SplitMix64(0))
    assert node.terminal and node.V == 0.0


def test_depth_zero_node_is_terminal():
    graph, _ = fresh_graph()
    node = get_or_create(graph, "x0", 0, ZERO, SplitMix64(0))
    assert node.terminal and node.V == 0.0


def test_expand_chain2_root_structure():
    graph, cached = fresh_graph()
    rng = SplitMix64(0)
    created = expand(graph, graph.root, cached, ZERO, rng)
    assert created == 2  # (goal,1) and (x0,1)
    assert [a.action for a in graph.root.children] == ["A", "B"]
    b = graph.root.children[1]
    assert [(child.id.state, child.id.d, p) for p, child in b.children] == [
        ("goal", 1, 0.5), ("x0", 1, 0.5)]


def test_expand_terminal_raises():
    graph, cached = fresh_graph(horizon=3)
    node = get_or_create(graph, "goal", 2, ZERO, SplitMix64(0))
    with pytest.raises(ValueError):
        expand(graph, node, cached, ZERO, SplitMix64(0))


def test_expand_twice_raises():
    graph, cached = fresh_graph()
    expand(graph, graph.root, cached, ZERO, SplitMix64(0))
    with pytest.raises(ValueError):
        expand(graph, graph.root, cached, ZERO, SplitMix64(0))


def test_expand_merges_existing_successor():
    from horizonplan.mdp import TabularMdp

    spec = {
        "r": [("a1", 1.0, [("u", 1.0)]), ("a2", 1.0, [("v", 1.0)])],
        "u": [("go", 1.0, [("w", 1.0)])],
        "v": [("go", 1.0, [("w", 1.0)])],
        "w": [],
    }
    m = TabularMdp(spec, initial="r", goals={"w"})
    graph, cached = fresh_graph(m, horizon=3)
    rng = SplitMix64(0)
    for tip_id in [("r", 3), ("u", 2)]:
        node = graph.index[tip_id] if tip_id != ("r", 3) else graph.root
        expand(graph, node, cached, ZERO, rng)
        update_ancestors(graph, node, ZERO, rng)
    before = graph.counter
    expand(graph, graph.index[("v", 2)], cached, ZERO, rng)
    assert graph.counter == before  # (w,1) merged, no new node
    assert len(graph.index[("w", 1)].parents) == 2


def test_update_ancestors_matches_oracle():
    graph, cached = fresh_graph()
    expand_all(graph, cached)
    oracle = backward_induction(cached, "x0", 2)
    assert graph.root.V == pytest.approx(oracle.value("x0", 2), abs=1e-12)
    assert graph.root.marked.action == "B"


def test_update_ancestors_noop_returns_empty_set():
    graph, cached = fresh_graph()
    expand_all(graph, cached)
    leaf = graph.index[("x0", 1)]
    changed = update_ancestors(graph, leaf)
    assert changed == set()


def test_update_ancestors_propagates_leaf_drop():
    graph, cached = fresh_graph()
    expand_all(graph, cached)
    leaf = graph.index[("x0", 1)]
    old_root_v = graph.root.V
    leaf.V = 0.0
    leaf.expanded = False  # treat as externally revalued tip
    leaf.children = []
    changed = update_ancestors(graph, leaf)
    assert graph.root.V < old_root_v
    assert graph.root in changed


def test_marked_action_retained_on_tie():
    graph, cached = fresh_graph()
    expand_all(graph, cached)
    root = graph.root
    assert root.marked.action == "B"
    # force a tie: push B's subtree value so Q(B) == Q(A)
    leaf = graph.index[("x0", 1)]
    leaf.expanded = False
    leaf.children = []
    leaf.V = 0.5 + (1.0 - 0.75) / 0.5  # Q(B) becomes exactly 1.0 == Q(A)
    update_ancestors(graph, leaf)
    assert root.marked.action == "B"  # incumbent kept on an exact tie


def test_best_partial_graph_initial():
    graph, _ = fresh_graph()
    in_tips, out_tips = recompute_best_partial_graph(graph)
    assert in_tips == [graph.root]
    assert out_tips == []


def test_best_partial_graph_after_root_expansion():
    graph, cached = fresh_graph()
    rng = SplitMix64(0)
    expand(graph, graph.root, cached, ZERO, rng)
    update_ancestors(graph, graph.root, ZERO, rng)
    assert graph.root.marked.action == "B"
    in_tips, out_tips = recompute_best_partial_graph(graph)
    assert [t.id for t in in_tips] == [("x0", 1)]
    assert out_tips == []  # (goal,1) is terminal, never a tip


def test_best_partial_graph_exhausted():
    graph, cached = fresh_graph()
    expand_all(graph, cached)
    in_tips, out_tips = recompute_best_partial_graph(graph)
    assert in_tips == [] and out_tips == []


def test_bellman_audit_on_random_models():
    for seed in range(15):
        m = random_mdp(seed)
        cached = as_cached(m)
        graph = ExplicitGraph(cached, 4)
        rng = SplitMix64(seed)
        root = graph.init_root("s0", ZERO, rng)
        # interleave expansions in creation order with updates
        for _ in range(30):
            tips = [n for n in graph.nodes() if n.is_tip()]
            if not tips:
                break
            tip = tips[seed % len(tips)]
            expand(graph, tip, cached, ZERO, rng)
            update_ancestors(graph, tip, ZERO, rng)
        assert audit_bellman(graph, tol=1e-9) == []


def test_update_order_is_confluent():
    # randomized worklist pop orders must land on identical values
    for seed in range(8):
        m = random_mdp(seed)
        cached = as_cached(m)
        results = []
        for variant in range(3):
            graph = ExplicitGraph(cached, 4)
            rng = SplitMix64(0)
            graph.init_root("s0", ZERO, rng)
            shuffle = None if variant == 0 else SplitMix64(1000 + variant)
            while True:
                tips = [n for n in graph.nodes() if n.is_tip()]
                if not tips:
                    break
                expand(graph, tips[0], cached, ZERO, rng)
                update_ancestors(graph, tips[0], ZERO, rng, shuffle_rng=shuffle)
            results.append({n.id: n.V for n in graph.nodes()})
        assert results[0] == results[1] == results[2]


def test_node_count_bounded_by_reachable_pairs():
    for seed in range(10):
        m = random_mdp(seed)
        cached = as_cached(m)
        graph = ExplicitGraph(cached, 4)
        rng = SplitMix64(0)
        graph.init_root("s0", ZERO, rng)
        expand_all(graph, cached, rng)
        oracle = backward_induction(m, "s0", 4)
        assert graph.counter <= len(oracle.values)
        assert len(graph.index) == graph.counter  # every (s,d) created once


def test_dump_graph_is_stable(chain2):
    graph, cached = fresh_graph()
    expand_all(graph, cached)
    first = dump_graph(graph)
    assert first == dump_graph(graph)
    assert "('x0',2)" in first.replace(" ", "") or "('x0', 2)" in first
    assert "marked" in first
