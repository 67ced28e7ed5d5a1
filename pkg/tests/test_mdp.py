import pytest
from support import random_mdp

from horizonplan.mdp import (
    CachedModel,
    MdpModel,
    ModelError,
    NodeId,
    RewardMdp,
    TabularMdp,
    as_cached,
    as_cost_model,
    chain2_model,
    sample_successor,
    validate_model,
)
from horizonplan.rng import SplitMix64


class _RewardChain(RewardMdp):
    """Reward-form twin of the two-action chain (rewards are negated costs)."""

    def initial_outcomes(self):
        return ((1.0, "x0"),)

    def actions(self, state):
        return ("A", "B") if state == "x0" else ()

    def reward(self, state, action):
        return -1.0 if action == "A" else -0.5

    def transitions(self, state, action):
        if action == "A":
            return (("goal", 1.0),)
        return (("goal", 0.5), ("x0", 0.5))

    def is_goal(self, state):
        return state == "goal"


def test_cost_view_negates_rewards():
    model = as_cost_model(_RewardChain())
    assert model.cost("x0", "A") == 1.0
    assert model.cost("x0", "B") == 0.5


def test_cost_view_zero_reward():
    reward = _RewardChain()
    reward.reward = lambda s, a: 0.0
    assert as_cost_model(reward).cost("x0", "A") == 0.0


def test_cost_model_passthrough():
    m = chain2_model()
    assert as_cost_model(m) is m


def test_argmax_reward_equals_argmin_cost():
    # canonicalization preserves the chosen action on any finite action set
    rng = SplitMix64(3)
    for _ in range(20):
        qs = [rng.next_double() * 20 - 10 for _ in range(1 + rng.next_below(6))]
        best_reward = max(range(len(qs)), key=lambda i: (qs[i], -i))
        costs = [-q for q in qs]
        best_cost = min(range(len(costs)), key=lambda i: (costs[i], i))
        assert best_reward == best_cost


def test_validate_model_accepts_suite():
    for seed in range(10):
        m = random_mdp(seed)
        validate_model(m, m.enumerate_states())


def test_validate_model_rejects_bad_distribution():
    spec = {"a": [("go", 1.0, [("b", 0.6), ("a", 0.3)])], "b": []}
    m = TabularMdp(spec, initial="a", goals={"b"})
    with pytest.raises(ModelError):
        validate_model(m, ["a", "b"])


def test_validate_model_rejects_terminal_with_actions():
    spec = {"a": [("go", 1.0, [("b", 1.0)])], "b": [("oops", 1.0, [("b", 1.0)])]}
    m = TabularMdp(spec, initial="a", goals={"b"})
    with pytest.raises(ModelError):
        validate_model(m, ["a", "b"])


def test_sample_successor_deterministic_edge(chain2):
    rng = SplitMix64(0)
    for _ in range(5):
        assert sample_successor(chain2, "x0", "A", rng) == "goal"


def test_sample_successor_frequency(chain2):
    rng = SplitMix64(123)
    hits = sum(sample_successor(chain2, "x0", "B", rng) == "goal" for _ in range(10_000))
    assert 0.48 <= hits / 10_000 <= 0.52


def test_sample_successor_same_seed_same_draws(chain2):
    rng = SplitMix64(77)
    seq1 = [sample_successor(chain2, "x0", "B", rng) for _ in range(100)]
    rng = SplitMix64(77)
    seq2 = [sample_successor(chain2, "x0", "B", rng) for _ in range(100)]
    assert seq1 == seq2


def test_sample_successor_rejects_inapplicable(chain2):
    with pytest.raises(ModelError):
        sample_successor(chain2, "x0", "C", SplitMix64(0))


def test_node_id_equality_drives_merging():
    assert NodeId("s", 3) == NodeId("s", 3)
    assert hash(NodeId("s", 3)) == hash(NodeId("s", 3))
    assert NodeId("s", 3) != NodeId("s", 2)
    assert NodeId("s", 3) != NodeId("t", 3)


def test_cached_model_memoizes_entries(chain2):
    calls = {"n": 0}
    original = chain2.transitions

    def counting(state, action):
        calls["n"] += 1
        return original(state, action)

    chain2.transitions = counting
    cached = CachedModel(chain2)
    cached.entry("x0")
    cached.entry("x0")
    assert calls["n"] == 2  # once per action, not per entry() call


def test_state_hash_stable_across_wrappers(chain2):
    cached = as_cached(chain2)
    assert cached.state_hash("x0") == chain2.state_hash("x0")
    assert chain2.state_hash("x0") != chain2.state_hash("goal")


def test_transition_mass_sweep_on_suite():
    for seed in range(25):
        m = random_mdp(seed)
        for s in m.enumerate_states():
            for a in m.actions(s):
                assert abs(sum(p for _, p in m.transitions(s, a)) - 1.0) <= 1e-9
