import pytest
from support import random_mdp

from horizonplan.mdp import NodeId, chain2_model
from horizonplan.oracle import OracleLimitError, backward_induction, expected_initial_value


def test_chain2_horizon_one(chain2):
    table = backward_induction(chain2, "x0", 1)
    assert table.value("x0", 1) == pytest.approx(0.5, abs=1e-12)
    assert table.policy[NodeId("x0", 1)] == "B"


def test_chain2_horizon_two(chain2):
    table = backward_induction(chain2, "x0", 2)
    assert table.value("x0", 2) == pytest.approx(0.75, abs=1e-12)
    assert table.q_values[(NodeId("x0", 2), "A")] == pytest.approx(1.0)
    assert table.q_values[(NodeId("x0", 2), "B")] == pytest.approx(0.75)
    assert table.policy[NodeId("x0", 2)] == "B"


def test_horizon_zero_values_and_empty_policy(chain2):
    table = backward_induction(chain2, "x0", 0)
    assert table.value("x0", 0) == 0.0
    assert table.policy == {}


def test_values_nonnegative_on_suite():
    # all suite costs and penalties are nonnegative, so values must be too
    for seed in range(40):
        m = random_mdp(seed)
        table = backward_induction(m, "s0", 5)
        assert all(v >= 0.0 for v in table.values.values())


def test_goal_and_depth_zero_values(chain2):
    table = backward_induction(chain2, "x0", 3)
    assert table.values[NodeId("goal", 2)] == 0.0
    assert table.values[NodeId("x0", 0)] == 0.0


def test_dead_end_value_is_penalty():
    m = random_mdp(11)
    dead = [s for s in m.enumerate_states() if m.is_dead_end(s)]
    if not dead:
        pytest.skip("suite model without dead ends")
    table = backward_induction(m, "s0", 4)
    for s in dead:
        for d in range(5):
            node = NodeId(s, d)
            if node in table.values:
                assert table.values[node] == m.dead_end_value


def test_node_cap_enforced(chain2):
    with pytest.raises(OracleLimitError):
        backward_induction(chain2, "x0", 2, node_cap=2)


def test_expected_initial_value_weighs_outcomes(chain2):
    assert expected_initial_value(chain2, 2) == pytest.approx(0.75)
