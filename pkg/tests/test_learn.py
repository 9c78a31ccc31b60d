from dataclasses import replace

import numpy as np
import pytest

from causalprm.envs import load_map
from causalprm.learn import (LearningCurve, QrmSettings, QTable, Task, exact_solve,
                             median_steps_to_fraction, optimal_reward_rate, policy_value,
                             project_policy, qrm_episode, reachable, reward_curve, reward_rate,
                             run_qrm, steps_to_threshold, train)
from causalprm.machines import build_causal_prm, load_prm
from causalprm.automata import trivial_dfa
from oracles import dense_optimal_values

GAMMA = 0.9

GOAL_PRM = """ap: [g]
states: [u0, done]
initial: u0
terminals: [done]
transitions:
  - {from: u0, guard: "g", to: done, reward: "1"}
  - {from: u0, guard: "!g", to: u0}
"""

# visit a then b; b before a is harmless
SEQ_PRM = """ap: [a, b]
states: [u0, u1, done]
initial: u0
terminals: [done]
transitions:
  - {from: u0, guard: "a", to: u1}
  - {from: u0, guard: "!a", to: u0}
  - {from: u1, guard: "b", to: done, reward: "1"}
  - {from: u1, guard: "!b", to: u1}
"""


@pytest.fixture(scope="module")
def goal_task():
    return Task(load_map("legend: g=g\nstart: 0,0\n.g\n"), load_prm(GOAL_PRM))


@pytest.fixture(scope="module")
def grid3():
    return Task(load_map("legend: a=a b=b\nstart: 1,1\n..a\n...\nb..\n"), load_prm(SEQ_PRM))


def test_task_arrays(coffee):
    t = coffee.task("plain")
    assert t.n_cells == 21 and t.n_states == 5
    nxt, prob = t.env_arrays
    assert np.allclose(prob.sum(axis=-1), 1)
    mats, rew = t.transitions
    assert len(mats) == 4 and rew.shape == (4, t.n_cells * t.n_states)
    for m in mats:
        rows = np.asarray(m.sum(axis=1)).ravel().reshape(t.n_cells, t.n_states)
        assert np.allclose(rows[:, ~t.terminal], 1) and np.allclose(rows[:, t.terminal], 0)


def test_alpha_one_fixed_point(goal_task):
    q = QTable.zeros(goal_task, alpha=1.0, epsilon=0.0)
    q.values[goal_task.start, 0, 2] = 0.5  # make E the greedy action
    log = qrm_episode(q, goal_task, np.random.default_rng(0), max_steps=10)
    assert log.actions == [2] and log.rewards == [1.0]
    assert q.values[goal_task.start, 0, 2] == 1.0


def test_expected_update_on_branching_transition(coffee):
    # from the cell east of c, step W onto c in q0: c leads to q1 (0.9) or q2 (0.1)
    base = coffee.task("plain")
    g = base.env
    c = g.cells_with("c")[0]
    task = Task(replace(g, start=(c[0] + 1, c[1])), base.prm)
    rng = np.random.default_rng(5)
    q = QTable(rng.random((task.n_cells, task.n_states, 4)), alpha=0.3, epsilon=0.0)
    q.values[:, 4] = 0.0
    s, s2, west = task.start, g.index[c], 3
    q.values[s, 0, west] = 10.0
    before = q.values.copy()
    qrm_episode(q, task, rng, max_steps=1)
    target = 0.9 * GAMMA * before[s2, 1].max() + 0.1 * GAMMA * before[s2, 2].max()
    assert q.values[s, 0, west] == pytest.approx(0.7 * 10.0 + 0.3 * target, abs=1e-12)
    # the same experience updates every other non-terminal machine state: q3 stays put on c
    assert q.values[s, 3, west] == pytest.approx(
        0.7 * before[s, 3, west] + 0.3 * GAMMA * before[s2, 3].max(), abs=1e-12)
    assert q.values[s, 4, west] == 0.0


def test_terminal_states_are_never_updated(coffee):
    task = coffee.task("causal")
    res = run_qrm(task, QrmSettings(total_steps=5000), seed=0)
    assert not res.q.values[:, task.terminal].any()


def _python_run(task, seed, episodes, max_steps, expected):
    rng = np.random.default_rng(seed)
    q = QTable.zeros(task)
    rewards, ends = [], []
    for _ in range(episodes):
        log = qrm_episode(q, task, rng, max_steps, expected)
        rewards += log.rewards
        ends += [False] * (len(log.rewards) - 1) + [True]
    return q, np.array(rewards), np.array(ends)


@pytest.mark.parametrize("name", ["coffee_soda", "four_doors"])
@pytest.mark.parametrize("expected", [True, False])
def test_kernel_matches_python_episode(cases, name, expected):
    task = cases[name].task("causal")
    q, rewards, ends = _python_run(task, 3, 60, 50, expected)
    settings = QrmSettings(total_steps=len(rewards), max_episode_steps=50, window=10,
                           expected_update=expected)
    res = run_qrm(task, settings, 3)
    assert np.array_equal(res.rewards, rewards)
    assert np.array_equal(res.episode_ends, ends)
    assert np.array_equal(res.q.values, q.values)


def test_training_is_seed_deterministic(coffee):
    s = QrmSettings(total_steps=20_000)
    a = train(coffee.task("plain"), s, [4, 5])
    b = train(coffee.task("plain"), s, [4, 5])
    assert np.array_equal(a.per_seed, b.per_seed)
    c = train(coffee.task("plain"), s, [4, 5], workers=2)
    assert np.array_equal(a.per_seed, c.per_seed)


def test_frozen_learner_tracks_the_initial_policy(coffee):
    # alpha=0, epsilon=0: Q stays zero, every action ties, so behaviour is uniformly random
    task = coffee.task("plain")
    s = QrmSettings(alpha=0.0, epsilon=0.0, total_steps=100_000)
    res = run_qrm(task, s, 0)
    assert not res.q.values.any()
    expected = reward_rate(task, np.zeros((task.n_cells, task.n_states), int), 1.0, 400)
    assert res.rewards.mean() == pytest.approx(expected, rel=0.15)


def test_settings_validation():
    for bad in (dict(gamma=1.0), dict(alpha=2.0), dict(epsilon=-0.1), dict(window=0),
                dict(total_steps=100, window=100), dict(max_episode_steps=0)):
        with pytest.raises(ValueError):
            QrmSettings(**bad)


def test_reward_curve_matches_direct_windows():
    rewards = np.random.default_rng(0).random(1000)
    c = reward_curve(rewards, window=70, interval=30)
    for step, value in c:
        lo = max(step - 70, 0)
        assert value == pytest.approx(rewards[lo:step].mean())


def test_curve_steps_must_increase():
    with pytest.raises(ValueError):
        LearningCurve(np.array([2, 1]), np.array([0.0, 0.0]))


def test_steps_to_threshold():
    c = LearningCurve(np.array([100, 200, 300, 400]), np.array([0.9, 0.1, 0.5, 0.6]))
    # the first point is inside the first window and does not count
    assert steps_to_threshold(c, 0.5, window=200) == 300
    assert steps_to_threshold(c, 0.95, window=200) == float("inf")


# ---------------------------------------------------------------- exact solutions

@pytest.mark.parametrize("name", ["coffee_soda", "two_doors"])
@pytest.mark.parametrize("variant", ["plain", "causal"])
def test_exact_solve_matches_dense_oracle(cases, name, variant):
    task = cases[name].task(variant)
    sol = exact_solve(task, GAMMA)
    assert np.allclose(sol.values, dense_optimal_values(task.env, task.prm, GAMMA), atol=1e-8)
    assert sol.residual < 1e-10
    assert not sol.values[:, task.terminal].any()


def test_coffee_optimal_value_is_pinned(coffee):
    # regression constant from the first verified run of the solver
    task = coffee.task("plain")
    assert exact_solve(task, GAMMA).initial_value(task) == pytest.approx(0.5373459, abs=1e-6)


def test_policy_value_of_greedy_policy(coffee):
    task = coffee.task("plain")
    sol = exact_solve(task, GAMMA)
    assert np.allclose(policy_value(task, sol.policy, GAMMA), sol.values, atol=1e-8)


def test_reward_rate_matches_simulation(coffee):
    task = coffee.task("plain")
    sol = exact_solve(task, GAMMA)
    q = QTable(np.eye(4)[sol.policy].astype(float), alpha=0.0, epsilon=0.1)
    rng = np.random.default_rng(2)
    total = steps = 0
    for _ in range(4000):
        log = qrm_episode(q, task, rng, 400)
        total += sum(log.rewards)
        steps += len(log.rewards)
    assert total / steps == pytest.approx(reward_rate(task, sol.policy, 0.1, 400), rel=0.1)


def test_optimal_reward_rate_of_a_straight_run(goal_task):
    # one step east reaches the goal: reward 1 per step
    assert optimal_reward_rate(goal_task, GAMMA, 400) == pytest.approx(1.0)


def test_reachable_excludes_unreachable_machine_states(goal_task):
    reach = reachable(goal_task)
    assert reach[goal_task.start, 0] and not reach[goal_task.start, 1]


def test_projection_of_trivial_product_is_identity(coffee):
    task = coffee.task("plain")
    b = build_causal_prm(task.prm, trivial_dfa(task.prm.ap), GAMMA).product
    tb = Task(task.env, b.prm)
    sol = exact_solve(tb, GAMMA)
    pol = project_policy(sol, tb, b, task.n_states)
    reach = reachable(tb)
    assert np.array_equal(pol[reach], sol.policy[reach])


def test_exact_solve_size_guard(coffee):
    big = Task(coffee.env, coffee.prm)
    object.__setattr__(big, "n_states", 10 ** 6)
    with pytest.raises(ValueError):
        exact_solve(big, GAMMA)


def test_qrm_converges_on_a_small_grid(grid3):
    # states the optimal policy visits; corners only exploration reaches stay under-sampled
    sol = exact_solve(grid3, GAMMA)
    reach = reachable(grid3, sol.policy) & ~grid3.terminal[None, :]
    cells, us = np.nonzero(reach)
    settings = QrmSettings(total_steps=200_000)
    good = 0
    for seed in range(20):
        q = run_qrm(grid3, settings, seed).q.values
        greedy = q.argmax(axis=-1)
        chosen = sol.q[cells, us, greedy[cells, us]]
        good += bool(np.all(chosen >= sol.values[cells, us] - 1e-9))
    assert good >= 19


def test_median_steps_to_fraction():
    class R:
        seeds = (0, 1, 2)

        def curve(self, i):
            return LearningCurve(np.array([10, 20, 30]), np.array([[0, 1, 1], [0, 0, 1], [1, 1, 1]][i], float))

    assert median_steps_to_fraction(R(), 1.0, window=10) == 20
