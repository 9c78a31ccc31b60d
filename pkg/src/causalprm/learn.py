"""Tabular QRM on gridworld x PRM, plus exact dynamic programming on the cross product."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from . import _kernel
from .envs import ACTIONS, LabeledGridworld
from .machines import ProductPrm, Prm

N_ACTIONS = len(ACTIONS)


@dataclass(frozen=True, eq=False)
class Task:
    """Array form of a gridworld paired with a PRM, indexed by cell id and machine state id."""

    env: LabeledGridworld
    prm: Prm

    @cached_property
    def n_cells(self) -> int:
        return len(self.env.cells)

    @cached_property
    def n_states(self) -> int:
        return self.prm.n_states

    @cached_property
    def env_arrays(self):
        g = self.env
        outs = [[g.outcomes(c, a) for a in ACTIONS] for c in g.cells]
        width = max(len(o) for row in outs for o in row)
        nxt = np.zeros((self.n_cells, N_ACTIONS, width), dtype=np.int64)
        prob = np.zeros((self.n_cells, N_ACTIONS, width))
        for i, row in enumerate(outs):
            for a, o in enumerate(row):
                for k, (t, p) in enumerate(o):
                    nxt[i, a, k], prob[i, a, k] = g.index[t], p
        return nxt, prob

    @cached_property
    def cell_label(self) -> np.ndarray:
        return np.array([self.prm.alphabet.index(self.env.label_of(c), strict=False)
                         for c in self.env.cells], dtype=np.int64)

    @cached_property
    def machine_arrays(self):
        nxt, prob, rew = self.prm.arrays
        return nxt.astype(np.int64), prob, rew, (prob * rew).sum(axis=-1)

    @property
    def start(self) -> int:
        return self.env.index[self.env.start]

    @property
    def terminal(self) -> np.ndarray:
        return self.prm.terminal_mask

    @cached_property
    def transitions(self):
        """Per action a sparse matrix over flat states x = cell * |U| + u, and the expected reward."""
        env_next, env_prob = self.env_arrays
        m_next, m_prob, _, m_exp = self.machine_arrays
        nu = self.n_states
        us = np.arange(nu)
        mats, rewards = [], []
        for a in range(N_ACTIONS):
            rows, cols, vals = [], [], []
            reward = np.zeros(self.n_cells * nu)
            for c in range(self.n_cells):
                for k in range(env_next.shape[2]):
                    pe = env_prob[c, a, k]
                    if pe == 0:
                        continue
                    c2 = env_next[c, a, k]
                    lab = self.cell_label[c2]
                    reward[c * nu + us] += pe * m_exp[:, lab]
                    for j in range(m_next.shape[2]):
                        p = pe * m_prob[:, lab, j]
                        live = p > 0
                        rows.append(c * nu + us[live])
                        cols.append(c2 * nu + m_next[live, lab, j])
                        vals.append(p[live])
            n = self.n_cells * nu
            mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                shape=(n, n))
            mats.append(mat)
            rewards.append(reward)
        return mats, np.array(rewards)


@dataclass
class QTable:
    values: np.ndarray  # (cells, machine states, actions)
    alpha: float = 0.1
    epsilon: float = 0.1
    gamma: float = 0.9

    @classmethod
    def zeros(cls, task: Task, **kw) -> "QTable":
        return cls(np.zeros((task.n_cells, task.n_states, N_ACTIONS)), **kw)

    def greedy(self) -> np.ndarray:
        return self.values.argmax(axis=-1)


class EpisodeLog(NamedTuple):
    cells: List[int]
    machine_states: List[int]
    actions: List[int]
    rewards: List[float]


def _pick(qrow, d_explore, d_action, epsilon):
    if d_explore < epsilon:
        return min(int(d_action * len(qrow)), len(qrow) - 1)
    ties = np.flatnonzero(qrow == qrow.max())
    return int(ties[min(int(d_action * len(ties)), len(ties) - 1)])


def _sample(probs, draw):
    acc, last = 0.0, 0
    for k, p in enumerate(probs):
        if p > 0:
            acc += p
            last = k
            if draw < acc:
                return k
    return last


def qrm_episode(q: QTable, task: Task, rng, max_steps: int, expected: bool = True) -> EpisodeLog:
    """One epsilon-greedy episode, updating every non-terminal machine state after each step.

    Each step consumes four uniforms: explore?, action, environment outcome, machine outcome."""
    if max_steps < 1:
        raise ValueError("max_steps must be positive")
    env_next, env_prob = task.env_arrays
    m_next, m_prob, m_rew, m_exp = task.machine_arrays
    term = task.terminal
    live = np.flatnonzero(~term)
    Q = q.values
    s, u = task.start, task.prm.initial
    log = EpisodeLog([s], [u], [], [])
    for _ in range(max_steps):
        d = rng.random(4)
        a = _pick(Q[s, u], d[0], d[1], q.epsilon)
        s2 = int(env_next[s, a, _sample(env_prob[s, a], d[2])])
        lab = task.cell_label[s2]
        cont = np.where(term, 0.0, Q[s2].max(axis=1))
        if expected:
            target = m_exp[live, lab].copy()
            for k in range(m_prob.shape[2]):
                target += q.gamma * m_prob[live, lab, k] * cont[m_next[live, lab, k]]
        else:
            ks = [_sample(m_prob[v, lab], d[3]) for v in live]
            target = m_rew[live, lab, ks] + q.gamma * cont[m_next[live, lab, ks]]
        Q[s, live, a] += q.alpha * (target - Q[s, live, a])
        k = _sample(m_prob[u, lab], d[3])
        r, u = float(m_rew[u, lab, k]), int(m_next[u, lab, k])
        s = s2
        log.cells.append(s)
        log.machine_states.append(u)
        log.actions.append(a)
        log.rewards.append(r)
        if term[u]:
            break
    return log


# ---------------------------------------------------------------- training

@dataclass(frozen=True)
class LearningCurve:
    steps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.steps) != len(self.values) or np.any(np.diff(self.steps) <= 0):
            raise ValueError("curve steps must be strictly increasing and match values")

    def __iter__(self):
        return iter(zip(self.steps.tolist(), self.values.tolist()))


@dataclass(frozen=True)
class QrmSettings:
    gamma: float = 0.9
    alpha: float = 0.1
    epsilon: float = 0.1
    max_episode_steps: int = 400
    total_steps: int = 200_000
    window: int = 1000
    sample_interval: int = 100
    expected_update: bool = True

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0 <= self.alpha <= 1 or not 0 <= self.epsilon <= 1:
            raise ValueError("alpha and epsilon must lie in [0, 1]")
        if self.max_episode_steps < 1 or self.sample_interval < 1:
            raise ValueError("episode cap and sample interval must be positive")
        if not self.total_steps > self.window > 0:
            raise ValueError("need total_steps > window > 0")


class RunResult(NamedTuple):
    rewards: np.ndarray
    episode_ends: np.ndarray
    q: QTable


CHUNK = 65_536


def run_qrm(task: Task, settings: QrmSettings, seed: int) -> RunResult:
    """One seeded QRM training run; rewards[i] is the reward of environment step i."""
    rng = np.random.default_rng(seed)
    q = QTable.zeros(task, alpha=settings.alpha, epsilon=settings.epsilon, gamma=settings.gamma)
    env_next, env_prob = task.env_arrays
    m_next, m_prob, m_rew, m_exp = task.machine_arrays
    n = settings.total_steps
    rewards = np.zeros(n)
    ends = np.zeros(n, dtype=np.bool_)
    state = np.array([task.start, task.prm.initial, 0], dtype=np.int64)
    for lo in range(0, n, CHUNK):
        hi = min(n, lo + CHUNK)
        draws = rng.random((hi - lo, 4))
        _kernel.qrm_steps(q.values, env_next, env_prob, task.cell_label, m_next, m_prob, m_rew,
                          m_exp, task.terminal, task.start, task.prm.initial, q.alpha, q.gamma,
                          q.epsilon, settings.max_episode_steps, settings.expected_update, draws,
                          rewards[lo:hi], ends[lo:hi], state)
    return RunResult(rewards, ends, q)


def reward_curve(rewards: np.ndarray, window: int, interval: int) -> LearningCurve:
    """Sliding-window reward per step, sampled every `interval` steps."""
    steps = np.arange(interval, len(rewards) + 1, interval)
    csum = np.concatenate([[0.0], np.cumsum(rewards)])
    lo = np.maximum(steps - window, 0)
    return LearningCurve(steps, (csum[steps] - csum[lo]) / (steps - lo))


def _curve_job(args):
    task, settings, seed = args
    res = run_qrm(task, settings, seed)
    return reward_curve(res.rewards, settings.window, settings.sample_interval).values


@dataclass(frozen=True)
class TrainResult:
    steps: np.ndarray
    per_seed: np.ndarray  # (seeds, points)
    seeds: Tuple[int, ...]

    @property
    def mean(self) -> LearningCurve:
        return LearningCurve(self.steps, self.per_seed.mean(axis=0))

    def curve(self, i: int) -> LearningCurve:
        return LearningCurve(self.steps, self.per_seed[i])


def train(task: Task, settings: QrmSettings, seeds: Sequence[int], workers: int = 1) -> TrainResult:
    seeds = tuple(seeds)
    if not seeds or len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be non-empty and distinct")
    jobs = [(task, settings, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            values = list(pool.map(_curve_job, jobs))
    else:
        values = [_curve_job(j) for j in jobs]
    steps = np.arange(settings.sample_interval, settings.total_steps + 1, settings.sample_interval)
    return TrainResult(steps, np.array(values), seeds)


def steps_to_threshold(curve: LearningCurve, threshold: float, window: int) -> float:
    """First sampled step, at least one window in, whose windowed reward reaches threshold."""
    ok = (curve.steps >= window) & (curve.values >= threshold)
    hits = np.flatnonzero(ok)
    return float(curve.steps[hits[0]]) if len(hits) else float("inf")


# ---------------------------------------------------------------- exact solutions

@dataclass(frozen=True)
class ExactSolution:
    values: np.ndarray  # (cells, machine states)
    q: np.ndarray       # (cells, machine states, actions)
    policy: np.ndarray  # (cells, machine states)
    residual: float
    iterations: int

    def initial_value(self, task: Task) -> float:
        return float(self.values[task.start, task.prm.initial])


def exact_solve(task: Task, gamma: float, tol: float = 1e-10, max_iter: int = 100_000) -> ExactSolution:
    """Value iteration on the cross product; continuation is zero at terminal machine states."""
    if task.n_cells * task.n_states > 10 ** 6:
        raise ValueError("cross product too large for exact solution")
    mats, rewards = task.transitions
    v = np.zeros(task.n_cells * task.n_states)
    for it in range(1, max_iter + 1):
        qv = rewards + gamma * np.stack([m @ v for m in mats])
        new = qv.max(axis=0)
        residual = float(np.max(np.abs(new - v)))
        v = new
        if residual < tol:
            break
    qv = rewards + gamma * np.stack([m @ v for m in mats])
    shape = (task.n_cells, task.n_states)
    return ExactSolution(v.reshape(shape), qv.T.reshape(shape + (N_ACTIONS,)),
                         qv.argmax(axis=0).reshape(shape), residual, it)


def _policy_matrix(task: Task, policy: np.ndarray, epsilon: float = 0.0):
    mats, rewards = task.transitions
    flat = np.asarray(policy).reshape(-1)
    n = len(flat)
    P = sp.csr_matrix((n, n))
    R = np.zeros(n)
    for a in range(N_ACTIONS):
        w = (1 - epsilon) * (flat == a) + epsilon / N_ACTIONS
        P = P + sp.diags(w) @ mats[a]
        R += w * rewards[a]
    return P.tocsr(), R


def policy_value(task: Task, policy: np.ndarray, gamma: float) -> np.ndarray:
    """Exact discounted value of a deterministic stationary policy over (cell, machine state)."""
    P, R = _policy_matrix(task, policy)
    n = len(R)
    v = spsolve((sp.identity(n, format="csc") - gamma * P).tocsc(), R)
    return v.reshape(task.n_cells, task.n_states)


def reward_rate(task: Task, policy: np.ndarray, epsilon: float, max_steps: int) -> float:
    """Long-run reward per environment step of the epsilon-greedy version of `policy`,
    with episodes restarting at machine terminals or after max_steps steps."""
    P, R = _policy_matrix(task, policy, epsilon)
    live = np.tile(~task.terminal, task.n_cells)
    P = (P @ sp.diags(live.astype(float))).T.tocsr()
    dist = np.zeros(len(R))
    dist[task.start * task.n_states + task.prm.initial] = 1.0
    total_reward = total_steps = 0.0
    for _ in range(max_steps):
        total_reward += dist @ R
        total_steps += dist.sum()
        dist = P @ dist
        if dist.sum() < 1e-15:
            break
    return total_reward / total_steps


def reachable(task: Task, policy: Optional[np.ndarray] = None) -> np.ndarray:
    """(cell, machine state) pairs reachable from the start; terminal pairs are not expanded."""
    mats, _ = task.transitions
    if policy is None:
        step = sum(mats[1:], mats[0])
    else:
        step, _ = _policy_matrix(task, policy)
    step = step.tocsr()
    nu = task.n_states
    seen = np.zeros(task.n_cells * nu, dtype=bool)
    start = task.start * nu + task.prm.initial
    seen[start] = True
    todo = [start]
    while todo:
        x = todo.pop()
        for y in step.indices[step.indptr[x]:step.indptr[x + 1]]:
            if not seen[y]:
                seen[y] = True
                todo.append(y)
    return seen.reshape(task.n_cells, nu)


def project_policy(sol: ExactSolution, task_b: Task, product: ProductPrm, n_base: int) -> np.ndarray:
    """Policy on (cell, base machine state) read off the product policy at the smallest
    reachable product state over each base state; unreachable pairs get action 0."""
    reach = reachable(task_b)
    policy = np.zeros((task_b.n_cells, n_base), dtype=np.int64)
    order = sorted(range(product.n_states), key=lambda x: product.components[x])
    for c in range(task_b.n_cells):
        chosen = np.zeros(n_base, dtype=bool)
        for x in order:
            u = product.components[x][0]
            if not chosen[u] and reach[c, x]:
                policy[c, u] = sol.policy[c, x]
                chosen[u] = True
    return policy


def optimal_reward_rate(task: Task, gamma: float, max_steps: int) -> float:
    """Greedy reward per step of the discounted-optimal policy, episodes capped at max_steps."""
    return reward_rate(task, exact_solve(task, gamma).policy, 0.0, max_steps)


def median_steps_to_fraction(result: TrainResult, reference: float, window: int,
                             fraction: float = 0.9) -> float:
    """Median over seeds of the first step whose windowed reward reaches fraction * reference."""
    hits = [steps_to_threshold(result.curve(i), fraction * reference, window)
            for i in range(len(result.seeds))]
    return float(np.median(hits))
