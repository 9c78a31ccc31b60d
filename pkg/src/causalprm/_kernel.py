"""Compiled QRM step loop. Mirrors learn.qrm_episode exactly, draw for draw."""

import numpy as np
from numba import njit


@njit(cache=True)
def pick_action(qrow, d_explore, d_action, epsilon):
    n = qrow.shape[0]
    if d_explore < epsilon:
        return min(int(d_action * n), n - 1)
    best = qrow.max()
    n_ties = 0
    for a in range(n):
        if qrow[a] == best:
            n_ties += 1
    k = min(int(d_action * n_ties), n_ties - 1)
    for a in range(n):
        if qrow[a] == best:
            if k == 0:
                return a
            k -= 1
    return n - 1


@njit(cache=True)
def sample_index(probs, draw):
    acc = 0.0
    last = 0
    for k in range(probs.shape[0]):
        if probs[k] > 0.0:
            acc += probs[k]
            last = k
            if draw < acc:
                return k
    return last


@njit(cache=True)
def qrm_steps(Q, env_next, env_prob, cell_label, m_next, m_prob, m_rew, m_exp, terminal,
              start, initial, alpha, gamma, epsilon, max_steps, expected, draws, rewards,
              episode_ends, state):
    """Run len(draws) steps, continuing the episode described by state = [cell, u, t]."""
    n_u = Q.shape[1]
    n_a = Q.shape[2]
    cont = np.empty(n_u)
    s, u, t = state[0], state[1], state[2]
    for i in range(draws.shape[0]):
        d = draws[i]
        a = pick_action(Q[s, u], d[0], d[1], epsilon)
        s2 = env_next[s, a, sample_index(env_prob[s, a], d[2])]
        lab = cell_label[s2]
        for v in range(n_u):
            if terminal[v]:
                cont[v] = 0.0
            else:
                best = Q[s2, v, 0]
                for b in range(1, n_a):
                    if Q[s2, v, b] > best:
                        best = Q[s2, v, b]
                cont[v] = best
        for v in range(n_u):
            if terminal[v]:
                continue
            if expected:
                target = m_exp[v, lab]
                for k in range(m_prob.shape[2]):
                    p = m_prob[v, lab, k]
                    if p > 0.0:
                        target += gamma * p * cont[m_next[v, lab, k]]
            else:
                k = sample_index(m_prob[v, lab], d[3])
                target = m_rew[v, lab, k] + gamma * cont[m_next[v, lab, k]]
            Q[s, v, a] += alpha * (target - Q[s, v, a])
        k = sample_index(m_prob[u, lab], d[3])
        rewards[i] = m_rew[u, lab, k]
        u = m_next[u, lab, k]
        s = s2
        t += 1
        episode_ends[i] = terminal[u] or t >= max_steps
        if episode_ends[i]:
            s, u, t = start, initial, 0
    state[0], state[1], state[2] = s, u, t
