"""Exact values, best responses and CCE regret by backward induction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import LinearMarkovGame, MarkovJointPolicy, MixturePolicy, agent_view, markovize


@dataclass(frozen=True, eq=False)
class ValueTable:
    """``values[h]`` is an (m, S_h) array for h = 0..H (the sink row is 0).

    Best-response tables carry a single agent, i.e. shape (1, S_h).
    """

    values: tuple

    def at(self, i: int, h: int) -> np.ndarray:
        return self.values[h][i]

    def initial(self, game: LinearMarkovGame) -> np.ndarray:
        return self.values[0][:, game.initial_state]


def exact_value(game: LinearMarkovGame, policy: MarkovJointPolicy) -> ValueTable:
    """V^i_pi(s) for every agent and state."""
    if isinstance(policy, MixturePolicy):
        raise TypeError("use mixture_value for mixtures")
    vals = [None] * (game.H + 1)
    vals[game.H] = np.zeros((game.m, 1))
    for h in range(game.H - 1, -1, -1):
        # w[i, s, j] = l^i(s, j) + sum_s' P(s'|s, j) V^i(s')
        w = game.losses[h] + np.einsum("sjt,it->isj", game.transitions[h], vals[h + 1])
        vals[h] = np.einsum("isj,sj->is", w, policy.layers[h])
    return ValueTable(tuple(vals))


def mixture_value(game: LinearMarkovGame, mixture: MixturePolicy) -> np.ndarray:
    """(m,) values at the initial state under draw-one-component execution."""
    return sum(w * exact_value(game, c).initial(game) for w, c in zip(mixture.weights, mixture.components))


def _opponent_tables(game, i, opponents):
    if isinstance(opponents, MarkovJointPolicy):
        return opponents.opponents(i)
    tabs = [np.asarray(o, dtype=float) for o in opponents]
    for h, o in enumerate(tabs):
        if o.shape != (game.states_per_layer[h], game.n_opponent_joint(i)):
            raise ValueError(f"opponent table for layer {h} has shape {o.shape}")
    return tabs


def best_response(game: LinearMarkovGame, i: int, opponents):
    """Greedy backward DP for agent i against fixed opponents.

    ``opponents`` is a policy (its opponent marginal is used) or a list of
    (S_h, J_{-i}) tables.  Returns (actions per layer, ValueTable with one row);
    ties go to the lowest action index.
    """
    opp = _opponent_tables(game, i, opponents)
    vals = [None] * (game.H + 1)
    vals[game.H] = np.zeros((1, 1))
    acts = [None] * game.H
    for h in range(game.H - 1, -1, -1):
        w = game.losses[h][i] + game.transitions[h] @ vals[h + 1][0]
        q = np.einsum("sab,sb->sa", agent_view(w, game.actions, i), opp[h])
        a = np.argmin(q, axis=1)
        acts[h] = a
        vals[h] = q[np.arange(q.shape[0]), a][None, :]
    return acts, ValueTable(tuple(vals))


def deterministic_policy_table(actions_per_layer, n_actions: int) -> list:
    """Convert greedy action indices to (S_h, A) one-hot tables."""
    return [np.eye(n_actions)[a] for a in actions_per_layer]


def cce_gaps(game: LinearMarkovGame, policy: MarkovJointPolicy) -> np.ndarray:
    """(m,) best-response gaps V^i_pi(s_1) - V^i_{dagger, pi^{-i}}(s_1)."""
    v = exact_value(game, policy).initial(game)
    out = np.empty(game.m)
    for i in range(game.m):
        _, br = best_response(game, i, policy)
        out[i] = v[i] - br.values[0][0, game.initial_state]
    return out


def cce_regret(game: LinearMarkovGame, policies, weights=None) -> np.ndarray:
    """Per-agent average of the best-response gaps of a list of policies.

    Mixtures are first replaced by their occupancy-equivalent Markov policy.
    ``weights`` (e.g. epoch multiplicities) default to uniform.
    """
    pols = list(policies)
    if not pols:
        raise ValueError("need at least one policy")
    w = np.ones(len(pols)) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()
    tot = np.zeros(game.m)
    for wk, p in zip(w, pols):
        if isinstance(p, MixturePolicy):
            p = markovize(game, p)
        tot += wk * cce_gaps(game, p)
    return tot
