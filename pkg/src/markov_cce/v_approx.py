"""Optimistic value estimates for one layer by ridge regression."""

from __future__ import annotations

import numpy as np
from scipy import linalg

from .game import LinearMarkovGame, as_mixture, sample_categorical, sample_episodes
from .rng import as_streams


def ridge_theta(features, targets, lam: float) -> np.ndarray:
    """argmin_theta (1/K) sum (<phi_k, theta> - y_k)^2 + lam ||theta||^2."""
    x = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("features must be (K, d) with one target per row")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    K, d = x.shape
    a = x.T @ x / K + lam * np.eye(d)
    b = x.T @ y / K
    return linalg.solve(a, b, assume_a="pos")


def run(game: LinearMarkovGame, h: int, pibar, pi_tilde, v_next, gaps, K: int, lam: float, rng) -> np.ndarray:
    """Value table (m, S_h) for layer h.

    Args:
        pibar: roll-in policy (mixture or Markov joint policy).
        pi_tilde: (S_h, J) joint policy produced for layer h.
        v_next: (m, S_{h+1}) values of the next layer.
        gaps: (m, S_h) array of Gap^i(s) (or a list of GapTables).
        rng: Streams / seed; agent i uses stream ("agent", i).

    For agent i, K episodes roll in with pibar to layer h, agent i acts by the
    episode's component and the others by pi_tilde's opponent marginal; the
    targets l^i + V_next^i(s') are regressed on phi^i.  Then
    Q(s,a) = min{<phi, theta> + 1.5 Gap^i(s), H - h} and
    V^i(s) = sum_a pi_tilde^i(a|s) Q(s,a), floored at 0.
    """
    streams = as_streams(rng)
    mix = as_mixture(pibar)
    pi_tilde = np.asarray(pi_tilde, dtype=float)
    v_next = np.asarray(v_next, dtype=float)
    if hasattr(gaps[0], "total"):
        gaps = np.stack([g.total for g in gaps])
    gaps = np.asarray(gaps, dtype=float)
    S = game.states_per_layer[h]
    cap = float(game.H - h)
    out = np.empty((game.m, S))
    for i in range(game.m):
        g = streams.generator("agent", i)
        ep = sample_episodes(game, mix, K, g, stop=h)
        s = ep.states[:, h]
        own = sample_categorical(mix.stacked_marginal(h, i)[ep.components, s], g)
        view = pi_tilde.reshape((S,) + game.actions)
        view = np.moveaxis(view, 1 + i, 1).reshape(S, game.actions[i], -1)
        marg_i = view.sum(axis=2)
        opp = view.sum(axis=1)                                 # (S, J_-i)
        b = sample_categorical(opp[s], g)
        jnt = game.joint_index(i)[own, b]
        s2 = sample_categorical(game.transitions[h][s, jnt], g)
        y = game.losses[h][i, s, jnt] + v_next[i, s2]
        feats = game.features[i][h]
        theta = ridge_theta(feats[s, own], y, lam)
        q = np.minimum(feats @ theta + 1.5 * gaps[i][:, None], cap)
        out[i] = np.maximum((marg_i * q).sum(axis=1), 0.0)
    return out
