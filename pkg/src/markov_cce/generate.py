"""Random game generators: tabular (one-hot features) and planted low-rank."""

from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np

from .game import LinearMarkovGame, one_hot_tabular_embedding
from .rng import make_generator

LOW_RANK_RESIDUAL_TOL = 1e-10


def _layer_sizes(states_per_layer: Union[int, Sequence[int]], H: int) -> tuple:
    if isinstance(states_per_layer, (int, np.integer)):
        return (int(states_per_layer),) * H
    sizes = tuple(int(s) for s in states_per_layer)
    if len(sizes) != H:
        raise ValueError("states_per_layer must have H entries")
    return sizes


def _actions(actions: Union[int, Sequence[int]], m: int) -> tuple:
    if isinstance(actions, (int, np.integer)):
        return (int(actions),) * m
    acts = tuple(int(a) for a in actions)
    if len(acts) != m:
        raise ValueError("actions must have m entries")
    return acts


def _normalize_rows(p: np.ndarray) -> np.ndarray:
    return p / p.sum(axis=-1, keepdims=True)


def one_hot_game(seed: int, m: int = 2, H: int = 2, states_per_layer=2, actions=2, d=None) -> LinearMarkovGame:
    """Tabular game: Dirichlet(1) transition rows, uniform [0,1] losses."""
    rng = make_generator(seed, "gen-game", "one-hot")
    sizes = _layer_sizes(states_per_layer, H)
    acts = _actions(actions, m)
    J = math.prod(acts)
    feats = one_hot_tabular_embedding(sizes, acts, d)
    d = feats[0][0].shape[-1]
    nxt = sizes[1:] + (1,)
    trans = [_normalize_rows(rng.dirichlet(np.ones(nxt[h]), size=(sizes[h], J))) for h in range(H)]
    losses = [rng.random((m, sizes[h], J)) for h in range(H)]
    return LinearMarkovGame(m, H, d, acts, sizes, feats, trans, losses, 0)


def low_rank_game(seed: int, m: int = 2, H: int = 2, states_per_layer=2, actions=2, d: int = 3,
                  return_factors: bool = False):
    """Game built from planted factors.

    Each agent's feature phi^i(s,a) is a point of the probability simplex in
    R^d.  With the agent-averaged joint feature
    psi(s, a) = (1/m) sum_j phi^j(s, a^j) the tables are
    P(. | s, a) = psi^T mu_h and l^i(s, a) = psi^T nu_h^i, where each row of
    mu_h is a distribution over the next layer and nu_h^i lies in [0,1]^d.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = make_generator(seed, "gen-game", "low-rank")
    sizes = _layer_sizes(states_per_layer, H)
    acts = _actions(actions, m)
    nxt = sizes[1:] + (1,)
    feats = [[rng.dirichlet(np.ones(d), size=(sizes[h], acts[i])) for h in range(H)] for i in range(m)]
    mus = [rng.dirichlet(np.ones(nxt[h]), size=d) for h in range(H)]          # (d, S_{h+1})
    nus = [rng.random((m, d)) for h in range(H)]
    trans, losses = [], []
    for h in range(H):
        grids = np.meshgrid(*[np.arange(a) for a in acts], indexing="ij")
        psi = sum(feats[i][h][:, grids[i].ravel(), :] for i in range(m)) / m  # (S, J, d)
        p = _normalize_rows(np.clip(psi @ mus[h], 0.0, None))
        resid = np.abs(p - psi @ mus[h]).max()
        if resid > LOW_RANK_RESIDUAL_TOL:
            raise FloatingPointError(f"low-rank reconstruction residual {resid:.3g}")
        trans.append(p)
        losses.append(np.einsum("sjd,id->isj", psi, nus[h]))
    game = LinearMarkovGame(m, H, d, acts, sizes, feats, trans, losses, 0)
    if return_factors:
        return game, {"mu": mus, "nu": nus}
    return game


def generate(spec: dict) -> LinearMarkovGame:
    """Build a game from a generator spec dict (keys: seed, m, H,
    states_per_layer, actions, d, embedding in {"one-hot", "low-rank"})."""
    kind = spec.get("embedding", "one-hot")
    kw = dict(seed=int(spec.get("seed", 0)), m=int(spec.get("m", 2)), H=int(spec.get("H", 2)),
              states_per_layer=spec.get("states_per_layer", 2), actions=spec.get("actions", 2))
    if kind == "one-hot":
        return one_hot_game(d=spec.get("d"), **kw)
    if kind == "low-rank":
        return low_rank_game(d=int(spec.get("d", 3)), **kw)
    raise ValueError(f"unknown embedding {kind!r}")


def reference_game_g1(seed: int = 0) -> LinearMarkovGame:
    """Two agents, two layers, two states per layer, two actions, one-hot."""
    return one_hot_game(seed, m=2, H=2, states_per_layer=2, actions=2)
