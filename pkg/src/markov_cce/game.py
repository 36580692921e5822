"""Layered Markov games with per-agent linear features, policies and sampling.

Conventions used throughout the package:

* Layers are 0-based: the decision layers are ``h = 0..H-1`` and layer ``H``
  is a single absorbing sink whose value is 0.  States are indexed densely
  within their layer.
* Joint actions are flattened in row-major agent order, i.e.
  ``np.ravel_multi_index((a_0, ..., a_{m-1}), actions)``.
* ``features[i][h]`` has shape ``(S_h, A_i, d)``, ``transitions[h]`` has
  shape ``(S_h, J, S_{h+1})`` and ``losses[h]`` has shape ``(m, S_h, J)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .rng import as_generator

PROB_TOL = 1e-9


class GameValidationWarning(UserWarning):
    """Soft problems with a game (currently: feature norms below 1/sqrt(d))."""


class StateId(NamedTuple):
    layer: int
    index: int


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def joint_index_table(actions: Sequence[int], i: int) -> np.ndarray:
    """Array ``T`` of shape (A_i, J_{-i}) with ``T[a, b]`` the flat joint index
    of agent i playing ``a`` and the others playing flat index ``b``."""
    actions = tuple(int(a) for a in actions)
    idx = np.arange(math.prod(actions)).reshape(actions)
    idx = np.moveaxis(idx, i, 0)
    return idx.reshape(actions[i], -1)


def agent_view(arr: np.ndarray, actions: Sequence[int], i: int) -> np.ndarray:
    """Reshape a trailing joint-action axis into (A_i, J_{-i})."""
    actions = tuple(int(a) for a in actions)
    lead = arr.shape[:-1]
    out = arr.reshape(lead + actions)
    out = np.moveaxis(out, len(lead) + i, len(lead))
    return out.reshape(lead + (actions[i], -1))


def product_joint(dists: Sequence[np.ndarray]) -> np.ndarray:
    """Joint (.., J) distribution of independent per-agent (.., A_j) factors."""
    out = np.asarray(dists[0], dtype=float)
    for p in dists[1:]:
        p = np.asarray(p, dtype=float)
        out = (out[..., :, None] * p[..., None, :]).reshape(out.shape[:-1] + (-1,))
    return out


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row of a (n, K) probability array, by inverse CDF."""
    probs = np.asarray(probs, dtype=float)
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1])[..., None] * cdf[..., -1:]
    out = (cdf <= u).sum(axis=-1)
    return np.minimum(out, probs.shape[-1] - 1)


@dataclass(frozen=True, eq=False)
class LinearMarkovGame:
    """Tabular layered Markov game carrying a d-dimensional feature map per agent."""

    m: int
    H: int
    d: int
    actions: tuple
    states_per_layer: tuple
    features: tuple
    transitions: tuple
    losses: tuple
    initial_state: int = 0
    _jidx: tuple = field(init=False, repr=False)

    def __post_init__(self):
        set_ = object.__setattr__
        m, H, d = int(self.m), int(self.H), int(self.d)
        actions = tuple(int(a) for a in self.actions)
        sizes = tuple(int(s) for s in self.states_per_layer)
        if m < 1 or H < 1 or d < 1:
            raise ValueError("m, H and d must be positive")
        if len(actions) != m or min(actions) < 1:
            raise ValueError("need one positive action count per agent")
        if len(sizes) != H or min(sizes) < 1:
            raise ValueError("need one positive state count per decision layer")
        J = math.prod(actions)
        nxt = sizes[1:] + (1,)
        feats = []
        if len(self.features) != m:
            raise ValueError("features must be indexed [agent][layer]")
        for i in range(m):
            if len(self.features[i]) != H:
                raise ValueError(f"features[{i}] must have one array per layer")
            per = []
            for h in range(H):
                f = _frozen(self.features[i][h])
                if f.shape != (sizes[h], actions[i], d):
                    raise ValueError(
                        f"features[{i}][{h}] has shape {f.shape}, expected {(sizes[h], actions[i], d)}")
                per.append(f)
            feats.append(tuple(per))
        trans, loss = [], []
        if len(self.transitions) != H or len(self.losses) != H:
            raise ValueError("transitions and losses need one array per layer")
        for h in range(H):
            p = _frozen(self.transitions[h])
            if p.shape != (sizes[h], J, nxt[h]):
                raise ValueError(f"transitions[{h}] has shape {p.shape}, expected {(sizes[h], J, nxt[h])}")
            l_ = _frozen(self.losses[h])
            if l_.shape != (m, sizes[h], J):
                raise ValueError(f"losses[{h}] has shape {l_.shape}, expected {(m, sizes[h], J)}")
            trans.append(p)
            loss.append(l_)
        if not 0 <= int(self.initial_state) < sizes[0]:
            raise ValueError("initial_state must index a state of layer 0")
        set_(self, "m", m)
        set_(self, "H", H)
        set_(self, "d", d)
        set_(self, "actions", actions)
        set_(self, "states_per_layer", sizes)
        set_(self, "features", tuple(feats))
        set_(self, "transitions", tuple(trans))
        set_(self, "losses", tuple(loss))
        set_(self, "initial_state", int(self.initial_state))
        set_(self, "_jidx", tuple(joint_index_table(actions, i) for i in range(m)))

    @property
    def n_joint(self) -> int:
        return math.prod(self.actions)

    def n_states(self, h: int) -> int:
        """State count of layer h (the sink layer H has one state)."""
        return self.states_per_layer[h] if h < self.H else 1

    def joint_index(self, i: int) -> np.ndarray:
        return self._jidx[i]

    def n_opponent_joint(self, i: int) -> int:
        return self.n_joint // self.actions[i]

    def feature(self, i: int, state: StateId, action: int) -> np.ndarray:
        return self.features[i][state.layer][state.index, action]

    def flat_features(self, i: int, h: int) -> np.ndarray:
        """(S_h * A_i, d) matrix of features, pair index s * A_i + a."""
        return self.features[i][h].reshape(-1, self.d)


def validate_game(game: LinearMarkovGame) -> list:
    """List of invariant violations (empty when the game is well formed).

    Feature norms below 1/sqrt(d) are not violations; they raise a
    :class:`GameValidationWarning` instead.
    """
    out = []
    small = 0
    for h in range(game.H):
        p = game.transitions[h]
        if not np.all(np.isfinite(p)):
            out.append(f"transitions[{h}] contains non-finite entries")
        neg = np.argwhere(p < -PROB_TOL)
        for s, j, s2 in neg[:10]:
            out.append(f"transitions[{h}][{s}][{j}][{s2}] = {p[s, j, s2]!r} is negative")
        sums = p.sum(axis=-1)
        bad = np.argwhere(np.abs(sums - 1.0) > PROB_TOL)
        for s, j in bad:
            out.append(f"row sum != 1: transitions[{h}][{s}][{j}] sums to {sums[s, j]!r}")
        l_ = game.losses[h]
        bad = np.argwhere(~((l_ >= 0.0) & (l_ <= 1.0)))
        for i, s, j in bad:
            out.append(f"loss out of [0,1]: losses[{h}][{i}][{s}][{j}] = {l_[i, s, j]!r}")
    for i in range(game.m):
        for h in range(game.H):
            f = game.features[i][h]
            if not np.all(np.isfinite(f)):
                out.append(f"features[{i}][{h}] contains non-finite entries")
                continue
            norms = np.linalg.norm(f, axis=-1)
            for s, a in np.argwhere(norms > 1.0 + 1e-12):
                out.append(f"||phi|| > 1: agent {i}, layer {h}, state {s}, action {a} has norm {norms[s, a]:.6g}")
            small += int(np.sum(norms < 1.0 / math.sqrt(game.d) - 1e-12))
    if small:
        warnings.warn(
            f"{small} feature vectors have norm below 1/sqrt(d); the bias bounds assume otherwise",
            GameValidationWarning, stacklevel=2)
    return out


def one_hot_tabular_embedding(states_per_layer: Sequence[int], actions: Sequence[int],
                              d: Optional[int] = None) -> list:
    """Indicator features: ``features[i][h][s, a] = e_{s * A_i + a}``.

    ``d`` defaults to the largest per-layer block ``S_h * A_i``; smaller values
    raise, larger ones pad with zeros.
    """
    need = max(int(s) * int(a) for s in states_per_layer for a in actions)
    if d is None:
        d = need
    if d < need:
        raise ValueError(f"one-hot embedding needs d >= {need}, got {d}")
    feats = []
    for a_i in actions:
        per = []
        for s_h in states_per_layer:
            f = np.zeros((s_h, a_i, d))
            f.reshape(s_h * a_i, d)[np.arange(s_h * a_i), np.arange(s_h * a_i)] = 1.0
            per.append(f)
        feats.append(per)
    return feats


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

class MarkovJointPolicy:
    """Per-state joint action distributions, ``layers[h]`` of shape (S_h, J).

    Product policies keep their per-agent factors; marginals of correlated
    policies are derived on demand.
    """

    def __init__(self, layers, actions, factors=None):
        self.actions = tuple(int(a) for a in actions)
        J = math.prod(self.actions)
        self.layers = tuple(_frozen(p) for p in layers)
        for h, p in enumerate(self.layers):
            if p.ndim != 2 or p.shape[1] != J:
                raise ValueError(f"layer {h} has shape {p.shape}, expected (S_h, {J})")
        self.factors = None
        if factors is not None:
            self.factors = tuple(tuple(_frozen(f) for f in fi) for fi in factors)

    @classmethod
    def uniform(cls, game: LinearMarkovGame) -> "MarkovJointPolicy":
        factors = [[np.full((game.states_per_layer[h], a), 1.0 / a) for h in range(game.H)]
                   for a in game.actions]
        return cls.from_product(factors, game.actions)

    @classmethod
    def from_product(cls, factors, actions) -> "MarkovJointPolicy":
        """``factors[i][h]`` is agent i's (S_h, A_i) table."""
        H = len(factors[0])
        layers = [product_joint([factors[i][h] for i in range(len(factors))]) for h in range(H)]
        return cls(layers, actions, factors=factors)

    @property
    def H(self) -> int:
        return len(self.layers)

    def is_product(self) -> bool:
        return self.factors is not None

    def marginal(self, i: int) -> list:
        if self.factors is not None:
            return list(self.factors[i])
        return [agent_view(p, self.actions, i).sum(axis=-1) for p in self.layers]

    def opponents(self, i: int) -> list:
        """Joint distribution of the other agents, (S_h, J_{-i}) per layer."""
        return [agent_view(p, self.actions, i).sum(axis=-2) for p in self.layers]

    def check(self, tol: float = PROB_TOL) -> list:
        out = []
        for h, p in enumerate(self.layers):
            if np.any(p < -tol):
                out.append(f"layer {h}: negative probability")
            bad = np.abs(p.sum(axis=1) - 1.0) > tol
            for s in np.flatnonzero(bad):
                out.append(f"layer {h}, state {s}: distribution sums to {p[s].sum()!r}")
        return out

    def with_layer(self, h: int, layer) -> "MarkovJointPolicy":
        layers = list(self.layers)
        layers[h] = layer
        return MarkovJointPolicy(layers, self.actions)

    def to_dict(self) -> dict:
        return {"layers": [p.tolist() for p in self.layers]}


class MixturePolicy:
    """Draw one component per episode (with the given weights); everyone follows it."""

    def __init__(self, components, weights=None):
        comps = list(components)
        if not comps:
            raise ValueError("a mixture needs at least one component")
        if weights is None:
            weights = np.full(len(comps), 1.0 / len(comps))
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(comps),) or np.any(w < 0) or abs(w.sum() - 1.0) > PROB_TOL:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        self.components = tuple(comps)
        self.weights = _frozen(w)
        self.actions = comps[0].actions
        self._stack = {}
        self._marg = {}

    @classmethod
    def from_counts(cls, components, counts) -> "MixturePolicy":
        c = np.asarray(counts, dtype=float)
        return cls(components, c / c.sum())

    @property
    def H(self) -> int:
        return self.components[0].H

    def stacked(self, h: int) -> np.ndarray:
        """(C, S_h, J) array of the components' layer-h tables."""
        if h not in self._stack:
            self._stack[h] = np.stack([c.layers[h] for c in self.components])
        return self._stack[h]

    def stacked_marginal(self, h: int, i: int) -> np.ndarray:
        key = (h, i)
        if key not in self._marg:
            self._marg[key] = np.stack([c.marginal(i)[h] for c in self.components])
        return self._marg[key]

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(),
                "components": [c.to_dict() for c in self.components]}


def as_mixture(policy) -> MixturePolicy:
    if isinstance(policy, MixturePolicy):
        return policy
    if isinstance(policy, MarkovJointPolicy):
        return MixturePolicy([policy], [1.0])
    raise TypeError(f"expected a policy, got {type(policy).__name__}")


@dataclass
class CompositePolicy:
    """Roll in with a (mixture) policy and switch behaviour at one layer.

    Before ``layer`` everybody follows the episode's rollin component.  At
    ``layer``: if ``agent`` is set, that agent keeps acting by the component's
    marginal while the others draw from ``opponents`` (S_h, J_{-i}); otherwise
    everyone draws from ``joint`` (S_h, J), or from the component when that is
    None too.  After ``layer`` the ``continuation`` policy is used (default:
    the rollin component).
    """

    rollin: Union[MixturePolicy, MarkovJointPolicy]
    layer: int
    agent: Optional[int] = None
    opponents: Optional[np.ndarray] = None
    joint: Optional[np.ndarray] = None
    continuation: Optional[MarkovJointPolicy] = None


@dataclass
class Episodes:
    """A batch of n episodes (states are -1 after ``stop`` when truncated)."""

    states: np.ndarray       # (n, H+1)
    joint: np.ndarray        # (n, H)
    actions: np.ndarray      # (n, H, m)
    losses: np.ndarray       # (n, H, m)
    components: np.ndarray   # (n,) rollin component drawn for each episode

    def __len__(self):
        return self.states.shape[0]


@dataclass
class Trajectory:
    states: np.ndarray     # (H+1,) state index per layer, last is the sink
    joint: np.ndarray      # (H,)
    actions: np.ndarray    # (H, m)
    losses: np.ndarray     # (H, m)

    def steps(self):
        for h in range(len(self.joint)):
            yield (StateId(h, int(self.states[h])), int(self.joint[h]),
                   self.losses[h], StateId(h + 1, int(self.states[h + 1])))


def _layer_probs(game, spec: CompositePolicy, mix: MixturePolicy, h, comps, states):
    if h < spec.layer or (h > spec.layer and spec.continuation is None):
        return mix.stacked(h)[comps, states]
    if h > spec.layer:
        return spec.continuation.layers[h][states]
    if spec.agent is not None:
        i = spec.agent
        if spec.opponents is None:
            raise ValueError("composite policy with a deviating agent needs opponents")
        opp = np.asarray(spec.opponents)
        if opp.shape != (game.n_states(h), game.n_opponent_joint(i)):
            raise ValueError(f"opponent table has shape {opp.shape}")
        own = mix.stacked_marginal(h, i)[comps, states]
        outer = own[:, :, None] * opp[states][:, None, :]
        probs = np.empty((len(states), game.n_joint))
        probs[:, game.joint_index(i)] = outer
        return probs
    if spec.joint is not None:
        jt = np.asarray(spec.joint)
        if jt.shape != (game.n_states(h), game.n_joint):
            raise ValueError(f"joint table has shape {jt.shape}")
        return jt[states]
    return mix.stacked(h)[comps, states]


def sample_episodes(game: LinearMarkovGame, policy, n: int, rng, stop: Optional[int] = None) -> Episodes:
    """Sample ``n`` episodes; with ``stop`` the simulation ends once layer
    ``stop`` is reached (its state is recorded, no action is taken there)."""
    rng = as_generator(rng)
    if isinstance(policy, CompositePolicy):
        spec = policy
    else:
        spec = CompositePolicy(policy, layer=game.H)
    mix = as_mixture(spec.rollin)
    if mix.actions != game.actions:
        raise ValueError("policy action counts do not match the game")
    if mix.H != game.H:
        raise ValueError("policy horizon does not match the game")
    last = game.H if stop is None else int(stop)
    states = np.full((n, game.H + 1), -1, dtype=np.int64)
    joint = np.full((n, game.H), -1, dtype=np.int64)
    losses = np.zeros((n, game.H, game.m))
    comps = sample_categorical(np.broadcast_to(mix.weights, (n, len(mix.weights))), rng)
    s = np.full(n, game.initial_state, dtype=np.int64)
    states[:, 0] = s
    for h in range(last):
        probs = _layer_probs(game, spec, mix, h, comps, s)
        j = sample_categorical(probs, rng)
        joint[:, h] = j
        losses[:, h, :] = game.losses[h][:, s, j].T
        s = sample_categorical(game.transitions[h][s, j], rng)
        states[:, h + 1] = s
    acts = np.full((n, game.H, game.m), -1, dtype=np.int64)
    ok = joint >= 0
    if ok.any():
        unr = np.unravel_index(joint[ok], game.actions)
        acts[ok] = np.stack(unr, axis=-1)
    return Episodes(states, joint, acts, losses, comps)


def sample_trajectory(game: LinearMarkovGame, policy, rng) -> Trajectory:
    """One full-horizon trajectory under a (composite) policy."""
    ep = sample_episodes(game, policy, 1, rng)
    return Trajectory(ep.states[0], ep.joint[0], ep.actions[0], ep.losses[0])


# ---------------------------------------------------------------------------
# Exact quantities
# ---------------------------------------------------------------------------

def _opponent_layer(game, h, i, opponents):
    if isinstance(opponents, MarkovJointPolicy):
        return opponents.opponents(i)[h]
    opp = np.asarray(opponents, dtype=float)
    if opp.shape != (game.n_states(h), game.n_opponent_joint(i)):
        raise ValueError(f"opponent table has shape {opp.shape}")
    return opp


def exact_q_kernel(game: LinearMarkovGame, h: int, i: int, opponents, next_value) -> np.ndarray:
    """Q(s, a) = E_{a^{-i}}[(l^i + P V)(s, a, a^{-i})] on layer h, shape (S_h, A_i).

    ``opponents`` is either a policy (its layer-h opponent marginal is used)
    or an (S_h, J_{-i}) table; ``next_value`` lives on layer h+1.
    """
    v = np.asarray(next_value, dtype=float)
    if v.shape != (game.n_states(h + 1),):
        raise ValueError(f"next_value must have shape ({game.n_states(h + 1)},)")
    w = game.losses[h][i] + game.transitions[h] @ v
    opp = _opponent_layer(game, h, i, opponents)
    return np.einsum("sab,sb->sa", agent_view(w, game.actions, i), opp)


def state_occupancy(game: LinearMarkovGame, policy: MarkovJointPolicy) -> list:
    """Per-layer state distributions under ``policy`` (layers 0..H)."""
    mu = np.zeros(game.n_states(0))
    mu[game.initial_state] = 1.0
    out = [mu]
    for h in range(game.H):
        # flow[s, s'] = sum_j pi(j|s) P(s'|s, j)
        flow = np.einsum("sj,sjt->st", policy.layers[h], game.transitions[h])
        mu = mu @ flow
        out.append(mu)
    return out


def markovize(game: LinearMarkovGame, mixture: MixturePolicy) -> MarkovJointPolicy:
    """Markov joint policy with the same state-action occupancy as the mixture.

    Its value equals the mixture's value for every agent; unreachable states
    fall back to the weight-averaged tables.
    """
    occ = [state_occupancy(game, c) for c in mixture.components]
    layers = []
    for h in range(game.H):
        w = np.array([mixture.weights[c] * occ[c][h] for c in range(len(occ))])  # (C, S)
        tot = w.sum(axis=0)
        plain = np.einsum("c,csj->sj", mixture.weights, mixture.stacked(h))
        mixed = np.einsum("cs,csj->sj", w, mixture.stacked(h))
        with np.errstate(invalid="ignore", divide="ignore"):
            layer = np.where(tot[:, None] > 0, mixed / np.where(tot > 0, tot, 1.0)[:, None], plain)
        layers.append(layer / layer.sum(axis=1, keepdims=True))
    return MarkovJointPolicy(layers, game.actions)
