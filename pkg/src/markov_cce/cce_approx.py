"""One-layer CCE approximation with magnitude-reduced Q-estimates and
action-dependent bonuses.

For layer h every agent runs exponential weights at every state of S_h on
the bonus-adjusted estimates Q_hat - B.  The estimates use a regularised
inverse covariance of the roll-in policy and a pessimistic per-state gap is
assembled from quantities observed during the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exp3 import Exp3Bank, Exp3PreconditionError
from .game import (LinearMarkovGame, MixturePolicy, agent_view, as_mixture, product_joint,
                   sample_categorical, sample_episodes)
from .matstat import CovarianceEstimate, covariance_estimate
from .params import HyperParams
from .rng import as_generator, as_streams


@dataclass(frozen=True, eq=False)
class GapTable:
    """Per-state gap of one agent; components are stored before division by K."""

    K: int
    reg_term: np.ndarray
    bias1: np.ndarray
    bias2_const: np.ndarray
    bonus1: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return (self.reg_term + self.bias1 + self.bias2_const + self.bonus1) / self.K

    def summary(self) -> dict:
        t = self.total
        return {"mean": float(t.mean()), "max": float(t.max())}


@dataclass(eq=False)
class AgentHistory:
    """Everything assemble_gap needs for one agent at one layer."""

    pi: np.ndarray           # (K, S, A) EXP3 policy before round k
    qhat: np.ndarray         # (K, S, A)
    theta: np.ndarray        # (K, d)
    bonus: np.ndarray        # (S, A)
    m_hat: np.ndarray        # (S, A)
    features: np.ndarray     # (S, A, d)
    sigma_dagger: np.ndarray
    eta: np.ndarray          # (S,) learning rate of each state's learner


@dataclass(eq=False)
class CCEResult:
    policy: np.ndarray                 # (S_h, J) averaged joint policy
    gaps: list                         # GapTable per agent
    covariances: list                  # CovarianceEstimate per agent
    histories: list                    # AgentHistory per agent
    etas: list = field(default_factory=list)
    samples: int = 0

    def __iter__(self):
        # allows ``pi, gaps = run(...)``
        yield self.policy
        yield self.gaps

    def gap_totals(self) -> np.ndarray:
        """(m, S_h) array of Gap^i(s)."""
        return np.stack([g.total for g in self.gaps])


def collect_samples(game: LinearMarkovGame, h: int, pibar, K: int, rng):
    """2K roll-in episodes under pibar; each gives one layer-h (s, a^i) feature
    per agent.  Returns ``(cov, mag)``: lists over agents of (K, d) arrays,
    the first K episodes feeding cov and the last K feeding mag."""
    ep = sample_episodes(game, pibar, 2 * K, as_generator(rng), stop=h + 1)
    s = ep.states[:, h]
    cov, mag = [], []
    for i in range(game.m):
        f = game.features[i][h][s, ep.actions[:, h, i]]
        cov.append(f[:K])
        mag.append(f[K:])
    return cov, mag


def bonus_table(features: np.ndarray, cov: CovarianceEstimate, beta1: float, beta2: float) -> np.ndarray:
    """B(s,a) = beta1 ||phi||^2 + beta2 sum_j phi[j] max_{(s',a')} (Sigma^dagger phi(s',a'))[j]."""
    flat = features.reshape(-1, features.shape[-1])
    proj = flat @ cov.sigma_dagger                   # rows: Sigma^dagger phi(s', a')
    sup = proj.max(axis=0)
    quad = np.einsum("pd,pd->p", proj, flat)
    return (beta1 * quad + beta2 * flat @ sup).reshape(features.shape[:-1])


def mag_offset(features: np.ndarray, cov: CovarianceEstimate, mag_samples: np.ndarray, H: float) -> np.ndarray:
    """m_hat(s,a) = (H/K) sum_kappa (phi(s,a)^T Sigma^dagger phi_kappa)_-."""
    flat = features.reshape(-1, features.shape[-1])
    x = flat @ cov.sigma_dagger @ np.asarray(mag_samples, dtype=float).T
    return (H * np.minimum(x, 0.0).mean(axis=1)).reshape(features.shape[:-1])


def _log_pos(x: float) -> float:
    # the log factors are >= 0 in the intended regime; clamp so the gap
    # components stay nonnegative for tiny K with a large regulariser
    return max(math.log(x), 0.0)


def assemble_gap(history: AgentHistory, params: HyperParams, K: int, H: int) -> GapTable:
    """K * Gap(s) = log A / eta + 2 eta sum_k E_{pi_k}[Q_hat^2]
                  + 8 sqrt2 sqrt(2 d H^2 sum_k ||E_{pi_k} phi||^2 + sum_k (E_{pi_k} phi^T theta_k)^2) log(4KH/(gamma delta))
                  + c_bias2 (d / beta1) log(dK/delta)
                  + sum_k E_{pi_k}[B]."""
    pi, q = history.pi, history.qhat
    if pi.shape[0] != K or q.shape[0] != K or history.theta.shape[0] != K:
        raise ValueError(f"history holds {pi.shape[0]} rounds, expected K={K}")
    S, A = pi.shape[1:]
    d = history.features.shape[-1]
    eta = np.broadcast_to(np.asarray(history.eta, dtype=float), (S,))
    reg = math.log(A) / eta + 2.0 * eta * np.einsum("ksa,ksa->s", pi, q * q)
    ephi = np.einsum("ksa,sad->ksd", pi, history.features)
    nrm = np.einsum("ksd,de,kse->s", ephi, history.sigma_dagger, ephi)
    lin = np.einsum("ksd,kd->ks", ephi, history.theta)
    inner = np.maximum(2.0 * d * H * H * nrm + (lin * lin).sum(axis=0), 0.0)
    bias1 = 8.0 * math.sqrt(2.0) * np.sqrt(inner) * _log_pos(4.0 * K * H / (params.gamma * params.delta))
    bias2 = np.full(S, params.c_bias2 * (d / params.beta1) * _log_pos(d * K / params.delta))
    bonus1 = np.einsum("ksa,sa->s", pi, history.bonus)
    return GapTable(int(K), reg, bias1, bias2, bonus1)


def run(game: LinearMarkovGame, h: int, pibar, vbar, K: int, params: HyperParams, rng) -> CCEResult:
    """CCE-Approx on layer h.

    Args:
        pibar: roll-in policy (mixture or Markov joint policy).
        vbar: (m, S_{h+1}) next-layer value estimates in [0, H-h-1].
        K: number of rounds; also the size of each covariance / magnitude pool.
        rng: Streams, int seed or Generator.  Pools use stream "pool", agent
            i's round trajectories use stream ("agent", i).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    streams = as_streams(rng)
    mix = as_mixture(pibar)
    m, H = game.m, game.H
    S = game.states_per_layer[h]
    vbar = np.asarray(vbar, dtype=float)
    if vbar.shape != (m, game.n_states(h + 1)):
        raise ValueError(f"vbar must have shape {(m, game.n_states(h + 1))}")

    cov_s, mag_s = collect_samples(game, h, mix, K, streams.generator("pool"))

    covs, banks, hist = [], [], []
    pre = []
    for i in range(m):
        A = game.actions[i]
        feats = game.features[i][h]
        cov = covariance_estimate(cov_s[i], params.gamma)
        flat = feats.reshape(-1, game.d)
        proj = flat @ cov.sigma_dagger
        gram = proj @ flat.T                          # gram[p, q] = phi_p^T Sigma^dagger phi_q
        bonus = bonus_table(feats, cov, params.beta1, params.beta2)
        mhat = mag_offset(feats, cov, mag_s[i], H)
        # Q_hat >= m_hat always, so min_a (m_hat - B)(s, a) bounds every loss
        # fed to the learner at s; eta is shrunk per state when that bound
        # would break eta * loss >= -1
        lower = (mhat - bonus).min(axis=1)
        eta = np.full(S, params.eta)
        bad = eta * lower < -1.0
        if np.any(bad):
            if not params.clip_eta:
                s_bad = int(np.flatnonzero(bad)[0])
                raise Exp3PreconditionError(
                    f"agent {i}, layer {h}, state {s_bad}: eta * min(m_hat - B) = "
                    f"{params.eta * lower[s_bad]:.4g} < -1")
            eta[bad] = -1.0 / lower[bad]
        covs.append(cov)
        banks.append(Exp3Bank(S, A, eta))
        hist.append(AgentHistory(np.empty((K, S, A)), np.empty((K, S, A)), np.empty((K, game.d)),
                                 bonus, mhat, np.asarray(feats), cov.sigma_dagger, eta))
        pre.append((A, gram, proj, (bonus).ravel(), mhat.ravel()))

    # round trajectories: roll in with pibar to layer h, own action from the
    # episode's component, opponents and the transition drawn inside the loop
    cum_p = np.cumsum(game.transitions[h], axis=-1)
    draws = []
    for i in range(m):
        g = streams.generator("agent", i)
        ep = sample_episodes(game, mix, K, g, stop=h)
        s = ep.states[:, h]
        own = sample_categorical(mix.stacked_marginal(h, i)[ep.components, s], g)
        u_opp = g.random((K, m))
        u_next = g.random(K)
        draws.append((s.tolist(), own.tolist(), u_opp, u_next.tolist()))

    acts = game.actions
    losses_h = game.losses[h]
    for k in range(K):
        pols = [b.policy() for b in banks]
        cums = [np.cumsum(p, axis=1) for p in pols]
        costs = []
        for i in range(m):
            A, gram, proj, bonus, mhat = pre[i]
            s_list, own_list, u_opp, u_next = draws[i]
            s = s_list[k]
            a = own_list[k]
            jnt = 0
            for j in range(m):
                if j == i:
                    aj = a
                else:
                    c = cums[j][s]
                    aj = min(int(np.searchsorted(c, u_opp[k, j] * c[-1], side="right")), acts[j] - 1)
                jnt = jnt * acts[j] + aj
            cp = cum_p[s, jnt]
            s2 = min(int(np.searchsorted(cp, u_next[k] * cp[-1], side="right")), cp.shape[0] - 1)
            y = losses_h[i, s, jnt] + vbar[i, s2]
            p = s * A + a
            x = gram[:, p]
            q = x * y - H * np.minimum(x, 0.0) + mhat
            hh = hist[i]
            hh.pi[k] = pols[i]
            hh.qhat[k] = q.reshape(S, A)
            hh.theta[k] = proj[p] * y
            costs.append((q - bonus).reshape(S, A))
        for i in range(m):
            banks[i].update(costs[i], where=f" (agent {i}, layer {h}, round {k})")

    joint = product_joint([hh.pi for hh in hist]).mean(axis=0)
    joint /= joint.sum(axis=1, keepdims=True)
    gaps = [assemble_gap(hh, params, K, H) for hh in hist]
    return CCEResult(joint, gaps, covs, hist, [hh.eta for hh in hist], samples=(m + 2) * K)


def exact_round_kernels(game: LinearMarkovGame, h: int, result: CCEResult, vbar) -> list:
    """True per-round kernels Q_k^i(s, a) (K, S, A_i) given the opponents' pi_k."""
    vbar = np.asarray(vbar, dtype=float)
    out = []
    for i in range(game.m):
        w = game.losses[h][i] + game.transitions[h] @ vbar[i]
        view = agent_view(w, game.actions, i)             # (S, A_i, J_-i)
        others = [result.histories[j].pi for j in range(game.m) if j != i]
        opp = product_joint(others) if others else np.ones(result.histories[i].pi.shape[:2] + (1,))
        out.append(np.einsum("sab,ksb->ksa", view, opp))
    return out


def realized_regret(game: LinearMarkovGame, h: int, result: CCEResult, vbar) -> np.ndarray:
    """(m, S_h): max_{a*} (1/K) sum_k <pi_k^i(s) - e_{a*}, Q_k^i(s, .)> with exact kernels."""
    kernels = exact_round_kernels(game, h, result, vbar)
    rows = []
    for i, qk in enumerate(kernels):
        pi = result.histories[i].pi
        played = np.einsum("ksa,ksa->s", pi, qk) / pi.shape[0]
        best = qk.mean(axis=0).min(axis=1)
        rows.append(played - best)
    return np.stack(rows)
