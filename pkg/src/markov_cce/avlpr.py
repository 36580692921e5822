"""Epoch driver: lazy policy updates guarded by feature-norm potentials.

Each epoch plays the current policy once.  When some potential has grown by
more than 1 since the last update, the driver rebuilds the policy: a
backward sweep over layers runs CCE-Approx R times per layer with K = t,
keeps per state the repetition with the smallest agent-summed gap, and then
fits the optimistic values for the next layer down.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from . import cce_approx, v_approx
from .game import LinearMarkovGame, MarkovJointPolicy, MixturePolicy, sample_trajectory
from .params import Schedule
from .rng import as_streams

log = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    t: int
    lazy: bool
    policy_id: int
    potentials: list          # [h][i]
    violations: int           # non-lazy epochs so far (this one included)
    gap_summary: list         # per layer {"mean", "max"} of the gaps in force
    samples: int              # cumulative trajectories consumed

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AVLPRResult:
    pi_out: MixturePolicy
    records: list
    policies: list            # distinct policies; id 0 is the uniform start
    epoch_policy: list        # policy id of pi_tilde_t for t = 0..T

    def epoch_policies(self):
        """(policies, counts) for pi_tilde_1..pi_tilde_T."""
        ids, counts = np.unique(np.asarray(self.epoch_policy[1:]), return_counts=True)
        return [self.policies[k] for k in ids], counts

    @property
    def violations(self) -> int:
        return self.records[-1].violations if self.records else 0


def default_repetitions(delta: float) -> int:
    return max(1, math.ceil(math.log2(1.0 / delta)))


def select_repetition(gap_totals) -> np.ndarray:
    """r*(s) = argmin_r sum_i Gap_r^i(s) for an (R, m, S) array; ties -> lowest r."""
    g = np.asarray(gap_totals, dtype=float)
    return np.argmin(g.sum(axis=1), axis=0)


def potential_scale(m: int, H: int, T: int, delta: float) -> float:
    return 64.0 * math.log(8.0 * m * H * T / delta)


def potential_increment(phi, sigma_dagger, scale: float) -> float:
    phi = np.asarray(phi, dtype=float)
    return float(phi @ sigma_dagger @ phi) / scale


def potential_update(psi, game: LinearMarkovGame, states, actions, sigma, rstar, scale: float):
    """Add ||phi(s_h, a_h^i)||^2 / scale to psi[h][i] for every (h, i).

    ``sigma[h][i]`` holds the R inverse covariances of the update in force and
    ``rstar[h]`` the selected repetition per state; the visited state's
    selection decides which one measures the feature.
    """
    out = np.array(psi, dtype=float, copy=True)
    for h in range(game.H):
        s = int(states[h])
        r = int(rstar[h][s])
        for i in range(game.m):
            phi = game.features[i][h][s, int(actions[h][i])]
            out[h, i] += potential_increment(phi, sigma[h][i][r], scale)
    return out


def non_lazy_samples(game: LinearMarkovGame, t: int, R: int) -> int:
    return 1 + game.H * R * (game.m + 2) * t + game.H * game.m * t


class _Sweep:
    def __init__(self, game, schedule, delta, R, streams, workers):
        self.game, self.schedule, self.delta, self.R = game, schedule, delta, R
        self.streams = streams
        self.workers = workers

    def __call__(self, t: int, pibar: MixturePolicy):
        game = self.game
        params = self.schedule.hyper(t, game.d, game.H, self.delta)
        lam = self.schedule.ridge_lambda(t, game.d, self.delta)
        v_next = np.zeros((game.m, 1))
        layers = [None] * game.H
        sigma = [None] * game.H
        rstar = [None] * game.H
        gap_summary = [None] * game.H
        for h in range(game.H - 1, -1, -1):
            def one(r, h=h, v_next=v_next):
                return cce_approx.run(game, h, pibar, v_next, t, params,
                                      self.streams.child("cce", t, h, r))
            if self.workers > 1 and self.R > 1:
                with ThreadPoolExecutor(self.workers) as ex:
                    results = list(ex.map(one, range(self.R)))
            else:
                results = [one(r) for r in range(self.R)]
            totals = np.stack([res.gap_totals() for res in results])   # (R, m, S)
            rs = select_repetition(totals)
            S = game.states_per_layer[h]
            layers[h] = np.stack([results[rs[s]].policy[s] for s in range(S)])
            gaps = totals[rs, :, np.arange(S)].T                        # (m, S)
            v_next = v_approx.run(game, h, pibar, layers[h], v_next, gaps, t, lam,
                                  self.streams.child("v", t, h))
            sigma[h] = [[res.covariances[i].sigma_dagger for res in results] for i in range(game.m)]
            rstar[h] = rs
            gap_summary[h] = {"mean": float(gaps.mean()), "max": float(gaps.max())}
        return MarkovJointPolicy(layers, game.actions), sigma, rstar, gap_summary


def run(game: LinearMarkovGame, T: int, delta: float = 0.1, schedule: Optional[Schedule] = None,
        R: Optional[int] = None, rng=0, workers: int = 1,
        callback: Optional[Callable[[EpochRecord], None]] = None) -> AVLPRResult:
    """Run T epochs; returns the output mixture of pi_tilde_0..pi_tilde_T and
    one EpochRecord per epoch (passed to ``callback`` as they are produced)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    schedule = schedule or Schedule()
    R = default_repetitions(delta) if R is None else int(R)
    if R < 1:
        raise ValueError("R must be >= 1")
    streams = as_streams(rng)
    sweep = _Sweep(game, schedule, delta, R, streams, max(1, int(workers)))
    scale = potential_scale(game.m, game.H, T, delta)

    policies = [MarkovJointPolicy.uniform(game)]
    epoch_policy = [0]
    counts = [1]                 # multiplicity of each distinct policy among pi_tilde_0..t-1
    psi = np.zeros((game.H, game.m))
    psi_t0 = psi.copy()
    t0 = 0
    sigma = rstar = None
    gap_summary = [None] * game.H
    violations = 0
    samples = 0
    records = []

    for t in range(1, T + 1):
        current = epoch_policy[-1]
        traj = sample_trajectory(game, policies[current], streams.generator("play", t))
        lazy = False
        if t0 != 0:
            cand = potential_update(psi, game, traj.states, traj.actions, sigma, rstar, scale)
            lazy = bool(np.all(cand <= psi_t0 + 1.0))
        if lazy:
            psi = cand
            samples += 1
            pid = current
        else:
            pibar = MixturePolicy.from_counts(policies, counts)
            new_pol, sigma, rstar, gap_summary = sweep(t, pibar)
            policies.append(new_pol)
            counts.append(0)
            pid = len(policies) - 1
            # the epoch's own increment is measured with the freshly built covariances
            psi = potential_update(psi, game, traj.states, traj.actions, sigma, rstar, scale)
            psi_t0 = psi.copy()
            t0 = t
            violations += 1
            samples += non_lazy_samples(game, t, R)
            log.debug("epoch %d: policy update #%d", t, violations)
        epoch_policy.append(pid)
        counts[pid] += 1
        rec = EpochRecord(t, lazy, pid, psi.tolist(), violations, list(gap_summary), samples)
        records.append(rec)
        if callback is not None:
            callback(rec)

    pi_out = MixturePolicy.from_counts(policies, counts)
    return AVLPRResult(pi_out, records, policies, epoch_policy)
