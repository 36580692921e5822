"""Property suites for the concentration toolkit and the two estimators.

Every suite runs with fixed seeds and returns a ``SuiteResult`` whose
``to_dict`` is the machine-readable report printed by ``markov-cce selftest``.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import cce_approx, exp3, matstat, v_approx
from .evaluation import exact_value
from .game import MarkovJointPolicy
from .generate import reference_game_g1
from .params import Schedule
from .rng import Streams, make_generator

CERTIFICATE_RTOL = 1e-9


@dataclass
class SuiteResult:
    suite: str
    passed: bool
    checks: dict = field(default_factory=dict)   # name -> {"measured", "threshold", "passed", ...}
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _check(measured, threshold, ok: bool, **extra) -> dict:
    out = {"measured": measured, "threshold": threshold, "passed": bool(ok)}
    out.update(extra)
    return out


def _finish(name: str, checks: dict, t0: float) -> SuiteResult:
    return SuiteResult(name, all(c["passed"] for c in checks.values()), checks, time.perf_counter() - t0)


# ---------------------------------------------------------------- exp3

def exp3_suite(trials: int = 1000, T: int = 200, max_actions: int = 8, seed: int = 0) -> SuiteResult:
    """Regret certificate against the best fixed action on random loss sequences.

    Losses are drawn in [-1/eta, 3/eta] with a fraction pinned to -1/eta, so
    the precondition eta * c >= -1 is tight in many rounds.
    """
    t0 = time.perf_counter()
    rng = make_generator(seed, "selftest", "exp3")
    held = 0
    worst = -math.inf
    for _ in range(trials):
        A = int(rng.integers(2, max_actions + 1))
        eta = float(np.exp(rng.uniform(math.log(0.01), 0.0)))
        c = rng.uniform(-1.0, 3.0, size=(T, A)) / eta
        c[rng.random((T, A)) < 0.1] = -1.0 / eta
        y = np.eye(A)[int(np.argmin(c.sum(axis=0)))]
        lhs, rhs = exp3.regret_certificate(c, y, eta)
        worst = max(worst, (lhs - rhs) / max(1.0, abs(rhs)))
        held += lhs <= rhs + CERTIFICATE_RTOL * max(1.0, abs(rhs))
    checks = {"certificate": _check(int(held), trials, held == trials, trials=trials,
                                    worst_relative_excess=worst)}
    return _finish("exp3", checks, t0)


# ----------------------------------------------------------- magnitude

def _random_distribution(rng):
    n = int(rng.integers(2, 7))
    vals = [Fraction(int(v), int(rng.integers(1, 9))) for v in rng.integers(-20, 21, size=n)]
    w = [int(x) for x in rng.integers(1, 10, size=n)]
    tot = sum(w)
    return vals, [Fraction(x, tot) for x in w]


def magnitude_suite(trials: int = 50, seed: int = 0) -> SuiteResult:
    """Exact (rational) enumeration of the three magnitude-reduction clauses."""
    t0 = time.perf_counter()
    rng = make_generator(seed, "selftest", "magnitude")
    ok = {"mean": 0, "second_moment": 0, "lower_bound": 0}
    for _ in range(trials):
        vals, probs = _random_distribution(rng)
        m_hat = sum(p * matstat.neg_part(v) for v, p in zip(vals, probs))
        red = [matstat.magnitude_reduce(v, m_hat) for v in vals]
        ez = sum(p * v for v, p in zip(vals, probs))
        ok["mean"] += sum(p * r for r, p in zip(red, probs)) == ez
        ok["second_moment"] += (sum(p * r * r for r, p in zip(red, probs))
                                <= 6 * sum(p * v * v for v, p in zip(vals, probs)))
        ok["lower_bound"] += all(r >= m_hat for r in red)
    checks = {k: _check(int(v), trials, v == trials) for k, v in ok.items()}
    return _finish("magnitude", checks, t0)


# -------------------------------------------------------------- matrix

def matrix_suite(trials: int = 500, n: int = 200, d: int = 4, delta: float = 0.05, seed: int = 0,
                 max_failures: int = 50) -> SuiteResult:
    """Both PSD sandwiches for averages of rank-one samples phi phi^T, ||phi|| <= 1.

    phi is drawn from a fixed finite support so the population matrix is exact.
    """
    t0 = time.perf_counter()
    rng = make_generator(seed, "selftest", "matrix")
    support = rng.normal(size=(12, d))
    support /= np.linalg.norm(support, axis=1, keepdims=True)
    support *= rng.uniform(0.2, 1.0, size=(12, 1))
    probs = rng.dirichlet(np.ones(12))
    population = np.einsum("k,ki,kj->ij", probs, support, support)
    fails = np.zeros(2, dtype=int)
    for _ in range(trials):
        idx = rng.choice(12, size=n, p=probs)
        emp = matstat.empirical_covariance(support[idx])
        up, lo = matstat.psd_sandwich_check(emp, population, n, 1.0, delta)
        fails += [not up, not lo]
    checks = {
        "upper": _check(int(fails[0]), max_failures, fails[0] <= max_failures, trials=trials),
        "lower": _check(int(fails[1]), max_failures, fails[1] <= max_failures, trials=trials),
    }
    return _finish("matrix", checks, t0)


# ------------------------------------------------------------ freedman

def _freedman_paths(kind: str, trials: int, length: int, rng):
    """(values, conditional second moments), both (trials, length)."""
    eps = rng.choice([-1.0, 1.0], size=(trials, length))
    if kind == "rademacher":
        return eps, np.ones_like(eps)
    # scale predictable from the past: large while the partial sum is positive
    x = np.empty_like(eps)
    v = np.empty_like(eps)
    run = np.zeros(trials)
    base = rng.uniform(0.05, 1.0, size=length)
    for k in range(length):
        sig = np.where(run > 0, 1.0, base[k])
        x[:, k] = sig * eps[:, k]
        v[:, k] = sig * sig
        run += x[:, k]
    return x, v


def freedman_suite(trials: int = 1000, length: int = 10_000, delta: float = 0.05, seed: int = 0,
                   max_failures: int = 100) -> SuiteResult:
    t0 = time.perf_counter()
    checks = {}
    for kind in ("rademacher", "heteroscedastic"):
        rng = make_generator(seed, "selftest", "freedman", kind)
        x, v = _freedman_paths(kind, trials, length, rng)
        bound = matstat.freedman_bound_batch(x, v, delta)
        exceed = int(np.sum(np.abs(x.sum(axis=1)) > bound))
        checks[kind] = _check(exceed, max_failures, exceed <= max_failures, trials=trials,
                              median_ratio=float(np.median(np.abs(x.sum(axis=1)) / bound)))
    return _finish("freedman", checks, t0)


# ------------------------------------------------------- gap-pessimism

def _layer_setups(game):
    """(h, vbar) pairs: last layer with zero continuation, layer 0 with the
    exact values of the uniform policy."""
    vals = exact_value(game, MarkovJointPolicy.uniform(game)).values
    return [(h, np.zeros((game.m, 1)) if h == game.H - 1 else vals[h + 1]) for h in range(game.H)]


def gap_pessimism_suite(trials: int = 200, K: int = 1024, delta: float = 0.1, seed: int = 0,
                        min_hits: int = 150, schedule: Schedule = None) -> SuiteResult:
    """Gap^i(s) >= realized per-state regret against exact kernels, counted
    per (layer, agent, state) over independent calls with uniform roll-in."""
    t0 = time.perf_counter()
    game = reference_game_g1(0)
    schedule = schedule or Schedule()
    params = schedule.hyper(K, game.d, game.H, delta)
    pibar = MarkovJointPolicy.uniform(game)
    checks = {}
    for h, vbar in _layer_setups(game):
        hits = np.zeros((game.m, game.states_per_layer[h]), dtype=int)
        ratio = []
        for r in range(trials):
            res = cce_approx.run(game, h, pibar, vbar, K, params, Streams(seed, ("selftest", "gap", h, r)))
            reg = cce_approx.realized_regret(game, h, res, vbar)
            gap = res.gap_totals()
            hits += reg <= gap
            ratio.append(float((reg / gap).max()))
        for i in range(game.m):
            for s in range(game.states_per_layer[h]):
                checks[f"h{h}_agent{i}_s{s}"] = _check(int(hits[i, s]), min_hits, hits[i, s] >= min_hits,
                                                       trials=trials)
        checks[f"h{h}_agent{0}_s{0}"]["max_regret_over_gap"] = max(ratio)
    return _finish("gap-pessimism", checks, t0)


# ---------------------------------------------------------- v-sandwich

def sandwich_flags(game, h, pi_tilde, vbar_next, gaps, v_est) -> np.ndarray:
    """(m, S_h) booleans for
    min{E + Gap, H - h} <= V <= E + 2 Gap, E = sum_j pi_tilde(j|s)(l^i + P vbar_next)(s, j)."""
    w = game.losses[h] + np.einsum("sjt,it->isj", game.transitions[h], vbar_next)
    e = np.einsum("isj,sj->is", w, pi_tilde)
    cap = float(game.H - h)
    lo = np.minimum(e + gaps, cap)
    hi = e + 2.0 * gaps
    tol = 1e-12
    return (v_est >= lo - tol) & (v_est <= hi + tol)


def v_sandwich_suite(trials: int = 100, K: int = 4096, delta: float = 0.1, seed: int = 0,
                     min_hits: int = 90, schedule: Schedule = None) -> SuiteResult:
    t0 = time.perf_counter()
    game = reference_game_g1(0)
    schedule = schedule or Schedule()
    params = schedule.hyper(K, game.d, game.H, delta)
    lam = schedule.ridge_lambda(K, game.d, delta)
    pibar = MarkovJointPolicy.uniform(game)
    checks = {}
    for h, vbar in _layer_setups(game):
        hits = np.zeros((game.m, game.states_per_layer[h]), dtype=int)
        for r in range(trials):
            res = cce_approx.run(game, h, pibar, vbar, K, params, Streams(seed, ("selftest", "vs-cce", h, r)))
            gaps = res.gap_totals()
            v = v_approx.run(game, h, pibar, res.policy, vbar, gaps, K, lam,
                             Streams(seed, ("selftest", "vs-v", h, r)))
            hits += sandwich_flags(game, h, res.policy, vbar, gaps, v)
        for i in range(game.m):
            for s in range(game.states_per_layer[h]):
                checks[f"h{h}_agent{i}_s{s}"] = _check(int(hits[i, s]), min_hits, hits[i, s] >= min_hits,
                                                       trials=trials)
    return _finish("v-sandwich", checks, t0)


SUITES = {
    "exp3": exp3_suite,
    "magnitude": magnitude_suite,
    "matrix": matrix_suite,
    "freedman": freedman_suite,
    "gap-pessimism": gap_pessimism_suite,
    "v-sandwich": v_sandwich_suite,
}


def run_suite(name: str, **kwargs) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](**kwargs)
