"""Exponential weights over an agent's actions, one learner per state.

Weights live in log space and are renormalised by subtracting the
log-sum-exp after every update, so losses of size O(K) do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PRECONDITION_SLACK = 1e-9


class Exp3PreconditionError(ValueError):
    """Raised when eta * loss < -1 for some action."""


def _log_normalize(lw: np.ndarray) -> np.ndarray:
    lw = lw - lw.max(axis=-1, keepdims=True)
    return lw - np.log(np.exp(lw).sum(axis=-1, keepdims=True))


@dataclass(frozen=True, eq=False)
class Exp3State:
    log_weights: np.ndarray
    eta: float
    round: int = 0

    @property
    def weights(self) -> np.ndarray:
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()

    @property
    def n_actions(self) -> int:
        return self.log_weights.shape[0]


def init(action_count: int, eta: float) -> Exp3State:
    if action_count < 1:
        raise ValueError("action_count must be >= 1")
    if not eta > 0:
        raise ValueError("eta must be positive")
    lw = np.full(action_count, -math.log(action_count))
    return Exp3State(lw, float(eta), 0)


def check_precondition(eta: float, losses: np.ndarray, where: str = "") -> None:
    scaled = eta * np.asarray(losses, dtype=float)
    bad = scaled < -1.0 - PRECONDITION_SLACK
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        pos = tuple(int(k) for k in idx)
        label = f"action {pos[-1]}" + (f" at state {pos[0]}" if len(pos) > 1 else "")
        raise Exp3PreconditionError(
            f"eta * loss = {scaled[tuple(idx)]:.6g} < -1 for {label}{where}")


def update(state: Exp3State, losses) -> Exp3State:
    """x_{t+1} proportional to x_t * exp(-eta * c_t)."""
    c = np.asarray(losses, dtype=float)
    if c.shape != state.log_weights.shape:
        raise ValueError("loss vector has the wrong length")
    check_precondition(state.eta, c)
    lw = _log_normalize(state.log_weights - state.eta * c)
    return Exp3State(lw, state.eta, state.round + 1)


def regret_certificate(loss_history, y, eta: float):
    """Replay exponential weights from uniform and evaluate both sides of

        sum_t <x_t - y, c_t>  <=  log A / eta + eta * sum_t sum_a x_{t,a} c_{t,a}^2.

    Returns ``(lhs, rhs)``.
    """
    c = np.asarray(loss_history, dtype=float)
    if c.ndim != 2:
        raise ValueError("loss_history must be a (T, A) array")
    y = np.asarray(y, dtype=float)
    st = init(c.shape[1], eta)
    lhs = 0.0
    second = 0.0
    for ct in c:
        x = st.weights
        lhs += float(np.dot(x - y, ct))
        second += float(np.dot(x, ct * ct))
        st = update(st, ct)
    rhs = math.log(c.shape[1]) / eta + eta * second
    return lhs, rhs


class Exp3Bank:
    """Independent exponential-weights learners for every row of an (S, A) table.

    ``eta`` is a scalar or one rate per row.
    """

    def __init__(self, n_states: int, n_actions: int, eta):
        eta = np.broadcast_to(np.asarray(eta, dtype=float), (n_states,)).copy()
        if not np.all(eta > 0):
            raise ValueError("eta must be positive")
        self.eta = eta
        self.log_weights = np.full((n_states, n_actions), -math.log(n_actions))
        self.round = 0

    def policy(self) -> np.ndarray:
        w = np.exp(self.log_weights - self.log_weights.max(axis=1, keepdims=True))
        return w / w.sum(axis=1, keepdims=True)

    def update(self, losses: np.ndarray, where: str = "") -> None:
        c = np.asarray(losses, dtype=float)
        check_precondition(self.eta[:, None], c, where)
        self.log_weights = _log_normalize(self.log_weights - self.eta[:, None] * c)
        self.round += 1

    def state(self, s: int) -> Exp3State:
        return Exp3State(self.log_weights[s].copy(), float(self.eta[s]), self.round)
