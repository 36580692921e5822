"""Hyper-parameters of one CCE-Approx call and the per-epoch schedule."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class HyperParams:
    eta: float
    beta1: float
    beta2: float
    gamma: float
    delta: float
    c_bias2: float = 1.0
    c_gamma: float = 5.0
    # shrink eta when the run-time lower bound on Q_hat - B would break the
    # EXP3 precondition; with False the call raises instead
    clip_eta: bool = True

    def __post_init__(self):
        for name in ("eta", "beta1", "gamma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.beta2 < 0:
            raise ValueError("beta2 must be nonnegative")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    def constraint_report(self, K: int, d: int, H: int) -> dict:
        """Ratios of each parameter to its reference order, plus the worst-case
        EXP3 precondition product.

        ``eta_worst_case`` = eta * (H + beta1 + beta2) / gamma bounds
        -eta * (Q_hat - B) from above for any data, because
        |phi^T Sigma^dagger phi'| <= 1/gamma; values <= 1 certify the
        precondition ahead of time.
        """
        b = self.beta1 + self.beta2
        return {
            "eta_over_sqrt_gamma_per_H": self.eta / (math.sqrt(self.gamma) / H),
            "eta_over_gamma_per_beta": self.eta / (self.gamma / b),
            "beta1_over_dH_per_sqrtK": self.beta1 / (d * H / math.sqrt(K)),
            "beta2_over_H_per_K": self.beta2 / (H / K) if self.beta2 > 0 else 0.0,
            "gamma_over_d_per_K": self.gamma / (d / K),
            "eta_worst_case": self.eta * (H + b) / self.gamma,
        }


@dataclass(frozen=True)
class Schedule:
    """Per-epoch parameters with K = t samples.

    eta_t = eta_mult * sqrt(d) / (sqrt(t) H), beta1_t = beta1_mult * d H / sqrt(t),
    beta2_t = beta2_mult * H / t, gamma_t = c_gamma (d/t) log(6d/delta),
    lambda_t = lambda_mult * (d/t) log(d t / delta).
    """

    c_gamma: float = 5.0
    c_bias2: float = 1.0
    eta_mult: float = 1.0
    beta1_mult: float = 1.0
    beta2_mult: float = 1.0
    lambda_mult: float = 1.0
    clip_eta: bool = True

    def hyper(self, K: int, d: int, H: int, delta: float) -> HyperParams:
        return HyperParams(
            eta=self.eta_mult * math.sqrt(d) / (math.sqrt(K) * H),
            beta1=self.beta1_mult * d * H / math.sqrt(K),
            beta2=self.beta2_mult * H / K,
            gamma=self.c_gamma * (d / K) * math.log(6 * d / delta),
            delta=delta,
            c_bias2=self.c_bias2,
            c_gamma=self.c_gamma,
            clip_eta=self.clip_eta,
        )

    def ridge_lambda(self, K: int, d: int, delta: float) -> float:
        return self.lambda_mult * (d / K) * math.log(d * K / delta)

    def to_dict(self) -> dict:
        return asdict(self)
