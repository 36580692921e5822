import math

import pytest

from markov_cce.params import HyperParams, Schedule


def test_schedule_formulas():
    p = Schedule().hyper(100, 4, 2, 0.1)
    assert p.eta == pytest.approx(math.sqrt(4) / (10 * 2))
    assert p.beta1 == pytest.approx(4 * 2 / 10)
    assert p.beta2 == pytest.approx(2 / 100)
    assert p.gamma == pytest.approx(5 * 4 / 100 * math.log(6 * 4 / 0.1))
    assert Schedule().ridge_lambda(100, 4, 0.1) == pytest.approx(4 / 100 * math.log(4 * 100 / 0.1))


def test_schedule_multipliers():
    s = Schedule(c_gamma=0.5, eta_mult=2, beta1_mult=3, beta2_mult=0, lambda_mult=4)
    p, base = s.hyper(64, 3, 2, 0.05), Schedule().hyper(64, 3, 2, 0.05)
    assert p.eta == pytest.approx(2 * base.eta)
    assert p.beta1 == pytest.approx(3 * base.beta1)
    assert p.beta2 == 0.0
    assert p.gamma == pytest.approx(0.1 * base.gamma)
    assert s.ridge_lambda(64, 3, 0.05) == pytest.approx(4 * Schedule().ridge_lambda(64, 3, 0.05))
    assert s.to_dict()["c_gamma"] == 0.5


@pytest.mark.parametrize("kw", [dict(eta=0), dict(beta1=-1), dict(gamma=0), dict(beta2=-0.1), dict(delta=1.0)])
def test_hyperparams_validation(kw):
    args = dict(eta=0.1, beta1=0.1, beta2=0.1, gamma=0.1, delta=0.1)
    args.update(kw)
    with pytest.raises(ValueError):
        HyperParams(**args)


def test_constraint_report():
    p = HyperParams(eta=0.1, beta1=0.2, beta2=0.05, gamma=0.01, delta=0.1)
    r = p.constraint_report(K=100, d=4, H=2)
    assert r["eta_worst_case"] == pytest.approx(0.1 * (2 + 0.25) / 0.01)
    assert r["beta1_over_dH_per_sqrtK"] == pytest.approx(0.2 / (8 / 10))
    assert r["gamma_over_d_per_K"] == pytest.approx(0.01 / 0.04)
