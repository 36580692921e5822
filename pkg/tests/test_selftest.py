import pytest

from markov_cce import selftest


def test_exp3_suite():
    r = selftest.run_suite("exp3", trials=200)
    assert r.passed and r.checks["certificate"]["measured"] == 200


def test_magnitude_suite():
    r = selftest.run_suite("magnitude")
    assert r.passed and all(c["measured"] == 50 for c in r.checks.values())


def test_matrix_suite():
    r = selftest.run_suite("matrix", trials=100)
    assert r.passed


def test_freedman_suite_small():
    r = selftest.run_suite("freedman", trials=100, length=1000, max_failures=10)
    assert r.passed and set(r.checks) == {"rademacher", "heteroscedastic"}


def test_gap_and_sandwich_smoke():
    assert selftest.run_suite("gap-pessimism", trials=4, K=64, min_hits=3).passed
    assert selftest.run_suite("v-sandwich", trials=3, K=128, min_hits=2).passed


def test_report_is_serialisable():
    import json
    json.dumps(selftest.run_suite("magnitude").to_dict())


def test_unknown_suite():
    with pytest.raises(KeyError):
        selftest.run_suite("nope")
