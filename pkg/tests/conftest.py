import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from markov_cce.game import LinearMarkovGame, one_hot_tabular_embedding
from markov_cce.generate import low_rank_game, reference_game_g1

settings.register_profile("repo", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def g1():
    return reference_game_g1(0)


@pytest.fixture(scope="session")
def low_rank():
    return low_rank_game(0, m=2, H=2, states_per_layer=2, actions=2, d=3)


def single_state_game(loss_tables, next_states=1, transitions=None, H=1):
    """One decision layer with one state; loss_tables is (m, J)."""
    losses = np.asarray(loss_tables, dtype=float)
    m = losses.shape[0]
    J = losses.shape[1]
    A = int(round(J ** (1.0 / m)))
    acts = (A,) * m
    feats = one_hot_tabular_embedding((1,), acts)
    if transitions is None:
        transitions = np.ones((1, J, 1))
    return LinearMarkovGame(m, 1, feats[0][0].shape[-1], acts, (1,), feats,
                            [np.asarray(transitions, dtype=float)], [losses[:, None, :]], 0)


def deterministic_chain(H=3, seed=0):
    """Two states per layer, two agents with two actions; every transition is a
    point mass decided by the joint action."""
    rng = np.random.default_rng(seed)
    sizes = (2,) * H
    acts = (2, 2)
    feats = one_hot_tabular_embedding(sizes, acts)
    trans, losses = [], []
    for h in range(H):
        nxt = 2 if h < H - 1 else 1
        tgt = rng.integers(0, nxt, size=(2, 4))
        trans.append(np.eye(nxt)[tgt])
        losses.append(rng.random((2, 2, 4)))
    return LinearMarkovGame(2, H, 4, acts, sizes, feats, trans, losses, 0)


# one line per acceptance criterion, filled by test_acceptance.py and echoed
# at the end of the session
ACCEPTANCE = {}


def report_criterion(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
