import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from markov_cce.evaluation import exact_value
from markov_cce.game import (CompositePolicy, GameValidationWarning, LinearMarkovGame, MarkovJointPolicy,
                             MixturePolicy, StateId, agent_view, exact_q_kernel, joint_index_table,
                             markovize, one_hot_tabular_embedding, product_joint, sample_episodes,
                             sample_trajectory, state_occupancy, validate_game)
from markov_cce.generate import one_hot_game

from conftest import deterministic_chain, single_state_game


def random_policy(game, rng, product=True):
    if product:
        f = [[rng.dirichlet(np.ones(a), size=game.states_per_layer[h]) for h in range(game.H)]
             for a in game.actions]
        return MarkovJointPolicy.from_product(f, game.actions)
    return MarkovJointPolicy([rng.dirichlet(np.ones(game.n_joint), size=s) for s in game.states_per_layer],
                             game.actions)


def enumerate_paths(game, policy):
    """Brute force: (probability, per-layer states, joint actions) for every path."""
    out = []
    ranges = []
    for h in range(game.H):
        ranges.append(range(game.n_joint))
        ranges.append(range(game.n_states(h + 1)))
    for combo in itertools.product(*ranges):
        p, s = 1.0, game.initial_state
        states, joints = [s], []
        for h in range(game.H):
            j, s2 = combo[2 * h], combo[2 * h + 1]
            p *= policy.layers[h][s, j] * game.transitions[h][s, j, s2]
            states.append(s2)
            joints.append(j)
            s = s2
        if p > 0:
            out.append((p, states, joints))
    return out


# --------------------------------------------------------------- validation

def test_g1_validates(g1):
    assert validate_game(g1) == []
    assert g1.d == 4 and g1.states_per_layer == (2, 2) and g1.actions == (2, 2)


def _mutate(game, **kw):
    args = dict(m=game.m, H=game.H, d=game.d, actions=game.actions, states_per_layer=game.states_per_layer,
                features=[list(f) for f in game.features], transitions=list(game.transitions),
                losses=list(game.losses), initial_state=game.initial_state)
    args.update(kw)
    return LinearMarkovGame(**args)


def test_halved_row_gives_one_violation(g1):
    t = [p.copy() for p in g1.transitions]
    t[0][0, 0] *= 0.5
    probs = validate_game(_mutate(g1, transitions=t))
    assert len(probs) == 1 and "row sum" in probs[0]


def test_long_feature_gives_one_violation(g1):
    f = [[x.copy() for x in fi] for fi in g1.features]
    f[1][0][0, 1] = 0.0
    f[1][0][0, 1, 0] = 1.5
    probs = validate_game(_mutate(g1, features=f))
    assert len(probs) == 1 and "||phi|| > 1" in probs[0]


def test_loss_out_of_range_flagged(g1):
    l_ = [x.copy() for x in g1.losses]
    l_[1][0, 0, 0] = 1.2
    assert any("loss out of [0,1]" in p for p in validate_game(_mutate(g1, losses=l_)))


def test_short_features_warn(g1):
    f = [[x * 0.1 for x in fi] for fi in g1.features]
    with pytest.warns(GameValidationWarning):
        assert validate_game(_mutate(g1, features=f)) == []


def test_shape_errors(g1):
    with pytest.raises(ValueError):
        _mutate(g1, transitions=[g1.transitions[0][:, :, :1], g1.transitions[1]])
    with pytest.raises(ValueError):
        _mutate(g1, initial_state=5)


def test_arrays_are_read_only(g1):
    with pytest.raises(ValueError):
        g1.losses[0][0, 0, 0] = 0.0


# ---------------------------------------------------------------- embedding

def test_one_hot_embedding_indicator():
    f = one_hot_tabular_embedding((2,), (2,), 4)
    assert np.array_equal(f[0][0][0, 1], np.eye(4)[1])
    flat = f[0][0].reshape(-1, 4)
    assert np.array_equal(flat @ flat.T, np.eye(4))


def test_one_hot_embedding_too_small():
    with pytest.raises(ValueError):
        one_hot_tabular_embedding((3,), (2,), 4)


def test_feature_lookup(g1):
    assert np.array_equal(g1.feature(0, StateId(1, 1), 0), np.eye(4)[2])


# ------------------------------------------------------------- joint layout

@given(st.lists(st.integers(1, 4), min_size=1, max_size=4), st.data())
def test_joint_index_table_is_row_major(actions, data):
    i = data.draw(st.integers(0, len(actions) - 1))
    tab = joint_index_table(actions, i)
    assert sorted(tab.ravel().tolist()) == list(range(math.prod(actions)))
    for a in range(actions[i]):
        for flat in tab[a]:
            assert np.unravel_index(flat, actions)[i] == a


def test_agent_view_and_product_roundtrip():
    rng = np.random.default_rng(0)
    p0, p1 = rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(3))
    joint = product_joint([p0, p1])
    assert joint.shape == (6,)
    assert np.allclose(agent_view(joint, (2, 3), 0).sum(-1), p0)
    assert np.allclose(agent_view(joint, (2, 3), 1).sum(-1), p1)


def test_policy_marginals(g1):
    rng = np.random.default_rng(1)
    pol = random_policy(g1, rng)
    corr = MarkovJointPolicy(pol.layers, g1.actions)
    for i in range(2):
        for a, b in zip(pol.marginal(i), corr.marginal(i)):
            assert np.allclose(a, b)
    assert pol.check() == []


# ----------------------------------------------------------------- sampling

def test_deterministic_path():
    game = deterministic_chain(H=3)
    pol = MarkovJointPolicy([np.eye(4)[[1, 2]], np.eye(4)[[3, 0]], np.eye(4)[[2, 2]]], game.actions)
    s, path = 0, [0]
    for h in range(3):
        j = int(np.argmax(pol.layers[h][s]))
        s = int(np.argmax(game.transitions[h][s, j]))
        path.append(s)
    for seed in range(3):
        tr = sample_trajectory(game, pol, np.random.default_rng(seed))
        assert tr.states.tolist() == path


def test_sampling_is_deterministic(g1):
    pol = MarkovJointPolicy.uniform(g1)
    a = sample_episodes(g1, pol, 50, np.random.default_rng(4))
    b = sample_episodes(g1, pol, 50, np.random.default_rng(4))
    assert np.array_equal(a.states, b.states) and np.array_equal(a.joint, b.joint)


def test_occupancy_matches_monte_carlo(g1):
    pol = MarkovJointPolicy.uniform(g1)
    n = 100_000
    ep = sample_episodes(g1, pol, n, np.random.default_rng(0))
    exact = state_occupancy(g1, pol)[1]
    freq = np.bincount(ep.states[:, 1], minlength=2) / n
    sigma = np.sqrt(exact * (1 - exact) / n)
    assert np.all(np.abs(freq - exact) <= 3 * sigma + 1e-12)


def test_occupancy_matches_enumeration(g1):
    pol = random_policy(g1, np.random.default_rng(2))
    occ = state_occupancy(g1, pol)
    brute = np.zeros(2)
    for p, states, _ in enumerate_paths(g1, pol):
        brute[states[1]] += p
    assert np.allclose(occ[1], brute, atol=1e-12)


def test_actions_consistent_with_joint(g1):
    ep = sample_episodes(g1, MarkovJointPolicy.uniform(g1), 200, np.random.default_rng(0))
    back = np.ravel_multi_index(tuple(ep.actions[..., i] for i in range(2)), g1.actions)
    assert np.array_equal(back, ep.joint)
    assert np.allclose(ep.losses[:, 0, 0], g1.losses[0][0, ep.states[:, 0], ep.joint[:, 0]])


def test_stop_truncates(g1):
    ep = sample_episodes(g1, MarkovJointPolicy.uniform(g1), 10, 0, stop=1)
    assert np.all(ep.states[:, 1] >= 0) and np.all(ep.states[:, 2] == -1) and np.all(ep.joint[:, 1] == -1)


def test_composite_opponents_are_used(g1):
    # opponents always play action 1 at layer 0
    comp = CompositePolicy(MarkovJointPolicy.uniform(g1), layer=0, agent=0, opponents=np.array([[0.0, 1.0]] * 2))
    ep = sample_episodes(g1, comp, 500, np.random.default_rng(0), stop=1)
    assert np.all(ep.actions[:, 0, 1] == 1)
    assert 0 < ep.actions[:, 0, 0].mean() < 1


def test_mixture_draws_one_component_per_episode(g1):
    a = MarkovJointPolicy([np.eye(4)[[0, 0]]] * 2, g1.actions)
    b = MarkovJointPolicy([np.eye(4)[[3, 3]]] * 2, g1.actions)
    ep = sample_episodes(g1, MixturePolicy([a, b], [0.3, 0.7]), 4000, np.random.default_rng(0))
    same = ep.joint[:, 0] == ep.joint[:, 1]
    assert same.all()
    assert abs((ep.components == 1).mean() - 0.7) < 0.03


# ------------------------------------------------------------------ kernels

def test_q_kernel_zero():
    game = single_state_game(np.zeros((2, 4)))
    q = exact_q_kernel(game, 0, 0, np.full((1, 2), 0.5), np.zeros(1))
    assert np.array_equal(q, np.zeros((1, 2)))


def test_q_kernel_single_opponent_action_deterministic():
    loss = np.random.default_rng(0).random((2, 4))
    game = single_state_game(loss)
    q = exact_q_kernel(game, 0, 0, np.array([[0.0, 1.0]]), np.array([0.7]))
    assert np.allclose(q[0], loss[0, [1, 3]] + 0.7)


def test_q_kernel_uniform_opponent_row_average():
    loss = np.random.default_rng(1).random((2, 4))
    trans = np.zeros((1, 4, 2))
    trans[0, :, 0] = [0.2, 0.5, 0.9, 0.1]
    trans[0, :, 1] = 1 - trans[0, :, 0]
    v = np.array([0.3, 0.8])
    feats = one_hot_tabular_embedding((1, 2), (2, 2))
    game = LinearMarkovGame(2, 2, 4, (2, 2), (1, 2), feats, [trans, np.ones((2, 4, 1))],
                            [loss[:, None, :], np.zeros((2, 2, 4))], 0)
    q = exact_q_kernel(game, 0, 0, np.array([[0.5, 0.5]]), v)
    # brute force over the opponent's two actions
    for a in range(2):
        want = np.mean([loss[0, 2 * a + b] + trans[0, 2 * a + b] @ v for b in range(2)])
        assert q[0, a] == pytest.approx(want, abs=1e-14)
    # agent 1 (the column player)
    q1 = exact_q_kernel(game, 0, 1, np.array([[0.5, 0.5]]), v)
    for b in range(2):
        want = np.mean([loss[1, 2 * a + b] + trans[0, 2 * a + b] @ v for a in range(2)])
        assert q1[0, b] == pytest.approx(want, abs=1e-14)


def test_exact_value_matches_enumeration(g1):
    pol = random_policy(g1, np.random.default_rng(5), product=False)
    v = exact_value(g1, pol).initial(g1)
    brute = np.zeros(2)
    for p, states, joints in enumerate_paths(g1, pol):
        for h in range(g1.H):
            brute += p * g1.losses[h][:, states[h], joints[h]]
    assert np.allclose(v, brute, atol=1e-12)


def test_markovize_preserves_values(g1):
    rng = np.random.default_rng(3)
    comps = [random_policy(g1, rng) for _ in range(3)]
    mix = MixturePolicy(comps, [0.2, 0.3, 0.5])
    direct = sum(w * exact_value(g1, c).initial(g1) for w, c in zip(mix.weights, comps))
    assert np.allclose(exact_value(g1, markovize(g1, mix)).initial(g1), direct, atol=1e-12)


def test_markovize_monte_carlo_three_layers():
    game = one_hot_game(2, m=2, H=3, states_per_layer=3, actions=2)
    rng = np.random.default_rng(0)
    comps = [random_policy(game, rng) for _ in range(2)]
    mix = MixturePolicy(comps, [0.4, 0.6])
    ep = sample_episodes(game, mix, 100_000, np.random.default_rng(1))
    mc = ep.losses.sum(axis=1).mean(axis=0)
    ex = exact_value(game, markovize(game, mix)).initial(game)
    assert np.all(np.abs(mc - ex) < 4 * game.H / math.sqrt(100_000))
