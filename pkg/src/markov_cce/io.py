"""JSON serialisation of games and policies.

Game files list the decision layers' states in order (layer 0 first) and
use that global numbering in ``features``, ``transitions`` and ``losses``.
``transitions[state][joint_action]`` is a distribution over the states of
the next layer (local indices); the last entry of ``layers`` is the sink.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .game import LinearMarkovGame, MarkovJointPolicy, MixturePolicy

GAME_FORMAT = "markov-cce-game/1"
POLICY_FORMAT = "markov-cce-policy/1"


def game_to_dict(game: LinearMarkovGame) -> dict:
    feats = [[row for h in range(game.H) for row in game.features[i][h].tolist()] for i in range(game.m)]
    trans = [row for h in range(game.H) for row in game.transitions[h].tolist()]
    losses = [[row for h in range(game.H) for row in game.losses[h][i].tolist()] for i in range(game.m)]
    return {
        "format": GAME_FORMAT,
        "m": game.m,
        "H": game.H,
        "d": game.d,
        "actions": list(game.actions),
        "layers": [{"states": s} for s in game.states_per_layer] + [{"states": 1}],
        "features": feats,
        "transitions": trans,
        "losses": losses,
        "initial_state": game.initial_state,
    }


def game_from_dict(obj: dict) -> LinearMarkovGame:
    m, H, d = int(obj["m"]), int(obj["H"]), int(obj["d"])
    layers = [int(x["states"]) for x in obj["layers"]]
    if len(layers) == H:
        layers = layers + [1]
    if len(layers) != H + 1 or layers[-1] != 1:
        raise ValueError("layers must list H decision layers followed by a single-state sink")
    sizes = layers[:H]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    feats = [[np.asarray(obj["features"][i][offs[h]:offs[h + 1]], dtype=float) for h in range(H)]
             for i in range(m)]
    trans = [np.asarray(obj["transitions"][offs[h]:offs[h + 1]], dtype=float) for h in range(H)]
    losses = [np.asarray([obj["losses"][i][offs[h]:offs[h + 1]] for i in range(m)], dtype=float)
              for h in range(H)]
    return LinearMarkovGame(m, H, d, tuple(obj["actions"]), tuple(sizes), feats, trans, losses,
                            int(obj.get("initial_state", 0)))


def dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":")) + "\n"


def save_game(game: LinearMarkovGame, path) -> None:
    Path(path).write_text(dumps(game_to_dict(game)))


def load_game(path) -> LinearMarkovGame:
    return game_from_dict(json.loads(Path(path).read_text()))


def policy_to_dict(policy) -> dict:
    if isinstance(policy, MarkovJointPolicy):
        policy = MixturePolicy([policy], [1.0])
    out = policy.to_dict()
    out["format"] = POLICY_FORMAT
    out["actions"] = list(policy.actions)
    return out


def policy_from_dict(obj: dict) -> MixturePolicy:
    acts = tuple(obj["actions"])
    comps = [MarkovJointPolicy([np.asarray(p, dtype=float) for p in c["layers"]], acts)
             for c in obj["components"]]
    w = np.asarray(obj["weights"], dtype=float)
    return MixturePolicy(comps, w / w.sum())


def save_policy(policy, path, extra: dict = None) -> None:
    obj = policy_to_dict(policy)
    if extra:
        obj.update(extra)
    Path(path).write_text(dumps(obj))


def load_policy(path) -> MixturePolicy:
    return policy_from_dict(json.loads(Path(path).read_text()))
