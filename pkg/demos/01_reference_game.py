"""Build the two-agent reference game, check it and look at exact quantities.

    python demos/01_reference_game.py
"""

import numpy as np

from markov_cce import MarkovJointPolicy, validate_game
from markov_cce.evaluation import best_response, cce_gaps, exact_value
from markov_cce.game import state_occupancy
from markov_cce.generate import reference_game_g1

np.set_printoptions(precision=3, suppress=True)

game = reference_game_g1(0)
print(f"m={game.m} H={game.H} d={game.d} actions={game.actions} states={game.states_per_layer}")
print("validation problems:", validate_game(game))

# layer 0 has two states but play always starts in state 0
uniform = MarkovJointPolicy.uniform(game)
for h, occ in enumerate(state_occupancy(game, uniform)):
    print(f"occupancy of layer {h} under uniform play:", occ)

print("values of uniform play at the start:", exact_value(game, uniform).initial(game))
for i in range(game.m):
    acts, vals = best_response(game, i, uniform)
    print(f"agent {i}: best response actions per layer {[a.tolist() for a in acts]}, value {vals.values[0][0, 0]:.4f}")
print("CCE gaps of uniform play:", cce_gaps(game, uniform))
