"""One CCE-Approx call on the last layer with uniform roll-in.

Prints the realized per-state regret of the learners (measured with exact
kernels) next to the data-dependent Gap for a few sample sizes.  The Gap is
valid but loose: its constants are the ones in the analysis.

    python demos/02_one_layer.py
"""

import numpy as np

from markov_cce import MarkovJointPolicy, Schedule, cce_approx
from markov_cce.generate import reference_game_g1

np.set_printoptions(precision=4, suppress=True)

game = reference_game_g1(0)
h = game.H - 1
vbar = np.zeros((game.m, 1))
uniform = MarkovJointPolicy.uniform(game)
for K in (64, 256, 1024, 4096):
    params = Schedule().hyper(K, game.d, game.H, 0.1)
    res = cce_approx.run(game, h, uniform, vbar, K, params, rng=0)
    reg = cce_approx.realized_regret(game, h, res, vbar)
    g = res.gaps[0]
    print(f"K={K:5d} regret agent 0 {reg[0]}  Gap agent 0 {g.total}")
    print(f"        Gap terms / K: reg {g.reg_term / K} bias1 {g.bias1 / K} "
          f"bias2 {g.bias2_const / K} bonus {g.bonus1 / K}")
print("averaged joint policy at layer", h)
print(res.policy)
