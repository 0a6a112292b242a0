"""Expected values computed once by independent oracles and frozen here.

Scalar kernels: ``math.exp`` of the exponent expanded by hand, for example
one 0.5 rad pose error gives ``exp(-2 * 0.5**2) = exp(-0.5)``. Weighted sums
were expanded by hand. The Boltzmann values come from the closed-form
two-way softmax ``1 / (1 + exp(-dV / T))``.
"""

EXP = {
    0.1: 0.9048374180359595,
    0.4: 0.6703200460356393,
    0.5: 0.6065306597126334,
    0.625: 0.5352614285189903,
    0.8: 0.44932896411722156,
    0.9: 0.4065696597405991,
    1.0: 0.36787944117144233,
    2.5: 0.0820849986238988,
}

# V = (1, 0), T = 0.3
BOLTZMANN_1_0 = (0.9655548043337889, 0.034445195666211174)
# normalized (+1, -1), T = 0.3
BOLTZMANN_DOMINANT = 0.9987289837369187
