"""Dressing a seed kernel with a rational group element.

Walks through the basic moves: build g from its zeros and poles, dress the
vacuum (nothing happens), dress a perturbed seed (something does), and check
that the result still satisfies the bilinear identity on a contour.
"""
import numpy as np

from hirota_dressing import (ContourSpec, DressedKernel, PerturbationTerm, RationalDivisorFunction,
                             SheetedPoint, as_seed, dress, hirota_residual, rank_perturbed, vacuum)

# g(lam) = (lam - 0.5)(lam + 0.2i) / ((lam + 0.5)(lam - 0.3 - 0.3i))
g = RationalDivisorFunction.from_roots([0.5, -0.2j], [-0.5, 0.3 + 0.3j])
lam, mu = SheetedPoint(0, 1.1j), SheetedPoint(0, -1.0)
print("g(lam) =", g(lam))

# the vacuum 1/(lam - mu) is a fixed point of every g
print("vacuum dressed:", dress(vacuum(), g, lam, mu), " 1/(lam-mu):", 1 / (lam.value - mu.value))

seed = rank_perturbed([PerturbationTerm(0.2, 0, 1, 0, 1), PerturbationTerm(0.3)])
print("seed:           ", seed.eval(lam, mu))
print("dressed seed:   ", dress(seed, g, lam, mu))

k = DressedKernel(seed, g)
t = k.tau()
print("tau: value %s, log|tau| %.4f" % (t.value, t.log_abs))

# bilinear identity between the seed and its dressing
contour = ContourSpec.uniform([0], 2.0)
samples = [(SheetedPoint(0, 0.7 + 0.2j), SheetedPoint(0, -0.6 + 0.5j))]
rep = hirota_residual(seed, RationalDivisorFunction.identity(), g, as_seed(k), contour, samples)
print(rep.summary())

# a shrinking pair of split points approaches the double point
for eps in (1e-2, 1e-3, 1e-4):
    split = RationalDivisorFunction.from_roots([0.7 - eps / 2, 0.7 + eps / 2], [-0.6 - eps / 2, -0.6 + eps / 2])
    merged = RationalDivisorFunction.from_roots([(0.7, 2)], [(-0.6, 2)])
    a, b = dress(seed, merged, lam, mu), dress(seed, split, lam, mu)
    print("eps=%g  relative gap %.2e" % (eps, abs(a - b) / abs(a)))
