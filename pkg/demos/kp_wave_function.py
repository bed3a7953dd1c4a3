"""Wave function of the discrete KP hierarchy and its linear problem.

Flow i uses K_i = lam^{-i}. The wave function psi = g^{-1}(lam) chi(lam, 0; g)
satisfies  Delta_2 psi = Delta_1^2 psi + u_1 Delta_1 psi + u_0 psi  with
coefficients that depend on the grid point only. We fit u from six lam values
and test the fit on four others.
"""
import numpy as np

from hirota_dressing import FlowSpec, PerturbationTerm, RationalDivisorFunction, SheetedPoint, rank_perturbed
from hirota_dressing.hierarchy import wave_function
from hirota_dressing.verify import kp_linear_residual

flows = [FlowSpec(i, "lattice", RationalDivisorFunction.from_roots(poles=[(0, i + 1)])) for i in range(2)]
seed = rank_perturbed([PerturbationTerm(0.2, 0, 1, 0, 1), PerturbationTerm(0.3),
                       PerturbationTerm(-0.1j, 0, 2, 0, 0)])

lam = SheetedPoint(0, 0.7 + 0.4j)
for n in range(3):
    print("psi at n1=%d:" % n, wave_function(seed, flows, (n, 0), lam, SheetedPoint(0, 0)))

collocation = [0.8 * np.exp(2j * np.pi * (k + 0.3) / 6) for k in range(6)]
held_out = [1.1 * np.exp(2j * np.pi * (k + 0.1) / 4) for k in range(4)]
rep = kp_linear_residual(seed, flows, 2, [(0, 0), (1, 0)], collocation, held_out)
print(rep.summary())
for p, u in zip(rep.samples, rep.details["u"]):
    print(p, "u_0 = %.6f%+.6fj" % tuple(u[0]), " u_1 = %.6f%+.6fj" % tuple(u[1]))
