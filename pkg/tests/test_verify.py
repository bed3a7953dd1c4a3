import numpy as np
import pytest

from hirota_dressing.dressing import DressedKernel, as_seed
from hirota_dressing.errors import ContourTooTight, RankDeficientFit, ValidationError
from hirota_dressing.hierarchy import FlowSpec, Grid
from hirota_dressing.kernel import PerturbationTerm as T, offset_vacuum, rank_perturbed, vacuum
from hirota_dressing.rational import RationalDivisorFunction as R, SheetedPoint as P
from hirota_dressing.verify import (ContourSpec, PoleControlKernel, analytic_property_check,
                                    double_integral_check, dressed_column, dressed_row,
                                    hirota_residual, kp_linear_residual, membership_residual,
                                    n2_residual, nwave_q_residual, richardson_zero, scaled_vacuum)

PERTURBED = rank_perturbed([T(0.2, 0, 1, 0, 1), T(0.3), T(-0.1j, 0, 2, 0, 0)])
G1 = R.from_roots([0.5, -0.2j], [-0.5, 0.3 + 0.3j])
G2 = R.from_roots([0.1 + 0.4j], [-0.3 - 0.2j])
SAMPLES = [(P(0, 0.7 + 0.2j), P(0, -0.6 + 0.5j)), (P(0, -0.1 - 0.8j), P(0, 0.9))]


def dressed(g, seed=PERTURBED):
    return as_seed(DressedKernel(seed, g))


def test_contour_too_tight():
    c = ContourSpec.uniform([0], 1.0, 64)
    with pytest.raises(ContourTooTight):
        hirota_residual(vacuum(), R.from_roots([0.99], [0]), R.identity(), vacuum(), c, SAMPLES[:1])
    with pytest.raises(ContourTooTight):
        c.circle(1)
    with pytest.raises(ValidationError):
        ContourSpec(((0, 0, 1.0), (0, 1, 2.0)))


def test_hirota_between_dressings():
    c = ContourSpec.uniform([0], 2.0)
    rep = hirota_residual(dressed(G1), G1, G2, dressed(G2), c, SAMPLES)
    assert rep.passed and rep.max_residual < 1e-10


def test_quadrature_converges_and_is_contour_independent():
    left, right = dressed(G1), dressed(G2)
    c = ContourSpec.uniform([0], 2.0)
    r512 = hirota_residual(left, G1, G2, right, c, SAMPLES).max_residual
    r1024 = hirota_residual(left, G1, G2, right, c.with_points(1024), SAMPLES).max_residual
    r_wide = hirota_residual(left, G1, G2, right, c.scaled(0.75), SAMPLES).max_residual
    assert max(r512, r1024, r_wide) < 1e-10
    assert abs(r512 - r1024) < 1e-10 and abs(r512 - r_wide) < 1e-10


def test_hirota_negative_controls():
    c = ContourSpec.uniform([0], 2.0)
    pole = PoleControlKernel(0.2 - 0.4j, 0.5)
    assert hirota_residual(pole, G1, G1, dressed(G1), c, SAMPLES).max_residual > 1e-3
    assert hirota_residual(scaled_vacuum(), G1, G1, dressed(G1), c, SAMPLES).max_residual > 1e-3


def test_double_integral():
    c = ContourSpec.uniform([0], 2.0, 256)
    assert double_integral_check(PERTURBED, G1, dressed(G1), c, SAMPLES).max_residual < 1e-10
    bad = double_integral_check(PERTURBED, G1, dressed(G1, scaled_vacuum()), c, SAMPLES)
    assert bad.max_residual > 1e-3


def test_membership():
    c = ContourSpec.uniform([0], 2.0)
    probes = [P(0, 0.4j), P(0, -0.8 + 0.1j)]
    chi = dressed(G1)
    assert membership_residual(chi, lambda s, nu: nu * 0, c, probes).max_residual == 0
    col = dressed_column(G1, PERTURBED, P(0, 1.3))
    row = dressed_row(G1, PERTURBED, P(0, -1.2j))
    assert membership_residual(chi, col, c, probes, "W").max_residual < 1e-10
    assert membership_residual(chi, row, c, probes, "W'").max_residual < 1e-10
    poly = lambda s, nu: nu ** 2 + 1   # noqa: E731
    assert membership_residual(chi, poly, c, probes).max_residual > 1e-3
    with pytest.raises(ValidationError):
        membership_residual(chi, poly, c, probes, side="V")


def test_richardson_and_analytic_controls():
    assert richardson_zero([0.3 + 1e-2, 0.3 + 1e-3, 0.3 + 1e-4]) == pytest.approx(0.3)
    dirs = [(P(0, 0.2 - 0.1j), 1), (P(0, -0.5j), 1j)]
    probes = [(P(0, 0.6), P(0, -0.7j))]
    assert analytic_property_check(dressed(G1), dirs, probes).passed
    assert analytic_property_check(scaled_vacuum(), dirs).max_residual == pytest.approx(1)


# N-wave ------------------------------------------------------------------

def unit_disk_flows(sheets, step=0.1):
    return [FlowSpec(i, "lattice", R.from_roots(poles=[0], sheet=i), sheet=i, step=step)
            for i in range(sheets)]


def test_n2_zero_offsets_vanish():
    seed = offset_vacuum({(i, j): 0.0 for i in range(3) for j in range(3) if i != j})
    rep = n2_residual(seed, unit_disk_flows(3), Grid((0, 0, 0), (1, 1, 1)))
    assert rep.max_residual == 0


def test_n2_offsets_and_swapped_control():
    rng = np.random.default_rng(1)
    offs = {(i, j): complex(*rng.uniform(0.3, 0.8, 2) * [1, 0.5])
            for i in range(3) for j in range(3) if i != j}
    flows, grid = unit_disk_flows(3), Grid((0, 0, 0), (1, 1, 1))
    assert n2_residual(offset_vacuum(offs), flows, grid).max_residual < 1e-10
    assert n2_residual(offset_vacuum(offs), flows, grid, "swapped").max_residual > 1e-3
    with pytest.raises(ValidationError):
        n2_residual(offset_vacuum(offs), flows[:2], Grid((0, 0), (1, 1)))


def q_flows(poles, scales, q=0.5, y0=1e-5):
    return [FlowSpec(i, "qdiff", R.from_roots(poles=[z], scale=a), q=q, y0=y0)
            for i, (z, a) in enumerate(zip(poles, scales))]


def test_nwave_q_vacuum():
    flows = q_flows([1.0, np.exp(2j * np.pi / 3), np.exp(4j * np.pi / 3)], [1.0, 0.8 + 0.2j, 1.1 - 0.1j])
    pairs = [(P(0, 0.3 + 0.2j), P(0, -0.4 + 0.5j))]
    rep = nwave_q_residual(vacuum(), flows, [(0, 0, 0)], pairs)
    assert rep.max_residual < 1e-10


def test_nwave_q_rejects_shared_poles():
    with pytest.raises(ValidationError):
        nwave_q_residual(vacuum(), q_flows([0.5, 0.5, 1j], [1, 1, 1]), [(0, 0, 0)], dps=None)


# KP ----------------------------------------------------------------------

def kp_flows(order):
    return [FlowSpec(i, "lattice", R.from_roots(poles=[(0, i + 1)])) for i in range(order)]


COLLOCATION = [0.8 * np.exp(2j * np.pi * (k + 0.3) / 6) for k in range(6)]
HELD_OUT = [1.1 * np.exp(2j * np.pi * (k + 0.1) / 4) for k in range(4)]


def test_kp_linear_vacuum():
    rep = kp_linear_residual(vacuum(), kp_flows(2), 2, [(0, 0)], COLLOCATION, HELD_OUT)
    assert rep.max_residual < 1e-9


def test_kp_rank_deficient():
    with pytest.raises(RankDeficientFit):
        kp_linear_residual(vacuum(), kp_flows(2), 2, [(0, 0)], COLLOCATION[:1], HELD_OUT)
    with pytest.raises(ValidationError):
        kp_linear_residual(vacuum(), kp_flows(2), 3, [(0, 0)], COLLOCATION, HELD_OUT)
