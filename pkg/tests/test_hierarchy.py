import numpy as np
import pytest

from hirota_dressing.dressing import dress
from hirota_dressing.errors import GridBounds, TruncationOverflow, ValidationError
from hirota_dressing.hierarchy import (FlowSpec, Grid, Solution, apply_D, forward_difference,
                                       group_element, q_exp_scalar, q_exp_truncated,
                                       q_truncation_order, shift, wave_function)
from hirota_dressing.kernel import PerturbationTerm as T, rank_perturbed, vacuum
from hirota_dressing.rational import RationalDivisorFunction as R, SheetedPoint as P, one_plus_multiple

INV_LAMBDA = R.from_roots(poles=[0])


def lattice(i, K=INV_LAMBDA, step=1.0, sheet=0, schedule=()):
    return FlowSpec(i, "lattice", K, sheet=sheet, step=step, schedule=schedule)


def test_single_lattice_step():
    g = group_element([lattice(0, step=0.1)], (1,))
    assert g.divisor == ((P(0, -0.1), -1), (P(0, 0), 1))


def test_zero_point_is_identity():
    flows = [lattice(0, step=0.1), lattice(1, R.from_roots(poles=[1j]), step=0.3)]
    assert group_element(flows, (0, 0)).is_identity()


def test_scheduled_steps():
    g = group_element([lattice(0, schedule=((1, 0.1), (2, 0.2)))], (2,))
    assert dict(g.divisor) == {P(0, 0): 2, P(0, -0.1): -1, P(0, -0.2): -1}


def test_negative_index_round_trip():
    f = lattice(0, R.from_roots(poles=[0.3 + 0.1j]), step=0.25)
    assert (f.factor(-2) * f.factor(2)).is_identity()
    g_back = group_element([f], (-1,))
    z = P(0, 0.9 - 0.4j)
    assert g_back(z) == pytest.approx(1 + 0.25 / (z.value - (0.3 + 0.1j)))


def test_flow_commutativity(rng):
    a = lattice(0, R.from_roots(poles=[0.5]), step=0.2)
    b = lattice(1, R.from_roots(poles=[-0.4j], scale=0.7), step=-0.15)
    c = FlowSpec(2, "qdiff", R.from_roots(poles=[0.1 + 0.2j]), q=0.5, y0=0.3)
    g1 = group_element([a, b, c], (2, 1, 1))
    g2 = group_element([c, a, b], (1, 2, 1))
    assert g1.divisor == g2.divisor
    for _ in range(20):
        z = P(0, complex(*rng.uniform(-2, 2, 2)))
        assert abs(g1(z) - g2(z)) < 1e-12 * abs(g1(z))


def test_lattice_step_consistency():
    f = lattice(0, R.from_roots([0.2], [0.5, (-0.3j, 2)]), step=0.4)
    other = lattice(1, R.from_roots(poles=[1.1]), step=0.2)
    for n in range(3):
        step = one_plus_multiple(f.K, f.lattice_step(n + 1), 0).inverse()
        assert group_element([f, other], (n + 1, 1)) == group_element([f, other], (n, 1)) * step


@pytest.mark.parametrize("i", [1, 2, 3])
def test_kp_divisor_shape(i):
    K = R.from_roots(poles=[(0, i)])
    g = group_element([lattice(0, K)], (1,))
    zeros = [p for p, m in g.divisor if m > 0]
    poles = sorted(((p.value, m) for p, m in g.divisor if m < 0), key=lambda e: np.angle(e[0]))
    assert zeros == [P(0, 0)] and dict(g.divisor)[P(0, 0)] == i
    roots = sorted(np.exp(1j * np.pi * (2 * np.arange(i) + 1) / i), key=np.angle)
    assert len(poles) == i
    for (v, m), r in zip(poles, roots):
        assert m == -1 and abs(v - r) < 1e-12


def test_continuous_and_bad_q_rejected():
    with pytest.raises(ValidationError, match="not rational"):
        FlowSpec(0, "continuous", INV_LAMBDA)
    with pytest.raises(ValidationError, match=r"\|q\| < 1"):
        FlowSpec(0, "qdiff", INV_LAMBDA, q=1.2, y0=0.1)
    with pytest.raises(ValidationError):
        lattice(0, step=0)


# q exponential --------------------------------------------------------------

def test_q_exp_zero_argument():
    assert q_truncation_order(INV_LAMBDA, 0, 0.5, 1e-12) == 0
    assert q_exp_truncated(INV_LAMBDA, 0, 0.5, 1e-12).is_identity()


def test_q_exp_scalar_product():
    # reference from tests/oracles: forty factors and the infinite product
    assert abs(q_exp_scalar(1, 0.5, 40) - 3.4627466194519142618) < 1e-14
    assert abs(q_exp_scalar(1, 0.5, 60) - 3.4627466194550636115) < 1e-14


def test_q_exp_functional_equation():
    K = R.from_roots(poles=[0.2 - 0.1j], scale=0.8)
    eps, q, y = 1e-12, 0.5, 1.0
    e0 = q_exp_truncated(K, y, q, eps)
    e1 = q_exp_truncated(K, q * y, q, eps)
    for z in (1.5, -1.1 + 0.9j, 0.3 + 1.4j):
        p = P(0, z)
        lhs = (e1(p) - e0(p)) / ((q - 1) * y)
        assert abs(lhs - K(p) * e0(p)) < 10 * eps


def test_q_truncation_overflow():
    with pytest.raises(TruncationOverflow):
        q_exp_truncated(INV_LAMBDA, 1e6, 0.99, 1e-14)
    clipped = q_exp_truncated(INV_LAMBDA, 1e6, 0.99, 1e-14, cap=8, clip=True)
    assert len(clipped.divisor) == 9


def test_q_factor_matches_truncated_product():
    f = FlowSpec(0, "qdiff", INV_LAMBDA, q=0.5, y0=0.2)
    n = q_truncation_order(INV_LAMBDA, f.y(2), 0.5, f.eps_q)
    assert f.factor(2) == q_exp_truncated(INV_LAMBDA, 0.05, 0.5, 1e-12).inverse()
    assert f.achieved_eps(2) < f.eps_q
    assert n > 0


# grids and differences -----------------------------------------------------

def test_shift_and_bounds():
    grid = Grid((0, 0), (2, 1))
    assert shift((1, 1), 0) == (2, 1)
    assert shift((1, 1), 1, -1, grid) == (1, 0)
    with pytest.raises(GridBounds):
        shift((2, 1), 0, grid=grid)
    assert len(grid) == 6 and len(Grid((0,), (-1,))) == 0


def test_difference_examples():
    flows = [lattice(0), FlowSpec(1, "qdiff", INV_LAMBDA, q=0.5, y0=0.8)]
    assert forward_difference(lambda p: 4.2, flows, 0, (1, 0)) == 0
    assert forward_difference(lambda p: p[0], flows, 0, (3, 0)) == 1
    ident = lambda p: flows[1].y(p[1])
    assert forward_difference(ident, flows, 1, (0, 2)) == pytest.approx(1)
    with pytest.raises(GridBounds):
        forward_difference({(0, 0): 1.0}, flows, 0, (0, 0))


def test_apply_D_examples():
    flows = [lattice(0, R.from_roots(poles=[0.4]), step=0.5)]
    lam = np.array([1.0, 2j])
    assert np.all(apply_D(lambda p: np.zeros(2), flows, 0, (0,), 0, lam) == 0)
    field = lambda p: np.array([1.0 + p[0], 2.0])
    off = apply_D(field, flows, 0, (0,), 1, lam)
    assert np.allclose(off, forward_difference(field, flows, 0, (0,)))


# wave function ---------------------------------------------------------------

def test_wave_function_identity():
    lam = P(0, 0.7 - 0.2j)
    assert wave_function(vacuum(), [lattice(0)], (0,), lam, P(0, 0)) == pytest.approx(1 / lam.value)


def test_wave_function_vacuum_any_g():
    flows = [lattice(0, step=0.3), lattice(1, R.from_roots(poles=[0.5j]), step=0.2)]
    lam = P(0, -0.6 + 0.9j)
    g = group_element(flows, (2, 1))
    psi = wave_function(vacuum(), flows, (2, 1), lam, P(0, 0))
    assert abs(psi - 1 / (g(lam) * lam.value)) < 1e-8


def test_wave_function_kp_step():
    # psi after one KP step, reference values from tests/oracles
    seed = rank_perturbed([T(0.2, 0, 1, 0, 1), T(0.3)])
    for lam, ref in ((0.7 + 0.4j, 2.49469146238377 - 1.9487404902789518j),
                     (-0.5 + 0.9j, -0.7946244215023139 + 0.010646391700147485j)):
        psi = wave_function(seed, [lattice(0)], (1,), P(0, lam), P(0, 0))
        assert abs(psi - ref) < 1e-9 * abs(ref)


def test_solution_caches_and_matches_dress():
    seed = rank_perturbed([T(0.2, 0, 1, 0, 1)])
    flows = [lattice(0, R.from_roots(poles=[0.5]), step=0.2)]
    sol = Solution(seed, flows)
    lam, mu = P(0, 1.2j), P(0, -1.0)
    assert sol.kernel((2,)) is sol.kernel((2,))
    assert sol.chi((2,), lam, mu) == pytest.approx(dress(seed, group_element(flows, (2,)), lam, mu), rel=1e-10)
