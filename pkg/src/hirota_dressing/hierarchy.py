"""Group elements for lattice and q-difference flows, grids, difference
operators, and the dressed solution family over a grid.

A lattice flow with rational K and steps l(m) contributes

    g^{-1} = prod_{m=1}^{n} (1 + l(m) K)          (n >= 0, inverse factors for n < 0)

so that the forward difference with step l(n+1) maps g^{-1} to K g^{-1}.  A
q-difference flow contributes g^{-1} = e_q(K y) with y = y0 q^m and

    e_q(x) = prod_{n>=0} (1 + q^n (q-1) x)^{-1},

truncated once the next factor is below the requested tolerance.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dressing import DressedKernel
from .errors import GridBounds, TruncationOverflow, ValidationError
from .rational import RationalDivisorFunction, SheetedPoint, one_plus_multiple

Q_TRUNCATION_CAP = 64
K_BOUND_DISTANCE = 0.5


@dataclass(frozen=True)
class FlowSpec:
    """One discrete time. ``K`` lives on ``sheet`` and vanishes on every other sheet."""

    id: int
    kind: str
    K: RationalDivisorFunction
    sheet: int = 0
    step: complex = 1.0
    schedule: tuple = ()          # ((m, l_m), ...) overriding ``step`` at given m
    q: complex = 0.5
    y0: complex = 0.0
    eps_q: float = 1e-12
    k_distance: float = K_BOUND_DISTANCE
    truncation_cap: int = Q_TRUNCATION_CAP
    extra_factors: int = 0        # q factors kept beyond the tail bound
    clip_truncation: bool = False  # on overflow keep ``truncation_cap`` factors instead of raising

    def __post_init__(self):
        if self.kind == "continuous":
            raise ValidationError(
                "continuous flows give g = exp(K x): not rational, infinite divisor; unsupported")
        if self.kind not in ("lattice", "qdiff"):
            raise ValidationError(f"flow {self.id}: unknown kind {self.kind!r}")
        if self.kind == "qdiff" and not abs(complex(self.q)) < 1:
            raise ValidationError(f"flow {self.id}: q-difference flows need |q| < 1, got q={self.q}")
        if self.kind == "qdiff" and self.eps_q <= 0:
            raise ValidationError(f"flow {self.id}: eps_q must be positive")
        if self.kind == "lattice":
            if complex(self.step) == 0 or any(complex(l) == 0 for _, l in self.schedule):
                raise ValidationError(f"flow {self.id}: lattice steps must be nonzero")
        object.__setattr__(self, "schedule", tuple(sorted((int(m), complex(l)) for m, l in self.schedule)))

    def lattice_step(self, m: int) -> complex:
        """l(m), the step taken from n = m-1 to n = m."""
        for mm, l in self.schedule:
            if mm == m:
                return l
        return complex(self.step)

    def y(self, m: int) -> complex:
        return complex(self.y0) * complex(self.q) ** m

    def K_values(self, sheet: int, z):
        if sheet != self.sheet:
            return z * 0
        return self.K.values(sheet, z)

    def poles(self) -> list:
        return [p.value for p, _ in self.K.poles if p.sheet == self.sheet]

    def residues(self) -> list:
        """(pole, residue) for the simple poles of K on its sheet."""
        out = []
        for p, n in self.K.poles:
            if p.sheet != self.sheet:
                continue
            if n != 1:
                raise ValidationError("residues requested for a non-simple pole of K")
            rest = RationalDivisorFunction(tuple(e for e in self.K.divisor if e[0] != p), self.K.scale)
            out.append((p.value, complex(rest.values(p.sheet, p.value))))
        return out

    def difference_step(self, coord: int) -> complex:
        """Denominator of the forward difference at grid coordinate ``coord``."""
        if self.kind == "lattice":
            return self.lattice_step(coord + 1)
        return (complex(self.q) - 1) * self.y(coord)

    def factor(self, coord: int) -> RationalDivisorFunction:
        """This flow's contribution to g at grid coordinate ``coord``."""
        if self.kind == "lattice":
            g = RationalDivisorFunction.identity()
            if coord > 0:
                for m in range(1, coord + 1):
                    g = g * one_plus_multiple(self.K, self.lattice_step(m), self.sheet).inverse()
            else:
                for m in range(coord + 1, 1):
                    g = g * one_plus_multiple(self.K, self.lattice_step(m), self.sheet)
            return g
        return q_exp_truncated(self.K, self.y(coord), self.q, self.eps_q, self.sheet,
                               self.k_distance, self.truncation_cap, self.extra_factors,
                               self.clip_truncation).inverse()

    def achieved_eps(self, coord: int) -> float:
        """Size of the first omitted q factor at ``coord`` (0 for lattice flows)."""
        if self.kind == "lattice":
            return 0.0
        try:
            n = q_truncation_order(self.K, self.y(coord), self.q, self.eps_q, self.sheet,
                                   self.k_distance, self.truncation_cap)
        except TruncationOverflow:
            n = self.truncation_cap
        n += self.extra_factors
        q = complex(self.q)
        return abs(q) ** n * abs(q - 1) * abs(self.y(coord)) * k_bound(self.K, self.sheet, self.k_distance)


def k_bound(K: RationalDivisorFunction, sheet: int = 0, distance: float = K_BOUND_DISTANCE) -> float:
    """max |K| over circles of radius ``distance`` around its poles on ``sheet``."""
    poles = [p.value for p, _ in K.poles if p.sheet == sheet]
    if not K.divisor:
        return abs(K.scale)
    if not poles:
        return 0.0
    theta = np.exp(2j * np.pi * np.arange(64) / 64)
    return float(max(np.max(np.abs(K.values(sheet, p + distance * theta))) for p in poles))


def q_truncation_order(K, y, q, eps, sheet=0, distance=K_BOUND_DISTANCE,
                       cap: int = Q_TRUNCATION_CAP) -> int:
    """Smallest N with |q|^N |q-1| |y| max|K| < eps (the first omitted factor)."""
    q, y = complex(q), complex(y)
    if not abs(q) < 1:
        raise ValidationError(f"|q| < 1 required, got q={q}")
    base = abs(q - 1) * abs(y) * k_bound(K, sheet, distance)
    if base == 0:
        return 0
    n = 0
    while abs(q) ** n * base >= eps:
        n += 1
        if n > cap:
            raise TruncationOverflow(
                f"q-exponential needs more than {cap} factors for eps={eps:g}")
    return n


def q_exp_truncated(K, y, q, eps, sheet=0, distance=K_BOUND_DISTANCE,
                    cap: int = Q_TRUNCATION_CAP, extra: int = 0,
                    clip: bool = False) -> RationalDivisorFunction:
    """prod_{n<N} (1 + q^n (q-1) y K)^{-1} with N from :func:`q_truncation_order` (+ ``extra``)."""
    try:
        n_terms = q_truncation_order(K, y, q, eps, sheet, distance, cap) + extra
    except TruncationOverflow:
        if not clip:
            raise
        n_terms = cap + extra
    q, y = complex(q), complex(y)
    out = RationalDivisorFunction.identity()
    for n in range(n_terms):
        out = out * one_plus_multiple(K, q ** n * (q - 1) * y, sheet).inverse()
    return out


def q_exp_scalar(x: complex, q: complex, n_terms: int) -> complex:
    out = 1 + 0j
    for n in range(n_terms):
        out /= 1 + q ** n * (q - 1) * x
    return out


# grids ---------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValidationError("grid bounds must have one entry per flow")
        object.__setattr__(self, "lower", tuple(int(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(int(v) for v in self.upper))

    def __contains__(self, p) -> bool:
        return all(lo <= c <= hi for lo, c, hi in zip(self.lower, p, self.upper))

    def points(self):
        ranges = [range(lo, hi + 1) for lo, hi in zip(self.lower, self.upper)]
        return [tuple(p) for p in itertools.product(*ranges)]

    def __len__(self):
        return math.prod(max(0, hi - lo + 1) for lo, hi in zip(self.lower, self.upper))


def shift(p: tuple, i: int, direction: int = 1, grid: Grid | None = None) -> tuple:
    out = tuple(c + direction if k == i else c for k, c in enumerate(p))
    if grid is not None and out not in grid:
        raise GridBounds(f"shift of {p} along flow {i} leaves the grid")
    return out


def _lookup(field, p, grid):
    if grid is not None and p not in grid:
        raise GridBounds(f"grid point {p} outside bounds")
    if callable(field):
        return field(p)
    try:
        return field[p]
    except KeyError:
        raise GridBounds(f"no sample at grid point {p}") from None


def forward_difference(field, flows, i: int, p: tuple, grid: Grid | None = None):
    """Delta_i (lattice) or delta^q_i (q-difference) of ``field`` at ``p``.

    ``field`` is a mapping or callable from grid tuples to values (scalars or arrays).
    """
    f0 = _lookup(field, p, grid)
    f1 = _lookup(field, shift(p, i), grid)
    return (f1 - f0) / flows[i].difference_step(p[i])


diff_lattice = forward_difference
diff_q = forward_difference


def apply_D(field, flows, i: int, p: tuple, lam_sheet: int, lam, grid: Grid | None = None):
    """D_i chi = diff_i chi + (T_i chi) K_i(lam), pointwise in the lambda samples."""
    t = _lookup(field, shift(p, i), grid)
    return forward_difference(field, flows, i, p, grid) + t * flows[i].K_values(lam_sheet, np.asarray(lam))


def group_element(flows, p: tuple) -> RationalDivisorFunction:
    if len(p) != len(flows):
        raise ValidationError("grid point needs one coordinate per flow")
    g = RationalDivisorFunction.identity()
    for f, c in zip(flows, p):
        g = g * f.factor(c)
    return g


class Solution:
    """The dressed kernel family chi(lam, mu; g(p)) over grid points p."""

    def __init__(self, seed, flows, dps=None, circle_points: int = 64):
        self.seed = seed
        self.flows = tuple(flows)
        self.dps = dps
        self.circle_points = circle_points
        self._g: dict = {}
        self._k: dict = {}

    def g(self, p: tuple) -> RationalDivisorFunction:
        p = tuple(p)
        if p not in self._g:
            self._g[p] = group_element(self.flows, p)
        return self._g[p]

    def kernel(self, p: tuple) -> DressedKernel:
        p = tuple(p)
        if p not in self._k:
            self._k[p] = DressedKernel(self.seed, self.g(p), dps=self.dps)
        return self._k[p]

    def chi(self, p, lam: SheetedPoint, mu: SheetedPoint, regularize: bool = True) -> complex:
        k = self.kernel(p)
        if regularize:
            return k.regularized(lam, mu, self.circle_points)
        return complex(k.eval(lam, mu))

    def psi(self, p, lam: SheetedPoint, mu0: SheetedPoint, regularize: bool = True):
        """Wave function g^{-1}(lam) chi(lam, mu0; g)."""
        return complex(self.chi(p, lam, mu0, regularize) / self.g(p)(lam))

    def tau(self, p):
        return self.kernel(p).tau()


def wave_function(seed, flows, p, lam: SheetedPoint, mu0: SheetedPoint, dps=None,
                  circle_points: int = 64) -> complex:
    return Solution(seed, flows, dps, circle_points).psi(p, lam, mu0)
