"""Residual checks.

Quadrature checks integrate over one positively oriented circle per sheet
with the periodic trapezoid rule and normalize ``|integral|`` by
``max|integrand| * contour length``. Grid checks normalize by the largest
field value in the difference stencil. Every check returns a
:class:`ResidualReport`.
"""
from __future__ import annotations

import dataclasses
import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ContourTooTight, RankDeficientFit, TruncationOverflow, ValidationError
from .hierarchy import Grid, Solution, shift
from .kernel import MAX_ORDER, FiniteRankKernel, SeedKernel
from .rational import RationalDivisorFunction, SheetedPoint
from .report import ResidualReport

QUADRATURE_POINTS = 512
MARGIN = 0.05
INNER_RATIO = 0.9
RANK_RCOND = 1e-10
RICHARDSON_EPS = (1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class ContourSpec:
    """One circle ``(sheet, center, radius)`` per sheet and ``points`` nodes each."""

    circles: tuple
    points: int = QUADRATURE_POINTS

    def __post_init__(self):
        circles = tuple(sorted(((int(s), complex(c), float(r)) for s, c, r in self.circles), key=lambda e: e[0]))
        if len({s for s, _, _ in circles}) != len(circles):
            raise ValidationError("one contour per sheet")
        if any(r <= 0 for _, _, r in circles):
            raise ValidationError("contour radii must be positive")
        if self.points < 8:
            raise ValidationError("need at least 8 quadrature points")
        object.__setattr__(self, "circles", circles)

    @classmethod
    def uniform(cls, sheets, radius: float, points: int = QUADRATURE_POINTS) -> "ContourSpec":
        return cls(tuple((s, 0j, radius) for s in sheets), points)

    @classmethod
    def enclosing(cls, points_by_sheet: dict, factor: float = 1.5, min_radius: float = 1.0,
                  points: int = QUADRATURE_POINTS) -> "ContourSpec":
        """Circles about 0 of radius ``factor * max|p|`` (at least ``min_radius``)."""
        circles = []
        for s, pts in sorted(points_by_sheet.items()):
            m = max((abs(complex(v)) for v in pts), default=0.0)
            circles.append((s, 0j, max(min_radius, factor * m)))
        return cls(tuple(circles), points)

    @property
    def sheets(self) -> list:
        return [s for s, _, _ in self.circles]

    def circle(self, sheet: int):
        for s, c, r in self.circles:
            if s == sheet:
                return c, r
        raise ContourTooTight(f"no contour on sheet {sheet}")

    def scaled(self, ratio: float) -> "ContourSpec":
        return ContourSpec(tuple((s, c, r * ratio) for s, c, r in self.circles), self.points)

    def with_points(self, points: int) -> "ContourSpec":
        return dataclasses.replace(self, points=points)

    def nodes(self, sheet: int):
        """Quadrature nodes and weights ``d nu`` on the circle of ``sheet``."""
        c, r = self.circle(sheet)
        e = np.exp(2j * np.pi * np.arange(self.points) / self.points)
        return c + r * e, 1j * r * e * (2 * np.pi / self.points)

    @property
    def length(self) -> float:
        return sum(2 * np.pi * r for _, _, r in self.circles)

    def require_inside(self, sheet: int, values, what: str = "point") -> None:
        c, r = self.circle(sheet)
        for v in np.atleast_1d(np.asarray(values, dtype=complex)):
            if abs(v - c) > (1 - MARGIN) * r:
                raise ContourTooTight(
                    f"{what} {complex(v)!r} on sheet {sheet} is not inside the contour "
                    f"(center {c}, radius {r}) with margin {MARGIN:g}*radius")

    def require_divisor_inside(self, g: RationalDivisorFunction, what: str = "divisor point"):
        for p, _ in g.divisor:
            self.require_inside(p.sheet, p.value, what)


def _normalized(total, scale, length):
    if scale == 0:
        return abs(total)
    return abs(total) / (scale * length)


# bilinear identity --------------------------------------------------------

def hirota_integrand(chi_left, g1, g2, chi_right, lam: SheetedPoint, mu: SheetedPoint,
                     sheet: int, nu):
    return (np.asarray(chi_left.evaluate(lam.sheet, lam.value, sheet, nu), dtype=complex)
            * np.asarray(g1.values(sheet, nu) / g2.values(sheet, nu), dtype=complex)
            * np.asarray(chi_right.evaluate(sheet, nu, mu.sheet, mu.value), dtype=complex))


def hirota_residual(chi_left: SeedKernel, g1: RationalDivisorFunction, g2: RationalDivisorFunction,
                    chi_right: SeedKernel, contour: ContourSpec, samples,
                    tolerance: float = 1e-8, name: str = "hirota") -> ResidualReport:
    """Normalized ``|contour integral of chi_left(lam,nu) g1 g2^{-1}(nu) chi_right(nu,mu)|``."""
    contour.require_divisor_inside(g1)
    contour.require_divisor_inside(g2)
    res = []
    for lam, mu in samples:
        contour.require_inside(lam.sheet, lam.value, "lambda")
        contour.require_inside(mu.sheet, mu.value, "mu")
        total, scale = 0j, 0.0
        for s in contour.sheets:
            nu, w = contour.nodes(s)
            f = hirota_integrand(chi_left, g1, g2, chi_right, lam, mu, s, nu)
            total += np.sum(f * w)
            scale = max(scale, float(np.max(np.abs(f))))
        res.append(_normalized(total, scale, contour.length))
    return ResidualReport.from_residuals(name, res, tolerance, samples=list(samples),
                                        details={"points": contour.points})


def double_integral_check(chi0: SeedKernel, g: RationalDivisorFunction, chi_g: SeedKernel,
                          contour: ContourSpec, samples, tolerance: float = 1e-7,
                          inner_ratio: float = INNER_RATIO,
                          name: str = "double_integral") -> ResidualReport:
    """Iterated quadrature of chi0(lam,nu) g^{-1}(nu) chi(nu,eta;g) g(eta) chi0(eta,mu).

    ``nu`` runs over ``contour`` and ``eta`` over the same circles shrunk by
    ``inner_ratio``, so the diagonal singularity of chi(nu, eta) is never sampled.
    """
    inner = contour.scaled(inner_ratio)
    inner.require_divisor_inside(g)
    res = []
    for lam, mu in samples:
        inner.require_inside(lam.sheet, lam.value, "lambda")
        inner.require_inside(mu.sheet, mu.value, "mu")
        total, scale = 0j, 0.0
        for s in contour.sheets:
            nu, wn = contour.nodes(s)
            left = np.asarray(chi0.evaluate(lam.sheet, lam.value, s, nu), dtype=complex) \
                / np.asarray(g.values(s, nu), dtype=complex)
            for t in contour.sheets:
                eta, we = inner.nodes(t)
                right = np.asarray(g.values(t, eta), dtype=complex) \
                    * np.asarray(chi0.evaluate(t, eta, mu.sheet, mu.value), dtype=complex)
                mid = np.asarray(chi_g.evaluate(s, nu[:, None], t, eta[None, :]), dtype=complex)
                f = left[:, None] * mid * right[None, :]
                total += (wn * left) @ mid @ (we * right)
                scale = max(scale, float(np.max(np.abs(f))))
        res.append(_normalized(total, scale, contour.length * inner.length))
    return ResidualReport.from_residuals(name, res, tolerance, samples=list(samples),
                                        details={"points": contour.points, "inner_ratio": inner_ratio})


def membership_residual(chi_g: SeedKernel, f, contour: ContourSpec, probes, side: str = "W",
                        tolerance: float = 1e-8, name: str | None = None) -> ResidualReport:
    """Residual of the W condition (integral of chi(lam,nu) f(nu)) or the W'
    condition (integral of f(nu) chi(nu,mu)) at each probe point.

    ``f`` is a callable ``f(sheet, nu)`` or a mapping ``sheet -> samples at the nodes``.
    """
    if side not in ("W", "W'"):
        raise ValidationError(f"side must be 'W' or \"W'\", got {side!r}")
    res = []
    for p in probes:
        contour.require_inside(p.sheet, p.value, "probe")
        total, scale = 0j, 0.0
        for s in contour.sheets:
            nu, w = contour.nodes(s)
            fv = np.asarray(f(s, nu) if callable(f) else f[s], dtype=complex)
            if side == "W":
                k = np.asarray(chi_g.evaluate(p.sheet, p.value, s, nu), dtype=complex)
            else:
                k = np.asarray(chi_g.evaluate(s, nu, p.sheet, p.value), dtype=complex)
            vals = k * fv
            total += np.sum(vals * w)
            scale = max(scale, float(np.max(np.abs(vals))))
        res.append(_normalized(total, scale, contour.length))
    return ResidualReport.from_residuals(name or f"membership[{side}]", res, tolerance,
                                        samples=list(probes))


def dressed_column(g: RationalDivisorFunction, chi0: SeedKernel, mu0: SheetedPoint):
    """f(nu) = g(nu) chi0(nu, mu0), an element of W(g)."""
    return lambda s, nu: g.values(s, nu) * chi0.evaluate(s, nu, mu0.sheet, mu0.value)


def dressed_row(g: RationalDivisorFunction, chi0: SeedKernel, lam0: SheetedPoint):
    """h(nu) = chi0(lam0, nu) / g(nu), an element of W'(g)."""
    return lambda s, nu: chi0.evaluate(lam0.sheet, lam0.value, s, nu) / g.values(s, nu)


# negative controls --------------------------------------------------------

def scaled_vacuum(weight: complex = 2.0, max_order: int = MAX_ORDER) -> FiniteRankKernel:
    """``weight/(lam-mu)``: breaks the diagonal normalization."""
    return FiniteRankKernel((), weight=weight, max_order=max_order, kind="scaled-control")


class PoleControlKernel(SeedKernel):
    """Vacuum plus ``coeff/(lam - center)`` on ``sheet``: a pole off the diagonal."""

    def __init__(self, center: complex, coeff: complex = 1.0, sheet: int = 0):
        self.center = complex(center)
        self.coeff = complex(coeff)
        self.sheet = sheet

    def evaluate(self, ls, lam, ms, mu):
        out = lam * 0 + mu * 0
        if ls == ms:
            self._check_diagonal(ls, lam, ms, mu)
            out = out + 1 / (lam - mu)
        if ls == self.sheet:
            out = out + self.coeff / (lam - self.center)
        return out

    def singular_points(self, sheet):
        return [self.center] if sheet == self.sheet else []


# analyticity --------------------------------------------------------------

def richardson_zero(values, ratio: float = 10.0):
    """Extrapolate ``e(eps)`` sampled at eps, eps/ratio, ... to eps = 0."""
    vals = list(values)
    k = 1
    while len(vals) > 1:
        f = ratio ** k
        vals = [(f * b - a) / (f - 1) for a, b in zip(vals, vals[1:])]
        k += 1
    return vals[0]


def analytic_property_check(kernel: SeedKernel, directions, probes=(), eps=RICHARDSON_EPS,
                            radius: float = 0.05, circle_points: int = 64,
                            tolerance: float = 1e-7, name: str = "analytic") -> ResidualReport:
    """Diagonal normalization along shrinking sequences ``lam = mu + eps*d`` for
    each ``(mu, d)`` in ``directions`` (Richardson-extrapolated), and circle-mean
    probes of analyticity at off-diagonal ``(lam, mu)`` pairs."""
    res, samples = [], []
    for mu, d in directions:
        d = complex(d) / abs(complex(d))
        errs = [complex((e * d) * complex(kernel.evaluate(mu.sheet, mu.value + e * d, mu.sheet, mu.value))) - 1
                for e in eps]
        res.append(abs(richardson_zero(errs)))
        samples.append(("diagonal", mu, d))
    for lam, mu in probes:
        r = radius
        if lam.sheet == mu.sheet:
            r = min(r, 0.5 * abs(lam.value - mu.value))
        for s in kernel.singular_points(lam.sheet):
            if abs(s - lam.value) > 0:
                r = min(r, 0.5 * abs(s - lam.value))
        z = lam.value + r * np.exp(2j * np.pi * np.arange(circle_points) / circle_points)
        mean = complex(np.mean(np.asarray(kernel.evaluate(lam.sheet, z, mu.sheet, mu.value), dtype=complex)))
        centre = complex(kernel.evaluate(lam.sheet, lam.value, mu.sheet, mu.value))
        res.append(abs(mean - centre) / max(abs(centre), 1e-300))
        samples.append(("mean-value", lam, mu))
    return ResidualReport.from_residuals(name, res, tolerance, samples=samples)


# lattice N-wave -------------------------------------------------------------

N2_CONVENTIONS = ("locked", "swapped")


def marked_points(flows) -> list:
    """The single pole of each flow's K (the point ``0_i`` for K_i = 1/lam)."""
    out = []
    for f in flows:
        poles = [(p, n) for p, n in f.K.poles if p.sheet == f.sheet]
        if len(poles) != 1 or poles[0][1] != 1:
            raise ValidationError(f"flow {f.id}: N-wave fields need K with one simple pole")
        out.append(poles[0][0])
    return out


class _Fields:
    """Lazily evaluated chi(p, a, b) := chi(point_a, point_b; g(p))."""

    def __init__(self, solution: Solution, pts):
        self.sol = solution
        self.pts = pts
        self.cache = {}

    def raw(self, p, a, b):
        key = (p, a, b)
        if key not in self.cache:
            self.cache[key] = complex(self.sol.chi(p, self.pts[a], self.pts[b]))
        return self.cache[key]


def n2_residual(seed: SeedKernel, flows, grid: Grid, convention: str = "locked",
                tolerance: float = 1e-7, circle_points: int = 32, dps=None,
                name: str | None = None) -> ResidualReport:
    """Residual of  Delta_i chi_jk = (T_i chi_ji) chi_ik  over base points of ``grid``.

    Locked reading: chi_jk = chi(0_k, 0_j). The ``swapped`` reading keeps the
    left side and transposes the arguments of both factors on the right; it is
    the negative control.
    """
    if convention not in N2_CONVENTIONS:
        raise ValidationError(f"unknown index convention {convention!r}")
    if len(flows) < 3:
        raise ValidationError("the N-wave check needs at least 3 flows")
    pts = marked_points(flows)
    F = _Fields(Solution(seed, flows, dps, circle_points), pts)
    field = lambda p, a, b: F.raw(p, b, a)           # noqa: E731
    rhs_field = field if convention == "locked" else (lambda p, a, b: F.raw(p, a, b))
    n = len(flows)
    res, samples = [], []
    for p in grid.points():
        for i in range(n):
            t = shift(p, i)
            l = flows[i].difference_step(p[i])
            scale = max(abs(F.raw(pp, a, b)) for pp in (p, t) for a in range(n) for b in range(n) if a != b)
            for j, k in itertools.permutations([x for x in range(n) if x != i], 2):
                lhs = (field(t, j, k) - field(p, j, k)) / l
                rhs = rhs_field(t, j, i) * rhs_field(p, i, k)
                r = abs(lhs - rhs)
                res.append(r / scale if scale else r)
                samples.append((p, i, j, k))
    return ResidualReport.from_residuals(name or f"n2[{convention}]", res, tolerance,
                                        samples=samples, details={"convention": convention})


# q-difference N-wave --------------------------------------------------------

def nwave_marks(flows) -> list:
    """(flow index, pole, residue) for every simple pole of every K_i."""
    marks = []
    for i, f in enumerate(flows):
        for z, a in f.residues():
            marks.append((i, SheetedPoint(f.sheet, z), a))
    zs = [(m[1].sheet, m[1].value) for m in marks]
    if len(set(zs)) != len(zs):
        raise ValidationError("poles of distinct flows must be distinct")
    return marks


def _base_points(grid) -> list:
    return grid.points() if isinstance(grid, Grid) else [tuple(p) for p in grid]


def _truncation_warnings(flows, points, extra_steps: int = 1):
    """Clip overflowing q truncations (warning with the achieved eps) instead of failing."""
    warnings, out = [], []
    for i, f in enumerate(flows):
        clip = False
        if f.kind == "qdiff":
            coords = sorted({p[i] + d for p in points for d in range(extra_steps + 1)})
            for c in coords:
                try:
                    f.factor(c)
                except TruncationOverflow:
                    clip = True
                    warnings.append(f"flow {f.id}: q truncation capped at {f.truncation_cap} factors, "
                                    f"achieved eps {dataclasses.replace(f, clip_truncation=True).achieved_eps(c):.2e}")
                    break
        out.append(dataclasses.replace(f, clip_truncation=True) if clip else f)
    return out, warnings


def nwave_q_residual(seed: SeedKernel, flows, grid, generic_pairs=(),
                     convention: str = "locked", tolerance: float = 1e-6,
                     circle_points: int = 32, dps=60,
                     name: str | None = None) -> ResidualReport:
    """Residual of the q-difference N-wave system at the poles of the K_i

        delta_i chi_jk + K_i(lam_k) T_i chi_jk - K_i(lam_j) chi_jk
            - sum_alpha (T_i chi_ji^alpha) a_i^alpha chi_ik^alpha = 0,

    with chi_jk = chi(lam_k, lam_j), plus the full-kernel relation

        [(1 + l K_i(lam)) T_i chi(lam,mu) - chi(lam,mu)(1 + l K_i(mu))] / l
            = sum_alpha a_i^alpha chi(lam, lam_i^alpha) T_i chi(lam_i^alpha, mu)

    at ``generic_pairs`` (l is the difference step of flow i: (q-1) y_i for q flows).
    ``grid`` is a :class:`Grid` or an explicit list of base points.
    """
    if convention not in N2_CONVENTIONS:
        raise ValidationError(f"unknown index convention {convention!r}")
    points = _base_points(grid)
    flows, warns = _truncation_warnings(flows, points)
    marks = nwave_marks(flows)
    sol = Solution(seed, flows, dps, circle_points)
    cache = {}

    def chi(p, lam, mu):
        key = (p, lam, mu)
        if key not in cache:
            cache[key] = complex(sol.chi(p, lam, mu))
        return cache[key]

    def field(p, a, b):                       # chi_ab
        return chi(p, marks[b][1], marks[a][1])

    rhs_field = field if convention == "locked" else (lambda p, a, b: chi(p, marks[a][1], marks[b][1]))
    res, samples = [], []
    n = len(flows)
    for p in points:
        for i in range(n):
            t = shift(p, i)
            l = flows[i].difference_step(p[i])
            K = lambda z: complex(flows[i].K_values(flows[i].sheet, z))   # noqa: E731
            own = [a for a, m in enumerate(marks) if m[0] == i]
            other = [a for a, m in enumerate(marks) if m[0] != i]
            scale = max(abs(field(pp, a, b)) for pp in (p, t)
                        for a in range(len(marks)) for b in range(len(marks)) if a != b)
            for j, k in itertools.permutations(other, 2):
                lj, lk = marks[j][1], marks[k][1]
                kj = K(lj.value) if lj.sheet == flows[i].sheet else 0
                kk = K(lk.value) if lk.sheet == flows[i].sheet else 0
                lhs = ((field(t, j, k) - field(p, j, k)) / l + kk * field(t, j, k) - kj * field(p, j, k)
                       - sum(rhs_field(t, j, al) * marks[al][2] * rhs_field(p, al, k) for al in own))
                res.append(abs(lhs) / scale if scale else abs(lhs))
                samples.append(("eq20", p, i, j, k))
        for lam, mu in generic_pairs:
            for i in range(n):
                t = shift(p, i)
                l = flows[i].difference_step(p[i])
                fi = flows[i]
                kl = complex(fi.K_values(lam.sheet, lam.value))
                km = complex(fi.K_values(mu.sheet, mu.value))
                terms = [(1 + l * kl) * chi(t, lam, mu) / l, -chi(p, lam, mu) * (1 + l * km) / l]
                for al, m in enumerate(marks):
                    if m[0] == i:
                        terms.append(-m[2] * chi(p, lam, m[1]) * chi(t, m[1], mu))
                r = abs(sum(terms))
                s = max(abs(x) for x in terms)
                res.append(r / s if s else r)
                samples.append(("eq19", p, i, lam, mu))
    return ResidualReport.from_residuals(name or f"nwave_q[{convention}]", res, tolerance,
                                        samples=samples, warnings=warns,
                                        details={"convention": convention, "dps": dps})


# KP linear problem ----------------------------------------------------------

def _difference_powers(values, flows, i: int, p, order: int):
    """[Delta_i^k f (p) for k = 0..order] from a callable ``values(point)``."""
    def rec(pt, k):
        if k == 0:
            return values(pt)
        return (rec(shift(pt, i), k - 1) - rec(pt, k - 1)) / flows[i].difference_step(pt[i])
    return [rec(tuple(p), k) for k in range(order + 1)]


def kp_linear_residual(seed: SeedKernel, flows, order: int, points, collocation, held_out,
                       mu0: SheetedPoint = SheetedPoint(0, 0), tolerance: float = 1e-7,
                       circle_points: int = 32, dps=None,
                       name: str | None = None) -> ResidualReport:
    """Fit ``(Delta_order - Delta_1^order) psi = sum_k u_k Delta_1^k psi`` (k < order)
    by least squares over the ``collocation`` lam values and report the relative
    residual at ``held_out`` lam values, for each base point in ``points``.

    ``flows[0]`` is the first time and ``flows[order-1]`` the time being tested;
    psi(lam) = g^{-1}(lam) chi(lam, mu0; g).
    """
    if order < 2 or order > len(flows):
        raise ValidationError(f"KP order {order} needs flows 1..{order}")
    sol = Solution(seed, flows, dps, circle_points)
    res, samples, coeffs = [], [], []
    for p in points:
        p = tuple(p)

        def rows(lams):
            lams = [SheetedPoint(mu0.sheet, z) if not isinstance(z, SheetedPoint) else z for z in lams]
            out = []
            for lam in lams:
                psi = functools.lru_cache(maxsize=None)(lambda pt, lam=lam: sol.psi(pt, lam, mu0))
                d1 = _difference_powers(psi, flows, 0, p, order)
                di = _difference_powers(psi, flows, order - 1, p, 1)[1]
                out.append((d1, di))
            basis = np.array([[d1[k] for k in range(order)] for d1, _ in out], dtype=complex)
            lhs = np.array([di - d1[order] for d1, di in out], dtype=complex)
            size = np.array([abs(di) + abs(d1[order]) for d1, di in out])
            return basis, lhs, size

        B, y, _ = rows(collocation)
        norms = np.linalg.norm(B, axis=0)
        norms[norms == 0] = 1.0
        sv = np.linalg.svd(B / norms, compute_uv=False)
        if len(sv) < order or sv[-1] < RANK_RCOND * sv[0]:
            raise RankDeficientFit(
                f"collocation matrix is rank deficient (rcond={sv[-1] / sv[0] if sv[0] else 0:.2e})")
        u = np.linalg.lstsq(B, y, rcond=None)[0]
        Bh, yh, size = rows(held_out)
        r = np.linalg.norm(Bh @ u - yh) / max(np.linalg.norm(size), 1e-300)
        res.append(r)
        samples.append(p)
        coeffs.append([[c.real, c.imag] for c in u])
    return ResidualReport.from_residuals(name or f"kp_linear[{order}]", res, tolerance,
                                        samples=samples, details={"u": coeffs})
