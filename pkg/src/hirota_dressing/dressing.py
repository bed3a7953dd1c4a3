"""Action of a rational group element g on a seed kernel.

    chi(lam, mu; g) = g(lam)/g(mu) * det N(lam, mu) / det A

``A[I, J] = d^p_lam d^q_mu chi0(z_I, zh_J)`` over the poles ``z`` (rows, with
derivative orders 0..n-1 at a pole of multiplicity n) and zeros ``zh``
(columns). ``N`` borders ``A`` with the row ``lam`` and column ``mu``. The
ratio is evaluated through the LU factors of ``A`` as the Schur complement

    det N / det A = chi0(lam, mu) - r(lam)^T A^{-1} c(mu),

which is linear in the bordering row and column and so vectorizes over many
(lam, mu) pairs.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from ._backend import backend as make_backend
from .errors import (CircleHitsSingularity, DegenerateDenominator, EvaluationAtDivisor,
                     NonConvergent, PoleProximity, ValidationError)
from .kernel import SeedKernel
from .rational import MERGE_TOL, POLE_TOL, RationalDivisorFunction, SheetedPoint, warn_sheet_imbalance
from .report import ResidualReport

RCOND_ERROR = 1e-13
RCOND_WARN = 1e-9
REGULARIZE_TOL = 1e-6
RADIUS_CAP = 0.1
MIN_RADIUS = 1e-14
CIRCLE_POINTS = 64
CONVERGENCE_RTOL = 1e-6


@dataclass(frozen=True)
class TauValue:
    log_abs: float
    phase: complex

    @property
    def value(self) -> complex:
        return self.phase * math.exp(self.log_abs)

    def __truediv__(self, other: "TauValue") -> "TauValue":
        return TauValue(self.log_abs - other.log_abs, self.phase / other.phase)

    def __mul__(self, other: "TauValue") -> "TauValue":
        return TauValue(self.log_abs + other.log_abs, self.phase * other.phase)


class DressedKernel(SeedKernel):
    """chi(lam, mu; g) for a zero-balance rational ``g``; itself usable as a seed."""

    def __init__(self, seed: SeedKernel, g: RationalDivisorFunction, dps=None,
                 rcond_error: float = RCOND_ERROR, rcond_warn: float = RCOND_WARN):
        if g.balance != 0:
            raise ValidationError(f"group element must have zero balance, got {g.balance}")
        warn_sheet_imbalance(g)
        self.seed = seed
        self.g = g
        self.max_order = seed.max_order
        self.bk = make_backend(dps)
        if dps is not None:
            # thresholds follow the working precision
            shift = 10.0 ** (16 - self.bk.dps)
            rcond_error, rcond_warn = rcond_error * shift, rcond_warn * shift
        self.rows = [(p.sheet, p.value, k) for p, n in g.poles for k in range(n)]
        self.cols = [(p.sheet, p.value, k) for p, n in g.zeros for k in range(n)]
        self._divisor_points = {}
        for p, _ in g.divisor:
            self._divisor_points.setdefault(p.sheet, []).append(p.value)
        n = len(self.rows)
        A = np.empty((n, n), dtype=object if dps is not None else complex)
        sc = self.bk.scalar
        for i, (si, zi, pi) in enumerate(self.rows):
            for j, (sj, zj, pj) in enumerate(self.cols):
                A[i, j] = seed.partial(pi, pj, si, sc(zi), sj, sc(zj))
        self.A = A
        # power-of-two equilibration: A = diag(2^er) As diag(2^ec); the ratio is invariant
        self._er = [-_exponent(max(abs(x) for x in row)) for row in A] if n else []
        As = A.copy()
        for i in range(n):
            As[i, :] = As[i, :] * _pow2(self._er[i], dps)
        self._ec = [-_exponent(max(abs(x) for x in As[:, j])) for j in range(n)]
        for j in range(n):
            As[:, j] = As[:, j] * _pow2(self._ec[j], dps)
        self._row_w = np.array([_pow2(e, dps) for e in self._er], dtype=A.dtype)
        self._col_w = np.array([_pow2(e, dps) for e in self._ec], dtype=A.dtype)
        self.rcond = self.bk.rcond(As)
        self.warnings = []
        if self.rcond < rcond_error:
            raise DegenerateDenominator(self.rcond)
        if self.rcond < rcond_warn:
            self.warnings.append(f"ill-conditioned denominator (rcond={self.rcond:.2e})")
        self._lu = self.bk.factor(As) if n else None

    def __repr__(self):
        return f"DressedKernel(seed={self.seed!r}, N={len(self.rows)})"

    @property
    def size(self) -> int:
        return len(self.rows)

    def singular_points(self, sheet: int) -> list:
        return list(self._divisor_points.get(sheet, [])) + list(self.seed.singular_points(sheet))

    def tau(self) -> TauValue:
        if not self.rows:
            return TauValue(0.0, 1 + 0j)
        log_abs, phase = self.bk.logdet(self._lu)
        return TauValue(log_abs - math.log(2) * (sum(self._er) + sum(self._ec)), phase)

    # building blocks -------------------------------------------------

    def _row_vector(self, ls, lam):
        """r(lam)_J = d^q_mu chi0(lam, zh_J); shape lam.shape + (N,)."""
        sc = self.bk.scalar
        parts = [self.seed.partial(0, q, ls, lam, sj, sc(zj)) for sj, zj, q in self.cols]
        return _stack(parts, lam)

    def _col_vector(self, ms, mu):
        """c(mu)_I = d^p_lam chi0(z_I, mu); shape mu.shape + (N,)."""
        sc = self.bk.scalar
        parts = [self.seed.partial(p, 0, si, sc(zi), ms, mu) for si, zi, p in self.rows]
        return _stack(parts, mu)

    def _solve(self, c):
        """A^{-1} applied along the last axis of ``c``."""
        shape = c.shape
        flat = (c * self._row_w).reshape(-1, shape[-1]).T
        x = np.asarray(self.bk.solve(self._lu, flat)).T.reshape(shape)
        return x * self._col_w

    def _check_off_divisor(self, sheet, z, which):
        pts = self._divisor_points.get(sheet)
        if not pts:
            return
        poles = {p.value for p, _ in self.g.poles if p.sheet == sheet}
        for r in pts:
            d = z - r
            dist = np.min(np.abs(d)) if isinstance(d, np.ndarray) else abs(d)
            if dist < POLE_TOL:
                if r in poles and which == "lambda":
                    raise PoleProximity(complex(_nearest(z, r)), r, float(dist))
                raise EvaluationAtDivisor(
                    f"{which} = {r!r} on sheet {sheet} is a divisor point of g; "
                    "use dress_regularized")

    def evaluate_native(self, ls, lam, ms, mu):
        bk = self.bk
        lam = bk.array(lam) if np.ndim(lam) else bk.scalar(lam)
        mu = bk.array(mu) if np.ndim(mu) else bk.scalar(mu)
        self._check_off_divisor(ls, lam, "lambda")
        self._check_off_divisor(ms, mu, "mu")
        base = self.seed.evaluate(ls, lam, ms, mu)
        if self.rows:
            r = self._row_vector(ls, lam)
            x = self._solve(self._col_vector(ms, mu))
            base = base - (r * x).sum(axis=-1)
        return self.g.values(ls, lam) / self.g.values(ms, mu) * base

    def evaluate(self, ls, lam, ms, mu):
        out = self.evaluate_native(ls, lam, ms, mu)
        if self.bk.dps is None:
            return out
        return self.bk.to_complex(out) if isinstance(out, np.ndarray) else complex(out)

    def partial(self, a, b, ls, lam, ms, mu):
        if a == 0 and b == 0:
            return self.evaluate(ls, lam, ms, mu)
        if np.ndim(lam) or np.ndim(mu):
            lam_b, mu_b = np.broadcast_arrays(np.asarray(lam, dtype=complex),
                                              np.asarray(mu, dtype=complex))
            out = np.empty(lam_b.shape, dtype=complex)
            for idx in np.ndindex(lam_b.shape):
                out[idx] = SeedKernel.partial(self, a, b, ls, lam_b[idx], ms, mu_b[idx])
            return out
        return SeedKernel.partial(self, a, b, ls, lam, ms, mu)

    # regularized evaluation ------------------------------------------

    def is_singular(self, p: SheetedPoint, tol: float = REGULARIZE_TOL) -> bool:
        return any(abs(p.value - r) < tol for r in self._divisor_points.get(p.sheet, []))

    def _reg_radius(self, p: SheetedPoint, other: SheetedPoint, tol: float) -> float:
        r = RADIUS_CAP
        pts = list(self._divisor_points.get(p.sheet, [])) + list(self.seed.singular_points(p.sheet))
        if other.sheet == p.sheet:
            pts.append(other.value)
        for s in pts:
            d = abs(s - p.value)
            if d > 0.5 * MERGE_TOL:
                r = min(r, 0.5 * d)
        return r

    def _circle_mean(self, lam: SheetedPoint, mu: SheetedPoint, r_l, r_m, m):
        bk = self.bk
        if r_l:
            lams = bk.circle(lam.value, r_l, m)
        else:
            lams = bk.array([lam.value])
        if r_m:
            mus = bk.circle(mu.value, r_m, m)
        else:
            mus = bk.array([mu.value])
        # circles keep half the gap to every divisor point; skip the coarse pole guard
        gl = self.g.values(lam.sheet, lams, pole_tol=0.0)
        gm = self.g.values(mu.sheet, mus, pole_tol=0.0)
        chi0 = self.seed.evaluate(lam.sheet, lams[:, None], mu.sheet, mus[None, :])
        total = (gl[:, None] * chi0 / gm[None, :]).mean()
        scale = _max_abs(gl[:, None] * chi0 / gm[None, :])
        if self.rows:
            rho = (gl[:, None] * self._row_vector(lam.sheet, lams)).mean(axis=0)
            kappa = (self._col_vector(mu.sheet, mus) / gm[:, None]).mean(axis=0)
            x = self._solve(kappa[None, :])[0]
            total = total - (rho * x).sum()
        return total, scale

    def regularized(self, lam: SheetedPoint, mu: SheetedPoint, circle_points: int = CIRCLE_POINTS,
                    tol: float = REGULARIZE_TOL, rtol: float = CONVERGENCE_RTOL):
        """Mean of chi over small circles around whichever of lam, mu sits on
        the divisor of g (mean-value property of analytic functions)."""
        sing_l = self.is_singular(lam, tol)
        sing_m = self.is_singular(mu, tol)
        if not (sing_l or sing_m):
            return self.evaluate(lam.sheet, lam.value, mu.sheet, mu.value)
        r_l = self._reg_radius(lam, mu, tol) if sing_l else 0.0
        r_m = self._reg_radius(mu, lam, tol) if sing_m else 0.0
        if lam.sheet == mu.sheet and sing_l and sing_m:
            sep = abs(lam.value - mu.value)
            r_l, r_m = min(r_l, 0.25 * sep), min(r_m, 0.25 * sep)
        if (sing_l and r_l < MIN_RADIUS) or (sing_m and r_m < MIN_RADIUS):
            raise CircleHitsSingularity(f"regularization circle collapsed at {lam!r}, {mu!r}")
        v1, s1 = self._circle_mean(lam, mu, r_l, r_m, circle_points)
        v2, _ = self._circle_mean(lam, mu, 0.5 * r_l, 0.5 * r_m, circle_points)
        v1c, v2c = complex(v1), complex(v2)
        floor = float(s1) * 10.0 ** (-(self.bk.dps or 16) + 2)
        if abs(v1c - v2c) > rtol * max(abs(v1c), abs(v2c)) + floor:
            raise NonConvergent(
                f"circle means disagree ({v1c!r} vs {v2c!r}): not a removable singularity")
        return v1c


def _nearest(z, r):
    if not isinstance(z, np.ndarray):
        return z
    return z.flat[int(np.argmin(np.abs(z - r).astype(float)))]


def _exponent(x) -> int:
    """e with |x| = m 2^e, 0.5 <= m < 1 (0 for x == 0)."""
    if x == 0:
        return 0
    if isinstance(x, float):
        return math.frexp(x)[1]
    import mpmath
    return int(mpmath.floor(mpmath.log(x, 2))) + 1


def _pow2(e: int, dps):
    if dps is None:
        return math.ldexp(1.0, e)
    import mpmath
    return mpmath.mpf(2) ** e


def _stack(parts, like):
    arrs = [np.broadcast_to(p, np.shape(like)) if np.ndim(like) else p for p in parts]
    if np.ndim(like) == 0:
        out = np.empty(len(arrs), dtype=object if not isinstance(arrs[0], complex) else complex)
        for i, a in enumerate(arrs):
            out[i] = a
        return out
    return np.stack(arrs, axis=-1)


def _max_abs(x):
    a = np.abs(x)
    return max(a.flat) if a.dtype == object else float(np.max(a))


@functools.lru_cache(maxsize=256)
def dressed(seed: SeedKernel, g: RationalDivisorFunction, dps=None) -> DressedKernel:
    """Cached constructor (keyed on seed identity and divisor)."""
    return DressedKernel(seed, g, dps=dps)


def dress(seed, g, lam: SheetedPoint, mu: SheetedPoint, dps=None):
    return dressed(seed, g, dps).eval(lam, mu)


def dress_regularized(seed, g, lam: SheetedPoint, mu: SheetedPoint,
                      circle_points: int = CIRCLE_POINTS, dps=None):
    return dressed(seed, g, dps).regularized(lam, mu, circle_points)


def tau(seed, g, dps=None) -> TauValue:
    if g.divisor == ():
        return TauValue(0.0, 1 + 0j)
    return dressed(seed, g, dps).tau()


def as_seed(dk: DressedKernel) -> SeedKernel:
    return dk


def elementary_factor(zero: SheetedPoint, pole: SheetedPoint) -> RationalDivisorFunction:
    """(lam - zero)/(lam - pole), placed on the sheets of the two points."""
    return RationalDivisorFunction(((zero, 1), (pole, -1)), 1.0)


TAU_CONVENTIONS = ("literal", "vacuum-relative", "transposed")


def tau_form_sides(seed, g, nu: SheetedPoint, mu: SheetedPoint, convention: str):
    """Left and right sides of the tau-ratio representation of chi(nu, mu; g).

    literal:          tau(g*(lam-nu)/(lam-mu)) vs chi(nu,mu)(nu-mu) tau(g)
    vacuum-relative:  tau(g f)/tau_vac(g f) vs chi(nu,mu)(nu-mu) tau(g)/tau_vac(g)
                      with f = (lam-mu)/(lam-nu), same sheet only
    transposed:       tau(g f) vs chi(nu,mu) g(mu)/g(nu) tau(g), f = (lam-mu)/(lam-nu)
    """
    chi = complex(dress(seed, g, nu, mu))
    if convention == "literal":
        lhs = tau(seed, g * elementary_factor(nu, mu)).value * _bordered_sign(seed, g * elementary_factor(nu, mu), mu, nu)
        rhs = chi * (nu.value - mu.value) * tau(seed, g).value
    elif convention == "vacuum-relative":
        if nu.sheet != mu.sheet:
            raise ValidationError("vacuum-relative convention needs nu, mu on one sheet")
        from .kernel import vacuum
        vac = vacuum(seed.max_order)
        f = g * elementary_factor(mu, nu)
        lhs = (tau(seed, f) / tau(vac, f)).value
        rhs = chi * (nu.value - mu.value) * (tau(seed, g) / tau(vac, g)).value
    elif convention == "transposed":
        gf = g * elementary_factor(mu, nu)
        lhs = tau(seed, gf).value * _bordered_sign(seed, gf, nu, mu)
        rhs = chi * complex(g(mu) / g(nu)) * tau(seed, g).value
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return lhs, rhs


def _bordered_sign(seed, g, pole: SheetedPoint, zero: SheetedPoint) -> int:
    """Sign that moves row ``pole`` and column ``zero`` of tau(g)'s matrix to the
    front, so the new point borders the old matrix as in the determinant ratio."""
    k = dressed(seed, g)
    i = k.rows.index((pole.sheet, pole.value, 0))
    j = k.cols.index((zero.sheet, zero.value, 0))
    return -1 if (i + j) % 2 else 1


LOCKED_TAU_CONVENTION = "transposed"


def tau_form_check(seed, g, nu: SheetedPoint, mu: SheetedPoint,
                   convention: str = LOCKED_TAU_CONVENTION, tolerance: float = 1e-8) -> ResidualReport:
    lhs, rhs = tau_form_sides(seed, g, nu, mu, convention)
    res = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
    return ResidualReport.from_residuals(
        f"tau_form[{convention}]", [res], tolerance, samples=[(nu, mu)],
        details={"lhs": [lhs.real, lhs.imag], "rhs": [rhs.real, rhs.imag]})


def resolve_tau_convention(seed, g, nu, mu, tolerance=1e-10) -> dict:
    """Residual of each candidate convention (the empirical resolution run)."""
    out = {}
    for c in TAU_CONVENTIONS:
        try:
            out[c] = tau_form_check(seed, g, nu, mu, c, tolerance).max_residual
        except Exception as exc:  # noqa: BLE001 - record why a candidate is inapplicable
            out[c] = repr(exc)
    return out
