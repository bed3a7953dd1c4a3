"""Seed kernels chi0(lambda, mu): the Cauchy kernel on each sheet plus an
entire finite-rank perturbation.

Every kernel exposes a batched ``evaluate(ls, lam, ms, mu)`` where ``ls``/``ms``
are sheet labels and ``lam``/``mu`` broadcastable arrays (complex or mpmath
object arrays) or scalars.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CircleHitsSingularity, DiagonalProximity, OrderOverflow, ValidationError
from .rational import MERGE_TOL, POLE_TOL, SheetedPoint

MAX_ORDER = 12
CAUCHY_POINTS = 64
MIN_RADIUS = 1e-7


def _falling(n: int, k: int) -> int:
    return math.perm(n, k) if k <= n else 0


def _min_abs(x):
    if isinstance(x, np.ndarray):
        return np.min(np.abs(x)) if x.size else math.inf
    return abs(x)


class SeedKernel:
    """Interface shared by seed and dressed kernels."""

    max_order: int = MAX_ORDER
    # guards coincidence only: clustered divisor points sit ~MERGE_TOL apart
    diagonal_tol: float = 1e-3 * MERGE_TOL

    def evaluate(self, ls: int, lam, ms: int, mu):
        raise NotImplementedError

    def partial(self, a: int, b: int, ls: int, lam, ms: int, mu):
        if a == 0 and b == 0:
            return self.evaluate(ls, lam, ms, mu)
        return cauchy_partial(self, a, b, SheetedPoint(ls, complex(lam)),
                              SheetedPoint(ms, complex(mu)))

    def singular_points(self, sheet: int) -> list:
        """Points on ``sheet`` where the evaluation formula breaks down
        (true singularities apart from the diagonal, or removable ones)."""
        return []

    # point-wise convenience API

    def eval(self, lam: SheetedPoint, mu: SheetedPoint):
        return self.evaluate(lam.sheet, lam.value, mu.sheet, mu.value)

    def mixed_partial(self, a: int, b: int, lam: SheetedPoint, mu: SheetedPoint):
        return self.partial(a, b, lam.sheet, lam.value, mu.sheet, mu.value)

    def _check_diagonal(self, ls, lam, ms, mu):
        if ls == ms and _min_abs(lam - mu) < self.diagonal_tol:
            raise DiagonalProximity(f"lambda and mu coincide on sheet {ls}")

    def _check_order(self, a, b):
        if a < 0 or b < 0:
            raise ValueError("derivative orders must be nonnegative")
        if a + b > self.max_order:
            raise OrderOverflow(f"derivative order {a + b} exceeds cap {self.max_order}")


@dataclass(frozen=True)
class PerturbationTerm:
    """``coeff * lambda**deg_lambda * mu**deg_mu`` for lambda on ``sheet_lambda``
    and mu on ``sheet_mu``."""

    coeff: complex
    sheet_lambda: int = 0
    deg_lambda: int = 0
    sheet_mu: int = 0
    deg_mu: int = 0

    def __post_init__(self):
        if self.deg_lambda < 0 or self.deg_mu < 0:
            raise ValidationError("perturbation degrees must be nonnegative")
        object.__setattr__(self, "coeff", complex(self.coeff))


class FiniteRankKernel(SeedKernel):
    """``weight/(lambda - mu)`` on equal sheets plus polynomial terms.

    ``weight`` other than 1 breaks the diagonal normalization and exists only
    to build negative controls.
    """

    def __init__(self, terms=(), weight: complex = 1.0, max_order: int = MAX_ORDER,
                 kind: str = "rank-perturbed"):
        self.terms = tuple(terms)
        self.weight = weight
        self.max_order = max_order
        self.kind = kind

    def __repr__(self):
        return f"FiniteRankKernel(kind={self.kind!r}, terms={len(self.terms)})"

    def evaluate(self, ls, lam, ms, mu):
        return self.partial(0, 0, ls, lam, ms, mu)

    def partial(self, a, b, ls, lam, ms, mu):
        self._check_order(a, b)
        out = lam * 0 + mu * 0
        if ls == ms:
            self._check_diagonal(ls, lam, ms, mu)
            n = a + b
            out = out + self.weight * ((-1) ** a * math.factorial(n)) * (lam - mu) ** (-(n + 1))
        for t in self.terms:
            if t.sheet_lambda != ls or t.sheet_mu != ms:
                continue
            ca, cb = _falling(t.deg_lambda, a), _falling(t.deg_mu, b)
            if ca == 0 or cb == 0:
                continue
            out = out + (t.coeff * ca * cb) * lam ** (t.deg_lambda - a) * mu ** (t.deg_mu - b)
        return out


def vacuum(max_order: int = MAX_ORDER) -> FiniteRankKernel:
    return FiniteRankKernel((), max_order=max_order, kind="vacuum")


def offset_vacuum(offsets: dict, max_order: int = MAX_ORDER) -> FiniteRankKernel:
    """Vacuum plus constants ``c_ij`` for lambda on sheet i, mu on sheet j (i != j)."""
    terms = []
    for (i, j), c in sorted(offsets.items()):
        if i == j:
            raise ValidationError("offset constants couple distinct sheets only")
        terms.append(PerturbationTerm(c, i, 0, j, 0))
    return FiniteRankKernel(terms, max_order=max_order, kind="offset-vacuum")


def rank_perturbed(terms, max_order: int = MAX_ORDER) -> FiniteRankKernel:
    return FiniteRankKernel(terms, max_order=max_order, kind="rank-perturbed")


def kernel_from_json(d: dict, max_order: int = MAX_ORDER) -> FiniteRankKernel:
    kind = d.get("kind", "vacuum")
    if kind == "vacuum":
        return vacuum(max_order)
    if kind not in ("offset-vacuum", "rank-perturbed"):
        raise ValidationError(f"kernel.kind: unknown kind {kind!r}")
    offsets = {}
    for o in d.get("offsets", []):
        offsets[(int(o["i"]), int(o["j"]))] = complex(o.get("re", 0.0), o.get("im", 0.0))
    if kind == "offset-vacuum":
        return offset_vacuum(offsets, max_order)
    terms = [PerturbationTerm(c, i, 0, j, 0) for (i, j), c in sorted(offsets.items())]
    for p in d.get("perturbation", []):
        terms.append(PerturbationTerm(
            complex(p.get("coeff_re", 0.0), p.get("coeff_im", 0.0)),
            int(p.get("sheet_lambda", p.get("sheet_λ", 0))), int(p.get("deg_lambda", p.get("deg_λ", 0))),
            int(p.get("sheet_mu", p.get("sheet_μ", 0))), int(p.get("deg_mu", p.get("deg_μ", 0))),
        ))
    return rank_perturbed(terms, max_order)


def kernel_to_json(k: FiniteRankKernel) -> dict:
    if k.kind == "vacuum" and not k.terms:
        return {"kind": "vacuum"}
    return {
        "kind": "rank-perturbed",
        "perturbation": [
            {"coeff_re": t.coeff.real, "coeff_im": t.coeff.imag,
             "sheet_lambda": t.sheet_lambda, "deg_lambda": t.deg_lambda,
             "sheet_mu": t.sheet_mu, "deg_mu": t.deg_mu}
            for t in k.terms
        ],
    }


def _radius(center: complex, others, cap: float) -> float:
    r = cap
    for s in others:
        d = abs(s - center)
        if d > POLE_TOL:
            r = min(r, 0.5 * d)
    return r


def cauchy_radii(kernel, lam: SheetedPoint, mu: SheetedPoint, cap: float = 1.0):
    """Circle radii for Cauchy differentiation: half the distance to the nearest
    singular point, with the two circles kept apart on a shared sheet."""
    r_l = _radius(lam.value, kernel.singular_points(lam.sheet), cap)
    r_m = _radius(mu.value, kernel.singular_points(mu.sheet), cap)
    if lam.sheet == mu.sheet:
        sep = abs(lam.value - mu.value)
        r_l = min(r_l, 0.25 * sep)
        r_m = min(r_m, 0.25 * sep)
    return r_l, r_m


def cauchy_partial(kernel, a: int, b: int, lam: SheetedPoint, mu: SheetedPoint,
                   radius=None, points: int = CAUCHY_POINTS):
    """Mixed partial by the iterated Cauchy integral formula on two circles
    (periodic trapezoid rule). ``radius`` may be a float or a pair."""
    if radius is None:
        r_l, r_m = cauchy_radii(kernel, lam, mu)
    elif np.ndim(radius):
        r_l, r_m = radius
    else:
        r_l = r_m = float(radius)
    if min(r_l, r_m) < MIN_RADIUS:
        raise CircleHitsSingularity(
            f"Cauchy circle radius {min(r_l, r_m):.3g} below minimum at {lam!r}, {mu!r}")
    theta = 2 * np.pi * np.arange(points) / points
    e = np.exp(1j * theta)
    if a == 0:
        xi, wl = np.array([lam.value]), np.ones(1)
    else:
        xi, wl = lam.value + r_l * e, np.exp(-1j * a * theta) / points
    if b == 0:
        eta, wm = np.array([mu.value]), np.ones(1)
    else:
        eta, wm = mu.value + r_m * e, np.exp(-1j * b * theta) / points
    vals = np.asarray(kernel.evaluate(lam.sheet, xi[:, None], mu.sheet, eta[None, :]), dtype=complex)
    s = wl @ vals @ wm
    return complex(s * math.factorial(a) * math.factorial(b) / (r_l ** a * r_m ** b))
