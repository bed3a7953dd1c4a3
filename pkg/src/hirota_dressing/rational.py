"""Meromorphic functions on a disjoint union of complex planes ("sheets"),
stored through their divisor of zeros and poles.

A function is ``scale * prod (z - root)**mult`` on each sheet, where the
product runs over the divisor entries living on that sheet; a sheet without
entries sees the bare constant ``scale``.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NotSimpleRoot, PoleProximity, ValidationError

MERGE_TOL = 1e-9
POLE_TOL = 1e-8


@dataclass(frozen=True, order=True)
class SheetedPoint:
    sheet: int
    value: complex

    def __post_init__(self):
        if self.sheet < 0:
            raise ValidationError(f"sheet label must be >= 0, got {self.sheet}")
        v = complex(self.value)
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise ValidationError(f"point {v!r} is not finite")
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "sheet", int(self.sheet))

    def shifted(self, dz) -> "SheetedPoint":
        return SheetedPoint(self.sheet, self.value + dz)

    def to_json(self) -> dict:
        return {"sheet": self.sheet, "re": self.value.real, "im": self.value.imag}

    @classmethod
    def from_json(cls, d: dict) -> "SheetedPoint":
        return cls(int(d.get("sheet", 0)), complex(d.get("re", 0.0), d.get("im", 0.0)))


def point(value, sheet: int = 0) -> SheetedPoint:
    return value if isinstance(value, SheetedPoint) else SheetedPoint(sheet, value)


Entry = tuple  # (SheetedPoint, int)


def canonicalize(entries: Iterable[Entry], tol: float = MERGE_TOL) -> tuple:
    """Merge entries closer than ``tol`` (single linkage, per sheet).

    A merged cluster sits at the member with the largest ``|mult|`` and
    carries the summed multiplicity; clusters summing to zero vanish.
    """
    items = sorted(
        ((p, int(m)) for p, m in entries if int(m) != 0),
        key=lambda e: (e[0].sheet, e[0].value.real, e[0].value.imag, e[1]),
    )
    n = len(items)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        pi = items[i][0]
        for j in range(i + 1, n):
            pj = items[j][0]
            if pj.sheet != pi.sheet or pj.value.real - pi.value.real > tol:
                break
            if abs(pj.value - pi.value) <= tol:
                parent[find(j)] = find(i)

    clusters: dict[int, list] = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(items[i])
    out = []
    for members in clusters.values():
        total = sum(m for _, m in members)
        if total == 0:
            continue
        rep = max(members, key=lambda e: abs(e[1]))[0]
        out.append((rep, total))
    out.sort(key=lambda e: (e[0].sheet, e[0].value.real, e[0].value.imag))
    return tuple(out)


@dataclass(frozen=True)
class RationalDivisorFunction:
    divisor: tuple = ()
    scale: complex = 1.0

    def __post_init__(self):
        s = complex(self.scale)
        if s == 0:
            raise ValidationError("scale must be nonzero")
        object.__setattr__(self, "scale", s)
        object.__setattr__(self, "divisor", canonicalize(self.divisor))

    # construction -----------------------------------------------------

    @classmethod
    def identity(cls) -> "RationalDivisorFunction":
        return cls((), 1.0)

    @classmethod
    def from_roots(cls, zeros: Sequence = (), poles: Sequence = (), sheet: int = 0,
                   scale: complex = 1.0) -> "RationalDivisorFunction":
        """Zeros and poles given as values (or ``(value, mult)`` pairs) on one sheet."""
        entries = []
        for roots, sign in ((zeros, 1), (poles, -1)):
            for r in roots:
                if isinstance(r, tuple):
                    value, mult = r
                else:
                    value, mult = r, 1
                entries.append((point(value, sheet), sign * int(mult)))
        return cls(tuple(entries), scale)

    # structure --------------------------------------------------------

    @property
    def balance(self) -> int:
        return sum(m for _, m in self.divisor)

    def sheet_balance(self) -> dict:
        out: dict[int, int] = {}
        for p, m in self.divisor:
            out[p.sheet] = out.get(p.sheet, 0) + m
        return out

    @property
    def zeros(self) -> list:
        return [(p, m) for p, m in self.divisor if m > 0]

    @property
    def poles(self) -> list:
        return [(p, -m) for p, m in self.divisor if m < 0]

    @property
    def sheets(self) -> set:
        return {p.sheet for p, _ in self.divisor}

    def entries_on(self, sheet: int) -> list:
        return [(p.value, m) for p, m in self.divisor if p.sheet == sheet]

    def is_identity(self) -> bool:
        return not self.divisor and self.scale == 1

    def degree(self) -> int:
        return sum(abs(m) for _, m in self.divisor)

    # evaluation -------------------------------------------------------

    def values(self, sheet: int, z, pole_tol: float = POLE_TOL):
        """Evaluate on ``sheet`` at ``z`` (scalar, ndarray, or mpmath number)."""
        out = self.scale
        for root, m in self.entries_on(sheet):
            d = z - root
            if m < 0:
                dist = np.min(np.abs(d)) if isinstance(d, np.ndarray) else abs(d)
                if dist < pole_tol:
                    raise PoleProximity(SheetedPoint(sheet, complex(_first(z))),
                                        SheetedPoint(sheet, root), float(dist))
            out = out * d ** m
        if isinstance(z, np.ndarray) and not isinstance(out, np.ndarray):
            out = np.full(z.shape, out, dtype=z.dtype)
        return out

    def __call__(self, p: SheetedPoint):
        return self.values(p.sheet, p.value)

    # group operations -------------------------------------------------

    def __mul__(self, other: "RationalDivisorFunction") -> "RationalDivisorFunction":
        if not isinstance(other, RationalDivisorFunction):
            return NotImplemented
        return RationalDivisorFunction(self.divisor + other.divisor, self.scale * other.scale)

    def inverse(self) -> "RationalDivisorFunction":
        return RationalDivisorFunction(tuple((p, -m) for p, m in self.divisor), 1 / self.scale)

    def __pow__(self, k: int) -> "RationalDivisorFunction":
        k = int(k)
        if k == 0:
            return RationalDivisorFunction.identity()
        return RationalDivisorFunction(tuple((p, m * k) for p, m in self.divisor),
                                       self.scale ** k)

    def rescaled(self, c: complex) -> "RationalDivisorFunction":
        return RationalDivisorFunction(self.divisor, self.scale * c)

    def derivative_at_simple_root(self, p: SheetedPoint) -> complex:
        """g'(p) at a simple zero p: the remaining factors evaluated at p."""
        hit = [(q, m) for q, m in self.divisor
               if q.sheet == p.sheet and abs(q.value - p.value) <= MERGE_TOL]
        if not hit or hit[0][1] <= 0:
            raise NotSimpleRoot(f"{p!r} is not a zero of g")
        if hit[0][1] != 1:
            raise NotSimpleRoot(f"{p!r} is a zero of multiplicity {hit[0][1]}")
        rest = RationalDivisorFunction(tuple(e for e in self.divisor if e[0] != hit[0][0]),
                                       self.scale)
        return rest.values(p.sheet, p.value)

    # serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "divisor": [dict(p.to_json(), mult=m) for p, m in self.divisor],
            "scale": {"re": self.scale.real, "im": self.scale.imag},
        }

    @classmethod
    def from_json(cls, d: dict) -> "RationalDivisorFunction":
        entries = tuple((SheetedPoint.from_json(e), int(e["mult"])) for e in d.get("divisor", []))
        sc = d.get("scale", {"re": 1.0, "im": 0.0})
        return cls(entries, complex(sc.get("re", 1.0), sc.get("im", 0.0)))


def evaluate(g: RationalDivisorFunction, p: SheetedPoint):
    return g(p)


def multiply(g1, g2):
    return g1 * g2


def inverse(g):
    return g.inverse()


def power(g, k: int):
    return g ** k


def log_derivative_at_simple_root(g, p):
    return g.derivative_at_simple_root(p)


def warn_sheet_imbalance(g: RationalDivisorFunction) -> None:
    bad = {s: b for s, b in g.sheet_balance().items() if b != 0}
    if bad and g.balance == 0:
        warnings.warn(f"zero/pole balance holds globally but not per sheet: {bad}",
                      stacklevel=3)


def one_plus_multiple(K: RationalDivisorFunction, c: complex, sheet: int) -> RationalDivisorFunction:
    """The rational function ``1 + c*K`` on ``sheet``, equal to 1 on every other sheet.

    ``K`` must vanish at infinity on ``sheet`` (more poles than zeros there).
    A ``K`` without divisor entries is treated as the constant ``K.scale``.
    """
    c = complex(c)
    if c == 0:
        return RationalDivisorFunction.identity()
    entries = K.entries_on(sheet)
    if not entries:
        if K.divisor:
            return RationalDivisorFunction.identity()
        return RationalDivisorFunction((), 1 + c * K.scale)
    zeros = [(r, m) for r, m in entries if m > 0]
    poles = [(r, -m) for r, m in entries if m < 0]
    nz, npol = sum(m for _, m in zeros), sum(m for _, m in poles)
    if nz >= npol:
        raise ValidationError("K must vanish at infinity on its home sheet")
    cs = c * K.scale
    if not zeros and len(poles) == 1:
        # (z - p)^k + cs = 0
        p, k = poles[0]
        if k == 1:
            return RationalDivisorFunction(((SheetedPoint(sheet, p - cs), 1), (SheetedPoint(sheet, p), -1)), 1.0)
        base = cmath.exp(cmath.log(-cs) / k)
        roots = [p + base * cmath.exp(2j * math.pi * j / k) for j in range(k)]
    else:
        num = np.poly([r for r, m in poles for _ in range(m)]).astype(complex)
        add = cs * np.poly([r for r, m in zeros for _ in range(m)])
        num[len(num) - len(add):] += add
        roots = list(np.roots(num))
    new = [(SheetedPoint(sheet, r), 1) for r in roots]
    new += [(SheetedPoint(sheet, r), -m) for r, m in poles]
    return RationalDivisorFunction(tuple(new), 1.0)


def _first(z):
    if isinstance(z, np.ndarray):
        return z.flat[0]
    return z
