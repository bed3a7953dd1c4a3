"""Scalar/array backends: numpy complex128, or mpmath at a fixed precision.

The mpmath backend stores numbers in numpy object arrays so the kernel and
rational-function code (plain ``+ - * / **``) runs unchanged.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.linalg as sla

import mpmath


class DoubleBackend:
    dps = None

    def array(self, x):
        return np.asarray(x, dtype=complex)

    def scalar(self, x):
        return complex(x)

    def circle(self, center, radius, m):
        k = np.arange(m)
        return center + radius * np.exp(2j * np.pi * k / m)

    def factor(self, a):
        return sla.lu_factor(a, check_finite=True)

    def solve(self, lu, b):
        return sla.lu_solve(lu, b)

    def logdet(self, lu):
        """(log|det|, phase) from an LU factorization."""
        lu_mat, piv = lu
        diag = np.diag(lu_mat)
        sign = (-1) ** int(np.sum(piv != np.arange(len(piv))))
        phase = sign * np.prod(diag / np.abs(diag))
        return float(np.sum(np.log(np.abs(diag)))), complex(phase)

    def rcond(self, a):
        if a.size == 0:
            return 1.0
        # equilibrate rows and columns; the determinant ratio is invariant under this
        r = np.max(np.abs(a), axis=1)
        r[r == 0] = 1.0
        b = a / r[:, None]
        c = np.max(np.abs(b), axis=0)
        c[c == 0] = 1.0
        b = b / c[None, :]
        try:
            return float(1.0 / abs(np.linalg.cond(b, 1)))
        except np.linalg.LinAlgError:
            return 0.0

    def to_complex(self, x):
        return np.asarray(x, dtype=complex)


class MPBackend:
    def __init__(self, dps: int):
        self.dps = int(dps)
        self.ctx = mpmath.MPContext()
        self.ctx.dps = self.dps

    def array(self, x):
        arr = np.asarray(x, dtype=object)
        out = np.empty(arr.shape, dtype=object)
        for idx, v in np.ndenumerate(arr):
            out[idx] = self.ctx.mpc(v)
        return out

    def scalar(self, x):
        return self.ctx.mpc(x)

    def circle(self, center, radius, m):
        c = self.ctx.mpc(center)
        r = self.ctx.mpf(radius)
        out = np.empty(m, dtype=object)
        for k in range(m):
            out[k] = c + r * self.ctx.expjpi(self.ctx.mpf(2 * k) / m)
        return out

    def factor(self, a):
        mat = self.ctx.matrix(a.tolist())
        if not mat.rows:
            return mat, []
        # LU_decomp works in place when handed a copy; keep (LU, perm) ourselves
        return self.ctx.LU_decomp(mat.copy())

    def solve(self, lu, b):
        lu_mat, perm = lu
        b = np.asarray(b, dtype=object)
        vec = b.ndim == 1
        cols = b.reshape(b.shape[0], -1)
        out = np.empty(cols.shape, dtype=object)
        for j in range(cols.shape[1]):
            y = self.ctx.L_solve(lu_mat, self.ctx.matrix(list(cols[:, j])), perm)
            x = self.ctx.U_solve(lu_mat, y)
            for i in range(cols.shape[0]):
                out[i, j] = x[i]
        return out[:, 0] if vec else out.reshape(b.shape)

    def logdet(self, lu):
        lu_mat, perm = lu
        n = lu_mat.rows
        if not n:
            return 0.0, 1 + 0j
        d = self.ctx.mpc(1)
        for i in range(n):
            d *= lu_mat[i, i]
        if sum(1 for i, k in enumerate(perm) if k != i) % 2:
            d = -d
        if d == 0:
            return -math.inf, 1 + 0j
        return float(self.ctx.log(abs(d))), complex(d / abs(d))

    def rcond(self, a):
        if a.size == 0:
            return 1.0
        mat = self.ctx.matrix(a.tolist())
        n = mat.rows
        for i in range(n):
            s = max(abs(mat[i, j]) for j in range(n)) or 1
            for j in range(n):
                mat[i, j] /= s
        for j in range(n):
            s = max(abs(mat[i, j]) for i in range(n)) or 1
            for i in range(n):
                mat[i, j] /= s
        try:
            inv = self.ctx.inverse(mat)
        except ZeroDivisionError:
            return 0.0
        return float(1 / (self.ctx.mnorm(mat, 1) * self.ctx.mnorm(inv, 1)))

    def to_complex(self, x):
        arr = np.asarray(x, dtype=object)
        return np.vectorize(complex, otypes=[complex])(arr) if arr.size else arr.astype(complex)


DOUBLE = DoubleBackend()


def backend(dps=None):
    return DOUBLE if dps is None else MPBackend(dps)
