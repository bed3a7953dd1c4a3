"""Reference values for the test suite, computed without the package.

Run ``python tests/oracles/compute_oracles.py``; the printed numbers are the
ones frozen in the tests. Uses sympy for exact algebra and mpmath products.
"""
import mpmath
import sympy as sp

lam, mu = sp.symbols("lam mu")


def vacuum(a, b):
    return 1 / (a - b)


def dressed(chi0, g, poles, zeros, a, b):
    """Determinant ratio with simple divisor, built entry by entry."""
    n = len(poles)
    big = sp.Matrix(n + 1, n + 1, lambda i, j: chi0(([a] + poles)[i], ([b] + zeros)[j]))
    small = sp.Matrix(n, n, lambda i, j: chi0(poles[i], zeros[j]))
    return g(a) / g(b) * big.det() / small.det()


def vacuum_fixed_point():
    z1, z2, w1, w2 = sp.symbols("z1 z2 w1 w2")
    out = []
    for poles, zeros in (([z1], [w1]), ([z1, z2], [w1, w2])):
        def g(x, poles=poles, zeros=zeros):
            return sp.prod([x - w for w in zeros]) / sp.prod([x - z for z in poles])
        expr = dressed(vacuum, g, poles, zeros, lam, mu)
        out.append(sp.simplify(expr - 1 / (lam - mu)))
    return out


def two_by_two():
    def chi0(a, b):
        return vacuum(a, b) + sp.Rational(1, 5) * a * b

    def g(x):
        return (x - 1) / (x - 2)
    return sp.nsimplify(dressed(chi0, g, [sp.Integer(2)], [sp.Integer(1)], sp.Integer(3), sp.Integer(0)))


def kp_wave_function(lam_value):
    """psi(lam) = g^{-1}(lam) chi(lam, 0; g) for g = lam/(lam+1) (one KP step),
    seed 1/(lam-mu) + lam*mu/5 + 3/10, as the limit mu -> 0 of the ratio."""
    def chi0(a, b):
        return vacuum(a, b) + sp.Rational(1, 5) * a * b + sp.Rational(3, 10)

    def g(x):
        return x / (x + 1)
    chi = dressed(chi0, g, [sp.Integer(-1)], [sp.Integer(0)], lam, mu)
    psi = sp.limit(sp.simplify(chi / g(lam)), mu, 0)
    return complex(sp.N(psi.subs(lam, lam_value), 30))


def q_exponential_scalar():
    # prod_{n>=0} (1 + q^n (q-1) x)^{-1} at q = 1/2, x = 1
    with mpmath.workdps(40):
        inf = mpmath.nprod(lambda n: 1 / (1 - mpmath.mpf(2) ** -(n + 1)), [0, mpmath.inf])
        first40 = mpmath.fprod(1 / (1 - mpmath.mpf(2) ** -(n + 1)) for n in range(40))
    return inf, first40


def tau_literal_identity():
    # identity g, vacuum, nu = 1, mu = 0: tau((lam-nu)/(lam-mu)) = chi0(mu, nu) = -1,
    # against chi(nu, mu)(nu - mu) tau(1) = 1
    lhs, rhs = vacuum(0, 1), vacuum(1, 0) * (1 - 0)
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs))


if __name__ == "__main__":
    print("vacuum fixed point residues:", vacuum_fixed_point())
    print("2x2 hand ratio:", two_by_two())
    for z in (sp.Rational(7, 10) + sp.Rational(2, 5) * sp.I, -sp.Rational(1, 2) + sp.Rational(9, 10) * sp.I):
        print("kp psi at", z, ":", repr(kp_wave_function(z)))
    inf, first40 = q_exponential_scalar()
    print("q exponential: infinite", mpmath.nstr(inf, 20), "first 40 factors", mpmath.nstr(first40, 20))
    print("literal tau residual:", tau_literal_identity())
