"""Uniform B-spline bases on [-1, 1] for the compactly-supported models.

The knot line is uniform with step h = 2 / (P + 3) where P is the
requested bump count, extended past the endpoints so that both the full
(clamped-equivalent) and interior (compactly supported) families are
available:

    cubic  B3_j, support [tau_j, tau_{j+4}]   full: j in -3..P+2
                                              compact: j in 0..P-1
    quad   B2_i, support [tau_i, tau_{i+3}]   full: i in -2..P+2
                                              compact: i in 0..P

with tau_i = -1 + i*h.  On uniform knots (B3_j)' = (B2_j - B2_{j+1})/h,
so the derivative matrices are exact over the rationals and the
quadratic family is closed under d/dt acting on the cubic family.
Compact-support containment is judged against closed intervals: a
B-spline vanishes to second order at the ends of its support, so
extension by zero stays C^1.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import _linalg as la


def step(P):
    return Fraction(2, P + 3)


def knot(P, i):
    return -1 + i * step(P)


def full_cubic_indices(P):
    return list(range(-3, P + 3))


def compact_cubic_indices(P):
    return list(range(0, P))


def full_quadratic_indices(P):
    return list(range(-2, P + 3))


def compact_quadratic_indices(P):
    return list(range(0, P + 1))


def indices_meeting(P, degree, a, b):
    """B-splines of the given degree whose support meets the open (a, b)."""
    out = []
    for j in (full_cubic_indices(P) if degree == 3 else full_quadratic_indices(P)):
        lo, hi = knot(P, j), knot(P, j + degree + 1)
        if lo < b and hi > a:
            out.append(j)
    return out


def indices_inside(P, degree, a, b):
    """B-splines whose (closed) support is contained in [a, b]."""
    out = []
    for j in (full_cubic_indices(P) if degree == 3 else full_quadratic_indices(P)):
        if knot(P, j) >= a and knot(P, j + degree + 1) <= b:
            out.append(j)
    return out


def derivative_matrix(P, cubic_indices, quadratic_indices, rational=True):
    """d/dt from span{B3_j} to span{B2_i} on the given index lists."""
    h = step(P)
    rows = {i: r for r, i in enumerate(quadratic_indices)}
    mat = (la.zeros_rational(len(quadratic_indices), len(cubic_indices))
           if rational else np.zeros((len(quadratic_indices), len(cubic_indices))))
    inv_h = 1 / h if rational else 1.0 / float(h)
    for c, j in enumerate(cubic_indices):
        if j in rows:
            mat[rows[j], c] = mat[rows[j], c] + inv_h
        if j + 1 in rows:
            mat[rows[j + 1], c] = mat[rows[j + 1], c] - inv_h
    return mat


def bspline_values(P, degree, j, x):
    """Cox-de Boor evaluation of B_{j,degree} on the uniform knots, vectorized."""
    x = np.asarray(x, dtype=float)
    h = float(step(P))
    knots = -1.0 + h * np.arange(j, j + degree + 2)
    # degree-0 indicator seeds; half-open cells, closed at the top knot
    vals = [np.where((x >= knots[r]) & (x < knots[r + 1]), 1.0, 0.0)
            for r in range(degree + 1)]
    vals[-1] = np.where(x == knots[-1], 1.0, vals[-1])
    for d in range(1, degree + 1):
        nxt = []
        for r in range(degree + 1 - d):
            left = (x - knots[r]) / (d * h) * vals[r]
            right = (knots[r + d + 1] - x) / (d * h) * vals[r + 1]
            nxt.append(left + right)
        vals = nxt
    return vals[0]


def evaluate_combination(P, degree, indices, coeffs, x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for c, j in enumerate(indices):
        v = float(coeffs[c])
        if v != 0.0:
            out = out + v * bspline_values(P, degree, j, x)
    return out


def partition_of_unity(indices, rational=True):
    """Coefficient vector of the constant function 1 (uniform B-splines sum to 1)."""
    n = len(indices)
    vec = la.zeros_rational(n, 1)[:, 0] if rational else np.ones(n)
    if rational:
        for c in range(n):
            vec[c] = Fraction(1)
    return vec
