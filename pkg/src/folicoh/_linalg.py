"""Exact-rational and floating-point linear algebra kernels.

Matrices are numpy arrays throughout: dtype=object holding
``fractions.Fraction`` entries in rational mode, dtype=float64 in float
mode.  Rational ranks use fraction-free (Bareiss) elimination on
denominator-cleared integer rows; reduced row echelon form with
earliest-index pivoting supplies deterministic kernels and
representatives.  Float ranks count singular values above
``tol * sigma_max``.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm

import numpy as np

_ZERO = Fraction(0)
_ONE = Fraction(1)


def frac_matrix(rows, shape=None):
    """Build an object-dtype matrix of Fractions from nested iterables."""
    if shape is not None and (not rows or not rows[0]):
        out = np.empty(shape, dtype=object)
        out[...] = _ZERO
        return out
    out = np.empty((len(rows), len(rows[0]) if rows else 0), dtype=object)
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            out[i, j] = Fraction(v)
    return out


def zeros_rational(nrows, ncols):
    out = np.empty((nrows, ncols), dtype=object)
    out[...] = _ZERO
    return out


def dot(a, b):
    # np.matmul rejects object dtype; np.dot handles both modes
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch in dot: {a.shape} x {b.shape}")
    if a.size == 0 or b.size == 0:
        if a.dtype == object or b.dtype == object:
            return zeros_rational(a.shape[0], b.shape[1])
        return np.zeros((a.shape[0], b.shape[1]))
    return np.dot(a, b)


def max_abs(a):
    if a.size == 0:
        return 0.0
    if a.dtype == object:
        return max(abs(v) for v in a.flat)
    return float(np.max(np.abs(a)))


def rational_rank(a):
    """Rank by fraction-free Bareiss elimination on integer-cleared rows."""
    m, n = a.shape
    if m == 0 or n == 0:
        return 0
    rows = []
    for i in range(m):
        den = lcm(*(Fraction(v).denominator for v in a[i])) if n else 1
        rows.append([int(Fraction(v) * den) for v in a[i]])
    rank = 0
    prev = 1
    r = 0
    for c in range(n):
        pivot_row = None
        for i in range(r, m):
            if rows[i][c] != 0:
                pivot_row = i
                break
        if pivot_row is None:
            continue
        rows[r], rows[pivot_row] = rows[pivot_row], rows[r]
        piv = rows[r][c]
        for i in range(r + 1, m):
            fi = rows[i][c]
            for j in range(c, n):
                rows[i][j] = (piv * rows[i][j] - fi * rows[r][j]) // prev
        prev = piv
        r += 1
        rank += 1
        if r == m:
            break
    return rank


def rational_rref(a):
    """Reduced row echelon form with earliest-index pivoting.

    Returns (rref matrix, pivot column indices).
    """
    m, n = a.shape
    rr = [[Fraction(v) for v in a[i]] for i in range(m)]
    pivots = []
    r = 0
    for c in range(n):
        pivot_row = None
        for i in range(r, m):
            if rr[i][c] != 0:
                pivot_row = i
                break
        if pivot_row is None:
            continue
        rr[r], rr[pivot_row] = rr[pivot_row], rr[r]
        piv = rr[r][c]
        rr[r] = [v / piv for v in rr[r]]
        for i in range(m):
            if i != r and rr[i][c] != 0:
                f = rr[i][c]
                rr[i] = [vi - f * vr for vi, vr in zip(rr[i], rr[r])]
        pivots.append(c)
        r += 1
        if r == m:
            break
    out = zeros_rational(m, n)
    for i in range(m):
        for j in range(n):
            out[i, j] = rr[i][j]
    return out, pivots


def rational_nullspace(a):
    """Kernel basis (columns), in the canonical RREF free-variable form."""
    m, n = a.shape
    rref, pivots = rational_rref(a)
    free = [j for j in range(n) if j not in pivots]
    basis = zeros_rational(n, len(free))
    for bcol, j in enumerate(free):
        basis[j, bcol] = _ONE
        for r, pc in enumerate(pivots):
            basis[pc, bcol] = -rref[r, j]
    return basis


def rational_pivot_columns(a):
    _, pivots = rational_rref(a)
    return pivots


def rational_solve(a, b):
    """One solution of a x = b, or None when inconsistent."""
    m, n = a.shape
    aug = zeros_rational(m, n + 1)
    aug[:, :n] = a
    for i in range(m):
        aug[i, n] = Fraction(b[i])
    rref, pivots = rational_rref(aug)
    if n in pivots:
        return None
    x = zeros_rational(n, 1)
    for r, pc in enumerate(pivots):
        x[pc, 0] = rref[r, n]
    return x[:, 0]


def float_svd(a):
    if a.size == 0:
        return (np.zeros((a.shape[0], 0)), np.zeros(0), np.zeros((0, a.shape[1])))
    return np.linalg.svd(np.asarray(a, dtype=float), full_matrices=True)


def float_rank(a, tol):
    """(rank, threshold, singular values) with threshold = tol * sigma_max."""
    _, s, _ = float_svd(a)
    if s.size == 0:
        return 0, 0.0, s
    thr = tol * s[0]
    return int(np.sum(s > thr)), thr, s


def tolerance_warnings(s, thr, where):
    """Flag singular values within a factor 10 of the rank threshold."""
    out = []
    if thr > 0:
        shaky = s[(s > thr / 10.0) & (s < thr * 10.0)]
        if shaky.size:
            out.append(
                f"TolUnstable at {where}: {shaky.size} singular value(s) within "
                f"10x of threshold {thr:.3e}"
            )
    return out


def float_nullspace(a, tol):
    u, s, vh = float_svd(a)
    if s.size == 0:
        return np.eye(a.shape[1]), []
    thr = tol * s[0]
    rank = int(np.sum(s > thr))
    warns = tolerance_warnings(s, thr, "nullspace")
    return vh[rank:].T.copy(), warns


def float_image_basis(a, tol):
    u, s, vh = float_svd(a)
    if s.size == 0:
        return np.zeros((a.shape[0], 0)), []
    thr = tol * s[0]
    rank = int(np.sum(s > thr))
    warns = tolerance_warnings(s, thr, "image")
    return u[:, :rank].copy(), warns
