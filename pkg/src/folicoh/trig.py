"""Real trigonometric polynomial arithmetic on the truncated mode window.

Basis ordering for the window of order N (dimension 2N+1):

    [1, cos(t), sin(t), cos(2t), sin(2t), ..., cos(Nt), sin(Nt)]

in the angular variable t of period 2*pi.  With this convention the
derivative matrix has integer entries, which keeps the unipotent and
isometric flow complexes exact over the rationals.  Products use the
elementary product-to-sum identities, so multiplication matrices stay
rational as well; contributions beyond the window are returned as
overflow records instead of silently projected.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import _linalg as la

HALF = Fraction(1, 2)


def window_dim(order):
    return 2 * order + 1


def labels(order, var="t"):
    out = ["1"]
    for m in range(1, order + 1):
        arg = var if m == 1 else f"{m}{var}"
        out.append(f"cos({arg})")
        out.append(f"sin({arg})")
    return out


def cos_index(m):
    return 0 if m == 0 else 2 * m - 1


def sin_index(m):
    if m == 0:
        raise ValueError("sin(0) is not a basis element")
    return 2 * m


def constant(order, value=1, rational=True):
    vec = la.zeros_rational(window_dim(order), 1)[:, 0] if rational else np.zeros(window_dim(order))
    vec[0] = Fraction(value) if rational else float(value)
    return vec


def derivative_matrix(order, rational=True):
    """d/dt on the window: cos(mt) -> -m sin(mt), sin(mt) -> m cos(mt)."""
    n = window_dim(order)
    d = la.zeros_rational(n, n) if rational else np.zeros((n, n))
    for m in range(1, order + 1):
        d[sin_index(m), cos_index(m)] = Fraction(-m) if rational else float(-m)
        d[cos_index(m), sin_index(m)] = Fraction(m) if rational else float(m)
    return d


def _mode_terms(kind_a, m, kind_b, k):
    """Expand basis(m) * basis(k) into [(kind, mode, weight)] with weight in {1/2, -1/2, 1}.

    kind 'c' is cos, 's' is sin; mode 0 with kind 'c' is the constant.
    """
    terms = []
    if kind_a == "c" and kind_b == "c":
        terms.append(("c", m + k, HALF))
        terms.append(("c", abs(m - k), HALF))
    elif kind_a == "s" and kind_b == "s":
        terms.append(("c", abs(m - k), HALF))
        terms.append(("c", m + k, -HALF))
    elif kind_a == "c" and kind_b == "s":
        # cos A sin B = (sin(A+B) - sin(A-B)) / 2
        terms.append(("s", m + k, HALF))
        if m != k:
            terms.append(("s", abs(m - k), -HALF if m > k else HALF))
    else:
        # sin A cos B = (sin(A+B) + sin(A-B)) / 2
        terms.append(("s", m + k, HALF))
        if m != k:
            terms.append(("s", abs(m - k), HALF if m > k else -HALF))
    # collapse degenerate sin(0) terms
    return [(kind, mode, w) for kind, mode, w in terms if not (kind == "s" and mode == 0)]


def _basis_kind_mode(idx):
    if idx == 0:
        return "c", 0
    m = (idx + 1) // 2
    return ("c", m) if idx % 2 == 1 else ("s", m)


def _index_of(kind, mode):
    if mode == 0:
        return 0 if kind == "c" else None
    return cos_index(mode) if kind == "c" else sin_index(mode)


def multiplication_matrix(coeffs, order, rational=True):
    """Matrix of multiplication by the trig polynomial ``coeffs`` on the window.

    Returns (matrix, overflow) where overflow lists
    (column_index, kind, mode, weight) contributions that would land
    beyond mode ``order``.
    """
    n = window_dim(order)
    mat = la.zeros_rational(n, n) if rational else np.zeros((n, n))
    overflow = []
    for a_idx in range(min(len(coeffs), n)):
        a_val = coeffs[a_idx]
        if a_val == 0:
            continue
        kind_a, m = _basis_kind_mode(a_idx)
        for b_idx in range(n):
            kind_b, k = _basis_kind_mode(b_idx)
            for kind, mode, w in _mode_terms(kind_a, m, kind_b, k):
                weight = (w if rational else float(w)) * a_val
                if mode > order:
                    overflow.append((b_idx, kind, mode, weight))
                    continue
                row = _index_of(kind, mode)
                mat[row, b_idx] = mat[row, b_idx] + weight
    return mat, overflow


def evaluate(coeffs, theta):
    """Evaluate the trig polynomial at angular points ``theta`` (array)."""
    theta = np.asarray(theta, dtype=float)
    vals = np.full_like(theta, float(coeffs[0]))
    order = (len(coeffs) - 1) // 2
    for m in range(1, order + 1):
        vals = vals + float(coeffs[cos_index(m)]) * np.cos(m * theta)
        vals = vals + float(coeffs[sin_index(m)]) * np.sin(m * theta)
    return vals


def project(fn, order, n_samples=None):
    """Project a 2*pi-periodic callable onto the window by FFT.

    Returns (coeffs, relative l2 tail) where the tail measures the mass
    of the sampled spectrum beyond the window.
    """
    if n_samples is None:
        n_samples = max(256, 8 * order)
    n_samples = int(2 ** np.ceil(np.log2(n_samples)))
    theta = 2.0 * np.pi * np.arange(n_samples) / n_samples
    sample = np.asarray(fn(theta), dtype=float)
    spec = np.fft.rfft(sample) / n_samples
    coeffs = np.zeros(window_dim(order))
    coeffs[0] = spec[0].real
    for m in range(1, order + 1):
        coeffs[cos_index(m)] = 2.0 * spec[m].real
        coeffs[sin_index(m)] = -2.0 * spec[m].imag
    total = np.sqrt(np.abs(spec[0]) ** 2 + 2.0 * np.sum(np.abs(spec[1:]) ** 2))
    tail = np.sqrt(2.0 * np.sum(np.abs(spec[order + 1:]) ** 2))
    rel_tail = float(tail / total) if total > 0 else 0.0
    return coeffs, rel_tail
