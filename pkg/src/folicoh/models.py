"""Truncated basic complexes for the catalogue of model foliations.

Coordinate conventions, fixed once here:

* Flow models use an angular transverse variable t of period 2*pi
  (basis functions cos(mt), sin(mt)), which keeps derivative matrices
  integer-valued and the unipotent/isometric complexes exact over the
  rationals.  The hyperbolic suspension stores the stretch factor
  lambda (leading eigenvalue of A, |trace A| > 2) and its logarithm;
  the solvability constant entering its differential is
  L = log(lambda) / (2*pi) in angular units, i.e. log(lambda) per
  period.

* Hyperbolic suspension (CarriereFlow): degree-1 basis is f*dt, g*bt
  with bt the invariant transverse coform scaled by lambda^(-t/2pi);
  the coordinate orientation gives d(g*bt) = (g' - L g) dt^bt.  The
  admissible sign pair (differential sign, tautness-form sign) is
  pinned by a one-time numerical oracle: untwisted top cohomology must
  vanish while the twisted top cohomology is one-dimensional.  Both
  outcomes hold exactly for the orientation above with kappa = -L dt.

* Unipotent suspension (GhysFlow): invariant forms have x-only
  coefficients; one-forms f(x)dx are closed, so the top degree carries
  the full 2N+1 coefficient space at truncation N.

* KroneckerFlow: a mode e^(i(px+qy)) survives invariance filtering iff
  p + q*slope = 0; irrational slopes keep only the constants.  The
  transverse coform label "s*dx-dy" abbreviates slope*dx - dy.

* SphereIsometricFlow: the regular stratum is a cylinder over the odd
  sphere with transverse variable r in [-1, 1]; the truncated basic
  model uses polynomial coefficients in r against powers of the Euler
  two-form e.  Smooth extension over the two poles is encoded as
  linear boundary conditions: coefficients of dr-free terms with a
  positive Euler power vanish at r = +-1 (spanned by (1-r^2) r^j),
  while dr-carrying coefficients live one polynomial degree lower.

* ProductCerf: base flow times the line, with C^1 compactly supported
  B-spline coefficients in the line variable; quadratic splines absorb
  derivatives of the cubic family exactly.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Mapping

import numpy as np
from scipy.integrate import quad

from . import _linalg as la
from . import splines, trig
from .chaincore import (SCALAR_FLOAT, SCALAR_RATIONAL, GradedComplex,
                        cohomology, validate_complex)
from .errors import BadModel, LambdaOne, Unsupported, UnsupportedTruncation

CARRIERE = "CarriereFlow"
GHYS = "GhysFlow"
KRONECKER = "KroneckerFlow"
SPHERE = "SphereIsometricFlow"
PRODUCT_CERF = "ProductCerf"

FLOW_KINDS = (CARRIERE, GHYS, KRONECKER)
CLOSED_KINDS = (CARRIERE, GHYS, KRONECKER)   # closed total space: H_c = H

#: tolerance used when probing a slope for rational resonance
SLOPE_RESONANCE_TOL = 1e-9


# --------------------------------------------------------------------------
# model descriptors
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FoliationModel:
    kind: str
    params: Mapping[str, Any]
    truncation: int

    def __post_init__(self):
        _validate(self)

    @property
    def codim(self):
        if self.kind in (CARRIERE, GHYS):
            return 2
        if self.kind == KRONECKER:
            return 1
        if self.kind == SPHERE:
            return 2 * self.params["d"] + 1
        return self.params["base"].codim + 1

    def descriptor(self):
        """JSON-ready echo of the model."""
        params = dict(self.params)
        if self.kind == PRODUCT_CERF:
            params["base"] = self.params["base"].descriptor()
        return {"kind": self.kind, "params": params, "truncation": self.truncation}

    def with_truncation(self, n):
        return FoliationModel(self.kind, self.params, n)


def _validate(m: FoliationModel):
    if not isinstance(m.truncation, int) or m.truncation < 1:
        raise UnsupportedTruncation(f"truncation must be a positive integer, got {m.truncation}")
    if m.kind == CARRIERE:
        a = m.params.get("A")
        if a is None:
            raise BadModel("CarriereFlow needs a 2x2 integer matrix A")
        rows = [list(r) for r in a]
        if len(rows) != 2 or any(len(r) != 2 for r in rows):
            raise BadModel("A must be 2x2")
        if any(int(v) != v for r in rows for v in r):
            raise BadModel("A must have integer entries")
        det = rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
        if det != 1:
            raise BadModel(f"A must lie in SL2(Z), det = {det}")
        if abs(rows[0][0] + rows[1][1]) <= 2:
            raise BadModel("A must be hyperbolic: |trace| > 2")
    elif m.kind == GHYS:
        pass
    elif m.kind == KRONECKER:
        slope = m.params.get("slope")
        if slope is None:
            raise BadModel("KroneckerFlow needs a slope")
        if _slope_resonant(slope, max(64, m.truncation)):
            raise BadModel(
                f"slope {slope} is rationally resonant within the mode window; "
                "the Kronecker model requires an irrational slope"
            )
    elif m.kind == SPHERE:
        d = m.params.get("d")
        weights = m.params.get("weights")
        if not isinstance(d, int) or d < 1:
            raise BadModel("sphere model needs a positive integer d")
        if weights is None or len(list(weights)) != d + 1:
            raise BadModel("sphere model needs d+1 integer weights")
        if all(int(w) == 0 for w in weights):
            raise BadModel("sphere weights must not all vanish")
        if m.truncation < 2:
            raise UnsupportedTruncation("sphere model needs truncation >= 2")
    elif m.kind == PRODUCT_CERF:
        base = m.params.get("base")
        if not isinstance(base, FoliationModel) or base.kind not in CLOSED_KINDS:
            raise BadModel("ProductCerf base must be one of the closed flow models")
        bumps = m.params.get("bump_count")
        if not isinstance(bumps, int) or bumps < 3:
            raise BadModel("ProductCerf needs bump_count >= 3")
    else:
        raise BadModel(f"unknown model kind {m.kind!r}")


def carriere_flow(a, truncation):
    return FoliationModel(CARRIERE, {"A": tuple(tuple(int(v) for v in row) for row in a)},
                          truncation)


def ghys_flow(truncation):
    return FoliationModel(GHYS, {}, truncation)


def kronecker_flow(slope, truncation):
    return FoliationModel(KRONECKER, {"slope": float(slope)}, truncation)


def sphere_flow(d, weights, truncation):
    return FoliationModel(SPHERE, {"d": int(d), "weights": tuple(int(w) for w in weights)},
                          truncation)


def product_cerf(base, bump_count, truncation=None):
    return FoliationModel(PRODUCT_CERF,
                          {"base": base, "bump_count": int(bump_count)},
                          base.truncation if truncation is None else truncation)


def from_descriptor(desc):
    kind = desc.get("kind")
    params = dict(desc.get("params", {}))
    trunc = desc.get("truncation")
    if kind == PRODUCT_CERF and isinstance(params.get("base"), dict):
        params["base"] = _freeze_model(from_descriptor(params["base"]))
    if kind == CARRIERE and "A" in params:
        params["A"] = tuple(tuple(int(v) for v in row) for row in params["A"])
    if kind == SPHERE and "weights" in params:
        params["weights"] = tuple(int(w) for w in params["weights"])
    return FoliationModel(kind, params, trunc)


def _freeze_model(m):
    return m


def _slope_resonant(slope, bound):
    slope = float(slope)
    for q in range(1, bound + 1):
        p = round(-q * slope)
        if abs(p + q * slope) < SLOPE_RESONANCE_TOL:
            return True
    return False


def carriere_lambda(a):
    """Leading eigenvalue of A with its characteristic-polynomial residual.

    lambda = (|tr| + sqrt(tr^2 - 4)) / 2 held in extended precision; the
    defining polynomial x^2 - |tr| x + 1 is kept for residual checks.
    """
    tr = abs(int(a[0][0]) + int(a[1][1]))
    lam = (np.longdouble(tr) + np.sqrt(np.longdouble(tr) ** 2 - 4)) / 2
    residual = float(abs(lam * lam - tr * lam + 1))
    return lam, (1, -tr, 1), residual


# --------------------------------------------------------------------------
# wedge tables
# --------------------------------------------------------------------------

class WedgeTable:
    """Wedge-by-a-1-form action on a complex, with fail-loud overflow.

    ``one_form_dim`` is the coefficient dimension of admissible twisting
    forms (the degree-1 space of the model's basic complex);
    ``kappa_d1`` is the differential those coefficients must be closed
    under.  ``matrices`` returns one wedge matrix per degree plus the
    list of overflow records (products leaving the truncated span).
    """

    one_form_dim = 0
    kappa_d1 = None

    def matrices(self, kappa):
        raise NotImplementedError

    def zero_kappa(self):
        if self.kappa_d1 is not None and self.kappa_d1.dtype == object:
            return la.zeros_rational(self.one_form_dim, 1)[:, 0]
        return np.zeros(self.one_form_dim)


class FlowWedge(WedgeTable):
    """Suspension flows: degree-1 space (f dt, g bt), top space h dt^bt."""

    def __init__(self, order, d1, rational):
        self.order = order
        self.rational = rational
        self.one_form_dim = 2 * trig.window_dim(order)
        self.kappa_d1 = d1

    def matrices(self, kappa):
        w = trig.window_dim(self.order)
        a, b = kappa[:w], kappa[w:]
        m_a, ov_a = trig.multiplication_matrix(a, self.order, rational=self.rational)
        m_b, ov_b = trig.multiplication_matrix(b, self.order, rational=self.rational)
        overflow = [("dt-part", *o) for o in ov_a] + [("bt-part", *o) for o in ov_b]
        if self.rational:
            lam0 = la.zeros_rational(2 * w, w)
            lam1 = la.zeros_rational(w, 2 * w)
        else:
            lam0 = np.zeros((2 * w, w))
            lam1 = np.zeros((w, 2 * w))
        lam0[:w, :] = m_a
        lam0[w:, :] = m_b
        lam1[:, :w] = -m_b
        lam1[:, w:] = m_a
        return [lam0, lam1], overflow


class GhysWedge(WedgeTable):
    """Unipotent suspension: one-forms f(x)dx only; dx^dx kills degree 1."""

    def __init__(self, order, d1):
        self.order = order
        self.one_form_dim = trig.window_dim(order)
        self.kappa_d1 = d1

    def matrices(self, kappa):
        w = trig.window_dim(self.order)
        m_a, ov = trig.multiplication_matrix(kappa, self.order, rational=True)
        lam1 = la.zeros_rational(w, w)
        return [m_a, lam1], [("dx-part", *o) for o in ov]


class KroneckerWedge(WedgeTable):
    def __init__(self, d1):
        self.one_form_dim = 1
        self.kappa_d1 = d1

    def matrices(self, kappa):
        lam0 = la.zeros_rational(1, 1)
        lam0[0, 0] = Fraction(kappa[0]) if not isinstance(kappa[0], float) else kappa[0]
        return [lam0], []


class SphereWedge(WedgeTable):
    """Wedge by g(r)dr: raises even coefficients into the dr line, kills odd."""

    def __init__(self, d, order, d1):
        self.d = d
        self.order = order
        self.one_form_dim = order      # basis r^j dr, j = 0..N-1
        self.kappa_d1 = d1

    def _even_poly(self, s, col):
        # polynomial coefficients of the col-th basis element of degree 2s
        n = self.order
        if s == 0:
            p = [Fraction(0)] * (n + 1)
            p[col] = Fraction(1)
        else:
            p = [Fraction(0)] * (n + 1)
            p[col] += 1
            p[col + 2] -= 1
        return p

    def matrices(self, kappa):
        n = self.order
        overflow = []
        mats = []
        for k in range(2 * self.d + 1):
            s = k // 2
            if k % 2 == 1:
                rows = _sphere_dim(self.d, n, k + 1)
                cols = _sphere_dim(self.d, n, k)
                mats.append(la.zeros_rational(rows, cols))
                continue
            cols = _sphere_dim(self.d, n, k)
            rows = _sphere_dim(self.d, n, k + 1)
            lam = la.zeros_rational(rows, cols)
            for col in range(cols):
                p = self._even_poly(s, col)
                for j, kj in enumerate(kappa):
                    if kj == 0:
                        continue
                    for deg, pv in enumerate(p):
                        if pv == 0:
                            continue
                        tot = deg + j
                        val = Fraction(kj) * pv if not isinstance(kj, float) else float(kj) * float(pv)
                        if tot > n - 1:
                            overflow.append((f"e^{s}-part", col, "r", tot, val))
                        else:
                            lam[tot, col] = lam[tot, col] + val
            mats.append(lam)
        return mats, overflow


class ProductWedge(WedgeTable):
    """Product models accept forms 1 (x) kappa_base: constant spline profile,
    no dt component.  Anything else would need spline products outside the
    span and is reported as overflow."""

    def __init__(self, layout, basic_layout, base_wedge, rational):
        self.layout = layout              # layout of the complex being twisted
        self.basic_layout = basic_layout  # layout of the basic product complex
        self.base_wedge = base_wedge
        self.rational = rational
        self.one_form_dim = basic_layout.dims[1]
        self.kappa_d1 = basic_layout.differential(1)

    def _extract_base_kappa(self, kappa):
        lay = self.basic_layout
        n3 = len(lay.cubic)
        bdim1 = lay.base_dims[1]
        overflow = []
        a_block = np.asarray(kappa[: n3 * bdim1]).reshape(n3, bdim1)
        dt_block = kappa[n3 * bdim1:]
        for i, v in enumerate(dt_block):
            if v != 0:
                overflow.append(("dt-part", i, "spline", None, v))
        base_kappa = a_block[0]
        for j in range(1, n3):
            for i in range(bdim1):
                if a_block[j][i] != base_kappa[i]:
                    overflow.append(("spline-profile", j, "nonconstant", i,
                                     a_block[j][i]))
        return base_kappa, overflow

    def matrices(self, kappa):
        base_kappa, overflow = self._extract_base_kappa(kappa)
        base_mats, base_ov = self.base_wedge.matrices(base_kappa)
        overflow += base_ov
        lay = self.layout
        base_top = len(lay.base_dims) - 1

        def bdim(k):
            return lay.base_dims[k] if 0 <= k <= base_top else 0

        mats = []
        for k in range(lay.top):
            rows, cols = lay.dims[k + 1], lay.dims[k]
            lam = la.zeros_rational(rows, cols) if self.rational else np.zeros((rows, cols))
            # A_k -> A_{k+1}: identity (x) wedge_base
            if bdim(k) and bdim(k + 1):
                blk = _kron(_identity(len(lay.cubic), self.rational), base_mats[k])
                lam[: blk.shape[0], : blk.shape[1]] = blk
            # B_k -> B_{k+1}: -identity (x) wedge_base on the shifted part
            if k >= 1 and bdim(k - 1) and bdim(k):
                blk = _kron(_identity(len(lay.quad), self.rational), base_mats[k - 1])
                r0 = len(lay.cubic) * bdim(k + 1)
                c0 = len(lay.cubic) * bdim(k)
                lam[r0:, c0:] = -blk
            mats.append(lam)
        return mats, overflow


def _identity(n, rational):
    if not rational:
        return np.eye(n)
    out = la.zeros_rational(n, n)
    for i in range(n):
        out[i, i] = Fraction(1)
    return out


def _kron(a, b):
    if a.dtype == object or b.dtype == object:
        out = la.zeros_rational(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1])
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                if a[i, j] != 0:
                    out[i * b.shape[0]:(i + 1) * b.shape[0],
                        j * b.shape[1]:(j + 1) * b.shape[1]] = a[i, j] * b
        return out
    return np.kron(a, b)


# --------------------------------------------------------------------------
# flow complexes
# --------------------------------------------------------------------------

def _carriere_L(m):
    lam, _, _ = carriere_lambda(m.params["A"])
    return float(np.log(lam)) / (2.0 * math.pi)


@functools.lru_cache(maxsize=None)
def _carriere_sign_pair(trace_abs):
    """One-time sign oracle for the hyperbolic suspension.

    Sweeps the differential orientation and the tautness-form sign; the
    admissible pair must give untwisted top betti 0 and twisted top
    betti 1 (with twisted degree-0 betti 0).  The coordinate orientation
    (-1, -1) is tried first and is the one that survives.
    """
    n = 4
    w = trig.window_dim(n)
    L = math.log((trace_abs + math.sqrt(trace_abs ** 2 - 4)) / 2.0) / (2.0 * math.pi)
    d_theta = np.asarray(trig.derivative_matrix(n, rational=False), dtype=float)
    for sigma in (-1, 1):
        op1 = d_theta + sigma * L * np.eye(w)          # g-block of d_1
        untwisted_h2 = w - la.float_rank(op1, 1e-9)[0]
        if untwisted_h2 != 0:
            continue
        for s in (-1, 1):
            twisted1 = d_theta + (sigma - s) * L * np.eye(w)
            twisted0 = d_theta - s * L * np.eye(w)
            h2 = w - la.float_rank(twisted1, 1e-9)[0]
            h0 = w - la.float_rank(twisted0, 1e-9)[0]
            if h2 == 1 and h0 == 0:
                return sigma, s
    raise BadModel("no admissible sign pair for the hyperbolic suspension")


def _build_carriere(m):
    n = m.truncation
    w = trig.window_dim(n)
    lam, char_poly, lam_residual = carriere_lambda(m.params["A"])
    L = _carriere_L(m)
    sigma, _ = _carriere_sign_pair(abs(int(m.params["A"][0][0]) + int(m.params["A"][1][1])))
    d_theta = np.asarray(trig.derivative_matrix(n, rational=False), dtype=float)
    d0 = np.zeros((2 * w, w))
    d0[:w, :] = d_theta                      # d f = f' dt
    d1 = np.zeros((w, 2 * w))
    d1[:, w:] = d_theta + sigma * L * np.eye(w)   # d(g bt) = (g' + sigma L g) dt^bt
    funcs = trig.labels(n)
    degrees = (
        tuple(funcs),
        tuple(f"{f}*dt" for f in funcs) + tuple(f"{f}*bt" for f in funcs),
        tuple(f"{f}*dt^bt" for f in funcs),
    )
    wedge = FlowWedge(n, d1, rational=False)
    return GradedComplex(
        degrees=degrees,
        differentials=(d0, d1),
        scalar_mode=SCALAR_FLOAT,
        metadata={
            "model": m.descriptor(),
            "family": "flow",
            "lambda": float(lam),
            "lambda_char_poly": char_poly,
            "lambda_residual": lam_residual,
            "log_lambda_per_period": float(np.log(lam)),
            "differential_sign": sigma,
        },
        wedge=wedge,
    )


def _build_ghys(m):
    n = m.truncation
    w = trig.window_dim(n)
    d_x = trig.derivative_matrix(n, rational=True)
    d1 = la.zeros_rational(w, w)             # f(x)dx is closed
    funcs = trig.labels(n, var="x")
    degrees = (
        tuple(funcs),
        tuple(f"{f}*dx" for f in funcs),
        tuple(f"{f}*dx^dy" for f in funcs),
    )
    wedge = GhysWedge(n, d1)
    return GradedComplex(
        degrees=degrees,
        differentials=(d_x, d1),
        scalar_mode=SCALAR_RATIONAL,
        metadata={"model": m.descriptor(), "family": "ghys"},
        wedge=wedge,
    )


def _build_kronecker(m):
    d0 = la.zeros_rational(1, 1)
    degrees = (("1",), ("s*dx-dy",))
    wedge = KroneckerWedge(d1=la.zeros_rational(0, 1))
    return GradedComplex(
        degrees=degrees,
        differentials=(d0,),
        scalar_mode=SCALAR_RATIONAL,
        metadata={"model": m.descriptor(), "family": "kronecker",
                  "slope": float(m.params["slope"])},
        wedge=wedge,
    )


# --------------------------------------------------------------------------
# sphere complexes
# --------------------------------------------------------------------------

def _sphere_dim(d, n, k, variant="basic"):
    """Dimension of degree k for the three sphere-model variants."""
    if k < 0 or k > 2 * d + 1:
        return 0
    if k % 2 == 1:
        return n                                  # r^j dr e^s, j <= N-1
    s = k // 2
    if variant == "cylinder":
        return n + 1                              # free polynomial coefficients
    if variant == "compact":
        return n - 1                              # vanish at both poles
    return n + 1 if s == 0 else n - 1             # basic: free at s=0 only


def _sphere_even_derivative(n, constrained, rational=True):
    """d/dr from the even coefficient space into polynomials of degree <= N-1."""
    if constrained:
        mat = la.zeros_rational(n, n - 1) if rational else np.zeros((n, n - 1))
        for j in range(n - 1):
            # (r^j - r^{j+2})' = j r^{j-1} - (j+2) r^{j+1}
            if j >= 1:
                mat[j - 1, j] = mat[j - 1, j] + (Fraction(j) if rational else float(j))
            mat[j + 1, j] = mat[j + 1, j] - (Fraction(j + 2) if rational else float(j + 2))
        return mat
    mat = la.zeros_rational(n, n + 1) if rational else np.zeros((n, n + 1))
    for j in range(1, n + 1):
        mat[j - 1, j] = Fraction(j) if rational else float(j)
    return mat


def _sphere_labels(d, n, variant):
    degrees = []
    for k in range(2 * d + 2):
        s = k // 2
        suffix = "" if s == 0 else f"*e^{s}" if s > 1 else "*e"
        if k % 2 == 1:
            degrees.append(tuple(f"r^{j}*dr{suffix}" for j in range(n)))
            continue
        free = (variant == "cylinder") or (variant == "basic" and s == 0)
        if free:
            degrees.append(tuple((f"r^{j}{suffix}" if j else ("1" if s == 0 else f"1{suffix}"))
                                 for j in range(n + 1)))
        else:
            degrees.append(tuple(f"(1-r^2)*r^{j}{suffix}" for j in range(n - 1)))
    return tuple(degrees)


def _build_sphere(m, variant="basic"):
    d = m.params["d"]
    n = m.truncation
    diffs = []
    for k in range(2 * d + 1):
        if k % 2 == 0:
            s = k // 2
            free = (variant == "cylinder") or (variant == "basic" and s == 0)
            diffs.append(_sphere_even_derivative(n, constrained=not free))
        else:
            rows = _sphere_dim(d, n, k + 1, variant)
            diffs.append(la.zeros_rational(rows, n))
    degrees = _sphere_labels(d, n, variant)
    d1 = diffs[1] if len(diffs) > 1 else la.zeros_rational(0, n)
    wedge = SphereWedge(d, n, d1)
    return GradedComplex(
        degrees=degrees,
        differentials=tuple(diffs),
        scalar_mode=SCALAR_RATIONAL,
        metadata={"model": m.descriptor(), "family": "sphere", "variant": variant,
                  "weights": tuple(m.params["weights"])},
        wedge=wedge,
    )


def sphere_cylinder_complex(m):
    """Basic complex of the regular stratum (open cylinder, no pole conditions)."""
    if m.kind != SPHERE:
        raise Unsupported("cylinder variant exists only for the sphere model")
    return _build_sphere(m, variant="cylinder")


def sphere_compact_complex(m):
    """Compact-support model on the regular stratum: all coefficients vanish at the poles."""
    if m.kind != SPHERE:
        raise Unsupported("compact variant exists only for the sphere model")
    return _build_sphere(m, variant="compact")


# --------------------------------------------------------------------------
# product models
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _ProductLayout:
    """Index bookkeeping for (spline x base) complexes."""
    cubic: tuple
    quad: tuple
    base_dims: tuple        # base dims padded with 0 at both ends, index by degree
    dims: tuple
    top: int
    d_matrices: tuple

    def differential(self, k):
        return self.d_matrices[k] if k < len(self.d_matrices) else None


def _product_layout(base_complex, P, cubic_idx, quad_idx, rational):
    base_dims = [base_complex.dim(k) for k in range(base_complex.top_degree + 1)]
    top = len(base_dims)                     # product top degree = base top + 1
    dims = []
    for k in range(top + 1):
        a = len(cubic_idx) * (base_dims[k] if k < len(base_dims) else 0)
        b = len(quad_idx) * (base_dims[k - 1] if 0 <= k - 1 < len(base_dims) else 0)
        dims.append(a + b)
    d_spl = splines.derivative_matrix(P, cubic_idx, quad_idx, rational=rational)
    mats = []
    for k in range(top):
        bk = base_dims[k] if k < len(base_dims) else 0
        bk1 = base_dims[k + 1] if k + 1 < len(base_dims) else 0
        bkm = base_dims[k - 1] if 0 <= k - 1 < len(base_dims) else 0
        rows, cols = dims[k + 1], dims[k]
        mat = la.zeros_rational(rows, cols) if rational else np.zeros((rows, cols))
        r_split = len(cubic_idx) * bk1
        c_split = len(cubic_idx) * bk
        if bk and bk1:
            mat[:r_split, :c_split] = _kron(_identity(len(cubic_idx), rational),
                                            base_complex.differential(k))
        if bk:
            mat[r_split:, :c_split] = _kron(d_spl, _identity(bk, rational))
        if bkm and bk:
            mat[r_split:, c_split:] = -_kron(_identity(len(quad_idx), rational),
                                             base_complex.differential(k - 1))
        mats.append(mat)
    return _ProductLayout(tuple(cubic_idx), tuple(quad_idx), tuple(base_dims),
                          tuple(dims), top, tuple(mats))


def _product_labels(base_complex, cubic_idx, quad_idx):
    degrees = []
    top = base_complex.top_degree + 1
    for k in range(top + 1):
        labels = []
        if k <= base_complex.top_degree:
            for j in cubic_idx:
                for lab in base_complex.degrees[k]:
                    labels.append(f"b3[{j}]*{lab}")
        if 0 <= k - 1 <= base_complex.top_degree:
            for i in quad_idx:
                for lab in base_complex.degrees[k - 1]:
                    labels.append(f"b2[{i}]dt*{lab}")
        degrees.append(tuple(labels))
    return tuple(degrees)


def _build_product(m, support):
    base = build_basic_complex(m.params["base"])
    P = m.params["bump_count"]
    rational = base.scalar_mode == SCALAR_RATIONAL
    if support == "compact":
        cubic_idx = splines.compact_cubic_indices(P)
        quad_idx = splines.compact_quadratic_indices(P)
    else:
        cubic_idx = splines.full_cubic_indices(P)
        quad_idx = splines.full_quadratic_indices(P)
    layout = _product_layout(base, P, cubic_idx, quad_idx, rational)
    if support == "compact":
        basic_cubic = splines.full_cubic_indices(P)
        basic_quad = splines.full_quadratic_indices(P)
        basic_layout = _product_layout(base, P, basic_cubic, basic_quad, rational)
    else:
        basic_layout = layout
    diffs = layout.d_matrices if rational else tuple(
        np.asarray(d, dtype=float) for d in layout.d_matrices)
    wedge = ProductWedge(layout, basic_layout, base.wedge, rational)
    return GradedComplex(
        degrees=_product_labels(base, cubic_idx, quad_idx),
        differentials=diffs,
        scalar_mode=SCALAR_RATIONAL if rational else SCALAR_FLOAT,
        metadata={"model": m.descriptor(), "family": "product", "support": support,
                  "bump_count": P, "base_family": base.metadata.get("family")},
        wedge=wedge,
    )


def build_compact_complex(m):
    """Compactly-supported basic complex of a ProductCerf model.

    Basis: bump_j(t) * omega and bump-derivative-space * dt * omega over
    the base basic basis; the unit-integral bump class realizes the
    degree shift of the compact cohomology against the base.
    """
    if m.kind != PRODUCT_CERF:
        raise BadModel("compact complexes are built for ProductCerf models")
    return _build_product(m, support="compact")


def product_basic_complex(m):
    if m.kind != PRODUCT_CERF:
        raise BadModel("not a ProductCerf model")
    return _build_product(m, support="full")


def product_interval_complex(m, a, b, support):
    """Product complex restricted to the transverse interval (a, b).

    ``support`` is "full" (basic forms: B-splines whose support meets
    the open interval, restricted) or "compact" (support contained in
    the closed interval).  Restriction and extension against the whole
    model are then plain coordinate selections on the shared global
    B-spline family, which keeps Mayer-Vietoris exact at the matrix
    level.
    """
    if m.kind != PRODUCT_CERF:
        raise BadModel("not a ProductCerf model")
    base = build_basic_complex(m.params["base"])
    P = m.params["bump_count"]
    rational = base.scalar_mode == SCALAR_RATIONAL
    if support == "compact":
        cubic_idx = splines.indices_inside(P, 3, a, b)
        quad_idx = splines.indices_inside(P, 2, a, b)
    else:
        cubic_idx = splines.indices_meeting(P, 3, a, b)
        quad_idx = splines.indices_meeting(P, 2, a, b)
    layout = _product_layout(base, P, cubic_idx, quad_idx, rational)
    basic_cubic = splines.full_cubic_indices(P)
    basic_quad = splines.full_quadratic_indices(P)
    basic_layout = _product_layout(base, P, basic_cubic, basic_quad, rational)
    diffs = layout.d_matrices if rational else tuple(
        np.asarray(d, dtype=float) for d in layout.d_matrices)
    wedge = ProductWedge(layout, basic_layout, base.wedge, rational)
    return GradedComplex(
        degrees=_product_labels(base, cubic_idx, quad_idx),
        differentials=diffs,
        scalar_mode=SCALAR_RATIONAL if rational else SCALAR_FLOAT,
        metadata={"model": m.descriptor(), "family": "product", "support": support,
                  "interval": (float(a), float(b)), "bump_count": P},
        wedge=wedge,
    )


# --------------------------------------------------------------------------
# public builders
# --------------------------------------------------------------------------

def build_basic_complex(m: FoliationModel) -> GradedComplex:
    """Truncated basic complex of a catalogue model.

    Scalar mode is rational whenever every differential entry is
    rational (unipotent suspension, Kronecker, sphere) and float when
    log(lambda) enters (hyperbolic suspension).
    """
    if m.kind == CARRIERE:
        return _build_carriere(m)
    if m.kind == GHYS:
        return _build_ghys(m)
    if m.kind == KRONECKER:
        return _build_kronecker(m)
    if m.kind == SPHERE:
        return _build_sphere(m, variant="basic")
    if m.kind == PRODUCT_CERF:
        return _build_product(m, support="full")
    raise BadModel(f"unknown kind {m.kind}")


def basic_builder(m: FoliationModel) -> Callable[[int], GradedComplex]:
    """Truncation-parametrized builder for sweeps."""
    return lambda n: build_basic_complex(m.with_truncation(n))


# --------------------------------------------------------------------------
# the explicit periodic primitive of the hyperbolic suspension
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PeriodicFunction:
    """Real trig polynomial in the period-1 variable t (basis cos/sin(2 pi m t))."""
    coeffs: np.ndarray

    @property
    def order(self):
        return (len(self.coeffs) - 1) // 2

    def __call__(self, t):
        return trig.evaluate(self.coeffs, 2.0 * math.pi * np.asarray(t, dtype=float))

    def derivative_values(self, t):
        dcoeffs = la.dot(np.asarray(trig.derivative_matrix(self.order, rational=False)),
                         self.coeffs.reshape(-1, 1))[:, 0]
        return 2.0 * math.pi * trig.evaluate(dcoeffs, 2.0 * math.pi * np.asarray(t, dtype=float))


def carriere_primitive(h, lam, grid_points=256):
    """Unique periodic solution of g'(t) + g(t) log(lambda) = h(t).

    ``h`` is a coefficient vector in the period-1 trig basis (or a
    PeriodicFunction).  Evaluates

        g(t) = lambda^(-t) ( c + int_0^t lambda^x h(x) dx ),
        c = (1 / (lambda - 1)) int_0^1 lambda^x h(x) dx

    by adaptive quadrature on a uniform grid, then projects back onto
    the trig basis.  The constant c makes g(0) = g(1); this is possible
    precisely because lambda != 1.
    """
    lam = float(lam)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if abs(lam - 1.0) < 1e-12:
        raise LambdaOne("no periodic primitive in general when lambda = 1")
    hfun = h if isinstance(h, PeriodicFunction) else PeriodicFunction(np.asarray(h, dtype=float))
    loglam = math.log(lam)

    def integrand(x):
        return math.exp(loglam * x) * float(hfun(x))

    ts = np.arange(grid_points + 1) / grid_points
    partial = np.zeros(grid_points + 1)
    for i in range(1, grid_points + 1):
        inc, _ = quad(integrand, ts[i - 1], ts[i], epsabs=1e-13, epsrel=1e-13)
        partial[i] = partial[i - 1] + inc
    c = partial[-1] / (lam - 1.0)
    g_grid = np.exp(-loglam * ts) * (c + partial)
    closure_gap = abs(g_grid[0] - g_grid[-1])

    spec = np.fft.rfft(g_grid[:-1]) / grid_points
    order = max(hfun.order, 1)
    while order < grid_points // 2 - 1:
        tail = np.sqrt(2.0 * np.sum(np.abs(spec[order + 1:]) ** 2))
        if tail < 1e-13:
            break
        order = min(2 * order, grid_points // 2 - 1)
    coeffs = np.zeros(trig.window_dim(order))
    coeffs[0] = spec[0].real
    for mm in range(1, order + 1):
        coeffs[trig.cos_index(mm)] = 2.0 * spec[mm].real
        coeffs[trig.sin_index(mm)] = -2.0 * spec[mm].imag
    g = PeriodicFunction(coeffs)

    residual = float(np.max(np.abs(g.derivative_values(ts) + loglam * g(ts) - hfun(ts))))
    return g, {"ode_residual": residual, "closure_gap": closure_gap, "constant": c,
               "grid_points": grid_points}


# --------------------------------------------------------------------------
# tautness one-forms
# --------------------------------------------------------------------------

def tautness_one_form(m: FoliationModel):
    """Closed basic 1-form representing the tautness class in model coordinates.

    Isometric models (Kronecker, sphere) and the unipotent suspension
    are taut: kappa = 0.  The hyperbolic suspension carries
    kappa = s * log(lambda) dt with the sign s fixed by the same oracle
    that orients its differential.
    """
    from .twisted import BasicOneForm   # local import: twisted depends on models

    if m.kind == PRODUCT_CERF:
        raise Unsupported("ProductCerf inherits its tautness form from the base")
    c = build_basic_complex(m)
    wedge = c.wedge
    coeffs = wedge.zero_kappa()
    if m.kind == CARRIERE:
        tr = abs(int(m.params["A"][0][0]) + int(m.params["A"][1][1]))
        _, s = _carriere_sign_pair(tr)
        w = trig.window_dim(m.truncation)
        coeffs = np.zeros(2 * w)
        coeffs[0] = s * _carriere_L(m)    # s * log(lambda)/(2 pi) * dt == s*log(lambda)*dt per period
    return BasicOneForm.from_coefficients(c, coeffs)


def product_kappa(m: FoliationModel):
    """Inherited tautness form of a product model, in product-basic coordinates."""
    from .twisted import BasicOneForm

    if m.kind != PRODUCT_CERF:
        raise Unsupported("only ProductCerf models inherit a product form")
    base = m.params["base"]
    host = product_basic_complex(m)
    base_kappa = tautness_one_form(base)
    lay = host.wedge.basic_layout
    n3 = len(lay.cubic)
    bdim1 = lay.base_dims[1]
    rational = host.scalar_mode == SCALAR_RATIONAL
    coeffs = la.zeros_rational(host.dim(1), 1)[:, 0] if rational else np.zeros(host.dim(1))
    for j in range(n3):
        for i in range(bdim1):
            coeffs[j * bdim1 + i] = base_kappa.coefficients[i]
    return BasicOneForm.from_coefficients(host, coeffs)


# --------------------------------------------------------------------------
# pairing setups
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PairingSetup:
    """Everything the duality module needs for one model.

    ``compact`` carries the compact-support side, ``host`` the side that
    gets twisted by ``kappa_coeffs``.  ``integrate(k, vc, vt, panels)``
    evaluates the integration pairing of a degree-k compact vector
    against a degree-(n-k) host vector with the given quadrature panel
    count; the leafwise volume factor is normalized to 1 per fundamental
    domain.
    """
    codim: int
    compact: GradedComplex
    host: GradedComplex
    kappa_coeffs: Any
    integrate: Callable
    swap_supported: bool = False


def _gl_nodes(a, b, panels, order=8):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0
        nodes.append(mid + half * x)
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _flow_integrate(order):
    w = trig.window_dim(order)

    def integrate(k, vc, vt, panels):
        theta, wts = _gl_nodes(0.0, 2.0 * math.pi, panels)
        vc = np.asarray(vc, dtype=float)
        vt = np.asarray(vt, dtype=float)
        if k == 0:
            vals = trig.evaluate(vc, theta) * trig.evaluate(vt, theta)
        elif k == 2:
            vals = trig.evaluate(vc, theta) * trig.evaluate(vt, theta)
        else:
            f1, g1 = vc[:w], vc[w:]
            f2, g2 = vt[:w], vt[w:]
            vals = (trig.evaluate(f1, theta) * trig.evaluate(g2, theta)
                    - trig.evaluate(g1, theta) * trig.evaluate(f2, theta))
        return float(np.sum(vals * wts) / (2.0 * math.pi))

    return integrate


def _ghys_integrate(order):
    def integrate(k, vc, vt, panels):
        theta, wts = _gl_nodes(0.0, 2.0 * math.pi, panels)
        vals = trig.evaluate(np.asarray(vc, dtype=float), theta) \
            * trig.evaluate(np.asarray(vt, dtype=float), theta)
        if k == 1:
            # f1 dx ^ f2 dx = 0
            return 0.0
        return float(np.sum(vals * wts) / (2.0 * math.pi))

    return integrate


def _kronecker_integrate():
    def integrate(k, vc, vt, panels):
        return float(vc[0]) * float(vt[0])

    return integrate


def _sphere_poly_values(d, n, variant, k, vec, r):
    s = k // 2
    vals = np.zeros_like(r)
    if k % 2 == 1:
        for j in range(n):
            v = float(vec[j])
            if v:
                vals = vals + v * r ** j
        return vals
    free = (variant == "cylinder") or (variant == "basic" and s == 0)
    if free:
        for j in range(n + 1):
            v = float(vec[j])
            if v:
                vals = vals + v * r ** j
    else:
        for j in range(n - 1):
            v = float(vec[j])
            if v:
                vals = vals + v * (r ** j - r ** (j + 2))
    return vals


def _sphere_integrate(d, n):
    def integrate(k, vc, vt, panels):
        r, wts = _gl_nodes(-1.0, 1.0, panels)
        a = _sphere_poly_values(d, n, "compact", k, vc, r)
        b = _sphere_poly_values(d, n, "cylinder", 2 * d + 1 - k, vt, r)
        return float(np.sum(a * b * wts))

    return integrate


def _product_integrate(m, compact_cx, host_cx):
    base = m.params["base"]
    base_setup_int = _base_top_integrate(base)
    P = m.params["bump_count"]
    c_lay = compact_cx.wedge.layout
    h_lay = host_cx.wedge.layout
    base_top = len(c_lay.base_dims) - 1

    def spline_vals(indices, degree, coeffs, t):
        return splines.evaluate_combination(P, degree, indices, coeffs, t)

    def integrate(k, vc, vt, panels):
        n = base_top + 1
        kt = n - k
        t, wts = _gl_nodes(-1.0, 1.0, panels)
        vc = np.asarray(vc, dtype=float)
        vt = np.asarray(vt, dtype=float)
        total = 0.0
        n3c, n2c = len(c_lay.cubic), len(c_lay.quad)
        n3h, n2h = len(h_lay.cubic), len(h_lay.quad)
        bdim = c_lay.base_dims
        # (cubic x base^k)_c ^ (quad dt x base^{n-1-k})_t
        bk, bq = (bdim[k] if k <= base_top else 0), (bdim[kt - 1] if 0 <= kt - 1 <= base_top else 0)
        if bk and bq:
            A = vc[: n3c * bk].reshape(n3c, bk)
            B = vt[n3h * (bdim[kt] if kt <= base_top else 0):].reshape(n2h, bq)
            sign = -1.0 if k % 2 else 1.0
            for ia in range(bk):
                fa = spline_vals(c_lay.cubic, 3, A[:, ia], t)
                for ib in range(bq):
                    pair = base_setup_int(k, _unit(bk, ia), _unit_other(bq, ib), panels, k, kt - 1)
                    if pair == 0.0:
                        continue
                    fb = spline_vals(h_lay.quad, 2, B[:, ib], t)
                    total += sign * pair * float(np.sum(fa * fb * wts))
        # (quad dt x base^{k-1})_c ^ (cubic x base^{n-k})_t
        bq_c = bdim[k - 1] if 0 <= k - 1 <= base_top else 0
        bk_t = bdim[kt] if kt <= base_top else 0
        if bq_c and bk_t:
            A = vc[n3c * (bdim[k] if k <= base_top else 0):].reshape(n2c, bq_c)
            B = vt[: n3h * bk_t].reshape(n3h, bk_t)
            for ia in range(bq_c):
                fa = spline_vals(c_lay.quad, 2, A[:, ia], t)
                for ib in range(bk_t):
                    pair = base_setup_int(k - 1, _unit(bq_c, ia), _unit_other(bk_t, ib), panels,
                                          k - 1, kt)
                    if pair == 0.0:
                        continue
                    fb = spline_vals(h_lay.cubic, 3, B[:, ib], t)
                    total += pair * float(np.sum(fa * fb * wts))
        return total

    return integrate


def _unit(dim, i):
    v = np.zeros(dim)
    v[i] = 1.0
    return v


_unit_other = _unit


def _base_top_integrate(base):
    """Pairing of base basis elements against the base top degree."""
    cx = build_basic_complex(base)
    if base.kind == KRONECKER:
        def integ(k, va, vb, panels, ka=None, kb=None):
            return float(va[0]) * float(vb[0])
        return integ
    if base.kind == GHYS:
        raw = _ghys_integrate(base.truncation)
    else:
        raw = _flow_integrate(base.truncation)

    def integ(k, va, vb, panels, ka=None, kb=None):
        return raw(ka if ka is not None else k, va, vb, panels)

    return integ


def pairing_setup(m: FoliationModel) -> PairingSetup:
    """Complexes, twisting form and integrator for the duality pairing."""
    from .twisted import BasicOneForm

    if m.kind in CLOSED_KINDS:
        cx = build_basic_complex(m)
        kappa = tautness_one_form(m)
        integrate = {
            CARRIERE: _flow_integrate(m.truncation),
            GHYS: _ghys_integrate(m.truncation),
            KRONECKER: _kronecker_integrate(),
        }[m.kind]
        return PairingSetup(codim=m.codim, compact=cx, host=cx,
                            kappa_coeffs=kappa.coefficients, integrate=integrate)
    if m.kind == SPHERE:
        compact = sphere_compact_complex(m)
        host = sphere_cylinder_complex(m)
        kappa = host.wedge.zero_kappa()
        return PairingSetup(codim=m.codim, compact=compact, host=host,
                            kappa_coeffs=kappa,
                            integrate=_sphere_integrate(m.params["d"], m.truncation))
    if m.kind == PRODUCT_CERF:
        compact = build_compact_complex(m)
        host = product_basic_complex(m)
        kappa = product_kappa(m)
        return PairingSetup(codim=m.codim, compact=compact, host=host,
                            kappa_coeffs=kappa.coefficients,
                            integrate=_product_integrate(m, compact, host),
                            swap_supported=True)
    raise BadModel(f"no pairing setup for {m.kind}")
