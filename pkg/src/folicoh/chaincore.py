"""Generic finite-dimensional graded cochain complex engine.

A :class:`GradedComplex` stores one basis-label list per degree and one
differential matrix per consecutive degree pair (rows index the higher
degree).  A complex commits to a scalar mode at construction: exact
rationals (``Fraction`` entries, exact equality) or float64 (SVD ranks
with a recorded tolerance).  Cohomology is plain rank-nullity:

    betti[k] = dim ker d_k - rank d_{k-1},      d_{-1} = d_{top} = 0.

Representatives are cocycle coefficient vectors chosen deterministically
(earliest-index pivoting in rational mode, fixed SVD pipeline in float
mode) so snapshot tests are stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import _linalg as la
from .errors import NotValidated, ShapeMismatch

SCALAR_RATIONAL = "rational"
SCALAR_FLOAT = "float"

#: Frobenius-norm budget for d.d = 0 in float mode, relative to input scale.
D_SQUARED_TOL = 1e-12

DEFAULT_RANK_TOL = 1e-9


@dataclass(frozen=True)
class GradedComplex:
    """Bounded cochain complex with explicit bases.

    degrees[k] holds the human-readable monomial labels of degree k;
    differentials[k] is the matrix of d_k with shape (dim_{k+1}, dim_k).
    ``wedge`` is an optional model-supplied wedge table used by the
    twisted-differential machinery.
    """

    degrees: tuple
    differentials: tuple
    scalar_mode: str
    rank_tol: float = DEFAULT_RANK_TOL
    metadata: Mapping[str, Any] = field(default_factory=dict)
    wedge: Any = None

    def __post_init__(self):
        if self.scalar_mode not in (SCALAR_RATIONAL, SCALAR_FLOAT):
            raise ValueError(f"unknown scalar mode {self.scalar_mode!r}")
        if len(self.differentials) != max(len(self.degrees) - 1, 0):
            raise ShapeMismatch(
                f"{len(self.degrees)} degrees need "
                f"{max(len(self.degrees) - 1, 0)} differentials, "
                f"got {len(self.differentials)}"
            )
        for k, d in enumerate(self.differentials):
            want = (self.dim(k + 1), self.dim(k))
            if d.shape != want:
                raise ShapeMismatch(f"d_{k} has shape {d.shape}, expected {want}")

    @property
    def top_degree(self):
        return len(self.degrees) - 1

    def dim(self, k):
        if 0 <= k <= self.top_degree:
            return len(self.degrees[k])
        return 0

    def dims(self):
        return tuple(len(labels) for labels in self.degrees)

    def differential(self, k):
        """d_k as a matrix, including the virtual zero maps at the ends."""
        if 0 <= k < len(self.differentials):
            return self.differentials[k]
        rows = self.dim(k + 1)
        cols = self.dim(k)
        if self.scalar_mode == SCALAR_RATIONAL:
            return la.zeros_rational(rows, cols)
        return np.zeros((rows, cols))

    def zero_vector(self, k):
        if self.scalar_mode == SCALAR_RATIONAL:
            return la.zeros_rational(self.dim(k), 1)[:, 0]
        return np.zeros(self.dim(k))

    def to_float(self):
        """Float64 copy (identity on float-mode complexes)."""
        if self.scalar_mode == SCALAR_FLOAT:
            return self
        diffs = tuple(np.asarray(d, dtype=float) for d in self.differentials)
        return GradedComplex(
            degrees=self.degrees,
            differentials=diffs,
            scalar_mode=SCALAR_FLOAT,
            rank_tol=self.rank_tol,
            metadata=dict(self.metadata),
            wedge=self.wedge,
        )

    def to_rational(self):
        """Exact copy with every float entry promoted to its exact Fraction."""
        if self.scalar_mode == SCALAR_RATIONAL:
            return self
        diffs = tuple(la.frac_matrix([[Fraction(float(v)) for v in row] for row in d],
                                     shape=d.shape)
                      for d in self.differentials)
        return GradedComplex(
            degrees=self.degrees,
            differentials=diffs,
            scalar_mode=SCALAR_RATIONAL,
            rank_tol=self.rank_tol,
            metadata=dict(self.metadata),
            wedge=self.wedge,
        )


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    residuals: tuple          # max |(d_{k+1} d_k)| per degree k
    thresholds: tuple
    scalar_mode: str

    def residual_at(self, k):
        return self.residuals[k]


@dataclass(frozen=True)
class CohomologyReport:
    betti: tuple
    representatives: tuple    # per degree: matrix dim_k x betti[k]
    tolerance_used: float
    scalar_mode: str
    warnings: tuple = ()
    stabilized: tuple | None = None   # filled by truncation sweeps


@dataclass(frozen=True)
class StabilityReport:
    truncations: tuple
    betti_by_truncation: tuple   # one betti tuple per truncation
    classification: tuple        # per degree: STABLE / GROWING / IRREGULAR

    def betti_sequence(self, degree):
        return tuple(b[degree] for b in self.betti_by_truncation)


STABLE = "STABLE"
GROWING = "GROWING"
IRREGULAR = "IRREGULAR"


def validate_complex(c: GradedComplex) -> ValidationReport:
    """Check d_{k+1} d_k = 0 for every degree.

    Rational mode demands exact zeros; float mode allows a Frobenius
    norm below ``D_SQUARED_TOL`` times the product of the factors'
    scales.  Shape incompatibilities raise ShapeMismatch (also covered
    at construction time).
    """
    residuals = []
    thresholds = []
    for k in range(len(c.differentials) - 1):
        d_lo = c.differentials[k]
        d_hi = c.differentials[k + 1]
        if d_hi.shape[1] != d_lo.shape[0]:
            raise ShapeMismatch(
                f"cols(d_{k + 1}) = {d_hi.shape[1]} != rows(d_{k}) = {d_lo.shape[0]}"
            )
        prod = la.dot(d_hi, d_lo)
        if c.scalar_mode == SCALAR_RATIONAL:
            residuals.append(la.max_abs(prod))
            thresholds.append(0)
        else:
            scale = max(1.0, float(np.linalg.norm(d_hi)) * float(np.linalg.norm(d_lo)))
            res = float(np.linalg.norm(np.asarray(prod, dtype=float)))
            residuals.append(res)
            thresholds.append(D_SQUARED_TOL * scale)
    passed = all(r <= t for r, t in zip(residuals, thresholds))
    return ValidationReport(
        passed=passed,
        residuals=tuple(residuals),
        thresholds=tuple(thresholds),
        scalar_mode=c.scalar_mode,
    )


def _degree_cohomology_rational(d_in, d_out):
    kernel = la.rational_nullspace(d_out)
    image_pivots = la.rational_pivot_columns(d_in)
    image = d_in[:, image_pivots] if image_pivots else la.zeros_rational(d_in.shape[0], 0)
    n_im = image.shape[1]
    if kernel.shape[1] == 0:
        return 0, kernel
    stacked = np.concatenate([image, kernel], axis=1)
    pivots = la.rational_pivot_columns(stacked)
    rep_cols = [j - n_im for j in pivots if j >= n_im]
    reps = kernel[:, rep_cols] if rep_cols else la.zeros_rational(kernel.shape[0], 0)
    return len(rep_cols), reps


def _degree_cohomology_float(d_in, d_out, tol):
    warns = []
    kernel, w = la.float_nullspace(d_out, tol)
    warns += w
    image, w = la.float_image_basis(d_in, tol)
    warns += w
    betti = kernel.shape[1] - image.shape[1]
    if betti <= 0:
        return max(betti, 0), np.zeros((kernel.shape[0], 0)), warns
    # project kernel off the image, then extract an orthonormal complement
    proj = kernel - image @ (image.T @ kernel) if image.shape[1] else kernel
    u, s, _ = la.float_svd(proj)
    reps = u[:, :betti].copy()
    return betti, reps, warns


def cohomology(c: GradedComplex) -> CohomologyReport:
    """Betti numbers and representative cocycles per degree.

    Raises NotValidated when d^2 = 0 fails.  Float-mode reports carry
    TolUnstable warnings for singular values within a factor 10 of the
    rank threshold (reported, not fatal).
    """
    check = validate_complex(c)
    if not check.passed:
        raise NotValidated(f"d^2 != 0: residuals {check.residuals}")
    betti = []
    reps = []
    warnings = []
    for k in range(len(c.degrees)):
        d_in = c.differential(k - 1)
        d_out = c.differential(k)
        if c.scalar_mode == SCALAR_RATIONAL:
            b, r = _degree_cohomology_rational(d_in, d_out)
        else:
            b, r, w = _degree_cohomology_float(d_in, d_out, c.rank_tol)
            warnings += [f"degree {k}: {msg}" for msg in w]
        betti.append(b)
        reps.append(r)
    return CohomologyReport(
        betti=tuple(betti),
        representatives=tuple(reps),
        tolerance_used=c.rank_tol,
        scalar_mode=c.scalar_mode,
        warnings=tuple(warnings),
    )


def betti_numbers(c: GradedComplex) -> tuple:
    return cohomology(c).betti


def classify_sequence(seq: Sequence[int]) -> str:
    if seq[-1] == seq[-2]:
        return STABLE
    if all(a < b for a, b in zip(seq, seq[1:])):
        return GROWING
    return IRREGULAR


def truncation_sweep(builder: Callable[[int], GradedComplex],
                     truncations: Sequence[int]) -> StabilityReport:
    """Betti stability across ascending truncation orders.

    ``builder(N)`` must return the model complex at truncation N.  A
    degree is STABLE when its betti number agrees on the last two
    truncations, GROWING when strictly increasing throughout; anything
    else is flagged IRREGULAR.  Distinguishes genuinely
    finite-dimensional cohomology from infinite-dimensional signatures.
    """
    ns = list(truncations)
    if len(ns) < 3:
        raise ValueError("need at least 3 truncation orders")
    if any(a >= b for a, b in zip(ns, ns[1:])):
        raise ValueError("truncation orders must be strictly ascending")
    betti_rows = [cohomology(builder(n)).betti for n in ns]
    n_degrees = len(betti_rows[0])
    if any(len(row) != n_degrees for row in betti_rows):
        raise ValueError("builder changed the degree range across truncations")
    classes = tuple(
        classify_sequence([row[k] for row in betti_rows]) for k in range(n_degrees)
    )
    return StabilityReport(
        truncations=tuple(ns),
        betti_by_truncation=tuple(betti_rows),
        classification=classes,
    )
