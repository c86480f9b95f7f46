"""Chart-level Riemannian computations on box grids.

Charts are boxes in R^m with adapted coordinates: the p leafwise
coordinates come first, the n transverse ones after.  A bundle-like
metric is block diagonal here, with the transverse block a function of
the transverse coordinates only (enforced by its call signature).

Sign conventions, fixed once:

* shape operator W(Y)(X) = -perp(nabla_X Y); equivalently the mean
  curvature covector is kappa = mu(H, .) for the mean curvature vector
  H = perp(sum_i nabla_{E_i} E_i) over an oriented orthonormal leafwise
  frame.  On the warped chart e^{2y} dx^2 + dy^2 this gives
  kappa = -dy.

* the Rummler identity is checked in the form

      d chi(X_1, ..., X_p, Z) + (-1)^p kappa(Z) chi(X_1, ..., X_p) = 0

  for leafwise X_i and arbitrary Z, which is the contraction of
  theta(Y) chi = -kappa(Y) chi + (type (p-1,1) term) consistent with the
  warped-chart oracle.

All derivatives are centered finite differences of order 2
(one-sided at the box faces); residual maxima exclude a 2-cell
boundary layer to keep one-sided stencil noise out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import NotBasic, SingularMetric, ZeroVector

MIN_EIGENVALUE = 1e-8
BOUNDARY_LAYER = 2


@dataclass(frozen=True)
class ChartMetric:
    """Block bundle-like metric on a box chart.

    ``leaf_block(coords)`` returns the p x p leafwise block at the grid
    built from the full coordinate tuple; ``transverse_block(y_coords)``
    receives only the transverse coordinates, which is what makes the
    metric bundle-like by construction.
    """
    bounds: tuple            # ((lo, hi), ...) of length p + n
    p: int
    leaf_block: Callable
    transverse_block: Callable

    @property
    def m(self):
        return len(self.bounds)

    @property
    def n(self):
        return self.m - self.p


def grid_axes(bounds, h):
    return [np.arange(lo, hi + h / 2, h) for lo, hi in bounds]


def grid_mesh(bounds, h):
    return np.meshgrid(*grid_axes(bounds, h), indexing="ij")


def interior(shape):
    return tuple(slice(BOUNDARY_LAYER, s - BOUNDARY_LAYER) for s in shape)


def scalar_block(fn):
    """Wrap a scalar coefficient function as a 1x1 metric block."""
    def block(coords):
        return np.asarray(fn(*coords), dtype=float)[..., None, None]
    return block


def constant_block(matrix):
    mat = np.asarray(matrix, dtype=float)

    def block(coords):
        shape = np.broadcast(*coords).shape if len(coords) > 1 else np.shape(coords[0])
        out = np.empty(shape + mat.shape)
        out[...] = mat
        return out
    return block


def evaluate_metric(metric: ChartMetric, mesh):
    p, m = metric.p, metric.m
    shape = mesh[0].shape
    g = np.zeros(shape + (m, m))
    leaf = np.broadcast_to(metric.leaf_block(tuple(mesh)), shape + (p, p))
    trans = np.broadcast_to(metric.transverse_block(tuple(mesh[p:])),
                            shape + (m - p, m - p))
    g[..., :p, :p] = leaf
    g[..., p:, p:] = trans
    mins = np.min(np.linalg.eigvalsh(g), axis=-1)
    if np.min(mins) <= MIN_EIGENVALUE:
        raise SingularMetric(f"metric eigenvalue {np.min(mins):.3e} <= {MIN_EIGENVALUE}")
    return g


def _partials(field_arr, h, m):
    """d(field)/d(coordinate a) for a = 0..m-1, appended as a leading axis list."""
    return [np.gradient(field_arr, h, axis=a) for a in range(m)]


def christoffel(g, h):
    """Gamma[..., k, i, j] by centered finite differences, O(h^2)."""
    m = g.shape[-1]
    ginv = np.linalg.inv(g)
    dg = np.stack(_partials(g, h, m), axis=-3)   # [..., a, i, j]
    gamma = 0.5 * (
        np.einsum("...kl,...ijl->...kij", ginv, dg)
        + np.einsum("...kl,...jil->...kij", ginv, dg)
        - np.einsum("...kl,...lij->...kij", ginv, dg)
    )
    return gamma


def leafwise_frame(metric: ChartMetric, mesh):
    """Oriented orthonormal leafwise frame by modified Gram-Schmidt.

    Reorthogonalizes whenever the leaf block is badly conditioned
    (condition number above 1e6).
    """
    p = metric.p
    shape = mesh[0].shape
    leaf = np.broadcast_to(metric.leaf_block(tuple(mesh)), shape + (p, p)).copy()
    conds = np.linalg.cond(leaf)
    passes = 2 if np.max(conds) > 1e6 else 1
    frame = np.zeros(shape + (p, p))   # frame[..., i, a]: components of E_i
    for i in range(p):
        frame[..., i, i] = 1.0
    for _ in range(passes):
        for i in range(p):
            v = frame[..., i, :]
            for j in range(i):
                prev = frame[..., j, :]
                proj = np.einsum("...a,...ab,...b->...", v, leaf, prev)
                v = v - proj[..., None] * prev
            norm = np.sqrt(np.einsum("...a,...ab,...b->...", v, leaf, v))
            frame[..., i, :] = v / norm[..., None]
    return frame


@dataclass(frozen=True)
class MeanCurvatureForm:
    components: np.ndarray     # [..., a] covector on the full chart grid
    h: float
    bounds: tuple
    p: int
    leafwise_max: float

    @property
    def transverse_components(self):
        return self.components[..., self.p:]

    def interior_max(self):
        return float(np.max(np.abs(self.components[interior(self.components.shape[:-1])])))


def mean_curvature(metric: ChartMetric, h) -> MeanCurvatureForm:
    """Mean curvature 1-form on the chart grid.

    Assembles Christoffel symbols by centered differences, traces the
    second fundamental form over the orthonormal leafwise frame, and
    lowers the transverse projection of the result with the metric.
    Leafwise components vanish by the block structure; the recorded
    maximum documents that invariant.
    """
    mesh = grid_mesh(metric.bounds, h)
    g = evaluate_metric(metric, mesh)
    gamma = christoffel(g, h)
    frame = leafwise_frame(metric, mesh)
    p, m = metric.p, metric.m
    shape = mesh[0].shape
    acc = np.zeros(shape + (m,))
    for i in range(p):
        e = np.zeros(shape + (m,))
        e[..., :p] = frame[..., i, :]
        de = np.stack(_partials(e, h, m), axis=-2)    # [..., a, b] = d_a e^b
        nabla = (np.einsum("...a,...ab->...b", e, de)
                 + np.einsum("...a,...c,...bac->...b", e, e, gamma))
        acc += nabla
    acc[..., :p] = 0.0     # orthogonal projection: leaves the mean curvature vector
    kappa = np.einsum("...b,...ab->...a", acc, g)
    leaf_max = float(np.max(np.abs(kappa[..., :p]))) if p else 0.0
    return MeanCurvatureForm(components=kappa, h=h, bounds=metric.bounds, p=p,
                             leafwise_max=leaf_max)


def characteristic_form(metric: ChartMetric, vectors, h):
    """chi(Y_1, ..., Y_p) = det[ mu(Y_i, E_j) ] pointwise on the grid.

    ``vectors`` is a p-tuple of fields, each a callable of the mesh or a
    ready [..., m] component array.
    """
    mesh = grid_mesh(metric.bounds, h)
    g = evaluate_metric(metric, mesh)
    frame = leafwise_frame(metric, mesh)
    p, m = metric.p, metric.m
    shape = mesh[0].shape
    mat = np.zeros(shape + (p, p))
    for i, vec in enumerate(vectors):
        y = vec(tuple(mesh)) if callable(vec) else np.broadcast_to(vec, shape + (m,))
        e_full = np.zeros(shape + (m,))
        for j in range(p):
            e_full[..., :p] = frame[..., j, :]
            mat[..., i, j] = np.einsum("...a,...ab,...b->...", y, g, e_full)
    return np.linalg.det(mat)


def _chi_covector(metric, mesh, g, frame):
    """chi as a p-form: components on all coordinate index tuples (p <= 2)."""
    p, m = metric.p, metric.m
    shape = mesh[0].shape
    e_fields = []
    for j in range(p):
        e = np.zeros(shape + (m,))
        e[..., :p] = frame[..., j, :]
        e_fields.append(e)
    pair = np.zeros(shape + (m, p))    # pair[..., a, j] = g(d_a, E_j)
    for j, e in enumerate(e_fields):
        pair[..., j] = np.einsum("...ab,...b->...a", g, e)
    if p == 1:
        return pair[..., 0]            # chi_a
    if p == 2:
        chi = np.zeros(shape + (m, m))
        chi_ab = (pair[..., 0][..., :, None] * pair[..., 1][..., None, :]
                  - pair[..., 1][..., :, None] * pair[..., 0][..., None, :])
        return chi_ab
    raise NotImplementedError("chi components implemented for p <= 2")


@dataclass(frozen=True)
class RummlerReport:
    max_residual: float
    per_transverse: tuple
    h: float
    calibration_constant: float
    kappa_transverse_sample: tuple

    @property
    def passed(self):
        return self.max_residual < self.calibration_constant * self.h ** 2


def rummler_residual(metric: ChartMetric, h, calibration_constant=10.0) -> RummlerReport:
    """Grid residual of the Rummler identity (see module docstring).

    Both sides are evaluated by centered differences on leafwise
    coordinate tuples against every transverse direction; the passing
    threshold is ``calibration_constant * h^2`` with the constant
    calibrated on the warped chart e^{2y}dx^2 + dy^2.
    """
    mesh = grid_mesh(metric.bounds, h)
    g = evaluate_metric(metric, mesh)
    frame = leafwise_frame(metric, mesh)
    kappa = mean_curvature(metric, h).components
    p, m = metric.p, metric.m
    chi = _chi_covector(metric, mesh, g, frame)
    idx = interior(mesh[0].shape)
    per_z = []
    if p == 1:
        dchi = np.stack(_partials(chi, h, m), axis=-2)   # [..., a, b] = d_a chi_b
        chi_x = chi[..., 0]
        for z in range(p, m):
            lhs = dchi[..., 0, z] - dchi[..., z, 0]       # d chi(X, Z)
            res = lhs - kappa[..., z] * chi_x             # + (-1)^1 kappa(Z) chi(X)
            per_z.append(float(np.max(np.abs(res[idx]))))
    elif p == 2:
        dchi = np.stack(_partials(chi, h, m), axis=-3)   # [..., c, a, b]
        chi_xx = chi[..., 0, 1]
        for z in range(p, m):
            lhs = dchi[..., 0, 1, z] - dchi[..., 1, 0, z] + dchi[..., z, 0, 1]
            res = lhs + kappa[..., z] * chi_xx            # (-1)^2 kappa(Z) chi
            per_z.append(float(np.max(np.abs(res[idx]))))
    else:
        raise NotImplementedError("rummler residual implemented for p <= 2")
    kap_sample = tuple(float(v) for v in kappa[tuple(s.start for s in idx)][p:])
    return RummlerReport(max_residual=max(per_z), per_transverse=tuple(per_z),
                         h=h, calibration_constant=calibration_constant,
                         kappa_transverse_sample=kap_sample)


@dataclass(frozen=True)
class GeodesibilityReport:
    geodesic_defect: float          # max |nabla_W W|
    leafwise_volume_drift: float    # max |theta(W) chi| components
    killing_defect: float           # max |L_V mu|
    candidate_pairing_defect: float | None
    candidate_ivdchi_residual: float | None
    h: float


def flow_geodesibility(metric: ChartMetric, v_field, h, chi_candidate=None) -> GeodesibilityReport:
    """Numerical checks of the geodesibility conditions for a flow (p = 1).

    Reports |nabla_W W| for W = V/|V| (orbits-are-geodesics defect),
    the Lie-derivative drift of the leafwise volume form theta(W)chi,
    the Killing defect |L_V mu|, and, when a candidate 1-form chi with
    chi(V) = 1 is supplied, the i_V dchi residual.
    """
    if metric.p != 1:
        raise NotImplementedError("flow checks expect a 1-dimensional foliation")
    mesh = grid_mesh(metric.bounds, h)
    g = evaluate_metric(metric, mesh)
    gamma = christoffel(g, h)
    m = metric.m
    shape = mesh[0].shape
    idx = interior(shape)

    v = v_field(tuple(mesh)) if callable(v_field) else np.broadcast_to(v_field, shape + (m,))
    v = np.asarray(v, dtype=float)
    speed2 = np.einsum("...a,...ab,...b->...", v, g, v)
    if np.min(speed2) < 1e-24:
        raise ZeroVector("flow field vanishes on the chart")
    w = v / np.sqrt(speed2)[..., None]

    dw = np.stack(_partials(w, h, m), axis=-2)
    nabla_ww = (np.einsum("...a,...ab->...b", w, dw)
                + np.einsum("...a,...c,...bac->...b", w, w, gamma))
    norm = np.sqrt(np.abs(np.einsum("...a,...ab,...b->...", nabla_ww, g, nabla_ww)))
    geodesic_defect = float(np.max(norm[idx]))

    frame = leafwise_frame(metric, mesh)
    chi = _chi_covector(metric, mesh, g, frame)
    dchi_comp = np.stack(_partials(chi, h, m), axis=-2)
    dw_full = dw
    lie_chi = (np.einsum("...b,...ba->...a", w, dchi_comp)
               + np.einsum("...b,...ab->...a", chi, dw_full))
    leaf_drift = float(np.max(np.abs(lie_chi[idx])))

    dg = np.stack(_partials(g, h, m), axis=-3)
    dv = np.stack(_partials(v, h, m), axis=-2)
    lie_g = (np.einsum("...c,...cab->...ab", v, dg)
             + np.einsum("...cb,...ac->...ab", g, dv)
             + np.einsum("...ac,...bc->...ab", g, dv))
    killing = float(np.max(np.abs(lie_g[idx])))

    pairing_defect = None
    iv_dchi = None
    if chi_candidate is not None:
        cand = chi_candidate(tuple(mesh)) if callable(chi_candidate) else np.broadcast_to(
            chi_candidate, shape + (m,))
        cand = np.asarray(cand, dtype=float)
        pairing = np.einsum("...a,...a->...", cand, v)
        pairing_defect = float(np.max(np.abs(pairing[idx] - 1.0)))
        dcand = np.stack(_partials(cand, h, m), axis=-2)
        two_form = dcand - np.swapaxes(dcand, -1, -2)     # (d chi)_{ab}
        contr = np.einsum("...a,...ab->...b", v, two_form)
        iv_dchi = float(np.max(np.abs(contr[idx])))

    return GeodesibilityReport(
        geodesic_defect=geodesic_defect,
        leafwise_volume_drift=leaf_drift,
        killing_defect=killing,
        candidate_pairing_defect=pairing_defect,
        candidate_ivdchi_residual=iv_dchi,
        h=h,
    )


def conformal_rescale(metric: ChartMetric, f, samples=9) -> ChartMetric:
    """Leafwise conformal rescaling: leaf block scaled by e^(2 f / p).

    ``f`` must be basic (transverse-only): the new mean curvature form
    then satisfies kappa' = kappa - df up to the O(h^2) stencil error.
    Raises NotBasic when f varies along the leaves beyond 1e-12.
    """
    p = metric.p
    axes = [np.linspace(lo, hi, samples) for lo, hi in metric.bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    vals = np.asarray(f(tuple(mesh)), dtype=float)
    vals = np.broadcast_to(vals, mesh[0].shape)
    leaf_variation = 0.0
    for a in range(p):
        leaf_variation = max(leaf_variation,
                             float(np.max(np.abs(np.ptp(vals, axis=a)))))
    if leaf_variation > 1e-12:
        raise NotBasic(f"rescaling function varies leafwise by {leaf_variation:.3e}")

    old_leaf = metric.leaf_block

    def new_leaf(coords):
        factor = np.exp(2.0 * np.asarray(f(coords), dtype=float) / p)
        return factor[..., None, None] * old_leaf(coords)

    return ChartMetric(bounds=metric.bounds, p=p, leaf_block=new_leaf,
                       transverse_block=metric.transverse_block)


# --------------------------------------------------------------------------
# ready-made charts used across the tests and the CLI examples
# --------------------------------------------------------------------------

def warped_chart(bounds=((0.0, 1.0), (0.0, 1.0))):
    """Leaves {y = const} with metric e^{2y} dx^2 + dy^2 (kappa = -dy)."""
    return ChartMetric(
        bounds=bounds, p=1,
        leaf_block=scalar_block(lambda x, y: np.exp(2.0 * y)),
        transverse_block=scalar_block(lambda y: np.ones_like(y)),
    )


def product_chart(bounds=((0.0, 1.0), (0.0, 1.0))):
    """Totally geodesic leaves: flat product metric."""
    return ChartMetric(
        bounds=bounds, p=1,
        leaf_block=scalar_block(lambda x, y: np.ones_like(x)),
        transverse_block=scalar_block(lambda y: np.ones_like(y)),
    )


def carriere_chart(lam, bounds=((0.0, 0.5), (0.0, 0.5), (0.0, 0.5))):
    """Local model of the hyperbolic suspension flow.

    Coordinates (w, t, s): flow direction w leafwise with |dw|^2 =
    lam^{2t}, transverse block dt^2 + lam^{-2t} ds^2.  The transverse
    part of the mean curvature form is -log(lam) dt.
    """
    log_lam = float(np.log(lam))

    def leaf(coords):
        w, t, s = coords
        return np.exp(2.0 * log_lam * t)[..., None, None]

    def trans(coords):
        t, s = coords
        shape = np.broadcast(t, s).shape
        out = np.zeros(shape + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = np.exp(-2.0 * log_lam * t)
        return out

    return ChartMetric(bounds=bounds, p=1, leaf_block=leaf, transverse_block=trans)
