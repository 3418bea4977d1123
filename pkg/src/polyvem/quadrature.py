"""Quadrature on edges, polygons (holes included) and planar 3d faces.

Polygon rules come from triangulating the facet and mapping symmetric
reference-triangle rules; every base rule here has positive weights, so the
moment-matching compression below always has a feasible nonnegative
solution.  The analytic monomial integral (Green's theorem reduced to edge
integrals) is deliberately independent of the triangulation path and serves
as the exactness oracle for everything else.
"""

import enum
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg

from . import monomials
from .errors import NonPlanarFace, UnknownTag
from .geometry import Facet, face_frame, triangulate


class QuadratureKind(enum.Enum):
    GAUSS_EDGE = "gauss_edge"
    GAUSS_LOBATTO_EDGE = "gauss_lobatto_edge"
    TRIANGULATED_POLYGON = "triangulated_polygon"
    COMPRESSED_POLYGON = "compressed_polygon"
    PLANAR_FACE = "planar_face"


@dataclass
class QuadratureRule:
    """Points (n, dim), weights (n,), the degree the rule is exact for."""

    points: np.ndarray
    weights: np.ndarray
    degree: int
    kind: QuadratureKind
    compressed: bool = False
    compression_failed: bool = False

    @property
    def npoints(self):
        return int(self.weights.size)


@lru_cache(maxsize=None)
def gauss_1d(n):
    """Gauss-Legendre nodes and weights on [0, 1]; exact to degree 2n-1."""
    if n < 1:
        raise ValueError("need at least one Gauss point")
    x, w = npleg.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def gauss_lobatto_1d(npts):
    """Gauss-Lobatto nodes and weights on [0, 1], endpoints included.

    Interior nodes are the roots of the derivative of the Legendre
    polynomial of degree npts-1; the classical closed-form weight is
    2 / (n (n-1) P_{n-1}(x)^2) on [-1, 1].  Exact to degree 2*npts - 3.
    """
    if npts < 2:
        raise ValueError("Gauss-Lobatto needs at least the two endpoints")
    c = np.zeros(npts)
    c[-1] = 1.0  # Legendre series for P_{npts-1}
    interior = npleg.legroots(npleg.legder(c))
    x = np.concatenate([[-1.0], np.sort(np.real(interior)), [1.0]])
    pvals = npleg.legval(x, c)
    w = 2.0 / (npts * (npts - 1) * pvals ** 2)
    return (x + 1.0) / 2.0, w / 2.0


def gauss_edge(p0, p1, n):
    """Gauss rule along the segment p0-p1; weights sum to its length."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    t, w = gauss_1d(n)
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    length = float(np.linalg.norm(p1 - p0))
    return QuadratureRule(pts, w * length, 2 * n - 1, QuadratureKind.GAUSS_EDGE)


def gauss_lobatto_edge(p0, p1, k):
    """Lobatto rule with k+1 nodes along p0-p1, endpoints included."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    t, w = gauss_lobatto_1d(k + 1)
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    length = float(np.linalg.norm(p1 - p0))
    return QuadratureRule(pts, w * length, 2 * k - 1, QuadratureKind.GAUSS_LOBATTO_EDGE)


# Symmetric positive-weight rules on the unit triangle {x, y >= 0, x+y <= 1};
# weights sum to 1/2.  Degrees 1-2 are the classic Zienkiewicz/Strang-Fix
# points, 3-6 the Strang-Fix / Dunavant positive families.
_TRIANGLE_TABLES = {
    1: (
        [[1.0 / 3.0, 1.0 / 3.0]],
        [0.5],
    ),
    2: (
        [[1.0 / 6.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0], [2.0 / 3.0, 1.0 / 6.0]],
        [1.0 / 6.0] * 3,
    ),
    3: (
        [
            [0.659027622374092, 0.231933368553031],
            [0.659027622374092, 0.109039009072877],
            [0.231933368553031, 0.659027622374092],
            [0.231933368553031, 0.109039009072877],
            [0.109039009072877, 0.659027622374092],
            [0.109039009072877, 0.231933368553031],
        ],
        [1.0 / 12.0] * 6,
    ),
    4: (
        [
            [0.816847572980459, 0.091576213509771],
            [0.091576213509771, 0.816847572980459],
            [0.091576213509771, 0.091576213509771],
            [0.108103018168070, 0.445948490915965],
            [0.445948490915965, 0.108103018168070],
            [0.445948490915965, 0.445948490915965],
        ],
        [0.109951743655322 / 2.0] * 3 + [0.223381589678011 / 2.0] * 3,
    ),
    5: (
        [
            [1.0 / 3.0, 1.0 / 3.0],
            [0.79742698535308720, 0.10128650732345633],
            [0.10128650732345633, 0.79742698535308720],
            [0.10128650732345633, 0.10128650732345633],
            [0.05971587178976981, 0.47014206410511505],
            [0.47014206410511505, 0.05971587178976981],
            [0.47014206410511505, 0.47014206410511505],
        ],
        [0.225 / 2.0]
        + [0.12593918054482717 / 2.0] * 3
        + [0.13239415278850616 / 2.0] * 3,
    ),
    6: (
        [
            [0.873821971016996, 0.063089014491502],
            [0.063089014491502, 0.873821971016996],
            [0.063089014491502, 0.063089014491502],
            [0.501426509658179, 0.249286745170910],
            [0.249286745170910, 0.501426509658179],
            [0.249286745170910, 0.249286745170910],
            [0.636502499121399, 0.310352451033785],
            [0.636502499121399, 0.053145049844816],
            [0.310352451033785, 0.636502499121399],
            [0.310352451033785, 0.053145049844816],
            [0.053145049844816, 0.636502499121399],
            [0.053145049844816, 0.310352451033785],
        ],
        [0.050844906370207 / 2.0] * 3
        + [0.116786275726379 / 2.0] * 3
        + [0.082851075618374 / 2.0] * 6,
    ),
}


@lru_cache(maxsize=None)
def _triangle_rule(degree):
    """Reference-triangle points/weights exact to the requested degree.

    Embedded tables up to degree 6; beyond that a collapsed (Duffy) product
    Gauss rule, which stays positive at any degree.
    """
    d = max(degree, 1)
    if d in _TRIANGLE_TABLES:
        pts, wts = _TRIANGLE_TABLES[d]
        return np.array(pts, dtype=float), np.array(wts, dtype=float)
    n1 = (d + 3) // 2
    n2 = (d + 2) // 2
    x1, w1 = gauss_1d(n1)
    x2, w2 = gauss_1d(n2)
    X, Y = np.meshgrid(x1, x2, indexing="ij")
    W = np.outer(w1 * (1.0 - x1), w2)
    pts = np.column_stack([X.ravel(), (Y * (1.0 - X)).ravel()])
    return pts, W.ravel()


def polygon_rule(facet, degree):
    """Quadrature over a facet, exact for scaled monomials up to degree.

    Triangulates (holes handled there) and maps the reference-triangle rule
    onto every triangle; weights sum to the facet area.
    """
    if degree < 0:
        raise ValueError("quadrature degree must be >= 0")
    ref_pts, ref_wts = _triangle_rule(degree)
    tris = triangulate(facet)
    coords = facet.coords
    all_pts = []
    all_wts = []
    for (i, j, k) in tris:
        a = coords[i]
        b = coords[j]
        c = coords[k]
        e1 = b - a
        e2 = c - a
        jac = e1[0] * e2[1] - e1[1] * e2[0]  # 2 * triangle area, positive
        pts = a[None, :] + np.outer(ref_pts[:, 0], e1) + np.outer(ref_pts[:, 1], e2)
        all_pts.append(pts)
        all_wts.append(ref_wts * jac)
    return QuadratureRule(
        np.concatenate(all_pts),
        np.concatenate(all_wts),
        degree,
        QuadratureKind.TRIANGULATED_POLYGON,
    )


def monomial_integral(facet, ex, ey, frame=None):
    """Exact integral of the scaled monomial X^ex Y^ey over the facet.

    Green's theorem turns the area integral into edge integrals of the
    x-antiderivative, each a 1d polynomial handled by a Gauss rule of the
    right order.  Independent of the triangulation path on purpose: this is
    the oracle that certifies polygon rules.
    """
    if ex < 0 or ey < 0:
        raise ValueError("exponents must be nonnegative")
    if frame is None:
        frame = facet.frame
    xc, yc, h = frame
    npts = (ex + ey + 2 + 1) // 2  # integrand degree ex+1+ey along each edge
    t, w = gauss_1d(npts)
    total = 0.0
    for loop in facet.loops():
        pts = (loop.points() - np.array([xc, yc])) / h
        nxt = np.roll(pts, -1, axis=0)
        for (u0, v0), (u1, v1) in zip(pts, nxt):
            dv = v1 - v0
            if dv == 0.0:
                continue
            ut = u0 + t * (u1 - u0)
            vt = v0 + t * dv
            total += dv / (ex + 1) * float(np.sum(w * ut ** (ex + 1) * vt ** ey))
    return total * h * h


def certify_rule(rule, facet, degree=None, tol=1e-12, frame=None):
    """Compare a polygon rule against the analytic oracle.

    Returns (ok, max_error) with errors relative to max(|exact|, area).
    """
    if degree is None:
        degree = rule.degree
    if frame is None:
        frame = facet.frame
    basis = monomials.MonomialBasis(degree)
    vals = basis.eval(rule.points, frame)
    approx = vals.T @ rule.weights
    worst = 0.0
    for idx, (ex, ey) in enumerate(basis.exponents):
        exact = monomial_integral(facet, ex, ey, frame=frame)
        err = abs(approx[idx] - exact) / max(abs(exact), facet.area)
        worst = max(worst, err)
    return worst <= tol, worst


def nnls(A, b, maxiter=None):
    """Nonnegative least squares by the Lawson-Hanson active-set method.

    Column selection is deterministic: the largest entry of the gradient
    wins and ties go to the lowest index (np.argmax does exactly that), so
    compressed quadrature points never depend on iteration order or
    platform.  Returns (x, residual_norm).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if maxiter is None:
        maxiter = 3 * max(m, n)
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    tol = 10.0 * np.finfo(float).eps * max(m, n) * max(float(np.abs(A).sum(axis=0).max()), 1.0)
    outer = 0
    while True:
        resid = b - A @ x
        w = A.T @ resid
        w = np.where(passive, -np.inf, w)
        j = int(np.argmax(w))
        if not np.isfinite(w[j]) or w[j] <= tol or passive.sum() >= m:
            break
        passive[j] = True
        while True:
            outer += 1
            if outer > maxiter:
                return x, float(np.linalg.norm(b - A @ x))
            cols = np.flatnonzero(passive)
            z = np.zeros(n)
            sol, *_ = np.linalg.lstsq(A[:, cols], b, rcond=None)
            z[cols] = sol
            if np.all(z[cols] > 0.0):
                x = z
                break
            neg = cols[z[cols] <= 0.0]
            steps = x[neg] / (x[neg] - z[neg])
            alpha = float(np.min(steps))
            x = x + alpha * (z - x)
            drop = passive & (x <= tol)
            x[drop] = 0.0
            passive &= ~drop
    return x, float(np.linalg.norm(b - A @ x))


def _exponent_tuples(degree, dim):
    """Graded exponent tuples for monomials of total degree <= degree."""
    out = []
    if dim == 2:
        return monomials.basis_exponents(degree)
    for d in range(degree + 1):
        for ex in range(d, -1, -1):
            for ey in range(d - ex, -1, -1):
                out.append((ex, ey, d - ex - ey))
    return out


def compress_rule(rule, frame=None, tol=1e-10):
    """Shrink a rule to at most dim(P_degree) points with the same moments.

    Works in any dimension: the moment system is assembled from scaled
    monomial values at the rule's own points, normalized by the measure, and
    solved as a nonnegative least-squares problem.  The surviving points are
    a subset of the input points.  If the residual exceeds tol times the
    measure the original rule is returned with compression_failed set; with
    positive input weights that cannot happen.
    """
    pts = np.asarray(rule.points, dtype=float)
    w = np.asarray(rule.weights, dtype=float)
    dim = pts.shape[1]
    if frame is None:
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        center = 0.5 * (lo + hi)
        h = float(max(np.max(hi - lo), 1.0))
    else:
        center, h = frame
        center = np.asarray(center, dtype=float)
    S = (pts - center) / h
    exps = _exponent_tuples(rule.degree, dim)
    A = np.empty((len(exps), pts.shape[0]))
    for r, e in enumerate(exps):
        col = np.ones(pts.shape[0])
        for ax, p in enumerate(e):
            if p:
                col = col * S[:, ax] ** p
        A[r] = col
    b = A @ w
    measure = float(np.sum(w))
    if measure <= 0.0:
        return replace(rule, compression_failed=True)
    # the monomial rows get badly conditioned from degree ~6 on and the
    # active-set gradient test then stops well short of the exact match
    # that positive input weights guarantee; orthonormalizing the rows
    # first keeps the gradient test meaningful at any degree
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = s > s[0] * np.finfo(float).eps * max(A.shape)
    c = (U.T @ (b / measure))[keep] / s[keep]
    x, _ = nnls(Vt[keep], c)
    rnorm = float(np.linalg.norm(A @ x - b / measure))
    if rnorm > tol:
        return replace(rule, compression_failed=True)
    sel = x > 0.0
    return QuadratureRule(
        pts[sel],
        x[sel] * measure,
        rule.degree,
        QuadratureKind.COMPRESSED_POLYGON,
        compressed=True,
    )


def compressed_polygon_rule(facet, degree, tol=1e-10):
    """Triangulated polygon rule followed by moment-matching compression."""
    base = polygon_rule(facet, degree)
    center = np.asarray(facet.centroid, dtype=float)
    return compress_rule(base, frame=(center, facet.diameter), tol=tol)


def planar_face_rule(coords, outer, holes=(), degree=2, tol=1e-10):
    """Polygon quadrature on a planar face embedded in 3d.

    Projects the face onto an orthonormal in-plane frame, builds the 2d
    rule and lifts the points back; weights are unchanged because the map is
    an isometry.  NonPlanarFace if any vertex (hole vertices included) sits
    off the plane by more than the relative tolerance.
    """
    coords = np.asarray(coords, dtype=float)
    origin, u, v, nrm = face_frame(coords, outer, tol=tol)
    used = []
    for loop in [list(outer)] + [list(h) for h in holes]:
        used.extend(loop)
    pts3 = coords[used]
    dev = np.abs((pts3 - origin) @ nrm)
    d2 = np.sum((pts3[:, None, :] - pts3[None, :, :]) ** 2, axis=2)
    diam = float(np.sqrt(np.max(d2)))
    if float(np.max(dev)) > tol * diam:
        raise NonPlanarFace("face vertices are not coplanar")
    remap = {}
    flat = np.empty((len(used), 2))
    for idx, vid in enumerate(used):
        remap.setdefault(vid, len(remap))
        q = coords[vid] - origin
        flat[remap[vid]] = (float(q @ u), float(q @ v))
    coords2 = flat[: len(remap)]
    outer2 = [remap[i] for i in outer]
    holes2 = [[remap[i] for i in h] for h in holes]
    facet = Facet(coords2, outer2, holes2)
    rule2 = polygon_rule(facet, degree)
    lifted = origin[None, :] + np.outer(rule2.points[:, 0], u) + np.outer(rule2.points[:, 1], v)
    return QuadratureRule(lifted, rule2.weights, degree, QuadratureKind.PLANAR_FACE)


RULE_BUILDERS = {}


def register_rule_builder(kind, builder, overwrite=False):
    """Extension seam: map a QuadratureKind (or any tag) to a constructor."""
    if kind in RULE_BUILDERS and not overwrite:
        raise ValueError("builder for %r already registered" % (kind,))
    RULE_BUILDERS[kind] = builder


def make_rule(kind, **kwargs):
    """Construct a rule through the registry; UnknownTag when unmapped."""
    try:
        builder = RULE_BUILDERS[kind]
    except KeyError:
        raise UnknownTag("no quadrature builder registered for %r" % (kind,)) from None
    return builder(**kwargs)


register_rule_builder(QuadratureKind.GAUSS_EDGE, gauss_edge)
register_rule_builder(QuadratureKind.GAUSS_LOBATTO_EDGE, gauss_lobatto_edge)
register_rule_builder(QuadratureKind.TRIANGULATED_POLYGON, polygon_rule)
register_rule_builder(QuadratureKind.COMPRESSED_POLYGON, compressed_polygon_rule)
register_rule_builder(QuadratureKind.PLANAR_FACE, planar_face_rule)
