"""Element matrices: projectors, stiffness and the tag-keyed cache.

Everything here is computable from boundary traces and moment dofs alone.
The energy projector onto degree-k polynomials is obtained from a Gram
matrix of monomial gradients (row zero swapped for a boundary-average
constraint to pin the constant) and a right-hand side assembled by parts:
an edge term sampled at the Lobatto trace nodes plus a volume term that
reads moment dofs exactly.  The stiffness adds a plain dof-difference
penalty on the complement of the projector, which is enough for spectral
equivalence on shape-regular polygons.

Matrices are requested by tag through `find_or_compute`, which walks the
dependency graph and memoizes per element, so a stiffness request performs
each intermediate computation once.
"""

import enum
from collections import namedtuple

import numpy as np

from .errors import SingularG, SingularH, UnknownTag
from .monomials import MonomialBasis, basis_index, basis_size, laplacian_terms
from .quadrature import gauss_lobatto_1d, polygon_rule
from .vemspace import build_layout

COND_LIMIT = 1e12


class MatrixTag(enum.Enum):
    D = "dof-values-of-monomials"
    B = "projector-rhs"
    G = "projector-gram"
    H = "monomial-mass"
    PI_GRAD_STAR = "energy-projector-coefficients"
    PI_GRAD = "energy-projector-dof-form"
    PI_ZERO_STAR = "moment-projector-coefficients"
    STIFFNESS = "stiffness"


class Element:
    """One polygon at one order: layout, monomial basis, quadrature cache."""

    def __init__(self, facet, k):
        if k < 1:
            raise ValueError("order must be >= 1")
        self.facet = facet
        self.k = int(k)
        self.basis = MonomialBasis(k)
        self.layout = build_layout(facet, k)
        self._rules = {}

    @property
    def frame(self):
        return self.facet.frame

    def rule(self, degree):
        if degree not in self._rules:
            self._rules[degree] = polygon_rule(self.facet, degree)
        return self._rules[degree]


class ElementMatrixCache:
    """Computed matrices of one element, keyed by tag.

    compute_count tracks how many matrix evaluations actually ran, which
    lets callers verify that repeated requests hit the cache.
    """

    def __init__(self):
        self._store = {}
        self.compute_count = 0

    def __contains__(self, tag):
        return tag in self._store

    def get(self, tag):
        return self._store[tag]

    def put(self, tag, value):
        self._store[tag] = value

    def tags(self):
        return list(self._store)


MatrixRule = namedtuple("MatrixRule", ["deps", "fn"])

MATRIX_REGISTRY = {}


def register_matrix(tag, deps, fn, overwrite=False):
    if tag in MATRIX_REGISTRY and not overwrite:
        raise ValueError("matrix tag already registered: %r" % (tag,))
    MATRIX_REGISTRY[tag] = MatrixRule(tuple(deps), fn)


def find_or_compute(cache, element, tag):
    """Matrix for `tag`, computing and caching any missing dependencies."""
    try:
        rule = MATRIX_REGISTRY[tag]
    except KeyError:
        raise UnknownTag("no matrix computation registered for %r" % (tag,))
    if tag in cache:
        return cache.get(tag)
    for dep in rule.deps:
        find_or_compute(cache, element, dep)
    value = rule.fn(element, cache)
    cache.put(tag, value)
    cache.compute_count += 1
    return value


def _symmetric_gram(V, W, weights):
    # accumulate only the upper triangle and mirror it, so the result is
    # symmetric to the bit regardless of summation order
    n = V.shape[1]
    M = np.empty((n, n))
    Vw = V * weights[:, None]
    for a in range(n):
        for b in range(a, n):
            M[a, b] = float(np.dot(Vw[:, a], W[:, b]))
            M[b, a] = M[a, b]
    return M


def _boundary_monomial_average(element):
    # average of each scaled monomial over the full boundary, holes
    # included, sampled with the k+1 point Lobatto rule per edge
    k, basis, frame = element.k, element.basis, element.frame
    t, w = gauss_lobatto_1d(k + 1)
    total = np.zeros(basis.size)
    for e in element.layout.edges:
        pts = e.p0[None, :] + t[:, None] * (e.p1 - e.p0)[None, :]
        vals = basis.eval(pts, frame)
        total += e.length * (w @ vals)
    return total / element.facet.perimeter


def _compute_d(element, cache):
    layout, basis = element.layout, element.basis
    D = np.empty((layout.num_dofs, basis.size))
    pts = np.array([d.point for d in layout.dofs[: layout.moment_offset]])
    D[: layout.moment_offset] = basis.eval(pts, element.frame)
    if layout.num_moment_dofs:
        rule = element.rule(2 * element.k - 2)
        V = basis.eval(rule.points, element.frame)
        Vm = V[:, : layout.num_moment_dofs]
        D[layout.moment_offset :] = (
            (Vm * rule.weights[:, None]).T @ V
        ) / element.facet.area
    return D


def _compute_h(element, cache):
    rule = element.rule(2 * element.k)
    V = element.basis.eval(rule.points, element.frame)
    H = _symmetric_gram(V, V, rule.weights)
    if np.linalg.cond(H) > COND_LIMIT:
        raise SingularH(
            "monomial mass matrix is numerically singular; the element "
            "geometry is too degenerate for this order"
        )
    return H


def _compute_g(element, cache):
    rule = element.rule(max(2 * element.k - 2, 0))
    gx, gy = element.basis.grad(rule.points, element.frame)
    G = _symmetric_gram(gx, gx, rule.weights)
    G += _symmetric_gram(gy, gy, rule.weights)
    G[0, :] = _boundary_monomial_average(element)
    return G


def _compute_b(element, cache):
    k, layout, basis = element.k, element.layout, element.basis
    B = np.zeros((basis.size, layout.num_dofs))
    t, w = gauss_lobatto_1d(k + 1)
    for i_edge, e in enumerate(layout.edges):
        pts = e.p0[None, :] + t[:, None] * (e.p1 - e.p0)[None, :]
        gx, gy = basis.grad(pts, element.frame)
        gn = gx * e.normal[0] + gy * e.normal[1]
        chain = layout.edge_dof_chain(i_edge)
        for j, dof in enumerate(chain):
            B[:, dof] += w[j] * e.length * gn[j, :]
    if layout.num_moment_dofs:
        h = element.frame[2]
        for s, m in enumerate(basis.members):
            for term in laplacian_terms(m, h):
                col = layout.moment_offset + basis_index(term.ex, term.ey)
                B[s, col] -= term.coeff * element.facet.area
    B[0, :] = 0.0
    for i_edge, e in enumerate(layout.edges):
        chain = layout.edge_dof_chain(i_edge)
        for j, dof in enumerate(chain):
            B[0, dof] += w[j] * e.length
    B[0, :] /= element.facet.perimeter
    return B


def _compute_pi_grad_star(element, cache):
    G = cache.get(MatrixTag.G)
    B = cache.get(MatrixTag.B)
    if np.linalg.cond(G) > COND_LIMIT:
        raise SingularG("projector Gram matrix is numerically singular")
    try:
        return np.linalg.solve(G, B)
    except np.linalg.LinAlgError as err:
        raise SingularG("projector Gram matrix is singular: %s" % err)


def _compute_pi_grad(element, cache):
    return cache.get(MatrixTag.D) @ cache.get(MatrixTag.PI_GRAD_STAR)


def _compute_pi_zero_star(element, cache):
    layout = element.layout
    if element.k == 1:
        # no moments are available; project onto constants through the
        # vertex average, which is all the dofs can see
        n = layout.num_dofs
        return np.full((1, n), 1.0 / n)
    nm = layout.num_moment_dofs
    Hm = cache.get(MatrixTag.H)[:nm, :nm]
    C = np.zeros((nm, layout.num_dofs))
    for a in range(nm):
        C[a, layout.moment_offset + a] = element.facet.area
    return np.linalg.solve(Hm, C)


def _compute_stiffness(element, cache):
    PiS = cache.get(MatrixTag.PI_GRAD_STAR)
    PiN = cache.get(MatrixTag.PI_GRAD)
    G_raw = cache.get(MatrixTag.G).copy()
    G_raw[0, :] = 0.0
    K = PiS.T @ G_raw @ PiS
    R = np.eye(element.layout.num_dofs) - PiN
    return K + R.T @ R


register_matrix(MatrixTag.D, (), _compute_d)
register_matrix(MatrixTag.H, (), _compute_h)
register_matrix(MatrixTag.G, (), _compute_g)
register_matrix(MatrixTag.B, (), _compute_b)
register_matrix(MatrixTag.PI_GRAD_STAR, (MatrixTag.G, MatrixTag.B), _compute_pi_grad_star)
register_matrix(MatrixTag.PI_GRAD, (MatrixTag.D, MatrixTag.PI_GRAD_STAR), _compute_pi_grad)
register_matrix(MatrixTag.PI_ZERO_STAR, (MatrixTag.H,), _compute_pi_zero_star)
register_matrix(
    MatrixTag.STIFFNESS,
    (MatrixTag.G, MatrixTag.PI_GRAD_STAR, MatrixTag.PI_GRAD),
    _compute_stiffness,
)


def load_vector(element, f, cache=None):
    """Right-hand side contribution of a source term f, called as f(x, y).

    For k = 1 the element has no moments, so f is collapsed to its vertex
    average.  From k = 2 on, f is paired with the computable surrogate
    Pi0(phi) + (I - Pi0)(PiGrad(phi)): the first part reads moment dofs
    exactly and the second is orthogonal to low-order polynomials, so the
    load is exact whenever f has degree <= k-2 and keeps the L2 order
    k+1 for smooth sources, where the plain moment pairing stalls at
    order 2 when k = 2.
    """
    layout = element.layout
    if element.k == 1:
        pts = np.array([d.point for d in layout.dofs])
        favg = float(np.mean(f(pts[:, 0], pts[:, 1])))
        return np.full(layout.num_dofs, favg * element.facet.area / layout.num_dofs)
    if cache is None:
        cache = ElementMatrixCache()
    PiZ = find_or_compute(cache, element, MatrixTag.PI_ZERO_STAR)
    PiS = find_or_compute(cache, element, MatrixTag.PI_GRAD_STAR)
    H = find_or_compute(cache, element, MatrixTag.H)
    rule = element.rule(2 * element.k + 2)
    V = element.basis.eval(rule.points, element.frame)
    fv = np.asarray(f(rule.points[:, 0], rule.points[:, 1]), dtype=float)
    mf = (V * (rule.weights * fv)[:, None]).sum(axis=0)
    nm = layout.num_moment_dofs
    low = np.linalg.solve(H[:nm, :nm], mf[:nm])
    return PiZ.T @ mf[:nm] + PiS.T @ (mf - H[:nm, :].T @ low)
