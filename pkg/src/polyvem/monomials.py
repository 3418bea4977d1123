"""Scaled monomial algebra on a local element frame.

Basis members are powers of the centered, diameter-scaled coordinates
X = (x - xc)/h and Y = (y - yc)/h.  The ordering is graded: degree blocks
ascending, and inside a degree the x exponent decreases, so for k = 2 the
basis reads 1, X, Y, X^2, X*Y, Y^2.  Keeping the algebra symbolic (products,
derivatives, laplacians) is what lets the element matrices avoid quadrature
wherever a moment identity applies.
"""

from dataclasses import dataclass

import numpy as np


def basis_size(k):
    """Dimension of the polynomial space of degree <= k (0 for k < 0)."""
    if k < 0:
        return 0
    return (k + 1) * (k + 2) // 2


def basis_index(ex, ey):
    """Position of X^ex Y^ey in the graded ordering."""
    if ex < 0 or ey < 0:
        raise ValueError("exponents must be nonnegative")
    d = ex + ey
    return d * (d + 1) // 2 + ey


def basis_exponents(k):
    """Exponent pairs (ex, ey) for every member of the degree-k basis."""
    out = []
    for d in range(k + 1):
        for ey in range(d + 1):
            out.append((d - ey, ey))
    return out


@dataclass(frozen=True)
class ScaledMonomial:
    """coeff * X^ex * Y^ey in the scaled frame of some element."""

    ex: int
    ey: int
    coeff: float = 1.0

    @property
    def degree(self):
        return self.ex + self.ey

    def __mul__(self, other):
        return ScaledMonomial(
            self.ex + other.ex, self.ey + other.ey, self.coeff * other.coeff
        )

    def derivative(self, var):
        """Derivative in the scaled variable (no 1/h factor)."""
        if var == "x":
            if self.ex == 0:
                return ScaledMonomial(0, 0, 0.0)
            return ScaledMonomial(self.ex - 1, self.ey, self.coeff * self.ex)
        if var == "y":
            if self.ey == 0:
                return ScaledMonomial(0, 0, 0.0)
            return ScaledMonomial(self.ex, self.ey - 1, self.coeff * self.ey)
        raise ValueError("var must be 'x' or 'y'")

    def evaluate(self, points, frame):
        """Value at physical points, frame = (xc, yc, h)."""
        xc, yc, h = frame
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        X = (pts[:, 0] - xc) / h
        Y = (pts[:, 1] - yc) / h
        vals = self.coeff * X ** self.ex * Y ** self.ey
        if np.ndim(points) == 1:
            return float(vals[0])
        return vals

    def __repr__(self):
        return "ScaledMonomial(X^%d Y^%d, coeff=%g)" % (self.ex, self.ey, self.coeff)


def product(a, b):
    return a * b


def laplacian_terms(m, h):
    """Physical laplacian of m as a short list of scaled monomials.

    The two second derivatives each bring a 1/h^2 factor, absorbed into the
    returned coefficients.  At most two terms come back, both of degree
    m.degree - 2; harmonic-by-exponent members (1, X, Y, X*Y, ...) give [].
    """
    out = []
    c = m.coeff / (h * h)
    if m.ex >= 2:
        out.append(ScaledMonomial(m.ex - 2, m.ey, c * m.ex * (m.ex - 1)))
    if m.ey >= 2:
        out.append(ScaledMonomial(m.ex, m.ey - 2, c * m.ey * (m.ey - 1)))
    return out


class MonomialBasis:
    """The full scaled monomial basis of degree <= k, frame-agnostic.

    Evaluation helpers take the frame explicitly so one basis object can be
    reused across elements of the same order.
    """

    def __init__(self, k):
        if k < 0:
            raise ValueError("basis degree must be >= 0")
        self.k = k
        self.exponents = basis_exponents(k)
        self.members = [ScaledMonomial(ex, ey) for ex, ey in self.exponents]
        self._ex = np.array([e[0] for e in self.exponents])
        self._ey = np.array([e[1] for e in self.exponents])

    @property
    def size(self):
        return len(self.members)

    def index_of(self, ex, ey):
        i = basis_index(ex, ey)
        if i >= self.size:
            raise ValueError("exponents exceed basis degree")
        return i

    def _scaled(self, points, frame):
        xc, yc, h = frame
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts[:, 0] - xc) / h, (pts[:, 1] - yc) / h

    def eval(self, points, frame):
        """Values at points, as an (npoints, size) matrix."""
        X, Y = self._scaled(points, frame)
        return X[:, None] ** self._ex[None, :] * Y[:, None] ** self._ey[None, :]

    def grad(self, points, frame):
        """Physical gradients at points: a pair of (npoints, size) matrices."""
        X, Y = self._scaled(points, frame)
        h = frame[2]
        exm = np.maximum(self._ex - 1, 0)
        eym = np.maximum(self._ey - 1, 0)
        gx = (self._ex[None, :] / h) * X[:, None] ** exm[None, :] * Y[:, None] ** self._ey[None, :]
        gy = (self._ey[None, :] / h) * X[:, None] ** self._ex[None, :] * Y[:, None] ** eym[None, :]
        return gx, gy
