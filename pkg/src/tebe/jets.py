"""Second-order forward-mode jets in the Wirtinger variables (z, zbar, y).

A :class:`Jet` carries a value, its gradient with respect to (z, zbar, y) and
its Hessian, vectorized over an arbitrary array of evaluation points.  Values
may be scalars per point or 2x2 matrices per point (``mat=True``).  Taking a
partial derivative drops one order, so fields built from first derivatives of
the metric still carry exact first derivatives of their own.
"""
from __future__ import annotations

import numpy as np

NVAR = 3
Z, ZBAR, YVAR = 0, 1, 2
_SWAP = [ZBAR, Z, YVAR]


def _exp_scalar(a, mat):
    return a[..., None, None] if mat else a


class Jet:
    __slots__ = ("val", "grad", "hess", "mat")
    __array_priority__ = 100

    def __init__(self, val, grad=None, hess=None, mat=False):
        self.val = np.asarray(val, dtype=complex)
        self.grad = None if grad is None else np.asarray(grad, dtype=complex)
        self.hess = None if hess is None else np.asarray(hess, dtype=complex)
        if self.grad is None:
            self.hess = None
        self.mat = mat

    # -- construction ------------------------------------------------------
    @classmethod
    def variable(cls, value, index):
        value = np.asarray(value, dtype=complex)
        grad = np.zeros((NVAR,) + value.shape, complex)
        grad[index] = 1.0
        return cls(value, grad, np.zeros((NVAR, NVAR) + value.shape, complex))

    @classmethod
    def const(cls, value, like: "Jet"):
        value = np.broadcast_to(np.asarray(value, complex), like.val.shape).copy()
        g = None if like.grad is None else np.zeros((NVAR,) + value.shape, complex)
        h = None if like.hess is None else np.zeros((NVAR, NVAR) + value.shape, complex)
        return cls(value, g, h, like.mat)

    @property
    def order(self) -> int:
        return 0 if self.grad is None else (1 if self.hess is None else 2)

    def _trunc(self, order):
        return Jet(self.val, self.grad if order >= 1 else None,
                   self.hess if order >= 2 else None, self.mat)

    # -- helpers -----------------------------------------------------------
    def _lift(self, other):
        if isinstance(other, Jet):
            return other
        return Jet.const(other, self._trunc(0))._as(self)

    def _as(self, like):
        # constant with the same order as ``like``
        shape = self.val.shape
        g = None if like.grad is None else np.zeros((NVAR,) + shape, complex)
        h = None if like.hess is None else np.zeros((NVAR, NVAR) + shape, complex)
        return Jet(self.val, g, h, self.mat)

    @staticmethod
    def _align(a: "Jet", b: "Jet"):
        """Return arrays of a and b broadcast for elementwise products."""
        if a.mat == b.mat:
            f = lambda x: x
            return a, b, f, f, a.mat
        if a.mat:
            return a, b, (lambda x: x), (lambda x: _exp_scalar(x, True)), True
        return a, b, (lambda x: _exp_scalar(x, True)), (lambda x: x), True

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.val + other, self.grad, self.hess, self.mat)
        o = min(self.order, other.order)
        a, b, fa, fb, mat = self._align(self, other)
        g = None if o < 1 else _bsum(a.grad, b.grad, fa, fb, 1)
        h = None if o < 2 else _bsum(a.hess, b.hess, fa, fb, 2)
        return Jet(fa(a.val) + fb(b.val), g, h, mat)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, None if self.grad is None else -self.grad,
                   None if self.hess is None else -self.hess, self.mat)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.val * other, None if self.grad is None else self.grad * other,
                       None if self.hess is None else self.hess * other, self.mat)
        return _product(self, other, np.multiply)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return _product(self, other, np.matmul)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        return self.apply(self.val ** p, p * self.val ** (p - 1), p * (p - 1) * self.val ** (p - 2))

    # -- elementary functions (scalar jets) -----------------------------------
    def apply(self, f0, f1, f2):
        """Compose a univariate function given its value and two derivatives."""
        if self.mat:
            raise TypeError("apply is defined for scalar jets only")
        g = None if self.grad is None else f1 * self.grad
        h = None
        if self.hess is not None:
            h = f1 * self.hess + f2 * self.grad[:, None] * self.grad[None, :]
        return Jet(f0, g, h)

    def reciprocal(self):
        if self.mat:
            return inv2(self)
        v = self.val
        return self.apply(1 / v, -1 / v ** 2, 2 / v ** 3)

    def exp(self):
        e = np.exp(self.val)
        return self.apply(e, e, e)

    def log(self):
        v = self.val
        return self.apply(np.log(v), 1 / v, -1 / v ** 2)

    def sqrt(self):
        return self ** 0.5

    # -- structure ---------------------------------------------------------
    def d(self, i: int) -> "Jet":
        """Partial derivative with respect to variable ``i`` (order drops by one)."""
        if self.grad is None:
            raise ValueError("jet carries no derivative information")
        return Jet(self.grad[i], None if self.hess is None else self.hess[i], None, self.mat)

    def conj(self) -> "Jet":
        """Complex conjugate; d/dz and d/dzbar trade places."""
        g = None if self.grad is None else np.conj(self.grad[_SWAP])
        h = None if self.hess is None else np.conj(self.hess[_SWAP][:, _SWAP])
        return Jet(np.conj(self.val), g, h, self.mat)

    def T(self) -> "Jet":
        if not self.mat:
            return self
        sw = lambda x: None if x is None else np.swapaxes(x, -1, -2)
        return Jet(sw(self.val), sw(self.grad), sw(self.hess), True)

    def dag(self) -> "Jet":
        return self.conj().T()

    def entry(self, i, j) -> "Jet":
        pick = lambda x: None if x is None else x[..., i, j]
        return Jet(pick(self.val), pick(self.grad), pick(self.hess), False)

    def trace(self) -> "Jet":
        return self.entry(0, 0) + self.entry(1, 1)


def _bsum(x, y, fa, fb, lead):
    # fa/fb act on trailing dims, leading derivative axes broadcast naturally
    return fa(x) + fb(y)


def _product(a: Jet, b: Jet, op):
    o = min(a.order, b.order)
    a, b, fa, fb, mat = Jet._align(a, b)
    av, bv = fa(a.val), fb(b.val)
    val = op(av, bv)
    g = h = None
    if o >= 1:
        ag, bg = fa(a.grad), fb(b.grad)
        g = op(ag, bv) + op(av, bg)
    if o >= 2:
        ah, bh = fa(a.hess), fb(b.hess)
        h = op(ah, bv) + op(av, bh) + op(ag[:, None], bg[None, :]) + op(ag[None, :], bg[:, None])
    return Jet(val, g, h, mat)


def matrix(rows) -> Jet:
    """Assemble a matrix jet from a 2x2 nested list of scalar jets / numbers."""
    ref = next(e for r in rows for e in r if isinstance(e, Jet))
    order = min(e.order for r in rows for e in r if isinstance(e, Jet))
    cells = [[e if isinstance(e, Jet) else ref._lift(e) for e in r] for r in rows]
    cells = [[e._trunc(order) for e in r] for r in cells]
    stack = lambda get: np.stack([np.stack([get(e) for e in r], axis=-1) for r in cells], axis=-2)
    return Jet(stack(lambda e: e.val),
               None if order < 1 else stack(lambda e: e.grad),
               None if order < 2 else stack(lambda e: e.hess), True)


def inv2(m: Jet) -> Jet:
    a, b, c, d = m.entry(0, 0), m.entry(0, 1), m.entry(1, 0), m.entry(1, 1)
    det = a * d - b * c
    r = det.reciprocal()
    return matrix([[d * r, -b * r], [-c * r, a * r]])


def comm(a: Jet, b: Jet) -> Jet:
    return a @ b - b @ a


def const_matrix(m, like: Jet) -> Jet:
    """Broadcast a constant 2x2 matrix to the point shape of ``like``."""
    shape = like.val.shape if not like.mat else like.val.shape[:-2]
    val = np.broadcast_to(np.asarray(m, complex), shape + (2, 2)).copy()
    g = None if like.grad is None else np.zeros((NVAR,) + val.shape, complex)
    h = None if like.hess is None else np.zeros((NVAR, NVAR) + val.shape, complex)
    return Jet(val, g, h, True)
