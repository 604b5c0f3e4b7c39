"""Truncated multivariate Taylor arithmetic (jets) up to third order.

A Jet carries a value together with all mixed partial derivatives up to
``order`` (0..3) with respect to ``nvars`` independent variables, stored
densely (grad ``(n,)``, hess ``(n, n)``, third ``(n, n, n)``).  Arithmetic
propagates derivatives exactly via the Leibniz and chain rules, so there is
no truncation error beyond floating point.

Design notes:
  * value arithmetic runs on plain Python floats via :mod:`math`, so an
    order-0 jet reproduces ordinary scalar evaluation bit for bit;
  * derivative arrays are index-symmetric by construction and stay that way
    under every operation;
  * ints/floats mix in freely as constants.
"""

from __future__ import annotations

import math

import numpy as np

MAX_ORDER = 3


class JetDomainError(ArithmeticError):
    """A jet operation left its real domain (log/sqrt/division/power)."""


def _sym3(h, g):
    # symmetrized outer product h_{ij} g_k + h_{ik} g_j + h_{jk} g_i
    t = np.einsum("ij,k->ijk", h, g)
    return t + t.transpose(0, 2, 1) + t.transpose(2, 0, 1)


class Jet:
    __slots__ = ("order", "nvars", "value", "grad", "hess", "third")

    def __init__(self, order, nvars, value, grad=None, hess=None, third=None):
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
        self.order = order
        self.nvars = nvars
        self.value = float(value)
        n = nvars
        self.grad = grad if grad is not None else (np.zeros(n) if order >= 1 else None)
        self.hess = hess if hess is not None else (np.zeros((n, n)) if order >= 2 else None)
        self.third = third if third is not None else (np.zeros((n, n, n)) if order >= 3 else None)

    @classmethod
    def constant(cls, value, nvars, order):
        return cls(order, nvars, value)

    @classmethod
    def variable(cls, value, index, nvars, order):
        j = cls(order, nvars, value)
        if order >= 1:
            j.grad[index] = 1.0
        return j

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.nvars != self.nvars or other.order != self.order:
                raise ValueError("jet order/nvars mismatch")
            return other
        if isinstance(other, (int, float, np.floating)):
            return Jet.constant(float(other), self.nvars, self.order)
        return None

    # -- ring operations -------------------------------------------------

    def __neg__(self):
        o = self.order
        return Jet(
            o,
            self.nvars,
            -self.value,
            -self.grad if o >= 1 else None,
            -self.hess if o >= 2 else None,
            -self.third if o >= 3 else None,
        )

    def __add__(self, other):
        b = self._coerce(other)
        if b is None:
            return NotImplemented
        o = self.order
        return Jet(
            o,
            self.nvars,
            self.value + b.value,
            self.grad + b.grad if o >= 1 else None,
            self.hess + b.hess if o >= 2 else None,
            self.third + b.third if o >= 3 else None,
        )

    __radd__ = __add__

    def __sub__(self, other):
        b = self._coerce(other)
        if b is None:
            return NotImplemented
        return self + (-b)

    def __rsub__(self, other):
        b = self._coerce(other)
        if b is None:
            return NotImplemented
        return b + (-self)

    def __mul__(self, other):
        b = self._coerce(other)
        if b is None:
            return NotImplemented
        a, o = self, self.order
        value = a.value * b.value
        grad = hess = third = None
        if o >= 1:
            grad = a.grad * b.value + b.grad * a.value
        if o >= 2:
            hess = (
                a.hess * b.value
                + np.outer(a.grad, b.grad)
                + np.outer(b.grad, a.grad)
                + b.hess * a.value
            )
        if o >= 3:
            third = (
                a.third * b.value
                + _sym3(a.hess, b.grad)
                + _sym3(b.hess, a.grad)
                + b.third * a.value
            )
        return Jet(o, a.nvars, value, grad, hess, third)

    __rmul__ = __mul__

    def __truediv__(self, other):
        b = self._coerce(other)
        if b is None:
            return NotImplemented
        return self._divide(self, b)

    def __rtruediv__(self, other):
        b = self._coerce(other)
        if b is None:
            return NotImplemented
        return self._divide(b, self)

    @staticmethod
    def _divide(a, b):
        # direct quotient rule so the value channel is a.value/b.value exactly
        if b.value == 0.0:
            raise JetDomainError("division by zero")
        o, inv = a.order, 1.0 / b.value
        v = a.value / b.value
        grad = hess = third = None
        if o >= 1:
            grad = (a.grad - v * b.grad) * inv
        if o >= 2:
            cross = np.outer(grad, b.grad)
            hess = (a.hess - v * b.hess - cross - cross.T) * inv
        if o >= 3:
            third = (
                a.third - v * b.third - _sym3(hess, b.grad) - _sym3(b.hess, grad)
            ) * inv
        return Jet(o, a.nvars, v, grad, hess, third)

    def _reciprocal(self):
        u = self.value
        if u == 0.0:
            raise JetDomainError("division by zero")
        u2 = u * u
        return self._compose(1.0 / u, -1.0 / u2, 2.0 / (u2 * u), -6.0 / (u2 * u2))

    # -- univariate chain rule -------------------------------------------

    def _compose(self, f0, f1, f2, f3):
        """Apply a scalar function given its derivatives at ``self.value``."""
        o = self.order
        grad = hess = third = None
        if o >= 1:
            grad = f1 * self.grad
        if o >= 2:
            hess = f2 * np.outer(self.grad, self.grad) + f1 * self.hess
        if o >= 3:
            third = (
                f3 * np.einsum("i,j,k->ijk", self.grad, self.grad, self.grad)
                + f2 * _sym3(self.hess, self.grad)
                + f1 * self.third
            )
        return Jet(o, self.nvars, f0, grad, hess, third)

    def partial(self, index):
        """Jet of the partial derivative along ``index``, one order lower."""
        if self.order < 1:
            raise ValueError("cannot take a partial of an order-0 jet")
        o = self.order - 1
        return Jet(
            o,
            self.nvars,
            self.grad[index],
            self.hess[index].copy() if o >= 1 else None,
            self.third[index].copy() if o >= 2 else None,
            None,
        )

    def __repr__(self):
        return f"Jet(order={self.order}, nvars={self.nvars}, value={self.value!r})"


# -- scalar functions lifted to jets (and plain floats) -------------------


def _dispatch(x, plain, lifted):
    if isinstance(x, Jet):
        return lifted(x)
    return plain(float(x))


def jsin(x):
    return _dispatch(
        x,
        math.sin,
        lambda j: j._compose(
            math.sin(j.value), math.cos(j.value), -math.sin(j.value), -math.cos(j.value)
        ),
    )


def jcos(x):
    return _dispatch(
        x,
        math.cos,
        lambda j: j._compose(
            math.cos(j.value), -math.sin(j.value), -math.cos(j.value), math.sin(j.value)
        ),
    )


def jtan(x):
    def lifted(j):
        t = math.tan(j.value)
        s = 1.0 + t * t
        return j._compose(t, s, 2.0 * t * s, 2.0 * s * (1.0 + 3.0 * t * t))

    return _dispatch(x, math.tan, lifted)


def jexp(x):
    def lifted(j):
        e = math.exp(j.value)
        return j._compose(e, e, e, e)

    return _dispatch(x, math.exp, lifted)


def jlog(x):
    def plain(v):
        if v <= 0.0:
            raise JetDomainError(f"ln of non-positive value {v!r}")
        return math.log(v)

    def lifted(j):
        u = j.value
        if u <= 0.0:
            raise JetDomainError(f"ln of non-positive value {u!r}")
        u2 = u * u
        return j._compose(math.log(u), 1.0 / u, -1.0 / u2, 2.0 / (u2 * u))

    return _dispatch(x, plain, lifted)


def jsqrt(x):
    def plain(v):
        if v < 0.0:
            raise JetDomainError(f"sqrt of negative value {v!r}")
        return math.sqrt(v)

    def lifted(j):
        u = j.value
        if u < 0.0 or (u == 0.0 and j.order >= 1):
            raise JetDomainError(f"sqrt domain/derivative failure at {u!r}")
        s = math.sqrt(u)
        return j._compose(s, 0.5 / s, -0.25 / (s * u), 0.375 / (s * u * u))

    return _dispatch(x, plain, lifted)


def jpow_int(x, n):
    """x**n by repeated multiplication, n a (possibly negative) integer.

    The multiplication order is identical for floats and jets so plain and
    jet evaluation agree bit for bit.
    """
    n = int(n)
    if n == 0:
        return Jet.constant(1.0, x.nvars, x.order) if isinstance(x, Jet) else 1.0
    k = abs(n)
    out = x
    for _ in range(k - 1):
        out = out * x
    if n < 0:
        if isinstance(out, Jet):
            return out._reciprocal()
        if out == 0.0:
            raise JetDomainError("division by zero in negative power")
        return 1.0 / out
    return out
