"""Nested forward-mode dual numbers over numpy arrays.

A :class:`Dual` carries a primal value and a tangent of the same shape.  Both
may themselves be duals, which is how higher derivatives are taken.  Every
perturbation gets a fresh integer tag; when two duals with different tags meet,
the one with the larger tag is the outer perturbation and the other is treated
as a constant with respect to it.  This avoids perturbation confusion when
derivative calls are nested inside functions that are themselves being
differentiated.

Geometry code is written against plain numpy (``np.einsum``, ``np.sqrt``,
arithmetic operators, ``np.stack`` ...).  Those calls dispatch here through
``__array_ufunc__`` and ``__array_function__`` when any argument is a dual.
"""

from __future__ import annotations

import itertools

import numpy as np

_tags = itertools.count(1)


class Dual:
    __slots__ = ("tag", "re", "du")
    __array_priority__ = 1000

    def __init__(self, tag, re, du):
        self.tag = tag
        self.re = re
        self.du = du

    # -- structure -------------------------------------------------------
    @property
    def shape(self):
        return np.shape(self.re)

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def T(self):
        return Dual(self.tag, np.transpose(self.re), np.transpose(self.du))

    def __len__(self):
        return self.shape[0]

    def __getitem__(self, idx):
        return Dual(self.tag, self.re[idx], self.du[idx])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def reshape(self, *shape):
        return Dual(self.tag, np.reshape(self.re, shape), np.reshape(self.du, shape))

    def __repr__(self):
        return f"Dual(tag={self.tag}, re={self.re!r}, du={self.du!r})"

    def __float__(self):
        return float(value(self))

    # -- comparisons act on the innermost primal -------------------------
    def __lt__(self, other):
        return value(self) < value(other)

    def __le__(self, other):
        return value(self) <= value(other)

    def __gt__(self, other):
        return value(self) > value(other)

    def __ge__(self, other):
        return value(self) >= value(other)

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return subtract(self, other)

    def __rsub__(self, other):
        return subtract(other, self)

    def __mul__(self, other):
        return multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return divide(self, other)

    def __rtruediv__(self, other):
        return divide(other, self)

    def __neg__(self):
        return Dual(self.tag, -self.re, -self.du)

    def __pos__(self):
        return self

    def __pow__(self, k):
        return power(self, k)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    # -- numpy protocols -------------------------------------------------
    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        impl = _UFUNCS.get(ufunc)
        if method != "__call__" or kwargs or impl is None:
            return NotImplemented
        return impl(*inputs)

    def __array_function__(self, func, types, args, kwargs):
        impl = _FUNCTIONS.get(func)
        if impl is None:
            return NotImplemented
        return impl(*args, **kwargs)


def _top_tag(*xs):
    tags = [x.tag for x in xs if isinstance(x, Dual)]
    return max(tags) if tags else None


def _parts(x, tag):
    if isinstance(x, Dual) and x.tag == tag:
        return x.re, x.du
    return x, None


def value(x):
    """Innermost primal value of a (possibly nested) dual."""
    while isinstance(x, Dual):
        x = x.re
    return x


def add(a, b):
    tag = _top_tag(a, b)
    if tag is None:
        return np.add(a, b)
    ar, ad = _parts(a, tag)
    br, bd = _parts(b, tag)
    if ad is None:
        du = bd + np.zeros(np.shape(ar)) if np.ndim(ar) > np.ndim(bd) else bd
    elif bd is None:
        du = ad + np.zeros(np.shape(br)) if np.ndim(br) > np.ndim(ad) else ad
    else:
        du = ad + bd
    return Dual(tag, ar + br, du)


def subtract(a, b):
    return add(a, negative(b))


def negative(a):
    return -a


def multiply(a, b):
    tag = _top_tag(a, b)
    if tag is None:
        return np.multiply(a, b)
    ar, ad = _parts(a, tag)
    br, bd = _parts(b, tag)
    if ad is None:
        du = ar * bd
    elif bd is None:
        du = ad * br
    else:
        du = ad * br + ar * bd
    return Dual(tag, ar * br, du)


def divide(a, b):
    tag = _top_tag(a, b)
    if tag is None:
        return np.true_divide(a, b)
    ar, ad = _parts(a, tag)
    br, bd = _parts(b, tag)
    re = ar / br
    if bd is None:
        du = ad / br
    elif ad is None:
        du = -(re * bd) / br
    else:
        du = (ad - re * bd) / br
    return Dual(tag, re, du)


def power(a, k):
    if isinstance(k, Dual):
        raise TypeError("dual exponents are not supported")
    if not isinstance(a, Dual):
        return np.power(a, k)
    re = a.re ** k
    return Dual(a.tag, re, k * a.re ** (k - 1) * a.du)


def sqrt(a):
    if not isinstance(a, Dual):
        return np.sqrt(a)
    re = sqrt(a.re)
    return Dual(a.tag, re, a.du / (2 * re))


def exp(a):
    if not isinstance(a, Dual):
        return np.exp(a)
    re = exp(a.re)
    return Dual(a.tag, re, re * a.du)


def log(a):
    if not isinstance(a, Dual):
        return np.log(a)
    return Dual(a.tag, log(a.re), a.du / a.re)


def einsum(subscripts, *operands, **kwargs):
    tag = _top_tag(*operands)
    if tag is None:
        return np.einsum(subscripts, *operands, **kwargs)
    parts = [_parts(op, tag) for op in operands]
    res = [r for r, _ in parts]
    re = np.einsum(subscripts, *res)
    du = None
    for k, (_, d) in enumerate(parts):
        if d is None:
            continue
        term = np.einsum(subscripts, *res[:k], d, *res[k + 1:])
        du = term if du is None else du + term
    return Dual(tag, re, du)


def matmul(a, b):
    tag = _top_tag(a, b)
    if tag is None:
        return np.matmul(a, b)
    ar, ad = _parts(a, tag)
    br, bd = _parts(b, tag)
    if ad is None:
        du = ar @ bd
    elif bd is None:
        du = ad @ br
    else:
        du = ad @ br + ar @ bd
    return Dual(tag, ar @ br, du)


def inv(a):
    """Matrix inverse with d(A^-1) = -A^-1 dA A^-1."""
    if not isinstance(a, Dual):
        return np.linalg.inv(a)
    r = inv(a.re)
    return Dual(a.tag, r, -(r @ a.du @ r))


def _tangent_or_zero(x, tag):
    if isinstance(x, Dual) and x.tag == tag:
        return x.du
    return np.zeros(np.shape(x))


def _primal(x, tag):
    if isinstance(x, Dual) and x.tag == tag:
        return x.re
    return x


def stack(arrays, axis=0, **kwargs):
    arrays = list(arrays)
    tag = _top_tag(*arrays)
    if tag is None:
        return np.stack(arrays, axis=axis)
    re = np.stack([_primal(a, tag) for a in arrays], axis=axis)
    du = np.stack([_tangent_or_zero(a, tag) for a in arrays], axis=axis)
    return Dual(tag, re, du)


def concatenate(arrays, axis=0, **kwargs):
    arrays = list(arrays)
    tag = _top_tag(*arrays)
    if tag is None:
        return np.concatenate(arrays, axis=axis)
    re = np.concatenate([_primal(a, tag) for a in arrays], axis=axis)
    du = np.concatenate([_tangent_or_zero(a, tag) for a in arrays], axis=axis)
    return Dual(tag, re, du)


def block(rows):
    flat = [a for row in rows for a in row]
    tag = _top_tag(*flat)
    if tag is None:
        return np.block(rows)
    re = np.block([[_primal(a, tag) for a in row] for row in rows])
    du = np.block([[_tangent_or_zero(a, tag) for a in row] for row in rows])
    return Dual(tag, re, du)


def transpose(a, axes=None):
    return Dual(a.tag, np.transpose(a.re, axes), np.transpose(a.du, axes))


def moveaxis(a, source, destination):
    return Dual(a.tag, np.moveaxis(a.re, source, destination),
                np.moveaxis(a.du, source, destination))


def _sum(a, axis=None, **kwargs):
    return Dual(a.tag, np.sum(a.re, axis=axis), np.sum(a.du, axis=axis))


def _shape(a):
    return np.shape(a.re)


def _zeros_like(a, *args, **kwargs):
    return np.zeros(np.shape(a))


_UFUNCS = {
    np.add: add,
    np.subtract: subtract,
    np.multiply: multiply,
    np.true_divide: divide,
    np.negative: negative,
    np.power: power,
    np.sqrt: sqrt,
    np.exp: exp,
    np.log: log,
    np.matmul: matmul,
}

_FUNCTIONS = {
    np.einsum: einsum,
    np.stack: stack,
    np.concatenate: concatenate,
    np.block: block,
    np.transpose: transpose,
    np.moveaxis: moveaxis,
    np.sum: _sum,
    np.shape: _shape,
    np.ndim: lambda a: len(_shape(a)),
    np.zeros_like: _zeros_like,
    np.linalg.inv: inv,
}


# -- derivative drivers ---------------------------------------------------

def _tree_map(fn, tree):
    if isinstance(tree, tuple) and hasattr(tree, "_fields"):
        return type(tree)(*(_tree_map(fn, t) for t in tree))
    if isinstance(tree, (tuple, list)):
        return type(tree)(_tree_map(fn, t) for t in tree)
    if isinstance(tree, dict):
        return {k: _tree_map(fn, v) for k, v in tree.items()}
    return fn(tree)


def jvp(f, x, v):
    """Return ``(f(x), df(x)[v])``; ``f`` may return a tuple/dict of arrays."""
    tag = next(_tags)
    out = f(Dual(tag, x, np.asarray(v, dtype=float)))
    return (_tree_map(lambda o: _primal(o, tag), out),
            _tree_map(lambda o: _tangent_or_zero(o, tag), out))


def jacobian(f, x):
    """Forward-mode Jacobian of ``f`` at the 1-D point ``x``.

    The derivative index is appended as the last axis of every output leaf.
    ``x`` may itself be a dual, so calls nest.
    """
    m = np.shape(x)[0]
    eye = np.eye(m)
    cols = [jvp(f, x, eye[k])[1] for k in range(m)]
    if isinstance(cols[0], dict):
        return {key: stack([c[key] for c in cols], axis=-1) for key in cols[0]}
    if isinstance(cols[0], (tuple, list)):
        return type(cols[0])(stack([c[i] for c in cols], axis=-1)
                             for i in range(len(cols[0])))
    return stack(cols, axis=-1)


def derivative(f, t):
    """Derivative of a scalar function of one scalar variable."""
    return jvp(f, t, 1.0)[1]


def taylor(f, t, order):
    """Values ``[f(t), f'(t), ..., f^(order)(t)]`` by nested duals."""
    if order == 0:
        return [f(t)]
    inner = taylor(lambda s: derivative(f, s), t, order - 1)
    return [f(t)] + inner
