"""Small reverse-mode tape over numpy arrays.

Losses are written with ordinary arithmetic on :class:`Var` objects. Network
evaluations enter the tape as single nodes whose backward step is
:func:`liftembed.network.vjp`, so derivatives of losses that contain network
input derivatives (``d^2 u / d theta d x``) come out exactly.
"""

import numpy as np

from . import network as nw
from .exceptions import TrainingError


class Var:
    """Array-valued tape node."""

    __slots__ = ("value", "parents", "grad")
    __array_ufunc__ = None

    def __init__(self, value, parents=()):
        self.value = value
        # parents: sequence of (node, pullback) where pullback maps our grad to theirs
        self.parents = parents
        self.grad = None

    def __repr__(self):
        return f"Var({self.value!r})"

    @property
    def shape(self):
        return np.shape(self.value)

    def __add__(self, other):
        other = _lift(other)
        return Var(self.value + other.value,
                   ((self, lambda g: _unbroadcast(g, self.shape)),
                    (other, lambda g: _unbroadcast(g, other.shape))))

    __radd__ = __add__

    def __neg__(self):
        return Var(-self.value, ((self, lambda g: -g),))

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) + (-self)

    def __mul__(self, other):
        other = _lift(other)
        a, b = self.value, other.value
        return Var(a * b,
                   ((self, lambda g: _unbroadcast(g * b, self.shape)),
                    (other, lambda g: _unbroadcast(g * a, other.shape))))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            return self * other ** -1
        return self * (1.0 / other)

    def __pow__(self, p):
        a = self.value
        if p == 2:
            return Var(a * a, ((self, lambda g: 2.0 * a * g),))
        return Var(a ** p, ((self, lambda g: p * a ** (p - 1) * g),))

    def __getitem__(self, idx):
        shape = self.shape

        def pullback(g):
            out = np.zeros(shape)
            np.add.at(out, idx, g)
            return out

        return Var(self.value[idx], ((self, pullback),))

    def sum(self):
        shape = self.shape
        return Var(np.sum(self.value), ((self, lambda g: np.broadcast_to(g, shape)),))

    def mean(self):
        size = np.size(self.value)
        return self.sum() * (1.0 / size)

    def backward(self):
        """Accumulate d(self)/d(node) into ``node.grad`` for every ancestor."""
        order = _topo(self)
        for node in order:
            node.grad = None
        self.grad = np.ones_like(np.asarray(self.value, dtype=np.float64))
        for node in reversed(order):
            if node.grad is None:
                continue
            for parent, pullback in node.parents:
                contrib = pullback(node.grad)
                if contrib is None:
                    continue
                parent.grad = contrib if parent.grad is None else parent.grad + contrib


def _lift(x):
    return x if isinstance(x, Var) else Var(np.asarray(x, dtype=np.float64))


def _unbroadcast(g, shape):
    g = np.asarray(g)
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _topo(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def value(x):
    return x.value if isinstance(x, Var) else x


def where(cond, a, b):
    """Elementwise select; gradient flows to the chosen branch only."""
    a, b = _lift(a), _lift(b)
    cond = np.asarray(cond, dtype=bool)
    return Var(np.where(cond, a.value, b.value),
               ((a, lambda g: _unbroadcast(np.where(cond, g, 0.0), a.shape)),
                (b, lambda g: _unbroadcast(np.where(cond, 0.0, g), b.shape))))


class _NetEval(Var):
    """Joint node holding ``(u, du)`` so one VJP serves both outputs."""

    __slots__ = ()


class TracedNetwork:
    """Network bound to a parameter leaf; every evaluation is recorded.

    ``calls`` counts network evaluations per point so tests can check how many
    passes a loss performs.
    """

    def __init__(self, net, theta):
        self.net = net
        self.theta = theta
        self.calls = 0

    def __call__(self, X):
        u, _ = self._eval(X, ())
        return u

    def with_input_grad(self, X, dims=None):
        """Return ``(u, du)`` Vars; ``du[:, j]`` is the derivative along ``dims[j]``."""
        if dims is None:
            dims = range(self.net.input_dim)
        return self._eval(X, tuple(dims))

    def _eval(self, X, dims):
        net = self.net
        params = self.theta.value
        X = np.asarray(X, dtype=np.float64)
        self.calls += X.shape[0] if X.ndim == 2 else 1
        u, du, cache = nw.evaluate_with_tangents(net, X, dims, params=params)
        n, m = u.shape[0], len(dims)

        def pullback(g):
            gu, gdu = g
            if gu is None:
                gu = np.zeros(n)
            return nw.vjp(net, cache, gu, gdu, params=params)

        joint = _NetEval((u, du), ((self.theta, pullback),))
        u_var = Var(u, ((joint, lambda g: _Pair(g, None)),))
        du_var = Var(du, ((joint, lambda g: _Pair(None, g)),))
        if m == 0:
            du_var = None
        return u_var, du_var


class _Pair(tuple):
    """Cotangent for a joint ``(u, du)`` node; supports ``+`` accumulation."""

    def __new__(cls, gu, gdu):
        return super().__new__(cls, (gu, gdu))

    def __add__(self, other):
        return _Pair(_add_opt(self[0], other[0]), _add_opt(self[1], other[1]))


def _add_opt(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def value_and_grad(fn, net, *extra):
    """Evaluate ``fn(traced_net, *extra_vars)`` and differentiate it.

    Returns ``(loss, grad_theta, [grad_extra...])``. ``extra`` are plain arrays
    (e.g. trainable shock speeds) that become tape leaves.
    """
    theta = Var(net.params)
    leaves = [Var(np.asarray(e, dtype=np.float64)) for e in extra]
    traced = TracedNetwork(net, theta)
    loss = fn(traced, *leaves)
    loss.backward()
    g_theta = theta.grad if theta.grad is not None else np.zeros(net.n_params)
    g_extra = [np.zeros(np.shape(l.value)) if l.grad is None else np.asarray(l.grad, dtype=np.float64)
               for l in leaves]
    return float(loss.value), np.asarray(g_theta, dtype=np.float64), g_extra


def loss_param_grad(net, loss_evaluator):
    """Gradient of a scalar loss with respect to every network parameter.

    ``loss_evaluator(traced)`` builds the loss from ``traced(X)`` and
    ``traced.with_input_grad(X)`` calls and returns a scalar :class:`Var`.
    """
    loss, g, _ = value_and_grad(loss_evaluator, net)
    if not np.isfinite(loss):
        raise TrainingError("non-finite loss in loss_param_grad", term="loss")
    return g
