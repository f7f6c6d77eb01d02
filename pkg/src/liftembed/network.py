"""Fully-connected tanh surrogate with exact input tangents and parameter VJPs.

The network maps ``(x_1, ..., x_d, t, phi)`` to a scalar. Hidden layers use
``tanh``; the output layer is affine. Parameters live in one flat float64
vector; per-layer ``(W, b)`` pairs are reshaped views into it, so optimizers
can work on the flat vector while evaluation uses matrix views.

Input derivatives are propagated forward as tangents alongside the values.
:func:`vjp` then runs reverse mode over that recorded forward pass, which
gives parameter gradients of losses that contain input derivatives.
"""

from dataclasses import dataclass, field

import numpy as np

from ._alloc import tune_allocator
from .exceptions import ConfigurationError, UsageError

tune_allocator()


def layer_shapes(depth, width, input_dim):
    """Return ``[(fan_in, fan_out), ...]`` for layers ``L_0 .. L_{D}``."""
    shapes = [(input_dim, width)]
    shapes += [(width, width)] * (depth - 1)
    shapes.append((width, 1))
    return shapes


def count_params(depth, width, input_dim):
    return sum(i * o + o for i, o in layer_shapes(depth, width, input_dim))


@dataclass
class Network:
    depth: int
    width: int
    input_dim: int
    params: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_dims(self.depth, self.width, self.input_dim)
        self.params = np.ascontiguousarray(self.params, dtype=np.float64)
        expected = count_params(self.depth, self.width, self.input_dim)
        if self.params.shape != (expected,):
            raise ConfigurationError(
                f"parameter vector has shape {self.params.shape}, expected ({expected},)"
            )

    @property
    def n_params(self):
        return self.params.size

    @property
    def shapes(self):
        return layer_shapes(self.depth, self.width, self.input_dim)

    def layers(self, params=None):
        """Per-layer ``(W, b)`` views into ``params`` (defaults to own params)."""
        flat = self.params if params is None else params
        out = []
        pos = 0
        for fan_in, fan_out in self.shapes:
            W = flat[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
            pos += fan_in * fan_out
            b = flat[pos:pos + fan_out]
            pos += fan_out
            out.append((W, b))
        return out

    def weight_mask(self):
        """Boolean mask over ``params``: True for weights, False for biases."""
        mask = np.zeros(self.n_params, dtype=bool)
        pos = 0
        for fan_in, fan_out in self.shapes:
            mask[pos:pos + fan_in * fan_out] = True
            pos += fan_in * fan_out + fan_out
        return mask

    def copy(self):
        return Network(self.depth, self.width, self.input_dim, self.params.copy())

    def with_params(self, params):
        return Network(self.depth, self.width, self.input_dim, params)


def _check_dims(depth, width, input_dim):
    for name, value, low in (("depth", depth, 1), ("width", width, 1), ("input_dim", input_dim, 2)):
        if int(value) != value or value < low:
            raise ConfigurationError(f"{name} must be an integer >= {low}, got {value!r}")


def init_network(depth, width, input_dim, seed):
    """Fan-in scaled uniform weights in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``, zero biases."""
    _check_dims(depth, width, input_dim)
    rng = np.random.default_rng(seed)
    chunks = []
    for fan_in, fan_out in layer_shapes(depth, width, input_dim):
        bound = 1.0 / np.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return Network(depth, width, input_dim, np.concatenate(chunks))


def _as_batch(net, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise UsageError(f"expected points of shape (n, {net.input_dim}), got {X.shape}")
    return X


def evaluate(net, X, params=None):
    """Network values at the rows of ``X``; shape ``(n,)``."""
    X = _as_batch(net, X)
    layers = net.layers(params)
    a = X
    for W, b in layers[:-1]:
        a = np.tanh(a @ W + b)
    W, b = layers[-1]
    return (a @ W + b)[:, 0]


class _Cache:
    """Forward record for :func:`vjp`.

    ``stacks[i]`` is the stacked input ``[a; adot_1; ...; adot_m]`` of layer i,
    shape ``(1 + m, n, fan_in)``; layer 0 keeps only the value row since its
    input tangents are unit vectors. ``acts``/``sech2``/``pre_tangents`` hold
    ``h``, ``1 - h^2`` and ``zdot`` of each hidden layer.
    """

    __slots__ = ("stacks", "acts", "sech2", "pre_tangents", "dims", "n")


# rows per block; keeps the stacked activations of one block inside L2
CHUNK_ROWS = 1024


def evaluate_with_tangents(net, X, dims, params=None):
    """Values and exact derivatives along the input coordinates ``dims``.

    Returns ``(u, du, cache)`` with ``u`` of shape ``(n,)`` and ``du`` of shape
    ``(n, len(dims))``. ``cache`` feeds :func:`vjp`.
    """
    X = _as_batch(net, X)
    dims = tuple(int(k) for k in dims)
    if any(k < 0 or k >= net.input_dim for k in dims):
        raise UsageError(f"tangent dims {dims} out of range for input_dim {net.input_dim}")
    layers = net.layers(params)
    if X.shape[0] <= CHUNK_ROWS:
        u, du, block = _forward_block(layers, X, dims)
        return u, du, [block]
    us, dus, blocks = [], [], []
    for start in range(0, X.shape[0], CHUNK_ROWS):
        u, du, block = _forward_block(layers, X[start:start + CHUNK_ROWS], dims)
        us.append(u)
        dus.append(du)
        blocks.append(block)
    return np.concatenate(us), np.concatenate(dus), blocks


def _forward_block(layers, X, dims):
    n = X.shape[0]
    m = len(dims)

    cache = _Cache()
    cache.dims = dims
    cache.n = n
    cache.stacks = [X[None]]
    cache.acts, cache.sech2, cache.pre_tangents = [], [], []

    W0, b0 = layers[0]
    width = W0.shape[1]
    h = np.tanh(X @ W0 + b0)
    s = 1.0 - h * h
    # tangent of the unit input e_k through layer 0 is the row W0[k] for every point
    zdot = np.broadcast_to(W0[list(dims)][:, None, :], (m, n, width))
    H = np.empty((1 + m, n, width))
    H[0] = h
    np.multiply(s[None], zdot, out=H[1:])
    cache.acts.append(h)
    cache.sech2.append(s)
    cache.pre_tangents.append(zdot)

    for W, b in layers[1:-1]:
        cache.stacks.append(H)
        fan_in, fan_out = W.shape
        Z = (H.reshape(-1, fan_in) @ W).reshape(1 + m, n, fan_out)
        h = np.tanh(Z[0] + b)
        s = 1.0 - h * h
        Hn = np.empty_like(Z)
        Hn[0] = h
        np.multiply(s[None], Z[1:], out=Hn[1:])
        cache.acts.append(h)
        cache.sech2.append(s)
        cache.pre_tangents.append(Z[1:])
        H = Hn

    W, b = layers[-1]
    cache.stacks.append(H)
    out = (H.reshape(-1, W.shape[0]) @ W).reshape(1 + m, n)
    u = out[0] + b[0]
    du = out[1:].T
    return u, du, cache


def vjp(net, cache, gu, gdu=None, params=None):
    """Pull cotangents of ``(u, du)`` back to a flat parameter gradient.

    ``gu`` has shape ``(n,)``; ``gdu`` has shape ``(n, len(dims))`` or is None.
    ``params`` must be the vector the forward pass used (default: own params).
    """
    layers = net.layers(params)
    gu = np.asarray(gu, dtype=np.float64)
    total = None
    start = 0
    for block in cache:
        stop = start + block.n
        g = _backward_block(layers, block, gu[start:stop],
                            None if gdu is None else np.asarray(gdu)[start:stop])
        total = g if total is None else total + g
        start = stop
    return total


def _backward_block(layers, cache, gu, gdu):
    dims = cache.dims
    m = len(dims)
    n = cache.n
    G = np.empty((1 + m, n))
    G[0] = np.asarray(gu, dtype=np.float64).reshape(n)
    if m:
        if gdu is None:
            G[1:] = 0.0
        else:
            G[1:] = np.asarray(gdu, dtype=np.float64).reshape(n, m).T

    grads = []
    W, _ = layers[-1]
    H = cache.stacks[-1]
    dW = H.reshape(-1, W.shape[0]).T @ G.reshape(-1, 1)
    grads.append((dW, np.array([G[0].sum()])))
    G = G[:, :, None] * W[:, 0][None, None, :]

    for i in range(len(layers) - 2, -1, -1):
        W, _ = layers[i]
        fan_in, fan_out = W.shape
        h, s = cache.acts[i], cache.sech2[i]
        GZ = np.empty_like(G)
        np.multiply(G, s[None], out=GZ)
        if m:
            # d(sech^2)/dz = -2 h sech^2 couples tangent cotangents into the value row
            if i == 0:
                rows = W[list(dims)]
                cross = G[1] * rows[0]
                for k in range(1, m):
                    cross += G[1 + k] * rows[k]
            else:
                P = cache.pre_tangents[i]
                cross = G[1] * P[0]
                for k in range(1, m):
                    cross += G[1 + k] * P[k]
            cross *= h
            cross *= s
            GZ[0] -= 2.0 * cross
        A = cache.stacks[i]
        db = GZ[0].sum(axis=0)
        if i > 0:
            dW = A.reshape(-1, fan_in).T @ GZ.reshape(-1, fan_out)
            G = (GZ.reshape(-1, fan_out) @ W.T).reshape(1 + m, n, fan_in)
        else:
            dW = A[0].T @ GZ[0]
            if m:
                dW[list(dims)] += GZ[1:].sum(axis=1)
        grads.append((dW, db))

    grads.reverse()
    return np.concatenate([np.concatenate([dW.ravel(), db]) for dW, db in grads])


@dataclass
class EvalWithDerivs:
    value: float
    input_grad: np.ndarray


def _as_point(net, point):
    p = np.asarray(point, dtype=np.float64)
    if p.shape != (net.input_dim,):
        raise UsageError(f"expected a point of length {net.input_dim}, got shape {p.shape}")
    return p[None, :]


def forward(net, point):
    """Network value at a single input point.

    Runs the same stacked pass as :func:`forward_with_input_grad` so the two
    values agree bitwise (BLAS may round a one-row product differently).
    """
    return forward_with_input_grad(net, point).value


def forward_with_input_grad(net, point):
    """Value and gradient with respect to every input coordinate at one point."""
    X = _as_point(net, point)
    u, du, _ = evaluate_with_tangents(net, X, range(net.input_dim))
    return EvalWithDerivs(float(u[0]), du[0].copy())
