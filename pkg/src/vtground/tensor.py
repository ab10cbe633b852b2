"""Dense float64 tensors with reverse-mode automatic differentiation.

The engine records the computation graph eagerly: every operation produces
a new Tensor holding references to its parents and a closure that pushes
the upstream gradient to them.  ``backward()`` replays the graph once in
reverse topological order; replaying it a second time without a fresh
forward pass is rejected.

Evaluation is sequential and seed-independent, so repeated runs are
bit-identical.  ReLU's adjoint at exactly 0 is defined as 0.
"""

import contextlib

import numpy as np

from .errors import ContractError, ShapeError

# Global switch used by grad_check's finite-difference evaluations to skip
# graph construction entirely.
_grad_enabled = True

# When set to a list, relu()/maximum_const() append the smallest distance of
# their input to the kink.  Gradient checks use it to resample seeds whose
# forward pass grazes a non-differentiable point.
kink_margins = None


@contextlib.contextmanager
def track_kink_margins():
    global kink_margins
    prev = kink_margins
    kink_margins = []
    try:
        yield kink_margins
    finally:
        kink_margins = prev


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (the inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn", "_done")

    def __init__(self, data, requires_grad=False, parents=(), backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = parents
        self._backward_fn = backward_fn
        self._done = False

    # -- graph plumbing ---------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Replay the recorded tape in reverse topological order.

        Returns the number of graph nodes visited (each exactly once).
        """
        if self.data.size != 1:
            raise ContractError("backward() requires a scalar output, got shape %s"
                                % (self.data.shape,))
        if self._done:
            raise RuntimeError("second backward pass without a new forward pass")

        # Iterative post-order DFS: recurrences can be deep.
        topo, visited, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))

        self._accum(np.ones_like(self.data))
        count = 0
        for node in reversed(topo):
            count += 1
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)
            node._done = True
        return count

    # -- operator helpers --------------------------------------------------

    @staticmethod
    def _lift(x):
        return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = Tensor._lift(other)
        out_data = self.data + other.data

        def push(g):
            if self.requires_grad:
                self._accum(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(g, other.data.shape))

        return _make(out_data, (self, other), push)

    __radd__ = __add__

    def __neg__(self):
        def push(g):
            if self.requires_grad:
                self._accum(-g)

        return _make(-self.data, (self,), push)

    def __sub__(self, other):
        return self + (-Tensor._lift(other))

    def __rsub__(self, other):
        return Tensor._lift(other) + (-self)

    def __mul__(self, other):
        other = Tensor._lift(other)
        out_data = self.data * other.data

        def push(g):
            if self.requires_grad:
                self._accum(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(g * self.data, other.data.shape))

        return _make(out_data, (self, other), push)

    __rmul__ = __mul__

    def matmul(self, other):
        other = Tensor._lift(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ShapeError("matmul expects 2-D operands, got %s and %s"
                             % (self.data.shape, other.data.shape))
        if self.data.shape[1] != other.data.shape[0]:
            raise ShapeError("matmul inner dimensions differ: %s vs %s"
                             % (self.data.shape, other.data.shape))
        out_data = self.data @ other.data

        def push(g):
            if self.requires_grad:
                self._accum(g @ other.data.T)
            if other.requires_grad:
                other._accum(self.data.T @ g)

        return _make(out_data, (self, other), push)

    __matmul__ = matmul

    @property
    def T(self):
        def push(g):
            if self.requires_grad:
                self._accum(g.T)

        return _make(self.data.T, (self,), push)

    # -- elementwise nonlinearities ------------------------------------------

    def relu(self):
        mask = self.data > 0  # adjoint at exactly 0 is 0
        if kink_margins is not None and self.data.size:
            kink_margins.append(float(np.abs(self.data).min()))

        def push(g):
            if self.requires_grad:
                self._accum(g * mask)

        return _make(np.where(mask, self.data, 0.0), (self,), push)

    def tanh(self):
        out_data = np.tanh(self.data)

        def push(g):
            if self.requires_grad:
                self._accum(g * (1.0 - out_data * out_data))

        return _make(out_data, (self,), push)

    def sigmoid(self):
        out_data = np.where(self.data >= 0,
                            1.0 / (1.0 + np.exp(-np.clip(self.data, -700, None))),
                            np.exp(np.clip(self.data, None, 700))
                            / (1.0 + np.exp(np.clip(self.data, None, 700))))

        def push(g):
            if self.requires_grad:
                self._accum(g * out_data * (1.0 - out_data))

        return _make(out_data, (self,), push)

    def log(self):
        def push(g):
            if self.requires_grad:
                self._accum(g / self.data)

        return _make(np.log(self.data), (self,), push)

    def maximum_const(self, c):
        """Elementwise max with a constant; gradient is blocked where clamped."""
        mask = self.data > c
        if kink_margins is not None and self.data.size:
            kink_margins.append(float(np.abs(self.data - c).min()))

        def push(g):
            if self.requires_grad:
                self._accum(g * mask)

        return _make(np.maximum(self.data, c), (self,), push)

    # -- reductions ------------------------------------------------------------

    def sum(self):
        def push(g):
            if self.requires_grad:
                self._accum(np.full_like(self.data, float(g)))

        return _make(self.data.sum(), (self,), push)

    def mean(self):
        n = self.data.size

        def push(g):
            if self.requires_grad:
                self._accum(np.full_like(self.data, float(g) / n))

        return _make(self.data.mean(), (self,), push)

    # -- structure -----------------------------------------------------------

    def rows(self, start, stop):
        def push(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[start:stop] = g
                self._accum(full)

        return _make(self.data[start:stop], (self,), push)

    def cols(self, start, stop):
        def push(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[:, start:stop] = g
                self._accum(full)

        return _make(self.data[:, start:stop], (self,), push)


def _make(data, parents, push):
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, push)
    return Tensor(data)


def parameter(data):
    return Tensor(data, requires_grad=True)


def concat(tensors, axis=0):
    tensors = [Tensor._lift(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    offsets = np.cumsum([0] + [t.data.shape[axis] for t in tensors])

    def push(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                if axis == 0:
                    t._accum(g[lo:hi])
                else:
                    t._accum(g[:, lo:hi])

    return _make(out_data, tuple(tensors), push)


def softmax_rows(x):
    """Row-wise softmax with per-row max subtraction for stability."""
    x = Tensor._lift(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def push(g):
        if x.requires_grad:
            inner = (g * out_data).sum(axis=-1, keepdims=True)
            x._accum(out_data * (g - inner))

    return _make(out_data, (x,), push)


def layer_norm(x, gain, bias, eps=1e-5):
    """Per-row standardization followed by an affine gain/bias."""
    x, gain, bias = Tensor._lift(x), Tensor._lift(gain), Tensor._lift(bias)
    if eps <= 0:
        raise ContractError("layer_norm eps must be positive")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out_data = xhat * gain.data + bias.data

    def push(g):
        if gain.requires_grad:
            gain._accum(_unbroadcast(g * xhat, gain.data.shape))
        if bias.requires_grad:
            bias._accum(_unbroadcast(g, bias.data.shape))
        if x.requires_grad:
            gxh = g * gain.data
            n = x.data.shape[-1]
            dx = inv * (gxh
                        - gxh.mean(axis=-1, keepdims=True)
                        - xhat * (gxh * xhat).mean(axis=-1, keepdims=True))
            # var uses 1/n normalization, so the two mean terms above are exact
            assert n == x.data.shape[-1]
            x._accum(dx)

    return _make(out_data, (x, gain, bias), push)


def l2_normalize_rows(x, guard=1e-12):
    """Scale each row to unit Euclidean norm; rows with norm <= guard pass through."""
    x = Tensor._lift(x)
    data = np.atleast_2d(x.data)
    norms = np.linalg.norm(data, axis=-1, keepdims=True)
    safe = norms > guard
    scale = np.where(safe, 1.0 / np.where(safe, norms, 1.0), 1.0)
    out_data = (data * scale).reshape(x.data.shape)

    def push(g):
        if x.requires_grad:
            g2 = np.atleast_2d(g)
            y = np.atleast_2d(out_data)
            inner = (y * g2).sum(axis=-1, keepdims=True)
            dx = np.where(safe, scale * (g2 - y * inner), g2)
            x._accum(dx.reshape(x.data.shape))

    return _make(out_data, (x,), push)


def grad_check(f, params, h=1e-4):
    """Compare the autodiff gradient of scalar-valued ``f`` against central
    finite differences over every coordinate of every parameter.

    Returns max(|g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8)) over all
    coordinates.  The caller is responsible for keeping parameters away
    from ReLU kinks (resample the seed when needed).
    """
    for p in params.values():
        p.grad = None
    out = f()
    if not isinstance(out, Tensor) or out.data.size != 1:
        raise ContractError("grad_check requires a scalar-valued function")
    out.backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in params.items()}

    worst = 0.0
    with no_grad():
        for name, p in params.items():
            flat = p.data.reshape(-1)
            g_flat = analytic[name].reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                f_plus = float(f().data)
                flat[i] = orig - h
                f_minus = float(f().data)
                flat[i] = orig
                fd = (f_plus - f_minus) / (2.0 * h)
                err = abs(g_flat[i] - fd) / max(abs(g_flat[i]), abs(fd), 1e-8)
                if err > worst:
                    worst = err
    for p in params.values():
        p.grad = None
    return worst
