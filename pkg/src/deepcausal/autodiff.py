"""Reverse-mode automatic differentiation on flat numpy arrays.

Tape values are float64 scalars, vectors or matrices; by convention the
first axis is the batch axis.  The tape is append-only: node ids are
strictly increasing and every node's inputs have smaller ids, so a single
reverse sweep in decreasing id order is a complete backward pass.

The module-level math functions (``exp``, ``sigmoid``, ``logsumexp``, ...)
dispatch on their argument: a :class:`Var` builds tape nodes, a plain
numpy array evaluates directly.  Model code written against these
functions runs both differentiably (training) and tape-free (fast
evaluation, finite-difference oracles).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

Array = np.ndarray


class AutodiffError(ValueError):
    pass


class DomainError(AutodiffError):
    """An operation produced a non-finite value (log of <= 0, overflow, ...)."""


def _f64(x) -> Array:
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(g: Array, shape: tuple) -> Array:
    """Reduce gradient ``g`` back to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


class Var:
    """Handle to one value on a tape. Supports numpy-style arithmetic."""

    __slots__ = ("tape", "idx")
    __array_ufunc__ = None  # keep numpy from elementwise-wrapping Vars

    def __init__(self, tape: "Tape", idx: int):
        self.tape = tape
        self.idx = idx

    @property
    def value(self) -> Array:
        return self.tape.values[self.idx]

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def __repr__(self):
        return f"Var(idx={self.idx}, value={self.value!r})"

    def _lift(self, other) -> "Var":
        if isinstance(other, Var):
            if other.tape is not self.tape:
                raise AutodiffError("cannot mix values from different tapes")
            return other
        return self.tape.constant(other)

    def __add__(self, other):
        o = self._lift(other)
        a, b = self.value, o.value
        return self.tape._record(
            "add", a + b, (self.idx, o.idx),
            lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))

    __radd__ = __add__

    def __neg__(self):
        a = self.value
        return self.tape._record("neg", -a, (self.idx,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._lift(other)
        a, b = self.value, o.value
        return self.tape._record(
            "mul", a * b, (self.idx, o.idx),
            lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            raise AutodiffError("division by a tape value is not supported; "
                                "rewrite with exp/log")
        return self * (1.0 / _f64(other))

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise AutodiffError("only constant exponents are supported")
        a = self.value
        return self.tape._record(
            "pow", a ** p, (self.idx,), lambda g: (g * p * a ** (p - 1),))

    # -- elementwise transcendentals ------------------------------------

    def _exp(self):
        with np.errstate(over="ignore"):
            out = np.exp(self.value)
        return self.tape._record("exp", out, (self.idx,), lambda g: (g * out,))

    def _log(self):
        a = self.value
        if np.any(a <= 0.0):
            raise DomainError("log of a non-positive value")
        return self.tape._record("log", np.log(a), (self.idx,), lambda g: (g / a,))

    def _tanh(self):
        out = np.tanh(self.value)
        return self.tape._record("tanh", out, (self.idx,), lambda g: (g * (1.0 - out * out),))

    def _sigmoid(self):
        out = special.expit(self.value)
        return self.tape._record("sigmoid", out, (self.idx,),
                                 lambda g: (g * out * (1.0 - out),))

    def _softplus(self):
        a = self.value
        out = np.logaddexp(0.0, a)
        return self.tape._record("softplus", out, (self.idx,),
                                 lambda g: (g * special.expit(a),))

    # -- reductions and shape ops ---------------------------------------

    def _sum(self, axis=None, keepdims=False):
        a = self.value

        def vjp(g):
            if axis is None:
                return (np.broadcast_to(g, a.shape).copy(),)
            gg = g if keepdims else np.expand_dims(g, axis)
            return (np.broadcast_to(gg, a.shape).copy(),)

        return self.tape._record("sum", a.sum(axis=axis, keepdims=keepdims),
                                 (self.idx,), vjp)

    def _logsumexp(self, axis=None, keepdims=False):
        a = self.value
        out = special.logsumexp(a, axis=axis, keepdims=keepdims)

        def vjp(g):
            full = out if keepdims or axis is None else np.expand_dims(out, axis)
            gg = g if keepdims or axis is None else np.expand_dims(g, axis)
            return (gg * np.exp(a - full),)

        return self.tape._record("logsumexp", _f64(out), (self.idx,), vjp)

    def _reshape(self, shape):
        a = self.value
        return self.tape._record("reshape", a.reshape(shape), (self.idx,),
                                 lambda g: (g.reshape(a.shape),))

    def _matmul(self, other: "Var"):
        o = self._lift(other)
        a, b = self.value, o.value
        if a.ndim != 2 or b.ndim != 2:
            raise AutodiffError("matmul expects 2-d operands")
        return self.tape._record(
            "matmul", a @ b, (self.idx, o.idx),
            lambda g: (g @ b.T, a.T @ g))

    def _columns(self, j0: int, j1: int):
        a = self.value

        def vjp(g):
            out = np.zeros_like(a)
            out[:, j0:j1] = g
            return (out,)

        return self.tape._record("columns", a[:, j0:j1], (self.idx,), vjp)

    def _take_along(self, idx: Array):
        a = self.value
        rows = np.arange(a.shape[0])

        def vjp(g):
            out = np.zeros_like(a)
            np.add.at(out, (rows, idx), g)
            return (out,)

        return self.tape._record("take", a[rows, idx], (self.idx,), vjp)

    def _clip(self, lo: float, hi: float):
        a = self.value
        inside = ((a > lo) & (a < hi)).astype(np.float64)
        return self.tape._record("clip", np.clip(a, lo, hi), (self.idx,),
                                 lambda g: (g * inside,))


class Tape:
    """Append-only record of operations, replayed backwards for gradients."""

    def __init__(self):
        self.values: list[Array] = []
        self.kinds: list[str] = []
        self.parents: list[tuple[int, ...]] = []
        self.vjps: list = []
        self.param_names: list = []
        self._param_cache: dict[str, Var] = {}
        self._adjoints: list = []

    def __len__(self):
        return len(self.values)

    def _record(self, kind, value, parents, vjp, param_name=None) -> Var:
        value = _f64(value)
        if not np.all(np.isfinite(value)):
            raise DomainError(f"non-finite result in op '{kind}'")
        self.values.append(value)
        self.kinds.append(kind)
        self.parents.append(parents)
        self.vjps.append(vjp)
        self.param_names.append(param_name)
        return Var(self, len(self.values) - 1)

    def constant(self, value) -> Var:
        return self._record("const", value, (), None)

    def leaf(self, value) -> Var:
        """A differentiable input that is not a named parameter."""
        return self._record("leaf", value, (), None)

    def param(self, store: "ParamStore", name: str) -> Var:
        """Bring a named parameter onto the tape (memoized per tape)."""
        cached = self._param_cache.get(name)
        if cached is not None:
            return cached
        var = self._record("param", store[name], (), None, param_name=name)
        self._param_cache[name] = var
        return var

    def backward(self, root: Var) -> dict[str, Array]:
        """Gradients of scalar ``root`` w.r.t. every parameter on the tape.

        Parameters present on the tape but unreachable from the root get
        zero gradients.  Node adjoints are kept on the tape afterwards and
        can be read back with :meth:`adjoint`.
        """
        if root.tape is not self:
            raise AutodiffError("root does not belong to this tape")
        if root.value.shape != ():
            raise AutodiffError("backward root must be a scalar")
        adj: list = [None] * len(self.values)
        adj[root.idx] = _f64(1.0)
        grads = {name: np.zeros_like(self.values[var.idx])
                 for name, var in self._param_cache.items()}
        for i in range(root.idx, -1, -1):
            g = adj[i]
            if g is None:
                continue
            name = self.param_names[i]
            if name is not None:
                grads[name] = grads[name] + g
            vjp = self.vjps[i]
            if vjp is None:
                continue
            for pid, pg in zip(self.parents[i], vjp(g)):
                adj[pid] = pg if adj[pid] is None else adj[pid] + pg
        self._adjoints = adj
        return grads

    def adjoint(self, var: Var) -> Array:
        """Adjoint of ``var`` from the most recent backward pass."""
        g = self._adjoints[var.idx] if self._adjoints else None
        return np.zeros_like(self.values[var.idx]) if g is None else g

    def release(self):
        """Drop all recorded buffers so memory frees without waiting for
        the cycle collector (tape and its vars reference each other).
        The tape is unusable afterwards; call once gradients are consumed.
        """
        self.values.clear()
        self.kinds.clear()
        self.parents.clear()
        self.vjps.clear()
        self.param_names.clear()
        self._param_cache.clear()
        self._adjoints = []


# ----------------------------------------------------------------------
# dispatching math helpers: Var -> tape op, ndarray -> numpy
# ----------------------------------------------------------------------

def exp(x):
    return x._exp() if isinstance(x, Var) else np.exp(x)


def log(x):
    return x._log() if isinstance(x, Var) else np.log(x)


def tanh(x):
    return x._tanh() if isinstance(x, Var) else np.tanh(x)


def sigmoid(x):
    return x._sigmoid() if isinstance(x, Var) else special.expit(x)


def softplus(x):
    return x._softplus() if isinstance(x, Var) else np.logaddexp(0.0, x)


def logaddexp(a, b):
    if isinstance(a, Var) or isinstance(b, Var):
        tape = a.tape if isinstance(a, Var) else b.tape
        va = a if isinstance(a, Var) else tape.constant(a)
        vb = b if isinstance(b, Var) else tape.constant(b)
        # log(e^a + e^b) = a + softplus(b - a); softplus is overflow-safe
        return va + softplus(vb - va)
    return np.logaddexp(a, b)


def logsumexp(x, axis=None, keepdims=False):
    if isinstance(x, Var):
        return x._logsumexp(axis=axis, keepdims=keepdims)
    return special.logsumexp(x, axis=axis, keepdims=keepdims)


def vsum(x, axis=None, keepdims=False):
    if isinstance(x, Var):
        return x._sum(axis=axis, keepdims=keepdims)
    return x.sum(axis=axis, keepdims=keepdims)


def vmean(x, axis=None):
    if isinstance(x, Var):
        n = x.value.size if axis is None else x.value.shape[axis]
        return x._sum(axis=axis) * (1.0 / n)
    return x.mean(axis=axis)


def matmul(a, b):
    if isinstance(a, Var):
        return a._matmul(b)
    if isinstance(b, Var):
        return b.tape.constant(a)._matmul(b)
    return a @ b


def reshape(x, shape):
    return x._reshape(shape) if isinstance(x, Var) else x.reshape(shape)


def columns(x, j0, j1):
    return x._columns(j0, j1) if isinstance(x, Var) else x[:, j0:j1]


def take_along(x, idx):
    idx = np.asarray(idx, dtype=np.intp)
    if isinstance(x, Var):
        return x._take_along(idx)
    return x[np.arange(x.shape[0]), idx]


def clip(x, lo, hi):
    return x._clip(lo, hi) if isinstance(x, Var) else np.clip(x, lo, hi)


def where(mask, a, b):
    """Branch on a *constant* boolean mask; gradients flow per branch."""
    mask = np.asarray(mask)
    if isinstance(a, Var) or isinstance(b, Var):
        tape = a.tape if isinstance(a, Var) else b.tape
        va = a if isinstance(a, Var) else tape.constant(a)
        vb = b if isinstance(b, Var) else tape.constant(b)
        m = mask.astype(np.float64)
        return va * m + vb * (1.0 - m)
    return np.where(mask, a, b)


def concat_cols(parts):
    """Concatenate 1-d/2-d pieces along the column axis."""
    if any(isinstance(p, Var) for p in parts):
        tape = next(p.tape for p in parts if isinstance(p, Var))
        cols = []
        for p in parts:
            v = p if isinstance(p, Var) else tape.constant(p)
            if v.value.ndim == 1:
                v = v._reshape((-1, 1))
            cols.append(v)
        out = cols[0]
        widths = [c.value.shape[1] for c in cols]
        n = cols[0].value.shape[0]
        joined = np.concatenate([c.value for c in cols], axis=1)

        def vjp(g):
            outs, j = [], 0
            for w in widths:
                outs.append(g[:, j:j + w])
                j += w
            return tuple(outs)

        return tape._record("concat", joined, tuple(c.idx for c in cols), vjp)
    arrs = [np.asarray(p, dtype=np.float64) for p in parts]
    arrs = [a.reshape(-1, 1) if a.ndim == 1 else a for a in arrs]
    return np.concatenate(arrs, axis=1)


def value_of(x) -> Array:
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


# ----------------------------------------------------------------------
# parameters, MLP layers, Adam
# ----------------------------------------------------------------------

class ParamStore:
    """Named float64 parameter vectors with per-parameter Adam state."""

    def __init__(self):
        self._params: dict[str, Array] = {}
        self._m: dict[str, Array] = {}
        self._v: dict[str, Array] = {}
        self._t: dict[str, int] = {}

    def create(self, name: str, value) -> Array:
        if name in self._params:
            raise AutodiffError(f"parameter {name!r} already exists")
        arr = _f64(value).copy()
        self._params[name] = arr
        self._m[name] = np.zeros_like(arr)
        self._v[name] = np.zeros_like(arr)
        self._t[name] = 0
        return arr

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name) -> Array:
        return self._params[name]

    def __setitem__(self, name, value):
        arr = _f64(value)
        if name in self._params and arr.shape != self._params[name].shape:
            raise AutodiffError(f"shape change for parameter {name!r}")
        if name not in self._params:
            self.create(name, arr)
        else:
            self._params[name] = arr.copy()

    def names(self) -> list[str]:
        return list(self._params)

    def state_dict(self) -> dict[str, Array]:
        return {k: v.copy() for k, v in self._params.items()}

    def load_state_dict(self, state: dict):
        for k, v in state.items():
            self[k] = v

    def reset_optimizer(self):
        for k in self._params:
            self._m[k][:] = 0.0
            self._v[k][:] = 0.0
            self._t[k] = 0


def adam_step(store: ParamStore, grads: dict[str, Array], lr: float = 1e-3,
              betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
    """One in-place Adam update with bias correction."""
    b1, b2 = betas
    for name, g in grads.items():
        p = store._params[name]
        if g.shape != p.shape:
            raise AutodiffError(f"gradient shape {g.shape} does not match "
                                f"parameter {name!r} shape {p.shape}")
        store._t[name] += 1
        t = store._t[name]
        m = store._m[name]
        v = store._v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        mhat = m / (1.0 - b1 ** t)
        vhat = v / (1.0 - b2 ** t)
        p -= lr * mhat / (np.sqrt(vhat) + eps)


def clip_grad_norm(grads: dict[str, Array], max_norm: float) -> float:
    """Scale gradients in place so their global norm is at most ``max_norm``."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


@dataclass(frozen=True)
class MLPSpec:
    """Shape of a fully-connected network; empty hidden = pure linear map."""

    in_dim: int
    hidden: tuple[int, ...]
    out_dim: int
    activation: str = "tanh"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1 or any(h < 1 for h in self.hidden):
            raise AutodiffError("all MLP dimensions must be >= 1")
        if self.activation != "tanh":
            raise AutodiffError(f"unsupported activation {self.activation!r}")

    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.in_dim, *self.hidden, self.out_dim]
        return list(zip(dims[:-1], dims[1:]))


def init_mlp(store: ParamStore, prefix: str, spec: MLPSpec,
             rng: np.random.Generator, zero_last: bool = False,
             last_bias=None):
    """Create MLP parameters ``{prefix}.W{i}`` / ``{prefix}.b{i}``.

    ``zero_last`` zeroes the final weight matrix so the initial output is
    exactly the final bias, independent of the input.
    """
    layers = spec.layer_dims()
    for i, (fan_in, fan_out) in enumerate(layers):
        last = i == len(layers) - 1
        if last and zero_last:
            w = np.zeros((fan_in, fan_out))
        else:
            w = rng.standard_normal((fan_in, fan_out)) / math.sqrt(fan_in)
        b = np.zeros(fan_out)
        if last and last_bias is not None:
            b = _f64(last_bias).copy()
        store.create(f"{prefix}.W{i}", w)
        store.create(f"{prefix}.b{i}", b)


def mlp_param_names(prefix: str, spec: MLPSpec) -> list[str]:
    names = []
    for i in range(len(spec.layer_dims())):
        names += [f"{prefix}.W{i}", f"{prefix}.b{i}"]
    return names


def mlp_forward(ctx, spec: MLPSpec, prefix: str, x):
    """Run the MLP on a (n, in_dim) batch (or a single (in_dim,) vector).

    ``ctx`` supplies parameters (see :class:`TapeContext` /
    :class:`EvalContext`); with a tape context the output is differentiable
    w.r.t. both the parameters and a ``Var`` input.
    """
    single = value_of(x).ndim == 1
    h = reshape(x, (1, -1)) if single else x
    if value_of(h).shape[1] != spec.in_dim:
        raise AutodiffError(
            f"MLP {prefix!r} expects input dim {spec.in_dim}, "
            f"got {value_of(h).shape[1]}")
    n_layers = len(spec.layer_dims())
    for i in range(n_layers):
        w = ctx.param(f"{prefix}.W{i}")
        b = ctx.param(f"{prefix}.b{i}")
        h = matmul(h, w) + b
        if i < n_layers - 1:
            h = tanh(h)
    return reshape(h, (-1,)) if single else h


class TapeContext:
    """Parameter provider that records reads on a tape (differentiable)."""

    def __init__(self, tape: Tape, store: ParamStore):
        self.tape = tape
        self.store = store

    def param(self, name: str) -> Var:
        return self.tape.param(self.store, name)

    def lift(self, value):
        return self.tape.constant(value)


class EvalContext:
    """Parameter provider for plain numpy evaluation (no gradients)."""

    def __init__(self, store: ParamStore):
        self.store = store

    def param(self, name: str) -> Array:
        return self.store[name]

    def lift(self, value):
        return _f64(value)
