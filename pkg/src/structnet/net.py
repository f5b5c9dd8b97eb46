"""Structured layers, correction networks, dense baselines and networks.

A structured layer computes ``y = S(W) x + phi(x)`` where ``S`` is a shaping
operator and ``phi`` a one-hidden-layer tanh network. Inputs may be a single
vector of shape ``(in,)`` or a batch of shape ``(n, in)``; outputs keep the
same rank.

Gradients are hand-derived reverse mode. ``params()`` returns the parameter
registry as ``(name, array)`` pairs in a fixed order (per layer: W, P, w1,
b1, w2, b2) and ``backward`` returns gradients aligned with it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, StaleCacheError, ValidationError
from .linalg import svd_values
from .shaping import ShapingOperator, make_shaping, spectral_cap


def _batch(x, dim):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != dim:
        raise ShapeError(f"expected input of width {dim}, got shape {x.shape}")
    return xb, single


def _act(name, z):
    if name is None or name == "none":
        return z
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    raise ValidationError(f"unknown activation {name!r}")


def _act_grad(name, z, y):
    if name is None or name == "none":
        return np.ones_like(z)
    if name == "tanh":
        return 1.0 - y * y
    if name == "relu":
        return (z > 0).astype(np.float64)
    raise ValidationError(f"unknown activation {name!r}")


class CorrectionNet:
    """``phi(x) = w2 tanh(w1 x + b1) + b2``."""

    def __init__(self, w1, b1, w2, b2):
        self.w1 = np.array(w1, dtype=np.float64)
        self.b1 = np.array(b1, dtype=np.float64)
        self.w2 = np.array(w2, dtype=np.float64)
        self.b2 = np.array(b2, dtype=np.float64)
        h, n_in = self.w1.shape
        if self.b1.shape != (h,) or self.w2.shape[1] != h or self.b2.shape != (self.w2.shape[0],):
            raise ShapeError("correction network parameter shapes do not chain")

    @property
    def in_dim(self):
        return self.w1.shape[1]

    @property
    def out_dim(self):
        return self.w2.shape[0]

    def forward(self, x):
        xb, single = _batch(x, self.in_dim)
        pre = xb @ self.w1.T + self.b1
        h = np.tanh(pre)
        y = h @ self.w2.T + self.b2
        return (y[0] if single else y), (xb, pre, h)

    def backward(self, cache, dy):
        xb, pre, h = cache
        dy = np.atleast_2d(dy)
        dw2 = dy.T @ h
        db2 = dy.sum(axis=0)
        dpre = (dy @ self.w2) * (1.0 - h * h)
        dw1 = dpre.T @ xb
        db1 = dpre.sum(axis=0)
        dx = dpre @ self.w1
        return dx, [dw1, db1, dw2, db2]

    def params(self):
        return [("w1", self.w1), ("b1", self.b1), ("w2", self.w2), ("b2", self.b2)]

    def jacobian(self, x):
        h = np.tanh(self.w1 @ x + self.b1)
        return (self.w2 * (1.0 - h * h)) @ self.w1

    def lipschitz_bound(self):
        return svd_values(self.w2)[0] * svd_values(self.w1)[0]


def correction_forward(c, x):
    return c.forward(x)


@dataclass
class LayerCache:
    layer: object
    x: np.ndarray
    structured: np.ndarray
    correction: np.ndarray
    output: np.ndarray
    pre_activation: np.ndarray
    effective: np.ndarray
    correction_cache: tuple | None = None
    single: bool = False
    used: bool = field(default=False, repr=False)

    @property
    def hidden_pre(self):
        return None if self.correction_cache is None else self.correction_cache[1]


class StructuredLayer:
    def __init__(self, weight, shaping: ShapingOperator, correction: CorrectionNet | None = None,
                 correction_enabled=True, outer_activation=None):
        self.weight = np.array(weight, dtype=np.float64)
        self.shaping = shaping
        shaping.check(self.weight)
        self.correction = correction
        self.correction_enabled = bool(correction_enabled) and correction is not None
        if correction is not None and (correction.in_dim, correction.out_dim) != (self.in_dim, self.out_dim):
            raise ShapeError("correction network does not map the layer's input to its output")
        self.outer_activation = outer_activation

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]

    def effective_map(self):
        return self.shaping.apply(self.weight)

    def params(self):
        out = [("W", self.weight)]
        if self.shaping.learnable:
            out.append(("P", self.shaping.p))
        if self.correction is not None:
            out.extend(self.correction.params())
        return out

    def forward(self, x):
        xb, single = _batch(x, self.in_dim)
        eff = self.effective_map()
        s = xb @ eff.T
        ccache = None
        if self.correction_enabled:
            c, ccache = self.correction.forward(xb)
        else:
            c = np.zeros_like(s)
        z = s + c
        y = _act(self.outer_activation, z)
        cache = LayerCache(self, xb, s, c, y, z, eff, ccache, single)
        return (y[0] if single else y), cache

    def backward(self, cache, dy):
        if cache.layer is not self:
            raise StaleCacheError("cache was produced by a different layer")
        if cache.used:
            raise StaleCacheError("cache already consumed by a backward pass")
        cache.used = True
        dy = np.atleast_2d(np.asarray(dy, dtype=np.float64))
        if dy.shape != cache.output.shape:
            raise ShapeError(f"upstream gradient {dy.shape} does not match output {cache.output.shape}")
        dz = dy * _act_grad(self.outer_activation, cache.pre_activation, cache.output)
        d_eff = dz.T @ cache.x
        dw, dp = self.shaping.vjp(self.weight, d_eff)
        dx = dz @ cache.effective
        grads = [dw]
        if self.shaping.learnable:
            grads.append(dp)
        if self.correction is not None:
            if self.correction_enabled:
                dxc, cgrads = self.correction.backward(cache.correction_cache, dz)
                dx = dx + dxc
            else:
                cgrads = [np.zeros_like(p) for _, p in self.correction.params()]
            grads.extend(cgrads)
        return (dx[0] if cache.single else dx), grads

    def jacobian(self, x):
        x = np.asarray(x, dtype=np.float64)
        j = self.effective_map().copy()
        if self.correction_enabled:
            j += self.correction.jacobian(x)
        if self.outer_activation not in (None, "none"):
            _, cache = self.forward(x)
            slope = _act_grad(self.outer_activation, cache.pre_activation, cache.output)[0]
            j = slope[:, None] * j
        return j

    def lipschitz_bound(self):
        """``sigma1(S(W)) + sigma1(w2) sigma1(w1)``; tanh/relu outer maps are 1-Lipschitz."""
        bound = svd_values(self.effective_map())[0]
        if self.correction_enabled:
            bound += self.correction.lipschitz_bound()
        return bound


def layer_forward(layer, x):
    return layer.forward(x)


def layer_backward(layer, cache, dy):
    return layer.backward(cache, dy)


@dataclass
class DenseCache:
    layer: object
    x: np.ndarray
    pre_activation: np.ndarray
    output: np.ndarray
    single: bool = False
    used: bool = field(default=False, repr=False)

    @property
    def correction(self):
        return None


class DenseLayer:
    """Conventional ``act(W x + b)`` layer used for the MLP baseline."""

    def __init__(self, weight, bias, activation="relu"):
        self.weight = np.array(weight, dtype=np.float64)
        self.bias = np.array(bias, dtype=np.float64)
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"bias {self.bias.shape} does not match weight {self.weight.shape}")
        if activation not in ("relu", "tanh", "none", None):
            raise ValidationError(f"unknown activation {activation!r}")
        self.activation = activation or "none"

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]

    def params(self):
        return [("W", self.weight), ("b", self.bias)]

    def forward(self, x):
        xb, single = _batch(x, self.in_dim)
        z = xb @ self.weight.T + self.bias
        y = _act(self.activation, z)
        cache = DenseCache(self, xb, z, y, single)
        return (y[0] if single else y), cache

    def backward(self, cache, dy):
        if cache.layer is not self or cache.used:
            raise StaleCacheError("stale or foreign cache passed to DenseLayer.backward")
        cache.used = True
        dy = np.atleast_2d(np.asarray(dy, dtype=np.float64))
        dz = dy * _act_grad(self.activation, cache.pre_activation, cache.output)
        dx = dz @ self.weight
        grads = [dz.T @ cache.x, dz.sum(axis=0)]
        return (dx[0] if cache.single else dx), grads

    def jacobian(self, x):
        z = self.weight @ x + self.bias
        y = _act(self.activation, z)
        return _act_grad(self.activation, z, y)[:, None] * self.weight

    def lipschitz_bound(self):
        return svd_values(self.weight)[0]

    def effective_map(self):
        return self.weight


@dataclass
class BranchCache:
    layer: object
    caches: list
    output: np.ndarray
    single: bool = False

    @property
    def correction(self):
        return sum(c.correction for c in self.caches)


class ParallelBranches:
    """Sum of several same-shape layers applied to one input."""

    def __init__(self, branches):
        if not branches:
            raise ValidationError("need at least one branch")
        dims = {(b.in_dim, b.out_dim) for b in branches}
        if len(dims) != 1:
            raise ShapeError(f"branches disagree on shape: {sorted(dims)}")
        self.branches = list(branches)

    @property
    def in_dim(self):
        return self.branches[0].in_dim

    @property
    def out_dim(self):
        return self.branches[0].out_dim

    def params(self):
        return [(f"branch{k}.{name}", p)
                for k, b in enumerate(self.branches) for name, p in b.params()]

    def forward(self, x):
        xb, single = _batch(x, self.in_dim)
        caches = []
        total = 0.0
        for b in self.branches:
            y, c = b.forward(xb)
            total = total + y
            caches.append(c)
        return (total[0] if single else total), BranchCache(self, caches, total, single)

    def backward(self, cache, dy):
        dy = np.atleast_2d(dy)
        dx = 0.0
        grads = []
        for b, c in zip(self.branches, cache.caches):
            d, g = b.backward(c, dy)
            dx = dx + d
            grads.extend(g)
        return (dx[0] if cache.single else dx), grads

    def jacobian(self, x):
        return sum(b.jacobian(x) for b in self.branches)

    def lipschitz_bound(self):
        return sum(b.lipschitz_bound() for b in self.branches)


class Network:
    def __init__(self, layers):
        if not layers:
            raise ValidationError("a network needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k - 1].out_dim != layers[k].in_dim:
                raise ShapeError(
                    f"layer {k - 1} outputs {layers[k - 1].out_dim} but layer {k} "
                    f"expects {layers[k].in_dim}"
                )
        self.layers = list(layers)

    @property
    def in_dim(self):
        return self.layers[0].in_dim

    @property
    def out_dim(self):
        return self.layers[-1].out_dim

    def params(self):
        return [(f"{i}.{name}", p) for i, layer in enumerate(self.layers)
                for name, p in layer.params()]

    def n_params(self):
        return sum(p.size for _, p in self.params())

    def forward(self, x):
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x)
            caches.append(c)
        return x, caches

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, caches, dy):
        if len(caches) != len(self.layers):
            raise StaleCacheError(f"expected {len(self.layers)} caches, got {len(caches)}")
        per_layer = []
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dy, g = layer.backward(cache, dy)
            per_layer.append(g)
        grads = [g for layer_grads in reversed(per_layer) for g in layer_grads]
        return dy, grads

    def layer_inputs(self, x):
        """Inputs seen by each layer for a single vector ``x``."""
        inputs = []
        for layer in self.layers:
            inputs.append(x)
            x = layer.forward(x)[0]
        return inputs

    def jacobian(self, x):
        x = np.asarray(x, dtype=np.float64)
        j = np.eye(self.in_dim)
        for layer in self.layers:
            j = layer.jacobian(x) @ j
            x = layer.forward(x)[0]
        return j

    def lipschitz_bound(self):
        return float(np.prod([layer.lipschitz_bound() for layer in self.layers]))


def network_forward(net, x):
    return net.forward(x)


def network_backward(net, caches, dy):
    return net.backward(caches, dy)


def jacobian(model, x):
    """Exact input-output Jacobian of a network or a single layer at ``x``."""
    return model.jacobian(np.asarray(x, dtype=np.float64))


@dataclass
class Architecture:
    """Description consumed by :func:`init_network`.

    ``shaping`` is one kind for every layer or a sequence with one kind per
    layer; ``shaping_params`` is forwarded to :func:`make_shaping`.
    """

    dims: tuple
    model: str = "structured"
    shaping: object = "identity"
    shaping_params: dict = field(default_factory=dict)
    correction: bool = True
    gamma: float | None = 0.95
    hidden: int | None = None
    outer_activation: str | None = None

    def layer_kinds(self):
        n = len(self.dims) - 1
        if isinstance(self.shaping, str):
            return [self.shaping] * n
        kinds = list(self.shaping)
        if len(kinds) != n:
            raise ValidationError(f"{len(kinds)} shaping kinds for {n} layers")
        return kinds


def init_network(arch: Architecture, seed=0):
    dims = [int(d) for d in arch.dims]
    if len(dims) < 2 or min(dims) < 1:
        raise ValidationError(f"invalid layer dims {dims}")
    rng = np.random.default_rng(seed)
    layers = []
    if arch.model == "mlp":
        for i, (n_in, n_out) in enumerate(zip(dims[:-1], dims[1:])):
            last = i == len(dims) - 2
            gain = 1.0 if last else 2.0
            w = rng.standard_normal((n_out, n_in)) * np.sqrt(gain / n_in)
            layers.append(DenseLayer(w, np.zeros(n_out), "none" if last else "relu"))
        return Network(layers)
    if arch.model != "structured":
        raise ValidationError(f"unknown model type {arch.model!r}")
    for i, (kind, n_in, n_out) in enumerate(zip(arch.layer_kinds(), dims[:-1], dims[1:])):
        op = make_shaping(kind, n_out, n_in, seed=seed + i, **arch.shaping_params)
        w = rng.standard_normal((n_out, n_in)) / np.sqrt(n_in)
        if arch.gamma is not None:
            w = spectral_cap(op, w, arch.gamma)
        hidden = arch.hidden or n_out
        w1 = rng.standard_normal((hidden, n_in)) / np.sqrt(n_in)
        corr = CorrectionNet(w1, np.zeros(hidden), np.zeros((n_out, hidden)), np.zeros(n_out))
        layers.append(StructuredLayer(w, op, corr, arch.correction, arch.outer_activation))
    return Network(layers)


def mlp_hidden_for_budget(dim_in, dim_out, budget):
    """Hidden width of a one-hidden-layer MLP whose parameter count is closest to ``budget``."""
    return max(1, int(round((budget - dim_out) / (dim_in + dim_out + 1))))
