"""Shaping operators: maps from a raw weight matrix to its effective map.

Every operator is linear in ``W``. Product-style operators (diagonal
scaling, band projection, Laplacian smoothing, learned projection) act from
the left; the sparsity template acts elementwise. The gradient pull-back of
each is its adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError
from .linalg import (
    as_matrix,
    dct_basis,
    graph_laplacian,
    path_edges,
    solve_linear,
    svd_values,
)

KINDS = (
    "identity",
    "sparsity_mask",
    "diagonal_scale",
    "low_rank",
    "dct_band",
    "laplacian_smooth",
    "learned_projection",
)


class ShapingOperator:
    kind = "abstract"
    learnable = False

    def __init__(self, out_dim, in_dim):
        self.out_dim = int(out_dim)
        self.in_dim = int(in_dim)

    def check(self, w):
        if w.shape != (self.out_dim, self.in_dim):
            raise ShapeError(
                f"{self.kind} operator built for {(self.out_dim, self.in_dim)}, "
                f"got weight of shape {w.shape}"
            )

    def apply(self, w):
        raise NotImplementedError

    def vjp(self, w, d_eff):
        """Return ``(dW, dP)``; ``dP`` is None unless the operator is learnable."""
        raise NotImplementedError

    # serialisation: scalar settings and named arrays
    def settings(self):
        return {}

    def arrays(self):
        return {}

    def __repr__(self):
        return f"{type(self).__name__}({self.out_dim}x{self.in_dim})"


class Identity(ShapingOperator):
    kind = "identity"

    def apply(self, w):
        return w

    def vjp(self, w, d_eff):
        return d_eff, None


class SparsityMask(ShapingOperator):
    kind = "sparsity_mask"

    def __init__(self, mask):
        mask = as_matrix(mask, "mask")
        if not np.all((mask == 0) | (mask == 1)):
            raise ValidationError("sparsity mask entries must be 0 or 1")
        if np.any(mask.sum(axis=1) == 0):
            raise ValidationError("sparsity mask has an all-zero row")
        super().__init__(*mask.shape)
        self.mask = mask

    @classmethod
    def random(cls, out_dim, in_dim, density=0.5, seed=0):
        rng = np.random.default_rng([seed, out_dim, in_dim])
        mask = (rng.random((out_dim, in_dim)) < density).astype(np.float64)
        for r in np.flatnonzero(mask.sum(axis=1) == 0):
            mask[r, rng.integers(in_dim)] = 1.0
        return cls(mask)

    def apply(self, w):
        self.check(w)
        return self.mask * w

    def vjp(self, w, d_eff):
        return self.mask * d_eff, None

    def arrays(self):
        return {"mask": self.mask}


class DiagonalScale(ShapingOperator):
    kind = "diagonal_scale"

    def __init__(self, scales, in_dim):
        d = np.asarray(scales, dtype=np.float64)
        if d.ndim != 1 or np.any(~np.isfinite(d)) or np.any(d <= 0):
            raise ValidationError("diagonal scales must be a vector of positive reals")
        super().__init__(d.shape[0], in_dim)
        self.scales = d

    def apply(self, w):
        self.check(w)
        return self.scales[:, None] * w

    def vjp(self, w, d_eff):
        return self.scales[:, None] * d_eff, None

    def arrays(self):
        return {"scales": self.scales}


class LowRank(ShapingOperator):
    """Two-sided projection ``U U^T W V V^T`` onto fixed rank-r subspaces."""

    kind = "low_rank"

    def __init__(self, u, v):
        u = as_matrix(u, "U")
        v = as_matrix(v, "V")
        if u.shape[1] != v.shape[1]:
            raise ShapeError(f"U {u.shape} and V {v.shape} disagree on rank")
        super().__init__(u.shape[0], v.shape[0])
        self.rank = u.shape[1]
        self.u = u
        self.v = v
        self._left = u @ u.T
        self._right = v @ v.T

    @classmethod
    def dct(cls, out_dim, in_dim, rank):
        if not 1 <= rank <= min(out_dim, in_dim):
            raise ValidationError(f"rank {rank} outside [1, {min(out_dim, in_dim)}]")
        return cls(dct_basis(out_dim)[:rank].T, dct_basis(in_dim)[:rank].T)

    def apply(self, w):
        self.check(w)
        return self._left @ w @ self._right

    def vjp(self, w, d_eff):
        return self._left.T @ d_eff @ self._right.T, None

    def settings(self):
        return {"rank": self.rank}

    def arrays(self):
        return {"u": self.u, "v": self.v}


class DCTBand(ShapingOperator):
    """Two-sided cosine band projection ``P_out W P_in``.

    ``P = D^T B D`` keeps the pass-band modes of an orthonormal DCT basis.
    Filtering the input side as well as the output side means stop-band
    input content never reaches the output, whatever ``W`` is. The input
    band defaults to the output band for square layers and to all modes
    otherwise.
    """

    kind = "dct_band"

    def __init__(self, passband, out_dim, in_dim, in_passband=None):
        super().__init__(out_dim, in_dim)
        self.passband = self._band(passband, out_dim, "pass-band")
        if in_passband is None:
            in_passband = self.passband if in_dim == out_dim else range(in_dim)
        self.in_passband = self._band(in_passband, in_dim, "input pass-band")
        self.basis_out = dct_basis(out_dim)
        self.basis_in = dct_basis(in_dim)
        keep = self.basis_out[self.passband]
        self._proj = keep.T @ keep
        keep = self.basis_in[self.in_passband]
        self._proj_in = keep.T @ keep

    @staticmethod
    def _band(modes, n, what):
        band = sorted({int(k) for k in modes})
        if not band:
            raise ValidationError(f"dct_band {what} is empty")
        if band[0] < 0 or band[-1] >= n:
            raise ValidationError(f"dct_band {what} modes must lie in [0, {n})")
        return np.array(band, dtype=np.int64)

    @staticmethod
    def _cut(fraction, n):
        return min(n, max(1, int(np.ceil(fraction * n))))

    @classmethod
    def lowpass(cls, out_dim, in_dim, fraction=0.25):
        return cls(range(cls._cut(fraction, out_dim)), out_dim, in_dim,
                   range(cls._cut(fraction, in_dim)))

    @classmethod
    def highpass(cls, out_dim, in_dim, fraction=0.25):
        return cls(range(cls._cut(fraction, out_dim), out_dim), out_dim, in_dim,
                   range(cls._cut(fraction, in_dim), in_dim))

    def apply(self, w):
        self.check(w)
        return self._proj @ w @ self._proj_in

    def vjp(self, w, d_eff):
        return self._proj.T @ d_eff @ self._proj_in.T, None

    def arrays(self):
        return {"passband": self.passband.astype(np.float64),
                "in_passband": self.in_passband.astype(np.float64)}


class LaplacianSmooth(ShapingOperator):
    """Graph smoother ``(I + alpha L)^-1`` applied from the left."""

    kind = "laplacian_smooth"

    def __init__(self, laplacian, in_dim, alpha=1.0):
        lap = as_matrix(laplacian, "laplacian")
        if lap.shape[0] != lap.shape[1]:
            raise ShapeError(f"laplacian must be square, got {lap.shape}")
        if alpha < 0:
            raise ValidationError(f"alpha must be >= 0, got {alpha}")
        super().__init__(lap.shape[0], in_dim)
        self.alpha = float(alpha)
        self.laplacian = lap
        n = lap.shape[0]
        self._smoother = solve_linear(np.eye(n) + self.alpha * lap, np.eye(n))

    @classmethod
    def from_edges(cls, n, edges, in_dim, alpha=1.0):
        return cls(graph_laplacian(n, edges), in_dim, alpha)

    def apply(self, w):
        self.check(w)
        return self._smoother @ w

    def vjp(self, w, d_eff):
        return self._smoother.T @ d_eff, None

    @property
    def smoother(self):
        return self._smoother

    def settings(self):
        return {"alpha": self.alpha}

    def arrays(self):
        return {"laplacian": self.laplacian}


class LearnedProjection(ShapingOperator):
    """Trainable left factor ``P``; starts at the identity."""

    kind = "learned_projection"
    learnable = True

    def __init__(self, out_dim, in_dim, p=None):
        super().__init__(out_dim, in_dim)
        self.p = np.eye(out_dim) if p is None else as_matrix(p, "P").copy()
        if self.p.shape != (out_dim, out_dim):
            raise ShapeError(f"P must be {(out_dim, out_dim)}, got {self.p.shape}")

    def apply(self, w):
        self.check(w)
        return self.p @ w

    def vjp(self, w, d_eff):
        return self.p.T @ d_eff, d_eff @ w.T

    def arrays(self):
        return {"p": self.p}


@dataclass
class EffectiveMap:
    matrix: np.ndarray
    operator: ShapingOperator
    weight: np.ndarray


def apply_shaping(op, w):
    w = as_matrix(w, "weight")
    return EffectiveMap(op.apply(w), op, w)


def shaping_vjp(op, w, d_eff):
    w = np.asarray(w, dtype=np.float64)
    d_eff = np.asarray(d_eff, dtype=np.float64)
    op.check(w)
    if d_eff.shape != (op.out_dim, op.in_dim):
        raise ShapeError(f"d_eff shape {d_eff.shape} does not match {w.shape}")
    return op.vjp(w, d_eff)


def spectral_cap(op, w, target):
    """Rescale ``w`` so the effective map's top singular value is <= target."""
    if target <= 0:
        raise ValidationError("spectral cap target must be positive")
    w = as_matrix(w, "weight")
    sigma = svd_values(op.apply(w))[0]
    if sigma > target:
        return w * (target / sigma)
    return w


def make_shaping(kind, out_dim, in_dim, *, passband=0.25, band="low", rank=None,
                 alpha=1.0, edges=None, density=0.5, scale=1.0, seed=0):
    """Build an operator of the named kind for an ``out_dim x in_dim`` weight.

    Keyword arguments that do not apply to ``kind`` are ignored, so one
    architecture block can drive every variant.
    """
    if kind == "identity":
        return Identity(out_dim, in_dim)
    if kind == "sparsity_mask":
        return SparsityMask.random(out_dim, in_dim, density, seed)
    if kind == "diagonal_scale":
        scales = np.broadcast_to(np.asarray(scale, dtype=np.float64), (out_dim,))
        return DiagonalScale(scales.copy(), in_dim)
    if kind == "low_rank":
        r = rank if rank else max(1, min(out_dim, in_dim) // 4)
        return LowRank.dct(out_dim, in_dim, r)
    if kind == "dct_band":
        if band == "low":
            return DCTBand.lowpass(out_dim, in_dim, passband)
        if band == "high":
            return DCTBand.highpass(out_dim, in_dim, passband)
        raise ValidationError(f"unknown dct band {band!r}")
    if kind == "laplacian_smooth":
        e = path_edges(out_dim) if edges is None else edges
        return LaplacianSmooth.from_edges(out_dim, e, in_dim, alpha)
    if kind == "learned_projection":
        return LearnedProjection(out_dim, in_dim)
    raise ValidationError(f"unknown shaping kind {kind!r}")


def shaping_from_state(kind, out_dim, in_dim, settings, arrays):
    if kind == "identity":
        return Identity(out_dim, in_dim)
    if kind == "sparsity_mask":
        return SparsityMask(arrays["mask"])
    if kind == "diagonal_scale":
        return DiagonalScale(arrays["scales"], in_dim)
    if kind == "low_rank":
        return LowRank(arrays["u"], arrays["v"])
    if kind == "dct_band":
        return DCTBand(arrays["passband"].astype(np.int64), out_dim, in_dim,
                       arrays["in_passband"].astype(np.int64))
    if kind == "laplacian_smooth":
        return LaplacianSmooth(arrays["laplacian"], in_dim, settings["alpha"])
    if kind == "learned_projection":
        return LearnedProjection(out_dim, in_dim, arrays["p"])
    raise ValidationError(f"unknown shaping kind {kind!r}")
