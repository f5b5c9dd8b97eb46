"""Dense float64 kernels: products, singular values, DCT basis, Laplacians.

Matrices and vectors are plain ``numpy.ndarray`` objects of dtype float64.
The helpers :func:`as_matrix` and :func:`as_vector` enforce the shape and
finiteness invariants at API boundaries.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeError, ValidationError

SVD_MAX_SWEEPS = 100
SVD_TOL = 1e-12
PIVOT_TOL = 1e-12


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D float64 array with at least one entry."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{name} must be a nonempty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    return m


def as_vector(v, name="vector"):
    x = np.asarray(v, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < 1:
        raise ShapeError(f"{name} must be a nonempty 1-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{name} has non-finite entries")
    return x


def matmul(a, b):
    """Matrix product with an explicit shape check.

    ``b`` may be a matrix or a vector; a vector is treated as a column.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def _round_robin(n):
    """Pairings of n (even) columns into n-1 rounds of n/2 disjoint pairs."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        left = players[:half]
        right = players[half:][::-1]
        rounds.append((np.array(left), np.array(right)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def svd_values(a, max_sweeps=SVD_MAX_SWEEPS, tol=SVD_TOL):
    """Singular values of ``a`` in descending order.

    One-sided (Hestenes) Jacobi: columns are orthogonalised by plane
    rotations until every pair satisfies
    ``|u_i . u_j| <= tol * |u_i| |u_j|``; the singular values are then the
    column norms. Disjoint pairs are rotated together in round-robin order.
    Columns whose norm falls below rounding level relative to ``|a|_F`` are
    treated as exact zeros, so rank-deficient inputs terminate.
    """
    a = as_matrix(a)
    u = a.T.copy() if a.shape[0] < a.shape[1] else a.copy()
    n = u.shape[1]
    if n == 1:
        return np.array([np.linalg.norm(u[:, 0])])
    if n % 2:
        u = np.hstack([u, np.zeros((u.shape[0], 1))])
    rounds = _round_robin(u.shape[1])
    negligible = (np.finfo(np.float64).eps * max(u.shape) * np.linalg.norm(u)) ** 2

    off_mass = np.inf
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(max_sweeps):
            worst = 0.0
            off_sq = 0.0
            for left, right in rounds:
                ui = u[:, left]
                uj = u[:, right]
                alpha = np.einsum("ij,ij->j", ui, ui)
                beta = np.einsum("ij,ij->j", uj, uj)
                gamma = np.einsum("ij,ij->j", ui, uj)
                scale = np.sqrt(alpha * beta)
                live = (alpha > negligible) & (beta > negligible)
                active = live & (np.abs(gamma) > tol * scale)
                if not active.any():
                    continue
                ratio = np.where(live, np.abs(gamma) / scale, 0.0)
                worst = max(worst, float(ratio.max()))
                off_sq += float(np.sum(gamma[active] ** 2))
                zeta = (beta - alpha) / (2.0 * gamma)
                sign = np.where(zeta >= 0, 1.0, -1.0)
                t = sign / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                c = np.where(active, c, 1.0)
                s = np.where(active, s, 0.0)
                u[:, left] = c * ui - s * uj
                u[:, right] = s * ui + c * uj
            off_mass = np.sqrt(off_sq)
            if worst <= tol:
                break
        else:
            raise NumericError(
                f"Jacobi SVD did not converge in {max_sweeps} sweeps",
                off_diagonal=off_mass,
            )
    values = np.sqrt(np.einsum("ij,ij->j", u, u))[:n]
    return np.sort(values)[::-1]


def dct_basis(n):
    """Orthonormal DCT-II matrix; row ``k`` is the k-th cosine mode."""
    if n < 1:
        raise ValidationError(f"dct_basis needs n >= 1, got {n}")
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    d = np.cos(np.pi * k * (2 * i + 1) / (2 * n))
    d[0] *= np.sqrt(1.0 / n)
    d[1:] *= np.sqrt(2.0 / n)
    return d


def graph_laplacian(n, edges):
    """Unnormalised Laplacian ``D - A`` of an undirected simple graph."""
    if n < 1:
        raise ValidationError(f"graph needs at least one node, got {n}")
    adj = np.zeros((n, n))
    seen = set()
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if not (0 <= i < n and 0 <= j < n):
            raise ValidationError(f"edge ({i}, {j}) out of range for n={n}")
        if i == j:
            raise ValidationError(f"self-loop at node {i}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValidationError(f"duplicate edge ({i}, {j})")
        seen.add(key)
        adj[i, j] = adj[j, i] = 1.0
    return np.diag(adj.sum(axis=1)) - adj


def path_edges(n):
    return [(i, i + 1) for i in range(n - 1)]


def spectral_norm_estimate(a, max_iters=5000, tol=1e-10):
    """Largest singular value by power iteration on ``A^T A``.

    Stops once the eigen-residual ``|B v - lam v|`` drops below
    ``tol * lam``, which bounds the relative error of the returned value
    by ``tol``.
    """
    a = as_matrix(a)
    if tol <= 0:
        raise ValidationError("tol must be positive")
    v = np.random.default_rng(0).standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iters):
        av = a @ v
        bv = a.T @ av
        lam = float(v @ bv)
        if lam <= 0.0:
            # v lies in the null space; a is zero or v was unlucky.
            if not np.any(a):
                return 0.0
            v = np.ones(a.shape[1]) / np.sqrt(a.shape[1]) + v
            v /= np.linalg.norm(v)
            continue
        est = np.sqrt(lam)
        if np.linalg.norm(bv - lam * v) <= tol * lam:
            return float(est)
        v = bv / np.linalg.norm(bv)
    raise NumericError(
        f"power iteration did not converge in {max_iters} iterations",
        estimate=float(est),
    )


def solve_linear(a, b):
    """Solve ``a x = b`` by Gaussian elimination with partial pivoting.

    ``b`` may be a vector or a matrix of right-hand sides.
    """
    a = as_matrix(a, "a")
    n = a.shape[0]
    if a.shape[1] != n:
        raise ShapeError(f"solve_linear needs a square matrix, got {a.shape}")
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != n:
        raise ShapeError(f"right-hand side {b.shape} does not match {a.shape}")
    vector_rhs = b.ndim == 1
    m = a.copy()
    rhs = b.reshape(n, -1).copy()
    for col in range(n):
        piv = col + int(np.argmax(np.abs(m[col:, col])))
        if abs(m[piv, col]) <= PIVOT_TOL:
            raise NumericError(
                f"singular matrix: pivot {col} has magnitude {abs(m[piv, col]):.3g}",
                pivot=col,
            )
        if piv != col:
            m[[col, piv]] = m[[piv, col]]
            rhs[[col, piv]] = rhs[[piv, col]]
        factors = m[col + 1:, col] / m[col, col]
        m[col + 1:, col:] -= np.outer(factors, m[col, col:])
        rhs[col + 1:] -= np.outer(factors, rhs[col])
    x = np.zeros_like(rhs)
    for row in range(n - 1, -1, -1):
        x[row] = (rhs[row] - m[row, row + 1:] @ x[row + 1:]) / m[row, row]
    return x[:, 0] if vector_rhs else x
