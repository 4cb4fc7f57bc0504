"""Tensor Hermite basis: index enumeration, stable evaluation, quadrature.

The 1-D Hermite functions are

    h_l(s) = (sqrt(pi) 2^l l!)^(-1/2) exp(-s^2/2) H_l(s)

and the d-dimensional basis is the tensor product h_k(x) = prod_j h_{k_j}(x_j).
Truncation keeps every multi-index with total degree |k| <= N, in graded
lexicographic order.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, pi, sqrt
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

MAX_NODES = 512
PI_QUARTER = pi ** -0.25


# ---------------------------------------------------------------------------
# multi-indices
# ---------------------------------------------------------------------------

def _compositions(total: int, d: int):
    """All d-tuples of non-negative ints summing to ``total``, lex descending."""
    if d == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, d - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def enumerate_indices(d: int, N: int) -> tuple[tuple[int, ...], ...]:
    """Multi-indices with |k| <= N in graded lexicographic order.

    Within each shell |k| = m the order is lexicographically descending, so
    ``(1, 0)`` precedes ``(0, 1)``. The list for N is a prefix of the list
    for N + 1.
    """
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    if int(N) != N or N < 0:
        raise ValueError(f"truncation degree must be a non-negative integer, got {N!r}")
    out = []
    for m in range(N + 1):
        out.extend(_compositions(m, d))
    return tuple(out)


def basis_size(d: int, N: int) -> int:
    return comb(N + d, d)


@lru_cache(maxsize=None)
def index_array(d: int, N: int) -> np.ndarray:
    """Indices as an (n_basis, d) integer array. Read-only."""
    arr = np.array(enumerate_indices(d, N), dtype=np.int64).reshape(-1, d)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def index_lookup(d: int, N: int) -> dict[tuple[int, ...], int]:
    return {k: i for i, k in enumerate(enumerate_indices(d, N))}


@lru_cache(maxsize=None)
def degrees(d: int, N: int) -> np.ndarray:
    """Total degree |k| for every basis index."""
    deg = index_array(d, N).sum(axis=1)
    deg.setflags(write=False)
    return deg


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def hermite_table(L: int, s) -> np.ndarray:
    """Values h_0(s), ..., h_L(s) via the normalized three-term recurrence.

    Returns an array of shape ``s.shape + (L + 1,)``.
    """
    s = np.asarray(s, dtype=float)
    out = np.empty(s.shape + (L + 1,))
    out[..., 0] = PI_QUARTER * np.exp(-0.5 * s * s)
    if L >= 1:
        out[..., 1] = sqrt(2.0) * s * out[..., 0]
    for ell in range(1, L):
        out[..., ell + 1] = (
            sqrt(2.0 / (ell + 1)) * s * out[..., ell]
            - sqrt(ell / (ell + 1)) * out[..., ell - 1]
        )
    return out


def hermite_eval_1d(ell: int, s):
    """h_ell(s); scalar in, scalar out, arrays broadcast."""
    if ell < 0:
        raise ValueError("degree must be non-negative")
    val = hermite_table(ell, s)[..., ell]
    return float(val) if np.ndim(val) == 0 else val


def hermite_eval_nd(k, x) -> float:
    k = tuple(int(v) for v in k)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (len(k),):
        raise ValueError(f"index has dimension {len(k)} but point has shape {x.shape}")
    return float(np.prod([hermite_eval_1d(kj, xj) for kj, xj in zip(k, x)]))


def basis_matrix(d: int, N: int, points) -> np.ndarray:
    """h_k(x) for every point (rows) and every basis index |k| <= N (columns).

    ``points`` has shape (n_points, d) or (d,) for a single point.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.shape[1] != d:
        raise ValueError(f"points have dimension {pts.shape[1]}, basis has {d}")
    idx = index_array(d, N)
    out = np.ones((pts.shape[0], idx.shape[0]))
    for j in range(d):
        tab = hermite_table(N, pts[:, j])
        out *= tab[:, idx[:, j]]
    return out


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadGrid:
    """Tensor Gauss-Hermite grid.

    ``weights`` integrate against e^{-y^2}; ``flat_weights`` = weights * e^{y^2}
    integrate plain functions and are what projection uses. Both are per axis;
    the d-dimensional rule is the tensor product.
    """

    nodes: np.ndarray
    weights: np.ndarray
    flat_weights: np.ndarray
    d: int = 1

    @property
    def Q(self) -> int:
        return self.nodes.size

    def points(self) -> np.ndarray:
        """All Q^d tensor nodes, shape (Q^d, d), last axis varying fastest."""
        mesh = np.meshgrid(*([self.nodes] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def point_flat_weights(self) -> np.ndarray:
        w = self.flat_weights
        for _ in range(self.d - 1):
            w = np.multiply.outer(w, self.flat_weights)
        return np.asarray(w).ravel()

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """Integral of ``f`` over R^d; ``f`` maps (n, d) points to n values."""
        return float(np.sum(self.point_flat_weights() * f(self.points())))


@lru_cache(maxsize=64)
def _gauss_hermite(Q: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Golub-Welsch: eigenvalues of the Jacobi matrix of the e^{-y^2} weight.
    off = np.sqrt(np.arange(1, Q) / 2.0)
    nodes = eigh_tridiagonal(np.zeros(Q), off, eigvals_only=True)
    # Newton polish on h_Q using h_Q' = sqrt(2Q) h_{Q-1} - s h_Q
    for _ in range(3):
        tab = hermite_table(Q, nodes)
        hq, hq1 = tab[:, Q], tab[:, Q - 1]
        deriv = sqrt(2.0 * Q) * hq1 - nodes * hq
        nodes = nodes - hq / deriv
    nodes = 0.5 * (nodes - nodes[::-1])  # enforce exact symmetry
    tab = hermite_table(Q - 1, nodes)
    flat = 1.0 / np.sum(tab * tab, axis=1)
    with np.errstate(under="ignore"):
        weights = flat * np.exp(-nodes * nodes)
    return nodes, weights, flat


def build_quad_grid(Q: int, d: int = 1) -> QuadGrid:
    """Gauss-Hermite rule with Q nodes per axis.

    Exact for f*g whenever f*g*e^{y^2} is a polynomial of degree <= 2Q - 1.
    Node computation is supported up to Q = 512.
    """
    if int(Q) != Q or Q < 1:
        raise ValueError(f"node count must be a positive integer, got {Q!r}")
    if Q > MAX_NODES:
        raise ValueError(f"node count {Q} exceeds the supported ceiling {MAX_NODES}")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    nodes, weights, flat = _gauss_hermite(int(Q))
    return QuadGrid(nodes=nodes.copy(), weights=weights.copy(), flat_weights=flat.copy(), d=d)


def default_nodes(N: int, shift: float = 0.0) -> int:
    """Node count for projecting at truncation N, widened to cover a shift.

    The largest Gauss-Hermite node grows like sqrt(2Q), the natural support
    of degree-N content like sqrt(2N + 1); the shifted content must fit.
    """
    Q = 2 * N + 16
    reach = sqrt(2 * N + 1) + abs(shift) + 6.0
    Q = max(Q, int(np.ceil(reach * reach / 2.0)))
    return min(Q, MAX_NODES)


def project_function(f: Callable[[np.ndarray], np.ndarray], d: int, N: int, Q: int | None = None):
    """Coefficients <f, h_k> for |k| <= N by tensor quadrature.

    ``f`` receives an (n, d) array of points and returns n (possibly complex)
    values.
    """
    from .sobolev import HermiteCoeffs

    Q = default_nodes(N) if Q is None else Q
    grid = build_quad_grid(Q, d)
    vals = np.asarray(f(grid.points()))
    if vals.shape != (Q ** d,):
        vals = vals.reshape(Q ** d)
    if not np.all(np.isfinite(vals)):
        raise ValueError("function returned non-finite values at quadrature nodes")
    coeffs = _project_values(vals * grid.point_flat_weights(), grid.nodes, d, N)
    return HermiteCoeffs(d, N, coeffs)


def _project_values(weighted: np.ndarray, nodes: np.ndarray, d: int, N: int) -> np.ndarray:
    """Contract weighted grid values against the separable basis tables."""
    Q = nodes.size
    tab = hermite_table(N, nodes)  # (Q, N+1)
    arr = weighted.reshape((Q,) * d)
    for _ in range(d):
        # contract the leading grid axis, append a degree axis at the end
        arr = np.tensordot(arr, tab, axes=([0], [0]))
    idx = index_array(d, N)
    return arr[tuple(idx.T)].astype(complex)


def synthesize(phi, x) -> complex | np.ndarray:
    """Partial sum sum_k c_k h_k(x) at one point (shape (d,)) or many (n, d)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    pts = x.reshape(1, -1) if single else x
    if phi.d == 1 and pts.shape[1] != 1:
        pts = pts.reshape(-1, 1)
        single = False
    vals = basis_matrix(phi.d, phi.N, pts) @ phi.coeffs
    return complex(vals[0]) if single else vals
