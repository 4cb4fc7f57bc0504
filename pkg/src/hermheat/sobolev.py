"""Coefficient-space calculus on truncated Hermite expansions.

A distribution is held as its coefficients c_k = <phi, h_k> for |k| <= N.
Everything here is diagonal or banded in that basis:

* ``||phi||_p^2 = sum_k (2|k| + d)^{2p} |c_k|^2``
* ``H^z`` scales c_k by (2|k| + d)^z
* ``A_j h_k = sqrt(2 k_j) h_{k - e_j}``, ``A_j^+ h_k = sqrt(2 (k_j + 1)) h_{k + e_j}``
* ``x_j = (A_j + A_j^+) / 2`` and ``d/dx_j = (A_j - A_j^+) / 2``
* the unitary Fourier transform multiplies c_k by (-i)^{|k|}

With these weights [A_j, A_j^+] = 2 I. Raising past the truncation drops the
outflow and sets ``shell_touched`` on the result.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .hermite_basis import (
    basis_size,
    degrees,
    enumerate_indices,
    hermite_table,
    index_array,
    index_lookup,
)

REAL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class HermiteCoeffs:
    """Truncated Hermite coefficient vector of a (generalized) function on R^d."""

    d: int
    N: int
    coeffs: np.ndarray
    shell_touched: bool = False
    real_valued: bool = field(default=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).ravel()
        n = basis_size(self.d, self.N)
        if c.size != n:
            raise ValueError(f"expected {n} coefficients for d={self.d}, N={self.N}, got {c.size}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        if self.real_valued and np.max(np.abs(c.imag), initial=0.0) > REAL_TOL:
            raise ValueError("real_valued flag set but imaginary parts exceed 1e-12")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction -------------------------------------------------------
    @classmethod
    def zeros(cls, d: int, N: int) -> "HermiteCoeffs":
        return cls(d, N, np.zeros(basis_size(d, N)), real_valued=True)

    @classmethod
    def basis(cls, k, N: int) -> "HermiteCoeffs":
        k = tuple(int(v) for v in np.atleast_1d(k))
        d = len(k)
        c = np.zeros(basis_size(d, N))
        try:
            c[index_lookup(d, N)[k]] = 1.0
        except KeyError:
            raise ValueError(f"index {k} has degree above truncation {N}") from None
        return cls(d, N, c, real_valued=True)

    def replace(self, coeffs, shell_touched: bool | None = None) -> "HermiteCoeffs":
        touched = self.shell_touched if shell_touched is None else shell_touched
        return HermiteCoeffs(self.d, self.N, coeffs, shell_touched=touched)

    # arithmetic ---------------------------------------------------------
    def _check(self, other: "HermiteCoeffs"):
        if (self.d, self.N) != (other.d, other.N):
            raise ValueError(f"incompatible truncations ({self.d},{self.N}) vs ({other.d},{other.N})")

    def __add__(self, other):
        self._check(other)
        return HermiteCoeffs(self.d, self.N, self.coeffs + other.coeffs,
                             shell_touched=self.shell_touched or other.shell_touched)

    def __sub__(self, other):
        self._check(other)
        return HermiteCoeffs(self.d, self.N, self.coeffs - other.coeffs,
                             shell_touched=self.shell_touched or other.shell_touched)

    def __mul__(self, scalar):
        return self.replace(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.replace(-self.coeffs)

    def __len__(self):
        return self.coeffs.size

    def is_real(self, tol: float = REAL_TOL) -> bool:
        return bool(np.max(np.abs(self.coeffs.imag), initial=0.0) <= tol)

    def truncate(self, N: int) -> "HermiteCoeffs":
        """Restrict (N smaller) or zero-pad (N larger) to a new truncation."""
        n = basis_size(self.d, N)
        if N <= self.N:
            return HermiteCoeffs(self.d, N, self.coeffs[:n])
        c = np.zeros(n, dtype=complex)
        c[: self.coeffs.size] = self.coeffs
        return HermiteCoeffs(self.d, N, c)

    def content_degree(self, tol: float = 0.0) -> int:
        """Largest |k| carrying a coefficient above ``tol`` (-1 for zero)."""
        nz = np.nonzero(np.abs(self.coeffs) > tol)[0]
        return int(degrees(self.d, self.N)[nz].max()) if nz.size else -1

    # serialization --------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "d": self.d,
            "N": self.N,
            "ordering": "graded-lex",
            "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "HermiteCoeffs":
        if obj.get("ordering", "graded-lex") != "graded-lex":
            raise ValueError(f"unsupported ordering {obj['ordering']!r}")
        d, N = int(obj["d"]), int(obj["N"])
        raw = np.asarray(obj["coeffs"], dtype=float)
        if raw.ndim != 2 or raw.shape[1] != 2:
            raise ValueError("coeffs must be a list of [re, im] pairs")
        if raw.shape[0] != basis_size(d, N):
            raise ValueError(
                f"coefficient count {raw.shape[0]} does not match C(N+d, d) = {basis_size(d, N)}"
            )
        return cls(d, N, raw[:, 0] + 1j * raw[:, 1])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "HermiteCoeffs":
        return cls.from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# norms and diagonal operators
# ---------------------------------------------------------------------------

def eigenvalues(d: int, N: int) -> np.ndarray:
    """2|k| + d for every basis index."""
    return 2.0 * degrees(d, N) + d


def sobolev_weights(d: int, N: int, p: float) -> np.ndarray:
    return eigenvalues(d, N) ** p


def sobolev_norm(phi: HermiteCoeffs, p: float) -> float:
    w = sobolev_weights(phi.d, phi.N, 2.0 * p)
    return float(np.sqrt(np.sum(w * np.abs(phi.coeffs) ** 2)))


def sobolev_inner(phi: HermiteCoeffs, psi: HermiteCoeffs, p: float) -> complex:
    """<phi, psi>_p, linear in the first slot."""
    phi._check(psi)
    w = sobolev_weights(phi.d, phi.N, 2.0 * p)
    return complex(np.sum(w * phi.coeffs * np.conj(psi.coeffs)))


def apply_Hp(phi: HermiteCoeffs, p: float) -> HermiteCoeffs:
    return phi.replace(phi.coeffs * sobolev_weights(phi.d, phi.N, p))


def apply_complex_power(phi: HermiteCoeffs, z: complex) -> HermiteCoeffs:
    lam = eigenvalues(phi.d, phi.N)
    return phi.replace(phi.coeffs * np.exp(complex(z) * np.log(lam)))


def fourier(phi: HermiteCoeffs, direction: str = "forward") -> HermiteCoeffs:
    """Unitary Fourier transform: F h_k = (-i)^{|k|} h_k."""
    if direction not in ("forward", "inverse"):
        raise ValueError("direction must be 'forward' or 'inverse'")
    unit = -1j if direction == "forward" else 1j
    phase = np.array([1, unit, unit ** 2, unit ** 3])[degrees(phi.d, phi.N) % 4]
    return phi.replace(phi.coeffs * phase)


# ---------------------------------------------------------------------------
# ladder operators
# ---------------------------------------------------------------------------

def _check_axis(d: int, j: int) -> None:
    if not 1 <= j <= d:
        raise ValueError(f"axis must satisfy 1 <= j <= {d}, got {j}")


@lru_cache(maxsize=None)
def raise_matrix(d: int, N: int, j: int) -> sp.csr_matrix:
    """Truncated A_j^+ as a sparse matrix (1-based axis)."""
    _check_axis(d, j)
    lookup = index_lookup(d, N)
    rows, cols, vals = [], [], []
    for col, k in enumerate(enumerate_indices(d, N)):
        kp = k[: j - 1] + (k[j - 1] + 1,) + k[j:]
        row = lookup.get(kp)
        if row is not None:
            rows.append(row)
            cols.append(col)
            vals.append(np.sqrt(2.0 * (k[j - 1] + 1)))
    n = basis_size(d, N)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


@lru_cache(maxsize=None)
def lower_matrix(d: int, N: int, j: int) -> sp.csr_matrix:
    """Truncated A_j; exactly the transpose of the truncated A_j^+."""
    return raise_matrix(d, N, j).T.tocsr()


@lru_cache(maxsize=None)
def derivative_matrix(d: int, N: int, j: int) -> sp.csr_matrix:
    """Truncated d/dx_j = (A_j - A_j^+)/2; real skew-symmetric."""
    return (0.5 * (lower_matrix(d, N, j) - raise_matrix(d, N, j))).tocsr()


@lru_cache(maxsize=None)
def position_matrix(d: int, N: int, j: int) -> sp.csr_matrix:
    return (0.5 * (lower_matrix(d, N, j) + raise_matrix(d, N, j))).tocsr()


@lru_cache(maxsize=None)
def laplacian_matrix(d: int, N: int) -> sp.csr_matrix:
    out = sp.csr_matrix((basis_size(d, N),) * 2)
    for j in range(1, d + 1):
        D = derivative_matrix(d, N, j)
        out = out + D @ D
    return out.tocsr()


@lru_cache(maxsize=None)
def _top_shell(d: int, N: int) -> np.ndarray:
    return degrees(d, N) == N


def _raising_apply(phi: HermiteCoeffs, M: sp.spmatrix) -> HermiteCoeffs:
    # any weight on |k| = N would have been pushed out of the truncation
    touched = phi.shell_touched or bool(np.any(phi.coeffs[_top_shell(phi.d, phi.N)] != 0))
    return phi.replace(M @ phi.coeffs, shell_touched=touched)


def apply_raise(phi: HermiteCoeffs, j: int) -> HermiteCoeffs:
    return _raising_apply(phi, raise_matrix(phi.d, phi.N, j))


def apply_lower(phi: HermiteCoeffs, j: int) -> HermiteCoeffs:
    return phi.replace(lower_matrix(phi.d, phi.N, j) @ phi.coeffs)


def apply_derivative(phi: HermiteCoeffs, j: int) -> HermiteCoeffs:
    return _raising_apply(phi, derivative_matrix(phi.d, phi.N, j))


def apply_position(phi: HermiteCoeffs, j: int) -> HermiteCoeffs:
    return _raising_apply(phi, position_matrix(phi.d, phi.N, j))


def apply_laplacian(phi: HermiteCoeffs) -> HermiteCoeffs:
    result = HermiteCoeffs.zeros(phi.d, phi.N)
    for j in range(1, phi.d + 1):
        result = result + apply_derivative(apply_derivative(phi, j), j)
    return result


# ---------------------------------------------------------------------------
# distributions
# ---------------------------------------------------------------------------

def delta_coeffs(x, d: int, N: int) -> HermiteCoeffs:
    """Dirac mass at x: c_k = h_k(x)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (d,):
        raise ValueError(f"point must have shape ({d},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("point must be finite")
    idx = index_array(d, N)
    c = np.ones(idx.shape[0])
    for j in range(d):
        c *= hermite_table(N, x[j])[idx[:, j]]
    return HermiteCoeffs(d, N, c, real_valued=True)


def gaussian_coeffs(mean, var: float, d: int, N: int, Q: int | None = None) -> HermiteCoeffs:
    """Projection of the normal density N(mean, var I) onto the basis."""
    from .hermite_basis import project_function

    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    if mean.shape != (d,):
        raise ValueError(f"mean must have shape ({d},)")
    if var <= 0:
        raise ValueError("variance must be positive")

    def density(y):
        r2 = np.sum((y - mean) ** 2, axis=1)
        return np.exp(-r2 / (2 * var)) / (2 * np.pi * var) ** (d / 2)

    return project_function(density, d, N, Q)


def random_coeffs(d: int, N: int, rng: np.random.Generator, content: int | None = None) -> HermiteCoeffs:
    """I.i.d. standard normal coefficients on |k| <= content (default N // 2).

    Draws are consumed in graded order, so a fresh generator with the same
    state yields the same low-order coefficients for every N.
    """
    content = N // 2 if content is None else content
    c = np.zeros(basis_size(d, N))
    n = basis_size(d, content)
    c[:n] = rng.standard_normal(n)
    return HermiteCoeffs(d, N, c, real_valued=True)


def random_ensemble(d: int, N: int, size: int, seed: int, content: int | None = None) -> list[HermiteCoeffs]:
    """``size`` independent draws, member i from its own child stream of ``seed``."""
    children = np.random.SeedSequence(seed).spawn(size)
    return [random_coeffs(d, N, np.random.default_rng(s), content) for s in children]


# ---------------------------------------------------------------------------
# norm equivalence with monomial-derivative operators
# ---------------------------------------------------------------------------

@dataclass
class NormEquivalenceReport:
    m: int
    sobolev: float
    operator_sum: float
    terms: dict
    lower_ratio: float  # ||phi||_m / sum
    upper_ratio: float  # sum / ||phi||_m


def _multi_indices_upto(d: int, total: int):
    for k in product(range(total + 1), repeat=d):
        if sum(k) <= total:
            yield k


def norm_equivalence_check(phi: HermiteCoeffs, m: int) -> NormEquivalenceReport:
    """||phi||_m against sum_{|a|+|b| <= 2m} ||x^a d^b phi||_0."""
    if m < 0 or int(m) != m:
        raise ValueError("m must be a non-negative integer")
    if phi.content_degree() + 2 * m > phi.N:
        raise ValueError(
            f"truncation margin violated: content degree {phi.content_degree()} + 2m > N = {phi.N}"
        )
    d = phi.d
    terms = {}
    for alpha in _multi_indices_upto(d, 2 * m):
        for beta in _multi_indices_upto(d, 2 * m - sum(alpha)):
            v = phi
            for j in range(1, d + 1):
                for _ in range(beta[j - 1]):
                    v = apply_derivative(v, j)
            for j in range(1, d + 1):
                for _ in range(alpha[j - 1]):
                    v = apply_position(v, j)
            terms[(alpha, beta)] = sobolev_norm(v, 0)
    total = float(sum(terms.values()))
    norm_m = sobolev_norm(phi, m)
    return NormEquivalenceReport(
        m=m,
        sobolev=norm_m,
        operator_sum=total,
        terms=terms,
        lower_ratio=norm_m / total if total else float("nan"),
        upper_ratio=total / norm_m if norm_m else float("nan"),
    )
