"""Translations, the heat semigroup, and the scans built on them.

Translation by x is exp(-x . grad). On a truncation the generator is real
skew-symmetric, so the truncated translation matrix is orthogonal. That
matrix is only a good model of the true translation while the shifted
content stays away from the truncation shell, so ``translate_expm`` runs the
exponential on a padded truncation and restricts the result back.

The heat semigroup T_t (convolution with the Gaussian density p_t) is the
Fourier conjugate of multiplication by exp(-t|x|^2 / 2). Both that multiplier
and the direct convolution factor across axes, so they are applied as 1-D
matrices along each axis of the coefficient box.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .hermite_basis import (
    basis_size,
    degrees,
    build_quad_grid,
    default_nodes,
    hermite_table,
    index_array,
)
from .sobolev import (
    HermiteCoeffs,
    derivative_matrix,
    fourier,
    sobolev_norm,
)

ENVELOPE_C = 0.5
SCAN_DIRECTIONS = 16


class EnvelopeWarning(UserWarning):
    """A shift left the documented accuracy envelope."""


def envelope_radius(N: int) -> float:
    return ENVELOPE_C * math.sqrt(2 * N)


def padding(N: int, shift: float) -> int:
    """Extra degrees needed so that a shift of size ``shift`` stays resolved."""
    shift = abs(float(shift))
    if shift == 0.0:
        return 0
    return 16 + math.ceil(shift * (4.0 + 0.5 * math.sqrt(2 * N)))


# ---------------------------------------------------------------------------
# translation by matrix exponential
# ---------------------------------------------------------------------------

def generator_matrix(d: int, N: int, x) -> np.ndarray:
    """Dense -sum_j x_j d/dx_j on the truncation |k| <= N."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    G = np.zeros((basis_size(d, N),) * 2)
    for j in range(d):
        if x[j] != 0.0:
            G -= x[j] * derivative_matrix(d, N, j + 1).toarray()
    return G


def translation_matrix(d: int, N: int, x) -> np.ndarray:
    """exp of the truncated generator (scaling and squaring); orthogonal."""
    return sla.expm(generator_matrix(d, N, x))


def _check_shift(phi: HermiteCoeffs, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (phi.d,):
        raise ValueError(f"shift has shape {x.shape}, expected ({phi.d},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("shift must be finite")
    return x


def translate_expm(phi: HermiteCoeffs, x, pad: int | None = None) -> HermiteCoeffs:
    """tau_x phi on coefficients.

    ``pad`` extra degrees are carried internally (default from ``padding``);
    ``pad=0`` gives the bare truncated operator, which preserves ||.||_0
    exactly. Shifts beyond ``envelope_radius(N)`` emit an ``EnvelopeWarning``
    carrying an a-posteriori error estimate.
    """
    x = _check_shift(phi, x)
    r = float(np.linalg.norm(x))
    if r == 0.0:
        return phi.replace(phi.coeffs.copy())
    pad = padding(phi.N, r) if pad is None else pad
    big = phi.truncate(phi.N + pad)
    out = translation_matrix(phi.d, big.N, x) @ big.coeffs
    result = HermiteCoeffs(phi.d, phi.N, out[: len(phi)])
    if r > envelope_radius(phi.N):
        est = translation_error_estimate(phi, x, pad)
        warnings.warn(
            f"|x| = {r:.3g} exceeds the accuracy envelope {envelope_radius(phi.N):.3g} "
            f"for N = {phi.N}; estimated coefficient error {est:.2e}",
            EnvelopeWarning,
            stacklevel=2,
        )
    return result


def translation_error_estimate(phi: HermiteCoeffs, x, pad: int | None = None) -> float:
    """||.||_0 change of the result when the padding is increased by 16.

    The round trip tau_{-x} tau_x is an exact identity for the truncated
    operator, so it carries no information; refinement of the padding does.
    """
    x = _check_shift(phi, x)
    pad = padding(phi.N, float(np.linalg.norm(x))) if pad is None else pad
    n = len(phi)
    a = translation_matrix(phi.d, phi.N + pad, x) @ phi.truncate(phi.N + pad).coeffs
    b = translation_matrix(phi.d, phi.N + pad + 16, x) @ phi.truncate(phi.N + pad + 16).coeffs
    return float(np.linalg.norm(a[:n] - b[:n]))


@dataclass(frozen=True)
class SpectralTranslator:
    """Batched 1-D translations through one eigendecomposition.

    The truncated derivative D is real skew, so iD is Hermitian and
    exp(-x D) = V diag(exp(i x w)) V^H. Results match ``translation_matrix``
    to rounding and are used where thousands of shifts are needed.
    """

    N: int
    N_int: int
    w: np.ndarray
    V: np.ndarray

    @classmethod
    def build(cls, N: int, max_shift: float) -> "SpectralTranslator":
        N_int = N + padding(N, max_shift)
        return cls._cached(N, N_int)

    @classmethod
    @lru_cache(maxsize=32)
    def _cached(cls, N: int, N_int: int) -> "SpectralTranslator":
        D = derivative_matrix(1, N_int, 1).toarray()
        w, V = np.linalg.eigh(1j * D)
        return cls(N, N_int, w, V)

    def apply(self, coeffs: np.ndarray, shifts: np.ndarray, full: bool = False) -> np.ndarray:
        """Rows are tau_{shifts[m]} applied to ``coeffs`` (length N+1 or N_int+1)."""
        c = np.zeros(self.N_int + 1, dtype=complex)
        c[: coeffs.size] = coeffs
        modal = self.V.conj().T @ c
        shifts = np.asarray(shifts, dtype=float).reshape(-1)
        phase = np.exp(1j * np.outer(shifts, self.w))
        Vt = self.V.T if full else self.V[: self.N + 1].T
        out = (phase * modal) @ Vt
        out[shifts == 0.0] = c[: Vt.shape[1]]  # tau_0 is the identity, exactly
        return out


def translate_many(phi: HermiteCoeffs, shifts, full: bool = False, max_shift: float | None = None):
    """tau_x phi for a batch of shifts; returns (M, n) coefficients.

    With ``full`` the rows live on the padded truncation (see ``padded_size``).
    """
    shifts = np.asarray(shifts, dtype=float).reshape(-1, phi.d)
    if max_shift is None:
        max_shift = float(np.max(np.linalg.norm(shifts, axis=1), initial=0.0))
    if phi.d == 1:
        tr = SpectralTranslator.build(phi.N, max_shift)
        return tr.apply(phi.coeffs, shifts[:, 0], full=full)
    tr = SpectralTranslator.build(phi.N, max_shift)
    return box_translate(phi, shifts, tr, tr.N_int if full else phi.N)


def box_translate(phi: HermiteCoeffs, shifts, tr: SpectralTranslator, keep_N: int,
                  chunk_elems: int = 2_000_000) -> np.ndarray:
    """Multi-dimensional translates via per-axis 1-D operators.

    Translation factors over axes. The coefficients are embedded in the
    (N_int+1)^d box and moved to the modal basis of the 1-D generator on every
    axis, where each tau_{x_j} is a phase. The result is mapped back and
    restricted to |k| <= ``keep_N``.
    """
    d = phi.d
    shifts = np.asarray(shifts, dtype=float).reshape(-1, d)
    n = tr.N_int + 1
    keep = tuple(index_array(d, keep_N).T)
    box = np.zeros((n,) * d, dtype=complex)
    box[tuple(index_array(d, phi.N).T)] = phi.coeffs
    Vh = tr.V.conj().T
    for axis in range(d):
        box = np.moveaxis(np.tensordot(Vh, box, axes=([1], [axis])), 0, axis)
    Vk = tr.V[: keep_N + 1]
    out = np.empty((shifts.shape[0], len(keep[0])), dtype=complex)
    step = max(1, chunk_elems // n ** d)
    for lo in range(0, shifts.shape[0], step):
        x = shifts[lo : lo + step]
        arr = np.broadcast_to(box, (x.shape[0],) + box.shape).copy()
        for axis in range(d):
            shape = [x.shape[0]] + [1] * d
            shape[axis + 1] = n
            arr *= np.exp(1j * np.outer(x[:, axis], tr.w)).reshape(shape)
        for axis in range(d):
            arr = np.moveaxis(np.tensordot(Vk, arr, axes=([1], [axis + 1])), 0, axis + 1)
        out[lo : lo + x.shape[0]] = arr[(slice(None),) + keep]
    zero = ~np.any(shifts, axis=1)
    if zero.any():  # tau_0 is the identity, exactly
        exact = np.zeros((n,) * d, dtype=complex)
        exact[tuple(index_array(d, phi.N).T)] = phi.coeffs
        out[zero] = exact[keep]
    return out


def padded_size(N: int, max_shift: float) -> int:
    return N + padding(N, max_shift)


# ---------------------------------------------------------------------------
# separable operators on the coefficient box
# ---------------------------------------------------------------------------

def apply_separable(phi: HermiteCoeffs, mats) -> HermiteCoeffs:
    """Apply the tensor product of per-axis (N+1)x(N+1) matrices.

    The coefficients are embedded in the (N+1)^d box, each axis is
    multiplied, and the result is restricted to |k| <= N, which equals the
    Galerkin restriction of the tensor-product operator.
    """
    d, N = phi.d, phi.N
    if not isinstance(mats, (list, tuple)):
        mats = [mats] * d
    idx = tuple(index_array(d, N).T)
    box = np.zeros((N + 1,) * d, dtype=complex)
    box[idx] = phi.coeffs
    for axis, M in enumerate(mats):
        box = np.moveaxis(np.tensordot(M, box, axes=([1], [axis])), 0, axis)
    return phi.replace(box[idx])


def _flat_grid(N: int, Q: int | None, spread: float = 0.0):
    Q = default_nodes(N, spread) if Q is None else Q
    g = build_quad_grid(Q)
    return g.nodes, g.flat_weights


def translation_quadrature_matrix(N: int, shift: float, Q: int | None = None) -> np.ndarray:
    """[j, k] = integral h_j(y) h_k(y - shift) dy by quadrature."""
    nodes, w = _flat_grid(N, Q, shift)
    coverage = math.sqrt(2 * N + 1) + abs(shift)
    if nodes[-1] < coverage:
        raise ValueError(
            f"quadrature grid reaches {nodes[-1]:.2f} but shifted content needs {coverage:.2f}; raise Q"
        )
    tab = hermite_table(N, nodes)
    tab_s = hermite_table(N, nodes - shift)
    return (tab * w[:, None]).T @ tab_s


def translate_quadrature(phi: HermiteCoeffs, x, Q: int | None = None) -> HermiteCoeffs:
    """tau_x phi by projecting the shifted partial sum; independent of expm."""
    x = _check_shift(phi, x)
    mats = [translation_quadrature_matrix(phi.N, xj, Q) for xj in x]
    return apply_separable(phi, mats)


# ---------------------------------------------------------------------------
# heat semigroup
# ---------------------------------------------------------------------------

def heat_kernel(x, t: float, d: int | None = None):
    """Gaussian density p_t at x; ``x`` is a point (d,) or points (n, d)."""
    if t <= 0:
        raise ValueError("heat kernel needs t > 0")
    x = np.asarray(x, dtype=float)
    if d is None:
        d = 1 if x.ndim == 0 else x.shape[-1]
    x = x.reshape(-1, d)
    r2 = np.sum(x * x, axis=1)
    vals = np.exp(-r2 / (2 * t)) / (2 * math.pi * t) ** (d / 2)
    return float(vals[0]) if vals.size == 1 else vals


def multiplier_matrix(N: int, t: float, Q: int | None = None, minus_one: bool = False) -> np.ndarray:
    """1-D Galerkin matrix of multiplication by exp(-t y^2 / 2) (minus 1)."""
    nodes, w = _flat_grid(N, Q)
    g = np.exp(-0.5 * t * nodes ** 2)
    tab = hermite_table(N, nodes)
    M = (tab * (w * g)[:, None]).T @ tab
    if minus_one:
        M = M - (tab * w[:, None]).T @ tab
    return M


def heat_apply(phi: HermiteCoeffs, t: float, Q: int | None = None) -> HermiteCoeffs:
    """T_t phi = F^{-1} M_{g_t} F phi with g_t(x) = exp(-t|x|^2/2)."""
    if t < 0:
        raise ValueError("time must be non-negative")
    if t == 0:
        return phi.replace(phi.coeffs.copy())
    psi = apply_separable(fourier(phi, "forward"), multiplier_matrix(phi.N, t, Q))
    return fourier(psi, "inverse")


def st_operator(phi: HermiteCoeffs, t: float, Q: int | None = None) -> HermiteCoeffs:
    """Multiplication by exp(-t|x|^2/2) - 1, so that T_t - I = F^{-1} S_t F."""
    if t < 0:
        raise ValueError("time must be non-negative")
    if t == 0:
        return HermiteCoeffs.zeros(phi.d, phi.N)
    if phi.d == 1:
        return apply_separable(phi, multiplier_matrix(phi.N, t, Q, minus_one=True))
    return apply_separable(phi, multiplier_matrix(phi.N, t, Q)) - phi


def convolution_matrix(N: int, t: float, Q: int | None = None) -> np.ndarray:
    """[j, k] = integral h_j(y) (h_k * p_t)(y) dy by nested quadrature.

    The inner integral over the Gaussian uses its own Gauss-Hermite rule in
    the variable z = sqrt(2t) u.
    """
    nodes, w = _flat_grid(N, Q, spread=3.0 * math.sqrt(t))
    coverage = math.sqrt(2 * N + 1) * math.sqrt(1 + t)
    if nodes[-1] < coverage:
        raise ValueError(f"quadrature grid reaches {nodes[-1]:.2f}, needs {coverage:.2f}; raise Q")
    inner = build_quad_grid(max(N + 16, 32))
    z = math.sqrt(2 * t) * inner.nodes
    wz = inner.weights / math.sqrt(math.pi)
    # (h_k * p_t)(y) = sum_u wz_u h_k(y - z_u)
    shifted = hermite_table(N, nodes[:, None] - z[None, :])  # (Qy, Qu, N+1)
    conv = np.einsum("u,yuk->yk", wz, shifted)
    tab = hermite_table(N, nodes)
    return (tab * w[:, None]).T @ conv


def convolution_reference(phi: HermiteCoeffs, t: float, Q: int | None = None) -> HermiteCoeffs:
    """phi * p_t by direct double quadrature, re-projected onto the basis."""
    if t <= 0:
        raise ValueError("convolution reference needs t > 0")
    return apply_separable(phi, convolution_matrix(phi.N, t, Q))


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

def theoretical_degree(p: float) -> int:
    """Degree 2([|p|] + 1) of the polynomial bounding ||tau_x||_p."""
    return 2 * (int(math.floor(abs(p))) + 1)


def _loglog_slope(xs, ys) -> float:
    xs, ys = np.log(np.asarray(xs)), np.log(np.asarray(ys))
    return float(np.polyfit(xs, ys, 1)[0])


def scan_directions(d: int, seed: int = 0, count: int = SCAN_DIRECTIONS) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    v = np.random.default_rng(seed).standard_normal((count, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass
class TranslationReport:
    p: float
    radii: list
    ratios: list
    slope: float
    degree: int
    slack: float = 0.5
    passed: bool = False
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def norm_bound_scan(
    phi: HermiteCoeffs,
    p: float,
    radii=None,
    directions=None,
    seed: int = 0,
    slack: float = 0.5,
) -> TranslationReport:
    """Growth exponent of sup_dir ||tau_x phi||_p / ||phi||_p in |x|.

    The exponent is a least-squares slope in log-log coordinates over the top
    decade of radii and must not exceed 2([|p|] + 1) + ``slack``.
    """
    base = sobolev_norm(phi, p)
    if base == 0.0:
        raise ValueError("cannot scan a zero-norm distribution")
    if radii is None:
        rmax = envelope_radius(phi.N)
        radii = np.geomspace(rmax / 10, rmax, 16)
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("radii must be positive and strictly increasing")
    if radii[-1] > envelope_radius(phi.N) * (1 + 1e-12):
        raise ValueError(f"radii exceed the accuracy envelope {envelope_radius(phi.N):.3g}")
    dirs = scan_directions(phi.d, seed) if directions is None else np.asarray(directions, float)
    ratios = []
    for r in radii:
        shifts = r * dirs
        rows = translate_many(phi, shifts)
        best = max(sobolev_norm(phi.replace(row), p) for row in rows)
        ratios.append(best / base)
    top = radii >= radii[-1] / 10
    slope = _loglog_slope(radii[top], np.asarray(ratios)[top])
    k = theoretical_degree(p)
    return TranslationReport(
        p=float(p),
        radii=radii.tolist(),
        ratios=[float(v) for v in ratios],
        slope=slope,
        degree=k,
        slack=slack,
        passed=bool(slope <= k + slack),
        config={"d": phi.d, "N": phi.N, "seed": seed, "directions": int(len(dirs))},
    )


def continuity_times() -> np.ndarray:
    """Logarithmic grid over [1e-3, 1e-1], 12 points per decade."""
    return np.logspace(-3, -1, 25)


@dataclass
class ContinuityReport:
    p: float
    times: list
    distances: list
    slope: float
    tolerance: float = 0.1
    passed: bool = False
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def strong_continuity_scan(phi: HermiteCoeffs, p: float, times=None, Q: int | None = None,
                           tolerance: float = 0.1) -> ContinuityReport:
    """Fit the decay rate of ||T_t phi - phi||_p as t -> 0 (expected ~ t)."""
    times = continuity_times() if times is None else np.asarray(times, dtype=float)
    dist = [sobolev_norm(heat_apply(phi, t, Q) - phi, p) for t in times]
    slope = _loglog_slope(times, dist)
    return ContinuityReport(
        p=float(p),
        times=times.tolist(),
        distances=[float(v) for v in dist],
        slope=slope,
        tolerance=tolerance,
        passed=bool(abs(slope - 1.0) <= tolerance),
        config={"d": phi.d, "N": phi.N, "Q": Q},
    )


def heat_norm_bound(phi: HermiteCoeffs, p: float, T: float, steps: int = 20) -> float:
    """sup over t in (0, T] of ||T_t phi||_p / ||phi||_p on a uniform grid."""
    base = sobolev_norm(phi, p)
    return max(sobolev_norm(heat_apply(phi, t), p) / base for t in np.linspace(T / steps, T, steps))


# ---------------------------------------------------------------------------
# integrated heat equation
# ---------------------------------------------------------------------------

@dataclass
class HeatResidualReport:
    T: float
    p: float
    method: str
    points: list
    terminal: list
    orders: list
    passed: bool = False
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def heat_residual(phi: HermiteCoeffs, T: float, n: int, p: float = 0.0,
                  method: str = "spectral", Q: int | None = None) -> np.ndarray:
    """||phi_t - phi - int_0^t 1/2 Lap phi_s ds||_{p-1} on a uniform n-step grid.

    The time integral is the cumulative trapezoid rule; returns n + 1 values.
    """
    from .sobolev import laplacian_matrix

    if n < 1:
        raise ValueError("need at least one time step")
    times = np.linspace(0.0, T, n + 1)
    solve = heat_apply if method == "spectral" else convolution_reference
    if method not in ("spectral", "conv-reference"):
        raise ValueError(f"unknown method {method!r}")
    if phi.content_degree() + 2 > phi.N:
        raise ValueError("truncation margin violated for the Laplacian")
    L = laplacian_matrix(phi.d, phi.N)
    states = np.array([phi.coeffs if t == 0 else solve(phi, t, Q).coeffs for t in times])
    rhs = 0.5 * (L @ states.T).T
    h = T / n
    integral = np.vstack([np.zeros((1, len(phi))), np.cumsum(0.5 * h * (rhs[1:] + rhs[:-1]), axis=0)])
    R = states - phi.coeffs - integral
    w = (2.0 * degrees(phi.d, phi.N) + phi.d) ** (2.0 * (p - 1))
    return np.sqrt(np.sum(w * np.abs(R) ** 2, axis=1))


def heat_residual_study(phi: HermiteCoeffs, T: float, points: int = 64, levels: int = 4,
                        p: float = 0.0, method: str = "spectral", Q: int | None = None,
                        order_tol: float = 0.2) -> HeatResidualReport:
    """Terminal residual under t-grid doubling; trapezoid order should be 2."""
    if points < 64:
        raise ValueError("the time grid needs at least 64 points")
    grids = [points * 2 ** i for i in range(levels)]
    term = [float(heat_residual(phi, T, n, p, method, Q)[-1]) for n in grids]
    orders = [math.log2(a / b) for a, b in zip(term[:-1], term[1:])]
    return HeatResidualReport(
        T=T, p=float(p), method=method, points=grids, terminal=term, orders=orders,
        passed=bool(all(abs(o - 2.0) <= order_tol for o in orders)),
        config={"d": phi.d, "N": phi.N, "Q": Q},
    )
