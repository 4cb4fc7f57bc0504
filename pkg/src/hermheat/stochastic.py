"""Brownian sampling and the probabilistic side of the heat equation.

The expectation of random translates E tau_{X_t} phi is estimated by Monte
Carlo and compared with the deterministic semigroup; the Ito decomposition of
tau_{X_t} phi is checked pathwise with left-endpoint sums.

Randomness is counter based: sample (or path) block ``b`` under master seed
``s`` is drawn from Philox with key ``s`` and counter ``[0, 0, 0, b]``. Blocks
have a fixed size, so results do not depend on how blocks are spread over
workers, and block partial sums are reduced in block order.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .hermite_basis import degrees
from .sobolev import (
    HermiteCoeffs,
    derivative_matrix,
    random_ensemble,
    sobolev_inner,
    sobolev_norm,
    apply_derivative,
    apply_laplacian,
)
from .translation_heat import SpectralTranslator, box_translate, padding, translate_many

BLOCK = 4096
_MASK64 = (1 << 64) - 1


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent stream for one block of samples under a master seed."""
    bitgen = np.random.Philox(key=int(seed) & _MASK64, counter=[0, 0, 0, int(block)])
    return np.random.Generator(bitgen)


def _blocks(M: int, block: int = BLOCK):
    return [(b, b * block, min(M, (b + 1) * block)) for b in range(math.ceil(M / block))]


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BrownianPath:
    times: np.ndarray
    positions: np.ndarray  # (n + 1, d), positions[0] == 0
    drift: np.ndarray | None = None

    def __post_init__(self):
        if self.positions.ndim != 2 or self.positions.shape[0] != self.times.size:
            raise ValueError("positions must have shape (len(times), d)")
        if np.any(np.diff(self.times) <= 0) or self.times[0] != 0.0:
            raise ValueError("times must start at 0 and increase strictly")
        if np.any(self.positions[0] != 0.0):
            raise ValueError("path must start at the origin")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.positions, axis=0)

    def subsample(self, factor: int) -> "BrownianPath":
        """Every ``factor``-th grid point of the same path."""
        return BrownianPath(self.times[::factor], self.positions[::factor], self.drift)


def sample_brownian(d: int, T: float, n: int, seed: int, drift=None, index: int = 0) -> BrownianPath:
    """Uniform-grid Brownian path (plus optional constant drift) on [0, T].

    ``index`` selects an independent path under the same master seed.
    """
    if T <= 0 or n < 1:
        raise ValueError("need T > 0 and n >= 1")
    h = T / n
    rng = block_rng(seed, index)
    inc = math.sqrt(h) * rng.standard_normal((n, d))
    b = None
    if drift is not None:
        b = np.atleast_1d(np.asarray(drift, dtype=float))
        if b.shape != (d,):
            raise ValueError(f"drift must have shape ({d},)")
        inc = inc + b * h
    pos = np.vstack([np.zeros((1, d)), np.cumsum(inc, axis=0)])
    return BrownianPath(np.linspace(0.0, T, n + 1), pos, b)


def realized_covariation(path: BrownianPath) -> np.ndarray:
    """Cumulative sum of dX^i dX^j; shape (n + 1, d, d), zero at t = 0."""
    dx = path.increments
    steps = dx[:, :, None] * dx[:, None, :]
    return np.concatenate([np.zeros((1, path.d, path.d)), np.cumsum(steps, axis=0)])


# ---------------------------------------------------------------------------
# Monte Carlo expectation of random translates
# ---------------------------------------------------------------------------

@dataclass
class MCEstimate:
    mean: HermiteCoeffs
    se: np.ndarray  # per-coefficient standard error (modulus)
    M: int
    seed: int
    t: float

    def aggregate_se(self, p: float = 0.0) -> float:
        """Norm-level error bar: sum_k (2|k|+d)^p se_k (triangle inequality)."""
        w = (2.0 * degrees(self.mean.d, self.mean.N) + self.mean.d) ** p
        return float(np.sum(w * self.se))

    def to_json(self) -> dict:
        return {
            "mean": self.mean.to_json(),
            "se": self.se.tolist(),
            "M": self.M,
            "seed": self.seed,
            "t": self.t,
        }


def _gaussian_block(seed: int, block: tuple, d: int, t: float) -> np.ndarray:
    b, lo, hi = block
    return math.sqrt(t) * block_rng(seed, b).standard_normal((hi - lo, d))


def mc_expectation(phi: HermiteCoeffs, t: float, M: int, seed: int, workers: int = 1,
                   block: int = BLOCK) -> MCEstimate:
    """Average of tau_{X_t} phi over M draws X_t ~ N(0, t I)."""
    if t < 0 or M < 1:
        raise ValueError("need t >= 0 and M >= 1")
    n = len(phi)
    if t == 0:
        return MCEstimate(phi.replace(phi.coeffs.copy()), np.zeros(n), M, seed, t)
    blocks = _blocks(M, block)
    draws = [_gaussian_block(seed, blk, phi.d, t) for blk in blocks]
    max_shift = max(float(np.max(np.linalg.norm(x, axis=1))) for x in draws)

    def partial(i):
        rows = translate_many(phi, draws[i], max_shift=max_shift)
        return rows.sum(axis=0), (rows.real ** 2).sum(axis=0), (rows.imag ** 2).sum(axis=0)

    parts = _map(partial, range(len(blocks)), workers)
    s1 = np.zeros(n, dtype=complex)
    s2r = np.zeros(n)
    s2i = np.zeros(n)
    for a, br, bi in parts:  # fixed block order
        s1 += a
        s2r += br
        s2i += bi
    mean = s1 / M
    if M > 1:
        var = (s2r - M * mean.real ** 2 + s2i - M * mean.imag ** 2) / (M - 1)
        se = np.sqrt(np.maximum(var, 0.0) / M)
    else:
        se = np.zeros(n)
    return MCEstimate(HermiteCoeffs(phi.d, phi.N, mean), se, M, seed, t)


# ---------------------------------------------------------------------------
# Ito formula along a path
# ---------------------------------------------------------------------------

def _translate_on(big: HermiteCoeffs, shifts: np.ndarray) -> np.ndarray:
    # bare truncated exponential on an already padded space
    tr = SpectralTranslator._cached(big.N, big.N)
    if big.d == 1:
        return tr.apply(big.coeffs, shifts[:, 0], full=True)
    return box_translate(big, shifts, tr, big.N)


@dataclass
class ItoResidualReport:
    h: float
    p: float
    times: list
    residual_norms: list  # ||R_t||_{p-1}
    terminal: float
    sign: int = -1
    covariation: str = "exact"

    def to_json(self) -> dict:
        return asdict(self)


def ito_terms(phi: HermiteCoeffs, path: BrownianPath, covariation: str = "exact",
              sign: int = -1, pad: int | None = None):
    """Pieces of the discretized Ito decomposition on a padded truncation.

    Returns (Y, stoch, drift, N_int) where Y[i] = tau_{-sign * X_{t_i}} phi and
    the cumulative left-endpoint sums are
    stoch[i] = sum_{s < t_i} sum_j d_j Y_s dX^j_s and
    drift[i] = 1/2 sum_{s < t_i} sum_{j,l} d_j d_l Y_s d<X^j, X^l>_s.
    The Ito formula reads Y_t = phi + sign * stoch_t + drift_t.
    """
    if phi.d != path.d:
        raise ValueError("distribution and path dimensions differ")
    if covariation not in ("exact", "realized"):
        raise ValueError("covariation must be 'exact' or 'realized'")
    d = phi.d
    max_shift = float(np.max(np.linalg.norm(path.positions, axis=1)))
    N_int = phi.N + (padding(phi.N, max_shift) if pad is None else pad)
    if phi.content_degree() + 2 > N_int:
        raise ValueError("truncation margin violated: need N >= content degree + 2")
    big = phi.truncate(N_int)
    Y = _translate_on(big, -sign * path.positions)
    D = [derivative_matrix(d, N_int, j + 1) for j in range(d)]
    dX = path.increments  # (n, d)
    Yl = Y[:-1]  # left endpoints
    dY = [(Dj @ Yl.T).T for Dj in D]  # d_j Y_s, each (n, size)
    stoch_steps = sum(dY[j] * dX[:, j : j + 1] for j in range(d))
    if covariation == "exact":
        dt = np.diff(path.times)[:, None]
        drift_steps = 0.5 * sum((D[j] @ dY[j].T).T for j in range(d)) * dt
    else:
        cov = np.diff(realized_covariation(path), axis=0)  # (n, d, d)
        drift_steps = 0
        for j in range(d):
            for l in range(d):
                drift_steps = drift_steps + 0.5 * (D[j] @ dY[l].T).T * cov[:, j, l : l + 1]
    zero = np.zeros((1, Y.shape[1]), dtype=complex)
    stoch = np.vstack([zero, np.cumsum(stoch_steps, axis=0)])
    drift = np.vstack([zero, np.cumsum(drift_steps, axis=0)])
    return Y, stoch, drift, N_int


def ito_residual(phi: HermiteCoeffs, path: BrownianPath, p: float = 0.0,
                 covariation: str | None = None, sign: int = -1) -> ItoResidualReport:
    """Residual R_t = Y_t - phi - sign*stoch_t - drift_t in ||.||_{p-1}.

    ``sign = -1`` checks the translate formula for tau_{X_t} phi. With
    ``sign = +1`` the candidate is tau_{-X_t} phi, which is the form of the
    SDE dY = 1/2 Lap Y dt + grad Y . dX. ``covariation`` defaults to the
    exact t I for driftless paths and the realized one otherwise.
    """
    if covariation is None:
        covariation = "exact" if path.drift is None else "realized"
    Y, stoch, drift, N_int = ito_terms(phi, path, covariation, sign)
    base = phi.truncate(N_int).coeffs
    R = Y - base - sign * stoch - drift
    R[0] = 0.0
    n = len(phi)
    w = (2.0 * degrees(phi.d, phi.N) + phi.d) ** (2.0 * (p - 1))
    norms = np.sqrt(np.sum(w * np.abs(R[:, :n]) ** 2, axis=1))
    h = float(path.times[1] - path.times[0])
    return ItoResidualReport(
        h=h,
        p=float(p),
        times=path.times.tolist(),
        residual_norms=norms.tolist(),
        terminal=float(norms[-1]),
        sign=sign,
        covariation=covariation,
    )


@dataclass
class ItoConvergenceReport:
    p: float
    T: float
    steps: list
    h: list
    terminal_rms: list
    order: float
    paths: int
    seed: int
    passed: bool = False
    order_range: tuple = (0.3, 0.7)

    def to_json(self) -> dict:
        return asdict(self)

    def table(self) -> list[dict]:
        rows = []
        for i, (h, r) in enumerate(zip(self.h, self.terminal_rms)):
            local = None if i == 0 else math.log2(self.terminal_rms[i - 1] / r)
            rows.append({"h": h, "terminal_rms": r, "order_estimate": local})
        return rows


def ito_convergence(phi: HermiteCoeffs, T: float = 1.0, coarse: int = 4, halvings: int = 8,
                    paths: int = 16, seed: int = 0, p: float = 0.0, drift=None,
                    sign: int = -1, workers: int = 1,
                    order_range: tuple = (0.3, 0.7)) -> ItoConvergenceReport:
    """Terminal residual under repeated step halving on the same paths.

    Each path is sampled once at h = T / 2^(coarse + halvings) and coarsened
    by subsampling. The root mean square over ``paths`` is fitted against h.
    """
    levels = [2 ** (coarse + i) for i in range(halvings + 1)]
    fine = levels[-1]
    d = phi.d

    def one(i):
        path = sample_brownian(d, T, fine, seed, drift=drift, index=i)
        return [ito_residual(phi, path.subsample(fine // n), p, sign=sign).terminal for n in levels]

    res = np.array(_map(one, range(paths), workers))  # (paths, levels)
    rms = np.sqrt(np.mean(res ** 2, axis=0))
    hs = np.array([T / n for n in levels])
    order = float(np.polyfit(np.log(hs), np.log(rms), 1)[0])
    lo, hi = order_range
    return ItoConvergenceReport(
        p=float(p), T=T, steps=levels, h=hs.tolist(), terminal_rms=rms.tolist(),
        order=order, paths=paths, seed=seed, passed=bool(lo <= order <= hi),
        order_range=tuple(order_range),
    )


# ---------------------------------------------------------------------------
# martingale term, SDE solution, monotonicity constant
# ---------------------------------------------------------------------------

@dataclass
class MartingaleReport:
    t: float
    M: int
    steps: int
    p: float
    mean_norm: float
    aggregate_se: float
    within: bool
    variance: float  # E ||I_t||_{p-1}^2
    isometry_estimate: float  # E sum ||d Y_s||^2_{p-1} h
    isometry_ratio: float
    seed: int

    def to_json(self) -> dict:
        return asdict(self)


def martingale_check(phi: HermiteCoeffs, t: float, M: int, seed: int, p: float = 0.0,
                     steps: int = 64, workers: int = 1) -> MartingaleReport:
    """Mean and second moment of the discretized stochastic integral.

    I_t = sum_{s<t} grad(tau_{X_s} phi) . dX_s should have mean zero, and its
    second moment in ||.||_{p-1} should match E sum_s ||grad tau_{X_s} phi||^2 h
    (discrete Ito isometry).
    """
    n = len(phi)
    d = phi.d
    w = (2.0 * degrees(d, phi.N) + d) ** (2.0 * (p - 1))
    h = t / steps
    blocks = _blocks(M, 256)

    def partial(blk):
        b, lo, hi = blk
        s1 = np.zeros(n, dtype=complex)
        s2 = np.zeros(n)
        sq = 0.0
        iso = 0.0
        for i in range(lo, hi):
            path = sample_brownian(d, t, steps, seed, index=i)
            Y, stoch, _, N_int = ito_terms(phi, path)
            I = stoch[-1, :n]
            s1 += I
            s2 += np.abs(I) ** 2
            sq += float(np.sum(w * np.abs(I) ** 2))
            Dg = [derivative_matrix(d, N_int, j + 1) for j in range(d)]
            for Dj in Dg:
                g = (Dj @ Y[:-1].T).T[:, :n]
                iso += float(np.sum(w * np.abs(g) ** 2)) * h
        return s1, s2, sq, iso

    parts = _map(partial, blocks, workers)
    s1 = sum(a for a, _, _, _ in parts)
    s2 = sum(b for _, b, _, _ in parts)
    sq = sum(c for _, _, c, _ in parts)
    iso = sum(e for _, _, _, e in parts)
    mean = s1 / M
    var = (s2 - M * np.abs(mean) ** 2) / max(M - 1, 1)
    se = np.sqrt(np.maximum(var, 0.0) / M)
    wp = np.sqrt(w)
    mean_norm = float(np.sqrt(np.sum(w * np.abs(mean) ** 2)))
    agg = float(np.sum(wp * se))
    variance = sq / M
    iso_est = iso / M
    return MartingaleReport(
        t=t, M=M, steps=steps, p=float(p), mean_norm=mean_norm, aggregate_se=agg,
        within=bool(mean_norm <= 3 * agg), variance=variance,
        isometry_estimate=iso_est,
        isometry_ratio=variance / iso_est if iso_est else float("nan"),
        seed=seed,
    )


@dataclass
class SDEReport:
    p: float
    T: float
    residual: dict
    energy: list  # [M, time-averaged E||tau_X phi||^2_{-p}] at M and 2M
    energy_relative_change: float
    stable: bool
    seed: int

    def to_json(self) -> dict:
        return asdict(self)


def time_averaged_energy(phi: HermiteCoeffs, p: float, T: float, M: int, seed: int,
                         times: int = 16, workers: int = 1) -> float:
    """Monte Carlo (1/T) integral_0^T E ||tau_{X_t} phi||_{-p}^2 dt (midpoint in t)."""
    ts = (np.arange(times) + 0.5) * T / times
    w = (2.0 * degrees(phi.d, phi.N) + phi.d) ** (-2.0 * p)
    total = 0.0
    for i, t in enumerate(ts):
        est_draws = []
        for b, lo, hi in _blocks(M):
            x = math.sqrt(t) * block_rng(seed + 7919 * (i + 1), b).standard_normal((hi - lo, phi.d))
            est_draws.append(x)
        max_shift = max(float(np.max(np.linalg.norm(x, axis=1))) for x in est_draws)
        parts = _map(lambda x: float(np.sum(np.abs(translate_many(phi, x, max_shift=max_shift)) ** 2 @ w)),
                     est_draws, workers)
        total += sum(parts) / M
    return total / times


def sde_solution_check(phi: HermiteCoeffs, p: float, T: float, M: int, seed: int,
                       workers: int = 1, tolerance: float = 0.05) -> SDEReport:
    """tau_{-X_t} phi against the SDE dY = 1/2 Lap Y dt + grad Y . dX, Y_0 = phi.

    ``p`` is the order of the dual space S'_p, so norms are ||.||_{-p}.
    (i) residual convergence of the discretized SDE; (ii) stability of the
    time-averaged second moment when M is doubled.
    """
    if T == 0:
        return SDEReport(p, T, {"terminal": 0.0}, [], 0.0, True, seed)
    conv = ito_convergence(phi, T=T, coarse=4, halvings=6, paths=8, seed=seed, p=-p, sign=+1,
                           workers=workers)
    e1 = time_averaged_energy(phi, p, T, M, seed, workers=workers)
    e2 = time_averaged_energy(phi, p, T, 2 * M, seed + 1, workers=workers)
    rel = abs(e2 - e1) / e2
    return SDEReport(
        p=float(p), T=T, residual=conv.to_json(), energy=[[M, e1], [2 * M, e2]],
        energy_relative_change=rel, stable=bool(rel <= tolerance and conv.passed), seed=seed,
    )


def monotonicity_ratio(phi: HermiteCoeffs, p: float) -> float:
    """(2 <1/2 Lap phi, phi>_{p-1} + sum_i ||d_i phi||^2_{p-1}) / ||phi||^2_{p-1}."""
    q = p - 1
    lap = apply_laplacian(phi)
    num = sobolev_inner(lap, phi, q).real
    num += sum(sobolev_norm(apply_derivative(phi, j), q) ** 2 for j in range(1, phi.d + 1))
    return num / sobolev_norm(phi, q) ** 2


@dataclass
class MonotonicityReport:
    p: float
    d: int
    N: int
    size: int
    seed: int
    constant: float
    ratios: list

    def to_json(self) -> dict:
        return asdict(self)


def monotonicity_scan(p: float, size: int = 50, d: int = 1, N: int = 32, seed: int = 0) -> MonotonicityReport:
    """Ensemble maximum of the monotonicity ratio for p < 0."""
    if p >= 0:
        raise ValueError("monotonicity scan needs p < 0")
    ratios = []
    for phi in random_ensemble(d, N, size, seed):
        while sobolev_norm(phi, p - 1) == 0.0:  # pragma: no cover - measure zero
            phi = random_ensemble(d, N, 1, seed + len(ratios) + 1)[0]
        ratios.append(float(monotonicity_ratio(phi, p)))
    return MonotonicityReport(p=float(p), d=d, N=N, size=size, seed=seed,
                              constant=max(ratios), ratios=ratios)
