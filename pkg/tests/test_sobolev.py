import json
from math import comb, factorial, pi, sqrt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hermheat.hermite_basis import build_quad_grid, enumerate_indices, hermite_eval_1d, synthesize
from hermheat.sobolev import (
    HermiteCoeffs,
    apply_complex_power,
    apply_derivative,
    apply_Hp,
    apply_lower,
    apply_position,
    apply_raise,
    delta_coeffs,
    derivative_matrix,
    fourier,
    gaussian_coeffs,
    lower_matrix,
    norm_equivalence_check,
    random_ensemble,
    raise_matrix,
    sobolev_inner,
    sobolev_norm,
)


def norm_from_definition(phi, p):
    """sqrt(sum (2|k| + d)^{2p} |c_k|^2), looping over indices."""
    total = 0.0
    for k, c in zip(enumerate_indices(phi.d, phi.N), phi.coeffs):
        total += (2 * sum(k) + phi.d) ** (2 * p) * abs(c) ** 2
    return sqrt(total)


def random_phi(d, N, seed, content=None, complex_=True):
    rng = np.random.default_rng(seed)
    n = comb(N + d, d)
    content = N // 2 if content is None else content
    m = comb(content + d, d)
    c = np.zeros(n, dtype=complex)
    c[:m] = rng.standard_normal(m) + (1j * rng.standard_normal(m) if complex_ else 0)
    return HermiteCoeffs(d, N, c)


# -- the coefficient container ------------------------------------------------

def test_container_validation():
    with pytest.raises(ValueError):
        HermiteCoeffs(1, 3, np.zeros(3))
    with pytest.raises(ValueError):
        HermiteCoeffs(1, 1, [np.nan, 0])
    with pytest.raises(ValueError):
        HermiteCoeffs(1, 1, [1j, 0], real_valued=True)
    phi = HermiteCoeffs(1, 1, [1, 2], real_valued=True)
    with pytest.raises(ValueError):
        phi.coeffs[0] = 5  # value semantics: read-only storage


def test_json_round_trip(tmp_path):
    phi = random_phi(2, 5, 1)
    obj = phi.to_json()
    assert obj["ordering"] == "graded-lex"
    back = HermiteCoeffs.from_json(json.loads(json.dumps(obj)))
    np.testing.assert_array_equal(back.coeffs, phi.coeffs)
    phi.save(tmp_path / "c.json")
    np.testing.assert_array_equal(HermiteCoeffs.load(tmp_path / "c.json").coeffs, phi.coeffs)


def test_json_rejects_length_mismatch():
    obj = HermiteCoeffs.zeros(2, 3).to_json()
    obj["coeffs"] = obj["coeffs"][:-1]
    with pytest.raises(ValueError, match="C\\(N\\+d, d\\)"):
        HermiteCoeffs.from_json(obj)
    obj = HermiteCoeffs.zeros(1, 3).to_json()
    obj["ordering"] = "box"
    with pytest.raises(ValueError):
        HermiteCoeffs.from_json(obj)


# -- norms ----------------------------------------------------------------------

@pytest.mark.parametrize("k", [(0,), (4,), (2, 3), (1, 0, 2)])
@pytest.mark.parametrize("p", [-2.0, -0.5, 0.0, 1.0, 2.5])
def test_norm_of_basis_vector(k, p):
    phi = HermiteCoeffs.basis(k, 6)
    assert sobolev_norm(phi, p) == pytest.approx((2 * sum(k) + len(k)) ** p, rel=1e-14)


def test_norm_zero_and_p0():
    assert sobolev_norm(HermiteCoeffs.zeros(2, 4), 1.3) == 0.0
    phi = random_phi(2, 8, 3)
    assert sobolev_norm(phi, 0) == pytest.approx(np.linalg.norm(phi.coeffs), rel=1e-15)


@given(st.floats(-3, 3), st.integers(0, 1000))
def test_norm_matches_definition_and_monotone_in_N(p, seed):
    phi = random_phi(1, 12, seed, content=12)
    assert sobolev_norm(phi, p) == pytest.approx(norm_from_definition(phi, p), rel=1e-12)
    prev = 0.0
    for N in range(13):
        cur = sobolev_norm(phi.truncate(N), p)
        assert cur >= prev
        prev = cur


# -- diagonal calculus ------------------------------------------------------------

def test_Hp_on_basis():
    for k in enumerate_indices(2, 5):
        out = apply_Hp(HermiteCoeffs.basis(k, 5), 1.0)
        np.testing.assert_array_equal(out.coeffs, (2 * sum(k) + 2) * HermiteCoeffs.basis(k, 5).coeffs)
    phi = random_phi(1, 8, 0)
    np.testing.assert_array_equal(apply_Hp(phi, 0).coeffs, phi.coeffs)


def test_isometry_example():
    phi = random_phi(1, 12, 7, content=12)
    lhs = norm_from_definition(apply_Hp(phi, 1.5), -0.5)
    assert lhs == pytest.approx(norm_from_definition(phi, 1), rel=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 10_000), st.sampled_from([1, 2]))
def test_isometry_property(p, q, seed, d):
    phi = random_phi(d, 10, seed)
    ref = sobolev_norm(phi, q)
    assert abs(sobolev_norm(apply_Hp(phi, p), q - p) - ref) <= 1e-12 * ref


@given(st.floats(-5, 5), st.integers(0, 1000))
def test_imaginary_power_is_L2_isometry(y, seed):
    phi = random_phi(2, 8, seed)
    assert sobolev_norm(apply_complex_power(phi, 1j * y), 0) == pytest.approx(sobolev_norm(phi, 0), rel=1e-12)


def test_complex_power_factorization():
    phi = random_phi(1, 16, 2)
    z = 0.7 - 1.9j
    a = apply_complex_power(phi, z).coeffs
    b = apply_complex_power(apply_Hp(phi, z.real), 1j * z.imag).coeffs
    c = apply_Hp(apply_complex_power(phi, 1j * z.imag), z.real).coeffs
    np.testing.assert_allclose(a, b, atol=1e-12 * np.abs(a).max())
    np.testing.assert_allclose(a, c, atol=1e-12 * np.abs(a).max())
    np.testing.assert_array_equal(apply_complex_power(phi, 0).coeffs, phi.coeffs)
    assert sobolev_norm(apply_complex_power(phi, 1j), 0) == pytest.approx(sobolev_norm(phi, 0), rel=1e-12)


# -- ladder operators -------------------------------------------------------------

def test_raise_lower_ground_state():
    e0 = HermiteCoeffs.basis((0, 0), 4)
    up = apply_raise(e0, 1)
    np.testing.assert_allclose(up.coeffs, sqrt(2) * HermiteCoeffs.basis((1, 0), 4).coeffs, atol=1e-15)
    assert np.all(apply_lower(e0, 1).coeffs == 0)
    with pytest.raises(ValueError):
        apply_raise(e0, 3)


@pytest.mark.parametrize("d,N", [(1, 12), (2, 8), (3, 6)])
def test_iterated_ladder_weights(d, N):
    # (A^+)^beta h_k = 2^{|beta|/2} ((k+beta)!/k!)^{1/2} h_{k+beta}, and likewise for A^alpha
    fact = lambda k: np.prod([factorial(v) for v in k])  # noqa: E731
    for k in enumerate_indices(d, N):
        for beta in enumerate_indices(d, N - sum(k)):
            v = HermiteCoeffs.basis(k, N)
            for j, b in enumerate(beta):
                for _ in range(b):
                    v = apply_raise(v, j + 1)
            kb = tuple(a + b for a, b in zip(k, beta))
            w = 2 ** (sum(beta) / 2) * sqrt(fact(kb) / fact(k))
            np.testing.assert_allclose(v.coeffs, w * HermiteCoeffs.basis(kb, N).coeffs, rtol=1e-14, atol=0)
        for alpha in enumerate_indices(d, sum(k)):
            if any(a > b for a, b in zip(alpha, k)):
                continue
            v = HermiteCoeffs.basis(k, N)
            for j, a in enumerate(alpha):
                for _ in range(a):
                    v = apply_lower(v, j + 1)
            ka = tuple(b - a for a, b in zip(alpha, k))
            w = 2 ** (sum(alpha) / 2) * sqrt(fact(k) / fact(ka))
            np.testing.assert_allclose(v.coeffs, w * HermiteCoeffs.basis(ka, N).coeffs, rtol=1e-14, atol=0)


def test_commutator_is_twice_identity():
    N = 10
    for k in enumerate_indices(2, N - 1):
        e = HermiteCoeffs.basis(k, N)
        for j in (1, 2):
            comm = apply_lower(apply_raise(e, j), j) - apply_raise(apply_lower(e, j), j)
            np.testing.assert_allclose(comm.coeffs, 2 * e.coeffs, atol=1e-13)


def test_shell_flag():
    N = 5
    inner = HermiteCoeffs.basis((N - 1,), N)
    assert not apply_raise(inner, 1).shell_touched
    shell = HermiteCoeffs.basis((N,), N)
    out = apply_raise(shell, 1)
    assert out.shell_touched and np.all(out.coeffs == 0)
    assert apply_derivative(shell, 1).shell_touched
    assert not apply_lower(shell, 1).shell_touched


@given(st.integers(0, 10_000), st.sampled_from([(1, 16), (2, 10)]))
def test_adjointness(seed, dN):
    d, N = dN
    phi, psi = random_phi(d, N, seed), random_phi(d, N, seed + 1)
    for j in range(1, d + 1):
        lhs = sobolev_inner(apply_lower(phi, j), psi, 0)
        rhs = sobolev_inner(phi, apply_raise(psi, j), 0)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_truncated_matrices_transpose():
    A, Ap = lower_matrix(2, 7, 1), raise_matrix(2, 7, 1)
    assert (A - Ap.T).nnz == 0
    D = derivative_matrix(3, 5, 2)
    assert abs(D + D.T).max() == 0


# -- derivative / position --------------------------------------------------------

def test_derivative_and_position_of_ground_state():
    e0 = HermiteCoeffs.basis((0,), 4)
    np.testing.assert_allclose(apply_derivative(e0, 1).coeffs, [0, -1 / sqrt(2), 0, 0, 0], atol=1e-16)
    np.testing.assert_allclose(apply_position(e0, 1).coeffs, [0, 1 / sqrt(2), 0, 0, 0], atol=1e-16)


def test_derivative_matches_finite_differences():
    # oracle: d/dx of the synthesized function at sample points
    phi = random_phi(1, 20, 5, complex_=False)
    xs = np.linspace(-3, 3, 13)
    eps = 1e-5
    fd = (synthesize(phi, (xs + eps).reshape(-1, 1)) - synthesize(phi, (xs - eps).reshape(-1, 1))) / (2 * eps)
    np.testing.assert_allclose(synthesize(apply_derivative(phi, 1), xs.reshape(-1, 1)), fd, atol=1e-6)
    np.testing.assert_allclose(synthesize(apply_position(phi, 1), xs.reshape(-1, 1)),
                               xs * synthesize(phi, xs.reshape(-1, 1)), atol=1e-12)


@pytest.mark.parametrize("d,N", [(1, 12), (2, 8)])
def test_harmonic_oscillator_diagonal(d, N):
    for k in enumerate_indices(d, N - 2):
        e = HermiteCoeffs.basis(k, N)
        out = HermiteCoeffs.zeros(d, N)
        for j in range(1, d + 1):
            out = out + apply_position(apply_position(e, j), j) - apply_derivative(apply_derivative(e, j), j)
        np.testing.assert_allclose(out.coeffs, (2 * sum(k) + d) * e.coeffs, atol=1e-12)


def test_derivative_bound_constant_stable():
    # ||d phi||_{p - 1/2} <= C ||phi||_p; the ensemble constant should not drift with N
    consts = []
    for N in (16, 32, 64):
        ens = random_ensemble(1, N, 30, seed=11)
        consts.append(max(sobolev_norm(apply_derivative(f, 1), 0.5) / sobolev_norm(f, 1.0) for f in ens))
    assert max(consts) / min(consts) < 1.1
    assert max(consts) < 1.0  # |weight ratio| <= (sqrt(k)/sqrt(2)) / (2k+1)^{1/2} style bound


# -- Fourier -------------------------------------------------------------------------

def test_fourier_basics():
    e1 = HermiteCoeffs.basis((1,), 3)
    np.testing.assert_allclose(fourier(e1).coeffs, [0, -1j, 0, 0])
    phi = random_phi(2, 9, 4)
    v = phi
    for _ in range(4):
        v = fourier(v)
    np.testing.assert_allclose(v.coeffs, phi.coeffs, atol=1e-15)
    np.testing.assert_allclose(fourier(fourier(phi), "inverse").coeffs, phi.coeffs, atol=1e-15)


def test_fourier_squared_is_parity():
    phi = random_phi(2, 10, 8)
    pts = np.random.default_rng(0).uniform(-3, 3, (20, 2))
    np.testing.assert_allclose(synthesize(fourier(fourier(phi)), pts), synthesize(phi, -pts), atol=1e-10)


def test_fourier_of_gaussian_by_quadrature():
    # unitary convention: F f(xi) = (2 pi)^{-1/2} int e^{-i x xi} f(x) dx, checked on h_3
    g = build_quad_grid(80)
    xi = np.array([-1.2, 0.4, 2.0])
    direct = [(2 * pi) ** -0.5 * np.sum(g.flat_weights * np.exp(-1j * g.nodes * s) * hermite_eval_1d(3, g.nodes))
              for s in xi]
    via = synthesize(fourier(HermiteCoeffs.basis((3,), 5)), xi.reshape(-1, 1))
    np.testing.assert_allclose(via, direct, atol=1e-12)


@given(st.floats(-4, 4), st.integers(0, 1000))
def test_fourier_unitary_every_p(p, seed):
    phi = random_phi(2, 8, seed)
    assert sobolev_norm(fourier(phi), p) == pytest.approx(sobolev_norm(phi, p), rel=1e-14)


# -- distributions ----------------------------------------------------------------------

def test_delta_coefficients():
    dl = delta_coeffs([0.0], 1, 20)
    assert np.all(dl.coeffs[1::2] == 0)
    assert dl.coeffs[0] == pytest.approx(pi ** -0.25)
    with pytest.raises(ValueError):
        delta_coeffs([np.inf], 1, 4)


def test_delta_pairing_2d():
    x = np.array([0.4, -1.0])
    dl = delta_coeffs(x, 2, 6)
    for k, c in zip(enumerate_indices(2, 6), dl.coeffs):
        assert c == pytest.approx(hermite_eval_1d(k[0], x[0]) * hermite_eval_1d(k[1], x[1]), abs=1e-15)


def test_delta_negative_norm_partial_sums():
    sums = [sobolev_norm(delta_coeffs([0.0], 1, N), -1) for N in (16, 32, 64, 128)]
    diffs = np.diff(sums)
    assert np.all(diffs > 0)
    assert np.all(np.diff(diffs) < 0)
    assert diffs[-1] / diffs[-2] < 0.6


def test_gaussian_coeffs():
    g = gaussian_coeffs([0.0], 0.5, 1, 12)
    # N(0, 1/2) density = pi^{-1/2} e^{-y^2} = pi^{-1/4} h_0(y) e^{-y^2/2}: even, c_0 dominant
    assert np.all(np.abs(g.coeffs[1::2]) < 1e-14)
    assert abs(g.coeffs[0]) == np.abs(g.coeffs).max()


def test_random_ensemble_prefix_stable():
    a = random_ensemble(1, 16, 3, seed=5)
    b = random_ensemble(1, 32, 3, seed=5)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.coeffs[:9], y.coeffs[:9])
    assert a[0].content_degree() == 8


# -- norm equivalence -----------------------------------------------------------------

def test_norm_equivalence_m0():
    phi = random_phi(1, 10, 3)
    rep = norm_equivalence_check(phi, 0)
    assert rep.lower_ratio == 1.0 and rep.upper_ratio == 1.0


def test_norm_equivalence_ground_state_terms():
    # oracle: explicit functions x^a (d/dx)^b h_0 integrated by quadrature
    g = build_quad_grid(60)
    s = g.nodes
    h0 = pi ** -0.25 * np.exp(-s * s / 2)
    derivs = [h0, -s * h0, (s * s - 1) * h0]
    rep = norm_equivalence_check(HermiteCoeffs.basis((0,), 8), 1)
    assert len(rep.terms) == 6
    for ((a,), (b,)), value in rep.terms.items():
        expected = sqrt(np.sum(g.flat_weights * (s ** a * derivs[b]) ** 2))
        assert value == pytest.approx(expected, rel=1e-12)


def test_norm_equivalence_ensemble_ratios():
    stats = []
    for seed in (1, 2, 3):
        ratios = [norm_equivalence_check(f, 1) for f in random_ensemble(1, 24, 20, seed)]
        lo = [r.lower_ratio for r in ratios]
        hi = [r.upper_ratio for r in ratios]
        assert np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))
        stats.append((max(lo) / min(lo), max(hi) / min(hi)))
    stats = np.array(stats)
    assert np.all(stats < 10)
    assert stats.max(axis=0).min() / stats.min(axis=0).max() < 2


def test_norm_equivalence_margin():
    with pytest.raises(ValueError):
        norm_equivalence_check(HermiteCoeffs.basis((7,), 8), 1)
