import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quadsemigroup.ensembles import harmonic_oscillator, random_accretive_symbol, random_symbol
from quadsemigroup.errors import InputError, NotApplicableError, ResourceError, ShapeError
from quadsemigroup.symplectic_core import make_symbol, poisson_bracket
from quadsemigroup.weyl_galerkin import (
    commutation_defect,
    decay_exponent,
    directional_norms,
    galerkin_eigenvalues,
    iterated_directional_norms,
    linear_observable,
    multi_indices,
    propagate,
    quantize,
    slope_tolerance,
    smooth_random_state,
    spectrum_bottom,
    subelliptic_ratio,
    symplectic_flow,
)

seeds = st.integers(0, 2**32 - 1)


def _interior(n, N, width=2):
    return np.all(multi_indices(n, N) <= N - width, axis=1)


def test_ho_is_diagonal(ho):
    A = quantize(ho, 8).toarray()
    np.testing.assert_allclose(A, np.diag(np.arange(9) + 0.5), atol=1e-14)


def test_ho_two_dimensions():
    op = quantize(harmonic_oscillator(2), 5)
    alpha = multi_indices(2, 5)
    np.testing.assert_allclose(op.toarray(), np.diag(alpha.sum(axis=1) + 1.0), atol=1e-14)


def test_x_xi_quantization_is_imaginary_antisymmetric():
    op = quantize(make_symbol(1, [[0, 0.5], [0.5, 0]]), 12)
    A = op.toarray()
    assert np.abs(A.real).max() == 0
    assert np.abs(A + A.T).max() < 1e-14
    assert np.abs(A - A.conj().T).max() < 1e-14


def test_kramers_bottom_eigenvalue(kramers):
    w = np.linalg.eigvals(quantize(kramers, 16).toarray())
    assert np.min(w.real) == pytest.approx(0.5, abs=1e-3)


def test_resource_cap(kramers):
    with pytest.raises(ResourceError, match="N"):
        quantize(kramers, 2000)
    with pytest.raises(InputError):
        quantize(kramers, 1)


def test_linear_observables():
    N = 6
    x = linear_observable([1.0, 0.0], N).toarray()
    off = np.sqrt(np.arange(1, N + 1) / 2)
    np.testing.assert_allclose(x, np.diag(off, 1) + np.diag(off, -1), atol=1e-15)
    D = linear_observable([0.0, 1.0], N).toarray()
    np.testing.assert_allclose(D, D.conj().T, atol=1e-15)
    np.testing.assert_allclose(D.real, 0, atol=1e-15)
    mixed = linear_observable(np.array([1.0, 1j]), N).toarray()
    np.testing.assert_allclose(mixed, x + 1j * D, atol=1e-15)
    with pytest.raises(ShapeError):
        linear_observable([1.0, 0.0, 0.0], N)


@given(seeds, st.integers(1, 2))
def test_quantization_linear(seed, n):
    rng = np.random.default_rng(seed)
    q1, q2 = random_symbol(rng, n), random_symbol(rng, n)
    a, b = rng.standard_normal(2)
    N = 5
    lhs = quantize(a * q1 + b * q2, N).toarray()
    rhs = a * quantize(q1, N).toarray() + b * quantize(q2, N).toarray()
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(rhs).max()))


@given(seeds, st.integers(1, 2))
def test_real_symbol_self_adjoint(seed, n):
    rng = np.random.default_rng(seed)
    q = random_symbol(rng, n).real_part
    A = quantize(q, 6).toarray()
    assert np.abs(A - A.conj().T).max() <= 1e-12


@given(seeds, st.integers(1, 2))
def test_commutator_matches_bracket_inside(seed, n):
    rng = np.random.default_rng(seed)
    q1, q2 = random_symbol(rng, n), random_symbol(rng, n)
    N = 8
    A1, A2 = quantize(q1, N).toarray(), quantize(q2, N).toarray()
    B = quantize(poisson_bracket(q1, q2), N).toarray()
    inner = _interior(n, N)
    C = (A1 @ A2 - A2 @ A1)[np.ix_(inner, inner)]
    expected = (B / 1j)[np.ix_(inner, inner)]
    assert np.abs(C - expected).max() <= 1e-10 * (1 + np.abs(expected).max())


@given(seeds, st.integers(1, 2))
def test_accretive_numerical_range(seed, n):
    rng = np.random.default_rng(seed)
    q = random_accretive_symbol(rng, n)
    A = quantize(q, 6).toarray()
    u = rng.standard_normal((A.shape[0], 20)) + 1j * rng.standard_normal((A.shape[0], 20))
    vals = np.einsum("ij,ij->j", u.conj(), A @ u).real / np.einsum("ij,ij->j", u.conj(), u).real
    assert vals.min() >= -1e-10 * (1 + np.abs(q.M).max())


def test_propagate_identity_at_zero(kramers):
    op = quantize(kramers, 6)
    u0 = smooth_random_state(2, 6, seed=0)
    np.testing.assert_array_equal(propagate(op, u0, [0.0])[0], u0)
    np.testing.assert_array_equal(propagate(op, u0, [0.0], method="action")[0], u0)


@pytest.mark.parametrize("method", ["dense", "action"])
def test_propagate_ho_ground_state(ho, method):
    op = quantize(ho, 16)
    u0 = np.zeros(17)
    u0[0] = 1
    ts = [0.1, 0.5, 2.0]
    out = propagate(op, u0, ts, method=method)
    for t, u in zip(ts, out):
        np.testing.assert_allclose(u, np.exp(-t / 2) * u0, atol=1e-12)


def test_propagate_methods_agree(kramers):
    op = quantize(kramers, 10)
    u0 = smooth_random_state(2, 10, seed=3)
    ts = np.linspace(0, 1, 6)
    dense = propagate(op, u0, ts, method="dense")
    action = propagate(op, u0, ts, method="action")
    assert np.abs(dense - action).max() < 1e-10


def test_propagate_input_errors(ho):
    op = quantize(ho, 4)
    with pytest.raises(InputError):
        propagate(op, np.ones(5), [0.5, 0.1])
    with pytest.raises(ShapeError):
        propagate(op, np.ones(3), [0.1])


def test_contraction(kramers):
    op = quantize(kramers, 12)
    u0 = smooth_random_state(2, 12, seed=1)
    out = propagate(op, u0, np.linspace(0, 2, 11))
    norms = np.linalg.norm(out, axis=1)
    assert np.all(norms <= 1 + 1e-8)
    assert np.all(np.diff(norms) <= 1e-8)


def test_smooth_state_shares_low_modes():
    a = smooth_random_state(1, 16, seed=5, N_ref=64)
    b = smooth_random_state(1, 32, seed=5, N_ref=64)
    assert np.linalg.norm(a) == pytest.approx(1.0)
    ratio = b[:17] / a
    np.testing.assert_allclose(ratio, ratio[0])


def test_directional_norms_large_time_decay(ho):
    op = quantize(ho, 32)
    u0 = smooth_random_state(1, 32, seed=0)
    ts = np.linspace(10, 20, 6)
    vals = directional_norms(op, [1.0, 0.0], u0, ts)
    slope = np.polyfit(ts, np.log(vals), 1)[0]
    assert slope <= -0.5 + 0.05


def test_iterated_norms_reduce_to_single(kramers):
    op = quantize(kramers, 10)
    u0 = smooth_random_state(2, 10, seed=0)
    ts = [0.1, 0.2]
    single = directional_norms(op, [0, 0, 0, 1.0], u0, ts)
    iterated, flags = iterated_directional_norms(op, [[0, 0, 0, 1.0]], u0, ts)
    np.testing.assert_allclose(iterated, single, rtol=1e-14)
    assert flags.dtype == bool


@pytest.mark.parametrize("c, p", [(1.0, -0.5), (3.0, -1.5), (0.2, -2.5)])
def test_decay_exponent_synthetic(c, p):
    t = np.logspace(-3, 0, 40)
    fit = decay_exponent(t, c * t**p)
    assert fit.slope == pytest.approx(p, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.halved_slope == pytest.approx(p, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(c), abs=1e-10)


def test_decay_exponent_errors():
    t = np.logspace(-3, 0, 40)
    with pytest.raises(InputError):
        decay_exponent(t, -t)
    with pytest.raises(InputError):
        decay_exponent(t, t, window=(0.5, 0.6))
    with pytest.raises(ShapeError):
        decay_exponent(t, t[:-1])


def test_slope_tolerances():
    assert slope_tolerance(0) == 0.1
    assert slope_tolerance(1) == 0.15
    assert slope_tolerance(3) == pytest.approx(0.35)


def test_spectrum_bottom_examples(ho, kramers):
    head = spectrum_bottom(ho, m=4)
    np.testing.assert_allclose(head.eigenvalues, [0.5, 1.5, 2.5, 3.5], atol=1e-14)
    assert head.omega0 == pytest.approx(0.5)
    khead = spectrum_bottom(kramers, m=6)
    assert khead.omega0 == pytest.approx(0.5, abs=1e-12)
    assert khead.mu0 == pytest.approx(khead.eigenvalues[0])


def test_spectrum_bottom_multiplicity():
    head = spectrum_bottom(harmonic_oscillator(2), m=6)
    np.testing.assert_allclose(head.eigenvalues, [1, 2, 2, 3, 3, 3], atol=1e-12)


def test_spectrum_pairing_boundary():
    with pytest.raises(NotApplicableError):
        spectrum_bottom(make_symbol(1, np.diag([0.0, 1j])))


def test_galerkin_matches_lattice(kramers):
    gal = galerkin_eigenvalues(quantize(kramers, 64), m=6)
    lat = spectrum_bottom(kramers, m=6).eigenvalues
    np.testing.assert_allclose(np.sort(gal.real), np.sort(lat.real), atol=1e-3)


def test_symplectic_flow_identity_and_rotation(ho):
    np.testing.assert_allclose(symplectic_flow(ho, 0.0), np.eye(2), atol=1e-15)
    T = symplectic_flow(ho, 0.3)
    np.testing.assert_allclose(np.abs(np.linalg.det(T)), 1.0)


def test_commutation_defect_examples(ho, kramers):
    assert commutation_defect(kramers, [0, 0, 0, 1.0], 0.0, 8) == 0.0
    assert commutation_defect(ho, [1.0, 0.0], 0.3, 64) <= 1e-8
    defects = [commutation_defect(kramers, [1.0, 0, 0, 0], 0.2, N) for N in (8, 12, 16)]
    assert defects[0] > defects[1] > defects[2]


def test_subelliptic_ratio_ho_bounded(ho):
    r32 = subelliptic_ratio(ho, "global", 10, 32, k0=0)
    r64 = subelliptic_ratio(ho, "global", 10, 64, N_ref=64, k0=0)
    assert r32["power"] == 2.0
    assert r32["max"] < 2.0 and r64["max"] < 2.0
    with pytest.raises(InputError):
        subelliptic_ratio(ho, "global", 2, 8)


def test_subelliptic_ratio_kramers_index_zero(kramers):
    res = subelliptic_ratio(kramers, 0, 5, 16)
    assert res["power"] == 0.5
    assert np.all(np.isfinite(res["ratios"]))
    assert res["max"] < 10
