import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import subspace_angles

from quadsemigroup.ensembles import harmonic_oscillator, random_accretive_symbol
from quadsemigroup.errors import DegenerateDirectionError, InputError, NotApplicableError
from quadsemigroup.singular_space import (
    defect_forms,
    direction_index,
    kernel_chain,
    symplectic_split,
)
from quadsemigroup.symplectic_core import make_symbol

seeds = st.integers(0, 2**32 - 1)


def _ixi2():
    return make_symbol(1, np.diag([0.0, 1j]))


def _mixed():
    # (x1^2 + xi1^2)/2 + i x2 xi2 in the order (x1, x2, xi1, xi2)
    M = np.zeros((4, 4), dtype=complex)
    M[0, 0] = M[2, 2] = 0.5
    M[1, 3] = M[3, 1] = 0.5j
    return make_symbol(2, M)


def _contains(big, small, tol=1e-10):
    return np.linalg.norm(small - big @ (big.T @ small)) <= tol


def test_harmonic_oscillator_chain(ho):
    chain = kernel_chain(ho)
    assert chain.singular_space_trivial
    assert chain.k0 == 0
    assert chain.dims == [2]
    assert not chain.warnings


def test_kramers_chain(kramers):
    chain = kernel_chain(kramers)
    assert chain.k0 == 1
    assert chain.dims == [2, 4]
    e = np.eye(4)
    V0_expected = e[:, [1, 3]]
    assert np.max(subspace_angles(chain.bases[0], V0_expected)) < 1e-12


def test_kramers_chain_matches_brute_force_nullspace(kramers):
    chain = kernel_chain(kramers)
    F = -np.array([[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]]) @ kramers.M
    ReF, ImF = F.real, F.imag
    stack = np.vstack([ReF, ReF @ ImF])
    assert np.linalg.matrix_rank(ReF) == 2
    assert np.linalg.matrix_rank(stack) == 4
    assert chain.kernel_bases[0].shape[1] == 4 - np.linalg.matrix_rank(ReF)


def test_purely_imaginary_symbol_has_full_singular_space():
    chain = kernel_chain(_ixi2())
    assert chain.k0 is None
    assert chain.S_basis.shape == (2, 2)
    assert chain.dims == [0, 0]


def test_non_accretive_rejected():
    with pytest.raises(InputError):
        kernel_chain(make_symbol(1, np.diag([1.0, -1.0])))


def test_direction_index_examples(kramers, ho, rng):
    chain = kernel_chain(kramers)
    assert direction_index(chain, [0, 0, 0, 1.0]) == 0
    assert direction_index(chain, [1.0, 0, 0, 0]) == 1
    assert direction_index(chain, [0, 0, 1.0, 0]) == 1
    hc = kernel_chain(ho)
    for _ in range(5):
        assert direction_index(hc, rng.standard_normal(2)) == 0


def test_direction_index_complex(kramers):
    chain = kernel_chain(kramers)
    assert direction_index(chain, np.array([0, 1, 0, 1j])) == 0
    assert direction_index(chain, np.array([1j, 1, 0, 0])) == 1


def test_direction_index_errors(kramers):
    chain = kernel_chain(kramers)
    with pytest.raises(DegenerateDirectionError):
        direction_index(chain, np.zeros(4))
    with pytest.raises(NotApplicableError):
        direction_index(kernel_chain(_ixi2()), [1.0, 0.0])
    with pytest.raises(InputError):
        direction_index(chain, [1.0, 0.0])


@given(st.floats(1e-6, 1e6), st.integers(0, 3))
def test_direction_index_scale_invariant(alpha, i):
    from quadsemigroup.ensembles import kramers_symbol

    chain = kernel_chain(kramers_symbol())
    X0 = np.eye(4)[i] + 0.0
    assert direction_index(chain, alpha * X0) == direction_index(chain, X0)


def test_defect_forms_examples(ho, kramers):
    R, c0 = defect_forms(ho, kernel_chain(ho))
    np.testing.assert_allclose(R[0], np.eye(2) / 2)
    assert c0 == pytest.approx(0.5)
    R, c0 = defect_forms(kramers, kernel_chain(kramers))
    np.testing.assert_allclose(R[0], np.diag([0, 0.25, 0, 1]), atol=1e-15)
    assert np.linalg.eigvalsh(R[1])[0] > 0
    assert c0 == pytest.approx(0.0625, rel=1e-12)
    q = _ixi2()
    R, _ = defect_forms(q, kernel_chain(q))
    assert all(np.all(Rk == 0) for Rk in R)


def test_split_trivial_for_kramers(kramers):
    split = symplectic_split(kramers, kernel_chain(kramers))
    assert split.S_symplectic
    assert split.q_restricted is kramers
    np.testing.assert_array_equal(split.basis_Sperp, np.eye(4))


def test_split_mixed_example(rng):
    q = _mixed()
    chain = kernel_chain(q)
    assert chain.S_basis.shape[1] == 2
    e = np.eye(4)
    assert np.max(subspace_angles(chain.S_basis, e[:, [1, 3]])) < 1e-12
    split = symplectic_split(q, chain)
    assert split.S_symplectic and split.sigma_rank == 2
    assert split.residual <= 1e-10
    np.testing.assert_allclose(split.q_restricted.M, harmonic_oscillator().M, atol=1e-12)
    # (Im q)|_S is x xi in the symplectic coordinates of S, possibly up to sign
    # conventions absorbed by the basis; its evaluations match on S
    for _ in range(10):
        c = rng.standard_normal(2)
        X = split.basis_S @ c
        assert abs(c @ split.imq_restricted.M.real @ c - (X @ q.M.imag @ X)) < 1e-12


def test_split_empty_complement():
    q = _ixi2()
    split = symplectic_split(q, kernel_chain(q))
    assert split.S_symplectic
    assert split.basis_Sperp.shape == (2, 0)
    assert split.q_restricted is None


def test_split_degenerate_sigma():
    # i x1^2 in n = 2: S = R^4 is symplectic, but i(x1^2) + x2^2 leaves S = span{x1, xi1, xi2}
    M = np.zeros((4, 4), dtype=complex)
    M[0, 0] = 1j
    M[1, 1] = 1.0
    q = make_symbol(2, M)
    chain = kernel_chain(q)
    split = symplectic_split(q, chain)
    assert chain.S_basis.shape[1] == 3
    assert not split.S_symplectic
    assert split.sigma_rank == 2


@given(seeds, st.integers(1, 3))
def test_chain_monotone_and_detection_routes_agree(seed, n):
    rng = np.random.default_rng(seed)
    rank = int(rng.integers(1, 2 * n + 1))
    G = rng.standard_normal((2 * n, rank))
    S = rng.standard_normal((2 * n, 2 * n))
    q = make_symbol(n, G @ G.T + 1j * (S + S.T) / 2)
    chain = kernel_chain(q)
    for lo, hi in zip(chain.bases, chain.bases[1:]):
        assert _contains(hi, lo)
        if chain.singular_space_trivial:
            assert hi.shape[1] > lo.shape[1]
    R, c0 = defect_forms(q, chain)
    assert chain.singular_space_trivial == (c0 > chain.rank_tol)
    for Rk in R:
        assert np.linalg.eigvalsh(Rk)[0] >= -1e-10 * (1 + np.abs(Rk).max())


@given(seeds, st.integers(1, 3))
def test_trivial_singular_space_has_all_indices(seed, n):
    rng = np.random.default_rng(seed)
    q = random_accretive_symbol(rng, n)
    chain = kernel_chain(q)
    X0 = rng.standard_normal(2 * n)
    assert 0 <= direction_index(chain, X0) <= chain.k0


def test_equivalence_on_ensemble():
    rng = np.random.default_rng(7)
    agree = 0
    for _ in range(200):
        n = int(rng.integers(1, 4))
        rank = int(rng.integers(0, 2 * n + 1))
        G = rng.standard_normal((2 * n, rank))
        S = rng.standard_normal((2 * n, 2 * n))
        q = make_symbol(n, G @ G.T + 1j * (S + S.T) / 2)
        chain = kernel_chain(q)
        _, c0 = defect_forms(q, chain)
        agree += chain.singular_space_trivial == (c0 > chain.rank_tol)
    assert agree == 200


@given(seeds)
def test_split_residual_on_block_symbols(seed):
    rng = np.random.default_rng(seed)
    # elliptic harmonic part in (x1, xi1) and a real part-free block in (x2, xi2)
    A = rng.standard_normal((2, 2))
    B = rng.standard_normal((2, 2))
    M = np.zeros((4, 4), dtype=complex)
    idx1, idx2 = [0, 2], [1, 3]
    M[np.ix_(idx1, idx1)] = A @ A.T + np.eye(2) + 1j * (B + B.T)
    C = rng.standard_normal((2, 2))
    M[np.ix_(idx2, idx2)] = 1j * (C + C.T)
    q = make_symbol(2, M)
    chain = kernel_chain(q)
    split = symplectic_split(q, chain, rng=rng)
    assert split.S_symplectic
    assert split.residual <= 1e-10
