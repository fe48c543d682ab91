"""Singular space, subspace chain, directional indices and symplectic split.

The singular space of an accretive symbol is the intersection of the kernels
of ``Re F (Im F)^j`` for ``j = 0, ..., 2n-1``. Its partial intersections have
orthogonal complements ``V_0 ⊂ V_1 ⊂ ...``; the index of a direction is the
first ``k`` with the direction in ``V_k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space, orth, subspace_angles

from quadsemigroup.errors import (
    ConsistencyError,
    DegenerateDirectionError,
    InputError,
    NotApplicableError,
)
from quadsemigroup.symplectic_core import (
    QuadraticSymbol,
    hamilton_map,
    make_symbol,
    symplectic_matrix,
)

__all__ = [
    "MEMBERSHIP_TOL",
    "SubspaceChain",
    "SymplecticSplit",
    "defect_forms",
    "direction_index",
    "imag_power",
    "kernel_chain",
    "symplectic_split",
]

MEMBERSHIP_TOL = 1e-8


@dataclass(frozen=True)
class SubspaceChain:
    """Nested subspaces attached to an accretive symbol.

    Attributes
    ----------
    n : int
    k0 : int or None
        First ``k`` at which the kernel intersection is trivial; ``None`` when
        the singular space is nonzero.
    bases : list of ndarray
        ``bases[k]`` is an orthonormal ``2n x dim V_k`` basis.
    kernel_bases : list of ndarray
        Orthonormal bases of the partial kernel intersections.
    S_basis : ndarray
        Orthonormal basis of the singular space (``2n x 0`` when trivial).
    rank_tol : float
        Singular-value threshold used for every rank decision.
    warnings : list of str
        Ill-conditioned rank decisions, if any.
    """

    n: int
    k0: int | None
    bases: list = field(repr=False)
    kernel_bases: list = field(repr=False)
    S_basis: np.ndarray = field(repr=False)
    rank_tol: float
    warnings: list = field(default_factory=list)

    @property
    def singular_space_trivial(self):
        return self.S_basis.shape[1] == 0

    @property
    def dims(self):
        return [b.shape[1] for b in self.bases]


@dataclass(frozen=True)
class SymplecticSplit:
    """Decomposition ``R^{2n} = S ⊕ S^{σ⊥}`` when ``σ`` restricted to ``S`` is non-degenerate.

    Basis matrices hold the symplectic pairs as columns ``[e_1..e_m, f_1..f_m]``
    with ``σ(f_j, e_k) = δ_jk``; in these coordinates the restricted symbols
    are ordinary quadratic symbols with position block first.
    """

    S_symplectic: bool
    sigma_rank: int
    basis_S: np.ndarray | None = field(default=None, repr=False)
    basis_Sperp: np.ndarray | None = field(default=None, repr=False)
    q_restricted: QuadraticSymbol | None = None
    imq_restricted: QuadraticSymbol | None = None
    residual: float = 0.0


def imag_power(ImF, j):
    """Return ``(Im F)^j`` as a real matrix."""
    return np.linalg.matrix_power(ImF, j)


def _default_rank_tol(n, s):
    smax = s[0] if s.size else 0.0
    return 2 * n * smax * 1e-12


def kernel_chain(q, rank_tol=None):
    """Compute the singular space, ``k0`` and the chain ``V_k``.

    Parameters
    ----------
    q : QuadraticSymbol
        Accretive symbol.
    rank_tol : float, optional
        Absolute singular-value threshold. Defaults to
        ``2n * sigma_max * 1e-12`` of each stacked matrix.

    Returns
    -------
    SubspaceChain
    """
    if not q.accretive:
        raise InputError("kernel chain requires an accretive symbol (Re q >= 0)")
    n = q.n
    hm = hamilton_map(q)
    ReF, ImF = hm.real, hm.imag
    rows = []
    bases, kernels, warnings = [], [], []
    k0 = None
    used_tol = 0.0
    P = np.eye(2 * n)
    for k in range(2 * n):
        rows.append(ReF @ P)
        P = ImF @ P
        stack = np.vstack(rows)
        _, s, Vh = np.linalg.svd(stack)
        tol = rank_tol if rank_tol is not None else _default_rank_tol(n, s)
        used_tol = max(used_tol, tol)
        rank = int(np.sum(s > tol))
        ambiguous = s[(s >= tol / 10) & (s <= 10 * tol)]
        if ambiguous.size and tol > 0:
            warnings.append(
                f"ill-conditioned chain at k={k}: singular values {ambiguous.tolist()} near rank_tol={tol:.3e}"
            )
        bases.append(Vh[:rank].T.copy())
        kernels.append(Vh[rank:].T.copy())
        if rank == 2 * n:
            k0 = k
            break
    S_basis = kernels[-1]
    return SubspaceChain(
        n=n,
        k0=k0,
        bases=bases,
        kernel_bases=kernels,
        S_basis=S_basis,
        rank_tol=float(used_tol),
        warnings=warnings,
    )


def _distance(basis, x):
    return np.linalg.norm(x - basis @ (basis.T @ x))


def direction_index(chain, X0, membership_tol=MEMBERSHIP_TOL):
    """Least ``k`` with ``X0/|X0|`` within ``membership_tol`` of ``V_k``.

    Complex directions are handled through the complexified subspaces.
    """
    X0 = np.asarray(X0)
    if X0.shape != (2 * chain.n,):
        raise InputError(f"direction must have length {2 * chain.n}")
    nrm = np.linalg.norm(X0)
    if nrm == 0:
        raise DegenerateDirectionError("direction index of the zero vector is undefined")
    x = X0 / nrm
    for k, basis in enumerate(chain.bases):
        if _distance(basis, x) <= membership_tol:
            return k
    raise NotApplicableError("direction does not belong to the last subspace of the chain")


def defect_forms(q, chain):
    """Matrices ``R_k`` of ``r_k(X) = sum_{j<=k} Re q((Im F)^j X)`` and ``c0``.

    Returns ``(R_list, c0)`` with ``R_list[k]`` for ``k = 0..k_last`` where
    ``k_last`` is ``k0`` or the final chain step. ``c0`` is ``lambda_min`` of
    the last matrix. Kernels are checked against the chain by principal angles.
    """
    if not q.accretive:
        raise InputError("defect forms require an accretive symbol")
    ImF = hamilton_map(q).imag
    ReM = q.M.real
    R_list = []
    R = np.zeros_like(ReM)
    for k in range(len(chain.bases)):
        P = imag_power(ImF, k)
        R = R + P.T @ ReM @ P
        R = (R + R.T) / 2
        R_list.append(R.copy())
        ker_chain = chain.kernel_bases[k]
        evals, evecs = np.linalg.eigh(R)
        tol = max(chain.rank_tol, 1e-12 * (1 + abs(evals[-1])))
        ker_R = evecs[:, evals <= tol]
        if ker_R.shape[1] != ker_chain.shape[1]:
            raise ConsistencyError(
                f"dim Ker R_{k} = {ker_R.shape[1]} but chain kernel has dim {ker_chain.shape[1]}"
            )
        if ker_R.shape[1] and np.max(subspace_angles(ker_R, ker_chain)) > 1e-8:
            raise ConsistencyError(f"Ker R_{k} and the chain kernel differ")
    c0 = float(np.linalg.eigvalsh(R_list[-1])[0])
    if chain.singular_space_trivial and c0 <= chain.rank_tol:
        raise ConsistencyError("trivial singular space claimed but R_k0 is not positive definite")
    return R_list, c0


def _symplectic_gram_schmidt(basis, J):
    """Return columns ``[e_1..e_m, f_1..f_m]`` spanning ``basis`` with ``σ(f_j, e_k) = δ_jk``."""
    remaining = [basis[:, i] for i in range(basis.shape[1])]
    es, fs = [], []

    def sig(a, b):
        return a @ J @ b

    while remaining:
        e = remaining.pop(0)
        vals = [abs(sig(w, e)) for w in remaining]
        if not vals or max(vals) == 0:
            raise ConsistencyError("symplectic Gram-Schmidt broke down")
        idx = int(np.argmax(vals))
        f = remaining.pop(idx)
        f = f / sig(f, e)
        es.append(e)
        fs.append(f)
        new = []
        for w in remaining:
            # remove the components along the pair (e, f)
            w = w - sig(f, w) * e + sig(e, w) * f
            new.append(w)
        remaining = new
    return np.column_stack(es + fs)


def _restricted_symbol(M, basis, label):
    Mr = basis.T @ M @ basis
    return make_symbol(basis.shape[1] // 2, Mr, label=label)


def symplectic_split(q, chain, tol=1e-10, rng=None):
    """Split ``q`` along the singular space when ``σ|_S`` is non-degenerate.

    Returns a :class:`SymplecticSplit`. When ``S = {0}`` the split is trivial
    and ``q_restricted`` is ``q`` itself. Stability relations
    ``(Re F) S = 0`` and ``(Im F) S ⊂ S`` and the decomposition
    ``q = q|_{S^σ⊥} + i (Im q)|_S`` are verified on random vectors.
    """
    n = q.n
    J = symplectic_matrix(n)
    S = chain.S_basis
    m = S.shape[1]
    if m == 0:
        return SymplecticSplit(
            S_symplectic=True,
            sigma_rank=0,
            basis_S=np.zeros((2 * n, 0)),
            basis_Sperp=np.eye(2 * n),
            q_restricted=q,
            imq_restricted=None,
        )
    G = S.T @ J @ S
    s = np.linalg.svd(G, compute_uv=False)
    rank = int(np.sum(s > tol))
    if rank < m:
        return SymplecticSplit(S_symplectic=False, sigma_rank=rank)
    hm = hamilton_map(q)
    ReF, ImF = hm.real, hm.imag
    scale = 1.0 + np.linalg.norm(hm.F, 2)
    if np.linalg.norm(ReF @ S) > 1e-10 * scale:
        raise ConsistencyError("(Re F) S is not zero")
    ImS = ImF @ S
    if np.linalg.norm(ImS - S @ (S.T @ ImS)) > 1e-10 * scale:
        raise ConsistencyError("(Im F) S is not contained in S")
    # S^σ⊥ = {Y : σ(s, Y) = 0 for s in S} = Ker(S^T J)
    Sperp = null_space(S.T @ J)
    basis_S = _symplectic_gram_schmidt(orth(S), J)
    basis_Sperp = (
        _symplectic_gram_schmidt(Sperp, J) if Sperp.shape[1] else np.zeros((2 * n, 0))
    )
    # reorder columns so that the new coordinates are (positions, momenta)
    # with σ(f_j, e_k) = δ_jk matching σ(e_ξ, e_x) = 1
    imq_S = _restricted_symbol(q.M.imag, basis_S, "Im q on S")
    q_perp = (
        _restricted_symbol(q.M, basis_Sperp, "q on S^σ⊥") if basis_Sperp.shape[1] else None
    )
    rng = np.random.default_rng(0) if rng is None else rng
    full = np.hstack([basis_S, basis_Sperp])
    residual = 0.0
    for _ in range(100):
        X = rng.standard_normal(2 * n)
        coeff = np.linalg.solve(full, X)
        c_S, c_P = coeff[:m], coeff[m:]
        rhs = 1j * (c_S @ imq_S.M.real @ c_S)
        if q_perp is not None:
            rhs = rhs + c_P @ q_perp.M @ c_P
        lhs = X @ q.M @ X
        residual = max(residual, abs(lhs - rhs) / (1 + X @ X))
    if residual > 1e-10:
        raise ConsistencyError(f"splitting residual {residual:.3e} exceeds tolerance")
    return SymplecticSplit(
        S_symplectic=True,
        sigma_rank=rank,
        basis_S=basis_S,
        basis_Sperp=basis_Sperp,
        q_restricted=q_perp,
        imq_restricted=imq_S,
        residual=float(residual),
    )
