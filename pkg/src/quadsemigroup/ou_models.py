"""Ornstein-Uhlenbeck and Fokker-Planck models built from a diffusion and a drift.

The generator ``P = 1/2 Tr(Q ∇²) + <Bx, ∇>`` is conjugated by the square root
of the invariant Gaussian density into a quadratic operator on flat ``L²``.
Hypoellipticity is decided by the Kalman rank condition and cross-checked
against the controllability Gram matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import quad_vec

from quadsemigroup.errors import (
    ConsistencyError,
    DegenerateDirectionError,
    InputError,
    NotApplicableError,
    ResourceError,
    ShapeError,
)
from quadsemigroup.singular_space import direction_index, imag_power, kernel_chain
from quadsemigroup.symplectic_core import eps_psd, hamilton_map, make_symbol
from quadsemigroup.weyl_galerkin import PAIRING_TOL, propagate, quantize, spectrum_bottom

__all__ = [
    "GaussianState",
    "OUModel",
    "SPEC_TOL",
    "conjugated_density_evolution",
    "conjugated_symbol",
    "frequency_index",
    "gaussian_values",
    "gram_matrix",
    "gram_verdict",
    "hermite_coefficients",
    "hermite_functions",
    "index_table",
    "kolmogorov_propagate_gaussian",
    "lambda_generators",
    "model_from_dict",
    "monte_carlo_check",
    "omega0",
    "omega0_discrepancy",
    "oracle_comparison",
    "ou_build",
    "space_index",
    "subspace_V",
    "subspace_Vtilde",
    "subspace_angles",
]

SPEC_TOL = 1e-9
MC_SEED = 0xC0FFEE
VARIANTS = ("ou", "fokker_planck")


def _rank_tol(A):
    s = np.linalg.svd(A, compute_uv=False)
    return 1e3 * max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)


def _orth(A, tol=None):
    """Orthonormal basis of the column space with a scale-aware threshold."""
    if A.size == 0:
        return np.zeros((A.shape[0], 0))
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    tol = _rank_tol(A) if tol is None else tol
    return U[:, s > tol]


@dataclass(frozen=True)
class OUModel:
    """Diffusion ``Qdiff``, drift ``B`` and everything derived from them.

    ``k0`` is ``None`` when the Kalman condition fails; ``Qinf`` is ``None``
    when ``B`` is not stable.
    """

    n: int
    Qdiff: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    variant: str
    Qhalf: np.ndarray = field(repr=False)
    kalman_rank: int
    hypoelliptic: bool
    k0: int | None
    stable: bool
    Qinf: np.ndarray | None = field(default=None, repr=False)
    lyapunov_residual: float | None = None

    @property
    def trace_B(self):
        return float(np.trace(self.B))


def _norm2(A):
    return float(np.linalg.norm(A, 2))


def _psd_sqrt(Q):
    w, U = np.linalg.eigh(Q)
    tol = eps_psd(Q)
    if w[0] < -tol:
        raise InputError(f"diffusion matrix is not positive semidefinite (eigenvalue {w[0]:.3e})")
    # eigenvalues at roundoff level are zero; their square roots would not be
    w = np.where(w <= 1e3 * Q.shape[0] * np.finfo(float).eps * max(w[-1], 0.0), 0.0, w)
    R = (U * np.sqrt(w)) @ U.T
    return (R + R.T) / 2


def kalman_blocks(Qhalf, B, k):
    """Matrix ``[Q^{1/2}, B Q^{1/2}, ..., B^k Q^{1/2}]``."""
    return np.hstack([np.linalg.matrix_power(B, j) @ Qhalf for j in range(k + 1)])


def ou_build(Qdiff, B, variant="ou"):
    """Build a model, decide hypoellipticity and solve for the invariant covariance.

    Parameters
    ----------
    Qdiff : array_like, shape (n, n)
        Symmetric positive semidefinite diffusion matrix.
    B : array_like, shape (n, n)
        Drift matrix.
    variant : {"ou", "fokker_planck"}
    """
    Qdiff = np.asarray(Qdiff, dtype=float)
    B = np.asarray(B, dtype=float)
    if Qdiff.ndim != 2 or Qdiff.shape[0] != Qdiff.shape[1]:
        raise ShapeError("diffusion matrix must be square")
    n = Qdiff.shape[0]
    if B.shape != (n, n):
        raise ShapeError(f"drift matrix must be {n}x{n}, got {B.shape}")
    if not (np.all(np.isfinite(Qdiff)) and np.all(np.isfinite(B))):
        raise InputError("model matrices have non-finite entries")
    if variant not in VARIANTS:
        raise InputError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if np.max(np.abs(Qdiff - Qdiff.T)) > 1e-12 * (1 + np.max(np.abs(Qdiff))):
        raise InputError("diffusion matrix is not symmetric")
    Qdiff = (Qdiff + Qdiff.T) / 2
    Qhalf = _psd_sqrt(Qdiff)
    K = kalman_blocks(Qhalf, B, n - 1)
    tol = _rank_tol(K)
    rank = int(np.sum(np.linalg.svd(K, compute_uv=False) > tol)) if K.any() else 0
    k0 = None
    if rank == n:
        for k in range(n):
            Kk = kalman_blocks(Qhalf, B, k)
            if int(np.sum(np.linalg.svd(Kk, compute_uv=False) > tol)) == n:
                k0 = k
                break
    eig = np.linalg.eigvals(B)
    stable = bool(np.all(eig.real < -SPEC_TOL))
    Qinf, res = None, None
    if stable:
        Qinf = sla.solve_continuous_lyapunov(B, -Qdiff)
        Qinf = (Qinf + Qinf.T) / 2
        R = Qdiff + B @ Qinf + Qinf @ B.T
        scale = np.linalg.norm(Qdiff) + 2 * np.linalg.norm(B) * np.linalg.norm(Qinf)
        res = float(np.linalg.norm(R) / scale) if scale > 0 else 0.0
    return OUModel(
        n=n,
        Qdiff=Qdiff,
        B=B,
        variant=variant,
        Qhalf=Qhalf,
        kalman_rank=rank,
        hypoelliptic=rank == n,
        k0=k0,
        stable=stable,
        Qinf=Qinf,
        lyapunov_residual=res,
    )


def _require_qinf(model):
    if model.Qinf is None:
        if np.any(np.abs(np.linalg.eigvals(model.B).real) <= SPEC_TOL):
            raise NotApplicableError("spectrum of B touches the imaginary axis: undecidable")
        raise NotApplicableError("drift is not stable: no invariant measure")
    return model.Qinf


def gram_matrix(model, t, check=True):
    """Controllability Gram matrix ``G_t = ∫_0^t e^{sB} Q e^{sB^T} ds``.

    Computed from the exponential of the block matrix ``[[B, Q], [0, -B^T]]``
    and optionally cross-checked by adaptive quadrature.
    """
    if t < 0:
        raise InputError("t must be nonnegative")
    n = model.n
    if t == 0:
        return np.zeros((n, n))
    B, Q = model.B, model.Qdiff
    big = np.block([[B, Q], [np.zeros((n, n)), -B.T]])
    E = sla.expm(t * big)
    G = E[:n, n:] @ E[:n, :n].T
    G = (G + G.T) / 2
    if check:
        G2, _ = quad_vec(
            lambda s: sla.expm(s * B) @ Q @ sla.expm(s * B.T), 0.0, t, epsabs=1e-14, epsrel=1e-12
        )
        if np.max(np.abs(G - G2)) > 1e-10 * (1 + np.max(np.abs(G))):
            raise ConsistencyError("Gram matrix routes disagree")
    return G


def gram_verdict(model, t=1.0):
    """Whether ``lambda_min(G_t)`` exceeds ``1e3 n eps ||G_t||``; returns ``(verdict, lam, tol)``."""
    G = gram_matrix(model, t, check=False)
    w = np.linalg.eigvalsh(G)
    tol = 1e3 * model.n * np.finfo(float).eps * max(abs(w[-1]), np.finfo(float).tiny)
    return bool(w[0] > tol), float(w[0]), float(tol)


def conjugated_symbol(model, check=True):
    """Weyl symbol of the operator conjugated by the invariant density.

    ``q = 1/2 |Q^{1/2} xi|² + 1/8 |Q^{1/2} Qinf^{-1} x|² ∓ i <(1/2 Q Qinf^{-1} + B) x, xi>``,
    minus sign for ``"ou"`` and plus sign for ``"fokker_planck"``.
    """
    Qinf = _require_qinf(model)
    n, Q, B = model.n, model.Qdiff, model.B
    Qi = np.linalg.inv(Qinf)
    C = 0.5 * Q @ Qi + B
    s = -1.0 if model.variant == "ou" else 1.0
    M = np.zeros((2 * n, 2 * n), dtype=complex)
    M[:n, :n] = Qi @ Q @ Qi / 8
    M[n:, n:] = Q / 2
    # i s <C x, xi> = i s xi^T C x splits evenly over the two off-diagonal blocks
    M[n:, :n] = 0.5j * s * C
    M[:n, n:] = 0.5j * s * C.T
    q = make_symbol(n, M, label=f"{model.variant} conjugated")
    if check:
        F = hamilton_map(q).F
        G = Q @ Qi + 2 * B
        F_ref = np.block([[(-0.25j) * G, Q / 2], [-Qi @ Q @ Qi / 8, 0.25j * G.T]])
        if model.variant == "fokker_planck":
            F_ref = F_ref.conj()
        # roundoff of Qinf^{-1} Q Qinf^{-1} scales with the norms of its factors
        nQ, nQi = np.linalg.norm(Q, 2), np.linalg.norm(Qi, 2)
        scale = 1 + nQi**2 * nQ + nQ * nQi + np.linalg.norm(B, 2)
        if np.max(np.abs(F - F_ref)) > 1e-12 * scale:
            raise ConsistencyError("Hamilton map differs from its block formula")
        if model.hypoelliptic:
            chain = kernel_chain(q)
            if chain.k0 != model.k0:
                raise ConsistencyError(f"Kalman k0={model.k0} but singular-space k0={chain.k0}")
    return q


def omega0(model):
    """Spectral abscissa ``-Tr(B)/2`` of the conjugated operator."""
    return -0.5 * model.trace_B


def omega0_discrepancy(model, q=None, pairing_tol=None):
    """Difference between the spectral ``omega0`` of the symbol and ``-Tr(B)/2``.

    Returns ``(omega0_spectral, omega0_trace, normwise)`` where ``normwise``
    divides the absolute difference by ``1 + ||F||_2``, the scale of the
    backward error of the eigenvalue computation.
    """
    q = conjugated_symbol(model) if q is None else q
    tol = PAIRING_TOL if pairing_tol is None else pairing_tol
    w_spectral = spectrum_bottom(q, pairing_tol=tol).omega0
    w_tr = omega0(model)
    return w_spectral, w_tr, abs(w_spectral - w_tr) / (1.0 + _norm2(hamilton_map(q).F))


def subspace_V(model, k):
    """Orthonormal basis of ``Ran Q^{1/2} + ... + Ran B^k Q^{1/2}``."""
    return _orth(kalman_blocks(model.Qhalf, model.B, k))


def subspace_Vtilde(model, k):
    """Orthonormal basis of ``sum_j Ran (B^T)^j Qinf^{-1} Q^{1/2}`` for ``j <= k``."""
    Qi = np.linalg.inv(_require_qinf(model))
    blocks = [np.linalg.matrix_power(model.B.T, j) @ Qi @ model.Qhalf for j in range(k + 1)]
    return _orth(np.hstack(blocks))


def subspace_angles(model):
    """Largest principal angle between ``Vtilde_k`` and ``Qinf^{-1} V_k`` for each ``k <= k0``."""
    if not model.hypoelliptic:
        raise NotApplicableError("model is not hypoelliptic")
    Qi = np.linalg.inv(_require_qinf(model))
    out = []
    for k in range(model.k0 + 1):
        A = subspace_Vtilde(model, k)
        Bk = _orth(Qi @ subspace_V(model, k))
        if A.shape[1] != Bk.shape[1]:
            out.append(np.pi / 2)
            continue
        out.append(float(np.max(sla.subspace_angles(A, Bk))) if A.shape[1] else 0.0)
    return out


def _least_member(bases, v, tol=1e-8):
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise DegenerateDirectionError("index of the zero vector is undefined")
    v = v / nrm
    for k, U in enumerate(bases):
        if np.linalg.norm(v - U @ (U.T @ v)) <= tol:
            return k
    raise NotApplicableError("vector lies outside every subspace of the family")


def frequency_index(model, xi0):
    """Least ``k`` with ``xi0`` in ``Ran Q^{1/2} + ... + Ran B^k Q^{1/2}``."""
    if not model.hypoelliptic:
        raise NotApplicableError("model is not hypoelliptic")
    xi0 = np.asarray(xi0, dtype=float)
    return _least_member([subspace_V(model, k) for k in range(model.k0 + 1)], xi0)


def space_index(model, x0):
    """Least ``k`` with ``x0`` in ``Qinf^{-1}(Ran Q^{1/2} + ... + Ran B^k Q^{1/2})``."""
    if not model.hypoelliptic:
        raise NotApplicableError("model is not hypoelliptic")
    Qi = np.linalg.inv(_require_qinf(model))
    x0 = np.asarray(x0, dtype=float)
    return _least_member([_orth(Qi @ subspace_V(model, k)) for k in range(model.k0 + 1)], x0)


def index_table(model, q=None):
    """Indices of all basis directions from both routes.

    Returns a list of dicts with keys ``label``, ``ou_index`` (frequency or
    space index) and ``chain_index`` (direction index of the conjugated
    symbol), plus the overall agreement flag.
    """
    q = conjugated_symbol(model) if q is None else q
    chain = kernel_chain(q)
    n = model.n
    rows, agree = [], True
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        X = np.concatenate([e, np.zeros(n)])
        a, b = space_index(model, e), direction_index(chain, X)
        rows.append({"label": f"x{i + 1}", "ou_index": a, "chain_index": b})
        agree &= a == b
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        X = np.concatenate([np.zeros(n), e])
        a, b = frequency_index(model, e), direction_index(chain, X)
        rows.append({"label": f"xi{i + 1}", "ou_index": a, "chain_index": b})
        agree &= a == b
    return rows, bool(agree)


def lambda_generators(model, j, q=None):
    """Matrices ``𝔔_j``, ``𝔅_j`` and the residuals of the identities they satisfy.

    Returns a dict with ``Qj``, ``Bj``, ``symbol_residual`` (the explicit
    symbol against ``Re q((Im F)^j X)``), ``generator_residual`` (the symbol
    rebuilt from ``𝔔_j``) and ``sign_residual`` (the identity
    ``(Qinf^{-1} Q + 2 B^T)^j Qinf^{-1} = (-1)^j Qinf^{-1} (Q Qinf^{-1} + 2 B)^j``).
    Residuals are normwise: each is divided by ``1`` plus the product of the
    norms of the factors entering the compared matrices.
    """
    Qinf = _require_qinf(model)
    if not model.hypoelliptic or not 0 <= j <= model.k0:
        raise NotApplicableError("j must lie in [0, k0] for a hypoelliptic model")
    n, Q, B = model.n, model.Qdiff, model.B
    Qi = np.linalg.inv(Qinf)
    K = np.linalg.matrix_power(Qi @ Q + 2 * B.T, j)
    L = np.linalg.matrix_power(Q @ Qi + 2 * B, j)
    Qj = 2.0 ** (-4 * j) * L @ Q @ K
    Qj = (Qj + Qj.T) / 2
    Bj = -0.5 * Qj @ Qi
    q = conjugated_symbol(model) if q is None else q
    P = imag_power(hamilton_map(q).imag, j)
    Mj = P.T @ q.M.real @ P
    Mj = (Mj + Mj.T) / 2
    explicit = np.zeros((2 * n, 2 * n))
    explicit[n:, n:] = 2.0 ** (-(4 * j + 1)) * K.T @ Q @ K
    explicit[:n, :n] = 2.0 ** (-(4 * j + 3)) * L.T @ Qi @ Q @ Qi @ L
    from_gen = np.zeros((2 * n, 2 * n))
    from_gen[n:, n:] = Qj / 2
    from_gen[:n, :n] = Qi @ Qj @ Qi / 8
    sign_lhs = K @ Qi
    sign_rhs = (-1) ** j * Qi @ L
    # normwise scales: roundoff of each product is eps times its factor norms
    nrm = _norm2
    nQ, nQi = nrm(Q), nrm(Qi)
    nK = nrm(Qi @ Q + 2 * B.T) ** j
    nL = nrm(Q @ Qi + 2 * B) ** j
    s_sym = 2.0 ** (-(4 * j + 1)) * nK**2 * nQ + 2.0 ** (-(4 * j + 3)) * nL**2 * nQi**2 * nQ
    s_sym += nrm(hamilton_map(q).imag) ** (2 * j) * nrm(q.M.real)
    s_gen = s_sym + 2.0 ** (-4 * j) * nL * nQ * nK * (1 + nQi**2)
    s_sign = nK * nQi + nQi * nL
    return {
        "Qj": Qj,
        "Bj": Bj,
        "symbol_residual": float(np.max(np.abs(explicit - Mj)) / (1.0 + s_sym)),
        "generator_residual": float(np.max(np.abs(from_gen - Mj)) / (1.0 + s_gen)),
        "sign_residual": float(np.max(np.abs(sign_lhs - sign_rhs)) / (1.0 + s_sign)),
    }


@dataclass(frozen=True)
class GaussianState:
    """``amplitude * exp(-1/2 (x - mean)^T covariance^{-1} (x - mean))``."""

    mean: np.ndarray
    covariance: np.ndarray
    amplitude: float = 1.0

    def __post_init__(self):
        if np.linalg.eigvalsh(self.covariance)[0] <= 0:
            raise InputError("Gaussian covariance must be positive definite")
        if not self.amplitude > 0:
            raise InputError("Gaussian amplitude must be positive")


def kolmogorov_propagate_gaussian(model, g, t):
    """Exact image of a Gaussian under the Kolmogorov representation of ``e^{tP}``.

    The function is convolved with the ``N(0, G_t)`` kernel and pulled back
    by ``x -> e^{tB} x``.
    """
    if t < 0:
        raise InputError("t must be nonnegative")
    if t == 0:
        return g
    G = gram_matrix(model, t, check=False)
    S = g.covariance + G
    E = sla.expm(t * model.B)
    Ei = np.linalg.inv(E)
    cov = Ei @ S @ Ei.T
    cov = (cov + cov.T) / 2
    if np.linalg.eigvalsh(cov)[0] <= 0:
        raise ConsistencyError("propagated covariance lost positive definiteness")
    amp = g.amplitude * np.sqrt(np.linalg.det(g.covariance) / np.linalg.det(S))
    return GaussianState(mean=Ei @ g.mean, covariance=cov, amplitude=float(amp))


def gaussian_values(g, pts):
    """Evaluate a Gaussian state at points of shape ``(..., n)``."""
    d = pts - g.mean
    P = np.linalg.inv(g.covariance)
    return g.amplitude * np.exp(-0.5 * np.einsum("...i,ij,...j->...", d, P, d))


def monte_carlo_check(model, g, t, points, samples=10**6, seed=MC_SEED):
    """Monte-Carlo evaluation of the Kolmogorov integral at ``points``.

    Returns ``(estimates, standard_errors, exact)``.
    """
    rng = np.random.default_rng(seed)
    G = gram_matrix(model, t, check=False)
    Lc = np.linalg.cholesky(G + 1e-300 * np.eye(model.n))
    Y = rng.standard_normal((samples, model.n)) @ Lc.T
    E = sla.expm(t * model.B)
    exact = gaussian_values(kolmogorov_propagate_gaussian(model, g, t), np.asarray(points))
    est, se = [], []
    for x in np.asarray(points):
        vals = gaussian_values(g, E @ x - Y)
        est.append(vals.mean())
        se.append(vals.std(ddof=1) / np.sqrt(samples))
    return np.array(est), np.array(se), exact


def hermite_functions(N, x):
    """Orthonormal Hermite functions ``h_0..h_N`` at ``x``; shape ``(N+1, len(x))``."""
    x = np.asarray(x, dtype=float)
    H = np.empty((N + 1, x.size))
    H[0] = np.pi**-0.25 * np.exp(-(x**2) / 2)
    if N >= 1:
        H[1] = np.sqrt(2.0) * x * H[0]
    for k in range(2, N + 1):
        H[k] = np.sqrt(2.0 / k) * x * H[k - 1] - np.sqrt((k - 1) / k) * H[k - 2]
    return H


def hermite_coefficients(values, N, grid):
    """Hermite coefficients of a function sampled on a tensor grid.

    ``values`` has one axis per dimension, each sampled on ``grid`` (uniform,
    wide enough for the function to vanish at the ends). Trapezoidal
    quadrature is spectrally accurate in that setting. Coefficients are
    returned flattened in the storage order of the Galerkin module.
    """
    h = grid[1] - grid[0]
    H = hermite_functions(N, grid) * h
    C = np.asarray(values, dtype=complex)
    for axis in range(C.ndim):
        C = np.moveaxis(np.tensordot(H, C, axes=([1], [axis])), 0, axis)
    return C.reshape(-1)


def conjugated_density_evolution(model, g, t):
    """The Gaussian ``e^{-t L}(sqrt(rho) v0)`` for ``v0 = g``, as a Gaussian state.

    Uses ``e^{-t L}(sqrt(rho) v0) = e^{t Tr(B)/2} sqrt(rho) e^{tP} v0`` with
    ``rho`` the invariant ``N(0, Qinf)`` density.
    """
    Qinf = _require_qinf(model)
    if model.variant != "ou":
        raise NotApplicableError("the Kolmogorov oracle applies to the OU variant")
    gt = kolmogorov_propagate_gaussian(model, g, t)
    n = model.n
    Qi = np.linalg.inv(Qinf)
    # sqrt(rho) = c exp(-x^T Qinf^{-1} x / 4)
    c = ((2 * np.pi) ** n * np.linalg.det(Qinf)) ** -0.25
    P = np.linalg.inv(gt.covariance)
    Pn = P + 0.5 * Qi
    cov = np.linalg.inv(Pn)
    mean = cov @ (P @ gt.mean)
    # complete the square for the constant factor
    const = -0.5 * gt.mean @ P @ gt.mean + 0.5 * mean @ Pn @ mean
    amp = gt.amplitude * c * np.exp(const) * np.exp(0.5 * t * model.trace_B)
    return GaussianState(mean=mean, covariance=(cov + cov.T) / 2, amplitude=float(amp))


def oracle_comparison(model, g, times, N, half_width=15.0, step=0.05, q=None):
    """Relative ``L²`` error between Galerkin propagation and the Gaussian oracle.

    The initial state ``sqrt(rho) g`` and the exact states at each time are
    expanded in Hermite functions by quadrature on ``[-half_width, half_width]^n``
    with spacing ``step``; the Galerkin trajectory starts from the expanded
    initial state.

    Returns
    -------
    list of float, one relative error per time
    """
    if model.n > 2:
        raise ResourceError("quadrature grid for the oracle is limited to n <= 2")
    q = conjugated_symbol(model) if q is None else q
    grid = np.arange(-half_width, half_width + step / 2, step)
    pts = np.stack(np.meshgrid(*([grid] * model.n), indexing="ij"), axis=-1)
    u0 = hermite_coefficients(
        gaussian_values(conjugated_density_evolution(model, g, 0.0), pts), N, grid
    )
    traj = propagate(quantize(q, N), u0, np.sort(np.asarray(times, dtype=float)))
    errs = []
    for t, u in zip(np.sort(times), traj):
        ref = hermite_coefficients(
            gaussian_values(conjugated_density_evolution(model, g, t), pts), N, grid
        )
        errs.append(float(np.linalg.norm(u - ref) / np.linalg.norm(ref)))
    return errs


def model_from_dict(data):
    """Parse the model file schema ``{n, Q, B, variant}``."""
    if not isinstance(data, dict):
        raise InputError("model document must be an object")
    for key in ("n", "Q", "B"):
        if key not in data:
            raise InputError(f"model document is missing field '{key}'")
    n = data["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InputError(f"field 'n' must be a positive integer, got {n!r}")
    mats = {}
    for key in ("Q", "B"):
        vals = data[key]
        if (
            not isinstance(vals, list)
            or len(vals) != n * n
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals)
        ):
            raise InputError(f"field '{key}' must hold {n * n} numbers in row-major order")
        mats[key] = np.array(vals, dtype=float).reshape(n, n)
    variant = data.get("variant", "ou")
    if variant not in VARIANTS:
        raise InputError(f"field 'variant' must be one of {VARIANTS}")
    return ou_build(mats["Q"], mats["B"], variant=variant)
