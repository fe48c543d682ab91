"""Time-dependent multiplier ``Q_t`` and the matrix inequalities it satisfies.

With ``M_j(X) = Re q((Im F)^j X)`` and
``N_j(X) = 2 Re q((Im F)^j X, (Im F)^{j+1} X)`` the multiplier is

    Q_t = sum_{j<=k0+1} a_j t^{2j+1} M_j - sum_{j<=k0} b_j t^{2j+2} N_j

with coefficients from a backward recursion started at ``a_{k0+1} = 1/c1``.
Every statement about it is a real symmetric matrix inequality, checked here
by eigenvalue computations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky, eigh, eigvalsh

from quadsemigroup.errors import DegenerateDirectionError, InputError, NotApplicableError
from quadsemigroup.singular_space import defect_forms, direction_index, imag_power
from quadsemigroup.symplectic_core import hamilton_map, make_symbol, poisson_bracket

__all__ = [
    "C1_FLOOR",
    "DissipationResult",
    "MultiplierCoefficients",
    "TimeQuadraticForm",
    "assemble_Qt",
    "cauchy_schwarz_margin",
    "default_grid",
    "directional_lower_bound",
    "explicit_constant",
    "explicit_constant_log10",
    "hamilton_flow_bracket",
    "multiplier_coefficients",
    "recursion_residual",
    "sign_margins",
    "time_form",
    "verify_lower_bound",
    "verify_dissipation",
]

C1_FLOOR = 1.0


def _sym(A):
    return (A + A.T) / 2


def default_grid(count=50, lo=1e-4, hi=1.0):
    """Log-spaced grid in ``(0, 1]`` used by the multiplier checks."""
    return np.logspace(np.log10(lo), np.log10(hi), count)


@dataclass(frozen=True)
class MultiplierCoefficients:
    """Constants ``c0``, ``c1`` and coefficients ``a_0..a_{k0+1}``, ``b_0..b_{k0}``."""

    k0: int
    c0: float
    c1: float
    a: np.ndarray
    b: np.ndarray


def _backward_recursion(k0, c1, mutate=False):
    a = np.zeros(k0 + 2)
    b = np.zeros(k0 + 1)
    a[k0 + 1] = 1.0 / c1
    b[k0] = (2.0 / 3.0) * (1.0 + (2 * k0 + 4) * a[k0 + 1])
    a[k0] = 2.0 * b[k0] ** 2 / a[k0 + 1]
    # the mutation flag flips one sign and exists only for the self-test
    sign = -1.0 if mutate else 1.0
    for j in range(k0, 0, -1):
        gap = a[j] - (2 * j + 2) * b[j]
        b[j - 1] = (2.0 / 3.0) * (
            2.0 + c1 + (2 * j + 1) * a[j] + b[j] ** 2 + sign * 2.0 * gap**2 / b[j]
        )
        a[j - 1] = 8.0 * b[j - 1] ** 2 / a[j]
    return a, b


def recursion_residual(coeffs):
    """Largest residual of the defining identities of the coefficients."""
    k0, c1, a, b = coeffs.k0, coeffs.c1, coeffs.a, coeffs.b
    res = [
        a[k0 + 1] - 1.0 / c1,
        b[k0] - (2.0 / 3.0) * (1.0 + (2 * k0 + 4) * a[k0 + 1]),
        a[k0] - 2.0 * b[k0] ** 2 / a[k0 + 1],
    ]
    for j in range(k0, 0, -1):
        gap = a[j] - (2 * j + 2) * b[j]
        res.append(
            b[j - 1]
            - (2.0 / 3.0) * (2.0 + c1 + (2 * j + 1) * a[j] + b[j] ** 2 + 2.0 * gap**2 / b[j])
        )
        res.append(a[j - 1] - 8.0 * b[j - 1] ** 2 / a[j])
    return float(np.max(np.abs(res)))


def sign_margins(coeffs):
    """Values ``a_j - (2j+2) b_j`` for ``j = 0..k0``; all must be positive."""
    j = np.arange(coeffs.k0 + 1)
    return coeffs.a[: coeffs.k0 + 1] - (2 * j + 2) * coeffs.b


def _building_blocks(q, k0):
    """Matrices ``M_0..M_{k0+2}``, ``N_0..N_{k0+1}`` and the ``(j, j+2)`` polarizations."""
    ImF = hamilton_map(q).imag
    ReM = q.M.real
    P = [imag_power(ImF, j) for j in range(k0 + 4)]
    Ms = [_sym(P[j].T @ ReM @ P[j]) for j in range(k0 + 3)]
    Ns = [_sym(2.0 * P[j].T @ ReM @ P[j + 1]) for j in range(k0 + 2)]
    Ps = [_sym(P[j].T @ ReM @ P[j + 2]) for j in range(k0 + 1)]
    return Ms, Ns, Ps


def multiplier_coefficients(q, chain, c1_floor=C1_FLOOR, mutate=False):
    """Compute ``c0``, ``c1`` and the recursion coefficients.

    ``c1`` is the largest generalized eigenvalue of ``(M_{k0+2}, R_{k0})``,
    floored at ``c1_floor``.

    Parameters
    ----------
    q : QuadraticSymbol
    chain : SubspaceChain
        Must have a trivial singular space.
    c1_floor : float
    mutate : bool
        Flip one sign in the recursion. Only for the mutation self-test.
    """
    if not chain.singular_space_trivial:
        raise NotApplicableError("multiplier requires a trivial singular space")
    R_list, c0 = defect_forms(q, chain)
    k0 = chain.k0
    if c0 <= 0:
        raise InputError("R_k0 is not positive definite")
    Ms, _, _ = _building_blocks(q, k0)
    gen = eigvalsh(Ms[k0 + 2], R_list[k0])
    c1 = max(float(gen[-1]), c1_floor)
    a, b = _backward_recursion(k0, c1, mutate=mutate)
    return MultiplierCoefficients(k0=k0, c0=float(c0), c1=c1, a=a, b=b)


@dataclass(frozen=True)
class TimeQuadraticForm:
    """The symbol, its coefficients and the building-block matrices of ``Q_t``."""

    q: object
    coeffs: MultiplierCoefficients
    M: list = field(repr=False)
    N: list = field(repr=False)
    P2: list = field(repr=False)


def time_form(q, chain, coeffs=None, **kwargs):
    """Bundle everything needed to evaluate ``Q_t`` and its derived forms."""
    if coeffs is None:
        coeffs = multiplier_coefficients(q, chain, **kwargs)
    Ms, Ns, Ps = _building_blocks(q, coeffs.k0)
    return TimeQuadraticForm(q=q, coeffs=coeffs, M=Ms, N=Ns, P2=Ps)


def assemble_Qt(form, t):
    """Return ``(Q_t, dQ_t/dt)`` as real symmetric matrices."""
    if t < 0:
        raise InputError("t must be nonnegative")
    k0, a, b = form.coeffs.k0, form.coeffs.a, form.coeffs.b
    Q = np.zeros_like(form.M[0])
    dQ = np.zeros_like(Q)
    for j in range(k0 + 2):
        Q += a[j] * t ** (2 * j + 1) * form.M[j]
        dQ += a[j] * (2 * j + 1) * t ** (2 * j) * form.M[j]
    for j in range(k0 + 1):
        Q -= b[j] * t ** (2 * j + 2) * form.N[j]
        dQ -= b[j] * (2 * j + 2) * t ** (2 * j + 1) * form.N[j]
    return Q, dQ


def _lower_sum(form, t):
    a = form.coeffs.a
    return sum(a[j] * t ** (2 * j + 1) * form.M[j] for j in range(form.coeffs.k0 + 1))


def _lower_bound_factor(form):
    """Blocks ``W_j = G (Im F)^j`` with ``Re M = G^T G`` and the Cholesky factor of the coefficient matrix.

    ``Q_t - 1/4 sum_{j<=k0} a_j t^{2j+1} M_j = W^T (D_t T D_t ⊗ I) W`` with
    ``D_t = diag(t^{j+1/2})`` and ``T`` tridiagonal: diagonal ``3/4 a_j``
    (``a_{k0+1}`` last), off-diagonal ``-b_j``. Returns ``None`` when ``T``
    is not positive definite.
    """
    k0, a, b = form.coeffs.k0, form.coeffs.a, form.coeffs.b
    w, U = np.linalg.eigh(form.q.M.real)
    G = np.sqrt(np.clip(w, 0.0, None))[:, None] * U.T
    ImF = hamilton_map(form.q).imag
    W = [G @ imag_power(ImF, j) for j in range(k0 + 2)]
    diag = a[: k0 + 2].copy()
    diag[: k0 + 1] *= 0.75
    T = np.diag(diag) - np.diag(b, 1) - np.diag(b, -1)
    try:
        L = cholesky(T, lower=True)
    except LinAlgError:
        return None
    return W, L


def _factored_margin(W, L, t):
    m = len(W)
    powers = t ** (np.arange(m) + 0.5)
    Y = np.vstack([sum(L[j, i] * powers[j] * W[j] for j in range(i, m)) for i in range(m)])
    if Y.shape[0] < Y.shape[1]:
        return 0.0
    return float(np.linalg.svd(Y, compute_uv=False)[-1] ** 2)


def verify_lower_bound(form, t_grid=None):
    """Minimum over the grid of ``lambda_min(Q_t - 1/4 sum a_j t^{2j+1} M_j)``.

    When the coefficient matrix of :func:`_lower_bound_factor` is positive
    definite the margin is ``sigma_min^2`` of the factored form, which keeps
    its accuracy when the coefficients span many orders of magnitude; the
    direct eigenvalue is reported as ``direct_margin``. Returns a dict with
    ``margin``, ``worst_t``, ``relative_margin`` (margin divided by
    ``t * (1 + ||Q_t||)``), ``direct_margin`` and ``route``.
    """
    t_grid = default_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    factor = _lower_bound_factor(form)
    worst, worst_t, worst_rel, worst_direct = np.inf, None, np.inf, np.inf
    for t in t_grid:
        Q, _ = assemble_Qt(form, t)
        direct = eigvalsh(Q - 0.25 * _lower_sum(form, t))[0]
        lam = direct if factor is None else _factored_margin(*factor, t)
        rel = lam / (t * (1.0 + np.linalg.norm(Q, 2)))
        if lam < worst:
            worst, worst_t = lam, float(t)
        worst_rel = min(worst_rel, rel)
        worst_direct = min(worst_direct, direct)
    return {
        "margin": float(worst),
        "worst_t": worst_t,
        "relative_margin": float(worst_rel),
        "direct_margin": float(worst_direct),
        "route": "direct" if factor is None else "factored",
    }


def hamilton_flow_bracket(form, t, check=True):
    """Matrix of ``{Im q, Q_t}`` from its closed form.

    With ``check`` the result is compared with the Poisson bracket computed
    from Hamilton maps; the relative discrepancy is returned as the second
    element.
    """
    k0, a, b = form.coeffs.k0, form.coeffs.a, form.coeffs.b
    H = np.zeros_like(form.M[0])
    for j in range(k0 + 2):
        H += 2.0 * a[j] * t ** (2 * j + 1) * form.N[j]
    for j in range(k0 + 1):
        H -= 4.0 * b[j] * t ** (2 * j + 2) * (form.M[j + 1] + form.P2[j])
    if not check:
        return H, None
    Q, _ = assemble_Qt(form, t)
    q = form.q
    br = poisson_bracket(make_symbol(q.n, q.M.imag), make_symbol(q.n, Q)).M
    if np.max(np.abs(br.imag)) > 1e-12 * (1 + np.max(np.abs(br.real))):
        raise AssertionError("bracket of real forms must be real")
    diff = np.max(np.abs(H - br.real))
    scale = 1.0 + max(np.max(np.abs(H)), np.max(np.abs(br.real)))
    return H, float(diff / scale)


def explicit_constant(coeffs):
    """Sufficient constant ``c1 + 1 + a0 + b0^2 + 2 (a0 - 2 b0)^2 / b0``."""
    a0, b0 = coeffs.a[0], coeffs.b[0]
    with np.errstate(over="ignore"):
        return float(coeffs.c1 + 1.0 + a0 + b0**2 + 2.0 * (a0 - 2.0 * b0) ** 2 / b0)


def explicit_constant_log10(coeffs):
    """``log10`` of the explicit constant, finite even when the constant overflows."""
    a0, b0, c1 = coeffs.a[0], coeffs.b[0], coeffs.c1
    if not (a0 > 0 and b0 > 0):
        return float("nan")
    gap = abs(a0 - 2.0 * b0)
    logs = [np.log(c1), 0.0, np.log(a0), 2.0 * np.log(b0)]
    if gap > 0:
        logs.append(np.log(2.0) + 2.0 * np.log(gap) - np.log(b0))
    return float(np.logaddexp.reduce(logs) / np.log(10.0))


@dataclass(frozen=True)
class DissipationResult:
    """Outcome of the dissipation inequality check.

    ``C_min`` is ``inf`` when no finite constant works (a violation on the
    kernel of ``M_0``); ``worst_t`` and ``witness`` then locate the failure.
    ``C_expl`` overflows to ``inf`` for large ``k0``; ``log10_C_expl`` stays
    finite.
    """

    C_min: float
    C_expl: float
    log10_C_expl: float
    worst_t: float | None
    margin_at_expl: float
    witness: np.ndarray | None = field(default=None, repr=False)

    @property
    def admissible(self):
        # an overflowed C_expl still exceeds every finite C_min: its summands
        # are positive when b0 > 0 and one of them alone overflowed
        if not self.C_expl > 0:
            return False
        return bool(np.isfinite(self.C_min) and self.C_min <= self.C_expl * (1 + 1e-12))


def _dissipation_terms(form, t, Ms, Ns, Ps):
    """Coefficient/matrix pairs whose sum is ``dQ_t/dt + 1/2 {Im q, Q_t}``."""
    k0, a, b = form.coeffs.k0, form.coeffs.a, form.coeffs.b
    terms = []
    for j in range(k0 + 2):
        terms.append((a[j] * (2 * j + 1) * t ** (2 * j), Ms[j]))
        terms.append((a[j] * t ** (2 * j + 1), Ns[j]))
    for j in range(k0 + 1):
        terms.append((-b[j] * (2 * j + 2) * t ** (2 * j + 1), Ns[j]))
        terms.append((-2.0 * b[j] * t ** (2 * j + 2), Ms[j + 1] + Ps[j]))
    return terms


def _blocks_in_kernel_basis(form, tol):
    """Eigenbasis ``V`` of ``M_0`` and the building blocks expressed in it.

    In this basis ``M_0`` is diagonal with its kernel entries set to exactly
    zero, so every term carrying a factor ``M_0`` vanishes identically on the
    kernel block. This keeps the huge leading coefficients from polluting the
    kernel block with roundoff.
    """
    q, k0 = form.q, form.coeffs.k0
    w, V = eigh(form.M[0])
    kernel = w <= tol * (1.0 + abs(w[-1]))
    w = np.where(kernel, 0.0, w)
    order = np.argsort(~kernel, kind="stable")
    w, V, kernel = w[order], V[:, order], kernel[order]
    ImF = V.T @ hamilton_map(q).imag @ V
    M0 = np.diag(w)
    P = [imag_power(ImF, j) for j in range(k0 + 4)]
    Ms = [_sym(P[j].T @ M0 @ P[j]) for j in range(k0 + 3)]
    Ns = [_sym(2.0 * P[j].T @ M0 @ P[j + 1]) for j in range(k0 + 2)]
    Ps = [_sym(P[j].T @ M0 @ P[j + 2]) for j in range(k0 + 1)]
    return V, w, kernel, Ms, Ns, Ps


def _min_constant(D, Dabs, w, kernel, tol):
    """Least ``C`` with ``D - C diag(w) ⪯ 0`` (``inf`` if none) and a failing vector.

    ``Dabs`` bounds the magnitude of the summands of ``D`` entrywise and sets
    the roundoff scale of each block.
    """
    K = np.flatnonzero(kernel)
    R = np.flatnonzero(~kernel)
    if K.size == 0:
        return float(eigvalsh(D, np.diag(w))[-1]), None
    DKK = _sym(D[np.ix_(K, K)])
    dK, UK = eigh(DKK)
    scale_K = 1.0 + np.max(Dabs[np.ix_(K, K)])
    if dK[-1] > tol * scale_K:
        vec = np.zeros(D.shape[0])
        vec[K] = UK[:, -1]
        return np.inf, vec
    if R.size == 0:
        return 0.0, None
    DRR = _sym(D[np.ix_(R, R)])
    DRK = D[np.ix_(R, K)]
    neg = dK < -tol * scale_K
    # kernel directions where D vanishes must not couple to the range
    flat = UK[:, ~neg]
    scale_RK = 1.0 + np.max(Dabs[np.ix_(R, K)])
    if flat.shape[1] and np.max(np.abs(DRK @ flat)) > np.sqrt(tol) * scale_RK:
        vec = np.zeros(D.shape[0])
        vec[K] = flat[:, 0]
        return np.inf, vec
    G = DRK @ UK[:, neg]
    schur = DRR - G @ np.diag(1.0 / dK[neg]) @ G.T
    return float(eigvalsh(_sym(schur), np.diag(w[R]))[-1]), None


def verify_dissipation(form, t_grid=None, tol=1e-13):
    """Smallest ``C`` with ``dQ_t/dt + 1/2 {Im q, Q_t} - C M_0 ⪯ 0`` on the grid.

    The generalized eigenproblem is deflated on ``Ker M_0``: a Schur
    complement removes the kernel block, which must itself be negative
    semidefinite. All matrices are formed in an eigenbasis of ``M_0`` (see
    ``_blocks_in_kernel_basis``); the witness vector is returned in the
    original coordinates.
    """
    t_grid = default_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    C_expl = explicit_constant(form.coeffs)
    V, w, kernel, Ms, Ns, Ps = _blocks_in_kernel_basis(form, tol)
    C_min, worst_t, witness = -np.inf, None, None
    margin_expl = -np.inf
    for t in t_grid:
        terms = _dissipation_terms(form, t, Ms, Ns, Ps)
        D = _sym(sum(c * A for c, A in terms))
        Dabs = sum(abs(c) * np.abs(A) for c, A in terms)
        C, vec = _min_constant(D, Dabs, w, kernel, tol)
        if C > C_min:
            C_min, worst_t = C, float(t)
            witness = None if vec is None else V @ vec
        if np.isfinite(C_expl):
            lam = eigvalsh(D - C_expl * np.diag(w))[-1] / (1.0 + np.linalg.norm(D, 2))
            margin_expl = max(margin_expl, lam)
    return DissipationResult(
        C_min=float(C_min),
        C_expl=C_expl,
        log10_C_expl=explicit_constant_log10(form.coeffs),
        worst_t=worst_t,
        margin_at_expl=float(margin_expl),
        witness=witness,
    )


def directional_lower_bound(form, chain, X0, t):
    """Largest ``c`` with ``Q_t ⪰ (c/|X0|^2) t^{2k+1} X0 X0^T``, ``k`` the index of ``X0``."""
    X0 = np.asarray(X0, dtype=float)
    nrm2 = X0 @ X0
    if nrm2 == 0:
        raise DegenerateDirectionError("directional bound of the zero vector is undefined")
    k = direction_index(chain, X0)
    Q, _ = assemble_Qt(form, t)
    w = eigvalsh(Q)
    if w[0] <= 0:
        return 0.0
    quad = X0 @ np.linalg.solve(Q, X0)
    return float(nrm2 / (t ** (2 * k + 1) * quad))


def cauchy_schwarz_margin(form, j, eps):
    """``lambda_min`` of ``M_j/eps + eps M_{j+1} ∓ N_j``; nonnegative when the bound holds."""
    base = form.M[j] / eps + eps * form.M[j + 1]
    return float(min(eigvalsh(base - form.N[j])[0], eigvalsh(base + form.N[j])[0]))
