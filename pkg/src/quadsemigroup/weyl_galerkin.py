"""Hermite-Galerkin discretization of Weyl-quantized quadratic operators.

Each dimension uses the orthonormal Hermite functions ``h_0, ..., h_N``. With
the annihilation operator ``a = (x + d/dx)/sqrt(2)``, position and momentum
are ``x = (a + a^*)/sqrt(2)`` and ``D = -i d/dx = -i (a - a^*)/sqrt(2)``.
Quadratic operators are assembled from products computed one level above the
truncation and then cut back, so the matrices are exact Galerkin compressions
``P A P`` of the unbounded operators.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from quadsemigroup.errors import InputError, NotApplicableError, ResourceError, ShapeError
from quadsemigroup.singular_space import imag_power
from quadsemigroup.symplectic_core import hamilton_map, make_symbol, phase_vector

__all__ = [
    "DENSE_CAP",
    "DecayFit",
    "HermiteOperator",
    "PAIRING_TOL",
    "SpectrumHead",
    "commutation_defect",
    "decay_exponent",
    "defect_symbol",
    "directional_norms",
    "galerkin_eigenvalues",
    "iterated_directional_norms",
    "linear_observable",
    "multi_indices",
    "propagate",
    "quantize",
    "slope_tolerance",
    "smooth_random_state",
    "spectrum_bottom",
    "subelliptic_ratio",
    "symplectic_flow",
]

DENSE_CAP = 5000
PROPAGATE_DENSE_CAP = 200
MAX_DIM = 2_000_000
PAIRING_TOL = 1e-9


@dataclass(frozen=True)
class HermiteOperator:
    """Truncated Galerkin matrix acting on Hermite coefficient vectors.

    Coefficients are stored in C order over multi-indices
    ``(alpha_1, ..., alpha_n)`` with ``0 <= alpha_i <= N``.
    """

    n: int
    N: int
    A: sp.csr_matrix = field(repr=False)
    label: str = ""

    @property
    def D(self):
        return (self.N + 1) ** self.n

    def __matmul__(self, u):
        return self.A @ u

    def toarray(self):
        return self.A.toarray()


def _check_N(n, N, max_dim=MAX_DIM):
    if int(N) != N or N < 2:
        raise InputError(f"truncation order N must be an integer >= 2, got {N!r}")
    D = (int(N) + 1) ** n
    if D > max_dim:
        nmax = int(np.floor(max_dim ** (1.0 / n))) - 1
        raise ResourceError(f"dimension {D} exceeds cap {max_dim}; reduce N to at most {nmax}")
    return int(N)


def _ladder(K):
    """Position and momentum matrices on the first ``K`` Hermite functions."""
    off = np.sqrt(np.arange(1, K))
    a = sp.diags(off, 1, shape=(K, K), format="csr")
    x = (a + a.T) / np.sqrt(2)
    D = -1j * (a - a.T) / np.sqrt(2)
    return x.tocsr().astype(complex), D.tocsr()


def _embed(op, j, n, K):
    eye = sp.identity(K, format="csr", dtype=complex)
    out = None
    for k in range(n):
        f = op if k == j else eye
        out = f if out is None else sp.kron(out, f, format="csr")
    return out


def multi_indices(n, N):
    """Array of shape ``(D, n)`` listing multi-indices in storage order."""
    return np.array(list(itertools.product(range(N + 1), repeat=n)), dtype=int).reshape(-1, n)


def _restriction(n, K, N):
    """Storage positions of the box ``alpha_i <= N`` inside the box ``alpha_i < K``."""
    grids = np.meshgrid(*[np.arange(N + 1)] * n, indexing="ij")
    return np.ravel_multi_index(tuple(g.ravel() for g in grids), (K,) * n)


def _phase_ops(n, K):
    x, D = _ladder(K)
    return [_embed(x, j, n, K) for j in range(n)] + [_embed(D, j, n, K) for j in range(n)]


def quantize(q, N, max_dim=MAX_DIM):
    """Galerkin matrix of the Weyl quantization of ``q``.

    Every monomial ``X_i X_j`` becomes ``(X_i X_j + X_j X_i)/2`` with
    ``X = (x, D)``.
    """
    n = q.n
    N = _check_N(n, N, max_dim)
    K = N + 2
    ops = _phase_ops(n, K)
    Dk = K**n
    A = sp.csr_matrix((Dk, Dk), dtype=complex)
    M = q.M
    for i in range(2 * n):
        for j in range(i, 2 * n):
            c = M[i, j]
            if c == 0:
                continue
            prod = ops[i] @ ops[j]
            if i == j:
                A = A + c * prod
            else:
                # M is symmetric: the (i, j) and (j, i) entries share one term
                A = A + c * (prod + ops[j] @ ops[i])
    idx = _restriction(n, K, N)
    A = A[idx][:, idx].tocsr()
    A.eliminate_zeros()
    return HermiteOperator(n=n, N=N, A=A, label=q.label)


def linear_observable(X0, N, n=None):
    """Matrix of ``<x0, x> + <xi0, D>`` (bilinear in the possibly complex ``X0``)."""
    X0 = np.asarray(X0)
    if n is None:
        if X0.ndim != 1 or X0.shape[0] % 2:
            raise ShapeError("direction must have even length 2n")
        n = X0.shape[0] // 2
    X0 = phase_vector(n, X0)
    N = _check_N(n, N)
    x, D = _ladder(N + 1)
    L = sp.csr_matrix(((N + 1) ** n, (N + 1) ** n), dtype=complex)
    for j in range(n):
        if X0[j] != 0:
            L = L + X0[j] * _embed(x, j, n, N + 1)
        if X0[n + j] != 0:
            L = L + X0[n + j] * _embed(D, j, n, N + 1)
    return HermiteOperator(n=n, N=N, A=L.tocsr())


def propagate(op, u0, t_grid, dense_cap=PROPAGATE_DENSE_CAP, method="auto"):
    """Return ``exp(-t A) u0`` for every ``t`` in the sorted grid.

    Small matrices use the dense scaling-and-squaring exponential. Larger ones
    use the action of the exponential (truncated Taylor with scaling), stepping
    from one grid point to the next.

    Returns
    -------
    ndarray, shape (len(t_grid), D) or (len(t_grid), D, k) for a block ``u0``
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or np.any(t_grid < 0) or np.any(np.diff(t_grid) < 0):
        raise InputError("t_grid must be a sorted list of nonnegative times")
    u0 = np.asarray(u0, dtype=complex)
    if u0.shape[0] != op.D:
        raise ShapeError(f"state has length {u0.shape[0]}, operator size is {op.D}")
    if method == "auto":
        method = "dense" if op.D <= dense_cap else "action"
    out = np.empty((t_grid.size,) + u0.shape, dtype=complex)
    if method == "dense":
        Ad = op.A.toarray()
        for i, t in enumerate(t_grid):
            out[i] = sla.expm(-t * Ad) @ u0
        return out
    if method != "action":
        raise InputError(f"unknown propagation method {method!r}")
    u, t_prev = u0, 0.0
    for i, t in enumerate(t_grid):
        if t > t_prev:
            u = spla.expm_multiply(-(t - t_prev) * op.A, u)
        out[i] = u
        t_prev = t
    return out


def smooth_random_state(n, N, seed, decay=2.0, N_ref=None):
    """Normalized coefficients with ``|c_alpha| ∝ (1 + |alpha|)^(-decay)`` and random phases.

    The state is drawn on the box of order ``N_ref`` (default ``N``) and then
    restricted, so runs at different ``N`` share their low modes.
    """
    N_ref = N if N_ref is None else max(N, N_ref)
    rng = np.random.default_rng(seed)
    alpha = multi_indices(n, N_ref)
    phases = np.exp(2j * np.pi * rng.random(alpha.shape[0]))
    c = (1.0 + alpha.sum(axis=1)) ** (-float(decay)) * phases
    keep = np.all(alpha <= N, axis=1)
    c = c[keep]
    return c / np.linalg.norm(c)


def directional_norms(op, X0, u0, t_grid, **kwargs):
    """Samples ``||L_{X0} exp(-tA) u0|| / ||u0||`` on the grid."""
    L = linear_observable(X0, op.N, n=op.n)
    traj = propagate(op, u0, t_grid, **kwargs)
    nrm = np.linalg.norm(u0)
    return np.array([np.linalg.norm(L.A @ u) / nrm for u in traj])


def _boundary_mask(n, N, width=2):
    alpha = multi_indices(n, N)
    return np.any(alpha > N - width, axis=1)


def iterated_directional_norms(op, X_list, u0, t_grid, **kwargs):
    """Norms after applying the observables of ``X_list`` in order to ``exp(-tA) u0``.

    Returns ``(norms, unreliable)`` where ``unreliable[i]`` flags samples whose
    mass near the truncation boundary is at least 10% of the norm.
    """
    Ls = [linear_observable(X, op.N, n=op.n) for X in X_list]
    traj = propagate(op, u0, t_grid, **kwargs)
    mask = _boundary_mask(op.n, op.N)
    nrm = np.linalg.norm(u0)
    norms, flags = [], []
    for u in traj:
        w = u
        for L in Ls:
            w = L.A @ w
        total = np.linalg.norm(w)
        norms.append(total / nrm)
        flags.append(bool(np.linalg.norm(w[mask]) >= 0.1 * total))
    return np.array(norms), np.array(flags)


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of ``log(value)`` against ``log(t)`` on a window."""

    t_window: tuple
    t: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    slope: float
    intercept: float
    r_squared: float
    halved_slope: float | None = None

    def to_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r_squared,
            "window": [float(self.t_window[0]), float(self.t_window[1])],
        }


def _loglog_fit(t, v):
    lt, lv = np.log(t), np.log(v)
    slope, intercept = np.polyfit(lt, lv, 1)
    pred = slope * lt + intercept
    ss_res = np.sum((lv - pred) ** 2)
    ss_tot = np.sum((lv - lv.mean()) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(min(max(r2, 0.0), 1.0))


def decay_exponent(t, values, window=(10**-2.5, 10**-1)):
    """Fit a power law ``value ≈ C t^slope`` on the samples inside ``window``.

    The fit is repeated on the lower half of the window (in ``log t``) to
    expose window sensitivity.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if t.shape != values.shape:
        raise ShapeError("times and values must have the same length")
    lo, hi = window
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    if np.count_nonzero(sel) < 5:
        raise InputError("decay fit needs at least 5 samples inside the window")
    if np.any(values[sel] <= 0) or not np.all(np.isfinite(values[sel])):
        raise InputError("decay fit needs positive finite samples")
    ts, vs = t[sel], values[sel]
    slope, intercept, r2 = _loglog_fit(ts, vs)
    mid = np.sqrt(lo * hi)
    half = ts <= mid * (1 + 1e-12)
    halved = _loglog_fit(ts[half], vs[half])[0] if np.count_nonzero(half) >= 3 else None
    return DecayFit(
        t_window=(float(lo), float(hi)),
        t=ts,
        values=vs,
        slope=slope,
        intercept=intercept,
        r_squared=r2,
        halved_slope=halved,
    )


def slope_tolerance(index):
    """Allowed deviation of the fitted slope from ``-(2k+1)/2``."""
    if index == 0:
        return 0.1
    if index == 1:
        return 0.15
    return 0.1 * (2 * index + 1) / 2


@dataclass(frozen=True)
class SpectrumHead:
    """Bottom of the spectrum lattice of a quadratic operator."""

    eigenvalues: np.ndarray
    omega0: float
    mu0: complex
    frequencies: np.ndarray
    multiplicities: list


def _cluster(vals, tol):
    groups = []
    for v in vals:
        for g in groups:
            if abs(g[0] - v) <= tol:
                g.append(v)
                break
        else:
            groups.append([v])
    return [(complex(np.mean(g)), len(g)) for g in groups]


def spectrum_bottom(q, m=10, pairing_tol=PAIRING_TOL):
    """Lowest ``m`` elements of ``{sum (r_λ + 2 k_λ)(-iλ)}`` and ``omega0``.

    Eigenvalues ``λ`` of the Hamilton map with ``Re(-iλ) > 0`` are kept; an
    eigenvalue of algebraic multiplicity ``r`` contributes ``r`` independent
    lattice indices, which reproduces the multiplicities of the operator
    spectrum.
    """
    F = hamilton_map(q).F
    lam = np.linalg.eigvals(F)
    z = -1j * lam
    if np.any(np.abs(z.real) <= pairing_tol * (1 + np.abs(z))):
        raise NotApplicableError("eigenvalue of the Hamilton map on the pairing boundary")
    pos = z[z.real > 0]
    if pos.size != q.n:
        raise NotApplicableError(f"expected {q.n} eigenvalues in the right half plane, got {pos.size}")
    tol = 1e-6 * (1 + np.linalg.norm(F, 2))
    clusters = _cluster(pos, tol)
    freqs = np.concatenate([[c] * r for c, r in clusters])
    mu0 = complex(np.sum(freqs))
    start = tuple([0] * freqs.size)
    seen = {start}
    heap = [(mu0.real, mu0.imag, start)]
    out = []
    while heap and len(out) < m:
        re, im, k = heapq.heappop(heap)
        out.append(complex(re, im))
        for i in range(freqs.size):
            nk = list(k)
            nk[i] += 1
            nk = tuple(nk)
            if nk not in seen:
                seen.add(nk)
                val = mu0 + 2 * np.dot(nk, freqs)
                heapq.heappush(heap, (val.real, val.imag, nk))
    return SpectrumHead(
        eigenvalues=np.array(out),
        omega0=float(mu0.real),
        mu0=mu0,
        frequencies=freqs,
        multiplicities=[r for _, r in clusters],
    )


def galerkin_eigenvalues(op, m=10, dense_cap=1500):
    """The ``m`` Galerkin eigenvalues of smallest real part.

    Dense for small matrices, shift-invert Arnoldi around zero otherwise.
    """
    if op.D <= dense_cap:
        w = np.linalg.eigvals(op.A.toarray())
    else:
        k = min(op.D - 2, max(3 * m, m + 10))
        # fixed start vector keeps reports byte-identical between runs
        v0 = np.full(op.D, 1.0 / np.sqrt(op.D), dtype=complex)
        w = spla.eigs(
            op.A.tocsc(), k=k, sigma=0.0, which="LM", v0=v0, return_eigenvectors=False, tol=1e-12
        )
    order = np.lexsort((w.imag, w.real))
    return w[order][:m]


def symplectic_flow(q, t):
    """Matrix ``T_t = 𝒥 exp(2itF) 𝒥^{-1}`` with ``𝒥(x, xi) = (xi, -x)``."""
    n = q.n
    F = hamilton_map(q).F
    eye, zero = np.eye(n), np.zeros((n, n))
    Jc = np.block([[zero, eye], [-eye, zero]])
    return Jc @ sla.expm(2j * t * F) @ np.linalg.inv(Jc)


def commutation_defect(q, X0, t, N, input_levels=None, dense_cap=PROPAGATE_DENSE_CAP):
    """Operator norm of ``L_{X0} exp(-tA) - exp(-tA) L_{T_t X0}`` on low input modes.

    The input space is spanned by interior Hermite modes (``alpha_i <= N - 2``)
    of total degree ``|alpha| <= input_levels``, by default ``N // 2``, so the
    input set grows with ``N`` while staying clear of the truncation edge.
    Outputs are measured on the whole truncated space.
    """
    op = quantize(q, N)
    n = q.n
    X0 = np.asarray(X0, dtype=complex)
    Y0 = symplectic_flow(q, t) @ X0
    L = linear_observable(X0, op.N, n=n).A
    LT = linear_observable(Y0, op.N, n=n).A
    alpha = multi_indices(n, op.N)
    levels = op.N // 2 if input_levels is None else int(input_levels)
    keep = np.all(alpha <= op.N - 2, axis=1) & (alpha.sum(axis=1) <= levels)
    cols = np.flatnonzero(keep)
    if op.D <= dense_cap:
        P = sp.identity(op.D, format="csc", dtype=complex)[:, cols].toarray()
        EP = propagate(op, P, [t], dense_cap=dense_cap)[0]
        ELT = propagate(op, LT @ P, [t], dense_cap=dense_cap)[0]
        return float(np.linalg.norm(L @ EP - ELT, 2))
    # matrix-free largest singular value: each product propagates one vector
    A = op.A
    AH = A.conj().T.tocsr()
    LH, LTH = L.conj().T.tocsr(), LT.conj().T.tocsr()

    def matvec(v):
        u = np.zeros(op.D, dtype=complex)
        u[cols] = np.ravel(v)
        w = spla.expm_multiply(-t * A, np.column_stack([u, LT @ u]))
        return L @ w[:, 0] - w[:, 1]

    def rmatvec(w):
        w = np.ravel(w)
        z = spla.expm_multiply(-t * AH, np.column_stack([LH @ w, w]))
        return (z[:, 0] - LTH @ z[:, 1])[cols]

    lin = spla.LinearOperator(
        (op.D, cols.size), matvec=matvec, rmatvec=rmatvec, dtype=complex
    )
    s = spla.svds(lin, k=1, tol=1e-6, return_singular_vectors=False, random_state=0)
    return float(s[0])


def defect_symbol(q, k):
    """The symbol ``r_k(X) = sum_{j<=k} Re q((Im F)^j X)`` as a real quadratic symbol."""
    ImF = hamilton_map(q).imag
    ReM = q.M.real
    R = sum(imag_power(ImF, j).T @ ReM @ imag_power(ImF, j) for j in range(k + 1))
    return make_symbol(q.n, (R + R.T) / 2, label=f"r_{k}")


def _separable_factors(R, n):
    """1D coefficient blocks of ``R`` if it does not couple different dimensions."""
    blocks = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            sub = R[np.ix_([i, n + i], [j, n + j])]
            if np.any(sub != 0):
                return None
        blocks.append(R[np.ix_([i, n + i], [i, n + i])])
    return blocks


def _spectral_apply(op_symbol, N, power, u_block, dense_cap=DENSE_CAP):
    """Apply ``(1 + op)^power`` to the columns of ``u_block``.

    Uses a Kronecker eigendecomposition when the symbol does not couple
    dimensions, a dense symmetric one otherwise.
    """
    n = op_symbol.n
    R = op_symbol.M.real
    blocks = _separable_factors(R, n)
    if blocks is not None:
        evecs, evals = [], []
        for blk in blocks:
            A1 = quantize(make_symbol(1, blk), N).toarray()
            A1 = ((A1 + A1.conj().T) / 2).real
            w, U = np.linalg.eigh(A1)
            evals.append(w)
            evecs.append(U)
        total = np.zeros((N + 1,) * n)
        for i, w in enumerate(evals):
            shape = [1] * n
            shape[i] = N + 1
            total = total + w.reshape(shape)
        lam = 1.0 + total
        if lam.min() < 0.5:
            raise NotApplicableError("1 + r_k^w has an eigenvalue below 1/2: truncation artifact")
        out = np.empty_like(u_block, dtype=complex)
        for c in range(u_block.shape[1]):
            T = u_block[:, c].reshape((N + 1,) * n)
            for i, U in enumerate(evecs):
                T = np.moveaxis(np.tensordot(U.T, T, axes=([1], [i])), 0, i)
            T = T * lam**power
            for i, U in enumerate(evecs):
                T = np.moveaxis(np.tensordot(U, T, axes=([1], [i])), 0, i)
            out[:, c] = T.reshape(-1)
        return out
    op = quantize(op_symbol, N)
    if op.D > dense_cap:
        raise ResourceError(
            f"dense fractional power of size {op.D} exceeds dense_cap {dense_cap}; reduce N"
        )
    A = op.toarray()
    A = ((A + A.conj().T) / 2).real
    w, U = np.linalg.eigh(A)
    lam = 1.0 + w
    if lam.min() < 0.5:
        raise NotApplicableError("1 + r_k^w has an eigenvalue below 1/2: truncation artifact")
    return U @ ((lam**power)[:, None] * (U.T @ u_block))


def subelliptic_ratio(
    q, k, ensemble_size, N, seed=0, decay=3.0, N_ref=None, k0=None, power=None
):
    """Maximum of ``||Λ u|| / (||A u|| + ||u||)`` over random smooth states.

    Parameters
    ----------
    q : QuadraticSymbol
    k : int or "global"
        ``"global"`` uses ``<(x, D)>^{2/(2 k0 + 1)}``, built from the doubled
        harmonic oscillator ``1 + |x|^2 + |D|^2`` which is diagonal. An
        integer ``k`` uses ``(1 + r_k^w)^power`` with ``power = 1/2`` for
        ``k = 0`` and ``1/(2k+1)`` otherwise.
    ensemble_size : int
    N : int
    seed : int
    decay : float
        Coefficient decay ``(1 + |alpha|)^(-decay)`` of the random states.
    N_ref : int, optional
        Box on which states are drawn before restriction to ``N``.
    k0 : int, optional
        Required for ``"global"``.

    Returns
    -------
    dict with ``max``, ``ratios`` (array) and ``power``.
    """
    n = q.n
    N_ref = N if N_ref is None else max(N, N_ref)
    A = quantize(q, N).A
    states = np.column_stack(
        [smooth_random_state(n, N, seed + i, decay=decay, N_ref=N_ref) for i in range(ensemble_size)]
    )
    if k == "global":
        if k0 is None:
            raise InputError("global subelliptic ratio needs k0")
        p = 2.0 / (2 * k0 + 1) if power is None else power
        alpha = multi_indices(n, N)
        weight = (1.0 + np.sum(2 * alpha + 1, axis=1)) ** (p / 2)
        Lu = weight[:, None] * states
    else:
        k = int(k)
        p = (0.5 if k == 0 else 1.0 / (2 * k + 1)) if power is None else power
        Lu = _spectral_apply(defect_symbol(q, k), N, p, states)
    num = np.linalg.norm(Lu, axis=0)
    den = np.linalg.norm(A @ states, axis=0) + np.linalg.norm(states, axis=0)
    ratios = num / den
    return {"max": float(ratios.max()), "ratios": ratios, "power": float(p)}
