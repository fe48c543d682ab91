"""Quadratic symbols, the symplectic form, Hamilton maps and Poisson brackets.

Phase-space vectors are ordered ``(x_1, ..., x_n, xi_1, ..., xi_n)``. A
quadratic symbol is stored through its complex symmetric coefficient
matrix ``M`` so that ``q(X) = X^T M X``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from quadsemigroup.errors import ConsistencyError, InputError, ShapeError

__all__ = [
    "HamiltonMap",
    "QuadraticSymbol",
    "eps_psd",
    "eps_sym",
    "evaluate",
    "hamilton_map",
    "make_symbol",
    "phase_vector",
    "poisson_bracket",
    "polarized",
    "symbol_from_dict",
    "symbol_to_dict",
    "symplectic_form",
    "symplectic_matrix",
]


def eps_psd(M):
    """Accretivity tolerance ``1e-10 * (1 + ||M||_2)``."""
    return 1e-10 * (1.0 + np.linalg.norm(M, 2))


def eps_sym(F):
    """Consistency tolerance ``1e-12 * (1 + ||F||_2)``."""
    return 1e-12 * (1.0 + np.linalg.norm(F, 2))


def symplectic_matrix(n):
    """Matrix ``J = [[0, -I], [I, 0]]`` of the form ``sigma(X, Y) = X^T J Y``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def phase_vector(n, coords):
    """Validate and return a phase-space vector of length ``2n``.

    Complex coordinates are kept complex; real ones are returned as float.
    """
    X = np.asarray(coords)
    if X.ndim != 1 or X.shape[0] != 2 * n:
        raise ShapeError(f"phase vector must have length {2 * n}, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InputError("phase vector has non-finite entries")
    if np.iscomplexobj(X):
        return X.astype(complex)
    return X.astype(float)


@dataclass(frozen=True)
class QuadraticSymbol:
    """Complex quadratic form ``q(X) = X^T M X`` on ``R^{2n}``.

    Attributes
    ----------
    n : int
        Number of position variables.
    M : ndarray, shape (2n, 2n)
        Complex symmetric coefficient matrix.
    accretive : bool
        Whether ``Re M`` is positive semidefinite up to :func:`eps_psd`.
    label : str
        Free-form name used in reports.
    """

    n: int
    M: np.ndarray = field(repr=False)
    accretive: bool
    label: str = ""

    @property
    def real_part(self) -> "QuadraticSymbol":
        return make_symbol(self.n, self.M.real, label=f"Re {self.label}".strip())

    @property
    def imag_part(self) -> "QuadraticSymbol":
        return make_symbol(self.n, self.M.imag, label=f"Im {self.label}".strip())

    def __call__(self, X):
        return evaluate(self, X)

    def __add__(self, other):
        if not isinstance(other, QuadraticSymbol):
            return NotImplemented
        _check_same_n(self, other)
        return make_symbol(self.n, self.M + other.M)

    def __sub__(self, other):
        if not isinstance(other, QuadraticSymbol):
            return NotImplemented
        _check_same_n(self, other)
        return make_symbol(self.n, self.M - other.M)

    def __mul__(self, scalar):
        if isinstance(scalar, QuadraticSymbol):
            return NotImplemented
        return make_symbol(self.n, complex(scalar) * self.M)

    __rmul__ = __mul__


@dataclass(frozen=True)
class HamiltonMap:
    """Hamilton map ``F`` with ``q(X, Y) = sigma(X, F Y)``."""

    n: int
    F: np.ndarray = field(repr=False)

    @property
    def real(self):
        return ((self.F + self.F.conj()) / 2).real

    @property
    def imag(self):
        return ((self.F - self.F.conj()) / 2j).real


def _check_same_n(q1, q2):
    if q1.n != q2.n:
        raise ShapeError(f"symbols live in different dimensions: {q1.n} vs {q2.n}")


def make_symbol(n, M_raw, label=""):
    """Build a quadratic symbol from a raw ``2n x 2n`` coefficient matrix.

    The matrix is symmetrized, since only its symmetric part is seen by the
    quadratic form.

    Parameters
    ----------
    n : int
        Number of position variables.
    M_raw : array_like, shape (2n, 2n)
        Real or complex coefficients.
    label : str, optional
        Name carried into reports.

    Returns
    -------
    QuadraticSymbol
    """
    if int(n) != n or n < 1:
        raise InputError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    M_raw = np.asarray(M_raw, dtype=complex)
    if M_raw.shape != (2 * n, 2 * n):
        raise ShapeError(f"coefficient matrix must be {2 * n}x{2 * n}, got {M_raw.shape}")
    if not np.all(np.isfinite(M_raw)):
        raise InputError("coefficient matrix has non-finite entries")
    M = (M_raw + M_raw.T) / 2
    M.setflags(write=False)
    lam_min = np.linalg.eigvalsh(M.real)[0]
    return QuadraticSymbol(n=n, M=M, accretive=bool(lam_min >= -eps_psd(M)), label=label)


def evaluate(q, X):
    """Return ``q(X) = X^T M X`` (bilinear, no complex conjugation)."""
    X = phase_vector(q.n, X)
    return complex(X @ q.M @ X)


def polarized(q, X, Y):
    """Return the polarized form ``q(X, Y) = X^T M Y``."""
    X = phase_vector(q.n, X)
    Y = phase_vector(q.n, Y)
    return complex(X @ q.M @ Y)


def symplectic_form(X, Y):
    """Return ``sigma(X, Y) = <xi, y> - <x, eta>``."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape != Y.shape or X.ndim != 1 or X.shape[0] % 2:
        raise ShapeError(f"incompatible phase vectors {X.shape} and {Y.shape}")
    n = X.shape[0] // 2
    return X @ symplectic_matrix(n) @ Y


def hamilton_map(q):
    """Compute the Hamilton map of ``q`` from the Hessian blocks of ``M``.

    The block formula is cross-checked against ``F = -J M``.

    Raises
    ------
    ConsistencyError
        If the two routes differ, or ``J F`` fails to be symmetric.
    """
    n = q.n
    M = q.M
    Mxx, Mxk = M[:n, :n], M[:n, n:]
    Mkx, Mkk = M[n:, :n], M[n:, n:]
    F = np.block([[Mkx, Mkk], [-Mxx, -Mxk]])
    J = symplectic_matrix(n)
    tol = eps_sym(F)
    if np.max(np.abs(F - (-J @ M)), initial=0.0) > tol:
        raise ConsistencyError("block formula and -J M disagree")
    JF = J @ F
    if np.max(np.abs(JF - JF.T), initial=0.0) > tol:
        raise ConsistencyError("Hamilton map is not skew-symmetric for sigma")
    return HamiltonMap(n=n, F=F)


def poisson_bracket(q1, q2, label=""):
    """Poisson bracket ``{q1, q2} = d_xi q1 . d_x q2 - d_x q1 . d_xi q2``.

    Computed from the commutator of Hamilton maps (the bracket has Hamilton
    map ``-2 [F1, F2]``) and cross-checked against ``sigma(grad q1, grad q2)``
    with ``grad q = 2 M X``.
    """
    _check_same_n(q1, q2)
    n = q1.n
    J = symplectic_matrix(n)
    F1 = hamilton_map(q1).F
    F2 = hamilton_map(q2).F
    Fb = -2.0 * (F1 @ F2 - F2 @ F1)
    Mb = J @ Fb
    Mb = (Mb + Mb.T) / 2
    Mg = 4.0 * q1.M @ J @ q2.M
    Mg = (Mg + Mg.T) / 2
    scale = 1.0 + np.linalg.norm(q1.M, 2) * np.linalg.norm(q2.M, 2)
    if np.max(np.abs(Mb - Mg)) > 1e-12 * scale:
        raise ConsistencyError("commutator and gradient routes of the bracket disagree")
    return make_symbol(n, Mb, label=label)


def symbol_to_dict(q):
    """Serialize a symbol to the file schema ``{n, M: [[re, im], ...], label}``."""
    flat = q.M.reshape(-1)
    return {
        "n": q.n,
        "M": [[float(z.real), float(z.imag)] for z in flat],
        "label": q.label,
    }


def symbol_from_dict(data):
    """Parse the symbol file schema produced by :func:`symbol_to_dict`."""
    if not isinstance(data, dict):
        raise InputError("symbol document must be an object")
    for key in ("n", "M"):
        if key not in data:
            raise InputError(f"symbol document is missing field '{key}'")
    n = data["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InputError(f"field 'n' must be a positive integer, got {n!r}")
    entries = data["M"]
    if not isinstance(entries, list) or len(entries) != 4 * n * n:
        raise InputError(f"field 'M' must hold {4 * n * n} [re, im] pairs")
    vals = []
    for i, pair in enumerate(entries):
        if (
            not isinstance(pair, (list, tuple))
            or len(pair) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair)
        ):
            raise InputError(f"field 'M' entry {i} must be a numeric [re, im] pair")
        vals.append(complex(pair[0], pair[1]))
    label = data.get("label", "")
    if not isinstance(label, str):
        raise InputError("field 'label' must be a string")
    M = np.array(vals, dtype=complex).reshape(2 * n, 2 * n)
    return make_symbol(n, M, label=label)
