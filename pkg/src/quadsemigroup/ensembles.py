"""Seeded random generators and canonical examples used by tests and ``verify``."""

from __future__ import annotations

import numpy as np

from quadsemigroup.ou_models import kalman_blocks, ou_build
from quadsemigroup.singular_space import kernel_chain
from quadsemigroup.symplectic_core import make_symbol

__all__ = [
    "elliptic_model",
    "harmonic_oscillator",
    "kramers_model",
    "kramers_symbol",
    "random_accretive_symbol",
    "random_hypoelliptic_model",
    "random_kalman_pair",
    "random_symbol",
]


def harmonic_oscillator(n=1):
    """``q = (|x|^2 + |xi|^2)/2``."""
    return make_symbol(n, np.eye(2 * n) / 2, label="harmonic oscillator")


def kramers_symbol():
    """``q = eta^2 + v^2/4 - i(v xi - x eta)`` in phase order ``(x, v, xi, eta)``."""
    M = np.zeros((4, 4), dtype=complex)
    M[3, 3] = 1.0
    M[1, 1] = 0.25
    M[1, 2] = M[2, 1] = -0.5j
    M[0, 3] = M[3, 0] = 0.5j
    return make_symbol(2, M, label="kramers")


def kramers_model(variant="ou"):
    """Kinetic model with diffusion in velocity only and friction 1."""
    return ou_build(np.diag([0.0, 2.0]), np.array([[0.0, 1.0], [-1.0, -1.0]]), variant=variant)


def elliptic_model(n=2):
    """``Q = I``, ``B = -I``."""
    return ou_build(np.eye(n), -np.eye(n))


def random_symbol(rng, n, scale=1.0):
    """Complex symbol with Gaussian entries (not necessarily accretive)."""
    A = rng.standard_normal((2 * n, 2 * n)) + 1j * rng.standard_normal((2 * n, 2 * n))
    return make_symbol(n, scale * A)


def random_accretive_symbol(rng, n, max_tries=100):
    """Accretive symbol with trivial singular space.

    ``Re q`` is a Gram form of random rank, so degenerate cases with large
    ``k0`` are common; ``Im q`` is a random real quadratic form. Draws with a
    nonzero singular space are rejected.
    """
    for _ in range(max_tries):
        rank = int(rng.integers(1, 2 * n + 1))
        G = rng.standard_normal((2 * n, rank))
        S = rng.standard_normal((2 * n, 2 * n))
        M = G @ G.T / rank + 1j * (S + S.T) / 2
        q = make_symbol(n, M)
        if not q.accretive:
            continue
        if kernel_chain(q).singular_space_trivial:
            return q
    raise RuntimeError("could not draw a symbol with trivial singular space")


def random_hypoelliptic_model(rng, n, variant="ou", min_kalman_conditioning=1e-3, max_tries=100):
    """Stable, hypoelliptic model with a unit-norm diffusion of random rank.

    Draws whose Kalman matrix ``[Q^{1/2}, ..., B^{k0} Q^{1/2}]`` has
    ``sigma_min / sigma_max`` below ``min_kalman_conditioning`` are rejected:
    the conjugated symbol then involves ``Qinf^{-1}`` and powers of its
    Hamilton map whose numerical rank is below double-precision resolution.
    """
    for _ in range(max_tries):
        rank = int(rng.integers(1, n + 1))
        G = rng.standard_normal((n, rank))
        # unit diffusion scale keeps the conjugated symbol's coefficients comparable
        Q = G @ G.T / np.linalg.norm(G, 2) ** 2
        R = rng.standard_normal((n, n))
        shift = np.max(np.linalg.eigvals(R).real) + rng.uniform(0.2, 1.0)
        B = R - shift * np.eye(n)
        model = ou_build(Q, B, variant=variant)
        if not (model.hypoelliptic and model.stable):
            continue
        s = np.linalg.svd(kalman_blocks(model.Qhalf, B, model.k0), compute_uv=False)
        if s[-1] >= min_kalman_conditioning * s[0]:
            return model
    raise RuntimeError("could not draw a hypoelliptic model")


def random_kalman_pair(rng, n):
    """Diffusion/drift pair for the Kalman versus Gram comparison.

    One third are generic, one third are uncontrollable by construction (the
    diffusion only feeds an invariant subspace of the drift, then a random
    rotation hides the block structure), and the rest mix zero diffusion with
    generic drifts.
    """
    kind = int(rng.integers(0, 3))
    R = rng.standard_normal((n, n))
    if kind == 0 or n == 1:
        rank = int(rng.integers(1, n + 1))
        G = rng.standard_normal((n, rank))
        return G @ G.T, R
    if kind == 1:
        m = int(rng.integers(1, n))
        B = rng.standard_normal((n, n))
        B[m:, :m] = 0.0
        G = np.zeros((n, n))
        G[:m, :m] = rng.standard_normal((m, m))
        Q = G @ G.T
        U, _ = np.linalg.qr(rng.standard_normal((n, n)))
        Q = U @ Q @ U.T
        return (Q + Q.T) / 2, U @ B @ U.T
    return np.zeros((n, n)), R
