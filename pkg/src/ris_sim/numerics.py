"""Dense complex Hermitian linear algebra shared by the beamformer updates.

All routines are pure functions of their inputs and safe to call from
concurrent Monte-Carlo trials.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

HERMITIAN_RTOL = 1e-10
NEGATIVE_EIG_TOL = 1e-10


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigendecomposition A = V diag(values) V^H with values sorted descending."""

    vectors: np.ndarray  # (N, N) unitary
    values: np.ndarray   # (N,) real, descending

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


def hermitian_eig(a: np.ndarray, psd: bool = False) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    With ``psd=True`` the input is additionally required to be positive
    semidefinite: eigenvalues below ``-1e-10 * scale`` raise, tiny negative
    roundoff is clamped to zero.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, np.linalg.norm(a))
    if np.linalg.norm(a - a.conj().T) > HERMITIAN_RTOL * scale:
        raise ValueError("not Hermitian")
    values, vectors = np.linalg.eigh((a + a.conj().T) / 2.0)
    # eigh returns ascending order
    values = values[::-1].copy()
    vectors = vectors[:, ::-1].copy()
    if psd:
        if values[-1] < -NEGATIVE_EIG_TOL * scale:
            raise ValueError(
                f"matrix is not PSD: min eigenvalue {values[-1]:.3e}"
            )
        np.clip(values, 0.0, None, out=values)
    return EigenDecomposition(vectors=vectors, values=values)


class LargestEigenvalue(NamedTuple):
    value: float
    converged: bool


def largest_eigenvalue(a: np.ndarray, tol: float = 1e-9,
                       max_iter: int = 500) -> LargestEigenvalue:
    """Largest eigenvalue of a Hermitian PSD matrix by power iteration.

    The returned value is the Rayleigh quotient plus the residual norm, so
    it is usable as a majorizer shift while staying within ``tol`` of the
    true value once the residual test passes. On non-convergence falls back
    to trace(a), a certified upper bound for PSD input, with
    ``converged=False``.
    """
    a = np.asarray(a)
    n = a.shape[0]
    if n == 0:
        return LargestEigenvalue(0.0, True)
    norm_a = np.linalg.norm(a)
    if norm_a == 0.0:
        return LargestEigenvalue(0.0, True)
    v = np.ones(n, dtype=complex) / np.sqrt(n)
    for _ in range(max_iter):
        av = a @ v
        nav = np.linalg.norm(av)
        if nav == 0.0:
            # v is in the null space; restart from the largest column
            j = int(np.argmax(np.linalg.norm(a, axis=0)))
            v = a[:, j] / np.linalg.norm(a[:, j])
            continue
        rho = float(np.real(np.vdot(v, av)))
        residual = float(np.linalg.norm(av - rho * v))
        if residual <= tol * max(1.0, abs(rho)):
            return LargestEigenvalue(rho + residual, True)
        v = av / nav
    return LargestEigenvalue(float(np.real(np.trace(a))), False)


def solve_power_multiplier(eig: EigenDecomposition, q: np.ndarray,
                           power: float, rel_tol: float = 1e-10,
                           max_iter: int = 200) -> float:
    """Root gamma >= 0 of sum_n c_n / (lambda_n + gamma)^2 = power.

    ``eig`` decomposes the (PSD) quadratic-term matrix, ``q`` is the linear
    term and the constraint is assumed active (the unconstrained solution
    violates the power budget), so the strictly decreasing secular function
    crosses ``power`` exactly once on (0, ||q||_F / sqrt(power)].
    """
    if power <= 0.0:
        raise ValueError("power must be positive")
    q = np.asarray(q)
    if q.ndim == 1:
        q = q[:, None]
    coeffs = np.sum(np.abs(eig.vectors.conj().T @ q) ** 2, axis=1)
    values = eig.values

    def f(gamma: float) -> float:
        return float(np.sum(coeffs / (values + gamma) ** 2))

    lo = 0.0
    hi = float(np.linalg.norm(q) / np.sqrt(power))
    # ||(R + gamma I)^-1 Q||_F <= ||Q||_F / gamma, so f(hi) <= power;
    # guard against roundoff at the boundary anyway.
    for _ in range(60):
        if f(hi) <= power:
            break
        hi *= 2.0
    else:
        raise AssertionError("secular bracketing failed")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = f(mid)
        if abs(val - power) <= rel_tol * power:
            return mid
        if val > power:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_shifted(eig: EigenDecomposition, q: np.ndarray,
                  gamma: float) -> np.ndarray:
    """(A + gamma I)^{-1} q through the eigendecomposition of A."""
    q = np.asarray(q)
    proj = eig.vectors.conj().T @ q
    denom = eig.values + gamma
    scaled = proj / (denom[:, None] if q.ndim > 1 else denom)
    return eig.vectors @ scaled
