"""Minorizer and majorizer constructions used by all three solvers.

Four families: the scalar log-rate minorizer, the quadratic-over-linear
SINR minorizer, the quadratic-to-linear majorization on the unit-modulus
set, and the log-det matrix-rate minorizer. Each surrogate touches the
objective at its anchor and bounds it everywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SHIFT_SLACK = 1e-8


@dataclass(frozen=True)
class ScalarMinorizer:
    """g(x, y) = -a (y + |x|^2) + 2 Re(conj(b) x) + c0 <= log(1 + |x|^2 / y)."""

    a: float
    b: complex
    c0: float

    def evaluate(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        return (-self.a * (y + np.abs(x) ** 2)
                + 2.0 * np.real(np.conj(self.b) * x) + self.c0)


def scalar_rate_minorizer(x0: complex, y0: float) -> ScalarMinorizer:
    """Minorizer of log(1 + |x|^2 / y) tangent at (x0, y0), y0 > 0."""
    if y0 <= 0:
        raise ValueError("anchor y must be positive")
    p0 = abs(x0) ** 2
    a = p0 / (y0 * (y0 + p0))
    b = x0 / y0
    c0 = float(np.log1p(p0 / y0) - p0 / y0)
    return ScalarMinorizer(a=a, b=b, c0=c0)


@dataclass(frozen=True)
class SinrMinorizer:
    """g(z1, z2) = 2 Re(conj(b) z1) - a z2 <= |z1|^2 / z2."""

    b: complex
    a: float

    def evaluate(self, z1, z2):
        z1 = np.asarray(z1)
        z2 = np.asarray(z2)
        return 2.0 * np.real(np.conj(self.b) * z1) - self.a * z2


def sinr_minorizer(z1_0: complex, z2_0: float) -> SinrMinorizer:
    """Minorizer of |z1|^2 / z2 tangent at (z1_0, z2_0), z2_0 > 0."""
    if z2_0 <= 0:
        raise ValueError("anchor z2 must be positive")
    return SinrMinorizer(b=z1_0 / z2_0, a=abs(z1_0) ** 2 / z2_0 ** 2)


@dataclass(frozen=True)
class LinearizedForm:
    """g(theta) = -2 Re(theta^H b) + c0."""

    b: np.ndarray
    c0: float

    def evaluate(self, theta):
        return float(-2.0 * np.real(np.vdot(theta, self.b)) + self.c0)


def _rayleigh_lower_bound(lmat: np.ndarray, x0: np.ndarray,
                          iters: int = 30) -> float:
    """Cheap lower bound on lambda_max via a few power-iteration steps."""
    n = lmat.shape[0]
    v = np.asarray(x0, dtype=complex).copy()
    if np.linalg.norm(v) == 0:
        v = np.ones(n, dtype=complex)
    v /= np.linalg.norm(v)
    best = float(np.real(np.vdot(v, lmat @ v)))
    for _ in range(iters):
        av = lmat @ v
        nav = np.linalg.norm(av)
        if nav == 0:
            break
        v = av / nav
        best = max(best, float(np.real(np.vdot(v, lmat @ v))))
    return best


def quadratic_to_linear(lmat: np.ndarray, lam_hat: float,
                        x0: np.ndarray) -> LinearizedForm:
    """Affine majorizer of x^H L x on the unit-modulus set, tangent at x0.

    Requires lam_hat I >= L. With N = len(x0) the bound
    x^H L x <= lam_hat N + 2 Re(x^H (L - lam_hat I) x0) + x0^H (lam_hat I - L) x0
    is returned as LinearizedForm with b = (lam_hat I - L) x0, i.e.
    g(x) = -2 Re(x^H b) + c0 >= x^H L x whenever every |x_j| = 1.
    """
    lmat = np.asarray(lmat)
    x0 = np.asarray(x0, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(lmat)))
    if lam_hat < _rayleigh_lower_bound(lmat, x0) - SHIFT_SLACK * scale:
        raise ValueError("invalid shift: lam_hat below the largest eigenvalue")
    n = x0.shape[0]
    shifted = lam_hat * x0 - lmat @ x0
    c0 = float(lam_hat * n + np.real(np.vdot(x0, shifted)))
    return LinearizedForm(b=shifted, c0=c0)


@dataclass(frozen=True)
class MatrixMinorizer:
    """g(X, Y) = -tr(A (Y + X X^H)) + 2 Re tr(B X) + c0 <= log det(I + X^H Y^-1 X)."""

    a_mat: np.ndarray
    b_mat: np.ndarray
    c0: float

    def evaluate(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        return float(
            -np.real(np.trace(self.a_mat @ (y + x @ x.conj().T)))
            + 2.0 * np.real(np.trace(self.b_mat @ x)) + self.c0)


def matrix_rate_minorizer(x0: np.ndarray, y0: np.ndarray) -> MatrixMinorizer:
    """Minorizer of log det(I + X^H Y^-1 X) tangent at (x0, y0), y0 PD.

    A = (y0 + x0 x0^H)^-1 x0 (I + x0^H y0^-1 x0) x0^H (y0 + x0 x0^H)^-1,
    B = (I + x0^H y0^-1 x0) x0^H (y0 + x0 x0^H)^-1.
    """
    x0 = np.asarray(x0, dtype=complex)
    y0 = np.asarray(y0, dtype=complex)
    if x0.ndim != 2 or y0.shape[0] != x0.shape[0]:
        raise ValueError("anchor shapes are inconsistent")
    try:
        np.linalg.cholesky((y0 + y0.conj().T) / 2.0)
    except np.linalg.LinAlgError:
        raise ValueError("anchor Y must be positive definite")
    yinv_x = np.linalg.solve(y0, x0)
    gram = np.eye(x0.shape[1]) + x0.conj().T @ yinv_x      # I + X^H Y^-1 X
    s = y0 + x0 @ x0.conj().T
    xs = np.linalg.solve(s.conj().T, x0).conj().T          # X^H S^-1
    b_mat = gram @ xs
    a_mat = xs.conj().T @ b_mat                            # S^-1 X gram X^H S^-1
    a_mat = (a_mat + a_mat.conj().T) / 2.0                 # roundoff control
    sign, logdet = np.linalg.slogdet(gram)
    if sign.real <= 0:
        raise ValueError("anchor Y must be positive definite")
    c0 = float(logdet - np.real(np.trace(x0.conj().T @ yinv_x)))
    return MatrixMinorizer(a_mat=a_mat, b_mat=b_mat, c0=c0)
