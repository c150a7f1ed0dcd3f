"""Covariance machinery for the four stacked output heads.

The 4x4 matrix couples the flattened head weights (columns ordered
W_s, W_sc, W_t, W_tc).  It is constrained to be symmetric positive
semi-definite with unit trace.  Minimising tr(W omega^{-1} W.T) over
that feasible set has the closed form omega = sqrt(W.T W) / tr(sqrt(W.T W)),
which is what ``update_omega`` computes; the matrix square root comes
from a hand-rolled cyclic Jacobi eigendecomposition, plenty for
fixed-size symmetric matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError

HEAD_LABELS = ("W_s", "W_sc", "W_t", "W_tc")

_SYMMETRY_TOL = 1e-9
_JACOBI_TOL = 1e-14
_NEG_EIG_REJECT = 1e-6


def sym_eig(a: np.ndarray, *, tol: float = _JACOBI_TOL,
            max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a small symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues descending, orthonormal eigenvectors as columns)
    with a = V diag(w) V.T.  Sweeps run until the off-diagonal Frobenius
    norm drops below tol (scaled by the matrix norm).
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"sym_eig: expected a square matrix, got {a.shape}")
    if np.max(np.abs(a - a.T)) >= _SYMMETRY_TOL:
        raise ShapeError("sym_eig: matrix is not symmetric")
    n = a.shape[0]
    m = (a + a.T) / 2.0
    v = np.eye(n)
    threshold = tol * max(1.0, float(np.linalg.norm(m)))

    def off_norm(x):
        o = x - np.diag(np.diag(x))
        return float(np.sqrt(np.sum(o * o)))

    for _ in range(max_sweeps):
        if off_norm(m) < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if apq == 0.0:
                    continue
                tau = (m[q, q] - m[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 \
                    else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                m = rot.T @ m @ rot
                v = v @ rot
    m = (m + m.T) / 2.0
    w = np.diag(m).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues slightly below zero (numerical noise down to -1e-6) are
    clamped to zero; anything more negative is a genuine PSD violation.
    """
    w, v = sym_eig(a)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[-1] < -_NEG_EIG_REJECT * scale:
        raise NumericError(f"psd_sqrt: matrix is not PSD (min eigenvalue {w[-1]:.3e})")
    w = np.maximum(w, 0.0)
    root = (v * np.sqrt(w)) @ v.T
    return (root + root.T) / 2.0


def initial_omega(k: int = 4) -> np.ndarray:
    """Identity divided by its size: the maximum-entropy feasible point."""
    return np.eye(k) / k


def update_omega(w_stacked: np.ndarray) -> np.ndarray:
    """Closed-form minimiser of tr(W omega^{-1} W.T) s.t. omega PSD, tr = 1.

    omega = sqrt(W.T W) / tr(sqrt(W.T W)).  A zero W makes the objective
    degenerate; the identity/k initial point is returned in that case.
    """
    w_stacked = np.asarray(w_stacked, dtype=np.float64)
    if w_stacked.ndim != 2:
        raise ShapeError(f"update_omega: expected 2-D stacked weights, got {w_stacked.ndim}-D")
    k = w_stacked.shape[1]
    if not np.any(w_stacked):
        return initial_omega(k)
    gram = w_stacked.T @ w_stacked
    root = psd_sqrt(gram)
    trace = float(np.trace(root))
    if trace <= 0.0:
        return initial_omega(k)
    omega = root / trace
    return (omega + omega.T) / 2.0


def omega_inverse(omega: np.ndarray, ridge: float = 1e-6) -> np.ndarray:
    """(omega + ridge*I)^{-1} via eigendecomposition.

    The analytic omega is singular whenever the stacked weights are
    rank-deficient; the ridge keeps the trace penalty finite.
    """
    w, v = sym_eig(omega)
    w = np.maximum(w, 0.0) + ridge
    if np.any(w <= 0.0):
        raise NumericError("omega_inverse: non-positive eigenvalue after ridge")
    inv = (v / w) @ v.T
    return (inv + inv.T) / 2.0


def check_omega(omega: np.ndarray, *, sym_tol: float = 1e-12,
                eig_tol: float = -1e-10, trace_tol: float = 1e-10) -> None:
    """Raise NumericError unless omega is symmetric, PSD and unit-trace."""
    omega = np.asarray(omega)
    if omega.shape[0] != omega.shape[1]:
        raise ShapeError(f"check_omega: not square: {omega.shape}")
    if np.max(np.abs(omega - omega.T)) > sym_tol:
        raise NumericError("check_omega: not symmetric")
    w, _ = sym_eig(omega)
    if w[-1] < eig_tol:
        raise NumericError(f"check_omega: negative eigenvalue {w[-1]:.3e}")
    if abs(float(np.trace(omega)) - 1.0) > trace_tol:
        raise NumericError(f"check_omega: trace {np.trace(omega):.12f} != 1")


@dataclass
class CorrelationReport:
    """Correlation view of omega: rho plus the element-wise signed sqrt."""

    labels: tuple[str, ...]
    rho: np.ndarray
    sqrt_rho: np.ndarray

    def render(self, matrix: str = "rho", digits: int = 3) -> str:
        """Fixed-layout text table with head labels on both axes."""
        mat = self.rho if matrix == "rho" else self.sqrt_rho
        width = max(6, digits + 4)
        head = " " * 6 + "".join(f"{lab:>{width}s}" for lab in self.labels)
        lines = [head]
        for lab, row in zip(self.labels, mat):
            cells = "".join(
                f"{'undef':>{width}s}" if not np.isfinite(x) else f"{x:>{width}.{digits}f}"
                for x in row)
            lines.append(f"{lab:<6s}{cells}")
        return "\n".join(lines)

    def to_kv(self) -> list[str]:
        lines = []
        for kind, mat in (("rho", self.rho), ("sqrt_rho", self.sqrt_rho)):
            for i, li in enumerate(self.labels):
                for j, lj in enumerate(self.labels):
                    val = mat[i, j]
                    out = "undef" if not np.isfinite(val) else f"{val:.6f}"
                    lines.append(f"{kind}.{li}.{lj}={out}")
        return lines


def correlation_report(omega: np.ndarray,
                       labels: tuple[str, ...] = HEAD_LABELS) -> CorrelationReport:
    """rho_ij = omega_ij / sqrt(omega_ii * omega_jj), plus sign(rho)*sqrt(|rho|).

    Rows or columns with a non-positive diagonal are reported as
    undefined (NaN) rather than raising.
    """
    omega = np.asarray(omega, dtype=np.float64)
    k = omega.shape[0]
    if omega.shape != (k, k) or len(labels) != k:
        raise ShapeError(f"correlation_report: shape {omega.shape} with {len(labels)} labels")
    diag = np.diag(omega)
    rho = np.full((k, k), np.nan)
    ok = diag > 0
    for i in range(k):
        for j in range(k):
            if ok[i] and ok[j]:
                rho[i, j] = omega[i, j] / np.sqrt(diag[i] * diag[j])
    sqrt_rho = np.sign(rho) * np.sqrt(np.abs(rho))
    return CorrelationReport(labels=tuple(labels), rho=rho, sqrt_rho=sqrt_rho)
