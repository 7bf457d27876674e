"""Dense symmetric linear algebra for the eigenvalue-GARCH model.

Sample second-moment matrices, identified eigendecompositions, Givens
rotation products, shifted Moore-Penrose pseudo-inverses and spectral radii.
All functions are pure and operate on plain float64 arrays.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError

__all__ = [
    "CovMatrix",
    "SpectralTarget",
    "sample_covariance",
    "eigen_sym",
    "givens_product",
    "shifted_pseudo_inverse",
    "spectral_radius",
]

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-10
SIGN_TOL = 1e-12
GAP_RTOL = 1e-8


@dataclass(frozen=True)
class CovMatrix:
    """Symmetric positive semi-definite second-moment matrix.

    Attributes
    ----------
    values : ndarray
        p x p matrix in variance units (squared returns).
    """

    values: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.values, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"covariance matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("covariance matrix contains non-finite entries")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.T).max() > SYMMETRY_RTOL * scale:
            raise ValidationError("covariance matrix is not symmetric to 1e-12 relative")
        eigvals = np.linalg.eigvalsh(m)
        if eigvals.min() < -PSD_RTOL * max(np.trace(m), 1e-300):
            raise ValidationError(
                f"covariance matrix is not PSD: min eigenvalue {eigvals.min():.3e}"
            )
        object.__setattr__(self, "values", m)

    @property
    def p(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SpectralTarget:
    """Identified eigendecomposition of an unconditional covariance matrix.

    Eigenvalues sorted non-decreasing and strictly positive; eigenvector
    columns sign-fixed so the first entry larger than 1e-12 in magnitude is
    positive. ``upsilon`` stacks the columns of V.
    """

    lam: np.ndarray
    V: np.ndarray
    recon_residual: float = 0.0
    near_repeated: bool = False

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        V = np.asarray(self.V, dtype=float)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "V", V)

    @property
    def p(self) -> int:
        return self.lam.shape[0]

    @property
    def upsilon(self) -> np.ndarray:
        """vec(V): eigenvector matrix stacked column by column."""
        return self.V.flatten(order="F")

    def gamma(self) -> np.ndarray:
        """Full static parameter vector [lam, vec(V)]."""
        return np.concatenate([self.lam, self.upsilon])

    def reconstruct(self) -> np.ndarray:
        """Rebuild the covariance matrix V diag(lam) V'."""
        return (self.V * self.lam) @ self.V.T


def sample_covariance(values: np.ndarray) -> CovMatrix:
    """Uncentered second-moment matrix (1/T) sum_t X_t X_t'.

    Returns are assumed mean-zero; demeaning, when wanted, is a separate
    preprocessing step. Exactly symmetric by construction.

    Parameters
    ----------
    values : ndarray
        T x p data matrix.
    """
    X = np.asarray(values, dtype=float)
    if X.ndim != 2:
        raise ValidationError(f"expected a T x p matrix, got shape {X.shape}")
    T = X.shape[0]
    if T < 2:
        raise ValidationError(f"need at least 2 observations, got {T}")
    bad = ~np.all(np.isfinite(X), axis=1)
    if bad.any():
        rows = np.flatnonzero(bad)
        raise ValidationError(f"non-finite entries in rows {rows.tolist()}")
    m = X.T @ X / T
    m = 0.5 * (m + m.T)
    return CovMatrix(m)


def _sign_fix(V: np.ndarray) -> np.ndarray:
    """Flip eigenvector columns so the first entry with |v| > 1e-12 is positive."""
    V = V.copy()
    for j in range(V.shape[1]):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > SIGN_TOL)
        if nz.size and col[nz[0]] < 0:
            V[:, j] = -col
    return V


def eigen_sym(H: CovMatrix | np.ndarray) -> SpectralTarget:
    """Identified eigendecomposition of a symmetric PD matrix.

    Eigenvalues are returned in non-decreasing order with sign-normalized
    eigenvectors. Emits a `near-repeated eigenvalues` warning (and sets the
    flag on the result) when the smallest spectral gap falls below
    1e-8 * trace(H): downstream inference is unreliable in that case because
    the eigenvectors are then poorly identified.
    """
    if isinstance(H, CovMatrix):
        m = H.values
    else:
        m = CovMatrix(H).values
    lam, V = np.linalg.eigh(m)
    if lam[0] <= 0.0:
        raise ValidationError(
            f"smallest eigenvalue {lam[0]:.3e} is not strictly positive"
        )
    near = False
    if lam.size > 1:
        gap = np.diff(lam).min()
        if gap < GAP_RTOL * np.trace(m):
            near = True
            warnings.warn(
                "near-repeated eigenvalues: smallest gap "
                f"{gap:.3e} < 1e-8*trace; eigenvectors weakly identified",
                RuntimeWarning,
                stacklevel=2,
            )
    V = _sign_fix(V)
    resid = float(np.abs((V * lam) @ V.T - m).max())
    return SpectralTarget(lam=lam, V=V, recon_residual=resid, near_repeated=near)


def _rotation_pairs(p: int) -> list[tuple[int, int]]:
    """Plane-rotation index pairs (i, j), i < j, in lexicographic order."""
    return [(i, j) for i in range(p) for j in range(i + 1, p)]


def _plane_rotation(p: int, i: int, j: int, angle: float) -> np.ndarray:
    U = np.eye(p)
    c, s = np.cos(angle), np.sin(angle)
    U[i, i] = c
    U[j, j] = c
    U[i, j] = s
    U[j, i] = -s
    return U


def givens_product(phi: np.ndarray, p: int) -> np.ndarray:
    """Orthonormal matrix from p(p-1)/2 plane-rotation angles.

    The product runs over pairs (i, j), i < j, in lexicographic order:
    U_{12} U_{13} ... U_{1p} U_{23} ... U_{p-1,p}. Each factor is the
    identity apart from cos(phi) at (i,i) and (j,j), sin(phi) at (i,j) and
    -sin(phi) at (j,i). Arbitrary real angles are accepted; the result is
    orthonormal for all of them.
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    n_pairs = p * (p - 1) // 2
    if phi.shape != (n_pairs,):
        raise ValidationError(
            f"expected {n_pairs} rotation angles for p={p}, got shape {phi.shape}"
        )
    V = np.eye(p)
    for angle, (i, j) in zip(phi, _rotation_pairs(p)):
        V = V @ _plane_rotation(p, i, j, angle)
    return V


def givens_product_derivatives(phi: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Givens product together with its derivative wrt every angle.

    Returns (V, dV) with dV of shape (n_angles, p, p). Uses prefix/suffix
    products so the cost is linear in the number of angles.
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    pairs = _rotation_pairs(p)
    n = len(pairs)
    if phi.shape != (n,):
        raise ValidationError(f"expected {n} rotation angles for p={p}")
    factors = [_plane_rotation(p, i, j, a) for a, (i, j) in zip(phi, pairs)]
    prefix = [np.eye(p)]
    for F in factors:
        prefix.append(prefix[-1] @ F)
    suffix = [np.eye(p)] * (n + 1)
    for k in range(n - 1, -1, -1):
        suffix[k] = factors[k] @ suffix[k + 1]
    dV = np.empty((n, p, p))
    for k, (angle, (i, j)) in enumerate(zip(phi, pairs)):
        dU = np.zeros((p, p))
        c, s = np.cos(angle), np.sin(angle)
        dU[i, i] = -s
        dU[j, j] = -s
        dU[i, j] = c
        dU[j, i] = -c
        dV[k] = prefix[k] @ dU @ suffix[k + 1]
    return prefix[n], dV


def shifted_pseudo_inverse(H: CovMatrix | np.ndarray, lambda_i: float) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of (lambda_i I - H).

    Singular values below 1e-10 times the largest are treated as zero, which
    removes the eigendirection(s) belonging to lambda_i itself.
    """
    m = H.values if isinstance(H, CovMatrix) else np.asarray(H, dtype=float)
    shifted = lambda_i * np.eye(m.shape[0]) - m
    return np.linalg.pinv(shifted, rcond=1e-10, hermitian=True)


def spectral_radius(M: np.ndarray) -> float:
    """Largest eigenvalue modulus of a square matrix (complex-safe)."""
    m = np.asarray(M, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix contains non-finite entries")
    return float(np.abs(np.linalg.eigvals(m)).max())
