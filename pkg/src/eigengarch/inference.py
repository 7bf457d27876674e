"""Asymptotic covariance of the two-step estimator.

Per equation i the joint vector (lam, vec(V), kappa_i) of length
e = p^2 + 2p + 1 has sandwich covariance

    Sigma = M Omega M',    M = [[I, 0], [-J^{-1} K, -J^{-1}]],

where J and K are plug-in averages of second derivatives of the equation
criterion and Omega is the outer-product average of the stacked moment and
score contributions. The first-step contributions use the eigenvalue and
eigenvector perturbation identities, with the shifted pseudo-inverse
carrying the eigenvector sensitivity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import (
    ModelFit,
    equation_kappa_hessian,
    equation_score_contributions,
    rotate_returns,
)
from .exceptions import InferenceError, ValidationError
from .panel import ReturnPanel
from .spectral import sample_covariance, shifted_pseudo_inverse

__all__ = [
    "SandwichBlocks",
    "EquationInference",
    "sandwich_blocks",
    "sandwich_sigma",
    "intercept_delta",
]

J_CONDITION_LIMIT = 1e12
GAMMA_FD_STEP = 1e-5


@dataclass(frozen=True)
class SandwichBlocks:
    """Plug-in second-derivative and outer-product blocks for one equation."""

    J: np.ndarray        # (p+1) x (p+1)
    K: np.ndarray        # (p+1) x (p^2+p)
    Omega: np.ndarray    # e x e
    T: int
    p: int

    @property
    def e(self) -> int:
        return self.p**2 + 2 * self.p + 1


@dataclass(frozen=True)
class EquationInference:
    """Asymptotic covariance and finite-sample standard errors."""

    Sigma: np.ndarray
    se: np.ndarray
    T: int
    p: int

    @property
    def se_gamma(self) -> np.ndarray:
        return self.se[: self.p**2 + self.p]

    @property
    def se_kappa(self) -> np.ndarray:
        return self.se[self.p**2 + self.p:]


def _panel_values(X) -> np.ndarray:
    if isinstance(X, ReturnPanel):
        return X.values
    return np.atleast_2d(np.asarray(X, dtype=float))


def _kappa_score_at_gamma(gamma_vec: np.ndarray, kappa: np.ndarray,
                          X: np.ndarray, i: int, p: int) -> np.ndarray:
    """Mean kappa-score with (lam, vec(V)) treated as free coordinates.

    Perturbed eigenvector entries re-rotate the panel, which is exactly the
    dependence the cross-derivative block has to pick up.
    """
    lam = gamma_vec[:p]
    V = gamma_vec[p:].reshape((p, p), order="F")
    Y = rotate_returns(X, V)
    contrib = equation_score_contributions(kappa, lam, Y, i)
    return contrib.mean(axis=0)


def sandwich_blocks(fit: ModelFit, X, i: int) -> SandwichBlocks:
    """Plug-in J, K and Omega for equation i of a two-step fit.

    J is analytic; K differentiates the analytic kappa-score by central
    finite differences in the static coordinates; Omega stacks the
    eigenvalue moment deviations, the pseudo-inverse-weighted eigenvector
    deviations and the per-observation kappa-score.

    Refuses boundary fits and near-repeated first-step eigenvalues, where
    the asymptotic approximation breaks down.
    """
    Xv = _panel_values(X)
    T, p = Xv.shape
    if fit.target.near_repeated:
        raise InferenceError(
            "first-step eigenvalues are near-repeated; eigenvectors are "
            "weakly identified and the sandwich blocks are unreliable"
        )
    diag = fit.diagnostics[i] if i < len(fit.diagnostics) else None
    if diag is not None and diag.active_constraints:
        raise InferenceError(
            f"equation {i} sits on constraint(s) {diag.active_constraints}; "
            "interior-point inference is not available"
        )
    lam_hat = fit.target.lam
    V_hat = fit.target.V
    kappa = fit.kappas[i]
    Y = rotate_returns(Xv, V_hat)

    J = equation_kappa_hessian(kappa, lam_hat, Y, i)

    gamma_vec = fit.target.gamma()
    n_gamma = p + p * p
    K = np.empty((p + 1, n_gamma))
    for k in range(n_gamma):
        h = GAMMA_FD_STEP * max(abs(gamma_vec[k]), 0.1)
        up, dn = gamma_vec.copy(), gamma_vec.copy()
        up[k] += h
        dn[k] -= h
        s_up = _kappa_score_at_gamma(up, kappa, Xv, i, p)
        s_dn = _kappa_score_at_gamma(dn, kappa, Xv, i, p)
        K[:, k] = (s_up - s_dn) / (2.0 * h)

    H = sample_covariance(Xv).values
    # eigenvalue-deviation block: diag of V'(X_t X_t' - H)V per observation
    rotated_diag = np.einsum("ji,jk,ki->i", V_hat, H, V_hat)
    block_lam = Y**2 - rotated_diag  # T x p
    # eigenvector-deviation blocks: (lam_i I - H)^+ (X_t X_t' - H) V_j
    blocks_ups = np.empty((T, p * p))
    for j in range(p):
        P = shifted_pseudo_inverse(H, lam_hat[j])
        XP = Xv @ P  # rows P x_t (P symmetric)
        drift = P @ H @ V_hat[:, j]
        blocks_ups[:, j * p:(j + 1) * p] = Y[:, j:j + 1] * XP - drift
    score_t = equation_score_contributions(kappa, lam_hat, Y, i)
    omega = np.hstack([block_lam, blocks_ups, score_t])  # T x e
    Omega = omega.T @ omega / T
    Omega = 0.5 * (Omega + Omega.T)
    return SandwichBlocks(J=J, K=K, Omega=Omega, T=T, p=p)


def sandwich_sigma(blocks: SandwichBlocks) -> EquationInference:
    """Assemble Sigma = M Omega M' and the 1/sqrt(T) standard errors."""
    p, e = blocks.p, blocks.e
    n_gamma = p + p * p
    cond = np.linalg.cond(blocks.J)
    if not np.isfinite(cond) or cond > J_CONDITION_LIMIT:
        raise InferenceError(
            f"equation Hessian is numerically singular (cond={cond:.3e})"
        )
    Jinv = np.linalg.inv(blocks.J)
    M = np.zeros((e, e))
    M[:n_gamma, :n_gamma] = np.eye(n_gamma)
    M[n_gamma:, :n_gamma] = -Jinv @ blocks.K
    M[n_gamma:, n_gamma:] = -Jinv
    Sigma = M @ blocks.Omega @ M.T
    Sigma = 0.5 * (Sigma + Sigma.T)
    variances = np.clip(np.diag(Sigma), 0.0, None)
    se = np.sqrt(variances / blocks.T)
    return EquationInference(Sigma=Sigma, se=se, T=blocks.T, p=p)


def intercept_delta(fit: ModelFit, inference: EquationInference, i: int) -> float:
    """Delta-method standard error of the implied intercept w_i.

    The gradient of w_i = (1 - b_i) lam_i - sum_j a_ij lam_j stacks the
    lam-gradient, zeros for the eigenvector coordinates, -lam for the ARCH
    loadings and -lam_i for the persistence coefficient, in the same
    ordering as Sigma.
    """
    p = inference.p
    lam = fit.target.lam
    kappa = fit.kappas[i]
    a, b = kappa[:p], kappa[p]
    grad_lam = -a.copy()
    grad_lam[i] += 1.0 - b
    phi_vec = np.concatenate([grad_lam, np.zeros(p * p), -lam, [-lam[i]]])
    if phi_vec.shape[0] != inference.Sigma.shape[0]:
        raise ValidationError("inference object does not match the fit dimension")
    var = float(phi_vec @ inference.Sigma @ phi_vec)
    return float(np.sqrt(max(var, 0.0) / inference.T))
