"""Two-step spectral targeting estimation plus joint QMLE benchmarks.

Step one fixes the unconditional eigenvalues and eigenvectors from the
sample second-moment matrix. Step two minimizes, separately for every
rotated return, the profiled Gaussian criterion

    L_i(kappa) = (1/T) sum_t [ log lam_{i,t} + y_{i,t}^2 / lam_{i,t} ],

with the intercept tied to the targets through
w_i = (1 - b_i) lam_i - sum_j a_ij lam_j. The joint QMLE optimizes all
eigenvalues, rotation angles and dynamic coefficients simultaneously and is
kept as a benchmark.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .exceptions import ConvergenceError, ValidationError
from .model import DynamicsParams, ModelSpec
from .panel import ReturnPanel
from .spectral import (
    SpectralTarget,
    _sign_fix,
    eigen_sym,
    givens_product,
    givens_product_derivatives,
    sample_covariance,
)

__all__ = [
    "OptimizerConfig",
    "EquationParams",
    "EquationDiagnostics",
    "ModelFit",
    "rotate_returns",
    "equation_nll",
    "equation_score",
    "fit_equation",
    "fit_spectral_targeting",
    "fit_joint_qmle",
    "fit_rotation_first_step",
    "rotation_cost",
    "joint_fit_invocations",
]

PENALTY_BASE = 1e10
PENALTY_SCALE = 1e10

# instrumentation: number of joint-QMLE optimizations performed
_joint_fit_calls = 0


def joint_fit_invocations() -> int:
    """How many joint-QMLE optimizations have run in this process."""
    return _joint_fit_calls


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for the box-constrained quasi-Newton equation fits."""

    max_iterations: int = 500
    grad_tol: float = 1e-9
    param_tol: float = 1e-7
    multi_start: int = 3
    starts: Optional[Sequence] = None
    a_max: float = 1.0
    b_max: float = 1.0 - 1e-6
    w_floor_rel: float = 1e-10

    def __post_init__(self):
        if self.grad_tol <= 0 or self.param_tol <= 0:
            raise ValidationError("tolerances must be positive")
        if self.max_iterations < 1 or self.multi_start < 1:
            raise ValidationError("iteration and start counts must be positive")


DEFAULT_CONFIG = OptimizerConfig()


@dataclass(frozen=True)
class EquationParams:
    """Dynamic coefficients of one rotated return: [a_i1, ..., a_ip, b_i]."""

    kappa: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kappa", np.asarray(self.kappa, dtype=float))

    @property
    def a(self) -> np.ndarray:
        return self.kappa[:-1]

    @property
    def b(self) -> float:
        return float(self.kappa[-1])


@dataclass
class EquationDiagnostics:
    """Optimizer outcome for one equation fit."""

    converged: bool
    n_iterations: int
    nll: float
    active_constraints: list = field(default_factory=list)
    start_traces: list = field(default_factory=list)


@dataclass
class ModelFit:
    """Fitted model: first-step targets plus all per-equation dynamics."""

    target: SpectralTarget
    kappas: np.ndarray            # p x (p+1)
    W: np.ndarray
    equation_nlls: np.ndarray
    method: str
    diag_a: bool = False
    diagnostics: list = field(default_factory=list)
    converged: bool = True

    @property
    def p(self) -> int:
        return self.kappas.shape[0]

    @property
    def total_nll(self) -> float:
        return float(self.equation_nlls.sum())

    @property
    def dynamics(self) -> DynamicsParams:
        return DynamicsParams(
            A=self.kappas[:, :-1].copy(), b=self.kappas[:, -1].copy(), diag_a=self.diag_a
        )

    def spec(self) -> ModelSpec:
        return ModelSpec(
            V=self.target.V, dynamics=self.dynamics, W=self.W, lam=self.target.lam
        )

    def equation(self, i: int) -> EquationParams:
        return EquationParams(self.kappas[i])


def rotate_returns(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Rotated returns Y_t = V'X_t, computed row-wise."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = np.asarray(V, dtype=float)
    if X.shape[1] != V.shape[0]:
        raise ValidationError(
            f"panel has {X.shape[1]} columns but V is {V.shape[0]}x{V.shape[1]}"
        )
    return X @ V


def _as_lam(gamma) -> np.ndarray:
    if isinstance(gamma, SpectralTarget):
        return gamma.lam
    return np.atleast_1d(np.asarray(gamma, dtype=float))


def _recursion(c: np.ndarray, b: float) -> np.ndarray:
    return lfilter([1.0], [1.0, -b], c)


def _lam_path(Y2: np.ndarray, lam_vec: np.ndarray, i: int, a: np.ndarray,
              b: float, lam0: float) -> tuple[np.ndarray, float]:
    """Conditional eigenvalue path of equation i under targeting."""
    T = Y2.shape[0]
    w = (1.0 - b) * lam_vec[i] - float(a @ lam_vec)
    c = np.empty(T)
    c[0] = lam0
    c[1:] = w + Y2[:-1] @ a
    return _recursion(c, b), w


def _recursion_cols(c: np.ndarray, b: float) -> np.ndarray:
    """Column-wise scalar recursion s_t = c_t + b s_{t-1} on a T x k array."""
    return lfilter([1.0], [1.0, -b], c, axis=0)


def _lam_derivs(Y2: np.ndarray, lam_vec: np.ndarray, i: int, b: float,
                lam: np.ndarray) -> np.ndarray:
    """d lam_t / d kappa for every t; the initial value is kappa-free."""
    T, p = Y2.shape
    x = np.empty((T, p + 1))
    x[0] = 0.0
    x[1:, :p] = Y2[:-1] - lam_vec
    x[1:, p] = lam[:-1] - lam_vec[i]
    return _recursion_cols(x, b)


def _init_lam0(lam_vec: np.ndarray, Y2: np.ndarray, i: int,
               init: Union[str, np.ndarray]) -> float:
    if isinstance(init, str):
        if init == "unconditional":
            return float(lam_vec[i])
        if init == "sample-variance":
            return float(Y2[:, i].mean())
        raise ValidationError(f"unknown initialization scheme {init!r}")
    vec = np.atleast_1d(np.asarray(init, dtype=float))
    return float(vec[i])


def _penalized(w: float, floor: float, lam_vec: np.ndarray, i: int):
    """Smooth pull-back for the infeasible region w <= floor.

    Zero influence at feasible points (the criterion stays exact there); in
    the infeasible region the value is huge with a gradient pointing back
    toward feasibility.
    """
    gap = floor - w
    value = PENALTY_BASE + PENALTY_SCALE * gap * gap
    # dw/dkappa = (-lam_1, ..., -lam_p, -lam_i)
    dw = -np.concatenate([lam_vec, [lam_vec[i]]])
    grad = -2.0 * PENALTY_SCALE * gap * dw
    return value, grad


def _nll_grad_core(kappa: np.ndarray, lam_vec: np.ndarray, Y2: np.ndarray,
                   i: int, init, w_floor_rel: float = DEFAULT_CONFIG.w_floor_rel):
    """Criterion and analytic kappa-gradient on pre-squared rotated returns."""
    p = lam_vec.shape[0]
    a, b = kappa[:p], float(kappa[p])
    floor = w_floor_rel * lam_vec[i]
    w = (1.0 - b) * lam_vec[i] - float(a @ lam_vec)
    if w <= floor or b >= 1.0 or (a < 0).any() or b < 0:
        value, grad = _penalized(w, floor, lam_vec, i)
        return value, grad, False
    lam0 = _init_lam0(lam_vec, Y2, i, init)
    lam, _ = _lam_path(Y2, lam_vec, i, a, b, lam0)
    y2 = Y2[:, i]
    value = float(np.mean(np.log(lam) + y2 / lam))
    dlam = _lam_derivs(Y2, lam_vec, i, b, lam)
    weights = (1.0 - y2 / lam) / lam
    grad = weights @ dlam / Y2.shape[0]
    return value, grad, True


def _check_kappa_shape(kappa, p: int) -> np.ndarray:
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    if kappa.shape != (p + 1,):
        raise ValidationError(f"kappa must have length {p + 1}, got {kappa.shape}")
    return kappa


def equation_nll(kappa, gamma, Y: np.ndarray, i: int,
                 init: Union[str, np.ndarray] = "unconditional") -> float:
    """Profiled Gaussian criterion of one rotated return.

    Returns a large finite penalty (never raises) when the implied intercept
    is non-positive, so optimizers can recover from the invalid region.
    """
    lam_vec = _as_lam(gamma)
    kappa = _check_kappa_shape(kappa, lam_vec.shape[0])
    Y2 = np.atleast_2d(np.asarray(Y, dtype=float)) ** 2
    value, _, _ = _nll_grad_core(kappa, lam_vec, Y2, i, init)
    return value


def equation_score(kappa, gamma, Y: np.ndarray, i: int,
                   init: Union[str, np.ndarray] = "unconditional") -> np.ndarray:
    """Analytic gradient of the equation criterion wrt kappa.

    The rotated returns are constant in kappa, so only the eigenvalue-path
    derivative contributes; that derivative follows the same b-lagged
    recursion as the path itself.
    """
    lam_vec = _as_lam(gamma)
    kappa = _check_kappa_shape(kappa, lam_vec.shape[0])
    Y2 = np.atleast_2d(np.asarray(Y, dtype=float)) ** 2
    _, grad, feasible = _nll_grad_core(kappa, lam_vec, Y2, i, init)
    if not feasible:
        raise ValidationError("score requested at an infeasible point")
    return grad


def equation_score_contributions(kappa, gamma, Y: np.ndarray, i: int,
                                 init: Union[str, np.ndarray] = "unconditional") -> np.ndarray:
    """Per-observation score vectors (T x (p+1)), not averaged.

    Assumes an interior (feasible) point.
    """
    lam_vec = _as_lam(gamma)
    kappa = _check_kappa_shape(kappa, lam_vec.shape[0])
    p = lam_vec.shape[0]
    Y2 = np.atleast_2d(np.asarray(Y, dtype=float)) ** 2
    a, b = kappa[:p], float(kappa[p])
    lam0 = _init_lam0(lam_vec, Y2, i, init)
    lam, _ = _lam_path(Y2, lam_vec, i, a, b, lam0)
    dlam = _lam_derivs(Y2, lam_vec, i, b, lam)
    weights = (1.0 - Y2[:, i] / lam) / lam
    return weights[:, None] * dlam


def equation_kappa_hessian(kappa, gamma, Y: np.ndarray, i: int,
                           init: Union[str, np.ndarray] = "unconditional") -> np.ndarray:
    """Analytic (1/T) sum_t d^2 l_t / dkappa dkappa' at the given point.

    Only the eigenvalue path depends on kappa; its second derivatives vanish
    in the a-a block and follow b-lagged recursions elsewhere.
    """
    lam_vec = _as_lam(gamma)
    kappa = _check_kappa_shape(kappa, lam_vec.shape[0])
    p = lam_vec.shape[0]
    Y2 = np.atleast_2d(np.asarray(Y, dtype=float)) ** 2
    a, b = kappa[:p], float(kappa[p])
    lam0 = _init_lam0(lam_vec, Y2, i, init)
    lam, _ = _lam_path(Y2, lam_vec, i, a, b, lam0)
    dlam = _lam_derivs(Y2, lam_vec, i, b, lam)
    T = Y2.shape[0]
    y2 = Y2[:, i]
    w1 = (1.0 - y2 / lam) / lam                # multiplies d2lam
    w2 = (2.0 * y2 / lam - 1.0) / (lam * lam)  # multiplies dlam outer products
    hess = (dlam * w2[:, None]).T @ dlam / T
    # second derivatives of the path: zero in a-a, recursions for a-b and b-b
    x = np.empty((T, p + 1))
    x[0] = 0.0
    x[1:, :p] = dlam[:-1, :p]
    x[1:, p] = 2.0 * dlam[:-1, p]
    d2 = _recursion_cols(x, b)
    cross = w1 @ d2 / T   # entries j<p are a_j-b terms, entry p the b-b term
    hess[:p, p] += cross[:p]
    hess[p, :p] += cross[:p]
    hess[p, p] += cross[p]
    return hess


def _default_starts(p: int, i: int, cfg: OptimizerConfig) -> list[np.ndarray]:
    if cfg.starts is not None:
        return [np.asarray(s, dtype=float) for s in cfg.starts][: cfg.multi_start]
    schemes = [(0.05, 0.01, 0.85), (0.10, 0.0, 0.80), (0.02, 0.0, 0.90)]
    starts = []
    for own, off, b in schemes[: cfg.multi_start]:
        kappa = np.full(p + 1, off)
        kappa[i] = own
        kappa[p] = b
        starts.append(kappa)
    return starts


def _repair_start(kappa: np.ndarray, lam_vec: np.ndarray, i: int,
                  floor: float) -> np.ndarray:
    """Shrink a start toward zero dynamics until the intercept is feasible."""
    kappa = kappa.copy()
    for _ in range(60):
        w = (1.0 - kappa[-1]) * lam_vec[i] - float(kappa[:-1] @ lam_vec)
        if w > 2.0 * floor:
            return kappa
        kappa *= 0.5
    kappa[:] = 0.0
    return kappa


def fit_equation(Y: np.ndarray, gamma_hat, i: int,
                 cfg: OptimizerConfig = DEFAULT_CONFIG,
                 diag_a: bool = False, fit_b: bool = True,
                 init: Union[str, np.ndarray] = "unconditional"):
    """Fit the dynamic coefficients of rotated return i given the targets.

    Box-constrained L-BFGS-B with the analytic score and multi-start; the
    implied-intercept constraint is enforced through a smooth pull-back that
    leaves the criterion untouched at feasible points.

    Returns (EquationParams, EquationDiagnostics).
    """
    lam_vec = _as_lam(gamma_hat)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    Y2 = Y**2
    p = lam_vec.shape[0]
    floor = cfg.w_floor_rel * lam_vec[i]

    if diag_a:
        free = [i, p] if fit_b else [i]
    else:
        free = list(range(p + 1)) if fit_b else list(range(p))

    bounds = [
        (0.0, cfg.b_max) if idx == p else (0.0, cfg.a_max) for idx in free
    ]

    def objective(free_vals):
        kappa = np.zeros(p + 1)
        kappa[free] = free_vals
        value, grad, _ = _nll_grad_core(kappa, lam_vec, Y2, i, init, cfg.w_floor_rel)
        return value, grad[free]

    traces = []
    best = None
    for start_full in _default_starts(p, i, cfg):
        start_full = start_full.copy()
        if not fit_b:
            start_full[p] = 0.0
        if diag_a:
            keep = np.zeros(p + 1, dtype=bool)
            keep[free] = True
            start_full[~keep] = 0.0
        start_full = _repair_start(start_full, lam_vec, i, floor)
        res = minimize(
            objective,
            start_full[free],
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={
                "maxiter": cfg.max_iterations,
                "gtol": cfg.grad_tol,
                "ftol": 1e-14,
            },
        )
        traces.append(
            {
                "start": start_full.copy(),
                "success": bool(res.success),
                "nll": float(res.fun),
                "iterations": int(res.nit),
                "message": str(res.message),
            }
        )
        if res.success and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise ConvergenceError(
            f"all {len(traces)} starts failed to converge for equation {i}",
            traces=traces,
        )
    kappa = np.zeros(p + 1)
    kappa[free] = best.x
    active = []
    for slot, idx in enumerate(free):
        lo, hi = bounds[slot]
        name = "b" if idx == p else f"a[{idx}]"
        if best.x[slot] <= lo + 1e-10:
            active.append(f"{name}=lower")
        elif best.x[slot] >= hi - 1e-10:
            active.append(f"{name}=upper")
    w = (1.0 - kappa[p]) * lam_vec[i] - float(kappa[:p] @ lam_vec)
    if w < 1e-8 * lam_vec[i]:
        active.append("w=floor")
    diag = EquationDiagnostics(
        converged=bool(best.success),
        n_iterations=int(best.nit),
        nll=float(best.fun),
        active_constraints=active,
        start_traces=traces,
    )
    return EquationParams(kappa), diag


def _panel_values(X) -> np.ndarray:
    if isinstance(X, ReturnPanel):
        return X.values
    return np.atleast_2d(np.asarray(X, dtype=float))


def _check_panel(X: np.ndarray, labels=None):
    T, p = X.shape
    if T <= p:
        raise ValidationError(f"need T > p, got T={T}, p={p}")
    spans = np.ptp(X, axis=0)
    flat = np.flatnonzero(spans == 0.0)
    if flat.size:
        names = [labels[j] if labels else f"column {j}" for j in flat]
        raise ValidationError(f"constant column(s): {names}")


def fit_spectral_targeting(X, cfg: OptimizerConfig = DEFAULT_CONFIG,
                           diag_a: bool = False, fit_b: bool = True,
                           init: Union[str, np.ndarray] = "unconditional",
                           parallel: bool = False) -> ModelFit:
    """Two-step estimator: moment targets, then independent equation fits.

    Step one computes the uncentered second-moment matrix and its identified
    eigendecomposition; step two fits each rotated return separately (the
    equation criteria are orthogonal given the targets, so they may run
    concurrently).
    """
    labels = X.labels if isinstance(X, ReturnPanel) else None
    Xv = _panel_values(X)
    _check_panel(Xv, labels)
    target = eigen_sym(sample_covariance(Xv))
    Y = rotate_returns(Xv, target.V)
    p = Xv.shape[1]

    def fit_one(i):
        return fit_equation(Y, target, i, cfg, diag_a=diag_a, fit_b=fit_b, init=init)

    if parallel and p > 1:
        with ThreadPoolExecutor(max_workers=min(p, 8)) as pool:
            results = list(pool.map(fit_one, range(p)))
    else:
        results = [fit_one(i) for i in range(p)]

    kappas = np.vstack([eq.kappa for eq, _ in results])
    diags = [d for _, d in results]
    W = np.array(
        [
            (1.0 - kappas[i, p]) * target.lam[i] - kappas[i, :p] @ target.lam
            for i in range(p)
        ]
    )
    nlls = np.array([d.nll for d in diags])
    return ModelFit(
        target=target,
        kappas=kappas,
        W=W,
        equation_nlls=nlls,
        method="STE",
        diag_a=diag_a,
        diagnostics=diags,
        converged=all(d.converged for d in diags),
    )


# ---------------------------------------------------------------------------
# joint QMLE over (lam, phi, kappa)
# ---------------------------------------------------------------------------


def _match_angles(V_hat: np.ndarray, lower: float, upper: float):
    """Angles whose Givens product spans the same columns as V_hat.

    Minimizes the sum of (1 - squared column cosine similarity), which is
    invariant to the unidentified column signs. Returns (angles, residual);
    a residual near zero means V_hat lies in the constrained rotation branch
    up to column signs.
    """
    p = V_hat.shape[0]
    n = p * (p - 1) // 2
    if n == 0:
        return np.empty(0), 0.0

    def cost(phi):
        V, dV = givens_product_derivatives(phi, p)
        dots = np.einsum("ij,ij->j", V, V_hat)
        val = float(p - np.sum(dots * dots))
        grad = np.empty(n)
        for k in range(n):
            ddots = np.einsum("ij,ij->j", dV[k], V_hat)
            grad[k] = -2.0 * float(np.sum(dots * ddots))
        return val, grad

    best = None
    for start in (np.full(n, np.pi / 4), np.full(n, 0.5), np.full(n, 1.0)):
        res = minimize(cost, start, jac=True, method="L-BFGS-B",
                       bounds=[(lower, upper)] * n,
                       options={"maxiter": 300})
        if best is None or res.fun < best.fun:
            best = res
    return best.x, float(best.fun)


def _joint_layout(p: int, diag_a: bool):
    n_phi = p * (p - 1) // 2
    kappa_len = 2 if diag_a else p + 1
    return n_phi, kappa_len, p + n_phi + p * kappa_len


def _joint_nll_grad(theta: np.ndarray, X: np.ndarray, p: int, diag_a: bool,
                    w_floor_rel: float):
    """Joint criterion with the analytic gradient wrt (lam, phi, kappa)."""
    n_phi, kappa_len, _ = _joint_layout(p, diag_a)
    T = X.shape[0]
    lam_vec = theta[:p]
    phi = theta[p:p + n_phi]
    grad = np.zeros_like(theta)

    V, dV = givens_product_derivatives(phi, p)
    Y = X @ V
    Y2 = Y**2
    # Ydot[t, m, j] = d y_{j,t} / d phi_m
    Ydot = np.tensordot(X, dV, axes=([1], [1])) if n_phi else np.empty((T, 0, p))

    total = 0.0
    feasible = True
    for i in range(p):
        off = p + n_phi + i * kappa_len
        block = theta[off:off + kappa_len]
        a = np.zeros(p)
        if diag_a:
            a[i], b = block[0], float(block[1])
        else:
            a, b = block[:p].copy(), float(block[p])
        floor = w_floor_rel * max(lam_vec[i], 1e-12)
        w = (1.0 - b) * lam_vec[i] - float(a @ lam_vec)
        if w <= floor:
            feasible = False
            gap = floor - w
            total += PENALTY_BASE + PENALTY_SCALE * gap * gap
            pull = 2.0 * PENALTY_SCALE * gap
            # dw/dlam_k = (1-b) delta_ik - a_k ; dw/da_j = -lam_j ; dw/db = -lam_i
            dw_lam = -a.copy()
            dw_lam[i] += 1.0 - b
            grad[:p] += -pull * dw_lam
            if diag_a:
                grad[off] += pull * lam_vec[i]
                grad[off + 1] += pull * lam_vec[i]
            else:
                grad[off:off + p] += pull * lam_vec
                grad[off + p] += pull * lam_vec[i]
            continue
        lam, _ = _lam_path(Y2, lam_vec, i, a, b, float(lam_vec[i]))
        y2 = Y2[:, i]
        total += float(np.mean(np.log(lam) + y2 / lam))
        weights = (1.0 - y2 / lam) / lam

        # kappa block: same machinery as the per-equation fit
        dlam_k = _lam_derivs(Y2, lam_vec, i, b, lam)
        g_kappa = weights @ dlam_k / T
        if diag_a:
            grad[off] += g_kappa[i]
            grad[off + 1] += g_kappa[p]
        else:
            grad[off:off + p] += g_kappa[:p]
            grad[off + p] += g_kappa[p]

        # lam block: dw/dlam_k drives every step, the init contributes delta_ik
        x = np.empty((T, p))
        dw = -a.copy()
        dw[i] += 1.0 - b
        x[0] = 0.0
        x[0, i] = 1.0
        x[1:] = dw
        dlam_lam = _recursion_cols(x, b)
        grad[:p] += weights @ dlam_lam / T

        # phi block: the path moves through the squared rotated returns and
        # the y_{i,t}^2 numerator moves directly
        if n_phi:
            x = np.empty((T, n_phi))
            x[0] = 0.0
            x[1:] = 2.0 * np.einsum("tj,tmj->tm", Y[:-1] * a, Ydot[:-1])
            dlam_phi = _recursion_cols(x, b)
            direct = 2.0 * (Y[:, i] / lam) @ Ydot[:, :, i]
            grad[p:p + n_phi] += (weights @ dlam_phi + direct) / T
    return total, grad, feasible


def fit_joint_qmle(X, cfg: OptimizerConfig = DEFAULT_CONFIG,
                   diag_a: bool = False) -> ModelFit:
    """Joint QMLE over eigenvalues, rotation angles and all dynamics.

    The eigenvector matrix is parameterized by plane rotations with angles
    constrained to (0, pi/2) for identification; after optimization the
    result is renormalized to the sorted/sign-fixed convention so it is
    directly comparable with the two-step fit. Non-convergence is reported
    through the ``converged`` flag and per-start traces, never hidden.
    """
    global _joint_fit_calls
    labels = X.labels if isinstance(X, ReturnPanel) else None
    Xv = _panel_values(X)
    _check_panel(Xv, labels)
    T, p = Xv.shape
    n_phi, kappa_len, n_theta = _joint_layout(p, diag_a)

    H = sample_covariance(Xv)
    moment = eigen_sym(H)
    lo, hi = 1e-6, np.pi / 2 - 1e-6

    # The constrained rotation branch fixes its own column ordering, which
    # need not be the sorted one; try both orderings of the moment basis and
    # keep the better branch representative. lam starts are always read off
    # the rotated diagonal so the association with the angles is consistent.
    candidates = []
    for Vcand in (moment.V, moment.V[:, ::-1]):
        phi_c, resid = _match_angles(Vcand, lo, hi)
        candidates.append((resid, phi_c))
    candidates.sort(key=lambda c: c[0])
    phi0 = candidates[0][1]
    lam0 = np.einsum("ji,jk,ki->i", givens_product(phi0, p), H.values,
                     givens_product(phi0, p)) if n_phi else moment.lam.copy()

    starts = []
    for own, off, b in [(0.05, 0.01, 0.85), (0.10, 0.0, 0.80)]:
        theta = np.empty(n_theta)
        theta[:p] = lam0
        theta[p:p + n_phi] = phi0
        for i in range(p):
            base = p + n_phi + i * kappa_len
            if diag_a:
                theta[base] = own
                theta[base + 1] = b
            else:
                theta[base:base + p] = off
                theta[base + i] = own
                theta[base + p] = b
        starts.append(theta)

    bounds = [(1e-8, None)] * p + [(lo, hi)] * n_phi
    for _ in range(p):
        if diag_a:
            bounds += [(0.0, cfg.a_max), (0.0, cfg.b_max)]
        else:
            bounds += [(0.0, cfg.a_max)] * p + [(0.0, cfg.b_max)]

    def objective(theta):
        value, grad, _ = _joint_nll_grad(theta, Xv, p, diag_a, cfg.w_floor_rel)
        return value, grad

    _joint_fit_calls += 1
    traces = []
    best = None
    for theta0 in starts:
        res = minimize(objective, theta0, jac=True, method="L-BFGS-B",
                       bounds=bounds,
                       options={"maxiter": cfg.max_iterations,
                                "gtol": cfg.grad_tol, "ftol": 1e-14})
        traces.append({
            "success": bool(res.success),
            "nll": float(res.fun),
            "iterations": int(res.nit),
            "message": str(res.message),
        })
        if best is None or res.fun < best.fun:
            best = res

    theta = best.x
    lam_vec = theta[:p].copy()
    phi = theta[p:p + n_phi].copy()
    V = givens_product(phi, p)
    kappas = np.zeros((p, p + 1))
    for i in range(p):
        base = p + n_phi + i * kappa_len
        if diag_a:
            kappas[i, i] = theta[base]
            kappas[i, p] = theta[base + 1]
        else:
            kappas[i, :p] = theta[base:base + p]
            kappas[i, p] = theta[base + p]

    # renormalize to the identified convention: sort eigenvalues ascending,
    # sign-fix columns, permute equations and spill-over columns alike
    order = np.argsort(lam_vec, kind="stable")
    lam_sorted = lam_vec[order]
    V_sorted = _sign_fix(V[:, order])
    A = kappas[:, :p][np.ix_(order, order)]
    bvec = kappas[order, p]
    kappas = np.hstack([A, bvec[:, None]])
    target = SpectralTarget(lam=lam_sorted, V=V_sorted,
                            recon_residual=0.0, near_repeated=False)
    active = []
    for m in range(n_phi):
        if phi[m] <= lo + 1e-9:
            active.append(f"phi[{m}]=lower")
        elif phi[m] >= hi - 1e-9:
            active.append(f"phi[{m}]=upper")

    Ysorted = rotate_returns(Xv, V_sorted)
    nlls = np.array([
        equation_nll(kappas[i], lam_sorted, Ysorted, i) for i in range(p)
    ])
    W = np.array([
        (1.0 - kappas[i, p]) * lam_sorted[i] - kappas[i, :p] @ lam_sorted
        for i in range(p)
    ])
    diag = EquationDiagnostics(
        converged=bool(best.success),
        n_iterations=int(best.nit),
        nll=float(best.fun),
        active_constraints=active,
        start_traces=traces,
    )
    return ModelFit(
        target=target,
        kappas=kappas,
        W=W,
        equation_nlls=nlls,
        method="joint-QMLE",
        diag_a=diag_a,
        diagnostics=[diag],
        converged=bool(best.success),
    )


def rotation_cost(phi: np.ndarray, lam_vec: np.ndarray, H: np.ndarray) -> float:
    """Static Gaussian cost of a candidate (phi, lam) pair.

    Equals the sample average of log det(Lam) + X'V Lam^{-1} V'X expressed
    through the second-moment matrix.
    """
    p = H.shape[0]
    V = givens_product(phi, p)
    m = np.diag(V.T @ H @ V)
    return float(np.sum(np.log(lam_vec) + m / lam_vec))


def fit_rotation_first_step(X, cfg: OptimizerConfig = DEFAULT_CONFIG,
                            phi_lower: float = 1e-6) -> SpectralTarget:
    """Rotation-parameterized maximum-likelihood alternative to the targets.

    The eigenvalues profile out in closed form (lam_i(phi) is the i-th
    diagonal of the rotated second-moment matrix), so only the angles are
    optimized. The result is renormalized to the identified convention.
    """
    Xv = _panel_values(X)
    _check_panel(Xv, X.labels if isinstance(X, ReturnPanel) else None)
    H = sample_covariance(Xv).values
    p = H.shape[0]
    n_phi = p * (p - 1) // 2
    hi = np.pi / 2 - 1e-6
    if n_phi == 0:
        return eigen_sym(H)

    def objective(phi):
        V, dV = givens_product_derivatives(phi, p)
        m = np.einsum("ji,jk,ki->i", V, H, V)
        val = float(np.sum(np.log(m)))
        grad = np.empty(n_phi)
        for k in range(n_phi):
            dm = 2.0 * np.einsum("ji,jk,ki->i", dV[k], H, V)
            grad[k] = float(np.sum(dm / m))
        return val, grad

    moment = eigen_sym(H)
    matched = min(
        (_match_angles(Vc, phi_lower, hi) for Vc in (moment.V, moment.V[:, ::-1])),
        key=lambda t: t[1],
    )[0]
    starts = [
        np.clip(matched, phi_lower, hi),
        np.full(n_phi, np.pi / 4),
        np.full(n_phi, 0.5),
    ]
    best = None
    traces = []
    for phi0 in starts:
        res = minimize(objective, phi0, jac=True, method="L-BFGS-B",
                       bounds=[(phi_lower, hi)] * n_phi,
                       options={"maxiter": cfg.max_iterations,
                                "gtol": cfg.grad_tol, "ftol": 1e-14})
        traces.append({"success": bool(res.success), "cost": float(res.fun)})
        if res.success and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise ConvergenceError("rotation first step failed to converge", traces=traces)
    V = givens_product(best.x, p)
    lam = np.einsum("ji,jk,ki->i", V, H, V).copy()
    order = np.argsort(lam, kind="stable")
    return SpectralTarget(lam=lam[order], V=_sign_fix(V[:, order]),
                          recon_residual=float("nan"), near_repeated=False)
