"""Filtered historical simulation, portfolio VaR and coverage backtests.

Forecasts resample whole rows of standardized residuals (preserving their
contemporaneous dependence) and push them through the fitted eigenvalue
recursion. Backtest adequacy uses the unconditional-coverage, independence
and conditional-coverage likelihood ratio tests on the hit sequence.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import chi2

from .estimation import ModelFit, OptimizerConfig, DEFAULT_CONFIG, \
    fit_joint_qmle, fit_spectral_targeting, rotate_returns
from .exceptions import ValidationError
from .model import filter_eigenvalues
from .panel import ReturnPanel, align_weights

__all__ = [
    "ResidualPanel",
    "VaRBacktestReport",
    "standardized_residuals",
    "fhs_forecast",
    "var_from_distribution",
    "hit_sequence",
    "christoffersen_tests",
    "rolling_backtest",
]


@dataclass(frozen=True)
class ResidualPanel:
    """Standardized residuals Z_t = diag(lam_t)^(-1/2) V'X_t."""

    Z: np.ndarray
    column_variances: np.ndarray

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        if not np.all(np.isfinite(Z)):
            raise ValidationError("standardized residuals contain non-finite values")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(
            self, "column_variances", np.asarray(self.column_variances, dtype=float)
        )

    @property
    def T(self) -> int:
        return self.Z.shape[0]


@dataclass
class PortfolioBacktest:
    """Hit statistics and test results for one portfolio."""

    name: str
    pi_hat: float
    lr_uc: Optional[float]
    lr_ind: Optional[float]
    lr_cc: Optional[float]
    p_uc: Optional[float]
    p_ind: Optional[float]
    p_cc: Optional[float]
    var_path: np.ndarray = field(repr=False, default=None)
    realized: np.ndarray = field(repr=False, default=None)
    hits: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "pi_hat": self.pi_hat,
            "lr_uc": self.lr_uc,
            "lr_ind": self.lr_ind,
            "lr_cc": self.lr_cc,
            "p_uc": self.p_uc,
            "p_ind": self.p_ind,
            "p_cc": self.p_cc,
        }


@dataclass
class VaRBacktestReport:
    """Rolling backtest outcome across portfolios."""

    portfolios: list
    horizon: int
    alpha: float
    window: int
    n_forecasts: int
    refit_seconds: list = field(default_factory=list)

    @property
    def mean_refit_seconds(self) -> float:
        return float(np.mean(self.refit_seconds)) if self.refit_seconds else float("nan")

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "alpha": self.alpha,
            "window": self.window,
            "n_forecasts": self.n_forecasts,
            "mean_refit_seconds": self.mean_refit_seconds,
            "portfolios": [pf.to_dict() for pf in self.portfolios],
        }


def standardized_residuals(fit: ModelFit, X, init="unconditional") -> ResidualPanel:
    """Invert the fitted volatility filter: Z_t = diag(lam_t)^(-1/2) V'X_t."""
    Xv = X.values if isinstance(X, ReturnPanel) else np.atleast_2d(np.asarray(X, float))
    Y = rotate_returns(Xv, fit.target.V)
    path = filter_eigenvalues(fit.spec(), Y, init=init)
    Z = Y / np.sqrt(path.lam_t)
    return ResidualPanel(Z=Z, column_variances=Z.var(axis=0))


def fhs_cumulative_returns(
    fit: ModelFit,
    X,
    h: int = 1,
    n_draws: int = 10_000,
    rng_seed=0,
    residuals: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Simulated h-period cumulative asset returns from the filtered state.

    Residual rows are drawn iid with replacement (preserving their
    contemporaneous dependence) and propagated through the fitted recursion
    for h steps. Returns an n_draws x p matrix of summed per-step returns;
    any portfolio's h-period return is its weighted row sum.
    ``residuals`` is a test hook replacing the fit's own standardized rows.
    """
    if h < 1:
        raise ValidationError("horizon must be at least 1")
    if n_draws < 1000:
        raise ValidationError("need n_draws >= 1000 for a stable quantile")
    Xv = X.values if isinstance(X, ReturnPanel) else np.atleast_2d(np.asarray(X, float))
    V = fit.target.V
    A, b, W = fit.dynamics.A, fit.dynamics.b, fit.W
    Y = rotate_returns(Xv, V)
    path = filter_eigenvalues(fit.spec(), Y)
    if residuals is None:
        Z = Y / np.sqrt(path.lam_t)
    else:
        Z = np.atleast_2d(np.asarray(residuals, dtype=float))
    # one step ahead of the sample end is deterministic
    lam_next = W + A @ (Y[-1] ** 2) + b * path.lam_t[-1]
    rng = np.random.default_rng(rng_seed)
    idx = rng.integers(0, Z.shape[0], size=(h, n_draws))
    lam = np.broadcast_to(lam_next, (n_draws, V.shape[0])).copy()
    total = np.zeros((n_draws, V.shape[0]))
    for k in range(h):
        Yk = np.sqrt(lam) * Z[idx[k]]
        total += Yk
        if k + 1 < h:
            lam = W + Yk**2 @ A.T + lam * b
    return total @ V.T


def fhs_forecast(
    fit: ModelFit,
    X,
    weights: Union[np.ndarray, dict],
    h: int = 1,
    n_draws: int = 10_000,
    rng_seed=0,
    residuals: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Simulated h-period portfolio returns from the filtered state.

    Deterministic under a fixed seed; long-short and geared weight vectors
    are accepted as-is. Returns the n_draws simulated h-period returns.
    """
    if isinstance(weights, dict):
        if not isinstance(X, ReturnPanel):
            raise ValidationError("label-keyed weights require a labeled panel")
        w = align_weights(weights, X.labels)
    else:
        w = np.atleast_1d(np.asarray(weights, dtype=float))
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite")
    assets = fhs_cumulative_returns(fit, X, h, n_draws, rng_seed, residuals)
    if w.shape != (assets.shape[1],):
        raise ValidationError(
            f"{w.shape[0]} weights for {assets.shape[1]} assets"
        )
    return assets @ w


def var_from_distribution(draws: np.ndarray, alpha: float) -> float:
    """VaR as the negated empirical alpha-quantile (inverse-CDF convention).

    Uses the order statistic with one-based index ceil(alpha * n), so the
    result is exact for enumeration oracles.
    """
    draws = np.atleast_1d(np.asarray(draws, dtype=float))
    if draws.size == 0:
        raise ValidationError("empty draw vector")
    if not (0.0 < alpha <= 0.5):
        raise ValidationError("alpha must be in (0, 0.5]")
    k = int(np.ceil(alpha * draws.size))
    q = np.partition(draws, k - 1)[k - 1]
    return float(-q)


def hit_sequence(realized: np.ndarray, var_path: np.ndarray) -> np.ndarray:
    """Violation indicators: 1 when the realized return breaches -VaR."""
    realized = np.atleast_1d(np.asarray(realized, dtype=float))
    var_path = np.atleast_1d(np.asarray(var_path, dtype=float))
    if realized.shape != var_path.shape:
        raise ValidationError(
            f"length mismatch: {realized.shape} realized vs {var_path.shape} VaR"
        )
    return (realized <= -var_path).astype(int)


def _bernoulli_loglik(n1: int, n0: int, prob: float) -> float:
    # 0 * log 0 = 0 convention
    out = 0.0
    if n1:
        out += n1 * np.log(prob)
    if n0:
        out += n0 * np.log(1.0 - prob)
    return out


def christoffersen_tests(hits: np.ndarray, alpha: float) -> dict:
    """Unconditional-coverage, independence and joint LR coverage tests.

    LR_uc compares the Bernoulli likelihood at the nominal level with the
    observed hit ratio; LR_ind compares pooled versus state-dependent hit
    probabilities of the two-state transition chain; LR_cc is their sum.
    p-values come from chi-square laws with 1, 1 and 2 degrees of freedom.
    With an all-zero or all-one hit sequence the independence statistic is
    undefined and reported as missing.
    """
    hits = np.atleast_1d(np.asarray(hits)).astype(int)
    tau = hits.size
    if tau < 20:
        raise ValidationError(f"need at least 20 observations, got {tau}")
    n1 = int(hits.sum())
    n0 = tau - n1
    pi_hat = n1 / tau

    out = {"pi_hat": pi_hat, "n_obs": tau, "n_hits": n1}
    lr_uc = None
    if 0 < n1 < tau:
        lr_uc = -2.0 * (
            _bernoulli_loglik(n1, n0, alpha) - _bernoulli_loglik(n1, n0, pi_hat)
        )
    elif n1 == 0:
        # likelihood at pi_hat=0 degenerates to 1; the statistic stays defined
        lr_uc = -2.0 * _bernoulli_loglik(n1, n0, alpha)
    else:
        lr_uc = -2.0 * _bernoulli_loglik(n1, n0, alpha)
    out["lr_uc"] = float(lr_uc)
    out["p_uc"] = float(chi2.sf(lr_uc, 1))

    if n1 == 0 or n1 == tau:
        out.update({"lr_ind": None, "p_ind": None, "lr_cc": None, "p_cc": None})
        return out

    prev, curr = hits[:-1], hits[1:]
    n00 = int(np.sum((prev == 0) & (curr == 0)))
    n01 = int(np.sum((prev == 0) & (curr == 1)))
    n10 = int(np.sum((prev == 1) & (curr == 0)))
    n11 = int(np.sum((prev == 1) & (curr == 1)))
    pooled = (n01 + n11) / (n00 + n01 + n10 + n11)
    l_null = _bernoulli_loglik(n01 + n11, n00 + n10, pooled) if 0 < pooled < 1 else 0.0
    l_alt = 0.0
    if n00 + n01 > 0:
        p01 = n01 / (n00 + n01)
        if 0 < p01 < 1:
            l_alt += _bernoulli_loglik(n01, n00, p01)
    if n10 + n11 > 0:
        p11 = n11 / (n10 + n11)
        if 0 < p11 < 1:
            l_alt += _bernoulli_loglik(n11, n10, p11)
    lr_ind = max(0.0, -2.0 * (l_null - l_alt))
    out["lr_ind"] = float(lr_ind)
    out["p_ind"] = float(chi2.sf(lr_ind, 1))
    lr_cc = out["lr_uc"] + lr_ind
    out["lr_cc"] = float(lr_cc)
    out["p_cc"] = float(chi2.sf(lr_cc, 2))
    return out


def rolling_backtest(
    X,
    weights_list: Sequence,
    window: int,
    horizon: int = 1,
    alpha: float = 0.05,
    refit_every: Optional[int] = None,
    method: str = "ste",
    cfg: OptimizerConfig = DEFAULT_CONFIG,
    diag_a: bool = False,
    n_draws: int = 10_000,
    rng_seed: int = 0,
) -> VaRBacktestReport:
    """Rolling-window VaR backtest with periodic refits.

    At each forecast origin the latest fitted model (refit every
    ``refit_every`` observations, default every ``horizon``) filters the
    window data, a filtered-simulation forecast produces the h-period VaR,
    and the realized h-period return on the following non-overlapping block
    scores the hit. Wall-clock per refit is recorded as process CPU time.
    """
    panel = X if isinstance(X, ReturnPanel) else ReturnPanel(
        np.atleast_2d(np.asarray(X, float)),
        [f"A{j}" for j in range(np.atleast_2d(np.asarray(X, float)).shape[1])],
    )
    Xv = panel.values
    T, p = Xv.shape
    if window >= T:
        raise ValidationError(f"window {window} leaves no out-of-sample data (T={T})")
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    refit_every = horizon if refit_every is None else refit_every
    if refit_every < 1:
        raise ValidationError("refit cadence must be >= 1")
    n_forecasts = (T - window) // horizon
    if n_forecasts < 20:
        raise ValidationError(
            f"only {n_forecasts} non-overlapping forecasts available; need >= 20"
        )
    if method not in ("ste", "qmle"):
        raise ValidationError(f"unknown method {method!r}")

    port_w = []
    for k, item in enumerate(weights_list):
        if isinstance(item, tuple):
            name, wmap = item
            w = align_weights(wmap, panel.labels) if isinstance(wmap, dict) else np.asarray(wmap, float)
        else:
            name, w = f"P{k + 1}", np.atleast_1d(np.asarray(item, dtype=float))
        if w.shape != (p,):
            raise ValidationError(f"portfolio {name}: {w.shape[0]} weights for {p} assets")
        port_w.append((name, w))

    ss = np.random.SeedSequence(rng_seed)
    forecast_seeds = ss.spawn(n_forecasts)

    var_paths = np.empty((len(port_w), n_forecasts))
    realized = np.empty((len(port_w), n_forecasts))
    refit_seconds = []
    fit = None
    since_refit = None
    for k in range(n_forecasts):
        origin = window + k * horizon  # first out-of-sample row of the block
        if fit is None or since_refit >= refit_every:
            t0 = time.process_time()
            win = Xv[origin - window:origin]
            if method == "ste":
                fit = fit_spectral_targeting(win, cfg, diag_a=diag_a)
            else:
                fit = fit_joint_qmle(win, cfg, diag_a=diag_a)
            refit_seconds.append(time.process_time() - t0)
            since_refit = 0
        since_refit += horizon
        history = Xv[max(0, origin - window):origin]
        block = Xv[origin:origin + horizon]
        # one scenario set per origin, priced for every portfolio
        assets = fhs_cumulative_returns(
            fit, history, h=horizon, n_draws=n_draws, rng_seed=forecast_seeds[k]
        )
        for j, (name, w) in enumerate(port_w):
            var_paths[j, k] = var_from_distribution(assets @ w, alpha)
            realized[j, k] = float((block @ w).sum())

    portfolios = []
    for j, (name, w) in enumerate(port_w):
        hits = hit_sequence(realized[j], var_paths[j])
        tests = christoffersen_tests(hits, alpha)
        portfolios.append(
            PortfolioBacktest(
                name=name,
                pi_hat=tests["pi_hat"],
                lr_uc=tests["lr_uc"],
                lr_ind=tests["lr_ind"],
                lr_cc=tests["lr_cc"],
                p_uc=tests["p_uc"],
                p_ind=tests["p_ind"],
                p_cc=tests["p_cc"],
                var_path=var_paths[j].copy(),
                realized=realized[j].copy(),
                hits=hits,
            )
        )
    return VaRBacktestReport(
        portfolios=portfolios,
        horizon=horizon,
        alpha=alpha,
        window=window,
        n_forecasts=n_forecasts,
        refit_seconds=refit_seconds,
    )
