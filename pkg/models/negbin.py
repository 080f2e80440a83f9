# models/negbin.py
"""NB2 regression of counts on a log link, with the Poisson fit it is tested against.

The dispersion enters as ln(alpha) so the optimiser runs unconstrained in beta and
box-bounded in ln(alpha). Per observation, with mu = exp(x.beta), m = 1/alpha and
p = 1/(1 + alpha*mu):

    lnL_j = lnG(m + y) - lnG(y + 1) - lnG(m) + m ln p + y ln(1 - p)
"""
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import optimize, stats
from scipy.special import digamma, gammaln, polygamma

from utils.config_utils import DEFAULT_MAX_ITER, DEFAULT_TOL
from utils.errors import (
    DomainError,
    IncompatibleFits,
    LinearPredictorOverflow,
    NonconcaveAtOptimum,
    SingularDesign,
)
from utils.log_utils import get_logger

logger = get_logger("negbin")

ETA_CLIP = 30.0
LOG_ALPHA_FLOOR = math.log(1e-8)
LOG_ALPHA_CEIL = math.log(1e4)
SMALL_ALPHA = 1e-4
# largest count for which the rising-factorial sums are tabulated directly
TABLE_LIMIT = 5_000_000
Z95 = stats.norm.ppf(0.975)


# ---------------- Result Types ----------------
@dataclass(frozen=True)
class FitOptions:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER


@dataclass(frozen=True, eq=False)
class PoissonFit:
    coefficients: np.ndarray
    loglik: float
    converged: bool
    n: int
    iterations: int
    columns: tuple = ()


@dataclass(frozen=True, eq=False)
class FitResult:
    coefficients: np.ndarray
    alpha: float
    log_alpha_se: float
    alpha_se: float
    se: np.ndarray
    z_scores: np.ndarray
    p_values: np.ndarray
    loglik: float
    aic: float
    n: int
    iterations: int
    converged: bool
    gradient_norm_at_opt: float
    tolerance: float
    alpha_at_boundary: bool
    covariance: np.ndarray
    columns: tuple = ()
    candidate: str = None

    @property
    def k(self):
        # dispersion counts as a parameter
        return len(self.coefficients) + 1

    @property
    def beta_covariance(self):
        p = len(self.coefficients)
        return self.covariance[:p, :p]

    def coefficient(self, name):
        return float(self.coefficients[self.columns.index(name)])

    def fitted_mu(self, X):
        return np.exp(np.clip(np.asarray(X, dtype=float) @ self.coefficients, -ETA_CLIP, ETA_CLIP))

    def to_dict(self, lr=None):
        payload = {
            "candidate": self.candidate,
            "columns": list(self.columns),
            "beta": self.coefficients.tolist(),
            "se": self.se.tolist(),
            "z": self.z_scores.tolist(),
            "p": self.p_values.tolist(),
            "alpha": self.alpha,
            "alpha_se": self.alpha_se,
            "ln_alpha": math.log(self.alpha),
            "log_alpha_se": self.log_alpha_se,
            "alpha_at_boundary": self.alpha_at_boundary,
            "loglik": self.loglik,
            "aic": self.aic,
            "n": self.n,
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm_at_opt,
        }
        if lr is not None:
            payload["lr_stat"] = lr.statistic
            payload["lr_p"] = lr.p_value
        return payload


@dataclass(frozen=True)
class OverdispersionTest:
    statistic: float
    p_value: float


# ---------------- Input checks ----------------
def _as_counts(y):
    y = np.asarray(y)
    if y.ndim != 1:
        raise DomainError("y must be a vector")
    yf = y.astype(float)
    if np.any(~np.isfinite(yf)) or np.any(yf < 0) or np.any(yf != np.floor(yf)):
        raise DomainError("y must hold non-negative integer counts")
    return yf


def _as_design(y, X):
    y = _as_counts(y)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DomainError(f"X shape {X.shape} does not match {y.shape[0]} observation(s)")
    return y, X


def _as_beta(X, beta):
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (X.shape[1],):
        raise DomainError(f"beta has {beta.size} entries, X has {X.shape[1]} column(s)")
    return beta


def _check_alpha(alpha):
    if not np.isfinite(alpha) or alpha <= 0:
        raise DomainError(f"alpha must be > 0, got {alpha}", alpha=float(alpha))


def _check_rank(X):
    scale = np.abs(X).max(axis=0)
    scale[scale == 0] = 1.0
    rank = np.linalg.matrix_rank(X / scale)
    if rank < X.shape[1]:
        raise SingularDesign(f"design has rank {rank} < {X.shape[1]} column(s)", rank=int(rank), columns=X.shape[1])


def _linear_predictor(X, beta, warn=True):
    eta = X @ beta
    bad = ~np.isfinite(eta)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise LinearPredictorOverflow(f"non-finite linear predictor at row {row}", row=row)
    if np.any(np.abs(eta) > ETA_CLIP):
        if warn:
            logger.warning(f"⚠️ Linear predictor outside ±{ETA_CLIP:g} in {int(np.sum(np.abs(eta) > ETA_CLIP))} row(s), clipped")
        eta = np.clip(eta, -ETA_CLIP, ETA_CLIP)
    return eta


# ---------------- Dispersion terms ----------------
def _dispersion_terms(y, alpha, order):
    """D0 = lnG(m+y) - lnG(m) - y ln m and its alpha-derivatives.

    Returns [D0, D1, D2][:order + 1] with dD0/da = D1 and dD1/da = -D2.
    Small counts use the exact sums over k < y of log1p(k a), k/(1+k a), (k/(1+k a))^2.
    """
    ymax = int(y.max()) if y.size else 0
    if ymax <= TABLE_LIMIT:
        idx = y.astype(np.int64)
        k = np.arange(ymax, dtype=float)
        ratio = k / (1.0 + k * alpha)
        terms = [np.log1p(k * alpha), ratio, ratio ** 2]
        return [np.concatenate(([0.0], np.cumsum(t)))[idx] for t in terms[: order + 1]]

    m = 1.0 / alpha
    out = [gammaln(m + y) - gammaln(m) - y * math.log(m)]
    if order >= 1:
        dpsi = digamma(m + y) - digamma(m)
        out.append(y / alpha - dpsi / alpha ** 2)
    if order >= 2:
        dpsi1 = polygamma(1, m + y) - polygamma(1, m)
        out.append(-(dpsi1 / alpha ** 4 + 2.0 * dpsi / alpha ** 3 - y / alpha ** 2))
    return out


# ---------------- Log-likelihoods ----------------
def _nb_loglik(y, X, beta, alpha, warn=False):
    eta = _linear_predictor(X, beta, warn)
    u = alpha * np.exp(eta)
    log1p_u = np.log1p(u)
    if alpha >= SMALL_ALPHA:
        m = 1.0 / alpha
        # ln p = -log1p(u); ln(1 - p) = ln u - log1p(u)
        terms = (gammaln(m + y) - gammaln(y + 1.0) - gammaln(m)
                 - m * log1p_u + y * (np.log(alpha) + eta - log1p_u))
    else:
        # near the Poisson limit lnG(m + y) - lnG(m) loses every digit
        (d0,) = _dispersion_terms(y, alpha, 0)
        terms = d0 - gammaln(y + 1.0) + y * eta - (1.0 / alpha + y) * log1p_u
    return float(np.sum(terms))


def nb_loglik(y, X, beta, alpha):
    """Negative binomial log-likelihood summed over rows."""
    y, X = _as_design(y, X)
    beta = _as_beta(X, beta)
    _check_alpha(alpha)
    return _nb_loglik(y, X, beta, float(alpha), warn=True)


def poisson_loglik(y, X, beta):
    y, X = _as_design(y, X)
    beta = _as_beta(X, beta)
    return _poisson_loglik(y, X, beta, warn=True)


def _poisson_loglik(y, X, beta, warn=False):
    eta = _linear_predictor(X, beta, warn)
    return float(np.sum(y * eta - np.exp(eta) - gammaln(y + 1.0)))


# ---------------- Derivatives ----------------
def _nb_score(y, X, beta, alpha, warn=False):
    eta = _linear_predictor(X, beta, warn)
    mu = np.exp(eta)
    u = alpha * mu
    g_beta = X.T @ ((y - mu) / (1.0 + u))
    _, d1 = _dispersion_terms(y, alpha, 1)
    g_log_alpha = np.sum(alpha * d1 + np.log1p(u) / alpha - (1.0 + alpha * y) * mu / (1.0 + u))
    return np.append(g_beta, g_log_alpha)


def nb_score(y, X, beta, alpha):
    """Analytic gradient of nb_loglik over (beta, ln alpha)."""
    y, X = _as_design(y, X)
    beta = _as_beta(X, beta)
    _check_alpha(alpha)
    return _nb_score(y, X, beta, float(alpha), warn=True)


def _nb_hessian(y, X, beta, alpha, warn=False):
    eta = _linear_predictor(X, beta, warn)
    mu = np.exp(eta)
    u = alpha * mu
    resid = y - mu
    _, d1, d2 = _dispersion_terms(y, alpha, 2)
    h_eta = -mu * (1.0 + alpha * y) / (1.0 + u) ** 2
    h_cross = -u * resid / (1.0 + u) ** 2
    h_log_alpha = (alpha * d1 - alpha ** 2 * d2 + mu / (1.0 + u)
                   - np.log1p(u) / alpha - u * resid / (1.0 + u) ** 2)
    p = X.shape[1]
    H = np.empty((p + 1, p + 1))
    H[:p, :p] = (X * h_eta[:, None]).T @ X
    H[:p, p] = H[p, :p] = X.T @ h_cross
    H[p, p] = np.sum(h_log_alpha)
    return H


def nb_hessian(y, X, beta, alpha):
    """Analytic Hessian of nb_loglik over (beta, ln alpha)."""
    y, X = _as_design(y, X)
    beta = _as_beta(X, beta)
    _check_alpha(alpha)
    return _nb_hessian(y, X, beta, float(alpha), warn=True)


# ---------------- Poisson ----------------
def fit_poisson(y, X, options=None, columns=None) -> PoissonFit:
    """Poisson MLE by Newton-Raphson (IRLS) with step halving."""
    options = options or FitOptions()
    y, X = _as_design(y, X)
    _check_rank(X)

    beta = np.linalg.lstsq(X, np.log(y + 0.5), rcond=None)[0]
    loglik = _poisson_loglik(y, X, beta)
    converged = False
    iterations = 0
    for iterations in range(1, options.max_iter + 1):
        mu = np.exp(_linear_predictor(X, beta, warn=False))
        grad = X.T @ (y - mu)
        if np.max(np.abs(grad)) < options.tol * max(1.0, abs(loglik)):
            converged = True
            break
        info = (X * mu[:, None]).T @ X
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError as e:
            raise SingularDesign("Poisson information matrix is singular") from e
        t = 1.0
        while True:
            trial = beta + t * step
            trial_ll = _poisson_loglik(y, X, trial)
            if trial_ll >= loglik - 1e-12 * max(1.0, abs(loglik)) or t < 1e-10:
                break
            t *= 0.5
        beta, loglik = trial, trial_ll

    if not converged:
        logger.warning(f"⚠️ Poisson fit did not converge in {options.max_iter} iteration(s)")
    return PoissonFit(
        coefficients=beta,
        loglik=_poisson_loglik(y, X, beta, warn=True),
        converged=converged,
        n=int(y.size),
        iterations=iterations,
        columns=tuple(columns or ()),
    )


# ---------------- Negative binomial ----------------
def _free_mask(theta, grad):
    free = np.ones(theta.size, dtype=bool)
    lam, g = theta[-1], grad[-1]
    if (lam <= LOG_ALPHA_FLOOR + 1e-10 and g <= 0) or (lam >= LOG_ALPHA_CEIL - 1e-10 and g >= 0):
        free[-1] = False
    return free


def _newton_direction(H_free, g_free):
    try:
        chol = np.linalg.cholesky(-H_free)
    except np.linalg.LinAlgError:
        # not locally concave: fall back to a scaled gradient step
        return g_free / max(1.0, np.max(np.abs(g_free)))
    return np.linalg.solve(chol.T, np.linalg.solve(chol, g_free))


def fit_negbin(y, X, options=None, columns=None, candidate=None) -> FitResult:
    """NB2 maximum likelihood: L-BFGS-B from the Poisson fit, then Newton polishing."""
    options = options or FitOptions()
    y, X = _as_design(y, X)
    n, p = X.shape
    if n <= p + 1:
        raise SingularDesign(f"{n} row(s) cannot identify {p + 1} parameter(s)", rows=n, parameters=p + 1)
    _check_rank(X)

    poisson = fit_poisson(y, X, options)
    theta = np.append(poisson.coefficients, 0.0)

    def objective(th):
        alpha = math.exp(th[-1])
        ll = _nb_loglik(y, X, th[:-1], alpha)
        grad = _nb_score(y, X, th[:-1], alpha)
        return -ll / n, -grad / n

    bounds = [(None, None)] * p + [(LOG_ALPHA_FLOOR, LOG_ALPHA_CEIL)]
    res = optimize.minimize(
        objective, theta, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": options.max_iter, "ftol": 1e-15, "gtol": 1e-10},
    )
    theta = np.asarray(res.x, dtype=float)
    iterations = int(res.nit)

    converged = False
    for _ in range(options.max_iter):
        alpha = math.exp(theta[-1])
        loglik = _nb_loglik(y, X, theta[:-1], alpha)
        grad = _nb_score(y, X, theta[:-1], alpha)
        free = _free_mask(theta, grad)
        if np.max(np.abs(grad[free])) < options.tol * max(1.0, abs(loglik)):
            converged = True
            break
        H = _nb_hessian(y, X, theta[:-1], alpha)
        step = np.zeros_like(theta)
        step[free] = _newton_direction(H[np.ix_(free, free)], grad[free])
        t = 1.0
        while True:
            trial = theta + t * step
            trial[-1] = min(max(trial[-1], LOG_ALPHA_FLOOR), LOG_ALPHA_CEIL)
            trial_ll = _nb_loglik(y, X, trial[:-1], math.exp(trial[-1]))
            if trial_ll >= loglik - 1e-12 * max(1.0, abs(loglik)):
                break
            t *= 0.5
            if t < 1e-12:
                trial = theta
                break
        iterations += 1
        if trial is theta:
            break
        theta = trial

    alpha = math.exp(theta[-1])
    beta = theta[:-1]
    loglik = _nb_loglik(y, X, beta, alpha, warn=True)
    grad = _nb_score(y, X, beta, alpha)
    free = _free_mask(theta, grad)
    tolerance = options.tol * max(1.0, abs(loglik))
    grad_norm = float(np.max(np.abs(grad[free])))
    converged = converged or grad_norm < tolerance
    H = _nb_hessian(y, X, beta, alpha)
    covariance = _covariance(H, free, converged, candidate)

    se = np.sqrt(np.diag(covariance)[:p])
    with np.errstate(divide="ignore", invalid="ignore"):
        z = beta / se
    p_values = 2.0 * stats.norm.sf(np.abs(z))
    log_alpha_se = float(np.sqrt(covariance[p, p]))
    if not converged:
        logger.warning(f"❌ NB fit{_who(candidate)} did not converge (gradient {grad_norm:.3g} >= {tolerance:.3g})")
    if not free[-1]:
        logger.info(f"ℹ️ NB fit{_who(candidate)}: alpha on its bound ({alpha:.3g})")

    return FitResult(
        coefficients=beta,
        alpha=alpha,
        log_alpha_se=log_alpha_se,
        alpha_se=alpha * log_alpha_se,
        se=se,
        z_scores=z,
        p_values=p_values,
        loglik=loglik,
        aic=2.0 * (p + 1) - 2.0 * loglik,
        n=n,
        iterations=iterations,
        converged=bool(converged),
        gradient_norm_at_opt=grad_norm,
        tolerance=tolerance,
        alpha_at_boundary=bool(not free[-1]),
        covariance=covariance,
        columns=tuple(columns or ()),
        candidate=candidate,
    )


def _who(candidate):
    return f" for {candidate}" if candidate else ""


def _covariance(H, free, converged, candidate):
    """Inverse observed information on the free parameters; NaN where fixed."""
    size = H.shape[0]
    covariance = np.full((size, size), np.nan)
    H_free = H[np.ix_(free, free)]
    try:
        chol = np.linalg.cholesky(-H_free)
    except np.linalg.LinAlgError:
        if converged:
            raise NonconcaveAtOptimum(f"Hessian not negative definite at optimum{_who(candidate)}", candidate=candidate)
        return covariance
    inv_chol = np.linalg.inv(chol)
    covariance[np.ix_(free, free)] = inv_chol.T @ inv_chol
    return covariance


def fit_design(design, options=None) -> FitResult:
    """fit_negbin on a DesignMatrix, keeping its column names and candidate."""
    return fit_negbin(design.y, design.X, options, columns=design.column_names, candidate=design.candidate)


# ---------------- Over-dispersion test ----------------
def lr_overdispersion(nb: FitResult, pois: PoissonFit) -> OverdispersionTest:
    """LR test of alpha = 0 on the boundary: p from the 1/2 chi2(0) + 1/2 chi2(1) mixture."""
    if nb.n != pois.n or len(nb.coefficients) != len(pois.coefficients):
        raise IncompatibleFits("NB and Poisson fits were not run on the same design")
    if nb.columns and pois.columns and tuple(nb.columns) != tuple(pois.columns):
        raise IncompatibleFits("NB and Poisson fits use different columns")
    if not (nb.converged and pois.converged):
        raise IncompatibleFits("both fits must have converged", nb=nb.converged, poisson=pois.converged)
    statistic = max(0.0, 2.0 * (nb.loglik - pois.loglik))
    # chi2.sf(0, 1) == 1, so a zero statistic gives p = 0.5
    return OverdispersionTest(statistic=statistic, p_value=0.5 * float(stats.chi2.sf(statistic, 1)))


# ---------------- Tables ----------------
def significance_stars(p_value):
    if not np.isfinite(p_value):
        return ""
    if p_value < 0.001:
        return "***"
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    return ""


def coefficient_table(fit: FitResult) -> pd.DataFrame:
    """Regression table: one row per coefficient plus alpha, ln_alpha, N and AIC."""
    rows = [
        {"candidate": fit.candidate, "column": name, "beta": b, "se": s, "z": z, "p": pv,
         "ci_low": b - Z95 * s, "ci_high": b + Z95 * s, "stars": significance_stars(pv)}
        for name, b, s, z, pv in zip(fit.columns, fit.coefficients, fit.se, fit.z_scores, fit.p_values)
    ]
    rows.append({"candidate": fit.candidate, "column": "alpha", "beta": fit.alpha, "se": fit.alpha_se})
    rows.append({"candidate": fit.candidate, "column": "ln_alpha", "beta": math.log(fit.alpha), "se": fit.log_alpha_se})
    rows.append({"candidate": fit.candidate, "column": "N", "beta": fit.n})
    rows.append({"candidate": fit.candidate, "column": "AIC", "beta": fit.aic})
    columns = ["candidate", "column", "beta", "se", "z", "p", "ci_low", "ci_high", "stars"]
    return pd.DataFrame(rows, columns=columns)
