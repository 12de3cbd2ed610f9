"""Statistical analyses: chi-square independence on the 2x2 cross-cluster
table, overdispersion check, and negative binomial (NB2) regression of
per-100-day popularity rates on cluster memberships.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln, digamma, polygamma

from .corpus import RateMetrics

THETA_MIN, THETA_MAX = 1e-4, 1e6


class StatsError(ValueError):
    pass


class RankDeficiencyError(StatsError):
    pass


@dataclass(frozen=True)
class ContingencyTable2x2:
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        counts = (self.a, self.b, self.c, self.d)
        if any(v < 0 for v in counts) or sum(counts) == 0:
            raise StatsError(f"invalid 2x2 counts {counts}")


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    df: int
    p_value: float
    yates_applied: bool


@dataclass(frozen=True)
class NBFit:
    coefficients: np.ndarray
    std_errors: np.ndarray
    theta: float
    log_likelihood: float
    converged: bool
    iterations: int
    column_names: tuple
    ll_trace: tuple  # log-likelihood after each accepted outer iteration


@dataclass(frozen=True)
class DesignMatrix:
    matrix: np.ndarray  # columns: intercept, standard, slang, interaction
    column_names: tuple


def chi_square_2x2(t: ContingencyTable2x2, yates: bool = True) -> ChiSquareResult:
    """Pearson chi-square test of independence, df=1, optional Yates
    continuity correction. p via the df=1 closed form p = erfc(sqrt(x/2))."""
    observed = np.array([[t.a, t.b], [t.c, t.d]], dtype=float)
    rows = observed.sum(axis=1)
    cols = observed.sum(axis=0)
    n = observed.sum()
    if (rows <= 0).any() or (cols <= 0).any():
        raise StatsError("all row and column margins must be positive")
    expected = np.outer(rows, cols) / n
    diff = np.abs(observed - expected) - (0.5 if yates else 0.0)
    diff = np.maximum(diff, 0.0)
    stat = float((diff ** 2 / expected).sum())
    p = math.erfc(math.sqrt(stat / 2.0))
    return ChiSquareResult(statistic=stat, df=1, p_value=p, yates_applied=yates)


def dispersion_check(y: Sequence[float]) -> float:
    """Sample variance / mean; > 1 flags overdispersion."""
    y = np.asarray(y, dtype=float)
    if len(y) < 2:
        raise StatsError(f"need at least 2 counts, got {len(y)}")
    mean = y.mean()
    if mean == 0:
        raise StatsError("mean is zero; dispersion ratio undefined")
    return float(y.var(ddof=1) / mean)


def build_design(standard_cluster, slang_cluster, reference_standard,
                 reference_slang) -> DesignMatrix:
    """Intercept + two cluster indicators + their interaction.

    Indicators are 1 for the non-reference level; each sentiment type must
    have exactly two levels.
    """
    standard_cluster = list(standard_cluster)
    slang_cluster = list(slang_cluster)
    if len(standard_cluster) != len(slang_cluster):
        raise StatsError("cluster label vectors differ in length")
    for name, labels, ref in (("standard", standard_cluster, reference_standard),
                              ("slang", slang_cluster, reference_slang)):
        levels = set(labels) | {ref}
        if len(levels) > 2:
            raise StatsError(f"{name} labels have more than two levels: {sorted(map(str, levels))}")
    std = np.array([0.0 if lab == reference_standard else 1.0 for lab in standard_cluster])
    slg = np.array([0.0 if lab == reference_slang else 1.0 for lab in slang_cluster])
    matrix = np.column_stack([np.ones(len(std)), std, slg, std * slg])
    return DesignMatrix(
        matrix=matrix,
        column_names=("intercept", "standard_cluster", "slang_cluster", "interaction"),
    )


def response_from_rates(r: RateMetrics, which: str) -> int:
    """Rounded (half-up) per-100-day rate used as the NB count response."""
    if which == "views":
        rate = r.views_per_100d
    elif which == "engagement":
        rate = r.engagement
    else:
        raise StatsError(f"unknown response {which!r}")
    return int(math.floor(rate + 0.5))


def nb_log_likelihood(y: np.ndarray, mu: np.ndarray, theta: float) -> float:
    return float(np.sum(
        gammaln(y + theta) - gammaln(theta) - gammaln(y + 1)
        + theta * np.log(theta / (theta + mu))
        + y * np.log(mu / (theta + mu))
    ))


def _theta_score(y, mu, theta):
    return float(np.sum(
        digamma(y + theta) - digamma(theta) + np.log(theta)
        - np.log(theta + mu) + 1.0 - (y + theta) / (theta + mu)
    ))


def _theta_info(y, mu, theta):
    # second derivative of the log-likelihood in theta
    return float(np.sum(
        polygamma(1, y + theta) - polygamma(1, theta) + 1.0 / theta
        - 2.0 / (theta + mu) + (y + theta) / (theta + mu) ** 2
    ))


def _update_theta(y, mu, theta, max_iter=50):
    """Newton steps on log(theta), maximizing the profile likelihood."""
    log_theta = math.log(theta)
    for _ in range(max_iter):
        theta = math.exp(log_theta)
        score = _theta_score(y, mu, theta)
        info = _theta_info(y, mu, theta)
        # transform to log-theta: g' = theta*score, g'' = theta^2*info + theta*score
        g1 = theta * score
        g2 = theta * theta * info + g1
        if g2 >= 0:  # not locally concave; fall back to a small score step
            step = 0.5 * math.copysign(1.0, g1) if g1 != 0 else 0.0
        else:
            step = -g1 / g2
        step = max(min(step, 2.0), -2.0)
        log_theta = min(max(log_theta + step, math.log(THETA_MIN)), math.log(THETA_MAX))
        if abs(step) < 1e-12:
            break
    return math.exp(log_theta)


def nb_regression(y: Sequence[float], design: DesignMatrix,
                  offset: Optional[Sequence[float]] = None,
                  max_outer: int = 100, tol: float = 1e-8) -> NBFit:
    """NB2 regression with log link: mean exp(X beta [+ offset]), variance
    mu + mu^2/theta.

    Alternates IRLS for the coefficients at fixed theta with Newton
    maximization of the profile likelihood in log(theta). Standard errors
    come from the observed Fisher information for the coefficients at the
    optimum. Non-convergence is reported, never silent.
    """
    y = np.asarray(y, dtype=float)
    X = design.matrix
    if len(y) != X.shape[0]:
        raise StatsError("response length does not match design rows")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        deficient = _constant_columns(design)
        raise RankDeficiencyError(
            f"design matrix is rank deficient (constant columns: {deficient})"
        )
    off = np.zeros(len(y)) if offset is None else np.asarray(offset, dtype=float)

    ybar = max(y.mean(), 1e-8)
    beta = np.zeros(X.shape[1])
    beta[0] = math.log(ybar) - off.mean()
    s2 = y.var(ddof=1) if len(y) > 1 else 0.0
    theta = min(max(ybar ** 2 / max(s2 - ybar, 1e-6), THETA_MIN), THETA_MAX)

    def mu_of(b):
        return np.exp(X @ b + off)

    ll = nb_log_likelihood(y, mu_of(beta), theta)
    trace = [ll]
    converged = False
    iterations = 0
    for it in range(1, max_outer + 1):
        iterations = it
        # offset enters IRLS through the working response
        eta = X @ beta + off
        mu = np.exp(eta)
        w = mu * theta / (theta + mu)
        z = eta + (y - mu) / mu - off
        wx = X * w[:, None]
        try:
            beta_new = np.linalg.solve(X.T @ wx, wx.T @ z)
        except np.linalg.LinAlgError:
            raise RankDeficiencyError("weighted design matrix is singular")
        # step-halve if the likelihood would decrease
        step = beta_new - beta
        for _ in range(30):
            cand = beta + step
            ll_cand = nb_log_likelihood(y, mu_of(cand), theta)
            if ll_cand >= ll - 1e-12:
                break
            step = step / 2.0
        delta_beta = float(np.max(np.abs(step)))
        beta = beta + step

        theta_new = _update_theta(y, mu_of(beta), theta)
        delta_log_theta = abs(math.log(theta_new) - math.log(theta))
        ll_new = nb_log_likelihood(y, mu_of(beta), theta_new)
        if ll_new >= ll - 1e-12:
            theta = theta_new
            ll = ll_new
        else:
            ll = nb_log_likelihood(y, mu_of(beta), theta)
            delta_log_theta = 0.0
        trace.append(ll)
        if delta_beta < tol and delta_log_theta < tol:
            converged = True
            break

    mu = mu_of(beta)
    # observed information for beta at fixed theta
    w_obs = theta * mu * (theta + y) / (theta + mu) ** 2
    info = X.T @ (X * w_obs[:, None])
    cov = np.linalg.inv(info)
    std_errors = np.sqrt(np.diag(cov))
    return NBFit(
        coefficients=beta,
        std_errors=std_errors,
        theta=theta,
        log_likelihood=ll,
        converged=converged,
        iterations=iterations,
        column_names=design.column_names,
        ll_trace=tuple(trace),
    )


def _constant_columns(design: DesignMatrix) -> list:
    X = design.matrix
    return [
        name for j, name in enumerate(design.column_names)
        if j > 0 and np.all(X[:, j] == X[0, j])
    ]


def coefficient_table(fit: NBFit) -> list:
    """Rows of name, estimate, SE, z, p, rate ratio exp(b) and 1/exp(b).

    Coefficients are reported on the log scale (not anti-logged); both
    rate-ratio directions accompany each estimate.
    """
    rows = []
    for name, est, se in zip(fit.column_names, fit.coefficients, fit.std_errors):
        z = est / se if se > 0 else float("inf")
        p = math.erfc(abs(z) / math.sqrt(2.0))
        rows.append({
            "name": name,
            "estimate": float(est),
            "std_error": float(se),
            "z": float(z),
            "p": float(p),
            "rate_ratio": float(math.exp(est)),
            "inverse_rate_ratio": float(math.exp(-est)),
        })
    return rows
