"""Ordinary least squares and the log-link Gaussian GLM, with Wald tests and AIC."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import IrlsDiverged, RankDeficient
from .formula import DesignMatrix

RANK_RTOL = 1e-10
IRLS_TOL = 1e-8
IRLS_MAX_ITER = 100


@dataclass(frozen=True)
class LinearFit:
    """Fitted coefficients with Wald statistics and Gaussian likelihood summary."""

    labels: tuple[str, ...]
    beta: np.ndarray
    se: np.ndarray
    z: np.ndarray
    p_values: np.ndarray
    ssr: float
    sigma2: float
    loglik: float
    aic: float
    n: int
    p: int
    link: str = "identity"
    iterations: int | None = None

    def coefficient(self, label: str) -> float:
        return float(self.beta[self.labels.index(label)])

    def rows(self) -> list[dict]:
        return [
            {
                "term": label,
                "coef": float(self.beta[i]),
                "se": float(self.se[i]),
                "z": float(self.z[i]),
                "p_value": float(self.p_values[i]),
            }
            for i, label in enumerate(self.labels)
        ]


def gaussian_loglik(n: int, ssr: float) -> float:
    """Profile log-likelihood of a Gaussian fit at its residual sum of squares."""
    if ssr <= 0.0:
        return math.inf
    return -0.5 * n * (math.log(2.0 * math.pi) + math.log(ssr / n) + 1.0)


def gaussian_aic(n: int, p: int, ssr: float) -> float:
    """AIC = 2p - 2 logL, counting the p regression coefficients as parameters."""
    return 2.0 * p - 2.0 * gaussian_loglik(n, ssr)


def _check_rank(R: np.ndarray, labels) -> None:
    diag = np.abs(np.diag(R))
    scale = diag.max() if diag.size else 0.0
    bad = [labels[j] for j in range(len(diag)) if diag[j] <= RANK_RTOL * scale]
    if scale == 0.0 or bad:
        raise RankDeficient(bad if bad else list(labels))


def _wald(beta: np.ndarray, se: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    p = 2.0 * stats.norm.sf(np.abs(z))
    return z, p


def ols_fit(dm: DesignMatrix) -> LinearFit:
    """Least-squares fit via QR, with normal-theory standard errors.

    Standard errors use sigma2 = ssr / (n - p); Wald statistics are compared
    to the standard normal.
    """
    X, y = dm.X, dm.y
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more observations than parameters, got n={n}, p={p}")
    Q, R = np.linalg.qr(X)
    _check_rank(R, dm.labels)
    beta = np.linalg.solve(R, Q.T @ y)
    residuals = y - X @ beta
    ssr = float(residuals @ residuals)
    sigma2 = ssr / (n - p)
    R_inv = np.linalg.solve(R, np.eye(p))
    xtx_inv_diag = np.einsum("ij,ij->i", R_inv, R_inv)
    se = np.sqrt(sigma2 * xtx_inv_diag)
    z, p_values = _wald(beta, se)
    loglik = gaussian_loglik(n, ssr)
    return LinearFit(
        labels=dm.labels,
        beta=beta,
        se=se,
        z=z,
        p_values=p_values,
        ssr=ssr,
        sigma2=sigma2,
        loglik=loglik,
        aic=2.0 * p - 2.0 * loglik,
        n=n,
        p=p,
    )


def glm_log_link_fit(
    dm: DesignMatrix,
    tol: float = IRLS_TOL,
    max_iter: int = IRLS_MAX_ITER,
) -> LinearFit:
    """Gaussian GLM with a log link, fitted by iteratively reweighted least squares.

    The fitted mean is exp(X beta), which must stay positive; convergence is
    declared when the deviance changes by less than ``tol``. The AIC uses the
    same Gaussian likelihood convention as ``ols_fit`` so the two are
    directly comparable.
    """
    X, y = dm.X, dm.y
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more observations than parameters, got n={n}, p={p}")
    _check_rank(np.linalg.qr(X, mode="r"), dm.labels)

    mu = np.maximum((y + y.mean()) / 2.0, 1e-10)
    eta = np.log(mu)
    deviance = float(np.sum((y - mu) ** 2))
    trace = [deviance]

    beta = None
    for iteration in range(1, max_iter + 1):
        # For a log link, d mu / d eta = mu; Gaussian variance is constant.
        working = eta + (y - mu) / mu
        w_sqrt = mu
        beta, *_ = np.linalg.lstsq(X * w_sqrt[:, None], working * w_sqrt, rcond=None)
        eta = X @ beta
        if eta.max() > 500.0:
            raise IrlsDiverged(trace)
        mu = np.exp(eta)
        new_deviance = float(np.sum((y - mu) ** 2))
        trace.append(new_deviance)
        if abs(new_deviance - deviance) < tol:
            deviance = new_deviance
            break
        deviance = new_deviance
    else:
        raise IrlsDiverged(trace)

    sigma2 = deviance / (n - p)
    # Fisher information at the solution: X' W X with W = mu^2.
    WX = X * (mu**2)[:, None]
    info = X.T @ WX
    cov = np.linalg.inv(info) * sigma2
    se = np.sqrt(np.diag(cov))
    z, p_values = _wald(beta, se)
    loglik = gaussian_loglik(n, deviance)
    return LinearFit(
        labels=dm.labels,
        beta=beta,
        se=se,
        z=z,
        p_values=p_values,
        ssr=deviance,
        sigma2=sigma2,
        loglik=loglik,
        aic=2.0 * p - 2.0 * loglik,
        n=n,
        p=p,
        link="log",
        iterations=iteration,
    )
