"""Model-quality metrics in physical units.

Predictions use NaN to mark samples without a complete regressor (the
initial delay window); every metric drops those positions before
computing anything.
"""
from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import ArgumentError

WHITENESS_Z = 1.96


def _valid_pair(y, y_hat):
    y = np.asarray(getattr(y, "samples", y), dtype=float)
    y_hat = np.asarray(getattr(y_hat, "samples", y_hat), dtype=float)
    if y.shape != y_hat.shape:
        raise ArgumentError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    keep = ~np.isnan(y_hat)
    y, y_hat = y[keep], y_hat[keep]
    if len(y) == 0:
        raise ArgumentError("no valid samples to compare")
    return y, y_hat


def mse(y, y_hat) -> float:
    y, y_hat = _valid_pair(y, y_hat)
    e = y - y_hat
    return float(np.mean(e * e))


def _norm(v: np.ndarray) -> float:
    # scaled so tiny entries do not underflow to a zero norm
    peak = float(np.max(np.abs(v))) if len(v) else 0.0
    return 0.0 if peak == 0 else peak * float(np.linalg.norm(v / peak))


def fit_percent(y, y_hat) -> float:
    """``100 * (1 - ||y - y_hat|| / ||y - mean(y)||)``."""
    y, y_hat = _valid_pair(y, y_hat)
    denom = _norm(y - np.mean(y))
    if denom == 0:
        raise ArgumentError("fit is undefined for a constant target")
    return float(100.0 * (1.0 - _norm(y - y_hat) / denom))


def fpe(mse_est: float, n_params: int, n_samples: int) -> float:
    """Akaike's final prediction error."""
    if not 0 <= n_params < n_samples:
        raise ArgumentError(f"FPE needs 0 <= n_params < n_samples, got {n_params} and {n_samples}")
    if mse_est < 0:
        raise ArgumentError("mse must be >= 0")
    ratio = n_params / n_samples
    return mse_est * (1 + ratio) / (1 - ratio)


def correlation(y, y_hat) -> float:
    """Pearson correlation coefficient."""
    y, y_hat = _valid_pair(y, y_hat)
    if len(y) < 2:
        raise ArgumentError("correlation needs at least 2 samples")
    dy, dh = y - y.mean(), y_hat - y_hat.mean()
    sy, sh = np.sqrt(np.dot(dy, dy)), np.sqrt(np.dot(dh, dh))
    if sy == 0 or sh == 0:
        raise ArgumentError("correlation is undefined for a constant signal")
    return float(np.clip(np.dot(dy, dh) / (sy * sh), -1.0, 1.0))


@dataclass(frozen=True)
class ResidualACF:
    lags: np.ndarray
    values: np.ndarray
    band: float

    @property
    def inside(self) -> np.ndarray:
        return np.abs(self.values) <= self.band


def residual_autocorr(residuals, max_lag: int) -> ResidualACF:
    """Linear (non-circular) normalized autocorrelation of mean-removed residuals.

    ``band`` is the 95% whiteness half-width ``1.96/sqrt(N)``.
    """
    r = np.asarray(getattr(residuals, "samples", residuals), dtype=float)
    r = r[~np.isnan(r)]
    n = len(r)
    if n == 0:
        raise ArgumentError("residual autocorrelation of an empty signal")
    if not 0 <= max_lag < n:
        raise ArgumentError(f"max_lag must be in [0, {n - 1}], got {max_lag}")
    d = r - r.mean()
    c0 = np.dot(d, d)
    if c0 == 0:
        raise ArgumentError("residual autocorrelation is undefined for constant residuals")
    values = np.array([np.dot(d[:n - k], d[k:]) for k in range(max_lag + 1)]) / c0
    return ResidualACF(np.arange(max_lag + 1), values, WHITENESS_Z / np.sqrt(n))


@dataclass(frozen=True)
class MetricsReport:
    fit_percent_est: float
    fit_percent_val: float
    mse_est: float
    mse_val: float
    fpe: float
    r_est: float
    r_val: float
    n_params: int
    n_samples_est: int

    def items(self):
        return [(f.name, v) for f, v in zip(fields(self), astuple(self))]


def metrics_report(y_est, yhat_est, y_val, yhat_val, n_params: int) -> MetricsReport:
    """Assemble a MetricsReport; FPE uses the valid estimation sample count."""
    mse_est = mse(y_est, yhat_est)
    n_est = int(np.count_nonzero(~np.isnan(np.asarray(yhat_est, dtype=float))))
    return MetricsReport(
        fit_percent_est=fit_percent(y_est, yhat_est),
        fit_percent_val=fit_percent(y_val, yhat_val),
        mse_est=mse_est,
        mse_val=mse(y_val, yhat_val),
        fpe=fpe(mse_est, n_params, n_est),
        r_est=correlation(y_est, yhat_est),
        r_val=correlation(y_val, yhat_val),
        n_params=n_params,
        n_samples_est=n_est,
    )
