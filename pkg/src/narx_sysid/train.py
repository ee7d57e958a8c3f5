"""Series-parallel training of NARX models.

Levenberg-Marquardt on one-step residuals is the primary algorithm; a
full-batch Adam loop is available as a fallback.  Both evaluate the
validation MSE after every epoch and return the weights of the best epoch.
"""
from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .control import Dataset
from .errors import ConfigurationError, ModelError, TrainingError
from .metrics import mse
from .narx import ACTIVATIONS, NarxModel, Normalization, forward, normalized_regressors, predict_sp

log = logging.getLogger(__name__)

ALGORITHMS = ("lm", "adam")
LAMBDA_MAX = 1e12


@dataclass(frozen=True)
class TrainingOptions:
    algorithm: str = "lm"
    max_epochs: int = 200
    patience: int = 6
    lm_lambda0: float = 1e-3
    lm_lambda_factor: float = 10.0
    learning_rate: float = 1e-3
    seed: int = 0
    gradient_check: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.max_epochs < 1 or self.patience < 1:
            raise ConfigurationError("max_epochs and patience must be >= 1")
        if not (self.lm_lambda0 > 0 and self.lm_lambda_factor > 1 and self.learning_rate > 0):
            raise ConfigurationError("damping and learning-rate parameters must be positive (factor > 1)")

    def digest(self) -> str:
        text = ";".join(f"{k}={v!r}" for k, v in sorted(asdict(self).items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class TrainingReport:
    train_mse: list[float]
    val_mse: list[float]
    best_epoch: int
    best_val_mse: float
    model: NarxModel = field(repr=False, compare=False)
    seed: int
    options_digest: str
    stop_reason: str
    wall_time_s: float = field(default=0.0, compare=False)

    @property
    def epochs(self) -> list[int]:
        return list(range(len(self.val_mse)))


class Segment(NamedTuple):
    u: np.ndarray
    y: np.ndarray


def split(data: Dataset, window: int = 0) -> tuple[Segment, Segment]:
    """Contiguous estimation/validation segments at the dataset's split index."""
    u, y, s = data.u.samples, data.y.samples, data.split_index
    est, val = Segment(u[:s], y[:s]), Segment(u[s:], y[s:])
    if len(est.y) <= window or len(val.y) <= window:
        raise ConfigurationError(
            f"segments of {len(est.y)} and {len(val.y)} samples must both exceed the delay window {window}"
        )
    return est, val


def _dact(name: str, a: np.ndarray, h: np.ndarray) -> np.ndarray:
    if name == "logistic":
        return h * (1.0 - h)
    if name == "tanh":
        return 1.0 - h * h
    if name == "radbas":
        return -2.0 * a * h
    return np.ones_like(a)


def sensitivities(model: NarxModel, X: np.ndarray):
    """Forward pass plus per-sample output sensitivities.

    Returns ``(yhat, blocks)``; ``blocks`` maps each parameter name to
    ``(delta, inputs)`` for weight matrices (so d yhat_n / dW = outer(delta_n,
    inputs_n)) or ``(delta, None)`` for bias vectors.
    """
    P = model.params
    kind = model.arch.kind
    acts = model.arch.activations
    n = len(X)
    one = np.ones((n, 1))
    if kind == "linear":
        yhat = (X @ P["W1"].T + P["b1"])[:, 0]
        return yhat, {"W1": (one, X), "b1": (one, None)}
    if kind in ("sigmoid", "cascade"):
        a = X @ P["W1"].T + P["b1"]
        h = ACTIVATIONS[acts[0]](a)
        d1 = P["W2"][0] * _dact(acts[0], a, h)
        blocks = {"W1": (d1, X), "b1": (d1, None), "W2": (one, h), "b2": (one, None)}
        # same expression order as forward(), so residuals agree bit for bit
        if kind == "cascade":
            yhat = (X @ P["W3"].T + h @ P["W2"].T + P["b2"])[:, 0]
            blocks["W3"] = (one, X)
        else:
            yhat = (h @ P["W2"].T + P["b2"])[:, 0]
        return yhat, blocks
    if kind == "ffnn":
        a1 = X @ P["W1"].T + P["b1"]
        h1 = ACTIVATIONS[acts[0]](a1)
        a2 = h1 @ P["W2"].T + P["b2"]
        h2 = ACTIVATIONS[acts[1]](a2)
        yhat = (h2 @ P["W3"].T + P["b3"])[:, 0]
        d2 = P["W3"][0] * _dact(acts[1], a2, h2)
        d1 = (d2 @ P["W2"]) * _dact(acts[0], a1, h1)
        return yhat, {
            "W1": (d1, X), "b1": (d1, None),
            "W2": (d2, h1), "b2": (d2, None),
            "W3": (one, h2), "b3": (one, None),
        }
    raise ModelError(f"unknown architecture {kind!r}")


def jacobian(model: NarxModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(yhat, J)`` with ``J[n, i] = d yhat_n / d theta_i`` in ``flat()`` order."""
    yhat, blocks = sensitivities(model, X)
    cols = []
    for name in model.params:
        delta, inp = blocks[name]
        if inp is None:
            cols.append(delta)
        else:
            cols.append((delta[:, :, None] * inp[:, None, :]).reshape(len(X), -1))
    return yhat, np.hstack(cols)


def loss_and_gradient(model: NarxModel, X: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    """MSE of one-step predictions (normalized units) and its gradient."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    t = np.asarray(t, dtype=float)
    if len(X) == 0 or len(X) != len(t):
        raise ModelError("batch must be nonempty with one target per regressor")
    if X.shape[1] != model.delays.size:
        raise ModelError(f"regressor length {X.shape[1]} != {model.delays.size}")
    yhat, blocks = sensitivities(model, X)
    e = yhat - t
    c = (2.0 / len(t)) * e
    grads = []
    for name in model.params:
        delta, inp = blocks[name]
        cd = c[:, None] * delta
        grads.append(cd.sum(axis=0) if inp is None else (cd.T @ inp).ravel())
    return float(np.mean(e * e)), np.concatenate(grads)


def numerical_gradient(model: NarxModel, X, t, indices, step: float = 1e-6) -> np.ndarray:
    """Central finite differences of the MSE for selected parameter indices."""
    theta = model.flat()
    out = np.empty(len(indices))
    for j, i in enumerate(indices):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += step
        tm[i] -= step
        lp = np.mean((forward(model.with_flat(tp), X) - t) ** 2)
        lm = np.mean((forward(model.with_flat(tm), X) - t) ** 2)
        out[j] = (lp - lm) / (2 * step)
    return out


def gradient_check(model: NarxModel, X, t, n_components: int = 30, seed: int = 0,
                   step: float = 1e-6) -> float:
    """Largest relative error between analytic and central-difference gradients."""
    _, grad = loss_and_gradient(model, X, t)
    rng = np.random.default_rng(seed)
    idx = rng.choice(model.n_params, size=min(n_components, model.n_params), replace=False)
    num = numerical_gradient(model, X, t, idx, step)
    ana = grad[idx]
    scale = np.maximum(np.maximum(np.abs(ana), np.abs(num)), 1e-8)
    return float(np.max(np.abs(ana - num) / scale))


class _NormalEquations(NamedTuple):
    loss: float
    A: np.ndarray
    g: np.ndarray
    diag: np.ndarray


def _normal_equations(model: NarxModel, X, t) -> _NormalEquations:
    yhat, J = jacobian(model, X)
    e = t - yhat
    A = J.T @ J
    d = np.diag(A).copy()
    d = np.maximum(d, 1e-12 * max(float(d.max()), 1e-300))
    return _NormalEquations(float(np.mean(e * e)), A, J.T @ e, d)


def _damped_solve(ne: _NormalEquations, lam: float) -> np.ndarray | None:
    try:
        c = scipy.linalg.cho_factor(ne.A + np.diag(lam * ne.diag), check_finite=False)
    except np.linalg.LinAlgError:
        return None
    step = scipy.linalg.cho_solve(c, ne.g, check_finite=False)
    return step if np.all(np.isfinite(step)) else None


def _batch_loss(model: NarxModel, X, t) -> float:
    e = forward(model, X) - t
    return float(np.mean(e * e))


def lm_step(model: NarxModel, X, t, lam: float, factor: float = 10.0,
            ne: _NormalEquations | None = None) -> tuple[NarxModel, float]:
    """One Levenberg-Marquardt trial.

    Solves ``(J'J + lam*diag(J'J)) d = J'e`` and accepts ``theta + d`` when
    the loss drops (``lam /= factor``), else keeps ``model`` (``lam *= factor``).
    """
    if not lam > 0:
        raise ConfigurationError("lambda must be positive")
    ne = ne or _normal_equations(model, X, t)
    if not np.any(ne.g):
        return model, lam
    step = _damped_solve(ne, lam)
    if step is None:
        return model, lam * factor
    cand = model.with_flat(model.flat() + step)
    if _batch_loss(cand, X, t) < ne.loss:
        return cand, lam / factor
    return model, lam * factor


def _lm_epoch(model, X, t, lam, factor):
    """One damping cycle: retry with growing lambda until a step is accepted.

    Returns ``(model, lam, accepted)``.
    """
    ne = _normal_equations(model, X, t)
    if not np.any(ne.g):
        return model, lam, False
    singular = False
    while lam <= LAMBDA_MAX:
        step = _damped_solve(ne, lam)
        if step is None:
            singular = True
            lam *= factor
            continue
        singular = False
        cand = model.with_flat(model.flat() + step)
        if _batch_loss(cand, X, t) < ne.loss:
            return cand, max(lam / factor, 1e-20), True
        lam *= factor
    if singular:
        raise TrainingError(f"damped normal equations singular up to lambda={LAMBDA_MAX:g}")
    return model, lam, False


def _segment_mse(model: NarxModel, seg: Segment) -> float:
    # overflow is reported as divergence by the caller
    with np.errstate(over="ignore", invalid="ignore"):
        return mse(seg.y, predict_sp(model, seg.u, seg.y))


def fit(model: NarxModel, data: Dataset, opts: TrainingOptions | None = None) -> tuple[NarxModel, TrainingReport]:
    """Train ``model`` on the estimation segment of ``data``.

    Normalization is refitted on the estimation segment.  Epoch 0 is the
    initial model; the returned model is the one with the lowest
    validation MSE (earliest on ties).  MSE values are in physical units.
    """
    opts = opts or TrainingOptions()
    t0 = time.perf_counter()
    w = model.delays.window
    est, val = split(data, w)
    model = model.with_norm(Normalization.fit(est.u, est.y))
    X = normalized_regressors(model, est.y, est.u)
    t = model.norm.norm_y(est.y[w:])

    if opts.gradient_check:
        n_check = min(len(X), 200)
        err = gradient_check(model, X[:n_check], t[:n_check], seed=opts.seed)
        if err > 1e-5:
            raise TrainingError(f"gradient check failed: max relative error {err:.3g}", epoch=0)

    train_hist = [_segment_mse(model, est)]
    val_hist = [_segment_mse(model, val)]
    best_epoch, best_val, best_model = 0, val_hist[0], model
    lam = opts.lm_lambda0
    adam_m = adam_v = None
    stop = "max_epochs"
    for epoch in range(1, opts.max_epochs + 1):
        if opts.algorithm == "lm":
            model, lam, accepted = _lm_epoch(model, X, t, lam, opts.lm_lambda_factor)
        else:
            loss, grad = loss_and_gradient(model, X, t)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingError(f"loss diverged at epoch {epoch}", epoch=epoch)
            if adam_m is None:
                adam_m = np.zeros_like(grad)
                adam_v = np.zeros_like(grad)
            adam_m = 0.9 * adam_m + 0.1 * grad
            adam_v = 0.999 * adam_v + 0.001 * grad * grad
            mhat = adam_m / (1 - 0.9**epoch)
            vhat = adam_v / (1 - 0.999**epoch)
            model = model.with_flat(model.flat() - opts.learning_rate * mhat / (np.sqrt(vhat) + 1e-8))
            accepted = True
        tr, va = _segment_mse(model, est), _segment_mse(model, val)
        if not (np.isfinite(tr) and np.isfinite(va)):
            raise TrainingError(f"loss diverged at epoch {epoch}", epoch=epoch)
        train_hist.append(tr)
        val_hist.append(va)
        log.debug("epoch %d train %.6g val %.6g", epoch, tr, va)
        if va < best_val:
            best_epoch, best_val, best_model = epoch, va, model
        elif epoch - best_epoch >= opts.patience:
            stop = "patience"
            break
        if not accepted:
            stop = "converged"
            break
    report = TrainingReport(
        train_mse=train_hist,
        val_mse=val_hist,
        best_epoch=best_epoch,
        best_val_mse=best_val,
        model=best_model,
        seed=opts.seed,
        options_digest=opts.digest(),
        stop_reason=stop,
        wall_time_s=time.perf_counter() - t0,
    )
    return best_model, report
