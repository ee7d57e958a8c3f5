"""NARX model core: regressors, network forward passes, SP and P prediction.

Networks operate in normalized units.  The regressor at time ``k`` is

    [y(k-1) ... y(k-na), u(k-1) ... u(k-nb)]

with the y block normalized by the output statistics and the u block by
the input statistics; the network output is de-normalized with the output
statistics.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ArgumentError, ConfigurationError, ModelError


def logistic(n):
    return 0.5 * (1.0 + np.tanh(0.5 * n))


def radbas(n):
    return np.exp(-np.square(n))


def identity(n):
    return n


ACTIVATIONS = {
    "logistic": logistic,
    "tanh": np.tanh,
    "radbas": radbas,
    "identity": identity,
}

ARCH_KINDS = ("sigmoid", "ffnn", "cascade", "linear")


@dataclass(frozen=True)
class DelayConfig:
    na: int
    nb: int
    noise_delays: int = 0

    def __post_init__(self):
        if self.na < 1 or self.nb < 1:
            raise ConfigurationError(f"delay orders must be >= 1, got na={self.na}, nb={self.nb}")
        if self.noise_delays != 0:
            raise ConfigurationError("noise delays are not supported (NARX, not NARMAX)")

    @property
    def window(self) -> int:
        """Number of leading samples without a complete regressor."""
        return max(self.na, self.nb)

    @property
    def size(self) -> int:
        return self.na + self.nb


@dataclass(frozen=True)
class Architecture:
    """Network topology.

    ``layers`` holds hidden-layer widths, ``activations`` one tag per hidden
    layer.  The output layer is always a single linear unit.
    """

    kind: str
    layers: tuple[int, ...]
    activations: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in ARCH_KINDS:
            raise ConfigurationError(f"unknown architecture {self.kind!r}")
        expected = {"sigmoid": 1, "ffnn": 2, "cascade": 1, "linear": 0}[self.kind]
        if len(self.layers) != expected or len(self.activations) != expected:
            raise ConfigurationError(f"{self.kind} needs {expected} hidden layer(s)")
        if any(h < 1 for h in self.layers):
            raise ConfigurationError("layer sizes must be >= 1")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ConfigurationError(f"unknown activation {act!r}")

    @classmethod
    def sigmoid_single(cls, hidden: int = 30, activation: str = "logistic") -> "Architecture":
        return cls("sigmoid", (hidden,), (activation,))

    @classmethod
    def feedforward_two(cls, h1: int = 10, h2: int = 20) -> "Architecture":
        return cls("ffnn", (h1, h2), ("tanh", "radbas"))

    @classmethod
    def cascade_forward(cls, hidden: int = 20) -> "Architecture":
        return cls("cascade", (hidden,), ("tanh",))

    @classmethod
    def linear(cls) -> "Architecture":
        return cls("linear", (), ())

    def param_shapes(self, n_inputs: int) -> dict[str, tuple[int, ...]]:
        if self.kind == "linear":
            return {"W1": (1, n_inputs), "b1": (1,)}
        if self.kind == "sigmoid":
            (h,) = self.layers
            return {"W1": (h, n_inputs), "b1": (h,), "W2": (1, h), "b2": (1,)}
        if self.kind == "ffnn":
            h1, h2 = self.layers
            return {"W1": (h1, n_inputs), "b1": (h1,), "W2": (h2, h1), "b2": (h2,), "W3": (1, h2), "b3": (1,)}
        (h,) = self.layers
        # W2/b2 are the hidden-to-output weights and output bias, W3 the input bypass
        return {"W1": (h, n_inputs), "b1": (h,), "W2": (1, h), "b2": (1,), "W3": (1, n_inputs)}


@dataclass(frozen=True)
class Normalization:
    u_mean: float = 0.0
    u_std: float = 1.0
    y_mean: float = 0.0
    y_std: float = 1.0

    def __post_init__(self):
        if not (self.u_std > 0 and self.y_std > 0):
            raise ModelError("normalization std must be positive")

    @classmethod
    def fit(cls, u, y) -> "Normalization":
        u = np.asarray(u, dtype=float)
        y = np.asarray(y, dtype=float)
        u_std, y_std = float(np.std(u)), float(np.std(y))
        if u_std == 0 or y_std == 0:
            raise ConfigurationError("cannot normalize a constant channel")
        return cls(float(np.mean(u)), u_std, float(np.mean(y)), y_std)

    def norm_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_std

    def denorm_y(self, yn):
        return np.asarray(yn, dtype=float) * self.y_std + self.y_mean

    def norm_u(self, u):
        return (np.asarray(u, dtype=float) - self.u_mean) / self.u_std

    def denorm_u(self, un):
        return np.asarray(un, dtype=float) * self.u_std + self.u_mean


@dataclass(frozen=True)
class NarxModel:
    arch: Architecture
    delays: DelayConfig
    params: dict[str, np.ndarray]
    norm: Normalization = field(default_factory=Normalization)

    def __post_init__(self):
        shapes = self.arch.param_shapes(self.delays.size)
        if list(self.params) != list(shapes):
            raise ModelError(f"parameter names {list(self.params)} do not match {list(shapes)}")
        frozen = {}
        for name, shape in shapes.items():
            arr = np.array(self.params[name], dtype=float)
            if arr.shape != shape:
                raise ModelError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            frozen[name] = arr
        object.__setattr__(self, "params", frozen)

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.params.values())

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.params.values()])

    def with_flat(self, theta) -> "NarxModel":
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.n_params:
            raise ModelError(f"expected {self.n_params} parameters, got {theta.size}")
        out, i = {}, 0
        for name, arr in self.params.items():
            out[name] = theta[i:i + arr.size].reshape(arr.shape)
            i += arr.size
        return replace(self, params=out)

    def with_norm(self, norm: Normalization) -> "NarxModel":
        return replace(self, norm=norm)


def init_weights(arch: Architecture, delays: DelayConfig, seed: int = 0) -> NarxModel:
    """Uniform ``+-1/sqrt(fan_in)`` initialization, identity normalization."""
    rng = np.random.default_rng(seed)
    params = {}
    shapes = arch.param_shapes(delays.size)
    fan_in = {}
    for name, shape in shapes.items():
        if name.startswith("W"):
            fan_in[name[1:]] = shape[1]
    for name, shape in shapes.items():
        bound = 1.0 / np.sqrt(fan_in[name[1:]])
        params[name] = rng.uniform(-bound, bound, size=shape)
    return NarxModel(arch, delays, params)


def neuron(inputs, weights, bias: float, activation: str = "identity") -> float:
    inputs = np.asarray(inputs, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if inputs.shape != weights.shape:
        raise ArgumentError(f"inputs {inputs.shape} and weights {weights.shape} differ in length")
    return float(ACTIVATIONS[activation](np.dot(inputs, weights) + bias))


def forward(model: NarxModel, x) -> np.ndarray | float:
    """Network output for normalized regressor(s) ``x`` of shape (D,) or (N, D)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.delays.size:
        raise ModelError(f"regressor length {X.shape[1]} != na+nb = {model.delays.size}")
    P = model.params
    acts = [ACTIVATIONS[a] for a in model.arch.activations]
    kind = model.arch.kind
    if kind == "linear":
        out = X @ P["W1"].T + P["b1"]
    elif kind == "sigmoid":
        out = acts[0](X @ P["W1"].T + P["b1"]) @ P["W2"].T + P["b2"]
    elif kind == "ffnn":
        h1 = acts[0](X @ P["W1"].T + P["b1"])
        out = acts[1](h1 @ P["W2"].T + P["b2"]) @ P["W3"].T + P["b3"]
    else:
        h = acts[0](X @ P["W1"].T + P["b1"])
        out = X @ P["W3"].T + h @ P["W2"].T + P["b2"]
    out = out[:, 0]
    return float(out[0]) if single else out


def build_regressor(y_hist, u_hist, delays: DelayConfig) -> np.ndarray:
    """Regressor from histories ordered oldest to newest (last entry is ``k-1``)."""
    y_hist = np.asarray(y_hist, dtype=float)
    u_hist = np.asarray(u_hist, dtype=float)
    if len(y_hist) < delays.na or len(u_hist) < delays.nb:
        raise ArgumentError(
            f"need >= {delays.na} outputs and >= {delays.nb} inputs of history, "
            f"got {len(y_hist)} and {len(u_hist)}"
        )
    return np.concatenate([y_hist[::-1][:delays.na], u_hist[::-1][:delays.nb]])


def regressor_matrix(y, u, delays: DelayConfig) -> np.ndarray:
    """Stacked raw regressors for ``k = window .. N-1``, one row per ``k``."""
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    n, w = len(y), delays.window
    if len(u) != n:
        raise ArgumentError("u and y differ in length")
    if n <= w:
        raise ArgumentError(f"record of {n} samples is not longer than the delay window {w}")
    cols = [y[w - i:n - i] for i in range(1, delays.na + 1)]
    cols += [u[w - i:n - i] for i in range(1, delays.nb + 1)]
    return np.column_stack(cols)


def normalized_regressors(model: NarxModel, y, u) -> np.ndarray:
    X = regressor_matrix(y, u, model.delays)
    na = model.delays.na
    Xn = np.empty_like(X)
    Xn[:, :na] = model.norm.norm_y(X[:, :na])
    Xn[:, na:] = model.norm.norm_u(X[:, na:])
    return Xn


def _signal_values(v):
    return np.asarray(getattr(v, "samples", v), dtype=float)


def predict_sp(model: NarxModel, u, y) -> np.ndarray:
    """One-step-ahead (series-parallel) predictions from measured data.

    The result is aligned with ``y``; the first ``window`` entries are NaN.
    """
    u, y = _signal_values(u), _signal_values(y)
    Xn = normalized_regressors(model, y, u)
    out = np.full(len(y), np.nan)
    out[model.delays.window:] = model.norm.denorm_y(forward(model, Xn))
    return out


def simulate_p(model: NarxModel, u, y_init) -> np.ndarray:
    """Free-run (parallel) simulation driven by ``u``.

    ``y_init`` supplies the first ``window`` outputs, which are copied
    verbatim; later outputs feed back into the regressor.
    """
    u = _signal_values(u)
    y_init = _signal_values(y_init)
    na, nb = model.delays.na, model.delays.nb
    w = model.delays.window
    if len(y_init) < w:
        raise ArgumentError(f"y_init needs {w} samples, got {len(y_init)}")
    if len(u) <= w:
        raise ArgumentError(f"input of {len(u)} samples is not longer than the delay window {w}")
    norm = model.norm
    un = norm.norm_u(u)
    yn = np.empty(len(u))
    yn[:w] = norm.norm_y(y_init[:w])
    x = np.empty(na + nb)
    for k in range(w, len(u)):
        x[:na] = yn[k - 1::-1][:na] if k - 1 - na < 0 else yn[k - 1:k - 1 - na:-1]
        x[na:] = un[k - 1::-1][:nb] if k - 1 - nb < 0 else un[k - 1:k - 1 - nb:-1]
        yn[k] = forward(model, x)
    out = norm.denorm_y(yn)
    out[:w] = y_init[:w]
    return out


def arx_coefficients(model: NarxModel) -> tuple[np.ndarray, np.ndarray, float]:
    """Physical-unit ``(a, b, c)`` of a linear model: ``y(k) = a.y_lags + b.u_lags + c``."""
    if model.arch.kind != "linear":
        raise ModelError("ARX coefficients exist only for the linear architecture")
    n = model.norm
    na = model.delays.na
    w = model.params["W1"][0]
    a = w[:na].copy()
    b = w[na:] * n.y_std / n.u_std
    c = n.y_mean + n.y_std * model.params["b1"][0] - a.sum() * n.y_mean - b.sum() * n.u_mean
    return a, b, float(c)
