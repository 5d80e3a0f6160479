"""Small feed-forward networks in plain numpy.

Weights are stored ``(out, in)`` per layer.  Every routine also accepts
*stacked* parameters with a leading member axis, ``(M, out, in)``, paired
with inputs of shape ``(M, N, in)``; the ensemble trains all members in one
pass that way.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError, TrainingError

LOG_2PI = float(np.log(2.0 * np.pi))
LOGVAR_BOUNDS = (-10.0, 4.0)
ACTIVATIONS = ("tanh", "relu")


@dataclass
class MlpParams:
    layer_sizes: tuple
    weights: list
    biases: list
    activation: str = "tanh"

    def __post_init__(self):
        self.layer_sizes = tuple(int(n) for n in self.layer_sizes)
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ShapeError("need one weight matrix and bias per layer transition")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[i + 1], self.layer_sizes[i])
            if w.shape[-2:] != expected or b.shape[-1] != expected[0]:
                raise ShapeError(f"layer {i}: got {w.shape}/{b.shape}, expected {expected}")

    @property
    def n_layers(self):
        return len(self.weights)

    def arrays(self):
        """Flat list ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_arrays(self, arrays):
        return MlpParams(self.layer_sizes, list(arrays[0::2]), list(arrays[1::2]), self.activation)

    def copy(self):
        return self.with_arrays([a.copy() for a in self.arrays()])


@dataclass
class GaussianOutput:
    mean: np.ndarray
    log_variance: np.ndarray

    def __post_init__(self):
        if np.shape(self.mean) != np.shape(self.log_variance):
            raise ShapeError("mean and log_variance must have equal shapes")


def _check_sizes(layer_sizes, activation):
    sizes = list(layer_sizes)
    if len(sizes) < 2 or any(int(n) < 1 for n in sizes):
        raise ConfigError(f"invalid layer_sizes {sizes}: need >= 2 positive entries")
    if activation not in ACTIVATIONS:
        raise ConfigError(f"unknown activation {activation!r}")
    return sizes


def mlp_init(layer_sizes, activation="tanh", seed=0, members=None):
    """Uniform fan-in init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases.

    With ``members`` set, returns stacked parameters for that many
    independent networks (each drawn from the same generator in turn).
    """
    sizes = _check_sizes(layer_sizes, activation)
    rng = np.random.default_rng(seed)
    lead = () if members is None else (int(members),)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=lead + (fan_out, fan_in)))
        biases.append(np.zeros(lead + (fan_out,)))
    return MlpParams(tuple(sizes), weights, biases, activation)


def _act(z, activation):
    return np.tanh(z) if activation == "tanh" else np.maximum(z, 0.0)


def _as_batch(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.layer_sizes[0]:
        raise ShapeError(f"input has {x.shape[-1]} features, network expects {params.layer_sizes[0]}")
    single = x.ndim == 1
    return (x[None, :] if single else x), single


def forward_cache(params, x):
    """Forward pass keeping pre-activations and activations for backprop."""
    a = x
    zs, acts = [], [x]
    last = params.n_layers - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ np.swapaxes(w, -1, -2) + b[..., None, :]
        zs.append(z)
        a = z if i == last else _act(z, params.activation)
        acts.append(a)
    return zs, acts


def mlp_forward(params, x):
    """Hidden layers use the configured activation, the output layer is linear."""
    xb, single = _as_batch(params, x)
    out = forward_cache(params, xb)[1][-1]
    return out[0] if single else out


def backprop(params, zs, acts, grad_out):
    """Gradients of a scalar loss given dLoss/dOutput; returns an MlpParams of grads."""
    delta = grad_out
    gw = [None] * params.n_layers
    gb = [None] * params.n_layers
    for i in range(params.n_layers - 1, -1, -1):
        gw[i] = np.swapaxes(delta, -1, -2) @ acts[i]
        gb[i] = delta.sum(axis=-2)
        if i > 0:
            back = delta @ params.weights[i]
            if params.activation == "tanh":
                delta = back * (1.0 - acts[i] ** 2)
            else:
                delta = back * (zs[i - 1] > 0.0)
    return MlpParams(params.layer_sizes, gw, gb, params.activation)


def softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def soft_clamp(raw, bounds=LOGVAR_BOUNDS):
    """Smoothly squash ``raw`` into ``[low, high]``; returns (value, d value / d raw)."""
    low, high = bounds
    # softplus(r - low) - softplus(r - high) integrates a sigmoid over a window of
    # width high - low, so it lies strictly inside (0, high - low)
    value = low + softplus(raw - low) - softplus(raw - high)
    deriv = _sigmoid(raw - low) - _sigmoid(raw - high)
    return np.clip(value, low, high), deriv


def gaussian_head(raw, bounds=LOGVAR_BOUNDS):
    """Split a ``2*d`` raw output into mean and clamped log-variance."""
    d = raw.shape[-1] // 2
    logvar, _ = soft_clamp(raw[..., d:], bounds)
    return GaussianOutput(raw[..., :d], logvar)


def gaussian_nll(pred, target):
    """Per-sample Gaussian negative log-likelihood, summed over output dims."""
    target = np.asarray(target, dtype=np.float64)
    if np.shape(pred.mean) != target.shape:
        raise ShapeError(f"prediction shape {np.shape(pred.mean)} != target shape {target.shape}")
    sq = (target - pred.mean) ** 2
    return 0.5 * np.sum(LOG_2PI + pred.log_variance + sq * np.exp(-pred.log_variance), axis=-1)


def backward(params, x, target, loss="squared_error", logvar_bounds=LOGVAR_BOUNDS):
    """Loss and exact gradients for a batch.

    ``squared_error``: mean over samples of the summed squared residual.
    ``gaussian_nll``: the network emits ``2*d`` outputs (mean, raw
    log-variance); the loss is the mean per-sample NLL.
    Stacked params give one loss per member.
    """
    xb, single = _as_batch(params, x)
    target = np.asarray(target, dtype=np.float64)
    if single:
        target = target[None, :]
    zs, acts = forward_cache(params, xb)
    out = acts[-1]
    n = out.shape[-2]
    if loss == "squared_error":
        if target.shape != out.shape:
            raise ShapeError(f"target shape {target.shape} != output shape {out.shape}")
        resid = out - target
        value = np.sum(resid ** 2, axis=(-2, -1)) / n
        grad_out = 2.0 * resid / n
    elif loss == "gaussian_nll":
        d = out.shape[-1] // 2
        if target.shape[-1] != d or target.shape[:-1] != out.shape[:-1]:
            raise ShapeError(f"target shape {target.shape} incompatible with head {out.shape}")
        mean = out[..., :d]
        logvar, dlv = soft_clamp(out[..., d:], logvar_bounds)
        inv_var = np.exp(-logvar)
        resid = mean - target
        value = 0.5 * np.sum(LOG_2PI + logvar + resid ** 2 * inv_var, axis=(-2, -1)) / n
        g_mean = resid * inv_var / n
        g_lv = 0.5 * (1.0 - resid ** 2 * inv_var) * dlv / n
        grad_out = np.concatenate([g_mean, g_lv], axis=-1)
    else:
        raise ConfigError(f"unknown loss {loss!r}")
    return value, backprop(params, zs, acts, grad_out)


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **kw):
        arrays = params.arrays()
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], 0, **kw)


def optimizer_step(params, grads, state, lr=1e-3):
    """One Adam update.  Returns ``(new_params, new_state)``; inputs are untouched."""
    p_arrays, g_arrays = params.arrays(), grads.arrays()
    if len(p_arrays) != len(g_arrays):
        raise ShapeError("gradient structure does not match parameters")
    for k, g in enumerate(g_arrays):
        if g.shape != p_arrays[k].shape:
            raise ShapeError(f"gradient {k} has shape {g.shape}, expected {p_arrays[k].shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient", k // 2)
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        new_p.append(p - lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return params.with_arrays(new_p), AdamState(new_m, new_v, t, b1, b2, state.eps)


class FlatAdam:
    """In-place Adam over one contiguous parameter buffer.

    Numerically identical to repeated :func:`optimizer_step` calls; used by
    training loops where per-array allocation dominates the step cost.
    """

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        arrays = params.arrays()
        self.shapes = [a.shape for a in arrays]
        self.theta = np.concatenate([a.ravel() for a in arrays])
        views, offset = [], 0
        for a in arrays:
            views.append(self.theta[offset:offset + a.size].reshape(a.shape))
            offset += a.size
        self.params = params.with_arrays(views)
        self.m = np.zeros_like(self.theta)
        self.v = np.zeros_like(self.theta)
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self._tmp = np.empty_like(self.theta)

    def step(self, grads, lr):
        g_arrays = grads.arrays()
        for k, g in enumerate(g_arrays):
            if not np.all(np.isfinite(g)):
                raise TrainingError("non-finite gradient", k // 2)
        g = np.concatenate([a.ravel() for a in g_arrays])
        self.t += 1
        b1, b2, tmp = self.beta1, self.beta2, self._tmp
        self.m *= b1
        self.m += (1.0 - b1) * g
        self.v *= b2
        np.multiply(g, g, out=tmp)
        tmp *= 1.0 - b2
        self.v += tmp
        # identical operation order to optimizer_step
        np.divide(self.v, 1.0 - b2 ** self.t, out=tmp)
        np.sqrt(tmp, out=tmp)
        tmp += self.eps
        np.divide(self.m, 1.0 - b1 ** self.t, out=g)
        np.divide(g, tmp, out=g)
        g *= lr
        self.theta -= g
