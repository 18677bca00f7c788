"""From-scratch network math for the steering classifier.

The network is a fixed stack: single-channel conv + ELU, 2x2 max pooling,
flatten, two ReLU dense layers and a softmax dense head. Forward pass,
analytic backward pass, losses and Adam updates are written directly on
numpy arrays; there is no ML framework underneath. Every function here is
pure and deterministic: identical inputs give bit-identical outputs.

Internal arithmetic is double precision; checkpoints store 32-bit floats
(see checkpoint.py).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractError, ShapeError

# Learnable tensors, in the order they are updated and serialized.
PARAM_FIELDS = (
    "conv_w",
    "conv_b",
    "dense1_w",
    "dense1_b",
    "dense2_w",
    "dense2_b",
    "out_w",
    "out_b",
)


@dataclass(frozen=True)
class ArchitectureConfig:
    """Layer sizes of the steering network.

    The layer sequence itself is fixed; only sizes are configurable.
    Pooling is fixed at 2x2 and the head always has 3 classes.
    """

    input_height: int = 64
    input_width: int = 64
    conv_filters: int = 8
    conv_kernel: int = 5
    pool: int = 2
    dense1_units: int = 64
    dense2_units: int = 16
    classes: int = 3

    def __post_init__(self):
        if self.pool != 2:
            raise ContractError(f"pool side is fixed at 2, got {self.pool}")
        if self.classes != 3:
            raise ContractError(f"classes is fixed at 3, got {self.classes}")
        for name in ("input_height", "input_width", "conv_filters",
                     "conv_kernel", "dense1_units", "dense2_units"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive")
        if self.conv_out_height < 1 or self.conv_out_width < 1:
            raise ContractError(
                f"conv output {self.conv_out_height}x{self.conv_out_width} "
                f"not positive for input {self.input_height}x{self.input_width} "
                f"and kernel {self.conv_kernel}")
        if self.conv_out_height % 2 != 0 or self.conv_out_width % 2 != 0:
            raise ContractError(
                f"2x2 pooling needs even conv output, got "
                f"{self.conv_out_height}x{self.conv_out_width}")

    @property
    def conv_out_height(self) -> int:
        return self.input_height - self.conv_kernel + 1

    @property
    def conv_out_width(self) -> int:
        return self.input_width - self.conv_kernel + 1

    @property
    def pooled_height(self) -> int:
        return self.conv_out_height // 2

    @property
    def pooled_width(self) -> int:
        return self.conv_out_width // 2

    @property
    def flat_size(self) -> int:
        return self.conv_filters * self.pooled_height * self.pooled_width


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.beta1 < 1.0:
            raise ContractError(f"beta1 must be in (0, 1), got {self.beta1}")
        if not 0.0 < self.beta2 < 1.0:
            raise ContractError(f"beta2 must be in (0, 1), got {self.beta2}")
        if self.epsilon <= 0.0:
            raise ContractError(f"epsilon must be positive, got {self.epsilon}")
        if self.learning_rate <= 0.0:
            raise ContractError(
                f"learning_rate must be positive, got {self.learning_rate}")


@dataclass
class NetworkParams:
    """All learnable tensors plus Adam state.

    Weight shapes are fixed by the config: conv_w (F, K, K), conv_b (F,),
    dense1_w (D1, flat), dense2_w (D2, D1), out_w (3, D2), with matching
    bias vectors. adam_m/adam_v mirror the weight shapes; adam_t counts
    completed optimizer steps.
    """

    config: ArchitectureConfig
    conv_w: np.ndarray
    conv_b: np.ndarray
    dense1_w: np.ndarray
    dense1_b: np.ndarray
    dense2_w: np.ndarray
    dense2_b: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray
    adam_m: dict = field(default_factory=dict)
    adam_v: dict = field(default_factory=dict)
    adam_t: int = 0

    def weight_shapes(self) -> dict:
        return weight_shapes(self.config)


def weight_shapes(config: ArchitectureConfig) -> dict:
    """Expected shape of every learnable tensor, keyed by PARAM_FIELDS."""
    c = config
    return {
        "conv_w": (c.conv_filters, c.conv_kernel, c.conv_kernel),
        "conv_b": (c.conv_filters,),
        "dense1_w": (c.dense1_units, c.flat_size),
        "dense1_b": (c.dense1_units,),
        "dense2_w": (c.dense2_units, c.dense1_units),
        "dense2_b": (c.dense2_units,),
        "out_w": (c.classes, c.dense2_units),
        "out_b": (c.classes,),
    }


@dataclass(frozen=True)
class ForwardCache:
    """Intermediate activations from forward(), consumed by backward()."""

    config: ArchitectureConfig
    frame: np.ndarray
    conv_pre: np.ndarray   # pre-ELU conv output
    pool_idx: np.ndarray   # per-window argmax from maxpool2
    flat: np.ndarray
    dense1_pre: np.ndarray
    dense1_out: np.ndarray
    dense2_pre: np.ndarray
    dense2_out: np.ndarray
    probs: np.ndarray


def conv2d(image: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid cross-correlation of a single-channel image with F kernels.

    out[f, i, j] = bias[f] + sum_{a,b} weights[f, a, b] * image[i+a, j+b].
    No padding, stride 1; output is (F, H-K+1, W-K+1).
    """
    image = np.asarray(image, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if image.ndim != 2:
        raise ShapeError(f"expected a 2-D single-channel image, got shape {image.shape}")
    if weights.ndim != 3 or weights.shape[1] != weights.shape[2]:
        raise ShapeError(f"expected (F, K, K) kernels, got shape {weights.shape}")
    f, k = weights.shape[0], weights.shape[1]
    if bias.shape != (f,):
        raise ShapeError(f"bias shape {bias.shape} does not match {f} filters")
    h, w = image.shape
    if h < k or w < k:
        raise ShapeError(f"image {image.shape} smaller than kernel {weights.shape[1:]}")
    windows = sliding_window_view(image, (k, k))          # (H-K+1, W-K+1, K, K)
    out = np.tensordot(weights, windows, axes=([1, 2], [2, 3]))
    return out + bias[:, None, None]


def elu(x: np.ndarray) -> np.ndarray:
    """ELU with alpha = 1: x for x >= 0, exp(x) - 1 otherwise."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0.0, x, np.expm1(x))


def relu(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0)


def softmax(x: np.ndarray) -> np.ndarray:
    """Max-shifted softmax over a rank-1 vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"softmax expects a rank-1 vector, got shape {x.shape}")
    shifted = np.exp(x - x.max())
    return shifted / shifted.sum()


def maxpool2(x: np.ndarray):
    """2x2 non-overlapping max pooling.

    Returns (pooled, idx) where idx holds each window's argmax in
    row-major window order; ties break toward the smallest flat index.
    idx is what routes gradients back in maxpool2_backward.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"expected (F, H, W), got shape {x.shape}")
    f, h, w = x.shape
    if h % 2 != 0 or w % 2 != 0:
        raise ShapeError(f"maxpool2 needs even spatial dims, got {h}x{w}")
    windows = (x.reshape(f, h // 2, 2, w // 2, 2)
                .transpose(0, 1, 3, 2, 4)
                .reshape(f, h // 2, w // 2, 4))
    idx = windows.argmax(axis=3)
    pooled = np.take_along_axis(windows, idx[..., None], axis=3)[..., 0]
    return pooled, idx


def maxpool2_backward(grad: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Scatter pooled gradients back to the positions recorded in idx."""
    f, ph, pw = grad.shape
    scattered = np.zeros((f, ph, pw, 4), dtype=np.float64)
    np.put_along_axis(scattered, idx[..., None], grad[..., None], axis=3)
    return (scattered.reshape(f, ph, pw, 2, 2)
                     .transpose(0, 1, 3, 2, 4)
                     .reshape(f, ph * 2, pw * 2))


def dense(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine layer: weights @ x + bias."""
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if x.ndim != 1 or weights.ndim != 2:
        raise ShapeError(
            f"dense expects rank-1 input and rank-2 weights, got {x.shape} and {weights.shape}")
    if weights.shape[1] != x.shape[0] or bias.shape != (weights.shape[0],):
        raise ShapeError(
            f"dense shapes disagree: weights {weights.shape}, input {x.shape}, bias {bias.shape}")
    return weights @ x + bias


def forward(params: NetworkParams, frame: np.ndarray):
    """Run the full network on one frame.

    The frame must be (input_height, input_width) with values in [0, 1].
    Returns (probs, cache) where probs is the length-3 softmax output and
    cache holds everything backward() needs.
    """
    cfg = params.config
    frame = np.asarray(frame, dtype=np.float64)
    expected = (cfg.input_height, cfg.input_width)
    if frame.shape != expected:
        raise ShapeError(f"frame shape {frame.shape} does not match network input {expected}")
    lo, hi = frame.min(), frame.max()
    if not np.isfinite(lo) or not np.isfinite(hi) or lo < 0.0 or hi > 1.0:
        raise ContractError(
            f"frame values must be normalized to [0, 1], got range [{lo}, {hi}]")

    conv_pre = conv2d(frame, params.conv_w, params.conv_b)
    conv_act = elu(conv_pre)
    pooled, pool_idx = maxpool2(conv_act)
    flat = pooled.reshape(-1)
    dense1_pre = dense(flat, params.dense1_w, params.dense1_b)
    dense1_out = relu(dense1_pre)
    dense2_pre = dense(dense1_out, params.dense2_w, params.dense2_b)
    dense2_out = relu(dense2_pre)
    logits = dense(dense2_out, params.out_w, params.out_b)
    probs = softmax(logits)
    cache = ForwardCache(
        config=cfg,
        frame=frame,
        conv_pre=conv_pre,
        pool_idx=pool_idx,
        flat=flat,
        dense1_pre=dense1_pre,
        dense1_out=dense1_out,
        dense2_pre=dense2_pre,
        dense2_out=dense2_out,
        probs=probs,
    )
    return probs, cache


def mse_loss(probs: np.ndarray, target: np.ndarray):
    """Mean-square error over the 3 class probabilities.

    Returns (loss, dloss_dprobs). The target must be one-hot.
    """
    probs = np.asarray(probs, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_one_hot(target)
    if probs.shape != (3,):
        raise ShapeError(f"probs must have shape (3,), got {probs.shape}")
    diff = probs - target
    loss = float(np.dot(diff, diff)) / 3.0
    return loss, (2.0 / 3.0) * diff


def cross_entropy_loss(probs: np.ndarray, target: np.ndarray):
    """Cross-entropy alternative to mse_loss; same (loss, grad) contract.

    Offered behind a trainer config switch, never the default.
    """
    probs = np.asarray(probs, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_one_hot(target)
    if probs.shape != (3,):
        raise ShapeError(f"probs must have shape (3,), got {probs.shape}")
    clipped = np.clip(probs, 1e-12, None)
    loss = float(-np.dot(target, np.log(clipped)))
    return loss, -target / clipped


def _check_one_hot(target: np.ndarray):
    if target.shape != (3,):
        raise ContractError(f"target must have shape (3,), got {target.shape}")
    if not (np.all((target == 0.0) | (target == 1.0)) and target.sum() == 1.0):
        raise ContractError(f"target must be one-hot, got {target.tolist()}")


def backward(params: NetworkParams, cache: ForwardCache, dloss_dprobs: np.ndarray) -> dict:
    """Analytic gradients of the loss w.r.t. every learnable tensor.

    The gradient w.r.t. the input frame is not computed. Returns a dict
    keyed by PARAM_FIELDS.
    """
    if cache.config != params.config:
        raise ContractError(
            "forward cache was produced for a different architecture than these params")
    dprobs = np.asarray(dloss_dprobs, dtype=np.float64)
    if dprobs.shape != (3,):
        raise ShapeError(f"dloss_dprobs must have shape (3,), got {dprobs.shape}")

    p = cache.probs
    dlogits = p * (dprobs - np.dot(dprobs, p))

    g_out_w = np.outer(dlogits, cache.dense2_out)
    g_out_b = dlogits
    d2 = (params.out_w.T @ dlogits) * (cache.dense2_pre > 0.0)

    g_dense2_w = np.outer(d2, cache.dense1_out)
    g_dense2_b = d2
    d1 = (params.dense2_w.T @ d2) * (cache.dense1_pre > 0.0)

    g_dense1_w = np.outer(d1, cache.flat)
    g_dense1_b = d1
    dflat = params.dense1_w.T @ d1

    cfg = params.config
    dpooled = dflat.reshape(cfg.conv_filters, cfg.pooled_height, cfg.pooled_width)
    dconv_act = maxpool2_backward(dpooled, cache.pool_idx)
    # d/dx ELU(x): 1 for x >= 0, exp(x) otherwise.
    dconv_pre = dconv_act * np.where(cache.conv_pre >= 0.0, 1.0, np.exp(cache.conv_pre))

    k = cfg.conv_kernel
    windows = sliding_window_view(cache.frame, (k, k))
    g_conv_w = np.tensordot(dconv_pre, windows, axes=([1, 2], [0, 1]))
    g_conv_b = dconv_pre.sum(axis=(1, 2))

    return {
        "conv_w": g_conv_w,
        "conv_b": g_conv_b,
        "dense1_w": g_dense1_w,
        "dense1_b": g_dense1_b,
        "dense2_w": g_dense2_w,
        "dense2_b": g_dense2_b,
        "out_w": g_out_w,
        "out_b": g_out_b,
    }


def zero_gradients(params: NetworkParams) -> dict:
    """All-zero gradient dict matching the params' weight shapes."""
    return {name: np.zeros(shape, dtype=np.float64)
            for name, shape in params.weight_shapes().items()}


def adam_step(params: NetworkParams, gradients: dict, cfg: AdamConfig) -> NetworkParams:
    """One Adam update over every learnable tensor; returns new params.

    t += 1; m = b1*m + (1-b1)*g; v = b2*v + (1-b2)*g^2;
    w -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps).
    """
    shapes = params.weight_shapes()
    for name in PARAM_FIELDS:
        if name not in gradients:
            raise ShapeError(f"missing gradient for {name}")
        g = np.asarray(gradients[name])
        if g.shape != shapes[name]:
            raise ShapeError(
                f"gradient shape {g.shape} does not match {name} shape {shapes[name]}")

    t = params.adam_t + 1
    b1, b2 = cfg.beta1, cfg.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    new_weights = {}
    new_m = {}
    new_v = {}
    for name in PARAM_FIELDS:
        g = np.asarray(gradients[name], dtype=np.float64)
        m_old = params.adam_m.get(name)
        v_old = params.adam_v.get(name)
        if m_old is None:
            m_old = np.zeros_like(g)
        if v_old is None:
            v_old = np.zeros_like(g)
        # In-place updates on fresh buffers; this runs once per batch on
        # every parameter, so allocation churn matters.
        m = m_old * b1
        m += (1.0 - b1) * g
        v = v_old * b2
        v += (1.0 - b2) * (g * g)
        denom = v / corr2
        np.sqrt(denom, out=denom)
        denom += cfg.epsilon
        step = m / corr1
        step *= cfg.learning_rate
        step /= denom
        np.subtract(getattr(params, name), step, out=step)
        new_weights[name] = step
        new_m[name] = m
        new_v[name] = v
    return replace(params, adam_m=new_m, adam_v=new_v, adam_t=t, **new_weights)


def _glorot_bounds(config: ArchitectureConfig) -> dict:
    """Uniform init bound sqrt(6 / (fan_in + fan_out)) per weight tensor."""
    c = config
    k2 = c.conv_kernel * c.conv_kernel
    return {
        "conv_w": np.sqrt(6.0 / (k2 + c.conv_filters * k2)),
        "dense1_w": np.sqrt(6.0 / (c.flat_size + c.dense1_units)),
        "dense2_w": np.sqrt(6.0 / (c.dense1_units + c.dense2_units)),
        "out_w": np.sqrt(6.0 / (c.dense2_units + c.classes)),
    }


def init_params(config: ArchitectureConfig, seed: int) -> NetworkParams:
    """Fresh params: Glorot-uniform weights from a seeded generator, zero
    biases, zero Adam state."""
    rng = np.random.default_rng(seed)
    bounds = _glorot_bounds(config)
    shapes = weight_shapes(config)
    values = {}
    for name in PARAM_FIELDS:
        if name.endswith("_b"):
            values[name] = np.zeros(shapes[name], dtype=np.float64)
        else:
            b = bounds[name]
            values[name] = rng.uniform(-b, b, size=shapes[name])
    params = NetworkParams(config=config, **values)
    params.adam_m = {n: np.zeros(shapes[n], dtype=np.float64) for n in PARAM_FIELDS}
    params.adam_v = {n: np.zeros(shapes[n], dtype=np.float64) for n in PARAM_FIELDS}
    return params


def quantize_params(params: NetworkParams) -> NetworkParams:
    """Round every weight through 32-bit storage precision.

    Applied at the end of training so the in-memory model predicts
    bit-identically to its saved checkpoint.
    """
    rounded = {name: getattr(params, name).astype(np.float32).astype(np.float64)
               for name in PARAM_FIELDS}
    return replace(params, **rounded)
