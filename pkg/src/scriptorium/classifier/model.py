"""The patch classifier: conv/ReLU/max-pool blocks, dense layers, softmax."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..patching import normalize
from .config import ModelConfig


class NonFiniteLossError(FloatingPointError):
    def __init__(self, loss, batch_index=None):
        self.loss = loss
        self.batch_index = batch_index
        where = "" if batch_index is None else f" in batch {batch_index}"
        super().__init__(f"non-finite loss {loss}{where}")


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: list[np.ndarray]
    mean: float = 0.0
    std: float = 1.0
    extra: dict = field(default_factory=dict, compare=False)

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, [t.copy() for t in self.tensors], self.mean, self.std)

    def check(self) -> None:
        expected = self.config.param_shapes()
        actual = [t.shape for t in self.tensors]
        if actual != expected:
            raise ValueError(f"parameter shapes {actual} do not match config {expected}")
        if not all(np.all(np.isfinite(t)) for t in self.tensors):
            raise ValueError("parameters contain non-finite values")
        if not (np.isfinite(self.mean) and np.isfinite(self.std)):
            raise ValueError("normalization constants must be finite")

    @property
    def size(self) -> int:
        return sum(t.size for t in self.tensors)


def init_params(config: ModelConfig, mean=0.0, std=1.0) -> ModelParams:
    """He-uniform weights, zero biases, drawn from ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    tensors = []
    for shape in config.param_shapes():
        if len(shape) == 1:
            tensors.append(np.zeros(shape))
            continue
        fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
        limit = np.sqrt(6.0 / fan_in)
        tensors.append(rng.uniform(-limit, limit, size=shape))
    return ModelParams(config, tensors, float(mean), float(std))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_input(params: ModelParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    expected = params.config.input_shape
    if x.ndim != 4 or x.shape[1:] != expected:
        raise ValueError(f"expected patches of shape (N, {', '.join(map(str, expected))}), got {x.shape}")
    return x


def _forward(params: ModelParams, x: np.ndarray, backend=None):
    cfg = params.config
    caches = []
    t = params.tensors
    h = x
    k = 0
    for layer in cfg.conv_layers:
        w, b = t[k], t[k + 1]
        k += 2
        z = kernels.conv2d_forward(h, w, b, layer.stride, backend=backend)
        a = np.maximum(z, 0.0)
        pool_idx = None
        if layer.pool:
            pre_pool = a.shape
            a, pool_idx = kernels.maxpool2_forward(a, backend=backend)
        else:
            pre_pool = None
        caches.append((h, z, pool_idx, pre_pool))
        h = a
    flat = h.reshape(h.shape[0], -1)
    dense = []
    n_dense = len(cfg.fc_layers) + 1
    for i in range(n_dense):
        w, b = t[k], t[k + 1]
        k += 2
        z = flat @ w + b
        dense.append((flat, z))
        flat = np.maximum(z, 0.0) if i < n_dense - 1 else z
    return flat, (caches, dense, h.shape)


def logits(params: ModelParams, x: np.ndarray, backend=None) -> np.ndarray:
    """Final-layer logits for already-normalized patches ``(N, C, H, W)``."""
    out, _ = _forward(params, _check_input(params, x), backend)
    return out


def forward(params: ModelParams, x: np.ndarray, backend=None) -> np.ndarray:
    """Softmax scores for normalized patches; a single ``(C, H, W)`` patch gives shape ``(1, K)``."""
    return softmax(logits(params, x, backend))


def predict_proba(params: ModelParams, raw: np.ndarray, batch_size: int = 256, backend=None) -> np.ndarray:
    """Scores for raw uint8 patches, normalized with the checkpoint constants."""
    raw = np.asarray(raw)
    if len(raw) == 0:
        return np.zeros((0, params.config.num_classes))
    out = [
        forward(params, normalize(raw[i:i + batch_size], params.mean, params.std), backend)
        for i in range(0, len(raw), batch_size)
    ]
    return np.concatenate(out)


def loss_and_gradient(params: ModelParams, x: np.ndarray, y: np.ndarray, backend=None):
    """Mean cross-entropy over the batch and its gradient for every tensor."""
    x = _check_input(params, x)
    y = np.asarray(y, dtype=np.intp)
    cfg = params.config
    if y.shape != (x.shape[0],) or np.any(y < 0) or np.any(y >= cfg.num_classes):
        raise ValueError(f"labels must be a length-{x.shape[0]} vector in [0, {cfg.num_classes})")
    out, (caches, dense, conv_shape) = _forward(params, x, backend)
    n = x.shape[0]
    with np.errstate(invalid="ignore", over="ignore"):
        z = out - out.max(axis=1, keepdims=True)
        log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        loss = float(-log_probs[np.arange(n), y].mean())
    if not np.isfinite(loss):
        raise NonFiniteLossError(loss)

    grads: list[np.ndarray] = [None] * len(params.tensors)
    g = np.exp(log_probs)
    g[np.arange(n), y] -= 1.0
    g /= n
    k = len(params.tensors)
    for i in reversed(range(len(dense))):
        inp, pre = dense[i]
        if i < len(dense) - 1:
            g = g * (pre > 0)
        k -= 2
        grads[k] = inp.T @ g
        grads[k + 1] = g.sum(axis=0)
        g = g @ params.tensors[k].T
    g = g.reshape(conv_shape)
    for depth in reversed(range(len(cfg.conv_layers))):
        layer = cfg.conv_layers[depth]
        inp, pre, pool_idx, pre_pool = caches[depth]
        if layer.pool:
            g = kernels.maxpool2_backward(g, pool_idx, pre_pool, backend=backend)
        g = g * (pre > 0)
        k -= 2
        g, grads[k], grads[k + 1] = kernels.conv2d_backward(
            g, inp, params.tensors[k], layer.stride, backend=backend, need_dx=depth > 0)
    return loss, grads
