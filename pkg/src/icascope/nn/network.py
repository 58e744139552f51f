"""Network specifications, parameters, forward/backward passes, prediction and Grad-CAM."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ShapeError, StateError
from . import layers as L

CATEGORIES = ("B_V", "H_E", "E_I")
POSITIVE, NEGATIVE = 0, 1
INPUT_SHAPE = (3, 134, 136)
RASTER = "134x136 rows x cols"

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass(frozen=True)
class ConvSpec:
    filters: int
    kernel: int = 3
    stride: int = 1
    padding: int = 1


@dataclass(frozen=True)
class PoolSpec:
    window: int = 2
    stride: int = 2
    padding: int = 0


@dataclass(frozen=True)
class BlockSpec:
    conv: ConvSpec
    batchnorm: bool = True
    relu: bool = True
    pool: PoolSpec | None = None
    # run on each color plane separately with one shared weight set, then sum
    per_channel: bool = False


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    blocks: tuple[BlockSpec, ...]
    input_shape: tuple[int, int, int] = INPUT_SHAPE
    n_outputs: int = 2

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("a network needs at least one block")
        if not self.blocks[0].per_channel:
            raise ValueError("the first block must be per-channel")
        if any(b.per_channel for b in self.blocks[1:]):
            raise ValueError("only the first block may be per-channel")
        if self.blocks[-1].pool is not None:
            raise ValueError("the last block has no max-pool")
        if self.n_outputs != 2:
            raise ValueError("classifiers are binary")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "n_outputs": self.n_outputs,
            "blocks": [
                {
                    "conv": vars(b.conv),
                    "batchnorm": b.batchnorm,
                    "relu": b.relu,
                    "pool": None if b.pool is None else vars(b.pool),
                    "per_channel": b.per_channel,
                }
                for b in self.blocks
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        blocks = tuple(
            BlockSpec(ConvSpec(**b["conv"]), b["batchnorm"], b["relu"],
                      None if b["pool"] is None else PoolSpec(**b["pool"]), b["per_channel"])
            for b in d["blocks"]
        )
        return cls(d["name"], blocks, tuple(d["input_shape"]), d["n_outputs"])


def make_spec(name, filters, pool_stride, input_shape=INPUT_SHAPE, pool_window=2) -> NetworkSpec:
    blocks = []
    for i, f in enumerate(filters):
        last = i == len(filters) - 1
        pool = None if last else PoolSpec(pool_window, pool_stride, 0)
        blocks.append(BlockSpec(ConvSpec(f), True, True, pool, per_channel=(i == 0)))
    return NetworkSpec(name, tuple(blocks), tuple(input_shape))


_ARCHITECTURES = {
    "B_V": ([8, 16, 32, 64], 4),
    "H_E": ([8, 16, 32, 64, 128], 4),
    "E_I": ([8, 16, 32, 64, 128, 256, 256], 2),
}


def build_architecture(category: str) -> NetworkSpec:
    """First block, inner blocks and last block for one artifact category.

    B_V has 2 inner blocks, H_E 3 and E_I 5; every block but the last ends in a
    2x2 max-pool (stride 4 for B_V/H_E, 2 for E_I).
    """
    if category not in _ARCHITECTURES:
        raise ValueError(f"unknown category {category!r}; expected one of {CATEGORIES}")
    filters, stride = _ARCHITECTURES[category]
    return make_spec(category, filters, stride)


def feature_shapes(spec: NetworkSpec) -> list[tuple[int, int, int]]:
    """(channels, rows, cols) after each block, from the closed-form size arithmetic."""
    _, h, w = spec.input_shape
    shapes = []
    for b in spec.blocks:
        c = b.conv
        h, w = L.out_size(h, c.kernel, c.stride, c.padding), L.out_size(w, c.kernel, c.stride, c.padding)
        if b.pool is not None:
            p = b.pool
            h, w = L.out_size(h, p.window, p.stride, p.padding), L.out_size(w, p.window, p.stride, p.padding)
        if h < 1 or w < 1:
            raise ShapeError(f"{spec.name}: feature map collapses to {h}x{w}")
        shapes.append((c.filters, h, w))
    return shapes


def param_shapes(spec: NetworkSpec):
    """Learnable tensors in declaration order, then batchnorm running statistics."""
    params, buffers = [], []
    cin = 1 if spec.blocks[0].per_channel else spec.input_shape[0]
    for i, b in enumerate(spec.blocks):
        k = b.conv.kernel
        params.append((f"block{i}.conv.weight", (b.conv.filters, cin, k, k)))
        params.append((f"block{i}.conv.bias", (b.conv.filters,)))
        if b.batchnorm:
            params.append((f"block{i}.bn.gamma", (b.conv.filters,)))
            params.append((f"block{i}.bn.beta", (b.conv.filters,)))
            buffers.append((f"block{i}.bn.running_mean", (b.conv.filters,)))
            buffers.append((f"block{i}.bn.running_var", (b.conv.filters,)))
        cin = b.conv.filters
    c, h, w = feature_shapes(spec)[-1]
    params.append(("fc.weight", (spec.n_outputs, c * h * w)))
    params.append(("fc.bias", (spec.n_outputs,)))
    return params, buffers


@dataclass
class TrainedModel:
    spec: NetworkSpec
    params: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def astype(self, dtype) -> "TrainedModel":
        return TrainedModel(
            self.spec,
            {k: v.astype(dtype) for k, v in self.params.items()},
            {k: v.astype(dtype) for k, v in self.buffers.items()},
            dict(self.metadata),
        )

    def copy(self) -> "TrainedModel":
        return self.astype(self.dtype)

    def freeze(self) -> "TrainedModel":
        """Mark every array read-only (registry entries are immutable)."""
        for v in (*self.params.values(), *self.buffers.values()):
            v.setflags(write=False)
        return self


def init_model(spec: NetworkSpec, seed: int = 0, category: str | None = None) -> TrainedModel:
    """Fan-in scaled normal weights (He for convolutions), zero biases, unit BN scale."""
    rng = np.random.default_rng(seed)
    pshapes, bshapes = param_shapes(spec)
    params = {}
    for name, shape in pshapes:
        if name.endswith("conv.weight"):
            fan_in = int(np.prod(shape[1:]))
            params[name] = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
        elif name == "fc.weight":
            params[name] = rng.standard_normal(shape) * np.sqrt(1.0 / shape[1])
        elif name.endswith("bn.gamma"):
            params[name] = np.ones(shape)
        else:
            params[name] = np.zeros(shape)
    buffers = {n: (np.zeros(s) if n.endswith("mean") else np.ones(s)) for n, s in bshapes}
    meta = {"category": category or spec.name, "seed": seed, "epochs": 0, "raster": RASTER}
    model = TrainedModel(spec, {k: v.astype(np.float32) for k, v in params.items()},
                         {k: v.astype(np.float32) for k, v in buffers.items()}, meta)
    return model


# ---------------------------------------------------------------- forward

@dataclass
class Cache:
    mode: str
    n: int
    blocks: list
    feature: np.ndarray      # output of the last block, (N, C, h, w)
    fc_in: np.ndarray
    logits: np.ndarray
    running: dict            # batchnorm running stats after this pass


def as_batch(x, spec: NetworkSpec) -> np.ndarray:
    """Accept (N,C,H,W), (C,H,W) or (H,W,C) and return an NCHW batch."""
    x = np.asarray(x)
    c, h, w = spec.input_shape
    if x.ndim == 3:
        if x.shape == (c, h, w):
            x = x[None]
        elif x.shape == (h, w, c):
            x = x.transpose(2, 0, 1)[None]
    if x.ndim != 4 or x.shape[1:] != (c, h, w):
        raise ShapeError(f"expected images of shape {(c, h, w)} (or {(h, w, c)}), got {np.shape(x)}")
    return x


def forward(model: TrainedModel, x, mode: str = "infer"):
    """Run the network on a batch; returns ``(logits, cache)``.

    ``mode='train'`` normalizes with batch statistics and updates copies of the
    running statistics (in ``cache.running``); ``'infer'`` uses the stored ones.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    spec = model.spec
    train = mode == "train"
    dtype = model.dtype
    x = as_batch(x, spec).astype(dtype, copy=False)
    n = x.shape[0]
    p, buf = model.params, model.buffers
    running = {}
    caches = []
    h = x
    for i, b in enumerate(spec.blocks):
        if b.per_channel:
            h = h.reshape(n * h.shape[1], 1, *h.shape[2:])
        bc = {}
        h, bc["conv"] = L.conv_forward(h, p[f"block{i}.conv.weight"], p[f"block{i}.conv.bias"],
                                       b.conv.stride, b.conv.padding)
        if b.batchnorm:
            h, bc["bn"], rm, rv = L.batchnorm_forward(
                h, p[f"block{i}.bn.gamma"], p[f"block{i}.bn.beta"],
                buf[f"block{i}.bn.running_mean"], buf[f"block{i}.bn.running_var"],
                train, BN_MOMENTUM, BN_EPS)
            running[f"block{i}.bn.running_mean"] = rm
            running[f"block{i}.bn.running_var"] = rv
        if b.relu:
            h, bc["relu"] = L.relu_forward(h, inplace=True)
        if b.pool is not None:
            h, bc["pool"] = L.maxpool_forward(h, b.pool.window, b.pool.stride, b.pool.padding)
        if b.per_channel:
            planes = spec.input_shape[0]
            h = h.reshape(n, planes, *h.shape[1:]).sum(axis=1)
            bc["planes"] = planes
        caches.append(bc)
    feature = h
    fc_in = h.reshape(n, -1)
    logits, _ = L.linear_forward(fc_in, p["fc.weight"], p["fc.bias"])
    return logits, Cache(mode, n, caches, feature, fc_in, logits, running)


def _backward_blocks(model, cache, dfeature, grads, need_input_grad=False):
    spec, p = model.spec, model.params
    dh = dfeature
    for i in reversed(range(len(spec.blocks))):
        b, bc = spec.blocks[i], cache.blocks[i]
        if b.per_channel:
            planes = bc["planes"]
            dh = np.repeat(dh[:, None], planes, axis=1).reshape(cache.n * planes, *dh.shape[1:])
        if b.pool is not None:
            if b.relu:
                # gradient only reaches pooled maxima, where relu output == pooled value
                dh = L.relu_backward(dh, bc["pool"][1])
            dh = L.maxpool_backward(dh, bc["pool"])
        elif b.relu:
            dh = L.relu_backward(dh, bc["relu"])
        if b.batchnorm:
            dh, dg, db = L.batchnorm_backward(dh, bc["bn"])
            grads[f"block{i}.bn.gamma"] = dg
            grads[f"block{i}.bn.beta"] = db
        dh, dw, dbias = L.conv_backward(dh, bc["conv"], need_dx=(i > 0 or need_input_grad))
        grads[f"block{i}.conv.weight"] = dw
        grads[f"block{i}.conv.bias"] = dbias
    return dh


def backward_from_logits(model: TrainedModel, cache: Cache, dlogits):
    """Gradients of an arbitrary upstream signal on the logits (any mode)."""
    grads = {}
    p = model.params
    dfc_in, grads["fc.weight"], grads["fc.bias"] = L.linear_backward(dlogits, cache.fc_in, p["fc.weight"])
    _backward_blocks(model, cache, dfc_in.reshape(cache.feature.shape), grads)
    return {k: grads[k] for k in p}


def loss_and_grad(logits, targets):
    return L.softmax_cross_entropy(logits, np.asarray(targets, dtype=np.intp))


def backward(model: TrainedModel, cache: Cache, targets):
    """Softmax cross-entropy gradients for every parameter; needs a train-mode cache.

    ``targets`` holds class indices (0 positive, 1 negative), one per example.
    """
    if cache.mode != "train":
        raise StateError("backward needs the cache of a train-mode forward pass")
    targets = np.atleast_1d(np.asarray(targets, dtype=np.intp))
    if targets.shape != (cache.n,):
        raise ShapeError(f"{targets.shape[0]} targets for a batch of {cache.n}")
    _, dlogits = L.softmax_cross_entropy(cache.logits, targets)
    return backward_from_logits(model, cache, dlogits)


# ---------------------------------------------------------------- inference

def predict_proba(model: TrainedModel, x, batch_size: int = 64) -> np.ndarray:
    """Positive-class probability for each image of a batch."""
    x = as_batch(x, model.spec)
    out = []
    for s in range(0, x.shape[0], batch_size):
        logits, _ = forward(model, x[s:s + batch_size], "infer")
        out.append(L.softmax(logits.astype(np.float64))[:, POSITIVE])
    return np.concatenate(out)


def decide(logits) -> tuple[str, float]:
    prob = L.softmax(np.asarray(logits, dtype=np.float64))
    score = float(prob[POSITIVE])
    # equal probabilities resolve to negative
    return ("positive" if prob[POSITIVE] > prob[NEGATIVE] else "negative"), score


def predict(model: TrainedModel, image) -> tuple[str, float]:
    """``(label, score)`` where score is the positive-class probability."""
    logits, _ = forward(model, as_batch(image, model.spec), "infer")
    if logits.shape[0] != 1:
        raise ShapeError("predict takes a single image; use predict_proba for batches")
    return decide(logits[0])


def _bilinear(m, rows, cols):
    """Resize a 2-D map with bilinear interpolation (pixel centres aligned)."""
    h, w = m.shape

    def coords(n_out, n_in):
        c = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
        c = np.clip(c, 0, n_in - 1)
        lo = np.floor(c).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, c - lo

    r0, r1, fr = coords(rows, h)
    c0, c1, fc = coords(cols, w)
    top = m[r0][:, c0] * (1 - fc) + m[r0][:, c1] * fc
    bot = m[r1][:, c0] * (1 - fc) + m[r1][:, c1] * fc
    return top * (1 - fr)[:, None] + bot * fr[:, None]


def grad_cam(model: TrainedModel, image, target_class: int = POSITIVE) -> np.ndarray:
    """Class-activation map over the raster, scaled to max-abs 1 (signed)."""
    logits, cache = forward(model, as_batch(image, model.spec), "infer")
    if logits.shape[0] != 1:
        raise ShapeError("grad_cam takes a single image")
    # target logit is linear in the last feature maps
    dfeat = model.params["fc.weight"][target_class].reshape(cache.feature.shape[1:])
    alpha = dfeat.astype(np.float64).mean(axis=(1, 2))
    cam = np.tensordot(alpha, cache.feature[0].astype(np.float64), axes=1)
    _, rows, cols = model.spec.input_shape
    cam = _bilinear(cam, rows, cols)
    peak = np.abs(cam).max()
    return cam / peak if peak > 0 else cam


def with_running(model: TrainedModel, running: dict) -> TrainedModel:
    return replace(model, buffers={**model.buffers, **running})
