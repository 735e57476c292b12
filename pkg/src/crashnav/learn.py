"""Binary go-straight classifier: small conv net, reverse-mode gradients and
minibatch SGD implemented directly on numpy arrays."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence, Union

import cv2
import numpy as np

from .label import Dataset, Label, LabeledSample, Split
from .world import Frame

CHECKPOINT_FORMAT_VERSION = 1


class NumericOverflowError(FloatingPointError):
    pass


class CheckpointError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Net specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Conv:
    out_channels: int
    kernel: int
    stride: int


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class MaxPool:
    kernel: int
    stride: int


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Dense:
    out_features: int


LayerSpec = Union[Conv, ReLU, MaxPool, Flatten, Dense]


@dataclass(frozen=True)
class NetSpec:
    input: tuple[int, int]  # (height, width)
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        shapes = self.layer_shapes()  # validates chaining
        if shapes[-1] != (2,):
            raise ValueError(f"final layer must output 2 logits, got {shapes[-1]}")

    def layer_shapes(self) -> list[tuple]:
        """Output shape after each layer, starting from (C, H, W) = (1, h, w)."""
        shape: tuple = (1, *self.input)
        out = []
        for layer in self.layers:
            if isinstance(layer, Conv):
                c, h, w = shape
                oh = (h - layer.kernel) // layer.stride + 1
                ow = (w - layer.kernel) // layer.stride + 1
                if oh < 1 or ow < 1:
                    raise ValueError(f"conv {layer} does not fit input {shape}")
                shape = (layer.out_channels, oh, ow)
            elif isinstance(layer, MaxPool):
                c, h, w = shape
                oh = (h - layer.kernel) // layer.stride + 1
                ow = (w - layer.kernel) // layer.stride + 1
                if oh < 1 or ow < 1:
                    raise ValueError(f"pool {layer} does not fit input {shape}")
                shape = (c, oh, ow)
            elif isinstance(layer, Flatten):
                shape = (int(np.prod(shape)),)
            elif isinstance(layer, Dense):
                if len(shape) != 1:
                    raise ValueError("dense layer requires flattened input")
                shape = (layer.out_features,)
            elif isinstance(layer, ReLU):
                pass
            else:
                raise ValueError(f"unknown layer {layer!r}")
            out.append(shape)
        return out


def default_net_spec(input_hw: tuple[int, int] = (64, 64)) -> NetSpec:
    return NetSpec(
        input=input_hw,
        layers=(
            Conv(8, 5, 2), ReLU(), MaxPool(2, 2),
            Conv(16, 3, 2), ReLU(),
            Conv(32, 3, 2), ReLU(),
            Flatten(), Dense(64), ReLU(), Dense(2),
        ),
    )


@dataclass
class NetworkParams:
    spec: NetSpec
    tensors: list[dict[str, np.ndarray]]  # per layer: {"W":..., "b":...} or {}
    init_seed: int

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            self.spec,
            [{k: v.copy() for k, v in t.items()} for t in self.tensors],
            self.init_seed,
        )

    def flat(self):
        for t in self.tensors:
            for k in sorted(t):
                yield t[k]


def init_params(spec: NetSpec, seed: int, dtype=np.float64) -> NetworkParams:
    """He-scaled Gaussian init for every layer."""
    rng = np.random.default_rng(seed)
    tensors: list[dict[str, np.ndarray]] = []
    shape: tuple = (1, *spec.input)
    for layer, out_shape in zip(spec.layers, spec.layer_shapes()):
        if isinstance(layer, Conv):
            c_in = shape[0]
            fan_in = c_in * layer.kernel * layer.kernel
            W = (rng.standard_normal((fan_in, layer.out_channels))
                 * math.sqrt(2.0 / fan_in)).astype(dtype)
            b = np.zeros(layer.out_channels, dtype=dtype)
            tensors.append({"W": W, "b": b})
        elif isinstance(layer, Dense):
            fan_in = shape[0]
            W = (rng.standard_normal((fan_in, layer.out_features))
                 * math.sqrt(2.0 / fan_in)).astype(dtype)
            b = np.zeros(layer.out_features, dtype=dtype)
            tensors.append({"W": W, "b": b})
        else:
            tensors.append({})
        shape = out_shape
    return NetworkParams(spec=spec, tensors=tensors, init_seed=seed)


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def _conv_cols(x: np.ndarray, k: int, s: int) -> np.ndarray:
    """(N, H, W, C) -> (N, OH, OW, C, k, k) sliding windows with stride s."""
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
    return win[:, ::s, ::s]


def _forward(params: NetworkParams, x: np.ndarray, want_cache: bool):
    """Activations are channels-last (N, H, W, C) to keep memory contiguous."""
    cache = [] if want_cache else None
    for layer, tens in zip(params.spec.layers, params.tensors):
        if isinstance(layer, Conv):
            k, st = layer.kernel, layer.stride
            cols = _conv_cols(x, k, st)
            n, oh, ow = cols.shape[:3]
            flat = cols.reshape(n * oh * ow, -1)
            y = flat @ tens["W"] + tens["b"]
            if want_cache:
                cache.append(("conv", x.shape, flat, layer))
            x = y.reshape(n, oh, ow, layer.out_channels)
        elif isinstance(layer, ReLU):
            if want_cache:
                cache.append(("relu", x > 0))
            x = np.maximum(x, 0.0)
        elif isinstance(layer, MaxPool):
            k, st = layer.kernel, layer.stride
            cols = _conv_cols(x, k, st)
            n, oh, ow, c = cols.shape[:4]
            flat = cols.reshape(n, oh, ow, c, k * k)
            arg = np.argmax(flat, axis=-1)
            if want_cache:
                cache.append(("pool", x.shape, arg, layer))
            x = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
        elif isinstance(layer, Flatten):
            if want_cache:
                cache.append(("flatten", x.shape))
            x = x.reshape(x.shape[0], -1)
        elif isinstance(layer, Dense):
            if want_cache:
                cache.append(("dense", x))
            x = x @ tens["W"] + tens["b"]
    if not np.all(np.isfinite(x)):
        raise NumericOverflowError("non-finite activation in forward pass")
    return x, cache


def _scatter_windows(dcols: np.ndarray, in_shape, k: int, s: int) -> np.ndarray:
    """Adjoint of _conv_cols: scatter (N, OH, OW, C, k, k) back to (N, H, W, C)."""
    n, oh, ow = dcols.shape[:3]
    dx = np.zeros(in_shape, dtype=dcols.dtype)
    for a in range(k):
        for b in range(k):
            dx[:, a:a + s * oh:s, b:b + s * ow:s, :] += dcols[:, :, :, :, a, b]
    return dx


def _backward(params: NetworkParams, cache: list, dlogits: np.ndarray):
    grads = [dict() for _ in params.tensors]
    d = dlogits
    for i in range(len(params.spec.layers) - 1, -1, -1):
        layer = params.spec.layers[i]
        entry = cache[i]
        tens = params.tensors[i]
        if isinstance(layer, Dense):
            x_in = entry[1]
            grads[i]["W"] = x_in.T @ d
            grads[i]["b"] = d.sum(axis=0)
            d = d @ tens["W"].T
        elif isinstance(layer, Flatten):
            d = d.reshape(entry[1])
        elif isinstance(layer, ReLU):
            d = d * entry[1]
        elif isinstance(layer, MaxPool):
            _, in_shape, arg, lyr = entry
            k, s = lyr.kernel, lyr.stride
            n, oh, ow, c = d.shape
            dcols = np.zeros((n, oh, ow, c, k * k), dtype=d.dtype)
            np.put_along_axis(dcols, arg[..., None], d[..., None], axis=-1)
            d = _scatter_windows(dcols.reshape(n, oh, ow, c, k, k), in_shape, k, s)
        elif isinstance(layer, Conv):
            _, in_shape, flat, lyr = entry
            k, s = lyr.kernel, lyr.stride
            n, oh, ow = d.shape[:3]
            dy = d.reshape(n * oh * ow, lyr.out_channels)
            grads[i]["W"] = flat.T @ dy
            grads[i]["b"] = dy.sum(axis=0)
            c = in_shape[3]
            dcols = (dy @ tens["W"].T).reshape(n, oh, ow, c, k, k)
            d = _scatter_windows(dcols, in_shape, k, s)
    return grads


def resize_to_input(pixels: np.ndarray, input_hw: tuple[int, int]) -> np.ndarray:
    """Area-average resample to the network input; crops get stretched."""
    h, w = input_hw
    if pixels.shape == (h, w):
        return pixels.astype(np.float64)
    out = cv2.resize(pixels.astype(np.float64), (w, h), interpolation=cv2.INTER_AREA)
    return out


def _params_dtype(params: "NetworkParams"):
    for t in params.tensors:
        if "W" in t:
            return t["W"].dtype
    return np.float64


def _prepare(frames: Sequence[np.ndarray], input_hw, dtype=np.float64) -> np.ndarray:
    x = np.stack([resize_to_input(f, input_hw) for f in frames])
    return (x - 0.5)[:, :, :, None].astype(dtype)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params: NetworkParams, frame: Frame) -> tuple[float, np.ndarray]:
    """Probability that flying straight is safe, plus the raw logit pair."""
    x = _prepare([frame.pixels], params.spec.input, _params_dtype(params))
    logits, _ = _forward(params, x, want_cache=False)
    p = _softmax(logits)[0]
    return float(p[Label.POSITIVE.value]), logits[0]


def forward_frames(params: NetworkParams, pixel_arrays: Sequence[np.ndarray]) -> np.ndarray:
    """Batch p_straight for a list of pixel arrays (possibly non-input-sized)."""
    x = _prepare(pixel_arrays, params.spec.input, _params_dtype(params))
    logits, _ = _forward(params, x, want_cache=False)
    return _softmax(logits)[:, Label.POSITIVE.value]


def loss_and_gradients(
    params: NetworkParams,
    batch: Sequence[LabeledSample],
    l2_weight_decay: float = 0.0,
):
    """Mean negative log-likelihood (+ L2 on weights) and per-tensor gradients."""
    if not batch:
        raise ValueError("batch must be nonempty")
    x = _prepare([s.frame.pixels for s in batch], params.spec.input,
                 _params_dtype(params))
    labels = np.array([s.label.value for s in batch])
    return _loss_and_gradients_arrays(params, x, labels, l2_weight_decay)


def _loss_and_gradients_arrays(params, x, labels, l2):
    n = x.shape[0]
    logits, cache = _forward(params, x, want_cache=True)
    p = _softmax(logits)
    eps = 1e-12
    nll = -np.mean(np.log(p[np.arange(n), labels] + eps))
    loss = nll
    donehot = p.copy()
    donehot[np.arange(n), labels] -= 1.0
    grads = _backward(params, cache, donehot / n)
    if l2 > 0:
        for tens, g in zip(params.tensors, grads):
            if "W" in tens:
                loss += 0.5 * l2 * float(np.sum(tens["W"] ** 2))
                g["W"] = g["W"] + l2 * tens["W"]
    return float(loss), grads


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 64
    epochs: int = 30
    momentum: float = 0.9
    l2_weight_decay: float = 1e-4
    seed: int = 0
    early_stop_patience: int = 5

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainReport:
    train_loss: list[float]
    val_loss: list[float]
    val_accuracy: list[float]
    best_epoch: int
    diverged: bool = False


def _eval(params, x_u8, labels, chunk=512):
    dtype = _params_dtype(params)
    losses = []
    correct = 0
    for i in range(0, len(labels), chunk):
        x = (x_u8[i:i + chunk].astype(dtype) / 255.0 - 0.5)[..., None]
        logits, _ = _forward(params, x, want_cache=False)
        p = _softmax(logits)
        lab = labels[i:i + chunk]
        eps = 1e-12
        losses.append(-np.log(p[np.arange(len(lab)), lab] + eps))
        correct += int(np.sum(np.argmax(logits, axis=1) == lab))
    return float(np.mean(np.concatenate(losses))), correct / len(labels)


def _dataset_arrays(ds: Dataset, split: Split, input_hw):
    subset = ds.subset(split)
    x = np.stack([
        np.round(resize_to_input(s.frame.pixels, input_hw) * 255.0).astype(np.uint8)
        for s in subset
    ])
    y = np.array([s.label.value for s in subset])
    return x, y


def train(ds: Dataset, spec: NetSpec, cfg: TrainConfig) -> tuple[NetworkParams, TrainReport]:
    """Minibatch SGD with momentum; returns the best-validation-accuracy params."""
    x_tr, y_tr = _dataset_arrays(ds, Split.TRAIN, spec.input)
    x_val, y_val = _dataset_arrays(ds, Split.VAL, spec.input)
    if len(np.unique(y_tr)) < 2:
        raise ValueError("training split must contain both classes")
    # float32 keeps desk-scale training within the laptop budget
    params = init_params(spec, cfg.seed, dtype=np.float32)
    velocity = [{k: np.zeros_like(v) for k, v in t.items()} for t in params.tensors]
    rng = np.random.default_rng(cfg.seed + 1)

    report = TrainReport([], [], [], best_epoch=0)
    best = params.copy()
    best_acc = -1.0
    since_best = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(y_tr))
        epoch_losses = []
        try:
            for i in range(0, len(order), cfg.batch_size):
                idx = order[i:i + cfg.batch_size]
                x = (x_tr[idx].astype(np.float32) / 255.0 - 0.5)[..., None]
                loss, grads = _loss_and_gradients_arrays(
                    params, x, y_tr[idx], cfg.l2_weight_decay)
                epoch_losses.append(loss)
                for t, v, g in zip(params.tensors, velocity, grads):
                    for k in t:
                        v[k] = cfg.momentum * v[k] - cfg.learning_rate * g[k]
                        t[k] = t[k] + v[k]
        except NumericOverflowError:
            report.diverged = True
            break
        vloss, vacc = _eval(params, x_val, y_val)
        report.train_loss.append(float(np.mean(epoch_losses)))
        report.val_loss.append(vloss)
        report.val_accuracy.append(vacc)
        if vacc > best_acc:
            best_acc = vacc
            best = params.copy()
            report.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.early_stop_patience:
                break
    return best, report


# ---------------------------------------------------------------------------
# Checkpoint persistence (npz with a JSON metadata entry)
# ---------------------------------------------------------------------------

_LAYER_TAGS = {"Conv": Conv, "ReLU": ReLU, "MaxPool": MaxPool,
               "Flatten": Flatten, "Dense": Dense}


def _spec_to_json(spec: NetSpec) -> dict:
    return {
        "input": list(spec.input),
        "layers": [[type(l).__name__, vars(l)] for l in spec.layers],
    }


def _spec_from_json(doc: dict) -> NetSpec:
    layers = tuple(_LAYER_TAGS[name](**kw) for name, kw in doc["layers"])
    return NetSpec(input=tuple(doc["input"]), layers=layers)


def save_params(params: NetworkParams, path) -> None:
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "spec": _spec_to_json(params.spec),
        "init_seed": params.init_seed,
        "slots": [sorted(t.keys()) for t in params.tensors],
    }
    arrays = {}
    for i, t in enumerate(params.tensors):
        for k, v in t.items():
            arrays[f"layer{i}_{k}"] = v
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **arrays)


def load_params(path) -> NetworkParams:
    with np.load(path) as data:
        if "__meta__" not in data:
            raise CheckpointError("not a crashnav checkpoint")
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise CheckpointError(
                f"unsupported checkpoint format_version {meta.get('format_version')}")
        spec = _spec_from_json(meta["spec"])
        tensors = []
        for i, slots in enumerate(meta["slots"]):
            tensors.append({k: data[f"layer{i}_{k}"] for k in slots})
    params = NetworkParams(spec=spec, tensors=tensors, init_seed=meta["init_seed"])
    for t in params.tensors:
        for v in t.values():
            if not np.all(np.isfinite(v)):
                raise CheckpointError("corrupt checkpoint: non-finite tensor")
    return params
