"""Depth-4 U-Net: layer forwards/backwards, parameters, and checkpoints.

Everything runs on NCHW ndarrays. Operations preserve the input dtype so the
gradient-check harness can rerun the same code in float64. Parameters live in
a plain dict name -> (kernel, bias); ``param_order`` fixes the canonical
block ordering used by checkpoints and the optimizer.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensorops import ShapeMismatch, concat_channels, zero_pad2d

MAGIC = b"GLCK1\n"


class UNetError(Exception):
    pass


class OddSpatialDims(UNetError):
    pass


class IndivisibleSpatialDims(UNetError):
    pass


class CacheMismatch(UNetError):
    pass


class FormatInvalid(UNetError):
    pass


class ConfigMismatch(UNetError):
    pass


class UnknownLayer(UNetError):
    pass


@dataclass
class UNetConfig:
    in_channels: int = 9
    out_channels: int = 3
    depth: int = 4
    base_channels: int = 16
    conv_kernel: int = 3
    conv_pad: int = 1
    up_kernel: int = 2
    up_stride: int = 2
    pool_kernel: int = 2
    dropout_p: float = 0.2

    def validate(self) -> None:
        if self.depth < 1 or self.base_channels < 1:
            raise ConfigMismatch("depth and base_channels must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigMismatch("dropout_p must be in [0, 1)")

    def encoder_channels(self) -> list[int]:
        return [self.base_channels * 2**s for s in range(self.depth)]

    def bottleneck_channels(self) -> int:
        return self.base_channels * 2**self.depth


ModelParams = dict[str, tuple[np.ndarray, np.ndarray]]


def param_order(config: UNetConfig) -> list[str]:
    """Canonical block order: encoder 0..d-1, bottleneck, decoder d-1..0, head."""
    names = []
    for s in range(config.depth):
        names += [f"enc.{s}.c1", f"enc.{s}.c2"]
    names += ["mid.c1", "mid.c2"]
    for s in reversed(range(config.depth)):
        names += [f"up.{s}", f"dec.{s}.c1", f"dec.{s}.c2"]
    names.append("head")
    return names


def param_shapes(config: UNetConfig) -> dict[str, tuple[tuple[int, ...], int]]:
    """Kernel shape and bias length of every parameter block."""
    k = config.conv_kernel
    enc = config.encoder_channels()
    mid = config.bottleneck_channels()
    shapes: dict[str, tuple[tuple[int, ...], int]] = {}
    prev = config.in_channels
    for s in range(config.depth):
        shapes[f"enc.{s}.c1"] = ((enc[s], prev, k, k), enc[s])
        shapes[f"enc.{s}.c2"] = ((enc[s], enc[s], k, k), enc[s])
        prev = enc[s]
    shapes["mid.c1"] = ((mid, enc[-1], k, k), mid)
    shapes["mid.c2"] = ((mid, mid, k, k), mid)
    above = mid
    for s in reversed(range(config.depth)):
        uk = config.up_kernel
        shapes[f"up.{s}"] = ((enc[s], above, uk, uk), enc[s])
        shapes[f"dec.{s}.c1"] = ((enc[s], 2 * enc[s], k, k), enc[s])
        shapes[f"dec.{s}.c2"] = ((enc[s], enc[s], k, k), enc[s])
        above = enc[s]
    shapes["head"] = ((config.out_channels, enc[0], 1, 1), config.out_channels)
    return shapes


def tap_layer_names(config: UNetConfig) -> list[str]:
    """All tappable layer identifiers, in execution order."""
    names = []
    for s in range(config.depth):
        names += [f"enc.{s}.c1", f"enc.{s}.c2", f"pool.{s}"]
    names += ["mid.c1", "mid.c2"]
    for s in reversed(range(config.depth)):
        names += [f"up.{s}", f"dec.{s}.c1", f"dec.{s}.c2"]
    names.append("head")
    return names


def init_params(config: UNetConfig, seed: int) -> ModelParams:
    """Kaiming-uniform kernels (bound sqrt(6/fan_in)), zero biases."""
    config.validate()
    rng = np.random.default_rng(seed)
    params: ModelParams = {}
    for name in param_order(config):
        w_shape, b_len = param_shapes(config)[name]
        fan_in = w_shape[1] * w_shape[2] * w_shape[3]
        bound = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=w_shape).astype(np.float32)
        b = np.zeros(b_len, dtype=np.float32)
        params[name] = (w, b)
    return params


# ---------------------------------------------------------------------------
# Layer primitives
# ---------------------------------------------------------------------------


def conv2d_forward(x: np.ndarray, kernels: np.ndarray, biases: np.ndarray, pad: int) -> np.ndarray:
    """Stride-1 cross-correlation with zero padding."""
    if kernels.shape[1] != x.shape[1]:
        raise ShapeMismatch(
            f"kernel expects {kernels.shape[1]} channels, input has {x.shape[1]}"
        )
    k = kernels.shape[2]
    xp = zero_pad2d(x, pad)
    win = sliding_window_view(xp, (k, k), axis=(2, 3))  # (n, c, oh, ow, k, k)
    out = np.tensordot(win, kernels, axes=([1, 4, 5], [1, 2, 3]))  # (n, oh, ow, o)
    out = out.transpose(0, 3, 1, 2)
    return (out + biases[None, :, None, None]).astype(x.dtype, copy=False)


def conv2d_backward(
    x: np.ndarray, kernels: np.ndarray, pad: int, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv2d_forward w.r.t. input, kernels, biases."""
    if grad_out.shape[1] != kernels.shape[0]:
        raise CacheMismatch("grad_out channels do not match kernel count")
    k = kernels.shape[2]
    xp = zero_pad2d(x, pad)
    win = sliding_window_view(xp, (k, k), axis=(2, 3))
    grad_b = grad_out.sum(axis=(0, 2, 3))
    grad_w = np.tensordot(grad_out, win, axes=([0, 2, 3], [0, 2, 3]))  # (o, c, k, k)
    # input gradient = full correlation with spatially flipped, transposed kernels
    w_t = kernels[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    gp = zero_pad2d(grad_out, k - 1 - pad)
    gwin = sliding_window_view(gp, (k, k), axis=(2, 3))
    grad_x = np.tensordot(gwin, w_t, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    return (
        grad_x.astype(x.dtype, copy=False),
        grad_w.astype(kernels.dtype, copy=False),
        grad_b.astype(kernels.dtype, copy=False),
    )


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    if x.shape != grad_out.shape:
        raise CacheMismatch("relu cache shape does not match gradient")
    return grad_out * (x > 0)


def maxpool_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 max pooling; returns output and row-major argmax within each window."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise OddSpatialDims(f"spatial dims {(h, w)} must be even")
    win = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(n, c, h // 2, w // 2, 4)
    idx = win.argmax(axis=-1)  # first occurrence wins ties
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool_backward(idx: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    if idx.shape != grad_out.shape:
        raise CacheMismatch("argmax cache shape does not match gradient")
    n, c, oh, ow = grad_out.shape
    g = np.zeros((n, c, oh, ow, 4), dtype=grad_out.dtype)
    np.put_along_axis(g, idx[..., None], grad_out[..., None], axis=-1)
    g = g.reshape(n, c, oh, ow, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return g.reshape(n, c, oh * 2, ow * 2)


def upconv_forward(x: np.ndarray, kernels: np.ndarray, biases: np.ndarray) -> np.ndarray:
    """2x2 stride-2 transposed convolution; each input pixel paints one block."""
    if kernels.shape[1] != x.shape[1]:
        raise ShapeMismatch(
            f"kernel expects {kernels.shape[1]} channels, input has {x.shape[1]}"
        )
    n, _, h, w = x.shape
    o = kernels.shape[0]
    out = np.tensordot(x, kernels, axes=([1], [1]))  # (n, h, w, o, 2, 2)
    out = out.transpose(0, 3, 1, 4, 2, 5).reshape(n, o, 2 * h, 2 * w)
    return (out + biases[None, :, None, None]).astype(x.dtype, copy=False)


def upconv_backward(
    x: np.ndarray, kernels: np.ndarray, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, _, h, w = x.shape
    o = kernels.shape[0]
    if grad_out.shape != (n, o, 2 * h, 2 * w):
        raise CacheMismatch("grad_out shape does not match upconv output")
    g6 = grad_out.reshape(n, o, h, 2, w, 2).transpose(0, 2, 4, 1, 3, 5)  # (n,h,w,o,2,2)
    grad_b = grad_out.sum(axis=(0, 2, 3))
    grad_x = np.tensordot(g6, kernels, axes=([3, 4, 5], [0, 2, 3])).transpose(0, 3, 1, 2)
    grad_w = np.tensordot(g6, x, axes=([0, 1, 2], [0, 2, 3]))  # (o, 2, 2, c)
    grad_w = grad_w.transpose(0, 3, 1, 2)  # (o, c, 2, 2)
    return (
        grad_x.astype(x.dtype, copy=False),
        grad_w.astype(kernels.dtype, copy=False),
        grad_b.astype(kernels.dtype, copy=False),
    )


def dropout(
    x: np.ndarray, p: float, mode: str, rng: np.random.Generator | None
) -> tuple[np.ndarray, np.ndarray]:
    """Inverted dropout; eval mode is the identity with an all-keep mask."""
    if mode == "eval" or p == 0.0:
        return x, np.ones(x.shape, dtype=bool)
    keep = rng.random(x.shape) >= p
    scale = np.asarray(1.0 / (1.0 - p), dtype=x.dtype)
    return x * keep * scale, keep


def dropout_backward(keep: np.ndarray, p: float, grad_out: np.ndarray) -> np.ndarray:
    if keep.shape != grad_out.shape:
        raise CacheMismatch("dropout mask shape does not match gradient")
    if p == 0.0:
        return grad_out * keep
    scale = np.asarray(1.0 / (1.0 - p), dtype=grad_out.dtype)
    return grad_out * keep * scale


def concat_backward(grad_out: np.ndarray, c_a: int) -> tuple[np.ndarray, np.ndarray]:
    return grad_out[:, :c_a], grad_out[:, c_a:]


def layer_backward(kind: str, cache: tuple, grad_out: np.ndarray):
    """Dispatch table over the layer kinds; cache comes from the matching forward."""
    if kind == "conv":
        x, kernels, pad = cache
        return conv2d_backward(x, kernels, pad, grad_out)
    if kind == "relu":
        (x,) = cache
        return relu_backward(x, grad_out)
    if kind == "maxpool":
        (idx,) = cache
        return maxpool_backward(idx, grad_out)
    if kind == "upconv":
        x, kernels = cache
        return upconv_backward(x, kernels, grad_out)
    if kind == "dropout":
        keep, p = cache
        return dropout_backward(keep, p, grad_out)
    if kind == "concat":
        (c_a,) = cache
        return concat_backward(grad_out, c_a)
    raise CacheMismatch(f"unknown layer kind {kind!r}")


# ---------------------------------------------------------------------------
# Full model
# ---------------------------------------------------------------------------


@dataclass
class ActivationRecord:
    layer: str
    tensor: np.ndarray


def unet_forward(
    config: UNetConfig,
    params: ModelParams,
    x: np.ndarray,
    mode: str = "eval",
    taps: list[str] | None = None,
    rng: np.random.Generator | None = None,
    want_cache: bool = False,
):
    """Run the full network.

    Returns (logits, activation records) and, with ``want_cache``, a cache dict
    consumed by :func:`unet_backward`. Taps record post-nonlinearity outputs
    (post-pool for ``pool.*``, raw outputs for ``up.*`` and ``head``) in
    request order.
    """
    config.validate()
    taps = taps or []
    valid = set(tap_layer_names(config))
    for name in taps:
        if name not in valid:
            raise UnknownLayer(name)
    if x.ndim != 4 or x.shape[1] != config.in_channels:
        raise ShapeMismatch(
            f"input shape {x.shape}, expected (n, {config.in_channels}, h, w)"
        )
    factor = 2**config.depth
    if x.shape[2] % factor or x.shape[3] % factor:
        raise IndivisibleSpatialDims(
            f"spatial dims {x.shape[2:]} not divisible by {factor}"
        )

    acts: dict[str, np.ndarray] = {}
    cache: dict = {"mode": mode, "x": x}
    pad = config.conv_pad

    def conv_relu(name: str, h: np.ndarray) -> np.ndarray:
        w, b = params[name]
        pre = conv2d_forward(h, w, b, pad)
        out = relu(pre)
        if want_cache:
            cache[name] = (h, pre)
        acts[name] = out
        return out

    h = x
    skips = []
    for s in range(config.depth):
        h = conv_relu(f"enc.{s}.c1", h)
        h = conv_relu(f"enc.{s}.c2", h)
        skips.append(h)
        h, idx = maxpool_forward(h)
        if want_cache:
            cache[f"pool.{s}"] = idx
        acts[f"pool.{s}"] = h

    for name in ("mid.c1", "mid.c2"):
        h = conv_relu(name, h)
        if mode == "train" and config.dropout_p > 0.0:
            h, keep = dropout(h, config.dropout_p, mode, rng)
            if want_cache:
                cache[f"{name}.drop"] = keep

    for s in reversed(range(config.depth)):
        w, b = params[f"up.{s}"]
        if want_cache:
            cache[f"up.{s}"] = h
        h = upconv_forward(h, w, b)
        acts[f"up.{s}"] = h
        up_channels = h.shape[1]
        h = concat_channels(h, skips[s])
        if want_cache:
            cache[f"concat.{s}"] = up_channels
        h = conv_relu(f"dec.{s}.c1", h)
        h = conv_relu(f"dec.{s}.c2", h)

    w, b = params["head"]
    if want_cache:
        cache["head"] = (h, None)
    logits = conv2d_forward(h, w, b, 0)
    acts["head"] = logits

    records = [ActivationRecord(layer=name, tensor=acts[name]) for name in taps]
    if want_cache:
        return logits, records, cache
    return logits, records


def unet_backward(
    config: UNetConfig,
    params: ModelParams,
    cache: dict,
    grad_logits: np.ndarray,
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Backpropagate a logits gradient; returns per-block (kernel, bias) grads."""
    grads: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    pad = config.conv_pad
    mode = cache["mode"]

    def conv_relu_back(name: str, g: np.ndarray) -> np.ndarray:
        x_in, pre = cache[name]
        g = relu_backward(pre, g)
        gx, gw, gb = conv2d_backward(x_in, params[name][0], pad, g)
        grads[name] = (gw, gb)
        return gx

    x_head, _ = cache["head"]
    g, gw, gb = conv2d_backward(x_head, params["head"][0], 0, grad_logits)
    grads["head"] = (gw, gb)

    skip_grads: dict[int, np.ndarray] = {}
    for s in range(config.depth):
        g = conv_relu_back(f"dec.{s}.c2", g)
        g = conv_relu_back(f"dec.{s}.c1", g)
        g_up, g_skip = concat_backward(g, cache[f"concat.{s}"])
        skip_grads[s] = g_skip
        x_up = cache[f"up.{s}"]
        g, gw, gb = upconv_backward(x_up, params[f"up.{s}"][0], g_up)
        grads[f"up.{s}"] = (gw, gb)

    for name in ("mid.c2", "mid.c1"):
        if mode == "train" and config.dropout_p > 0.0:
            g = dropout_backward(cache[f"{name}.drop"], config.dropout_p, g)
        g = conv_relu_back(name, g)

    for s in reversed(range(config.depth)):
        g = maxpool_backward(cache[f"pool.{s}"], g)
        g = g + skip_grads[s]
        g = conv_relu_back(f"enc.{s}.c2", g)
        g = conv_relu_back(f"enc.{s}.c1", g)
    return grads


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(config: UNetConfig, params: ModelParams, path) -> None:
    order = param_order(config)
    blocks = [
        {"name": name, "w_shape": list(params[name][0].shape), "b_len": len(params[name][1])}
        for name in order
    ]
    header = {"config": asdict(config), "blocks": blocks}
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for name in order:
            w, b = params[name]
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[UNetConfig, ModelParams]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(MAGIC)] != MAGIC:
        raise FormatInvalid("bad checkpoint magic")
    off = len(MAGIC)
    if len(data) < off + 4:
        raise FormatInvalid("missing header length")
    (header_len,) = struct.unpack_from("<I", data, off)
    off += 4
    if len(data) < off + header_len:
        raise FormatInvalid("truncated header")
    try:
        header = json.loads(data[off : off + header_len].decode("utf-8"))
        config = UNetConfig(**header["config"])
        blocks = header["blocks"]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatInvalid(f"unparseable header: {exc}") from exc
    off += header_len
    expected = param_shapes(config)
    if [b["name"] for b in blocks] != param_order(config):
        raise ConfigMismatch("block order does not match config")
    params: ModelParams = {}
    for block in blocks:
        name = block["name"]
        w_shape = tuple(block["w_shape"])
        b_len = block["b_len"]
        if expected[name] != (w_shape, b_len):
            raise ConfigMismatch(f"block {name} shape does not match config")
        w_count = int(np.prod(w_shape))
        if len(data) < off + 4 * (w_count + b_len):
            raise FormatInvalid(f"truncated payload in block {name}")
        w = np.frombuffer(data, dtype="<f4", count=w_count, offset=off).reshape(w_shape).copy()
        off += 4 * w_count
        b = np.frombuffer(data, dtype="<f4", count=b_len, offset=off).copy()
        off += 4 * b_len
        params[name] = (w, b)
    if off != len(data):
        raise FormatInvalid("trailing bytes after parameter payload")
    return config, params
