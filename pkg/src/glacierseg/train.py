"""Training recipe: BCE + Dice loss with analytic gradients, Adam, epoch loop.

The three output channels are treated as independent sigmoid probabilities
(one-vs-rest BCE paired with Dice); channel order is
[clean_ice, debris, background]. The l2 penalty enters as an additive
gradient on convolution kernels only and is excluded from the reported loss.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .sampling import Patch
from .tensorops import ShapeMismatch
from .unet import (
    ModelParams,
    UNetConfig,
    init_params,
    param_order,
    save_checkpoint,
    unet_backward,
    unet_forward,
)

# one-hot channel order: clean_ice (code 1) -> 0, debris (2) -> 1, background (0) -> 2
CODE_TO_CHANNEL = {1: 0, 2: 1, 0: 2}
CHANNEL_TO_CODE = {0: 1, 1: 2, 2: 0}
CLASS_NAMES = ["clean_ice", "debris", "background"]


class TrainError(Exception):
    pass


class InvalidCode(TrainError):
    pass


class EmptyTrainingSet(TrainError):
    pass


@dataclass
class LossConfig:
    bce_weight: float = 1.0
    dice_weight: float = 1.0
    dice_smooth: float = 1.0
    clamp_eps: float = 1e-7


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 4
    seed: int = 0
    patch_size: int = 512
    checkpoint_every: int = 10


@dataclass
class AdamState:
    m: dict[str, tuple[np.ndarray, np.ndarray]]
    v: dict[str, tuple[np.ndarray, np.ndarray]]
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l2_lambda: float = 5e-4

    @classmethod
    def init(cls, params: ModelParams, **kwargs) -> "AdamState":
        zeros = lambda p: {
            k: (np.zeros_like(w, dtype=np.float32), np.zeros_like(b, dtype=np.float32))
            for k, (w, b) in p.items()
        }
        return cls(m=zeros(params), v=zeros(params), **kwargs)


@dataclass
class LossCurve:
    points: list[tuple[int, float]] = field(default_factory=list)

    def append(self, epoch: int, loss: float) -> None:
        self.points.append((epoch, loss))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss"])
            for epoch, loss in self.points:
                writer.writerow([epoch, loss])


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def one_hot(mask_values: np.ndarray) -> np.ndarray:
    """(h, w) label codes -> (1, 3, h, w) float32 one-hot target."""
    codes = np.asarray(mask_values)
    bad = set(np.unique(codes)) - {0, 1, 2}
    if bad:
        raise InvalidCode(f"invalid label codes {sorted(bad)}")
    h, w = codes.shape
    out = np.zeros((1, 3, h, w), dtype=np.float32)
    for code, ch in CODE_TO_CHANNEL.items():
        out[0, ch][codes == code] = 1.0
    return out


def sigmoid_probs(logits: np.ndarray) -> np.ndarray:
    z = logits
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss(probs: np.ndarray, target: np.ndarray, clamp_eps: float = 1e-7) -> float:
    if probs.shape != target.shape:
        raise ShapeMismatch(f"{probs.shape} vs {target.shape}")
    p = np.clip(probs.astype(np.float64), clamp_eps, 1.0 - clamp_eps)
    t = target.astype(np.float64)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


def dice_loss(probs: np.ndarray, target: np.ndarray, smooth: float = 1.0) -> float:
    if probs.shape != target.shape:
        raise ShapeMismatch(f"{probs.shape} vs {target.shape}")
    p = probs.astype(np.float64)
    t = target.astype(np.float64)
    axes = (0, 2, 3)
    inter = (p * t).sum(axis=axes)
    dice = (2.0 * inter + smooth) / (p.sum(axis=axes) + t.sum(axis=axes) + smooth)
    return float(1.0 - dice.mean())


def combined_loss_and_grad(
    logits: np.ndarray, target: np.ndarray, cfg: LossConfig
) -> tuple[float, np.ndarray]:
    """Weighted BCE + Dice on sigmoid probabilities, with gradient w.r.t. logits."""
    if logits.shape != target.shape:
        raise ShapeMismatch(f"{logits.shape} vs {target.shape}")
    probs = sigmoid_probs(logits)
    p = probs.astype(np.float64)
    t = target.astype(np.float64)
    dp_dz = p * (1.0 - p)
    grad = np.zeros_like(p)
    loss = 0.0

    if cfg.bce_weight != 0.0:
        eps = cfg.clamp_eps
        pc = np.clip(p, eps, 1.0 - eps)
        loss += cfg.bce_weight * float(-np.mean(t * np.log(pc) + (1.0 - t) * np.log(1.0 - pc)))
        # clamp is flat outside [eps, 1-eps]
        active = (p > eps) & (p < 1.0 - eps)
        dl_dp = (-t / pc + (1.0 - t) / (1.0 - pc)) / p.size
        grad += cfg.bce_weight * dl_dp * active * dp_dz

    if cfg.dice_weight != 0.0:
        s = cfg.dice_smooth
        axes = (0, 2, 3)
        inter = (p * t).sum(axis=axes, keepdims=True)
        psum = p.sum(axis=axes, keepdims=True)
        tsum = t.sum(axis=axes, keepdims=True)
        denom = psum + tsum + s
        dice = (2.0 * inter + s) / denom
        loss += cfg.dice_weight * float(1.0 - dice.mean())
        nch = p.shape[1]
        dl_dp = -(2.0 * t * denom - (2.0 * inter + s)) / (denom**2) / nch
        grad += cfg.dice_weight * dl_dp * dp_dz

    return loss, grad.astype(logits.dtype)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


def adam_step(
    params: ModelParams,
    grads: dict[str, tuple[np.ndarray, np.ndarray]],
    state: AdamState,
) -> tuple[ModelParams, AdamState]:
    """One Adam update; l2 decay applies to kernels only, never biases."""
    t = state.t + 1
    new_params: ModelParams = {}
    new_m = {}
    new_v = {}
    for name, (w, b) in params.items():
        gw, gb = grads[name]
        if gw.shape != w.shape or gb.shape != b.shape:
            raise ShapeMismatch(f"gradient shape mismatch in block {name}")
        gw = gw + state.l2_lambda * w
        mw, mb = state.m[name]
        vw, vb = state.v[name]
        updated = []
        for p, g, m, v in ((w, gw, mw, vw), (b, gb, mb, vb)):
            m = state.beta1 * m + (1.0 - state.beta1) * g
            v = state.beta2 * v + (1.0 - state.beta2) * g * g
            m_hat = m / (1.0 - state.beta1**t)
            v_hat = v / (1.0 - state.beta2**t)
            p = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
            updated.append((p.astype(np.float32), m.astype(np.float32), v.astype(np.float32)))
        (w2, mw2, vw2), (b2, mb2, vb2) = updated
        new_params[name] = (w2, b2)
        new_m[name] = (mw2, mb2)
        new_v[name] = (vw2, vb2)
    new_state = replace(state, m=new_m, v=new_v, t=t)
    return new_params, new_state


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def train(
    patches: list[Patch],
    train_config: TrainConfig,
    loss_config: LossConfig,
    unet_config: UNetConfig,
    seed: int | None = None,
    out_dir=None,
    lr: float | None = None,
    max_steps: int | None = None,
) -> tuple[ModelParams, LossCurve, list[str]]:
    """Epoch loop with seeded shuffling and batching; fully seed-reproducible."""
    train_patches = [p for p in patches if p.spec.split == "train"]
    if not train_patches:
        raise EmptyTrainingSet("no patches in the train split")
    seed = train_config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    params = init_params(unet_config, seed)
    state = AdamState.init(params)
    if lr is not None:
        state = replace(state, lr=lr)
    curve = LossCurve()
    checkpoints: list[str] = []
    targets = {p.spec.id: one_hot(p.mask.values) for p in train_patches}
    steps = 0

    for epoch in range(1, train_config.epochs + 1):
        order = rng.permutation(len(train_patches))
        losses = []
        for start in range(0, len(order), train_config.batch_size):
            if max_steps is not None and steps >= max_steps:
                break
            batch = [train_patches[i] for i in order[start : start + train_config.batch_size]]
            x = np.stack([p.input for p in batch])
            t = np.concatenate([targets[p.spec.id] for p in batch])
            logits, _, cache = unet_forward(
                unet_config, params, x, mode="train", rng=rng, want_cache=True
            )
            loss, grad_logits = combined_loss_and_grad(logits, t, loss_config)
            grads = unet_backward(unet_config, params, cache, grad_logits)
            params, state = adam_step(params, grads, state)
            losses.append(loss)
            steps += 1
        if losses:
            curve.append(epoch, float(np.mean(losses)))
        if out_dir is not None and epoch % train_config.checkpoint_every == 0:
            path = f"{out_dir}/ckpt_epoch_{epoch}.glck"
            save_checkpoint(unet_config, params, path)
            checkpoints.append(path)
        if max_steps is not None and steps >= max_steps:
            break
    if out_dir is not None:
        path = f"{out_dir}/ckpt_final.glck"
        save_checkpoint(unet_config, params, path)
        checkpoints.append(path)
    return params, curve, checkpoints
