"""Post-training analysis: predictions, accuracy, activation and panel renders.

EvalRecords serialize to JSON lines
({"id","lon","lat","split","accuracy","image","mask","pred"}); the accuracy
curve to CSV rank,id,accuracy.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .geodata import LabelMask
from .sampling import Patch
from .tensorops import ShapeMismatch, minmax_normalize
from .train import CHANNEL_TO_CODE, sigmoid_probs, CLASS_NAMES
from .unet import ModelParams, UNetConfig, UnknownLayer, tap_layer_names, unet_forward

# Appendix-style default palette; the red-background variant is selectable
DEFAULT_PALETTE = {0: (128, 128, 128), 1: (0, 0, 255), 2: (0, 255, 0)}
RED_BACKGROUND_PALETTE = {0: (255, 0, 0), 1: (0, 0, 255), 2: (0, 255, 0)}

# the eight layers highlighted in the representation figure:
# downsampling convs 1/3/5/7, upsampling convs 1/3, last pool, second mid conv
PAPER_TAP_LAYERS = [
    "enc.0.c1", "enc.1.c1", "enc.2.c1", "enc.3.c1",
    "up.3", "up.1", "pool.3", "mid.c2",
]


class AnalysisError(Exception):
    pass


class EmptyRegion(AnalysisError):
    pass


@dataclass
class EvalRecord:
    id: str
    lon: float
    lat: float
    split: str
    accuracy: float
    image: str = ""
    mask: str = ""
    pred: str = ""


@dataclass
class LayerStats:
    layer: str
    channel_mean: np.ndarray
    channel_var: np.ndarray
    mean_pairwise_correlation: float


def predict_patch(config: UNetConfig, params: ModelParams, patch: Patch) -> LabelMask:
    """Eval-mode forward, per-pixel channel argmax mapped back to label codes."""
    x = patch.input[None]
    logits, _ = unet_forward(config, params, x, mode="eval")
    probs = sigmoid_probs(logits)[0]
    winner = probs.argmax(axis=0)  # ties -> lowest channel index
    codes = np.vectorize(CHANNEL_TO_CODE.get)(winner).astype(np.uint8)
    return LabelMask(patch.spec.size, patch.spec.size, codes)


def pixel_accuracy(pred: LabelMask, truth: LabelMask) -> float:
    if pred.values.shape != truth.values.shape:
        raise ShapeMismatch(f"{pred.values.shape} vs {truth.values.shape}")
    return float(np.mean(pred.values == truth.values))


def region_accuracy(pred: LabelMask, truth: LabelMask, region: np.ndarray) -> float:
    """Pixel accuracy restricted to region-true pixels."""
    if pred.values.shape != truth.values.shape or region.shape != pred.values.shape:
        raise ShapeMismatch("pred, truth, and region shapes must agree")
    if not region.any():
        raise EmptyRegion("region contains no pixels")
    return float(np.mean(pred.values[region] == truth.values[region]))


def accuracy_curve(records: list[EvalRecord]) -> list[tuple[int, str, float]]:
    """Test-patch ranking, ascending by accuracy (failures first), ties by id."""
    ordered = sorted(records, key=lambda r: (r.accuracy, r.id))
    return [(rank, rec.id, rec.accuracy) for rank, rec in enumerate(ordered)]


# ---------------------------------------------------------------------------
# Renders
# ---------------------------------------------------------------------------


def _to_gray_u8(grid: np.ndarray) -> np.ndarray:
    return np.floor(minmax_normalize(grid) * 255.0 + 0.5).clip(0, 255).astype(np.uint8)


def activation_grid_png(
    config: UNetConfig,
    params: ModelParams,
    patch: Patch,
    layer: str,
    out,
    n: int = 8,
    seed: int = 0,
) -> None:
    """Render n randomly chosen channels of a layer's activation in one row."""
    if layer not in tap_layer_names(config):
        raise UnknownLayer(layer)
    _, records = unet_forward(config, params, patch.input[None], mode="eval", taps=[layer])
    act = records[0].tensor[0]  # (channels, h, w)
    nch = act.shape[0]
    rng = np.random.default_rng(seed)
    chosen = rng.choice(nch, size=min(n, nch), replace=False)
    tiles = [_to_gray_u8(act[c]) for c in chosen]
    Image.fromarray(np.concatenate(tiles, axis=1), mode="L").save(out, format="PNG")


def probability_panels_png(
    config: UNetConfig, params: ModelParams, patch: Patch, out
) -> None:
    """Three side-by-side grayscale panels: clean ice, debris, background."""
    logits, _ = unet_forward(config, params, patch.input[None], mode="eval")
    probs = sigmoid_probs(logits)[0]
    tiles = [np.floor(255.0 * probs[c] + 0.5).clip(0, 255).astype(np.uint8) for c in range(3)]
    Image.fromarray(np.concatenate(tiles, axis=1), mode="L").save(out, format="PNG")


def probability_panel_png(
    config: UNetConfig, params: ModelParams, patch: Patch, class_name: str, out
) -> None:
    """Single class-probability panel (intensity = round(255 * p))."""
    ch = CLASS_NAMES.index(class_name)
    logits, _ = unet_forward(config, params, patch.input[None], mode="eval")
    probs = sigmoid_probs(logits)[0]
    tile = np.floor(255.0 * probs[ch] + 0.5).clip(0, 255).astype(np.uint8)
    Image.fromarray(tile, mode="L").save(out, format="PNG")


def layer_statistics(
    config: UNetConfig, params: ModelParams, patch: Patch, layers: list[str]
) -> list[LayerStats]:
    """Per-channel mean/variance and mean pairwise Pearson correlation."""
    _, records = unet_forward(config, params, patch.input[None], mode="eval", taps=layers)
    stats = []
    for rec in records:
        act = rec.tensor[0]
        nch = act.shape[0]
        flat = act.reshape(nch, -1).astype(np.float64)
        mean = flat.mean(axis=1)
        var = flat.var(axis=1)
        if nch < 2:
            corr = 0.0
        else:
            centered = flat - mean[:, None]
            std = np.sqrt(var)
            nonconst = std > 0
            # constant channels contribute correlation 0
            normed = np.where(
                nonconst[:, None], centered / np.where(std[:, None] == 0, 1, std[:, None]), 0.0
            )
            cmat = normed @ normed.T / flat.shape[1]
            upper = cmat[np.triu_indices(nch, k=1)]
            corr = float(upper.mean())
        stats.append(
            LayerStats(
                layer=rec.layer,
                channel_mean=mean.astype(np.float32),
                channel_var=var.astype(np.float32),
                mean_pairwise_correlation=corr,
            )
        )
    return stats


def render_mask_png(mask: LabelMask, out, palette: dict | None = None) -> None:
    pal = palette or DEFAULT_PALETTE
    img = np.zeros((mask.height, mask.width, 3), dtype=np.uint8)
    for code, color in pal.items():
        img[mask.values == code] = color
    Image.fromarray(img, mode="RGB").save(out, format="PNG")


# ---------------------------------------------------------------------------
# Record serialization
# ---------------------------------------------------------------------------


def write_records_jsonl(records: list[EvalRecord], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.__dict__) + "\n")


def read_records_jsonl(path) -> list[EvalRecord]:
    records = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                records.append(EvalRecord(**json.loads(line)))
    return records


def write_curve_csv(curve: list[tuple[int, str, float]], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "id", "accuracy"])
        for rank, pid, acc in curve:
            writer.writerow([rank, pid, acc])
