"""Command-line entry points for every pipeline stage.

Desk-scale defaults (256x256 scene, 64-pixel patches, base_channels 8) keep a
full synth -> preprocess -> sample -> train -> eval -> serve run in minutes on
one CPU core; override any of them through a JSON ``--config`` file with
sections ``scene``, ``sample``, ``train``, ``loss``, ``unet``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, geodata, preprocess, sampling, service, train as train_mod
from .unet import UNetConfig, load_checkpoint, tap_layer_names

DESK_DEFAULTS = {
    "scene": {"width": 256, "height": 256},
    "sample": {"n": 20, "size": 64, "test_fraction": 0.2},
    "train": {"epochs": 10, "batch_size": 4, "checkpoint_every": 5, "patch_size": 64},
    "loss": {},
    "unet": {"base_channels": 8},
}


def _load_config(path: str | None) -> dict:
    cfg = {k: dict(v) for k, v in DESK_DEFAULTS.items()}
    if path:
        with open(path) as fh:
            user = json.load(fh)
        for section, values in user.items():
            cfg.setdefault(section, {}).update(values)
    return cfg


def _dataclass_from(cls, overrides: dict):
    fields = {f.name for f in dataclasses.fields(cls)}
    return cls(**{k: v for k, v in overrides.items() if k in fields})


def _read_scene(directory) -> geodata.SceneBundle:
    directory = Path(directory)
    raster = geodata.read_raster(directory / "raster.grd")
    polygons = geodata.read_polygons(directory / "polygons.geojson")
    mask = geodata.raster_to_mask(geodata.read_raster(directory / "mask.grd"))
    return geodata.SceneBundle(raster=raster, polygons=polygons, mask=mask)


def _write_scene(bundle: geodata.SceneBundle, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    geodata.write_raster(bundle.raster, directory / "raster.grd")
    geodata.write_polygons(bundle.polygons, directory / "polygons.geojson")
    geodata.write_raster(
        geodata.mask_to_raster(bundle.mask, bundle.raster.geotransform),
        directory / "mask.grd",
    )


def _load_patches(patch_dir) -> list[sampling.Patch]:
    patch_dir = Path(patch_dir)
    specs = sampling.read_specs_csv(patch_dir / "specs.csv")
    return [sampling.read_patch(spec, patch_dir) for spec in specs]


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def run_synth(args) -> int:
    cfg = _load_config(args.config)
    scene_cfg = _dataclass_from(geodata.SceneConfig, cfg["scene"])
    bundle = geodata.synth_scene(args.seed, scene_cfg)
    _write_scene(bundle, args.out)
    print(f"wrote scene to {args.out}")
    return 0


def run_preprocess(args) -> int:
    bundle = _read_scene(args.scene)
    out = preprocess.preprocess_scene(bundle)
    _write_scene(out, args.out)
    reports = [
        preprocess.histogram(grid, 50, (-1.0, 1.0), band=name)
        for name, grid in out.raster.bands
    ]
    preprocess.write_histograms_csv(reports, Path(args.out) / "histograms.csv")
    print(f"wrote preprocessed scene to {args.out}")
    return 0


def run_sample(args) -> int:
    cfg = _load_config(args.config)["sample"]
    scene = _read_scene(args.scene)
    specs = sampling.sample_centers(
        scene.polygons,
        int(cfg["n"]),
        scene.raster.width,
        scene.raster.height,
        scene.raster.geotransform,
        int(cfg["size"]),
        args.seed,
    )
    specs = sampling.split_patches(specs, float(cfg["test_fraction"]), args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sampling.write_specs_csv(specs, out / "specs.csv")
    for spec in specs:
        patch = sampling.extract_patch(scene, spec)
        sampling.write_patch(patch, out, scene.raster.geotransform)
    print(f"wrote {len(specs)} patches to {args.out}")
    return 0


def run_train(args) -> int:
    cfg = _load_config(args.config)
    patches = _load_patches(args.patches)
    train_cfg = _dataclass_from(train_mod.TrainConfig, {**cfg["train"], "seed": args.seed})
    loss_cfg = _dataclass_from(train_mod.LossConfig, cfg["loss"])
    unet_cfg = _dataclass_from(UNetConfig, cfg["unet"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _, curve, ckpts = train_mod.train(
        patches, train_cfg, loss_cfg, unet_cfg, seed=args.seed, out_dir=str(out)
    )
    curve.write_csv(out / "loss.csv")
    print(f"trained {train_cfg.epochs} epochs; final checkpoint {ckpts[-1]}")
    return 0


def run_infer(args) -> int:
    config, params = load_checkpoint(args.checkpoint)
    patch_dir = Path(args.patches)
    specs = sampling.read_specs_csv(patch_dir / "specs.csv")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gt = geodata.SceneConfig().geotransform
    for spec in specs:
        patch = sampling.read_patch(spec, patch_dir)
        pred = analysis.predict_patch(config, params, patch)
        geodata.write_raster(geodata.mask_to_raster(pred, gt), out / f"{spec.id}_pred.grd")
    print(f"wrote {len(specs)} predictions to {args.out}")
    return 0


def run_eval(args) -> int:
    config, params = load_checkpoint(args.checkpoint)
    scene = _read_scene(args.scene)
    patch_dir = Path(args.patches)
    specs = sampling.read_specs_csv(patch_dir / "specs.csv")
    root = Path(args.out)
    records = []
    for spec in specs:
        patch = sampling.read_patch(spec, patch_dir)
        pred = analysis.predict_patch(config, params, patch)
        acc = analysis.pixel_accuracy(pred, patch.mask)
        pdir = root / "patches" / spec.id
        (pdir / "activations").mkdir(parents=True, exist_ok=True)
        names = [f"ch{i}" for i in range(patch.input.shape[0])]
        praster = geodata.BandedRaster(
            spec.size, spec.size, list(zip(names, patch.input)), scene.raster.geotransform
        )
        # RGB composite of B3, B2, B1 (channels 2, 1, 0 of the preprocessed stack)
        geodata.render_rgb_png(
            praster, ("ch2", "ch1", "ch0"), pdir / "image.png", ranges=[(-1.0, 1.0)] * 3
        )
        analysis.render_mask_png(patch.mask, pdir / "mask.png")
        analysis.render_mask_png(pred, pdir / "pred.png")
        for cname in train_mod.CLASS_NAMES:
            analysis.probability_panel_png(config, params, patch, cname, pdir / f"prob_{cname}.png")
        for layer in analysis.PAPER_TAP_LAYERS:
            analysis.activation_grid_png(
                config, params, patch, layer, pdir / "activations" / f"{layer}.png",
                seed=args.seed,
            )
        lon, lat = geodata.pixel_center_lonlat(scene.raster.geotransform, spec.col, spec.row)
        records.append(
            analysis.EvalRecord(
                id=spec.id, lon=lon, lat=lat, split=spec.split, accuracy=acc,
                image=f"patches/{spec.id}/image.png",
                mask=f"patches/{spec.id}/mask.png",
                pred=f"patches/{spec.id}/pred.png",
            )
        )
    analysis.write_records_jsonl(records, root / "records.jsonl")
    analysis.write_curve_csv(analysis.accuracy_curve(records), root / "curve.csv")
    gt = scene.raster.geotransform
    corners = [
        geodata.pixel_center_lonlat(gt, c, r)
        for c in (-0.5, scene.raster.width - 0.5)
        for r in (-0.5, scene.raster.height - 0.5)
    ]
    lons = [p[0] for p in corners]
    lats = [p[1] for p in corners]
    meta = {
        "bounds": [min(lons), min(lats), max(lons), max(lats)],
        "palette": {str(k): list(v) for k, v in analysis.DEFAULT_PALETTE.items()},
        "layers": analysis.PAPER_TAP_LAYERS,
        "classes": train_mod.CLASS_NAMES,
    }
    (root / "meta.json").write_text(json.dumps(meta))
    print(f"evaluated {len(records)} patches into {args.out}")
    return 0


def run_repr(args) -> int:
    config, params = load_checkpoint(args.checkpoint)
    patches = _load_patches(args.patches)
    patch = patches[0]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for layer in analysis.PAPER_TAP_LAYERS:
        analysis.activation_grid_png(
            config, params, patch, layer, out / f"{layer}.png", seed=args.seed
        )
    stats = analysis.layer_statistics(config, params, patch, tap_layer_names(config))
    with open(out / "layer_stats.csv", "w") as fh:
        fh.write("layer,mean_of_means,mean_of_vars,mean_pairwise_correlation\n")
        for st in stats:
            fh.write(
                f"{st.layer},{float(np.mean(st.channel_mean))},"
                f"{float(np.mean(st.channel_var))},{st.mean_pairwise_correlation}\n"
            )
    print(f"wrote representation outputs to {args.out}")
    return 0


def run_serve(args) -> int:
    state = service.load_state(args.root, args.static)
    service.serve(state, args.port)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glacierseg")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", default=None, help="JSON config file")

    p = sub.add_parser("synth", help="generate a synthetic 13-band scene")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_synth)

    p = sub.add_parser("preprocess", help="drop bands and equalize to [-1,1]")
    common(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_preprocess)

    p = sub.add_parser("sample", help="sample glacier-interior patches")
    common(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_sample)

    p = sub.add_parser("train", help="train the U-Net")
    common(p)
    p.add_argument("--patches", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_train)

    p = sub.add_parser("infer", help="predict masks for patches")
    common(p)
    p.add_argument("--patches", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_infer)

    p = sub.add_parser("eval", help="evaluate patches and render artifacts")
    common(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--patches", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_eval)

    p = sub.add_parser("repr", help="activation grids and layer statistics")
    common(p)
    p.add_argument("--patches", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_repr)

    p = sub.add_parser("serve", help="serve evaluation artifacts over HTTP")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--root", required=True)
    p.add_argument("--static", default=None)
    p.set_defaults(func=run_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:  # stage failure -> diagnostic on stderr, exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
