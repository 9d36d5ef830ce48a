import numpy as np
import pytest

from glacierseg import geodata, preprocess, sampling
from glacierseg.unet import UNetConfig, init_params


@pytest.fixture(scope="session")
def scene():
    return geodata.synth_scene(7, geodata.SceneConfig(width=128, height=128))


@pytest.fixture(scope="session")
def prep_scene(scene):
    return preprocess.preprocess_scene(scene)


@pytest.fixture(scope="session")
def tiny_config():
    return UNetConfig(base_channels=4)


@pytest.fixture(scope="session")
def tiny_params(tiny_config):
    return init_params(tiny_config, seed=11)


@pytest.fixture(scope="session")
def tiny_patch(scene, prep_scene):
    specs = sampling.sample_centers(
        scene.polygons, 1, 128, 128, scene.raster.geotransform, 32, seed=3
    )
    return sampling.extract_patch(prep_scene, specs[0])


@pytest.fixture(scope="session")
def overfit_run():
    """Desk-scale overfit: 8 synthetic 64x64 patches, base_channels 8, 500 steps.

    Shared by the train, analysis, and acceptance tests so the expensive
    training happens once per session.
    """
    from glacierseg import train as train_mod
    from glacierseg.unet import UNetConfig

    big = geodata.synth_scene(3, geodata.SceneConfig(width=192, height=192))
    prep = preprocess.preprocess_scene(big)
    specs = sampling.sample_centers(
        big.polygons, 8, 192, 192, big.raster.geotransform, 64, seed=5
    )
    patches = [sampling.extract_patch(prep, s) for s in specs]
    ucfg = UNetConfig(base_channels=8)
    tcfg = train_mod.TrainConfig(
        epochs=250, batch_size=4, seed=0, patch_size=64, checkpoint_every=10**9
    )
    params, curve, _ = train_mod.train(
        patches, tcfg, train_mod.LossConfig(), ucfg, seed=0, lr=1e-3, max_steps=500
    )
    return {"config": ucfg, "params": params, "curve": curve, "patches": patches}


@pytest.fixture(scope="session")
def eval_root(tmp_path_factory):
    """Tiny end-to-end pipeline run producing a full eval artifact tree."""
    import json

    from glacierseg import cli

    root = tmp_path_factory.mktemp("pipeline")
    cfg_path = root / "config.json"
    cfg_path.write_text(
        json.dumps(
            {
                "scene": {"width": 128, "height": 128},
                "sample": {"n": 6, "size": 32, "test_fraction": 0.34},
                "train": {"epochs": 2, "batch_size": 2, "checkpoint_every": 2, "patch_size": 32},
                "unet": {"base_channels": 4},
            }
        )
    )
    common = ["--seed", "7", "--config", str(cfg_path)]
    assert cli.main(["synth", *common, "--out", str(root / "scene")]) == 0
    assert cli.main(["preprocess", *common, "--scene", str(root / "scene"),
                     "--out", str(root / "prep")]) == 0
    assert cli.main(["sample", *common, "--scene", str(root / "prep"),
                     "--out", str(root / "patches")]) == 0
    assert cli.main(["train", *common, "--patches", str(root / "patches"),
                     "--out", str(root / "run")]) == 0
    ckpt = str(root / "run" / "ckpt_final.glck")
    assert cli.main(["eval", *common, "--scene", str(root / "prep"),
                     "--patches", str(root / "patches"), "--checkpoint", ckpt,
                     "--out", str(root / "eval")]) == 0
    return root / "eval"


def random_raster(rng, width=None, height=None, nbands=None):
    width = width or int(rng.integers(1, 9))
    height = height or int(rng.integers(1, 9))
    nbands = nbands or int(rng.integers(1, 5))
    bands = [
        (f"b{i}", rng.standard_normal((height, width)).astype(np.float32))
        for i in range(nbands)
    ]
    gt = tuple(float(v) for v in [0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
    return geodata.BandedRaster(width, height, bands, gt)
