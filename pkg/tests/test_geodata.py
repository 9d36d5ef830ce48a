import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glacierseg import geodata
from glacierseg.geodata import (
    BandedRaster,
    HeaderInvalid,
    LabelMask,
    MagicMismatch,
    PolygonFeature,
    PolygonLayer,
    SceneBundle,
    SceneConfig,
    TruncatedPayload,
    UnknownBand,
    rasterize_polygons,
    read_raster,
    render_rgb_png,
    synth_scene,
    write_raster,
)
from glacierseg.geometry import point_in_polygon

from conftest import random_raster

IDENT_GT = (0.0, 1.0, 0.0, 0.0, 0.0, 1.0)


def square(x0, y0, x1, y1):
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]


class TestRasterIO:
    def test_roundtrip_identity(self, tmp_path):
        rng = np.random.default_rng(0)
        r = random_raster(rng, width=5, height=3, nbands=4)
        path = tmp_path / "r.grd"
        write_raster(r, path)
        r2 = read_raster(path)
        assert r2.width == r.width and r2.height == r.height
        assert r2.band_names == r.band_names
        assert r2.geotransform == r.geotransform
        for (_, a), (_, b) in zip(r.bands, r2.bands):
            assert a.tobytes() == b.tobytes()

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_roundtrip_property(self, tmp_path_factory, seed):
        rng = np.random.default_rng(seed)
        r = random_raster(rng)
        path = tmp_path_factory.mktemp("rt") / "r.grd"
        write_raster(r, path)
        r2 = read_raster(path)
        for (_, a), (_, b) in zip(r.bands, r2.bands):
            assert a.tobytes() == b.tobytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.grd"
        path.write_bytes(b"GLRD0\n" + b"\x00" * 16)
        with pytest.raises(MagicMismatch):
            read_raster(path)

    def test_2x2_payload_order(self, tmp_path):
        r = BandedRaster(
            2, 2, [("b", np.array([[1, 2], [3, 4]], dtype=np.float32))], IDENT_GT
        )
        path = tmp_path / "r.grd"
        write_raster(r, path)
        raw = path.read_bytes()
        # payload is the last 16 bytes, row-major
        assert np.frombuffer(raw[-16:], dtype="<f4").tolist() == [1.0, 2.0, 3.0, 4.0]
        assert np.array_equal(read_raster(path).band("b"), r.band("b"))

    def test_deterministic_bytes(self, tmp_path):
        rng = np.random.default_rng(1)
        r = random_raster(rng)
        p1, p2 = tmp_path / "a.grd", tmp_path / "b.grd"
        write_raster(r, p1)
        write_raster(r, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_payload_length(self, tmp_path):
        rng = np.random.default_rng(2)
        r = random_raster(rng, width=64, height=64, nbands=13)
        path = tmp_path / "r.grd"
        write_raster(r, path)
        raw = path.read_bytes()
        header_len = int.from_bytes(raw[6:10], "little")
        assert len(raw) - 10 - header_len == 13 * 64 * 64 * 4

    def test_truncated_payload(self, tmp_path):
        rng = np.random.default_rng(3)
        r = random_raster(rng, width=4, height=4, nbands=2)
        path = tmp_path / "r.grd"
        write_raster(r, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(TruncatedPayload):
            read_raster(path)

    def test_empty_band_list_rejected(self, tmp_path):
        r = BandedRaster(2, 2, [], IDENT_GT)
        with pytest.raises(HeaderInvalid):
            write_raster(r, tmp_path / "r.grd")


class TestRasterize:
    def test_empty_layer(self):
        mask = rasterize_polygons(PolygonLayer(), 4, 4, IDENT_GT)
        assert not mask.values.any()

    def test_left_half_rectangle(self):
        layer = PolygonLayer([PolygonFeature([square(0, 0, 2, 4)], "clean_ice")])
        mask = rasterize_polygons(layer, 4, 4, IDENT_GT)
        assert np.array_equal(mask.values[:, :2], np.ones((4, 2), dtype=np.uint8))
        assert not mask.values[:, 2:].any()

    def test_last_feature_wins(self):
        layer = PolygonLayer(
            [
                PolygonFeature([square(0, 0, 4, 4)], "clean_ice"),
                PolygonFeature([square(0, 0, 4, 4)], "debris"),
            ]
        )
        mask = rasterize_polygons(layer, 4, 4, IDENT_GT)
        assert (mask.values == 2).all()

    def test_degenerate_geotransform(self):
        with pytest.raises(geodata.DegenerateGeotransform):
            rasterize_polygons(PolygonLayer(), 2, 2, (0, 0, 0, 0, 0, 0))

    def test_agrees_with_pointwise_check(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            angles = np.sort(rng.uniform(0, 2 * np.pi, 8))
            r = rng.uniform(2, 5)
            cx, cy = rng.uniform(2, 6, 2)
            ring = [(cx + r * np.cos(a), cy + r * np.sin(a)) for a in angles]
            ring.append(ring[0])
            layer = PolygonLayer([PolygonFeature([ring], "debris")])
            mask = rasterize_polygons(layer, 8, 8, IDENT_GT)
            for row in range(8):
                for col in range(8):
                    inside = point_in_polygon((col + 0.5, row + 0.5), [ring])
                    assert (mask.values[row, col] == 2) == inside


class TestSynthScene:
    def test_determinism(self):
        a = synth_scene(7)
        b = synth_scene(7)
        for (_, ga), (_, gb) in zip(a.raster.bands, b.raster.bands):
            assert ga.tobytes() == gb.tobytes()
        assert a.mask.values.tobytes() == b.mask.values.tobytes()
        assert a.polygons.features[0].rings == b.polygons.features[0].rings

    def test_zero_blobs(self):
        cfg = SceneConfig(width=64, height=64, clean_ice_blobs=0, debris_blobs=0)
        bundle = synth_scene(1, cfg)
        assert not bundle.mask.values.any()

    def test_band_names_and_finite(self):
        bundle = synth_scene(5)
        assert bundle.raster.band_names == geodata.CANONICAL_BANDS
        for _, grid in bundle.raster.bands:
            assert np.all(np.isfinite(grid))

    def test_label_imbalance(self):
        bundle = synth_scene(11)
        assert (bundle.mask.values > 0).mean() < 0.5

    def test_mask_consistency_invariant(self):
        bundle = synth_scene(13)
        derived = rasterize_polygons(
            bundle.polygons, bundle.raster.width, bundle.raster.height,
            bundle.raster.geotransform,
        )
        assert np.array_equal(bundle.mask.values, derived.values)

    def test_bad_config(self):
        with pytest.raises(geodata.ConfigInvalid):
            synth_scene(0, SceneConfig(width=-1))


class TestRenderRgb:
    def _raster(self, value):
        grid = np.full((2, 2), value, dtype=np.float32)
        return BandedRaster(2, 2, [("a", grid), ("b", grid), ("c", grid)], IDENT_GT)

    def _pixel(self, tmp_path, value, lo=0.0, hi=10.0):
        from PIL import Image

        path = tmp_path / "x.png"
        render_rgb_png(self._raster(value), ("a", "b", "c"), path, [(lo, hi)] * 3)
        return np.asarray(Image.open(path))[0, 0, 0]

    def test_endpoints(self, tmp_path):
        assert self._pixel(tmp_path, 0.0) == 0
        assert self._pixel(tmp_path, 10.0) == 255

    def test_midpoint_rounds_half_up(self, tmp_path):
        assert self._pixel(tmp_path, 5.0) == 128

    def test_clamps_out_of_range(self, tmp_path):
        assert self._pixel(tmp_path, -3.0) == 0
        assert self._pixel(tmp_path, 99.0) == 255

    def test_monotone_in_value(self, tmp_path):
        values = np.linspace(-2, 12, 30)
        rendered = [self._pixel(tmp_path, v) for v in values]
        assert all(a <= b for a, b in zip(rendered, rendered[1:]))

    def test_unknown_band(self, tmp_path):
        with pytest.raises(UnknownBand):
            render_rgb_png(self._raster(1.0), ("a", "b", "nope"), tmp_path / "x.png")


class TestPolygonIO:
    def test_geojson_roundtrip(self, tmp_path):
        layer = PolygonLayer(
            [
                PolygonFeature([square(0, 0, 2, 2)], "clean_ice"),
                PolygonFeature([square(1, 1, 3, 3)], "debris"),
            ]
        )
        path = tmp_path / "p.geojson"
        geodata.write_polygons(layer, path)
        back = geodata.read_polygons(path)
        assert len(back.features) == 2
        assert back.features[0].label == "clean_ice"
        assert back.features[1].rings == [square(1, 1, 3, 3)]


class TestMaskRaster:
    def test_roundtrip(self):
        mask = LabelMask(3, 2, np.array([[0, 1, 2], [2, 1, 0]], dtype=np.uint8))
        back = geodata.raster_to_mask(geodata.mask_to_raster(mask, IDENT_GT))
        assert np.array_equal(back.values, mask.values)
