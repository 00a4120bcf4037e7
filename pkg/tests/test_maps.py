import json

import numpy as np
import pytest

from piqa.maps import (
    FloatMapError,
    mean_map,
    read_float_map,
    write_float_map,
    write_heatmap_png,
)


class TestFloatMapFile:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.standard_normal((7, 11)).astype(np.float32)
        path = tmp_path / "map.pmap"
        write_float_map(path, arr)
        back = read_float_map(path)
        assert back.dtype == np.float32
        np.testing.assert_array_equal(back, arr)

    def test_multichannel_roundtrip(self, tmp_path):
        arr = np.random.default_rng(1).random((4, 5, 3)).astype(np.float32)
        path = tmp_path / "map.pmap"
        write_float_map(path, arr)
        np.testing.assert_array_equal(read_float_map(path), arr)

    def test_header_layout(self, tmp_path):
        arr = np.zeros((2, 3), dtype=np.float32)
        path = tmp_path / "map.pmap"
        write_float_map(path, arr)
        raw = path.read_bytes()
        assert raw[:4] == b"PMAP"
        assert int.from_bytes(raw[4:8], "little") == 3   # width
        assert int.from_bytes(raw[8:12], "little") == 2  # height
        assert int.from_bytes(raw[12:16], "little") == 1
        assert len(raw) == 16 + 2 * 3 * 4

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.pmap"
        path.write_bytes(b"XMAP" + b"\x00" * 12)
        with pytest.raises(FloatMapError, match="magic"):
            read_float_map(path)

    def test_truncated_payload_rejected(self, tmp_path):
        arr = np.zeros((2, 2), dtype=np.float32)
        path = tmp_path / "map.pmap"
        write_float_map(path, arr)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(FloatMapError, match="length"):
            read_float_map(path)


class TestHeatmap:
    def test_sidecar_records_range(self, tmp_path):
        arr = np.linspace(-2.0, 3.0, 24).reshape(4, 6)
        png = tmp_path / "heat.png"
        lo, hi = write_heatmap_png(png, arr)
        assert (lo, hi) == (-2.0, 3.0)
        sidecar = json.loads((tmp_path / "heat.png.json").read_text())
        assert sidecar == {"min": -2.0, "max": 3.0}
        assert png.is_file()

    def test_constant_map_renders_black(self, tmp_path):
        from PIL import Image

        png = tmp_path / "flat.png"
        write_heatmap_png(png, np.full((3, 3), 7.0))
        assert np.asarray(Image.open(png)).max() == 0


class TestMeanMap:
    def test_single_map_identity(self):
        arr = np.random.default_rng(2).random((5, 5))
        np.testing.assert_allclose(mean_map([arr]), arr)

    def test_two_map_average(self):
        a = np.full((3, 3), 1.0)
        b = np.full((3, 3), 3.0)
        np.testing.assert_allclose(mean_map([a, b]), np.full((3, 3), 2.0))

    def test_normalized_maps_stay_normalized(self):
        rng = np.random.default_rng(3)
        maps = []
        for _ in range(5):
            m = rng.random((6, 6))
            maps.append(m / m.sum())
        assert mean_map(maps).sum() == pytest.approx(1.0, abs=1e-9)

    def test_mismatched_dims_rejected(self):
        with pytest.raises(ValueError):
            mean_map([np.zeros((2, 2)), np.zeros((3, 3))])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mean_map([])
