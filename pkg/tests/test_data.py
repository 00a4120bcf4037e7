import math

import numpy as np
import pytest

from piqa import data
from piqa.data import (
    DatasetRecord,
    ManifestError,
    SplitSpec,
    augment,
    load_manifest,
    make_synthetic_dataset,
    mos_from_strength,
    rescale_mos,
    resize_half,
    split,
    synthesize_samples,
)

from helpers import spearman_scalar


def _records(values):
    return [DatasetRecord(image_id=f"img{i}", image_path=f"img{i}.png", mos=v)
            for i, v in enumerate(values)]


class TestManifest:
    def test_two_row_csv(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a.png,3.5\nb.png,1.2\n")
        records = load_manifest(path)
        assert [r.mos for r in records] == [3.5, 1.2]
        assert [r.image_path for r in records] == ["a.png", "b.png"]

    def test_header_row_is_skipped(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("image_path,mos\na.png,3.5\n")
        assert len(load_manifest(path)) == 1

    def test_empty_file_warns(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("")
        with pytest.warns(UserWarning):
            assert load_manifest(path) == []

    def test_non_numeric_mos_names_row(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("c.png,abc\n")
        with pytest.raises(ManifestError, match="row 1"):
            load_manifest(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ManifestError, match="not found"):
            load_manifest(tmp_path / "absent.csv")

    def test_roundtrip(self, tmp_path):
        records = _records([1.25, 4.75])
        data.save_manifest(records, tmp_path / "m.csv")
        loaded = load_manifest(tmp_path / "m.csv")
        assert [r.mos for r in loaded] == [1.25, 4.75]


class TestRescaleMos:
    def test_identity_when_stats_already_match(self):
        records = _records([1.0, 2.0, 3.0, 4.0, 5.0])
        mean, std = data.mos_stats(records)
        out = rescale_mos(records, mean, std)
        np.testing.assert_allclose([r.mos for r in out], [r.mos for r in records], atol=1e-12)

    def test_two_point_symmetry(self):
        out = rescale_mos(_records([1.0, 3.0]), 0.0, 1.0)
        values = np.array([r.mos for r in out])
        np.testing.assert_allclose(values, [-1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-12)

    def test_five_point_affine_oracle(self):
        # independent recomputation of the affine map, scalar arithmetic
        src = [1.0, 2.0, 3.0, 4.0, 5.0]
        mean_src = sum(src) / 5
        std_src = math.sqrt(sum((v - mean_src) ** 2 for v in src) / 4)
        expected = [(v - mean_src) / std_src * 0.5 + 3.0 for v in src]
        out = rescale_mos(_records(src), 3.0, 0.5)
        np.testing.assert_allclose([r.mos for r in out], expected, atol=1e-12)
        values = np.array([r.mos for r in out])
        assert abs(values.mean() - 3.0) < 1e-9
        assert abs(values.std(ddof=1) - 0.5) < 1e-9

    def test_rank_preservation(self):
        rng = np.random.default_rng(7)
        src = rng.uniform(0, 100, size=40).tolist()
        out = rescale_mos(_records(src), 3.0, 0.5)
        assert spearman_scalar(src, [r.mos for r in out]) == pytest.approx(1.0, abs=1e-12)

    def test_zero_variance_rejected(self):
        with pytest.raises(ValueError, match="constant"):
            rescale_mos(_records([2.0, 2.0, 2.0]), 0.0, 1.0)


class TestSplit:
    def test_koniq_sized_counts(self):
        records = _records(np.linspace(1, 5, 10073).tolist())
        train, test = split(records, SplitSpec(seed=0, train_fraction=0.8))
        assert len(train) == 8058  # floor(0.8 * 10073)
        assert len(test) == 2015

    def test_small_counts(self):
        train, test = split(_records(range(10)), SplitSpec(seed=1))
        assert (len(train), len(test)) == (8, 2)

    def test_disjoint_union(self):
        records = _records(range(37))
        train, test = split(records, SplitSpec(seed=3))
        ids = {r.image_id for r in train} | {r.image_id for r in test}
        assert len(ids) == 37
        assert not ({r.image_id for r in train} & {r.image_id for r in test})
        assert all(r.split == "train" for r in train)
        assert all(r.split == "test" for r in test)

    def test_same_seed_same_partition(self):
        records = _records(range(50))
        a = split(records, SplitSpec(seed=11))
        b = split(records, SplitSpec(seed=11))
        assert [r.image_id for r in a[0]] == [r.image_id for r in b[0]]
        assert [r.image_id for r in a[1]] == [r.image_id for r in b[1]]

    def test_too_few_records(self):
        with pytest.raises(ValueError):
            split(_records([1.0]), SplitSpec(seed=0))

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            SplitSpec(seed=0, train_fraction=1.0)


class TestAugment:
    def test_all_coins_false_is_identity(self):
        img = np.random.default_rng(0).random((5, 7, 3)).astype(np.float32)
        out = augment(img, rotate=False, hflip=False, vflip=False)
        np.testing.assert_array_equal(out, img)

    def test_rotation_is_involution(self):
        img = np.random.default_rng(1).random((6, 4, 3)).astype(np.float32)
        once = augment(img, rotate=True, hflip=False, vflip=False)
        twice = augment(once, rotate=True, hflip=False, vflip=False)
        np.testing.assert_array_equal(twice, img)

    def test_rotation_index_map_oracle(self):
        # brute-force index map on an asymmetric 4x4 pattern
        img = np.arange(4 * 4 * 3, dtype=np.float32).reshape(4, 4, 3)
        out = augment(img, rotate=True, hflip=False, vflip=False)
        n, m = img.shape[:2]
        for i in range(n):
            for j in range(m):
                np.testing.assert_array_equal(out[n - 1 - i, m - 1 - j], img[i, j])

    def test_preserves_value_multiset(self):
        rng = np.random.default_rng(2)
        img = rng.random((8, 9, 3)).astype(np.float32)
        out = augment(img, rng)
        np.testing.assert_array_equal(np.sort(out.ravel()), np.sort(img.ravel()))

    def test_requires_rng_for_random_coins(self):
        with pytest.raises(ValueError):
            augment(np.zeros((4, 4, 3), dtype=np.float32))


class TestResizeHalf:
    def test_halves_dims(self):
        img = np.random.default_rng(0).random((768, 1024, 3))
        assert resize_half(img).shape == (384, 512, 3)

    def test_constant_stays_constant(self):
        img = np.full((8, 6, 3), 0.37)
        np.testing.assert_allclose(resize_half(img), np.full((4, 3, 3), 0.37), atol=1e-12)

    def test_checkerboard_averages(self):
        # hand-evaluated 2x2 bilinear kernel: the four pixels average
        img = np.zeros((2, 2, 3))
        img[0, 0] = img[1, 1] = 1.0
        np.testing.assert_allclose(resize_half(img), np.full((1, 1, 3), 0.5), atol=1e-12)

    def test_odd_dims_need_flag(self):
        img = np.zeros((3, 4, 3))
        with pytest.raises(ValueError):
            resize_half(img)
        assert resize_half(img, pad_odd=True).shape == (2, 2, 3)


class TestSynthetic:
    def test_strength_to_mos_endpoints(self):
        assert mos_from_strength(0.0) == 5.0
        assert mos_from_strength(1.0) == 1.0

    def test_mos_strength_anticorrelation(self):
        samples, meta = synthesize_samples(32, seed=5, size=(32, 32), with_meta=True)
        strengths = [m["strength"] for m in meta]
        moses = [s.mos for s in samples]
        assert spearman_scalar(strengths, moses) == pytest.approx(-1.0, abs=1e-12)

    def test_deterministic_images(self, tmp_path):
        recs_a = make_synthetic_dataset(8, seed=9, out_dir=tmp_path / "a", size=(32, 32))
        recs_b = make_synthetic_dataset(8, seed=9, out_dir=tmp_path / "b", size=(32, 32))
        for ra, rb in zip(recs_a, recs_b):
            assert ra.mos == rb.mos
            bytes_a = (tmp_path / "a" / ra.image_path).read_bytes()
            bytes_b = (tmp_path / "b" / rb.image_path).read_bytes()
            assert bytes_a == bytes_b

    def test_images_in_range(self):
        for sample in synthesize_samples(8, seed=3, size=(32, 32)):
            assert sample.image.shape == (32, 32, 3)
            assert sample.image.min() >= 0.0 and sample.image.max() <= 1.0

    def test_minimum_count(self):
        with pytest.raises(ValueError):
            synthesize_samples(7, seed=0)

    def test_manifest_roundtrip(self, tmp_path):
        records = make_synthetic_dataset(8, seed=1, out_dir=tmp_path, size=(32, 32))
        loaded = load_manifest(tmp_path / "manifest.csv")
        assert [r.mos for r in loaded] == pytest.approx([r.mos for r in records])
        samples = data.samples_from_records(loaded, root=tmp_path)
        assert samples[0].image.shape == (32, 32, 3)
