"""Crop geometry, extraction, and byte-level conformance with the indexing
pipeline's file formats (verified through the primary package's loaders)."""

import numpy as np
import pytest
from PIL import Image

from featx.cli import main
from featx.crops import crop_plan
from featx.extract import extract, parse_label_file


@pytest.fixture(scope="module")
def image_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("imgs")
    rng = np.random.default_rng(0)
    names = []
    for i in range(6):
        arr = rng.integers(0, 255, size=(48 + 8 * i, 64, 3), dtype=np.uint8)
        name = f"img{i}.png"
        Image.fromarray(arr).save(root / name)
        names.append(name)
    (root / "broken.png").write_bytes(b"not an image")
    labels = root / "labels.tsv"
    lines = [
        "img0.png\tcat",
        "img1.png\tdog",
        "img2.png\tcat,dog",
        "img3.png\tbird",
        "img4.png\tdog",
        "img5.png\tbird,cat",
        "broken.png\tcat",
    ]
    labels.write_text("\n".join(lines) + "\n")
    return root, str(labels)


class TestCropPlan:
    def test_sigma_one_is_full_frame(self):
        plan = crop_plan(1.0)
        assert all(r == (0.0, 0.0, 1.0, 1.0) for r in plan.regions)

    def test_sigma_half_geometry(self):
        plan = crop_plan(0.5)
        assert plan.regions == (
            (0.0, 0.0, 0.5, 0.5),
            (0.5, 0.0, 0.5, 0.5),
            (0.0, 0.5, 0.5, 0.5),
            (0.5, 0.5, 0.5, 0.5),
            (0.25, 0.25, 0.5, 0.5),
        )

    def test_middle_always_centered(self):
        for sigma in (0.1, 0.3, 0.7, 0.9):
            x, y, w, h = crop_plan(sigma).regions[4]
            assert x == pytest.approx((1 - sigma) / 2)
            assert x + w / 2 == pytest.approx(0.5)
            assert y + h / 2 == pytest.approx(0.5)

    def test_all_rects_inside_unit_square(self):
        for sigma in (0.1, 0.5, 1.0):
            for x, y, w, h in crop_plan(sigma).regions:
                assert 0 <= x <= x + w <= 1 + 1e-9
                assert 0 <= y <= y + h <= 1 + 1e-9

    def test_sigma_bounds(self):
        with pytest.raises(ValueError):
            crop_plan(0.0)
        with pytest.raises(ValueError):
            crop_plan(1.5)

    def test_pixel_boxes(self):
        boxes = crop_plan(0.5).pixel_boxes(100, 60)
        assert boxes[0] == (0, 0, 50, 30)
        assert boxes[4] == (25, 15, 75, 45)


class TestLabelFile:
    def test_parse(self, tmp_path):
        path = tmp_path / "l.tsv"
        path.write_text("# comment\na.png\tx, y\n\nb.png\tz\n")
        assert parse_label_file(str(path)) == [
            ("a.png", ["x", "y"]),
            ("b.png", ["z"]),
        ]

    def test_missing_tab_rejected(self, tmp_path):
        path = tmp_path / "l.tsv"
        path.write_text("a.png x\n")
        with pytest.raises(ValueError):
            parse_label_file(str(path))

    def test_empty_labels_rejected(self, tmp_path):
        path = tmp_path / "l.tsv"
        path.write_text("a.png\t ,\n")
        with pytest.raises(ValueError):
            parse_label_file(str(path))


@pytest.fixture(scope="module")
def outputs(image_dir, tmp_path_factory):
    root, labels = image_dir
    prefix = str(tmp_path_factory.mktemp("out") / "set")
    info = extract(str(root), labels, sigma=0.5, output_prefix=prefix, seed=3)
    return prefix, info


class TestExtraction:
    def test_skips_unreadable_keeps_rest(self, outputs):
        _, info = outputs
        assert info["items"] == 6
        assert info["skipped"] == 1
        assert info["classes"] == ["bird", "cat", "dog"]

    def test_files_load_in_primary_pipeline(self, outputs):
        from mch import formats

        prefix, info = outputs
        feats = formats.read_features(f"{prefix}.mchf")
        regions, rects = formats.read_regions(f"{prefix}.mchr")
        labels = formats.read_labels(f"{prefix}.mchl")
        assert feats.shape == (6, info["dim"])
        assert len(regions) == 6
        assert all(block.shape == (5, info["dim"]) for block in regions)
        assert labels.shape == (6, 3)
        # img2 carries cat+dog -> multi-hot row (bird, cat, dog) = (0, 1, 1)
        assert labels[2].tolist() == [0, 1, 1]

    def test_sigma_half_rectangles_in_file(self, outputs):
        from mch import formats

        prefix, _ = outputs
        _, rects = formats.read_regions(f"{prefix}.mchr")
        np.testing.assert_allclose(rects[0][4], [0.25, 0.25, 0.5, 0.5])
        np.testing.assert_allclose(rects[0][0], [0.0, 0.0, 0.5, 0.5])

    def test_primary_pipeline_consumes_output(self, outputs, tmp_path):
        # train a tiny model and encode an index straight off featx files
        from mch.cli import main as mch_main

        prefix, _ = outputs
        small = ["--set", "q=8", "--set", "loss=dch",
                 "--set", "learning_rate=0.2", "--set", "base_epochs=4",
                 "--set", "reg_weight=0.01", "--set", "agent_iters=3",
                 "--set", "batch_size=6"]
        model = str(tmp_path / "m.mchb")
        policy = str(tmp_path / "p.mchp")
        index = str(tmp_path / "i.mchi")
        assert mch_main(["train-base", "--features", f"{prefix}.mchf",
                         "--labels", f"{prefix}.mchl", "--out", model] + small) == 0
        assert mch_main(["train-agent", "--features", f"{prefix}.mchf",
                         "--regions", f"{prefix}.mchr",
                         "--labels", f"{prefix}.mchl",
                         "--model", model, "--out", policy] + small) == 0
        assert mch_main(["encode", "--features", f"{prefix}.mchf",
                         "--regions", f"{prefix}.mchr", "--model", model,
                         "--policy", policy, "--out", index] + small) == 0
        from mch import formats

        idx = formats.read_index(index)
        assert idx.n_items == 6

    def test_sigma_one_regions_identical_features(self, image_dir, tmp_path):
        from mch import formats

        root, labels = image_dir
        prefix = str(tmp_path / "full")
        extract(str(root), labels, sigma=1.0, output_prefix=prefix, seed=3)
        feats = formats.read_features(f"{prefix}.mchf")
        regions, rects = formats.read_regions(f"{prefix}.mchr")
        for i in range(len(regions)):
            assert np.all(rects[i] == [0.0, 0.0, 1.0, 1.0])
            for r in range(5):
                np.testing.assert_allclose(
                    regions[i][r], feats[i], rtol=1e-5, atol=1e-5
                )

    def test_deterministic(self, image_dir, tmp_path):
        root, labels = image_dir
        a, b = str(tmp_path / "a"), str(tmp_path / "b")
        extract(str(root), labels, sigma=0.5, output_prefix=a, seed=5)
        extract(str(root), labels, sigma=0.5, output_prefix=b, seed=5)
        for ext in (".mchf", ".mchr", ".mchl"):
            assert open(a + ext, "rb").read() == open(b + ext, "rb").read()


class TestCli:
    def test_end_to_end(self, image_dir, tmp_path, capsys):
        root, labels = image_dir
        prefix = str(tmp_path / "cli")
        assert main(["--images", str(root), "--labels", labels,
                     "--sigma", "0.5", "--out", prefix]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out == [f"{prefix}.mchf", f"{prefix}.mchr", f"{prefix}.mchl"]

    def test_bad_labels_is_error(self, image_dir, tmp_path, capsys):
        root, _ = image_dir
        bad = tmp_path / "bad.tsv"
        bad.write_text("nonsense without tab\n")
        assert main(["--images", str(root), "--labels", str(bad),
                     "--out", str(tmp_path / "x")]) == 1
        capsys.readouterr()
