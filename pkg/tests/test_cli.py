import json
import stat
import struct
import sys

import numpy as np

from helpers import make_render, make_sources, tree_bytes, write_config
from shapeseg.cli import main
from shapeseg.image import read_tensor, save_gray_image
from shapeseg.synthgen import read_manifests


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------


def test_manifest_stable_across_runs(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["manifest", str(a), "-n", "3", "--seed", "5"]) == 0
    assert main(["manifest", str(b), "-n", "3", "--seed", "5"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(read_manifests(a)) == 3


def test_manifest_zero_count(tmp_path):
    out = tmp_path / "empty.jsonl"
    assert main(["manifest", str(out), "-n", "0"]) == 0
    assert out.read_bytes() == b""


def test_manifest_paper_batch_size(tmp_path):
    out = tmp_path / "big.jsonl"
    assert main(["manifest", str(out), "-n", "11200", "--seed", "1"]) == 0
    assert sum(1 for _ in out.open()) == 11200


def test_manifest_respects_catalog_sizes(tmp_path):
    out = tmp_path / "m.jsonl"
    assert main(["manifest", str(out), "-n", "50", "--meshes", "2", "--backgrounds", "3"]) == 0
    for m in read_manifests(out):
        assert m.mesh_id < 2 and m.background_id < 3


def test_global_flags_accepted_in_both_positions(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["--seed", "9", "manifest", str(a), "-n", "2"]) == 0
    assert main(["manifest", str(b), "-n", "2", "--seed", "9"]) == 0
    assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------


def test_build_layout_and_split(tmp_path):
    rng = np.random.default_rng(0)
    make_sources(tmp_path, rng, n_renders=10)
    cfg = write_config(tmp_path)
    assert main(["--config", str(cfg), "build"]) == 0
    out = tmp_path / "dataset"
    for sub, suffix in (("images", ".png"), ("masks", ".png"), ("tensors", ".sat")):
        files = sorted((out / sub).iterdir())
        assert [f.name for f in files] == [f"{i:06d}{suffix}" for i in range(10)]
    records = [json.loads(line) for line in (out / "manifest.jsonl").open()]
    assert [r["id"] for r in records] == [f"{i:06d}" for i in range(10)]
    assert all(set(r) == {"id", "render", "background_id", "augment_seed"} for r in records)
    split = json.loads((out / "split.json").read_text())
    assert len(split["train"]) == 8 and len(split["val"]) == 2
    assert sorted(split["train"] + split["val"]) == [f"{i:06d}" for i in range(10)]


def test_build_deterministic_across_runs_and_jobs(tmp_path):
    rng = np.random.default_rng(1)
    make_sources(tmp_path, rng)
    cfg_a = write_config(tmp_path, output="out_a", name="a.toml")
    cfg_b = write_config(tmp_path, output="out_b", name="b.toml")
    assert main(["--config", str(cfg_a), "build"]) == 0
    assert main(["--config", str(cfg_b), "--jobs", "2", "build"]) == 0
    a = tree_bytes(tmp_path / "out_a")
    b = tree_bytes(tmp_path / "out_b")
    assert a and set(a) == set(b)
    for name in a:
        assert a[name] == b[name], f"{name} differs between serial and parallel builds"


def test_build_requires_paths(tmp_path):
    cfg = tmp_path / "bare.toml"
    cfg.write_text("seed = 1\n")
    assert main(["--config", str(cfg), "build"]) == 2


# ---------------------------------------------------------------------------
# preprocess
# ---------------------------------------------------------------------------


def test_preprocess_writes_readable_tensor(tmp_path):
    rng = np.random.default_rng(2)
    img_path = tmp_path / "in.png"
    save_gray_image(make_render(rng), img_path)
    out = tmp_path / "out.sat"
    assert main(["preprocess", str(img_path), str(out)]) == 0
    tensor = read_tensor(out)
    assert [int(s) for s in tensor.semantics] == [1, 2, 3]


def test_preprocess_raw_composition_codes(tmp_path):
    rng = np.random.default_rng(3)
    img_path = tmp_path / "in.png"
    save_gray_image(make_render(rng), img_path)
    out = tmp_path / "raw.sat"
    assert main(["preprocess", str(img_path), str(out), "--composition", "RAW,RAW,RAW"]) == 0
    assert struct.unpack_from("<III", out.read_bytes(), 24) == (0, 0, 0)


def test_preprocess_missing_input(tmp_path):
    assert main(["preprocess", str(tmp_path / "none.png"), str(tmp_path / "o.sat")]) == 2


def test_preprocess_bad_composition(tmp_path):
    rng = np.random.default_rng(4)
    img_path = tmp_path / "in.png"
    save_gray_image(make_render(rng), img_path)
    assert main(["preprocess", str(img_path), str(tmp_path / "o.sat"), "--composition", "RAW"]) == 2


# ---------------------------------------------------------------------------
# augment / split
# ---------------------------------------------------------------------------


def test_augment_command_deterministic(tmp_path):
    rng = np.random.default_rng(5)
    img_path, mask_path = tmp_path / "i.png", tmp_path / "m.png"
    save_gray_image(make_render(rng), img_path)
    from shapeseg.image import BinaryMask, save_mask

    save_mask(BinaryMask(rng.integers(0, 2, (40, 56), dtype=np.uint8).astype(bool)), mask_path)
    outs = [(tmp_path / f"oi{k}.png", tmp_path / f"om{k}.png") for k in range(2)]
    for oi, om in outs:
        assert main(["augment", str(img_path), str(mask_path), str(oi), str(om), "--seed", "12"]) == 0
    assert outs[0][0].read_bytes() == outs[1][0].read_bytes()
    assert outs[0][1].read_bytes() == outs[1][1].read_bytes()


def test_split_command(tmp_path):
    rng = np.random.default_rng(6)
    ds = tmp_path / "ds"
    (ds / "images").mkdir(parents=True)
    for i in range(10):
        save_gray_image(make_render(rng), ds / "images" / f"{i:06d}.png")
    assert main(["split", str(ds), "--fraction", "0.8", "--seed", "3"]) == 0
    split = json.loads((ds / "split.json").read_text())
    assert len(split["train"]) == 8 and len(split["val"]) == 2


def test_split_empty_dataset(tmp_path):
    ds = tmp_path / "ds"
    (ds / "images").mkdir(parents=True)
    assert main(["split", str(ds)]) == 2


# ---------------------------------------------------------------------------
# evaluate / report
# ---------------------------------------------------------------------------


def _identity_predictor(tmp_path, masks_dir):
    script = tmp_path / "identity.py"
    script.write_text(
        f"""#!/usr/bin/env python3
import shutil, sys
from pathlib import Path
tensor, out = Path(sys.argv[1]), Path(sys.argv[2])
shutil.copy(Path({str(masks_dir)!r}) / (tensor.stem + '.png'), out)
"""
    )
    script.chmod(script.stat().st_mode | stat.S_IEXEC)
    return f"{sys.executable} {script}"


def _built_dataset(tmp_path, rng, n=3):
    make_sources(tmp_path, rng, n_renders=n)
    cfg = write_config(tmp_path)
    assert main(["--config", str(cfg), "build"]) == 0
    return tmp_path / "dataset"


def test_evaluate_identity_predictor(tmp_path, capsys):
    rng = np.random.default_rng(7)
    ds = _built_dataset(tmp_path, rng)
    predictor = _identity_predictor(tmp_path, ds / "masks")
    rc = main(
        [
            "evaluate",
            "--dataset",
            str(ds),
            "--predictor",
            predictor,
            "--compositions",
            "RAW,RAW,RAW;EDGE,CLAHE_LOW,CLAHE_HIGH",
        ]
    )
    out = capsys.readouterr().out
    assert rc == 0
    lines = out.strip().split("\n")
    assert lines[0] == "composition,group,n_images,mean_iou,failures"
    assert len(lines) == 3
    assert all(",1.000,0" in line for line in lines[1:])


def test_evaluate_two_groups_row_count(tmp_path, capsys):
    rng = np.random.default_rng(8)
    ds = _built_dataset(tmp_path, rng)
    predictor = _identity_predictor(tmp_path, ds / "masks")
    rc = main(
        [
            "evaluate",
            "--dataset",
            f"High={ds}",
            "--dataset",
            f"Low={ds}",
            "--predictor",
            predictor,
            "--compositions",
            "RAW,RAW,RAW;EDGE,EDGE,EDGE",
        ]
    )
    out = capsys.readouterr().out
    assert rc == 1  # group-qualified ids break the identity lookup -> failures
    lines = out.strip().split("\n")
    assert len(lines) == 5  # header + 2 compositions x 2 groups


def test_evaluate_missing_dataset(tmp_path):
    assert (
        main(
            [
                "evaluate",
                "--dataset",
                str(tmp_path / "nowhere"),
                "--predictor",
                "true",
            ]
        )
        == 2
    )


def test_evaluate_report_file_and_conversion(tmp_path, capsys):
    rng = np.random.default_rng(9)
    ds = _built_dataset(tmp_path, rng)
    predictor = _identity_predictor(tmp_path, ds / "masks")
    report_csv = tmp_path / "report.csv"
    rc = main(
        [
            "evaluate",
            "--dataset",
            str(ds),
            "--predictor",
            predictor,
            "--compositions",
            "RAW,RAW,RAW",
            "--out",
            str(report_csv),
        ]
    )
    assert rc == 0
    assert report_csv.is_file()
    capsys.readouterr()
    assert main(["report", str(report_csv), "--format", "markdown"]) == 0
    md = capsys.readouterr().out
    assert "| RAW/RAW/RAW | dataset | 3 | 1.000 | 0 |" in md


def test_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[mask]\nthreshold = 999\n")
    assert main(["--config", str(bad), "manifest", str(tmp_path / "m.jsonl"), "-n", "1"]) == 2
