import csv
import io
import stat
import sys

import numpy as np
import pytest
from oracles import brute_force_confusion, one_pass_stats

from helpers import random_gray, random_mask
from shapeseg.evaluate import (
    CommandPredictor,
    ConfusionCounts,
    EvalItem,
    EvalReport,
    PredictorError,
    composition_tag,
    confusion,
    dataset_stats,
    iou,
    render_report,
    run_ablation,
)
from shapeseg.image import BinaryMask, GrayImage


# ---------------------------------------------------------------------------
# Confusion and IoU
# ---------------------------------------------------------------------------


def test_confusion_identical_masks():
    rng = np.random.default_rng(0)
    m = random_mask(rng)
    c = confusion(m, m)
    assert (c.tp, c.fp, c.fn) == (m.foreground_count(), 0, 0)
    assert c.total == m.data.size


def test_confusion_disjoint_2x2():
    pred = BinaryMask(np.ones((2, 2), dtype=bool))
    truth = BinaryMask(np.zeros((2, 2), dtype=bool))
    c = confusion(pred, truth)
    assert (c.tp, c.fp, c.fn, c.tn) == (0, 4, 0, 0)


def test_confusion_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(200):
        pred, truth = random_mask(rng), random_mask(rng)
        c = confusion(pred, truth)
        assert (c.tp, c.fp, c.fn, c.tn) == brute_force_confusion(pred.data, truth.data)


def test_confusion_dimension_mismatch():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError):
        confusion(random_mask(rng, 4, 4), random_mask(rng, 4, 5))


def test_counts_must_be_non_negative():
    with pytest.raises(ValueError):
        ConfusionCounts(-1, 0, 0, 0)


def test_iou_spot_values():
    assert iou(ConfusionCounts(2, 1, 1, 0)) == 0.5
    assert iou(ConfusionCounts(5, 0, 0, 11)) == 1.0
    assert iou(ConfusionCounts(0, 0, 0, 16)) == 1.0  # both empty
    assert iou(ConfusionCounts(0, 3, 2, 0)) == 0.0


def test_iou_in_unit_interval():
    rng = np.random.default_rng(3)
    for _ in range(200):
        v = iou(confusion(random_mask(rng), random_mask(rng)))
        assert 0.0 <= v <= 1.0


def test_iou_monotone_under_fp_removal():
    rng = np.random.default_rng(4)
    for _ in range(50):
        pred, truth = random_mask(rng), random_mask(rng)
        c = confusion(pred, truth)
        fp_pixels = np.argwhere(pred.data & ~truth.data)
        if not len(fp_pixels):
            continue
        y, x = fp_pixels[0]
        fixed = pred.data.copy()
        fixed[y, x] = False
        c2 = confusion(BinaryMask(fixed), truth)
        assert iou(c2) >= iou(c)


def test_iou_symmetry_when_fp_equals_fn():
    pred = BinaryMask(np.array([[1, 1, 0, 0]], dtype=bool))
    truth = BinaryMask(np.array([[1, 0, 1, 0]], dtype=bool))
    assert iou(confusion(pred, truth)) == iou(confusion(truth, pred))


# ---------------------------------------------------------------------------
# Dataset statistics
# ---------------------------------------------------------------------------


def test_stats_single_uniform_image():
    img = GrayImage(np.full((10, 10), 128, dtype=np.uint8))
    assert dataset_stats([img]) == (128.0, 0.0)


def test_stats_two_point():
    imgs = [GrayImage(np.array([[0]], dtype=np.uint8)), GrayImage(np.array([[255]], dtype=np.uint8))]
    mean, std = dataset_stats(imgs)
    assert mean == 127.5 and std == 127.5


def test_stats_match_one_pass_oracle():
    rng = np.random.default_rng(5)
    imgs = [random_gray(rng, h=rng.integers(5, 40), w=rng.integers(5, 40)) for _ in range(12)]
    mean, std = dataset_stats(imgs)
    o_mean, o_std = one_pass_stats([i.data for i in imgs])
    assert mean == pytest.approx(o_mean, rel=1e-9)
    assert std == pytest.approx(o_std, rel=1e-9)


def test_stats_empty_rejected():
    with pytest.raises(ValueError):
        dataset_stats([])


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def test_report_mean_and_validation():
    r = EvalReport("RAW/RAW/RAW", "High", (0.25, 0.75))
    assert r.mean_iou == 0.5 and r.n_images == 2
    with pytest.raises(ValueError):
        EvalReport("x", "g", (1.2,))
    with pytest.raises(ValueError):
        EvalReport("x", "g", (), failures=-1)


def test_render_csv_spot():
    text = render_report([EvalReport("RAW/RAW/RAW", "all", (0.5,))], "csv")
    lines = text.strip().split("\n")
    assert lines[0] == "composition,group,n_images,mean_iou,failures"
    assert lines[1] == "RAW/RAW/RAW,all,1,0.500,0"


def test_render_group_order_preserved():
    reports = [
        EvalReport("EDGE/EDGE/EDGE", "High", (0.9,)),
        EvalReport("EDGE/EDGE/EDGE", "Low", (0.8,)),
    ]
    text = render_report(reports, "csv")
    assert text.index(",High,") < text.index(",Low,")


def test_render_csv_parses_back():
    reports = [
        EvalReport("RAW/RAW/RAW", "High", (0.832, 0.914)),
        EvalReport("EDGE/CLAHE_LOW/CLAHE_HIGH", "Low", (0.644,), failures=2),
    ]
    rows = list(csv.DictReader(io.StringIO(render_report(reports, "csv"))))
    assert len(rows) == 2
    for row, rep in zip(rows, reports):
        assert row["composition"] == rep.composition
        assert row["group"] == rep.group
        assert int(row["n_images"]) == rep.n_images
        assert float(row["mean_iou"]) == pytest.approx(rep.mean_iou, abs=5e-4)
        assert int(row["failures"]) == rep.failures


def test_render_markdown():
    text = render_report([EvalReport("RAW/RAW/RAW", "all", (0.5,))], "markdown")
    assert "| RAW/RAW/RAW | all | 1 | 0.500 | 0 |" in text


def test_render_rejects_empty_and_bad_format():
    with pytest.raises(ValueError):
        render_report([], "csv")
    with pytest.raises(ValueError):
        render_report([EvalReport("x", "g", (0.5,))], "xml")


def test_report_totals_invariant_under_reordering():
    rng = np.random.default_rng(6)
    ious = tuple(float(v) for v in rng.random(9))
    a = EvalReport("RAW/RAW/RAW", "all", ious)
    b = EvalReport("RAW/RAW/RAW", "all", tuple(reversed(ious)))
    assert a.mean_iou == pytest.approx(b.mean_iou, rel=1e-15)


def test_composition_tag():
    assert composition_tag(["RAW", "RAW", "RAW"]) == "RAW/RAW/RAW"
    assert composition_tag(["edge", "clahe_low", "clahe_high"]) == "EDGE/CLAHE_LOW/CLAHE_HIGH"


# ---------------------------------------------------------------------------
# Ablation runner
# ---------------------------------------------------------------------------


def _write_predictor(tmp_path, body):
    script = tmp_path / "predictor.py"
    script.write_text("#!/usr/bin/env python3\n" + body)
    script.chmod(script.stat().st_mode | stat.S_IEXEC)
    return CommandPredictor((sys.executable, str(script)))


def _toy_items(rng, n=3, groups=("all",)):
    items = []
    for i in range(n):
        for g in groups:
            img = random_gray(rng, h=24, w=24)
            mask = random_mask(rng, 24, 24)
            items.append(EvalItem(f"{g}{i:03d}", img, mask, g))
    return items


def test_perfect_predictor_scores_one(tmp_path):
    rng = np.random.default_rng(7)
    items = _toy_items(rng)
    masks_dir = tmp_path / "truths"
    masks_dir.mkdir()
    from shapeseg.image import save_mask

    for item in items:
        save_mask(item.truth, masks_dir / f"{item.item_id}.png")
    predictor = _write_predictor(
        tmp_path,
        f"""
import shutil, sys
from pathlib import Path
tensor, out = Path(sys.argv[1]), Path(sys.argv[2])
shutil.copy(Path({str(masks_dir)!r}) / (tensor.stem + '.png'), out)
""",
    )
    reports = run_ablation(items, [["RAW", "RAW", "RAW"], ["EDGE", "EDGE", "EDGE"]], predictor)
    assert len(reports) == 2
    for r in reports:
        assert r.mean_iou == 1.0
        assert r.failures == 0
        assert r.n_images == 3


def test_constant_background_predictor_scores_zero(tmp_path):
    rng = np.random.default_rng(8)
    items = _toy_items(rng)
    predictor = _write_predictor(
        tmp_path,
        """
import sys
import numpy as np
from PIL import Image
Image.fromarray(np.zeros((24, 24), dtype=np.uint8)).save(sys.argv[2])
""",
    )
    reports = run_ablation(items, [["RAW", "RAW", "RAW"]], predictor)
    assert reports[0].mean_iou == 0.0


def test_failing_predictor_excluded_and_counted(tmp_path):
    rng = np.random.default_rng(9)
    items = _toy_items(rng, n=4)
    masks_dir = tmp_path / "truths"
    masks_dir.mkdir()
    from shapeseg.image import save_mask

    for item in items:
        save_mask(item.truth, masks_dir / f"{item.item_id}.png")
    predictor = _write_predictor(
        tmp_path,
        f"""
import shutil, sys
from pathlib import Path
tensor, out = Path(sys.argv[1]), Path(sys.argv[2])
if tensor.stem.endswith('001'):
    sys.exit(5)
shutil.copy(Path({str(masks_dir)!r}) / (tensor.stem + '.png'), out)
""",
    )
    reports = run_ablation(items, [["RAW", "RAW", "RAW"]], predictor)
    assert reports[0].failures == 1
    assert reports[0].n_images == 3
    assert reports[0].mean_iou == 1.0


def test_groups_reported_in_first_appearance_order(tmp_path):
    rng = np.random.default_rng(10)
    items = _toy_items(rng, n=2, groups=("High", "Low"))
    predictor = _write_predictor(
        tmp_path,
        """
import sys
import numpy as np
from PIL import Image
Image.fromarray(np.full((24, 24), 255, dtype=np.uint8)).save(sys.argv[2])
""",
    )
    reports = run_ablation(items, [["RAW", "RAW", "RAW"]], predictor)
    assert [r.group for r in reports] == ["High", "Low"]
    assert all(r.n_images == 2 for r in reports)


def test_empty_dataset_rejected():
    with pytest.raises(ValueError, match="empty dataset"):
        run_ablation([], [["RAW", "RAW", "RAW"]], CommandPredictor(("true",)))


def test_predictor_error_for_missing_output():
    pred = CommandPredictor(("true",))  # exits 0 but writes nothing
    from pathlib import Path

    with pytest.raises(PredictorError, match="no output"):
        pred(Path("/tmp/x.sat"), Path("/tmp/definitely-missing-mask.png"))
