"""Batch command-line driver for the pipeline.

Subcommands: manifest, build, preprocess, augment, split, evaluate, report.
Global flags (--config, --seed, --jobs, --verbose) are accepted before or
after the subcommand.

Exit codes are a stable scripting contract: 0 success, 1 partial failure
(some items failed, the rest were produced), 2 usage or configuration error.
Logs go to the error stream; data artifacts appear only at declared paths.

Every command is deterministic under a fixed config and seed: item ``i`` of a
batch uses the derived seed ``seed XOR i``, so worker count never changes the
output bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import shlex
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, PipelineConfig, load_config
from .evaluate import CommandPredictor, EvalItem, EvalReport, render_report, run_ablation
from .image import load_gray_image, load_mask, save_gray_image, save_mask, save_tensor
from .preprocess import assemble_tensor, assemble_variant
from .rng import Xoshiro256, derive_seed
from .synthgen import (
    SCALE_MODES,
    augment,
    composite,
    extract_mask,
    sample_manifest,
    split_dataset,
    write_manifests,
)

__all__ = ["main", "run", "build_parser"]

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2

log = logging.getLogger("shapeseg")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_globals(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # Registered on the main parser (real defaults) and on every subparser
    # (SUPPRESS defaults) so the flags work in either position without the
    # subparser wiping out values parsed before the subcommand.
    d = argparse.SUPPRESS
    parser.add_argument(
        "--config", type=Path, default=d if suppress else None, help="TOML config file"
    )
    parser.add_argument(
        "--seed", type=int, default=d if suppress else None, help="master seed (overrides config)"
    )
    parser.add_argument(
        "--jobs", type=int, default=d if suppress else None, help="worker processes (default 1)"
    )
    parser.add_argument(
        "--verbose",
        "-v",
        action="store_true",
        default=d if suppress else False,
        help="debug logging",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapeseg",
        description="Synthetic-dataset and shape-aware preprocessing pipeline.",
    )
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("manifest", help="sample renderer scene manifests to JSONL")
    _add_globals(p, suppress=True)
    p.add_argument("out", type=Path, help="output JSONL path")
    p.add_argument("--count", "-n", type=int, required=True, help="number of manifests")
    p.add_argument("--meshes", type=int, default=14, help="mesh catalog size")
    p.add_argument("--backgrounds", type=int, default=1000, help="background catalog size")
    p.add_argument("--scale-mode", choices=SCALE_MODES, default=None)
    p.set_defaults(func=_cmd_manifest)

    p = sub.add_parser("build", help="build a dataset from renders-on-black + backgrounds")
    _add_globals(p, suppress=True)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("preprocess", help="assemble one image into a SAT1 tensor")
    _add_globals(p, suppress=True)
    p.add_argument("input", type=Path, help="input image (PNG or PGM)")
    p.add_argument("output", type=Path, help="output .sat path")
    p.add_argument(
        "--composition",
        default="EDGE,CLAHE_LOW,CLAHE_HIGH",
        help="comma-separated channel triple (RAW, EDGE, CLAHE_LOW, CLAHE_HIGH)",
    )
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("augment", help="augment one image/mask pair")
    _add_globals(p, suppress=True)
    p.add_argument("image", type=Path)
    p.add_argument("mask", type=Path)
    p.add_argument("out_image", type=Path)
    p.add_argument("out_mask", type=Path)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("split", help="write split.json for an existing dataset")
    _add_globals(p, suppress=True)
    p.add_argument("dataset", type=Path, help="dataset root (expects images/)")
    p.add_argument("--fraction", type=float, default=None, help="train fraction (default 0.8)")
    p.add_argument("--out", type=Path, default=None, help="output path (default DATASET/split.json)")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("evaluate", help="run the ablation over compositions and datasets")
    _add_globals(p, suppress=True)
    p.add_argument(
        "--dataset",
        action="append",
        required=True,
        metavar="[GROUP=]DIR",
        help="dataset root with images/ and masks/; repeat for more groups",
    )
    p.add_argument("--predictor", required=True, help="predictor command (shell-quoted)")
    p.add_argument(
        "--compositions",
        default=None,
        help="semicolon-separated channel triples, e.g. 'RAW,RAW,RAW;EDGE,CLAHE_LOW,CLAHE_HIGH'",
    )
    p.add_argument("--format", choices=("csv", "markdown"), default="csv")
    p.add_argument("--out", type=Path, default=None, help="report path (default stdout)")
    p.add_argument("--work-dir", type=Path, default=None, help="keep tensors/predictions here")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="re-render a CSV report (e.g. to markdown)")
    _add_globals(p, suppress=True)
    p.add_argument("report", type=Path, help="CSV report from `evaluate`")
    p.add_argument("--format", choices=("csv", "markdown"), default="markdown")
    p.add_argument("--out", type=Path, default=None, help="output path (default stdout)")
    p.set_defaults(func=_cmd_report)

    return parser


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _parse_composition(text: str) -> list[str]:
    tags = [t.strip() for t in text.split(",") if t.strip()]
    if len(tags) != 3:
        raise ConfigError(f"composition must name exactly 3 channels, got {text!r}")
    return tags


def _parse_compositions(text: str) -> list[list[str]]:
    comps = [_parse_composition(part) for part in text.split(";") if part.strip()]
    if not comps:
        raise ConfigError("no compositions given")
    return comps


def _write_text(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="ascii")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_manifest(ns, cfg: PipelineConfig, seed: int, jobs: int) -> int:
    if ns.count < 0:
        raise ConfigError("--count must be non-negative")
    if ns.meshes < 1 or ns.backgrounds < 1:
        raise ConfigError("catalog sizes must be >= 1")
    scale_mode = ns.scale_mode or cfg.scale_mode
    write_manifests(
        (
            sample_manifest(derive_seed(seed, i), (ns.meshes, ns.backgrounds), scale_mode)
            for i in range(ns.count)
        ),
        ns.out,
    )
    log.info("wrote %d manifest(s) to %s", ns.count, ns.out)
    return EXIT_OK


def _build_item(task) -> dict:
    (
        index,
        render_path,
        bg_paths,
        out_root,
        threshold,
        aug_enabled,
        aug_spec,
        low,
        high,
        backend,
        master_seed,
    ) = task
    item_id = f"{index:06d}"
    try:
        render = load_gray_image(Path(render_path))
        mask = extract_mask(render, threshold)
        rng = Xoshiro256(derive_seed(master_seed, index))
        bg_index = rng.next_below(len(bg_paths))
        aug_seed = rng.next_u64()
        background = load_gray_image(Path(bg_paths[bg_index]))
        image = composite(render, mask, background)
        if aug_enabled:
            image, mask = augment(image, mask, aug_spec.with_seed(aug_seed))
        out = Path(out_root)
        save_gray_image(image, out / "images" / f"{item_id}.png")
        save_mask(mask, out / "masks" / f"{item_id}.png")
        save_tensor(assemble_tensor(image, backend, low, high), out / "tensors" / f"{item_id}.sat")
    except Exception as exc:  # per-item isolation; the parent tallies failures
        return {"id": item_id, "error": f"{type(exc).__name__}: {exc}"}
    return {
        "id": item_id,
        "render": Path(render_path).name,
        "background_id": bg_index,
        "augment_seed": aug_seed,
    }


def _cmd_build(ns, cfg: PipelineConfig, seed: int, jobs: int) -> int:
    if cfg.renders_dir is None or cfg.backgrounds_dir is None or cfg.output_dir is None:
        raise ConfigError("build requires [paths] renders, backgrounds, and output")
    renders = sorted(
        p for p in cfg.renders_dir.iterdir() if p.suffix.lower() in (".png", ".pgm")
    )
    if not renders:
        raise ConfigError(f"no renders (PNG/PGM) found in {cfg.renders_dir}")
    backgrounds = sorted(
        str(p) for p in cfg.backgrounds_dir.iterdir() if p.suffix.lower() in (".png", ".pgm")
    )
    if not backgrounds:
        raise ConfigError(f"no backgrounds (PNG/PGM) found in {cfg.backgrounds_dir}")

    out = cfg.output_dir
    for sub in ("images", "masks", "tensors"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    tasks = [
        (
            i,
            str(render),
            backgrounds,
            str(out),
            cfg.mask_threshold,
            cfg.augment_enabled,
            cfg.augmentation,
            cfg.low,
            cfg.high,
            cfg.edge_backend,
            seed,
        )
        for i, render in enumerate(renders)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_build_item, tasks))
    else:
        results = [_build_item(t) for t in tasks]

    failures = 0
    built = []
    with open(out / "manifest.jsonl", "w", encoding="ascii") as fh:
        for record in results:
            if "error" in record:
                failures += 1
                log.error("item %s failed: %s", record["id"], record["error"])
                continue
            fh.write(json.dumps(record))
            fh.write("\n")
            built.append(record["id"])

    if built:
        train, val = split_dataset(built, cfg.train_fraction, derive_seed(seed, len(built)))
        split_obj = {
            "seed": derive_seed(seed, len(built)),
            "fraction": cfg.train_fraction,
            "train": train,
            "val": val,
        }
        with open(out / "split.json", "w", encoding="ascii") as fh:
            json.dump(split_obj, fh, indent=2)
            fh.write("\n")

    log.info("built %d item(s), %d failure(s) -> %s", len(built), failures, out)
    return EXIT_PARTIAL if failures else EXIT_OK


def _cmd_preprocess(ns, cfg: PipelineConfig, seed: int, jobs: int) -> int:
    composition = _parse_composition(ns.composition)
    image = load_gray_image(ns.input)
    tensor = assemble_variant(image, composition, cfg.edge_backend, cfg.low, cfg.high)
    ns.output.parent.mkdir(parents=True, exist_ok=True)
    save_tensor(tensor, ns.output)
    log.info("wrote %s (%dx%d)", ns.output, tensor.width, tensor.height)
    return EXIT_OK


def _cmd_augment(ns, cfg: PipelineConfig, seed: int, jobs: int) -> int:
    image = load_gray_image(ns.image)
    mask = load_mask(ns.mask)
    out_image, out_mask = augment(image, mask, cfg.augmentation.with_seed(seed))
    save_gray_image(out_image, ns.out_image)
    save_mask(out_mask, ns.out_mask)
    log.info("wrote %s and %s", ns.out_image, ns.out_mask)
    return EXIT_OK


def _cmd_split(ns, cfg: PipelineConfig, seed: int, jobs: int) -> int:
    images_dir = ns.dataset / "images"
    ids = sorted(p.stem for p in images_dir.glob("*.png"))
    if not ids:
        raise ConfigError(f"no images found in {images_dir}")
    fraction = ns.fraction if ns.fraction is not None else cfg.train_fraction
    train, val = split_dataset(ids, fraction, seed)
    out = ns.out if ns.out is not None else ns.dataset / "split.json"
    with open(out, "w", encoding="ascii") as fh:
        json.dump({"seed": seed, "fraction": fraction, "train": train, "val": val}, fh, indent=2)
        fh.write("\n")
    log.info("split %d ids into %d train / %d val -> %s", len(ids), len(train), len(val), out)
    return EXIT_OK


def _load_eval_items(spec: str, qualify_group: bool) -> list[EvalItem]:
    if "=" in spec:
        group, _, dir_part = spec.partition("=")
    else:
        group, dir_part = Path(spec).name, spec
    root = Path(dir_part)
    images_dir = root / "images"
    masks_dir = root / "masks"
    if not images_dir.is_dir():
        raise ConfigError(f"dataset {root} has no images/ directory")
    items = []
    for img_path in sorted(images_dir.glob("*.png")):
        mask_path = masks_dir / img_path.name
        if not mask_path.is_file():
            raise ConfigError(f"missing mask for {img_path.name} in {masks_dir}")
        item_id = f"{group}_{img_path.stem}" if qualify_group else img_path.stem
        items.append(EvalItem(item_id, load_gray_image(img_path), load_mask(mask_path), group))
    return items


def _cmd_evaluate(ns, cfg: PipelineConfig, seed: int, jobs: int) -> int:
    predictor = CommandPredictor(tuple(shlex.split(ns.predictor)))
    if ns.compositions:
        compositions = _parse_compositions(ns.compositions)
    else:
        compositions = [list(c) for c in cfg.compositions]
    qualify = len(ns.dataset) > 1
    items = []
    for spec in ns.dataset:
        items.extend(_load_eval_items(spec, qualify))
    if not items:
        raise ConfigError("empty dataset")
    reports = run_ablation(
        items,
        compositions,
        predictor,
        cfg.edge_backend,
        cfg.low,
        cfg.high,
        work_dir=ns.work_dir,
    )
    _write_text(render_report(reports, ns.format), ns.out)
    failures = sum(r.failures for r in reports)
    if failures:
        log.warning("%d prediction failure(s); affected items excluded from means", failures)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_report(ns, cfg: PipelineConfig, seed: int, jobs: int) -> int:
    text = ns.report.read_text(encoding="ascii")
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ConfigError(f"no data rows in {ns.report}")
    reports = []
    for row in rows:
        try:
            n = int(row["n_images"])
            mean = float(row["mean_iou"])
            reports.append(
                EvalReport(row["composition"], row["group"], (mean,) * n, int(row["failures"]))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed report row {row!r}: {exc}") from exc
    _write_text(render_report(reports, ns.format), ns.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        format="%(levelname)s %(message)s",
        level=logging.DEBUG if ns.verbose else logging.INFO,
        force=True,
    )
    try:
        cfg = load_config(ns.config) if ns.config is not None else PipelineConfig()
        seed = ns.seed if ns.seed is not None else cfg.seed
        if not 0 <= seed < 2**64:
            raise ConfigError("--seed must fit u64")
        jobs = ns.jobs if ns.jobs is not None else 1
        if jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        return ns.func(ns, cfg, seed, jobs)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
