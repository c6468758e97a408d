"""TOML pipeline configuration.

Schema (all sections optional; flags override file values):

    seed = 7                      # master seed for all derived randomness
    scale_mode = "symmetric"      # or "enlarge"

    [paths]
    renders = "renders"           # renders-on-black consumed by `build`
    backgrounds = "backgrounds"
    output = "dataset"

    [clahe]
    grid_cols = 8
    grid_rows = 8
    low_clip = 2.0
    high_clip = 4.0

    [edge]
    backend = "builtin"           # or "external"
    command = ["my-edge-model"]   # external only; receives a PGM path

    [mask]
    threshold = 10

    [augment]
    enabled = true
    hflip_prob = 0.5              # any AugmentationSpec field except seed
    brightness_range = [-40.0, 40.0]

    [split]
    fraction = 0.8

    [evaluate]
    compositions = [["EDGE", "CLAHE_LOW", "CLAHE_HIGH"], ["RAW", "RAW", "RAW"]]

Relative paths resolve against the config file's directory. Input
directories must exist at load time; the output directory is created on
demand.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .preprocess import DEFAULT_HIGH, DEFAULT_LOW, ClaheParams, EdgeBackend
from .synthgen import DEFAULT_MASK_THRESHOLD, SCALE_MODES, AugmentationSpec

__all__ = ["ConfigError", "PipelineConfig", "load_config"]


class ConfigError(ValueError):
    """The configuration file is malformed or violates an invariant."""


@dataclass(frozen=True)
class PipelineConfig:
    renders_dir: Path | None = None
    backgrounds_dir: Path | None = None
    output_dir: Path | None = None
    low: ClaheParams = DEFAULT_LOW
    high: ClaheParams = DEFAULT_HIGH
    edge_backend: EdgeBackend = EdgeBackend()
    mask_threshold: int = DEFAULT_MASK_THRESHOLD
    augment_enabled: bool = False
    augmentation: AugmentationSpec = AugmentationSpec()
    train_fraction: float = 0.8
    seed: int = 0
    scale_mode: str = "symmetric"
    compositions: tuple[tuple[str, ...], ...] = (("EDGE", "CLAHE_LOW", "CLAHE_HIGH"),)

    def __post_init__(self):
        if not 0 <= self.mask_threshold <= 255:
            raise ConfigError(f"mask threshold must lie in 0..255, got {self.mask_threshold}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(
                f"split fraction must lie strictly in (0, 1), got {self.train_fraction}"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit u64")
        if self.scale_mode not in SCALE_MODES:
            raise ConfigError(f"scale_mode must be one of {SCALE_MODES}")
        if not self.low.clip_factor < self.high.clip_factor:
            raise ConfigError("clahe low_clip must be below high_clip")
        for comp in self.compositions:
            if len(comp) != 3:
                raise ConfigError(f"compositions must be channel triples, got {comp}")


def _section(obj: dict, name: str, allowed: set[str]) -> dict:
    sec = obj.pop(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    return sec


def _input_dir(base: Path, value, what: str) -> Path | None:
    if value is None:
        return None
    path = (base / str(value)).resolve()
    if not path.is_dir():
        raise ConfigError(f"{what} directory does not exist: {path}")
    return path


_AUG_FIELDS = {f.name for f in fields(AugmentationSpec)} - {"seed"}


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            obj = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    base = path.parent

    top_allowed = {"seed", "scale_mode", "paths", "clahe", "edge", "mask", "augment",
                   "split", "evaluate"}
    unknown = set(obj) - top_allowed
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")

    paths = _section(obj, "paths", {"renders", "backgrounds", "output"})
    clahe_sec = _section(obj, "clahe", {"grid_cols", "grid_rows", "low_clip", "high_clip"})
    edge_sec = _section(obj, "edge", {"backend", "command"})
    mask_sec = _section(obj, "mask", {"threshold"})
    aug_sec = _section(obj, "augment", _AUG_FIELDS | {"enabled"})
    split_sec = _section(obj, "split", {"fraction"})
    eval_sec = _section(obj, "evaluate", {"compositions"})

    try:
        grid = {
            "grid_cols": int(clahe_sec.get("grid_cols", 8)),
            "grid_rows": int(clahe_sec.get("grid_rows", 8)),
        }
        low = ClaheParams(clip_factor=float(clahe_sec.get("low_clip", 2.0)), **grid)
        high = ClaheParams(clip_factor=float(clahe_sec.get("high_clip", 4.0)), **grid)

        backend_kind = str(edge_sec.get("backend", "builtin"))
        if backend_kind == "builtin":
            if "command" in edge_sec:
                raise ConfigError("[edge] command is only valid with backend = 'external'")
            backend = EdgeBackend.builtin()
        elif backend_kind == "external":
            command = edge_sec.get("command")
            if not command:
                raise ConfigError("[edge] backend = 'external' requires a command")
            backend = EdgeBackend.external([str(c) for c in command])
        else:
            raise ConfigError(f"[edge] backend must be 'builtin' or 'external', got {backend_kind!r}")

        aug_enabled = bool(aug_sec.pop("enabled", False))
        aug_kwargs = {}
        for key, value in aug_sec.items():
            if key.endswith("_range"):
                lo, hi = value
                conv = int if key == "motion_length_range" else float
                aug_kwargs[key] = (conv(lo), conv(hi))
            else:
                aug_kwargs[key] = float(value)
        augmentation = AugmentationSpec(**aug_kwargs)

        compositions = tuple(
            tuple(str(t) for t in comp) for comp in eval_sec.get("compositions", ())
        ) or PipelineConfig.compositions

        return PipelineConfig(
            renders_dir=_input_dir(base, paths.get("renders"), "renders"),
            backgrounds_dir=_input_dir(base, paths.get("backgrounds"), "backgrounds"),
            output_dir=(base / str(paths["output"])).resolve() if "output" in paths else None,
            low=low,
            high=high,
            edge_backend=backend,
            mask_threshold=int(mask_sec.get("threshold", DEFAULT_MASK_THRESHOLD)),
            augment_enabled=aug_enabled,
            augmentation=augmentation,
            train_fraction=float(split_sec.get("fraction", 0.8)),
            seed=int(obj.get("seed", 0)),
            scale_mode=str(obj.get("scale_mode", "symmetric")),
            compositions=compositions,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc


def override(config: PipelineConfig, **changes) -> PipelineConfig:
    """Functional update used by the CLI to apply flag overrides."""
    changes = {k: v for k, v in changes.items() if v is not None}
    return replace(config, **changes) if changes else config
