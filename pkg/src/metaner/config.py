"""Flat key=value run configuration.

One key per line, `#` comments, no sections; model hyperparameters use a
`model.` prefix. Unknown keys, bad values, and dangling paths are rejected
with the file name and line number. `render_config` writes every key back out
explicitly, defaults included, which is how runs record their resolved
configuration next to their artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .augment import MIX_LAYERS, AugConfig
from .corpus import SCHEMES
from .tagger import ModelConfig
from .trainer import TrainerConfig

METHODS = ("baseline", "ts", "mixup", "both")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    train: str | None = None
    dev: str | None = None
    test: str | None = None
    vectors: str | None = None
    stopwords: str | None = None
    out: str | None = None
    fraction: float = 1.0
    scheme: str = "BIOES"
    seed: int = 0
    method: str = "baseline"
    model: ModelConfig = field(default_factory=ModelConfig)
    aug: AugConfig = field(default_factory=AugConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"fraction must be in (0, 1], got {self.fraction}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")

    @property
    def use_ts(self) -> bool:
        return self.method in ("ts", "both")

    @property
    def use_mixup(self) -> bool:
        return self.method in ("mixup", "both")


def _boolean(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    raise ValueError(f"expected true or false, got {raw!r}")


def _choice(options):
    def cast(raw: str) -> str:
        if raw not in options:
            raise ValueError(f"expected one of {options}, got {raw!r}")
        return raw

    return cast


# key -> (section, field, cast). Sections: run-level fields, the model
# dataclass, augmentation, and trainer; the flat file hides that split.
_KEYS: dict[str, tuple[str, str, object]] = {
    "train": ("run", "train", str),
    "dev": ("run", "dev", str),
    "test": ("run", "test", str),
    "vectors": ("run", "vectors", str),
    "stopwords": ("run", "stopwords", str),
    "out": ("run", "out", str),
    "fraction": ("run", "fraction", float),
    "scheme": ("run", "scheme", _choice(SCHEMES)),
    "seed": ("run", "seed", int),
    "method": ("run", "method", _choice(METHODS)),
    "model.emb_dim": ("model", "emb_dim", int),
    "model.hidden": ("model", "hidden", int),
    "model.dropout": ("model", "dropout", float),
    "model.lowercase": ("model", "lowercase", _boolean),
    "gamma": ("aug", "gamma", float),
    "p_sub": ("aug", "p_sub", float),
    "k": ("aug", "k", int),
    "times": ("aug", "times", int),
    "alpha": ("aug", "alpha", float),
    "mix_layer": ("aug", "mix_layer", _choice(MIX_LAYERS)),
    "steps": ("trainer", "steps", int),
    "meta_batch": ("trainer", "m", int),
    "batch": ("trainer", "n", int),
    "lr": ("trainer", "lr", float),
    "beta": ("trainer", "beta", float),
    "delta": ("trainer", "delta", float),
    "weight_decay": ("trainer", "weight_decay", float),
    "beta1": ("trainer", "beta1", float),
    "beta2": ("trainer", "beta2", float),
    "clip": ("trainer", "clip", float),
    "eval_every": ("trainer", "eval_every", int),
    "meta_reweight": ("trainer", "meta_reweight", _boolean),
}

_PATH_KEYS = ("train", "dev", "test", "vectors", "stopwords")


def parse_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    sections: dict[str, dict] = {"run": {}, "model": {}, "aug": {}, "trainer": {}}
    lines: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in lines:
                raise ConfigError(
                    f"{path}:{lineno}: duplicate key {key!r} (first set on line {lines[key]})"
                )
            lines[key] = lineno
            section, attr, cast = _KEYS[key]
            try:
                sections[section][attr] = cast(value)
            except ValueError as exc:
                raise ConfigError(
                    f"{path}:{lineno}: invalid value for {key!r}: {exc}"
                ) from exc

    def build(factory, kwargs, section):
        try:
            return factory(**kwargs)
        except ValueError as exc:
            lineno = _blame(str(exc), section, lines)
            where = f"{path}:{lineno}" if lineno else str(path)
            raise ConfigError(f"{where}: {exc}") from exc

    model = build(ModelConfig, sections["model"], "model")
    aug = build(AugConfig, sections["aug"], "aug")
    trainer = build(TrainerConfig, sections["trainer"], "trainer")
    cfg = build(
        RunConfig,
        dict(sections["run"], model=model, aug=aug, trainer=trainer),
        "run",
    )
    for key in _PATH_KEYS:
        value = getattr(cfg, key)
        if value is not None and not Path(value).exists():
            raise ConfigError(
                f"{path}:{lines.get(key, '?')}: {key} file does not exist: {value}"
            )
    return cfg


def _blame(message: str, section: str, lines: dict[str, int]) -> int | None:
    """Best-effort mapping from a validation message back to a config line."""
    for key, (sec, attr, _) in _KEYS.items():
        if sec == section and key in lines and (attr in message or key in message):
            return lines[key]
    return None


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(cfg: RunConfig) -> str:
    """The fully resolved flat config, every key explicit."""
    out = []
    for key, (section, attr, _) in _KEYS.items():
        if section == "run":
            value = getattr(cfg, attr)
        else:
            value = getattr(getattr(cfg, {"model": "model", "aug": "aug", "trainer": "trainer"}[section]), attr)
        if value is None:
            continue  # unset paths and unset beta stay absent
        out.append(f"{key}={_format(value)}")
    return "\n".join(out) + "\n"
