"""Training configuration: the TrainConfig dataclass plus the flat
``key = value`` config-file format used by the CLI.

File format: one ``key = value`` pair per line, ``#`` comments, blank lines
ignored. Example::

    name = koniq-full
    stages = 30:1e-4,30:5e-4,30:1e-5
    batch_size = 48
    loss.form = ms
    roi.normalize = linear
    use_dim = true
    backbone.variant = toy
    seed = 7
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .aggregation import SCORE_FORMS
from .backbone import BACKBONE_VARIANTS, DimConfig
from .data import RESIZE_KERNEL
from .roi_head import NORMALIZE_MODES

LOSS_FORMS = ("ms", "plain")

DEFAULT_STAGES = ((30, 1e-4), (30, 5e-4), (30, 1e-5))

_FORM_BY_KEY = {"ms": "mean_shifted", "plain": "plain"}


class ConfigError(ValueError):
    """Invalid configuration value or combination."""


@dataclass
class TrainConfig:
    """Everything a training run needs, serializable to the flat file format.

    The staged learning-rate sequence deliberately rises before it falls;
    override ``stages`` to change it.
    """

    name: str = "run"
    stages: tuple[tuple[int, float], ...] = DEFAULT_STAGES
    batch_size: int = 8
    loss_form: str = "ms"
    score_form: str = "auto"
    roi_normalize: str = "linear"
    use_roi: bool = True
    use_highlevel: bool = True
    use_dim: bool = True
    dim_rates: tuple[int, int, int] = (2, 4, 8)
    seed: int = 0
    train_fraction: float = 0.8
    backbone_variant: str = "toy"
    backbone_weights: str | None = None
    local_channels: int = 32
    embed_channels: int = 64
    dropout: float = 0.25
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    augment: bool = True

    def validate(self) -> "TrainConfig":
        if not self.stages:
            raise ConfigError("at least one training stage is required")
        for epochs, lr in self.stages:
            if epochs <= 0:
                raise ConfigError(f"stage epochs must be positive, got {epochs}")
            if lr <= 0:
                raise ConfigError(f"stage learning rate must be positive, got {lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.loss_form not in LOSS_FORMS:
            raise ConfigError(f"loss.form must be one of {LOSS_FORMS}, got {self.loss_form!r}")
        if self.score_form not in ("auto",) + LOSS_FORMS:
            raise ConfigError(f"score.form must be 'auto' or one of {LOSS_FORMS}")
        if self.roi_normalize not in NORMALIZE_MODES:
            raise ConfigError(f"roi.normalize must be one of {NORMALIZE_MODES}")
        if self.backbone_variant not in BACKBONE_VARIANTS:
            raise ConfigError(f"backbone.variant must be one of {BACKBONE_VARIANTS}")
        if self.use_dim and not self.use_highlevel:
            raise ConfigError("use_dim requires use_highlevel")
        if self.loss_form == "ms" and not self.use_roi:
            # With uniform weights the mean-shifted score is identically zero,
            # so there would be nothing to train.
            raise ConfigError("loss.form=ms requires use_roi; use loss.form=plain")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.use_dim:
            DimConfig(*self.dim_rates)
        return self

    @property
    def resolved_score_form(self) -> str:
        """Score aggregation form used at inference; defaults to the loss form."""
        key = self.loss_form if self.score_form == "auto" else self.score_form
        return _FORM_BY_KEY[key]

    @property
    def resolved_loss_form(self) -> str:
        return _FORM_BY_KEY[self.loss_form]

    @property
    def total_epochs(self) -> int:
        return sum(epochs for epochs, _ in self.stages)

    def snapshot(self) -> dict:
        """Flat, JSON-safe view of the effective configuration."""
        snap = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = _tuple_to_text(value)
            snap[f.name] = value
        snap["resize_kernel"] = RESIZE_KERNEL
        return snap


def _tuple_to_text(value: tuple) -> str:
    if value and isinstance(value[0], tuple):
        return ",".join(f"{int(e)}:{lr:g}" for e, lr in value)
    return ",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in value)


def parse_stages(text: str) -> tuple[tuple[int, float], ...]:
    """Parse ``epochs:lr,epochs:lr,...`` stage lists."""
    stages = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            epochs_text, lr_text = part.split(":")
            stages.append((int(epochs_text), float(lr_text)))
        except ValueError:
            raise ConfigError(f"bad stage spec {part!r}; expected 'epochs:lr'") from None
    if not stages:
        raise ConfigError(f"no stages parsed from {text!r}")
    return tuple(stages)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


# config-file key -> (dataclass field, parser)
_KEY_MAP = {
    "name": ("name", str),
    "stages": ("stages", parse_stages),
    "batch_size": ("batch_size", int),
    "loss.form": ("loss_form", str),
    "score.form": ("score_form", str),
    "roi.normalize": ("roi_normalize", str),
    "use_roi": ("use_roi", _parse_bool),
    "use_highlevel": ("use_highlevel", _parse_bool),
    "use_dim": ("use_dim", _parse_bool),
    "dim.rates": ("dim_rates", lambda t: tuple(int(v) for v in t.split(","))),
    "seed": ("seed", int),
    "train_fraction": ("train_fraction", float),
    "backbone.variant": ("backbone_variant", str),
    "backbone.weights_path": ("backbone_weights", str),
    "local_channels": ("local_channels", int),
    "embed_channels": ("embed_channels", int),
    "dropout": ("dropout", float),
    "augment": ("augment", _parse_bool),
}


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` text into TrainConfig field overrides."""
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEY_MAP:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        field_name, parser = _KEY_MAP[key]
        try:
            overrides[field_name] = parser(value)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return overrides


def config_from_file(path, **overrides) -> TrainConfig:
    """Load a config file and apply keyword overrides (CLI flags win)."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values = parse_config_text(text)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**values).validate()


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def koniq_config(**overrides) -> TrainConfig:
    """Full-scale recipe for KonIQ-10k-style data (1024x768, halved to
    512x384 upstream): batch 48, three 30-epoch stages."""
    values = dict(name="koniq", batch_size=48, stages=DEFAULT_STAGES)
    values.update(overrides)
    return TrainConfig(**values).validate()


def livec_config(**overrides) -> TrainConfig:
    """Full-scale recipe for LIVE-Challenge-style data (500x500): batch 36,
    MOS rescaled to the KonIQ scale upstream."""
    values = dict(name="livec", batch_size=36, stages=DEFAULT_STAGES)
    values.update(overrides)
    return TrainConfig(**values).validate()


def desk_config(**overrides) -> TrainConfig:
    """Desk-scale preset: toy backbone on small synthetic images; minutes on
    a CPU rather than hours on a GPU."""
    values = dict(name="desk", batch_size=16, stages=((8, 1e-3), (4, 3e-4)), seed=0)
    values.update(overrides)
    return TrainConfig(**values).validate()


def config_to_text(config: TrainConfig) -> str:
    """Serialize a TrainConfig to the flat file format (round-trips)."""
    lines = []
    for key, (field_name, _) in _KEY_MAP.items():
        value = getattr(config, field_name)
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, tuple):
            value = _tuple_to_text(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
