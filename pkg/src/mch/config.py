"""Line-oriented key=value pipeline configuration with CLI overrides.

Blank lines and '#' comments are ignored; unknown keys are rejected.  Every
command logs the fully resolved configuration before running.  Defaults
follow the published training recipe where one exists (momentum 0.9,
initial learning rate 1e-4, weight decay 5e-4, 100 policy iterations,
batch 256, sigma=xi=0.5).
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, fields

from mch.agent import RewardConfig
from mch.basemodel import TrainConfig
from mch.encoder import EncoderConfig
from mch.loss import LOSS_KINDS, WEIGHT_SCHEMES, LossSpec


class ConfigError(ValueError):
    """Bad key, bad value, or conflicting settings."""


@dataclass
class PipelineConfig:
    # synthetic data
    n: int = 5000
    n_queries: int = 500
    categories: int = 8
    dim: int = 64
    composite_fraction: float = 0.2
    noise_sigma: float = 0.02
    regions_per_item: int = 5
    data_seed: int = 0
    # loss
    loss: str = "dch"
    q: int = 16
    alpha: float = 1.0
    gamma: float = 2.0
    margin_h: float = 2.0
    weight_scheme: str = "uniform"
    epsilon: float = 1e-6
    # base model training
    relaxation: str = "auto"
    learning_rate: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 5e-4
    base_epochs: int = 30
    batch_size: int = 256
    reg_weight: float = 0.1
    base_seed: int = 0
    # agent training
    agent_iters: int = 100
    agent_learning_rate: float = 1e-4
    pair_scope: str = "sampled"
    sample_size: int = 0          # 0 = batch size
    hidden: str = "512,256,128,64"
    agent_seed: int = 0
    use_baseline: bool = False
    # encoder
    sigma: float = 0.5
    xi: float = 0.5
    max_regions: int = 5
    query_multicode: bool = False  # eval-side: queries keep region codes too
    # search / eval
    r_max: int = -1               # -1 = full radius for q <= 16, else 4
    eval_ks: str = "1,5,10,50,100,500,1000,2000"

    def validate(self) -> None:
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"loss must be one of {LOSS_KINDS}")
        if self.weight_scheme not in WEIGHT_SCHEMES:
            raise ConfigError(f"weight_scheme must be one of {WEIGHT_SCHEMES}")
        if self.relaxation not in ("auto", "smoothing", "continuous"):
            raise ConfigError("relaxation must be auto|smoothing|continuous")
        if self.pair_scope not in ("sampled", "full"):
            raise ConfigError("pair_scope must be sampled|full")
        if not 1 <= self.q <= 256:
            raise ConfigError("q must lie in [1, 256]")
        if self.r_max > self.q:
            raise ConfigError("r_max cannot exceed q")
        try:
            self.hidden_widths()
            self.ks()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- derived objects -----------------------------------------------------

    def loss_spec(self) -> LossSpec:
        try:
            return LossSpec(
                kind=self.loss, q=self.q, alpha=self.alpha, gamma=self.gamma,
                margin_h=self.margin_h, weight_scheme=self.weight_scheme,
                epsilon=self.epsilon,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def base_train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate, momentum=self.momentum,
            weight_decay=self.weight_decay, epochs=self.base_epochs,
            batch_size=self.batch_size, reg_weight=self.reg_weight,
            seed=self.base_seed,
        )

    def agent_train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.agent_learning_rate, momentum=self.momentum,
            weight_decay=self.weight_decay, epochs=self.agent_iters,
            batch_size=self.batch_size, reg_weight=self.reg_weight,
            seed=self.agent_seed,
        )

    def reward_config(self) -> RewardConfig:
        return RewardConfig(
            spec=self.loss_spec(), pair_scope=self.pair_scope,
            sample_size=self.sample_size or None,
            use_baseline=self.use_baseline,
        )

    def encoder_config(self) -> EncoderConfig:
        try:
            return EncoderConfig(
                sigma=self.sigma, xi=self.xi, max_regions=self.max_regions
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def base_mode(self) -> str | None:
        return None if self.relaxation == "auto" else self.relaxation

    def hidden_widths(self) -> tuple[int, ...]:
        widths = tuple(int(x) for x in self.hidden.split(",") if x.strip())
        if not widths or any(wd <= 0 for wd in widths):
            raise ValueError("hidden must be a comma list of positive widths")
        return widths

    def ks(self) -> tuple[int, ...]:
        ks = tuple(int(x) for x in self.eval_ks.split(",") if x.strip())
        if not ks or any(k <= 0 for k in ks) or list(ks) != sorted(set(ks)):
            raise ValueError("eval_ks must be strictly ascending positive ints")
        return ks

    def effective_r_max(self) -> int:
        if self.r_max >= 0:
            return self.r_max
        return self.q if self.q <= 16 else 4

    def log(self, stream=None) -> None:
        stream = stream or sys.stderr
        print("# resolved configuration", file=stream)
        for f in fields(self):
            print(f"{f.name} = {getattr(self, f.name)}", file=stream)


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _parse_value(key: str, raw: str):
    ftype = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc


def load_config(
    path: str | None = None, overrides: list[str] | None = None
) -> PipelineConfig:
    """Defaults, then the file, then key=value override strings."""
    cfg = PipelineConfig()
    pairs: list[tuple[str, str]] = []
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    line = line.split("#", 1)[0].strip()
                    if not line:
                        continue
                    if "=" not in line:
                        raise ConfigError(
                            f"{path}:{lineno}: expected key=value, got {line!r}"
                        )
                    key, raw = line.split("=", 1)
                    pairs.append((key.strip(), raw))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, raw = item.split("=", 1)
        pairs.append((key.strip(), raw))
    for key, raw in pairs:
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown configuration key {key!r}")
        setattr(cfg, key, _parse_value(key, raw))
    cfg.validate()
    return cfg
