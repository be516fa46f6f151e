"""Run configuration: defaults, flat ``key=value`` config files, validation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .autoencoder import LENDING_CLUB_ARCH, TAIWAN_ARCH, SAConfig, check_layer_sizes
from .ensemble import DEFAULT_GAMMA_GRID

DATASET_KINDS = ("taiwan", "lendingclub", "generic-csv", "prepared")
DEFAULT_ARCH = {"taiwan": TAIWAN_ARCH, "lendingclub": LENDING_CLUB_ARCH}
FAST_PROFILE = {"epochs": 50, "gamma_grid": (0.1, 0.5, 0.9)}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: str = "taiwan"
    input: str | None = None
    out: str = "bsac-out"
    arch: tuple | None = None
    epochs: int = 200
    batch_size: int = 256
    learning_rate: float = 1e-3
    gamma_grid: tuple = DEFAULT_GAMMA_GRID
    folds: int = 5
    seed: int = 0
    target: str = "target"
    val_fraction: float = 0.2
    fast: bool = False
    model: str | None = None
    extra: dict = field(default_factory=dict, repr=False)

    def validate(self) -> "RunConfig":
        if self.dataset not in DATASET_KINDS:
            raise ConfigError(f"dataset must be one of {', '.join(DATASET_KINDS)}; got {self.dataset!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if not self.gamma_grid:
            raise ConfigError("gamma grid must not be empty")
        bad = [g for g in self.gamma_grid if not 0.0 <= g <= 1.0]
        if bad:
            raise ConfigError(f"gamma values must lie in [0, 1]; got {bad}")
        if self.folds < 3:
            raise ConfigError("folds must be >= 3")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must lie in (0, 1)")
        if self.arch is not None:
            try:
                check_layer_sizes(self.arch)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if self.extra:
            raise ConfigError(f"unknown config keys: {sorted(self.extra)}")
        return self

    def architecture(self, n_features: int) -> tuple:
        """Layer sizes for data with ``n_features`` columns.

        An explicit ``arch`` must match the data.  The dataset presets keep
        their hidden layers and take their outer width from the data.
        """
        if self.arch is not None:
            if self.arch[0] != n_features:
                raise ConfigError(f"--arch expects {self.arch[0]} features but the data has {n_features}")
            return tuple(self.arch)
        preset = DEFAULT_ARCH.get(self.dataset)
        if preset is None:
            return _halving_arch(n_features)
        if preset[0] == n_features:
            return preset
        return (n_features,) + preset[1:-1] + (n_features,)

    def sa_config(self, n_features: int) -> SAConfig:
        return SAConfig(self.architecture(n_features), gamma=0.5, epochs=self.epochs,
                        batch_size=self.batch_size, learning_rate=self.learning_rate, seed=self.seed)

    def snapshot(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        d["arch"] = None if self.arch is None else list(self.arch)
        d["gamma_grid"] = list(self.gamma_grid)
        return d


def _halving_arch(n: int) -> tuple:
    # each hidden layer about half the previous one, bottleneck of at least 2
    sizes = [n]
    while sizes[-1] // 2 >= 2 and len(sizes) < 4:
        sizes.append(sizes[-1] // 2)
    if len(sizes) == 1:
        sizes.append(max(1, n // 2))
    return tuple(sizes + sizes[-2::-1])


def parse_floats(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def parse_ints(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


_CONVERTERS = {
    "arch": parse_ints, "gamma_grid": parse_floats, "epochs": int, "batch_size": int,
    "learning_rate": float, "folds": int, "seed": int, "val_fraction": float, "fast": _parse_bool,
}


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    out = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{p}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_config(file_values: dict, flag_values: dict) -> RunConfig:
    """Merge defaults < --fast profile < config file < flags, then validate."""
    merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
    known = {f.name for f in fields(RunConfig)} - {"extra"}
    kwargs, extra = {}, {}
    for key, value in merged.items():
        if key not in known:
            extra[key] = value
            continue
        try:
            kwargs[key] = _CONVERTERS.get(key, str)(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None
    if kwargs.get("fast"):
        for key, value in FAST_PROFILE.items():
            if key not in kwargs:
                kwargs[key] = value
    return RunConfig(**kwargs, extra=extra).validate()
