"""Pipeline configuration: a line-oriented ``section.key = value`` text format.

Every key is optional. Example::

    # smaller run
    master_seed = 7
    train.epochs = 5
    materials.copper.spectral_jitter = 20
    augmentation.output_resolutions = 64, 128
"""

import math
from dataclasses import dataclass, field, replace

from .dsp import StftConfig, Window
from .imaging import (
    AugmentationSpec,
    FlipHorizontal,
    RotateSmall,
    ScaleFactor,
    TranslatePixels,
)
from .nn.train import Optimizer, TrainConfig
from .seeding import derive_seed
from .synth import Material, RadarParams, material_profile


class ConfigError(ValueError):
    """Malformed or invalid configuration (CLI exit code 2)."""


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int_list(text):
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ValueError("expected a comma-separated list of integers")
    return tuple(int(t) for t in items)


def _str_list(text):
    return tuple(t.strip().lower() for t in text.split(",") if t.strip())


def _harmonics(text):
    # "k:amplitude:phase, ..."
    out = []
    for item in text.split(","):
        parts = item.strip().split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"harmonic {item!r} is not k:amplitude[:phase]")
        out.append((int(parts[0]), float(parts[1]), float(parts[2]) if len(parts) == 3 else 0.0))
    return tuple(out)


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return value


def _enum(choices):
    def parse(text):
        low = text.strip().lower()
        if low not in choices:
            raise ValueError(f"expected one of {', '.join(choices)}, got {text!r}")
        return low

    return parse


SCHEMA = {
    "master_seed": (_seed, 0),
    "radar.carrier_frequency": (float, 2.45e9),
    "radar.sample_rate": (float, 8192.0),
    "radar.target_range": (float, 1.5),
    "radar.propagation_speed": (float, 3.0e8),
    "synth.duration": (float, 2.0),
    "synth.per_class": (int, 8),
    "stft.window_length": (int, 512),
    "stft.hop": (int, 128),
    "stft.fft_length": (int, 512),
    "stft.window_kind": (_enum(("rectangular", "hann", "hamming")), "hann"),
    "stft.floor_db": (float, -80.0),
    "stft.display_max_hz": (float, 1024.0),
    "stft.image_size": (int, 256),
    "dataset.enhance_contrast": (_bool, True),
    "augmentation.per_original": (int, 10),
    "augmentation.output_resolutions": (_int_list, (64, 96, 128, 256)),
    "augmentation.transforms": (_str_list, ("rotate", "flip", "translate", "scale")),
    "augmentation.max_rotation_deg": (float, 10.0),
    "augmentation.max_translation": (int, 8),
    "augmentation.scale_low": (float, 0.9),
    "augmentation.scale_high": (float, 1.1),
    "train.epochs": (int, 30),
    "train.batch_size": (int, 16),
    "train.learning_rate": (float, 1e-3),
    "train.optimizer": (_enum(("adam", "sgd")), "adam"),
    "train.beta1": (float, 0.9),
    "train.beta2": (float, 0.999),
    "train.epsilon": (float, 1e-8),
    "train.seed": (_seed, None),
    "train.canonical_input": (int, 64),
    "split.train_fraction": (float, 0.8),
    "split.val_fraction": (float, 0.1),
    "split.test_fraction": (float, 0.1),
    "split.stratified": (_bool, True),
    "paths.out": (str, "out"),
}

_MATERIAL_FIELDS = {
    "vibration_frequency": float,
    "reflectivity": float,
    "spectral_jitter": float,
    "snr_db": float,
    "harmonics": _harmonics,
}


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8
    val_fraction: float = 0.1
    test_fraction: float = 0.1
    stratified: bool = True

    def __post_init__(self):
        fr = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(not f > 0 for f in fr):
            raise ConfigError("split fractions must be positive")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions sum to {sum(fr)!r}, not 1")

    def counts(self, n):
        """``(train, val, test)`` sizes: val and test round up, train takes the rest."""
        n_val = math.ceil(n * self.val_fraction - 1e-9)
        n_test = math.ceil(n * self.test_fraction - 1e-9)
        n_train = n - n_val - n_test
        if n_train < 0:
            raise ConfigError(f"cannot split {n} samples with fractions {self}")
        return n_train, n_val, n_test


@dataclass(frozen=True)
class PipelineConfig:
    values: dict = field(default_factory=dict)
    material_overrides: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values.get(key, SCHEMA[key][1])

    @property
    def master_seed(self):
        return self["master_seed"]

    def with_seed(self, seed):
        values = dict(self.values)
        values["master_seed"] = seed
        return replace(self, values=values)

    def with_values(self, **kv):
        values = dict(self.values)
        for dotted, v in kv.items():
            key = dotted.replace("__", ".")
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}")
            values[key] = v
        return replace(self, values=values)

    @property
    def radar(self):
        return RadarParams(
            carrier_frequency=self["radar.carrier_frequency"],
            sample_rate=self["radar.sample_rate"],
            target_range=self["radar.target_range"],
            propagation_speed=self["radar.propagation_speed"],
        )

    def material(self, name):
        m = Material.parse(name)
        kw = dict(self.material_overrides.get(m, {}))
        if "harmonics" in kw:
            kw["harmonic_displacements"] = kw.pop("harmonics")
        return material_profile(m, **kw)

    @property
    def stft(self):
        return StftConfig(
            self["stft.window_length"], self["stft.hop"], self["stft.fft_length"], Window(self["stft.window_kind"])
        )

    @property
    def augmentation(self):
        pool = []
        for name in self["augmentation.transforms"]:
            if name == "rotate":
                pool.append(RotateSmall(self["augmentation.max_rotation_deg"]))
            elif name == "flip":
                pool.append(FlipHorizontal())
            elif name == "translate":
                t = self["augmentation.max_translation"]
                pool.append(TranslatePixels(t, t))
            elif name == "scale":
                pool.append(ScaleFactor(self["augmentation.scale_low"], self["augmentation.scale_high"]))
        return AugmentationSpec(
            per_original=self["augmentation.per_original"],
            transform_pool=tuple(pool),
            output_resolutions=self["augmentation.output_resolutions"],
            seed=derive_seed(self.master_seed, "augment"),
        )

    @property
    def train(self):
        seed = self["train.seed"]
        if seed is None:
            seed = derive_seed(self.master_seed, "train")
        return TrainConfig(
            epochs=self["train.epochs"],
            batch_size=self["train.batch_size"],
            learning_rate=self["train.learning_rate"],
            optimizer=Optimizer(self["train.optimizer"]),
            beta1=self["train.beta1"],
            beta2=self["train.beta2"],
            epsilon=self["train.epsilon"],
            seed=seed,
            canonical_input=self["train.canonical_input"],
        )

    @property
    def split(self):
        return SplitConfig(
            self["split.train_fraction"],
            self["split.val_fraction"],
            self["split.test_fraction"],
            self["split.stratified"],
        )

    def validate(self):
        """Build every typed section once so bad combinations fail early."""
        try:
            self.radar
            for m in Material:
                self.material(m)
            self.stft
            self.augmentation
            self.train
            self.split
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self["synth.per_class"] < 1:
            raise ConfigError("synth.per_class must be >= 1")
        if self["stft.floor_db"] >= 0:
            raise ConfigError("stft.floor_db must be negative")
        if self["stft.image_size"] < 8:
            raise ConfigError("stft.image_size must be >= 8")
        unknown = set(self["augmentation.transforms"]) - {"rotate", "flip", "translate", "scale"}
        if unknown:
            raise ConfigError(f"unknown augmentation transforms: {sorted(unknown)}")
        return self


def parse_config(text):
    """Parse config text; errors carry the 1-based line number."""
    values = {}
    materials = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key.startswith("materials."):
            parts = key.split(".")
            if len(parts) != 3 or parts[2] not in _MATERIAL_FIELDS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            try:
                material = Material.parse(parts[1])
                parsed = _MATERIAL_FIELDS[parts[2]](value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {key}: {exc}") from None
            materials.setdefault(material, {})[parts[2]] = parsed
            continue
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = SCHEMA[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None
    return PipelineConfig(values, materials).validate()


def load_config(path):
    if path is None:
        return PipelineConfig().validate()
    with open(path) as fh:
        return parse_config(fh.read())
