"""Flat ``key=value`` run configuration.

Lines starting with ``#`` and blank lines are ignored. Every key has a
default; unknown keys are rejected.
"""

from __future__ import annotations

from pathlib import Path

from .fit import DEFAULT_FD_STEP, DEFAULT_LEARNABLE, FitConfig
from .losses import LossWeights
from .raster import CannyConfig, ProjectionSpec
from .refine import RefineConfig
from .strands import ValidationError


class ConfigError(ValidationError):
    pass


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _names(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_str(text: str):
    return text.strip() or None


# key -> (parser, default). Defaults are the reference training setup.
KEYS = {
    # optimizer
    "epochs": (int, 200),
    "lr": (float, 1e-4),
    "lr_drop_epochs": (_ints, (100, 133)),
    "lr_drop_factor": (float, 0.5),
    "adam_beta1": (float, 0.9),
    "adam_beta2": (float, 0.999),
    "adam_eps": (float, 1e-8),
    "learnable": (_names, DEFAULT_LEARNABLE),
    "seed": (int, 0),
    "n_points": (int, 0),  # 0: one braid point per mid-line pixel
    "n_bunches": (int, 3),
    "softness": (float, 1.0),
    **{f"fd_step_{name}": (float, h) for name, h in DEFAULT_FD_STEP.items()},
    # loss weights
    "lambda_reg_b": (float, 1.0),
    "lambda_proj": (float, 1e-4),
    "lambda_reg": (float, 1e-3),
    "bce_epsilon": (float, 1e-7),
    "b_anchor": (float, 10.0),
    "lambda_pc": (float, 1.0),
    # refinement
    "inclusion_factor": (float, 1.2),
    "downsample_keep_every": (int, 2),
    "smooth_window": (int, 5),
    "balance": (_bool, True),
    "mask_threshold": (float, 0.5),
    "radius_window": (int, 9),
    # edges
    "canny_sigma": (float, 1.4),
    "canny_low": (float, 0.1),
    "canny_high": (float, 0.3),
    # projection
    "width": (int, 256),
    "height": (int, 512),
    # synthetic braid (synth / simulate)
    "a": (float, 20.0),
    "b": (float, 10.0),
    "w": (float, 1.0),
    "t_step": (float, 0.05),
    "radius": (float, 7.0),
    "shift_z": (float, 0.0),
    "noise_sigma": (float, 0.5),
    "strands_per_bunch": (int, 6),
    # paths
    "coarse": (_opt_str, None),
    "mask": (_opt_str, None),
    "image": (_opt_str, None),
    "edges": (_opt_str, None),
    "midline": (_opt_str, None),
    "params": (_opt_str, None),
    "out_dir": (_opt_str, "."),
}


class RunConfig(dict):
    """Mapping of every known key to its parsed value."""

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({k: default for k, (_, default) in KEYS.items()})

    def set(self, key: str, text: str) -> None:
        key = key.strip()
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        parser = KEYS[key][0]
        try:
            self[key] = parser(text.strip())
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from None

    def update_from_lines(self, lines, origin: str = "<config>") -> None:
        for number, raw in enumerate(lines, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{origin}:{number}: expected key=value")
            key, value = line.split("=", 1)
            self.set(key, value)

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        cfg = cls.defaults()
        if path is not None:
            cfg.update_from_lines(Path(path).read_text().splitlines(), str(path))
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, value = item.split("=", 1)
            cfg.set(key, value)
        return cfg

    def fit_config(self) -> FitConfig:
        return FitConfig(
            epochs=self["epochs"],
            lr=self["lr"],
            lr_drop_epochs=self["lr_drop_epochs"],
            lr_drop_factor=self["lr_drop_factor"],
            adam_beta1=self["adam_beta1"],
            adam_beta2=self["adam_beta2"],
            adam_eps=self["adam_eps"],
            fd_step={name: self[f"fd_step_{name}"] for name in DEFAULT_FD_STEP},
            learnable=self["learnable"],
            seed=self["seed"],
            n_points=self["n_points"] or None,
            n_bunches=self["n_bunches"],
            softness=self["softness"],
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            lambda_reg_b=self["lambda_reg_b"],
            lambda_proj=self["lambda_proj"],
            lambda_reg=self["lambda_reg"],
            bce_epsilon=self["bce_epsilon"],
            b_anchor=self["b_anchor"],
            lambda_pc=self["lambda_pc"],
        )

    def refine_config(self) -> RefineConfig:
        return RefineConfig(
            inclusion_factor=self["inclusion_factor"],
            downsample_keep_every=self["downsample_keep_every"],
            smooth_window=self["smooth_window"],
            balance=self["balance"],
            mask_threshold=self["mask_threshold"],
        )

    def canny_config(self) -> CannyConfig:
        return CannyConfig(self["canny_sigma"], self["canny_low"], self["canny_high"])

    def projection(self) -> ProjectionSpec:
        return ProjectionSpec(self["width"], self["height"])

    def dump(self) -> str:
        """The config as key=value text, keys in declaration order."""
        lines = []
        for key in KEYS:
            value = self[key]
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif value is None:
                value = ""
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"
