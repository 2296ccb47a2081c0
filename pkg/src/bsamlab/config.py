"""Line-oriented `key = value` experiment configuration.

Dotted keys group settings (model.*, data.*, opt.*, train.*, probe.*,
conv.*). `#` starts a comment. Unknown keys, missing required keys and
invariant violations are reported with the offending key and line.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import models, optimizers
from .errors import ConfigError, ParseError


def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ValueError(s)


def _parse_floats(s: str):
    return tuple(float(x) for x in s.split(","))


def _parse_ints(s: str):
    return tuple(int(x) for x in s.split(","))


# key -> (converter, default); required keys have the sentinel _REQUIRED
_REQUIRED = object()

_SCHEMA = {
    "run.id": (str, None),
    "model.kind": (str, "mlp"),
    "model.layers": (_parse_ints, (2, 16, 2)),
    "model.classes": (int, 2),
    "model.h_diag": (_parse_floats, (1.0,)),
    "model.w_star": (_parse_floats, None),
    "model.a": (float, 0.0),
    "model.b": (float, 1.0),
    "model.kappa_sharp": (float, 100.0),
    "model.kappa_flat": (float, 1.0),
    "data.kind": (str, "blobs"),
    "data.n": (int, 256),
    "data.d": (int, 2),
    "data.separation": (float, 6.0),
    "data.noise_rate": (float, 0.0),
    "data.test_fraction": (float, 0.2),
    "data.grad_noise": (float, 0.0),
    "data.path": (str, None),
    "data.images": (str, None),
    "data.labels": (str, None),
    "opt.variant": (str, _REQUIRED),
    "opt.lr_max": (float, 0.05),
    "opt.lr_min": (float, 0.0),
    "opt.momentum": (float, 0.9),
    "opt.weight_decay": (float, 0.001),
    "opt.rho_max": (float, 0.05),
    "opt.rho_min_hat": (float, 0.05),
    "opt.rho_min_check": (float, 0.0),
    "opt.p_norm": (float, 2.0),
    "opt.zero_grad_eps": (float, 1e-12),
    "train.epochs": (int, 30),
    "train.batch_size": (int, 32),
    "train.steps": (int, 1000),
    "train.seeds": (_parse_ints, (0,)),
    "train.trace": (_parse_bool, False),
    "train.init": (_parse_floats, None),
    "probe.k": (int, 3),
    "probe.iters": (int, 200),
    "probe.tol": (float, 1e-6),
    "probe.rho": (float, 0.05),
    "probe.grid": (int, 5),
    "probe.extent": (float, 1.0),
    "probe.cap": (int, 2048),
    "probe.checkpoint": (str, None),
    "conv.coeff": (float, 1.0),
    "conv.horizons": (_parse_ints, (100, 316, 1000, 3162, 10000)),
}


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=dict)
    text: str = ""

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def run_id(self) -> str:
        return self.raw["run.id"] or self.raw["opt.variant"]

    def model_spec(self) -> models.ModelSpec:
        kind = self.raw["model.kind"]
        if kind == models.MLP:
            return models.mlp_spec(self.raw["model.layers"], self.raw["model.classes"])
        if kind == models.QUADRATIC:
            return models.quadratic_spec(np.diag(self.raw["model.h_diag"]),
                                         self.raw["model.w_star"])
        if kind == models.DOUBLE_WELL:
            return models.double_well_spec(
                self.raw["model.a"], self.raw["model.b"],
                self.raw["model.kappa_sharp"], self.raw["model.kappa_flat"])
        raise ConfigError(f"unknown model.kind {kind!r}")

    def lr_schedule(self, total_steps: int) -> optimizers.LrSchedule:
        return optimizers.LrSchedule(self.raw["opt.lr_max"], self.raw["opt.lr_min"],
                                     total_steps)

    def rho_min_schedule(self) -> optimizers.RhoMinSchedule:
        return optimizers.RhoMinSchedule(self.raw["opt.rho_min_hat"],
                                         self.raw["opt.rho_min_check"])

    def optimizer_state(self, params, total_steps: int) -> optimizers.OptimizerState:
        return optimizers.make_state(
            self.raw["opt.variant"], params, self.lr_schedule(total_steps),
            self.rho_min_schedule(),
            momentum=self.raw["opt.momentum"],
            weight_decay=self.raw["opt.weight_decay"],
            rho_max=self.raw["opt.rho_max"],
            p_norm=self.raw["opt.p_norm"],
            zero_grad_eps=self.raw["opt.zero_grad_eps"],
        )


def _validate(cfg: ExperimentConfig):
    r = cfg.raw
    if r["opt.variant"] not in optimizers.VARIANTS:
        raise ConfigError(f"opt.variant: unknown variant {r['opt.variant']!r}")
    if r["opt.lr_max"] < r["opt.lr_min"] or r["opt.lr_min"] < 0:
        raise ConfigError("opt.lr_max/opt.lr_min: need lr_max >= lr_min >= 0")
    if r["opt.rho_min_hat"] < r["opt.rho_min_check"] or r["opt.rho_min_check"] < 0:
        raise ConfigError("opt.rho_min_hat/opt.rho_min_check: need hat >= check >= 0")
    if r["opt.rho_max"] < 0:
        raise ConfigError("opt.rho_max: must be >= 0")
    if r["opt.p_norm"] <= 1:
        raise ConfigError("opt.p_norm: must exceed 1")
    if not r["train.seeds"]:
        raise ConfigError("train.seeds: must be non-empty")
    if r["train.epochs"] < 1 or r["train.batch_size"] < 1 or r["train.steps"] < 1:
        raise ConfigError("train.*: epochs, batch_size and steps must be >= 1")
    if not 0.0 <= r["data.noise_rate"] <= 1.0:
        raise ConfigError("data.noise_rate: must be in [0, 1]")
    if not 0.0 < r["data.test_fraction"] < 1.0:
        raise ConfigError("data.test_fraction: must be in (0, 1)")
    cfg.model_spec()  # raises ConfigError on inconsistent model settings


def parse_config(text: str) -> ExperimentConfig:
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"line {lineno}: expected `key = value`, got {line!r}")
        key, _, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SCHEMA:
            raise ParseError(f"line {lineno}: unknown key {key!r}")
        conv, _ = _SCHEMA[key]
        try:
            seen[key] = conv(value)
        except ValueError:
            raise ParseError(
                f"line {lineno}: bad value {value!r} for key {key!r}"
            ) from None
    raw = {}
    for key, (_, default) in _SCHEMA.items():
        if key in seen:
            raw[key] = seen[key]
        elif default is _REQUIRED:
            raise ParseError(f"missing required key {key!r}")
        else:
            raw[key] = default
    cfg = ExperimentConfig(raw=raw, text=text)
    _validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
