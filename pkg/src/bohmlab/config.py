"""Experiment configuration: an INI text format with typed sections.

Floats are written with ``repr`` so that ``parse_config(serialize_config(c)) == c``
holds bit for bit.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

from .errors import ConfigError

__all__ = ["ExperimentConfig", "parse_config", "serialize_config", "load_config", "SCENARIO_IDS"]

SCENARIO_IDS = ("plane_wave", "free_gaussian", "harmonic_coherent", "wkb_single", "two_wave", "packet_c3b", "cone")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    x_min: float
    x_max: float
    n: int
    eps: tuple
    T: float
    dt: float
    store_every: int = 10
    seed: int = 0
    output: str = "out"
    params: dict = field(default_factory=dict)
    dictionary: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        merged = {}
        for key in ("params", "dictionary", "tolerances"):
            if key in kw:
                merged[key] = {**getattr(self, key), **kw.pop(key)}
        cfg = replace(self, **kw, **merged)
        from .scenarios import validate_config  # local import: scenarios depend on this module

        validate_config(cfg)
        return cfg

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


def _floats(text: str, key: str) -> tuple:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected numbers, got {text!r}") from exc


def _float(sec, key, default=None):
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing key '{key}'")
        return default
    try:
        return float(sec[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {sec[key]!r}") from exc


def _int(sec, key, default=None):
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing key '{key}'")
        return default
    try:
        return int(sec[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {sec[key]!r}") from exc


def _typed_section(cp, name) -> dict:
    out = {}
    if not cp.has_section(name):
        return out
    for key, raw in cp[name].items():
        vals = _floats(raw, f"{name}.{key}")
        out[key] = vals[0] if len(vals) == 1 else vals
    return out


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; defaults for the scenario fill every omitted key."""
    from .scenarios import CATALOG, validate_config

    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if not cp.has_section("experiment"):
        raise ConfigError("missing section [experiment]")
    ex = cp["experiment"]
    scenario = ex.get("scenario", "").strip()
    if scenario not in CATALOG:
        raise ConfigError(f"scenario: unknown scenario {scenario!r}")
    base = CATALOG[scenario].defaults
    grid = cp["grid"] if cp.has_section("grid") else {}
    eps = _floats(ex["eps"], "eps") if "eps" in ex else base.eps
    params = {**base.params, **_typed_section(cp, "params")}
    dictionary = {**base.dictionary, **_typed_section(cp, "dictionary")}
    tolerances = {**base.tolerances, **_typed_section(cp, "tolerances")}
    cfg = ExperimentConfig(
        scenario=scenario,
        x_min=_float(grid, "x_min", base.x_min),
        x_max=_float(grid, "x_max", base.x_max),
        n=_int(grid, "n", base.n),
        eps=eps,
        T=_float(ex, "t", base.T),
        dt=_float(ex, "dt", base.dt),
        store_every=_int(ex, "store_every", base.store_every),
        seed=_int(ex, "seed", base.seed),
        output=ex.get("output", base.output),
        params=params,
        dictionary=dictionary,
        tolerances=tolerances,
    )
    validate_config(cfg)
    return cfg


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return repr(float(v))


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = [
        "[experiment]",
        f"scenario = {cfg.scenario}",
        f"eps = {_fmt(tuple(cfg.eps))}",
        f"t = {_fmt(cfg.T)}",
        f"dt = {_fmt(cfg.dt)}",
        f"store_every = {cfg.store_every}",
        f"seed = {cfg.seed}",
        f"output = {cfg.output}",
        "",
        "[grid]",
        f"x_min = {_fmt(cfg.x_min)}",
        f"x_max = {_fmt(cfg.x_max)}",
        f"n = {cfg.n}",
    ]
    for name in ("params", "dictionary", "tolerances"):
        sec = getattr(cfg, name)
        if sec:
            lines += ["", f"[{name}]"] + [f"{k} = {_fmt(v)}" for k, v in sorted(sec.items())]
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())
