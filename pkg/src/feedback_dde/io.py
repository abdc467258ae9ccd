"""JSON model/config files and CSV time series."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np

from .bounds import BoundsBox, DegenerateBoxError
from .model import (
    DecaySpec,
    ModelSpec,
    ModelValidationError,
    Production1Spec,
    Production2Spec,
    TimeProfile,
    preset_testosterone,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "model_to_dict",
    "model_from_dict",
    "load_model",
    "load_config",
    "config_from_dict",
    "write_json",
    "write_csv",
    "read_csv",
]

PRESETS = {"testosterone": preset_testosterone}


class ConfigError(ValueError):
    pass


def _check_keys(d: dict, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {sorted(extra)}")


def _profile_from(d: dict | None, T: float, where: str) -> TimeProfile:
    d = {} if d is None else d
    _check_keys(d, {"base", "amplitude", "phase", "period"}, where)
    return TimeProfile(d.get("base", 1.0), d.get("amplitude", 0.0), d.get("phase", 0.0), d.get("period", T))


def _p1_from(d: dict, T: float, where: str) -> Production1Spec:
    _check_keys(d, {"family", "profile", "kappa", "m"}, where)
    if "family" not in d:
        raise ConfigError(f"{where}: missing 'family'")
    return Production1Spec(d["family"], _profile_from(d.get("profile"), T, f"{where}.profile"),
                           d.get("kappa", 1.0), d.get("m", 1))


def _p2_from(d: dict, T: float, where: str) -> Production2Spec:
    _check_keys(d, {"profile", "up", "kappa_w", "m_w", "repressed"}, where)
    up = d.get("up", {"family": "linear_gain"})
    return Production2Spec(
        _profile_from(d.get("profile"), T, f"{where}.profile"),
        _p1_from(up, T, f"{where}.up"),
        d.get("kappa_w", 1.0),
        d.get("m_w", 1),
        d.get("repressed", True),
    )


def _decay_from(d: dict, where: str) -> DecaySpec:
    _check_keys(d, {"family", "beta", "q", "kappa"}, where)
    return DecaySpec(d.get("family", "linear"), d.get("beta", 1.0), d.get("q", 1.0), d.get("kappa", 1.0))


def model_from_dict(d: dict) -> ModelSpec:
    """Build a :class:`ModelSpec` from its JSON mirror. Profile periods default to ``T``."""
    _check_keys(d, {"n", "T", "tau", "eps", "F", "G", "H", "b"}, "model")
    missing = {"n", "T", "tau", "eps", "F", "H", "b"} - set(d)
    if missing:
        raise ConfigError(f"model: missing field(s) {sorted(missing)}")
    T = d["T"]
    try:
        return ModelSpec(
            n=d["n"],
            T=T,
            tau=tuple(d["tau"]),
            eps=tuple(d["eps"]),
            F=_p1_from(d["F"], T, "model.F"),
            G=tuple(_p2_from(g, T, f"model.G[{i}]") for i, g in enumerate(d.get("G", []))),
            H=_p1_from(d["H"], T, "model.H"),
            b=tuple(_decay_from(b, f"model.b[{i}]") for i, b in enumerate(d["b"])),
        )
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"model: {exc}") from exc


def model_to_dict(model: ModelSpec) -> dict:
    return _jsonable(asdict(model))


def load_model(path: str | Path) -> ModelSpec:
    return model_from_dict(json.loads(Path(path).read_text()))


@dataclass
class RunConfig:
    """Everything one CLI invocation needs; ``to_dict`` echoes it with defaults filled in."""

    model: ModelSpec
    preset: dict | None = None
    delta: float = 0.05
    grid: int = 64
    quad_nodes: int = 256
    face_samples: int = 9
    lambda_steps: int = 10
    step: float | None = None
    tol: float = 1e-8
    max_periods: int = 2000
    lam: float = 1.0
    horizon: float | None = None
    history: list[float] | None = None
    box: BoundsBox | None = None
    seed: int = 0
    out: str = "out"

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta!r}")
        if self.grid < 16:
            raise ConfigError("grid must be at least 16")
        if self.quad_nodes < 2 or self.quad_nodes % 2:
            raise ConfigError("quad_nodes must be a positive even integer")
        if self.face_samples < 2 or self.lambda_steps < 1:
            raise ConfigError("face_samples must be >= 2 and lambda_steps >= 1")
        if self.step is not None and not self.step > 0:
            raise ConfigError("step must be positive")
        if not self.tol > 0 or self.max_periods < 1:
            raise ConfigError("tol must be positive and max_periods >= 1")
        if not 0 < self.lam <= 1:
            raise ConfigError(f"lambda must lie in (0, 1], got {self.lam!r}")
        if self.horizon is not None and self.horizon < 0:
            raise ConfigError("horizon must be nonnegative")
        if self.history is not None and len(self.history) != self.model.dim:
            raise ConfigError(f"history must have {self.model.dim} entries")
        if self.box is not None and len(self.box.m) != self.model.dim:
            raise ConfigError(f"box must have {self.model.dim} entries per bound")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"model": model_to_dict(self.model)}
        if self.preset is not None:
            d["source"] = {"preset": self.preset}
        for f in fields(self):
            if f.name in ("model", "preset", "box", "lam"):
                continue
            d[f.name] = getattr(self, f.name)
        d["lambda"] = self.lam
        d["box"] = None if self.box is None else {"m": list(self.box.m), "M": list(self.box.M)}
        return d


_RUN_KEYS = {"delta", "grid", "quad_nodes", "face_samples", "lambda_steps", "step", "tol", "max_periods",
             "lambda", "horizon", "history", "box", "seed", "out"}


def config_from_dict(d: dict) -> RunConfig:
    """Parse a run config; a bare model document (has ``n``) is accepted too."""
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    if "n" in d:
        d = {"model": d}
    # "source" records the preset an expanded model came from
    _check_keys(d, _RUN_KEYS | {"model", "preset", "source"}, "config")
    try:
        if "model" in d and "preset" in d:
            raise ConfigError("config: give either 'model' or 'preset', not both")
        if "model" in d:
            model = model_from_dict(d["model"])
            source = d.get("source") or {}
            preset = source.get("preset") if isinstance(source, dict) else None
        elif "preset" in d:
            preset = d["preset"]
            _check_keys(preset, {"name", "params"}, "config.preset")
            name = preset.get("name")
            if name not in PRESETS:
                raise ConfigError(f"config.preset: unknown preset {name!r}; known: {sorted(PRESETS)}")
            model = PRESETS[name](**preset.get("params", {}))
        else:
            raise ConfigError("config: missing 'model' or 'preset'")
        box = d.get("box")
        if box is not None:
            _check_keys(box, {"m", "M", "delta"}, "config.box")
            box = BoundsBox(tuple(box["m"]), tuple(box["M"]), box.get("delta", d.get("delta", 0.05)))
        kwargs = {k: d[k] for k in _RUN_KEYS - {"lambda", "box"} if k in d}
        if "lambda" in d:
            kwargs["lam"] = d["lambda"]
        return RunConfig(model=model, preset=preset, box=box, **kwargs)
    except (ConfigError, DegenerateBoxError):
        raise
    except (ModelValidationError, TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path: str | Path) -> RunConfig:
    text = Path(path).read_text()
    if not text.strip():
        raise ConfigError(f"{path}: empty file")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON parse error: {exc}") from exc
    return config_from_dict(data)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_json(path: str | Path, data: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=False) + "\n")
    return path


def write_csv(path: str | Path, times, states) -> Path:
    """Write ``t, x0, ..., xn`` rows with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    states = np.atleast_2d(states)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{k}" for k in range(states.shape[1])])
        for t, row in zip(times, states):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])
    return path


def read_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:]
