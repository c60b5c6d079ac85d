"""Experiment configuration: JSON loading, validation, and gain resolution.

Configs are flat JSON files with explicit matrix literals (nested arrays of
decimals) so fixtures stay hand-auditable.  A config names either a preset or
an inline system; command-line flags override individual scalar fields.  The
seed is mandatory — every run must be reproducible from its config alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .noise import NOISE_KINDS, NoiseSpec
from .presets import PRESET_NAMES, get_preset
from .systems import CostWeights, GainSet, LinearSystem, user_gains
from .synthesis import synthesize_gains
from .filtering import FILTER_MODES


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


@dataclass
class ExperimentConfig:
    """Everything one run needs: plant, cost, gain policy, and run parameters."""

    system: LinearSystem
    cost: CostWeights
    seed: int
    preset: str | None = None
    gains_mode: str = "synthesize"
    user_l: np.ndarray | None = None
    user_k: np.ndarray | None = None
    window: int = 4
    eps: float = 0.1
    beta: float | None = None
    horizon: int = 200
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    mode: str = "kernel"
    beta_grid: list | None = None
    eps_grid: list | None = None
    out: str | None = None

    def __post_init__(self):
        if self.gains_mode not in ("synthesize", "user"):
            raise ConfigError("gains mode must be 'synthesize' or 'user'")
        if self.gains_mode == "user" and self.user_l is None:
            raise ConfigError("user gain mode requires an L matrix")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if not self.eps > 0.0:
            raise ConfigError("eps must be positive")
        if self.beta is not None and not self.beta > 0.0:
            raise ConfigError("beta must be positive when given")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.mode not in FILTER_MODES:
            raise ConfigError(f"mode must be one of {FILTER_MODES}")
        if self.beta_grid is not None and self.eps_grid is not None:
            raise ConfigError("give beta_grid or eps_grid, not both")
        for name in ("beta_grid", "eps_grid"):
            grid = getattr(self, name)
            if grid is not None:
                if len(grid) == 0 or any(not g > 0.0 for g in grid):
                    raise ConfigError(f"{name} must be a nonempty list of positive numbers")

    def resolve_gains(self) -> GainSet:
        """Synthesized or validated user-supplied gains, per the configured mode."""
        if self.gains_mode == "user":
            return user_gains(self.system, self.user_l, self.user_k)
        if self.system.m > 0:
            return synthesize_gains(self.system, self.cost)
        from .synthesis import kalman_gain

        return kalman_gain(self.system)


def _matrix(raw, name: str) -> np.ndarray:
    try:
        return np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} is not a numeric matrix literal: {exc}") from exc


def _build_system(raw: dict) -> tuple[LinearSystem, CostWeights | None, str | None]:
    preset = raw.get("preset")
    if preset is not None:
        if "system" in raw:
            raise ConfigError("give a preset name or an inline system, not both")
        if preset not in PRESET_NAMES:
            raise ConfigError(f"unknown preset {preset!r}; choose from {PRESET_NAMES}")
        sys, cost = get_preset(preset)
        return sys, cost, preset
    spec = raw.get("system")
    if spec is None:
        raise ConfigError("config needs a 'preset' name or an inline 'system'")
    for key in ("A", "C", "x0"):
        if key not in spec:
            raise ConfigError(f"inline system is missing {key!r}")
    a = _matrix(spec["A"], "A")
    n = a.shape[0] if a.ndim == 2 else 0
    b = _matrix(spec["B"], "B") if "B" in spec else np.zeros((n, 0))
    w = _matrix(spec["W"], "W") if "W" in spec else np.eye(n)
    c = _matrix(spec["C"], "C")
    v = _matrix(spec["V"], "V") if "V" in spec else np.eye(c.shape[0] if c.ndim == 2 else 1)
    try:
        sys = LinearSystem(trans=a, input_map=b, obs_map=c, w_cov=w, v_cov=v,
                           x0=_matrix(spec["x0"], "x0"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return sys, None, None


def _build_cost(raw: dict, sys: LinearSystem, preset_cost: CostWeights | None) -> CostWeights:
    spec = raw.get("cost")
    if spec is None:
        if preset_cost is not None:
            return preset_cost
        m = max(sys.m, 1)
        return CostWeights(state_weight=np.eye(sys.n), control_weight=np.eye(m))
    try:
        return CostWeights(state_weight=_matrix(spec["Q"], "Q"),
                           control_weight=_matrix(spec["R"], "R"))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid cost weights: {exc}") from exc


def _build_noise(raw: dict) -> NoiseSpec:
    spec = raw.get("noise")
    if spec is None:
        return NoiseSpec()
    kind = spec.get("kind", "gaussian")
    if kind not in NOISE_KINDS:
        raise ConfigError(f"noise kind must be one of {NOISE_KINDS}")
    try:
        return NoiseSpec(kind=kind, scale=float(spec.get("scale", 1.0)),
                         clip=float(spec.get("clip", 5.0)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Parse a JSON config (or the scalar-preset default) and apply CLI overrides.

    Recognized overrides: seed, beta, eps, horizon, window, out, mode.
    Passing None for an override leaves the file value in place.
    """
    if path is None:
        raw = {"preset": "scalar"}
    else:
        try:
            with open(path, "r") as handle:
                raw = json.load(handle)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    sys, preset_cost, preset = _build_system(raw)
    cost = _build_cost(raw, sys, preset_cost)

    gains_raw = raw.get("gains", {"mode": "synthesize"})
    gains_mode = gains_raw.get("mode", "synthesize")
    user_l = _matrix(gains_raw["L"], "L") if "L" in gains_raw else None
    user_k = _matrix(gains_raw["K"], "K") if "K" in gains_raw else None

    seed = overrides.get("seed")
    if seed is None:
        seed = raw.get("seed")
    if seed is None:
        raise ConfigError("seed is required: set 'seed' in the config or pass --seed")

    def pick(key, default):
        value = overrides.get(key)
        if value is not None:
            return value
        return raw.get(key, default)

    try:
        return ExperimentConfig(
            system=sys,
            cost=cost,
            seed=int(seed),
            preset=preset,
            gains_mode=gains_mode,
            user_l=user_l,
            user_k=user_k,
            window=int(pick("window", 4)),
            eps=float(pick("eps", 0.1)),
            beta=None if pick("beta", None) is None else float(pick("beta", None)),
            horizon=int(pick("horizon", 200)),
            noise=_build_noise(raw),
            mode=str(pick("mode", "kernel")),
            beta_grid=raw.get("beta_grid"),
            eps_grid=raw.get("eps_grid"),
            out=pick("out", None),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
