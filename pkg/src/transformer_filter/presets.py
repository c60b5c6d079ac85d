"""Built-in example systems anchoring the experiments and the test suite."""

from __future__ import annotations

import math

import numpy as np

from .systems import CostWeights, LinearSystem

PRESET_NAMES = ("scalar", "oscillator2", "chain3")


def scalar_system() -> tuple[LinearSystem, CostWeights]:
    """One-state plant with unit weights; every synthesis quantity is hand-checkable."""
    sys = LinearSystem(
        trans=[[0.5]],
        input_map=[[1.0]],
        obs_map=[[1.0]],
        w_cov=[[1.0]],
        v_cov=[[1.0]],
        x0=[1.0],
    )
    cost = CostWeights(state_weight=[[1.0]], control_weight=[[1.0]])
    return sys, cost


def oscillator_system() -> tuple[LinearSystem, CostWeights]:
    """Damped rotation (radius 0.9, quarter-pi per step), actuated and observed on one axis."""
    c = 0.9 * math.cos(math.pi / 4.0)
    s = 0.9 * math.sin(math.pi / 4.0)
    sys = LinearSystem(
        trans=[[c, -s], [s, c]],
        input_map=[[0.0], [1.0]],
        obs_map=[[1.0, 0.0]],
        w_cov=np.eye(2),
        v_cov=[[1.0]],
        x0=[1.0, 1.0],
    )
    cost = CostWeights(state_weight=np.eye(2), control_weight=[[1.0]])
    return sys, cost


def chain_system() -> tuple[LinearSystem, CostWeights]:
    """Three-state shift chain: input enters at the tail, only the head is measured."""
    sys = LinearSystem(
        trans=[[0.9, 1.0, 0.0], [0.0, 0.9, 1.0], [0.0, 0.0, 0.9]],
        input_map=[[0.0], [0.0], [1.0]],
        obs_map=[[1.0, 0.0, 0.0]],
        w_cov=np.eye(3),
        v_cov=[[1.0]],
        x0=[1.0, 1.0, 1.0],
    )
    cost = CostWeights(state_weight=np.eye(3), control_weight=[[1.0]])
    return sys, cost


_FACTORIES = {
    "scalar": scalar_system,
    "oscillator2": oscillator_system,
    "chain3": chain_system,
}


def get_preset(name: str) -> tuple[LinearSystem, CostWeights]:
    """Look up a preset by name; raises with the valid names on a miss."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}") from None
    return factory()
