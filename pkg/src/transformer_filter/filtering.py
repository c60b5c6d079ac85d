"""Windowed softmax filtering and its comparison against the optimal linear filter.

The reference filter is the strictly-causal prediction recursion
``est[t] = (A - L C) est[t-1] + L y[t-1]``.  The softmax-window filter keeps
the last-H one-step images ("interpolants") of its own past estimates under
that same map and outputs their softmax-weighted combination, with weights
set by squared distances to the newest interpolant at temperature beta.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .attention import (
    AttentionParams,
    KernelSpec,
    attention_forward,
    embed_phi,
    kernel_attention_params,
    softmax_weights,
)
from .linalg import as_vector
from .noise import GENERATOR_ID, DisturbanceSource
from .records import TrajectoryRecord
from .systems import GainSet, LinearSystem

FILTER_MODES = ("kernel", "attention")


@dataclass(frozen=True)
class FilterConfig:
    """Window length, temperature, estimator gain, and evaluation mode.

    ``kernel`` computes the softmax weights directly from interpolant
    distances; ``attention`` routes the identical window through an embedded
    softmax self-attention block (a cross-check, exact up to rounding for
    moderate temperatures).
    """

    gains: GainSet
    window: int = 8
    beta: float = 1.0
    mode: str = "kernel"

    def __post_init__(self):
        if not self.gains.has_estimator:
            raise ValueError("filter configuration requires an estimator gain")
        if int(self.window) != self.window or self.window < 1:
            raise ValueError("window must be an integer >= 1")
        object.__setattr__(self, "window", int(self.window))
        if not (np.isfinite(self.beta) and self.beta > 0.0):
            raise ValueError("beta must be finite and positive")
        if self.mode not in FILTER_MODES:
            raise ValueError(f"mode must be one of {FILTER_MODES}, got {self.mode!r}")


def filter_maps(sys: LinearSystem, gains: GainSet) -> tuple[np.ndarray, np.ndarray]:
    """The recursion pair: prediction-error map ``A - L C`` and innovation gain L."""
    if not gains.has_estimator:
        raise ValueError("gain set has no estimator gain")
    return sys.trans - gains.estimator_gain @ sys.obs_map, gains.estimator_gain


def kalman_step(prev_estimate, prev_obs, sys: LinearSystem, gains: GainSet) -> np.ndarray:
    """One step of the reference prediction recursion."""
    closed, l_gain = filter_maps(sys, gains)
    return closed @ as_vector(prev_estimate, "prev_estimate") + l_gain @ as_vector(prev_obs, "prev_obs")


def tf_intermediate(prev_tf_estimate, prev_obs, sys: LinearSystem, gains: GainSet) -> np.ndarray:
    """The interpolant: the reference map applied to the softmax filter's estimate."""
    return kalman_step(prev_tf_estimate, prev_obs, sys, gains)


def tf_weights(tilde_window, beta: float) -> np.ndarray:
    """Softmax weights over a window of interpolants, query = last entry.

    Weight i is proportional to ``exp(-beta * ||w[i] - w[-1]||^2)``; the last
    entry always carries the maximum weight.
    """
    rows = np.atleast_2d(np.asarray(tilde_window, dtype=float))
    if rows.size == 0:
        raise ValueError("window must be nonempty")
    if not beta > 0.0:
        raise ValueError("beta must be positive")
    diffs = rows - rows[-1]
    sq_dists = np.einsum("ij,ij->i", diffs, diffs)
    with np.errstate(over="ignore"):  # huge beta: far tokens get -inf logits, weight 0
        logits = -beta * sq_dists
    return softmax_weights(logits)


def interpolant_gap_bound(window: int, beta: float) -> float:
    """Worst-case distance between the softmax output and the newest interpolant.

    Each of the other window slots contributes weighted distance at most
    ``max_g g * exp(-beta g^2) = e^(-1/2) (2 beta)^(-1/2)``.
    """
    if window < 1 or not beta > 0.0:
        raise ValueError("window must be >= 1 and beta positive")
    return window * math.exp(-0.5) / math.sqrt(2.0 * beta)


def weighted_distance_curve(gamma, window: int, beta: float) -> np.ndarray:
    """``window * g * exp(-beta g^2)``: the bound's integrand, maximal at (2 beta)^(-1/2)."""
    g = np.asarray(gamma, dtype=float)
    with np.errstate(over="ignore"):
        return window * g * np.exp(-beta * g * g)


class FilterState:
    """Single-owner state of the windowed softmax estimator.

    Holds the last estimate and a last-H ring of interpolants (kernel mode)
    or embedded (estimate, observation) tokens (attention mode).  Works for
    any recursion pair, so the control loop reuses it with the
    measurement-feedback map in place of the prediction-error map.
    """

    def __init__(self, recursion_map, innovation_gain, x0, window: int, beta: float,
                 mode: str = "kernel"):
        self._map = np.asarray(recursion_map, dtype=float)
        self._gain = np.asarray(innovation_gain, dtype=float)
        self._x0 = as_vector(x0, "x0")
        self.window = int(window)
        self.beta = float(beta)
        self.mode = mode
        self.t = 0
        self.estimate = self._x0.copy()
        self.last_interpolant = self._x0.copy()
        self._tilde_ring: deque = deque([self._x0.copy()], maxlen=self.window)
        self._params: AttentionParams | None = None
        self._token_ring: deque | None = None
        if mode == "attention":
            self._init_attention()

    @classmethod
    def initial(cls, sys: LinearSystem, config: FilterConfig) -> "FilterState":
        closed, l_gain = filter_maps(sys, config.gains)
        return cls(closed, l_gain, sys.x0, config.window, config.beta, config.mode)

    def _init_attention(self) -> None:
        stacked = np.hstack([self._map, self._gain])  # maps (estimate, obs) -> interpolant
        gram = stacked.T @ stacked
        sigma = self.beta * (gram + gram.T) / 2.0
        self._params = kernel_attention_params(KernelSpec(sigma=sigma, w_out=stacked))
        # the time-0 interpolant is pinned to x0, so its token must be a
        # stacked-map preimage of x0; exact only if the map spans the state space
        preimage, residual, *_ = np.linalg.lstsq(stacked, self._x0, rcond=None)
        if np.linalg.norm(stacked @ preimage - self._x0) > 1e-8 * max(1.0, np.linalg.norm(self._x0)):
            raise ValueError(
                "attention mode requires the stacked recursion map to span the "
                "initial state; use kernel mode for this system"
            )
        self._token_ring = deque([embed_phi(preimage)], maxlen=self.window)

    def _pad_token(self) -> np.ndarray:
        pad = np.zeros(self._params.embed_dim)
        pad[0] = 1.0  # embedding of the zero pair: interpolant contribution 0
        return pad

    def window_interpolants(self) -> list[np.ndarray]:
        """The current window, oldest first, zero-padded to full length."""
        rows = list(self._tilde_ring)
        pad = [np.zeros_like(self._x0) for _ in range(self.window - len(rows))]
        return pad + rows

    def step(self, prev_obs) -> np.ndarray:
        """Advance one step using the observation from the previous time index."""
        obs = as_vector(prev_obs, "prev_obs")
        tilde = self._map @ self.estimate + self._gain @ obs
        if self.mode == "attention":
            # token for the pair we just consumed; its image under the stacked
            # map is exactly the interpolant, so it doubles as the query
            self._token_ring.append(embed_phi(np.concatenate([self.estimate, obs])))
        self._tilde_ring.append(tilde)
        if self.mode == "attention":
            toks = list(self._token_ring)
            rows = [self._pad_token() for _ in range(self.window - len(toks))] + toks
            estimate = attention_forward(np.asarray(rows), rows[-1], self._params)
        else:
            rows = self.window_interpolants()
            weights = tf_weights(rows, self.beta)
            estimate = weights @ np.vstack(rows)
        self.t += 1
        self.estimate = estimate
        self.last_interpolant = tilde
        return estimate


def tf_step(state: FilterState, prev_obs) -> tuple[np.ndarray, FilterState]:
    """One softmax-filter step; returns the new estimate and the advanced state."""
    estimate = state.step(prev_obs)
    return estimate, state


def simulate_plant(sys: LinearSystem, horizon: int, noise: DisturbanceSource,
                   controls=None) -> tuple[np.ndarray, np.ndarray]:
    """Roll the plant forward, returning states and observations for t = 0..horizon."""
    steps = int(horizon)
    ws, vs = noise.draw_many(steps + 1)
    states = np.empty((steps + 1, sys.n))
    obs = np.empty((steps + 1, sys.p))
    states[0] = sys.x0
    for t in range(steps + 1):
        obs[t] = sys.obs_map @ states[t] + vs[t]
        if t < steps:
            drive = np.zeros(sys.n) if controls is None else sys.input_map @ controls[t]
            states[t + 1] = sys.trans @ states[t] + drive + ws[t]
    return states, obs


def run_filter_comparison(sys: LinearSystem, config: FilterConfig, horizon: int,
                          noise: DisturbanceSource) -> TrajectoryRecord:
    """Simulate once, filter twice (reference and softmax-window), record both.

    Both filters read the identical observation stream.  The record carries
    per-step estimate error and the softmax filter's interpolant gap.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    steps = int(horizon)
    states, obs = simulate_plant(sys, steps, noise)

    kalman = np.empty((steps + 1, sys.n))
    kalman[0] = sys.x0
    for t in range(1, steps + 1):
        kalman[t] = kalman_step(kalman[t - 1], obs[t - 1], sys, config.gains)

    state = FilterState.initial(sys, config)
    transformer = np.empty((steps + 1, sys.n))
    transformer[0] = state.estimate
    gaps = np.zeros(steps + 1)
    for t in range(1, steps + 1):
        estimate, state = tf_step(state, obs[t - 1])
        transformer[t] = estimate
        gaps[t] = np.linalg.norm(estimate - state.last_interpolant)

    errors = np.linalg.norm(transformer - kalman, axis=1)
    metadata = {
        "kind": "filter",
        "seed": noise.seed,
        "generator": GENERATOR_ID,
        "noise_kind": noise.spec.kind,
        "noise_scale": noise.spec.scale,
        "noise_clip": noise.spec.clip,
        "beta": config.beta,
        "window": config.window,
        "mode": config.mode,
    }
    return TrajectoryRecord(
        times=np.arange(steps + 1),
        states=states,
        observations=obs,
        kalman_estimates=kalman,
        transformer_estimates=transformer,
        estimate_errors=errors,
        interpolant_gaps=gaps,
        metadata=metadata,
    )
