"""Windowed softmax output-feedback control against the reference LQG loop.

The reference loop runs the measurement-feedback recursion
``est[t] = (A + B K - L C) est[t-1] + L y[t-1]``, ``u[t] = K est[t]``.  The
softmax controller replaces the estimate with a windowed softmax combination
of one-step images of its own past estimates (the same engine as the filter,
under the control-form map) and actuates through the same K.  Paired
simulation feeds both loops one disturbance realization.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .filtering import FILTER_MODES, FilterState
from .linalg import as_vector
from .noise import GENERATOR_ID, DisturbanceSource, NoiseSpec
from .records import ClosedLoopRecord
from .synthesis import build_stacked_transition
from .systems import CostWeights, GainSet, LinearSystem

WEAK_STABILITY_TOL = 1e-6  # relative to the initial-state norm


@dataclass(frozen=True)
class ControlConfig:
    """Window, temperature, both gains, and the quadratic cost they optimize."""

    gains: GainSet
    cost: CostWeights
    window: int = 8
    beta: float = 1.0
    mode: str = "kernel"

    def __post_init__(self):
        if not (self.gains.has_estimator and self.gains.has_feedback):
            raise ValueError("control configuration requires estimator and feedback gains")
        if int(self.window) != self.window or self.window < 1:
            raise ValueError("window must be an integer >= 1")
        object.__setattr__(self, "window", int(self.window))
        if not (np.isfinite(self.beta) and self.beta > 0.0):
            raise ValueError("beta must be finite and positive")
        if self.mode not in FILTER_MODES:
            raise ValueError(f"mode must be one of {FILTER_MODES}, got {self.mode!r}")


def control_maps(sys: LinearSystem, gains: GainSet) -> tuple[np.ndarray, np.ndarray]:
    """The control-form recursion pair: ``A + B K - L C`` and the innovation gain."""
    if not (gains.has_estimator and gains.has_feedback):
        raise ValueError("control maps require estimator and feedback gains")
    inner = sys.trans + sys.input_map @ gains.feedback_gain - gains.estimator_gain @ sys.obs_map
    return inner, gains.estimator_gain


def lqg_step(prev_estimate, prev_obs, sys: LinearSystem,
             gains: GainSet) -> tuple[np.ndarray, np.ndarray]:
    """One reference-loop step: new estimate and the control it commands."""
    inner, l_gain = control_maps(sys, gains)
    estimate = inner @ as_vector(prev_estimate, "prev_estimate") + l_gain @ as_vector(
        prev_obs, "prev_obs")
    return estimate, gains.feedback_gain @ estimate


def control_state(sys: LinearSystem, config: ControlConfig) -> FilterState:
    """Initial softmax-controller state (the filter engine under the control map)."""
    inner, l_gain = control_maps(sys, config.gains)
    return FilterState(inner, l_gain, sys.x0, config.window, config.beta, config.mode)


def tf_control_step(state: FilterState, prev_obs,
                    config: ControlConfig) -> tuple[np.ndarray, np.ndarray, FilterState]:
    """One softmax-controller step: estimate, commanded control, advanced state."""
    estimate = state.step(prev_obs)
    return estimate, config.gains.feedback_gain @ estimate, state


def closed_loop_sim(sys: LinearSystem, config: ControlConfig, horizon: int,
                    noise: DisturbanceSource) -> ClosedLoopRecord:
    """Co-simulate softmax-controlled and reference-controlled plants.

    Identical (process, observation) disturbances drive both loops; the
    observations themselves differ because the states do.  Initial states and
    estimates match, so the error column starts at exactly zero.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    steps = int(horizon)
    ws, vs = noise.draw_many(steps + 1)
    n, m = sys.n, sys.m
    k_gain = config.gains.feedback_gain

    x = np.empty((steps + 1, n))
    xhat = np.empty((steps + 1, n))
    xtilde = np.empty((steps + 1, n))
    u = np.empty((steps + 1, m))
    ref_x = np.empty((steps + 1, n))
    ref_xhat = np.empty((steps + 1, n))
    ref_u = np.empty((steps + 1, m))

    state = control_state(sys, config)
    x[0] = sys.x0
    ref_x[0] = sys.x0
    xhat[0] = state.estimate
    ref_xhat[0] = sys.x0
    xtilde[0] = state.last_interpolant
    u[0] = k_gain @ xhat[0]
    ref_u[0] = k_gain @ ref_xhat[0]

    for t in range(steps):
        y_t = sys.obs_map @ x[t] + vs[t]
        ref_y_t = sys.obs_map @ ref_x[t] + vs[t]
        x[t + 1] = sys.trans @ x[t] + sys.input_map @ u[t] + ws[t]
        ref_x[t + 1] = sys.trans @ ref_x[t] + sys.input_map @ ref_u[t] + ws[t]
        estimate, control, state = tf_control_step(state, y_t, config)
        xhat[t + 1] = estimate
        xtilde[t + 1] = state.last_interpolant
        u[t + 1] = control
        ref_xhat[t + 1], ref_u[t + 1] = lqg_step(ref_xhat[t], ref_y_t, sys, config.gains)

    record = ClosedLoopRecord(
        times=np.arange(steps + 1),
        states=x,
        estimates=xhat,
        interpolants=xtilde,
        controls=u,
        ref_states=ref_x,
        ref_estimates=ref_xhat,
        ref_controls=ref_u,
        state_errors=np.linalg.norm(x - ref_x, axis=1),
        metadata={
            "kind": "control",
            "seed": noise.seed,
            "generator": GENERATOR_ID,
            "noise_kind": noise.spec.kind,
            "noise_scale": noise.spec.scale,
            "noise_clip": noise.spec.clip,
            "beta": config.beta,
            "window": config.window,
            "mode": config.mode,
        },
    )
    record.metadata["cost_transformer"] = empirical_cost(record, config.cost, "transformer")
    record.metadata["cost_lqg"] = empirical_cost(record, config.cost, "lqg")
    return record


def decompose_disturbances(record: ClosedLoopRecord, sys: LinearSystem, gains: GainSet,
                           *, residual_tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Split each stacked step into its estimate-gap and noise components.

    The stacked vector (state, interpolant, reference state, reference
    estimate) satisfies a linear recursion driven by two terms: one carried
    entirely by the softmax filter's gap to its interpolant, one by the raw
    disturbances.  Both are reconstructed from recorded columns and the
    recursion is re-verified step by step; a residual above ``residual_tol``
    signals a simulation bug.
    """
    inner, l_gain = control_maps(sys, gains)
    bk = sys.input_map @ gains.feedback_gain
    lc = gains.estimator_gain @ sys.obs_map
    stacked_map = build_stacked_transition(sys, gains)
    steps = record.times.shape[0] - 1
    n = sys.n
    etas = np.zeros((steps, 4 * n))
    nus = np.zeros((steps, 4 * n))
    for t in range(steps):
        w_t = record.states[t + 1] - sys.trans @ record.states[t] - sys.input_map @ record.controls[t]
        lv_t = record.interpolants[t + 1] - inner @ record.estimates[t] - lc @ record.states[t]
        gap = record.estimates[t] - record.interpolants[t]
        etas[t] = np.concatenate([bk @ gap, inner @ gap, np.zeros(n), np.zeros(n)])
        nus[t] = np.concatenate([w_t, lv_t, w_t, lv_t])
        stacked_now = np.concatenate(
            [record.states[t], record.interpolants[t], record.ref_states[t], record.ref_estimates[t]]
        )
        stacked_next = np.concatenate(
            [record.states[t + 1], record.interpolants[t + 1],
             record.ref_states[t + 1], record.ref_estimates[t + 1]]
        )
        residual = np.linalg.norm(stacked_next - (stacked_map @ stacked_now + etas[t] + nus[t]))
        if residual > residual_tol:
            raise RuntimeError(
                f"stacked recursion residual {residual:.3e} at step {t} exceeds "
                f"{residual_tol:.1e}; this signals a simulation bug"
            )
    return etas, nus


def empirical_cost(record: ClosedLoopRecord, cost: CostWeights, which: str) -> float:
    """Time-averaged quadratic cost of the selected trajectory.

    Sums ``x'Qx + u'Ru`` over all recorded steps (horizon + 1 terms) and
    divides by the horizon.
    """
    if which == "transformer":
        xs, us = record.states, record.controls
    elif which == "lqg":
        xs, us = record.ref_states, record.ref_controls
    else:
        raise ValueError("which must be 'transformer' or 'lqg'")
    horizon = record.horizon
    if horizon < 1:
        raise ValueError("record must cover at least one step")
    state_cost = np.einsum("ti,ij,tj->", xs, cost.state_weight, xs)
    control_cost = np.einsum("ti,ij,tj->", us, cost.control_weight, us)
    return float((state_cost + control_cost) / horizon)


def weak_stability_check(sys: LinearSystem, config: ControlConfig, x0, eps: float,
                         horizon: int) -> bool:
    """Does the undisturbed softmax loop park the state in an eps-ball?

    Simulates both loops from ``x0`` with zero disturbances.  Settling time
    is the first step where the reference state norm drops below
    ``1e-6 * norm(x0)``; the check passes when the softmax-loop state stays
    within ``eps`` (plus that tolerance) from then on.
    """
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    start = as_vector(x0, "x0")
    sys0 = dataclasses.replace(sys, x0=start)
    noise = DisturbanceSource(sys0, NoiseSpec(kind="zero"), seed=0)
    record = closed_loop_sim(sys0, config, horizon, noise)
    tol = WEAK_STABILITY_TOL * float(np.linalg.norm(start))
    ref_norms = np.linalg.norm(record.ref_states, axis=1)
    settled = np.nonzero(ref_norms <= tol)[0]
    if settled.size == 0:
        raise ValueError(
            "horizon too short: the reference loop never settles to the tolerance"
        )
    norms = np.linalg.norm(record.states, axis=1)
    return bool(np.all(norms[settled[0]:] <= eps + tol))
