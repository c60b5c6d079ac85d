"""Gain synthesis via the discrete algebraic Riccati equation, plus temperature bounds.

The estimator gain comes from the filtering Riccati equation and the feedback
gain from the control one; both are found by plain fixed-point iteration so the
result carries a directly checkable residual.  The ``beta_for_*`` functions
turn a stable factorization of the relevant closed-loop map into the softmax
temperature that guarantees epsilon-tracking of the reference filter or
controller.
"""

from __future__ import annotations

import math

import numpy as np

from .linalg import (
    DEFAULT_STABILITY_MARGIN,
    StableFactorization,
    as_matrix,
    is_symmetric,
    require_square,
    spectral_norm,
    stable_factorization,
)
from .systems import CostWeights, GainSet, LinearSystem, assert_stabilizing

BETA_OVERFLOW_LIMIT = 1e300


class DareDivergenceError(RuntimeError):
    """The Riccati fixed-point iteration failed to converge."""


def solve_dare(
    trans,
    input_map,
    state_weight,
    control_weight,
    *,
    rel_tol: float = 1e-13,
    max_iter: int = 10000,
) -> np.ndarray:
    """Stabilizing solution of the discrete algebraic Riccati equation.

    Iterates ``P <- A'PA - A'PB (R + B'PB)^-1 B'PA + Q`` from ``P = Q`` until
    the iterate change drops below ``rel_tol`` relative to the current norm.
    Requires a stabilizable ``(A, B)`` pair, PSD ``Q`` and PD ``R``.
    """
    a = require_square(as_matrix(trans, "trans"), "trans")
    b = as_matrix(input_map, "input_map")
    q = require_square(as_matrix(state_weight, "state_weight"), "state_weight")
    r = require_square(as_matrix(control_weight, "control_weight"), "control_weight")
    n = a.shape[0]
    if b.shape[0] != n or q.shape != (n, n) or r.shape != (b.shape[1], b.shape[1]):
        raise ValueError("inconsistent DARE dimensions")
    if b.shape[1] == 0:
        raise ValueError("input_map must have at least one column")
    if not is_symmetric(q) or not is_symmetric(r):
        raise ValueError("cost matrices must be symmetric")

    sol = q.copy()
    # convergence is judged in max-abs norm: squared-norm accumulation can
    # overflow to inf on divergent iterates and fake an inf <= inf pass
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iter):
            pb = sol @ b
            gain = np.linalg.solve(r + b.T @ pb, pb.T @ a)
            nxt = a.T @ sol @ a - (a.T @ pb) @ gain + q
            nxt = (nxt + nxt.T) / 2.0
            if not np.all(np.isfinite(nxt)):
                raise DareDivergenceError(
                    "DARE divergence: iterates left the representable range "
                    "(is the pair stabilizable?)")
            if np.max(np.abs(nxt - sol)) <= rel_tol * max(np.max(np.abs(nxt)), 1e-300):
                return nxt
            sol = nxt
    raise DareDivergenceError(f"DARE divergence: no convergence within {max_iter} iterations")


def dare_residual(trans, input_map, state_weight, control_weight, sol) -> float:
    """Spectral norm of ``P - (A'PA - A'PB (R + B'PB)^-1 B'PA + Q)``."""
    a = as_matrix(trans)
    b = as_matrix(input_map)
    q = as_matrix(state_weight)
    r = as_matrix(control_weight)
    p = as_matrix(sol)
    pb = p @ b
    gain = np.linalg.solve(r + b.T @ pb, pb.T @ a)
    return spectral_norm(p - (a.T @ p @ a - (a.T @ pb) @ gain + q))


def kalman_gain(sys: LinearSystem, *, margin: float = DEFAULT_STABILITY_MARGIN) -> GainSet:
    """Synthesize the steady-state innovation gain of the optimal linear filter.

    Solves the filtering Riccati equation (the control DARE on the transposed
    system) and returns L such that the prediction recursion uses ``A - L C``.
    """
    pred_cov = solve_dare(sys.trans.T, sys.obs_map.T, sys.w_cov, sys.v_cov)
    innov_cov = sys.obs_map @ pred_cov @ sys.obs_map.T + sys.v_cov
    l_gain = np.linalg.solve(innov_cov, (sys.trans @ pred_cov @ sys.obs_map.T).T).T
    try:
        assert_stabilizing(sys, l_gain, margin=margin, source="synthesized")
    except ValueError as exc:  # would indicate a Riccati solver defect
        raise RuntimeError(f"synthesized estimator gain failed its stability check: {exc}")
    return GainSet(estimator_gain=l_gain, provenance="synthesized")


def lqr_gain(
    sys: LinearSystem, cost: CostWeights, *, margin: float = DEFAULT_STABILITY_MARGIN
) -> GainSet:
    """Synthesize the optimal state-feedback gain for the quadratic cost."""
    if sys.m == 0:
        raise ValueError("system has no control input")
    if cost.state_weight.shape != (sys.n, sys.n) or cost.control_weight.shape != (sys.m, sys.m):
        raise ValueError("cost weights do not match the system dimensions")
    sol = solve_dare(sys.trans, sys.input_map, cost.state_weight, cost.control_weight)
    pb = sol @ sys.input_map
    k_gain = -np.linalg.solve(cost.control_weight + sys.input_map.T @ pb, pb.T @ sys.trans)
    _assert_feedback_stable(sys, k_gain, margin)
    return GainSet(feedback_gain=k_gain, provenance="synthesized")


def _assert_feedback_stable(sys: LinearSystem, k_gain: np.ndarray, margin: float) -> None:
    from .linalg import spectral_radius

    rho = spectral_radius(sys.trans + sys.input_map @ k_gain)
    if rho >= 1.0 - margin:
        raise RuntimeError(
            f"synthesized feedback gain failed its stability check: spectral radius "
            f"of A + B K is {rho:.12g}"
        )


def synthesize_gains(
    sys: LinearSystem, cost: CostWeights, *, margin: float = DEFAULT_STABILITY_MARGIN
) -> GainSet:
    """Kalman estimator gain plus LQR feedback gain in one container."""
    l_set = kalman_gain(sys, margin=margin)
    k_set = lqr_gain(sys, cost, margin=margin)
    return GainSet(
        estimator_gain=l_set.estimator_gain,
        feedback_gain=k_set.feedback_gain,
        provenance="synthesized",
    )


def estimator_closed_loop(sys: LinearSystem, gains: GainSet) -> np.ndarray:
    """The prediction-error map ``A - L C``."""
    _require_estimator(gains)
    return sys.trans - gains.estimator_gain @ sys.obs_map


def controller_closed_loop(sys: LinearSystem, gains: GainSet) -> np.ndarray:
    """The estimate recursion map ``A + B K - L C`` of the output-feedback loop."""
    _require_estimator(gains)
    _require_feedback(gains)
    return sys.trans + sys.input_map @ gains.feedback_gain - gains.estimator_gain @ sys.obs_map


def _require_estimator(gains: GainSet) -> None:
    if gains.estimator_gain is None:
        raise ValueError("gain set has no estimator gain")


def _require_feedback(gains: GainSet) -> None:
    if gains.feedback_gain is None:
        raise ValueError("gain set has no feedback gain")


def _beta_from_factorization(
    fact: StableFactorization, window: int, eps: float, scale: float
) -> float:
    """Evaluate ``scale * H^2 kappa^2 / (2e (1 - contraction_norm)^2 eps^2)`` in log space."""
    if window < 1:
        raise ValueError("window must be at least 1")
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    if scale == 0.0:
        return np.finfo(float).tiny
    log_beta = (
        math.log(scale)
        + 2.0 * math.log(window)
        + 2.0 * math.log(fact.conditioning)
        - (1.0 + math.log(2.0))
        - 2.0 * math.log1p(-fact.contraction_norm)
        - 2.0 * math.log(eps)
    )
    if log_beta > math.log(BETA_OVERFLOW_LIMIT):
        raise OverflowError(
            f"temperature bound exceeds {BETA_OVERFLOW_LIMIT:g} "
            f"(log beta = {log_beta:.6g}); loosen eps or improve the factorization"
        )
    return max(math.exp(log_beta), np.finfo(float).tiny)


def beta_for_filter(sys: LinearSystem, gains: GainSet, window: int, eps: float) -> float:
    """Softmax temperature guaranteeing the filter tracks the reference within eps.

    Uses a stable factorization of ``A - L C``; any valid factorization yields
    a valid (if different) temperature, so the certificate travels with the
    factorization actually used (see :func:`filter_factorization`).
    """
    return _beta_from_factorization(filter_factorization(sys, gains), window, eps, 1.0)


def filter_factorization(sys: LinearSystem, gains: GainSet) -> StableFactorization:
    """The stable factorization of ``A - L C`` behind :func:`beta_for_filter`."""
    return stable_factorization(estimator_closed_loop(sys, gains))


def control_coupling_constant(sys: LinearSystem, gains: GainSet) -> float:
    """``2 norm(BK)^2 + 2 norm(A + BK - LC)^2``, the interpolant-to-state coupling."""
    _require_feedback(gains)
    bk = sys.input_map @ gains.feedback_gain
    return 2.0 * spectral_norm(bk) ** 2 + 2.0 * spectral_norm(controller_closed_loop(sys, gains)) ** 2


def beta_for_control(sys: LinearSystem, gains: GainSet, window: int, eps: float) -> float:
    """Softmax temperature guaranteeing closed-loop states track the LQG loop within eps."""
    fact = control_factorization(sys, gains)
    return _beta_from_factorization(fact, window, eps, control_coupling_constant(sys, gains))


def control_factorization(sys: LinearSystem, gains: GainSet) -> StableFactorization:
    """Stable factorization of the stacked paired-loop transition matrix."""
    return stable_factorization(build_stacked_transition(sys, gains))


def build_stacked_transition(sys: LinearSystem, gains: GainSet) -> np.ndarray:
    """One-step transition of the stacked vector (x, interpolant, ref x, ref estimate).

    The two closed loops are block-decoupled; the attention filter's influence
    enters the dynamics only through an additive disturbance term, which is
    what makes the geometric tracking argument work.
    """
    _require_estimator(gains)
    _require_feedback(gains)
    a = sys.trans
    n = sys.n
    bk = sys.input_map @ gains.feedback_gain
    lc = gains.estimator_gain @ sys.obs_map
    inner = a + bk - lc
    block = np.zeros((4 * n, 4 * n))
    for offset in (0, 2 * n):
        block[offset:offset + n, offset:offset + n] = a
        block[offset:offset + n, offset + n:offset + 2 * n] = bk
        block[offset + n:offset + 2 * n, offset:offset + n] = lc
        block[offset + n:offset + 2 * n, offset + n:offset + 2 * n] = inner
    return block


def _stacked_mixing(n: int) -> np.ndarray:
    """Change of variables sending (x, z) to (x - z, z) in both loop copies."""
    eye = np.eye(n)
    mix = np.zeros((4 * n, 4 * n))
    for offset in (0, 2 * n):
        mix[offset:offset + n, offset:offset + n] = eye
        mix[offset:offset + n, offset + n:offset + 2 * n] = -eye
        mix[offset + n:offset + 2 * n, offset + n:offset + 2 * n] = eye
    return mix


def _stacked_triangular(sys: LinearSystem, gains: GainSet) -> np.ndarray:
    """Block-triangular form with ``A - LC`` and ``A + BK`` on the diagonal."""
    n = sys.n
    est = estimator_closed_loop(sys, gains)
    fb = sys.trans + sys.input_map @ gains.feedback_gain
    lc = gains.estimator_gain @ sys.obs_map
    tri = np.zeros((4 * n, 4 * n))
    for offset in (0, 2 * n):
        tri[offset:offset + n, offset:offset + n] = est
        tri[offset + n:offset + 2 * n, offset:offset + n] = lc
        tri[offset + n:offset + 2 * n, offset + n:offset + 2 * n] = fb
    return tri


def stacked_similarity_residual(sys: LinearSystem, gains: GainSet) -> float:
    """Spectral-norm residual of the similarity certifying stacked-loop stability.

    The stacked transition must equal ``inv(Q) S Q`` for the mixing matrix Q
    and the block-triangular form S; the residual should sit at rounding level.
    """
    block = build_stacked_transition(sys, gains)
    mix = _stacked_mixing(sys.n)
    tri = _stacked_triangular(sys, gains)
    return spectral_norm(block - np.linalg.solve(mix, tri @ mix))


def gain_synthesis_report(
    sys: LinearSystem,
    cost: CostWeights | None,
    window: int,
    eps: float,
    *,
    margin: float = DEFAULT_STABILITY_MARGIN,
) -> dict:
    """Bundle gains, Riccati residuals, factorization certificates and temperatures.

    With ``cost`` None only the filtering side is synthesized.
    """
    report: dict = {}
    pred_cov = solve_dare(sys.trans.T, sys.obs_map.T, sys.w_cov, sys.v_cov)
    report["filter_riccati_residual"] = dare_residual(
        sys.trans.T, sys.obs_map.T, sys.w_cov, sys.v_cov, pred_cov
    )
    gains = kalman_gain(sys, margin=margin)
    if cost is not None and sys.m > 0:
        ctrl_cov = solve_dare(sys.trans, sys.input_map, cost.state_weight, cost.control_weight)
        report["control_riccati_residual"] = dare_residual(
            sys.trans, sys.input_map, cost.state_weight, cost.control_weight, ctrl_cov
        )
        k_set = lqr_gain(sys, cost, margin=margin)
        gains = GainSet(
            estimator_gain=gains.estimator_gain,
            feedback_gain=k_set.feedback_gain,
            provenance="synthesized",
        )
    report["gains"] = gains
    fact = filter_factorization(sys, gains)
    report["filter_factorization"] = fact
    report["beta_filter"] = _beta_from_factorization(fact, window, eps, 1.0)
    if gains.has_feedback:
        cfact = control_factorization(sys, gains)
        report["control_factorization"] = cfact
        report["control_coupling"] = control_coupling_constant(sys, gains)
        report["beta_control"] = _beta_from_factorization(
            cfact, window, eps, report["control_coupling"]
        )
        report["similarity_residual"] = stacked_similarity_residual(sys, gains)
    return report
