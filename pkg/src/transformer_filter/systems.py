"""Linear plant descriptions, gain containers, and random test-system sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    DEFAULT_STABILITY_MARGIN,
    as_matrix,
    as_vector,
    is_symmetric,
    require_square,
    spectral_radius,
)

RANK_TOLERANCE = 1e-10


def check_observability(trans, obs_map) -> bool:
    """True iff the stacked map [C; CA; ...; CA^(n-1)] has full column rank.

    Rank is decided from singular values with a relative threshold of 1e-10.
    """
    a = require_square(as_matrix(trans, "trans"), "trans")
    c = as_matrix(obs_map, "obs_map")
    n = a.shape[0]
    if c.shape[1] != n:
        raise ValueError(f"obs_map has {c.shape[1]} columns, expected {n}")
    blocks = []
    row = c
    for _ in range(n):
        blocks.append(row)
        row = row @ a
    stacked = np.vstack(blocks)
    return _rank(stacked) == n


def check_controllability(trans, input_map) -> bool:
    """True iff the reachability map [B, AB, ..., A^(n-1)B] has full row rank."""
    a = require_square(as_matrix(trans, "trans"), "trans")
    b = as_matrix(input_map, "input_map")
    n = a.shape[0]
    if b.shape[0] != n:
        raise ValueError(f"input_map has {b.shape[0]} rows, expected {n}")
    blocks = []
    col = b
    for _ in range(n):
        blocks.append(col)
        col = a @ col
    stacked = np.hstack(blocks)
    return _rank(stacked) == n


def _rank(mat: np.ndarray) -> int:
    svals = np.linalg.svd(mat, compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return 0
    return int(np.sum(svals > RANK_TOLERANCE * svals[0]))


def _check_psd(mat: np.ndarray, name: str, *, strict: bool) -> None:
    if not is_symmetric(mat):
        raise ValueError(f"{name} must be symmetric")
    evals = np.linalg.eigvalsh((mat + mat.T) / 2.0)
    scale = max(1.0, float(np.max(np.abs(mat))))
    if strict:
        if np.min(evals) <= 1e-12 * scale:
            raise ValueError(f"{name} must be positive definite")
    elif np.min(evals) < -1e-10 * scale:
        raise ValueError(f"{name} must be positive semidefinite")


@dataclass(frozen=True)
class LinearSystem:
    """A partially observed linear plant.

    State and observation evolve as ``x[t+1] = A x[t] + B u[t] + w[t]`` and
    ``y[t] = C x[t] + v[t]`` from the known initial state ``x0``.  ``w_cov``
    and ``v_cov`` are the nominal covariances of the two disturbance streams,
    used for gain synthesis.  Pure-filtering plants may have zero input
    columns, in which case the controllability requirement is skipped.
    """

    trans: np.ndarray
    input_map: np.ndarray
    obs_map: np.ndarray
    w_cov: np.ndarray
    v_cov: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        a = require_square(as_matrix(self.trans, "trans"), "trans")
        n = a.shape[0]
        b = as_matrix(self.input_map, "input_map") if np.size(self.input_map) else np.zeros((n, 0))
        c = as_matrix(self.obs_map, "obs_map")
        w = require_square(as_matrix(self.w_cov, "w_cov"), "w_cov")
        v = require_square(as_matrix(self.v_cov, "v_cov"), "v_cov")
        x0 = as_vector(self.x0, "x0")
        if b.shape[0] != n:
            raise ValueError(f"input_map has {b.shape[0]} rows, expected {n}")
        if c.shape[1] != n:
            raise ValueError(f"obs_map has {c.shape[1]} columns, expected {n}")
        if w.shape != (n, n):
            raise ValueError(f"w_cov must be {n}x{n}, got {w.shape}")
        if v.shape != (c.shape[0], c.shape[0]):
            raise ValueError(f"v_cov must be {c.shape[0]}x{c.shape[0]}, got {v.shape}")
        if x0.shape != (n,):
            raise ValueError(f"x0 must have length {n}, got {x0.shape}")
        _check_psd(w, "w_cov", strict=False)
        _check_psd(v, "v_cov", strict=True)
        if not check_observability(a, c):
            raise ValueError("pair (A, C) not observable")
        if b.shape[1] > 0 and not check_controllability(a, b):
            raise ValueError("pair (A, B) not controllable")
        for name, value in (
            ("trans", a), ("input_map", b), ("obs_map", c),
            ("w_cov", w), ("v_cov", v), ("x0", x0),
        ):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.trans.shape[0]

    @property
    def m(self) -> int:
        return self.input_map.shape[1]

    @property
    def p(self) -> int:
        return self.obs_map.shape[0]


@dataclass(frozen=True)
class CostWeights:
    """Quadratic stage-cost weights: PSD on the state, PD on the control."""

    state_weight: np.ndarray
    control_weight: np.ndarray

    def __post_init__(self):
        q = require_square(as_matrix(self.state_weight, "state_weight"), "state_weight")
        r = require_square(as_matrix(self.control_weight, "control_weight"), "control_weight")
        _check_psd(q, "state_weight", strict=False)
        _check_psd(r, "control_weight", strict=True)
        object.__setattr__(self, "state_weight", q)
        object.__setattr__(self, "control_weight", r)


@dataclass(frozen=True)
class GainSet:
    """Stabilizing estimator / state-feedback gains with their provenance.

    ``estimator_gain`` is the innovation weight L in the filter recursion;
    ``feedback_gain`` is the K of ``u = K xhat``.  Either may be None when a
    synthesis routine produced only one side.  Construct through
    :func:`user_gains` or the synthesis routines so that the stability
    requirements are enforced.
    """

    estimator_gain: np.ndarray | None = None
    feedback_gain: np.ndarray | None = None
    provenance: str = "synthesized"

    @property
    def has_estimator(self) -> bool:
        return self.estimator_gain is not None

    @property
    def has_feedback(self) -> bool:
        return self.feedback_gain is not None


def assert_stabilizing(
    sys: LinearSystem,
    estimator_gain,
    feedback_gain=None,
    *,
    margin: float = DEFAULT_STABILITY_MARGIN,
    source: str = "user-supplied",
) -> None:
    """Verify the defining property of a stabilizing measurement-feedback pair.

    Both ``A - L C`` and, when a feedback gain is present, ``A + B K`` must
    have spectral radius strictly below one (up to the margin).
    """
    bound = 1.0 - margin
    rho_est = spectral_radius(sys.trans - estimator_gain @ sys.obs_map)
    if rho_est >= bound:
        raise ValueError(
            f"{source} estimator gain does not stabilize: spectral radius of "
            f"A - L C is {rho_est:.12g}; a stabilizing measurement-feedback pair "
            f"must make both A - L C and A + B K strictly stable"
        )
    if feedback_gain is not None:
        rho_fb = spectral_radius(sys.trans + sys.input_map @ feedback_gain)
        if rho_fb >= bound:
            raise ValueError(
                f"{source} feedback gain does not stabilize: spectral radius of "
                f"A + B K is {rho_fb:.12g}; a stabilizing measurement-feedback pair "
                f"must make both A - L C and A + B K strictly stable"
            )


def user_gains(
    sys: LinearSystem,
    estimator_gain,
    feedback_gain=None,
    *,
    margin: float = DEFAULT_STABILITY_MARGIN,
) -> GainSet:
    """Wrap externally supplied gains (e.g. from an H-infinity design).

    The gains are accepted as long as they stabilize; no optimality is assumed.
    """
    l_gain = as_matrix(estimator_gain, "estimator_gain")
    if l_gain.shape != (sys.n, sys.p):
        raise ValueError(f"estimator_gain must be {sys.n}x{sys.p}, got {l_gain.shape}")
    k_gain = None
    if feedback_gain is not None:
        k_gain = as_matrix(feedback_gain, "feedback_gain")
        if k_gain.shape != (sys.m, sys.n):
            raise ValueError(f"feedback_gain must be {sys.m}x{sys.n}, got {k_gain.shape}")
    assert_stabilizing(sys, l_gain, k_gain, margin=margin, source="user-supplied")
    return GainSet(estimator_gain=l_gain, feedback_gain=k_gain, provenance="user-supplied")


def random_stable_matrix(rng: np.random.Generator, n: int, radius_range=(0.3, 0.95)) -> np.ndarray:
    """Gaussian matrix rescaled to a spectral radius drawn from ``radius_range``.

    Keeping the radius away from one keeps factorization conditioning moderate,
    so temperature bounds stay representable in double precision.
    """
    target = rng.uniform(*radius_range)
    while True:
        mat = rng.standard_normal((n, n))
        rho = spectral_radius(mat)
        if rho > 1e-12:
            return mat * (target / rho)


def random_system(
    rng: np.random.Generator,
    n: int,
    m: int,
    p: int,
    radius_range=(0.3, 0.95),
    max_tries: int = 100,
) -> LinearSystem:
    """Sample an observable (and, if m > 0, controllable) random plant."""
    for _ in range(max_tries):
        a = random_stable_matrix(rng, n, radius_range)
        b = rng.standard_normal((n, m)) if m > 0 else np.zeros((n, 0))
        c = rng.standard_normal((p, n))
        x0 = rng.standard_normal(n)
        try:
            return LinearSystem(
                trans=a, input_map=b, obs_map=c,
                w_cov=np.eye(n), v_cov=np.eye(p), x0=x0,
            )
        except ValueError:
            continue
    raise RuntimeError(f"failed to sample a valid {n}-state system in {max_tries} tries")
