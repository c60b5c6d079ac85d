"""Dense-matrix primitives: norms, spectral radius, Lyapunov solves, stable factorizations.

Everything here operates on plain float64 numpy arrays.  Inputs are validated
once at the boundary (finite entries, expected shape) and all functions are
pure, so values can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_STABILITY_MARGIN = 1e-9

# Eigenvalues of a nominally PSD matrix are clamped here before square roots,
# so near-singular Lyapunov solutions survive the similarity construction.
PSD_EIGENVALUE_FLOOR = 1e-14


class NotStableError(ValueError):
    """The operation needs a matrix with spectral radius strictly below one."""


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite float64 2-D array, raising on NaN/Inf or bad shape."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_vector(value, name: str = "vector") -> np.ndarray:
    """Coerce to a finite float64 1-D array."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def require_square(mat: np.ndarray, name: str = "matrix") -> np.ndarray:
    if mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square, got shape {mat.shape}")
    return mat


def is_symmetric(mat: np.ndarray, rel_tol: float = 1e-12) -> bool:
    scale = max(1.0, float(np.max(np.abs(mat))))
    return float(np.max(np.abs(mat - mat.T))) <= rel_tol * scale


def spectral_norm(mat) -> float:
    """Largest singular value of ``mat``."""
    arr = as_matrix(mat)
    return float(np.linalg.norm(arr, 2))


def spectral_radius(mat) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    arr = require_square(as_matrix(mat))
    return float(np.max(np.abs(np.linalg.eigvals(arr))))


def solve_discrete_lyapunov(
    trans,
    rhs,
    *,
    stability_margin: float = DEFAULT_STABILITY_MARGIN,
    rel_tol: float = 1e-14,
    max_doublings: int = 200,
) -> np.ndarray:
    """Solve ``P = trans' P trans + rhs`` for a stable ``trans`` and symmetric ``rhs``.

    The solution is the convergent series sum_k (trans')^k rhs trans^k,
    accumulated with power doubling: each pass adds the partial series for
    twice as many terms, so convergence is reached in O(log) passes even
    for spectral radii close to one.
    """
    a = require_square(as_matrix(trans, "trans"), "trans")
    q = require_square(as_matrix(rhs, "rhs"), "rhs")
    if a.shape != q.shape:
        raise ValueError(f"shape mismatch: trans {a.shape} vs rhs {q.shape}")
    if not is_symmetric(q):
        raise ValueError("rhs must be symmetric")
    rho = spectral_radius(a)
    if rho >= 1.0 - stability_margin:
        raise NotStableError(
            f"not stable: spectral radius {rho:.12g} is not below 1 - {stability_margin:g}"
        )

    sol = q.copy()
    power = a.copy()
    for _ in range(max_doublings):
        increment = power.T @ sol @ power
        sol = sol + increment
        if np.linalg.norm(increment) <= rel_tol * np.linalg.norm(sol):
            return (sol + sol.T) / 2.0
        power = power @ power
    raise RuntimeError(
        f"discrete Lyapunov series did not converge within {max_doublings} doublings"
    )


def psd_sqrt(mat, *, floor: float = PSD_EIGENVALUE_FLOOR) -> np.ndarray:
    """Symmetric square root of a PSD matrix via eigendecomposition."""
    arr = require_square(as_matrix(mat))
    evals, evecs = np.linalg.eigh((arr + arr.T) / 2.0)
    root = np.sqrt(np.maximum(evals, floor))
    return (evecs * root) @ evecs.T


@dataclass(frozen=True)
class StableFactorization:
    """Similarity ``target = basis @ contraction @ inv(basis)`` with a contractive core.

    ``contraction_norm`` is the spectral norm of the core (strictly below one)
    and ``conditioning`` is ``norm(basis) * norm(inv(basis))``.  Together they
    certify the geometric power bound
    ``norm(target^k) <= conditioning * contraction_norm**k``.
    """

    basis: np.ndarray
    contraction: np.ndarray
    contraction_norm: float
    conditioning: float

    def power_bound(self, k: int) -> float:
        """Certified upper bound on the spectral norm of the k-th power."""
        return self.conditioning * self.contraction_norm**k

    def reconstruct(self) -> np.ndarray:
        """Recover the factored matrix from the similarity."""
        return self.basis @ self.contraction @ np.linalg.inv(self.basis)


def stable_factorization(
    mat, *, stability_margin: float = DEFAULT_STABILITY_MARGIN
) -> StableFactorization:
    """Factor a stable matrix A as ``M theta M^-1`` with ``norm(theta) < 1``.

    When A is already a contraction the identity basis is returned, which
    gives the tightest possible conditioning of one.  Otherwise the basis is
    built from the Lyapunov solution P of ``P = A' P A + I``: with
    ``theta = P^{1/2} A P^{-1/2}`` one gets ``norm(theta)^2 = 1 - 1/eigmax(P)``,
    certified below one, and conditioning ``sqrt(cond(P))``.
    """
    a = require_square(as_matrix(mat))
    n = a.shape[0]
    rho = spectral_radius(a)
    if rho >= 1.0 - stability_margin:
        raise NotStableError(
            f"not stable: spectral radius {rho:.12g} is not below 1 - {stability_margin:g}"
        )

    norm_a = spectral_norm(a)
    if norm_a < 1.0:
        return StableFactorization(
            basis=np.eye(n), contraction=a.copy(), contraction_norm=norm_a, conditioning=1.0
        )

    lyap = solve_discrete_lyapunov(a, np.eye(n), stability_margin=stability_margin)
    evals, evecs = np.linalg.eigh(lyap)
    evals = np.maximum(evals, PSD_EIGENVALUE_FLOOR)
    root = np.sqrt(evals)
    half = (evecs * root) @ evecs.T
    inv_half = (evecs / root) @ evecs.T

    contraction = half @ a @ inv_half
    contraction_norm = spectral_norm(contraction)
    if contraction_norm >= 1.0:
        raise RuntimeError(
            f"factorization lost contractivity numerically (norm {contraction_norm:.17g})"
        )
    conditioning = float(np.sqrt(np.max(evals) / np.min(evals)))
    return StableFactorization(
        basis=inv_half,
        contraction=contraction,
        contraction_norm=contraction_norm,
        conditioning=conditioning,
    )
