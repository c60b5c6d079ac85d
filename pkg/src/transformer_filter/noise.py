"""Seeded, bounded-support disturbance streams for paired simulations.

The tracking guarantees are per-realization, so the disturbance model only
needs bounded support and reproducibility.  One source instance produces one
(w, v) stream; paired runs must share a single instance (or two instances
with the same seed) so both loops see identical realizations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import psd_sqrt
from .systems import LinearSystem

# recorded in output headers so results are portable across platforms
GENERATOR_ID = "numpy-pcg64"

NOISE_KINDS = ("gaussian", "uniform", "zero")


@dataclass(frozen=True)
class NoiseSpec:
    """Disturbance distribution: kind, overall scale, and support clip.

    ``gaussian`` draws standard normals truncated entrywise to [-clip, clip]
    before covariance shaping, so sup-norms are finite by construction.
    ``uniform`` draws from [-1, 1]; ``zero`` disables disturbances.
    """

    kind: str = "gaussian"
    scale: float = 1.0
    clip: float = 5.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if not np.isfinite(self.scale) or self.scale < 0.0:
            raise ValueError("noise scale must be finite and nonnegative")
        if not np.isfinite(self.clip) or self.clip <= 0.0:
            raise ValueError("noise clip must be finite and positive")


class DisturbanceSource:
    """Draws per-step (process, observation) disturbance pairs.

    Raw entries are shaped by the PSD square roots of the system's nominal
    covariances and multiplied by ``spec.scale``.  Draw order is fixed
    (process first, then observation) so a seed pins the entire stream.
    """

    def __init__(self, sys: LinearSystem, spec: NoiseSpec, seed: int):
        self.spec = spec
        self.seed = int(seed)
        self._rng = np.random.default_rng(self.seed)
        self._n = sys.n
        self._p = sys.p
        self._w_shaper = psd_sqrt(sys.w_cov)
        self._v_shaper = psd_sqrt(sys.v_cov)

    def _raw(self, size: int) -> np.ndarray:
        if self.spec.kind == "zero" or self.spec.scale == 0.0:
            # keep the rng advancing identically across kinds is NOT required;
            # zero noise simply never consumes randomness
            return np.zeros(size)
        if self.spec.kind == "gaussian":
            draw = self._rng.standard_normal(size)
            return np.clip(draw, -self.spec.clip, self.spec.clip)
        return self._rng.uniform(-1.0, 1.0, size)

    def draw(self) -> tuple[np.ndarray, np.ndarray]:
        """One step of (process disturbance, observation disturbance)."""
        w = self.spec.scale * (self._w_shaper @ self._raw(self._n))
        v = self.spec.scale * (self._v_shaper @ self._raw(self._p))
        return w, v

    def draw_many(self, steps: int) -> tuple[np.ndarray, np.ndarray]:
        """Stacked draws: (steps x n) process and (steps x p) observation arrays."""
        ws = np.empty((steps, self._n))
        vs = np.empty((steps, self._p))
        for t in range(steps):
            ws[t], vs[t] = self.draw()
        return ws, vs
