"""Trajectory containers and their CSV serialization.

CSV layout: '#'-prefixed ``key = value`` metadata lines, then a header row,
then one row per time step.  Floats are printed with 17 significant digits,
which round-trips IEEE doubles exactly — identical runs therefore produce
bit-identical files, and every summary statistic is recomputable from the
file alone.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

FLOAT_FORMAT = "%.17g"


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % float(value)
    return str(value)


def _vector_columns(prefix: str, width: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(width)]


def _as_2d(arr, name: str) -> np.ndarray:
    out = np.asarray(arr, dtype=float)
    if out.ndim == 1:
        out = out[:, None]
    if out.ndim != 2:
        raise ValueError(f"{name} must be a (steps x dim) array")
    return out


@dataclass
class TrajectoryRecord:
    """Paired filtering run: plant, observations, and both estimate tracks.

    Row t holds the true state, the observation, the reference (optimal
    linear) estimate, the softmax-window estimate, their gap, and the
    distance from the softmax estimate to its own one-step interpolant.
    """

    times: np.ndarray
    states: np.ndarray
    observations: np.ndarray
    kalman_estimates: np.ndarray
    transformer_estimates: np.ndarray
    estimate_errors: np.ndarray
    interpolant_gaps: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=int)
        self.states = _as_2d(self.states, "states")
        self.observations = _as_2d(self.observations, "observations")
        self.kalman_estimates = _as_2d(self.kalman_estimates, "kalman_estimates")
        self.transformer_estimates = _as_2d(self.transformer_estimates, "transformer_estimates")
        self.estimate_errors = np.asarray(self.estimate_errors, dtype=float)
        self.interpolant_gaps = np.asarray(self.interpolant_gaps, dtype=float)
        steps = self.times.shape[0]
        for name in ("states", "observations", "kalman_estimates",
                     "transformer_estimates", "estimate_errors", "interpolant_gaps"):
            if getattr(self, name).shape[0] != steps:
                raise ValueError(f"{name} has {getattr(self, name).shape[0]} rows, expected {steps}")

    @property
    def horizon(self) -> int:
        return int(self.times[-1])

    @property
    def sup_error(self) -> float:
        return float(np.max(self.estimate_errors))

    @property
    def max_interpolant_gap(self) -> float:
        return float(np.max(self.interpolant_gaps))

    def header(self) -> list[str]:
        n = self.states.shape[1]
        p = self.observations.shape[1]
        return (
            ["t"]
            + _vector_columns("x", n)
            + _vector_columns("y", p)
            + _vector_columns("kalman", n)
            + _vector_columns("transformer", n)
            + ["estimate_error", "interpolant_gap"]
        )

    def rows(self):
        for idx in range(self.times.shape[0]):
            yield (
                [int(self.times[idx])]
                + list(self.states[idx])
                + list(self.observations[idx])
                + list(self.kalman_estimates[idx])
                + list(self.transformer_estimates[idx])
                + [self.estimate_errors[idx], self.interpolant_gaps[idx]]
            )

    def to_csv(self, path) -> None:
        write_csv(path, self.metadata, self.header(), self.rows())

    @classmethod
    def from_csv(cls, path) -> "TrajectoryRecord":
        metadata, header, data = read_csv(path)
        cols = _column_slices(header)
        return cls(
            times=data[:, cols["t"]].ravel(),
            states=data[:, cols["x"]],
            observations=data[:, cols["y"]],
            kalman_estimates=data[:, cols["kalman"]],
            transformer_estimates=data[:, cols["transformer"]],
            estimate_errors=data[:, cols["estimate_error"]].ravel(),
            interpolant_gaps=data[:, cols["interpolant_gap"]].ravel(),
            metadata=metadata,
        )


@dataclass
class ClosedLoopRecord:
    """Paired closed-loop run: softmax-window controller vs. the reference loop.

    Both trajectories are driven by the identical disturbance realization;
    ``state_errors`` is the per-step distance between the two plant states.
    """

    times: np.ndarray
    states: np.ndarray
    estimates: np.ndarray
    interpolants: np.ndarray
    controls: np.ndarray
    ref_states: np.ndarray
    ref_estimates: np.ndarray
    ref_controls: np.ndarray
    state_errors: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=int)
        for name in ("states", "estimates", "interpolants", "controls",
                     "ref_states", "ref_estimates", "ref_controls"):
            setattr(self, name, _as_2d(getattr(self, name), name))
        self.state_errors = np.asarray(self.state_errors, dtype=float)
        steps = self.times.shape[0]
        for name in ("states", "estimates", "interpolants", "controls",
                     "ref_states", "ref_estimates", "ref_controls", "state_errors"):
            if getattr(self, name).shape[0] != steps:
                raise ValueError(f"{name} has {getattr(self, name).shape[0]} rows, expected {steps}")

    @property
    def horizon(self) -> int:
        return int(self.times[-1])

    @property
    def sup_state_error(self) -> float:
        return float(np.max(self.state_errors))

    def header(self) -> list[str]:
        n = self.states.shape[1]
        m = self.controls.shape[1]
        return (
            ["t"]
            + _vector_columns("x", n)
            + _vector_columns("xhat", n)
            + _vector_columns("xtilde", n)
            + _vector_columns("u", m)
            + _vector_columns("ref_x", n)
            + _vector_columns("ref_xhat", n)
            + _vector_columns("ref_u", m)
            + ["state_error"]
        )

    def rows(self):
        for idx in range(self.times.shape[0]):
            yield (
                [int(self.times[idx])]
                + list(self.states[idx])
                + list(self.estimates[idx])
                + list(self.interpolants[idx])
                + list(self.controls[idx])
                + list(self.ref_states[idx])
                + list(self.ref_estimates[idx])
                + list(self.ref_controls[idx])
                + [self.state_errors[idx]]
            )

    def to_csv(self, path) -> None:
        write_csv(path, self.metadata, self.header(), self.rows())

    @classmethod
    def from_csv(cls, path) -> "ClosedLoopRecord":
        metadata, header, data = read_csv(path)
        cols = _column_slices(header)
        return cls(
            times=data[:, cols["t"]].ravel(),
            states=data[:, cols["x"]],
            estimates=data[:, cols["xhat"]],
            interpolants=data[:, cols["xtilde"]],
            controls=data[:, cols["u"]],
            ref_states=data[:, cols["ref_x"]],
            ref_estimates=data[:, cols["ref_xhat"]],
            ref_controls=data[:, cols["ref_u"]],
            state_errors=data[:, cols["state_error"]].ravel(),
            metadata=metadata,
        )


def write_csv(path, metadata: dict, header: list[str], rows) -> None:
    """Write metadata comments, a header row, then formatted data rows."""
    buf = io.StringIO()
    for key in metadata:
        buf.write(f"# {key} = {_fmt(metadata[key])}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w", newline="") as handle:
            handle.write(text)


def read_csv(path) -> tuple[dict, list[str], np.ndarray]:
    """Inverse of :func:`write_csv`; metadata values come back as strings."""
    if hasattr(path, "read"):
        lines = path.read().splitlines()
    else:
        with open(path, "r", newline="") as handle:
            lines = handle.read().splitlines()
    metadata: dict = {}
    body_start = 0
    for idx, line in enumerate(lines):
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            metadata[key.strip()] = value.strip()
            body_start = idx + 1
        else:
            break
    reader = csv.reader(lines[body_start:])
    table = [row for row in reader if row]
    if not table:
        raise ValueError("CSV file has no header row")
    header = table[0]
    data = np.array([[float(cell) for cell in row] for row in table[1:]], dtype=float)
    if data.size == 0:
        data = data.reshape(0, len(header))
    return metadata, header, data


def _column_slices(header: list[str]) -> dict:
    """Group header names into slices by their alphabetic prefix."""
    slices: dict = {}
    idx = 0
    while idx < len(header):
        name = header[idx]
        prefix = name.rstrip("0123456789")
        stop = idx + 1
        while stop < len(header) and header[stop].rstrip("0123456789") == prefix:
            stop += 1
        slices[prefix] = slice(idx, stop)
        idx = stop
    return slices
