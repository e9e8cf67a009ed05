"""Spacetime field histories reconstructed from path sets.

Amplitude squared follows path density on each slice. Phase is transported
from the start event: the phase at a site is the mean phase of the member
paths' previous sites plus ``(m/hbar) * v * dx`` for the step, where ``v`` is
the mean incoming velocity at the site and ``dx = v * dt`` its displacement.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .action import PhysicsConfig
from .errors import NumericalIntegrityError, ValidationError
from .lattice import PathEnsemble
from .parsing import PathSet

COHERENCE_SLACK = 1e-12


@dataclass
class FieldHistory:
    members: tuple
    counts: np.ndarray
    amplitude: np.ndarray
    phase: np.ndarray
    phase_unwrapped: np.ndarray = field(repr=False)
    velocity_in: np.ndarray = field(repr=False)
    velocity_out: np.ndarray = field(repr=False)
    slope_jump: np.ndarray = field(repr=False)
    probability: float = 0.0
    coherence: float = 1.0
    anomaly: float = 0.0

    @property
    def occupied(self) -> np.ndarray:
        return self.counts > 0

    def to_dict(self) -> dict:
        def grid(a):
            return [[None if not np.isfinite(v) else float(v) for v in row] for row in a]

        return {
            "members": list(self.members),
            "probability": self.probability,
            "coherence": self.coherence,
            "anomaly": self.anomaly,
            "counts": self.counts.tolist(),
            "amplitude": grid(self.amplitude),
            "phase": grid(self.phase),
            "slope_jump": grid(self.slope_jump),
        }

    def to_csv(self, locus_rows=()) -> str:
        """Dense grid, one row per lattice site; ``locus`` flags anomaly rows."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["slice", "site", "amplitude", "phase", "count", "slope_jump", "locus"])
        T, M = self.counts.shape
        for k in range(T):
            for j in range(M):
                phase = self.phase[k, j]
                jump = self.slope_jump[k, j]
                writer.writerow([
                    k, j, repr(float(self.amplitude[k, j])),
                    "" if not np.isfinite(phase) else repr(float(phase)),
                    int(self.counts[k, j]),
                    "" if not np.isfinite(jump) else repr(float(jump)),
                    int(k in locus_rows),
                ])
        return buf.getvalue()


def anomaly_measure(path_set: PathSet) -> float:
    """``1 - F/n**2``: 0 when every member shares a phase, 1 when they cancel."""
    return 1.0 - coherence_of(path_set)


def coherence_of(path_set: PathSet) -> float:
    n = path_set.size
    if n == 0:
        raise ValidationError("coherence of an empty set is undefined")
    c = path_set.probability / (n * n)
    if c < -COHERENCE_SLACK or c > 1.0 + COHERENCE_SLACK:
        raise NumericalIntegrityError(f"coherence {c!r} escapes [0, 1]")
    return min(max(c, 0.0), 1.0)


def _step_phase(v, physics: PhysicsConfig, dt: float):
    return (physics.mass / physics.hbar) * v * (v * dt)


def _site_mean(values, slices, sites, shape):
    """Mean of ``values`` grouped by (slice, site); NaN where nothing lands."""
    total = np.zeros(shape)
    count = np.zeros(shape)
    np.add.at(total, (slices, sites), values)
    np.add.at(count, (slices, sites), 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / np.where(count > 0, count, 1.0), np.nan)


def reconstruct_field(path_set: PathSet, ensemble: PathEnsemble, physics: Optional[PhysicsConfig] = None) -> FieldHistory:
    if ensemble.lattice is None:
        raise ValidationError("field reconstruction needs a lattice-backed ensemble")
    if path_set.size == 0:
        raise ValidationError("cannot reconstruct a field from an empty path set")
    physics = physics or PhysicsConfig(hbar=ensemble.hbar or 1.0)
    lat = ensemble.lattice
    T, M = lat.num_slices, lat.num_sites
    sites = ensemble.sites[list(path_set.member_indices)]
    n = sites.shape[0]
    rows = np.broadcast_to(np.arange(T), sites.shape)

    counts = np.zeros((T, M), dtype=np.int64)
    np.add.at(counts, (rows, sites), 1)
    amplitude = np.sqrt(counts / counts.sum(axis=1, keepdims=True))

    velocity = np.diff(sites, axis=1) * lat.dx / lat.dt
    v_in = np.full((T, M), np.nan)
    v_out = np.full((T, M), np.nan)
    if T > 1:
        v_in[1:] = _site_mean(velocity.ravel(), (rows[:, 1:] - 1).ravel(), sites[:, 1:].ravel(), (T - 1, M))
        v_out[:-1] = _site_mean(velocity.ravel(), rows[:, :-1].ravel(), sites[:, :-1].ravel(), (T - 1, M))

    phase = np.full((T, M), np.nan)
    phase[0, lat.start_site] = 0.0
    for k in range(1, T):
        prev = phase[k - 1, sites[:, k - 1]]
        mean_prev = _site_mean(prev, np.zeros(n, dtype=np.int64), sites[:, k], (1, M))[0]
        phase[k] = mean_prev + _step_phase(v_in[k], physics, lat.dt)

    jump = np.full((T, M), np.nan)
    if T > 2:
        jump[1:-1] = (physics.mass / physics.hbar) * np.abs(v_out[1:-1] - v_in[1:-1]) * lat.dx

    coherence = coherence_of(path_set)
    return FieldHistory(
        members=path_set.member_indices,
        counts=counts,
        amplitude=amplitude,
        phase=np.mod(phase, 2 * np.pi),
        phase_unwrapped=phase,
        velocity_in=v_in,
        velocity_out=v_out,
        slope_jump=jump,
        probability=path_set.probability,
        coherence=coherence,
        anomaly=1.0 - coherence,
    )


@dataclass
class PhaseFrontReport:
    max_deviation: float
    max_deviation_off_locus: float
    deviation_by_row: list
    slope_jump_by_row: list
    locus_rows: list

    def to_dict(self) -> dict:
        return {
            "max_deviation": self.max_deviation,
            "max_deviation_off_locus": self.max_deviation_off_locus,
            "deviation_by_row": self.deviation_by_row,
            "slope_jump_by_row": self.slope_jump_by_row,
            "locus_rows": self.locus_rows,
        }


def phase_front_check(
    history: FieldHistory,
    path_set: PathSet,
    ensemble: PathEnsemble,
    physics: Optional[PhysicsConfig] = None,
    jump_tol: float = 1e-9,
) -> PhaseFrontReport:
    """Compare the field's phase steps with each member's own de Broglie step.

    Rows whose phase slope jumps (member paths bend there) form the anomaly
    locus and are reported apart from the deviation bound.
    """
    physics = physics or PhysicsConfig(hbar=ensemble.hbar or 1.0)
    lat = ensemble.lattice
    T = lat.num_slices
    sites = ensemble.sites[list(path_set.member_indices)]
    velocity = np.diff(sites, axis=1) * lat.dx / lat.dt
    phi = history.phase_unwrapped
    dev_rows = [0.0] * T
    jump_rows = [0.0] * T
    for k in range(1, T - 1):
        predicted = phi[k - 1, sites[:, k - 1]] + _step_phase(velocity[:, k - 1], physics, lat.dt)
        dev_rows[k] = float(np.max(np.abs(phi[k, sites[:, k]] - predicted)))
        row = history.slope_jump[k][history.counts[k] > 0]
        jump_rows[k] = float(np.max(row)) if row.size else 0.0
    locus = [k for k in range(1, T - 1) if jump_rows[k] > jump_tol]
    off = [dev_rows[k] for k in range(1, T - 1) if k not in locus]
    return PhaseFrontReport(
        max_deviation=max(dev_rows[1:-1], default=0.0),
        max_deviation_off_locus=max(off, default=0.0),
        deviation_by_row=dev_rows,
        slope_jump_by_row=jump_rows,
        locus_rows=locus,
    )
