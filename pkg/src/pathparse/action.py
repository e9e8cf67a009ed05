"""Discretized classical action under pluggable Lagrangians.

Velocity is the forward difference between slices; the potential (or optical
index) of a step is the mean of its two endpoint values.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from .errors import AlreadyEvaluatedError, ValidationError
from .lattice import EnsemblePhaseSums, Path, PathEnsemble, SpacetimeLattice

KINDS = ("free", "harmonic", "potential_grid", "optical_index")


@dataclass(frozen=True)
class PhysicsConfig:
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValidationError(f"hbar must be positive (got {self.hbar})")
        if not self.mass > 0:
            raise ValidationError(f"mass must be positive (got {self.mass})")


@dataclass(frozen=True, eq=False)
class ActionFunctional:
    """Lagrangian choice.

    ``values`` is a ``(T, M)`` grid: potential for ``potential_grid``,
    refractive index for ``optical_index``. ``k0`` is the optical wavenumber;
    harmonic wells are centred on position ``center``.
    """

    kind: str = "free"
    omega: float = 0.0
    center: float = 0.0
    values: Optional[np.ndarray] = field(default=None, repr=False)
    k0: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown functional kind {self.kind!r}; expected one of {KINDS}")
        if self.omega < 0:
            raise ValidationError(f"omega must be >= 0 (got {self.omega})")
        if self.kind in ("potential_grid", "optical_index"):
            if self.values is None:
                raise ValidationError(f"{self.kind} functional needs a values grid")
            grid = np.array(self.values, dtype=np.float64)
            if grid.ndim != 2:
                raise ValidationError("values grid must be 2-D (slices x sites)")
            if not np.all(np.isfinite(grid)):
                raise ValidationError("values grid contains non-finite entries")
            if self.kind == "optical_index" and np.any(grid < 1.0):
                raise ValidationError("optical index must be >= 1 everywhere")
            grid.setflags(write=False)
            object.__setattr__(self, "values", grid)

    @classmethod
    def free(cls):
        return cls("free")

    @classmethod
    def harmonic(cls, omega, center=0.0):
        return cls("harmonic", omega=float(omega), center=float(center))

    @classmethod
    def potential_grid(cls, values):
        return cls("potential_grid", values=values)

    @classmethod
    def optical_index(cls, values, k0=1.0):
        return cls("optical_index", values=values, k0=float(k0))

    def check_covers(self, lattice: SpacetimeLattice):
        if self.values is not None and self.values.shape != (lattice.num_slices, lattice.num_sites):
            raise ValidationError(
                f"{self.kind} grid has shape {self.values.shape}, lattice needs "
                f"{(lattice.num_slices, lattice.num_sites)}"
            )

    def potential(self, lattice: SpacetimeLattice, physics: PhysicsConfig) -> np.ndarray:
        """Potential on every lattice site, shape ``(T, M)``."""
        shape = (lattice.num_slices, lattice.num_sites)
        if self.kind == "free":
            return np.zeros(shape)
        if self.kind == "harmonic":
            x = np.arange(lattice.num_sites) * lattice.dx - self.center
            row = 0.5 * physics.mass * self.omega**2 * x**2
            return np.broadcast_to(row, shape).copy()
        if self.kind == "potential_grid":
            self.check_covers(lattice)
            return np.array(self.values)
        raise ValidationError("optical_index functional has no potential")

    def to_dict(self) -> dict:
        doc = {"kind": self.kind}
        if self.kind == "harmonic":
            doc.update(omega=self.omega, center=self.center)
        if self.values is not None:
            doc["values"] = self.values.tolist()
        if self.kind == "optical_index":
            doc["k0"] = self.k0
        return doc


def functional_from_dict(doc: Optional[dict], lattice: Optional[SpacetimeLattice] = None):
    """Build a functional from a config mapping.

    ``potential_grid`` may give a full ``values`` grid or a ``uniform`` level plus
    ``patches`` of ``[slice, site, value]`` (needs the lattice for the shape).
    """
    if doc is None:
        return ActionFunctional.free()
    kind = doc.get("kind", "free")
    if kind == "free":
        return ActionFunctional.free()
    if kind == "harmonic":
        return ActionFunctional.harmonic(doc.get("omega", 0.0), doc.get("center", 0.0))
    values = doc.get("values")
    if values is None and lattice is not None:
        base = 1.0 if kind == "optical_index" else 0.0
        grid = np.full((lattice.num_slices, lattice.num_sites), float(doc.get("uniform", base)))
        for k, j, v in doc.get("patches", []):
            grid[int(k), int(j)] = float(v)
        values = grid
    if kind == "potential_grid":
        return ActionFunctional.potential_grid(values)
    if kind == "optical_index":
        return ActionFunctional.optical_index(values, doc.get("k0", 1.0))
    raise ValidationError(f"unknown functional kind {kind!r}")


def actions_for_sites(
    sites: np.ndarray,
    functional: ActionFunctional,
    physics: PhysicsConfig,
    lattice: SpacetimeLattice,
) -> np.ndarray:
    """Actions for a ``(n, T)`` block of site indices."""
    sites = np.asarray(sites, dtype=np.int64)
    n = sites.shape[0]
    if n == 0 or sites.shape[1] < 2:
        return np.zeros(n)
    slices = np.arange(sites.shape[1])
    disp = np.diff(sites, axis=1) * lattice.dx
    if functional.kind == "optical_index":
        functional.check_covers(lattice)
        index = functional.values[slices[None, :], sites]
        mean_index = 0.5 * (index[:, :-1] + index[:, 1:])
        length = np.sqrt(disp**2 + lattice.dt**2)
        # S/hbar is the optical phase
        return physics.hbar * functional.k0 * np.sum(mean_index * length, axis=1)
    V = functional.potential(lattice, physics)[slices[None, :], sites]
    mean_V = 0.5 * (V[:, :-1] + V[:, 1:])
    velocity = disp / lattice.dt
    lagrangian = 0.5 * physics.mass * velocity**2 - mean_V
    return np.sum(lagrangian * lattice.dt, axis=1)


def compute_action(
    path: Path,
    functional: ActionFunctional,
    physics: PhysicsConfig,
    lattice: SpacetimeLattice,
) -> float:
    if len(path.sites) != lattice.num_slices:
        raise ValidationError("path length does not match the lattice")
    return float(actions_for_sites(np.array([path.sites]), functional, physics, lattice)[0])


def evaluate_ensemble(
    ensemble: PathEnsemble, functional: ActionFunctional, physics: PhysicsConfig
) -> PathEnsemble:
    """Fill every path's action and the ensemble's compensated phase sums."""
    if ensemble.evaluated:
        raise AlreadyEvaluatedError("ensemble already carries actions; re-evaluation is refused")
    if ensemble.lattice is None:
        raise ValidationError("ensemble has no lattice to evaluate on")
    S = actions_for_sites(ensemble.sites, functional, physics, ensemble.lattice)
    paths = tuple(replace(p, action=float(s)) for p, s in zip(ensemble.paths, S))
    return _with_phase_sums(ensemble.lattice, paths, physics.hbar)


def ensemble_from_actions(actions, physics: Optional[PhysicsConfig] = None) -> PathEnsemble:
    """Latticeless ensemble carrying hand-chosen actions."""
    physics = physics or PhysicsConfig()
    acts = [float(a) for a in actions]
    if not all(np.isfinite(acts)):
        raise ValidationError("explicit actions must be finite")
    paths = tuple(Path((), a) for a in acts)
    return _with_phase_sums(None, paths, physics.hbar)


def _with_phase_sums(lattice, paths, hbar) -> PathEnsemble:
    phases = np.array([p.action for p in paths], dtype=np.float64) / hbar
    C, D = kernels.phase_sums(np.cos(phases), np.sin(phases))
    sums = EnsemblePhaseSums(float(C), float(D))
    return PathEnsemble(lattice=lattice, paths=paths, phase_sums=sums, hbar=hbar)
