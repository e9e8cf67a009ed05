"""Discretized spacetime stage and enumeration of the endpoint-pinned path ensemble."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional

import numpy as np

from .errors import (
    BudgetExceededError,
    EndpointBlockedError,
    SliceCountError,
    StepSizeError,
    ValidationError,
)

DEFAULT_PATH_BUDGET = 2_000_000


@dataclass(frozen=True)
class SpacetimeLattice:
    """Time slices ``0..T-1`` by spatial sites ``0..M-1``, with two pinned events.

    ``blocked`` holds forbidden ``(slice, site)`` pairs (barriers). Sites on the
    endpoint slices may be blocked by scenario code, the endpoints themselves never.
    """

    num_slices: int
    num_sites: int
    dt: float = 1.0
    dx: float = 1.0
    start_site: int = 0
    end_site: int = 0
    blocked: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "blocked", frozenset((int(k), int(j)) for k, j in self.blocked))
        if self.num_slices < 2:
            raise SliceCountError(f"num_slices must be >= 2 (got {self.num_slices})")
        if self.num_sites < 1:
            raise ValidationError(f"num_sites must be >= 1 (got {self.num_sites})")
        if not self.dt > 0:
            raise StepSizeError(f"dt must be positive (got {self.dt})")
        if not self.dx > 0:
            raise StepSizeError(f"dx must be positive (got {self.dx})")
        for name, site in (("start_site", self.start_site), ("end_site", self.end_site)):
            if not 0 <= site < self.num_sites:
                raise ValidationError(f"{name}={site} outside [0, {self.num_sites})")
        for k, j in self.blocked:
            if not (0 <= k < self.num_slices and 0 <= j < self.num_sites):
                raise ValidationError(f"blocked site {(k, j)} lies outside the lattice")
        if (0, self.start_site) in self.blocked:
            raise EndpointBlockedError(f"start event (0, {self.start_site}) is blocked")
        if (self.num_slices - 1, self.end_site) in self.blocked:
            raise EndpointBlockedError(
                f"end event ({self.num_slices - 1}, {self.end_site}) is blocked"
            )

    @property
    def T(self) -> int:
        return self.num_slices

    @property
    def M(self) -> int:
        return self.num_sites

    def is_open(self, k: int, j: int) -> bool:
        return (k, j) not in self.blocked

    def open_sites(self, k: int) -> list[int]:
        return [j for j in range(self.num_sites) if (k, j) not in self.blocked]

    def open_mask(self) -> np.ndarray:
        mask = np.ones((self.num_slices, self.num_sites), dtype=bool)
        for k, j in self.blocked:
            mask[k, j] = False
        return mask

    def with_end(self, end_site: int) -> "SpacetimeLattice":
        return SpacetimeLattice(
            self.num_slices, self.num_sites, self.dt, self.dx, self.start_site, end_site, self.blocked
        )

    def to_dict(self) -> dict:
        return {
            "num_slices": self.num_slices,
            "num_sites": self.num_sites,
            "dt": self.dt,
            "dx": self.dx,
            "start_site": self.start_site,
            "end_site": self.end_site,
            "blocked": sorted([k, j] for k, j in self.blocked),
        }


def build_lattice(
    num_slices: int,
    num_sites: int,
    dt: float = 1.0,
    dx: float = 1.0,
    start_site: Optional[int] = None,
    end_site: Optional[int] = None,
    blocked: Iterable = (),
) -> SpacetimeLattice:
    """Validated lattice; endpoints default to the central site."""
    centre = (num_sites - 1) // 2 if num_sites > 0 else 0
    return SpacetimeLattice(
        num_slices=int(num_slices),
        num_sites=int(num_sites),
        dt=float(dt),
        dx=float(dx),
        start_site=centre if start_site is None else int(start_site),
        end_site=centre if end_site is None else int(end_site),
        blocked=frozenset(tuple(b) for b in blocked),
    )


def lattice_from_dict(doc: dict) -> SpacetimeLattice:
    known = {"num_slices", "num_sites", "dt", "dx", "start_site", "end_site", "blocked"}
    unknown = set(doc) - known - {"path_budget"}
    if unknown:
        raise ValidationError(f"unknown lattice keys: {sorted(unknown)}")
    for key in ("num_slices", "num_sites"):
        if key not in doc:
            raise ValidationError(f"lattice config is missing '{key}'")
    return build_lattice(**{k: v for k, v in doc.items() if k in known})


@dataclass(frozen=True)
class Path:
    sites: tuple
    action: Optional[float] = None

    def __len__(self):
        return len(self.sites)


@dataclass(frozen=True)
class EnsemblePhaseSums:
    C: float
    D: float

    @property
    def probability(self) -> float:
        return self.C * self.C + self.D * self.D


@dataclass(frozen=True)
class PathEnsemble:
    """The full path set between the two events, optionally carrying actions.

    ``lattice`` is ``None`` for ensembles built straight from an action list.
    """

    lattice: Optional[SpacetimeLattice]
    paths: tuple
    phase_sums: Optional[EnsemblePhaseSums] = None
    hbar: Optional[float] = None

    def __len__(self):
        return len(self.paths)

    @property
    def evaluated(self) -> bool:
        return self.phase_sums is not None

    @cached_property
    def sites(self) -> np.ndarray:
        if not self.paths:
            width = self.lattice.num_slices if self.lattice is not None else 0
            return np.zeros((0, width), dtype=np.int64)
        return np.array([p.sites for p in self.paths], dtype=np.int64)

    @cached_property
    def actions(self) -> np.ndarray:
        if not self.evaluated:
            raise ValidationError("ensemble has no actions yet; call evaluate_ensemble first")
        return np.array([p.action for p in self.paths], dtype=np.float64)

    @cached_property
    def phases(self) -> np.ndarray:
        return self.actions / self.hbar

    @cached_property
    def cos(self) -> np.ndarray:
        return np.cos(self.phases)

    @cached_property
    def sin(self) -> np.ndarray:
        return np.sin(self.phases)


def path_count(lattice: SpacetimeLattice, budget: Optional[int] = DEFAULT_PATH_BUDGET) -> int:
    """Number of unblocked paths, by slice-to-slice reachability counting.

    Any site can be reached from any site in one step, so each open interior
    site inherits the total count of the previous slice.
    """
    T = lattice.num_slices
    total = 1
    for k in range(1, T - 1):
        total *= len(lattice.open_sites(k))
        if total == 0:
            break
    if budget is not None and total > budget:
        raise BudgetExceededError(
            f"lattice has {total} paths, over the budget of {budget}", total
        )
    return total


def enumerate_paths(
    lattice: SpacetimeLattice, budget: Optional[int] = DEFAULT_PATH_BUDGET
) -> PathEnsemble:
    """All barrier-avoiding paths, lexicographic by interior sites."""
    path_count(lattice, budget)
    interior = [lattice.open_sites(k) for k in range(1, lattice.num_slices - 1)]
    head, tail = (lattice.start_site,), (lattice.end_site,)
    paths = tuple(Path(head + middle + tail) for middle in itertools.product(*interior))
    return PathEnsemble(lattice=lattice, paths=paths)
