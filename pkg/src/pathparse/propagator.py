"""Joint and conditional probabilities from amplitude sums, their real
pair-sum forms, and an independent slice-by-slice transfer-matrix oracle."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .action import ActionFunctional, PhysicsConfig, evaluate_ensemble
from .errors import NormalizationError, ValidationError
from .lattice import DEFAULT_PATH_BUDGET, PathEnsemble, SpacetimeLattice, enumerate_paths

DIRECT_PAIR_LIMIT = 200


@dataclass
class ProbabilityReport:
    joint: float
    amplitude: complex
    pair_sum: float
    num_paths: int
    conditional: Optional[dict] = None
    site_joints: Optional[dict] = None
    note: str = ""

    def to_dict(self) -> dict:
        doc = {
            "joint": self.joint,
            "amplitude": [self.amplitude.real, self.amplitude.imag],
            "pair_sum": self.pair_sum,
            "num_paths": self.num_paths,
            "note": self.note,
        }
        if self.conditional is not None:
            doc["conditional"] = {str(k): v for k, v in self.conditional.items()}
            doc["site_joints"] = {str(k): v for k, v in self.site_joints.items()}
        return doc


def _require_evaluated(ensemble: PathEnsemble, physics: Optional[PhysicsConfig]):
    if not ensemble.evaluated:
        raise ValidationError("ensemble must be evaluated before computing probabilities")
    if physics is not None and physics.hbar != ensemble.hbar:
        raise ValidationError(
            f"physics hbar={physics.hbar} differs from the ensemble's hbar={ensemble.hbar}"
        )


def joint_probability(ensemble: PathEnsemble, physics: Optional[PhysicsConfig] = None) -> ProbabilityReport:
    """Squared magnitude of the summed unit phasors."""
    _require_evaluated(ensemble, physics)
    C, D = ensemble.phase_sums.C, ensemble.phase_sums.D
    note = "" if len(ensemble) else "severed: no path connects the two events"
    return ProbabilityReport(
        joint=C * C + D * D,
        amplitude=complex(C, D),
        pair_sum=pair_sum(ensemble),
        num_paths=len(ensemble),
        note=note,
    )


def pair_sum(
    ensemble: PathEnsemble, physics: Optional[PhysicsConfig] = None, method: str = "auto"
) -> float:
    """Sum of ``cos((S_A - S_B)/hbar)`` over all ordered path pairs.

    ``direct`` walks every pair; ``phase_sums`` uses ``C**2 + D**2``; ``auto``
    goes direct up to ``DIRECT_PAIR_LIMIT`` paths.
    """
    _require_evaluated(ensemble, physics)
    if method == "auto":
        method = "direct" if len(ensemble) <= DIRECT_PAIR_LIMIT else "phase_sums"
    if method == "direct":
        if len(ensemble) == 0:
            return 0.0
        return float(kernels.direct_pair_sum(ensemble.phases))
    if method == "phase_sums":
        return ensemble.phase_sums.probability
    raise ValidationError(f"unknown pair-sum method {method!r}")


def site_joints(
    lattice: SpacetimeLattice,
    functional: ActionFunctional,
    physics: PhysicsConfig,
    budget: Optional[int] = DEFAULT_PATH_BUDGET,
) -> dict:
    """Final site -> joint report, enumerating paths to each open final site."""
    final = lattice.num_slices - 1
    out = {}
    for site in lattice.open_sites(final):
        ens = evaluate_ensemble(enumerate_paths(lattice.with_end(site), budget), functional, physics)
        out[site] = joint_probability(ens)
    return out


def conditional_distribution(
    lattice: SpacetimeLattice,
    functional: ActionFunctional,
    physics: PhysicsConfig,
    budget: Optional[int] = DEFAULT_PATH_BUDGET,
) -> ProbabilityReport:
    """Joints over every open final site, normalized by their sum."""
    per_site = site_joints(lattice, functional, physics, budget)
    joints = {site: rep.joint for site, rep in per_site.items()}
    total = kernels.neumaier_sum(list(joints.values()))
    if not total > 0:
        raise NormalizationError("every final-site joint probability is zero; cannot normalize")
    own = per_site.get(lattice.end_site)
    if own is None:
        own = ProbabilityReport(0.0, 0j, 0.0, 0, note="configured end site is blocked")
    return ProbabilityReport(
        joint=own.joint,
        amplitude=own.amplitude,
        pair_sum=own.pair_sum,
        num_paths=own.num_paths,
        conditional={site: j / total for site, j in joints.items()},
        site_joints=joints,
        note=own.note,
    )


def _step_phase(k, lattice, functional, physics, V, index):
    """Phase ``S_step/hbar`` for every (from, to) site pair between slices k and k+1."""
    x = np.arange(lattice.num_sites) * lattice.dx
    disp = x[None, :] - x[:, None]
    if functional.kind == "optical_index":
        mean_n = 0.5 * (index[k][:, None] + index[k + 1][None, :])
        return functional.k0 * mean_n * np.sqrt(disp**2 + lattice.dt**2)
    kinetic = 0.5 * physics.mass * (disp / lattice.dt) ** 2
    mean_V = 0.5 * (V[k][:, None] + V[k + 1][None, :])
    return (kinetic - mean_V) * lattice.dt / physics.hbar


def transfer_matrix_propagator(
    lattice: SpacetimeLattice, functional: ActionFunctional, physics: PhysicsConfig
) -> np.ndarray:
    """Amplitude to every final site, as a product of per-step kernels.

    Independent of path enumeration; blocked sites (including blocked final
    sites) carry zero amplitude.
    """
    T, M = lattice.num_slices, lattice.num_sites
    mask = lattice.open_mask()
    V = index = None
    if functional.kind == "optical_index":
        functional.check_covers(lattice)
        index = functional.values
    else:
        V = functional.potential(lattice, physics)
    psi = np.zeros(M, dtype=np.complex128)
    psi[lattice.start_site] = 1.0
    for k in range(T - 1):
        kernel = np.exp(1j * _step_phase(k, lattice, functional, physics, V, index))
        psi = (psi @ kernel) * mask[k + 1]
    return psi
