"""Canned experiments: photon exchange with kink families, focusing lens,
double slit and triple slit. Each runs enumerate -> act -> parse ->
reconstruct and keeps every module output it reports."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .action import ActionFunctional, PhysicsConfig, evaluate_ensemble
from .errors import BudgetExceededError, ValidationError
from .field import phase_front_check, reconstruct_field
from .lattice import SpacetimeLattice, build_lattice, enumerate_paths
from .parsing import (
    SolverConfig,
    build_partition,
    enumerate_all_parsings,
    find_parsing,
)
from .propagator import conditional_distribution, joint_probability, site_joints

KINDS = ("free_exchange", "focusing_index", "double_slit", "triple_slit")
FAMILY_NAMES = {0: "straight", 1: "one_kink", 2: "two_kink"}


@dataclass
class ScenarioConfig:
    kind: str
    num_slices: int
    num_sites: int
    dt: float = 1.0
    dx: float = 1.0
    start_site: Optional[int] = None
    end_site: Optional[int] = None
    barrier_slice: Optional[int] = None
    slit_sites: tuple = ()
    # extra phase (radians) per slit, injected as a potential patch on the slit site
    slit_phases: tuple = ()
    functional: ActionFunctional = field(default_factory=ActionFunctional.free)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    k0: float = 1.0
    max_fields: int = 64

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        self.slit_sites = tuple(int(s) for s in self.slit_sites)
        if self.kind in ("double_slit", "triple_slit"):
            need = 2 if self.kind == "double_slit" else 3
            if len(self.slit_sites) != need:
                raise ValidationError(f"{self.kind} needs exactly {need} slit sites")
            if len(set(self.slit_sites)) != need:
                raise ValidationError("slit sites must be distinct")
            if any(not 0 <= s < self.num_sites for s in self.slit_sites):
                raise ValidationError("slit site outside the lattice")
            if self.barrier_slice is None:
                self.barrier_slice = (self.num_slices - 1) // 2
            if not 0 < self.barrier_slice < self.num_slices - 1:
                raise ValidationError("barrier must sit on an interior slice")
            if self.slit_phases and len(self.slit_phases) != need:
                raise ValidationError("slit_phases needs one entry per slit")

    def base_lattice(self, blocked=()) -> SpacetimeLattice:
        return build_lattice(
            self.num_slices, self.num_sites, self.dt, self.dx, self.start_site, self.end_site, blocked
        )


@dataclass
class ScenarioReport:
    kind: str
    probability: dict
    partition: Optional[dict] = None
    fields: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    field_grids: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "probability": self.probability,
            "partition": self.partition,
            "fields": self.fields,
            "metrics": self.metrics,
        }


# -- helpers ------------------------------------------------------------------


def kink_count(sites) -> int:
    steps = np.diff(np.asarray(sites))
    return int(np.count_nonzero(steps[1:] != steps[:-1]))


def kink_family(sites, num_slices: int) -> str:
    """Family label by the number of velocity changes along the path.

    With a single interior slice every path can bend only at the mid-plane,
    so the straight path joins the one-kink family there.
    """
    if num_slices == 3:
        return "one_kink"
    return FAMILY_NAMES.get(kink_count(sites), "many_kink")


def focusing_profile(lattice: SpacetimeLattice, k0: float = 1.0) -> np.ndarray:
    """Index grid giving every path the same optical phase.

    A lens on the single interior slice: background index 1, and the lens
    index at each site chosen so the longest route has index 1.
    """
    if lattice.num_slices != 3:
        raise ValidationError("focusing profile needs exactly one interior slice (num_slices=3)")
    x = np.arange(lattice.num_sites) * lattice.dx
    xs, xe = x[lattice.start_site], x[lattice.end_site]
    length = np.sqrt((x - xs) ** 2 + lattice.dt**2) + np.sqrt((xe - x) ** 2 + lattice.dt**2)
    phase = k0 * length.max()  # (1 + 1)/2 * longest length
    grid = np.ones((3, lattice.num_sites))
    grid[1] = 2.0 * phase / (k0 * length) - 1.0
    return grid


def _functional_for(cfg: ScenarioConfig, lattice: SpacetimeLattice) -> ActionFunctional:
    """The configured functional with slit phase patches, cut to the lattice's slices."""
    f = cfg.functional
    T = lattice.num_slices
    patched = bool(cfg.slit_phases) and any(cfg.slit_phases)
    if f.kind == "optical_index":
        if patched:
            raise ValidationError("slit phase patches need a potential-based functional")
        return f if f.values.shape[0] == T else ActionFunctional.optical_index(f.values[:T], f.k0)
    if not patched and (f.values is None or f.values.shape[0] == T):
        return f
    V = f.potential(cfg.base_lattice(), cfg.physics)
    if patched:
        for site, phi in zip(cfg.slit_sites, cfg.slit_phases):
            # the site enters two steps at half weight each: S shifts by -V*dt
            V[cfg.barrier_slice, site] += -phi * cfg.physics.hbar / cfg.dt
    return ActionFunctional.potential_grid(V[:T])


def slit_lattice(cfg: ScenarioConfig, open_slits, num_slices: Optional[int] = None, end_site=None):
    """Barrier with only ``open_slits`` open.

    With ``num_slices = barrier_slice + 1`` the detectors sit on the barrier
    plane itself and ``end_site`` must be one of the slits.
    """
    T = num_slices or cfg.num_slices
    blocked = {(cfg.barrier_slice, j) for j in range(cfg.num_sites) if j not in open_slits}
    end = cfg.end_site if end_site is None else end_site
    return build_lattice(T, cfg.num_sites, cfg.dt, cfg.dx, cfg.start_site, end, blocked)


def _fields_for(partition, ensemble, cfg, label):
    out = []
    grids = {}
    for i, s in enumerate(partition.sets[: cfg.max_fields]):
        hist = reconstruct_field(s, ensemble, cfg.physics)
        check = phase_front_check(hist, s, ensemble, cfg.physics)
        name = f"{label}_{i:03d}"
        doc = hist.to_dict()
        doc["name"] = name
        doc["phase_front"] = check.to_dict()
        out.append(doc)
        grids[name] = hist.to_csv(check.locus_rows)
    return out, grids


def _fringe_rows(lattice, report):
    return [
        {"site": j, "position": j * lattice.dx, "probability": p}
        for j, p in sorted(report.conditional.items())
    ]


# -- scenarios -----------------------------------------------------------------


def run_free_exchange(cfg: ScenarioConfig) -> ScenarioReport:
    """Photon exchange between two fixed events, parsed two ways.

    The geometric parsing groups paths by kink family; the solver parsing is
    guaranteed valid. Fields are reconstructed for both.
    """
    lattice = cfg.base_lattice()
    functional = cfg.functional
    if cfg.kind == "focusing_index":
        functional = ActionFunctional.optical_index(focusing_profile(lattice, cfg.k0), cfg.k0)
    ensemble = evaluate_ensemble(enumerate_paths(lattice), functional, cfg.physics)
    prob = joint_probability(ensemble)

    families: dict = {}
    for i, p in enumerate(ensemble.paths):
        families.setdefault(kink_family(p.sites, lattice.num_slices), []).append(i)
    order = ["straight", "one_kink", "two_kink", "many_kink"]
    names = [f for f in order if f in families]
    geometric = build_partition([families[f] for f in names], ensemble, cfg.solver)
    by_first = {s.member_indices[0]: (s, r) for s, r in zip(geometric.sets, geometric.residuals)}
    family_rows = []
    for f in names:
        s, r = by_first[families[f][0]]
        family_rows.append({
            "family": f,
            "size": s.size,
            "F": s.probability,
            "residual": r,
            "coherence": s.probability / s.size**2,
            "classification": s.classification,
        })

    parsing = find_parsing(ensemble, cfg.solver)
    geo_fields, geo_grids = _fields_for(geometric, ensemble, cfg, "geometric")
    par_fields, par_grids = _fields_for(parsing, ensemble, cfg, "parsing")
    metrics = {
        "num_paths": len(ensemble),
        "families": family_rows,
        "geometric_strict_valid": geometric.strict_valid,
        "geometric_relaxed_valid": geometric.relaxed_valid,
        "geometric_global_residual": geometric.global_residual,
        "parsing_num_sets": parsing.num_sets,
    }
    if cfg.kind == "focusing_index":
        metrics["focusing_profile"] = functional.values.tolist()
        metrics["note"] = "optical-phase stand-in for a photon action"
    return ScenarioReport(
        kind=cfg.kind,
        probability=prob.to_dict(),
        partition=parsing.to_dict(),
        fields=geo_fields + par_fields,
        metrics=metrics,
        tables={"families": family_rows},
        field_grids={**geo_grids, **par_grids},
    )


def _slit_of(ensemble, barrier):
    return [int(p.sites[barrier]) for p in ensemble.paths]


def _slit_pure(partition, slit_of) -> bool:
    return all(len({slit_of[i] for i in s.member_indices}) == 1 for s in partition.sets)


def _slit_parse_summary(ensemble, cfg, slit_of):
    """Oracle (or solver, above the oracle budget) view of slit purity."""
    n = len(ensemble)
    summary = {"num_paths": n}
    try:
        valid = enumerate_all_parsings(ensemble, cfg.solver)
    except BudgetExceededError:
        summary["oracle"] = f"skipped: n={n} exceeds the exhaustive limit"
        valid = None
    if valid is not None:
        fine = [p for p in valid if p.num_sets >= 2]
        pure = [p for p in valid if _slit_pure(p, slit_of)]
        summary.update(
            valid_partitions=len(valid),
            fine_partitions=len(fine),
            slit_pure_valid_partitions=len(pure),
            slit_pure_parsing_exists=bool(pure),
            fine_all_slit_pure=all(_slit_pure(p, slit_of) for p in fine),
        )
    # the partition into slit families themselves
    groups: dict = {}
    for i, s in enumerate(slit_of):
        groups.setdefault(s, []).append(i)
    if n:
        family_split = build_partition(list(groups.values()), ensemble, cfg.solver)
        summary["slit_family_split_residuals"] = family_split.residuals
        summary["slit_family_split_strict_valid"] = family_split.strict_valid
    solver = find_parsing(ensemble, cfg.solver)
    summary["solver_num_sets"] = solver.num_sets
    summary["solver_slit_pure"] = _slit_pure(solver, slit_of) if n else True
    return summary


def run_double_slit(cfg: ScenarioConfig) -> ScenarioReport:
    """Fringes, slit-blocking ratios, and near/far measurement parsing."""
    s1, s2 = cfg.slit_sites
    lattice = slit_lattice(cfg, (s1, s2))
    functional = _functional_for(cfg, lattice)
    cond = conditional_distribution(lattice, functional, cfg.physics)
    one = {}
    for s in (s1, s2):
        lat1 = slit_lattice(cfg, (s,))
        one[s] = {j: r.joint for j, r in site_joints(lat1, _functional_for(cfg, lat1), cfg.physics).items()}
    end = lattice.end_site
    both = cond.site_joints[end]
    ratio = both / one[s1][end] if one[s1][end] > 0 else None

    # far measurement: the configured end event
    far = evaluate_ensemble(enumerate_paths(lattice), functional, cfg.physics)
    far_summary = _slit_parse_summary(far, cfg, _slit_of(far, cfg.barrier_slice))
    parsing = find_parsing(far, cfg.solver)

    # near measurement: detectors on the barrier plane itself, one per slit
    near = {}
    T_near = cfg.barrier_slice + 1
    for s in (s1, s2):
        lat = slit_lattice(cfg, (s1, s2), T_near, end_site=s)
        f_near = _functional_for(cfg, lat)
        ens = evaluate_ensemble(enumerate_paths(lat), f_near, cfg.physics)
        slit_of = [int(p.sites[-1]) for p in ens.paths]
        near[str(s)] = _slit_parse_summary(ens, cfg, slit_of)

    fields, grids = _fields_for(parsing, far, cfg, "parsing")
    fringe = _fringe_rows(lattice, cond)
    M = cfg.num_sites
    mirror = max(
        (abs(cond.conditional[j] - cond.conditional[M - 1 - j]) for j in cond.conditional if (M - 1 - j) in cond.conditional),
        default=0.0,
    )
    return ScenarioReport(
        kind=cfg.kind,
        probability=cond.to_dict(),
        partition=parsing.to_dict(),
        fields=fields,
        metrics={
            "on_axis_site": end,
            "joint_both_slits": both,
            "joint_single_slit": {str(s): one[s][end] for s in (s1, s2)},
            "constructive_ratio": ratio,
            "mirror_asymmetry": mirror,
            "far_measurement": far_summary,
            "near_measurement": near,
        },
        tables={"fringe": fringe},
        field_grids=grids,
    )


def run_triple_slit(cfg: ScenarioConfig) -> ScenarioReport:
    """Second-order Sorkin combination at every final site."""
    slits = cfg.slit_sites
    final_sites = cfg.base_lattice().open_sites(cfg.num_slices - 1)
    intensity = {}
    for r in range(0, 4):
        for combo in itertools.combinations(slits, r):
            lat = slit_lattice(cfg, combo)
            joints = site_joints(lat, _functional_for(cfg, lat), cfg.physics)
            intensity[combo] = {j: joints[j].joint for j in final_sites}
    a, b, c = slits
    rows = []
    for j in final_sites:
        I = {k: v[j] for k, v in intensity.items()}
        sorkin = (
            I[(a, b, c)] - I[(a, b)] - I[(a, c)] - I[(b, c)] + I[(a,)] + I[(b,)] + I[(c,)]
        )
        rows.append({
            "site": j,
            "position": j * cfg.dx,
            "I1": I[(a,)], "I2": I[(b,)], "I3": I[(c,)],
            "I12": I[(a, b)], "I13": I[(a, c)], "I23": I[(b, c)],
            "I123": I[(a, b, c)],
            "I0": I[()],
            "sorkin": sorkin,
        })
    worst = max((abs(r["sorkin"]) for r in rows), default=0.0)
    for r in rows:
        r["max_abs_sorkin"] = worst
    lattice = slit_lattice(cfg, slits)
    functional = _functional_for(cfg, lattice)
    cond = conditional_distribution(lattice, functional, cfg.physics)
    return ScenarioReport(
        kind=cfg.kind,
        probability=cond.to_dict(),
        metrics={"max_abs_sorkin": worst, "final_sites": final_sites},
        tables={"sorkin": rows, "fringe": _fringe_rows(lattice, cond)},
    )


def run_scenario(cfg: ScenarioConfig) -> ScenarioReport:
    if cfg.kind in ("free_exchange", "focusing_index"):
        return run_free_exchange(cfg)
    if cfg.kind == "double_slit":
        return run_double_slit(cfg)
    return run_triple_slit(cfg)
