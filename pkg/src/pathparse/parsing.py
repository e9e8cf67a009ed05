"""Partitions of the path ensemble into non-interfering sets.

A set ``c`` with phasor sum ``v = (X, Y)`` has probability ``|v|**2`` and
cross-interference residual ``v . (V - v)`` against the ensemble total ``V``.
A partition is strict-valid when every residual vanishes (to ``epsilon_X``),
relaxed-valid when only their sum does.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import (
    BudgetExceededError,
    NumericalIntegrityError,
    StructuralError,
    ValidationError,
)
from .lattice import PathEnsemble

STRATEGIES = ("exhaustive", "phase_binning", "annealing")
MODES = ("strict", "relaxed")


def bell_number(n: int) -> int:
    """Number of set partitions of an n-element set (Bell triangle)."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


@dataclass
class SolverConfig:
    """Tolerances, search strategy and annealing schedule.

    ``None`` tolerances resolve per ensemble: ``1e-9 * n`` for epsilon_X and
    ``1e-9 * n**2`` for epsilon_F.
    """

    epsilon_X: Optional[float] = None
    epsilon_F: Optional[float] = None
    strategy: str = "phase_binning"
    mode: str = "strict"
    max_paths_exhaustive: int = 10
    num_bins: int = 48
    split_limit: int = 16
    initial_temperature: float = 1.0
    cooling_rate: float = 0.9995
    move_budget: int = 20000
    fineness_weight: float = 0.05
    num_chains: int = 4
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        for name in ("epsilon_X", "epsilon_F"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValidationError(f"{name} must be positive (got {value})")
        if self.num_bins < 6 or self.num_bins % 6:
            raise ValidationError("num_bins must be a positive multiple of 6")
        if not (0 < self.cooling_rate <= 1) or not self.initial_temperature > 0:
            raise ValidationError("annealing schedule needs T0 > 0 and 0 < cooling <= 1")
        if self.move_budget < 0 or self.num_chains < 1 or self.threads < 1:
            raise ValidationError("move_budget >= 0, num_chains >= 1 and threads >= 1 required")

    def eps_x(self, n: int) -> float:
        return self.epsilon_X if self.epsilon_X is not None else 1e-9 * max(n, 1)

    def eps_f(self, n: int) -> float:
        return self.epsilon_F if self.epsilon_F is not None else 1e-9 * max(n, 1) ** 2

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "threads"}


@dataclass
class PathSet:
    member_indices: tuple
    set_cos: float
    set_sin: float
    probability: float
    classification: str

    @property
    def size(self) -> int:
        return len(self.member_indices)

    def to_dict(self) -> dict:
        return {
            "members": list(self.member_indices),
            "set_cos": self.set_cos,
            "set_sin": self.set_sin,
            "F": self.probability,
            "classification": self.classification,
        }


@dataclass
class Partition:
    sets: list
    residuals: list = field(default_factory=list)
    global_residual: float = 0.0
    total_probability: float = 0.0
    mode: str = "strict"
    strict_valid: bool = False
    relaxed_valid: bool = False
    epsilon_X: float = 0.0
    epsilon_F: float = 0.0
    trace: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return self.strict_valid if self.mode == "strict" else self.relaxed_valid

    @property
    def num_sets(self) -> int:
        return len(self.sets)

    @property
    def max_residual(self) -> float:
        return max((abs(r) for r in self.residuals), default=0.0)

    def key(self) -> frozenset:
        """Order-free identity of the partition."""
        return frozenset(frozenset(s.member_indices) for s in self.sets)

    def canonical(self) -> tuple:
        return tuple(sorted(tuple(s.member_indices) for s in self.sets))

    def labels(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.int64)
        for b, s in enumerate(self.sets):
            out[list(s.member_indices)] = b
        return out

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "strict_valid": self.strict_valid,
            "relaxed_valid": self.relaxed_valid,
            "num_sets": self.num_sets,
            "total_probability": self.total_probability,
            "sum_F": math.fsum(s.probability for s in self.sets),
            "global_residual": self.global_residual,
            "epsilon_X": self.epsilon_X,
            "epsilon_F": self.epsilon_F,
            "sets": [dict(s.to_dict(), residual=r) for s, r in zip(self.sets, self.residuals)],
            "trace": self.trace,
        }


def _require_evaluated(ensemble: PathEnsemble):
    if not ensemble.evaluated:
        raise ValidationError("ensemble must be evaluated before parsing")


def classify(probability: float, eps_f: float) -> str:
    if probability < -eps_f:
        raise NumericalIntegrityError(
            f"set probability {probability!r} is negative beyond tolerance {eps_f!r}"
        )
    return "positive" if probability > eps_f else "null"


def make_path_set(members: Sequence[int], ensemble: PathEnsemble, eps_f: Optional[float] = None) -> PathSet:
    """Compensated phasor sums of a set of path indices (ascending order)."""
    _require_evaluated(ensemble)
    idx = tuple(sorted(int(i) for i in members))
    if len(set(idx)) != len(idx):
        raise StructuralError("a path set lists the same path twice")
    if idx and not (0 <= idx[0] and idx[-1] < len(ensemble)):
        raise StructuralError("path set member out of range")
    labels = np.zeros(len(idx), dtype=np.int64)
    X, Y = kernels.block_sums(ensemble.cos[list(idx)], ensemble.sin[list(idx)], labels, 1)
    x, y = float(X[0]), float(Y[0])
    F = x * x + y * y
    if eps_f is None:
        eps_f = 1e-9 * max(len(ensemble), 1) ** 2
    return PathSet(idx, x, y, F, classify(F, eps_f))


def set_probability(path_set: PathSet) -> float:
    """Squared magnitude of the set's summed phasors."""
    return path_set.set_cos**2 + path_set.set_sin**2


def set_probability_pairs(path_set: PathSet, ensemble: PathEnsemble) -> float:
    """The same probability written as a double cosine sum over member pairs."""
    return float(kernels.direct_pair_sum(ensemble.phases[list(path_set.member_indices)]))


def cross_interference(path_set: PathSet, ensemble: PathEnsemble) -> float:
    """Interference between the set and its complement, from the set's own sums."""
    _require_evaluated(ensemble)
    C, D = ensemble.phase_sums.C, ensemble.phase_sums.D
    X, Y = path_set.set_cos, path_set.set_sin
    return X * (C - X) + Y * (D - Y)


def cross_interference_pairs(path_set: PathSet, ensemble: PathEnsemble) -> float:
    """Two-sided form: sum of ``cos(S_A - S_B)`` with A inside and B outside."""
    inside = np.zeros(len(ensemble), dtype=bool)
    inside[list(path_set.member_indices)] = True
    a = ensemble.phases[inside]
    b = ensemble.phases[~inside]
    return math.fsum(np.cos(a[:, None] - b[None, :]).ravel())


def build_partition(groups, ensemble: PathEnsemble, config: Optional[SolverConfig] = None) -> Partition:
    """Validated partition from groups of path indices."""
    config = config or SolverConfig()
    n = len(ensemble)
    eps_f = config.eps_f(n)
    sets = [make_path_set(g, ensemble, eps_f) for g in groups if len(g)]
    sets.sort(key=lambda s: s.member_indices[0])
    return validate_partition(Partition(sets=sets, mode=config.mode), ensemble, config)


def partition_from_labels(labels, ensemble: PathEnsemble, config: Optional[SolverConfig] = None) -> Partition:
    groups: dict = {}
    for i, b in enumerate(labels):
        groups.setdefault(int(b), []).append(i)
    return build_partition(list(groups.values()), ensemble, config)


def validate_partition(partition: Partition, ensemble: PathEnsemble, config: Optional[SolverConfig] = None) -> Partition:
    """Fill residuals and classifications and decide strict/relaxed validity."""
    _require_evaluated(ensemble)
    config = config or SolverConfig(mode=partition.mode)
    n = len(ensemble)
    seen = [False] * n
    for s in partition.sets:
        for i in s.member_indices:
            if not 0 <= i < n:
                raise StructuralError(f"path index {i} outside the ensemble")
            if seen[i]:
                raise StructuralError(f"path {i} appears in more than one set")
            seen[i] = True
    missing = [i for i, hit in enumerate(seen) if not hit]
    if missing:
        raise StructuralError(f"{len(missing)} paths are in no set (first: {missing[0]})")

    eps_x, eps_f = config.eps_x(n), config.eps_f(n)
    sets = [make_path_set(s.member_indices, ensemble, eps_f) for s in partition.sets]
    C, D = ensemble.phase_sums.C, ensemble.phase_sums.D
    residuals = [cross_interference(s, ensemble) for s in sets]
    total = C * C + D * D
    f_sum = 0.0
    for s in sets:
        f_sum += s.probability
    global_residual = total - f_sum
    # strict validity also demands conservation, matching the scan kernels
    conserved = abs(global_residual) <= max(1e-8 * total, eps_x)
    strict = conserved and all(abs(r) <= eps_x for r in residuals)
    relaxed = abs(global_residual) <= eps_x
    return Partition(
        sets=sets,
        residuals=residuals,
        global_residual=global_residual,
        total_probability=total,
        mode=config.mode,
        strict_valid=strict,
        relaxed_valid=relaxed,
        epsilon_X=eps_x,
        epsilon_F=eps_f,
        trace=dict(partition.trace),
    )


def preference_key(partition: Partition):
    """Sort key: more sets first, then smaller worst residual, then contents."""
    return (-partition.num_sets, partition.max_residual, partition.canonical())


def trivial_partition(ensemble: PathEnsemble, config: Optional[SolverConfig] = None) -> Partition:
    return build_partition([list(range(len(ensemble)))], ensemble, config)


def enumerate_all_parsings(ensemble: PathEnsemble, config: Optional[SolverConfig] = None) -> list:
    """Every valid partition of a small ensemble, finest first."""
    _require_evaluated(ensemble)
    config = config or SolverConfig()
    n = len(ensemble)
    if n > config.max_paths_exhaustive:
        count = bell_number(n)
        raise BudgetExceededError(
            f"exhaustive search over n={n} paths would enumerate B({n}) = {count} partitions "
            f"(limit is n <= {config.max_paths_exhaustive})",
            count,
        )
    if n == 0:
        return [build_partition([], ensemble, config)]
    C, D = ensemble.phase_sums.C, ensemble.phase_sums.D
    rows, scanned = kernels.scan_partitions(
        ensemble.cos, ensemble.sin, C, D, config.eps_x(n), config.mode == "relaxed"
    )
    found = []
    for row in rows:
        part = partition_from_labels(row, ensemble, config)
        part.trace = {"strategy": "exhaustive", "partitions_scanned": int(scanned)}
        if part.valid:
            found.append(part)
    found.sort(key=preference_key)
    return found


# -- heuristics ---------------------------------------------------------------


def _phase_bins(ensemble: PathEnsemble, num_bins: int) -> np.ndarray:
    angle = np.mod(np.arctan2(ensemble.sin, ensemble.cos), 2 * np.pi)
    return np.minimum((angle / (2 * np.pi / num_bins)).astype(np.int64), num_bins - 1)


def _extract_null_sets(ensemble: PathEnsemble, config: SolverConfig, eps_f_small: float):
    """Greedy antipodal pairs, then 120-degree triples, that cancel to ~0."""
    n = len(ensemble)
    K = config.num_bins
    bins = _phase_bins(ensemble, K)
    members = {}
    for i, b in enumerate(bins):
        members.setdefault(int(b), []).append(i)
    used = np.zeros(n, dtype=bool)
    cs, sn = ensemble.cos, ensemble.sin
    nulls = []

    def near(b, offset):
        out = []
        for d in (-1, 0, 1):
            out.extend(members.get((b + offset + d) % K, ()))
        return sorted(out)

    for a in range(n):
        if used[a]:
            continue
        best, best_mag = None, eps_f_small
        for b in near(bins[a], K // 2):
            if b == a or used[b]:
                continue
            mag = (cs[a] + cs[b]) ** 2 + (sn[a] + sn[b]) ** 2
            if mag <= best_mag:
                best, best_mag = b, mag
        if best is not None:
            used[a] = used[best] = True
            nulls.append([a, best])
    for a in range(n):
        if used[a]:
            continue
        hit = None
        for b in near(bins[a], K // 3):
            if used[b] or b == a:
                continue
            for c in near(bins[a], 2 * K // 3):
                if used[c] or c in (a, b):
                    continue
                mag = (cs[a] + cs[b] + cs[c]) ** 2 + (sn[a] + sn[b] + sn[c]) ** 2
                if mag <= eps_f_small:
                    hit = (b, c)
                    break
            if hit:
                break
        if hit:
            used[a] = used[hit[0]] = used[hit[1]] = True
            nulls.append([a, hit[0], hit[1]])
    core = [i for i in range(n) if not used[i]]
    return nulls, core


def _subset_vectors(idx, ensemble):
    k = len(idx)
    masks = np.arange(1, 2 ** (k - 1), dtype=np.int64)  # member idx[-1] always stays out
    bits = (masks[:, None] >> np.arange(k - 1)) & 1
    X = bits @ ensemble.cos[idx[:-1]]
    Y = bits @ ensemble.sin[idx[:-1]]
    return masks, bits.astype(bool), X, Y


def _split_set(idx, ensemble, V, eps_x):
    """Best split of ``idx`` into two pieces that both keep zero residual, or None."""
    if len(idx) < 2:
        return None
    idx = np.asarray(idx)
    masks, bits, X, Y = _subset_vectors(idx, ensemble)
    tx = ensemble.cos[idx].sum()
    ty = ensemble.sin[idx].sum()
    r_a = X * (V[0] - X) + Y * (V[1] - Y)
    rx, ry = tx - X, ty - Y
    r_b = rx * (V[0] - rx) + ry * (V[1] - ry)
    worst = np.maximum(np.abs(r_a), np.abs(r_b))
    ok = np.flatnonzero(worst <= 0.5 * eps_x)
    if ok.size == 0:
        return None
    pick = ok[np.argmin(worst[ok])]
    chosen = np.append(bits[pick], False)
    return sorted(idx[chosen].tolist()), sorted(idx[~chosen].tolist())


def _refine(groups, ensemble, config):
    """Split groups pairwise while every piece stays valid."""
    V = (ensemble.phase_sums.C, ensemble.phase_sums.D)
    eps_x = config.eps_x(len(ensemble))
    out = []
    queue = [sorted(g) for g in groups]
    splits = 0
    while queue:
        g = queue.pop(0)
        piece = _split_set(g, ensemble, V, eps_x) if 2 <= len(g) <= config.split_limit else None
        if piece is None:
            out.append(g)
        else:
            splits += 1
            queue.extend(piece)
    return out, splits


def _phase_binning(ensemble: PathEnsemble, config: SolverConfig) -> Partition:
    n = len(ensemble)
    eps_x = config.eps_x(n)
    # nulls are accepted well inside tolerance so that the leftover core stays valid
    nulls, core = _extract_null_sets(ensemble, config, min(config.eps_f(n), eps_x) / max(n, 1))
    groups = nulls + ([core] if core else [])
    part = build_partition(groups, ensemble, config)
    dissolved = 0
    while not part.valid and nulls:
        core = sorted(core + nulls.pop())
        dissolved += 1
        part = build_partition(nulls + [core], ensemble, config)
    if not part.valid:
        part = trivial_partition(ensemble, config)
    cores = [list(s.member_indices) for s in part.sets if s.classification == "positive"]
    keep = [list(s.member_indices) for s in part.sets if s.classification != "positive"]
    refined, splits = _refine(cores, ensemble, config)
    candidate = build_partition(keep + refined, ensemble, config)
    if candidate.valid:
        part = candidate
    part.trace = {
        "strategy": "phase_binning",
        "null_sets_seeded": len(nulls),
        "null_sets_dissolved": dissolved,
        "orthogonal_splits": splits,
    }
    return part


def _chain(ensemble, config, labels0, seed_seq):
    n = len(ensemble)
    rng = np.random.default_rng(seed_seq)
    uniforms = rng.random((config.move_budget, 4))
    angles = np.arctan2(ensemble.sin, ensemble.cos)
    return kernels.anneal(
        ensemble.cos,
        ensemble.sin,
        angles,
        ensemble.phase_sums.C,
        ensemble.phase_sums.D,
        labels0,
        uniforms,
        config.initial_temperature,
        config.cooling_rate,
        config.eps_x(n),
        config.fineness_weight,
        config.mode == "relaxed",
    )


def _annealing(ensemble: PathEnsemble, config: SolverConfig) -> Partition:
    n = len(ensemble)
    seed_part = _phase_binning(ensemble, config)
    labels0 = seed_part.labels(n)
    seeds = np.random.SeedSequence(config.seed).spawn(config.num_chains)
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        results = list(pool.map(lambda s: _chain(ensemble, config, labels0, s), seeds))
    candidates = [seed_part]
    tried = accepted = 0
    for best, t, a in results:
        tried += t
        accepted += a
        if best is not None:
            part = partition_from_labels(best, ensemble, config)
            if part.valid:
                candidates.append(part)
    # stable sort keeps seed order among equals
    winner = sorted(candidates, key=preference_key)[0]
    winner.trace = {
        "strategy": "annealing",
        "chains": config.num_chains,
        "moves_tried": int(tried),
        "moves_accepted": int(accepted),
        "seed": config.seed,
        "seeded_from": seed_part.trace,
    }
    return winner


def find_parsing(ensemble: PathEnsemble, config: Optional[SolverConfig] = None) -> Partition:
    """A valid partition, as fine as the chosen strategy can find.

    Never fails: falls back to the single-set partition. ``trace`` records the
    strategy, search statistics and quality flags.
    """
    _require_evaluated(ensemble)
    config = config or SolverConfig()
    n = len(ensemble)
    if n == 0:
        part = build_partition([], ensemble, config)
        part.trace = {"strategy": config.strategy}
    elif config.strategy == "exhaustive":
        part = enumerate_all_parsings(ensemble, config)[0]
    elif config.strategy == "phase_binning":
        part = _phase_binning(ensemble, config)
    else:
        part = _annealing(ensemble, config)
    if not part.valid:
        fallback = trivial_partition(ensemble, config)
        fallback.trace = dict(part.trace, fallback="trivial")
        part = fallback
    coherence = part.sets[0].probability / n**2 if part.num_sets == 1 else None
    part.trace["finer_than_trivial"] = part.num_sets > 1
    part.trace["maximal_coherence"] = bool(coherence is not None and abs(coherence - 1.0) <= 1e-12)
    part.trace["backend"] = kernels.BACKEND
    return part
