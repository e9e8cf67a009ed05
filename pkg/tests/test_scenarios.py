import math

import numpy as np
import pytest

from pathparse.action import ActionFunctional, PhysicsConfig
from pathparse.errors import ValidationError
from pathparse.parsing import SolverConfig
from pathparse.scenarios import (
    ScenarioConfig,
    kink_count,
    kink_family,
    run_double_slit,
    run_free_exchange,
    run_scenario,
    run_triple_slit,
)

FAST = SolverConfig(move_budget=2000)


def test_kink_counting():
    assert kink_count((2, 2, 2, 2)) == 0
    assert kink_count((0, 1, 2, 2)) == 1
    assert kink_count((0, 2, 2, 0)) == 2
    assert kink_family((2, 2, 2), 3) == "one_kink"
    assert kink_family((0, 1, 3, 0, 2), 5) == "many_kink"


def test_free_exchange_t3_single_family():
    rep = run_free_exchange(ScenarioConfig("free_exchange", 3, 7, solver=FAST))
    fam = rep.metrics["families"]
    assert [f["family"] for f in fam] == ["one_kink"]
    assert fam[0]["residual"] == 0.0
    geometric = rep.fields[0]
    assert geometric["phase_front"]["locus_rows"] == [1]


def test_free_exchange_t5_straight_singleton():
    rep = run_free_exchange(ScenarioConfig("free_exchange", 5, 5, solver=FAST))
    straight = [f for f in rep.metrics["families"] if f["family"] == "straight"][0]
    assert straight["size"] == 1
    assert straight["F"] == pytest.approx(1.0, abs=1e-15)
    assert rep.partition["strict_valid"]


def test_focusing_gives_full_coherence():
    rep = run_scenario(ScenarioConfig("focusing_index", 3, 9, solver=FAST))
    n = rep.metrics["num_paths"]
    assert rep.probability["joint"] == pytest.approx(n * n, abs=1e-12 * n * n)
    assert rep.partition["num_sets"] == 1
    assert rep.fields[0]["coherence"] == pytest.approx(1.0, abs=1e-12)
    assert rep.fields[0]["anomaly"] == pytest.approx(0.0, abs=1e-12)


def double(**kw):
    kw.setdefault("solver", FAST)
    return ScenarioConfig("double_slit", 5, 9, slit_sites=(2, 6), barrier_slice=2, **kw)


def test_double_slit_constructive_and_symmetric():
    rep = run_double_slit(double())
    assert rep.metrics["constructive_ratio"] == pytest.approx(4.0, abs=1e-9)
    assert rep.metrics["mirror_asymmetry"] <= 1e-10
    fringe = rep.tables["fringe"]
    assert math.fsum(r["probability"] for r in fringe) == pytest.approx(1.0, abs=1e-12)


def test_double_slit_pi_offset_is_dark():
    rep = run_double_slit(double(slit_phases=(0.0, math.pi)))
    assert rep.metrics["joint_both_slits"] <= 1e-10


def test_near_measurement_keeps_slits_apart():
    rep = run_double_slit(double())
    for summary in rep.metrics["near_measurement"].values():
        assert summary["fine_all_slit_pure"] is True or summary["fine_partitions"] == 0
        assert summary["solver_slit_pure"]


def test_triple_slit_sorkin_vanishes():
    rep = run_triple_slit(ScenarioConfig("triple_slit", 5, 9, slit_sites=(1, 4, 7), solver=FAST))
    assert rep.metrics["max_abs_sorkin"] <= 1e-9
    assert all(r["I0"] == 0.0 for r in rep.tables["sorkin"])


def test_triple_slit_subsets_match_double_slit():
    tri = run_triple_slit(ScenarioConfig("triple_slit", 5, 9, slit_sites=(2, 4, 6), barrier_slice=2))
    dbl = run_double_slit(double())
    joints = dbl.probability["site_joints"]
    for row in tri.tables["sorkin"]:
        assert row["I13"] == pytest.approx(joints[str(row["site"])], abs=1e-12)


def test_harmonic_functional_runs_through_slits():
    cfg = ScenarioConfig(
        "triple_slit", 5, 7, slit_sites=(1, 3, 5),
        functional=ActionFunctional.harmonic(0.4, center=3.0), physics=PhysicsConfig(mass=2.0),
    )
    assert run_triple_slit(cfg).metrics["max_abs_sorkin"] <= 1e-9


@pytest.mark.parametrize(
    "kw",
    [
        dict(kind="double_slit", slit_sites=(3,)),
        dict(kind="double_slit", slit_sites=(3, 3)),
        dict(kind="triple_slit", slit_sites=(0, 1, 20)),
        dict(kind="double_slit", slit_sites=(1, 2), barrier_slice=0),
        dict(kind="wormhole"),
    ],
)
def test_invalid_scenarios(kw):
    kind = kw.pop("kind")
    with pytest.raises(ValidationError):
        ScenarioConfig(kind, 5, 9, **kw)
