"""Command-line front end: ``pathparse {propagate,parse,reconstruct,scenario,oracle}``.

Exit codes: 0 success, 2 validation error, 3 numerical-integrity error.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import sys
from pathlib import Path as FsPath

from . import __version__, kernels
from .action import PhysicsConfig, ensemble_from_actions, evaluate_ensemble, functional_from_dict
from .errors import NormalizationError, NumericalIntegrityError, ValidationError
from .field import phase_front_check, reconstruct_field
from .lattice import DEFAULT_PATH_BUDGET, build_lattice, enumerate_paths, lattice_from_dict
from .parsing import SolverConfig, enumerate_all_parsings, find_parsing, make_path_set
from .propagator import conditional_distribution, joint_probability, transfer_matrix_propagator
from .scenarios import ScenarioConfig, run_scenario

log = logging.getLogger("pathparse")

COMMANDS = ("propagate", "parse", "reconstruct", "scenario", "oracle")
SCHEMA_VERSION = "1"


# -- config ---------------------------------------------------------------------


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ValidationError("config document must be a JSON object")
    return doc


def config_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def physics_from(doc: dict) -> PhysicsConfig:
    opts = doc.get("physics", {})
    unknown = set(opts) - {"hbar", "mass"}
    if unknown:
        raise ValidationError(f"unknown physics keys: {sorted(unknown)}")
    return PhysicsConfig(**opts)


def solver_from(doc: dict, args) -> SolverConfig:
    opts = dict(doc.get("solver", {}))
    unknown = set(opts) - set(SolverConfig.__dataclass_fields__)
    if unknown:
        raise ValidationError(f"unknown solver keys: {sorted(unknown)}")
    if args.seed is not None:
        opts["seed"] = args.seed
    elif "seed" in doc:
        opts["seed"] = doc["seed"]
    if args.mode:
        opts["mode"] = args.mode
    if args.strategy:
        opts["strategy"] = args.strategy
    opts["threads"] = args.threads
    return SolverConfig(**opts)


def ensemble_from(doc: dict):
    """Evaluated ensemble from either ``explicit_actions`` or a lattice."""
    physics = physics_from(doc)
    if "explicit_actions" in doc:
        return ensemble_from_actions(doc["explicit_actions"], physics), physics, None, None
    if "lattice" not in doc:
        raise ValidationError("config needs either 'lattice' or 'explicit_actions'")
    lattice = lattice_from_dict(doc["lattice"])
    functional = functional_from_dict(doc.get("functional"), lattice)
    budget = doc["lattice"].get("path_budget", DEFAULT_PATH_BUDGET)
    ensemble = evaluate_ensemble(enumerate_paths(lattice, budget), functional, physics)
    return ensemble, physics, lattice, functional


def scenario_from(doc: dict, args) -> ScenarioConfig:
    sc = dict(doc.get("scenario", {}))
    if "kind" not in sc:
        raise ValidationError("scenario config needs a 'kind'")
    geometry = dict(doc.get("lattice", {}))
    geometry.update(sc)
    geometry.pop("path_budget", None)
    geometry.pop("blocked", None)
    allowed = set(ScenarioConfig.__dataclass_fields__) - {"functional", "physics", "solver"}
    unknown = set(geometry) - allowed
    if unknown:
        raise ValidationError(f"unknown scenario keys: {sorted(unknown)}")
    for key in ("num_slices", "num_sites"):
        if key not in geometry:
            raise ValidationError(f"scenario config is missing '{key}'")
    probe = build_lattice(
        geometry["num_slices"], geometry["num_sites"], geometry.get("dt", 1.0), geometry.get("dx", 1.0),
        geometry.get("start_site"), geometry.get("end_site"),
    )
    return ScenarioConfig(
        functional=functional_from_dict(doc.get("functional"), probe),
        physics=physics_from(doc),
        solver=solver_from(doc, args),
        **geometry,
    )


# -- output -----------------------------------------------------------------------


def _meta(doc: dict, args, command: str, solver: SolverConfig = None) -> dict:
    return {
        "tool": "pathparse",
        "version": __version__,
        "schema": SCHEMA_VERSION,
        "command": command,
        "config_hash": config_hash(doc),
        "seed": solver.seed if solver is not None else args.seed,
        "backend": kernels.BACKEND,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def write_json(path: FsPath, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def write_csv(path: FsPath, rows, columns):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _want(args, kind):
    return args.format in (kind, "both")


# -- commands ---------------------------------------------------------------------


def cmd_propagate(doc, args, out: FsPath) -> list:
    ensemble, physics, lattice, functional = ensemble_from(doc)
    report = joint_probability(ensemble)
    payload = {"meta": _meta(doc, args, "propagate"), "probability": report.to_dict()}
    files = []
    if lattice is not None:
        tm = transfer_matrix_propagator(lattice, functional, physics)
        end = tm[lattice.end_site]
        payload["transfer_matrix_amplitude"] = [end.real, end.imag]
        try:
            cond = conditional_distribution(lattice, functional, physics)
        except NormalizationError as exc:
            payload["conditional_note"] = str(exc)
        else:
            payload["probability"] = cond.to_dict()
            if _want(args, "csv"):
                rows = [
                    {"site_index": j, "position": j * lattice.dx, "probability": p}
                    for j, p in sorted(cond.conditional.items())
                ]
                write_csv(out / "conditional.csv", rows, ["site_index", "position", "probability"])
                files.append("conditional.csv")
    if _want(args, "json"):
        write_json(out / "probability.json", payload)
        files.append("probability.json")
    return files


def cmd_parse(doc, args, out: FsPath) -> list:
    ensemble, physics, lattice, _ = ensemble_from(doc)
    solver = solver_from(doc, args)
    partition = find_parsing(ensemble, solver)
    payload = {
        "meta": _meta(doc, args, "parse", solver),
        "solver": solver.to_dict(),
        "probability": joint_probability(ensemble).to_dict(),
        "partition": partition.to_dict(),
    }
    write_json(out / "partition.json", payload)
    return ["partition.json"]


def cmd_oracle(doc, args, out: FsPath) -> list:
    ensemble, physics, lattice, _ = ensemble_from(doc)
    solver = solver_from(doc, args)
    found = enumerate_all_parsings(ensemble, solver)
    payload = {
        "meta": _meta(doc, args, "oracle", solver),
        "solver": solver.to_dict(),
        "num_valid": len(found),
        "partitions": [p.to_dict() for p in found],
    }
    write_json(out / "oracle.json", payload)
    return ["oracle.json"]


def cmd_reconstruct(doc, args, out: FsPath) -> list:
    ensemble, physics, lattice, _ = ensemble_from(doc)
    if lattice is None:
        raise ValidationError("reconstruct needs a lattice config, not explicit actions")
    solver = solver_from(doc, args)
    members = doc.get("reconstruct", {}).get("members")
    if members is not None:
        sets = [make_path_set(members, ensemble, solver.eps_f(len(ensemble)))]
        partition = None
    else:
        partition = find_parsing(ensemble, solver)
        sets = partition.sets
    fields = []
    files = []
    for i, s in enumerate(sets):
        hist = reconstruct_field(s, ensemble, physics)
        check = phase_front_check(hist, s, ensemble, physics)
        entry = dict(hist.to_dict(), name=f"field_{i:03d}", phase_front=check.to_dict())
        fields.append(entry)
        if _want(args, "csv"):
            name = f"field_{i:03d}.csv"
            (out / name).write_text(hist.to_csv(check.locus_rows), encoding="utf-8")
            files.append(name)
    payload = {
        "meta": _meta(doc, args, "reconstruct", solver),
        "partition": partition.to_dict() if partition is not None else None,
        "fields": fields,
    }
    write_json(out / "fields.json", payload)
    return ["fields.json"] + files


def cmd_scenario(doc, args, out: FsPath) -> list:
    cfg = scenario_from(doc, args)
    report = run_scenario(cfg)
    run_dir = out / f"{cfg.kind}-{config_hash(doc)[:12]}"
    run_dir.mkdir(parents=True, exist_ok=True)
    files = []
    write_json(run_dir / "report.json", {"meta": _meta(doc, args, "scenario", cfg.solver), **report.to_dict()})
    files.append("report.json")
    if _want(args, "csv"):
        for name, rows in report.tables.items():
            if rows:
                write_csv(run_dir / f"{name}.csv", rows, list(rows[0].keys()))
                files.append(f"{name}.csv")
        for name, text in report.field_grids.items():
            (run_dir / f"{name}.csv").write_text(text, encoding="utf-8")
            files.append(f"{name}.csv")
    manifest = dict(_meta(doc, args, "scenario", cfg.solver), files=sorted(files), config=doc)
    write_json(run_dir / "manifest.json", manifest)
    return [f"{run_dir.name}/{f}" for f in ["manifest.json"] + files]


HANDLERS = {
    "propagate": cmd_propagate,
    "parse": cmd_parse,
    "reconstruct": cmd_reconstruct,
    "scenario": cmd_scenario,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathparse", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config document")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--format", choices=("json", "csv", "both"), default="both")
    parser.add_argument("--mode", choices=("strict", "relaxed"), default=None)
    parser.add_argument("--strategy", choices=("exhaustive", "phase_binning", "annealing"), default=None)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        doc = load_config(args.config)
        out = FsPath(args.out)
        out.mkdir(parents=True, exist_ok=True)
        files = HANDLERS[args.command](doc, args, out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalIntegrityError as exc:
        print(f"numerical integrity error: {exc}", file=sys.stderr)
        return 3
    for f in files:
        log.info("wrote %s", out / f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
