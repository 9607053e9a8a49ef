"""Command-line surface: solve single instances, run experiments from config
files, and run the inequality suites.

Exit codes: 0 success, 1 usage or I/O error, 2 size-limit refusal,
3 property violation.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import checks as checks_mod
from .boundary import boundary_generic_cost, boundary_matching_cost
from .experiments import (
    ExperimentConfig,
    estimate_beta,
    run_concentration,
    run_convergence,
    run_density_limit,
    run_poissonization_gap,
    run_singular_decay,
    run_tail_max,
    write_records_csv,
)
from .geometry import BoxRegion, PointCloud, dyadic_partition
from .graphs import GraphFamily, check_axioms, generic_cost, tsp_heuristic
from .matching import CostParams, SizeLimitError, matching_cost
from .sampling import (
    BlockDensity,
    CantorMeasure,
    HeavyTailRadial,
    MeasureSpec,
    Mixture,
    SingularSegment,
    UniformBox,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SIZE_LIMIT = 2
EXIT_VIOLATION = 3


def _parse_box(text: str) -> BoxRegion:
    try:
        lo_text, hi_text = text.split("..")
        lo = np.array([float(v) for v in lo_text.split(",")])
        hi = np.array([float(v) for v in hi_text.split(",")])
        return BoxRegion(lo, hi)
    except Exception as exc:
        raise ValueError(f"bad box spec {text!r}; expected lo0,lo1..hi0,hi1") from exc


def _family_from_args(args) -> GraphFamily:
    if args.functional == "tsp":
        return GraphFamily.tsp_tour()
    if args.functional == "tree":
        return GraphFamily.spanning_tree(args.max_degree)
    if args.functional == "rreg":
        return GraphFamily.r_regular(args.r)
    return GraphFamily.matching()


def cmd_solve(args) -> int:
    x = PointCloud.from_csv(args.points_x)
    y = PointCloud.from_csv(args.points_y)
    params = CostParams(args.p, args.eps)
    if args.boundary:
        if args.box is None:
            raise ValueError("--boundary requires --box")
        box = _parse_box(args.box)
        if args.functional == "matching":
            result = boundary_matching_cost(x, y, params, box)
        elif args.functional == "tsp-heur":
            raise ValueError("no boundary variant for the tour heuristic")
        else:
            result = boundary_generic_cost(x, y, _family_from_args(args), params, box)
    elif args.functional == "matching":
        result = matching_cost(x, y, params)
    elif args.functional == "tsp-heur":
        result = tsp_heuristic(x, y, params)
    else:
        result = generic_cost(x, y, _family_from_args(args), params)
    print(result.to_json())
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment configs


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split()]


def _parse_measure(parser: configparser.ConfigParser, section: str, dim_hint: int | None,
                   allow_mixture: bool = True) -> MeasureSpec:
    if not parser.has_section(section):
        raise ValueError(f"missing config section [{section}]")
    sec = parser[section]
    kind = sec.get("kind")
    if kind == "uniform-box":
        lo = np.array(_floats(sec.get("lo", "")))
        hi = np.array(_floats(sec.get("hi", "")))
        return UniformBox(BoxRegion(lo, hi))
    if kind == "block-density":
        lo = np.array(_floats(sec.get("lo", "")))
        hi = np.array(_floats(sec.get("hi", "")))
        level = sec.getint("level")
        weights = np.array(_floats(sec.get("weights", "")))
        part = dyadic_partition(BoxRegion(lo, hi), level)
        return BlockDensity(part, weights)
    if kind == "segment":
        a = np.array(_floats(sec.get("a", "")))
        b = np.array(_floats(sec.get("b", "")))
        return SingularSegment(a, b)
    if kind == "cantor":
        return CantorMeasure()
    if kind == "heavy-tail":
        alpha = sec.getfloat("alpha")
        dim = sec.getint("d", fallback=dim_hint or 3)
        return HeavyTailRadial(alpha, dim)
    if kind == "mixture":
        if not allow_mixture:
            raise ValueError("nested mixtures are not supported")
        names = sec.get("components", "").split()
        comps = []
        for name in names:
            sub = f"measure {name}"
            if not parser.has_section(sub):
                raise ValueError(f"missing mixture component section [{sub}]")
            weight = parser[sub].getfloat("weight")
            comps.append((weight, _parse_measure(parser, sub, dim_hint, allow_mixture=False)))
        return Mixture(tuple(comps))
    raise ValueError(f"unknown measure kind {kind!r} in [{section}]")


def _load_experiment(path: Path, threads: int) -> tuple[str, dict]:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError(f"cannot read config file {path}")
    if not parser.has_section("experiment"):
        raise ValueError("missing config section [experiment]")
    exp = parser["experiment"]
    kind = exp.get("kind")
    known = ("convergence", "density-limit", "singular-decay", "poisson-gap",
             "tail-max", "concentration")
    if kind not in known:
        raise ValueError(f"unknown experiment kind {kind!r}; expected one of {known}")

    if kind == "tail-max":
        payload = {
            "alpha": exp.getfloat("alpha"),
            "gamma": exp.getfloat("gamma"),
            "n_schedule": _floats(exp.get("n_schedule", "")),
            "trials": exp.getint("trials"),
            "seed": exp.getint("seed", fallback=0),
            "dim": exp.getint("d", fallback=3),
        }
        if parser.has_section("measure"):
            payload["measure"] = _parse_measure(parser, "measure", payload["dim"])
        return kind, payload

    dim = exp.getint("d", fallback=None)
    measure = _parse_measure(parser, "measure", dim)
    if dim is not None and measure.dim != dim:
        raise ValueError(f"config d = {dim} does not match the measure dimension {measure.dim}")
    trials_values = exp.get("trials", "")
    trials = tuple(int(v) for v in trials_values.split()) if trials_values else (30,)
    cfg = ExperimentConfig(
        measure=measure,
        n_schedule=tuple(_floats(exp.get("n_schedule", ""))),
        trials=trials,
        params=CostParams(exp.getfloat("p", fallback=1.0),
                          exp.getfloat("eps", fallback=0.0)),
        functional=exp.get("functional", fallback="matching"),
        seed=exp.getint("seed", fallback=0),
        poissonized=exp.getboolean("poissonized", fallback=True),
        boundary=exp.getboolean("boundary", fallback=False),
        threads=threads,
    )
    return kind, {"cfg": cfg}


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def _write_rows_csv(path: Path, header: list[str], rows: list[dict]) -> None:
    import csv as _csv

    with path.open("w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(header + ["schema_version"])
        for row in rows:
            out = []
            for key in header:
                value = row[key]
                out.append(repr(float(value)) if isinstance(value, float) else value)
            writer.writerow(out + [1])


def cmd_experiment(args) -> int:
    out_dir = Path(args.out or os.environ.get("BIMATCH_OUT", "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    kind, payload = _load_experiment(Path(args.config), args.threads)

    if kind == "convergence":
        cfg = payload["cfg"]
        records = run_convergence(cfg)
        write_records_csv(records, cfg, out_dir / "convergence.csv")
        summary = {"schema_version": 1, "kind": kind,
                   "ratios": [r.ratio for r in records]}
        if len(records) >= 3:
            beta = estimate_beta(records)
            summary["beta_hat"] = beta.beta_hat
            summary["beta_uncertainty"] = beta.uncertainty
            summary["beta_fit"] = beta.beta_fit
        _write_json(out_dir / "summary.json", summary)
    elif kind == "density-limit":
        cfg = payload["cfg"]
        report = run_density_limit(cfg)
        write_records_csv(report.block_records, cfg, out_dir / "density_block.csv")
        write_records_csv(report.uniform_plain, cfg, out_dir / "density_uniform_plain.csv")
        write_records_csv(report.uniform_boundary, cfg,
                          out_dir / "density_uniform_boundary.csv")
        _write_json(out_dir / "summary.json", {"kind": kind, **report.to_dict()})
    elif kind == "singular-decay":
        cfg = payload["cfg"]
        report = run_singular_decay(cfg)
        write_records_csv(report.records, cfg, out_dir / "singular_decay.csv")
        _write_json(out_dir / "summary.json", {"kind": kind, **report.to_dict()})
    elif kind == "poisson-gap":
        cfg = payload["cfg"]
        report = run_poissonization_gap(cfg)
        _write_rows_csv(out_dir / "poisson_gap.csv",
                        ["n", "trials", "mean_fixed", "mean_poisson", "normalized_gap"],
                        report.rows)
        _write_json(out_dir / "summary.json", {"kind": kind, **report.to_dict()})
    elif kind == "tail-max":
        report = run_tail_max(**payload)
        _write_rows_csv(out_dir / "tail_max.csv", ["n", "value", "ratio"], report.rows)
        _write_json(out_dir / "summary.json", {"kind": kind, **report.to_dict()})
    else:  # concentration
        cfg = payload["cfg"]
        report = run_concentration(cfg)
        _write_rows_csv(out_dir / "concentration.csv",
                        ["n", "trials", "std", "envelope", "std_over_sqrt_n"],
                        [{k: row[k] for k in
                          ("n", "trials", "std", "envelope", "std_over_sqrt_n")}
                         for row in report.rows])
        _write_json(out_dir / "summary.json", {"kind": kind, **report.to_dict()})
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification suites


def _suite_checks(suite: str, seed: int, n_instances: int | None):
    def count(default: int) -> int:
        return n_instances if n_instances is not None else default

    if suite in ("all", "subadd"):
        yield lambda: checks_mod.check_subadditivity_matching(
            n_instances=count(500), seed=seed + 1)
        yield lambda: checks_mod.check_subadditivity_generic(
            GraphFamily.tsp_tour(), n_instances=count(200), seed=seed + 2)
    if suite in ("all", "regularity"):
        yield lambda: checks_mod.check_regularity_matching(
            n_instances=count(500), seed=seed + 3)
    if suite in ("all", "inverse"):
        yield lambda: checks_mod.check_inverse_subadd_matching(
            n_instances=count(500), seed=seed + 4)
        yield lambda: checks_mod.check_inverse_subadd_tsp(
            n_instances=count(200), seed=seed + 5)
    if suite in ("all", "boundary"):
        yield lambda: checks_mod.check_boundary_superadditivity(
            n_instances=count(500), seed=seed + 6)
    if suite in ("all", "homogeneity"):
        yield lambda: checks_mod.check_homogeneity(
            n_instances=count(500), seed=seed + 7)


def cmd_verify(args) -> int:
    if args.replay:
        payload = json.loads(Path(args.replay).read_text())
        instance = checks_mod.load_instance(payload["instance"])
        name = payload.get("name", "subadd")
        print(f"replaying instance from {args.replay} (margin was {payload.get('margin')})")
        print(json.dumps(checks_mod.serialize_instance(instance), sort_keys=True))
        return EXIT_OK

    failures = 0
    reports = []
    if args.suite in ("all", "axioms"):
        for family in (GraphFamily.matching(), GraphFamily.tsp_tour(),
                       GraphFamily.r_regular(2)):
            report = check_axioms(family, n_max=3)
            status = "pass" if report.passed else "FAIL"
            print(f"axioms[{family.label()}]: {status} "
                  f"(merge<= {report.a4_observed}, restrict<= {report.a5_observed})")
            if not report.passed:
                failures += 1
    for make in _suite_checks(args.suite, args.seed, args.instances):
        report = make()
        reports.append(report)
        status = "pass" if report.passed else "FAIL"
        print(f"{report.name}: {status} ({report.instances} instances, "
              f"max margin {report.max_margin:.3e})")
        if not report.passed:
            failures += 1
            if args.out:
                for path in checks_mod.write_violations(report, args.out):
                    print(f"  wrote {path}")
    return EXIT_VIOLATION if failures else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bimatch",
        description="Bipartite point-set optimization: solvers, experiments, checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve one instance from CSV point files")
    solve.add_argument("--functional", required=True,
                       choices=["matching", "tsp", "tsp-heur", "tree", "rreg"])
    solve.add_argument("--p", type=float, default=1.0)
    solve.add_argument("--eps", type=float, default=0.0)
    solve.add_argument("--points-x", required=True)
    solve.add_argument("--points-y", required=True)
    solve.add_argument("--boundary", action="store_true")
    solve.add_argument("--box", help="box as lo0,lo1..hi0,hi1")
    solve.add_argument("--max-degree", type=int, default=3, help="tree degree cap")
    solve.add_argument("--r", type=int, default=2, help="regularity for rreg")
    solve.set_defaults(func=cmd_solve)

    experiment = sub.add_parser("experiment", help="run an experiment from a config file")
    experiment.add_argument("config")
    experiment.add_argument("--out", default=None)
    experiment.add_argument("--threads", type=int, default=1)
    experiment.set_defaults(func=cmd_experiment)

    verify = sub.add_parser("verify", help="run the inequality suites")
    verify.add_argument("--suite", default="all",
                        choices=["all", "subadd", "regularity", "inverse",
                                 "boundary", "homogeneity", "axioms"])
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--instances", type=int, default=None)
    verify.add_argument("--out", default=None)
    verify.add_argument("--replay", default=None)
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SizeLimitError as exc:
        print(f"size limit: {exc}", file=sys.stderr)
        return EXIT_SIZE_LIMIT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
