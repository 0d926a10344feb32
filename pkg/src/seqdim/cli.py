"""Command-line interface: batch certification runs with reproducible outputs.

Subcommands: basis, classify, certify, witness-check, sample, curve,
distribution, gyni, ququart-hunt.  Standard output is machine-parsable
``key=value`` lines; human diagnostics and progress go to standard error.
Exit codes: 0 ok, 2 basis/oracle mismatch, 64 usage, 65 data, 70 solver.

A JSON config file passed with ``--config`` overrides flags; flags override
defaults.  Every output file embeds the effective config, the seed and the
code version.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .basis import Basis, basis_cache_name, build_basis, classify, rank_oracle
from .certify import SolverFailure, Witness, robustness, verify_witness
from .experiments import (
    Campaign,
    campaign_summary_dict,
    estimate_probability,
    gyni_report,
    ququart_hunt,
    sample_behaviors,
    visibility_distribution,
    wilson_interval,
    write_campaign_csv,
    write_histogram_csv,
)
from .quantum import Behavior
from .sdp import Tolerances
from .words import Scenario

EXIT_OK = 0
EXIT_ORACLE_MISMATCH = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_SOLVER = 70


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


class DataError(Exception):
    pass


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _progress(done: int, total: int) -> None:
    if done == total or done % max(1, total // 20) == 0:
        print(f"progress {done}/{total}", file=sys.stderr)


def _parse_scenario(text: str) -> Scenario:
    try:
        return Scenario.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc))


class UsageError(Exception):
    pass


def _tolerances(args) -> Optional[Tolerances]:
    if args.feas_tol is None and args.gap_tol is None:
        return None
    tol = Tolerances()
    if args.feas_tol is not None:
        tol.feasibility = args.feas_tol
    if args.gap_tol is not None:
        tol.gap = args.gap_tol
    return tol


def _provenance(args) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config") and v is not None}
    return {"config": config, "seed": getattr(args, "seed", None), "version": __version__}


def _load_or_build_basis(args, scenario: Scenario, d: int, k: int, seed: int) -> Basis:
    cache_dir = Path(args.cache_dir) if args.cache_dir else None
    name = basis_cache_name(scenario, d, k, seed, __version__)
    if cache_dir:
        path = cache_dir / name
        if path.exists():
            _log(f"reusing cached basis {path}")
            return Basis.load(path)
    _log(f"building basis for {scenario} d={d} k={k} (seed {seed})")
    basis = build_basis(scenario, d, k, np.random.default_rng(seed), seed=seed, version=__version__)
    if cache_dir:
        cache_dir.mkdir(parents=True, exist_ok=True)
        basis.save(cache_dir / name)
    return basis


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    _log(f"wrote {path}")


# -- subcommands -------------------------------------------------------------


def cmd_basis(args) -> int:
    scenario = _parse_scenario(args.scenario)
    basis = build_basis(
        scenario, args.d, args.k, np.random.default_rng(args.seed),
        seed=args.seed, version=__version__,
    )
    oracle_rng = np.random.default_rng(args.seed + 1)
    oracle = rank_oracle(scenario, args.d, args.k, 2 * basis.cardinality + 10, oracle_rng)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / basis_cache_name(scenario, args.d, args.k, args.seed, __version__)
    basis.save(path)
    _log(f"wrote {path}")
    print(f"scenario={scenario} d={args.d} k={args.k} cardinality={basis.cardinality} "
          f"rank_oracle={oracle} drop_gap={basis.drop_gap():.3e}")
    if oracle != basis.cardinality:
        _log(f"cardinality mismatch: gram-schmidt {basis.cardinality} vs rank oracle {oracle}")
        return EXIT_ORACLE_MISMATCH
    return EXIT_OK


def cmd_classify(args) -> int:
    scenarios = [_parse_scenario(s) for s in args.scenarios.split(",")]
    dims = [int(d) for d in args.dims.split(",")]
    table = classify(scenarios, dims, args.k, np.random.default_rng(args.seed))
    payload = table.to_json_dict()
    payload["provenance"] = _provenance(args)
    _write_json(Path(args.out_dir) / "classification.json", payload)
    for key, row in table.cardinalities.items():
        cells = " ".join(f"d{d}={row.get(d)}" for d in dims)
        print(f"scenario={key} {cells} gap={table.has_gap(key)}")
    return EXIT_OK


def cmd_certify(args) -> int:
    try:
        behavior = Behavior.load(args.behavior)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise DataError(f"invalid behavior file: {exc}")
    scenario = behavior.scenario
    basis = _load_or_build_basis(args, scenario, args.d, args.k, args.seed)
    try:
        result = robustness(behavior, basis, tolerances=_tolerances(args),
                            provenance=_provenance(args))
    except SolverFailure as exc:
        _log(str(exc))
        return EXIT_SOLVER
    verdict = (
        f"no {args.d}-dimensional projective realization"
        if result.certified else "not certified"
    )
    print(f"nu={result.nu:.10f}")
    print(f"certified={str(result.certified).lower()}")
    print(f"verdict={verdict}")
    out_dir = Path(args.out_dir)
    witness_path = out_dir / "witness.json"
    result.witness.provenance.update(_provenance(args))
    out_dir.mkdir(parents=True, exist_ok=True)
    result.witness.save(witness_path)
    _log(f"wrote {witness_path}")
    return EXIT_OK


def cmd_witness_check(args) -> int:
    try:
        witness = Witness.load(args.witness)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise DataError(f"invalid witness file: {exc}")
    behaviors = sample_behaviors(witness.scenario, witness.d, args.n, args.seed)
    report = verify_witness(witness, behaviors)
    print(f"n={report.n_behaviors}")
    print(f"min_margin={report.min_margin:.6e}")
    print(f"violations={len(report.violations)}")
    print(f"sound={str(report.sound).lower()}")
    return EXIT_OK if report.sound else EXIT_DATA


def _campaign_from_args(args, scenario: Scenario) -> Campaign:
    if args.n < 1:
        raise UsageError("--n must be a positive integer")
    return Campaign(
        scenario=scenario, d_sample=args.d_sample, d_test=args.d_test,
        k=args.k, n_samples=args.n, master_seed=args.seed,
    )


def cmd_sample(args) -> int:
    scenario = _parse_scenario(args.scenario)
    campaign = _campaign_from_args(args, scenario)
    basis = _load_or_build_basis(args, scenario, args.d_test, args.k, args.basis_seed)
    estimate = estimate_probability(
        campaign, basis, workers=args.workers, tolerances=_tolerances(args),
        progress=_progress,
    )
    out_dir = Path(args.out_dir)
    summary = campaign_summary_dict(estimate.result, provenance=_provenance(args))
    _write_json(out_dir / "campaign.json", summary)
    write_campaign_csv(estimate.result, out_dir / "samples.csv")
    _log(f"wrote {out_dir / 'samples.csv'}")
    print(f"p_hat={estimate.p_hat:.6f}")
    print(f"wilson_low={estimate.ci_low:.6f}")
    print(f"wilson_high={estimate.ci_high:.6f}")
    print(f"n_certified={estimate.n_certified} n_ok={estimate.n_ok} n_failed={estimate.n_failed}")
    if estimate.n_failed > 0.01 * campaign.n_samples:
        _log(f"failure rate {estimate.n_failed}/{campaign.n_samples} exceeds 1%")
        return EXIT_SOLVER
    return EXIT_OK


def cmd_curve(args) -> int:
    scenarios = [_parse_scenario(s) for s in args.scenarios.split(",")]
    points = []
    out_dir = Path(args.out_dir)
    for scenario in scenarios:
        campaign = _campaign_from_args(args, scenario)
        basis = _load_or_build_basis(args, scenario, args.d_test, args.k, args.basis_seed)
        estimate = estimate_probability(
            campaign, basis, workers=args.workers, tolerances=_tolerances(args),
            progress=_progress,
        )
        points.append((scenario, estimate))
        print(f"scenario={scenario} p_hat={estimate.p_hat:.6f} "
              f"wilson=[{estimate.ci_low:.4f},{estimate.ci_high:.4f}] n_failed={estimate.n_failed}")
    payload = {
        "points": [
            {"scenario": str(s), "p_hat": e.p_hat, "wilson_95": [e.ci_low, e.ci_high],
             "n_certified": e.n_certified, "n_ok": e.n_ok, "n_failed": e.n_failed}
            for s, e in points
        ],
        "provenance": _provenance(args),
    }
    _write_json(out_dir / "curve.json", payload)
    with open(out_dir / "curve.csv", "w") as fh:
        fh.write("scenario,p_hat,wilson_low,wilson_high\n")
        for s, e in points:
            fh.write(f"{s},{e.p_hat!r},{e.ci_low!r},{e.ci_high!r}\n")
    _log(f"wrote {out_dir / 'curve.csv'}")
    if any(e.n_failed > 0.01 * args.n for _, e in points):
        return EXIT_SOLVER
    return EXIT_OK


def cmd_distribution(args) -> int:
    scenario = _parse_scenario(args.scenario)
    campaign = _campaign_from_args(args, scenario)
    basis = _load_or_build_basis(args, scenario, args.d_test, args.k, args.basis_seed)
    dist = visibility_distribution(
        campaign, basis, workers=args.workers, tolerances=_tolerances(args),
        progress=_progress,
    )
    out_dir = Path(args.out_dir)
    summary = campaign_summary_dict(dist.result, provenance=_provenance(args))
    summary["mean_nu"] = dist.mean
    summary["std_nu"] = dist.std
    _write_json(out_dir / "distribution.json", summary)
    write_campaign_csv(dist.result, out_dir / "samples.csv")
    write_histogram_csv(dist, out_dir / "histogram.csv")
    _log(f"wrote {out_dir / 'histogram.csv'}")
    print(f"mean_nu={dist.mean:.6f}")
    print(f"std_nu={dist.std:.6f}")
    if dist.result.n_failed > 0.01 * campaign.n_samples:
        return EXIT_SOLVER
    return EXIT_OK


def cmd_gyni(args) -> int:
    report = gyni_report(seed=args.seed, tolerances=_tolerances(args))
    print(f"unrestricted={report.unrestricted:.6f}")
    print(f"finite_d2_k1={report.finite_d2_k1:.6f}")
    _log(f"basis cardinality {report.basis_cardinality}, objective {report.objective_words}")
    return EXIT_OK


def cmd_ququart_hunt(args) -> int:
    scenario = Scenario(2, 3, 3)
    basis = _load_or_build_basis(args, scenario, 3, 1, args.basis_seed)
    hunt = ququart_hunt(basis, n_max=args.n_max, master_seed=args.seed,
                        tolerances=_tolerances(args))
    print(f"found={str(hunt.found).lower()}")
    print(f"n_tried={hunt.n_tried}")
    out_dir = Path(args.out_dir)
    if not hunt.found:
        payload = {"found": False, "n_tried": hunt.n_tried, "nus": hunt.nus,
                   "provenance": _provenance(args)}
        _write_json(out_dir / "hunt.json", payload)
        return EXIT_OK
    print(f"nu={hunt.nu:.10f}")
    print(f"sample_index={hunt.index}")
    payload = {
        "found": True,
        "n_tried": hunt.n_tried,
        "nu": hunt.nu,
        "seed_entropy": list(hunt.seed_entropy),
        "behavior": hunt.behavior.to_json_dict(),
        "state": [[[float(z.real), float(z.imag)] for z in row] for row in hunt.state],
        "projectors": [
            [[[[float(z.real), float(z.imag)] for z in row] for row in proj] for proj in setting]
            for setting in hunt.projectors
        ],
        "nus": hunt.nus,
        "provenance": _provenance(args),
    }
    _write_json(out_dir / "hunt.json", payload)
    hunt.witness.provenance.update(_provenance(args))
    hunt.witness.save(out_dir / "witness.json")
    _log(f"wrote {out_dir / 'witness.json'}")
    return EXIT_OK


# -- wiring ------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; its entries override flags")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--cache-dir", default=None, help="basis cache directory")
    p.add_argument("--workers", type=int, default=1, help="worker processes for campaigns")
    p.add_argument("--feas-tol", type=float, default=None, help="solver feasibility tolerance")
    p.add_argument("--gap-tol", type=float, default=None, help="solver gap tolerance")


def build_parser() -> _Parser:
    parser = _Parser(prog="seqdim",
                     description="Quantum dimension certification from sequential measurements")
    parser.add_argument("--version", action="version", version=f"seqdim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basis", help="build a moment-matrix basis with oracle cross-check")
    p.add_argument("--scenario", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("classify", help="tabulate basis cardinalities across dimensions")
    p.add_argument("--scenarios", required=True, help="comma-separated m-l-o list")
    p.add_argument("--dims", required=True, help="comma-separated dimensions")
    p.add_argument("--k", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("certify", help="robustness verdict for a behavior file")
    p.add_argument("--behavior", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("witness-check", help="replay a witness on freshly sampled behaviors")
    p.add_argument("--witness", required=True)
    p.add_argument("--n", type=int, default=1000)
    _add_common(p)
    p.set_defaults(func=cmd_witness_check)

    for name, func, needs_scenarios in (
        ("sample", cmd_sample, False),
        ("curve", cmd_curve, True),
        ("distribution", cmd_distribution, False),
    ):
        p = sub.add_parser(name, help=f"{name} campaign")
        if needs_scenarios:
            p.add_argument("--scenarios", required=True, help="comma-separated m-l-o list")
        else:
            p.add_argument("--scenario", required=True)
        p.add_argument("--d-sample", type=int, required=True)
        p.add_argument("--d-test", type=int, required=True)
        p.add_argument("--k", type=int, default=1)
        p.add_argument("--n", type=int, default=2000)
        p.add_argument("--basis-seed", type=int, default=0)
        _add_common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("gyni", help="both guess-your-neighbor's-input optima")
    _add_common(p)
    p.set_defaults(func=cmd_gyni)

    p = sub.add_parser("ququart-hunt", help="search 2-3-3 for a behavior beyond qutrits")
    p.add_argument("--n-max", type=int, default=500)
    p.add_argument("--basis-seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_ququart_hunt)

    return parser


def _apply_config(parser: _Parser, args: argparse.Namespace) -> None:
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config) as fh:
            overrides = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config file: {exc}")
    valid = set(vars(args))
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if attr not in valid:
            raise UsageError(f"unknown config field {key!r}")
        setattr(args, attr, value)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(parser, args)
        return args.func(args)
    except UsageError as exc:
        print(f"seqdim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"seqdim: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"seqdim: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverFailure as exc:
        print(f"seqdim: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
