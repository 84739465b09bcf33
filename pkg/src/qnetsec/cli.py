"""Command line front end.

    qnetsec run --scenario s.json [--seed N | --seeds A..B] [--out DIR]
                [--cert-scope link|e2e] [--log-level LEVEL]
    qnetsec diff --baseline base_report.json candidate_report.json [--force]
    qnetsec validate --scenario s.json

Exit codes: 0 success, 2 validation failure (bad scenario document, or a
diff across different scenarios without --force), 3 runtime contradiction
(the run itself violated an internal invariant).
"""
import argparse
import json
import logging
import os
import sys
import time

from . import engine as eng
from . import report as rpt
from . import scenario as scn
from .errors import QnetsecError, ValidationError

log = logging.getLogger("qnetsec")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class RuntimeContradiction(QnetsecError):
    """The run finished in a state the model forbids."""


def _parse_seeds(spec: str) -> list:
    """Accepts '7', '3,5,9' or an inclusive range '1..32'."""
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ValueError(f"empty seed range {spec!r}")
        return list(range(lo, hi + 1))
    return [int(tok) for tok in spec.split(",") if tok.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qnetsec", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--log-level", default="warning",
                   choices=["debug", "info", "warning", "error"])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario (single seed or sweep)")
    run.add_argument("--scenario", required=True, help="scenario JSON path")
    g = run.add_mutually_exclusive_group()
    g.add_argument("--seed", type=int, default=None,
                   help="override the scenario's seed")
    g.add_argument("--seeds", default=None,
                   help="seed sweep: 'A..B' inclusive or comma list")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--cert-scope", default=None,
                     choices=[scn.CERT_SCOPE_LINK, scn.CERT_SCOPE_E2E],
                     help="override protocol.cert_scope")

    diff = sub.add_parser("diff", help="compare a run report against a baseline")
    diff.add_argument("candidate", help="candidate report.json")
    diff.add_argument("--baseline", required=True, help="baseline report.json")
    diff.add_argument("--force", action="store_true",
                      help="compare even when core fingerprints differ")
    diff.add_argument("--out", default=None,
                      help="write the delta JSON here instead of stdout")

    val = sub.add_parser("validate", help="check a scenario document and exit")
    val.add_argument("--scenario", required=True)
    return p


def _load(path: str, *, seed=None, cert_scope=None) -> scn.Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return scn.load_scenario(doc, seed_override=seed,
                             cert_scope_override=cert_scope)


def _run_one(path: str, seed, cert_scope, out_dir: str, suffix: str = "") -> dict:
    scenario = _load(path, seed=seed, cert_scope=cert_scope)
    t0 = time.perf_counter()
    e = eng.Engine(scenario).run()
    wall = time.perf_counter() - t0
    if not e.ledger.accounting_identity_holds():
        raise RuntimeContradiction(
            f"pair accounting identity violated: {e.ledger.to_dict()['fate_counts']}")
    paths = rpt.write_run(e, out_dir, wall_s=wall, suffix=suffix)
    log.info("run %s seed=%s -> %s", scenario.name or path, scenario.seed,
             paths["report"])
    return rpt.build_report(e, wall_s=wall)


def cmd_run(args) -> int:
    if args.seeds is None:
        report = _run_one(args.scenario, args.seed, args.cert_scope, args.out)
        sys.stdout.write(_one_line_summary(report))
        return EXIT_OK
    seeds = _parse_seeds(args.seeds)
    reports = []
    for seed in seeds:
        reports.append(_run_one(args.scenario, seed, args.cert_scope,
                                args.out, suffix=f"_seed{seed}"))
    agg = rpt.aggregate(reports)
    agg_path = os.path.join(args.out, "aggregate.json")
    with open(agg_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(agg, sort_keys=True, indent=2) + "\n")
    sys.stdout.write(f"{len(seeds)} runs -> {agg_path}\n")
    return EXIT_OK


def _one_line_summary(report: dict) -> str:
    led = report["cia_ledger"]
    states = ",".join(f"{c['connection']}={c['state']}"
                      for c in report["connections"])
    return (f"{report['scenario']['name'] or 'run'} seed={report['scenario']['seed']} "
            f"{states} leaked={led['confidentiality_leaked_pairs']} "
            f"bad={led['integrity_bad_delivered']}\n")


def cmd_diff(args) -> int:
    with open(args.baseline, "r", encoding="utf-8") as fh:
        baseline = json.load(fh)
    with open(args.candidate, "r", encoding="utf-8") as fh:
        candidate = json.load(fh)
    delta = rpt.diff_reports(baseline, candidate, force=args.force)
    text = json.dumps(delta, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    _load(args.scenario)
    sys.stdout.write("ok\n")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()),
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "diff": cmd_diff, "validate": cmd_validate}[args.command]
    try:
        return handler(args)
    except ValidationError as exc:
        for v in exc.violations:
            print(str(v), file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except QnetsecError as exc:
        print(f"runtime contradiction: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
