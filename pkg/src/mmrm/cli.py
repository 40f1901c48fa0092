"""Command-line interface: analyze, power, samplesize, simulate, tables."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import scenarios
from .config import DesignSpec
from .data import MonotoneStrategy, monotonize, read_csv, validate_monotone
from .design import power_exact, size_two_step
from .errors import DataFormatError, InvalidModelError, InvalidSpecError, MMRMError, NonMonotoneError
from .reml import fit_mmrm
from .simulate import GenerationSpec, run_replications, write_records_tsv
from .variance import InfoMode, variance_report, wald_test

EXIT_PARSE = 2
EXIT_NONMONOTONE = 3
EXIT_FIT = 4


class CliError(Exception):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


def _sig(x, digits=4):
    return f"{x:.{digits}g}"


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True)


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_PARSE, f"cannot read {path}: {exc}") from None


def _load_spec(path) -> DesignSpec:
    try:
        return DesignSpec.from_dict(_load_json(path))
    except (InvalidSpecError, InvalidModelError, MMRMError) as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def analysis_report(data, info_mode=InfoMode.EXPECTED) -> dict:
    """Fit every terminal visit and collect estimates, SEs and the last-visit test."""
    fit = fit_mmrm(data)
    per_visit = []
    for j in range(1, data.p + 1):
        sub = fit if j == data.p else fit_mmrm(data.truncate_visits(j))
        rep = variance_report(sub, info_mode)
        per_visit.append(
            {
                "visit": j,
                "alpha": fit.alpha[:, j - 1].tolist(),
                "tau": float(fit.alpha[-1, j - 1]),
                "seAsymptotic": rep.se("asymptotic"),
                "seKR": rep.se("kr"),
                "seDelta": rep.se("delta"),
            }
        )
    test = wald_test(fit, info_mode)
    return {
        "visits": per_visit,
        "sigmaHat": fit.sigma_hat.tolist(),
        "infoMode": InfoMode(info_mode).value,
        "test": {
            "estimate": test.estimate,
            "seKR": test.se,
            "df": test.df,
            "statistic": test.statistic,
            "pValue": test.p_value,
        },
    }


def _format_analysis(report: dict) -> str:
    lines = [
        f"subjects {report['input']['n']}  visits {report['input']['p']}  sha256 {report['input']['sha256'][:12]}",
        "",
        f"{'visit':>5} {'tau':>10} {'SE asym':>10} {'SE KR':>10} {'SE delta':>10}",
    ]
    for v in report["visits"]:
        lines.append(
            f"{v['visit']:>5} {_sig(v['tau']):>10} {_sig(v['seAsymptotic']):>10} "
            f"{_sig(v['seKR']):>10} {_sig(v['seDelta']):>10}"
        )
    t = report["test"]
    lines += [
        "",
        f"last visit: tau = {_sig(t['estimate'])}, SE(KR) = {_sig(t['seKR'])}, "
        f"df = {_sig(t['df'])}, t = {_sig(t['statistic'])}, p = {_sig(t['pValue'])}",
    ]
    return "\n".join(lines)


def cmd_analyze(args) -> str:
    try:
        with open(args.data, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        records = read_csv(args.data)
    except OSError as exc:
        raise CliError(EXIT_PARSE, str(exc)) from None
    except DataFormatError as exc:
        raise CliError(EXIT_PARSE, str(exc)) from None
    p = len(records[0].outcomes)
    try:
        if args.monotone_strategy:
            data = monotonize(records, MonotoneStrategy(args.monotone_strategy))
        else:
            data = validate_monotone(records, p)
    except NonMonotoneError as exc:
        raise CliError(EXIT_NONMONOTONE, f"{exc}; use --monotone-strategy") from None
    except (ValueError, MMRMError) as exc:
        raise CliError(EXIT_FIT, str(exc)) from None
    try:
        report = analysis_report(data, InfoMode(args.info_mode))
    except (MMRMError, np.linalg.LinAlgError) as exc:
        raise CliError(EXIT_FIT, f"fit failed: {exc}") from None
    report = {
        "input": {
            "sha256": digest,
            "n": data.n,
            "p": data.p,
            "patternCounts": data.pattern_counts().tolist(),
            "monotoneStrategy": args.monotone_strategy,
        },
        **report,
    }
    return _dump(report) if args.out == "json" else _format_analysis(report)


# ---------------------------------------------------------------------------
# design commands
# ---------------------------------------------------------------------------


def cmd_power(args) -> str:
    spec = _load_spec(args.spec)
    try:
        res = power_exact(args.n, spec, variance_at=args.variance_at)
    except MMRMError as exc:
        raise CliError(1, str(exc)) from None
    if args.out == "json":
        return _dump(res.to_dict())
    return (
        f"n = {res.n}  df = {_sig(res.df)}  sqrt(n) lambda = {_sig(res.lambda_sqrt_n)}\n"
        f"power (exact) = {_sig(100 * res.power_exact)}%  power (approx) = {_sig(100 * res.power_approx)}%"
    )


def cmd_samplesize(args) -> str:
    spec = _load_spec(args.spec)
    try:
        plan = size_two_step(
            spec,
            tail=args.tail,
            nl_offset=args.nl_offset,
            bisection_below=None if args.no_bisection else 12.0,
        )
    except MMRMError as exc:
        raise CliError(1, str(exc)) from None
    if args.out == "json":
        return _dump(plan.to_dict())
    return (
        f"n_l = {plan.nl}  n_u* = {plan.nu_star:.1f}  n_u = {plan.nu:.1f}\n"
        f"n = {plan.final} (arms {plan.per_arm[0]} / {plan.per_arm[1]})"
        f"{'  [bisection]' if plan.used_bisection else ''}\n"
        f"nominal power = {_sig(100 * plan.nominal_power)}%"
    )


def table_rows(table: int, row=None) -> list[dict]:
    scenario = {2: 1, 3: 2}[table]
    rows = scenarios.table_rows(scenario)
    if row is not None:
        rows = [r for r in rows if r == row]
        if not rows:
            raise CliError(EXIT_PARSE, f"no row {row} in table {table}")
    out = []
    for structure, tau in rows:
        plan = size_two_step(scenarios.design(structure, tau, scenario), bisection_below=None)
        out.append(
            {
                "structure": structure,
                "tau": tau,
                "nl": plan.nl,
                "nuStar": plan.nu_star,
                "nu": plan.nu,
                "n": plan.final,
                "nominalPower": plan.nominal_power,
            }
        )
    return out


def _parse_row(text):
    try:
        structure, tau = text.split(",")
        return structure.strip().lower(), float(tau)
    except ValueError:
        raise CliError(EXIT_PARSE, f"--row expects STRUCTURE,TAU, got {text!r}") from None


def cmd_tables(args) -> str:
    row = _parse_row(args.row) if args.row else None
    rows = table_rows(args.table, row)
    if args.out == "json":
        return _dump(rows)
    lines = [f"{'structure':<13}{'tau':>5}{'n_l':>6}{'n_u*':>8}{'n_u':>8}{'n':>6}{'power%':>9}"]
    for r in rows:
        lines.append(
            f"{r['structure']:<13}{r['tau']:>5.0f}{r['nl']:>6}{r['nuStar']:>8.1f}{r['nu']:>8.1f}"
            f"{r['n']:>6}{100 * r['nominalPower']:>9.2f}"
        )
    return "\n".join(lines)


def cmd_simulate(args) -> str:
    spec = _load_spec(args.spec)
    try:
        gen = GenerationSpec.from_dict(_load_json(args.gen))
    except (InvalidSpecError, InvalidModelError, MMRMError) as exc:
        raise CliError(EXIT_PARSE, f"{args.gen}: {exc}") from None
    try:
        summary = run_replications(
            gen, args.n, args.reps, args.seed, alpha=spec.alpha,
            info_mode=InfoMode(args.info_mode), workers=args.workers,
            keep_records=bool(args.records),
        )
    except MMRMError as exc:
        raise CliError(1, str(exc)) from None
    if args.records:
        write_records_tsv(args.records, summary.records)
    out = summary.to_dict()
    try:
        out["nominalPower"] = power_exact(args.n, spec).power_exact
    except MMRMError:
        out["nominalPower"] = None
    if args.out == "json":
        return _dump(out)
    return (
        f"n = {summary.n}  reps = {summary.reps}  failures = {summary.failures}\n"
        f"simulated power = {_sig(100 * summary.simulated_power)}% (MC SE {_sig(100 * summary.mc_se, 2)}%)"
    )


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmrm", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def out_flag(p, default="text"):
        p.add_argument("--out", choices=("json", "text"), default=default)

    a = sub.add_parser("analyze", help="fit a monotone dataset from CSV")
    a.add_argument("--data", required=True)
    a.add_argument("--monotone-strategy", choices=[s.value for s in MonotoneStrategy])
    a.add_argument("--info-mode", choices=("expected", "observed"), default="expected")
    out_flag(a, "json")
    a.set_defaults(func=cmd_analyze)

    p = sub.add_parser("power", help="nominal power at a given total size")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--variance-at", type=float, default=None,
                   help="size at which the treatment-effect variance is evaluated (default: --n)")
    out_flag(p, "json")
    p.set_defaults(func=cmd_power)

    s = sub.add_parser("samplesize", help="two-step sample size")
    s.add_argument("--spec", required=True)
    s.add_argument("--tail", choices=("auto", "full", "simple"), default="auto")
    s.add_argument("--nl-offset", type=int, default=0)
    s.add_argument("--no-bisection", action="store_true")
    out_flag(s, "json")
    s.set_defaults(func=cmd_samplesize)

    m = sub.add_parser("simulate", help="simulated power by replication")
    m.add_argument("--spec", required=True)
    m.add_argument("--gen", required=True)
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--reps", type=int, required=True)
    m.add_argument("--seed", type=int, required=True)
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--info-mode", choices=("expected", "observed"), default="expected")
    m.add_argument("--records", help="write per-replication TSV here")
    out_flag(m, "json")
    m.set_defaults(func=cmd_simulate)

    t = sub.add_parser("tables", help="sample-size tables for the built-in scenarios")
    t.add_argument("--table", type=int, choices=(2, 3), required=True)
    t.add_argument("--row", help="STRUCTURE,TAU e.g. unstructured,-12")
    out_flag(t)
    t.set_defaults(func=cmd_tables)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.func(args)
    except CliError as exc:
        print(f"mmrm: {exc}", file=sys.stderr)
        return exc.code
    print(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
