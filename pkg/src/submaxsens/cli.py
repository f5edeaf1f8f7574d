"""Command line interface.

Subcommands::

    analyze            deviates, critical value and decision per Gamma
    sensitivity-value  largest Gamma on a grid at which the test rejects
    critval            equicoordinate critical value for a correlation matrix
    power              simulated power for the sampling situations
    export-scores      per-pair scores of all three methods on the data scale

Exit codes: 0 ok, 1 usage, 2 data validation, 3 degenerate statistic,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict

import numpy as np

from . import __version__, mvnorm
from .data import GroupedStudy, read_csv
from .errors import DataValidationError, DegenerateStatistic, NumericalError
from .mvnorm import MvnSettings
from .scoring import DEFAULT_PSI, METHODS, PsiParams, canonical_method, score
from .sim import TABLE_GAMMAS, generate_study, get_situation, power_grid
from .submax import SubmaxAnalysis, scan, gamma_grid

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE, EXIT_NUMERIC = 0, 1, 2, 3, 4
SEED_ENV = "SUBMAXSENS_SEED"

log = logging.getLogger("submaxsens")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _methods(text):
    if text == "all":
        return list(METHODS)
    try:
        return [canonical_method(m) for m in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _default_seed():
    try:
        return int(os.environ.get(SEED_ENV, "20240101"))
    except ValueError:
        return 20240101


def _add_common(p, data=True):
    if data:
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--data", metavar="CSV", help="pair_id,cov_1,...,cov_L,d file")
        src.add_argument("--simulate", metavar="SITUATION:SEED", help="use one simulated replication instead of a file")
        p.add_argument("--direction", choices=("greater", "less"), default="greater",
                       help="'less' negates d so that decreases count as evidence")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--inner", type=float, default=0.0, help="psi inner cut a")
    p.add_argument("--trim", type=float, default=3.0, help="psi trimming level t")
    p.add_argument("--seed", type=int, default=None, help=f"integration seed (default ${SEED_ENV} or 20240101)")
    p.add_argument("--target-se", type=float, default=mvnorm.DEFAULT_MVN.target_se)
    p.add_argument("--max-samples", type=int, default=mvnorm.DEFAULT_MVN.max_samples)
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p.add_argument("-o", "--output", help="write here instead of stdout")


def version_text() -> str:
    d = mvnorm.DEFAULT_MVN
    return (f"submaxsens {__version__}\n"
            f"psi defaults: inner={DEFAULT_PSI.inner:g} trim={DEFAULT_PSI.trim:g}\n"
            f"mvn defaults: target_se={d.target_se:g} max_samples={d.max_samples} seed={d.seed}\n"
            f"kernel: {mvnorm.backend()}\n")


class _Version(argparse.Action):
    def __init__(self, option_strings, dest=argparse.SUPPRESS, default=argparse.SUPPRESS, help=None):
        super().__init__(option_strings, dest, nargs=0, default=default, help="print version and defaults")

    def __call__(self, parser, namespace, values, option_string=None):
        sys.stdout.write(version_text())
        parser.exit(EXIT_OK)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="submaxsens", description="Submax sensitivity analysis for matched pairs.")
    parser.add_argument("--version", action=_Version)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="deviates and decision per Gamma")
    _add_common(p)
    p.add_argument("--method", type=_methods, default=list(METHODS), help="method, comma list, or 'all'")
    p.add_argument("--gamma", type=_floats, default=[1.0], help="Gamma or comma list")

    p = sub.add_parser("sensitivity-value", help="largest rejecting Gamma on a grid")
    _add_common(p)
    p.add_argument("--method", type=_methods, default=list(METHODS))
    p.add_argument("--gamma-max", type=float, default=10.0)
    p.add_argument("--step", type=float, default=0.05)

    p = sub.add_parser("critval", help="critical value for a correlation matrix")
    _add_common(p, data=False)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--rho", help="correlation matrix as JSON (inline or a file path)")
    src.add_argument("--data", metavar="CSV")
    src.add_argument("--simulate", metavar="SITUATION:SEED")
    p.add_argument("--method", type=_methods, default=[METHODS[2]])
    p.add_argument("--direction", choices=("greater", "less"), default="greater")

    p = sub.add_parser("power", help="simulated power of the sensitivity analysis")
    _add_common(p, data=False)
    p.add_argument("--situation", default="all", help="1-5, comma list, or 'all'")
    p.add_argument("--method", type=_methods, default=list(METHODS))
    p.add_argument("--gamma", type=_floats, default=None, help="default: tabulated values per situation")
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--sim-seed", type=int, default=None, help="replication seed (default: --seed)")
    p.add_argument("--null", action="store_true", help="set both block effects to zero")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("export-scores", help="per-pair scores on the data scale")
    _add_common(p)
    return parser


def _settings(args) -> tuple[PsiParams, MvnSettings]:
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        return PsiParams(args.inner, args.trim), MvnSettings(args.target_se, args.max_samples, seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise UsageError(f"--alpha must be in (0, 1), got {alpha}")


def load_study(args) -> tuple[GroupedStudy, str]:
    if args.data:
        study, source = read_csv(args.data), args.data
    else:
        try:
            sit, seed = args.simulate.split(":")
            study = generate_study(get_situation(sit), int(seed), 0)
        except ValueError:
            raise UsageError(f"--simulate expects SITUATION:SEED with situation 1-5, got {args.simulate!r}") from None
        source = f"simulate:{args.simulate}"
    if getattr(args, "direction", "greater") == "less":
        study = study.negated()
    return study, source


def _header(command, source, methods, alpha, psi, mvn, direction="greater", **extra) -> dict:
    h = {"command": command, "version": __version__, "input": source, "direction": direction,
         "methods": list(methods), "alpha": alpha, "psi": asdict(psi), "mvn": asdict(mvn),
         "kernel": mvnorm.backend()}
    h.update(extra)
    return h


def analyze_report(study, methods, gammas, alpha, psi, mvn, source="", direction="greater") -> dict:
    """Library form of ``analyze``; the CLI prints ``json.dumps`` of this."""
    results = []
    for method in methods:
        an = SubmaxAnalysis(study, method, psi, alpha, mvn)
        for g in gammas:
            results.append(an.test(g).to_dict())
    return {"header": _header("analyze", source, methods, alpha, psi, mvn, direction,
                              sizes=[int(s) for s in study.sizes]),
            "results": results}


def _tsv_header(h) -> list[str]:
    return [f"# {k}: {json.dumps(v)}" for k, v in h.items()]


def _fmt(x) -> str:
    return f"{x:.4f}"


def render_analyze_tsv(report) -> str:
    lines = _tsv_header(report["header"])
    res = report["results"]
    if res:
        lines.append("\t".join(["method", "gamma", *res[0]["labels"], "max", "kappa", "reject"]))
    for r in res:
        k = r["kappa"]
        cells = [_fmt(d) + ("*" if d > k else "") for d in r["deviates"]]
        lines.append("\t".join([r["method"], f"{r['gamma']:g}", *cells, _fmt(r["d_max"]) + ("*" if r["reject"] else ""),
                                _fmt(k), "yes" if r["reject"] else "no"]))
    return "\n".join(lines) + "\n"


def cmd_analyze(args) -> str:
    _check_alpha(args.alpha)
    psi, mvn = _settings(args)
    study, source = load_study(args)
    report = analyze_report(study, args.method, args.gamma, args.alpha, psi, mvn, source, args.direction)
    return json.dumps(report) + "\n" if args.format == "json" else render_analyze_tsv(report)


def cmd_sensitivity_value(args) -> str:
    _check_alpha(args.alpha)
    psi, mvn = _settings(args)
    study, source = load_study(args)
    try:
        grid = gamma_grid(args.gamma_max, args.step)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = []
    for method in args.method:
        an = SubmaxAnalysis(study, method, psi, args.alpha, mvn)
        gstar, curve = scan(an, grid)
        out.append({"method": method, "gamma_star": gstar, "kappa": an.kappa,
                    "curve": [asdict(p) for p in curve]})
    header = _header("sensitivity-value", source, args.method, args.alpha, psi, mvn, args.direction,
                     gamma_max=args.gamma_max, step=args.step)
    if args.format == "json":
        return json.dumps({"header": header, "results": out}) + "\n"
    lines = _tsv_header(header)
    lines += [f"# sensitivity value {r['method']}: {'none' if r['gamma_star'] is None else format(r['gamma_star'], 'g')}"
              for r in out]
    lines.append("method\tgamma\td_max\tkappa\treject")
    for r in out:
        for p in r["curve"]:
            lines.append(f"{r['method']}\t{p['gamma']:g}\t{_fmt(p['d_max'])}\t{_fmt(p['kappa'])}\t{'yes' if p['reject'] else 'no'}")
    return "\n".join(lines) + "\n"


def _load_rho(text):
    if os.path.exists(text):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"--rho is not valid JSON: {exc}") from None
    if isinstance(obj, dict):
        obj = obj.get("rho")
    return np.asarray(obj, dtype=float)


def cmd_critval(args) -> str:
    _check_alpha(args.alpha)
    psi, mvn = _settings(args)
    if args.rho:
        rho, source, labels = _load_rho(args.rho), "rho", None
    else:
        study, source = load_study(args)
        an = SubmaxAnalysis(study, args.method[0], psi, args.alpha, mvn)
        rho, labels = an.rho, list(an.labels)
    kappa = mvnorm.critical_value(rho, args.alpha, mvn)
    p, se = mvnorm.equicoordinate_prob(kappa, rho, mvn)
    lo, hi = mvnorm.critical_value_bracket(rho.shape[0], args.alpha)
    header = _header("critval", source, args.method if labels else [], args.alpha, psi, mvn)
    res = {"kappa": kappa, "prob": p, "se": se, "K": int(rho.shape[0]), "bracket": [lo, hi],
           "labels": labels, "rho": rho.tolist()}
    if args.format == "json":
        return json.dumps({"header": header, "result": res}) + "\n"
    lines = _tsv_header(header) + ["K\tkappa\tprob\tse\tlower\tupper",
                                   f"{res['K']}\t{kappa:.5f}\t{p:.6f}\t{se:.2g}\t{lo:.5f}\t{hi:.5f}"]
    return "\n".join(lines) + "\n"


def cmd_power(args) -> str:
    _check_alpha(args.alpha)
    psi, mvn = _settings(args)
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    try:
        sits = sorted(TABLE_GAMMAS) if args.situation == "all" else [get_situation(s).id for s in args.situation.split(",")]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sim_seed = args.sim_seed if args.sim_seed is not None else mvn.seed
    rows = []
    for s in sits:
        log.info("situation %d: %d replications", s, args.reps)
        rows += power_grid(s, args.method, args.gamma, args.alpha, args.reps, sim_seed, args.null, psi, mvn, args.workers)
    header = _header("power", "simulation", args.method, args.alpha, psi, mvn, reps=args.reps,
                     sim_seed=sim_seed, null=args.null)
    if args.format == "json":
        return json.dumps({"header": header, "results": [r.to_dict() for r in rows]}) + "\n"
    lines = _tsv_header(header) + ["situation\tgamma\tmethod\tpower\tmc_se\treps\tseed\tfailures"]
    for r in rows:
        lines.append(f"{r.situation}\t{r.gamma:g}\t{r.method}\t{r.power:.4f}\t{r.mc_se:.4f}\t{r.reps}\t{r.seed}\t{r.failures}")
    return "\n".join(lines) + "\n"


def export_scores_rows(study: GroupedStudy, psi: PsiParams) -> tuple[list[str], list[list]]:
    cols = {m: score(study, m, psi).on_data_scale() for m in METHODS}
    labels = study.group_labels
    header = ["pair_id", "group", "d", *METHODS]
    rows = [[study.pair_ids[i], labels[study.group[i]], float(study.d[i]), *(float(cols[m][i]) for m in METHODS)]
            for i in range(study.n_pairs)]
    return header, rows


def cmd_export_scores(args) -> str:
    psi, mvn = _settings(args)
    study, source = load_study(args)
    header, rows = export_scores_rows(study, psi)
    if args.format == "json":
        return json.dumps({"header": _header("export-scores", source, METHODS, args.alpha, psi, mvn, args.direction),
                           "columns": header, "rows": rows}) + "\n"
    lines = _tsv_header(_header("export-scores", source, METHODS, args.alpha, psi, mvn, args.direction))
    lines.append("\t".join(header))
    for r in rows:
        lines.append("\t".join([str(r[0]), r[1], *(repr(x) for x in r[2:])]))
    return "\n".join(lines) + "\n"


COMMANDS = {
    "analyze": cmd_analyze,
    "sensitivity-value": cmd_sensitivity_value,
    "critval": cmd_critval,
    "power": cmd_power,
    "export-scores": cmd_export_scores,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        text = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"submaxsens: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataValidationError, OSError) as exc:
        print(f"submaxsens: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DegenerateStatistic as exc:
        print(f"submaxsens: degenerate statistic ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except NumericalError as exc:
        print(f"submaxsens: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"submaxsens: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            # reader closed early (e.g. piped into head)
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
