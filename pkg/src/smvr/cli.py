"""Command-line entry point.

::

    smvr run --config exp.yaml --algo smvr,nested_sgd --seeds 0-9 --out results
    smvr compare results --checkpoints 5 --reference smvr
    smvr rate results/smvr/0.csv --window 1000 100000

Exit codes: 0 success, 1 configuration error, 2 at least one run aborted.
"""

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .algorithms import estimate_rate_exponent
from .data_io import read_trace
from .exceptions import ConfigurationError, SMVRError
from .harness import (ALGORITHMS, ExperimentConfig, compare_report, load_traces, mean_curve,
                      run_experiment, write_report)

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2


def _number_list(text, cast=float):
    try:
        return [cast(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None


def _seeds(text):
    """``"3"``, ``"0,2,5"`` or an inclusive range ``"0-9"``."""
    if "-" in text.strip("-"):
        lo, hi = text.split("-", 1)
        try:
            return list(range(int(lo), int(hi) + 1))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad seed range {text!r}") from None
    return _number_list(text, int)


def _add_run_args(p):
    p.add_argument("--config", type=Path, help="YAML experiment file")
    p.add_argument("--problem", choices=("synthetic", "portfolio", "term"),
                   help="problem kind (replaces the config's problem parameters)")
    p.add_argument("--data", help="returns CSV for the portfolio problem")
    p.add_argument("--algo", type=lambda s: _number_list(s, str),
                   help=f"comma-separated subset of {', '.join(ALGORITHMS)}")
    p.add_argument("--T", type=int, help="iterations per run")
    p.add_argument("--budget", type=int, help="equal sample budget per run (overrides T)")
    p.add_argument("--seeds", type=_seeds, help="e.g. 0-9 or 0,3,7")
    p.add_argument("--beta", type=_number_list, help="momentum value(s)")
    p.add_argument("--eta", type=_number_list, help="step size value(s)")
    p.add_argument("--batch", type=int, help="batch size per level")
    p.add_argument("--stride", type=int, help="trace stride")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--out", help="output directory")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the configuration-error code, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="smvr", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    _add_run_args(sub.add_parser("run", help="run an experiment grid"))
    cmp_ = sub.add_parser("compare", help="rank algorithms at equal sample budgets")
    cmp_.add_argument("directory", type=Path)
    cmp_.add_argument("--checkpoints", type=int, default=5)
    cmp_.add_argument("--reference", default="smvr")
    cmp_.add_argument("--report", type=Path, help="CSV path (default <directory>/compare.csv)")
    rate = sub.add_parser("rate", help="log-log slope of gradient norms")
    rate.add_argument("traces", nargs="+", type=Path)
    rate.add_argument("--window", nargs=2, type=int, metavar=("LO", "HI"))
    rate.add_argument("--smoothing", choices=("running_mean", "none"), default="running_mean")
    return parser


def config_from_args(args):
    """Merge the YAML file (if any) with flag overrides into an :class:`ExperimentConfig`."""
    data = {}
    if args.config is not None:
        try:
            data = yaml.safe_load(args.config.read_text()) or {}
        except OSError as exc:
            raise ConfigurationError(f"config: cannot read {args.config} ({exc.strerror})") from None
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"config: invalid YAML ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigurationError("config: top level must be a mapping")
    if args.problem is not None:
        data["problem"] = {"kind": args.problem}
    if args.data is not None:
        data.setdefault("problem", {"kind": "portfolio"})["data"] = args.data
    if args.algo is not None:
        by_name = {a.get("name"): a for a in data.get("algorithms", []) if isinstance(a, dict)}
        data["algorithms"] = [dict(by_name.get(n, {"name": n})) for n in args.algo]
    algos = data.setdefault("algorithms", [{"name": "smvr"}])
    for key in ("beta", "eta", "batch"):
        value = getattr(args, key)
        if value is None:
            continue
        if isinstance(value, list) and len(value) == 1:
            value = value[0]
        for spec in algos:
            if isinstance(spec, dict) and not (key == "beta" and spec.get("name") == "nested_sgd"):
                spec[key] = value
    if args.budget is not None:
        data["budget"] = args.budget
        data["T"] = None
    for key in ("T", "seeds", "stride", "workers", "out"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    return ExperimentConfig.from_dict(data)


def _cmd_run(args):
    config = config_from_args(args)
    summary, records = run_experiment(config)
    for row in summary:
        print(f"{row['algorithm']}: runs={row['n_runs']} aborted={row['n_aborted']} "
              f"final_loss={row.get('final_loss_mean', float('nan')):.6g} "
              f"rate={row.get('rate_exponent', float('nan')):.3f}")
    aborted = [r for r in records if r["status"] != "ok"]
    for r in aborted:
        print(f"aborted: {r['label']} seed {r['seed']}: {r['message']}", file=sys.stderr)
    return EXIT_ABORT if aborted else EXIT_OK


def _cmd_compare(args):
    rows = compare_report(load_traces(args.directory), args.checkpoints, args.reference)
    write_report(rows, args.report or args.directory / "compare.csv")
    for r in rows:
        flag = "" if r["reference_le"] is None else (" PASS" if r["reference_le"] else " FAIL")
        print(f"{r['checkpoint']:>12d} {r['algorithm']:<28s} loss={r['loss_mean']:.6g} "
              f"(rank {r['loss_rank']}) grad={r['grad_norm_mean']:.6g} "
              f"(rank {r['grad_norm_rank']}){flag}")
    return EXIT_OK


def _cmd_rate(args):
    traces = [read_trace(p) for p in args.traces]
    curve = mean_curve(traces) if len(traces) > 1 else traces[0]
    print(f"{estimate_rate_exponent(curve, args.window, args.smoothing):.6f}")
    return EXIT_OK


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not any(a in ("run", "compare", "rate") for a in argv) and not {"-h", "--help"} & set(argv):
        lead = 0
        while lead < len(argv) and argv[lead] in ("-v", "--verbose"):
            lead += 1
        argv.insert(lead, "run")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": _cmd_run, "compare": _cmd_compare, "rate": _cmd_rate}
    try:
        return handlers[args.command](args)
    except ConfigurationError as exc:
        print(f"smvr: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SMVRError as exc:
        print(f"smvr: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
