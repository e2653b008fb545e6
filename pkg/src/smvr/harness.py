"""Experiment grids: build a problem, run optimizer cells, write traces and summaries.

The output layout is::

    <out>/<label>/<seed>.csv   one trace per (algorithm, seed) cell
    <out>/runs.csv             status of every cell
    <out>/summary.csv          per-algorithm aggregates
    <out>/curves.csv           mean curve across seeds, per algorithm
"""

import csv
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .algorithms import adaptive_smvr_run, estimate_rate_exponent, smvr_run, stagewise_run
from .baselines import nested_sgd_run, scsc_style_run
from .core import evaluate_exact
from .data_io import (load_industry_csv, read_trace, synth_classification, synth_returns,
                      write_trace)
from .exceptions import (AlignmentError, ConfigurationError, ContractViolation,
                         InsufficientDataError, SMVRError)
from .problems import build_hierarchical_term, build_portfolio, build_synthetic, groups_from_labels
from .schedules import ConstantSchedule, SmvrSchedule, StageSchedule
from .trace import RunTrace

logger = logging.getLogger(__name__)

ALGORITHMS = ("smvr", "stagewise_smvr", "adaptive_smvr", "nested_sgd", "scsc_style")
PROBLEM_KINDS = ("synthetic", "portfolio", "term")
BETA_GRID = (0.1, 0.5, 0.9)
ETA_GRID = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)

# hyperparameters each algorithm understands; eta/beta may be lists (grid axes)
_ALGO_KEYS = {
    "smvr": {"eta", "beta", "a", "schedule", "batch", "radius"},
    "adaptive_smvr": {"eta", "beta", "a", "schedule", "batch", "radius",
                      "scaler", "delta", "beta_prime", "c_l", "c_u"},
    "stagewise_smvr": {"eta", "beta", "c", "T_1", "rho", "n_stages", "batch", "radius",
                       "check_step_size"},
    "nested_sgd": {"eta", "a", "schedule", "batch"},
    "scsc_style": {"eta", "beta", "a", "schedule", "batch"},
}
_COMMON_KEYS = {"name", "label"}


@dataclass
class ExperimentConfig:
    """Declarative description of an experiment grid.

    Attributes
    ----------
    problem : dict
        ``kind`` (``synthetic``, ``portfolio`` or ``term``) plus builder
        parameters.  Portfolio takes ``data`` (a returns CSV) or synthesises
        returns from ``periods``/``assets``/``seed``.
    algorithms : list of dict
        Each entry has ``name`` and hyperparameters.  List-valued ``eta`` or
        ``beta`` expand into one cell per value, labelled
        ``<name>_eta<v>_beta<v>``.
    T : int, optional
        Iterations per run; ignored by ``stagewise_smvr``.
    budget : int, optional
        Sample budget; when set each algorithm gets the largest ``T`` whose
        sample count does not exceed it.
    seeds : list of int
    out : str
    stride : int, optional
        Trace stride; default ``max(1, T // 500)``.
    workers : int
    rate_window : (int, int), optional
        Iteration window for the rate exponent.
    """

    problem: dict = field(default_factory=lambda: {"kind": "synthetic"})
    algorithms: list = field(default_factory=lambda: [{"name": "smvr"}])
    T: Optional[int] = 1000
    budget: Optional[int] = None
    seeds: list = field(default_factory=lambda: [0])
    out: str = "results"
    stride: Optional[int] = None
    workers: int = 1
    rate_window: Optional[tuple] = None

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigurationError("config: top level must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"config: unknown field(s) {sorted(unknown)}")
        return cls(**d)

    def validate(self):
        if not isinstance(self.problem, dict) or self.problem.get("kind") not in PROBLEM_KINDS:
            raise ConfigurationError(f"problem.kind: must be one of {PROBLEM_KINDS}")
        if not self.algorithms:
            raise ConfigurationError("algorithms: need at least one algorithm")
        for i, spec in enumerate(self.algorithms):
            name = spec.get("name") if isinstance(spec, dict) else None
            if name not in _ALGO_KEYS:
                raise ConfigurationError(f"algorithms[{i}].name: must be one of {ALGORITHMS}")
            extra = set(spec) - _ALGO_KEYS[name] - _COMMON_KEYS
            if extra:
                raise ConfigurationError(f"algorithms[{i}]: unknown key(s) {sorted(extra)} for {name}")
        if not self.seeds:
            raise ConfigurationError("seeds: need at least one seed")
        if any(not isinstance(s, (int, np.integer)) or s < 0 for s in self.seeds):
            raise ConfigurationError("seeds: must be non-negative integers")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError("seeds: duplicates")
        for name in ("T", "budget", "stride"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, (int, np.integer)) or v < 1):
                raise ConfigurationError(f"{name}: must be a positive integer")
        if self.T is None and self.budget is None:
            raise ConfigurationError("T: one of T or budget is required")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigurationError("workers: must be a positive integer")
        if self.rate_window is not None:
            if len(self.rate_window) != 2 or not 0 < self.rate_window[0] < self.rate_window[1]:
                raise ConfigurationError("rate_window: need 0 < lo < hi")
            self.rate_window = tuple(self.rate_window)
        # surface hyperparameter errors before any run starts
        for cell in expand_cells(self):
            try:
                _make_schedule(cell)
            except ContractViolation as exc:
                raise ConfigurationError(f"{cell['label']}: {exc}") from None


def build_problem(spec):
    """Instantiate the problem described by a config ``problem`` mapping."""
    spec = dict(spec)
    kind = spec.pop("kind")
    try:
        if kind == "synthetic":
            if "dims" in spec:
                spec["dims"] = tuple(spec["dims"])
                spec.setdefault("K", len(spec["dims"]) - 1)
            return build_synthetic(**spec)
        if kind == "portfolio":
            data = spec.pop("data", None)
            if data is not None:
                R = load_industry_csv(data).values
            else:
                R = synth_returns(spec.pop("seed", 0), spec.pop("periods", 5000),
                                  spec.pop("assets", 10)).values
            return build_portfolio(R, **spec)
        if kind == "term":
            data_keys = ("seed", "n_samples", "n_features", "rare_ratio", "flip_fraction")
            data_args = {k: spec.pop(k) for k in data_keys if k in spec}
            data_args.setdefault("seed", 0)
            X, y = synth_classification(**data_args)
            groups, _ = groups_from_labels(X, y)
            return build_hierarchical_term(groups, **spec)
    except TypeError as exc:
        raise ConfigurationError(f"problem: {exc}") from None
    raise ConfigurationError(f"problem.kind: unknown kind {kind!r}")


def _fmt(v):
    return f"{v:g}" if isinstance(v, float) else str(v)


def expand_cells(config):
    """Flatten algorithm entries into concrete hyperparameter cells (without seeds)."""
    cells = []
    for spec in config.algorithms:
        axes = {k: spec[k] for k in ("eta", "beta") if isinstance(spec.get(k), (list, tuple))}
        base = {k: v for k, v in spec.items() if k not in axes}
        for combo in itertools.product(*axes.values()):
            cell = dict(base)
            cell.update(zip(axes, combo))
            label = spec.get("label", spec["name"])
            label += "".join(f"_{k}{_fmt(v)}" for k, v in zip(axes, combo))
            cell["label"] = label
            cells.append(cell)
    labels = [c["label"] for c in cells]
    if len(set(labels)) != len(labels):
        raise ConfigurationError("algorithms: duplicate labels; set 'label' to disambiguate")
    return cells


def _make_schedule(cell):
    name = cell["name"]
    eta = float(cell.get("eta", 0.1))
    beta = float(cell.get("beta", 0.5))
    if name == "stagewise_smvr":
        c = float(cell["c"]) if "c" in cell else beta / eta ** 2
        return StageSchedule(beta_1=beta, T_1=int(cell.get("T_1", 100)), c=c,
                             rho=float(cell.get("rho", 2.0)), n_stages=int(cell.get("n_stages", 5)))
    kind = cell.get("schedule", "practical")
    if kind == "constant":
        return ConstantSchedule(eta, beta)
    if kind == "practical":
        return SmvrSchedule.practical(eta, beta, float(cell.get("a", 2.0)))
    raise ConfigurationError(f"{cell['label']}.schedule: must be 'practical' or 'constant'")


def samples_for(name, T, K, B):
    """Closed-form sample count of a cold-started run of ``T`` iterations."""
    if name in ("smvr", "adaptive_smvr"):
        return 2 * K * B * (2 * T - 1)
    if name == "nested_sgd":
        return 2 * K * B * T
    if name == "scsc_style":
        return K * B * (3 * T - 1)
    raise ConfigurationError(f"no closed-form budget for {name}")


def iterations_for_budget(name, budget, K, B):
    """Largest ``T`` with ``samples_for(name, T, K, B) <= budget``."""
    unit = K * B
    if name in ("smvr", "adaptive_smvr"):
        T = (budget // unit + 2) // 4
    elif name == "nested_sgd":
        T = budget // (2 * unit)
    elif name == "scsc_style":
        T = (budget // unit + 1) // 3
    else:
        raise ConfigurationError(f"budget matching is not defined for {name}")
    if T < 1:
        raise ConfigurationError(f"budget {budget} is below one iteration of {name}")
    return int(T)


def run_cell(problem, cell, seed, T, stride=None):
    """Run one (algorithm, seed) cell and return its :class:`RunResult`."""
    name = cell["name"]
    schedule = _make_schedule(cell)
    batch = int(cell.get("batch", 1))
    if name == "smvr":
        return smvr_run(problem, schedule, T, batch, seed, stride, cell.get("radius"))
    if name == "adaptive_smvr":
        return adaptive_smvr_run(problem, schedule, cell.get("scaler", "adam"), T, batch, seed,
                                 stride, cell.get("radius"), delta=cell.get("delta", 1e-3),
                                 beta_prime=cell.get("beta_prime", 0.1),
                                 c_l=cell.get("c_l"), c_u=cell.get("c_u"))
    if name == "stagewise_smvr":
        return stagewise_run(problem, schedule, batch, seed, stride, cell.get("radius"),
                             check_step_size=cell.get("check_step_size", True))
    if name == "nested_sgd":
        return nested_sgd_run(problem, schedule, T, batch, seed, stride)
    return scsc_style_run(problem, schedule, T, batch, seed, stride)


def _cell_T(config, cell, K):
    if config.budget is not None and cell["name"] != "stagewise_smvr":
        return iterations_for_budget(cell["name"], config.budget, K, int(cell.get("batch", 1)))
    return config.T


def _execute(args):
    problem, cell, seed, T, stride, out = args
    path = Path(out) / cell["label"] / f"{seed}.csv"
    try:
        res = run_cell(problem, cell, seed, T, stride)
    except ConfigurationError:
        raise
    except (SMVRError, ArithmeticError, ValueError) as exc:
        logger.warning("%s seed %d aborted: %s", cell["label"], seed, exc)
        return {"label": cell["label"], "seed": seed, "status": "aborted", "message": str(exc)}
    write_trace(res.trace, path)
    losses = res.trace.loss
    return {"label": cell["label"], "seed": seed, "status": "ok", "message": "",
            "T": res.trace.iteration[-1], "samples": res.trace.samples[-1],
            "output_loss": evaluate_exact(problem, res.w),
            "final_loss": evaluate_exact(problem, res.w_final),
            "best_loss": min(losses), "last_grad_norm": res.trace.grad_norm[-1]}


def mean_curve(traces):
    """Pointwise mean of traces recorded on a shared iteration/sample grid."""
    if not traces:
        raise InsufficientDataError("no traces to average")
    grid = traces[0].iteration
    samples = traces[0].samples
    for tr in traces[1:]:
        if tr.iteration != grid or tr.samples != samples:
            raise AlignmentError("traces do not share an evaluation grid")
    out = RunTrace(algorithm=traces[0].algorithm)
    loss = np.mean([tr.loss for tr in traces], axis=0)
    gn = np.mean([tr.grad_norm for tr in traces], axis=0)
    for i, (it, s) in enumerate(zip(grid, samples)):
        out.append(it, s, loss[i], gn[i], traces[0].eta[i], traces[0].beta[i])
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for v in row])


def run_experiment(config, problem=None):
    """Run every (algorithm cell, seed) pair and write traces plus summaries.

    Returns ``(summary_rows, run_records)``; the exit status of the CLI is 2
    when any record has status ``aborted``.
    """
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    problem = build_problem(config.problem) if problem is None else problem
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    cells = expand_cells(config)
    jobs = [(problem, cell, seed, _cell_T(config, cell, problem.depth), config.stride, str(out))
            for cell in cells for seed in config.seeds]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_execute, jobs))
    else:
        records = [_execute(job) for job in jobs]

    _write_csv(out / "runs.csv",
               ("algorithm", "seed", "status", "T", "samples", "output_loss", "final_loss",
                "best_loss", "message"),
               [(r["label"], r["seed"], r["status"], r.get("T", ""), r.get("samples", ""),
                 r.get("output_loss", ""), r.get("final_loss", ""), r.get("best_loss", ""),
                 r["message"]) for r in records])

    summary, curve_rows = [], []
    for cell in cells:
        label = cell["label"]
        ok = [r for r in records if r["label"] == label and r["status"] == "ok"]
        n_aborted = sum(r["label"] == label and r["status"] != "ok" for r in records)
        row = {"algorithm": label, "n_runs": len(ok), "n_aborted": n_aborted}
        if ok:
            traces = [read_trace(out / label / f"{r['seed']}.csv") for r in ok]
            curve = mean_curve(traces)
            try:
                rate = estimate_rate_exponent(curve, config.rate_window)
            except InsufficientDataError:
                rate = float("nan")
            row.update(
                samples=curve.samples[-1],
                output_loss_mean=float(np.mean([r["output_loss"] for r in ok])),
                final_loss_mean=float(np.mean([r["final_loss"] for r in ok])),
                best_loss_mean=float(np.mean([r["best_loss"] for r in ok])),
                last_loss_mean=curve.loss[-1],
                last_grad_norm_mean=curve.grad_norm[-1],
                rate_exponent=rate)
            curve_rows.extend((label, it, s, lo, g, len(ok)) for it, s, lo, g in
                              zip(curve.iteration, curve.samples, curve.loss, curve.grad_norm))
        summary.append(row)

    cols = ("algorithm", "n_runs", "n_aborted", "samples", "output_loss_mean", "final_loss_mean",
            "best_loss_mean", "last_loss_mean", "last_grad_norm_mean", "rate_exponent")
    _write_csv(out / "summary.csv", cols, [[r.get(c, "") for c in cols] for r in summary])
    _write_csv(out / "curves.csv",
               ("algorithm", "iteration", "samples", "loss_mean", "grad_norm_mean", "n_runs"),
               curve_rows)
    return summary, records


def load_traces(out):
    """Read ``<out>/<label>/<seed>.csv`` files into ``{label: [RunTrace, ...]}``."""
    found = {}
    for path in sorted(Path(out).glob("*/*.csv"), key=lambda p: (p.parent.name, int(p.stem)
                                                                  if p.stem.isdigit() else p.stem)):
        found.setdefault(path.parent.name, []).append(read_trace(path))
    if not found:
        raise InsufficientDataError(f"no trace files under {out}")
    return found


def _value_at(trace, budget, col):
    s = np.asarray(trace.samples)
    idx = np.searchsorted(s, budget, side="right") - 1
    if idx < 0:
        raise AlignmentError(f"{trace.algorithm}: no record at or below {budget} samples")
    return getattr(trace, col)[idx]


def compare_report(traces_by_algo, checkpoints=5, reference="smvr", tolerance=0.05):
    """Rank algorithms by mean loss and mean grad norm at equal-sample checkpoints.

    Parameters
    ----------
    traces_by_algo : dict
        ``{label: [RunTrace, ...]}``, at least two labels.
    checkpoints : int or sequence of int
        Number of evenly spaced sample budgets up to the shared final budget,
        or explicit budgets.
    reference : str
        Label whose "reference <= every other algorithm" claim is flagged.
    tolerance : float
        Allowed relative spread of the algorithms' final sample counts.

    Returns
    -------
    list of dict
        One row per (checkpoint, algorithm) with ``loss_mean``, ``loss_rank``,
        ``grad_norm_mean``, ``grad_norm_rank`` and the checkpoint's
        ``reference_le`` flag (``None`` if the reference is absent).
    """
    if len(traces_by_algo) < 2:
        raise AlignmentError("need at least two algorithms to compare")
    finals = {k: max(tr.samples[-1] for tr in v) for k, v in traces_by_algo.items()}
    lo, hi = min(finals.values()), max(finals.values())
    if (hi - lo) > tolerance * hi:
        raise AlignmentError(f"final sample budgets differ by more than {tolerance:.0%}: {finals}")
    if isinstance(checkpoints, (int, np.integer)):
        checkpoints = [int(round(lo * (j + 1) / checkpoints)) for j in range(checkpoints)]
    rows = []
    labels = list(traces_by_algo)
    for budget in checkpoints:
        if budget > hi:
            raise AlignmentError(f"checkpoint {budget} exceeds the shared budget {hi}")
        stats = {}
        for k in labels:
            # the last checkpoint may sit a hair past a run's final count
            b = min(budget, finals[k])
            stats[k] = tuple(float(np.mean([_value_at(tr, b, col) for tr in traces_by_algo[k]]))
                             for col in ("loss", "grad_norm"))
        flag = None
        if reference in stats:
            flag = all(stats[reference][0] <= stats[k][0] for k in labels)
        for k in labels:
            loss, gn = stats[k]
            rows.append({"checkpoint": budget, "algorithm": k, "loss_mean": loss,
                         "loss_rank": 1 + sum(stats[o][0] < loss for o in labels),
                         "grad_norm_mean": gn,
                         "grad_norm_rank": 1 + sum(stats[o][1] < gn for o in labels),
                         "reference_le": flag})
    return rows


def write_report(rows, path):
    cols = ("checkpoint", "algorithm", "loss_mean", "loss_rank", "grad_norm_mean",
            "grad_norm_rank", "reference_le")
    _write_csv(path, cols, [[r[c] for c in cols] for r in rows])
