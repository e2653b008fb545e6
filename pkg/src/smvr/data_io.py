"""Dataset ingestion and trace serialisation."""

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_random_state
from .exceptions import ConfigurationError, ParseError
from .trace import FIELDS, RunTrace

logger = logging.getLogger(__name__)

MISSING_SENTINELS = (-99.99, -999.0)


@dataclass(eq=False)
class ReturnsTable:
    """Per-period fractional returns, one column per asset."""

    dates: list
    values: np.ndarray
    columns: list = field(default_factory=list)
    dropped_rows: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != len(self.dates):
            raise ConfigurationError("dates and value rows disagree")

    @property
    def n_periods(self):
        return self.values.shape[0]

    @property
    def n_assets(self):
        return self.values.shape[1]


def _is_header(fields):
    if len(fields) < 2 or fields[0].strip():
        return False
    return all(f.strip() and not _is_number(f) for f in fields[1:])


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_industry_csv(path):
    """Parse a Kenneth-French industry-portfolio returns file.

    Preamble lines are skipped up to the first header row (empty first field,
    industry names after it).  Data rows follow until the first blank or
    non-date line, so only the first table of a multi-table file is read.
    Percent values are divided by 100; rows holding a -99.99 or -999 sentinel
    are dropped and counted in ``dropped_rows``.
    """
    text = Path(path).read_text()
    reader = csv.reader(io.StringIO(text))
    header = None
    dates, rows = [], []
    dropped = 0
    for lineno, fields in enumerate(reader, start=1):
        if header is None:
            if _is_header(fields):
                header = [f.strip() for f in fields[1:]]
            continue
        if not fields or not fields[0].strip():
            if rows:
                break
            continue
        stamp = fields[0].strip()
        if not stamp.isdigit():
            break
        if len(fields) - 1 != len(header):
            raise ParseError(f"expected {len(header)} values, found {len(fields) - 1}", lineno)
        try:
            vals = [float(f) for f in fields[1:]]
        except ValueError as exc:
            raise ParseError(f"unparseable numeric field ({exc})", lineno) from None
        if any(v in MISSING_SENTINELS for v in vals):
            dropped += 1
            continue
        dates.append(int(stamp))
        rows.append(vals)
    if header is None:
        raise ConfigurationError(f"{path}: no header row of industry names found")
    if not rows:
        raise ConfigurationError(f"{path}: no usable rows")
    if dropped:
        logger.info("%s: dropped %d rows with missing-value sentinels", path, dropped)
    return ReturnsTable(dates, np.asarray(rows) / 100.0, header, dropped)


def synth_returns(seed, periods, assets, drift=None, volatility=None):
    """Gaussian returns ``r_t = drift + L g_t`` with ``L L^T = volatility``.

    ``drift`` defaults to 5e-4 per asset and ``volatility`` to a
    one-factor covariance with 1% idiosyncratic daily volatility.
    """
    rng = check_random_state(seed)
    drift = np.full(assets, 5e-4) if drift is None else np.asarray(drift, dtype=float)
    if volatility is None:
        volatility = 1e-4 * (np.eye(assets) + 0.5 * np.ones((assets, assets)))
    cov = np.asarray(volatility, dtype=float)
    if cov.shape != (assets, assets) or not np.allclose(cov, cov.T):
        raise ConfigurationError("volatility must be a symmetric assets x assets matrix")
    evals, evecs = np.linalg.eigh(cov)
    if evals.min() < -1e-12 * max(1.0, abs(evals).max()):
        raise ConfigurationError("volatility matrix is not positive semidefinite")
    L = evecs * np.sqrt(np.clip(evals, 0.0, None))
    g = rng.standard_normal((periods, assets))
    values = drift + g @ L.T
    return ReturnsTable(list(range(periods)), values, [f"asset{i}" for i in range(assets)])


def synth_classification(seed, n_samples=2100, n_features=10, rare_ratio=1 / 20,
                         flip_fraction=0.3):
    """Imbalanced, label-noisy binary data for tilted-risk experiments.

    A linear teacher labels Gaussian features; the positive class is
    subsampled to ``rare_ratio`` of the negative class and then labels of a
    random ``flip_fraction`` of the samples are reshuffled among themselves.
    Returns ``(X, y)`` with ``y`` in {0, 1}.
    """
    rng = check_random_state(seed)
    n_rare = max(1, int(round(n_samples * rare_ratio / (1 + rare_ratio))))
    n_common = n_samples - n_rare
    teacher = rng.normal(size=n_features)
    X_parts, y_parts = [], []
    need = {0: n_common, 1: n_rare}
    while need[0] or need[1]:
        X = rng.normal(size=(4 * n_samples, n_features))
        y = (X @ teacher > 0).astype(int)
        for c in (0, 1):
            take = np.flatnonzero(y == c)[:need[c]]
            X_parts.append(X[take])
            y_parts.append(np.full(len(take), c))
            need[c] -= len(take)
    X = np.vstack(X_parts)
    y = np.concatenate(y_parts)
    perm = rng.permutation(len(y))
    X, y = X[perm], y[perm]
    chosen = rng.choice(len(y), size=int(round(flip_fraction * len(y))), replace=False)
    y[chosen] = rng.permutation(y[chosen])
    return X, y


def write_trace(trace, path):
    """Write one CSV row per recorded iteration; floats use shortest round-trip repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("algorithm", "seed") + FIELDS)
        seed = "" if trace.seed is None else trace.seed
        for row in zip(*(getattr(trace, f) for f in FIELDS)):
            writer.writerow([trace.algorithm, seed, row[0], row[1]] + [repr(float(x)) for x in row[2:]])


def read_trace(path):
    """Inverse of :func:`write_trace`."""
    trace = RunTrace()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != ("algorithm", "seed") + FIELDS:
            raise ParseError(f"{path}: unexpected header {header!r}", 1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(row)}", lineno)
            try:
                trace.algorithm = row[0]
                trace.seed = int(row[1]) if row[1] else None
                trace.append(int(row[2]), int(row[3]), *(float(x) for x in row[4:]))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
    return trace
