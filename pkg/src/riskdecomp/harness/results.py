"""Long-format result tables and their CSV form.

Per-trial CSV columns: ``experiment,trial,t,metric,value``.
Aggregate CSV columns: ``experiment,metric,t,mean,std,count``.

Rows keep the order in which trials produced them; aggregates are keyed by
``(metric, t)`` in first-seen order. ``t`` is empty for per-trial scalars.
Floats are written with 17 significant digits so that parsing a file gives
back the exact doubles.
"""

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["ResultTable", "TRIAL_COLUMNS", "AGGREGATE_COLUMNS", "aggregate_rows", "fmt",
           "write_table", "read_table"]

TRIAL_COLUMNS = ("experiment", "trial", "t", "metric", "value")
AGGREGATE_COLUMNS = ("experiment", "metric", "t", "mean", "std", "count")


def fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def _parse(text):
    return None if text == "" else float(text)


def aggregate_rows(rows):
    """Mean and sample std over trials for every ``(metric, t)``.

    ``rows`` are ``(trial, t, metric, value)`` tuples.
    """
    groups = {}
    for _, t, metric, value in rows:
        groups.setdefault((metric, t), []).append(value)
    out = []
    for (metric, t), values in groups.items():
        arr = np.asarray(values, dtype=float)
        std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
        out.append((metric, t, float(np.mean(arr)), std, int(arr.size)))
    return out


@dataclass
class ResultTable:
    experiment: str
    kind: str
    params: dict
    rows: list  # (trial, t, metric, value)
    aggregates: list = field(default_factory=list)  # (metric, t, mean, std, count)
    master_seed: int = 0
    trials: int = 0

    def __post_init__(self):
        if not self.aggregates:
            self.aggregates = aggregate_rows(self.rows)

    def series(self, metric):
        """``(t, mean, std)`` arrays of a time-indexed metric."""
        sel = [(t, m, s) for name, t, m, s, _ in self.aggregates if name == metric and t is not None]
        if not sel:
            return np.array([]), np.array([]), np.array([])
        t, m, s = map(np.asarray, zip(*sel))
        return t, m, s

    def scalars(self, metric):
        """Per-trial values of a scalar metric, in trial order."""
        return np.array([v for _, t, name, v in self.rows if name == metric and t is None])

    def per_trial(self, metric):
        """``{trial: (t array, value array)}`` for a time-indexed metric."""
        out = {}
        for trial, t, name, v in self.rows:
            if name == metric and t is not None:
                out.setdefault(trial, ([], []))
                out[trial][0].append(t)
                out[trial][1].append(v)
        return {k: (np.asarray(a), np.asarray(b)) for k, (a, b) in out.items()}

    # -- CSV -------------------------------------------------------------

    def trials_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for trial, t, metric, value in self.rows:
            w.writerow((self.experiment, trial, fmt(t), metric, fmt(value)))
        return buf.getvalue()

    def aggregate_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for metric, t, mean, std, count in self.aggregates:
            w.writerow((self.experiment, metric, fmt(t), fmt(mean), fmt(std), count))
        return buf.getvalue()

    def meta_text(self) -> str:
        lines = [f"experiment = {self.experiment}", f"kind = {self.kind}",
                 f"seed = {self.master_seed}", f"trials = {self.trials}"]
        lines += [f"param.{k} = {v}" for k, v in sorted(self.params.items())]
        return "\n".join(lines) + "\n"


def write_table(table: ResultTable, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in (("trials.csv", table.trials_csv()),
                       ("aggregate.csv", table.aggregate_csv()),
                       ("meta.txt", table.meta_text())):
        with open(directory / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return directory


def read_table(directory) -> ResultTable:
    """Load a table written by :func:`write_table`."""
    from .config import parse_config_text

    directory = Path(directory)
    meta = parse_config_text((directory / "meta.txt").read_text(encoding="utf-8"))
    params = {k[len("param."):]: v for k, v in meta.items() if k.startswith("param.")}
    rows = []
    with open(directory / "trials.csv", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRIAL_COLUMNS:
            raise ValueError(f"unexpected trials.csv header {header}")
        for exp, trial, t, metric, value in reader:
            rows.append((int(trial), _parse(t), metric, float(value)))
    aggregates = []
    with open(directory / "aggregate.csv", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != AGGREGATE_COLUMNS:
            raise ValueError(f"unexpected aggregate.csv header {header}")
        for exp, metric, t, mean, std, count in reader:
            aggregates.append((metric, _parse(t), float(mean), float(std), int(count)))
    return ResultTable(experiment=str(meta["experiment"]), kind=str(meta["kind"]), params=params,
                       rows=rows, aggregates=aggregates, master_seed=int(meta["seed"]),
                       trials=int(meta["trials"]))
