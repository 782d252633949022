"""Trial-parallel experiment execution."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from threadpoolctl import threadpool_limits

from .._seeding import child_seed
from .config import ConfigError, ExperimentConfig
from .presets import PRESETS, resolve_params, run_trial
from .report import emit_report
from .results import ResultTable, write_table
from .svg import line_chart

__all__ = ["ExperimentResult", "run_experiment", "trial_seed"]


@dataclass
class ExperimentResult:
    table: ResultTable
    traces: list = field(default_factory=list)
    directory: Path | None = None


def trial_seed(master_seed, experiment, trial):
    return child_seed(master_seed, experiment, trial)


def _charts(table: ResultTable):
    charts = {}
    if table.kind == "decomposition":
        series = {m.upper(): table.series(m)[:2] for m in ("er", "ver", "ber")}
        charts["risks.svg"] = line_chart(series, f"{table.experiment}: excess risks",
                                         ylabel="risk", logy=True)
        ddc = {"distance (LHS)": table.series("param_dist")[:2],
               "DDC bound (RHS)": table.series("ddc_rhs")[:2]}
        charts["ddc.svg"] = line_chart(ddc, f"{table.experiment}: DDC", ylabel="distance")
    elif table.kind in ("rate-linreg", "rate-diag"):
        series = {"ER": table.series("er")[:2]}
        if table.kind == "rate-diag":
            series["bound"] = table.series("thm3_bound")[:2]
        charts["rate.svg"] = line_chart(series, f"{table.experiment}: ER vs n", xlabel="n",
                                        ylabel="excess risk", logx=True, logy=True)
    return charts


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every trial of ``cfg`` and optionally write CSV, SVG and summary files.

    Each trial draws from its own seed ``child_seed(master, stream, i)``,
    where the stream is the preset's seed label (its name by default), and BLAS is pinned to one thread, so results do not depend on
    ``cfg.threads``.
    """
    if cfg.preset is not None and cfg.preset not in PRESETS:
        raise ConfigError(f"unknown preset {cfg.preset!r}; see list-presets")
    preset = PRESETS.get(cfg.preset) if cfg.preset else None
    kind, params = resolve_params(preset, cfg.overrides)
    name = cfg.preset or f"custom-{params['family']}"
    trials = cfg.trials or (preset.trials if preset else 1)
    stream = preset.seed_stream if preset else name
    seeds = [trial_seed(cfg.master_seed, stream, i) for i in range(trials)]

    if cfg.out_dir is not None:
        # fail before computing anything if the destination is unusable
        target = Path(cfg.out_dir) / name
        try:
            target.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot write to {target}: {exc}") from exc

    with threadpool_limits(limits=1):
        if cfg.threads == 1:
            outputs = [run_trial(kind, params, s) for s in seeds]
        else:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                outputs = list(pool.map(lambda s: run_trial(kind, params, s), seeds))

    rows = [(i, t, metric, value) for i, out in enumerate(outputs) for t, metric, value in out.rows]
    table = ResultTable(experiment=name, kind=kind, params=params, rows=rows,
                        master_seed=cfg.master_seed, trials=trials)
    result = ExperimentResult(table=table, traces=[o.trace for o in outputs])
    if cfg.out_dir is not None:
        directory = write_table(table, Path(cfg.out_dir) / name)
        emit_report([table], directory / "summary.txt")
        if cfg.emit_svg:
            for fname, text in _charts(table).items():
                with open(directory / fname, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(text)
        result.directory = directory
    return result
