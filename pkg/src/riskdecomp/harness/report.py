"""Plain-text summaries of result tables."""

from pathlib import Path

import numpy as np

from .. import bounds
from .results import ResultTable

__all__ = ["emit_report", "summarize", "RATE_WINDOW", "PAPER_C_PRIME"]

RATE_WINDOW = (-0.7, -0.3)
PAPER_C_PRIME = 8.5


def _g(x):
    return f"{x:.4g}"


def mean_rate_slope(table: ResultTable, metric="er"):
    t, mean, _ = table.series(metric)
    return bounds.rate_probe(dict(zip(t.astype(int).tolist(), mean.tolist())))


def _decomposition_lines(tab: ResultTable):
    p = tab.params
    holds = tab.scalars("ddc_holds_all")
    n = holds.size
    ok = int(np.sum(holds == 1))
    cp = p.get("ddc_c_prime")
    cp_text = "fitted per trial" if cp == "fit" else _g(float(cp))
    lines = [f"DDC (a={_g(float(p['ddc_a']))}, C={_g(float(p['ddc_c']))}, C'={cp_text}): "
             f"holds at every recorded time in {ok}/{n} trials"]
    if ok == n:
        lines.append("DDC holds at all recorded times")
    else:
        per = tab.per_trial("ddc_holds")
        firsts = []
        for trial, (t, v) in sorted(per.items()):
            bad = t[v == 0]
            if bad.size:
                firsts.append(f"trial {trial} at t={_g(bad[0])}")
        lines.append("DDC violated: " + "; ".join(firsts))
    min_a = tab.scalars("min_a")
    lines.append(f"fitted min a: mean {_g(np.nanmean(min_a))}, max {_g(np.nanmax(min_a))}")
    if p.get("family") in ("general-recovery", "diag-recovery"):
        cfit = tab.scalars("c_prime_fit")
        verdict = "within" if np.max(cfit) <= PAPER_C_PRIME else "exceeds"
        lines.append(f"fitted C' (a={_g(float(p['ddc_a']))}, C=0): mean {_g(np.mean(cfit))}, "
                     f"max {_g(np.max(cfit))}; {verdict} the reference value {PAPER_C_PRIME}")
    eq4 = tab.scalars("eq4_holds_all")
    lines.append(f"decomposition inequality ER <= RHS on DDC-verified times: "
                 f"{int(np.sum(eq4 == 1))}/{eq4.size} trials")
    if p.get("family") == "linreg":
        b, bp = tab.scalars("B"), tab.scalars("B_prime")
        lines.append(f"sup norms: B mean {_g(np.mean(b))}, B' mean {_g(np.mean(bp))}")
        t, er, _ = tab.series("er")
        _, ver, _ = tab.series("ver")
        _, ber, _ = tab.series("ber")
        early = abs(er[1] - ber[1]) < abs(er[1] - ver[1]) if t.size > 1 else False
        late = abs(er[-1] - ber[-1]) > abs(er[-1] - ver[-1])
        lines.append(f"ER closer to BER early: {'yes' if early else 'no'}; "
                     f"closer to VER late: {'yes' if late else 'no'}")
    return lines


def _rate_lines(tab: ResultTable):
    slope = mean_rate_slope(tab)
    per = tab.scalars("slope")
    lo, hi = RATE_WINDOW
    head = (f"rate slope of mean ER vs n: {slope:.4f} "
            f"({'inside' if lo <= slope <= hi else 'outside'} [{lo}, {hi}])")
    lines = [head, f"per-trial slopes: min {_g(per.min())}, max {_g(per.max())}"]
    if tab.kind == "rate-diag":
        n, er, _ = tab.series("er")
        _, bound, _ = tab.series("thm3_bound")
        covered = int(np.sum(bound >= er))
        lines.append(f"recovery bound (const 1) >= mean ER at {covered}/{n.size} sample sizes")
        lines.append(f"bound slope: {mean_rate_slope(tab, 'thm3_bound'):.4f}")
    return lines


def _highsnr_lines(tab: ResultTable):
    b, bp = tab.scalars("B"), tab.scalars("B_prime")
    n = b.size
    lead_d, lead_b = tab.scalars("leading_decomposition"), tab.scalars("leading_baseline")
    full_nolog, full = tab.scalars("thm1_bound_nolog"), tab.scalars("thm1_bound")
    base = tab.scalars("baseline_bound")
    er = tab.scalars("excess_risk")
    return [
        f"B < B' in {int(np.sum(b < bp))}/{n} trials (B mean {_g(b.mean())}, "
        f"B' mean {_g(bp.mean())})",
        f"leading-order terms T*lam*(V+B)^2/n < T*lam*(V+B')^2/n in "
        f"{int(np.sum(lead_d < lead_b))}/{n} trials",
        f"full decomposition bound without log factors < baseline in "
        f"{int(np.sum(full_nolog < base))}/{n} trials (means {_g(full_nolog.mean())} vs "
        f"{_g(base.mean())})",
        f"full decomposition bound with log factors < baseline in "
        f"{int(np.sum(full < base))}/{n} trials (mean {_g(full.mean())})",
        f"measured ER <= decomposition bound (const 1) in {int(np.sum(er <= full))}/{n} trials "
        f"(ER mean {_g(er.mean())})",
    ]


def _landscape_lines(tab: ResultTable):
    names = ("grad_norm_standard", "grad_norm_variance", "grad_norm_bias", "two_theta_norm")
    vals = {k: tab.scalars(k) for k in names}
    bigger = int(np.sum(vals["grad_norm_standard"] > vals["grad_norm_variance"]))
    return [f"mean initial gradient norms: standard {_g(vals['grad_norm_standard'].mean())}, "
            f"variance {_g(vals['grad_norm_variance'].mean())}, "
            f"bias {_g(vals['grad_norm_bias'].mean())}; 2||theta*|| = "
            f"{_g(vals['two_theta_norm'].mean())}",
            f"standard > variance in {bigger}/{vals['two_theta_norm'].size} trials"]


_SECTIONS = {
    "decomposition": _decomposition_lines,
    "rate-linreg": _rate_lines,
    "rate-diag": _rate_lines,
    "bounds-highsnr": _highsnr_lines,
    "landscape": _landscape_lines,
}


def summarize(tab: ResultTable) -> str:
    head = f"== {tab.experiment} ({tab.kind}, {tab.trials} trials, seed {tab.master_seed}) =="
    return "\n".join([head] + _SECTIONS[tab.kind](tab)) + "\n"


def emit_report(tables, path=None) -> str:
    """Summarize ``tables``; write the text to ``path`` when given."""
    tables = list(tables)
    if not tables:
        raise ValueError("nothing to report")
    text = "\n".join(summarize(t) for t in tables)
    if path is not None:
        with open(Path(path), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
