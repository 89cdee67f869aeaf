"""CSV/JSON plumbing shared by the CLI: sample ingestion, posterior export,
report serialization."""

from __future__ import annotations

import csv
import io
import json

from .core import PosteriorN, Sample
from .montecarlo import RobustnessReport, ScenarioReport


def read_counts_csv(path) -> Sample:
    """One-column CSV of non-negative integer counts; a single header row is
    tolerated and skipped."""
    counts = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            cell = row[0].strip()
            try:
                counts.append(int(cell))
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ValueError(f"{path}: line {lineno}: non-integer count "
                                 f"{cell!r}")
    if not counts:
        raise ValueError(f"{path}: no counts found")
    return Sample(tuple(counts))


def posterior_to_csv(post: PosteriorN) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["n", "prob", "log_weight"])
    for n, p, lw in zip(post.ns(), post.probs, post.log_weights):
        w.writerow([int(n), repr(float(p)), repr(float(lw))])
    return buf.getvalue()


def scenario_report_to_csv(rep: ScenarioReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["estimator", "rmse", "bias", "mc_stderr_rmse",
                "mc_stderr_bias", "failures", "successes"])
    for r in rep.rows:
        w.writerow([r.label, repr(r.rmse), repr(r.bias),
                    repr(r.mc_stderr_rmse), repr(r.mc_stderr_bias),
                    r.failures, r.successes])
    return buf.getvalue()


def scenario_report_table(rep: ScenarioReport) -> str:
    lines = [f"{'estimator':<12} {'RMSE':>10} {'bias':>10} "
             f"{'se(RMSE)':>10} {'se(bias)':>10} {'fail':>5}"]
    for r in rep.rows:
        lines.append(f"{r.label:<12} {r.rmse:>10.4f} {r.bias:>10.3f} "
                     f"{r.mc_stderr_rmse:>10.4f} {r.mc_stderr_bias:>10.3f} "
                     f"{r.failures:>5d}")
    return "\n".join(lines)


def robustness_report_to_csv(rep: RobustnessReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["estimator", "rmse_varying", "rmse_iid", "ratio",
                "failures_varying", "failures_iid"])
    for r in rep.rows:
        w.writerow([r.label, repr(r.rmse_varying), repr(r.rmse_iid),
                    repr(r.ratio), r.failures_varying, r.failures_iid])
    return buf.getvalue()


def robustness_report_table(rep: RobustnessReport) -> str:
    lines = [f"{'estimator':<12} {'RMSE(var)':>10} {'RMSE(iid)':>10} "
             f"{'ratio':>8}"]
    for r in rep.rows:
        lines.append(f"{r.label:<12} {r.rmse_varying:>10.4f} "
                     f"{r.rmse_iid:>10.4f} {r.ratio:>8.3f}")
    return "\n".join(lines)


def contraction_curve_to_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["k", "n_k", "p_k", "miss_mass", "stderr"])
    for p in curve.points:
        w.writerow([p.k, p.n_k, repr(p.p_k), repr(p.mean_miss_mass),
                    repr(p.mc_stderr)])
    return buf.getvalue()


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
