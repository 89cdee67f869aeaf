"""Command-line interface.

Every subcommand resolves its flags into a JSON config, runs, and (when an
output path is given) writes a run manifest next to the artifact. `binpop
rerun --manifest m.json` re-executes the recorded subcommand with the
recorded config and reproduces the artifact bit for bit; worker-thread
counts never change results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import __version__, io as bio
from .contraction import (
    SequenceSpec,
    contraction_curve,
    majority_max_thresholds,
    max_consistency_probe,
    tk_bounds,
)
from .core import (
    BetaPrior,
    PoissonPrior,
    PowerLawPrior,
    TablePrior,
    TruncatedPowerLawPrior,
    TruncationPolicy,
    UniformRangePrior,
    posterior_n,
)
from .estimators import EstimatorSpec, b_from_p_hat, run_estimator
from .fluoro import (
    BlinkTrace,
    SynthConfig,
    estimate_p_on,
    fit_pipeline,
    ingest_counts,
    synth_dataset,
    write_counts,
)
from .montecarlo import (
    RobustnessConfig,
    ScenarioConfig,
    run_robustness,
    run_scenario,
)
from .theory_checks import run_default_sweep

CLI_TAIL_TOL = 1e-10  # looser than the library default so heavy-tailed
CLI_N_CAP = 10**6     # configs (e.g. SE(0), a=2) converge out of the box


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("BINPOP_THREADS", "1")))
    except ValueError:
        return 1


def _parse_frames(text: str) -> list[int]:
    """Either 'start:stop:step' (stop inclusive) or a comma list."""
    if ":" in text:
        parts = [int(x) for x in text.split(":")]
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("frame range must be "
                                             "start:stop:step")
        start, stop, step = parts
        return list(range(start, stop + 1, step))
    return [int(x) for x in text.split(",") if x.strip()]


def _parse_int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _estimator_config(args) -> dict:
    d = {"kind": args.estimator, "tail_tol": args.tail_tol,
         "n_cap": args.n_cap}
    if args.estimator == "raftery":
        return d
    if args.estimator != "max":
        a = args.a
        if args.b is not None:
            b = args.b
        elif args.p_hat is not None:
            b = b_from_p_hat(a, args.p_hat)
        else:
            raise SystemExit("estimate: provide --b or --p-hat")
        d["a"] = a
        d["b"] = b
    if args.estimator == "se":
        d["gamma"] = args.gamma
        if args.allow_nonintegrable:
            d["allow_nonintegrable"] = True
    elif args.estimator == "dge":
        if args.n0_max is None:
            raise SystemExit("estimate: dge needs --n0-max")
        d["n0_max"] = args.n0_max
    elif args.estimator == "map":
        if args.t_k is None:
            raise SystemExit("estimate: map needs --t-k")
        d["t_k"] = args.t_k
    return d


def _estimator_flags(p: argparse.ArgumentParser):
    p.add_argument("--estimator", required=True,
                   choices=["se", "dge", "map", "raftery", "max"],
                   help="estimator kind")
    p.add_argument("--gamma", type=float, default=1.0,
                   help="scale-prior exponent for se (default 1.0)")
    p.add_argument("--a", type=float, default=1.0,
                   help="beta prior a (default 1.0)")
    p.add_argument("--b", type=float, default=None,
                   help="beta prior b (overrides --p-hat)")
    p.add_argument("--p-hat", type=float, default=None,
                   help="success-probability guess; sets b = a/p_hat - a")
    p.add_argument("--n0-max", type=int, default=None,
                   help="dge prior upper bound N0")
    p.add_argument("--t-k", type=int, default=None,
                   help="map truncation point T_k")
    p.add_argument("--tail-tol", type=float, default=CLI_TAIL_TOL,
                   help=f"relative tail-mass tolerance "
                        f"(default {CLI_TAIL_TOL})")
    p.add_argument("--n-cap", type=int, default=CLI_N_CAP,
                   help=f"hard ceiling for posterior scans "
                        f"(default {CLI_N_CAP})")
    p.add_argument("--allow-nonintegrable", action="store_true",
                   help="compute se ratios even when a + gamma <= 1 "
                        "(posterior flagged non-normalizable)")


# ---------------------------------------------------------------- commands

def run_estimate(config: dict) -> str:
    sample = bio.read_counts_csv(config["counts_file"])
    spec = EstimatorSpec.from_json_dict(config["estimator"])
    res = run_estimator(spec, sample)
    return bio.dump_json({
        "estimator": spec.label,
        "value": res.value,
        "rounded": res.rounded,
        "k": sample.k, "s": sample.s, "m_max": sample.m_max,
        "diagnostics": res.diagnostics,
    })


def _nprior_from_config(d: dict):
    kind = d["kind"]
    if kind == "powerlaw":
        return PowerLawPrior(d["gamma"])
    if kind == "trunc-powerlaw":
        return TruncatedPowerLawPrior(d["gamma"], d["t_k"])
    if kind == "uniform":
        return UniformRangePrior(d["n0_max"])
    if kind == "poisson":
        return PoissonPrior(d["mu"])
    if kind == "table":
        return TablePrior({int(k): float(v) for k, v in d["weights"].items()})
    raise SystemExit(f"unknown n-prior kind {kind!r}")


def run_posterior(config: dict) -> str:
    sample = bio.read_counts_csv(config["counts_file"])
    beta = BetaPrior(config["a"], config["b"])
    nprior = _nprior_from_config(config["nprior"])
    trunc = TruncationPolicy(tail_tol=config["tail_tol"],
                             n_cap=config["n_cap"])
    post = posterior_n(sample, beta, nprior, trunc,
                       allow_nonintegrable=config.get("allow_nonintegrable",
                                                      False))
    return bio.posterior_to_csv(post)


def run_simulate(config: dict) -> str:
    rep = run_scenario(ScenarioConfig.from_json_dict(config))
    print(bio.scenario_report_table(rep), file=sys.stderr)
    return bio.scenario_report_to_csv(rep)


def run_robustness_cmd(config: dict) -> str:
    rep = run_robustness(RobustnessConfig.from_json_dict(config))
    print(bio.robustness_report_table(rep), file=sys.stderr)
    return bio.robustness_report_to_csv(rep)


def run_contract(config: dict) -> str:
    spec = SequenceSpec(lam=config["lam"], mu=config["mu"],
                        exponent=config["exponent"],
                        k_grid=tuple(config["k_grid"]),
                        reps=config["reps"], seed=config["seed"])
    beta = BetaPrior(config["a"], config["b"])
    nprior = PowerLawPrior(config["gamma"])
    trunc = TruncationPolicy(tail_tol=config["tail_tol"],
                             n_cap=config["n_cap"])
    curve = contraction_curve(spec, beta, nprior, trunc,
                              threads=config.get("threads", 1))
    return bio.contraction_curve_to_csv(curve)


def run_tk_bounds(config: dict) -> str:
    tb = tk_bounds(config["gamma"], config["k"], config["lam"],
                   config["alpha"], config["beta_c"])
    return bio.dump_json({
        "t_min": tb.t_min, "t_max": tb.t_max, "log_t_max": tb.log_t_max,
        "log_log_t_max": tb.log_log_t_max,
    })


def run_max_probe(config: dict) -> str:
    pr = max_consistency_probe(config["n"], config["p"], config["k"],
                               reps=config.get("reps", 0),
                               seed=config.get("seed", 0))
    return bio.dump_json({
        "n": pr.n, "p": pr.p, "k": pr.k,
        "exact_prob": pr.exact_prob, "mc_prob": pr.mc_prob,
        "mc_stderr": pr.mc_stderr, "regime": pr.regime,
        "majority_thresholds": majority_max_thresholds(config["n"],
                                                       config["p"]),
    })


def run_theory_check(config: dict) -> str:
    reports = run_default_sweep()
    return bio.dump_json([r.to_json_dict() for r in reports])


def run_fluoro_synth(config: dict) -> str:
    cfg = SynthConfig(n_anchor=config["n_anchor"],
                      occupancy_p=config["occupancy_p"],
                      n_rois=config["n_rois"], b=config["b"],
                      p_on=config["p_on"], frames=tuple(config["frames"]),
                      seed=config["seed"],
                      frame_exact=config.get("frame_exact", False))
    table = synth_dataset(cfg)
    out = config.get("_out_path")
    if out is None:
        raise SystemExit("fluoro synth needs --out for the counts CSV")
    write_counts(table, out)
    return ""  # artifact written directly


def run_fluoro_fit(config: dict) -> str:
    table = ingest_counts(config["counts_file"])
    spec = EstimatorSpec.from_json_dict(config["estimator"])
    frames = tuple(config["frames"]) if config.get("frames") else None
    fit = fit_pipeline(table, spec, frames=frames,
                       weighted=config.get("weighted", False))
    return bio.dump_json(fit.to_json_dict())


def run_fluoro_p_on(config: dict) -> str:
    traces = []
    with open(config["traces_file"]) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            flags = tuple(bool(int(x)) for x in line.split(","))
            traces.append(BlinkTrace(on_flags=flags))
    return bio.dump_json({"p_on": estimate_p_on(traces),
                          "traces": len(traces)})


COMMANDS = {
    "estimate": run_estimate,
    "posterior": run_posterior,
    "simulate": run_simulate,
    "robustness": run_robustness_cmd,
    "contract": run_contract,
    "tk-bounds": run_tk_bounds,
    "max-probe": run_max_probe,
    "theory-check": run_theory_check,
    "fluoro-synth": run_fluoro_synth,
    "fluoro-fit": run_fluoro_fit,
    "fluoro-p-on": run_fluoro_p_on,
}


def _write_artifact(text: str, out_path: str | None):
    if out_path is None or out_path == "-":
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _write_manifest(subcommand: str, config: dict, out_path, manifest_path):
    if manifest_path is None:
        if out_path is None or out_path == "-":
            return
        manifest_path = str(out_path) + ".manifest.json"
    clean = {k: v for k, v in config.items() if not k.startswith("_")}
    manifest = {
        "tool": "binpop",
        "version": __version__,
        "subcommand": subcommand,
        "config": clean,
        "seed": clean.get("seed"),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(bio.dump_json(manifest))


def _dispatch(subcommand: str, config: dict, out, manifest) -> int:
    config = dict(config)
    config["_out_path"] = None if out in (None, "-") else out
    text = COMMANDS[subcommand](config)
    if text:
        _write_artifact(text, out)
    _write_manifest(subcommand, config, out, manifest)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="binpop",
        description="Bayesian estimation of the binomial population size n "
                    "with unknown success probability p")
    ap.add_argument("--version", action="version",
                    version=f"binpop {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("estimate", help="estimate n from a counts CSV")
    p.add_argument("--counts", required=True, help="one-column CSV of counts")
    _estimator_flags(p)
    p.add_argument("--out", default=None, help="output JSON path (default "
                                               "stdout)")
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("posterior", help="posterior over n as CSV")
    p.add_argument("--counts", required=True)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--p-hat", type=float, default=None)
    p.add_argument("--nprior", default="powerlaw",
                   choices=["powerlaw", "trunc-powerlaw", "uniform",
                            "poisson", "table"])
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--t-k", type=int, default=None)
    p.add_argument("--n0-max", type=int, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--table-json", default=None,
                   help="JSON file {n: weight} for the table prior")
    p.add_argument("--tail-tol", type=float, default=CLI_TAIL_TOL)
    p.add_argument("--n-cap", type=int, default=CLI_N_CAP)
    p.add_argument("--allow-nonintegrable", action="store_true")
    p.add_argument("--out", default=None)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("simulate", help="RMSE/bias scenario sweep from a "
                                        "JSON config")
    p.add_argument("--config", required=True, help="ScenarioConfig JSON file")
    p.add_argument("--seed", type=int, default=None, help="override seed")
    p.add_argument("--reps", type=int, default=None, help="override reps")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("robustness", help="varying-n RMSE ratio study from "
                                          "a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("contract", help="posterior miss-mass decay curve")
    p.add_argument("--lambda", dest="lam", type=float, default=2.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--exponent", type=float, default=1.0 / 6.0)
    p.add_argument("--k-grid", type=_parse_int_list,
                   default=[1000, 10000, 100000],
                   help="comma-separated sample sizes")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=2.0,
                   help="power-law n-prior exponent")
    p.add_argument("--tail-tol", type=float, default=1e-12)
    p.add_argument("--n-cap", type=int, default=CLI_N_CAP)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("tk-bounds", help="admissible truncation window for "
                                         "flat/improper priors")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", dest="beta_c", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("max-probe", help="sample-maximum attainment "
                                         "probability and regime")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--reps", type=int, default=0,
                   help="Monte Carlo replications (0 = exact only)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("theory-check", help="run all lemma checks on the "
                                            "default grids")
    p.add_argument("--out", default=None)
    p.add_argument("--manifest", default=None)

    fl = sub.add_parser("fluoro", help="fluorophore-counting pipeline")
    fsub = fl.add_subparsers(dest="fluoro_cmd", required=True)

    p = fsub.add_parser("synth", help="generate a synthetic count table")
    p.add_argument("--n-anchor", type=int, default=15)
    p.add_argument("--occupancy", type=float, default=1.0)
    p.add_argument("--n-rois", type=int, default=94)
    p.add_argument("--b", type=float, default=1.5e-4,
                   help="per-frame bleaching probability")
    p.add_argument("--p-on", type=float, default=0.0339)
    p.add_argument("--frames", type=_parse_frames, default="1500:9000:1500",
                   help="start:stop:step or comma list")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frame-exact", action="store_true",
                   help="simulate bleaching frame by frame instead of "
                        "aggregated jumps")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)

    p = fsub.add_parser("fit", help="estimate per-frame n_t and fit the "
                                    "bleaching decay")
    p.add_argument("--counts", required=True)
    p.add_argument("--frames", type=_parse_frames, default=None,
                   help="subset of frames to use (default: all)")
    _estimator_flags(p)
    p.add_argument("--weighted", action="store_true",
                   help="variance-weighted log fit (default unweighted)")
    p.add_argument("--out", default=None)
    p.add_argument("--manifest", default=None)

    p = fsub.add_parser("p-on", help="estimate the on-state probability "
                                     "from blink traces")
    p.add_argument("--traces", required=True,
                   help="CSV: one trace per line of 0/1 flags")
    p.add_argument("--out", default=None)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("rerun", help="re-execute a recorded run manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None)

    return ap


def _config_from_args(args) -> tuple[str, dict]:
    cmd = args.cmd
    if cmd == "estimate":
        return cmd, {"counts_file": args.counts,
                     "estimator": _estimator_config(args)}
    if cmd == "posterior":
        if args.b is not None:
            b = args.b
        elif args.p_hat is not None:
            b = b_from_p_hat(args.a, args.p_hat)
        else:
            raise SystemExit("posterior: provide --b or --p-hat")
        np_cfg = {"kind": args.nprior}
        if args.nprior in ("powerlaw", "trunc-powerlaw"):
            np_cfg["gamma"] = args.gamma
        if args.nprior == "trunc-powerlaw":
            if args.t_k is None:
                raise SystemExit("posterior: trunc-powerlaw needs --t-k")
            np_cfg["t_k"] = args.t_k
        if args.nprior == "uniform":
            if args.n0_max is None:
                raise SystemExit("posterior: uniform needs --n0-max")
            np_cfg["n0_max"] = args.n0_max
        if args.nprior == "poisson":
            if args.mu is None:
                raise SystemExit("posterior: poisson needs --mu")
            np_cfg["mu"] = args.mu
        if args.nprior == "table":
            if args.table_json is None:
                raise SystemExit("posterior: table needs --table-json")
            with open(args.table_json) as fh:
                np_cfg["weights"] = json.load(fh)
        return cmd, {"counts_file": args.counts, "a": args.a, "b": b,
                     "nprior": np_cfg, "tail_tol": args.tail_tol,
                     "n_cap": args.n_cap,
                     "allow_nonintegrable": args.allow_nonintegrable}
    if cmd in ("simulate", "robustness"):
        with open(args.config) as fh:
            cfg = json.load(fh)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.reps is not None:
            cfg["reps"] = args.reps
        cfg["threads"] = (args.threads if args.threads is not None
                          else _default_threads())
        return cmd, cfg
    if cmd == "contract":
        return cmd, {"lam": args.lam, "mu": args.mu,
                     "exponent": args.exponent, "k_grid": args.k_grid,
                     "reps": args.reps, "seed": args.seed, "a": args.a,
                     "b": args.b, "gamma": args.gamma,
                     "tail_tol": args.tail_tol, "n_cap": args.n_cap,
                     "threads": (args.threads if args.threads is not None
                                 else _default_threads())}
    if cmd == "tk-bounds":
        return cmd, {"gamma": args.gamma, "k": args.k, "lam": args.lam,
                     "alpha": args.alpha, "beta_c": args.beta_c}
    if cmd == "max-probe":
        return cmd, {"n": args.n, "p": args.p, "k": args.k,
                     "reps": args.reps, "seed": args.seed}
    if cmd == "theory-check":
        return cmd, {}
    if cmd == "fluoro":
        fc = args.fluoro_cmd
        if fc == "synth":
            return "fluoro-synth", {
                "n_anchor": args.n_anchor, "occupancy_p": args.occupancy,
                "n_rois": args.n_rois, "b": args.b, "p_on": args.p_on,
                "frames": args.frames if isinstance(args.frames, list)
                else _parse_frames(args.frames),
                "seed": args.seed, "frame_exact": args.frame_exact}
        if fc == "fit":
            return "fluoro-fit", {
                "counts_file": args.counts,
                "frames": args.frames,
                "estimator": _estimator_config(args),
                "weighted": args.weighted}
        if fc == "p-on":
            return "fluoro-p-on", {"traces_file": args.traces}
    raise SystemExit(f"unhandled command {cmd}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "rerun":
            with open(args.manifest) as fh:
                manifest = json.load(fh)
            return _dispatch(manifest["subcommand"], manifest["config"],
                             args.out, None)
        subcommand, config = _config_from_args(args)
        return _dispatch(subcommand, config, args.out,
                         getattr(args, "manifest", None))
    except (ValueError, OSError, KeyError) as exc:
        print(f"binpop: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
