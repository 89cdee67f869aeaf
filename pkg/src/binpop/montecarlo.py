"""Seeded Monte Carlo harness: RMSE/bias scenario sweeps and the varying-n
robustness study.

Reproducibility model
---------------------
Every random draw comes from a numpy PCG64 generator seeded by
SeedSequence(entropy=master_seed, spawn_key=(stream, rep)), where `stream`
identifies the purpose (scenario counts, robustness p0, robustness n_i,
robustness count uniforms, ...) and `rep` is the replication index. Results
are therefore bit-identical for a given (config, seed), independent of the
worker-thread count, and the two arms of a robustness replication can be
coupled through a shared uniform stream.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom as _binom

from .core import (
    BetaPrior,
    InadmissiblePriorError,
    PriorSupportError,
    Sample,
    ScanCache,
    TruncationError,
    TruncationPolicy,
)
from .estimators import EstimatorSpec, b_from_p_hat, run_estimator

STREAM_SCENARIO = 0
STREAM_ROBUST_P0 = 1
STREAM_ROBUST_N = 2
STREAM_ROBUST_U = 3
STREAM_CONTRACTION = 4
STREAM_PROBE = 5
STREAM_FLUORO = 6

_ESTIMATOR_ERRORS = (PriorSupportError, TruncationError, InadmissiblePriorError)


def substream(seed: int, stream: int, *key: int) -> np.random.Generator:
    """Deterministic generator for one purpose/replication slot.

    The spawn key is (stream, *key), e.g. (STREAM_SCENARIO, rep) or
    (STREAM_CONTRACTION, k_index, rep)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream, *key))
    return np.random.default_rng(ss)


def binomial_sampler(n: int, p: float, rng: np.random.Generator) -> int:
    """One exact Bin(n, p) draw (numpy's inversion/BTPE under the hood)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must lie in [0, 1]")
    return int(rng.binomial(n, p))


@dataclass
class ScenarioConfig:
    """One i.i.d. Bin(n0, p0) sweep.

    When p_hat is set, each estimator's beta prior is re-derived as
    (a, b(p_hat)) with b(p) = a/p - a, keeping the spec's own a. This keeps
    the prior-guess rule an explicit knob instead of baking b into configs.
    """

    n0: int
    p0: float
    k: int
    estimators: list[EstimatorSpec]
    reps: int = 1000
    p_hat: float | None = None
    seed: int = 0
    keep_estimates: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.n0 < 1 or self.k < 1 or self.reps < 1:
            raise ValueError("n0, k and reps must be positive")
        if not (0.0 < self.p0 <= 1.0):
            raise ValueError("p0 must lie in (0, 1]")
        if self.p_hat is not None and not (0.0 < self.p_hat <= 1.0):
            raise ValueError("p_hat must lie in (0, 1]")

    def resolved_estimators(self) -> list[EstimatorSpec]:
        if self.p_hat is None:
            return list(self.estimators)
        out = []
        for spec in self.estimators:
            if spec.beta is None:
                out.append(spec)
            else:
                a = spec.beta.a
                out.append(spec.with_beta(a, b_from_p_hat(a, self.p_hat)))
        return out

    def to_json_dict(self) -> dict:
        return {
            "n0": self.n0, "p0": self.p0, "k": self.k, "reps": self.reps,
            "p_hat": self.p_hat, "seed": self.seed, "threads": self.threads,
            "estimators": [s.to_json_dict() for s in self.estimators],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ScenarioConfig":
        return cls(
            n0=d["n0"], p0=d["p0"], k=d["k"],
            estimators=[EstimatorSpec.from_json_dict(e)
                        for e in d["estimators"]],
            reps=d.get("reps", 1000), p_hat=d.get("p_hat"),
            seed=d.get("seed", 0), threads=d.get("threads", 1),
        )


@dataclass
class EstimatorReport:
    label: str
    rmse: float
    bias: float
    mc_stderr_rmse: float
    mc_stderr_bias: float
    failures: int
    successes: int
    estimates: np.ndarray | None = None


@dataclass
class ScenarioReport:
    config: ScenarioConfig
    rows: list[EstimatorReport]

    def row(self, label: str) -> EstimatorReport:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


def _summarize(label, values, n0, failures, keep):
    v = np.asarray(values, dtype=np.float64)
    m = len(v)
    sq = (v / n0 - 1.0) ** 2
    rmse = float(np.mean(sq)) if m else math.nan
    bias = float(np.mean(v) - n0) if m else math.nan
    se_rmse = float(np.std(sq, ddof=1) / math.sqrt(m)) if m > 1 else math.nan
    se_bias = float(np.std(v, ddof=1) / math.sqrt(m)) if m > 1 else math.nan
    return EstimatorReport(label=label, rmse=rmse, bias=bias,
                           mc_stderr_rmse=se_rmse, mc_stderr_bias=se_bias,
                           failures=failures, successes=m,
                           estimates=v if keep else None)


def _map_reps(fn, reps: int, threads: int) -> list:
    if threads <= 1:
        return [fn(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(reps)))


def run_scenario(cfg: ScenarioConfig) -> ScenarioReport:
    """Per replication: draw k i.i.d. Bin(n0, p0) counts, apply every
    estimator, accumulate RMSE = mean((n_hat/n0 - 1)^2) and
    bias = mean(n_hat) - n0 over the successful replications."""
    specs = cfg.resolved_estimators()
    caches = {s.beta: ScanCache(cfg.k, s.beta)
              for s in specs if s.beta is not None}

    def one(rep: int):
        rng = substream(cfg.seed, STREAM_SCENARIO, rep)
        counts = rng.binomial(cfg.n0, cfg.p0, size=cfg.k)
        sample = Sample(tuple(int(c) for c in counts))
        out = []
        for spec in specs:
            try:
                est = run_estimator(spec, sample, cache=caches.get(spec.beta))
                out.append(est.value)
            except _ESTIMATOR_ERRORS:
                out.append(None)
        return out

    results = _map_reps(one, cfg.reps, cfg.threads)

    rows = []
    for j, spec in enumerate(specs):
        values = [r[j] for r in results if r[j] is not None]
        failures = sum(1 for r in results if r[j] is None)
        rows.append(_summarize(spec.label, values, cfg.n0, failures,
                               cfg.keep_estimates))
    return ScenarioReport(config=cfg, rows=rows)


@dataclass
class RobustnessConfig:
    """Varying-n study: X_i ~ Bin(n_i, p0) with n_i ~ Bin(n_tilde, p_tilde)
    per observation, compared against a paired i.i.d. arm with the constant
    n0 = round(n_tilde * p_tilde) and the same p0 realizations."""

    n_tilde: int
    p_tilde: float
    k: int
    estimators: list[EstimatorSpec]
    reps: int = 1000
    beta_p: tuple[float, float] = (2.0, 38.0)
    seed: int = 0
    paired_streams: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.n_tilde < 1 or self.k < 1 or self.reps < 1:
            raise ValueError("n_tilde, k and reps must be positive")
        if not (0.0 < self.p_tilde <= 1.0):
            raise ValueError("p_tilde must lie in (0, 1]")

    @property
    def n0(self) -> int:
        return int(math.floor(self.n_tilde * self.p_tilde + 0.5))

    def to_json_dict(self) -> dict:
        return {
            "n_tilde": self.n_tilde, "p_tilde": self.p_tilde, "k": self.k,
            "reps": self.reps, "beta_p": list(self.beta_p),
            "seed": self.seed, "paired_streams": self.paired_streams,
            "threads": self.threads,
            "estimators": [s.to_json_dict() for s in self.estimators],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RobustnessConfig":
        return cls(
            n_tilde=d["n_tilde"], p_tilde=d["p_tilde"], k=d["k"],
            estimators=[EstimatorSpec.from_json_dict(e)
                        for e in d["estimators"]],
            reps=d.get("reps", 1000),
            beta_p=tuple(d.get("beta_p", (2.0, 38.0))),
            seed=d.get("seed", 0),
            paired_streams=d.get("paired_streams", True),
            threads=d.get("threads", 1),
        )


@dataclass
class RobustnessRow:
    label: str
    rmse_varying: float
    rmse_iid: float
    ratio: float
    failures_varying: int
    failures_iid: int


@dataclass
class RobustnessReport:
    config: RobustnessConfig
    rows: list[RobustnessRow]

    def ratio(self, label: str) -> float:
        for r in self.rows:
            if r.label == label:
                return r.ratio
        raise KeyError(label)


def run_robustness(cfg: RobustnessConfig) -> RobustnessReport:
    """RMSE(varying n) / RMSE(i.i.d.) per estimator, both w.r.t. n0.

    With paired_streams (default) both arms invert the same uniform stream,
    so at p_tilde = 1 the arms coincide draw for draw and the ratio is
    exactly 1. Without it, each arm consumes its own substream.
    """
    n0 = cfg.n0
    specs = list(cfg.estimators)
    caches = {s.beta: ScanCache(cfg.k, s.beta)
              for s in specs if s.beta is not None}
    a_p, b_p = cfg.beta_p

    def one(rep: int):
        p0 = float(substream(cfg.seed, STREAM_ROBUST_P0, rep).beta(a_p, b_p))
        n_i = substream(cfg.seed, STREAM_ROBUST_N, rep).binomial(
            cfg.n_tilde, cfg.p_tilde, size=cfg.k)
        rng_u = substream(cfg.seed, STREAM_ROBUST_U, rep)
        if cfg.paired_streams:
            u = rng_u.random(cfg.k)
            x_var = _binom.ppf(u, n_i, p0).astype(np.int64)
            x_iid = _binom.ppf(u, n0, p0).astype(np.int64)
        else:
            x_var = rng_u.binomial(n_i, p0)
            x_iid = substream(cfg.seed, STREAM_ROBUST_U + 100, rep).binomial(
                n0, p0, size=cfg.k)
        out = []
        for arm in (x_var, x_iid):
            sample = Sample(tuple(int(c) for c in arm))
            row = []
            for spec in specs:
                try:
                    est = run_estimator(spec, sample,
                                        cache=caches.get(spec.beta))
                    row.append(est.value)
                except _ESTIMATOR_ERRORS:
                    row.append(None)
            out.append(row)
        return out

    results = _map_reps(one, cfg.reps, cfg.threads)

    rows = []
    for j, spec in enumerate(specs):
        var_vals = [r[0][j] for r in results if r[0][j] is not None]
        iid_vals = [r[1][j] for r in results if r[1][j] is not None]
        rmse_var = float(np.mean((np.asarray(var_vals) / n0 - 1.0) ** 2))
        rmse_iid = float(np.mean((np.asarray(iid_vals) / n0 - 1.0) ** 2))
        rows.append(RobustnessRow(
            label=spec.label, rmse_varying=rmse_var, rmse_iid=rmse_iid,
            ratio=rmse_var / rmse_iid,
            failures_varying=cfg.reps - len(var_vals),
            failures_iid=cfg.reps - len(iid_vals)))
    return RobustnessReport(config=cfg, rows=rows)
