"""Empirical posterior-contraction laboratory.

Generates parameter sequences (n_k, p_k) inside the class

    M_lambda = { 1/lambda <= n_k p_k <= lambda,  n_k <= lambda (k/log k)^(1/6) },

measures how the posterior miss-mass P(N != n_k | X^k) decays with k,
validates the prior growth condition Pi_N(n) >= beta exp(-alpha n^2),
computes the admissible truncation-bound window for flat/improper priors,
and probes the consistency regimes of the plain sample maximum.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import (
    BetaPrior,
    NPrior,
    Sample,
    ScanCache,
    TruncationPolicy,
    posterior_miss_mass,
    posterior_n,
)
from .montecarlo import STREAM_CONTRACTION, STREAM_PROBE, substream


@dataclass(frozen=True)
class SequencePoint:
    k: int
    n_k: int
    p_k: float


@dataclass(frozen=True)
class SequenceSpec:
    """Canonical sequence: n_k = max(1, round(lambda*(k/log k)^exponent))
    with p_k = mu/n_k, which pins n_k*p_k = mu exactly.

    The unrounded n stays below the class ceiling lambda*(k/log k)^(1/6)
    whenever exponent <= 1/6; nearest-integer rounding can exceed it by at
    most 1/2, which is accepted rather than clipped (clipping makes small-k
    grid points artificially easy and breaks the miss-mass decay)."""

    lam: float
    mu: float
    exponent: float
    k_grid: tuple[int, ...]
    reps: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 1.0:
            raise ValueError("lambda must exceed 1")
        if not (1.0 / self.lam <= self.mu <= self.lam):
            raise ValueError("mu must lie in [1/lambda, lambda] to stay in "
                             "the sequence class")
        if not (0.0 < self.exponent <= 0.5):
            raise ValueError("exponent must lie in (0, 1/2]")
        if any(k < 3 for k in self.k_grid):
            raise ValueError("k_grid entries must be >= 3")
        if self.reps < 1:
            raise ValueError("reps must be positive")
        object.__setattr__(self, "k_grid", tuple(int(k) for k in self.k_grid))

    def points(self) -> list[SequencePoint]:
        out = []
        for k in self.k_grid:
            u = k / math.log(k)
            n_k = max(1, round(self.lam * u ** self.exponent))
            p_k = self.mu / n_k
            if p_k > 1.0:
                raise ValueError(f"mu={self.mu} too large for n_k={n_k} at "
                                 f"k={k} (p_k would exceed 1)")
            out.append(SequencePoint(k=k, n_k=n_k, p_k=p_k))
        return out


@dataclass
class ContractionPoint:
    k: int
    n_k: int
    p_k: float
    mean_miss_mass: float
    mc_stderr: float


@dataclass
class ContractionCurve:
    spec: SequenceSpec
    points: list[ContractionPoint]


def contraction_curve(spec: SequenceSpec, beta: BetaPrior, nprior: NPrior,
                      trunc: TruncationPolicy = TruncationPolicy(),
                      threads: int = 1) -> ContractionCurve:
    """Monte Carlo mean of the posterior miss-mass along the k grid."""
    pts = spec.points()
    out = []
    for ki, pt in enumerate(pts):
        cache = ScanCache(pt.k, beta)

        def one(rep: int, pt=pt, ki=ki, cache=cache):
            rng = substream(spec.seed, STREAM_CONTRACTION, ki, rep)
            counts = rng.binomial(pt.n_k, pt.p_k, size=pt.k)
            sample = Sample(tuple(int(c) for c in counts))
            post = posterior_n(sample, beta, nprior, trunc, cache=cache)
            return posterior_miss_mass(post, pt.n_k)

        if threads <= 1:
            misses = [one(r) for r in range(spec.reps)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                misses = list(ex.map(one, range(spec.reps)))
        m = np.asarray(misses)
        stderr = (float(np.std(m, ddof=1) / math.sqrt(len(m)))
                  if len(m) > 1 else math.nan)
        out.append(ContractionPoint(k=pt.k, n_k=pt.n_k, p_k=pt.p_k,
                                    mean_miss_mass=float(np.mean(m)),
                                    mc_stderr=stderr))
    return ContractionCurve(spec=spec, points=out)


@dataclass
class PriorConditionReport:
    holds: bool
    first_violation: int | None
    n_lo: int
    n_hi: int
    alpha: float
    beta_c: float


def check_prior_condition(nprior: NPrior, alpha: float, beta_c: float,
                          n_range: tuple[int, int]) -> PriorConditionReport:
    """Verify Pi_N(n) >= beta_c * exp(-alpha n^2) over an n interval.

    Uses normalized prior probabilities, so the claim is about the actual
    distribution (improper priors are rejected upstream by log_norm)."""
    if alpha <= 0 or beta_c <= 0:
        raise ValueError("alpha and beta_c must be positive")
    lo, hi = int(n_range[0]), int(n_range[1])
    if lo < 1 or hi < lo:
        raise ValueError("n_range must be a non-empty interval within n >= 1")
    log_p = nprior.log_prob_range(lo, hi - lo + 1)
    ns = np.arange(lo, hi + 1, dtype=np.float64)
    bound = math.log(beta_c) - alpha * ns ** 2
    bad = np.nonzero(log_p < bound)[0]
    first = int(lo + bad[0]) if bad.size else None
    return PriorConditionReport(holds=bad.size == 0, first_violation=first,
                                n_lo=lo, n_hi=hi, alpha=alpha, beta_c=beta_c)


@dataclass
class TkBounds:
    """Admissible window for the truncation point of a flat/improper prior:
    t_min <= T_k < t_max, with t_max reported in the log domain (and the
    double-log domain for gamma = 1) since it overflows quickly."""

    t_min: float
    log_t_max: float
    t_max: float | None
    log_log_t_max: float | None


def tk_bounds(gamma: float, k: int, lam: float, alpha: float,
              beta_c: float) -> TkBounds:
    if not (0.0 <= gamma <= 1.0):
        raise ValueError("gamma must lie in [0, 1]")
    if k < 2:
        raise ValueError("k must be >= 2")
    if lam <= 0 or alpha <= 0 or beta_c <= 0:
        raise ValueError("lambda, alpha, beta_c must be positive")
    t_min = lam * (k / math.log(k)) ** (1.0 / 6.0)
    inner = alpha * k ** (1.0 / 3.0) - math.log(beta_c)
    if gamma < 1.0:
        log_t_max = inner / (1.0 - gamma)
        log_log_t_max = None
    else:
        log_log_t_max = inner
        log_t_max = math.exp(inner) if inner < 700.0 else math.inf
    t_max = math.exp(log_t_max) if log_t_max < 700.0 else None
    return TkBounds(t_min=t_min, log_t_max=log_t_max, t_max=t_max,
                    log_log_t_max=log_log_t_max)


def exact_max_attainment_prob(n: int, p: float, k: int) -> float:
    """P(M_k = n) = 1 - (1 - p^n)^k, evaluated stably."""
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must lie in [0, 1]")
    if p == 1.0:
        return 1.0
    if p == 0.0:
        return 0.0
    log_pn = n * math.log(p)
    if log_pn < -745.0:  # p^n underflows; k*p^n still meaningful in logs
        log_kpn = math.log(k) + log_pn
        return math.exp(log_kpn) if log_kpn > -745.0 else 0.0
    return -math.expm1(k * math.log1p(-math.exp(log_pn)))


def binomial_tail_exact(n: int, p: float, t: int) -> Fraction:
    """Exact P(X >= t) for X ~ Bin(n, p), with p taken as the exact rational
    value of the float."""
    pf = Fraction(p)
    qf = 1 - pf
    total = Fraction(0)
    for x in range(max(t, 0), n + 1):
        total += math.comb(n, x) * pf ** x * qf ** (n - x)
    return total


def majority_max_thresholds(n: int, p: float) -> dict:
    """Smallest k with P(M_k >= threshold) >= 1/2 for both readings of
    "the maximum reaches n/2": strict (X > n/2) and inclusive (X >= n/2).

    Exact binomial tails feed k = ceil(log 2 / -log(1 - q)). Both readings
    are reported; neither is canonical."""
    t_strict = math.floor(n / 2) + 1
    t_incl = math.ceil(n / 2)
    out = {}
    for name, t in (("strict", t_strict), ("inclusive", t_incl)):
        q = binomial_tail_exact(n, p, t)
        if q <= 0:
            out[name] = {"q": 0.0, "k": None}
        else:
            k = math.ceil(math.log(2.0) / -math.log1p(-float(q)))
            out[name] = {"q": float(q), "k": k}
    return out


@dataclass
class MaxProbeResult:
    n: int
    p: float
    k: int
    exact_prob: float
    mc_prob: float | None
    mc_stderr: float | None
    regime: str


def classify_max_regime(n: int, p: float, k: int) -> str:
    """Sample-maximum consistency regime from the sign of n log n - log k."""
    d = n * math.log(n) - math.log(k) if n > 1 else -math.log(k)
    if abs(d) < 1e-12:
        return "critical"
    return "consistent" if d < 0 else "inconsistent"


def max_consistency_probe(n: int, p: float, k: int, reps: int = 0,
                          seed: int = 0) -> MaxProbeResult:
    """Exact P(M_k = n) next to a Monte Carlo estimate of the same event.

    With reps = 0 only the exact value and the regime label are filled in.
    The MC estimate draws honest k-fold maxima (never the closed form)."""
    exact = exact_max_attainment_prob(n, p, k)
    mc = mc_se = None
    if reps > 0:
        rng = substream(seed, STREAM_PROBE, n, k)
        hits = 0
        chunk = max(1, min(reps, max(1, 2 * 10**7 // max(k, 1))))
        done = 0
        while done < reps:
            r = min(chunk, reps - done)
            draws = rng.binomial(n, p, size=(r, k))
            hits += int(np.sum(draws.max(axis=1) == n))
            done += r
        mc = hits / reps
        mc_se = math.sqrt(max(mc * (1.0 - mc), 1.0 / reps) / reps)
    return MaxProbeResult(n=n, p=p, k=k, exact_prob=exact, mc_prob=mc,
                          mc_stderr=mc_se, regime=classify_max_regime(n, p, k))
