"""Population-size estimators on top of the beta-binomial posterior.

The family: scale estimators SE(gamma) minimizing posterior risk under
relative quadratic loss, the Draper-Guttman mode DGE(N0), the Raftery
estimator (SE(1) with a=b=1), the MAP / Carroll-Lombard flat-prior maximizer,
and the plain sample maximum. Plus discrete posterior summaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    BetaPrior,
    NPrior,
    PosteriorN,
    PowerLawPrior,
    PriorSupportError,
    Sample,
    ScanCache,
    TruncationPolicy,
    UniformRangePrior,
    weight_scan,
)


def b_from_p_hat(a: float, p_hat: float) -> float:
    """Beta prior b giving E[P] = p_hat for a given a: b = a/p_hat - a."""
    if not (0.0 < p_hat < 1.0):
        raise ValueError("p_hat must lie strictly inside (0, 1)")
    return a / p_hat - a


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class EstimateResult:
    """A single population-size estimate with truncation diagnostics."""

    value: float
    rounded: int
    posterior: PosteriorN | None = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EstimatorSpec:
    """Serializable description of one estimator configuration.

    kind is one of "se", "dge", "map", "max". The Raftery constructor is an
    enforced alias for SE(1) with a = b = 1, so both spellings share one code
    path and return bit-identical values.
    """

    kind: str
    beta: BetaPrior | None = None
    gamma: float | None = None
    n0_max: int | None = None
    t_k: int | None = None
    trunc: TruncationPolicy = TruncationPolicy()
    allow_nonintegrable: bool = False
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("se", "dge", "map", "max"):
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.kind == "se":
            if self.beta is None or self.gamma is None or self.gamma < 0:
                raise ValueError("se needs a beta prior and gamma >= 0")
        elif self.kind == "dge":
            if self.beta is None or self.n0_max is None or self.n0_max < 1:
                raise ValueError("dge needs a beta prior and n0_max >= 1")
        elif self.kind == "map":
            if self.beta is None or self.t_k is None or self.t_k < 1:
                raise ValueError("map needs a beta prior and t_k >= 1")
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self):
        if self.kind == "se":
            g = self.gamma
            return f"SE({int(g) if float(g).is_integer() else g})"
        if self.kind == "dge":
            return f"DGE({self.n0_max})"
        if self.kind == "map":
            return f"MAP({self.t_k})"
        return "MAX"

    @classmethod
    def scale(cls, gamma, a, b, trunc=TruncationPolicy(),
              allow_nonintegrable=False, label=""):
        return cls(kind="se", beta=BetaPrior(a, b), gamma=float(gamma),
                   trunc=trunc, allow_nonintegrable=allow_nonintegrable,
                   label=label)

    @classmethod
    def raftery(cls, trunc=TruncationPolicy(), label="RE"):
        # SE(1) with a = b = 1: improper 1/n prior, posterior exists (a+gamma=2)
        return cls.scale(1.0, 1.0, 1.0, trunc=trunc, label=label)

    @classmethod
    def dge(cls, n0_max, a, b, label=""):
        return cls(kind="dge", beta=BetaPrior(a, b), n0_max=int(n0_max),
                   label=label)

    @classmethod
    def map_spec(cls, t_k, a, b, label=""):
        return cls(kind="map", beta=BetaPrior(a, b), t_k=int(t_k), label=label)

    @classmethod
    def sample_max_spec(cls, label="MAX"):
        return cls(kind="max", label=label)

    def with_beta(self, a, b):
        if self.kind == "max":
            return self
        return replace(self, beta=BetaPrior(a, b))

    def to_json_dict(self) -> dict:
        d = {"kind": self.kind, "label": self.label}
        if self.beta is not None:
            d["a"] = self.beta.a
            d["b"] = self.beta.b
        if self.gamma is not None:
            d["gamma"] = self.gamma
        if self.n0_max is not None:
            d["n0_max"] = self.n0_max
        if self.t_k is not None:
            d["t_k"] = self.t_k
        d["tail_tol"] = self.trunc.tail_tol
        d["n_cap"] = self.trunc.n_cap
        if self.allow_nonintegrable:
            d["allow_nonintegrable"] = True
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "EstimatorSpec":
        kind = d["kind"]
        trunc = TruncationPolicy(tail_tol=d.get("tail_tol", 1e-12),
                                 n_cap=d.get("n_cap", 10**6))
        if kind == "raftery":
            return cls.raftery(trunc=trunc, label=d.get("label", "RE"))
        beta = None
        if "a" in d:
            beta = BetaPrior(d["a"], d["b"])
        return cls(kind=kind, beta=beta, gamma=d.get("gamma"),
                   n0_max=d.get("n0_max"), t_k=d.get("t_k"), trunc=trunc,
                   allow_nonintegrable=d.get("allow_nonintegrable", False),
                   label=d.get("label", ""))


def scale_ratio(sample: Sample, beta: BetaPrior, nprior: NPrior,
                trunc: TruncationPolicy = TruncationPolicy(),
                allow_nonintegrable: bool = False,
                cache: ScanCache | None = None) -> EstimateResult:
    """Posterior-risk minimizer under relative quadratic loss for any n-prior:

        value = sum_n (1/n) L(n) prior(n) / sum_n (1/n^2) L(n) prior(n)
              = E[1/N | X] / E[1/N^2 | X],

    both sums under the same truncation (governed by the slower-decaying
    numerator summand).
    """
    nprior.validate_with_beta(beta, allow_nonintegrable)
    res = weight_scan(sample, beta, nprior, trunc, moments=(1, 2), govern=1,
                      collect=False, cache=cache,
                      allow_nonconvergent=allow_nonintegrable)
    num = res.moment_sums[1]
    den = res.moment_sums[2]
    value = math.exp(num.log_total - den.log_total)
    return EstimateResult(
        value=value,
        rounded=_round_half_up(value),
        posterior=None,
        diagnostics={
            "support_start": res.support_start,
            "truncated_at": res.truncated_at,
            "tail_bound": res.tail_bound,
            "converged": res.converged,
        },
    )


def scale_estimate(sample: Sample, beta: BetaPrior, gamma: float,
                   trunc: TruncationPolicy = TruncationPolicy(),
                   allow_nonintegrable: bool = False,
                   cache: ScanCache | None = None) -> EstimateResult:
    """SE(gamma): scale_ratio with the power-law prior n^(-gamma)."""
    return scale_ratio(sample, beta, PowerLawPrior(float(gamma)), trunc,
                       allow_nonintegrable=allow_nonintegrable, cache=cache)


def _flat_mode(sample: Sample, beta: BetaPrior, upper: int,
               cache: ScanCache | None, want_posterior: bool) -> EstimateResult:
    if upper < sample.m_max:
        raise PriorSupportError(
            f"prior support too small: upper bound {upper} < sample maximum "
            f"{sample.m_max}")
    nprior = UniformRangePrior(upper)
    res = weight_scan(sample, beta, nprior, TruncationPolicy(), moments=(0,),
                      govern=0, collect=True, cache=cache)
    logw = res.log_weights
    i = int(np.argmax(logw))  # first maximum: ties break to the smallest n
    value = res.support_start + i
    posterior = None
    if want_posterior:
        m = float(logw[i])
        log_z = m + math.log(float(np.sum(np.exp(logw - m))))
        posterior = PosteriorN(
            support_start=res.support_start, log_weights=logw,
            probs=np.exp(logw - log_z), log_normalizer=log_z,
            truncated_at=res.truncated_at, tail_bound=0.0)
    return EstimateResult(
        value=float(value),
        rounded=int(value),
        posterior=posterior,
        diagnostics={"support_start": res.support_start,
                     "truncated_at": res.truncated_at,
                     "tail_bound": 0.0, "converged": True},
    )


def dge_estimate(sample: Sample, beta: BetaPrior, n0_max: int,
                 cache: ScanCache | None = None,
                 want_posterior: bool = False) -> EstimateResult:
    """Draper-Guttman estimator: posterior mode under a uniform prior on
    {1..N0}, i.e. the likelihood maximizer over {M_k..N0}."""
    return _flat_mode(sample, beta, int(n0_max), cache, want_posterior)


def map_estimate(sample: Sample, beta: BetaPrior, t_k: int,
                 cache: ScanCache | None = None,
                 want_posterior: bool = False) -> EstimateResult:
    """Flat-prior MAP (Carroll-Lombard style): identical contract to
    dge_estimate with n0_max = t_k."""
    return _flat_mode(sample, beta, int(t_k), cache, want_posterior)


def sample_max(sample: Sample) -> EstimateResult:
    """The sample maximum M_k; flagged degenerate when every count is zero."""
    m = sample.m_max
    return EstimateResult(value=float(m), rounded=int(m), posterior=None,
                          diagnostics={"degenerate": m == 0})


def run_estimator(spec: EstimatorSpec, sample: Sample,
                  cache: ScanCache | None = None) -> EstimateResult:
    """Apply one estimator spec to one sample."""
    if spec.kind == "max":
        return sample_max(sample)
    if spec.kind == "se":
        return scale_estimate(sample, spec.beta, spec.gamma, spec.trunc,
                              allow_nonintegrable=spec.allow_nonintegrable,
                              cache=cache)
    if spec.kind == "dge":
        return dge_estimate(sample, spec.beta, spec.n0_max, cache=cache)
    if spec.kind == "map":
        return map_estimate(sample, spec.beta, spec.t_k, cache=cache)
    raise ValueError(f"unknown estimator kind {spec.kind!r}")


@dataclass
class PosteriorSummaries:
    mean: float
    median: int
    mode: int
    ci_low: int
    ci_high: int
    level: float


def posterior_summaries(post: PosteriorN, q: float = 0.95) -> PosteriorSummaries:
    """Standard discrete summaries; the credible interval is the shortest
    contiguous window covering mass >= q (ties toward the leftmost window)."""
    if not post.normalized:
        raise ValueError("summaries need a normalized posterior")
    ns = post.ns()
    p = post.probs
    mean = float(np.dot(ns, p))
    cdf = np.cumsum(p)
    median = int(ns[int(np.searchsorted(cdf, 0.5))])
    mode = int(ns[int(np.argmax(p))])

    best = (len(p), 0)  # (window length, left index)
    left = 0
    acc = 0.0
    for right in range(len(p)):
        acc += p[right]
        while acc - p[left] >= q and left < right:
            acc -= p[left]
            left += 1
        if acc >= q and (right - left) < best[0]:
            best = (right - left, left)
    lo = best[1]
    hi = best[1] + best[0]
    return PosteriorSummaries(mean=mean, median=median, mode=mode,
                              ci_low=int(ns[lo]), ci_high=int(ns[hi]),
                              level=q)
