"""Beta-binomial likelihood and the marginal posterior over the population size n.

Everything runs in the log domain (log-gamma based, never raw factorials) so
that arguments like k*n + a + b, which reach ~1e6 and beyond in contraction
sweeps, stay finite. Posteriors over unbounded priors are truncated
adaptively: the support is extended upward from the sample maximum until a
geometric tail estimate bounds the excluded relative mass below a tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gammaln, zeta

from . import kernels

CHUNK = 8192

# soft cap on memoized chunk arrays per cache map (keeps long-tail Monte
# Carlo sweeps from hoarding memory; misses just recompute)
CACHE_MAX_ENTRIES = 1536

LOG_ZERO = -np.inf


class PriorSupportError(ValueError):
    """The prior's support cannot cover the observed sample maximum."""


class TruncationError(RuntimeError):
    """The posterior tail did not converge within the configured n cap."""


class InadmissiblePriorError(ValueError):
    """Improper n-prior without posterior existence (needs a + gamma > 1)."""


@dataclass(frozen=True)
class Sample:
    """Observed counts X_1..X_k with cached size, sum and maximum."""

    counts: tuple[int, ...]
    k: int = field(init=False)
    s: int = field(init=False)
    m_max: int = field(init=False)

    def __post_init__(self):
        if len(self.counts) < 1:
            raise ValueError("sample needs at least one count")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        object.__setattr__(self, "k", len(self.counts))
        object.__setattr__(self, "s", int(sum(self.counts)))
        object.__setattr__(self, "m_max", int(max(self.counts)))

    @cached_property
    def histogram(self):
        """Distinct counts (ascending) and their multiplicities, as int64."""
        xs, cnts = np.unique(np.asarray(self.counts, dtype=np.int64),
                             return_counts=True)
        return xs, cnts.astype(np.int64)


@dataclass(frozen=True)
class BetaPrior:
    """Beta(a, b) prior on the success probability."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("beta prior requires a > 0 and b > 0")


@dataclass(frozen=True)
class TruncationPolicy:
    """Adaptive tail truncation for posteriors over unbounded priors.

    Scanning stops at the first n >= 2*max(M_k, 10) whose weight has dropped
    below tail_tol*1e-3 of the running maximum and whose geometric tail
    estimate (ratio of the last two terms, required < 1) bounds the excluded
    relative mass below tail_tol. Scans never pass n_cap.
    """

    tail_tol: float = 1e-12
    n_cap: int = 10**6

    def __post_init__(self):
        if not (0.0 < self.tail_tol < 1.0):
            raise ValueError("tail_tol must be in (0, 1)")
        if self.n_cap < 1:
            raise ValueError("n_cap must be positive")


class NPrior:
    """Base for priors on the population size N (support subset of n >= 1)."""

    #: largest supported n, or None for unbounded support
    support_max: int | None = None

    def log_weight_range(self, n_start: int, length: int) -> np.ndarray:
        raise NotImplementedError

    def is_improper(self) -> bool:
        return False

    def validate_with_beta(self, beta: BetaPrior, allow_nonintegrable=False) -> bool:
        """Check joint admissibility. Returns True when the posterior exists."""
        return True

    def log_norm(self) -> float:
        """log of the total prior weight (proper priors only)."""
        raise NotImplementedError

    def log_prob_range(self, n_start: int, length: int) -> np.ndarray:
        """Normalized log probabilities over a contiguous n range."""
        return self.log_weight_range(n_start, length) - self.log_norm()


def _ns(n_start, length):
    return n_start + np.arange(length, dtype=np.int64)


@dataclass(frozen=True)
class PowerLawPrior(NPrior):
    """Weight n^(-gamma); improper for gamma <= 1 (total weight infinite)."""

    gamma: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")

    def log_weight_range(self, n_start, length):
        return -self.gamma * np.log(_ns(n_start, length).astype(np.float64))

    def is_improper(self):
        return self.gamma <= 1.0

    def validate_with_beta(self, beta, allow_nonintegrable=False):
        if self.gamma > 1.0:
            return True
        if beta.a + self.gamma > 1.0:
            return True
        if allow_nonintegrable:
            return False
        raise InadmissiblePriorError(
            f"improper prior n^(-{self.gamma}) with a={beta.a} has no posterior "
            f"(needs a + gamma > 1); pass allow_nonintegrable to override")

    def log_norm(self):
        if self.gamma <= 1.0:
            raise InadmissiblePriorError("improper power-law prior has no "
                                         "normalization constant")
        return math.log(zeta(self.gamma))


@dataclass(frozen=True)
class TruncatedPowerLawPrior(NPrior):
    """Weight n^(-gamma) restricted to {1..t_k}, gamma in [0, 1]."""

    gamma: float
    t_k: int

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("truncated power law uses gamma in [0, 1]")
        if self.t_k < 1:
            raise ValueError("t_k must be a positive integer")
        object.__setattr__(self, "t_k", int(self.t_k))

    @property
    def support_max(self):
        return self.t_k

    def log_weight_range(self, n_start, length):
        ns = _ns(n_start, length)
        out = -self.gamma * np.log(ns.astype(np.float64))
        out[ns > self.t_k] = LOG_ZERO
        return out

    def log_norm(self):
        return math.log(np.sum(np.arange(1, self.t_k + 1, dtype=np.float64)
                               ** (-self.gamma)))


@dataclass(frozen=True)
class UniformRangePrior(NPrior):
    """Uniform prior on {1..n0_max}."""

    n0_max: int

    def __post_init__(self):
        if self.n0_max < 1:
            raise ValueError("n0_max must be a positive integer")
        object.__setattr__(self, "n0_max", int(self.n0_max))

    @property
    def support_max(self):
        return self.n0_max

    def log_weight_range(self, n_start, length):
        ns = _ns(n_start, length)
        out = np.zeros(length, dtype=np.float64)
        out[ns > self.n0_max] = LOG_ZERO
        return out

    def log_norm(self):
        return math.log(self.n0_max)


@dataclass(frozen=True)
class PoissonPrior(NPrior):
    """Poisson(mu) weights restricted to n >= 1."""

    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")

    def log_weight_range(self, n_start, length):
        ns = _ns(n_start, length).astype(np.float64)
        return ns * math.log(self.mu) - gammaln(ns + 1.0)

    def log_norm(self):
        # sum over n >= 1 of mu^n / n!
        return math.log(math.expm1(self.mu))


class TablePrior(NPrior):
    """Explicit finite table of positive weights per n."""

    def __init__(self, weights: dict[int, float]):
        if not weights:
            raise ValueError("table prior needs at least one entry")
        if any(n < 1 for n in weights):
            raise ValueError("table prior support must be n >= 1")
        if any(not w > 0 for w in weights.values()):
            raise ValueError("table prior weights must be positive")
        self.weights = {int(n): float(w) for n, w in weights.items()}
        self._max = max(self.weights)

    @property
    def support_max(self):
        return self._max

    def log_weight_range(self, n_start, length):
        out = np.full(length, LOG_ZERO)
        for i, n in enumerate(range(n_start, n_start + length)):
            w = self.weights.get(n)
            if w is not None:
                out[i] = math.log(w)
        return out

    def log_norm(self):
        return math.log(sum(self.weights.values()))

    def __repr__(self):
        return f"TablePrior({self.weights!r})"


@dataclass
class PosteriorN:
    """Discrete posterior over n on the contiguous window
    [support_start, truncated_at], with explicit truncation metadata.

    probs[i] belongs to n = support_start + i. Mass below the sample maximum
    is zero by construction; `normalized` is False only for the explicit
    non-integrable override, where probs are conditional on the window.
    """

    support_start: int
    log_weights: np.ndarray
    probs: np.ndarray
    log_normalizer: float
    truncated_at: int
    tail_bound: float
    normalized: bool = True

    def ns(self) -> np.ndarray:
        return self.support_start + np.arange(len(self.probs), dtype=np.int64)

    def prob_of(self, n: int) -> float:
        i = n - self.support_start
        if 0 <= i < len(self.probs):
            return float(self.probs[i])
        return 0.0


class ScanCache:
    """Chunk-aligned, memoized evaluation of posterior ingredients.

    All scans share an absolute chunk grid (chunk c covers
    n in [1 + c*CHUNK, 1 + (c+1)*CHUNK)), so pieces that depend only on
    (a, b, k) plus either a distinct count x or a sample sum s can be reused
    across the many samples of a Monte Carlo sweep. Values are identical to
    what the fused kernel produces, bit for bit.
    """

    def __init__(self, k: int, beta: BetaPrior, chunk: int = CHUNK):
        self.k = int(k)
        self.beta = beta
        self.chunk = int(chunk)
        self._gamma_terms: dict[tuple[int, int], np.ndarray] = {}
        self._comb_cols: dict[tuple[int, int], np.ndarray] = {}
        self._logn: dict[int, np.ndarray] = {}

    def chunk_start(self, c: int) -> int:
        return 1 + c * self.chunk

    def chunk_of(self, n: int) -> int:
        return (n - 1) // self.chunk

    def logn_chunk(self, c: int) -> np.ndarray:
        arr = self._logn.get(c)
        if arr is None:
            arr = np.log(_ns(self.chunk_start(c), self.chunk).astype(np.float64))
            self._logn[c] = arr
        return arr

    def _gamma_chunk(self, s: int, c: int) -> np.ndarray:
        key = (s, c)
        arr = self._gamma_terms.get(key)
        if arr is None:
            arr = kernels.gamma_term_range(self.k, s, self.beta.a, self.beta.b,
                                           self.chunk_start(c), self.chunk)
            arr = arr + math.lgamma(s + self.beta.a)
            if len(self._gamma_terms) < CACHE_MAX_ENTRIES:
                self._gamma_terms[key] = arr
        return arr

    def _comb_chunk(self, x: int, c: int) -> np.ndarray:
        key = (x, c)
        arr = self._comb_cols.get(key)
        if arr is None:
            arr = kernels.log_comb_range(x, self.chunk_start(c), self.chunk)
            if len(self._comb_cols) < CACHE_MAX_ENTRIES:
                self._comb_cols[key] = arr
        return arr

    def loglik_chunk(self, sample: Sample, c: int) -> np.ndarray:
        """log L_{a,b}(n) for the whole chunk (entries below M_k are -inf)."""
        acc = self._gamma_chunk(sample.s, c)
        for x, cnt in zip(*sample.histogram):
            acc = acc + float(cnt) * self._comb_chunk(int(x), c)
        return acc


def log_beta_binomial_likelihood(sample: Sample, n: int, prior: BetaPrior) -> float:
    """log L_{a,b}(n); -inf when n < M_k. Raises for n < 1."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if n < sample.m_max:
        return LOG_ZERO
    xs, cnts = sample.histogram
    out = kernels.logbb_range(xs, cnts, sample.k, sample.s,
                              prior.a, prior.b, int(n), 1)
    return float(out[0])


def loglik_range(sample: Sample, prior: BetaPrior, n_start: int,
                 length: int) -> np.ndarray:
    """Vectorized log L_{a,b}(n) over [n_start, n_start + length)."""
    if n_start < 1:
        raise ValueError("range must start at n >= 1")
    xs, cnts = sample.histogram
    return kernels.logbb_range(xs, cnts, sample.k, sample.s,
                               prior.a, prior.b, int(n_start), int(length))


class _MomentSum:
    """Streaming sum of exp(log terms) with dynamic rescaling."""

    __slots__ = ("scale", "total")

    def __init__(self):
        self.scale = LOG_ZERO
        self.total = 0.0

    def add(self, log_terms: np.ndarray):
        if log_terms.size == 0:
            return
        m = float(np.max(log_terms))
        if m == LOG_ZERO:
            return
        if m > self.scale:
            if self.total > 0.0:
                self.total *= math.exp(self.scale - m)
            self.scale = m
        self.total += float(np.sum(np.exp(log_terms - self.scale)))

    @property
    def log_total(self) -> float:
        if self.total <= 0.0:
            return LOG_ZERO
        return self.scale + math.log(self.total)


@dataclass
class ScanResult:
    """Outcome of one adaptive (or finite) weight scan."""

    support_start: int
    truncated_at: int
    tail_bound: float
    converged: bool
    moment_sums: dict[int, _MomentSum]
    log_weights: np.ndarray | None


def _stop_search(ns, logu, min_n, tol, carry_prev, carry_max, carry_logtot):
    """Vectorized per-n evaluation of the truncation stopping rule.

    Returns (stop_index_or_None, rel_tail_at_stop). Carries describe the
    scan state just before this chunk.
    """
    prev = np.empty_like(logu)
    prev[0] = carry_prev
    prev[1:] = logu[:-1]
    log_ratio = logu - prev

    run_max = np.maximum.accumulate(np.maximum(logu, carry_max))

    m = max(carry_logtot, float(np.max(logu)))
    pref = np.cumsum(np.exp(logu - m))
    if carry_logtot > LOG_ZERO:
        pref = pref + math.exp(carry_logtot - m)
    log_pref = m + np.log(pref)

    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.exp(log_ratio)
        rel_tail = np.where(
            log_ratio < 0.0,
            np.exp(logu - log_pref) * ratio / (1.0 - ratio),
            np.inf,
        )

    ok = ((ns >= min_n)
          & (logu < run_max + math.log(tol * 1e-3))
          & (log_ratio < 0.0)
          & (rel_tail < tol))
    idx = np.nonzero(ok)[0]
    if idx.size:
        i = int(idx[0])
        return i, float(rel_tail[i])
    return None, math.nan


def weight_scan(sample: Sample, beta: BetaPrior, nprior: NPrior,
                trunc: TruncationPolicy, moments: tuple[int, ...],
                govern: int, collect: bool, cache: ScanCache | None = None,
                allow_nonconvergent: bool = False,
                stop_max: int | None = None) -> ScanResult:
    """Accumulate sums of L(n)*prior(n)*n^(-q) for each q in `moments`.

    The stopping rule is applied to the summand of moment `govern` (the
    slowest-decaying one among those requested). With a finite-support prior
    (or `stop_max`), the scan simply covers the full admissible window.
    """
    if cache is None:
        cache = ScanCache(sample.k, beta)
    elif cache.k != sample.k or cache.beta != beta:
        raise ValueError("scan cache was built for different (k, a, b)")

    start = max(1, sample.m_max)
    smax = nprior.support_max
    if stop_max is not None:
        smax = stop_max if smax is None else min(smax, stop_max)
    if smax is not None and smax < start:
        raise PriorSupportError(
            f"prior support too small: max supported n = {smax} < sample "
            f"maximum {sample.m_max}")
    finite = smax is not None
    last = smax if finite else trunc.n_cap

    min_n = 2 * max(sample.m_max, 10)
    sums = {q: _MomentSum() for q in moments}
    collected: list[np.ndarray] = []
    log_drop = math.log(trunc.tail_tol * 1e-3)

    carry_prev = LOG_ZERO
    carry_max = LOG_ZERO
    carry_logtot = LOG_ZERO
    truncated_at = last
    tail_bound = 0.0 if finite else math.inf
    converged = finite

    c = cache.chunk_of(start)
    while cache.chunk_start(c) <= last:
        cs = cache.chunk_start(c)
        lo = max(start, cs) - cs
        hi = min(last, cs + cache.chunk - 1) - cs + 1
        ll = cache.loglik_chunk(sample, c)
        logw = ll[lo:hi] + nprior.log_weight_range(cs + lo, hi - lo)
        logn = cache.logn_chunk(c)[lo:hi]

        stop_i = None
        if not finite:
            logu = logw - govern * logn if govern else logw
            n_end = cs + hi - 1
            # Cheap gate: the stopping rule evaluated at the chunk's last n.
            # Tails are eventually strictly decreasing (the policy's premise),
            # so the first qualifying n cannot precede a failing chunk end;
            # the exact per-n search runs only once the gate fires.
            m_chunk = float(np.max(logu))
            if m_chunk == LOG_ZERO:
                carry_prev = LOG_ZERO
                c += 1
                continue
            tot_m = max(carry_logtot, m_chunk)
            log_tot = tot_m + math.log(
                float(np.sum(np.exp(logu - tot_m)))
                + (math.exp(carry_logtot - tot_m)
                   if carry_logtot > LOG_ZERO else 0.0))
            max_end = max(carry_max, m_chunk)
            u_end = float(logu[-1])
            u_prev = float(logu[-2]) if logu.size > 1 else carry_prev
            lr_end = u_end - u_prev
            gate = (n_end >= min_n
                    and u_end < max_end + log_drop
                    and lr_end < 0.0)
            if gate:
                r_end = math.exp(lr_end)
                gate = (math.exp(u_end - log_tot) * r_end / (1.0 - r_end)
                        < trunc.tail_tol)
            if gate:
                ns = _ns(cs + lo, hi - lo)
                stop_i, rel_tail = _stop_search(
                    ns, logu, min_n, trunc.tail_tol,
                    carry_prev, carry_max, carry_logtot)
            if stop_i is not None:
                logw = logw[:stop_i + 1]
                logn = logn[:stop_i + 1]
                truncated_at = int(cs + lo + stop_i)
                tail_bound = rel_tail
                converged = True
                for q in moments:
                    sums[q].add(logw - q * logn if q else logw)
                if collect:
                    collected.append(logw)
                break
            carry_prev = u_end
            carry_max = max_end
            carry_logtot = log_tot

        for q in moments:
            sums[q].add(logw - q * logn if q else logw)
        if collect:
            collected.append(logw)
        c += 1

    if not converged and not allow_nonconvergent:
        raise TruncationError(
            f"posterior tail did not converge within n_cap={trunc.n_cap} "
            f"(tail_tol={trunc.tail_tol}); loosen the truncation policy or "
            "use the non-integrable override")

    log_weights = np.concatenate(collected) if collect else None
    return ScanResult(support_start=start, truncated_at=truncated_at,
                      tail_bound=tail_bound, converged=converged,
                      moment_sums=sums, log_weights=log_weights)


def posterior_n(sample: Sample, beta: BetaPrior, nprior: NPrior,
                trunc: TruncationPolicy = TruncationPolicy(),
                allow_nonintegrable: bool = False,
                cache: ScanCache | None = None) -> PosteriorN:
    """Normalized marginal posterior over n on {max(M_k, 1) .. truncated_at}.

    Finite-support priors are evaluated over their full admissible window;
    unbounded priors are truncated per the policy. With the non-integrable
    override, an inadmissible improper prior (or a tail that cannot converge)
    yields a window-conditional distribution flagged `normalized=False`.
    """
    proper = nprior.validate_with_beta(beta, allow_nonintegrable)
    res = weight_scan(sample, beta, nprior, trunc, moments=(0,), govern=0,
                      collect=True, cache=cache,
                      allow_nonconvergent=allow_nonintegrable)
    logw = res.log_weights
    m = float(np.max(logw))
    if m == LOG_ZERO:
        raise PriorSupportError("prior support too small: no admissible n "
                                "carries positive weight")
    log_z = m + math.log(float(np.sum(np.exp(logw - m))))
    probs = np.exp(logw - log_z)
    return PosteriorN(
        support_start=res.support_start,
        log_weights=logw,
        probs=probs,
        log_normalizer=log_z,
        truncated_at=res.truncated_at,
        tail_bound=res.tail_bound,
        normalized=bool(proper and res.converged),
    )


def posterior_miss_mass(post: PosteriorN, n_true: int) -> float:
    """1 - P(N = n_true); equals 1.0 when n_true lies outside the support."""
    return 1.0 - post.prob_of(n_true)
