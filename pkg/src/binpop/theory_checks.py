"""Numeric validation of the deterministic inequalities behind the
contraction analysis: binomial moment bounds via Bell numbers, falling
factorial estimates, monotonicity of the likelihood in the beta parameter a,
concentration ingredients for the posterior derivative terms, and tail
bounds for the sample maximum.

Each check evaluates both sides of a stated inequality, exactly (integer or
rational arithmetic) where feasible and in the log domain otherwise, with a
relative margin of 1e-9 on floating comparisons to absorb rounding at
exact-equality edges. Probabilities given as floats are treated as their
exact binary rational values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

REL_MARGIN = 1e-9

_E2 = math.exp(2.0)


def _leq(lhs: float, rhs: float) -> bool:
    """lhs <= rhs up to the documented relative margin."""
    return lhs <= rhs + REL_MARGIN * max(abs(lhs), abs(rhs), 1.0)


@dataclass
class BellTable:
    """Exact Bell numbers B_1..B_r (B_1 = 1, B_2 = 2, B_3 = 5, ...)."""

    values: list[int]

    def __getitem__(self, r: int) -> int:
        if r < 1 or r > len(self.values):
            raise IndexError(f"B_{r} not tabulated")
        return self.values[r - 1]


def _bell_list(r_max: int) -> list[int]:
    # B_0 = 1; B_{m+1} = sum_{j=0}^{m} C(m, j) B_j; returns [B_1 .. B_r_max]
    bl = [1]
    while len(bl) < r_max + 1:
        m = len(bl) - 1
        bl.append(sum(math.comb(m, j) * bl[j] for j in range(m + 1)))
    return bl[1:r_max + 1]


def bell_numbers(r_max: int) -> BellTable:
    """Exact Bell numbers via the binomial recurrence: 1, 2, 5, 15, 52, ...

    Python integers keep the table exact at any feasible r."""
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    return BellTable(values=_bell_list(r_max))


@dataclass
class CheckReport:
    name: str
    holds: bool
    preconditions_met: bool = True
    detail: dict = field(default_factory=dict)


def binomial_pmf_exact(n: int, p: Fraction, x: int) -> Fraction:
    return math.comb(n, x) * p**x * (1 - p) ** (n - x)


def check_moment_bound(n: int, p: float, r: int) -> CheckReport:
    """E[X^r] <= B_r * max(np, (np)^r) for X ~ Bin(n, p), exactly."""
    if not (1 <= r <= 12 and 1 <= n <= 200):
        raise ValueError("feasible range: r <= 12, n <= 200")
    pf = Fraction(p)
    if not (0 < pf < 1):
        raise ValueError("p must lie strictly in (0, 1)")
    moment = sum(Fraction(x) ** r * binomial_pmf_exact(n, pf, x)
                 for x in range(n + 1))
    np_ = n * pf
    bound = _bell_list(r)[r - 1] * max(np_, np_**r)
    return CheckReport(
        name="moment_bound", holds=moment <= bound,
        detail={"n": n, "p": p, "r": r,
                "moment": float(moment), "bound": float(bound)})


def falling_factorial_int(m: int, j: int) -> int:
    return math.perm(m, j)


def check_falling_factorial(m: int, n: int, j: int,
                            c: float = math.exp(-2.0)) -> CheckReport:
    """Claim 1: (c m)^j <= (m)_j <= m^j for 0 < c <= e^-2 (log domain).
    Claim 2: m^j (n)_j / (n^j (m)_j) >= 1 + (n-m)/(nm) for n >= m, j > 1
    (exact integer cross-multiplication)."""
    if j < 1 or j > min(m, n) or m <= 1 or n <= 1:
        raise ValueError("need 1 <= j <= min(m, n) and m, n > 1")
    mj = falling_factorial_int(m, j)
    log_mj = math.log(mj) if mj < 10**300 else math.lgamma(m + 1) - math.lgamma(m - j + 1)
    claim1 = (_leq(j * (math.log(c) + math.log(m)), log_mj)
              and _leq(log_mj, j * math.log(m)))
    claim2 = None
    if n >= m and j > 1:
        nj = falling_factorial_int(n, j)
        # m^j (n)_j * n m >= (n m + n - m) * n^j (m)_j, all integers
        claim2 = m**j * nj * n * m >= (n * m + n - m) * n**j * mj
    return CheckReport(
        name="falling_factorial",
        holds=claim1 and (claim2 is not False),
        detail={"m": m, "n": n, "j": j, "c": c,
                "claim1": claim1, "claim2": claim2})


def falling_factorial_margin_search(c: float, m_max: int = 40) -> dict:
    """Scan (c m)^j <= (m)_j over j <= m <= m_max for a given c and report
    the tightest margin (and the first violation, if any).

    Used to document behavior for c slightly above e^-2: the constant is
    sufficient, not tight, so no violation is asserted."""
    worst = math.inf
    worst_at = None
    first_violation = None
    for m in range(2, m_max + 1):
        log_fall = 0.0
        for j in range(1, m + 1):
            log_fall += math.log(m - j + 1)
            margin = log_fall - j * (math.log(c) + math.log(m))
            if margin < worst:
                worst = margin
                worst_at = (m, j)
            if margin < 0 and first_violation is None:
                first_violation = (m, j)
    return {"c": c, "worst_log_margin": worst, "worst_at": worst_at,
            "first_violation": first_violation}


def _log_f_of_a(k: int, n: int, s: int, b: float, a: float) -> float:
    return (math.lgamma(k * n - s + b) + math.lgamma(s + a)
            - math.lgamma(k * n + a + b))


def check_monotonicity_a(k: int, n: int, s: int, b: float,
                         a_grid: tuple[float, ...]) -> CheckReport:
    """f(a) = Gamma(kn-s+b) Gamma(s+a) / Gamma(kn+a+b) is decreasing in a,
    and f(floor(a)) / f(ceil(a)) <= (1 + ceil(a) + b) * kn."""
    if not (2 <= s <= k * n):
        raise ValueError("need 2 <= s <= k*n")
    if any(a < 0 for a in a_grid):
        raise ValueError("a must be >= 0")
    grid = sorted(a_grid)
    logs = [_log_f_of_a(k, n, s, b, a) for a in grid]
    decreasing = all(_leq(logs[i + 1], logs[i]) for i in range(len(logs) - 1))
    ratio_ok = True
    for a in grid:
        lo, hi = math.floor(a), math.ceil(a)
        lhs = _log_f_of_a(k, n, s, b, lo) - _log_f_of_a(k, n, s, b, hi)
        ratio_ok &= _leq(lhs, math.log((1 + hi + b) * k * n))
    return CheckReport(
        name="monotonicity_a", holds=decreasing and ratio_ok,
        detail={"k": k, "n": n, "s": s, "b": b, "grid": list(grid),
                "decreasing": decreasing, "ratio_bound": ratio_ok})


def _falling_ratio(top: float, bottom: float, j: int) -> float:
    """prod_{i=0}^{j-1} (top - i) / (bottom - i), stable for 0 < top <= bottom."""
    out = 1.0
    for i in range(j):
        out *= (top - i) / (bottom - i)
    return out


def check_uj_deviation(k: int, n: int, p: float, m: float, s: int,
                       a: float, b: float, lam: float,
                       j_max: int) -> CheckReport:
    """|u_j - u~_j| <= j sqrt(lam log k / k) (c/m)^j with
    u_j = (s+a)_j / (km+a+b-1)_j, u~_j the same with knp+a on top, and
    c = 2 e^2 (3 lam + a + 1)."""
    if k < 2 or k * m < s:
        raise ValueError("need k >= 2 and km >= s")
    if lam < n * p:
        raise ValueError("need lam >= n*p")
    knp = k * n * p
    pre = abs(s - knp) <= math.sqrt(lam * k * math.log(k))
    if not pre:
        return CheckReport(name="uj_deviation", holds=True,
                           preconditions_met=False,
                           detail={"reason": "|s - knp| exceeds the "
                                             "concentration window"})
    c = 2.0 * _E2 * (3.0 * lam + a + 1.0)
    factor = math.sqrt(lam * math.log(k) / k)
    holds = True
    worst = None
    for j in range(1, j_max + 1):
        if j > s + a:
            break
        u = _falling_ratio(s + a, k * m + a + b - 1.0, j)
        ut = _falling_ratio(knp + a, k * m + a + b - 1.0, j)
        bound = j * factor * (c / m) ** j
        ok = _leq(abs(u - ut), bound)
        holds &= ok
        if not ok and worst is None:
            worst = j
    return CheckReport(
        name="uj_deviation", holds=holds,
        detail={"k": k, "n": n, "p": p, "m": m, "s": s, "a": a, "b": b,
                "lam": lam, "j_max": j_max, "first_violation_j": worst})


def check_utilde_bounds(k: int, n: int, p: float, m: float, a: float,
                        b: float, lam: float, j_max: int) -> CheckReport:
    """Size bounds on u~_j and the sign structure of t_j - u~_j.

    Checked claims (each guarded by its own preconditions):
      (i)   |u~_j| <= (c1/m)^j            for j <= 2 k lam + a,
            with c1 = 6 e^2 (lam + a)
      (ii)  u~_j <= (np/m)^j + j c2^j / k for j <= m,
            with c2 = 3 np + 2a + 2
      (iii) n > m: t_j - u~_j >= (np)^j (n-m) / (n m^{j+1}) - j c2^j / k
      (iv)  n < m: t_2 - u~_2 <= -c (m-n)/(n m^3) and t_j - u~_j <= 0
            for 2 <= j <= min(m, knp + a), with c = (np/(a+b+1))^2 / 2,
            applicable once k >= (1 + 1/np)^2 (2 lam (a+b+1))^4 and
            n <= lam k^{1/4}.
    """
    if k < 2 or lam < n * p:
        raise ValueError("need k >= 2 and lam >= n*p")
    np_ = n * p
    knp = k * np_
    c1 = 6.0 * _E2 * (lam + a)
    c2 = 3.0 * np_ + 2.0 * a + 2.0
    denom = k * m + a + b - 1.0

    results = {}
    holds = True

    ok = True
    for j in range(1, j_max + 1):
        if j > 2 * k * lam + a:
            break
        ut = _falling_ratio(knp + a, denom, j)
        ok &= _leq(abs(ut), (c1 / m) ** j)
    results["size_bound"] = ok
    holds &= ok

    ok = True
    for j in range(1, min(j_max, math.floor(m)) + 1):
        ut = _falling_ratio(knp + a, denom, j)
        ok &= _leq(ut, (np_ / m) ** j + j * c2**j / k)
    results["refined_size_bound"] = ok
    holds &= ok

    def t_j(j):
        # (n)_j p^j / (m)_j with a real-valued m
        return (falling_factorial_int(n, j) * p**j
                / math.prod(m - i for i in range(j)))

    if n > m:
        ok = True
        for j in range(2, min(j_max, math.floor(m), n) + 1):
            tj = t_j(j)
            ut = _falling_ratio(knp + a, denom, j)
            rhs = np_**j * (n - m) / (n * m ** (j + 1)) - j * c2**j / k
            ok &= _leq(rhs, tj - ut)
        results["gap_below"] = ok
        holds &= ok
    elif n < m:
        k_min = (1.0 + 1.0 / np_) ** 2 * (2.0 * lam * (a + b + 1.0)) ** 4
        applicable = k >= k_min and n <= lam * k ** 0.25
        results["gap_above_applicable"] = applicable
        if applicable:
            ok = True
            c = (np_ / (a + b + 1.0)) ** 2 / 2.0
            for j in range(2, min(j_max, math.floor(m), n,
                                  math.floor(knp + a)) + 1):
                tj = t_j(j)
                ut = _falling_ratio(knp + a, denom, j)
                if j == 2:
                    ok &= _leq(tj - ut, -c * (m - n) / (n * m**3))
                ok &= _leq(tj - ut, 0.0)
            results["gap_above"] = ok
            holds &= ok

    return CheckReport(name="utilde_bounds", holds=holds,
                       detail={"k": k, "n": n, "p": p, "m": m, "a": a,
                               "b": b, "lam": lam, **results})


def check_variance_bound(n: int, p: float, j: int) -> CheckReport:
    """Var[(X)_j] <= (2 j np (np+2))^j for X ~ Bin(n, p), exactly."""
    if not (1 <= j <= n <= 100):
        raise ValueError("need 1 <= j <= n <= 100")
    pf = Fraction(p)
    e1 = Fraction(0)
    e2 = Fraction(0)
    for x in range(n + 1):
        fall = falling_factorial_int(x, j) if x >= j else 0
        if fall:
            w = binomial_pmf_exact(n, pf, x)
            e1 += fall * w
            e2 += fall * fall * w
    var = e2 - e1 * e1
    np_ = n * pf
    bound = (2 * j * np_ * (np_ + 2)) ** j
    return CheckReport(name="variance_bound", holds=var <= bound,
                       detail={"n": n, "p": p, "j": j,
                               "var": float(var), "bound": float(bound)})


def binomial_cdf_exact(n: int, p: Fraction, x: int) -> Fraction:
    if x < 0:
        return Fraction(0)
    if x >= n:
        return Fraction(1)
    return sum(binomial_pmf_exact(n, p, t) for t in range(x + 1))


def check_max_tail_bounds(n: int, p: float, k: int, l: int) -> CheckReport:
    """Tail bounds on the sample maximum M_k of k Bin(n, p) draws.

    Low-max bound: P(M_k < min{l, n}) <= exp(-d_k) with
        d_k = min{ k e^{-l log(l/np)},  k np / (8 pi l^2 e^{l^2/np}) },
    requiring l > max(1, 4np). High-max bound: once k >= e^{3np},
    P(M_k <= 2 log k) >= (1 - 1/k^2)^k. Left sides use the exact binomial
    cdf; comparisons run in the log domain."""
    pf = Fraction(p)
    np_ = n * p
    detail = {"n": n, "p": p, "k": k, "l": l}
    holds = True

    low_ok = None
    low_pre = l > max(1.0, 4.0 * np_)
    detail["low_max_preconditions_met"] = low_pre
    if low_pre:
        t = min(l, n)
        cdf = binomial_cdf_exact(n, pf, t - 1)
        log_lhs = k * _log_of_fraction(cdf)
        d1 = k * math.exp(-l * math.log(l / np_))
        d2 = k * np_ / (8.0 * math.pi * l * l * math.exp(l * l / np_))
        d_k = min(d1, d2)
        low_ok = _leq(log_lhs, -d_k)
        detail["low_max"] = low_ok
        detail["d_k"] = d_k
        holds &= low_ok

    high_pre = k >= math.exp(3.0 * np_)
    detail["high_max_preconditions_met"] = high_pre
    if high_pre:
        t = math.floor(2.0 * math.log(k))
        cdf = binomial_cdf_exact(n, pf, t)
        log_lhs = k * _log_of_fraction(cdf)
        log_rhs = k * math.log1p(-1.0 / (k * k))
        high_ok = _leq(log_rhs, log_lhs)
        detail["high_max"] = high_ok
        holds &= high_ok

    return CheckReport(name="max_tail_bounds", holds=holds,
                       preconditions_met=low_pre or high_pre, detail=detail)


def _log_of_fraction(f: Fraction) -> float:
    if f <= 0:
        return -math.inf
    if f >= 1:
        return 0.0
    # accurate even when f is within a few ulp of 1
    return math.log1p(float(f - 1))


@dataclass
class LemmaSweepReport:
    lemma: str
    cases_run: int
    violations: list[dict]

    def to_json_dict(self) -> dict:
        return {"lemma": self.lemma, "cases_run": self.cases_run,
                "violations": self.violations}


# Fixed default grids: the sweep is part of the reproducible surface, so
# these constants are versioned here rather than generated.
DEFAULT_GRIDS = {
    "bell": {"r_max": 20},
    "moment_bound": {"n": (5, 20, 100), "p": (0.05, 0.3, 0.9),
                     "r": tuple(range(2, 9))},
    "falling_factorial": {"mn_max": 60},
    "monotonicity_a": {"cases": ((3, 4, 5, 1.0), (3, 4, 2, 0.5),
                                 (10, 12, 60, 3.7), (10, 12, 120, 1.0),
                                 (5, 8, 40, 2.0)),
                       "a_grid": (0.0, 0.5, 1.0, 2.0, 5.0)},
    "uj_deviation": {"cases": ((100, 10, 0.1, 8.0, 108, 1.0, 1.0, 1.0),
                               (100, 10, 0.1, 8.0, 100, 1.0, 1.0, 1.0),
                               (10000, 5, 0.05, 4.0, 2500, 2.0, 5.0, 0.25),
                               (10000, 10, 0.1, 20.0, 10000, 1.0, 1.0, 1.0)),
                     "j_max": 10},
    "utilde_bounds": {"k": (100, 10000), "n": (5, 10, 20, 40),
                      "m": (5.0, 10.0, 20.0, 40.0), "p": (0.05, 0.2),
                      "ab": ((1.0, 1.0), (2.0, 5.0)), "j_max": 8},
    "variance_bound": {"n": (5, 20, 60), "p": (0.05, 0.3),
                       "j": (1, 2, 3, 4, 5), "stress": (5, 0.9)},
    "max_tail_bounds": {"cases": ((30, 0.05, 10000, 7),
                                  (30, 0.05, 10000, 30),
                                  (10, 0.1, 100, 5),
                                  (10, 0.1, 2000, 5),
                                  (50, 0.02, 1000, 8))},
}


def run_default_sweep() -> list[LemmaSweepReport]:
    """Run every deterministic lemma check on its default grid."""
    reports = []

    g = DEFAULT_GRIDS["bell"]
    bells = bell_numbers(g["r_max"])
    cases = 0
    viol = []
    for r in range(1, g["r_max"] + 1):
        cases += 1
        if bells[r] > r**r:
            viol.append({"r": r, "claim": "B_r <= r^r"})
        if r > 1 and bells[r] <= bells[r - 1]:
            viol.append({"r": r, "claim": "B_r increasing"})
    reports.append(LemmaSweepReport("bell_numbers", cases, viol))

    g = DEFAULT_GRIDS["moment_bound"]
    cases = 0
    viol = []
    for n in g["n"]:
        for p in g["p"]:
            for r in g["r"]:
                cases += 1
                rep = check_moment_bound(n, p, r)
                if not rep.holds:
                    viol.append(rep.detail)
    reports.append(LemmaSweepReport("moment_bound", cases, viol))

    g = DEFAULT_GRIDS["falling_factorial"]
    cases = 0
    viol = []
    for m in range(2, g["mn_max"] + 1):
        for n in range(2, g["mn_max"] + 1):
            for j in range(1, min(m, n) + 1):
                cases += 1
                rep = check_falling_factorial(m, n, j)
                if not rep.holds:
                    viol.append(rep.detail)
    reports.append(LemmaSweepReport("falling_factorial", cases, viol))

    g = DEFAULT_GRIDS["monotonicity_a"]
    cases = 0
    viol = []
    for (k, n, s, b) in g["cases"]:
        cases += 1
        rep = check_monotonicity_a(k, n, s, b, g["a_grid"])
        if not rep.holds:
            viol.append(rep.detail)
    reports.append(LemmaSweepReport("monotonicity_a", cases, viol))

    g = DEFAULT_GRIDS["uj_deviation"]
    cases = 0
    viol = []
    for (k, n, p, m, s, a, b, lam) in g["cases"]:
        cases += 1
        rep = check_uj_deviation(k, n, p, m, s, a, b,
                                 max(lam, n * p), g["j_max"])
        if rep.preconditions_met and not rep.holds:
            viol.append(rep.detail)
    reports.append(LemmaSweepReport("uj_deviation", cases, viol))

    g = DEFAULT_GRIDS["utilde_bounds"]
    cases = 0
    viol = []
    for k in g["k"]:
        for n in g["n"]:
            for m in g["m"]:
                if n == m:
                    continue
                for p in g["p"]:
                    for (a, b) in g["ab"]:
                        cases += 1
                        rep = check_utilde_bounds(k, n, p, m, a, b,
                                                  n * p, g["j_max"])
                        if not rep.holds:
                            viol.append(rep.detail)
    reports.append(LemmaSweepReport("utilde_bounds", cases, viol))

    g = DEFAULT_GRIDS["variance_bound"]
    cases = 0
    viol = []
    for n in g["n"]:
        for p in g["p"]:
            for j in g["j"]:
                cases += 1
                rep = check_variance_bound(n, p, j)
                if not rep.holds:
                    viol.append(rep.detail)
    n_s, p_s = g["stress"]
    cases += 1
    rep = check_variance_bound(n_s, p_s, n_s)
    if not rep.holds:
        viol.append(rep.detail)
    reports.append(LemmaSweepReport("variance_bound", cases, viol))

    g = DEFAULT_GRIDS["max_tail_bounds"]
    cases = 0
    viol = []
    for (n, p, k, l) in g["cases"]:
        cases += 1
        rep = check_max_tail_bounds(n, p, k, l)
        if not rep.holds:
            viol.append(rep.detail)
    reports.append(LemmaSweepReport("max_tail_bounds", cases, viol))

    return reports

