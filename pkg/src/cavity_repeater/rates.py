"""Closed-form performance model of the multiplexed repeater chain.

Distances are in km, times in seconds, ``c_fiber`` in m/s.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy


class ParameterError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class RepeaterParams:
    t_coh: float = 10.0
    eta_s: float = 0.8
    t_CN: float = 10e-6
    eta_d: float = 0.99
    eta_c: float = 0.99
    p_CN: float = 0.99
    L_att: float = 22.0
    epsilon_CN: float = 1e-4
    c_fiber: float = 2e8

    def __post_init__(self):
        for name in ("eta_s", "eta_d", "eta_c", "p_CN"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and 0.0 < v <= 1.0):
                raise ParameterError(name, f"must be in (0, 1], got {v!r}")
        if not (isinstance(self.epsilon_CN, (int, float)) and 0.0 <= self.epsilon_CN < 1.0):
            raise ParameterError("epsilon_CN", f"must be in [0, 1), got {self.epsilon_CN!r}")
        for name in ("t_coh", "t_CN", "L_att", "c_fiber"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0):
                raise ParameterError(name, f"must be positive, got {v!r}")

    def with_(self, **kw) -> "RepeaterParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class ChainTopology:
    L: float = 1000.0
    n: int = 7
    n_m: int = 10
    n_s: int = 5

    def __post_init__(self):
        if not (isinstance(self.L, (int, float)) and self.L >= 0):
            raise ParameterError("L", f"must be non-negative, got {self.L!r}")
        for name in ("n", "n_m", "n_s"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and not isinstance(v, bool) and v >= 1):
                raise ParameterError(name, f"must be an integer >= 1, got {v!r}")

    @property
    def links(self) -> int:
        return 2 ** (self.n - 1)

    @property
    def link_length(self) -> float:
        return self.L / self.links

    def with_(self, **kw) -> "ChainTopology":
        return replace(self, **kw)


REPORT_FIELDS = ("p0", "q_swap_photon", "N_avg", "T_tot_s", "F_avg", "Q", "f", "R_hz", "R_eff_hz", "n_CN")


@dataclass(frozen=True)
class RateReport:
    p0: float
    q_swap_photon: float
    N_avg: float
    T_tot: float
    F_avg: float
    Q: float
    f: float
    R: float
    R_eff: float
    n_CN: float
    # capped swap success used for the pair count vs. expected attempts used for time and fidelity
    swap_success_capped: float
    swap_attempt_factor: float

    def to_dict(self) -> dict[str, float]:
        return {
            "p0": self.p0,
            "q_swap_photon": self.q_swap_photon,
            "N_avg": self.N_avg,
            "T_tot_s": self.T_tot,
            "F_avg": self.F_avg,
            "Q": self.Q,
            "f": self.f,
            "R_hz": self.R,
            "R_eff_hz": self.R_eff,
            "n_CN": self.n_CN,
        }


def q_swap_photon(p: RepeaterParams) -> float:
    """Probability that one parity photon is registered."""
    return p.eta_d * p.eta_s * p.eta_c**2 * p.p_CN**2


def swap_attempt_factor(p: RepeaterParams) -> float:
    """Expected CNOT operations per swap, 4 / (eta_d^2 eta_s^2 eta_c^4 p_CN^4)."""
    return 4.0 / q_swap_photon(p) ** 2


def swap_success(q: float, n_s: int) -> float:
    """Both parity photons registered within ``n_s`` attempts each."""
    return (1.0 - (1.0 - q) ** n_s) ** 2


def link_probability(p: RepeaterParams, t: ChainTopology) -> float:
    return p.p_CN**2 * p.eta_c**2 * p.eta_d * p.eta_s * math.exp(-t.link_length / p.L_att)


def _binom_pmf(n_m: int, p0: float) -> np.ndarray:
    j = np.arange(n_m + 1)
    log_c = gammaln(n_m + 1) - gammaln(j + 1) - gammaln(n_m - j + 1)
    return np.exp(log_c + xlogy(j, p0) + xlog1py(n_m - j, -p0))


def expected_pairs(p0: float, t: ChainTopology, q_swap_success: float) -> float:
    """Average number of end-to-end pairs per cycle.

    The bracket is the expected minimum over the elementary links of their
    Binomial(n_m, p0) success counts; it is multiplied by the probability
    that every one of the 2^{n-1}-1 swaps succeeds within n_s photons each.
    """
    for name, v in (("p0", p0), ("q_swap_success", q_swap_success)):
        if not 0.0 <= v <= 1.0:
            raise ParameterError(name, f"must be in [0, 1], got {v!r}")
    n_m, links = t.n_m, t.links
    pmf = _binom_pmf(n_m, p0)
    k = np.arange(1, links + 1)
    log_ck = gammaln(links + 1) - gammaln(k + 1) - gammaln(links - k + 1)
    terms = [n_m * math.exp(xlogy(n_m * links, p0))]
    for i in range(1, n_m):
        exactly = pmf[i]
        above = math.fsum(pmf[i + 1 :])
        s = math.fsum(np.exp(log_ck + xlogy(k, exactly) + xlogy(links - k, above)))
        terms.append(i * s)
    swap = (1.0 - (1.0 - q_swap_success) ** t.n_s) ** (2 * (links - 1))
    return math.fsum(terms) * swap


def generation_window(p: RepeaterParams, t: ChainTopology) -> float:
    return 2 * p.t_CN + 2 * t.L * 1e3 / (t.links * p.c_fiber)


def swap_stage_windows(p: RepeaterParams, t: ChainTopology) -> list[tuple[float, float]]:
    """(swap operations, feed-forward) time for stages i = 0 .. n-2."""
    ops = swap_attempt_factor(p) * p.t_CN
    return [(ops, 2**i * t.L * 1e3 / (t.links * p.c_fiber)) for i in range(t.n - 1)]


def cycle_time(p: RepeaterParams, t: ChainTopology) -> float:
    parts = [generation_window(p, t)]
    for ops, ff in swap_stage_windows(p, t):
        parts += [ops, ff]
    return math.fsum(parts)


def elapsed_before_layer(p: RepeaterParams, t: ChainTopology, k: int) -> float:
    """Time elapsed when swap layer ``k`` starts (k = 1 is the first layer)."""
    stages = swap_stage_windows(p, t)[: k - 1]
    return math.fsum([generation_window(p, t)] + [a + b for a, b in stages])


def fidelity_cascade(p: RepeaterParams, t: ChainTopology) -> float:
    """Lower-bound fidelity of a delivered pair (product of gate and memory factors)."""
    n = t.n
    a = swap_attempt_factor(p)
    log_gate = math.log1p(-p.epsilon_CN)
    logs = [2**n * log_gate]
    if n >= 2:
        logs.append(a * 2 ** (n - 2) * (log_gate - elapsed_before_layer(p, t, 1) / p.t_coh))
        for k in range(2, n):
            logs.append(a * 2 ** (n - k - 1) * (log_gate - elapsed_before_layer(p, t, k) / p.t_coh))
    logs.append(-cycle_time(p, t) / p.t_coh)
    return math.exp(math.fsum(logs))


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def six_state_fraction(Q: float) -> float:
    if not 0.0 <= Q < 1.0:
        raise ParameterError("Q", f"must be in [0, 1), got {Q!r}")
    arg = (1 - 1.5 * Q) / (1 - Q)
    if arg < 0.0:
        return 0.0
    return max((1 - Q) * (1 - binary_entropy(arg)) - binary_entropy(Q), 0.0)


def cnot_count(p: RepeaterParams, t: ChainTopology) -> float:
    return 2**t.n + swap_attempt_factor(p) * (2 ** (t.n - 1) - 1)


def key_rate(p: RepeaterParams, t: ChainTopology) -> RateReport:
    p0 = link_probability(p, t)
    q = q_swap_photon(p)
    n_avg = expected_pairs(p0, t, q)
    t_tot = cycle_time(p, t)
    f_avg = fidelity_cascade(p, t)
    qber = 1.0 - f_avg
    frac = six_state_fraction(qber) if qber < 1.0 else 0.0
    r = n_avg * frac / t_tot
    r_eff = r / (2**t.n * t.n_m) * (t.L / p.L_att)
    return RateReport(
        p0=p0,
        q_swap_photon=q,
        N_avg=n_avg,
        T_tot=t_tot,
        F_avg=f_avg,
        Q=qber,
        f=frac,
        R=r,
        R_eff=r_eff,
        n_CN=cnot_count(p, t),
        swap_success_capped=swap_success(q, t.n_s),
        swap_attempt_factor=swap_attempt_factor(p),
    )


@dataclass(frozen=True)
class DepthOptimum:
    n: int
    report: RateReport
    rates: tuple[tuple[int, float], ...]
    all_zero: bool = False


def optimize_depth(
    p: RepeaterParams,
    L: float,
    n_m: int,
    n_range: tuple[int, int] = (1, 12),
    n_s: int = 5,
) -> DepthOptimum:
    """Nesting depth maximizing the secret key rate; ties go to the smaller n."""
    lo, hi = n_range
    if lo < 1 or hi < lo:
        raise ParameterError("n_range", f"invalid range {n_range!r}")
    reports = {n: key_rate(p, ChainTopology(L=L, n=n, n_m=n_m, n_s=n_s)) for n in range(lo, hi + 1)}
    rates = tuple((n, r.R) for n, r in reports.items())
    best = max(reports, key=lambda n: (reports[n].R, -n))
    if reports[best].R <= 0.0:
        return DepthOptimum(lo, reports[lo], rates, all_zero=True)
    return DepthOptimum(best, reports[best], rates)


def params_dict(p: RepeaterParams) -> dict:
    return asdict(p)


PARAM_FIELDS = tuple(f.name for f in fields(RepeaterParams))
TOPOLOGY_FIELDS = tuple(f.name for f in fields(ChainTopology))
