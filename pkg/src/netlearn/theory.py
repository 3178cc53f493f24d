"""Benchmark learning rates and bounds.

The autarky rate is the Chernoff information between the two conditional
signal distributions,

    r_a = max_{z in [0, 1]} -log sum_w mu_g(w)^z mu_b(w)^(1-z),

which for symmetric binary signals equals -log(2 sqrt(p (1 - p))).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .curves import MistakeCurve
from .errors import ConfigError
from .inference.core import TIE_ACTION, count_threshold
from .signals import B, G, SignalDist, SignalModel, binary_llrs, compute_M

GOLDEN = (math.sqrt(5) - 1) / 2
Z_TOL = 1e-10
MAX_ITER = 200
RATE_FLOOR = 1e-12  # below this the two distributions agree to rounding


@dataclass(frozen=True)
class RateBounds:
    r_a: float
    M: float

    def public_benchmark(self, n: int) -> float:
        """Learning rate of n agents sharing all signals publicly."""
        return n * self.r_a

    def to_dict(self) -> dict:
        return {"r_a": self.r_a, "M": self.M}


def chernoff_objective(dist: SignalDist, z: float) -> float:
    """-log sum_w mu_g(w)^z mu_b(w)^(1-z), summed over the common support."""
    pos = dist.pg > 0
    terms = z * np.log(dist.pg[pos]) + (1 - z) * np.log(dist.pb[pos])
    return -float(logsumexp(terms))


def golden_section_max(f, lo: float, hi: float, tol: float = Z_TOL, max_iter: int = MAX_ITER):
    """Maximize a unimodal ``f`` on [lo, hi]; returns (argmax, max)."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    # the objective vanishes at both ends, so compare against them too
    candidates = [(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)]
    best_f, best_z = max(candidates)
    return best_z, best_f


def autarky_rate(model: SignalModel) -> float:
    if not model.stationary:
        raise ConfigError("the autarky rate is defined for stationary signal models only")
    _, value = golden_section_max(lambda z: chernoff_objective(model.default, z), 0.0, 1.0)
    return value if value > RATE_FLOOR else 0.0


def rate_bounds(model: SignalModel) -> RateBounds:
    return RateBounds(autarky_rate(model), compute_M(model))


def crossover_n(model: SignalModel) -> int:
    """Smallest n for which the public-signal rate n * r_a exceeds M."""
    b = rate_bounds(model)
    if b.r_a <= 0:
        raise ConfigError("uninformative signals: n * r_a never exceeds M")
    n = int(math.floor(b.M / b.r_a)) + 1
    while (n - 1) * b.r_a > b.M:
        n -= 1
    while n * b.r_a <= b.M:
        n += 1
    return n


def _log_binom_pmf(t: int, q: float) -> np.ndarray:
    k = np.arange(t + 1)
    with np.errstate(divide="ignore"):
        return (gammaln(t + 1) - gammaln(k + 1) - gammaln(t - k + 1)
                + k * np.log(q) + (t - k) * np.log1p(-q))


def single_agent_exact_mistakes(model: SignalModel, T: int, tie_action: int = TIE_ACTION) -> MistakeCurve:
    """Exact mistake curve of a lone myopic agent with i.i.d. binary signals.

    The agent plays g at period t iff its count k of g-leaning signals
    satisfies ``k * l1 + (t - k) * l0 >= 0`` (ties go to ``tie_action``).
    """
    if T < 1:
        raise ConfigError("T must be >= 1")
    l1, l0 = binary_llrs(model)
    q_g = model.default.pg[1]
    q_b = model.default.pb[1]
    log_p = np.empty((2, 1, T))
    for t in range(1, T + 1):
        k = np.arange(t + 1)
        thr = int(count_threshold(k * l1 + (t - k) * l0, 0.0, tie_action))
        lg = _log_binom_pmf(t, q_g)
        lb = _log_binom_pmf(t, q_b)
        # mistake under g: k < thr ; under b: k >= thr
        log_p[G, 0, t - 1] = logsumexp(lg[:thr]) if thr > 0 else -np.inf
        log_p[B, 0, t - 1] = logsumexp(lb[thr:]) if thr <= t else -np.inf
    return MistakeCurve("analytic", 1, T, log_p=log_p)
