"""Learning-rate estimates from mistake curves and their comparison to the bounds.

The speed of learning is proxied by the slope of ``-log P[a_t != Theta]``
over a window of periods.  Monte Carlo windows only use cells with enough
mistakes for ``log P_hat`` to be meaningful.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .curves import MistakeCurve
from .errors import ConfigError
from .network import Network, is_strongly_connected, sink_components
from .theory import RateBounds

METHODS = ("ols_log", "endpoint")
DEFAULT_FLOOR = 50
DEFAULT_BOOTSTRAP = 1000
MIN_CHUNKS_FOR_RESAMPLING = 20
SE_SLACK = 2.0
RATE_COLUMNS = ("agent", "t_min", "t_max", "rate", "se", "method", "r_squared", "curvature", "points")


@dataclass
class RateEstimate:
    agent: str
    t_min: int
    t_max: int
    rate: float  # nats per period
    se: float
    method: str
    r_squared: float = float("nan")
    curvature: float = float("nan")  # quadratic coefficient of -log P on t
    points: int = 0
    boot: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in RATE_COLUMNS}


def auto_window(curve: MistakeCurve, agent: int, floor: int = DEFAULT_FLOOR) -> tuple[int, int]:
    """Largest contiguous period range whose cells all qualify.

    Monte Carlo cells qualify with at least ``floor`` mistakes; exact cells
    with a positive probability.  Ties in length go to the earliest range.
    """
    if curve.exact:
        ok = np.isfinite(curve.log_p_hat()[agent])
    else:
        ok = curve.counts()[0][agent] >= floor
    best, start = (0, 0), None
    for k, flag in enumerate(list(ok) + [False]):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            if k - start > best[1] - best[0]:
                best = (start, k)
            start = None
    if best[1] - best[0] < 2:
        raise ConfigError(f"agent {curve.labels[agent]}: no window of two or more qualifying periods "
                          f"(floor {floor})")
    return best[0] + 1, best[1]


def _slope(ts: np.ndarray, y: np.ndarray, method: str) -> float:
    if method == "endpoint":
        return float((y[-1] - y[0]) / (ts[-1] - ts[0]))
    return float(np.polyfit(ts, y, 1)[0])


def _bootstrap_log_p(curve: MistakeCurve, agent: int, ks: np.ndarray, n_boot: int, seed: int) -> np.ndarray:
    """Resampled log P_hat over window cells, shape (n_boot, len(ks)).

    Resamples whole chunks of trials so correlations across periods are
    kept; with too few chunks, falls back to independent binomial draws.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xB007,)))
    cm = curve.chunk_mistakes[:, :, agent, :][:, :, ks].sum(axis=1)  # (C, window)
    ct = curve.chunk_trials.sum(axis=1)  # (C,)
    C = len(ct)
    if C >= MIN_CHUNKS_FOR_RESAMPLING:
        w = rng.multinomial(C, np.full(C, 1.0 / C), size=n_boot).astype(float)
        m = w @ cm
        n = w @ ct
        p = m / n[:, None]
    else:
        m_tot = cm.sum(axis=0)
        n_tot = int(ct.sum())
        p = rng.binomial(n_tot, m_tot / n_tot, size=(n_boot, len(ks))) / n_tot
    with np.errstate(divide="ignore"):
        return np.log(p)


def estimate_rate(
    curve: MistakeCurve,
    agent: int = 0,
    window: tuple[int, int] | None = None,
    method: str = "ols_log",
    floor: int = DEFAULT_FLOOR,
    n_boot: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
) -> RateEstimate:
    """Fit the decay rate of agent ``agent``'s unconditional mistake curve.

    ``window=None`` picks :func:`auto_window`.  Monte Carlo standard errors
    come from a bootstrap over trial chunks; exact curves report ``se = 0``.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    if not 0 <= agent < curve.n:
        raise ConfigError(f"agent {agent} out of range")
    t_min, t_max = window if window is not None else auto_window(curve, agent, floor)
    if not 1 <= t_min < t_max <= curve.T:
        raise ConfigError(f"window [{t_min}, {t_max}] invalid for horizon {curve.T}")
    ts = np.arange(t_min, t_max + 1)
    ks = ts - 1
    lp = curve.log_p_hat()[agent, ks]
    if not curve.exact:
        m = curve.counts()[0][agent, ks]
        keep = m >= floor
    else:
        keep = np.isfinite(lp)
    ts, ks, lp = ts[keep], ks[keep], lp[keep]
    if len(ts) < 2:
        raise ConfigError(f"window [{t_min}, {t_max}] has fewer than two usable cells")
    y = -lp
    rate = _slope(ts, y, method)
    r2 = curvature = float("nan")
    if len(ts) >= 3 and np.ptp(y) > 0:
        r2 = float(stats.linregress(ts, y).rvalue ** 2)
        curvature = float(np.polyfit(ts, y, 2)[0])
    elif len(ts) == 2:
        r2 = 1.0
    se = 0.0
    boot = None
    if not curve.exact:
        blp = _bootstrap_log_p(curve, agent, ks, n_boot, seed)
        finite = np.all(np.isfinite(blp), axis=1)
        boot = np.full(n_boot, np.nan)
        if finite.any():
            X = ts - ts.mean()
            if method == "endpoint":
                boot[finite] = -(blp[finite, -1] - blp[finite, 0]) / (ts[-1] - ts[0])
            else:
                boot[finite] = -(blp[finite] - blp[finite].mean(axis=1, keepdims=True)) @ X / (X @ X)
            se = float(np.nanstd(boot, ddof=1)) if finite.sum() > 1 else float("inf")
        else:
            se = float("inf")
    return RateEstimate(curve.labels[agent], int(ts[0]), int(ts[-1]), rate, se, method,
                        r2, curvature, len(ts), boot)


def common_window(curve: MistakeCurve, agents, floor: int = DEFAULT_FLOOR) -> tuple[int, int]:
    """Intersection of the agents' automatic windows."""
    wins = [auto_window(curve, a, floor) for a in agents]
    lo = max(w[0] for w in wins)
    hi = min(w[1] for w in wins)
    if hi - lo < 1:
        raise ConfigError(f"automatic windows {wins} share fewer than two periods")
    return lo, hi


def estimate_rates(curve: MistakeCurve, agents=None, window=None, shared_window: bool = True,
                   floor: int = DEFAULT_FLOOR, **kw) -> list[RateEstimate]:
    """:func:`estimate_rate` for several agents with a shared bootstrap seed.

    With ``shared_window`` (default) and no explicit window, every agent is
    fitted on the same periods so that rates are comparable.
    """
    agents = list(range(curve.n) if agents is None else agents)
    if window is None and shared_window:
        window = common_window(curve, agents, floor)
    return [estimate_rate(curve, a, window=window, floor=floor, **kw) for a in agents]


def joint_se(a: RateEstimate, b: RateEstimate) -> float:
    """Standard error of ``a.rate - b.rate``.

    Uses paired bootstrap replicates when both carry them (same resampling
    seed), else treats the two estimates as independent.
    """
    if a.boot is not None and b.boot is not None and len(a.boot) == len(b.boot):
        d = a.boot - b.boot
        d = d[np.isfinite(d)]
        if len(d) > 1:
            return float(np.std(d, ddof=1))
    return math.hypot(a.se, b.se)


def compare_to_bounds(estimates: list[RateEstimate], bounds: RateBounds, net: Network) -> dict:
    """Verdict on estimated rates against M, r_a and the public benchmark n * r_a."""
    if len(estimates) != net.n:
        raise ConfigError(f"need one estimate per agent ({net.n}), got {len(estimates)}")
    M = bounds.M
    public = bounds.public_benchmark(net.n)
    agents = []
    for e in estimates:
        agents.append({
            "agent": e.agent, "rate": e.rate, "se": e.se, "window": [e.t_min, e.t_max],
            "within_M": bool(e.rate <= M + SE_SLACK * e.se),
            "over_autarky": e.rate / bounds.r_a if bounds.r_a > 0 else float("nan"),
            "over_public_benchmark": e.rate / public if public > 0 else float("nan"),
        })
    lo = min(estimates, key=lambda e: e.rate)
    hi = max(estimates, key=lambda e: e.rate)
    spread = hi.rate - lo.rate
    spread_se = joint_se(hi, lo)
    strongly = is_strongly_connected(net)
    verdict = {
        "M": M,
        "r_a": bounds.r_a,
        "public_benchmark": public,
        "bound_binding": bool(public > M),
        "strongly_connected": strongly,
        "agents": agents,
        "all_within_M": all(a["within_M"] for a in agents),
        "min_rate": lo.rate,
        "min_rate_agent": lo.agent,
        "min_within_M": bool(lo.rate <= M + SE_SLACK * lo.se),
        "spread": spread,
        "spread_joint_se": spread_se,
        "equal_rates": bool(spread <= SE_SLACK * spread_se),
        "sink_components": [sorted(c) for c in sink_components(net)],
    }
    if strongly:
        verdict["bound_check"] = "pass" if verdict["all_within_M"] else "fail"
    else:
        verdict["bound_check"] = "pass" if verdict["min_within_M"] else "fail"
    return verdict


def write_rates_csv(estimates: list[RateEstimate], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RATE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for e in estimates:
            row = e.to_dict()
            for k in ("rate", "se", "r_squared", "curvature"):
                row[k] = repr(float(row[k]))
            w.writerow(row)
