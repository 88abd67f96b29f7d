"""Stochastic SIR spread with degree pruning, on one or two communities.

At epoch ``t`` each infected node meets each susceptible with probability
``d gamma^t / n`` and transmits with probability ``beta``; infected nodes
recover after one epoch. Edges are revealed only when they could transmit,
so the new infections in an epoch are a single binomial draw.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import IO, Iterable, Optional

import numpy as np


@dataclass(frozen=True)
class SimConfigSingle:
    """One community of ``n`` nodes with mean degree ``d`` and pruning rate ``gamma``."""

    n: int
    d: float
    beta: float
    gamma: float
    horizon: int
    seed: int = 0

    def __post_init__(self):
        _check_common(self.n, self.beta, self.gamma, self.horizon)
        if not self.d > 0:
            raise ValueError("d must be positive")
        if self.d * self.beta / self.n > 1:
            raise ValueError("d * beta / n must not exceed 1 (edge probability)")


@dataclass(frozen=True)
class SimConfigTwo:
    """Two communities of ``n`` nodes each, with within and between mean degrees."""

    n: int
    d_in: float
    d_out: float
    beta: float
    gamma: float
    horizon: int
    seed: int = 0

    def __post_init__(self):
        _check_common(self.n, self.beta, self.gamma, self.horizon)
        if not self.d_in > 0 or self.d_out < 0:
            raise ValueError("d_in must be positive and d_out nonnegative")
        if max(self.d_in, self.d_out) * self.beta / self.n > 1:
            raise ValueError("d * beta / n must not exceed 1 (edge probability)")
        if self.n < 2 * self.beta * self.d_out:
            raise ValueError("n must be at least 2 * beta * d_out")
        if self.d_out > self.d_in:
            warnings.warn("d_out exceeds d_in", RuntimeWarning, stacklevel=3)


def _check_common(n, beta, gamma, horizon):
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")


@dataclass(frozen=True)
class Trajectory:
    """New infections per epoch.

    ``counts2`` and ``crossing_time`` are set for two-community runs;
    ``crossing_time`` is None when community 2 was never reached.
    """

    counts: np.ndarray
    counts2: Optional[np.ndarray] = None
    crossing_time: Optional[int] = None


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent counter-based stream for one trial of an ensemble."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial,))))


def infection_probability(rate: float, infected: int) -> float:
    """``1 - (1 - rate)^infected``: chance a susceptible is hit by at least one contact."""
    if infected <= 0 or rate <= 0:
        return 0.0
    if rate >= 1:
        return 1.0
    return -math.expm1(infected * math.log1p(-rate))


def step_single(susceptible: int, infected: int, t: int, cfg: SimConfigSingle, rng: np.random.Generator) -> int:
    """New infections at epoch ``t + 1``."""
    p = infection_probability(cfg.d * cfg.beta * cfg.gamma**t / cfg.n, infected)
    return int(rng.binomial(susceptible, p)) if p > 0 else 0


def simulate_single(cfg: SimConfigSingle, trial: int = 0) -> Trajectory:
    """Run one community from a single infected node for ``cfg.horizon`` epochs."""
    rng = trial_rng(cfg.seed, trial)
    counts = np.zeros(cfg.horizon + 1, dtype=np.int64)
    counts[0] = infected = 1
    susceptible = cfg.n - 1
    for t in range(cfg.horizon):
        infected = step_single(susceptible, infected, t, cfg, rng)
        susceptible -= infected
        counts[t + 1] = infected
    return Trajectory(counts)


def simulate_two(cfg: SimConfigTwo, trial: int = 0) -> Trajectory:
    """Run the two-community model from one infected node in community 1.

    Community 2 starts its own pruning clock at the crossing time ``T``, the
    first epoch with an infection there. From then on, its internal spread and
    its infections back into community 1 decay as ``gamma^(t - T)``.
    Infections from community 1 into community 2 follow community 1's clock.
    """
    rng = trial_rng(cfg.seed, trial)
    n, beta, g = cfg.n, cfg.beta, cfg.gamma
    n1 = np.zeros(cfg.horizon + 1, dtype=np.int64)
    n2 = np.zeros(cfg.horizon + 1, dtype=np.int64)
    n1[0] = 1
    s1, s2 = n - 1, n
    T: Optional[int] = None
    for t in range(cfg.horizon):
        i1, i2 = int(n1[t]), int(n2[t])
        in1 = cfg.d_in * beta * g**t / n
        out1 = cfg.d_out * beta * g**t / n
        if T is None:
            in2 = out2 = 0.0
        else:
            in2 = cfg.d_in * beta * g ** (t - T) / n
            out2 = cfg.d_out * beta * g ** (t - T) / n
        # a susceptible escapes only if every infected contact fails
        p1 = _combined(in1, i1, out2, i2)
        p2 = _combined(out1, i1, in2, i2)
        new1 = int(rng.binomial(s1, p1)) if p1 > 0 else 0
        new2 = int(rng.binomial(s2, p2)) if p2 > 0 else 0
        s1 -= new1
        s2 -= new2
        n1[t + 1], n2[t + 1] = new1, new2
        if T is None and new2 > 0:
            T = t + 1
    return Trajectory(n1, n2, T)


def _combined(rate_a: float, count_a: int, rate_b: float, count_b: int) -> float:
    log_escape = 0.0
    for rate, count in ((rate_a, count_a), (rate_b, count_b)):
        if count > 0 and rate > 0:
            if rate >= 1:
                return 1.0
            log_escape += count * math.log1p(-rate)
    return -math.expm1(log_escape)


def simulate_ensemble(cfg: SimConfigSingle, trials: int) -> np.ndarray:
    """Counts of ``trials`` independent single-community runs, shape ``(trials, horizon + 1)``."""
    return np.stack([simulate_single(cfg, i).counts for i in range(trials)])


def simulate_two_ensemble(cfg: SimConfigTwo, trials: int) -> list[Trajectory]:
    return [simulate_two(cfg, i) for i in range(trials)]


def expected_cases(d: float, beta: float, gamma: float, t):
    """Mean-field infections at epoch ``t``: ``(d beta)^t gamma^(t(t-1)/2)``."""
    t = np.asarray(t, dtype=float)
    out = np.exp(t * math.log(d * beta) + 0.5 * t * (t - 1.0) * math.log(gamma))
    return out if out.ndim else float(out)


def second_moment_bound(d: float, beta: float, gamma: float, t: int) -> float:
    """Upper bound on ``E[N(t)^2]``.

    Equal to the recursion ``Q(t+1) = m(t+1) + (d beta gamma^t)^2 Q(t)`` with
    ``Q(0) = 1`` and ``m`` the mean-field count, unrolled.
    """
    if t == 0:
        return 1.0
    db = d * beta
    total = expected_cases(d, beta, gamma, t) + db ** (2 * t) * gamma ** (t * (t - 1))
    for tp in range(1, t):
        prod = math.prod((db * gamma**tau) ** 2 for tau in range(tp, t))
        total += expected_cases(d, beta, gamma, tp) * prod
    return float(total)


def finite_population_deficit(n: int, d: float, beta: float, gamma: float, t: int) -> float:
    """Upper bound on ``expected_cases(t) - E[N(t)]`` caused by susceptible depletion.

    With ``p = d beta gamma^s / n``, the bound ``1 - (1-p)^N >= Np - (Np)^2 / 2`` and
    ``n - sum_{u<=s} N(u)`` susceptibles give, for the deficit ``D``,
    ``D(s+1) <= d beta gamma^s D(s) + p sum_{u<=s} E[N(s) N(u)] + (d beta gamma^s)^2 E[N(s)^2] / 2n``.
    The cross moments are bounded by Cauchy-Schwarz and :func:`second_moment_bound`.
    """
    q = [second_moment_bound(d, beta, gamma, s) for s in range(t + 1)]
    deficit = 0.0
    for s in range(t):
        rate = d * beta * gamma**s
        cross = sum(math.sqrt(q[s] * q[u]) for u in range(s + 1))
        deficit = rate * deficit + rate * cross / n + rate * rate * q[s] / (2.0 * n)
    return deficit


def peak_time_c1(d: float, beta: float, gamma: float) -> float:
    """Real epoch maximizing :func:`expected_cases`, ``-log(d beta / sqrt(gamma)) / log(gamma)``."""
    growth = d * beta / math.sqrt(gamma)
    if growth <= 1:
        warnings.warn("d * beta <= sqrt(gamma): no growth phase, peak at t <= 0", RuntimeWarning, stacklevel=2)
    return -math.log(growth) / math.log(gamma)


def concentration_bound(d: float, beta: float, gamma: float, eps: float, t: int) -> tuple[float, float]:
    """Threshold that ``N(t)`` stays below and a lower bound on that probability."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    threshold = math.exp(0.5 * math.log(gamma) * t * t + math.log(d * beta / math.sqrt(gamma)) * (1.0 + eps) * t)
    k = min(eps * eps, eps) * d * beta / 4.0
    prob = 1.0 - sum(math.exp(-k * gamma**s) for s in range(t))
    return threshold, prob


@dataclass(frozen=True)
class CrossingReport:
    """Conditions under which community 2 stays uninfected past ``threshold``.

    The guarantee holds with probability at least ``probability_floor``.
    """

    c1: float
    peak_bound: float
    d_out_limit: float
    conditions: dict
    threshold: float
    probability_floor: float
    mixture_a: float
    mixture_M: float

    @property
    def all_hold(self) -> bool:
        return all(self.conditions.values())

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["all_hold"] = self.all_hold
        return out


def crossing_bound_check(cfg: SimConfigTwo, delta: float) -> CrossingReport:
    """Evaluate the three sufficient conditions for a late first crossing.

    Also reports the curvature and height of the Gaussian that community 1's
    mean-field curve traces.
    """
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    g, beta, d_in = cfg.gamma, cfg.beta, cfg.d_in
    c1 = peak_time_c1(d_in, beta, g)
    lag = math.log(20.0) / math.log(1.0 / g)
    peak_bound = delta * math.exp(5.0 * math.sqrt(g)) + lag
    s_max = math.floor(-math.log(d_in * beta / (20.0 * math.sqrt(g))) / math.log(g)) - 1
    series = sum((2.0 * d_in * beta) ** s * g ** (s * (s + 1) / 2.0) for s in range(s_max + 1))
    d_out_limit = math.log(1.0 / (1.0 - delta)) / (2.0 * beta * series) if series > 0 else math.inf
    conditions = {
        "peak_late_enough": c1 < peak_bound,
        "d_out_small": cfg.d_out <= d_out_limit,
        "population_large": cfg.n >= 2.0 * beta * cfg.d_out,
    }
    log_growth = math.log(d_in * beta / math.sqrt(g))
    return CrossingReport(
        c1=c1,
        peak_bound=peak_bound,
        d_out_limit=d_out_limit,
        conditions=conditions,
        threshold=c1 - lag,
        probability_floor=1.0 - 2.0 * delta,
        mixture_a=0.5 * math.log(1.0 / g),
        mixture_M=math.exp(0.5 * log_growth**2 / math.log(1.0 / g)),
    )


CSV_COLUMNS = ("trial", "t", "n1", "n2", "crossing_time")


def write_ensemble_csv(trajectories: Iterable[Trajectory], fh: IO[str]) -> None:
    """Write one row per trial and epoch; single-community rows leave n2 and crossing_time blank."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for i, traj in enumerate(trajectories):
        two = traj.counts2 is not None
        cross = "" if not two else ("never" if traj.crossing_time is None else traj.crossing_time)
        for t, n1 in enumerate(traj.counts):
            writer.writerow((i, t, int(n1), int(traj.counts2[t]) if two else "", cross))
