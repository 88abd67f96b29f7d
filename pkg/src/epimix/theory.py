"""Closed-form identifiability bounds for two-component mixtures.

All logarithms are natural unless a function says otherwise. The peak
separation threshold is also reported with base-10 logarithms, because
published worked examples of it use that base.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .model import Component, NoiseBound


class BoundsDomainError(ValueError):
    """Inputs outside the range where a bound is defined."""


@dataclass(frozen=True)
class BoundsInput:
    """Two-component parameters and the bounds assumed about them.

    ``a_lower`` and ``M_upper`` are the assumed lower bound on curvature and
    upper bound on peak height; ``epsilon`` bounds the overlap of the two
    curves at each other's peak; ``noise.delta`` bounds the multiplicative noise.
    """

    a1: float
    a2: float
    C1: float
    C2: float
    M1: float
    M2: float
    a_lower: float
    M_upper: float
    epsilon: float
    noise: NoiseBound = NoiseBound()

    def __post_init__(self):
        if min(self.a1, self.a2, self.M1, self.M2, self.a_lower, self.M_upper, self.epsilon) <= 0:
            raise BoundsDomainError("curvatures, heights and epsilon must be positive")
        if self.C1 > self.C2:
            raise BoundsDomainError("peaks must be ordered with C1 <= C2")

    @property
    def components(self) -> tuple[Component, Component]:
        from .model import from_peak_form

        return from_peak_form(self.M1, self.C1, self.a1), from_peak_form(self.M2, self.C2, self.a2)


@dataclass
class BoundsReport:
    separation_required: float
    separation_required_log10: float
    separation_actual: float
    delta_star: float | None
    assumptions_hold: dict[str, bool]
    m_hat_bounds: list[tuple[float, float]] = field(default_factory=list)
    c_hat_bounds: list[float] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def all_hold(self) -> bool:
        return all(self.assumptions_hold.values())

    def to_dict(self) -> dict:
        out = asdict(self)
        out["all_hold"] = self.all_hold
        out["m_hat_bounds"] = [list(b) for b in self.m_hat_bounds]
        return _finite_or_none(out)


def _finite_or_none(x):
    if isinstance(x, dict):
        return {k: _finite_or_none(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite_or_none(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def separation_threshold(a_lower: float, M_upper: float, epsilon: float, log: Callable[[float], float] = math.log) -> float:
    """Minimum peak separation ``2 sqrt(log(M / epsilon) / a)``.

    Pass ``log=math.log10`` for the base-10 reading.
    """
    if not 0 < epsilon <= M_upper:
        raise BoundsDomainError("need 0 < epsilon <= M_upper")
    if a_lower <= 0:
        raise BoundsDomainError("a_lower must be positive")
    return 2.0 * math.sqrt(log(M_upper / epsilon) / a_lower)


def _overlap_k(a1: float, sep: float) -> float:
    """``e^{2 a sep} + e^{-2 a sep} - 2``, written as ``4 sinh^2(a sep)``."""
    x = abs(a1 * sep)
    return math.inf if x > 350 else 4.0 * math.sinh(x) ** 2


def delta_star(inp: BoundsInput) -> float:
    """Largest noise amplitude for which the S peak still marks the midpoint.

    Defined for equal curvatures only. Clamped to ``[0, 1/4]``; the raw
    expression is negative once ``epsilon > min(M1, M2) / 5``.
    """
    if not math.isclose(inp.a1, inp.a2, rel_tol=1e-12):
        raise BoundsDomainError("delta_star is defined for equal curvatures a1 = a2")
    m_min = min(inp.M1, inp.M2)
    if inp.epsilon >= m_min:
        raise BoundsDomainError("epsilon must be below min(M1, M2)")
    k = _overlap_k(inp.a1, inp.C1 - inp.C2)
    w = inp.epsilon / (m_min - inp.epsilon)
    if math.isinf(k):
        ratio = 0.25 / w
    else:
        ratio = (1.0 + 0.25 * k) / (1.0 + w * k)
    return min(max((ratio ** 0.2 - 1.0) / 4.0, 0.0), 0.25)


def _noise_log(B: float) -> float:
    if not 0 <= B < 1:
        raise BoundsDomainError("noise bound B must lie in [0, 1)")
    return math.log((1.0 + B) / (1.0 - B))


def ratio_st_upper_equal(a1: float, sep: float, B: float, eps: float) -> float:
    """Upper bound on S where one component dominates (``R <= eps`` or ``R >= 1/eps``)."""
    if not 0 <= eps <= 1:
        raise BoundsDomainError("eps must lie in [0, 1]")
    k = _overlap_k(a1, sep) + 2.0
    return -2.0 * a1 + math.log(1.0 + k * eps + eps * eps) + 2.0 * _noise_log(B)


def ratio_st_lower_midpoint_equal(a1: float, sep: float, B: float) -> float:
    """Lower bound on S at the point where the case ratio equals 1."""
    k = _overlap_k(a1, sep)
    return -2.0 * a1 + math.log1p(k / 4.0) - 2.0 * _noise_log(B)


def midpoint_separation_equal(a1: float, B: float, eps: float) -> float:
    """Separation above which the S maximum has ``eps <= R <= 1/eps`` (equal curvatures)."""
    if not 0 <= B < 1:
        raise BoundsDomainError("noise bound B must lie in [0, 1)")
    q4 = ((1.0 + B) / (1.0 - B)) ** 4
    cap = 0.25 / q4
    if not 0 <= eps <= cap:
        raise BoundsDomainError(f"eps must lie in [0, {cap:.6g}] for B={B}")
    den = 1.0 - 4.0 * q4 * eps
    if den <= 0:
        return math.inf
    return math.log((4.0 * q4 * (1.0 + eps * eps) - 2.0) / den) / (2.0 * a1)


def midpoint_separation_unequal(a1: float, a2: float, M1: float, M2: float, B: float, eps: float) -> float:
    """Separation above which the S maximum has ``eps <= R <= 1/eps`` (unequal curvatures)."""
    if a1 == a2:
        raise BoundsDomainError("use midpoint_separation_equal when a1 = a2")
    if not 0 <= B < 1:
        raise BoundsDomainError("noise bound B must lie in [0, 1)")
    q4 = ((1.0 + B) / (1.0 - B)) ** 4
    cap = q4 ** -2 / 16.0
    if not 0 <= eps <= cap:
        raise BoundsDomainError(f"eps must lie in [0, {cap:.6g}] for B={B}")
    up, down = math.exp(a2 - a1), math.exp(a1 - a2)
    num = 4.0 * q4 * (max(up, down) + eps) - up + down
    den = 1.0 - 4.0 * q4 * math.sqrt(eps)
    if num <= 0 or den <= 0:
        raise BoundsDomainError("condition not expressible for these parameters")
    radicand = (0.5 * math.log(num / den)) ** 2 + (a2 - a1) * math.log(M1 / M2)
    if radicand < 0:
        raise BoundsDomainError("condition not expressible for these parameters")
    return math.sqrt(radicand / (a1 * a2))


def ratio_to_time(c1: Component, c2: Component, R: float) -> tuple[float, float]:
    """Both days at which the case ratio equals ``R`` (unequal curvatures).

    Returned as ``(t_minus, t_plus)``, from the minus and plus signs of the quadratic formula.
    """
    a1, a2 = c1.a, c2.a
    C1, C2 = c1.peak_time, c2.peak_time
    if a1 == a2:
        raise BoundsDomainError("equal curvatures give a linear equation, not a quadratic")
    if R <= 0:
        raise BoundsDomainError("R must be positive")
    log_term = math.log(R) + c1.log_peak_height - c2.log_peak_height
    disc = a1 * a2 * (C1 - C2) ** 2 - (a2 - a1) * log_term
    if disc < 0:
        raise BoundsDomainError("the case ratio never reaches R")
    mid = -(2.0 * a1 * C1 - 2.0 * a2 * C2)
    root = 2.0 * math.sqrt(disc)
    den = 2.0 * (a2 - a1)
    return (mid - root) / den, (mid + root) / den


def estimate_brackets(M: float, C: float, a: float, epsilon: float, delta: float) -> tuple[float, float, float]:
    """Guaranteed ranges for the estimated peak height and peak time of one component.

    Returns ``(m_lower, m_upper, c_radius)``. ``c_radius`` bounds
    ``|C_hat - C|`` and is NaN when the bound's logarithm is undefined.
    """
    grid_loss = math.exp(-a * (math.ceil(C) - C) ** 2)
    m_lower = M * (1.0 - delta) * grid_loss
    m_upper = (M + epsilon) * (1.0 + delta)
    inner = M * grid_loss * (1.0 - delta) / (1.0 + delta) - epsilon
    if inner <= 0:
        return m_lower, m_upper, math.nan
    arg = math.log(M / inner)
    return m_lower, m_upper, math.sqrt(max(arg, 0.0) / a)


def check_theorem31(inp: BoundsInput, T_range: tuple[int, int]) -> BoundsReport:
    """Evaluate the assumptions of the two-peak estimation guarantee.

    The report lists pass or fail per assumption, the separation thresholds
    under natural and base-10 logarithms, and the implied brackets on each
    component's estimated peak height and time.
    """
    notes: list[str] = []
    t_lo, t_hi = T_range
    sep = abs(inp.C2 - inp.C1)
    delta = inp.noise.delta
    eps_ok = inp.epsilon < min(inp.M1, inp.M2) / 5.0
    try:
        need = separation_threshold(inp.a_lower, inp.M_upper, inp.epsilon)
        need10 = separation_threshold(inp.a_lower, inp.M_upper, inp.epsilon, log=math.log10)
    except BoundsDomainError as exc:
        need = need10 = math.nan
        notes.append(str(exc))
    equal = math.isclose(inp.a1, inp.a2, rel_tol=1e-12)
    dstar = None
    if not equal:
        notes.append("delta_star is only defined for a1 = a2; noise assumption not verified")
    elif inp.epsilon < min(inp.M1, inp.M2):
        dstar = delta_star(inp)
    holds = {
        "epsilon_small": eps_ok,
        "peak_heights_bounded": max(inp.M1, inp.M2) <= inp.M_upper,
        "curvature_bounded": min(inp.a1, inp.a2) >= inp.a_lower,
        "temporal_separation": bool(sep >= need),
        "noise_within_delta_star": dstar is not None and delta <= dstar,
        "peaks_observed": t_lo <= inp.C1 <= t_hi and t_lo <= inp.C2 <= t_hi,
    }
    if math.isfinite(need10) and sep >= need10 and sep < need:
        notes.append(
            f"separation {sep:.4g} passes the base-10 threshold {need10:.4g} "
            f"but not the natural-log threshold {need:.4g}"
        )
    m_b, c_b = [], []
    for M, C, a in ((inp.M1, inp.C1, inp.a1), (inp.M2, inp.C2, inp.a2)):
        lo, hi, rad = estimate_brackets(M, C, a, inp.epsilon, delta)
        m_b.append((lo, hi))
        c_b.append(rad)
    return BoundsReport(need, need10, sep, dstar, holds, m_b, c_b, notes)


def s_argmax_grid(c1: Component, c2: Component, width: float = 3.0) -> int:
    """Integer day maximizing S of the noiseless mixture over ``[C1 - w s1, C2 + w s2]``.

    ``s_k = 1/sqrt(2 a_k)``. S is computed directly from the sampled
    mixture, so it is defined on the grid's interior days only.
    """
    from .model import mixture_series
    from .transform import s_transform

    lo = math.floor(c1.peak_time - width / math.sqrt(2.0 * c1.a))
    hi = math.ceil(c2.peak_time + width / math.sqrt(2.0 * c2.a))
    st = s_transform(mixture_series((c1, c2), lo, hi - lo + 1))
    return int(st.t[int(np.argmax(st.values))])
