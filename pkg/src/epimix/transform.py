"""Log second differences of case counts, the case ratio and the pruning estimator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import CaseSeries, Component


@dataclass(frozen=True)
class STransform:
    """``S(t) = log N(t+1) - 2 log N(t) + log N(t-1)`` on interior days.

    ``values[i]`` is S at day ``t_first + i``.
    """

    t_first: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @property
    def t(self) -> np.ndarray:
        return self.t_first + np.arange(self.values.size)

    @property
    def t_last(self) -> int:
        return self.t_first + self.values.size - 1

    def at(self, t: int) -> float:
        if not self.t_first <= t <= self.t_last:
            raise IndexError(f"S is defined on [{self.t_first}, {self.t_last}], not at {t}")
        return float(self.values[t - self.t_first])


def s_transform(series: CaseSeries) -> STransform:
    """Second difference of ``log N``, centred on the middle day of each stencil."""
    v = np.asarray(series.values, dtype=float)
    if np.any(v <= 0):
        raise ValueError("S-transform needs strictly positive counts")
    log_n = np.log(v)
    return STransform(series.t0 + 1, log_n[2:] - 2.0 * log_n[1:-1] + log_n[:-2])


def log_case_ratio(c1: Component, c2: Component, t):
    t = np.asarray(t, dtype=float)
    out = (c2.log_peak_height - c2.a * (t - c2.peak_time) ** 2) - (
        c1.log_peak_height - c1.a * (t - c1.peak_time) ** 2
    )
    return out if out.ndim else float(out)


def case_ratio(c1: Component, c2: Component, t):
    """Ratio ``R(t)`` of the second component's cases to the first's."""
    return np.exp(log_case_ratio(c1, c2, t))


def estimate_pruning(series: CaseSeries, t_start: int, t_end: int) -> float:
    """Window average of S, an estimate of the log geometric-mean pruning rate.

    Raises
    ------
    ValueError
        If ``t_start > t_end`` or the window leaves the range where S is defined.
    """
    st = s_transform(series)
    if t_start > t_end:
        raise ValueError(f"window start {t_start} is after end {t_end}")
    if t_start < st.t_first or t_end > st.t_last:
        raise ValueError(
            f"window [{t_start}, {t_end}] outside the S range [{st.t_first}, {st.t_last}]"
        )
    return float(np.mean(st.values[t_start - st.t_first : t_end - st.t_first + 1]))


def st_from_ratio(c1: Component, c2: Component, t, noise_terms=(0.0, 0.0, 0.0)):
    """Closed-form S(t) of a two-component mixture written through the case ratio.

    Parameters
    ----------
    noise_terms : tuple of float
        Multiplicative noise ``(eta_{t-1}, eta_t, eta_{t+1})``, each above -1.

    Notes
    -----
    Evaluated in log space so extreme ratios neither overflow nor cancel.
    """
    eta_m, eta_0, eta_p = (float(x) for x in noise_terms)
    if min(eta_m, eta_0, eta_p) <= -1:
        raise ValueError("noise terms must exceed -1")
    t = np.asarray(t, dtype=float)
    a1, a2 = c1.a, c2.a
    d = a1 - a2
    log_r = np.asarray(log_case_ratio(c1, c2, t))
    # log of e^{-2 a1 (t - C1)} / e^{-2 a2 (t - C2)}
    log_e = -2.0 * a1 * (t - c1.peak_time) + 2.0 * a2 * (t - c2.peak_time)
    terms = np.stack(
        np.broadcast_arrays(
            np.zeros_like(log_r), 2.0 * (log_r + d), log_r + log_e + d, log_r - log_e + d
        )
    )
    log_num = logsumexp(terms, axis=0)
    log_den = 2.0 * np.logaddexp(0.0, log_r)
    noise = np.log1p(eta_p) + np.log1p(eta_m) - 2.0 * np.log1p(eta_0)
    out = -2.0 * a1 + log_num - log_den + noise
    return out if out.ndim else float(out)
