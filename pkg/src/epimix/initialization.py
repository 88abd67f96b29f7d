"""Peak finding on S(t) and closed-form initialization of each mixture component."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import peak_prominences

from .model import CaseSeries, InsufficientStructureError, Mixture, from_peak_form
from .transform import STransform, s_transform


class NonConcaveSegmentWarning(RuntimeWarning):
    """An interval's curvature estimate was below its floor and was raised."""


@dataclass(frozen=True)
class PeakConfig:
    """Peak acceptance rules for S(t).

    Attributes
    ----------
    min_distance : int
        Minimum spacing in days between accepted peaks.
    min_prominence : float
        Absolute prominence threshold on S values.
    """

    min_distance: int = 14
    min_prominence: float = 0.0

    def __post_init__(self):
        if self.min_distance < 1:
            raise ValueError("min_distance must be at least 1")
        if self.min_prominence < 0:
            raise ValueError("min_prominence must be nonnegative")


def find_midpoints(st: STransform, r: int, cfg: PeakConfig = PeakConfig()) -> list[int]:
    """Days of the ``r - 1`` most prominent strict local maxima of S, ascending.

    Candidates are ranked by prominence (earlier day wins ties) and accepted
    greedily if at least ``cfg.min_distance`` days from every accepted peak.

    Raises
    ------
    InsufficientStructureError
        If fewer than ``r - 1`` peaks qualify.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    if len(st) == 0:
        raise ValueError("empty S-transform")
    if r == 1:
        return []
    s = st.values
    idx = np.flatnonzero((s[1:-1] > s[:-2]) & (s[1:-1] > s[2:])) + 1
    if idx.size:
        prom = peak_prominences(s, idx)[0]
    else:
        prom = np.empty(0)
    keep = prom >= cfg.min_prominence
    idx, prom = idx[keep], prom[keep]
    order = np.lexsort((idx, -prom))
    chosen: list[int] = []
    for i in idx[order]:
        if all(abs(int(i) - j) >= cfg.min_distance for j in chosen):
            chosen.append(int(i))
            if len(chosen) == r - 1:
                break
    if len(chosen) < r - 1:
        raise InsufficientStructureError(
            f"found {len(chosen)} qualifying S peaks, need {r - 1} for r={r}"
        )
    return sorted(st.t_first + j for j in chosen)


def interval_curvature(st: STransform, lo: int, hi: int) -> float:
    """Curvature estimate ``-mean(S) / 2`` over days ``[lo, hi - 1]``.

    Days where S is undefined (the series endpoints) are left out of the
    average, so a noiseless Gaussian gives its curvature exactly on every interval.
    """
    first, last = max(lo, st.t_first), min(hi - 1, st.t_last)
    if last < first:
        raise InsufficientStructureError(f"interval [{lo}, {hi}] holds no S values")
    seg = st.values[first - st.t_first : last - st.t_first + 1]
    return -float(np.mean(seg)) / 2.0


def initialize(series: CaseSeries, r: int, cfg: PeakConfig = PeakConfig()) -> Mixture:
    """Initial r-component mixture from S-peak partitioning.

    The series is split at the S peaks. On each interval the curvature comes
    from the summed S values, and the peak height and time from the interval's
    largest count.

    A curvature estimate below ``1 / (interval length)^2`` is raised to that
    floor with a :class:`NonConcaveSegmentWarning`. A smaller curvature
    would describe a bell wider than the interval that is supposed to hold it.
    """
    st = s_transform(series)
    mids = find_midpoints(st, r, cfg)
    x = [series.t0, *mids, series.t_end]
    y = series.values
    comps = []
    for k in range(r):
        lo, hi = x[k], x[k + 1]
        a = interval_curvature(st, lo, hi)
        floor = 1.0 / float(hi - lo) ** 2
        if a < floor:
            warnings.warn(
                f"interval [{lo}, {hi}] has curvature estimate {a:.3g}; raised to {floor:.3g}",
                NonConcaveSegmentWarning,
                stacklevel=2,
            )
            a = floor
        seg = y[lo - series.t0 : hi - series.t0 + 1]
        j = int(np.argmax(seg))
        comps.append(from_peak_form(float(seg[j]), float(lo + j), a))
    return Mixture(tuple(comps)).with_scores(series)
