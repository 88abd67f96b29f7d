"""Least-squares fitting of Gaussian mixtures.

Components are refit one at a time against the residual left by the others
(alternating minimization). The number of components is chosen by BIC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .initialization import PeakConfig, initialize
from .model import (
    EXP_LIMIT,
    CaseSeries,
    Component,
    FitError,
    InsufficientStructureError,
    Mixture,
    _log_form,
)

# Losses below this fraction of sum(N^2) count as an exact fit in BIC.
LOSS_FLOOR_REL = 1e-10

# c = log M - a C^2 carries an absolute error of about 1e-16 a C^2
MAX_CCA = 1e10
MAX_LOG_A = 600.0

Series = Union[CaseSeries, tuple]


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings.

    Attributes
    ----------
    max_outer_iters : int
        Maximum alternating sweeps over the components.
    max_inner_iters : int
        Maximum descent steps per component refit.
    step_size : float
        Initial and maximum step of the scaled descent direction.
    loss_rel_tol : float
        Stop sweeping when a sweep improves the loss by less than this fraction.
    r_max : int
        Largest order tried by :func:`bic_select`.
    seed : int
        Seed for randomized restarts.
    inner_rel_tol : float
        Stop a component refit when a step improves its loss by less than this fraction.
    """

    max_outer_iters: int = 200
    max_inner_iters: int = 500
    step_size: float = 1.0
    loss_rel_tol: float = 1e-8
    r_max: int = 4
    seed: int = 0
    inner_rel_tol: float = 1e-12

    def __post_init__(self):
        if min(self.max_outer_iters, self.max_inner_iters, self.r_max) < 1:
            raise ValueError("iteration limits and r_max must be positive")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not 0 < self.loss_rel_tol < 1 or not 0 < self.inner_rel_tol < 1:
            raise ValueError("relative tolerances must lie in (0, 1)")


@dataclass(frozen=True)
class FitResult:
    mixture: Mixture
    outer_iters_used: int
    converged: bool
    loss_history: tuple[float, ...]
    bic_scores: dict[int, float] = field(default_factory=dict)


def _ty(series: Series) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(series, CaseSeries):
        return series.t, series.values
    t, y = series
    t, y = np.asarray(t, dtype=float), np.asarray(y, dtype=float)
    if t.shape != y.shape:
        raise ValueError("time and value arrays differ in shape")
    return t, y


def loss(mixture: Mixture, series: Series) -> float:
    """Sum of squared residuals of the mixture against the series."""
    t, y = _ty(series)
    e = mixture(t) - y
    return float(e @ e)


def loss_gradient_single(comp: Component, residual: Series) -> tuple[float, float, float]:
    """Gradient of ``sum (f - y)^2`` with respect to ``(a, b, c)``.

    ``residual`` holds the target ``y``: the data minus all other components.
    Accepts a :class:`CaseSeries` or a ``(t, y)`` pair, since residuals may be
    nonpositive.
    """
    t, y = _ty(residual)
    f = comp(t)
    w = 2.0 * (f - y) * f
    return float(-(w @ (t * t))), float(w @ t), float(np.sum(w))


def bic_score(loss_value: float, r: int, T: int, sum_sq: float) -> float:
    """``3r ln T + T ln(L / T)`` with L floored at ``LOSS_FLOOR_REL * sum_sq``."""
    floored = max(loss_value, LOSS_FLOOR_REL * sum_sq, np.finfo(float).tiny)
    return 3.0 * r * math.log(T) + T * math.log(floored / T)


def r_squared(loss_value: float, series: CaseSeries) -> float:
    y = series.values
    return 1.0 - loss_value / float(np.sum((y - y.mean()) ** 2))


class _Refit:
    """Scaled descent for one component in ``(log M, C, log a)`` coordinates.

    The target is divided by its largest magnitude. Each coordinate's step
    is divided by the squared norm of its Jacobian column, which puts the
    height, location and width directions on a common scale.
    """

    def __init__(self, t: np.ndarray, y: np.ndarray, cfg: FitConfig):
        self.t = t
        self.scale = float(np.max(np.abs(y))) or 1.0
        self.y = y / self.scale
        self.cfg = cfg
        self._inf = np.full(t.shape, np.inf)

    def curve(self, th) -> np.ndarray:
        log_m, C, log_a = th
        # reject steps whose (a, b, c) form would overflow or lose the peak height to cancellation
        if not (math.isfinite(log_m) and math.isfinite(C) and abs(log_a) <= MAX_LOG_A) or C * C * math.exp(log_a) > MAX_CCA:
            return self._inf
        x = log_m - math.exp(log_a) * (self.t - C) ** 2
        # the target is scaled to at most 1, so larger curves only add loss
        if x.max() > 50.0:
            return self._inf
        return np.exp(np.maximum(x, -EXP_LIMIT))

    def loss(self, f: np.ndarray) -> float:
        e = f - self.y
        value = float(e @ e)
        return value if math.isfinite(value) else math.inf

    def run(self, comp0: Component) -> tuple[Component, int]:
        cfg = self.cfg
        th = self.theta(comp0)
        f = self.curve(th)
        cur = self.loss(f)
        if not math.isfinite(cur):
            raise FitError("initial component overflows on the data range")
        step = cfg.step_size
        t, y = self.t, self.y
        it = 0
        with np.errstate(over="ignore", invalid="ignore"):
            for it in range(1, cfg.max_inner_iters + 1):
                log_m, C, log_a = th
                a = math.exp(log_a)
                d = t - C
                ef = (f - y) * f
                fd = f * d
                fd2 = fd * d
                g = (2.0 * float(ef.sum()), 4.0 * a * float(ef @ d), -2.0 * a * float(ef @ (d * d)))
                pre = (2.0 * float(f @ f), 8.0 * a * a * float(fd @ fd), 2.0 * a * a * float(fd2 @ fd2))
                if not all(math.isfinite(v) for v in g + pre) or min(pre) <= 0:
                    break
                direction = (-g[0] / pre[0], -g[1] / pre[1], -g[2] / pre[2])
                while True:
                    trial = (log_m + step * direction[0], C + step * direction[1], log_a + step * direction[2])
                    f_new = self.curve(trial)
                    new = self.loss(f_new)
                    if new <= cur:
                        break
                    step *= 0.5
                    if step < 1e-14:
                        return self._component(th), it
                improvement = cur - new
                th, f, cur = trial, f_new, new
                step = min(2.0 * step, cfg.step_size)
                if improvement <= cfg.inner_rel_tol * (cur + improvement):
                    break
        return self._component(th), it

    def theta(self, comp: Component) -> tuple[float, float, float]:
        return (comp.log_peak_height - math.log(self.scale), comp.peak_time, math.log(comp.a))

    def loss_of(self, comp: Component) -> float:
        return self.loss(self.curve(self.theta(comp)))

    def _component(self, th: tuple[float, float, float]) -> Component:
        return _log_form(float(th[0] + math.log(self.scale)), float(th[1]), float(math.exp(th[2])))


def fit_component(comp0: Component, residual: Series, cfg: FitConfig = FitConfig()) -> Component:
    """Refit one component to a residual target by scaled gradient descent.

    The step is halved until the loss does not increase, so the returned
    component never fits worse than ``comp0``. Curvature stays positive because
    the optimizer works on ``log a``.

    Descent cannot carry a bell across a stretch where it barely overlaps the
    target. So when the residual's largest value lies more than one width
    ``1/sqrt(a)`` from the current peak, a second descent starts from a copy
    moved onto that value, and the better of the two results is returned.
    """
    t, y = _ty(residual)
    if not np.any(y):
        return comp0
    refit = _Refit(t, y, cfg)
    best = refit.run(comp0)[0]
    j = int(np.argmax(y))
    if y[j] > 0 and abs(t[j] - comp0.peak_time) * math.sqrt(comp0.a) > 1.0:
        moved = _log_form(math.log(y[j]), float(t[j]), comp0.a)
        if math.isfinite(refit.loss_of(moved)):
            moved = refit.run(moved)[0]
            if refit.loss_of(moved) < refit.loss_of(best):
                best = moved
    return best


def alternating_minimize(init: Mixture, series: CaseSeries, cfg: FitConfig = FitConfig()) -> FitResult:
    """Sweep over the components, refitting each against the others' residual.

    Stops when a sweep improves the loss by less than ``cfg.loss_rel_tol``
    of its starting value, or after ``cfg.max_outer_iters`` sweeps.
    """
    t, y = series.t, series.values
    comps = list(init.components)
    curves = [c(t) for c in comps]
    history = [loss(init, series)]
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_outer_iters + 1):
        for k in range(len(comps)):
            rest = sum(curves[j] for j in range(len(comps)) if j != k) if len(comps) > 1 else 0.0
            comps[k] = fit_component(comps[k], (t, y - rest), cfg)
            curves[k] = comps[k](t)
        total = sum(curves) - y
        current = float(total @ total)
        if not math.isfinite(current):
            raise FitError("loss became non-finite during alternating minimization")
        history.append(current)
        prev = history[-2]
        if prev == 0.0 or prev - current < cfg.loss_rel_tol * prev:
            converged = True
            break
    mixture = Mixture(tuple(comps)).with_scores(series)
    mixture = replace(mixture, bic=bic_score(mixture.loss, mixture.r, len(series), float(y @ y)))
    return FitResult(mixture, sweeps, converged, tuple(history))


def bic_select(series: CaseSeries, cfg: FitConfig = FitConfig(), peak_cfg: PeakConfig = PeakConfig()) -> FitResult:
    """Fit orders ``1..cfg.r_max`` and return the fit with the smallest BIC.

    Orders whose S-transform lacks enough peaks are skipped. Ties go to the
    smaller order.

    Raises
    ------
    InsufficientStructureError
        If no order could be initialized.
    """
    results: dict[int, FitResult] = {}
    for r in range(1, cfg.r_max + 1):
        try:
            init = initialize(series, r, peak_cfg)
        except InsufficientStructureError:
            continue
        results[r] = alternating_minimize(init, series, cfg)
    if not results:
        raise InsufficientStructureError("no mixture order could be initialized")
    scores = {r: res.mixture.bic for r, res in results.items()}
    best = min(scores, key=lambda r: (scores[r], r))
    return replace(results[best], bic_scores=scores)


def forecast(mixture: Mixture, from_t: int, horizon: int) -> list[tuple[int, float]]:
    """Mixture values at days ``from_t + 1 .. from_t + horizon``."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    days = np.arange(from_t + 1, from_t + horizon + 1)
    values = np.atleast_1d(mixture(days.astype(float)))
    return [(int(d), float(v)) for d, v in zip(days, values)]


def mape(predicted: Sequence[float], actual: Sequence[float]) -> float:
    """Median of ``|pred - actual| / actual``."""
    p, a = np.asarray(predicted, dtype=float), np.asarray(actual, dtype=float)
    if p.shape != a.shape:
        raise ValueError(f"length mismatch: {p.size} predictions, {a.size} actuals")
    if np.any(a <= 0):
        raise ValueError("actual values must be positive")
    return float(np.median(np.abs(p - a) / a))


def random_init(rng: np.random.Generator, a_high=0.001, m_high=300000.0, c_ranges=((0.0, 100.0), (100.0, 200.0))) -> Mixture:
    """Draw a mixture with ``a ~ U(0, a_high]``, ``M ~ U(0, m_high]`` and peak times from ``c_ranges``."""
    comps = []
    for lo, hi in c_ranges:
        a = a_high * (1.0 - rng.random())
        M = m_high * (1.0 - rng.random())
        comps.append(_log_form(math.log(M), float(rng.uniform(lo, hi)), a))
    return Mixture(tuple(comps))
