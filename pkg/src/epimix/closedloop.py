"""Feedback law whose closed loop ``dI/dt = alpha(I) I`` traces a Gaussian curve.

The law sets ``alpha = +sqrt(b^2 - 4a(log I - c))`` until ``log I`` has
reached the cap ``c + b^2 / 4a`` and the negative root afterwards. From
``I(0) = e^c`` with ``b >= 0`` the solution is ``exp(-a t^2 + b t + c)``.
For ``b < 0`` the same law produces the mirrored curve with slope ``|b|``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO

import numpy as np

PEAK_TOL = 1e-12


@dataclass(frozen=True)
class ControlParams:
    a: float
    b: float
    c: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")

    @property
    def i_max_log(self) -> float:
        return self.c + self.b * self.b / (4.0 * self.a)


def _radicand(log_i: float, p: ControlParams) -> float:
    return p.b * p.b - 4.0 * p.a * (log_i - p.c)


def alpha_feedback(I: float, max_log_seen: float, p: ControlParams) -> float:
    """Growth rate commanded at infection level ``I``.

    Raises
    ------
    ValueError
        If ``I`` lies above the cap, where the square root is undefined.
    """
    if not I > 0:
        raise ValueError("I must be positive")
    rad = _radicand(math.log(I), p)
    if rad < 0:
        if rad > -PEAK_TOL * max(1.0, p.b * p.b):
            rad = 0.0
        else:
            raise ValueError(f"log I = {math.log(I):.12g} exceeds the cap {p.i_max_log:.12g}")
    root = math.sqrt(rad)
    return root if max_log_seen < p.i_max_log - PEAK_TOL else -root


@dataclass(frozen=True)
class ClosedLoopTrajectory:
    t: np.ndarray
    I: np.ndarray
    alpha: np.ndarray
    clamp_events: int = 0


def integrate_closed_loop(p: ControlParams, t_end: float, dt: float) -> ClosedLoopTrajectory:
    """Fixed-step RK4 integration of ``dI/dt = alpha(I) I`` from ``I(0) = e^c``.

    Stages use the peak flag from the start of the step. Within a small
    headroom of the cap the right-hand side has an infinite derivative in
    ``I``. There the state is advanced in the signed root
    ``w = +-sqrt(cap - log I)``, which moves at the constant rate ``-sqrt(a)``.
    The running maximum of ``log I`` reaches the cap when ``w`` changes sign.
    """
    if not dt > 0 or not t_end >= 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    steps = int(math.ceil(t_end / dt - 1e-9))
    cap = p.i_max_log
    zone = max(1e-2, 100.0 * p.a * dt * dt)
    sqrt_a = math.sqrt(p.a)
    x = p.c
    max_log = x
    clamps = 0
    ts = np.empty(steps + 1)
    xs = np.empty(steps + 1)
    flags = np.zeros(steps + 1, dtype=bool)
    ts[0], xs[0] = 0.0, x
    flags[0] = max_log >= cap - PEAK_TOL

    def rate(log_i: float, past: bool) -> float:
        nonlocal clamps
        rad = _radicand(log_i, p)
        if rad < 0:
            clamps += 1
            rad = 0.0
        return -math.sqrt(rad) if past else math.sqrt(rad)

    for i in range(steps):
        h = min(dt, t_end - i * dt)
        past = max_log >= cap - PEAK_TOL
        if cap - x < zone:
            w = math.sqrt(max(cap - x, 0.0))
            w = (-w if past else w) - sqrt_a * h
            x = cap - w * w
            max_log = cap if w <= 0 else max(max_log, x)
        else:
            I = math.exp(x)

            def g(v: float) -> float:
                return rate(math.log(v), past) * v if v > 0 else 0.0

            k1 = g(I)
            k2 = g(I + 0.5 * h * k1)
            k3 = g(I + 0.5 * h * k2)
            k4 = g(I + h * k3)
            I_new = I + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not I_new > 0:
                raise ArithmeticError(f"step at t={i * dt:.6g} produced nonpositive I")
            x = math.log(I_new)
            if x > cap:
                clamps += 1
                x = cap
            max_log = max(max_log, x)
        ts[i + 1], xs[i + 1] = ts[i] + h, x
        flags[i + 1] = max_log >= cap - PEAK_TOL
    root = np.sqrt(np.maximum(p.b * p.b - 4.0 * p.a * (xs - p.c), 0.0))
    alpha = np.where(flags, -root, root)
    return ClosedLoopTrajectory(ts, np.exp(xs), alpha, clamps)


def gaussian_curve(p: ControlParams, t):
    return np.exp(-p.a * np.asarray(t, dtype=float) ** 2 + p.b * np.asarray(t, dtype=float) + p.c)


def write_closed_loop_csv(traj: ClosedLoopTrajectory, fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(("t", "I", "alpha"))
    for row in zip(traj.t, traj.I, traj.alpha):
        writer.writerow(tuple(repr(float(v)) for v in row))
