"""Domain types for Gaussian-mixture case curves.

A component is the curve ``exp(-a t^2 + b t + c)`` with ``a > 0``. It is
stored in ``(a, b, c)`` form; the peak view ``(M, C, a)`` with
``M = exp(c + b^2 / 4a)`` and ``C = b / 2a`` is derived.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Iterable

import numpy as np

EXP_LIMIT = 700.0


class InsufficientStructureError(ValueError):
    """The series does not show enough peaks for the requested order."""


class FitError(RuntimeError):
    """Numerical failure while fitting."""


def safe_exp(x):
    """Exponentiate after checking the exponent range.

    Exponents below ``-EXP_LIMIT`` give 0; above ``EXP_LIMIT`` raise.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x > EXP_LIMIT):
        raise OverflowError(f"exponent {float(np.max(x)):.6g} exceeds {EXP_LIMIT}")
    out = np.where(x < -EXP_LIMIT, 0.0, np.exp(np.maximum(x, -EXP_LIMIT)))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CaseSeries:
    """Daily case counts observed at consecutive integer days.

    Parameters
    ----------
    t0 : int
        Day index of the first observation.
    values : array_like
        Strictly positive counts, at least three of them.
    """

    t0: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 3:
            raise ValueError("a case series needs at least 3 observations")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("case counts must be finite and strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "t0", int(self.t0))
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.arange(self.values.size, dtype=float)

    @property
    def t_end(self) -> int:
        return self.t0 + self.values.size - 1

    def window(self, start: int, end: int) -> "CaseSeries":
        """Sub-series covering days ``start..end`` inclusive."""
        if start < self.t0 or end > self.t_end or end - start < 2:
            raise ValueError(f"window [{start}, {end}] outside [{self.t0}, {self.t_end}]")
        return CaseSeries(start, self.values[start - self.t0 : end - self.t0 + 1])


@dataclass(frozen=True)
class NoiseBound:
    """Bound ``0 <= delta < 1`` on the multiplicative noise amplitude."""

    delta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.delta < 1.0:
            raise ValueError("noise bound must lie in [0, 1)")


@dataclass(frozen=True)
class Component:
    """One Gaussian curve ``exp(-a t^2 + b t + c)``."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        for name in ("a", "b", "c"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"component parameter {name} must be finite")
            object.__setattr__(self, name, value)
        if self.a <= 0:
            raise ValueError("component curvature a must be positive")

    @property
    def log_peak_height(self) -> float:
        return self.c + self.b * self.b / (4.0 * self.a)

    @property
    def peak_height(self) -> float:
        return to_peak_form(self)[0]

    @property
    def peak_time(self) -> float:
        return self.b / (2.0 * self.a)

    def __call__(self, t):
        return eval_component(self, t)


def eval_component(comp: Component, t):
    """Evaluate ``exp(-a t^2 + b t + c)`` at scalar or array ``t``."""
    t = np.asarray(t, dtype=float)
    # peak form keeps the exponent well conditioned far from the origin
    x = comp.log_peak_height - comp.a * (t - comp.peak_time) ** 2
    return safe_exp(x)


def to_peak_form(comp: Component) -> tuple[float, float, float]:
    """Return ``(M, C, a)`` for a component."""
    log_m = comp.log_peak_height
    if log_m > EXP_LIMIT:
        raise OverflowError(f"peak height exp({log_m:.6g}) is not representable")
    return math.exp(log_m), comp.peak_time, comp.a


def from_peak_form(M: float, C: float, a: float) -> Component:
    """Build a component from its peak height ``M``, peak time ``C`` and curvature ``a``."""
    if not M > 0:
        raise ValueError("peak height M must be positive")
    if not a > 0:
        raise ValueError("curvature a must be positive")
    return Component(a=a, b=2.0 * C * a, c=math.log(M) - C * C * a)


def _log_form(log_m: float, C: float, a: float) -> Component:
    return Component(a=a, b=2.0 * C * a, c=log_m - C * C * a)


@dataclass(frozen=True)
class Mixture:
    """Sum of Gaussian components, kept sorted by peak time.

    ``loss``, ``bic`` and ``r_squared`` are NaN when the mixture has not
    been scored against data.
    """

    components: tuple[Component, ...]
    loss: float = math.nan
    bic: float = math.nan
    r_squared: float = math.nan

    def __post_init__(self):
        comps = tuple(sorted(self.components, key=lambda c: c.peak_time))
        if not comps:
            raise ValueError("a mixture needs at least one component")
        object.__setattr__(self, "components", comps)

    @property
    def r(self) -> int:
        return len(self.components)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        total = np.zeros(t.shape)
        for comp in self.components:
            total = total + eval_component(comp, t)
        return total if total.ndim else float(total)

    def with_scores(self, series: CaseSeries, bic: float = math.nan) -> "Mixture":
        y = series.values
        resid = self(series.t) - y
        loss = float(resid @ resid)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - loss / ss_tot if ss_tot > 0 else math.nan
        return Mixture(self.components, loss=loss, bic=bic, r_squared=r2)

    def to_dict(self) -> dict[str, Any]:
        comps = []
        for comp in self.components:
            M, C, _ = to_peak_form(comp)
            comps.append(
                {"a": comp.a, "b": comp.b, "c": comp.c, "peak_height": M, "peak_time": C}
            )
        return {
            "r": self.r,
            "components": comps,
            "loss": _json_float(self.loss),
            "bic": _json_float(self.bic),
            "r_squared": _json_float(self.r_squared),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Mixture":
        try:
            comps = [Component(float(c["a"]), float(c["b"]), float(c["c"])) for c in data["components"]]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed mixture: {exc}") from exc
        if "r" in data and int(data["r"]) != len(comps):
            raise ValueError("mixture field r disagrees with the component count")
        return cls(
            tuple(comps),
            loss=_float_or_nan(data.get("loss")),
            bic=_float_or_nan(data.get("bic")),
            r_squared=_float_or_nan(data.get("r_squared")),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "Mixture":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid mixture JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ValueError("mixture JSON must be an object")
        return cls.from_dict(data)


def _json_float(x: float):
    return None if x is None or not math.isfinite(x) else float(x)


def _float_or_nan(x) -> float:
    return math.nan if x is None else float(x)


MIXTURE_SCHEMA = {
    "type": "object",
    "required": ["r", "components", "loss", "bic", "r_squared"],
    "properties": {
        "r": {"type": "integer", "minimum": 1},
        "components": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["a", "b", "c", "peak_height", "peak_time"],
                "properties": {
                    "a": {"type": "number", "exclusiveMinimum": 0},
                    "b": {"type": "number"},
                    "c": {"type": "number"},
                    "peak_height": {"type": "number", "exclusiveMinimum": 0},
                    "peak_time": {"type": "number"},
                },
            },
        },
        "loss": {"type": ["number", "null"], "minimum": 0},
        "bic": {"type": ["number", "null"]},
        "r_squared": {"type": ["number", "null"], "maximum": 1},
    },
}


def mixture_series(components: Iterable[Component], t0: int, length: int, noise=None) -> CaseSeries:
    """Sample a mixture on consecutive days, optionally with multiplicative noise.

    Parameters
    ----------
    noise : array_like, optional
        Values ``eta_t`` applied as ``N(t) * (1 + eta_t)``.
    """
    mix = Mixture(tuple(components))
    t = t0 + np.arange(length, dtype=float)
    y = np.asarray(mix(t), dtype=float)
    if noise is not None:
        y = y * (1.0 + np.asarray(noise, dtype=float))
    return CaseSeries(t0, y)
