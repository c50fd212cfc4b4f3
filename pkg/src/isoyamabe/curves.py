"""Scalar functions of the level parameter t.

Every radial quantity (a, b, s_g, conformal factors, sampled solutions) is a
``ScalarCurve``: callable as ``curve(t, nu=0)`` where ``nu`` is the derivative
order.  Analytic curves differentiate exactly; tables use a cubic spline and
its derivatives.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import CubicSpline

MIN_TABLE_SAMPLES = 8


class CurveError(ValueError):
    """Malformed curve data (non-monotone abscissae, too few samples...)."""


class ScalarCurve:
    kind = "abstract"

    def __call__(self, t, nu: int = 0):
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def is_constant(self) -> bool:
        return False


class Constant(ScalarCurve):
    kind = "constant"

    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, t, nu: int = 0):
        t = np.asarray(t, dtype=float)
        return np.full_like(t, self.value if nu == 0 else 0.0)

    def to_json(self):
        return {"kind": "constant", "value": self.value}

    def is_constant(self):
        return True

    def __repr__(self):
        return f"Constant({self.value!r})"


class Polynomial(ScalarCurve):
    """sum_k coeffs[k] t^k."""

    kind = "polynomial"

    def __init__(self, coeffs: Sequence[float]):
        self.coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
        if self.coeffs.size == 0:
            self.coeffs = np.zeros(1)

    def __call__(self, t, nu: int = 0):
        c = P.polyder(self.coeffs, nu) if nu else self.coeffs
        return P.polyval(np.asarray(t, dtype=float), c)

    def to_json(self):
        return {"kind": "polynomial", "coeffs": self.coeffs.tolist()}

    def is_constant(self):
        return self.coeffs.size == 1

    def __repr__(self):
        return f"Polynomial({self.coeffs.tolist()!r})"


class Table(ScalarCurve):
    """Cubic-spline interpolant through (x, y) samples."""

    kind = "table"

    def __init__(self, x: Sequence[float], y: Sequence[float]):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise CurveError("table abscissae and values must be 1-D of equal length")
        if x.size < MIN_TABLE_SAMPLES:
            raise CurveError(f"table needs at least {MIN_TABLE_SAMPLES} samples, got {x.size}")
        if np.any(np.diff(x) <= 0):
            raise CurveError("table abscissae must be strictly increasing")
        self.x, self.y = x, y
        self._spline = CubicSpline(x, y)

    def __call__(self, t, nu: int = 0):
        return self._spline(np.asarray(t, dtype=float), nu)

    @property
    def domain(self):
        return float(self.x[0]), float(self.x[-1])

    def to_json(self):
        return {"kind": "table", "x": self.x.tolist(), "y": self.y.tolist()}


class Analytic(ScalarCurve):
    """Curve given by a value function and its derivative functions.

    ``derivs[k]`` is the (k+1)-th derivative.  Requesting a derivative that was
    not supplied raises.  Used for closed forms built in code (factories,
    conformal transforms); serialized by sampling.
    """

    kind = "analytic"

    def __init__(self, fn: Callable, derivs: Sequence[Callable] = (), label: str = "analytic"):
        self._fns = [fn, *derivs]
        self.label = label

    def __call__(self, t, nu: int = 0):
        if nu >= len(self._fns):
            raise NotImplementedError(f"{self.label}: derivative of order {nu} not available")
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(np.asarray(self._fns[nu](t), dtype=float), t.shape).copy()

    def to_json(self, interval=None, samples: int = 257):
        if interval is None:
            raise CurveError(f"{self.label}: analytic curve needs an interval to serialize")
        x = np.linspace(interval[0], interval[1], samples)
        return {"kind": "table", "x": x.tolist(), "y": self(x).tolist(), "label": self.label}

    def __repr__(self):
        return f"Analytic({self.label!r})"


def curve_from_json(data) -> ScalarCurve:
    if isinstance(data, (int, float)):
        return Constant(data)
    kind = data.get("kind")
    if kind == "constant":
        return Constant(data["value"])
    if kind == "polynomial":
        return Polynomial(data["coeffs"])
    if kind == "table":
        return Table(data["x"], data["y"])
    raise CurveError(f"unknown curve kind {kind!r}")


def curve_to_json(curve: ScalarCurve, interval) -> dict:
    if isinstance(curve, Analytic):
        return curve.to_json(interval)
    return curve.to_json()
