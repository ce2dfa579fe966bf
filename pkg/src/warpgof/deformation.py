"""Parametric warping families ``lambda -> phi_lambda`` and group parameters.

A family maps a parameter vector ``lam`` (shape ``(p,)``) and an array of
points ``x`` to warped values.  Subclasses provide closed forms for the value
and its derivatives; the inverse falls back to a bracketed root search when no
closed form is given.  Three families ship with the package (location, scale,
location-scale); new ones are added by subclassing :class:`DeformationFamily`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, ParamOutOfBounds, RangeError


class DeformationFamily:
    """Base class for a warping family on an open interval ``domain``.

    Subclasses must set ``name``, ``param_dim``, ``identity`` and the default
    box, and implement :meth:`value`, :meth:`dx`, :meth:`dlam` and
    :meth:`dlam2`.  Overriding :meth:`inverse` is optional.
    """

    name = "custom"
    param_dim = 1
    identity = (0.0,)
    default_lower = (-10.0,)
    default_upper = (10.0,)
    domain = (-math.inf, math.inf)
    # group-structured families need one group fixed to be identifiable
    anchored_by_default = False

    def __init__(self, lower=None, upper=None, probe_interval=(-10.0, 10.0)):
        self.lower = np.array(self.default_lower if lower is None else lower, dtype=float)
        self.upper = np.array(self.default_upper if upper is None else upper, dtype=float)
        if self.lower.shape != (self.param_dim,) or self.upper.shape != (self.param_dim,):
            raise DomainError(f"{self.name}: box bounds must have length {self.param_dim}")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise DomainError("parameter box must be bounded")
        if np.any(self.lower >= self.upper):
            raise DomainError("parameter box needs lower < upper in every coordinate")
        self.probe_interval = tuple(float(v) for v in probe_interval)

    # -- to be provided by subclasses -------------------------------------
    def value(self, lam, x):
        raise NotImplementedError

    def dx(self, lam, x):
        raise NotImplementedError

    def dlam(self, lam, x):
        """Parameter gradient, shape ``(p,) + x.shape``."""
        raise NotImplementedError

    def dlam2(self, lam, x):
        """Parameter Hessian, shape ``(p, p) + x.shape``."""
        raise NotImplementedError

    def value_rows(self, theta, X):
        """Warp row ``j`` of the ``(J, n)`` array ``X`` with ``theta[j]``."""
        return np.vstack([self.value(lam, x) for lam, x in zip(theta, X)])

    def inverse(self, lam, y):
        y = np.asarray(y, dtype=float)
        out = np.array([self._invert_scalar(lam, float(v)) for v in y.ravel()])
        return out.reshape(y.shape)

    # -- shared machinery -------------------------------------------------
    @property
    def param_box(self):
        return self.lower, self.upper

    def in_box(self, lam) -> bool:
        lam = np.asarray(lam, dtype=float)
        return bool(np.all(lam >= self.lower) and np.all(lam <= self.upper))

    def check_param(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float).reshape(-1)
        if lam.shape != (self.param_dim,):
            raise DomainError(f"{self.name}: expected {self.param_dim} parameters, got {lam.size}")
        if not self.in_box(lam):
            raise ParamOutOfBounds(
                f"{self.name}: parameter {lam.tolist()} outside box "
                f"[{self.lower.tolist()}, {self.upper.tolist()}]"
            )
        return lam

    def project(self, lam) -> np.ndarray:
        return np.clip(lam, self.lower, self.upper)

    def range_of(self, lam):
        c, d = self.domain
        lo = -math.inf if c == -math.inf else float(self.value(lam, np.array([c]))[0])
        hi = math.inf if d == math.inf else float(self.value(lam, np.array([d]))[0])
        return lo, hi

    def _invert_scalar(self, lam, y):
        c, d = self.domain
        f = lambda x: float(self.value(lam, np.array([x]))[0]) - y  # noqa: E731
        a = c if math.isfinite(c) else -1.0
        b = d if math.isfinite(d) else 1.0
        width = 1.0
        while not math.isfinite(c) and f(a) > 0:
            width *= 2.0
            a = -width
            if width > 1e300:
                raise RangeError(f"{y} not in the range of {self.name}")
        width = 1.0
        while not math.isfinite(d) and f(b) < 0:
            width *= 2.0
            b = width
            if width > 1e300:
                raise RangeError(f"{y} not in the range of {self.name}")
        if f(a) == 0:
            return a
        if f(b) == 0:
            return b
        return brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)

    def __repr__(self):
        box = ", ".join(f"[{lo:g}, {hi:g}]" for lo, hi in zip(self.lower, self.upper))
        return f"{type(self).__name__}(box={box})"


class LocationFamily(DeformationFamily):
    """``phi_a(x) = x + a``."""

    name = "location"
    param_dim = 1
    identity = (0.0,)
    default_lower = (-10.0,)
    default_upper = (10.0,)
    anchored_by_default = True

    def value(self, lam, x):
        return x + lam[0]

    def value_rows(self, theta, X):
        return X + theta[:, :1]

    def dx(self, lam, x):
        return np.ones_like(x, dtype=float)

    def dlam(self, lam, x):
        return np.ones((1,) + np.shape(x))

    def dlam2(self, lam, x):
        return np.zeros((1, 1) + np.shape(x))

    def inverse(self, lam, y):
        return np.asarray(y, dtype=float) - lam[0]


class ScaleFamily(DeformationFamily):
    """``phi_b(x) = b x`` with ``b > 0``."""

    name = "scale"
    param_dim = 1
    identity = (1.0,)
    default_lower = (0.1,)
    default_upper = (10.0,)
    anchored_by_default = True

    def __init__(self, lower=None, upper=None, probe_interval=(-10.0, 10.0)):
        super().__init__(lower, upper, probe_interval)
        if self.lower[0] <= 0:
            raise DomainError("scale family needs a strictly positive lower bound")

    def value(self, lam, x):
        return lam[0] * x

    def value_rows(self, theta, X):
        return X * theta[:, :1]

    def dx(self, lam, x):
        return np.full(np.shape(x), float(lam[0]))

    def dlam(self, lam, x):
        return np.asarray(x, dtype=float)[None, ...]

    def dlam2(self, lam, x):
        return np.zeros((1, 1) + np.shape(x))

    def inverse(self, lam, y):
        return np.asarray(y, dtype=float) / lam[0]


class LocationScaleFamily(DeformationFamily):
    """``phi_(a,b)(x) = a + b x`` with ``b > 0``."""

    name = "location-scale"
    param_dim = 2
    identity = (0.0, 1.0)
    default_lower = (-10.0, 0.1)
    default_upper = (10.0, 10.0)
    anchored_by_default = True

    def __init__(self, lower=None, upper=None, probe_interval=(-10.0, 10.0)):
        super().__init__(lower, upper, probe_interval)
        if self.lower[1] <= 0:
            raise DomainError("location-scale family needs a strictly positive scale bound")

    def value(self, lam, x):
        return lam[0] + lam[1] * x

    def value_rows(self, theta, X):
        return theta[:, :1] + theta[:, 1:2] * X

    def dx(self, lam, x):
        return np.full(np.shape(x), float(lam[1]))

    def dlam(self, lam, x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.ones_like(x), x])

    def dlam2(self, lam, x):
        return np.zeros((2, 2) + np.shape(x))

    def inverse(self, lam, y):
        return (np.asarray(y, dtype=float) - lam[0]) / lam[1]


FAMILIES = {
    "location": LocationFamily,
    "scale": ScaleFamily,
    "location-scale": LocationScaleFamily,
}


def get_family(name: str, lower=None, upper=None) -> DeformationFamily:
    try:
        cls = FAMILIES[name]
    except KeyError:
        raise DomainError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}") from None
    return cls(lower=lower, upper=upper)


def _check_domain(fam, x):
    x = np.asarray(x, dtype=float)
    c, d = fam.domain
    if np.any(~np.isfinite(x)) or np.any(x <= c) or np.any(x >= d):
        raise DomainError(f"x outside the domain ({c}, {d}) of {fam.name}")
    return x


def warp_value(fam: DeformationFamily, lam, x):
    lam = fam.check_param(lam)
    x = _check_domain(fam, x)
    out = fam.value(lam, x)
    return float(out) if np.ndim(out) == 0 else out


def warp_jacobians(fam: DeformationFamily, lam, x):
    """``(dphi/dx, dphi/dlam, d2phi/dlam2)`` at ``(lam, x)``."""
    lam = fam.check_param(lam)
    x = _check_domain(fam, x)
    return fam.dx(lam, x), fam.dlam(lam, x), fam.dlam2(lam, x)


def inverse_warp(fam: DeformationFamily, lam, y):
    lam = fam.check_param(lam)
    y = np.asarray(y, dtype=float)
    lo, hi = fam.range_of(lam)
    if np.any(~np.isfinite(y)) or np.any(y <= lo) or np.any(y >= hi):
        raise RangeError(f"y outside the range ({lo}, {hi}) of {fam.name} at {lam.tolist()}")
    out = fam.inverse(lam, y)
    return float(out) if np.ndim(out) == 0 else out


def check_monotone(fam: DeformationFamily, lam, grid_size: int = 100, probe_interval=None) -> bool:
    """True iff ``dphi/dx > 0`` at ``grid_size`` interior points."""
    lam = fam.check_param(lam)
    if grid_size <= 0:
        warnings.warn("check_monotone called with no probe points; result is vacuous", stacklevel=2)
        return True
    c, d = fam.domain
    if not (math.isfinite(c) and math.isfinite(d)):
        c, d = probe_interval or fam.probe_interval
    x = c + (d - c) * np.arange(1, grid_size + 1) / (grid_size + 1)
    return bool(np.all(fam.dx(lam, x) > 0))


@dataclass
class ThetaVector:
    """Per-group warp parameters, shape ``(J, p)``.

    When ``anchor`` is set, that group's parameters are held fixed and left
    out of the free vector seen by the optimizer.
    """

    values: np.ndarray
    anchor: int | None = None
    free_index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        J = self.values.shape[0]
        if self.anchor is not None:
            if self.anchor < 0:
                self.anchor += J
            if not 0 <= self.anchor < J:
                raise DomainError(f"anchor index {self.anchor} out of range for J={J}")
        self.free_index = np.array([j for j in range(J) if j != self.anchor], dtype=int)

    @classmethod
    def identity(cls, fam: DeformationFamily, J: int, anchor="default") -> "ThetaVector":
        if anchor == "default":
            anchor = J - 1 if fam.anchored_by_default else None
        return cls(np.tile(np.asarray(fam.identity, dtype=float), (J, 1)), anchor)

    @property
    def J(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def anchored(self) -> bool:
        return self.anchor is not None

    @property
    def anchor_value(self):
        return None if self.anchor is None else self.values[self.anchor].copy()

    def free(self) -> np.ndarray:
        return self.values[self.free_index].ravel()

    def with_free(self, vec) -> "ThetaVector":
        vals = self.values.copy()
        vals[self.free_index] = np.asarray(vec, dtype=float).reshape(len(self.free_index), self.p)
        return ThetaVector(vals, self.anchor)

    def check(self, fam: DeformationFamily) -> None:
        if self.p != fam.param_dim:
            raise DomainError(f"theta has {self.p} parameters per group, family needs {fam.param_dim}")
        for lam in self.values:
            fam.check_param(lam)

    def copy(self) -> "ThetaVector":
        return ThetaVector(self.values.copy(), self.anchor)
