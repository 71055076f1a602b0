"""Parameter supports and the probit bijection between constrained and unconstrained space.

A ``ParameterSpace`` is an ordered list of named parameters, each living either
on the real line or on a finite open interval.  Interval parameters are mapped
to the real line with a scaled probit, ``xi = ndtri((theta - lower) / width)``,
and back with ``theta = lower + width * ndtr(xi)``.  ``log_jacobian`` supplies
the change-of-variable correction ``log |d theta / d xi|`` needed to evaluate
densities in the unconstrained coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .exceptions import BoundaryError, DomainError

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

# Quantile inputs are clamped into this closed range; values at or beyond
# {0, 1} are rejected instead of nudged.
_QUANTILE_CLAMP = 1e-15


def norm_cdf(x):
    """Standard normal CDF, accurate to double precision."""
    return special.ndtr(np.asarray(x, dtype=float))


def norm_quantile(p):
    """Standard normal quantile. Rejects p outside (0, 1), clamps extreme tails."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0) or np.any(~np.isfinite(p)):
        raise DomainError("quantile requires probabilities strictly inside (0, 1)")
    return special.ndtri(np.clip(p, _QUANTILE_CLAMP, 1.0 - _QUANTILE_CLAMP))


def norm_log_pdf(x):
    """Log density of the standard normal."""
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - _LOG_SQRT_2PI


@dataclass(frozen=True)
class ParameterSpec:
    """One named parameter: real line when bounds are absent, open interval otherwise."""

    name: str
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        if (self.lower is None) != (self.upper is None):
            raise ValueError(f"parameter {self.name!r}: give both bounds or neither")
        if self.lower is not None:
            if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
                raise ValueError(f"parameter {self.name!r}: interval bounds must be finite")
            if not self.lower < self.upper:
                raise ValueError(f"parameter {self.name!r}: requires lower < upper")

    @classmethod
    def real_line(cls, name: str) -> "ParameterSpec":
        return cls(name)

    @classmethod
    def interval(cls, name: str, lower: float, upper: float) -> "ParameterSpec":
        return cls(name, float(lower), float(upper))

    @property
    def is_interval(self) -> bool:
        return self.lower is not None


@dataclass(frozen=True)
class ParameterSpace:
    """Ordered collection of ParameterSpec; fixes the unconstrained coordinate order."""

    specs: tuple[ParameterSpec, ...]

    def __init__(self, specs):
        specs = tuple(specs)
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        object.__setattr__(self, "specs", specs)

    @property
    def dimension(self) -> int:
        return len(self.specs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs)

    def _bounds_arrays(self):
        lower = np.array([s.lower if s.is_interval else np.nan for s in self.specs])
        upper = np.array([s.upper if s.is_interval else np.nan for s in self.specs])
        mask = np.array([s.is_interval for s in self.specs])
        return lower, upper, mask


def _check_shape(values: np.ndarray, space: ParameterSpace, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != space.dimension:
        raise DomainError(
            f"{what} has {values.shape[-1]} coordinates, space has {space.dimension}"
        )
    return values


def to_unconstrained(theta, space: ParameterSpace) -> np.ndarray:
    """Map constrained values to unconstrained coordinates, coordinate-wise.

    Interval coordinates use the scaled probit; real-line coordinates pass
    through unchanged.  Accepts a vector or a matrix whose last axis indexes
    coordinates.  Values on or outside an interval boundary raise
    ``BoundaryError`` naming the offending coordinate.
    """
    theta = _check_shape(theta, space, "theta")
    lower, upper, mask = space._bounds_arrays()
    if np.any(mask):
        t = theta[..., mask]
        lo, hi = lower[mask], upper[mask]
        bad = (t <= lo) | (t >= hi) | ~np.isfinite(t)
        if np.any(bad):
            per_coord = bad if bad.ndim == 1 else bad.reshape(-1, bad.shape[-1]).any(axis=0)
            idx = int(np.flatnonzero(per_coord)[0])
            name = np.array(space.names)[mask][idx]
            raise BoundaryError(
                f"parameter {name!r}: value on or outside its interval support"
            )
    if np.any(~np.isfinite(theta)):
        raise DomainError("theta must be finite")
    xi = np.array(theta, dtype=float)
    if np.any(mask):
        lo, hi = lower[mask], upper[mask]
        xi[..., mask] = norm_quantile((theta[..., mask] - lo) / (hi - lo))
    return xi


def from_unconstrained(xi, space: ParameterSpace) -> np.ndarray:
    """Inverse of ``to_unconstrained``; returns values strictly inside each support."""
    xi = _check_shape(xi, space, "xi")
    if np.any(~np.isfinite(xi)):
        raise DomainError("xi must be finite")
    lower, upper, mask = space._bounds_arrays()
    theta = np.array(xi, dtype=float)
    if np.any(mask):
        lo, hi = lower[mask], upper[mask]
        p = norm_cdf(xi[..., mask])
        t = lo + (hi - lo) * p
        # Guard the extreme tails where ndtr saturates: keep strictly interior.
        t = np.clip(t, np.nextafter(lo, hi), np.nextafter(hi, lo))
        theta[..., mask] = t
    return theta


def log_jacobian(xi, space: ParameterSpace):
    """log |d theta / d xi| summed over coordinates; 0 for real-line coordinates.

    Each interval coordinate contributes ``log(upper - lower) + log phi(xi)``.
    Returns a scalar for a vector input, a vector for a matrix input.
    """
    xi = _check_shape(xi, space, "xi")
    if np.any(~np.isfinite(xi)):
        raise DomainError("xi must be finite")
    lower, upper, mask = space._bounds_arrays()
    if not np.any(mask):
        out = np.zeros(xi.shape[:-1])
        return float(out) if out.ndim == 0 else out
    lo, hi = lower[mask], upper[mask]
    terms = np.log(hi - lo) + norm_log_pdf(xi[..., mask])
    out = terms.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def unit_cube_space(names) -> ParameterSpace:
    """Convenience: every parameter on the open unit interval."""
    return ParameterSpace([ParameterSpec.interval(n, 0.0, 1.0) for n in names])
