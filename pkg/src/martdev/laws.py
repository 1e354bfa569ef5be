"""Base distributions for martingale increments, regressors and weights.

Every law exposes a log-density (or atoms) for the quadrature oracle, a
description of its tail for integrability checks, and an exact
inverse-transform sampler driven by externally supplied uniforms.
"""

import math
from dataclasses import asdict, dataclass
from typing import ClassVar

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError


@dataclass(frozen=True)
class TailShape:
    """``P(|X| > t)`` behaves like ``t**-poly * exp(-rate * t**shape)``.

    ``shape == 0`` means a pure power tail with index ``poly``;
    ``bounded`` means compact support.
    """

    shape: float = 0.0
    rate: float = 0.0
    poly: float = 0.0
    bounded: bool = False

    def integrable(self, exp_power, poly_power):
        """Is ``E[|X|**poly_power * exp(|X|**exp_power)]`` finite?"""
        if self.bounded:
            return True
        if self.shape == 0.0:
            return exp_power == 0.0 and poly_power < self.poly
        if exp_power == 0.0 or exp_power < self.shape:
            return True
        if exp_power > self.shape:
            return False
        if self.rate != 1.0:
            return self.rate > 1.0
        # exact cancellation of the exponentials; density ~ t**(shape-1-poly)
        return poly_power + self.shape - 1.0 - self.poly < -1.0


class Law:
    """Common interface; subclasses are frozen dataclasses."""

    kind: ClassVar[str] = ""
    symmetric: ClassVar[bool] = False
    unbounded: ClassVar[bool] = True

    @property
    def tail(self) -> TailShape:
        raise NotImplementedError

    @property
    def breakpoints(self):
        return ()

    def logpdf(self, x):
        raise NotImplementedError

    def atoms(self):
        """``(values, probs)`` for discrete laws, ``None`` otherwise."""
        return None

    def magnitude_isf(self, v):
        """``m`` with ``P(|X| >= m) = v``; symmetric laws only."""
        raise NotImplementedError

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if not self.symmetric:
            raise NotImplementedError
        out = np.zeros_like(u)
        hi = u > 0.5
        lo = u < 0.5
        out[hi] = self.magnitude_isf(2.0 * (1.0 - u[hi]))
        out[lo] = -self.magnitude_isf(2.0 * u[lo])
        return out

    def sample(self, u_mag, u_sign):
        """Map two independent uniform arrays to draws.

        Symmetric laws draw magnitude and sign separately so that the sign is
        independent of everything revealed about the magnitude.
        """
        if self.symmetric:
            sign = np.where(np.asarray(u_sign) < 0.5, -1.0, 1.0)
            return sign * self.magnitude_isf(np.asarray(u_mag))
        return self.ppf(u_mag)

    def second_moment(self):
        """Closed-form ``E[X^2]`` where available, else ``None``."""
        return None

    def mean(self):
        from .models import Functional, moment_oracle

        return moment_oracle(self, Functional("identity"))

    def to_dict(self):
        d = {"kind": self.kind}
        d.update(asdict(self))
        return d


@dataclass(frozen=True)
class Normal(Law):
    sigma: float = 1.0

    kind: ClassVar[str] = "normal"
    symmetric: ClassVar[bool] = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("normal sigma must be positive")

    @property
    def tail(self):
        return TailShape(shape=2.0, rate=1.0 / (2.0 * self.sigma**2))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float) / self.sigma
        return -0.5 * x * x - 0.5 * math.log(2 * math.pi) - math.log(self.sigma)

    def second_moment(self):
        return self.sigma**2

    def magnitude_isf(self, v):
        return -self.sigma * special.ndtri(0.5 * np.asarray(v, dtype=float))


@dataclass(frozen=True)
class Laplace(Law):
    scale: float = 1.0 / math.sqrt(2.0)

    kind: ClassVar[str] = "laplace"
    symmetric: ClassVar[bool] = True

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError("laplace scale must be positive")

    @property
    def tail(self):
        return TailShape(shape=1.0, rate=1.0 / self.scale)

    def logpdf(self, x):
        return -np.abs(np.asarray(x, dtype=float)) / self.scale - math.log(2 * self.scale)

    def second_moment(self):
        return 2.0 * self.scale**2

    def magnitude_isf(self, v):
        return -self.scale * np.log(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class SymmetricPareto(Law):
    """``P(|X| >= t) = (scale / t)**shape`` for ``t >= scale``."""

    shape: float = 1.8
    scale: float = 1.0

    kind: ClassVar[str] = "pareto"
    symmetric: ClassVar[bool] = True

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise DomainError("pareto shape and scale must be positive")

    @property
    def tail(self):
        return TailShape(poly=self.shape)

    @property
    def breakpoints(self):
        return (-self.scale, self.scale)

    def logpdf(self, x):
        t = np.abs(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            out = (
                math.log(0.5 * self.shape)
                + self.shape * math.log(self.scale)
                - (self.shape + 1.0) * np.log(t)
            )
        return np.where(t >= self.scale, out, -np.inf)

    def magnitude_isf(self, v):
        return self.scale * np.asarray(v, dtype=float) ** (-1.0 / self.shape)


@dataclass(frozen=True)
class TailDistributionSpec(Law):
    """Symmetric law with ``P(|X| >= t) = c t**-q exp(-t**alpha)`` beyond ``x0``.

    Below ``x0`` the magnitude is uniform, which keeps the survival function
    continuous. With ``c <= 1`` and ``3 <= q <= 2p`` the tail sits between
    ``t**(-2p) exp(-t**alpha)`` and ``t**-3 exp(-t**alpha)`` for large ``t``.
    """

    alpha: float = 0.5
    q: float = 3.0
    x0: float = 1.0
    c: float = 1.0
    p: float = 2.0

    kind: ClassVar[str] = "subexp-tail"
    symmetric: ClassVar[bool] = True

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"tail exponent alpha must lie in (0,1), got {self.alpha}")
        if self.p < 2:
            raise DomainError("p must be at least 2")
        if not 3.0 <= self.q <= 2.0 * self.p:
            raise DomainError(f"q must lie in [3, 2p] = [3, {2 * self.p}], got {self.q}")
        if not 0.0 < self.c <= 1.0:
            raise DomainError("normalisation c must lie in (0, 1]")
        if not self.x0 >= 1.0:
            raise DomainError("cutoff x0 must be at least 1")
        if self.g0 > 1.0:
            raise DomainError("c * x0**-q * exp(-x0**alpha) exceeds 1")

    @property
    def g0(self):
        return self.c * self.x0**-self.q * math.exp(-(self.x0**self.alpha))

    @property
    def tail(self):
        return TailShape(shape=self.alpha, rate=1.0, poly=self.q)

    @property
    def breakpoints(self):
        return (-self.x0, self.x0)

    def log_survival(self, t):
        """``log P(|X| >= t)``."""
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            body = np.log1p(-(1.0 - self.g0) * np.minimum(t, self.x0) / self.x0)
            far = math.log(self.c) - self.q * np.log(np.maximum(t, self.x0)) - np.maximum(t, self.x0) ** self.alpha
        return np.where(t < self.x0, body, far)

    def log_sf(self, t):
        """``log P(X >= t)`` for ``t > 0``."""
        return self.log_survival(t) - math.log(2.0)

    def logpdf(self, x):
        t = np.abs(np.asarray(x, dtype=float))
        ts = np.maximum(t, self.x0)
        far = (
            math.log(self.c)
            - self.q * np.log(ts)
            - ts**self.alpha
            + np.log(self.q / ts + self.alpha * ts ** (self.alpha - 1.0))
        )
        body = math.log((1.0 - self.g0) / self.x0)
        return np.where(t < self.x0, body, far) - math.log(2.0)

    def magnitude_isf(self, v, max_iter=200):
        v = np.asarray(v, dtype=float)
        if np.any((v <= 0) | (v > 1)):
            raise DomainError("survival level must lie in (0, 1]")
        out = np.empty_like(v)
        body = v >= self.g0
        out[body] = self.x0 * (1.0 - v[body]) / (1.0 - self.g0)
        far = ~body
        if np.any(far):
            out[far] = self._far_isf(v[far], max_iter)
        return out

    def _far_isf(self, v, max_iter):
        # solve q*s + exp(alpha*s) = L in s = log t; convex increasing, so
        # Newton started above the root decreases monotonically onto it
        L = math.log(self.c) - np.log(v)
        a, q = self.alpha, self.q
        s = np.minimum(L / q, np.log(np.maximum(L, 1.0)) / a)
        s = np.maximum(s, math.log(self.x0))
        for _ in range(max_iter):
            e = np.exp(a * s)
            h = q * s + e - L
            step = h / (q + a * e)
            s = s - step
            if np.all(np.abs(step) <= 4e-16 * np.maximum(1.0, np.abs(s))):
                break
        else:
            raise ConvergenceError(f"tail quantile did not converge in {max_iter} iterations")
        return np.maximum(np.exp(s), self.x0)


def inverse_cdf(spec, uniform):
    """Signed quantile of a symmetric law; ``uniform`` strictly inside (0, 1)."""
    u = np.asarray(uniform, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise DomainError("uniform must lie strictly inside (0, 1)")
    out = spec.ppf(u)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ThreePoint(Law):
    """Finite law on given values; used for exhaustive enumeration."""

    values: tuple = (-1.0, 0.0, 2.0)
    probs: tuple = (0.4, 0.4, 0.2)

    kind: ClassVar[str] = "three-point"
    unbounded: ClassVar[bool] = False

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.values) != len(self.probs) or not self.values:
            raise DomainError("values and probs must have equal nonzero length")
        if any(p < 0 for p in self.probs) or abs(math.fsum(self.probs) - 1.0) > 1e-12:
            raise DomainError("probs must be a probability vector")
        if list(self.values) != sorted(self.values):
            raise DomainError("values must be sorted")

    @property
    def tail(self):
        return TailShape(bounded=True)

    def atoms(self):
        return np.array(self.values), np.array(self.probs)

    def ppf(self, u):
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, np.asarray(u, dtype=float), side="right")
        return np.asarray(self.values)[np.minimum(idx, len(self.values) - 1)]


@dataclass(frozen=True)
class CenteredWeibull(Law):
    """Weibull(shape) shifted and scaled to mean zero, unit variance."""

    shape: float = 0.5

    kind: ClassVar[str] = "centered-weibull"

    def __post_init__(self):
        if not self.shape > 0:
            raise DomainError("weibull shape must be positive")

    @property
    def _loc_scale(self):
        k = self.shape
        m1 = math.gamma(1 + 1 / k)
        m2 = math.gamma(1 + 2 / k)
        return m1, math.sqrt(m2 - m1 * m1)

    @property
    def tail(self):
        _, s = self._loc_scale
        return TailShape(shape=self.shape, rate=s**self.shape)

    @property
    def breakpoints(self):
        m, s = self._loc_scale
        return (-m / s,)

    def second_moment(self):
        return 1.0

    def logpdf(self, x):
        m, s = self._loc_scale
        k = self.shape
        w = np.asarray(x, dtype=float) * s + m
        with np.errstate(divide="ignore", invalid="ignore"):
            out = math.log(k) + (k - 1) * np.log(w) - w**k + math.log(s)
        return np.where(w > 0, out, -np.inf)

    def ppf(self, u):
        m, s = self._loc_scale
        w = (-np.log1p(-np.asarray(u, dtype=float))) ** (1.0 / self.shape)
        return (w - m) / s


@dataclass(frozen=True)
class Exponential(Law):
    """Positive regressor law; not centred."""

    rate: float = 1.0

    kind: ClassVar[str] = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError("exponential rate must be positive")

    @property
    def tail(self):
        return TailShape(shape=1.0, rate=self.rate)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, math.log(self.rate) - self.rate * x, -np.inf)

    def ppf(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate


LAWS = {
    cls.kind: cls
    for cls in (Normal, Laplace, SymmetricPareto, TailDistributionSpec, ThreePoint, CenteredWeibull, Exponential)
}


def law_from_dict(d):
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in LAWS:
        raise DomainError(f"unknown distribution kind {kind!r}; expected one of {sorted(LAWS)}")
    try:
        return LAWS[kind](**d)
    except TypeError as exc:
        raise DomainError(f"bad parameters for {kind}: {exc}") from None
