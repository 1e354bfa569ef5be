"""Scalar stochastic linear regression ``X_k = theta phi_k + eps_k``.

The normalised least-squares error ``(theta_hat - theta) sqrt(sum phi^2)``
is the terminal value of the martingale ``xi_i = phi_i eps_i / sqrt(sum phi^2)``
once the regressor magnitudes are revealed up front, which is why the bounds
below do not depend on the regressor law at all.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .bounds import Branch, BoundResult, SubexpParams, rough_bounds
from .errors import DegenerateDesignError, DomainError, HypothesisError
from .laws import Law
from .models import Functional, MartingaleModel, cached_moment, sample_paths


@dataclass(frozen=True)
class RegressionConfig:
    """``eps_model`` is either a centred law (i.i.d. noise) or an extendable
    :class:`MartingaleModel` whose increments serve as the noise."""

    theta: float
    n: int
    phi_law: Law
    eps_model: object
    sigma: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if isinstance(self.eps_model, MartingaleModel):
            if not self.eps_model.extendable:
                raise HypothesisError("noise model must be an i.i.d. or mixture-variance kind")
        elif isinstance(self.eps_model, Law):
            if not self.eps_model.symmetric and abs(self.eps_model.mean()) > 1e-9:
                raise HypothesisError("noise law must be centred")
        else:
            raise DomainError("eps_model must be a Law or a MartingaleModel")


@dataclass(frozen=True)
class RegressionSample:
    phi: np.ndarray
    eps: np.ndarray
    X: np.ndarray
    theta: float
    theta_hat: float
    normalized_error: float


def least_squares(phi, X):
    """``sum phi_k X_k / sum phi_k^2``."""
    phi = np.asarray(phi, dtype=float)
    X = np.asarray(X, dtype=float)
    if phi.shape != X.shape:
        raise DomainError("phi and X must have equal lengths")
    energy = math.fsum(phi * phi)
    if energy == 0.0:
        raise DegenerateDesignError("design has zero energy: sum phi^2 = 0")
    return math.fsum(phi * X) / energy


def make_sample(phi, eps, theta):
    phi = np.asarray(phi, dtype=float)
    eps = np.asarray(eps, dtype=float)
    X = theta * phi + eps
    theta_hat = least_squares(phi, X)
    err = (theta_hat - theta) * math.sqrt(math.fsum(phi * phi))
    return RegressionSample(phi, eps, X, float(theta), theta_hat, err)


def normalized_error(sample: RegressionSample, tol=1e-10):
    """``(theta_hat - theta) sqrt(sum phi^2)``, cross-checked against the
    martingale form ``sum phi_i eps_i / sqrt(sum phi^2)``."""
    phi, eps = sample.phi, sample.eps
    energy = math.fsum(phi * phi)
    if energy == 0.0:
        raise DegenerateDesignError("design has zero energy: sum phi^2 = 0")
    direct = (sample.theta_hat - sample.theta) * math.sqrt(energy)
    mart = math.fsum(phi * eps) / math.sqrt(energy)
    if abs(direct - mart) > tol * max(1.0, abs(mart)):
        raise AssertionError(f"normalised error {direct} disagrees with martingale form {mart}")
    return direct


def _noise(config, seed, streams):
    n = config.n
    if isinstance(config.eps_model, MartingaleModel):
        return sample_paths(config.eps_model.with_n(n), seed, streams).increments
    u = rng.uniforms(seed, streams, n, rng.TAG_MAGNITUDE)
    return config.eps_model.sample(u[..., 0], u[..., 1])


def simulate_regression(config: RegressionConfig, seed, streams):
    """Vectorised replication: returns ``(phi, eps, normalized_errors)``
    for a batch of streams.

    The normalised error is computed through the estimator itself, so the
    batch exercises the same arithmetic as :func:`normalized_error`.
    """
    streams = np.atleast_1d(np.asarray(streams, dtype=np.uint64))
    ud = rng.uniforms(seed, streams, config.n, rng.TAG_DESIGN)
    phi = config.phi_law.sample(ud[..., 0], ud[..., 1])
    eps = _noise(config, seed, streams)
    X = config.theta * phi + eps
    energy = np.sum(phi * phi, axis=1)
    if np.any(energy == 0):
        raise DegenerateDesignError("a sampled design has zero energy")
    theta_hat = np.sum(phi * X, axis=1) / energy
    return phi, eps, (theta_hat - config.theta) * np.sqrt(energy)


def sample_regression(config: RegressionConfig, seed, stream):
    phi, eps, _ = simulate_regression(config, seed, [stream])
    return make_sample(phi[0], eps[0], config.theta)


# ---------------------------------------------------------------------------
# noise constants


@dataclass(frozen=True)
class MomentBounds:
    """Noise constants entering the regression bounds.

    ``D = E[eps^2 exp(|eps|^alpha)]``, ``E = E[eps^2]``,
    ``F = E[exp(|eps|^(alpha/(1-alpha)))]``, ``A_cond = E|eps|^p``,
    ``A_var = E[eps^2]``, ``B = E|eps|^(p+delta)`` and
    ``A_vonbahr = E|eps|^p_low`` for the low-moment regime. Entries that
    diverge for the noise law are ``None``.
    """

    D: float = None
    E: float = None
    F: float = None
    A_cond: float = None
    A_var: float = None
    B: float = None
    A_vonbahr: float = None

    @classmethod
    def from_law(cls, law: Law, alpha=None, p=None, delta=None, p_low=None):
        def m(fn):
            try:
                return cached_moment(law, fn)
            except DomainError:
                return None

        out = {}
        out["E"] = out["A_var"] = m(Functional("quad"))
        if alpha is not None:
            out["D"] = m(Functional("subexp_weighted_abs", alpha=alpha))
            out["F"] = m(Functional("exp_abs", alpha=alpha / (1.0 - alpha)))
        if p is not None:
            out["A_cond"] = m(Functional("abs_p", p=p))
            if delta is not None:
                out["B"] = m(Functional("abs_p", p=p + delta))
        if p_low is not None:
            out["A_vonbahr"] = m(Functional("abs_p", p=p_low))
        return cls(**out)


# ---------------------------------------------------------------------------
# bounds on P(+-(theta_hat - theta) sqrt(sum phi^2) >= x), one sign at a time


def reg_bound_subexp(x, D, u, alpha):
    """Two-regime bound and its unified envelope, as ``(branchwise, unified)``."""
    if not u >= max(D, 1.0):
        raise HypothesisError(f"u = {u} must be at least max(D, 1) = {max(D, 1.0)}")
    return rough_bounds(x, SubexpParams(alpha, 0.0, u))


def reg_bound_weibull(x, n, E, F, alpha):
    _pos(x=x, E=E, F=F)
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    if n < 1:
        raise DomainError("n must be a positive count")
    first = -x * x / (2.0 * (E + x ** (2.0 - alpha) / 3.0))
    second = math.log(n * F) - x**alpha
    return BoundResult("reg-weibull", Branch.SINGLE, (first, second))


def _cond_constants(p, A):
    v2 = 0.25 * (p + 2.0) ** 2 * math.exp(p) * A ** (2.0 / p)
    cp = (1.0 + 2.0 / p) ** p * A
    return v2, cp


def reg_bound_condmoment(x, p, A):
    """``exp(-x^2/(2V^2)) + C_p/x^p`` with ``V^2`` and ``C_p`` built from ``A``."""
    _pos(x=x)
    _check_p(p)
    if not A >= 0:
        raise DomainError("A must be nonnegative")
    v2, cp = _cond_constants(p, A)
    return BoundResult("reg-condmoment", Branch.SINGLE, (_neg_quad(x, v2), _log(cp) - p * math.log(x)))


def reg_bound_fuk_inflated(x, p, A, n):
    """Companion bound from Fuk's inequality, with ``n``-inflated constants."""
    _pos(x=x)
    _check_p(p)
    if n < 1:
        raise DomainError("n must be a positive count")
    v2, cp = _cond_constants(p, A)
    return BoundResult("fuk-inflated", Branch.SINGLE, (_neg_quad(x, n * v2), _log(n * cp) - p * math.log(x)))


def reg_bound_moment(x, p, delta, A, B):
    _pos(x=x, delta=delta)
    _check_p(p)
    if not (A >= 0 and B >= 0):
        raise DomainError("A and B must be nonnegative")
    r = (2.0 * p + delta) / (p + delta)
    first = -x * x / (2.0 * (A + x**r / 3.0))
    return BoundResult("reg-moment", Branch.SINGLE, (first, _log(B) - p * math.log(x)))


def reg_bound_vonbahr(x, p, A):
    """``2A/x^p`` for noise with only a moment of order ``p`` in ``[1, 2]``."""
    _pos(x=x)
    if not 1.0 <= p <= 2.0:
        raise DomainError(f"p must lie in [1, 2], got {p}")
    if not A >= 0:
        raise DomainError("A must be nonnegative")
    return BoundResult("reg-vonbahr", Branch.SINGLE, (_log(2.0 * A) - p * math.log(x),))


def berry_esseen_envelope(x, p, weight_moment, C):
    """``C * weight_moment**(1/(1+p)) / (1 + |x|^p)``; ``C`` is user-supplied."""
    if not p > 2:
        raise DomainError("p must exceed 2")
    if not 0.0 < weight_moment <= 1.0:
        raise DomainError(f"weight_moment must lie in (0, 1], got {weight_moment}")
    x = np.asarray(x, dtype=float)
    out = C * weight_moment ** (1.0 / (1.0 + p)) / (1.0 + np.abs(x) ** p)
    return float(out) if out.ndim == 0 else out


def weight_moment(phi, p):
    """Monte Carlo ``sum_i E|phi_i / sqrt(sum phi^2)|^p`` from a batch of
    designs (rows are replications)."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    energy = np.sum(phi * phi, axis=1, keepdims=True)
    if np.any(energy == 0):
        raise DegenerateDesignError("a design has zero energy")
    w = np.abs(phi) / np.sqrt(energy)
    return float(np.mean(np.sum(w**p, axis=1)))


def equal_weight_moment(n, p):
    """Value for ``n`` equal deterministic regressors: ``n**(1 - p/2)``."""
    return float(n) ** (1.0 - p / 2.0)


def _pos(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise DomainError(f"{k} must be positive, got {v}")


def _check_p(p):
    if not p >= 2:
        raise DomainError(f"p must be at least 2, got {p}")


def _log(v):
    return math.log(v) if v > 0 else float("-inf")


def _neg_quad(x, v2):
    return -x * x / (2.0 * v2) if v2 > 0 else float("-inf")
