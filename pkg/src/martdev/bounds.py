"""Closed-form deviation bounds for martingales.

Each evaluator works with the logarithm of every term, so a bound can be
reported in the log domain far below double-precision underflow. The raw
sum may exceed one; :class:`BoundResult` carries it alongside the clamped
probability.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import DomainError

NEG_INF = float("-inf")


class Branch(str, Enum):
    SUB_GAUSSIAN = "sub-gaussian"
    SUBEXPONENTIAL = "subexponential"
    SINGLE = "single"


@dataclass(frozen=True)
class BoundResult:
    """Bound value as a sum of nonnegative terms, kept in log form."""

    name: str
    branch: Branch
    log_terms: tuple
    value: float = field(init=False)
    clamped: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "log_terms", tuple(float(t) for t in self.log_terms))
        value = math.fsum(self.terms)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "clamped", min(value, 1.0))

    @property
    def terms(self):
        return tuple(math.exp(t) if t > NEG_INF else 0.0 for t in self.log_terms)

    @property
    def log_value(self):
        return _logsumexp(self.log_terms)


def _logsumexp(logs):
    top = max(logs)
    if top == NEG_INF:
        return NEG_INF
    return top + math.log(math.fsum(math.exp(t - top) for t in logs))


def _log(v):
    return math.log(v) if v > 0 else NEG_INF


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def _check_p(p):
    if not p >= 2:
        raise DomainError(f"moment order p must be at least 2, got {p}")


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise DomainError(f"{k} must be positive, got {v}")


def _nonnegative(**kw):
    for k, v in kw.items():
        if not v >= 0:
            raise DomainError(f"{k} must be nonnegative, got {v}")


@dataclass(frozen=True)
class SubexpParams:
    """Exponent ``alpha``, aggregate moment ``c_n`` and the cap ``u >= 1``
    on the conditional subexponential moment ``Upsilon(S)_n``."""

    alpha: float
    c_n: float
    u: float

    def __post_init__(self):
        _check_alpha(self.alpha)
        _nonnegative(c_n=self.c_n)
        if not self.u >= 1.0:
            raise DomainError(f"u must be at least 1, got {self.u}")

    @property
    def threshold(self):
        """Junction ``u**(1/(2-alpha))`` between the two regimes."""
        return self.u ** (1.0 / (2.0 - self.alpha))


@dataclass(frozen=True)
class MomentParams:
    """Moment constants for the Fuk-type bounds.

    ``quad_sup`` and ``pmom_sup`` are essential sups of sums of conditional
    moments; the ``per_step_*`` fields are sums of per-step sups, which is
    what Fuk's original constants use.
    """

    p: float
    quad_sup: float
    pmom_sup: float
    delta: float = 1.0
    per_step_quad_sum: float = None
    per_step_pmom_sum: float = None

    def __post_init__(self):
        _check_p(self.p)
        _positive(delta=self.delta)
        _nonnegative(quad_sup=self.quad_sup, pmom_sup=self.pmom_sup)
        for name, agg in (("per_step_quad_sum", self.quad_sup), ("per_step_pmom_sum", self.pmom_sup)):
            v = getattr(self, name)
            if v is not None:
                _nonnegative(**{name: v})
                if v < agg * (1.0 - 1e-12):
                    raise DomainError(f"{name}={v} is below the aggregate sup {agg}")

    @property
    def v_squared(self):
        return 0.25 * (self.p + 2.0) ** 2 * math.exp(self.p) * self.quad_sup

    @property
    def c_p(self):
        return (1.0 + 2.0 / self.p) ** self.p * self.pmom_sup

    @property
    def v_squared_tilde(self):
        return 0.25 * (self.p + 2.0) ** 2 * math.exp(self.p) * self.per_step_quad_sum

    @property
    def c_p_tilde(self):
        return (1.0 + 2.0 / self.p) ** self.p * self.per_step_pmom_sum


@dataclass(frozen=True)
class FukSplit:
    """The pair ``2/(p+2)`` and ``p/(p+2)`` splitting ``x`` in the Fuk-type bound."""

    fuk_alpha: float
    fuk_beta: float

    @classmethod
    def from_p(cls, p):
        _check_p(p)
        a = 2.0 / (p + 2.0)
        return cls(a, 1.0 - a)


def ls_bound(x, y, n, K, alpha, e_moment):
    """Lanzinger-Stadtmueller bound on ``P(S_n >= x)`` for i.i.d. summands.

    ``K = E[xi^2 exp((xi^+)^alpha)]`` and ``e_moment = E[exp((xi^+)^alpha)]``.
    """
    _positive(x=x, y=y)
    _check_alpha(alpha)
    _nonnegative(K=K)
    if not e_moment >= 1.0:
        raise DomainError(f"e_moment = E[exp((xi+)^alpha)] is at least 1, got {e_moment}")
    if n < 1:
        raise DomainError("n must be a positive count")
    scale = y ** (1.0 - alpha)
    first = -(x / scale) * (1.0 - n * K / (2.0 * x * scale))
    second = math.log(n) - y**alpha + math.log(e_moment)
    return BoundResult("ls", Branch.SINGLE, (first, second))


def theorem21_bound(x, params: SubexpParams):
    """Two-regime subexponential bound on ``P(max_k S_k >= x)``.

    Below ``u**(1/(2-alpha))`` the bound is sub-Gaussian, above it decays
    like ``exp(-x**alpha)``. At ``x = 0`` the second term takes its limit 0.
    """
    if not x >= 0:
        raise DomainError(f"x must be nonnegative, got {x}")
    a, u, cn = params.alpha, params.u, params.c_n
    log_cn = _log(cn)
    if x < params.threshold:
        first = -x * x / (2.0 * u)
        if x == 0.0 or log_cn == NEG_INF:
            second = NEG_INF
        else:
            second = log_cn + (2.0 / (1.0 - a)) * math.log(x / u) - (u / x) ** (a / (1.0 - a))
        return BoundResult("thm21", Branch.SUB_GAUSSIAN, (first, second))
    xa = x**a
    first = -xa * (1.0 - u / (2.0 * x ** (2.0 - a)))
    second = log_cn - 2.0 * math.log(x) - xa
    return BoundResult("thm21", Branch.SUBEXPONENTIAL, (first, second))


def rough_bounds(x, params: SubexpParams):
    """The two envelopes implied by :func:`theorem21_bound` when
    ``u >= max(||Upsilon(S)_n||_inf, 1)``.

    Returns ``(branchwise, unified)``; the unified form is never smaller.
    """
    if not x >= 0:
        raise DomainError(f"x must be nonnegative, got {x}")
    a, u = params.alpha, params.u
    log2 = math.log(2.0)
    if x < params.threshold:
        branchwise = BoundResult("rough", Branch.SUB_GAUSSIAN, (log2 - x * x / (2.0 * u),))
    else:
        branchwise = BoundResult("rough", Branch.SUBEXPONENTIAL, (log2 - 0.5 * x**a,))
    unified = BoundResult("rough-unified", Branch.SINGLE, (log2 - x * x / (2.0 * (u + x ** (2.0 - a))),))
    return branchwise, unified


def theorem22_bound(x, y, v, w, p, tail_max_prob):
    """Bound with an explicit truncation level ``y`` and a caller-supplied
    value (or upper bound) for ``P(max_i xi_i > y)``."""
    _positive(x=x, y=y, v=v, w=w)
    split = FukSplit.from_p(p)
    if not 0.0 <= tail_max_prob <= 1.0:
        raise DomainError("tail_max_prob must lie in [0, 1]")
    a, b = split.fuk_alpha, split.fuk_beta
    first = -(a * a * x * x) / (2.0 * math.exp(p) * v)
    second = -(b * x / y) * math.log1p(b * x * y ** (p - 1.0) / w)
    return BoundResult("thm22", Branch.SINGLE, (first, second, _log(tail_max_prob)))


def union_markov_tail(pmom_sum, y, p):
    """``sum_i P(xi_i > y) <= pmom_sum / y**p``, capped at one."""
    _positive(y=y)
    _nonnegative(pmom_sum=pmom_sum)
    return min(1.0, pmom_sum / y**p)


def fuk_nagaev_bound(x, params: MomentParams):
    """``exp(-x^2 / (2 V^2)) + C_p / x^p`` with aggregate-sup constants."""
    _positive(x=x)
    return _fuk_form("fuk-nagaev", x, params.p, params.v_squared, params.c_p)


def fuk_original_bound(x, params: MomentParams):
    """Same form as :func:`fuk_nagaev_bound` with per-step-sum constants."""
    _positive(x=x)
    if params.per_step_quad_sum is None or params.per_step_pmom_sum is None:
        raise DomainError("fuk_original_bound needs per_step_quad_sum and per_step_pmom_sum")
    return _fuk_form("fuk-original", x, params.p, params.v_squared_tilde, params.c_p_tilde)


def _fuk_form(name, x, p, v2, cp):
    first = -x * x / (2.0 * v2) if v2 > 0 else NEG_INF
    second = _log(cp) - p * math.log(x)
    return BoundResult(name, Branch.SINGLE, (first, second))


def theorem23_bound(x, v, p, delta, trunc_sum):
    """Bound given ``<S>_k <= v^2`` and the truncated moment sum
    ``sum_i E[|xi_i|^(p+delta) 1{xi_i > x^(p/(p+delta))}]``."""
    _positive(x=x, v=v, delta=delta)
    _check_p(p)
    _nonnegative(trunc_sum=trunc_sum)
    r = (2.0 * p + delta) / (p + delta)
    first = -x * x / (2.0 * (v * v + x**r / 3.0))
    second = _log(trunc_sum) - p * math.log(x)
    return BoundResult("thm23", Branch.SINGLE, (first, second))


def truncation_level(x, p, delta):
    """Level ``x^(p/(p+delta))`` above which increments enter ``trunc_sum``."""
    return x ** (p / (p + delta))


def corollary23_bound(x, v, n, p, delta, trunc_sum, quad_char_moment):
    """Unconditional version; ``quad_char_moment = E|<S>_n / n|^((p+delta)/2)``."""
    _positive(x=x, v=v, delta=delta)
    _check_p(p)
    if n < 1:
        raise DomainError("n must be a positive count")
    _nonnegative(trunc_sum=trunc_sum, quad_char_moment=quad_char_moment)
    r = (2.0 * p + delta) / (p + delta)
    first = -x * x / (2.0 * (n * v * v + x**r / 3.0))
    second = _log(trunc_sum) - p * math.log(x)
    third = _log(quad_char_moment) - (p + delta) * math.log(v)
    return BoundResult("cor23", Branch.SINGLE, (first, second, third))


def corollary23_balanced_v(x, n, p, delta):
    """``v`` solving ``n v^2 = (2/3) x^((2p+delta)/(p+delta))``."""
    r = (2.0 * p + delta) / (p + delta)
    return math.sqrt(2.0 * x**r / (3.0 * n))


def ldp_rate(alpha, x, n, bound):
    """``log(bound) / n**alpha``; ``bound`` is a probability or a BoundResult.

    A BoundResult is read through its log value, so the rate stays finite
    where the bound itself underflows.
    """
    _check_alpha(alpha)
    _positive(x=x)
    if isinstance(bound, BoundResult):
        log_value = bound.log_value
        if log_value == NEG_INF:
            raise DomainError("bound value must be positive")
    else:
        if not bound > 0:
            raise DomainError(f"bound value must be positive, got {bound}")
        log_value = math.log(bound)
    return log_value / n**alpha


def single_jump_rate(law, alpha, x, eps, n):
    """``log P(xi_1 >= n(x+eps)) / n**alpha`` from a law's exact log tail.

    Lower-bounds the rate of ``P(max_k S_k >= n x)`` up to the vanishing
    factor ``P(S_n - xi_1 >= -n eps)``.
    """
    _positive(x=x, eps=eps)
    return float(law.log_sf(n * (x + eps))) / n**alpha
