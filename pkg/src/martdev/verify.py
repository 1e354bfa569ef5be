"""Monte Carlo tail estimation and the statistics used to test bounds.

Replications are split into fixed-size chunks of consecutive stream
indices, so results do not depend on the chunk schedule or thread count.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .bounds import BoundResult
from .errors import DivergenceError, DomainError, HypothesisError
from .laws import Law
from .models import (
    Functional,
    MartingaleModel,
    ModelKind,
    abs_moment,
    cached_moment,
    conditional_variances,
    sample_paths,
)
from .regression import RegressionConfig, simulate_regression

CI_LEVEL = 0.99
CHUNK = 4096
MIN_HITS = 5

STATISTICS = ("S_n", "abs_S_n", "max_partial", "max_abs_partial", "normalized_error", "abs_normalized_error")


@dataclass(frozen=True)
class TailEstimate:
    x: float
    reps: int
    hits: int
    ci_low: float
    ci_high: float
    level: float = CI_LEVEL

    @property
    def p_hat(self):
        return self.hits / self.reps

    @property
    def std_err(self):
        p = self.p_hat
        return math.sqrt(p * (1.0 - p) / self.reps)


def clopper_pearson(hits, reps, level=CI_LEVEL):
    """Exact two-sided binomial interval."""
    if reps < 1 or not 0 <= hits <= reps:
        raise DomainError(f"need 0 <= hits <= reps and reps >= 1, got {hits}/{reps}")
    a = 1.0 - level
    lo = 0.0 if hits == 0 else float(stats.beta.ppf(a / 2, hits, reps - hits + 1))
    hi = 1.0 if hits == reps else float(stats.beta.ppf(1 - a / 2, hits + 1, reps - hits))
    return lo, hi


def tail_from_values(values, x, level=CI_LEVEL):
    """Exceedance count of ``values >= x`` with its exact interval."""
    values = np.asarray(values)
    if values.size == 0:
        raise DomainError("no replications")
    hits = int(np.count_nonzero(values >= x))
    lo, hi = clopper_pearson(hits, values.size, level)
    return TailEstimate(float(x), int(values.size), hits, lo, hi, level)


# ---------------------------------------------------------------------------
# simulation


def _statistic(increments, statistic):
    if statistic in ("S_n", "abs_S_n", "normalized_error", "abs_normalized_error"):
        s = np.sum(increments, axis=1)
        return np.abs(s) if statistic.startswith("abs") else s
    partials = np.cumsum(increments, axis=1)
    if statistic == "max_partial":
        return partials.max(axis=1)
    return np.abs(partials).max(axis=1)


def _chunk_values(target, statistic, seed, lo, hi):
    streams = np.arange(lo, hi, dtype=np.uint64)
    if isinstance(target, RegressionConfig):
        if statistic not in ("normalized_error", "abs_normalized_error"):
            raise DomainError(f"regression experiments support normalized_error statistics, not {statistic}")
        _, _, err = simulate_regression(target, seed, streams)
        return np.abs(err) if statistic == "abs_normalized_error" else err
    return _statistic(sample_paths(target, seed, streams).increments, statistic)


def simulate_statistic(target, statistic, reps, seed, threads=None, chunk=CHUNK, stream0=0):
    """Statistic values for streams ``stream0 .. stream0 + reps - 1``.

    ``target`` is a :class:`MartingaleModel` or a :class:`RegressionConfig`.
    """
    if statistic not in STATISTICS:
        raise DomainError(f"unknown statistic {statistic!r}; expected one of {STATISTICS}")
    if reps < 1:
        raise DomainError("reps must be at least 1")
    edges = list(range(stream0, stream0 + reps, chunk)) + [stream0 + reps]
    jobs = list(zip(edges[:-1], edges[1:]))
    if threads and threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda j: _chunk_values(target, statistic, seed, *j), jobs))
    else:
        parts = [_chunk_values(target, statistic, seed, *j) for j in jobs]
    return np.concatenate(parts)


def simulate_statistic_with_design(config: RegressionConfig, reps, seed, chunk=CHUNK):
    """Regression replications keeping the designs: ``(phi, eps, errors)``."""
    parts = [
        simulate_regression(config, seed, np.arange(lo, min(lo + chunk, reps), dtype=np.uint64))
        for lo in range(0, reps, chunk)
    ]
    return tuple(np.concatenate([q[i] for q in parts]) for i in range(3))


def empirical_tail(model, n, x, reps, statistic, seed, threads=None):
    """Estimate ``P(statistic >= x)`` from ``reps`` independent paths of length ``n``."""
    target = _with_n(model, n)
    values = simulate_statistic(target, statistic, reps, seed, threads)
    return tail_from_values(values, x)


def empirical_tails(model, n, xs, reps, statistic, seed, threads=None):
    """One simulation, many thresholds."""
    values = simulate_statistic(_with_n(model, n), statistic, reps, seed, threads)
    return [tail_from_values(values, x) for x in xs]


def _with_n(target, n):
    if n is None:
        return target
    if isinstance(target, RegressionConfig):
        from dataclasses import replace

        return replace(target, n=int(n))
    return target.with_n(n)


# ---------------------------------------------------------------------------
# domination


@dataclass(frozen=True)
class DominationCell:
    x: float
    bound: float
    estimate: TailEstimate
    verdict: str

    @property
    def margin(self):
        """``bound - ci_high``; negative means the interval pokes above the bound."""
        return self.bound - self.estimate.ci_high


@dataclass(frozen=True)
class DominationReport:
    cells: tuple
    sides: int = 1

    @property
    def verdict(self):
        vs = {c.verdict for c in self.cells}
        if "FAIL" in vs:
            return "FAIL"
        return "WEAK-PASS" if "WEAK-PASS" in vs else "PASS"

    @property
    def passed(self):
        return self.verdict != "FAIL"


def cell_verdict(bound_value, est: TailEstimate, sides=1):
    """PASS when ``sides * bound`` clears the upper confidence limit.

    With fewer than five hits, or a bound too small to expect five, the
    same comparison is reported as WEAK-PASS.
    """
    b = sides * bound_value
    if b < est.ci_high:
        return "FAIL"
    if est.hits < MIN_HITS or min(b, 1.0) * est.reps < MIN_HITS:
        return "WEAK-PASS"
    return "PASS"


def domination_check(bound_curve, estimates, sides=1):
    """Compare a bound (a callable ``x -> BoundResult`` or float) against
    tail estimates; ``sides=2`` when the statistic is an absolute value and
    the bound covers one sign."""
    if not estimates:
        raise DomainError("empty x grid")
    cells = []
    for est in estimates:
        b = bound_curve(est.x)
        b = b.value if isinstance(b, BoundResult) else float(b)
        cells.append(DominationCell(est.x, b, est, cell_verdict(b, est, sides)))
    return DominationReport(tuple(cells), sides)


# ---------------------------------------------------------------------------
# exhaustive enumeration for finite laws


def enumerate_distribution(law: Law, n, statistic):
    """All ``len(values)**n`` outcomes: ``(statistic values, probabilities)``."""
    atoms = law.atoms()
    if atoms is None:
        raise DomainError("enumeration needs a finite law")
    values, probs = atoms
    k = len(values)
    if k**n > 5_000_000:
        raise DomainError(f"{k}^{n} outcomes is too many to enumerate")
    idx = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.intp).reshape(-1, n)
    incr = values[idx]
    logp = np.sum(np.log(probs)[idx], axis=1)
    return _statistic(incr, statistic), np.exp(logp)


def exact_tail(law, n, x, statistic):
    stat, prob = enumerate_distribution(law, n, statistic)
    return math.fsum(prob[stat >= x])


def exact_max_increment_tail(law, n, y):
    """``P(max_i xi_i > y)`` for i.i.d. draws from a finite law."""
    values, probs = law.atoms()
    below = math.fsum(probs[values <= y])
    return 1.0 - below**n


# ---------------------------------------------------------------------------
# invariance principle


class PathExtender:
    """Lazily extends one path of an extendable model in doubling chunks."""

    def __init__(self, model: MartingaleModel, seed, stream, first_chunk=1024):
        if not model.extendable:
            raise DomainError(f"{model.kind.value} paths cannot be extended")
        self.model, self.seed, self.stream = model, seed, stream
        self._chunk = first_chunk
        self.increments = np.empty(0)
        self.quad = np.empty(0)

    def extend(self):
        k0 = len(self.increments)
        m = self.model.with_n(max(k0 + self._chunk, 1))
        batch = sample_paths(m, self.seed, [self.stream], n_steps=self._chunk, step0=k0)
        terms = conditional_variances(m, batch)[0]
        base = self.quad[-1] if k0 else 0.0
        self.increments = np.concatenate([self.increments, batch.increments[0]])
        self.quad = np.concatenate([self.quad, base + np.cumsum(terms)])
        self._chunk *= 2


def stopping_time(path_extension: PathExtender, n_level, cap=10_000_000):
    """Smallest ``k`` with ``<S>_k >= n_level``; ``0`` for a nonpositive level."""
    if n_level <= 0:
        return 0
    ext = path_extension
    while not len(ext.quad) or ext.quad[-1] < n_level:
        if len(ext.quad) >= cap:
            raise DivergenceError(f"<S>_k stayed below {n_level} for {cap} steps")
        ext.extend()
    k = int(np.searchsorted(ext.quad, n_level, side="left")) + 1
    if k > cap:
        raise DivergenceError(f"<S>_k stayed below {n_level} for {cap} steps")
    return k


def moment_ratio_bound(model: MartingaleModel):
    """``M`` with ``E[|xi|^3 | F] <= M E[xi^2 | F]``."""
    if not model.extendable:
        raise HypothesisError("the invariance experiment needs an i.i.d. or mixture-variance model")
    try:
        ratio = abs_moment(model.base, 3.0) / cached_moment(model.base, Functional("quad"))
    except DomainError:
        raise HypothesisError(f"third moment of {model.base.kind} is infinite; no finite M") from None
    if model.kind == ModelKind.MIXTURE_VARIANCE:
        ratio *= max(model.scales)
    return ratio


@dataclass
class InvariancePath:
    v_of: np.ndarray
    H: np.ndarray
    n: int
    M: float


@dataclass
class InvarianceEnsemble:
    """``H[r, j] = H_n(t_grid[j])`` for replication ``r``; ``v[r, m] = v(m)``."""

    t_grid: np.ndarray
    H: np.ndarray
    v: np.ndarray
    n: int
    M: float
    max_abs_partial: np.ndarray = field(default=None)

    def paths(self):
        for r in range(self.H.shape[0]):
            yield InvariancePath(self.v[r], self.H[r], self.n, self.M)


def _steps_needed(model, n):
    if model.kind == ModelKind.MIXTURE_VARIANCE:
        smin = min(model.scales)
        q = smin * smin * cached_moment(model.base, Functional("quad"))
    else:
        q = cached_moment(model.base, Functional("quad"))
    return int(math.ceil(n / q * (1 + 1e-12))) + 1


def invariance_paths(model: MartingaleModel, n, t_grid, reps, seed, stream0=0):
    """Sample ``H_n(t) = S_{v(floor(n t))} / sqrt(n)`` on ``t_grid``.

    ``v(0) = 0`` so every path starts at the origin. Stream ``r`` is the
    same path for every ``n``, so ensembles at different ``n`` share
    prefixes.
    """
    M = moment_ratio_bound(model)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any((t_grid < 0) | (t_grid > 1)):
        raise DomainError("t_grid must lie in [0, 1]")
    L = _steps_needed(model, n)
    m = model.with_n(L)
    Hs, vs, mx = [], [], []
    for lo in range(stream0, stream0 + reps, CHUNK):
        streams = np.arange(lo, min(lo + CHUNK, stream0 + reps), dtype=np.uint64)
        batch = sample_paths(m, seed, streams)
        quad = np.cumsum(conditional_variances(m, batch), axis=1)
        if np.any(quad[:, -1] < n):
            raise DivergenceError("quadratic characteristic did not reach n")
        levels = np.arange(n + 1, dtype=float)
        v = np.stack([np.searchsorted(row, levels, side="left") + 1 for row in quad])
        v[:, 0] = 0
        partials = np.concatenate([np.zeros((len(streams), 1)), np.cumsum(batch.increments, axis=1)], axis=1)
        idx = v[:, np.floor(n * t_grid).astype(int)]
        Hs.append(np.take_along_axis(partials, idx, axis=1) / math.sqrt(n))
        vs.append(v)
        mx.append(np.abs(partials[:, : n + 1]).max(axis=1))
    return InvarianceEnsemble(t_grid, np.concatenate(Hs), np.concatenate(vs), int(n), M, np.concatenate(mx))


# ---------------------------------------------------------------------------
# distributional comparisons


def ks_statistic(sample, reference_cdf=special.ndtr):
    """``sup_x |F_hat(x) - F(x)|`` evaluated at the sample breakpoints."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    m = x.size
    if m == 0:
        raise DomainError("empty sample")
    F = reference_cdf(x)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


def ecdf(sample, x_grid):
    s = np.sort(np.asarray(sample, dtype=float).ravel())
    if s.size == 0:
        raise DomainError("empty sample")
    return np.searchsorted(s, np.asarray(x_grid, dtype=float), side="right") / s.size


def _cdf_gap(sample, x):
    # compare survival functions on the right so 1 - Phi(x) keeps its digits
    F_hat = ecdf(sample, x)
    return np.where(x > 0, np.abs((1.0 - F_hat) - special.ndtr(-x)), np.abs(F_hat - special.ndtr(x)))


def nonuniform_cdf_gap(sample, p, x_grid):
    """``|F_hat(x) - Phi(x)| (1 + |x|^p)`` on ``x_grid``."""
    x = np.asarray(x_grid, dtype=float)
    return _cdf_gap(sample, x) * (1.0 + np.abs(x) ** p)


def nonuniform_gap_band(sample, p, x_grid, z):
    """Gap plus ``z`` binomial standard errors, scaled like the gap."""
    x = np.asarray(x_grid, dtype=float)
    m = np.asarray(sample).size
    F = special.ndtr(x)
    se = np.sqrt(F * (1.0 - F) / m)
    return (_cdf_gap(sample, x) + z * se) * (1.0 + np.abs(x) ** p)


def increment_correlation(H, t_grid, pairs):
    """Correlation of ``H(t2)-H(t1)`` with ``H(t4)-H(t3)`` and its standard
    error ``1/sqrt(reps)``; ``pairs`` is ``((t1, t2), (t3, t4))``."""
    t_grid = np.asarray(t_grid)

    def col(t):
        j = np.flatnonzero(np.isclose(t_grid, t))
        if j.size == 0:
            raise DomainError(f"t = {t} is not on the grid")
        return H[:, j[0]]

    (a, b), (c, d) = pairs
    d1 = col(b) - col(a)
    d2 = col(d) - col(c)
    r = float(np.corrcoef(d1, d2)[0, 1])
    return r, 1.0 / math.sqrt(H.shape[0])


def tightness_profile(max_abs, n, lambdas):
    """``P(max_i |S_i| >= lambda sqrt(n)) * lambda^2`` with the CI scaled likewise."""
    out = []
    for lam in lambdas:
        est = tail_from_values(max_abs, lam * math.sqrt(n))
        out.append((lam, est.p_hat * lam * lam, est.ci_low * lam * lam, est.ci_high * lam * lam))
    return out
