"""Martingale-difference constructions, their samplers and moment oracles.

Paths are generated from counter-based uniforms, so ``(seed, stream)``
pins a path down completely and a batch of streams is just the stack of
the corresponding single paths.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import rng
from .errors import DomainError, HypothesisError
from .laws import Law, law_from_dict


class ModelKind(str, Enum):
    IID_SUBEXP = "iid-subexp"
    IID_MOMENT = "iid-moment"
    SELF_NORMALIZED = "self-normalized"
    RANDOM_WEIGHTED = "random-weighted"
    PNORM_WEIGHTED = "pnorm-weighted"
    REGRESSION_DRIVEN = "regression-driven"
    MIXTURE_VARIANCE = "mixture-variance"


# ---------------------------------------------------------------------------
# moment oracle


@dataclass(frozen=True)
class Functional:
    """A function ``f`` whose expectation ``E[f(X)]`` is wanted.

    kinds: ``identity``, ``quad`` (x^2), ``subexp_weighted`` (x^2 e^{(x+)^a}),
    ``subexp_weighted_abs`` (x^2 e^{|x|^a}), ``abs_p`` (|x|^p), ``pos_p``
    ((x+)^p), ``trunc_p_delta`` (|x|^{p+d} 1{x > threshold}), ``exp_pos``
    (e^{(x+)^a}) and ``exp_abs`` (e^{|x|^a}).
    """

    kind: str
    alpha: float = 0.0
    p: float = 0.0
    delta: float = 0.0
    threshold: float = 0.0

    _KINDS = (
        "identity",
        "quad",
        "subexp_weighted",
        "subexp_weighted_abs",
        "abs_p",
        "pos_p",
        "trunc_p_delta",
        "exp_pos",
        "exp_abs",
    )

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise DomainError(f"unknown functional {self.kind!r}")

    @property
    def growth(self):
        """``(exp_power, poly_power)`` of ``|f(x)|`` as ``x -> +inf`` and ``-inf``."""
        k = self.kind
        if k == "identity":
            return (0.0, 1.0), (0.0, 1.0)
        if k == "quad":
            return (0.0, 2.0), (0.0, 2.0)
        if k == "subexp_weighted":
            return (self.alpha, 2.0), (0.0, 2.0)
        if k == "subexp_weighted_abs":
            return (self.alpha, 2.0), (self.alpha, 2.0)
        if k == "abs_p":
            return (0.0, self.p), (0.0, self.p)
        if k == "pos_p":
            return (0.0, self.p), (0.0, 0.0)
        if k == "trunc_p_delta":
            return (0.0, self.p + self.delta), (0.0, 0.0)
        if k == "exp_pos":
            return (self.alpha, 0.0), (0.0, 0.0)
        return (self.alpha, 0.0), (self.alpha, 0.0)

    def log_abs(self, x):
        """``log|f(x)|`` (``-inf`` where ``f`` vanishes) and the sign of ``f``."""
        x = np.asarray(x, dtype=float)
        t = np.abs(x)
        pos = np.maximum(x, 0.0)
        with np.errstate(divide="ignore"):
            lt = np.log(t)
            k = self.kind
            if k == "identity":
                return lt, np.sign(x)
            if k == "quad":
                out = 2.0 * lt
            elif k == "subexp_weighted":
                out = 2.0 * lt + pos**self.alpha
            elif k == "subexp_weighted_abs":
                out = 2.0 * lt + t**self.alpha
            elif k == "abs_p":
                out = self.p * lt
            elif k == "pos_p":
                out = np.where(x > 0, self.p * lt, -np.inf)
            elif k == "trunc_p_delta":
                out = np.where(x > self.threshold, (self.p + self.delta) * lt, -np.inf)
            elif k == "exp_pos":
                out = pos**self.alpha
            else:
                out = t**self.alpha
        return out, np.ones_like(x)

    def __call__(self, x):
        la, s = self.log_abs(x)
        return s * np.exp(la)


def _integrable(law: Law, fn: Functional):
    tail = law.tail
    up, down = fn.growth
    ok_up = tail.integrable(*up)
    ok_down = tail.integrable(*down)
    return ok_up and ok_down


def moment_oracle(law: Law, fn: Functional, epsabs=1e-10):
    """``E[fn(X)]`` by adaptive quadrature, split at 0, at the law's kinks
    and at the truncation threshold.

    The integrand is assembled in the log domain, which keeps factors such
    as ``exp(x**alpha) * density`` finite far in the tail.
    """
    if not _integrable(law, fn):
        raise DomainError(f"E[{fn.kind}] diverges for {law.kind}: tail too heavy")
    atoms = law.atoms()
    if atoms is not None:
        values, probs = atoms
        return float(math.fsum(fn(values) * probs))
    return _quad_moment(law, fn, epsabs)


def _quad_moment(law, fn, epsabs):
    cuts = {0.0, *law.breakpoints}
    if fn.kind == "trunc_p_delta":
        cuts.add(float(fn.threshold))
    cuts = sorted(cuts)
    edges = [-np.inf, *cuts, np.inf]

    def integrand(x):
        la, s = fn.log_abs(x)
        lp = law.logpdf(x)
        v = la + lp
        return float(s * np.exp(v)) if v > -np.inf else 0.0

    total = []
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=epsabs / len(edges), epsrel=1e-12, limit=400)
        total.append(val)
    return math.fsum(total)


@lru_cache(maxsize=4096)
def cached_moment(law, fn):
    """Memoised :func:`moment_oracle`; laws and functionals are hashable.

    Closed-form second moments take precedence over quadrature.
    """
    if fn.kind == "quad" and law.second_moment() is not None:
        return float(law.second_moment())
    return moment_oracle(law, fn)


def quad_moment(law):
    return cached_moment(law, Functional("quad"))


def abs_moment(law, p):
    return cached_moment(law, Functional("abs_p", p=p))


def subexp_moment(law, alpha, two_sided=False):
    kind = "subexp_weighted_abs" if two_sided else "subexp_weighted"
    return cached_moment(law, Functional(kind, alpha=alpha))


def trunc_moment(law, p, delta, threshold):
    return cached_moment(law, Functional("trunc_p_delta", p=p, delta=delta, threshold=float(threshold)))


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class MartingaleModel:
    """Declarative description of a martingale-difference sequence.

    ``base`` is the law of the i.i.d. innovations (the inner martingale for
    weighted kinds, the noise for the regression kind). ``weight_law`` drives
    the random weights, ``design_law`` the regressors and ``scales`` /
    ``scale_probs`` the predictable volatility of the mixture kind.
    """

    kind: ModelKind
    n: int
    base: Law
    alpha: float = None
    p: float = None
    delta: float = None
    weight_law: Law = None
    design_law: Law = None
    scales: tuple = None
    scale_probs: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if isinstance(self.base, dict):
            object.__setattr__(self, "base", law_from_dict(self.base))
        for name in ("weight_law", "design_law"):
            v = getattr(self, name)
            if isinstance(v, dict):
                object.__setattr__(self, name, law_from_dict(v))
        if self.scales is not None:
            object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
            object.__setattr__(self, "scale_probs", tuple(float(s) for s in self.scale_probs))
        self._validate()

    def _validate(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"path length n must be a positive integer, got {self.n}")
        if self.alpha is not None and not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.p is not None and self.p < 1:
            raise DomainError(f"p must be at least 1, got {self.p}")
        if self.delta is not None and not self.delta > 0:
            raise DomainError("delta must be positive")
        kind = self.kind
        base = self.base
        if kind != ModelKind.SELF_NORMALIZED and not base.symmetric and abs(base.mean()) > 1e-9:
            raise HypothesisError(f"base law {base.kind} is not centred")
        if kind == ModelKind.IID_SUBEXP:
            self._need("alpha")
            if not _integrable(base, Functional("subexp_weighted", alpha=self.alpha)):
                raise HypothesisError("E[xi^2 exp((xi+)^alpha)] is infinite for this base law")
        elif kind == ModelKind.IID_MOMENT:
            self._need("p")
            order = self.p + (self.delta or 0.0)
            if not _integrable(base, Functional("abs_p", p=order)):
                raise HypothesisError(f"E|xi|^{order} is infinite for this base law")
        elif kind == ModelKind.SELF_NORMALIZED:
            if not (base.symmetric and base.unbounded):
                raise HypothesisError("self-normalisation needs a symmetric, unbounded base law")
        elif kind in (ModelKind.RANDOM_WEIGHTED, ModelKind.PNORM_WEIGHTED):
            if self.weight_law is None or not self.weight_law.unbounded:
                raise HypothesisError("weighted kinds need an unbounded weight_law")
            if kind == ModelKind.RANDOM_WEIGHTED:
                self._need("alpha")
                if quad_moment(base) < 1.0 - 1e-12:
                    raise HypothesisError("random weighting needs E[xi^2] >= 1")
                if not _integrable(base, Functional("subexp_weighted_abs", alpha=self.alpha)):
                    raise HypothesisError("E[xi^2 exp(|xi|^alpha)] is infinite")
            else:
                self._need("p")
                if self.p < 2:
                    raise HypothesisError("p-norm weighting needs p >= 2")
                if abs_moment(base, self.p) < 1.0 - 1e-12:
                    raise HypothesisError("p-norm weighting needs E|xi|^p >= 1")
        elif kind == ModelKind.REGRESSION_DRIVEN:
            if self.design_law is None:
                raise HypothesisError("regression-driven kind needs a design_law")
        elif kind == ModelKind.MIXTURE_VARIANCE:
            if not self.scales or len(self.scales) != len(self.scale_probs):
                raise HypothesisError("mixture-variance kind needs matching scales and scale_probs")
            if min(self.scales) <= 0 or abs(math.fsum(self.scale_probs) - 1.0) > 1e-12:
                raise HypothesisError("scales must be positive and scale_probs a probability vector")

    def _need(self, name):
        if getattr(self, name) is None:
            raise DomainError(f"{self.kind.value} model needs {name}")

    @property
    def extendable(self):
        """Kinds whose paths can be continued indefinitely."""
        return self.kind in (ModelKind.IID_SUBEXP, ModelKind.IID_MOMENT, ModelKind.MIXTURE_VARIANCE)

    def with_n(self, n):
        from dataclasses import replace

        return replace(self, n=int(n))

    def to_dict(self):
        d = {"kind": self.kind.value, "n": int(self.n), "base": self.base.to_dict()}
        for name in ("alpha", "p", "delta"):
            if getattr(self, name) is not None:
                d[name] = getattr(self, name)
        for name in ("weight_law", "design_law"):
            if getattr(self, name) is not None:
                d[name] = getattr(self, name).to_dict()
        if self.scales is not None:
            d["scales"] = list(self.scales)
            d["scale_probs"] = list(self.scale_probs)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {
            "kind",
            "n",
            "base",
            "alpha",
            "p",
            "delta",
            "weight_law",
            "design_law",
            "scales",
            "scale_probs",
        }
        if unknown:
            raise DomainError(f"unknown model keys: {sorted(unknown)}")
        if "kind" not in d or "n" not in d or "base" not in d:
            raise DomainError("model needs kind, n and base")
        return cls(**d)


@dataclass
class PathBatch:
    """Increments for a block of streams plus whatever the conditional
    moments depend on (weights, regressor magnitudes, volatilities)."""

    increments: np.ndarray
    seed: int
    streams: np.ndarray
    weights: np.ndarray = None
    design: np.ndarray = None
    noise: np.ndarray = None
    scales: np.ndarray = None

    @property
    def partials(self):
        return np.cumsum(self.increments, axis=1)


@dataclass
class MartingalePath:
    increments: np.ndarray
    partials: np.ndarray
    seed: int
    stream: int
    aux: dict = field(default_factory=dict)


@dataclass
class PathMoments:
    """Running sums of conditional moments, indexed ``k = 1..n``.

    ``upsilon_exact`` is False when the per-step subexponential term is the
    weight-times-base upper estimate rather than the exact conditional value.
    """

    quad_char: np.ndarray
    upsilon: np.ndarray
    xi: np.ndarray
    pmom: np.ndarray
    upsilon_exact: bool = True


def sample_paths(model: MartingaleModel, seed, streams, n_steps=None, step0=0):
    """Sample a batch of paths, one per entry of ``streams``.

    ``n_steps``/``step0`` select a window of an extendable path; finite
    constructions (normalised, weighted, regression) always use ``model.n``.
    """
    streams = np.atleast_1d(np.asarray(streams, dtype=np.uint64))
    if not model.extendable:
        if step0 != 0 or (n_steps is not None and n_steps != model.n):
            raise DomainError(f"{model.kind.value} paths have fixed length {model.n}")
    n = int(model.n if n_steps is None else n_steps)
    kind = model.kind
    u = rng.uniforms(seed, streams, n, rng.TAG_MAGNITUDE, step0)
    innov = model.base.sample(u[..., 0], u[..., 1])
    batch = PathBatch(innov, int(seed), streams)
    if kind in (ModelKind.IID_SUBEXP, ModelKind.IID_MOMENT):
        return batch
    if kind == ModelKind.MIXTURE_VARIANCE:
        us = rng.uniforms(seed, streams, n, rng.TAG_SCALE, step0)[..., 0]
        cum = np.cumsum(model.scale_probs)
        cum[-1] = 1.0
        sig = np.asarray(model.scales)[np.searchsorted(cum, us, side="right").clip(max=len(cum) - 1)]
        batch.scales = sig
        batch.increments = sig * innov
        return batch
    if kind == ModelKind.SELF_NORMALIZED:
        # magnitudes are revealed up front, signs one at a time
        w = np.abs(innov) / np.sqrt(np.sum(innov * innov, axis=1, keepdims=True))
        batch.weights = w
        batch.increments = np.copysign(w, innov)
        return batch
    if kind in (ModelKind.RANDOM_WEIGHTED, ModelKind.PNORM_WEIGHTED):
        uw = rng.uniforms(seed, streams, n, rng.TAG_WEIGHT, step0)
        eps = model.weight_law.sample(uw[..., 0], uw[..., 1])
        if kind == ModelKind.RANDOM_WEIGHTED:
            norm = np.sqrt(np.sum(eps * eps, axis=1, keepdims=True))
        else:
            a = np.abs(eps)
            amax = a.max(axis=1, keepdims=True)
            norm = amax * np.sum((a / amax) ** model.p, axis=1, keepdims=True) ** (1.0 / model.p)
        w = np.abs(eps) / norm
        batch.weights = w
        batch.increments = innov * np.sign(eps) * w
        return batch
    # regression-driven: xi_i = phi_i eps_i / sqrt(sum phi^2)
    ud = rng.uniforms(seed, streams, n, rng.TAG_DESIGN, step0)
    phi = model.design_law.sample(ud[..., 0], ud[..., 1])
    energy = np.sum(phi * phi, axis=1, keepdims=True)
    if np.any(energy == 0):
        from .errors import DegenerateDesignError

        raise DegenerateDesignError("sampled design has zero energy")
    batch.design = phi
    batch.noise = innov
    batch.weights = np.abs(phi) / np.sqrt(energy)
    batch.increments = phi * innov / np.sqrt(energy)
    return batch


def sample_path(model: MartingaleModel, seed, stream):
    """One path; bit-identical to row ``stream`` of any batch containing it."""
    b = sample_paths(model, seed, [stream])
    partials = np.concatenate([[0.0], np.cumsum(b.increments[0])])
    aux = {}
    for name in ("weights", "design", "noise", "scales"):
        v = getattr(b, name)
        if v is not None:
            aux[name] = v[0]
    # increments are re-read off the partial sums so S_k - S_{k-1} = xi_k holds exactly
    return MartingalePath(np.diff(partials), partials, int(seed), int(stream), aux)


def _per_step_terms(model: MartingaleModel, weights=None, scales=None, p=None):
    """Per-step conditional moments ``(quad, upsilon, xi, pmom)`` with the
    flag telling whether ``upsilon`` is exact."""
    base = model.base
    p = p if p is not None else (model.p if model.p is not None else 2.0)
    a = model.alpha
    kind = model.kind
    if kind in (ModelKind.IID_SUBEXP, ModelKind.IID_MOMENT):
        q = quad_moment(base)
        u = subexp_moment(base, a) if a is not None else np.nan
        xi = cached_moment(base, Functional("pos_p", p=p))
        pm = abs_moment(base, p)
        return q, u, xi, pm, True
    if kind == ModelKind.MIXTURE_VARIANCE:
        sig = scales
        q = sig**2 * quad_moment(base)
        pm = sig**p * abs_moment(base, p)
        xi = sig**p * cached_moment(base, Functional("pos_p", p=p))
        if a is None:
            u = np.full_like(sig, np.nan)
        else:
            table = {
                s: moment_oracle(_Scaled(base, s), Functional("subexp_weighted", alpha=a))
                for s in model.scales
            }
            u = np.vectorize(table.__getitem__)(sig)
        return q, u, xi, pm, True
    w = weights
    if kind == ModelKind.SELF_NORMALIZED:
        # xi_i = +-w_i with a fair sign
        q = w * w
        u = w * w * (np.exp(w**a) + 1.0) / 2.0 if a is not None else np.full_like(w, np.nan)
        xi = w**p / 2.0
        pm = w**p
        return q, u, xi, pm, True
    # weighted and regression kinds: weight magnitude times base moment;
    # the subexponential term uses the two-sided base moment as an upper bound
    q = w * w * quad_moment(base)
    pm = w**p * abs_moment(base, p)
    if base.symmetric:
        xi = w**p * abs_moment(base, p) / 2.0
    else:
        xi = w**p * cached_moment(base, Functional("pos_p", p=p))
    u = w * w * subexp_moment(base, a, two_sided=True) if a is not None else np.full_like(w, np.nan)
    return q, u, xi, pm, False


@dataclass(frozen=True)
class _Scaled(Law):
    """Law of ``s * X``; used only inside the moment oracle."""

    inner: Law = None
    s: float = 1.0

    @property
    def tail(self):
        from .laws import TailShape

        t = self.inner.tail
        if t.bounded or t.shape == 0.0:
            return t
        return TailShape(shape=t.shape, rate=t.rate / self.s**t.shape, poly=t.poly)

    @property
    def breakpoints(self):
        return tuple(self.s * b for b in self.inner.breakpoints)

    def logpdf(self, x):
        return self.inner.logpdf(np.asarray(x) / self.s) - math.log(self.s)

    def atoms(self):
        a = self.inner.atoms()
        return None if a is None else (a[0] * self.s, a[1])


def path_moments(model: MartingaleModel, path, p=None):
    """Running ``<S>_k``, ``Upsilon(S)_k``, ``Xi(S)_k`` and ``sum E|xi|^p``."""
    if isinstance(path, MartingalePath):
        n = len(path.increments)
        weights = path.aux.get("weights")
        scales = path.aux.get("scales")
    else:
        n = path.increments.shape[-1]
        weights, scales = path.weights, path.scales
    if n != model.n and not model.extendable:
        raise DomainError("path length does not match the model")
    if model.kind in (ModelKind.IID_SUBEXP, ModelKind.IID_MOMENT):
        q, u, xi, pm, exact = _per_step_terms(model, p=p)
        k = np.arange(1, n + 1, dtype=float)
        shape = (n,) if isinstance(path, MartingalePath) else path.increments.shape
        k = np.broadcast_to(k, shape)
        return PathMoments(q * k, u * k, xi * k, pm * k, exact)
    if weights is None and scales is None:
        raise DomainError("path carries no weights for this model kind")
    q, u, xi, pm, exact = _per_step_terms(model, weights=weights, scales=scales, p=p)
    cs = lambda v: np.cumsum(v, axis=-1)  # noqa: E731
    return PathMoments(cs(q), cs(u), cs(xi), cs(pm), exact)


# ---------------------------------------------------------------------------
# essential sups


@dataclass(frozen=True)
class SupEstimate:
    """Value used for an essential sup; ``lower_estimate`` marks a
    Monte Carlo maximum, which can only undershoot the true sup."""

    value: float
    analytic: bool
    lower_estimate: bool = False


def analytic_sups(model: MartingaleModel, p=None):
    """Known upper bounds on ``||<S>_n||``, ``||Upsilon(S)_n||`` and
    ``||sum E|xi|^p||``; entries are ``None`` when no closed form applies."""
    p = p if p is not None else (model.p if model.p is not None else 2.0)
    base, n, a = model.base, model.n, model.alpha
    kind = model.kind
    out = {"quad": None, "upsilon": None, "pmom": None}
    if kind in (ModelKind.IID_SUBEXP, ModelKind.IID_MOMENT):
        out["quad"] = n * quad_moment(base)
        out["pmom"] = n * abs_moment(base, p)
        if a is not None:
            out["upsilon"] = n * subexp_moment(base, a)
    elif kind == ModelKind.MIXTURE_VARIANCE:
        smax = max(model.scales)
        out["quad"] = n * smax**2 * quad_moment(base)
        out["pmom"] = n * smax**p * abs_moment(base, p)
    elif kind == ModelKind.SELF_NORMALIZED:
        out["quad"] = 1.0
        out["upsilon"] = math.e
        out["pmom"] = 1.0 if p >= 2 else None
    elif kind == ModelKind.RANDOM_WEIGHTED:
        out["quad"] = quad_moment(base)
        out["upsilon"] = subexp_moment(base, a, two_sided=True)
        if p >= 2:
            out["pmom"] = abs_moment(base, p)
    elif kind == ModelKind.PNORM_WEIGHTED:
        # power-mean inequality: sum w_i^2 <= n^(1 - 2/p) when sum w_i^p = 1
        out["quad"] = n ** (1.0 - 2.0 / model.p) * quad_moment(base)
        out["pmom"] = abs_moment(base, model.p) if p == model.p else None
        if a is not None:
            out["upsilon"] = n ** (1.0 - 2.0 / model.p) * subexp_moment(base, a, two_sided=True)
    elif kind == ModelKind.REGRESSION_DRIVEN:
        out["quad"] = quad_moment(base)
        if p >= 2:
            out["pmom"] = abs_moment(base, p)
        if a is not None:
            out["upsilon"] = subexp_moment(base, a, two_sided=True)
    return out


def ess_sup(model: MartingaleModel, which, batch=None, p=None):
    """Analytic sup where one is known, else the max over ``batch``."""
    known = analytic_sups(model, p)[which]
    if known is not None:
        return SupEstimate(float(known), analytic=True)
    if batch is None:
        raise DomainError(f"no closed form for the {which} sup; pass simulated paths")
    pmts = path_moments(model, batch, p)
    field_name = {"quad": "quad_char", "upsilon": "upsilon", "pmom": "pmom"}[which]
    return SupEstimate(float(np.max(getattr(pmts, field_name)[..., -1])), analytic=False, lower_estimate=True)


def per_step_sum(model: MartingaleModel, which, batch, p=None):
    """Monte Carlo estimate of ``sum_i ||E[. | F_{i-1}]||_inf``: per-step
    maxima over the simulated paths, summed over steps (a lower estimate)."""
    if model.kind in (ModelKind.IID_SUBEXP, ModelKind.IID_MOMENT):
        return SupEstimate(float(analytic_sups(model, p)[which]), analytic=True)
    pmts = path_moments(model, batch, p)
    field_name = {"quad": "quad_char", "upsilon": "upsilon", "pmom": "pmom"}[which]
    running = getattr(pmts, field_name)
    steps = np.diff(running, axis=-1, prepend=0.0)
    return SupEstimate(float(np.sum(np.max(steps, axis=0))), analytic=False, lower_estimate=True)


def conditional_variances(model: MartingaleModel, batch: PathBatch):
    """Per-step ``E[xi_k^2 | F_{k-1}]`` with the batch's shape."""
    shape = batch.increments.shape
    if model.kind in (ModelKind.IID_SUBEXP, ModelKind.IID_MOMENT):
        return np.full(shape, quad_moment(model.base))
    if model.kind == ModelKind.MIXTURE_VARIANCE:
        return batch.scales**2 * quad_moment(model.base)
    return batch.weights**2 * quad_moment(model.base)
