"""Bound registry and model-driven parameter choices.

A bound is named by a string and evaluated from a flat parameter dict.
Parameters may be numbers or callables of ``x`` (truncated moment sums
depend on the threshold). :func:`auto_params` fills in the constants a
model implies, so experiments only need to override what they want.
"""

import math

import numpy as np

from . import bounds as B
from . import regression as R
from .errors import DomainError, HypothesisError
from .laws import Law
from .models import (
    Functional,
    MartingaleModel,
    ModelKind,
    _Scaled,
    abs_moment,
    analytic_sups,
    cached_moment,
    moment_oracle,
    per_step_sum,
    quad_moment,
    subexp_moment,
    trunc_moment,
)


def _get(params, key, x):
    if key not in params or params[key] is None:
        raise DomainError(f"missing bound parameter {key!r}")
    v = params[key]
    return v(x) if callable(v) else v


def _subexp(params, x):
    return B.SubexpParams(_get(params, "alpha", x), _get(params, "c_n", x), _get(params, "u", x))


def _moment(params, x, original=False):
    kw = dict(
        p=_get(params, "p", x),
        quad_sup=_get(params, "quad_sup", x),
        pmom_sup=_get(params, "pmom_sup", x),
    )
    if original:
        kw["per_step_quad_sum"] = _get(params, "per_step_quad_sum", x)
        kw["per_step_pmom_sum"] = _get(params, "per_step_pmom_sum", x)
    return B.MomentParams(**kw)


def _cor23(x, q):
    v = q.get("v")
    if v is None:
        v = B.corollary23_balanced_v(x, _get(q, "n", x), _get(q, "p", x), _get(q, "delta", x))
    elif callable(v):
        v = v(x)
    return B.corollary23_bound(
        x,
        v,
        _get(q, "n", x),
        _get(q, "p", x),
        _get(q, "delta", x),
        _get(q, "trunc_sum", x),
        _get(q, "quad_char_moment", x),
    )


BOUNDS = {
    "ls": lambda x, q: B.ls_bound(
        x, _get(q, "y", x), _get(q, "n", x), _get(q, "K", x), _get(q, "alpha", x), _get(q, "e_moment", x)
    ),
    "theorem21": lambda x, q: B.theorem21_bound(x, _subexp(q, x)),
    "rough": lambda x, q: B.rough_bounds(x, _subexp(q, x))[0],
    "rough-unified": lambda x, q: B.rough_bounds(x, _subexp(q, x))[1],
    "theorem22": lambda x, q: B.theorem22_bound(
        x, _get(q, "y", x), _get(q, "v", x), _get(q, "w", x), _get(q, "p", x), _get(q, "tail_max_prob", x)
    ),
    "fuk-nagaev": lambda x, q: B.fuk_nagaev_bound(x, _moment(q, x)),
    "fuk-original": lambda x, q: B.fuk_original_bound(x, _moment(q, x, original=True)),
    "theorem23": lambda x, q: B.theorem23_bound(
        x, _get(q, "v", x), _get(q, "p", x), _get(q, "delta", x), _get(q, "trunc_sum", x)
    ),
    "corollary23": _cor23,
    "reg-subexp": lambda x, q: R.reg_bound_subexp(x, _get(q, "D", x), _get(q, "u", x), _get(q, "alpha", x))[0],
    "reg-subexp-unified": lambda x, q: R.reg_bound_subexp(x, _get(q, "D", x), _get(q, "u", x), _get(q, "alpha", x))[1],
    "reg-weibull": lambda x, q: R.reg_bound_weibull(
        x, _get(q, "n", x), _get(q, "E", x), _get(q, "F", x), _get(q, "alpha", x)
    ),
    "reg-condmoment": lambda x, q: R.reg_bound_condmoment(x, _get(q, "p", x), _get(q, "A", x)),
    "fuk-inflated": lambda x, q: R.reg_bound_fuk_inflated(x, _get(q, "p", x), _get(q, "A", x), _get(q, "n", x)),
    "reg-moment": lambda x, q: R.reg_bound_moment(
        x, _get(q, "p", x), _get(q, "delta", x), _get(q, "A", x), _get(q, "B", x)
    ),
    "reg-vonbahr": lambda x, q: R.reg_bound_vonbahr(x, _get(q, "p", x), _get(q, "A", x)),
}

# statistic each bound speaks about, and how many signs it must cover
STATISTIC = {
    "reg-subexp": "normalized_error",
    "reg-subexp-unified": "normalized_error",
    "reg-weibull": "normalized_error",
    "reg-condmoment": "normalized_error",
    "fuk-inflated": "normalized_error",
    "reg-moment": "normalized_error",
    "reg-vonbahr": "abs_normalized_error",
}


def default_statistic(name):
    return STATISTIC.get(name, "max_partial")


def evaluate(name, x, params):
    if name not in BOUNDS:
        raise DomainError(f"unknown bound {name!r}; expected one of {sorted(BOUNDS)}")
    return BOUNDS[name](float(x), params)


def bound_curve(name, params):
    if name not in BOUNDS:
        raise DomainError(f"unknown bound {name!r}; expected one of {sorted(BOUNDS)}")
    return lambda x: BOUNDS[name](float(x), params)


# ---------------------------------------------------------------------------
# constants implied by a model


def _upsilon_sup(model: MartingaleModel, alpha):
    if model.kind == ModelKind.MIXTURE_VARIANCE:
        per = max(
            moment_oracle(_Scaled(model.base, s), Functional("subexp_weighted", alpha=alpha)) for s in model.scales
        )
        return model.n * per
    return analytic_sups(model)["upsilon"]


def auto_params(name, target, batch=None, **hyper):
    """Constants for bound ``name`` implied by ``target``.

    ``target`` is a :class:`MartingaleModel` or a
    :class:`~martdev.regression.RegressionConfig`. ``batch`` (simulated
    paths) is needed only for Monte Carlo sups of the weighted kinds.
    Regression targets take ``alpha``, ``p``, ``delta`` and ``p_low`` as
    keywords since the noise law alone does not fix them.
    """
    if isinstance(target, R.RegressionConfig):
        per = regression_params(target, **hyper)["per_bound"]
        if name not in per:
            raise HypothesisError(f"{name} does not apply to this regression setup (missing or infinite moments)")
        return per[name]
    model = target
    n, base, a = model.n, model.base, model.alpha
    p = model.p if model.p is not None else 2.0
    delta = model.delta if model.delta is not None else 1.0
    out = {"n": n, "alpha": a, "p": p, "delta": delta}
    if name in ("theorem21", "rough", "rough-unified"):
        if a is None:
            raise HypothesisError(f"{name} needs a model with alpha")
        ups = _upsilon_sup(model, a)
        if ups is None:
            raise HypothesisError(f"no closed-form Upsilon sup for {model.kind.value}")
        u = max(ups, 1.0)
        out.update(u=u, c_n=u)
    elif name in ("fuk-nagaev", "fuk-original"):
        sups = analytic_sups(model, p)
        from .models import ess_sup

        out["quad_sup"] = sups["quad"] if sups["quad"] is not None else ess_sup(model, "quad", batch, p).value
        out["pmom_sup"] = sups["pmom"] if sups["pmom"] is not None else ess_sup(model, "pmom", batch, p).value
        if name == "fuk-original":
            out["per_step_quad_sum"] = max(per_step_sum(model, "quad", batch, p).value, out["quad_sup"])
            out["per_step_pmom_sum"] = max(per_step_sum(model, "pmom", batch, p).value, out["pmom_sup"])
    elif name in ("theorem23", "corollary23"):
        if model.kind not in (ModelKind.IID_MOMENT, ModelKind.IID_SUBEXP):
            raise HypothesisError(f"{name} constants are derived for i.i.d. kinds only")
        q = quad_moment(base)
        out["trunc_sum"] = lambda x: n * trunc_moment(base, p, delta, B.truncation_level(x, p, delta))
        if name == "theorem23":
            out["v"] = math.sqrt(n * q)
        else:
            out["quad_char_moment"] = q ** ((p + delta) / 2.0)
            out["v"] = None
    elif name == "theorem22":
        raise DomainError("theorem22 needs explicit y, v, w and tail_max_prob")
    elif name == "ls":
        K = subexp_moment(base, a)
        out.update(K=K, e_moment=cached_moment(base, Functional("exp_pos", alpha=a)))
    else:
        raise DomainError(f"bound {name!r} does not apply to a {model.kind.value} model")
    return out


def regression_params(cfg: R.RegressionConfig, alpha=None, p=None, delta=None, p_low=None):
    """Constants for every regression bound from the noise law."""
    law = cfg.eps_model
    if not isinstance(law, Law):
        raise DomainError("automatic regression constants need an i.i.d. noise law")
    mb = R.MomentBounds.from_law(law, alpha=alpha, p=p, delta=delta, p_low=p_low)
    out = {"n": cfg.n, "alpha": alpha, "delta": delta}
    per_bound = {}
    if alpha is not None and mb.D is not None:
        per_bound["reg-subexp"] = per_bound["reg-subexp-unified"] = {"alpha": alpha, "D": mb.D, "u": max(mb.D, 1.0)}
    if alpha is not None and mb.E is not None and mb.F is not None:
        per_bound["reg-weibull"] = {"alpha": alpha, "n": cfg.n, "E": mb.E, "F": mb.F}
    if p is not None and mb.A_cond is not None:
        per_bound["reg-condmoment"] = {"p": p, "A": mb.A_cond}
        per_bound["fuk-inflated"] = {"p": p, "A": mb.A_cond, "n": cfg.n}
    if p is not None and delta is not None and mb.B is not None and mb.A_var is not None:
        per_bound["reg-moment"] = {"p": p, "delta": delta, "A": mb.A_var, "B": mb.B}
    if p_low is not None and mb.A_vonbahr is not None:
        per_bound["reg-vonbahr"] = {"p": p_low, "A": mb.A_vonbahr}
    out["per_bound"] = per_bound
    out["moments"] = mb
    return out


def quantile_grid(values, levels):
    """Thresholds at which the empirical exceedance is about ``levels``."""
    values = np.sort(np.asarray(values))
    m = values.size
    xs = []
    for lv in levels:
        k = int(round(lv * m))
        if k < 1:
            continue
        xs.append(float(values[m - k]))
    return sorted(set(xs))


def ldp_params(law, alpha, n):
    """``u = C_n = max(n K, 1)`` for i.i.d. increments."""
    K = subexp_moment(law, alpha)
    u = max(n * K, 1.0)
    return B.SubexpParams(alpha, u, u)


def pmoment(law, p):
    return abs_moment(law, p)
