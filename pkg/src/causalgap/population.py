"""Population scoring gaps for bivariate models.

The gap is the backward-minus-forward difference of summed log residual
standard deviations. The backward residual variance E[Var(X1|X2)] (or its
log-mean for the heteroskedastic fit) is computed by an exact truncated-normal
reduction when the cause is Gaussian and the noise uniform, and by nested
adaptive quadrature of the joint density otherwise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from scipy.integrate import quad

from .errors import (
    ContractError,
    DegenerateIntervalError,
    DomainError,
    QuadratureError,
    ZeroDensityError,
)
from .sem import (
    BivariateAnm,
    EvenPower,
    Linear,
    SignedPower,
    linear,
    mechanism_moments,
    mechanism_range,
    power,
)
from .specfun import (
    Chi1Centered,
    Gaussian,
    Uniform,
    norm_cdf,
    truncated_normal_moments,
)

HOMOSKEDASTIC = "homoskedastic"
HETEROSKEDASTIC = "heteroskedastic"

_VAR_CLAMP = 1e-14
_TAIL = 1e-12


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and ranges for the nested integration.

    Outer integrals run at (abs_tol, rel_tol); inner integrals one order
    looser. Ranges default to exact support endpoints when bounded and to a
    mass > 1 - 1e-10 interval otherwise.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    outer_range: tuple[float, float] | None = None
    inner_range: tuple[float, float] | None = None
    max_subdivisions: int = 2000

    def __post_init__(self):
        if self.abs_tol <= 0.0 or self.rel_tol <= 0.0:
            raise DomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")

    @property
    def inner_abs_tol(self) -> float:
        return self.abs_tol * 10.0

    @property
    def inner_rel_tol(self) -> float:
        return self.rel_tol * 10.0


DEFAULT_CONFIG = QuadratureConfig()


@dataclass
class GapReport:
    """Per-direction residual scales and the resulting gap.

    sigma_fwd/sigma_bwd hold (sigma_1, sigma_2) for the causal and
    anti-causal full graph; under the heteroskedastic fit the regression
    entries are exp(E[log scale]) instead of plain residual sd.
    """

    sigma_fwd: tuple[float, float]
    sigma_bwd: tuple[float, float]
    delta: float
    exp_delta_sq: float
    fit: str
    method: str
    diagnostics: dict = field(default_factory=dict)


def _report(log_s1f, log_s2f, log_s1b, log_s2b, fit, method, diagnostics=None) -> GapReport:
    delta = (log_s1b + log_s2b) - (log_s1f + log_s2f)
    return GapReport(
        sigma_fwd=(math.exp(log_s1f), math.exp(log_s2f)),
        sigma_bwd=(math.exp(log_s1b), math.exp(log_s2b)),
        delta=delta,
        exp_delta_sq=math.exp(2.0 * delta),
        fit=fit,
        method=method,
        diagnostics=diagnostics or {},
    )


def ratio_uniform_linear(beta: float) -> GapReport:
    """Closed-form gap for X2 = beta*X1 + eps2 with X1, eps2 ~ Unif[-1, 1].

    exp(Delta)^2 = (gamma^2+1)(2*gamma-1) / (2*gamma^3) with
    gamma = max(|beta|, 1/|beta|).
    """
    if not (isinstance(beta, (int, float)) and math.isfinite(beta)) or beta == 0.0:
        raise DomainError(f"beta must be finite and nonzero, got {beta!r}")
    b = abs(float(beta))
    sig1_bwd_sq = (2.0 * b - 1.0) / (6.0 * b**3) if b >= 1.0 else (2.0 - b) / 6.0
    sig2_bwd_sq = (b * b + 1.0) / 3.0
    third = math.log(1.0 / 3.0)
    return _report(
        0.5 * third,
        0.5 * third,
        0.5 * math.log(sig1_bwd_sq),
        0.5 * math.log(sig2_bwd_sq),
        HOMOSKEDASTIC,
        "closed_form",
    )


def _quad(f, a, b, *, abs_tol, rel_tol, limit, points=None, what="integral"):
    pts = sorted(p for p in (points or ()) if a < p < b)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = quad(
            f, a, b,
            epsabs=abs_tol, epsrel=rel_tol, limit=limit,
            points=pts or None, full_output=1,
        )
    val, abserr = out[0], out[1]
    if len(out) > 3 and abserr > 50.0 * max(abs_tol, rel_tol * abs(val)):
        raise QuadratureError(
            f"{what} over [{a:.6g}, {b:.6g}] did not converge: "
            f"value={val:.6e} err={abserr:.3e} ({out[3]})"
        )
    return val


def _is_truncated_case(model: BivariateAnm) -> bool:
    return (
        isinstance(model.cause, Gaussian)
        and isinstance(model.noise, Uniform)
        and isinstance(model.mechanism, (Linear, SignedPower))
        and model.mechanism.beta != 0.0
    )


def _truncated_stats(model: BivariateAnm, x2: float) -> tuple[float, float, float]:
    # X1 | X2=x2 is the cause normal truncated to the preimage of the
    # uniform noise band [x2 - hi, x2 - lo] under the monotone mechanism
    mech, noise = model.mechanism, model.noise
    lo = float(mech.inverse(x2 - noise.hi))
    hi = float(mech.inverse(x2 - noise.lo))
    if lo > hi:
        lo, hi = hi, lo
    sc = math.sqrt(model.cause.var)
    try:
        m_std, v_std = truncated_normal_moments(lo / sc, hi / sc)
    except DegenerateIntervalError as exc:
        raise ZeroDensityError(f"X2 density vanishes at x2={x2!r}") from exc
    mass = norm_cdf(hi / sc) - norm_cdf(lo / sc)
    density = mass / (noise.hi - noise.lo)
    return sc * m_std, sc * sc * v_std, density


def _inner_interval(model: BivariateAnm, x2: float) -> tuple[float, float, list[float]]:
    """Integration interval over x1 for the joint-density slice at x2.

    The noise band (exact support when bounded, else quantile bounds) is
    pulled back through the mechanism so that steep mechanisms do not leave
    the conditional mass as an unresolvable spike inside a wide interval.
    """
    mech = model.mechanism
    lo, hi = model.cause.tail_range(_TAIL / 10.0)
    s_lo, s_hi = model.noise.support()
    t_lo, t_hi = model.noise.tail_range(_TAIL / 10.0)
    e_lo = s_lo if math.isfinite(s_lo) else t_lo
    e_hi = s_hi if math.isfinite(s_hi) else t_hi
    points: list[float] = [0.0]
    if isinstance(mech, (Linear, SignedPower)) and mech.beta != 0.0:
        b1 = float(mech.inverse(x2 - e_hi))
        b2 = float(mech.inverse(x2 - e_lo))
        if b1 > b2:
            b1, b2 = b2, b1
        lo, hi = max(lo, b1), min(hi, b2)
        points.append(float(mech.inverse(x2)))
    elif isinstance(mech, EvenPower) and mech.beta != 0.0:
        # preimage of the noise band is symmetric; keep the full cause range
        # and mark the |x| boundary points where the integrand concentrates
        for c in (x2 - e_hi, x2 - e_lo, x2):
            u = c * mech.norm / mech.beta
            if u > 0.0:
                r = u ** (1.0 / mech.nu)
                points.extend((-r, r))
    if lo >= hi:
        raise ZeroDensityError(f"x2={x2!r} lies outside the X2 support")
    return lo, hi, points


def _brute_stats(
    model: BivariateAnm, cfg: QuadratureConfig, x2: float
) -> tuple[float, float, float]:
    mech, cause, noise = model.mechanism, model.cause, model.noise
    if cfg.inner_range is not None:
        lo, hi = cfg.inner_range
        points: list[float] = [0.0]
    else:
        lo, hi, points = _inner_interval(model, x2)

    def weight(x1: float) -> float:
        return float(cause.density(x1)) * float(noise.density(x2 - float(mech(x1))))

    kw = dict(
        abs_tol=cfg.inner_abs_tol,
        rel_tol=cfg.inner_rel_tol,
        limit=cfg.max_subdivisions,
        points=points,
    )
    i0 = _quad(weight, lo, hi, what="conditional mass", **kw)
    if not (i0 > 0.0) or not math.isfinite(i0):
        raise ZeroDensityError(f"X2 density vanishes at x2={x2!r}")
    i1 = _quad(lambda x1: x1 * weight(x1), lo, hi, what="conditional mean", **kw)
    mean = i1 / i0
    # second moment centered at the mean estimate to avoid cancellation
    j2 = _quad(
        lambda x1: (x1 - mean) ** 2 * weight(x1), lo, hi,
        what="conditional variance", **kw,
    )
    return mean, max(j2 / i0, 0.0), i0


def backward_conditional_stats(
    model: BivariateAnm, cfg: QuadratureConfig, x2: float
) -> tuple[float, float, float]:
    """E[X1 | X2=x2], Var(X1 | X2=x2), and the X2 density at x2."""
    if model.scale_fn is not None:
        raise ContractError("backward conditional stats support additive models only")
    if _is_truncated_case(model):
        return _truncated_stats(model, x2)
    return _brute_stats(model, cfg, x2)


def _outer_range(model: BivariateAnm) -> tuple[float, float, list[float]]:
    """X2 integration range: exact support when bounded, else a
    mass > 1 - 1e-10 interval containing +-10 sd."""
    c_lo, c_hi = model.cause.support()
    s_lo, s_hi = model.noise.support()
    points: list[float] = [0.0]
    bounded = all(map(math.isfinite, (c_lo, c_hi, s_lo, s_hi)))
    f_lo, f_hi = mechanism_range(
        model.mechanism, *(model.cause.support() if bounded else model.cause.tail_range(_TAIL))
    )
    n_lo, n_hi = (s_lo, s_hi) if bounded else model.noise.tail_range(_TAIL)
    lo, hi = f_lo + n_lo, f_hi + n_hi
    if not bounded:
        m_mean, m_var = mechanism_moments(model.mechanism, model.cause)
        sd = math.sqrt(m_var + model.noise.variance())
        lo = min(lo, m_mean - 10.0 * sd)
        hi = max(hi, m_mean + 10.0 * sd)
    # integrand kinks: images of cause endpoints shifted by noise endpoints,
    # plus the noise support endpoints where power-map inverses kink
    for fv in (f_lo, f_hi):
        for sv in (s_lo, s_hi):
            if math.isfinite(fv) and math.isfinite(sv):
                points.append(fv + sv)
    for sv in (s_lo, s_hi):
        if math.isfinite(sv):
            points.append(sv)
    return lo, hi, points


def population_gap(
    model: BivariateAnm,
    fit: str = HOMOSKEDASTIC,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
) -> GapReport:
    """Gap report for a bivariate additive model under the requested fit.

    Homoskedastic backward term: log E[Var(X1|X2)]. Heteroskedastic:
    E[log Var(X1|X2)], and the forward regression term E[log Var(X2|X1)]
    (equal to log Var(eps2) for these additive models).
    """
    if fit not in (HOMOSKEDASTIC, HETEROSKEDASTIC):
        raise DomainError(f"unknown fit flavor {fit!r}")
    if model.scale_fn is not None:
        raise ContractError("population gaps support additive models only")
    var1 = model.cause.variance()
    var_eps = model.noise.variance()
    _, m_var = mechanism_moments(model.mechanism, model.cause)
    var2 = m_var + var_eps

    truncated = _is_truncated_case(model)
    if cfg.outer_range is not None:
        lo, hi = cfg.outer_range
        points: list[float] = [0.0]
    else:
        lo, hi, points = _outer_range(model)

    clamped = 0

    def stats(x2: float):
        try:
            return backward_conditional_stats(model, cfg, x2)
        except (ZeroDensityError, DegenerateIntervalError):
            return 0.0, 0.0, 0.0

    if fit == HOMOSKEDASTIC:

        def integrand(x2: float) -> float:
            _, var, dens = stats(x2)
            return var * dens

        e_var = _quad(
            integrand, lo, hi,
            abs_tol=cfg.abs_tol, rel_tol=cfg.rel_tol,
            limit=cfg.max_subdivisions, points=points,
            what="E[Var(X1|X2)]",
        )
        if not (e_var > 0.0):
            raise QuadratureError(f"degenerate backward conditional variance ({e_var!r})")
        log_s1b = 0.5 * math.log(e_var)
    else:

        def integrand(x2: float) -> float:
            nonlocal clamped
            _, var, dens = stats(x2)
            if dens == 0.0:
                return 0.0
            if var < _VAR_CLAMP:
                clamped += 1
                var = _VAR_CLAMP
            return math.log(var) * dens

        e_logvar = _quad(
            integrand, lo, hi,
            abs_tol=cfg.abs_tol, rel_tol=cfg.rel_tol,
            limit=cfg.max_subdivisions, points=points,
            what="E[log Var(X1|X2)]",
        )
        log_s1b = 0.5 * e_logvar

    method = "truncated_gaussian_quadrature" if truncated else "brute_force_quadrature"
    diagnostics = {"outer_range": (lo, hi), "clamped_evals": clamped}
    return _report(
        0.5 * math.log(var1),
        0.5 * math.log(var_eps),
        log_s1b,
        0.5 * math.log(var2),
        fit,
        method,
        diagnostics,
    )


def even_function_gap(model: BivariateAnm) -> GapReport:
    """Quadrature-free gap for an even mechanism and symmetric cause:
    E[X1|X2] = 0, so exp(Delta)^2 = Var(X2)/Var(eps2) > 1 for beta != 0."""
    if model.scale_fn is not None:
        raise ContractError("even-function gap supports additive models only")
    if not isinstance(model.mechanism, EvenPower):
        raise ContractError("mechanism must be an even power map")
    if not isinstance(model.cause, (Uniform, Gaussian)):
        raise ContractError("cause law must be symmetric about 0")
    var1 = model.cause.variance()
    var_eps = model.noise.variance()
    _, m_var = mechanism_moments(model.mechanism, model.cause)
    var2 = m_var + var_eps
    return _report(
        0.5 * math.log(var1),
        0.5 * math.log(var_eps),
        0.5 * math.log(var1),
        0.5 * math.log(var2),
        HOMOSKEDASTIC,
        "closed_form",
    )


# named model families from the figure reproductions; power scenarios take
# the exponent as the grid parameter and beta as a fixed argument
_CHI_FIG1_SCALE = 1.0
_CHI_FIG2_SCALE = math.sqrt(6.0)


def _scenario_models():
    u = Uniform(-1.0, 1.0)
    g = Gaussian(0.0, 1.0)
    g_third = Gaussian(0.0, 1.0 / 3.0)
    return {
        "uni-uni-linear": (lambda p, b: BivariateAnm(u, linear(p), u), "beta", HOMOSKEDASTIC, None),
        "ga-uni-linear": (lambda p, b: BivariateAnm(g, linear(p), u), "beta", HOMOSKEDASTIC, None),
        "ga-chi2-linear": (
            lambda p, b: BivariateAnm(g, linear(p), Chi1Centered(_CHI_FIG1_SCALE)),
            "beta", HOMOSKEDASTIC, None,
        ),
        "ga-uni-power": (lambda p, b: BivariateAnm(g, power(b, p), u), "nu", HOMOSKEDASTIC, ...),
        "ga-chi2-power": (
            lambda p, b: BivariateAnm(g, power(b, p), Chi1Centered(_CHI_FIG2_SCALE)),
            "nu", HOMOSKEDASTIC, ...,
        ),
        "ga-ga-power": (lambda p, b: BivariateAnm(g, power(b, p), g_third), "nu", HOMOSKEDASTIC, ...),
        "uni-uni-het": (lambda p, b: BivariateAnm(u, linear(p), u), "beta", HETEROSKEDASTIC, None),
        "ga-ga-power-het": (
            lambda p, b: BivariateAnm(g, power(b, p), g_third),
            "nu", HETEROSKEDASTIC, 2.0,
        ),
    }


SCENARIOS = tuple(_scenario_models())


def scenario_model(name: str, param: float, beta: float | None = None) -> tuple[BivariateAnm, str]:
    """Instantiate a named scenario at a grid parameter value.

    Returns the model and the scenario's default fit flavor.
    """
    table = _scenario_models()
    if name not in table:
        raise DomainError(f"unknown scenario {name!r}; choose from {sorted(table)}")
    build, _, default_fit, beta_default = table[name]
    if beta_default is ...:
        if beta is None:
            raise DomainError(f"scenario {name!r} requires an explicit beta")
    elif beta is None:
        beta = beta_default
    return build(float(param), beta if beta is None else float(beta)), default_fit


def scenario_param_name(name: str) -> str:
    table = _scenario_models()
    if name not in table:
        raise DomainError(f"unknown scenario {name!r}; choose from {sorted(table)}")
    return table[name][1]


@dataclass(frozen=True)
class CurvePoint:
    param: float
    delta: float
    exp_delta_sq: float
    method: str
    fit: str


def curve_point(
    scenario: str,
    param: float,
    fit: str | None = None,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    beta: float | None = None,
) -> CurvePoint:
    model, default_fit = scenario_model(scenario, param, beta)
    report = population_gap(model, fit or default_fit, cfg)
    return CurvePoint(float(param), report.delta, report.exp_delta_sq, report.method, report.fit)


def curve(
    scenario: str,
    param_grid,
    fit: str | None = None,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    beta: float | None = None,
) -> list[CurvePoint]:
    """Evaluate the gap over a parameter grid; one row per grid point."""
    return [curve_point(scenario, p, fit, cfg, beta) for p in param_grid]
