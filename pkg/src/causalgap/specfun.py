"""Distribution primitives: special functions, truncated-normal moments,
and the three centered error laws used by the generative models.

All moments of the standard normal are taken with respect to the density
phi(x) = exp(-x^2/2)/sqrt(2*pi); Phi denotes its cdf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, ndtri

from .errors import DegenerateIntervalError, DomainError

_SQRT2 = math.sqrt(2.0)
_SQRT_2_PI = math.sqrt(2.0 / math.pi)
_LOG_MASS_FLOOR = math.log(1e-300)

# interval widths below this use Gauss-Legendre on the centered interval;
# the analytic variance formula loses ~eps/width^2 relative accuracy
_THIN_WIDTH = 1e-3

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(9)


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"log_gamma requires finite x > 0, got {x!r}")
    return math.lgamma(x)


def power_norm(nu: float) -> float:
    """V(nu) = E|X|^(2*nu) for standard normal X, i.e. 2^nu Gamma(nu+1/2)/sqrt(pi)."""
    if not (isinstance(nu, (int, float)) and math.isfinite(nu)) or nu <= 0.0:
        raise DomainError(f"power_norm requires finite nu > 0, got {nu!r}")
    return math.exp(nu * math.log(2.0) + math.lgamma(nu + 0.5) - 0.5 * math.log(math.pi))


def norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def norm_quantile(p: float) -> float:
    """Inverse standard normal cdf."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile level must be in (0,1), got {p!r}")
    return float(ndtri(p))


def _thin_interval_moments(a: float, b: float) -> tuple[float, float]:
    # centered Gauss-Legendre with the phi(m) factor cancelled; avoids the
    # catastrophic E[x^2] - mean^2 cancellation on narrow intervals
    m = 0.5 * (a + b)
    h = 0.5 * (b - a)
    if -0.5 * m * m + math.log(max(h, 1e-310)) < _LOG_MASS_FLOOR:
        raise DegenerateIntervalError(
            f"truncation interval [{a}, {b}] carries mass below the floor"
        )
    u = h * _GL_NODES
    w = _GL_WEIGHTS * np.exp(-m * u - 0.5 * u * u)
    z0 = float(np.sum(w))
    mu_u = float(np.sum(w * u)) / z0
    exx_u = float(np.sum(w * u * u)) / z0
    var = exx_u - mu_u * mu_u
    return m + mu_u, min(var, 1.0)


def _upper_tail_moments(a: float, b: float) -> tuple[float, float]:
    # 0 <= a < b, possibly b = inf; Mills-ratio-stable via erfcx
    ta = a / _SQRT2
    if math.isinf(b):
        e = 0.0
        bracket = erfcx(ta)
        b_term = 0.0
    else:
        tb = b / _SQRT2
        e = math.exp(-(tb * tb - ta * ta))
        bracket = erfcx(ta) - e * erfcx(tb)
        b_term = b * e
    if bracket <= 0.0:
        raise DegenerateIntervalError(
            f"truncation interval [{a}, {b}] carries mass below the floor"
        )
    log_mass = -0.5 * a * a + math.log(0.5 * bracket)
    if log_mass < _LOG_MASS_FLOOR:
        raise DegenerateIntervalError(
            f"truncation interval [{a}, {b}] carries mass below the floor"
        )
    q = _SQRT_2_PI / bracket  # phi(a) / Z
    mean = q * (1.0 - e)
    exx = 1.0 + q * (a - b_term)
    var = exx - mean * mean
    return mean, min(var, 1.0)


def truncated_normal_moments(a: float, b: float) -> tuple[float, float]:
    """Mean and variance of a standard normal conditioned on [a, b].

    Bounds may be -inf / +inf. Raises DegenerateIntervalError when the
    interval mass falls below 1e-300.
    """
    if math.isnan(a) or math.isnan(b):
        raise DomainError("truncation bounds must not be NaN")
    if a >= b:
        raise DomainError(f"truncation requires a < b, got [{a}, {b}]")
    if math.isinf(a) and math.isinf(b):
        return 0.0, 1.0
    if math.isinf(a):
        mean, var = truncated_normal_moments(-b, math.inf)
        return -mean, var
    if math.isfinite(b):
        if b - a <= _THIN_WIDTH:
            return _thin_interval_moments(a, b)
        if b <= 0.0:
            mean, var = _upper_tail_moments(-b, -a)
            return -mean, var
    if a >= 0.0:
        return _upper_tail_moments(a, b)
    # a < 0 < b: no tail cancellation, direct formulas
    z = 1.0 - 0.5 * math.erfc(b / _SQRT2) - 0.5 * math.erfc(-a / _SQRT2)
    pa = norm_pdf(a)
    pb = 0.0 if math.isinf(b) else norm_pdf(b)
    b_term = 0.0 if math.isinf(b) else b * pb
    mean = (pa - pb) / z
    var = 1.0 + (a * pa - b_term) / z - mean * mean
    return mean, min(var, 1.0)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic generator for (seed, stream-index...) substreams."""
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise DomainError(f"seed must be a nonnegative integer, got {seed!r}")
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(s) for s in stream)))


@dataclass(frozen=True)
class Uniform:
    """Centered uniform error law on [lo, hi] with lo = -hi."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo >= self.hi:
            raise DomainError(f"uniform requires finite lo < hi, got [{self.lo}, {self.hi}]")
        if self.lo != -self.hi:
            raise DomainError("uniform law must be centered: lo = -hi")

    def variance(self) -> float:
        w = self.hi - self.lo
        return w * w / 12.0

    def density(self, e):
        e = np.asarray(e, dtype=float)
        return np.where((e >= self.lo) & (e <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def support(self) -> tuple[float, float]:
        return self.lo, self.hi

    def tail_range(self, tail_mass: float) -> tuple[float, float]:
        return self.lo, self.hi

    def sample_rng(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=n)


@dataclass(frozen=True)
class Gaussian:
    """Centered normal error law N(0, variance); the mean field is kept for
    interface symmetry and must be 0."""

    mean: float
    var: float

    def __post_init__(self):
        if self.mean != 0.0:
            raise DomainError("gaussian law must be centered: mean = 0")
        if not math.isfinite(self.var) or self.var <= 0.0:
            raise DomainError(f"gaussian variance must be finite and positive, got {self.var!r}")

    def variance(self) -> float:
        return self.var

    def density(self, e):
        e = np.asarray(e, dtype=float)
        s2 = self.var
        return np.exp(-0.5 * e * e / s2) / math.sqrt(2.0 * math.pi * s2)

    def support(self) -> tuple[float, float]:
        return -math.inf, math.inf

    def tail_range(self, tail_mass: float) -> tuple[float, float]:
        z = norm_quantile(1.0 - tail_mass) * math.sqrt(self.var)
        return -z, z

    def sample_rng(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(0.0, math.sqrt(self.var), size=n)


@dataclass(frozen=True)
class Chi1Centered:
    """Scaled centered chi-square law: eps = (Z - 1)/scale with Z ~ chi^2_1."""

    scale: float

    def __post_init__(self):
        if not math.isfinite(self.scale) or self.scale <= 0.0:
            raise DomainError(f"chi1_centered scale must be finite and positive, got {self.scale!r}")

    def variance(self) -> float:
        return 2.0 / (self.scale * self.scale)

    def density(self, e):
        e = np.asarray(e, dtype=float)
        z = self.scale * e + 1.0
        zc = np.maximum(z, 1e-300)
        val = self.scale * np.exp(-0.5 * zc) / np.sqrt(2.0 * math.pi * zc)
        return np.where(z > 0.0, val, 0.0)

    def support(self) -> tuple[float, float]:
        return -1.0 / self.scale, math.inf

    def tail_range(self, tail_mass: float) -> tuple[float, float]:
        # P(Z > t) = erfc(sqrt(t/2)) = tail_mass  =>  t = ndtri(1 - tail_mass/2)^2
        t = norm_quantile(1.0 - 0.5 * tail_mass) ** 2
        return -1.0 / self.scale, (t - 1.0) / self.scale

    def sample_rng(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = rng.normal(0.0, 1.0, size=n)
        return (z * z - 1.0) / self.scale


NoiseSpec = Uniform | Gaussian | Chi1Centered


def uniform(lo: float, hi: float) -> Uniform:
    return Uniform(lo, hi)


def gaussian(mean: float, variance: float) -> Gaussian:
    return Gaussian(mean, variance)


def chi1_centered(scale: float) -> Chi1Centered:
    return Chi1Centered(scale)


def sample(noise: NoiseSpec, n: int, seed: int) -> np.ndarray:
    """Draw n values from the error law, deterministic given seed."""
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    return noise.sample_rng(make_rng(seed), int(n))
