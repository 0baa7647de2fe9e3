"""Generative models: cause-effect mechanisms, bivariate additive/location-scale
noise models, multivariate linear SEMs, and their population covariance algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ContractError, DomainError
from .specfun import Chi1Centered, Gaussian, NoiseSpec, Uniform, make_rng, power_norm

_SCALE_FLOOR = 1e-12


@dataclass(frozen=True)
class Linear:
    """x -> beta * x."""

    beta: float

    def __call__(self, x):
        return self.beta * np.asarray(x, dtype=float)

    def inverse(self, y):
        if self.beta == 0.0:
            raise DomainError("linear mechanism with beta = 0 is not invertible")
        return np.asarray(y, dtype=float) / self.beta

    @property
    def monotone(self) -> bool:
        return True


@dataclass(frozen=True)
class SignedPower:
    """x -> beta * sign(x) * |x|^nu / sqrt(V(nu)); odd and strictly monotone
    for beta != 0. V(nu) is the standard-normal moment normalization, so the
    map reduces exactly to Linear(beta) at nu = 1."""

    beta: float
    nu: float
    norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not math.isfinite(self.nu) or self.nu <= 0.0:
            raise DomainError(f"power exponent must be finite and positive, got {self.nu!r}")
        n = 1.0 if self.nu == 1.0 else math.sqrt(power_norm(self.nu))
        object.__setattr__(self, "norm", n)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.nu == 1.0:
            return self.beta * x
        return self.beta * np.sign(x) * np.abs(x) ** self.nu / self.norm

    def inverse(self, y):
        if self.beta == 0.0:
            raise DomainError("power mechanism with beta = 0 is not invertible")
        u = np.asarray(y, dtype=float) * self.norm / self.beta
        return np.sign(u) * np.abs(u) ** (1.0 / self.nu)

    @property
    def monotone(self) -> bool:
        return True


@dataclass(frozen=True)
class EvenPower:
    """x -> beta * |x|^nu / sqrt(V(nu)); an even map, never invertible."""

    beta: float
    nu: float
    norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not math.isfinite(self.nu) or self.nu <= 0.0:
            raise DomainError(f"power exponent must be finite and positive, got {self.nu!r}")
        object.__setattr__(self, "norm", math.sqrt(power_norm(self.nu)))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.beta * np.abs(x) ** self.nu / self.norm

    def inverse(self, y):
        raise DomainError("even mechanism is not invertible")

    @property
    def monotone(self) -> bool:
        return False


Mechanism = Linear | SignedPower | EvenPower


def linear(beta: float) -> Linear:
    return Linear(beta)


def power(beta: float, nu: float) -> SignedPower:
    return SignedPower(beta, nu)


def even_power(beta: float, nu: float) -> EvenPower:
    return EvenPower(beta, nu)


def mechanism_range(mech: Mechanism, lo: float, hi: float) -> tuple[float, float]:
    """Image interval of the mechanism over [lo, hi]."""
    ends = [float(mech(lo)), float(mech(hi))]
    if isinstance(mech, EvenPower) and lo < 0.0 < hi:
        ends.append(float(mech(0.0)))
    return min(ends), max(ends)


def mechanism_moments(mech: Mechanism, cause: NoiseSpec) -> tuple[float, float]:
    """Mean and variance of mech(X) with X drawn from the cause law.

    Closed forms for the combinations the models use; generic quadrature
    against the cause density otherwise.
    """
    if isinstance(mech, Linear):
        return 0.0, mech.beta**2 * cause.variance()
    if isinstance(mech, SignedPower):
        b, nu, v_norm = mech.beta, mech.nu, mech.norm**2
        if isinstance(cause, Gaussian):
            return 0.0, b * b * cause.var**nu
        if isinstance(cause, Uniform):
            a = cause.hi
            return 0.0, b * b * a ** (2 * nu) / ((2 * nu + 1) * v_norm)
    if isinstance(mech, EvenPower):
        b, nu, v_norm = mech.beta, mech.nu, mech.norm**2
        if isinstance(cause, Gaussian):
            m1 = b * cause.var ** (nu / 2.0) * power_norm(nu / 2.0) / math.sqrt(v_norm)
            m2 = b * b * cause.var**nu
            return m1, m2 - m1 * m1
        if isinstance(cause, Uniform):
            a = cause.hi
            m1 = b * a**nu / ((nu + 1) * math.sqrt(v_norm))
            m2 = b * b * a ** (2 * nu) / ((2 * nu + 1) * v_norm)
            return m1, m2 - m1 * m1
    lo, hi = cause.tail_range(1e-14)
    pts = [0.0] if lo < 0.0 < hi else None
    m1 = quad(lambda x: float(mech(x)) * float(cause.density(x)), lo, hi, points=pts, limit=200)[0]
    m2 = quad(lambda x: float(mech(x)) ** 2 * float(cause.density(x)), lo, hi, points=pts, limit=200)[0]
    return m1, m2 - m1 * m1


@dataclass(frozen=True)
class BivariateAnm:
    """X1 ~ cause, X2 = mechanism(X1) + scale_fn(X1) * eps2 with eps2 ~ noise.

    scale_fn absent means the plain additive model; when present its output
    is clamped at a positive floor during sampling.
    """

    cause: NoiseSpec
    mechanism: Mechanism
    noise: NoiseSpec
    scale_fn: Mechanism | None = None


def sample_bivariate(model: BivariateAnm, n: int, seed: int) -> np.ndarray:
    """Draw an (n, 2) dataset, column 0 the cause, column 1 the effect."""
    if n < 2:
        raise DomainError(f"sample size must be >= 2, got {n}")
    x1 = model.cause.sample_rng(make_rng(seed, 0), int(n))
    e2 = model.noise.sample_rng(make_rng(seed, 1), int(n))
    if model.scale_fn is None:
        x2 = np.asarray(model.mechanism(x1)) + e2
    else:
        scale = np.maximum(np.asarray(model.scale_fn(x1)), _SCALE_FLOOR)
        x2 = np.asarray(model.mechanism(x1)) + scale * e2
    return np.column_stack([x1, x2])


@dataclass
class LinearSem:
    """X_j = sum_k coeffs[j, k] X_k + eps_j with mutually independent noises.

    coeffs[j, k] may be nonzero only when k precedes j in the declared
    topological order (0-based node labels).
    """

    p: int
    order: tuple[int, ...]
    coeffs: np.ndarray
    noises: tuple[NoiseSpec, ...]

    def __post_init__(self):
        self.order = tuple(int(j) for j in self.order)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        self.noises = tuple(self.noises)
        if sorted(self.order) != list(range(self.p)):
            raise ContractError(f"order must be a permutation of 0..{self.p - 1}")
        if self.coeffs.shape != (self.p, self.p):
            raise ContractError(f"coefficient matrix must be {self.p}x{self.p}")
        if not np.all(np.isfinite(self.coeffs)):
            raise ContractError("coefficients must be finite")
        if len(self.noises) != self.p:
            raise ContractError(f"need {self.p} noise laws, got {len(self.noises)}")
        pos = {j: i for i, j in enumerate(self.order)}
        for j in range(self.p):
            for k in range(self.p):
                if self.coeffs[j, k] != 0.0 and pos[k] >= pos[j]:
                    raise ContractError(
                        f"edge {k}->{j} contradicts the declared topological order"
                    )

    def noise_variances(self) -> np.ndarray:
        return np.array([ns.variance() for ns in self.noises])


@dataclass(frozen=True)
class Permutation:
    """A causal order candidate: bijection on 0..p-1."""

    pi: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "pi", tuple(int(j) for j in self.pi))
        if sorted(self.pi) != list(range(len(self.pi))):
            raise ContractError(f"not a permutation of 0..{len(self.pi) - 1}: {self.pi}")

    @property
    def p(self) -> int:
        return len(self.pi)


def sample_linear_sem(sem: LinearSem, n: int, seed: int) -> np.ndarray:
    """Draw an (n, p) dataset in the SEM's topological order."""
    if n < 2:
        raise DomainError(f"sample size must be >= 2, got {n}")
    x = np.empty((int(n), sem.p))
    for j in sem.order:
        eps = sem.noises[j].sample_rng(make_rng(seed, j), int(n))
        parents = np.flatnonzero(sem.coeffs[j])
        x[:, j] = x[:, parents] @ sem.coeffs[j, parents] + eps
    return x


def population_covariance(sem: LinearSem) -> np.ndarray:
    """Moment matrix (I - B)^-1 D (I - B)^-T by forward substitution."""
    a = np.zeros((sem.p, sem.p))
    for j in sem.order:
        a[j] = sem.coeffs[j] @ a
        a[j, j] += 1.0
    d = sem.noise_variances()
    return (a * d) @ a.T


def random_linear_sem(
    p: int,
    noise_kind: str,
    seed: int,
    edge_prob: float = 0.6,
) -> LinearSem:
    """Random DAG with coefficient magnitudes in [0.5, 0.85] u [1.2, 1.5].

    The magnitude bands stay away from |beta| = 1, where identical noise
    laws can make backward conditional expectations exactly linear.
    """
    if p < 1:
        raise DomainError(f"node count must be >= 1, got {p}")
    rng = make_rng(seed, 977)
    order = tuple(int(v) for v in rng.permutation(p))
    coeffs = np.zeros((p, p))
    for i in range(1, p):
        j = order[i]
        for k in order[:i]:
            if rng.random() < edge_prob:
                mag = rng.uniform(0.5, 0.85) if rng.random() < 0.5 else rng.uniform(1.2, 1.5)
                coeffs[j, k] = mag * (1.0 if rng.random() < 0.5 else -1.0)
    noises = []
    for j in range(p):
        width = rng.uniform(0.7, 1.3)
        kind = noise_kind
        if noise_kind == "mixed":
            kind = ("uniform", "gaussian", "chi2")[j % 3]
        if kind == "uniform":
            noises.append(Uniform(-width, width))
        elif kind == "gaussian":
            noises.append(Gaussian(0.0, width * width / 3.0))
        elif kind == "chi2":
            noises.append(Chi1Centered(math.sqrt(6.0) / width))
        else:
            raise DomainError(f"unknown noise kind {noise_kind!r}")
    return LinearSem(p=p, order=order, coeffs=coeffs, noises=tuple(noises))
