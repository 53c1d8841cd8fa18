"""Parametric scalar laws and the law of the driving pair.

The catalog covers the distributions needed for both regimes of the tail
analysis: Gaussian and (shifted) exponential for the light-tailed case,
Pareto / lognormal / Weibull for the heavy-tailed one, plus point masses
and two wrappers (``Shifted``, ``Expm1``) that close the catalog under the
transforms the driving pair requires, e.g. a multiplier whose log-scale
increment is Pareto.

All laws are immutable values and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import integrate, special

from .errors import DomainError
from .estimates import TailEstimate, binomial_estimate
from .streams import RandomStream

INF = math.inf

# Quadrature settings: adaptive Gauss-Kronrod via QUADPACK.
_QUAD_RTOL_ITAIL = 1e-9
_QUAD_RTOL_MGF = 1e-10
_QUAD_LIMIT = 10_000


@dataclass(frozen=True)
class BetaSup:
    """sup{lambda >= 0 : E e^{lambda xi} <= 1} with how it was attained."""

    value: float
    kind: str  # "root" | "boundary" | "zero"


class ScalarLaw:
    """Common interface of all scalar law variants."""

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def tail_prob(self, x):
        """Exact P{zeta > x}."""
        raise NotImplementedError

    def cdf(self, x):
        return 1.0 - self.tail_prob(x)

    def pdf(self, x):
        """Density where one exists, else None."""
        return None

    def mean(self) -> float:
        return self.mgf_moments(0.0)[1]

    def support_min(self) -> float:
        return -INF

    def support_max(self) -> float:
        return INF

    def is_continuous(self) -> bool:
        return True

    def quantile(self, q: float) -> Optional[float]:
        """Closed-form quantile, or None when only sampling is available."""
        return None

    def log1p_law(self) -> Optional["ScalarLaw"]:
        """Law of log(1 + zeta) when it is in the catalog, else None."""
        return None

    def mgf_moments(self, lam: float) -> Tuple[float, float, float]:
        """(E e^{lam x}, E x e^{lam x}, E x^2 e^{lam x}); +inf where divergent."""
        raise NotImplementedError

    def _mgf_quadrature(self, lam: float) -> Tuple[float, float, float]:
        lo, hi = self.support_min(), self.support_max()

        def moment(k):
            val, _ = integrate.quad(
                lambda x: x**k * math.exp(lam * x) * self.pdf(x),
                lo, hi, epsrel=_QUAD_RTOL_MGF, epsabs=0.0, limit=_QUAD_LIMIT,
            )
            return val

        return moment(0), moment(1), moment(2)

    # -- derived quantities -------------------------------------------------

    def integrated_tail(self, x: float) -> float:
        """min(1, int_x^inf tail(y) dy); requires a finite mean."""
        return min(1.0, self.integrated_tail_raw(x))

    def integrated_tail_raw(self, x: float) -> float:
        """Uncapped upper integral of the tail."""
        if not math.isfinite(self.mean()):
            raise DomainError(f"integrated tail undefined: {self!r} has no finite mean")
        val, _ = integrate.quad(
            self.tail_prob, x, INF, epsrel=_QUAD_RTOL_ITAIL, epsabs=1e-300,
            limit=_QUAD_LIMIT,
        )
        return val

    def beta_sup(self) -> BetaSup:
        """sup{lam >= 0 : phi(lam) <= 1}.

        Brackets by doubling from 1e-6 (phi is convex, so this is safe),
        bisects to 1e-12 and polishes with Newton using phi'.  When phi
        stays <= 1 all the way to the divergence boundary, that boundary is
        the supremum and is flagged as such.
        """
        if not self.tail_prob(0.0) > 0.0:
            raise DomainError("beta_sup requires P{xi > 0} > 0")

        def phi(lam):
            return self.mgf_moments(lam)[0]

        lo = 0.0
        lam = 1e-6
        if phi(lam) > 1.0:
            # Nonnegative drift: the set {phi <= 1} reduces to {0}.
            return BetaSup(0.0, "zero")
        while True:
            val = phi(lam)
            if val > 1.0 or math.isinf(val):
                hi, hi_val = lam, val
                break
            lo = lam
            lam *= 2.0
            if lam > 1e8:
                return BetaSup(INF, "boundary")
        # Bisection between the last good point and the bad one.
        for _ in range(200):
            if hi - lo < 1e-12 * max(1.0, hi):
                break
            mid = 0.5 * (lo + hi)
            v = phi(mid)
            if v > 1.0 or math.isinf(v):
                hi, hi_val = mid, v
            else:
                lo = mid
        if math.isinf(hi_val):
            return BetaSup(lo, "boundary")
        # Newton polish on phi(lam) - 1 = 0 from the bracket midpoint.
        lam = 0.5 * (lo + hi)
        for _ in range(50):
            p0, p1, _ = self.mgf_moments(lam)
            if math.isinf(p0):
                lam = lo
                break
            step = (p0 - 1.0) / p1 if p1 != 0 else 0.0
            new = lam - step
            if not (lo - 1e-9 <= new <= hi + 1e-9):
                break
            if abs(new - lam) < 1e-15 * max(1.0, abs(lam)):
                lam = new
                break
            lam = new
        return BetaSup(float(lam), "root")


@dataclass(frozen=True)
class Normal(ScalarLaw):
    mean_: float
    variance: float

    def __post_init__(self):
        if self.variance <= 0:
            raise DomainError("Normal variance must be > 0")

    def sample(self, rng, size=None):
        return rng.normal(self.mean_, math.sqrt(self.variance), size)

    def tail_prob(self, x):
        z = (np.asarray(x, dtype=float) - self.mean_) / math.sqrt(2.0 * self.variance)
        return 0.5 * special.erfc(z)

    def pdf(self, x):
        s2 = self.variance
        x = np.asarray(x, dtype=float)
        return np.exp(-((x - self.mean_) ** 2) / (2 * s2)) / math.sqrt(2 * math.pi * s2)

    def quantile(self, q):
        return self.mean_ + math.sqrt(2 * self.variance) * special.erfinv(2 * q - 1)

    def mgf_moments(self, lam):
        m, s2 = self.mean_, self.variance
        phi = math.exp(lam * m + 0.5 * lam * lam * s2)
        mt = m + lam * s2  # mean under the tilted law
        return phi, mt * phi, (mt * mt + s2) * phi

    def integrated_tail_raw(self, x):
        # E(zeta - x)^+ in closed form.
        s = math.sqrt(self.variance)
        z = (x - self.mean_) / s
        return s * (math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)) - (x - self.mean_) * float(self.tail_prob(x))


@dataclass(frozen=True)
class Exponential(ScalarLaw):
    rate: float

    def __post_init__(self):
        if self.rate <= 0:
            raise DomainError("Exponential rate must be > 0")

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def tail_prob(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 1.0, np.exp(-self.rate * np.maximum(x, 0.0)))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 0.0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)))

    def support_min(self):
        return 0.0

    def quantile(self, q):
        return -math.log1p(-q) / self.rate

    def mgf_moments(self, lam):
        r = self.rate
        if lam >= r:
            return INF, INF, INF
        m0 = r / (r - lam)
        m1 = r / (r - lam) ** 2
        m2 = 2 * r / (r - lam) ** 3
        return m0, m1, m2

    def integrated_tail_raw(self, x):
        return math.exp(-self.rate * max(x, 0.0)) / self.rate + max(-x, 0.0)


@dataclass(frozen=True)
class ShiftedExponential(ScalarLaw):
    """shift + Exponential(rate)."""

    rate: float
    shift: float

    def __post_init__(self):
        if self.rate <= 0:
            raise DomainError("ShiftedExponential rate must be > 0")

    def _base(self):
        return Exponential(self.rate)

    def sample(self, rng, size=None):
        return self.shift + rng.exponential(1.0 / self.rate, size)

    def tail_prob(self, x):
        return self._base().tail_prob(np.asarray(x, dtype=float) - self.shift)

    def pdf(self, x):
        return self._base().pdf(np.asarray(x, dtype=float) - self.shift)

    def support_min(self):
        return self.shift

    def quantile(self, q):
        return self.shift + self._base().quantile(q)

    def mgf_moments(self, lam):
        return _shift_mgf(self._base().mgf_moments(lam), lam, self.shift)

    def integrated_tail_raw(self, x):
        return self._base().integrated_tail_raw(x - self.shift)


@dataclass(frozen=True)
class Pareto(ScalarLaw):
    """Tail (1 + x/scale)^(-index) on x >= 0 (Lomax parametrisation)."""

    index: float
    scale: float = 1.0

    def __post_init__(self):
        if self.index <= 0 or self.scale <= 0:
            raise DomainError("Pareto index and scale must be > 0")

    def sample(self, rng, size=None):
        u = rng.random(size)
        return self.scale * (np.power(u, -1.0 / self.index) - 1.0)

    def tail_prob(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 1.0, np.power(1.0 + np.maximum(x, 0.0) / self.scale, -self.index))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        a, s = self.index, self.scale
        return np.where(x < 0, 0.0, (a / s) * np.power(1.0 + np.maximum(x, 0.0) / s, -a - 1.0))

    def support_min(self):
        return 0.0

    def quantile(self, q):
        return self.scale * ((1.0 - q) ** (-1.0 / self.index) - 1.0)

    def mgf_moments(self, lam):
        if lam > 0:
            return INF, INF, INF
        a, s = self.index, self.scale
        m1 = s / (a - 1) if a > 1 else INF
        m2 = 2 * s * s / ((a - 1) * (a - 2)) if a > 2 else INF
        return 1.0, m1, m2

    def integrated_tail_raw(self, x):
        a, s = self.index, self.scale
        if a <= 1:
            raise DomainError("integrated tail undefined: Pareto index <= 1 has no mean")
        # int_x^inf (1+y/s)^-a dy = s/(a-1) (1+x/s)^(1-a) for x >= 0.
        body = s / (a - 1) * (1.0 + max(x, 0.0) / s) ** (1.0 - a)
        return body + max(-x, 0.0)


@dataclass(frozen=True)
class Lognormal(ScalarLaw):
    mu: float
    sigma2: float

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise DomainError("Lognormal sigma2 must be > 0")

    def sample(self, rng, size=None):
        return np.exp(rng.normal(self.mu, math.sqrt(self.sigma2), size))

    def tail_prob(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            z = (np.log(np.maximum(x, 1e-300)) - self.mu) / math.sqrt(2 * self.sigma2)
        return np.where(x <= 0, 1.0, 0.5 * special.erfc(z))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        s2 = self.sigma2
        safe = np.maximum(x, 1e-300)
        val = np.exp(-((np.log(safe) - self.mu) ** 2) / (2 * s2)) / (safe * math.sqrt(2 * math.pi * s2))
        return np.where(x <= 0, 0.0, val)

    def support_min(self):
        return 0.0

    def quantile(self, q):
        return math.exp(self.mu + math.sqrt(2 * self.sigma2) * special.erfinv(2 * q - 1))

    def mgf_moments(self, lam):
        if lam > 0:
            return INF, INF, INF
        m1 = math.exp(self.mu + 0.5 * self.sigma2)
        m2 = math.exp(2 * self.mu + 2 * self.sigma2)
        return 1.0, m1, m2


@dataclass(frozen=True)
class Weibull(ScalarLaw):
    """Tail exp(-(x/scale)^shape) on x >= 0."""

    shape: float
    scale: float = 1.0

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise DomainError("Weibull shape and scale must be > 0")

    def sample(self, rng, size=None):
        return self.scale * rng.weibull(self.shape, size)

    def tail_prob(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 1.0, np.exp(-np.power(np.maximum(x, 0.0) / self.scale, self.shape)))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        k, c = self.shape, self.scale
        xs = np.maximum(x, 1e-300) / c
        return np.where(x <= 0, 0.0, (k / c) * np.power(xs, k - 1) * np.exp(-np.power(xs, k)))

    def support_min(self):
        return 0.0

    def quantile(self, q):
        return self.scale * (-math.log1p(-q)) ** (1.0 / self.shape)

    def mgf_moments(self, lam):
        k, c = self.shape, self.scale
        if lam == 0.0:
            g = special.gamma
            return 1.0, c * g(1 + 1 / k), c * c * g(1 + 2 / k)
        if lam < 0 or k > 1:
            return self._mgf_quadrature(lam)
        if k == 1:
            return Exponential(1.0 / c).mgf_moments(lam)
        return INF, INF, INF  # heavy-tailed for shape < 1


@dataclass(frozen=True)
class PointMass(ScalarLaw):
    value: float

    def sample(self, rng, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)

    def tail_prob(self, x):
        return np.where(np.asarray(x, dtype=float) < self.value, 1.0, 0.0)

    def support_min(self):
        return self.value

    def support_max(self):
        return self.value

    def is_continuous(self):
        return False

    def quantile(self, q):
        return self.value

    def log1p_law(self):
        if self.value <= -1:
            return None
        return PointMass(math.log1p(self.value))

    def mgf_moments(self, lam):
        e = math.exp(lam * self.value)
        return e, self.value * e, self.value * self.value * e

    def integrated_tail_raw(self, x):
        return max(self.value - x, 0.0)


@dataclass(frozen=True)
class Shifted(ScalarLaw):
    """base + offset."""

    base: ScalarLaw
    offset: float

    def sample(self, rng, size=None):
        return self.base.sample(rng, size) + self.offset

    def tail_prob(self, x):
        return self.base.tail_prob(np.asarray(x, dtype=float) - self.offset)

    def pdf(self, x):
        p = self.base.pdf(np.asarray(x, dtype=float) - self.offset)
        return None if p is None else p

    def support_min(self):
        return self.base.support_min() + self.offset

    def support_max(self):
        return self.base.support_max() + self.offset

    def is_continuous(self):
        return self.base.is_continuous()

    def quantile(self, q):
        b = self.base.quantile(q)
        return None if b is None else b + self.offset

    def mgf_moments(self, lam):
        return _shift_mgf(self.base.mgf_moments(lam), lam, self.offset)

    def integrated_tail_raw(self, x):
        return self.base.integrated_tail_raw(x - self.offset)


@dataclass(frozen=True)
class Expm1(ScalarLaw):
    """exp(Z) - 1 with Z distributed as ``base``; log(1 + .) maps it back.

    This is how a multiplier eta whose log-scale increment log(1 + eta)
    has a named law (e.g. Pareto) enters the catalog.
    """

    base: ScalarLaw

    def sample(self, rng, size=None):
        with np.errstate(over="ignore"):
            return np.expm1(self.base.sample(rng, size))

    def tail_prob(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            body = self.base.tail_prob(np.log1p(np.maximum(x, -1 + 1e-300)))
        return np.where(x <= -1, 1.0, body)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        safe = np.maximum(x, -1 + 1e-300)
        bp = self.base.pdf(np.log1p(safe))
        if bp is None:
            return None
        return np.where(x <= -1, 0.0, bp / (1.0 + safe))

    def support_min(self):
        return math.expm1(self.base.support_min())

    def support_max(self):
        return math.expm1(self.base.support_max())

    def is_continuous(self):
        return self.base.is_continuous()

    def quantile(self, q):
        b = self.base.quantile(q)
        return None if b is None else math.expm1(b)

    def log1p_law(self):
        return self.base

    def mgf_moments(self, lam):
        if lam == 0.0:
            p1 = self.base.mgf_moments(1.0)[0]
            p2 = self.base.mgf_moments(2.0)[0]
            m1 = p1 - 1.0 if math.isfinite(p1) else INF
            m2 = p2 - 2.0 * p1 + 1.0 if math.isfinite(p2) else INF
            return 1.0, m1, m2
        if lam > 0 and math.isinf(self.base.support_max()):
            return INF, INF, INF
        return self._mgf_quadrature(lam)


def _shift_mgf(base_moments, lam, off):
    p0, p1, p2 = base_moments
    if math.isinf(p0):
        return INF, INF, INF
    e = math.exp(lam * off)
    return (
        e * p0,
        e * (off * p0 + p1) if math.isfinite(p1) else INF,
        e * (off * off * p0 + 2 * off * p1 + p2) if math.isfinite(p2) else INF,
    )


# ---------------------------------------------------------------------------
# Joint law of the driving pair (xi, eta)
# ---------------------------------------------------------------------------


class JointLaw:
    """Law of the pair (xi, eta) driving the recursions."""

    def sample(self, rng: np.random.Generator, size=None):
        """One draw (or a vector of draws) of (xi, eta)."""
        raise NotImplementedError

    def xi_law(self) -> Optional[ScalarLaw]:
        """Marginal of xi when it is in the catalog."""
        raise NotImplementedError

    def eta_law(self) -> Optional[ScalarLaw]:
        raise NotImplementedError

    def eta_min(self) -> float:
        """Essential infimum of eta."""
        law = self.eta_law()
        return law.support_min() if law is not None else -INF

    def eta_all_positive(self, strict: bool = False) -> bool:
        m = self.eta_min()
        return m > 0 if strict else m >= 0

    def log1p_eta_law(self) -> Optional[ScalarLaw]:
        law = self.eta_law()
        return law.log1p_law() if law is not None else None

    def xi_mean(self) -> float:
        law = self.xi_law()
        if law is None:
            raise DomainError("xi mean unavailable for this joint law")
        return law.mean()


@dataclass(frozen=True)
class Independent(JointLaw):
    xi: ScalarLaw
    eta: ScalarLaw

    def sample(self, rng, size=None):
        return self.xi.sample(rng, size), self.eta.sample(rng, size)

    def xi_law(self):
        return self.xi

    def eta_law(self):
        return self.eta


@dataclass(frozen=True)
class Comonotone(JointLaw):
    """Fully dependent pair with xi = log(1 + eta) + shift."""

    eta: ScalarLaw
    shift: float = 0.0

    def __post_init__(self):
        if self.eta.support_min() <= -1:
            raise DomainError("Comonotone requires eta > -1")

    def sample(self, rng, size=None):
        e = self.eta.sample(rng, size)
        return np.log1p(e) + self.shift, e

    def xi_law(self):
        z = self.eta.log1p_law()
        if z is None:
            return None
        return Shifted(z, self.shift) if self.shift != 0.0 else z

    def eta_law(self):
        return self.eta


@dataclass(frozen=True)
class Custom(JointLaw):
    """Paired sampler over a finite support table."""

    xi_values: tuple
    eta_values: tuple
    probs: tuple

    def __post_init__(self):
        if not (len(self.xi_values) == len(self.eta_values) == len(self.probs)):
            raise DomainError("Custom table columns must have equal length")
        if abs(sum(self.probs) - 1.0) > 1e-12 or min(self.probs) < 0:
            raise DomainError("Custom probabilities must be nonnegative and sum to 1")

    def sample(self, rng, size=None):
        idx = rng.choice(len(self.probs), size=size, p=np.asarray(self.probs))
        xi = np.asarray(self.xi_values)[idx]
        eta = np.asarray(self.eta_values)[idx]
        return xi, eta

    def xi_law(self):
        return None

    def eta_law(self):
        return None

    def eta_min(self):
        return min(self.eta_values)


@dataclass(frozen=True)
class TildePairs(JointLaw):
    """Pair transformation (xi, eta e^{-xi}) mapping the pre-increment
    perpetuity onto the ordinary one: sum eta_k e^{S_{k-1}} equals the
    D-series driven by these transformed pairs."""

    base: JointLaw

    def sample(self, rng, size=None):
        xi, eta = self.base.sample(rng, size)
        with np.errstate(over="ignore"):
            return xi, eta * np.exp(-xi)

    def xi_law(self):
        return self.base.xi_law()

    def eta_law(self):
        return None

    def eta_min(self):
        m = self.base.eta_min()
        return 0.0 if m >= 0 else -INF


# ---------------------------------------------------------------------------
# Module operations
# ---------------------------------------------------------------------------


def sample_pair(joint: JointLaw, stream: RandomStream):
    """One draw of (xi, eta) from the given stream."""
    xi, eta = joint.sample(stream.generator())
    return float(xi), float(eta)


def tail_prob(law: ScalarLaw, x: float) -> float:
    return float(law.tail_prob(x))


def integrated_tail(law: ScalarLaw, x: float) -> float:
    return law.integrated_tail(x)


def mgf_moments(law: ScalarLaw, lam: float) -> Tuple[float, float, float]:
    if lam < 0:
        raise DomainError("mgf_moments requires lambda >= 0")
    return law.mgf_moments(lam)


def beta_sup(law: ScalarLaw) -> BetaSup:
    return law.beta_sup()


def _require_nonneg_eta(joint: JointLaw, op: str):
    if joint.eta_min() < 0:
        raise DomainError(f"{op} requires eta >= 0 almost surely")


def _sum_tail_exact(joint: JointLaw, t: float) -> Optional[float]:
    """Exact P{xi + log(1+eta) > t} when a deterministic route exists."""
    if isinstance(joint, Comonotone):
        z = joint.eta.log1p_law()
        if z is not None:
            # xi + log(1+eta) = 2Z + shift.
            return float(z.tail_prob((t - joint.shift) / 2.0))
        return None
    if isinstance(joint, Independent):
        z = joint.eta.log1p_law()
        xi = joint.xi
        if z is None:
            return None
        if isinstance(xi, PointMass):
            return float(z.tail_prob(t - xi.value))
        if isinstance(z, PointMass):
            return float(xi.tail_prob(t - z.value))
        if xi.pdf(0.0) is not None and z.support_min() >= 0:
            # P = tail_xi(t) + int_{-inf}^{t} f_xi(s) tail_Z(t - s) ds
            body, _ = integrate.quad(
                lambda s: float(xi.pdf(s)) * float(z.tail_prob(t - s)),
                -INF, t, epsrel=1e-9, epsabs=1e-14, limit=_QUAD_LIMIT,
            )
            return float(xi.tail_prob(t)) + body
    return None


def _max_tail_exact(joint: JointLaw, t: float) -> Optional[float]:
    """Exact P{max(xi, log(1+eta)) > t} when available."""
    if isinstance(joint, Comonotone):
        z = joint.eta.log1p_law()
        if z is not None:
            # max(Z + shift, Z) = Z + max(shift, 0).
            return float(z.tail_prob(t - max(joint.shift, 0.0)))
        return None
    if isinstance(joint, Independent):
        z = joint.eta.log1p_law()
        if z is None:
            return None
        fx = float(joint.xi.tail_prob(t))
        fz = float(z.tail_prob(t))
        return 1.0 - (1.0 - fx) * (1.0 - fz)
    return None


def h_tail(joint: JointLaw, t: float, n_mc: int, stream: RandomStream) -> TailEstimate:
    """Tail of the sum xi + log(1+eta), the law driving the D-perpetuity."""
    _require_nonneg_eta(joint, "h_tail")
    exact = _sum_tail_exact(joint, t)
    if exact is not None:
        return TailEstimate(t, min(1.0, max(0.0, exact)), 0.0, 0, method="exact")
    rng = stream.generator()
    xi, eta = joint.sample(rng, n_mc)
    hits = int(np.count_nonzero(xi + np.log1p(eta) > t))
    return binomial_estimate(t, hits, n_mc)


def h_tilde_tail(joint: JointLaw, t: float, n_mc: int, stream: RandomStream) -> TailEstimate:
    """Tail of max(xi, log(1+eta)), the law driving the Dtilde-perpetuity."""
    _require_nonneg_eta(joint, "h_tilde_tail")
    exact = _max_tail_exact(joint, t)
    if exact is not None:
        return TailEstimate(t, min(1.0, max(0.0, exact)), 0.0, 0, method="exact")
    rng = stream.generator()
    xi, eta = joint.sample(rng, n_mc)
    hits = int(np.count_nonzero(np.maximum(xi, np.log1p(eta)) > t))
    return binomial_estimate(t, hits, n_mc)


def h_samples(joint: JointLaw, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draws of xi + log(1+eta); building block for empirical tail integrals."""
    xi, eta = joint.sample(rng, n)
    return xi + np.log1p(eta)


def quantile_or_sample(law: ScalarLaw, q: float, rng: np.random.Generator,
                       n: int = 100_000) -> float:
    """Closed-form quantile when available, else an empirical one."""
    val = law.quantile(q)
    if val is not None:
        return float(val)
    return float(np.quantile(law.sample(rng, n), q))
