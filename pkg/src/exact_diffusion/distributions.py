"""Exact scalar variate generators and closed-form density evaluators.

Contents: Gaussian pdf/cdf, lower-truncated Gaussian sampling, truncated
Rayleigh sampling by inverse CDF, homogeneous Poisson event times, and the
joint density of a Brownian point value together with its occupation density
(local time) at level zero, including the atom where the local time is zero.

Everything here is exact in distribution up to double-precision arithmetic;
the Gaussian cdf is correct to better than 1e-12 absolute error, which is the
exactness floor of the whole library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, ndtri

from .errors import DomainError
from .rng import RngStream

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def mills_ratio(z: float) -> float:
    """Gaussian Mills ratio sf(z)/pdf(z), stable for large z."""
    return math.sqrt(math.pi / 2.0) * float(erfcx(z / math.sqrt(2.0)))

# Standardised lower bound beyond which inverse-CDF truncated-normal sampling
# loses resolution; switch to exponential tail rejection there.
_TAIL_SWITCH = 5.0


def normal_pdf(u: float, mu: float, sigma2: float) -> float:
    """Gaussian density with mean ``mu`` and variance ``sigma2``."""
    if sigma2 <= 0.0:
        raise DomainError(f"variance must be positive, got {sigma2}")
    z = u - mu
    return math.exp(-z * z / (2.0 * sigma2)) / math.sqrt(2.0 * math.pi * sigma2)


def normal_cdf(u: float, mu: float, sigma2: float) -> float:
    """Gaussian cdf; absolute error below 1e-12 over the whole real line."""
    if sigma2 <= 0.0:
        raise DomainError(f"variance must be positive, got {sigma2}")
    return 0.5 * math.erfc((mu - u) / math.sqrt(2.0 * sigma2))


def _std_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _std_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def sample_truncated_normal(
    mu: float, sigma2: float, lower: float, rng: RngStream, upper: float = math.inf
) -> float:
    """Exact draw from N(mu, sigma2) conditioned to (lower, upper).

    Uses the inverse cdf for bulk truncation points and switches to
    exponential-tilted tail rejection once the standardised bound exceeds
    5, where the inverse cdf would suffer catastrophic cancellation.
    """
    if sigma2 <= 0.0:
        raise DomainError(f"variance must be positive, got {sigma2}")
    sigma = math.sqrt(sigma2)
    if lower == -math.inf and upper == math.inf:
        return mu + sigma * rng.standard_normal()
    if not upper > lower:
        raise DomainError(f"need lower < upper, got ({lower}, {upper})")
    a = (lower - mu) / sigma if lower != -math.inf else -math.inf
    b = (upper - mu) / sigma if upper != math.inf else math.inf
    if b <= -_TAIL_SWITCH:
        # deep left tail: mirror into the right tail
        return -sample_truncated_normal(-mu, sigma2, -upper, rng, -lower)
    if a <= _TAIL_SWITCH:
        sf_a = _std_sf(a) if a != -math.inf else 1.0
        sf_b = _std_sf(b) if b != math.inf else 0.0
        while True:
            u = rng.uniform_positive()
            # survival value interpolated between the bounds, inverted
            # through the upper tail for resolution
            z = float(-ndtri(sf_a * (1.0 - u) + sf_b * u))
            if a < z < b:
                return mu + sigma * z
    # Robert-style tail rejection on (a, b)
    alpha = 0.5 * (a + math.sqrt(a * a + 4.0))
    while True:
        z = a - math.log1p(-rng.uniform()) / alpha
        if z >= b:
            continue
        d = z - alpha
        if rng.uniform() <= math.exp(-0.5 * d * d):
            return mu + sigma * z


def rayleigh_transform(u: float, scale2: float, minimum: float) -> float:
    """Inverse-cdf map of u in (0,1) to the Rayleigh law truncated to (minimum, inf)."""
    return math.sqrt(minimum * minimum - 2.0 * scale2 * math.log1p(-u))


def sample_truncated_rayleigh(scale2: float, minimum: float, rng: RngStream) -> float:
    """Exact draw of Y with density proportional to y*exp(-y^2/(2*scale2)) on (minimum, inf)."""
    if scale2 <= 0.0:
        raise DomainError(f"scale2 must be positive, got {scale2}")
    if minimum < 0.0:
        raise DomainError(f"minimum must be nonnegative, got {minimum}")
    return rayleigh_transform(rng.uniform_positive(), scale2, minimum)


def sample_poisson_times(rate: float, horizon: float, rng: RngStream) -> list[float]:
    """Sorted event times of a homogeneous Poisson process on [0, horizon]."""
    if rate <= 0.0:
        raise DomainError(f"rate must be positive, got {rate}")
    if horizon <= 0.0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    k = rng.poisson(rate * horizon)
    if k == 0:
        return []
    times = np.sort(rng.uniforms(k)) * horizon
    return [float(t) for t in times]


def sample_rayleigh_interval(scale2: float, lo: float, hi: float, rng: RngStream) -> float:
    """Exact draw with density proportional to y*exp(-y^2/(2*scale2)) on (lo, hi).

    The inverse cdf is evaluated relative to the lower edge, so deep-tail
    intervals where both endpoint masses underflow still sample correctly.
    """
    if scale2 <= 0.0:
        raise DomainError(f"scale2 must be positive, got {scale2}")
    if not 0.0 <= lo < hi:
        raise DomainError(f"need 0 <= lo < hi, got ({lo}, {hi})")
    u = rng.uniform()
    if hi == math.inf:
        rel = 0.0
    else:
        rel = math.exp(-(hi * hi - lo * lo) / (2.0 * scale2))
    return math.sqrt(lo * lo - 2.0 * scale2 * math.log1p(-u * (1.0 - rel)))


def weighted_gaussian_tail_mass(
    shift: float, scale2: float, lower: float, upper: float = math.inf
) -> float:
    """Integral of (w + shift) * exp(-w^2/(2*scale2)) over (lower, upper)."""
    s = scale2

    def tail(w: float) -> float:
        if w == math.inf:
            return 0.0
        return s * math.exp(-w * w / (2.0 * s)) + shift * math.sqrt(
            2.0 * math.pi * s
        ) * _std_sf(w / math.sqrt(s))

    return tail(lower) - tail(upper)


def sample_weighted_gaussian_tail(
    shift: float, scale2: float, lower: float, rng: RngStream, upper: float = math.inf
) -> float:
    """Exact draw with density proportional to (w + shift) * exp(-w^2/(2*scale2)) on (lower, upper).

    Needs lower + shift >= 0, which keeps the density nonnegative on its
    support.  Decomposes into a truncated-Rayleigh part and a truncated-Gaussian
    part on the nonnegative section, plus, when the support reaches below zero,
    a bounded strip handled by uniform-proposal rejection whose acceptance
    ratio is provably within [0, 1].
    """
    if scale2 <= 0.0:
        raise DomainError(f"scale2 must be positive, got {scale2}")
    if lower + shift < 0.0:
        raise DomainError("density would be negative near the lower edge")
    if not upper > lower:
        raise DomainError(f"need lower < upper, got ({lower}, {upper})")
    s = scale2
    sqs = math.sqrt(s)
    w_plus = max(lower, 0.0)
    strip_hi = min(upper, 0.0)
    # piece masses carry a common factor exp(-w_plus^2 / (2s)) that cancels in
    # the selection; dropping it keeps deep-tail supports exactly weighted
    if upper > w_plus:
        rel = math.exp(-(upper * upper - w_plus * w_plus) / (2.0 * s)) if upper != math.inf else 0.0
        mass_ray = s * (1.0 - rel)
        mass_gauss = shift * sqs * (
            mills_ratio(w_plus / sqs) - (rel * mills_ratio(upper / sqs) if rel else 0.0)
        )
    else:
        mass_ray = mass_gauss = 0.0
    if lower < strip_hi:
        # only reachable with w_plus == 0, so no rescaling applies here
        mass_strip = s * (
            math.exp(-lower * lower / (2.0 * s)) - math.exp(-strip_hi * strip_hi / (2.0 * s))
        ) + shift * math.sqrt(2.0 * math.pi * s) * (
            _std_cdf(strip_hi / sqs) - _std_cdf(lower / sqs)
        )
        mass_strip = max(mass_strip, 0.0)
    else:
        mass_strip = 0.0
    pick = rng.uniform() * (mass_ray + mass_gauss + mass_strip)
    if pick <= mass_ray and mass_ray > 0.0:
        return sample_rayleigh_interval(s, w_plus, upper, rng)
    if pick <= mass_ray + mass_gauss and mass_gauss > 0.0:
        return sample_truncated_normal(0.0, s, w_plus, rng, upper)
    # bounded strip below zero; the target is increasing there, so the value
    # at the strip's upper edge is an exact envelope
    env = (strip_hi + shift) * math.exp(-strip_hi * strip_hi / (2.0 * s))
    while True:
        w = lower + (strip_hi - lower) * rng.uniform()
        if rng.uniform() * env <= (w + shift) * math.exp(-w * w / (2.0 * s)):
            return w


@dataclass(frozen=True)
class LocalTimeDensityQuery:
    """Arguments for the joint point-value / local-time density.

    x is the start point, s the elapsed time, b the end point and l the
    accumulated local time at level zero over (0, s].
    """

    x: float
    s: float
    b: float
    l: float

    def __post_init__(self) -> None:
        if self.s <= 0.0:
            raise DomainError(f"elapsed time must be positive, got {self.s}")
        if self.l < 0.0:
            raise DomainError(f"local time must be nonnegative, got {self.l}")


def log_joint_density_f(x: float, s: float, b: float, l: float) -> float:
    """log of the joint density of (B_s, L_s) on {L_s > 0}, started at x."""
    if s <= 0.0:
        raise DomainError(f"elapsed time must be positive, got {s}")
    if l <= 0.0:
        raise DomainError("joint density needs l > 0; the l = 0 atom has its own evaluator")
    w = l + abs(b) + abs(x)
    return math.log(w) - w * w / (2.0 * s) - math.log(s) - 0.5 * math.log(2.0 * math.pi * s)


def joint_density_f(q: LocalTimeDensityQuery) -> float:
    """Joint density of the Brownian point value and its positive local time."""
    return math.exp(log_joint_density_f(q.x, q.s, q.b, q.l))


def atom_density_fstar(x: float, s: float, b: float) -> float:
    """Density of B_s on the event {L_s = 0}, started at x.

    Zero whenever x and b differ in sign or either is zero: a path connecting
    them must then touch level zero, so no atom mass remains.
    """
    if s <= 0.0:
        raise DomainError(f"elapsed time must be positive, got {s}")
    if x * b <= 0.0:
        return 0.0
    return normal_pdf(b, x, s) * -math.expm1(-2.0 * b * x / s)


def log_atom_density_fstar(x: float, s: float, b: float) -> float:
    """log of :func:`atom_density_fstar`; -inf outside its support."""
    if s <= 0.0:
        raise DomainError(f"elapsed time must be positive, got {s}")
    if x * b <= 0.0:
        return -math.inf
    z = b - x
    return (
        -z * z / (2.0 * s)
        - 0.5 * math.log(2.0 * math.pi * s)
        + math.log(-math.expm1(-2.0 * b * x / s))
    )
