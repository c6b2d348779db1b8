"""Exact samplers for Brownian motion conditioned jointly with its local time.

Three conditional laws are covered, all with local time taken at level zero:

* the local time at a later instant given point values at both ends of an
  interval and the local time at its left end;
* the path value at an interior instant when the local time is known not to
  change across the interval (the path then keeps one strict sign);
* the pair (value, local time) at an interior instant when the local time
  strictly increases across the interval, which splits into three cases:
  the increase happens entirely after the interior instant, entirely before
  it, or straddles it.

Case probabilities use closed forms validated against quadrature; every
rejection step has an acceptance ratio that provably lies in [0, 1].
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_left
from dataclasses import dataclass

from . import diagnostics
from .distributions import (
    log_atom_density_fstar,
    log_joint_density_f,
    mills_ratio as _mills,
    sample_rayleigh_interval,
    sample_truncated_normal,
    sample_truncated_rayleigh,
    sample_weighted_gaussian_tail,
)
from .drift import SkeletonPoint
from .errors import DomainError
from .rng import RngStream

logger = logging.getLogger(__name__)

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Plain product-Rayleigh proposals are abandoned for the range-truncated
# fallback when their acceptance rate is below this; the rate has a closed
# form, so the route choice is a pure function of the query and reruns stay
# bit-for-bit deterministic.  The attempt cap is a backstop only.
_XI2_RATE_FLOOR = 1e-4
_XI2_RATE_CHECK_AFTER = 64
_XI2_FALLBACK_AFTER = 10_000

_CLAMP_LOG_THRESHOLD = 1e-9


@dataclass(frozen=True)
class EndpointPair:
    """Conditioning data (s1, s2, b1, b2, l1) for the one-sided local-time law."""

    s1: float
    s2: float
    b1: float
    b2: float
    l1: float = 0.0

    def __post_init__(self) -> None:
        if not self.s2 > self.s1:
            raise DomainError(f"need s2 > s1, got ({self.s1}, {self.s2})")
        if self.l1 < 0.0:
            raise DomainError(f"local time must be nonnegative, got {self.l1}")


@dataclass(frozen=True)
class BridgeQuery:
    """Conditioning data for the two-sided interior law at time s2.

    When l1 == l3 the path cannot touch zero on [s1, s3], so b1 and b3 must
    share a strict sign; queries violating that are rejected as impossible
    conditioning events.
    """

    s1: float
    s2: float
    s3: float
    b1: float
    b3: float
    l1: float
    l3: float

    def __post_init__(self) -> None:
        if not self.s1 < self.s2 < self.s3:
            raise DomainError(f"need s1 < s2 < s3, got ({self.s1}, {self.s2}, {self.s3})")
        if self.l1 < 0.0 or self.l3 < self.l1:
            raise DomainError(f"need 0 <= l1 <= l3, got ({self.l1}, {self.l3})")
        if self.l1 == self.l3 and not self.b1 * self.b3 > 0.0:
            raise DomainError(
                "constant local time forces a strict common sign of the end values; "
                f"got b1={self.b1}, b3={self.b3}"
            )


@dataclass(frozen=True)
class CaseWeights:
    """Split probabilities for the strictly-increasing local time bridge.

    p1: all increase after s2 (local time still l1 at s2);
    p3: all increase before s2 (already l3 at s2);
    p2: increase straddles s2.  The remaining fields are the closed-form
    intermediates, kept for inspection and cross-checks.
    """

    p1: float
    p2: float
    p3: float
    c1: float
    c2: float
    k1: float
    k2: float
    mu1: float
    mu2: float
    mu3: float
    mu4: float
    nu1: float
    nu2: float
    nu3: float
    nu4: float
    sigma2: float


@dataclass(frozen=True)
class UVRegion:
    """Admissible region for the straddling case in transformed coordinates.

    With u = (l2 - l1) + |b2| + |b1| and v = (l3 - l2) + |b3| + |b2|, the
    constraints l1 <= l2 <= l3 and |b2| >= 0 become two 45-degree bands and
    one anti-diagonal cut.  The coefficients are derived by inverting the
    transform rather than transcribed, so membership and pullback agree by
    construction.
    """

    c_lo: float
    c_hi: float
    s_min: float
    l1: float
    l3: float
    abs_b1: float
    abs_b3: float

    @classmethod
    def from_query(cls, q: BridgeQuery) -> "UVRegion":
        dl = q.l3 - q.l1
        ab1, ab3 = abs(q.b1), abs(q.b3)
        return cls(
            c_lo=-dl - ab1 + ab3,
            c_hi=dl - ab1 + ab3,
            s_min=dl + ab1 + ab3,
            l1=q.l1,
            l3=q.l3,
            abs_b1=ab1,
            abs_b3=ab3,
        )

    def contains(self, u: float, v: float) -> bool:
        return (u + self.c_lo <= v <= u + self.c_hi) and (u + v >= self.s_min)

    def pullback(self, u: float, v: float) -> tuple[float, float]:
        """Map (u, v) back to (l2, |b2|)."""
        l2 = 0.5 * (u - v + self.l3 + self.l1 - self.abs_b1 + self.abs_b3)
        ab2 = 0.5 * (u + v - (self.l3 - self.l1) - self.abs_b1 - self.abs_b3)
        return l2, ab2


def prob_local_time_constant(e: EndpointPair) -> float:
    """Probability that the local time stays at l1 across [s1, s2].

    Positive only when both end values share a strict sign; a sign change or
    a zero endpoint forces the path through level zero.
    """
    if e.b1 * e.b2 <= 0.0:
        return 0.0
    return -math.expm1(-2.0 * e.b1 * e.b2 / (e.s2 - e.s1))


def sample_L_given_endpoints(e: EndpointPair, rng: RngStream) -> float:
    """Exact draw of the local time at s2 given both end values and l1."""
    p_const = prob_local_time_constant(e)
    if p_const > 0.0 and rng.uniform() <= p_const:
        return e.l1
    floor = abs(e.b1) + abs(e.b2)
    while True:
        y = sample_truncated_rayleigh(e.s2 - e.s1, floor, rng)
        l2 = e.l1 + (y - floor)
        # rounding can collapse the increment; the event has probability zero
        # and retrying preserves the law while protecting the l2 > l1 contract
        if l2 > e.l1:
            return l2


def bridge_gaussian_params(q: BridgeQuery) -> tuple[float, float]:
    """Mean and variance of the interior Gaussian bridge kernel."""
    d1, d2, D = q.s2 - q.s1, q.s3 - q.s2, q.s3 - q.s1
    return (q.b1 * d2 + q.b3 * d1) / D, d1 * d2 / D


def nu1_density(b2: float, q: BridgeQuery) -> float:
    """Normalised interior-value density when the local time does not change."""
    if q.l1 != q.l3:
        raise DomainError("constant-local-time density needs l1 == l3")
    d1, d2, D = q.s2 - q.s1, q.s3 - q.s2, q.s3 - q.s1
    if b2 * q.b1 <= 0.0:
        return 0.0
    mu = (q.b1 * d2 + q.b3 * d1) / D
    sigma2 = d1 * d2 / D
    z = b2 - mu
    dens = math.exp(-z * z / (2.0 * sigma2)) / math.sqrt(2.0 * math.pi * sigma2)
    dens *= -math.expm1(-2.0 * b2 * q.b1 / d1)
    dens *= -math.expm1(-2.0 * q.b3 * b2 / d2)
    return dens / -math.expm1(-2.0 * q.b3 * q.b1 / D)


def sample_B_conditional_zero_increment(q: BridgeQuery, rng: RngStream) -> float:
    """Exact interior value draw given equal local times at both ends.

    Proposes from the bridge Gaussian truncated to the common sign half-line
    and accepts with the product of the two no-zero-touch factors, which is
    the target/proposal density ratio scaled by its exact supremum.
    """
    if q.l1 != q.l3:
        raise DomainError("zero-increment sampler needs l1 == l3")
    d1, d2, D = q.s2 - q.s1, q.s3 - q.s2, q.s3 - q.s1
    mu = (q.b1 * d2 + q.b3 * d1) / D
    sigma2 = d1 * d2 / D
    sgn = 1.0 if q.b1 > 0.0 else -1.0
    while True:
        z = sgn * sample_truncated_normal(sgn * mu, sigma2, 0.0, rng)
        acc = (-math.expm1(-2.0 * z * q.b1 / d1)) * (-math.expm1(-2.0 * q.b3 * z / d2))
        acc = diagnostics.checked_prob(acc, "zero-increment bridge")
        if rng.uniform() <= acc:
            return z


def _log_halfline_weight(m: float, sigma: float, k: float) -> float:
    """log of the integral of (k + z) exp(-(z - m)^2 / (2 sigma^2)) over (0, inf)."""
    bracket = sigma + (m + k) * _mills(-m / sigma)
    if bracket <= 0.0:
        return -math.inf
    return math.log(sigma) - m * m / (2.0 * sigma * sigma) + math.log(bracket)


def _log_halfline_weight_interval(m: float, sigma: float, lo: float, hi: float) -> float:
    """log of the integral of z exp(-(z - m)^2 / (2 sigma^2)) over (lo, hi).

    Evaluated as a difference of shifted half-line integrals, each stable in
    log space, so deep-tail intervals keep full relative accuracy.
    """
    log_lo = _log_halfline_weight(m - lo, sigma, lo)
    log_hi = _log_halfline_weight(m - hi, sigma, hi)
    if log_lo == -math.inf:
        return -math.inf
    if log_hi - log_lo >= 0.0:
        return -math.inf
    return log_lo + math.log(-math.expm1(log_hi - log_lo))


def compute_case_weights(q: BridgeQuery) -> CaseWeights:
    """Closed-form case probabilities for a strictly increasing local time."""
    if not q.l3 > q.l1:
        raise DomainError("case weights need l3 > l1")
    d1, d2, D = q.s2 - q.s1, q.s3 - q.s2, q.s3 - q.s1
    dl = q.l3 - q.l1
    ab1, ab3 = abs(q.b1), abs(q.b3)
    k1 = dl + ab3
    k2 = dl + ab1
    sigma2 = d1 * d2 / D
    sigma = math.sqrt(sigma2)

    mu1 = (q.b1 * d2 - k1 * d1) / D
    mu2 = mu1 - 2.0 * q.b1 * d2 / D
    mu3 = (q.b1 * d2 + k1 * d1) / D
    mu4 = mu3 - 2.0 * q.b1 * d2 / D
    nu1 = (q.b3 * d1 - k2 * d2) / D
    nu2 = nu1 - 2.0 * q.b3 * d1 / D
    nu3 = (q.b3 * d1 + k2 * d2) / D
    nu4 = nu3 - 2.0 * q.b3 * d1 / D

    # weight of the conditioning joint density, shared by both prefactors
    w_all = dl + ab1 + ab3
    log_f_D = math.log(w_all) - w_all * w_all / (2.0 * D) - math.log(D) - 0.5 * math.log(
        2.0 * math.pi * D
    )
    log_c1 = -log_f_D - math.log(2.0 * math.pi) - 0.5 * math.log(d1) - 1.5 * math.log(d2)
    log_c2 = -log_f_D - math.log(2.0 * math.pi) - 1.5 * math.log(d1) - 0.5 * math.log(d2)

    def atom_weight(b_end: float, k: float, m_same: float, m_flip: float, dd: float) -> float:
        # common pattern of both closed forms: a scaled difference of two
        # half-line Gaussian first moments, with the conditioning exponent
        # cancelled against the prefactor
        if b_end == 0.0:
            return 0.0
        ab = abs(b_end)
        if b_end > 0.0:
            log_ta = _log_halfline_weight(m_same, sigma, k)
            log_tb = _log_halfline_weight(m_flip, sigma, k)
        else:
            log_ta = _log_halfline_weight(-m_same, sigma, k)
            log_tb = _log_halfline_weight(-m_flip, sigma, k)
        prefactor = D**1.5 / (_SQRT_2PI * (k + ab) * dd)
        if log_ta == -math.inf:
            return 0.0
        dexp = 2.0 * ab * k / D + log_tb - log_ta
        if dexp >= 0.0:
            return 0.0
        p = prefactor * math.exp(log_ta) * -math.expm1(dexp)
        return min(max(p, 0.0), 1.0)

    if q.b1 > 0.0:
        p1 = atom_weight(q.b1, k1, mu1, mu2, math.sqrt(d1) * d2**1.5)
    else:
        p1 = atom_weight(q.b1, k1, mu3, mu4, math.sqrt(d1) * d2**1.5)
    if q.b3 > 0.0:
        p3 = atom_weight(q.b3, k2, nu1, nu2, d1**1.5 * math.sqrt(d2))
    else:
        p3 = atom_weight(q.b3, k2, nu3, nu4, d1**1.5 * math.sqrt(d2))

    raw_p2 = 1.0 - p1 - p3
    p2 = min(max(raw_p2, 0.0), 1.0)
    if abs(p2 - raw_p2) > _CLAMP_LOG_THRESHOLD:
        logger.warning(
            "case weight p2 clamped by %.3e for query %r", abs(p2 - raw_p2), q
        )

    return CaseWeights(
        p1=p1,
        p2=p2,
        p3=p3,
        c1=math.exp(log_c1) if log_c1 < 700.0 else math.inf,
        c2=math.exp(log_c2) if log_c2 < 700.0 else math.inf,
        k1=k1,
        k2=k2,
        mu1=mu1,
        mu2=mu2,
        mu3=mu3,
        mu4=mu4,
        nu1=nu1,
        nu2=nu2,
        nu3=nu3,
        nu4=nu4,
        sigma2=sigma2,
    )


def _log_f_cond(q: BridgeQuery) -> float:
    return log_joint_density_f(q.b1, q.s3 - q.s1, q.b3, q.l3 - q.l1)


def xi1_density(b2: float, q: BridgeQuery) -> float:
    """Unnormalised-by-p1 density of the interior value when l2 == l1 < l3.

    Normalised against the conditioning event, so it integrates to p1 over
    the sign half-line of b1.
    """
    if not q.l3 > q.l1:
        raise DomainError("xi1 needs l3 > l1")
    if b2 * q.b1 <= 0.0 or b2 == 0.0:
        return 0.0
    log_val = (
        log_atom_density_fstar(q.b1, q.s2 - q.s1, b2)
        + log_joint_density_f(b2, q.s3 - q.s2, q.b3, q.l3 - q.l1)
        - _log_f_cond(q)
    )
    return math.exp(log_val)


def xi3_density(b2: float, q: BridgeQuery) -> float:
    """Mirror of :func:`xi1_density`: the increase is complete by s2."""
    if not q.l3 > q.l1:
        raise DomainError("xi3 needs l3 > l1")
    if b2 * q.b3 <= 0.0 or b2 == 0.0:
        return 0.0
    log_val = (
        log_joint_density_f(q.b1, q.s2 - q.s1, b2, q.l3 - q.l1)
        + log_atom_density_fstar(b2, q.s3 - q.s2, q.b3)
        - _log_f_cond(q)
    )
    return math.exp(log_val)


def xi2_density(b2: float, l2: float, q: BridgeQuery) -> float:
    """Joint density of (value, local time) in the straddling case."""
    if not q.l3 > q.l1:
        raise DomainError("xi2 needs l3 > l1")
    if not q.l1 < l2 < q.l3:
        return 0.0
    log_val = (
        log_joint_density_f(q.b1, q.s2 - q.s1, b2, l2 - q.l1)
        + log_joint_density_f(b2, q.s3 - q.s2, q.b3, q.l3 - l2)
        - _log_f_cond(q)
    )
    return math.exp(log_val)


def sample_xi1(q: BridgeQuery, rng: RngStream) -> float:
    """Exact draw from the l2 == l1 case.

    The two Gaussian kernels of the target merge into a single one with mean
    mu1 and variance sigma2, leaving a linear-weight factor (k1 + |z|) that
    the proposal carries exactly; the only rejection factor left is the
    no-zero-touch probability, which lies in (0, 1) by construction.
    """
    if q.b1 == 0.0:
        raise DomainError("xi1 case has zero probability when b1 == 0")
    d1, d2, D = q.s2 - q.s1, q.s3 - q.s2, q.s3 - q.s1
    k1 = (q.l3 - q.l1) + abs(q.b3)
    sigma2 = d1 * d2 / D
    ab1 = abs(q.b1)
    m = (ab1 * d2 - k1 * d1) / D
    sgn = 1.0 if q.b1 > 0.0 else -1.0
    while True:
        z = m + sample_weighted_gaussian_tail(m + k1, sigma2, -m, rng)
        acc = diagnostics.checked_prob(-math.expm1(-2.0 * z * ab1 / d1), "xi1 sampler")
        if rng.uniform() <= acc:
            return sgn * z


def sample_xi3(q: BridgeQuery, rng: RngStream) -> float:
    """Exact draw from the l2 == l3 case; mirror image of :func:`sample_xi1`."""
    if q.b3 == 0.0:
        raise DomainError("xi3 case has zero probability when b3 == 0")
    d1, d2, D = q.s2 - q.s1, q.s3 - q.s2, q.s3 - q.s1
    k2 = (q.l3 - q.l1) + abs(q.b1)
    sigma2 = d1 * d2 / D
    ab3 = abs(q.b3)
    m = (ab3 * d1 - k2 * d2) / D
    sgn = 1.0 if q.b3 > 0.0 else -1.0
    while True:
        z = m + sample_weighted_gaussian_tail(m + k2, sigma2, -m, rng)
        acc = diagnostics.checked_prob(-math.expm1(-2.0 * z * ab3 / d2), "xi3 sampler")
        if rng.uniform() <= acc:
            return sgn * z


def sample_xi2(q: BridgeQuery, rng: RngStream) -> tuple[float, float]:
    """Exact draw of (b2, l2) from the straddling case.

    Proposes an independent Rayleigh pair and accepts on membership of the
    admissible region.  If that plainly never accepts (rate below about
    1e-4), switches to proposals truncated to the region's coordinate ranges
    with an exactness-preserving acceptance correction, so extreme bridges
    still have bounded expected work.
    """
    if not q.l3 > q.l1:
        raise DomainError("xi2 needs l3 > l1")
    region = UVRegion.from_query(q)
    d1, d2 = q.s2 - q.s1, q.s3 - q.s2

    budget = _XI2_FALLBACK_AFTER
    attempts = 0
    while attempts < budget:
        attempts += 1
        u = sample_truncated_rayleigh(d1, 0.0, rng)
        v = sample_truncated_rayleigh(d2, 0.0, rng)
        if region.contains(u, v):
            l2, ab2 = region.pullback(u, v)
            if q.l1 < l2 < q.l3 and ab2 >= 0.0:
                b2 = ab2 if rng.uniform() < 0.5 else -ab2
                return b2, l2
        if attempts == _XI2_RATE_CHECK_AFTER and budget > attempts:
            # the plain route accepts with closed-form probability
            # p2 * 2 pi sqrt(d1 d2) * (conditioning joint density); stop
            # early when that is hopeless
            rate = (
                compute_case_weights(q).p2
                * 2.0
                * math.pi
                * math.sqrt(d1 * d2)
                * math.exp(_log_f_cond(q))
            )
            if rate < _XI2_RATE_FLOOR:
                break

    diagnostics.bump("xi2_fallback_engaged")
    # Range-truncated proposal for bridges the plain product essentially never
    # hits.  The admissible region is {u > u_min, v_lo(u) <= v <= v_hi(u)} with
    # v_lo piecewise linear, so bounding the v-section mass by its lower-edge
    # value and absorbing that envelope into the u-proposal completes the
    # square branchwise: u is drawn from a linear-weighted Gaussian kernel per
    # branch, and the only rejection left is the exact section-mass ratio
    # 1 - exp(-(v_hi^2 - v_lo^2) / (2 d2)), which lies in (0, 1).
    dl = q.l3 - q.l1
    u_min = region.abs_b1
    u_knee = dl + region.abs_b1  # v_lo switches branches here
    D = q.s3 - q.s1
    sigma = math.sqrt(d1 * d2 / D)
    sigma2 = sigma * sigma
    mean_a = region.s_min * d1 / D
    mean_b = -region.c_lo * d1 / D
    log_w_a = -region.s_min**2 / (2.0 * D) + _log_halfline_weight_interval(
        mean_a, sigma, u_min, u_knee
    )
    log_w_b = -region.c_lo**2 / (2.0 * D) + _log_halfline_weight(mean_b - u_knee, sigma, u_knee)
    diff = log_w_b - log_w_a
    if diff > 700.0:
        p_branch_a = 0.0
    elif diff < -700.0:
        p_branch_a = 1.0
    else:
        p_branch_a = 1.0 / (1.0 + math.exp(diff))
    while True:
        if rng.uniform() <= p_branch_a:
            mean, lo, hi = mean_a, u_min, u_knee
        else:
            mean, lo, hi = mean_b, u_knee, math.inf
        u = mean + sample_weighted_gaussian_tail(mean, sigma2, lo - mean, rng, hi - mean)
        v_lo = max(u + region.c_lo, region.s_min - u)
        v_hi = u + region.c_hi
        if not v_hi > v_lo:
            continue
        acc = diagnostics.checked_prob(
            -math.expm1(-(v_hi * v_hi - v_lo * v_lo) / (2.0 * d2)),
            "xi2 fallback section mass",
        )
        if rng.uniform() > acc:
            continue
        v = sample_rayleigh_interval(d2, v_lo, v_hi, rng)
        l2, ab2 = region.pullback(u, v)
        if q.l1 < l2 < q.l3 and ab2 >= 0.0:
            b2 = ab2 if rng.uniform() < 0.5 else -ab2
            return b2, l2


def sample_bridge_point(q: BridgeQuery, rng: RngStream) -> tuple[float, float]:
    """Exact draw of (value, local time) at the interior instant of a bridge."""
    if q.l1 == q.l3:
        return sample_B_conditional_zero_increment(q, rng), q.l1
    cw = compute_case_weights(q)
    u = rng.uniform()
    if cw.p1 > 0.0 and u <= cw.p1:
        return sample_xi1(q, rng), q.l1
    if cw.p3 > 0.0 and u <= cw.p1 + cw.p3:
        return sample_xi3(q, rng), q.l3
    return sample_xi2(q, rng)


def interpolate_skeleton(
    points: list[SkeletonPoint], new_times: list[float], rng: RngStream
) -> list[SkeletonPoint]:
    """Insert interior times into a skeleton, filling values and local times.

    Times are inserted left to right; each insertion conditions only on its
    bracketing neighbours, which is all the joint law requires since the
    (value, local time) pair is Markov.  A time already present is returned
    unchanged.
    """
    if not points:
        raise DomainError("skeleton must contain at least one point")
    result = list(points)
    for i in range(1, len(result)):
        if not result[i].t > result[i - 1].t:
            raise DomainError("skeleton times must be strictly increasing")
    lo, hi = result[0].t, result[-1].t
    for t in sorted(float(t) for t in new_times):
        if t < lo or t > hi:
            raise DomainError(f"time {t} outside the skeleton range [{lo}, {hi}]")
        idx = bisect_left(result, t, key=lambda p: p.t)
        if idx < len(result) and result[idx].t == t:
            continue
        left, right = result[idx - 1], result[idx]
        query = BridgeQuery(left.t, t, right.t, left.x, right.x, left.l, right.l)
        b2, l2 = sample_bridge_point(query, rng)
        result.insert(idx, SkeletonPoint(t, b2, l2))
    return result
