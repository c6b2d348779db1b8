"""Sampling the tilted joint law of the terminal value and its local time.

The target endpoint law reweights the Brownian pair (value, local time at
zero) by exp(A(b) - theta * l), where A is the drift antiderivative and theta
the half-jump of the drift.  Two exact routes are provided:

* a two-step sampler for theta >= 0: draw the terminal value from a density
  proportional to exp(A(u)) times the Gaussian kernel, draw the local time
  from its Brownian conditional, and accept with exp(-theta * l);
* a mixture rejection sampler for theta < 0 (where the local-time tilt is
  unbounded against the Brownian conditional): six componentwise proposals
  that dominate the tails and the bulk, with a global envelope constant K
  built from closed-form per-region suprema and verified on a grid.

The mixture machinery also runs for theta >= 0 by building its envelope with
the tilt clamped at zero and folding exp(-theta * l) into the acceptance;
that mode exists so both routes can be cross-checked on the same drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, ndtri

from . import diagnostics
from .bridges import EndpointPair, sample_L_given_endpoints
from .distributions import (
    log_atom_density_fstar,
    log_joint_density_f,
    sample_truncated_normal,
    sample_weighted_gaussian_tail,
    weighted_gaussian_tail_mass,
)
from .drift import DriftSpec
from .errors import DomainError, EnvelopeViolationError, UnsupportedDriftError
from .rng import RngStream

_SQRT_2PI = math.sqrt(2.0 * math.pi)

_GRID_POINTS = 200
_GRID_SLACK = 1e-9


def _std_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _std_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


@dataclass
class MixtureComponent:
    """One proposal component: a b-marginal on an interval, and for joint
    components the exact tilted local-time conditional given b."""

    name: str
    kind: str  # "joint" or "atom"
    b_lo: float
    b_hi: float
    # b-marginal family: "texp" (tilted exponential) or "tnorm"
    b_family: str
    b_param1: float  # rate for texp, mean for tnorm
    b_param2: float  # unused for texp, variance for tnorm
    log_b_norm: float  # log of the b-marginal normaliser
    log_k: float  # log of sup over the region of m * gtilde / h_i

    def sample_b(self, rng: RngStream) -> float:
        if self.b_family == "texp":
            lam = self.b_param1
            width = self.b_hi - self.b_lo
            if abs(lam) * width < 1e-12:
                return self.b_lo + rng.uniform() * width
            u = rng.uniform()
            return self.b_lo + math.log1p(u * math.expm1(lam * width)) / lam
        mu, s2 = self.b_param1, self.b_param2
        if self.b_hi == math.inf:
            return sample_truncated_normal(mu, s2, self.b_lo, rng)
        if self.b_lo == -math.inf:
            return -sample_truncated_normal(-mu, s2, -self.b_hi, rng)
        sigma = math.sqrt(s2)
        p_lo = _std_cdf((self.b_lo - mu) / sigma)
        p_hi = _std_cdf((self.b_hi - mu) / sigma)
        while True:
            z = mu + sigma * float(ndtri(p_lo + rng.uniform() * (p_hi - p_lo)))
            if self.b_lo < z < self.b_hi:
                return z

    def log_pdf_b(self, b: float) -> float:
        if not self.b_lo <= b <= self.b_hi:
            return -math.inf
        if self.b_family == "texp":
            return self.b_param1 * b - self.log_b_norm
        mu, s2 = self.b_param1, self.b_param2
        return -((b - mu) ** 2) / (2.0 * s2) - 0.5 * math.log(2.0 * math.pi * s2) - self.log_b_norm


@dataclass
class EndpointLaw:
    """Tilted endpoint law of (X_T, L_T) for one drift, start point and horizon.

    Immutable once the mixture is built; safe to share across threads as long
    as each thread samples with its own stream.
    """

    drift: DriftSpec
    x: float
    T: float
    xi1: float = field(init=False)
    xi2: float = field(init=False)
    xi3: float = field(init=False)
    xi4: float = field(init=False)
    build_tilt: float = field(init=False)  # min(theta, 0); tilt baked into the envelope
    residual_tilt: float = field(init=False)  # theta - build_tilt, folded into acceptance
    components: list[MixtureComponent] | None = None
    log_K: float | None = None

    def __post_init__(self) -> None:
        if self.T <= 0.0:
            raise DomainError(f"horizon must be positive, got {self.T}")
        cutoff = abs(self.x) + math.sqrt(self.T)
        self.xi1, self.xi2 = cutoff, -cutoff
        self.xi3, self.xi4 = cutoff, -cutoff
        self.build_tilt = min(self.drift.theta, 0.0)
        self.residual_tilt = self.drift.theta - self.build_tilt

    # -- density evaluators ------------------------------------------------

    def log_gtilde(self, b: float, l: float) -> float:
        return (
            log_joint_density_f(self.x, self.T, b, l)
            + self.drift.antiderivative(b)
            - l * self.drift.theta
        )

    def log_gstar_tilde(self, b: float) -> float:
        log_f = log_atom_density_fstar(self.x, self.T, b)
        if log_f == -math.inf:
            return -math.inf
        return log_f + self.drift.antiderivative(b)

    # -- tilted local-time conditional given the terminal value -------------

    def _w0(self, b: float) -> float:
        return abs(b) + abs(self.x) + self.T * self.build_tilt

    def _log_l_mass(self, b: float) -> float:
        """log integral over l of (l + c) exp(-(l + c + T*tilt)^2 / 2T)."""
        mass = weighted_gaussian_tail_mass(-self.build_tilt * self.T, self.T, self._w0(b))
        return math.log(mass) if mass > 0.0 else -math.inf

    def sample_l_given_b(self, b: float, rng: RngStream) -> float:
        w0 = self._w0(b)
        while True:
            w = sample_weighted_gaussian_tail(-self.build_tilt * self.T, self.T, w0, rng)
            l = w - w0
            if l > 0.0:
                return l

    def log_l_conditional(self, b: float, l: float) -> float:
        c = abs(b) + abs(self.x)
        if l <= 0.0:
            return -math.inf
        w = l + c + self.T * self.build_tilt
        return math.log(l + c) - w * w / (2.0 * self.T) - self._log_l_mass(b)


def build_endpoint_law(drift: DriftSpec, x: float, T: float) -> EndpointLaw:
    return EndpointLaw(drift=drift, x=x, T=T)


def gtilde(law: EndpointLaw, b: float, l: float) -> float:
    """Unnormalised tilted joint density on {L_T > 0}."""
    if l <= 0.0:
        raise DomainError("gtilde needs l > 0; use gstar_tilde for the atom")
    return math.exp(law.log_gtilde(b, l))


def gstar_tilde(law: EndpointLaw, b: float) -> float:
    """Unnormalised tilted density of the atom {L_T = 0}."""
    v = law.log_gstar_tilde(b)
    return 0.0 if v == -math.inf else math.exp(v)


# -- two-step route (theta >= 0) --------------------------------------------


def sample_XT_from_h(law: EndpointLaw, rng: RngStream) -> float:
    """Exact draw of the terminal value, density proportional to exp(A(u)) * Gaussian.

    Piecewise-linear A (piecewise-constant drift): completing the square turns
    each half-line into a shifted Gaussian restricted to that half-line, so a
    two-component mixture samples it without rejection.  Bounded A: rejection
    against the plain Gaussian with the envelope exp(sup A).
    """
    d, x, T = law.drift, law.x, law.T
    sqT = math.sqrt(T)
    if d.linear_coeffs is not None:
        a1, a2 = d.linear_coeffs
        log_w_plus = a1 * x + 0.5 * a1 * a1 * T + float(log_ndtr((x + a1 * T) / sqT))
        log_w_minus = a2 * x + 0.5 * a2 * a2 * T + float(log_ndtr(-(x + a2 * T) / sqT))
        if log_w_minus == -math.inf:
            take_plus = True
        else:
            p_plus = 1.0 / (1.0 + math.exp(log_w_minus - log_w_plus))
            take_plus = rng.uniform() <= p_plus
        if take_plus:
            return sample_truncated_normal(x + a1 * T, T, 0.0, rng)
        return -sample_truncated_normal(-(x + a2 * T), T, 0.0, rng)
    if d.sup_antiderivative is not None:
        while True:
            z = x + sqT * rng.standard_normal()
            acc = diagnostics.checked_prob(
                math.exp(d.antiderivative(z) - d.sup_antiderivative), "terminal value envelope"
            )
            if rng.uniform() <= acc:
                return z
    raise UnsupportedDriftError(
        "terminal-value sampling needs a piecewise-linear antiderivative or a finite upper bound"
    )


def sample_endpoint_theta_positive(law: EndpointLaw, rng: RngStream) -> tuple[float, float]:
    """Two-step endpoint draw for a nonnegative jump; exact by local-time rejection."""
    theta = law.drift.theta
    if theta < 0.0:
        raise DomainError("two-step endpoint sampling needs theta >= 0")
    x, T = law.x, law.T
    while True:
        b = sample_XT_from_h(law, rng)
        l = sample_L_given_endpoints(EndpointPair(0.0, T, x, b, 0.0), rng)
        acc = diagnostics.checked_prob(math.exp(-theta * l), "local-time tilt")
        if rng.uniform() <= acc:
            return b, l


# -- mixture route -----------------------------------------------------------


def build_mixture(law: EndpointLaw) -> EndpointLaw:
    """Populate the proposal components and the envelope constant K.

    Only piecewise-constant drifts have the closed-form construction; other
    drifts must come with user-supplied components.  Every per-region bound
    is re-verified on a 200 x 200 grid and any violation aborts the build,
    because a wrong K would silently bias the sampler.
    """
    if law.components is not None:
        return law
    d = law.drift
    if d.linear_coeffs is None:
        raise UnsupportedDriftError(
            "no closed-form mixture for this drift; supply components and a bound"
        )
    a1, a2 = d.linear_coeffs
    x, T = law.x, law.T
    tilt = law.build_tilt
    sqT = math.sqrt(T)
    ax = abs(x)
    beta = ax + T * tilt
    m = 4 if x == 0.0 else 6
    log_m = math.log(m)
    log_c0 = -(math.log(T) + 0.5 * math.log(2.0 * math.pi * T)) + 0.5 * T * tilt * tilt
    lam_plus = a1 + tilt
    lam_minus = a2 - tilt
    mean_plus = a1 * T - ax
    mean_minus = a2 * T + ax
    log_n0 = math.log(weighted_gaussian_tail_mass(-tilt * T, T, beta))

    def log_texp_norm(lam: float, lo: float, hi: float) -> float:
        width = hi - lo
        if abs(lam) * width < 1e-12:
            return math.log(width)
        # integral of e^{lam b} over [lo, hi]
        return lam * lo + math.log(abs(math.expm1(lam * width) / lam))

    comps: list[MixtureComponent] = []

    # central joint regions: exponentially tilted proposals; the density
    # ratio there is proportional to the local-time mass N(b), which is
    # nonincreasing in |b|, so the supremum sits at the inner edge
    z1 = log_texp_norm(lam_plus, 0.0, law.xi1)
    comps.append(
        MixtureComponent(
            name="joint_center_pos",
            kind="joint",
            b_lo=0.0,
            b_hi=law.xi1,
            b_family="texp",
            b_param1=lam_plus,
            b_param2=0.0,
            log_b_norm=z1,
            log_k=log_m + log_c0 + ax * tilt + z1 + log_n0,
        )
    )
    z3 = log_texp_norm(lam_minus, law.xi2, 0.0)
    comps.append(
        MixtureComponent(
            name="joint_center_neg",
            kind="joint",
            b_lo=law.xi2,
            b_hi=0.0,
            b_family="texp",
            b_param1=lam_minus,
            b_param2=0.0,
            log_b_norm=z3,
            log_k=log_m + log_c0 + ax * tilt + z3 + log_n0,
        )
    )

    # tail joint regions: Gaussian proposals centred by completing the square;
    # the Gaussian part of the ratio is exactly constant and the residual
    # Mills-type term is bounded in closed form
    def tail_bound(lam: float, mean: float, edge: float, positive_side: bool) -> float:
        const = T * math.exp((mean * mean - beta * beta) / (2.0 * T))
        q_bound = 0.5 * math.exp((mean * mean - beta * beta) / (2.0 * T))

        def q_hat(b: float) -> float:
            return math.exp(lam * b + (b - mean) ** 2 / (2.0 * T))

        if positive_side and edge < -beta:
            q_bound = max(q_bound, q_hat(edge), q_hat(-beta))
        if not positive_side and edge > beta:
            q_bound = max(q_bound, q_hat(edge), q_hat(beta))
        return const + (-tilt) * T * _SQRT_2PI * q_bound

    log_z2 = float(log_ndtr(-(law.xi1 - mean_plus) / sqT))
    comps.append(
        MixtureComponent(
            name="joint_tail_pos",
            kind="joint",
            b_lo=law.xi1,
            b_hi=math.inf,
            b_family="tnorm",
            b_param1=mean_plus,
            b_param2=T,
            log_b_norm=log_z2,
            log_k=log_m
            + log_c0
            + ax * tilt
            + 0.5 * math.log(2.0 * math.pi * T)
            + log_z2
            + math.log(tail_bound(lam_plus, mean_plus, law.xi1, True)),
        )
    )
    log_z4 = float(log_ndtr((law.xi2 - mean_minus) / sqT))
    comps.append(
        MixtureComponent(
            name="joint_tail_neg",
            kind="joint",
            b_lo=-math.inf,
            b_hi=law.xi2,
            b_family="tnorm",
            b_param1=mean_minus,
            b_param2=T,
            log_b_norm=log_z4,
            log_k=log_m
            + log_c0
            + ax * tilt
            + 0.5 * math.log(2.0 * math.pi * T)
            + log_z4
            + math.log(tail_bound(lam_minus, mean_minus, law.xi2, False)),
        )
    )

    if x != 0.0:
        # atom components live on the sign half-line of the start point; the
        # ratio is the no-zero-touch factor, increasing in |b|
        a_side = a1 if x > 0.0 else a2
        mean_atom = x + a_side * T
        log_shift = a_side * x + 0.5 * a_side * a_side * T
        if x > 0.0:
            lo_c, hi_c = 0.0, law.xi3
            lo_t, hi_t = law.xi3, math.inf
            edge_factor = -math.expm1(-2.0 * law.xi3 * x / T)
            log_zc = math.log(
                max(_std_cdf((hi_c - mean_atom) / sqT) - _std_cdf((lo_c - mean_atom) / sqT), 1e-300)
            )
            log_zt = float(log_ndtr(-(law.xi3 - mean_atom) / sqT))
        else:
            lo_c, hi_c = law.xi4, 0.0
            lo_t, hi_t = -math.inf, law.xi4
            edge_factor = -math.expm1(-2.0 * law.xi4 * x / T)
            log_zc = math.log(
                max(_std_cdf((hi_c - mean_atom) / sqT) - _std_cdf((lo_c - mean_atom) / sqT), 1e-300)
            )
            log_zt = float(log_ndtr((law.xi4 - mean_atom) / sqT))
        comps.append(
            MixtureComponent(
                name="atom_center",
                kind="atom",
                b_lo=lo_c,
                b_hi=hi_c,
                b_family="tnorm",
                b_param1=mean_atom,
                b_param2=T,
                log_b_norm=log_zc,
                log_k=log_m + log_shift + math.log(edge_factor) + log_zc,
            )
        )
        comps.append(
            MixtureComponent(
                name="atom_tail",
                kind="atom",
                b_lo=lo_t,
                b_hi=hi_t,
                b_family="tnorm",
                b_param1=mean_atom,
                b_param2=T,
                log_b_norm=log_zt,
                log_k=log_m + log_shift + log_zt,
            )
        )

    law.components = comps
    law.log_K = max(c.log_k for c in comps)
    _verify_mixture_on_grid(law)
    return law


def _log_component_pdf(law: EndpointLaw, comp: MixtureComponent, b: float, l: float) -> float:
    if comp.kind == "atom":
        return comp.log_pdf_b(b)
    return comp.log_pdf_b(b) + law.log_l_conditional(b, l)


def _log_acceptance(law: EndpointLaw, comp: MixtureComponent, b: float, l: float) -> float:
    """log of the sampling acceptance m * gtilde_total / (K * h_i)."""
    m = len(law.components)
    if comp.kind == "atom":
        log_target = law.log_gstar_tilde(b)
    else:
        log_target = law.log_gtilde(b, l)
    if log_target == -math.inf:
        return -math.inf
    return math.log(m) + log_target - _log_component_pdf(law, comp, b, l) - law.log_K


def _log_build_ratio(law: EndpointLaw, comp: MixtureComponent, b: float, l: float) -> float:
    """log of the envelope claim m * gtilde_build / (K * h_i), which must be <= 0.

    The build target carries only the clamped tilt; any positive residual
    tilt only shrinks the sampling target further.
    """
    return _log_acceptance(law, comp, b, l) + law.residual_tilt * l


def _verify_mixture_on_grid(law: EndpointLaw) -> None:
    T, x = law.T, law.x
    sqT = math.sqrt(T)
    span = 10.0 * sqT
    l_hi = abs(x) + 10.0 * sqT + 4.0 * abs(law.build_tilt) * T
    l_grid = np.linspace(l_hi / _GRID_POINTS, l_hi, _GRID_POINTS)
    for comp in law.components:
        b_lo = comp.b_lo if comp.b_lo != -math.inf else comp.b_hi - span
        b_hi = comp.b_hi if comp.b_hi != math.inf else comp.b_lo + span
        b_grid = np.linspace(b_lo, b_hi, _GRID_POINTS)
        for b in b_grid:
            b = float(b)
            if comp.kind == "atom":
                if _log_build_ratio(law, comp, b, 0.0) > _GRID_SLACK:
                    raise EnvelopeViolationError(
                        f"mixture bound violated on grid at b={b} in {comp.name}"
                    )
                continue
            for l in l_grid:
                if _log_build_ratio(law, comp, b, float(l)) > _GRID_SLACK:
                    raise EnvelopeViolationError(
                        f"mixture bound violated on grid at (b={b}, l={l}) in {comp.name}"
                    )


def _sample_endpoint_mixture(law: EndpointLaw, rng: RngStream) -> tuple[float, float]:
    build_mixture(law)
    comps = law.components
    m = len(comps)
    while True:
        comp = comps[int(rng.uniform() * m) % m]
        u2 = rng.uniform()
        b = comp.sample_b(rng)
        if comp.kind == "atom":
            l = 0.0
        else:
            l = law.sample_l_given_b(b, rng)
        log_acc = _log_acceptance(law, comp, b, l)
        if log_acc > _GRID_SLACK:
            raise EnvelopeViolationError(
                f"mixture envelope exceeded at (b={b}, l={l}) in {comp.name}: "
                f"log ratio {log_acc}"
            )
        acc = diagnostics.checked_prob(math.exp(min(log_acc, 0.0)), "endpoint mixture")
        if u2 <= acc:
            return b, l


def sample_endpoint_theta_negative(law: EndpointLaw, rng: RngStream) -> tuple[float, float]:
    """Mixture endpoint draw for a negative jump; exact by global rejection."""
    if not law.drift.theta < 0.0:
        raise DomainError("mixture endpoint sampling is for theta < 0")
    return _sample_endpoint_mixture(law, rng)


def sample_endpoint(law: EndpointLaw, rng: RngStream) -> tuple[float, float]:
    """Exact draw of (X_T, L_T) from the tilted endpoint law."""
    if law.drift.theta < 0.0:
        return sample_endpoint_theta_negative(law, rng)
    return sample_endpoint_theta_positive(law, rng)
