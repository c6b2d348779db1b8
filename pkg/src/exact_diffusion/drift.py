"""Drift specifications for unit-volatility diffusions dX = alpha(X)dt + dB.

The drift may jump once, at level zero.  A :class:`DriftSpec` bundles the
drift, its derivative, its antiderivative pinned to zero at the origin, the
half-jump size, and the two constants (``kappa``, ``big_m``) that box the
running cost used by the thinning step.  The library validates user-supplied
bounds; it never derives them symbolically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable
from weakref import WeakSet

import numpy as np
from scipy import integrate

from .errors import DomainError, DriftValidationError


@dataclass(frozen=True, eq=False)
class DriftSpec:
    """A drift with (at most) one discontinuity, at level zero.

    ``antiderivative`` must satisfy A(0) = 0 and be continuous at 0.
    ``kappa`` and ``big_m`` must satisfy
    0 <= (alpha^2(u) + alpha'(u))/2 - kappa <= big_m for all u != 0.
    ``theta`` is (alpha(0+) - alpha(0-))/2.
    """

    alpha: Callable[[float], float]
    alpha_prime: Callable[[float], float]
    antiderivative: Callable[[float], float]
    theta: float
    kappa: float
    big_m: float
    alpha_plus0: float
    alpha_minus0: float
    # (a1, a2) when the drift is constant on each side; enables closed-form
    # endpoint machinery.
    linear_coeffs: tuple[float, float] | None = None
    # Finite upper bound of the antiderivative, when one exists; enables the
    # rejection route for endpoint sampling of bounded-potential drifts.
    sup_antiderivative: float | None = None
    family: str = "custom"
    params: dict = field(default_factory=dict)
    # Vectorised drift for the Euler baseline; optional.
    alpha_vec: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class SkeletonPoint:
    """One sampled point (t, X_t, L_t) of a path skeleton."""

    t: float
    x: float
    l: float

    def __post_init__(self) -> None:
        if self.l < 0.0:
            raise DomainError(f"local time must be nonnegative, got {self.l}")


def phi(d: DriftSpec, u: float) -> float:
    """Thinning intensity (alpha^2 + alpha')/2 - kappa, taken as -kappa at u = 0.

    The value at the single point u = 0 carries no probability mass; fixing
    it through the indicator keeps thinning deterministic.
    """
    if u == 0.0:
        return -d.kappa
    return 0.5 * (d.alpha(u) ** 2 + d.alpha_prime(u)) - d.kappa


def make_piecewise_constant(a1: float, a2: float) -> DriftSpec:
    """Drift equal to a1 on [0, inf) and a2 on (-inf, 0)."""

    def alpha(u: float) -> float:
        return a1 if u >= 0.0 else a2

    def alpha_prime(u: float) -> float:
        return 0.0

    def antiderivative(u: float) -> float:
        return a1 * u if u >= 0.0 else a2 * u

    def alpha_vec(x: np.ndarray) -> np.ndarray:
        return np.where(x >= 0.0, a1, a2)

    return DriftSpec(
        alpha=alpha,
        alpha_prime=alpha_prime,
        antiderivative=antiderivative,
        theta=0.5 * (a1 - a2),
        kappa=0.5 * min(a1 * a1, a2 * a2),
        big_m=0.5 * abs(a1 * a1 - a2 * a2),
        alpha_plus0=a1,
        alpha_minus0=a2,
        linear_coeffs=(a1, a2),
        sup_antiderivative=None,
        family="piecewise_constant",
        params={"a1": a1, "a2": a2},
        alpha_vec=alpha_vec,
    )


def make_piecewise_sine(theta1: float, theta2: float) -> DriftSpec:
    """Drift sin(u - theta1) on [0, inf) and sin(u - theta2) on (-inf, 0)."""

    def alpha(u: float) -> float:
        return math.sin(u - theta1) if u >= 0.0 else math.sin(u - theta2)

    def alpha_prime(u: float) -> float:
        return math.cos(u - theta1) if u >= 0.0 else math.cos(u - theta2)

    def antiderivative(u: float) -> float:
        if u >= 0.0:
            return math.cos(theta1) - math.cos(u - theta1)
        return math.cos(theta2) - math.cos(u - theta2)

    def alpha_vec(x: np.ndarray) -> np.ndarray:
        return np.where(x >= 0.0, np.sin(x - theta1), np.sin(x - theta2))

    # (sin^2 + cos)/2 ranges over [-1/2, 5/8], so kappa = -1/2, M = 9/8.
    return DriftSpec(
        alpha=alpha,
        alpha_prime=alpha_prime,
        antiderivative=antiderivative,
        theta=0.5 * (math.sin(-theta1) - math.sin(-theta2)),
        kappa=-0.5,
        big_m=9.0 / 8.0,
        alpha_plus0=math.sin(-theta1),
        alpha_minus0=math.sin(-theta2),
        linear_coeffs=None,
        sup_antiderivative=max(math.cos(theta1), math.cos(theta2)) + 1.0,
        family="piecewise_sine",
        params={"theta1": theta1, "theta2": theta2},
        alpha_vec=alpha_vec,
    )


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple[AssumptionCheck, ...]
    notes: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


_VALIDATED: "WeakSet[DriftSpec]" = WeakSet()

_MARTINGALE_NOTE = (
    "the change-of-measure martingale property is not machine-checkable and "
    "remains a user obligation"
)

_DEFAULT_GRID = tuple(float(u) for u in np.linspace(-20.0, 20.0, 4001) if u != 0.0)


def is_validated(d: DriftSpec) -> bool:
    return d in _VALIDATED


def validate_assumptions(d: DriftSpec, grid: list[float] | None = None) -> AssumptionReport:
    """Best-effort falsification of the drift's stated bounds.

    Checks 0 <= phi <= big_m on the grid, continuity of the antiderivative at
    zero, consistency of theta with the stored one-sided limits, and finiteness
    of the tilted endpoint normaliser by truncated-domain quadrature with a
    tail report.  Violations raise :class:`DriftValidationError`; a clean pass
    only means "not falsified".
    """
    pts = list(grid) if grid is not None else list(_DEFAULT_GRID)
    if not pts:
        raise DomainError("validation grid must be nonempty")
    checks: list[AssumptionCheck] = []

    for u in pts:
        if u == 0.0:
            continue
        value = phi(d, u)
        if value < -1e-12 or value > d.big_m + 1e-12:
            raise DriftValidationError(
                f"phi({u}) = {value} outside [0, {d.big_m}]: kappa/big_m bounds are wrong"
            )
    checks.append(AssumptionCheck("phi_bounds", True, f"0 <= phi <= {d.big_m} on {len(pts)} grid points"))

    h = 1e-13
    a0 = d.antiderivative(0.0)
    if abs(a0) > 1e-12:
        raise DriftValidationError(f"antiderivative must vanish at 0, got {a0}")
    for u in (h, -h):
        if abs(d.antiderivative(u)) > 1e-12:
            raise DriftValidationError(
                f"antiderivative discontinuous at 0: A({u}) = {d.antiderivative(u)}"
            )
    checks.append(AssumptionCheck("antiderivative_pinned", True, "A(0) = 0 and A continuous at 0"))

    theta_implied = 0.5 * (d.alpha_plus0 - d.alpha_minus0)
    if abs(theta_implied - d.theta) > 1e-12:
        raise DriftValidationError(
            f"theta = {d.theta} inconsistent with one-sided limits (implies {theta_implied})"
        )
    checks.append(AssumptionCheck("theta_consistent", True, "theta matches one-sided limits"))

    notes = [_MARTINGALE_NOTE]
    tail_note = _check_tilted_normaliser(d, checks)
    if tail_note:
        notes.append(tail_note)

    report = AssumptionReport(checks=tuple(checks), notes=tuple(notes))
    _VALIDATED.add(d)
    return report


def _check_tilted_normaliser(d: DriftSpec, checks: list[AssumptionCheck]) -> str | None:
    """Quadrature of the tilted joint density over nested truncated domains."""
    T = 1.0
    x = 0.0

    def integrand(l: float, b: float) -> float:
        w = l + abs(b) + abs(x)
        return (
            w
            * math.exp(-w * w / (2.0 * T) + d.antiderivative(b) - l * d.theta)
            / (T * math.sqrt(2.0 * math.pi * T))
        )

    def mass(box: float) -> float:
        val, _ = integrate.dblquad(integrand, -box, box, 0.0, box, epsabs=1e-10, epsrel=1e-8)
        return val

    inner = mass(8.0)
    outer = mass(16.0)
    if not (math.isfinite(inner) and math.isfinite(outer)):
        raise DriftValidationError("tilted endpoint normaliser is not finite on a truncated domain")
    growth = (outer - inner) / max(outer, 1e-300)
    if growth > 0.05:
        raise DriftValidationError(
            f"tilted endpoint normaliser still growing between domains ({growth:.3e}); "
            "integrability looks violated"
        )
    if growth > 1e-4:
        checks.append(
            AssumptionCheck(
                "tilted_normaliser_finite",
                True,
                f"mass {outer:.6g}, tail fraction {growth:.2e} (inconclusive, reported)",
            )
        )
        return (
            "integrability check inconclusive: the truncated-domain mass had not settled; "
            f"tail fraction {growth:.2e}"
        )
    checks.append(
        AssumptionCheck(
            "tilted_normaliser_finite",
            True,
            f"mass {outer:.6g}, tail fraction {growth:.2e}",
        )
    )
    return None
