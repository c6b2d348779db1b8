"""Independent oracles and statistical machinery for validating the samplers.

Nothing in this module reuses the sampling paths it checks: expected values
come from adaptive quadrature of the closed-form densities, from the running-
maximum representation of the reflected pair, or from the Euler-Maruyama
scheme.  The registered checks keep their statistical thresholds conservative
(roughly the 0.1% level each) so that a full run has a family-wise false
failure probability well under 1% with the pinned seed.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy import integrate, stats

from .bridges import (
    BridgeQuery,
    EndpointPair,
    compute_case_weights,
    nu1_density,
    prob_local_time_constant,
    sample_B_conditional_zero_increment,
    sample_bridge_point,
    sample_L_given_endpoints,
    sample_xi1,
    sample_xi2,
    sample_xi3,
    xi1_density,
    xi2_density,
    xi3_density,
)
from .distributions import (
    atom_density_fstar,
    joint_density_f,
    LocalTimeDensityQuery,
    normal_cdf,
    sample_truncated_normal,
    sample_truncated_rayleigh,
)
from .drift import DriftSpec, make_piecewise_constant
from .endpoint import (
    EndpointLaw,
    build_endpoint_law,
    build_mixture,
    sample_endpoint_theta_negative,
    sample_endpoint_theta_positive,
)
from .errors import DomainError, QuadratureError
from .rng import RngStream

DEFAULT_SEED = 20250809


# -- generic data containers -------------------------------------------------


@dataclass(frozen=True)
class DensityGrid:
    """Density values tabulated on a uniform grid (one axis per dimension)."""

    axes: tuple[np.ndarray, ...]
    values: np.ndarray
    total_mass: float

    def __post_init__(self) -> None:
        mass = self.values
        for ax in reversed(self.axes):
            mass = np.trapezoid(mass, ax, axis=-1)
        if abs(float(mass) - self.total_mass) > 1e-9:
            raise DomainError("stored total mass inconsistent with trapezoid integration")


@dataclass(frozen=True)
class QuadratureCDF:
    """A cdf tabulated by per-interval adaptive quadrature.

    Evaluation uses monotone cubic interpolation between the knots, which
    keeps the tabulation error below 1e-8 for smooth densities at the
    default grid size.
    """

    knots: np.ndarray
    cdf_values: np.ndarray
    total_mass: float
    err_bound: float

    def __call__(self, x):
        from scipy.interpolate import PchipInterpolator

        interp = getattr(self, "_interp", None)
        if interp is None:
            interp = PchipInterpolator(self.knots, self.cdf_values)
            object.__setattr__(self, "_interp", interp)
        return np.clip(interp(np.clip(x, self.knots[0], self.knots[-1])), 0.0, 1.0)


# -- oracles ------------------------------------------------------------------


def euler_maruyama(
    d: DriftSpec, x: float, T: float, dt: float, n: int, rng: RngStream
) -> np.ndarray:
    """Terminal values of the explicit Euler scheme; biased for dt > 0."""
    if dt <= 0.0:
        raise DomainError(f"step size must be positive, got {dt}")
    steps = round(T / dt)
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(T, 1.0):
        raise DomainError(f"step {dt} does not divide horizon {T}")
    gen = rng.generator
    alpha = d.alpha_vec if d.alpha_vec is not None else np.vectorize(d.alpha)
    X = np.full(n, float(x))
    sq = math.sqrt(dt)
    for _ in range(steps):
        X = X + alpha(X) * dt + sq * gen.standard_normal(n)
    return X


def quadrature_cdf(
    density: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    tol: float = 1e-9,
    n_grid: int = 2049,
) -> QuadratureCDF:
    """Tabulate the cdf of an integrable density on [lo, hi] by quadrature.

    The aggregate quadrature error estimate must stay below ``tol`` or the
    refinement is considered non-convergent.
    """
    knots = np.linspace(lo, hi, n_grid)
    masses = np.empty(n_grid - 1)
    err = 0.0
    for i in range(n_grid - 1):
        v, e = integrate.quad(density, knots[i], knots[i + 1], limit=200)
        masses[i] = v
        err += abs(e)
    total = float(masses.sum())
    if total <= 0.0:
        raise QuadratureError("density integrated to zero mass")
    if err > tol * max(1.0, total):
        raise QuadratureError(f"requested tolerance {tol}, achieved only {err:.3e}")
    cdf = np.concatenate([[0.0], np.cumsum(masses)]) / total
    return QuadratureCDF(knots=knots, cdf_values=cdf, total_mass=total, err_bound=err)


def levy_identity_oracle(T: float, n: int, rng: RngStream, *, steps: int = 8) -> np.ndarray:
    """n exact draws of (|B_T|, L_T) for a start at zero.

    Uses the running-maximum representation: simulate the driving motion on a
    grid, draw each between-grid maximum from its exact bridge law, and map
    (max - endpoint, max) to the reflected pair.  Exact for any grid size.
    """
    gen = rng.generator
    dt = T / steps
    W = np.zeros(n)
    M = np.zeros(n)
    for _ in range(steps):
        W_next = W + math.sqrt(dt) * gen.standard_normal(n)
        u = 1.0 - gen.random(n)  # in (0, 1]
        seg_max = 0.5 * (W + W_next + np.sqrt((W - W_next) ** 2 - 2.0 * dt * np.log(u)))
        M = np.maximum(M, seg_max)
        W = W_next
    return np.column_stack([M - W, M])


def kde(
    samples: Iterable[float],
    bandwidth: float | str = "silverman",
    *,
    grid: np.ndarray | None = None,
    n_grid: int = 512,
) -> DensityGrid:
    """Gaussian-kernel density estimate on a uniform grid.

    The default grid spans the sample range plus three bandwidths; the
    default bandwidth is Silverman's rule 0.9 min(sd, iqr/1.34) n^(-1/5).
    """
    arr = np.asarray(list(samples), dtype=float)
    if arr.size < 2:
        raise DomainError("kde needs at least two samples")
    if bandwidth == "silverman":
        sd = float(np.std(arr))
        q75, q25 = np.percentile(arr, [75.0, 25.0])
        spread = min(sd, (q75 - q25) / 1.34) or sd or 1.0
        h = 0.9 * spread * arr.size ** (-0.2)
    else:
        h = float(bandwidth)
        if h <= 0.0:
            raise DomainError(f"bandwidth must be positive, got {h}")
    if grid is None:
        grid = np.linspace(arr.min() - 3.0 * h, arr.max() + 3.0 * h, n_grid)
    vals = np.empty(grid.size)
    norm = 1.0 / (arr.size * h * math.sqrt(2.0 * math.pi))
    block = 64
    for i in range(0, grid.size, block):
        g = grid[i : i + block, None]
        z = (g - arr[None, :]) / h
        vals[i : i + block] = norm * np.exp(-0.5 * z * z).sum(axis=1)
    total = float(np.trapezoid(vals, grid))
    return DensityGrid(axes=(grid,), values=vals, total_mass=total)


def ks_two_sample(a: Iterable[float], b: Iterable[float]) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.asarray(list(a), dtype=float)
    b = np.asarray(list(b), dtype=float)
    if a.size == 0 or b.size == 0:
        raise DomainError("both samples must be nonempty")
    res = stats.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue)


def ks_one_sample(samples: Iterable[float], cdf: Callable) -> tuple[float, float]:
    """One-sample KS statistic and p-value against a vectorised cdf."""
    arr = np.asarray(list(samples), dtype=float)
    res = stats.kstest(arr, cdf)
    return float(res.statistic), float(res.pvalue)


def ks_critical(n: int, alpha: float = 0.001) -> float:
    """Asymptotic one-sample KS critical value at level alpha."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) / math.sqrt(n)


def chi2_from_cells(observed: np.ndarray, expected: np.ndarray, min_expected: float = 5.0):
    """Chi-square test merging low-expectation cells into one remainder."""
    obs = np.asarray(observed, dtype=float).ravel()
    exp = np.asarray(expected, dtype=float).ravel()
    keep = exp >= min_expected
    obs_kept = obs[keep]
    exp_kept = exp[keep]
    rest_obs = obs[~keep].sum()
    rest_exp = exp[~keep].sum()
    if rest_exp > 0.0:
        obs_kept = np.append(obs_kept, rest_obs)
        exp_kept = np.append(exp_kept, rest_exp)
    exp_kept *= obs_kept.sum() / exp_kept.sum()
    res = stats.chisquare(obs_kept, exp_kept)
    return float(res.statistic), float(res.pvalue)


# -- endpoint-law quadrature helpers ------------------------------------------


def endpoint_box(law: EndpointLaw) -> tuple[float, float]:
    """A (B, L) box holding all but a negligible sliver of the tilted mass."""
    T, x = law.T, law.x
    sqT = math.sqrt(T)
    drift_scale = 0.0
    if law.drift.linear_coeffs is not None:
        drift_scale = max(abs(a) for a in law.drift.linear_coeffs) * T
    B = abs(x) + drift_scale + 12.0 * sqT
    L = abs(x) + 12.0 * sqT + 4.0 * abs(min(law.drift.theta, 0.0)) * T
    return B, L


def endpoint_total_mass(law: EndpointLaw, *, box_scale: float = 1.0, epsabs: float = 1e-10):
    """Quadrature of the unnormalised tilted law: joint mass, atom mass."""
    B, L = endpoint_box(law)
    B *= box_scale
    L *= box_scale

    def joint(l: float, b: float) -> float:
        v = law.log_gtilde(b, l)
        return math.exp(v) if v > -700.0 else 0.0

    joint_mass, _ = integrate.dblquad(joint, -B, B, 1e-12, L, epsabs=epsabs, epsrel=1e-9)
    if law.x == 0.0:
        atom_mass = 0.0
    else:
        lo, hi = (0.0, B) if law.x > 0.0 else (-B, 0.0)
        atom_mass, _ = integrate.quad(
            lambda b: math.exp(law.log_gstar_tilde(b)), lo, hi, limit=200
        )
    return float(joint_mass), float(atom_mass)


def endpoint_cell_masses(
    law: EndpointLaw, b_edges: np.ndarray, l_edges: np.ndarray
) -> np.ndarray:
    """Quadrature masses of the tilted joint density over a cell grid."""

    def joint(l: float, b: float) -> float:
        v = law.log_gtilde(b, l)
        return math.exp(v) if v > -700.0 else 0.0

    nb, nl = len(b_edges) - 1, len(l_edges) - 1
    cells = np.empty((nb, nl))
    for i in range(nb):
        for j in range(nl):
            cells[i, j], _ = integrate.dblquad(
                joint,
                b_edges[i],
                b_edges[i + 1],
                l_edges[j],
                l_edges[j + 1],
                epsabs=1e-10,
                epsrel=1e-8,
            )
    return cells


def xi2_cell_masses(q: BridgeQuery, b_edges: np.ndarray, l_edges: np.ndarray) -> np.ndarray:
    """Quadrature masses of the straddling-case joint density over cells."""
    nb, nl = len(b_edges) - 1, len(l_edges) - 1
    cells = np.empty((nb, nl))
    for i in range(nb):
        for j in range(nl):
            cells[i, j], _ = integrate.dblquad(
                lambda l, b: xi2_density(b, l, q),
                b_edges[i],
                b_edges[i + 1],
                l_edges[j],
                l_edges[j + 1],
                epsabs=1e-11,
                epsrel=1e-8,
            )
    return cells


def xi2_marginal_b_cdf(q: BridgeQuery, lo: float, hi: float, n_grid: int = 257) -> QuadratureCDF:
    """cdf of the value marginal of the straddling case, by nested quadrature."""

    def marginal(b: float) -> float:
        v, _ = integrate.quad(lambda l: xi2_density(b, l, q), q.l1, q.l3, limit=100)
        return v

    return quadrature_cdf(marginal, lo, hi, tol=1e-6, n_grid=n_grid)


def bridge_value_marginal_cdf(
    q: BridgeQuery, lo: float, hi: float, n_grid: int = 257
) -> QuadratureCDF:
    """cdf of the interior-value marginal of the two-sided bridge (l1 < l3)."""

    def marginal(b: float) -> float:
        v, _ = integrate.quad(lambda l: xi2_density(b, l, q), q.l1, q.l3, limit=100)
        return v + xi1_density(b, q) + xi3_density(b, q)

    return quadrature_cdf(marginal, lo, hi, tol=1e-6, n_grid=n_grid)


# -- check registry -----------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    statistic: float
    threshold: float
    passed: bool
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "test": self.name,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "pass": self.passed,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class OracleCheck:
    name: str
    covers: frozenset[str]
    fn: Callable[[int], CheckResult] = field(repr=False)


REGISTRY: list[OracleCheck] = []

# samplers whose law is nontrivial enough to demand an independent oracle
REQUIRED_ORACLE_COVERAGE = frozenset(
    {
        "sample_L_given_endpoints",
        "sample_B_conditional_zero_increment",
        "sample_xi1",
        "sample_xi3",
        "sample_xi2",
        "sample_bridge_point",
        "interpolate_skeleton",
        "sample_XT_from_h",
        "sample_endpoint_theta_positive",
        "sample_endpoint_theta_negative",
    }
)


def _register(name: str, covers: set[str]):
    def deco(fn):
        REGISTRY.append(OracleCheck(name=name, covers=frozenset(covers), fn=fn))
        return fn

    return deco


def assert_registry_complete() -> None:
    covered = set().union(*(c.covers for c in REGISTRY))
    missing = REQUIRED_ORACLE_COVERAGE - covered
    if missing:
        raise AssertionError(f"samplers without a registered oracle: {sorted(missing)}")


def run_checks(name_filter: str = "", seed: int = DEFAULT_SEED) -> list[CheckResult]:
    assert_registry_complete()
    results = []
    for check in REGISTRY:
        if name_filter and name_filter not in check.name:
            continue
        results.append(check.fn(seed))
    return results


def _stream(seed: int, label: str) -> RngStream:
    return RngStream(seed, zlib.crc32(label.encode()) & 0x7FFFFFFF)


_N_CHECK = 20_000


@_register("dist.truncated_rayleigh.ks", {"sample_truncated_rayleigh"})
def _check_rayleigh(seed: int) -> CheckResult:
    rng = _stream(seed, "rayleigh")
    draws = np.array([sample_truncated_rayleigh(1.0, 0.0, rng) for _ in range(_N_CHECK)])
    stat, _ = ks_one_sample(draws, lambda y: -np.expm1(-0.5 * np.square(y)))
    thr = ks_critical(_N_CHECK)
    return CheckResult("dist.truncated_rayleigh.ks", stat, thr, stat < thr)


@_register("dist.truncated_normal.ks", {"sample_truncated_normal"})
def _check_truncnorm(seed: int) -> CheckResult:
    rng = _stream(seed, "truncnorm")
    lower = 0.7
    draws = np.array(
        [sample_truncated_normal(0.0, 1.0, lower, rng) for _ in range(_N_CHECK)]
    )
    p_lo = normal_cdf(lower, 0.0, 1.0)

    def cdf(z):
        z = np.asarray(z, dtype=float)
        vals = np.array([normal_cdf(v, 0.0, 1.0) for v in np.atleast_1d(z)])
        return (vals - p_lo) / (1.0 - p_lo)

    stat, _ = ks_one_sample(draws, cdf)
    thr = ks_critical(_N_CHECK)
    ok = stat < thr and bool(np.all(draws > lower))
    return CheckResult("dist.truncated_normal.ks", stat, thr, ok)


@_register("dist.f_fstar.normalisation", {"joint_density_f", "atom_density_fstar"})
def _check_f_normalisation(seed: int) -> CheckResult:
    worst = 0.0
    for x, s in [(1.0, 1.0), (0.0, 1.0), (0.5, 2.0), (-1.0, 0.5), (2.0, 1.0)]:
        B = abs(x) + 10.0 * math.sqrt(s)
        L = abs(x) + 12.0 * math.sqrt(s)
        joint, _ = integrate.dblquad(
            lambda l, b: joint_density_f(LocalTimeDensityQuery(x, s, b, l)),
            -B,
            B,
            1e-12,
            L,
            epsabs=1e-10,
            epsrel=1e-9,
        )
        if x == 0.0:
            atom = 0.0
        else:
            lo, hi = (0.0, B) if x > 0.0 else (-B, 0.0)
            atom, _ = integrate.quad(lambda b: atom_density_fstar(x, s, b), lo, hi, limit=200)
        worst = max(worst, abs(joint + atom - 1.0))
    return CheckResult("dist.f_fstar.normalisation", worst, 1e-6, worst < 1e-6)


@_register("bridge.L_given_endpoints.ks", {"sample_L_given_endpoints"})
def _check_l_given_endpoints(seed: int) -> CheckResult:
    rng = _stream(seed, "l-endpoints")
    e = EndpointPair(0.0, 1.3, 0.8, -0.6, 0.4)
    draws = np.array([sample_L_given_endpoints(e, rng) for _ in range(_N_CHECK)])
    dt = e.s2 - e.s1

    def density(l2: float) -> float:
        return joint_density_f(LocalTimeDensityQuery(e.b1, dt, e.b2, l2 - e.l1))

    oracle = quadrature_cdf(density, e.l1 + 1e-12, e.l1 + 12.0 * math.sqrt(dt), tol=1e-8)
    stat, _ = ks_one_sample(draws, oracle)
    thr = ks_critical(_N_CHECK)
    return CheckResult("bridge.L_given_endpoints.ks", stat, thr, stat < thr)


@_register("bridge.L_given_endpoints.atom", {"sample_L_given_endpoints"})
def _check_l_atom(seed: int) -> CheckResult:
    rng = _stream(seed, "l-atom")
    e = EndpointPair(0.0, 1.0, 0.9, 1.1, 0.2)
    p = prob_local_time_constant(e)
    n = _N_CHECK
    hits = sum(sample_L_given_endpoints(e, rng) == e.l1 for _ in range(n))
    se = math.sqrt(p * (1.0 - p) / n)
    dev = abs(hits / n - p)
    return CheckResult("bridge.L_given_endpoints.atom", dev, 4.0 * se, dev < 4.0 * se)


@_register("bridge.B_zero_increment.ks", {"sample_B_conditional_zero_increment"})
def _check_zero_increment(seed: int) -> CheckResult:
    rng = _stream(seed, "zero-increment")
    q = BridgeQuery(0.0, 0.7, 1.8, 0.9, 1.4, 0.5, 0.5)
    draws = np.array(
        [sample_B_conditional_zero_increment(q, rng) for _ in range(_N_CHECK)]
    )
    oracle = quadrature_cdf(lambda b: nu1_density(b, q), 1e-12, 9.0, tol=1e-8)
    stat, _ = ks_one_sample(draws, oracle)
    thr = ks_critical(_N_CHECK)
    return CheckResult("bridge.B_zero_increment.ks", stat, thr, stat < thr)


_CASE_WEIGHT_QUERIES = [
    BridgeQuery(0.0, 1.0, 2.0, 1.0, 1.0, 0.0, 0.5),
    BridgeQuery(0.0, 0.3, 1.0, -1.2, 0.4, 0.2, 1.3),
    BridgeQuery(0.5, 2.5, 3.0, 0.6, -0.8, 0.1, 0.35),
]


@_register("bridge.case_weights.quadrature", {"compute_case_weights"})
def _check_case_weights(seed: int) -> CheckResult:
    worst = 0.0
    for q in _CASE_WEIGHT_QUERIES:
        cw = compute_case_weights(q)
        hi = abs(q.b1) + abs(q.b3) + (q.l3 - q.l1) + 10.0 * math.sqrt(q.s3 - q.s1)
        p1q, _ = integrate.quad(lambda b: xi1_density(b, q), -hi, hi, limit=300)
        p3q, _ = integrate.quad(lambda b: xi3_density(b, q), -hi, hi, limit=300)
        worst = max(worst, abs(cw.p1 - p1q), abs(cw.p3 - p3q), abs(cw.p1 + cw.p2 + cw.p3 - 1.0))
    return CheckResult("bridge.case_weights.quadrature", worst, 1e-6, worst < 1e-6)


@_register("bridge.xi1.ks", {"sample_xi1"})
def _check_xi1(seed: int) -> CheckResult:
    rng = _stream(seed, "xi1")
    q = _CASE_WEIGHT_QUERIES[0]
    draws = np.array([sample_xi1(q, rng) for _ in range(_N_CHECK)])
    hi = abs(q.b1) + 10.0 * math.sqrt(q.s3 - q.s1)
    oracle = quadrature_cdf(lambda b: xi1_density(b, q), 1e-12, hi, tol=1e-8)
    stat, _ = ks_one_sample(draws, oracle)
    thr = ks_critical(_N_CHECK)
    return CheckResult("bridge.xi1.ks", stat, thr, stat < thr)


@_register("bridge.xi3.ks", {"sample_xi3"})
def _check_xi3(seed: int) -> CheckResult:
    rng = _stream(seed, "xi3")
    q = _CASE_WEIGHT_QUERIES[1]
    draws = np.array([sample_xi3(q, rng) for _ in range(_N_CHECK)])
    hi = abs(q.b3) + 10.0 * math.sqrt(q.s3 - q.s1)
    oracle = quadrature_cdf(lambda b: xi3_density(b, q), 1e-12, hi, tol=1e-8)
    stat, _ = ks_one_sample(draws, oracle)
    thr = ks_critical(_N_CHECK)
    return CheckResult("bridge.xi3.ks", stat, thr, stat < thr)


@_register("bridge.xi2.chi2", {"sample_xi2"})
def _check_xi2(seed: int) -> CheckResult:
    rng = _stream(seed, "xi2")
    q = BridgeQuery(0.0, 0.8, 2.0, 0.7, -0.5, 0.1, 1.4)
    n = _N_CHECK
    draws = np.array([sample_xi2(q, rng) for _ in range(n)])
    spread = abs(q.b1) + abs(q.b3) + 3.5 * math.sqrt(q.s3 - q.s1)
    b_edges = np.linspace(-spread, spread, 9)
    l_edges = np.linspace(q.l1, q.l3, 9)
    cells = xi2_cell_masses(q, b_edges, l_edges)
    total, _ = integrate.dblquad(
        lambda l, b: xi2_density(b, l, q), -spread - 8.0, spread + 8.0, q.l1, q.l3,
        epsabs=1e-11, epsrel=1e-8,
    )
    obs, _, _ = np.histogram2d(draws[:, 0], draws[:, 1], bins=[b_edges, l_edges])
    obs_rest = n - obs.sum()
    exp = cells / total * n
    exp_rest = max(n - exp.sum(), 0.0)
    stat, p = chi2_from_cells(
        np.append(obs.ravel(), obs_rest), np.append(exp.ravel(), exp_rest)
    )
    return CheckResult("bridge.xi2.chi2", p, 1e-3, p > 1e-3, detail=f"chi2={stat:.1f}")


@_register("bridge.bridge_point.marginal_ks", {"sample_bridge_point", "interpolate_skeleton"})
def _check_bridge_point(seed: int) -> CheckResult:
    rng = _stream(seed, "bridge-point")
    q = BridgeQuery(0.0, 1.0, 2.0, 0.4, -0.9, 0.0, 0.8)
    draws = np.array([sample_bridge_point(q, rng)[0] for _ in range(_N_CHECK)])
    spread = abs(q.b1) + abs(q.b3) + (q.l3 - q.l1) + 8.0 * math.sqrt(q.s3 - q.s1)
    oracle = bridge_value_marginal_cdf(q, -spread, spread)
    stat, _ = ks_one_sample(draws, oracle)
    thr = ks_critical(_N_CHECK)
    return CheckResult("bridge.bridge_point.marginal_ks", stat, thr, stat < thr)


def _endpoint_chi2(law: EndpointLaw, draws: np.ndarray, n_cells: int = 8) -> tuple[float, float]:
    """Joint chi-square of endpoint draws against quadrature, atom included."""
    B, L = endpoint_box(law)
    # concentrate the grid on the bulk; remainder mass is its own category
    b_core = min(B, abs(law.x) + 4.0)
    l_core = min(L, 4.0)
    b_edges = np.linspace(-b_core, b_core, n_cells + 1)
    l_edges = np.linspace(1e-9, l_core, n_cells + 1)
    cells = endpoint_cell_masses(law, b_edges, l_edges)
    joint_mass, atom_mass = endpoint_total_mass(law)
    total = joint_mass + atom_mass
    n = len(draws)
    b, l = draws[:, 0], draws[:, 1]
    is_atom = l == 0.0
    obs, _, _ = np.histogram2d(b[~is_atom], l[~is_atom], bins=[b_edges, l_edges])
    obs_flat = np.append(obs.ravel(), [is_atom.sum(), n - obs.sum() - is_atom.sum()])
    exp_flat = np.append(
        cells.ravel() / total * n,
        [atom_mass / total * n, max(n - cells.sum() / total * n - atom_mass / total * n, 0.0)],
    )
    return chi2_from_cells(obs_flat, exp_flat)


@_register(
    "endpoint.two_step.chi2",
    {"sample_endpoint_theta_positive", "sample_XT_from_h", "sample_L_given_endpoints"},
)
def _check_endpoint_two_step(seed: int) -> CheckResult:
    rng = _stream(seed, "endpoint-two-step")
    law = build_endpoint_law(make_piecewise_constant(0.2, -0.9), 0.5, 1.0)
    draws = np.array([sample_endpoint_theta_positive(law, rng) for _ in range(_N_CHECK)])
    stat, p = _endpoint_chi2(law, draws)
    return CheckResult("endpoint.two_step.chi2", p, 1e-3, p > 1e-3, detail=f"chi2={stat:.1f}")


@_register("endpoint.mixture.chi2", {"sample_endpoint_theta_negative", "build_mixture"})
def _check_endpoint_mixture(seed: int) -> CheckResult:
    rng = _stream(seed, "endpoint-mixture")
    law = build_endpoint_law(make_piecewise_constant(0.3, 0.9), 0.5, 1.0)
    build_mixture(law)
    draws = np.array([sample_endpoint_theta_negative(law, rng) for _ in range(_N_CHECK)])
    stat, p = _endpoint_chi2(law, draws)
    return CheckResult("endpoint.mixture.chi2", p, 1e-3, p > 1e-3, detail=f"chi2={stat:.1f}")


@_register("endpoint.normalisation.finite", {"build_mixture"})
def _check_endpoint_normalisation(seed: int) -> CheckResult:
    from .drift import make_piecewise_sine

    worst = 0.0
    for d in (make_piecewise_constant(0.2, -0.9), make_piecewise_sine(7 * math.pi / 6, math.pi / 4)):
        for x in (0.0, 0.5):
            for T in (0.5, 1.0):
                law = build_endpoint_law(d, x, T)
                j1, a1 = endpoint_total_mass(law)
                j2, a2 = endpoint_total_mass(law, box_scale=1.3)
                m1, m2 = j1 + a1, j2 + a2
                if not (math.isfinite(m1) and math.isfinite(m2)):
                    return CheckResult("endpoint.normalisation.finite", math.inf, 1e-6, False)
                worst = max(worst, abs(m2 - m1) / m2)
    return CheckResult("endpoint.normalisation.finite", worst, 1e-6, worst < 1e-6)


@_register(
    "algorithm.brownian.ks", {"simulate_skeleton", "thinning_accept", "sample_paths"}
)
def _check_algorithm_brownian(seed: int) -> CheckResult:
    from .algorithm import sample_paths

    d = make_piecewise_constant(0.0, 0.0)
    n = 4000
    skels = sample_paths(d, 0.0, 1.0, [0.5], n, seed ^ 0x5EED)
    worst_stat = 0.0
    for t in (0.5, 1.0):
        vals = [s.value_at(t) for s in skels]
        stat, _ = ks_one_sample(vals, lambda z, t=t: np.vectorize(normal_cdf)(z, 0.0, t))
        worst_stat = max(worst_stat, stat)
    thr = ks_critical(n)
    return CheckResult("algorithm.brownian.ks", worst_stat, thr, worst_stat < thr)


@_register("algorithm.linear_drift.ks", {"simulate_skeleton"})
def _check_algorithm_linear(seed: int) -> CheckResult:
    from .algorithm import sample_paths

    a = 0.8
    d = make_piecewise_constant(a, a)
    n = 4000
    skels = sample_paths(d, -0.3, 1.0, [], n, seed ^ 0xA11CE)
    vals = [s.terminal.x for s in skels]
    stat, _ = ks_one_sample(vals, lambda z: np.vectorize(normal_cdf)(z, -0.3 + a, 1.0))
    thr = ks_critical(n)
    return CheckResult("algorithm.linear_drift.ks", stat, thr, stat < thr)
