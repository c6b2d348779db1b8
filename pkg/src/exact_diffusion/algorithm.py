"""Top-level exact skeleton simulation by retrospective rejection.

One round proposes a full finite-dimensional candidate: an endpoint pair from
the tilted law, an auxiliary Poisson process whose rate is the thinning bound
of the drift, and bridge fills at the Poisson times.  The candidate is
accepted when the running cost at every Poisson time falls below its uniform
mark; rejection discards the entire round, so no proposal state ever leaks
between rounds.  Accepted skeletons are exact draws of the diffusion and its
local time at every reported time, with no discretisation bias.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from weakref import WeakKeyDictionary

from .bridges import BridgeQuery, interpolate_skeleton, sample_bridge_point
from .distributions import sample_poisson_times
from .drift import DriftSpec, SkeletonPoint, is_validated, phi, validate_assumptions
from .endpoint import EndpointLaw, build_endpoint_law, sample_endpoint
from .errors import DomainError, RoundLimitError
from .rng import RngStream

DEFAULT_ROUND_LIMIT = 1_000_000

# endpoint laws are immutable once their mixture is built, so they are shared
# across repeated calls; rebuilding one re-runs the envelope grid check,
# which costs far more than a whole skeleton draw
_LAW_CACHE: "WeakKeyDictionary[DriftSpec, dict[tuple[float, float], EndpointLaw]]" = (
    WeakKeyDictionary()
)


def _cached_law(d: DriftSpec, x: float, T: float) -> EndpointLaw:
    per_drift = _LAW_CACHE.setdefault(d, {})
    key = (x, T)
    law = per_drift.get(key)
    if law is None:
        law = build_endpoint_law(d, x, T)
        per_drift[key] = law
    return law


@dataclass(frozen=True)
class Skeleton:
    """An accepted skeleton plus acceptance metadata.

    ``points`` always starts at (0, x, 0), ends at the horizon, and contains
    every requested time and every Poisson time of the accepted round.
    ``poisson_counts`` records the event count of each proposal round,
    rejected rounds included.
    """

    points: tuple[SkeletonPoint, ...]
    rounds: int
    poisson_counts: tuple[int, ...]

    def __post_init__(self) -> None:
        for a, b in zip(self.points, self.points[1:]):
            if not b.t > a.t:
                raise DomainError("skeleton times must be strictly increasing")
            if b.l < a.l:
                raise DomainError("local time must be nondecreasing along the skeleton")

    @property
    def terminal(self) -> SkeletonPoint:
        return self.points[-1]

    def value_at(self, t: float) -> float:
        for p in self.points:
            if p.t == t:
                return p.x
        raise KeyError(f"time {t} not in skeleton")


def thinning_accept(d: DriftSpec, values_at_poisson_times: list[float], psis: list[float]) -> bool:
    """True when the running cost clears every uniform mark; empty lists accept."""
    if len(values_at_poisson_times) != len(psis):
        raise DomainError("values and marks must have equal length")
    return all(phi(d, v) < psi for v, psi in zip(values_at_poisson_times, psis))


def simulate_skeleton(
    d: DriftSpec,
    x: float,
    T: float,
    times: list[float],
    rng: RngStream,
    *,
    round_limit: int = DEFAULT_ROUND_LIMIT,
    law: EndpointLaw | None = None,
) -> Skeleton:
    """One exact draw of the diffusion skeleton on [0, T] started at x.

    ``times`` are the requested interior report times, sorted and strictly
    inside (0, T).  A zero thinning bound (continuous drift with flat running
    cost) degenerates to an always-accept round, which is allowed.
    """
    if T <= 0.0:
        raise DomainError(f"horizon must be positive, got {T}")
    times = [float(t) for t in times]
    if any(not 0.0 < t < T for t in times):
        raise DomainError("requested times must lie strictly inside (0, T)")
    if sorted(times) != times:
        raise DomainError("requested times must be sorted")
    if not is_validated(d):
        validate_assumptions(d)
    if law is None:
        law = _cached_law(d, x, T)
    big_m = d.big_m

    poisson_counts: list[int] = []
    for round_index in range(round_limit):
        b_T, l_T = sample_endpoint(law, rng)
        taus = sample_poisson_times(big_m, T, rng) if big_m > 0.0 else []
        psis = [rng.uniform() * big_m for _ in taus]
        poisson_counts.append(len(taus))

        # fill left to right against the fixed terminal point; the pair
        # (value, local time) is Markov, so conditioning on the nearest
        # known left neighbour and the endpoint is exact
        left = SkeletonPoint(0.0, x, 0.0)
        terminal = SkeletonPoint(T, b_T, l_T)
        tau_points: list[SkeletonPoint] = []
        for tau in taus:
            q = BridgeQuery(left.t, tau, T, left.x, b_T, left.l, l_T)
            b_tau, l_tau = sample_bridge_point(q, rng)
            left = SkeletonPoint(tau, b_tau, l_tau)
            tau_points.append(left)

        if not thinning_accept(d, [p.x for p in tau_points], psis):
            continue

        known = [SkeletonPoint(0.0, x, 0.0), *tau_points, terminal]
        filled = interpolate_skeleton(known, times, rng)
        return Skeleton(
            points=tuple(filled),
            rounds=round_index + 1,
            poisson_counts=tuple(poisson_counts),
        )
    raise RoundLimitError(
        f"no acceptance in {round_limit} rounds; empirical acceptance below "
        f"{1.0 / max(round_limit, 1):.1e}, the drift bounds are probably mis-specified"
    )


def sample_paths(
    d: DriftSpec,
    x: float,
    T: float,
    times: list[float],
    n: int,
    base_seed: int,
    *,
    threads: int = 1,
    round_limit: int = DEFAULT_ROUND_LIMIT,
) -> list[Skeleton]:
    """n independent skeletons, reproducible regardless of thread count.

    Path i draws from the stream (base_seed, i), so the output is a pure
    function of the seed; threads only split the index range.
    """
    if n < 1:
        raise DomainError(f"need at least one path, got {n}")
    if not is_validated(d):
        validate_assumptions(d)
    law = _cached_law(d, x, T)
    if d.theta < 0.0:
        from .endpoint import build_mixture

        build_mixture(law)

    def one(i: int) -> Skeleton:
        return simulate_skeleton(
            d, x, T, times, RngStream(base_seed, i), round_limit=round_limit, law=law
        )

    if threads <= 1:
        return [one(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(n)))
