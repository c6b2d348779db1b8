"""Lightweight runtime counters for rejection-loop instrumentation.

Counters are best-effort under free threading (increments may race) and are
meant for tests and performance reports, never for control flow.
"""

from collections import defaultdict

from .errors import EnvelopeViolationError

_counters: dict[str, int] = defaultdict(int)

_PROB_SLACK = 1e-12


def bump(name: str, amount: int = 1) -> None:
    _counters[name] += amount


def snapshot() -> dict[str, int]:
    return dict(_counters)


def reset() -> None:
    _counters.clear()


def checked_prob(p: float, context: str) -> float:
    """Assert an acceptance ratio lies in [0, 1] and account for it.

    Tolerates rounding up to 1e-12 and clamps it away; anything larger is a
    broken envelope and raises.
    """
    if not p >= -_PROB_SLACK or p > 1.0 + _PROB_SLACK:
        raise EnvelopeViolationError(f"acceptance ratio {p} outside [0, 1] in {context}")
    bump("acceptance_ratio_checks")
    if p < 0.0:
        return 0.0
    if p > 1.0:
        return 1.0
    return p
