"""Online load balancer: embed service requests onto the least-imbalanced server.

The decision is a pure function of (cost, utilization view, capacities): among
servers whose post-assignment utilization stays within capacity, pick the one
minimizing the population standard deviation of the resulting utilization
vector, breaking ties toward the lowest server index. Purity matters: the
inspection replay must reproduce live decisions bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

DEFAULT_CAPACITY = 10 ** 9  # effectively unbounded unless configured


def _spread(view: Sequence[int]) -> int:
    """n^2 * variance of the vector; integer-exact for ordering and ties."""
    n = len(view)
    total = sum(view)
    return n * sum(x * x for x in view) - total * total


def choose_server(cost: int, view: Sequence[int],
                  capacities: Sequence[int] | None = None) -> int | None:
    """Index of the balance-optimal feasible server, or None if none fits."""
    best: int | None = None
    best_spread = 0
    for j, used in enumerate(view):
        cap = capacities[j] if capacities is not None else DEFAULT_CAPACITY
        if used + cost > cap:
            continue
        candidate = list(view)
        candidate[j] += cost
        s = _spread(candidate)
        if best is None or s < best_spread:
            best, best_spread = j, s
    return best


@dataclass(frozen=True)
class Decision:
    """Outcome of one embedding attempt against a local utilization view."""

    request_id: int
    server: int | None  # None = rejected by capacity
    cost: int
    view_after: tuple[int, ...]

    @property
    def rejected(self) -> bool:
        return self.server is None


def embed_decision(request_id: int, cost: int, view: Sequence[int],
                   capacities: Sequence[int] | None = None) -> Decision:
    server = choose_server(cost, view, capacities)
    after = list(view)
    if server is not None:
        after[server] += cost
    return Decision(request_id, server, cost, tuple(after))
