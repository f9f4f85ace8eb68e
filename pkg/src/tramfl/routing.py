"""Next-node selection policies for the traveling model.

The dynamic policy keeps a cumulative ledger of label counts consumed by
training so far and hands the model to whichever node minimizes the ledger's
variance after that node's expected batch usage is added. Static policies
walk a fixed node permutation; random picks a uniform neighbor.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .datasets import LabelHistogram
from .errors import StateError


@dataclass
class RoutingState:
    """Cumulative label-usage ledger, iteration counter, and model holder."""

    cumulative: LabelHistogram
    round: int
    holder: int


@dataclass
class StaticRoute:
    """Fixed cyclic visiting order with a cursor at the current holder."""

    order: tuple[int, ...]
    position: int = 0

    def __post_init__(self):
        self.order = tuple(int(i) for i in self.order)
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError(f"route {self.order} is not a permutation of 0..{len(self.order) - 1}")


@dataclass(frozen=True)
class RoutingConfig:
    """Per-visit training volume: batch size and batches per visit."""

    batch_size: int
    interval: int

    def __post_init__(self):
        if self.batch_size < 1 or self.interval < 1:
            raise ValueError(
                f"batch_size and interval must be >= 1, got {self.batch_size}, {self.interval}"
            )


def dispersion(hist: LabelHistogram) -> float:
    """Population variance of the histogram entries.

    Zero exactly when all entries are equal. Summation is sequential in index
    order so equal-variance ties resolve reproducibly across platforms.
    """
    counts = [float(c) for c in hist.counts]
    if not counts:
        raise ValueError("dispersion of an empty histogram is undefined")
    mean = sum(counts) / len(counts)
    return sum((c - mean) ** 2 for c in counts) / len(counts)


def expected_usage(shard, cfg: RoutingConfig) -> LabelHistogram:
    """Expected per-label counts a full visit at this shard would consume.

    Scales the shard's label histogram by (batch_size * interval) / total,
    i.e. the expected composition of `interval` uniform batches.
    """
    if shard.total <= 0:
        raise ValueError(f"shard {shard.node_id} is empty")
    factor = (cfg.batch_size * cfg.interval) / shard.total
    return LabelHistogram(shard.hist.counts * factor)


def select_next_dynamic(state: RoutingState, shards, cfg: RoutingConfig) -> int:
    """Pick the node whose expected usage leaves the ledger most uniform.

    Every nonempty shard is a candidate, including the current holder; ties
    break to the lowest node index. Raises StateError if all shards are empty.
    """
    best_node = None
    best_var = None
    for shard in sorted(shards, key=lambda s: s.node_id):
        if shard.total <= 0:
            continue
        candidate = LabelHistogram(state.cumulative.counts + expected_usage(shard, cfg).counts)
        var = dispersion(candidate)
        if best_var is None or var < best_var:
            best_node, best_var = shard.node_id, var
    if best_node is None:
        raise StateError("no nonempty shard to route to")
    return best_node


def next_static(route: StaticRoute) -> int:
    """Advance the cursor and return the next node in the cycle."""
    route.position = (route.position + 1) % len(route.order)
    return route.order[route.position]


def next_random(num_nodes: int, holder: int, rng: np.random.Generator) -> int:
    """Uniform draw over all nodes except the holder (full-mesh neighbors)."""
    if num_nodes < 2:
        raise ValueError(f"need at least 2 nodes, got {num_nodes}")
    if not 0 <= holder < num_nodes:
        raise ValueError(f"holder {holder} out of range for {num_nodes} nodes")
    pick = int(rng.integers(num_nodes - 1))
    return pick if pick < holder else pick + 1


def update_ledger(state: RoutingState, batch_counts: LabelHistogram) -> RoutingState:
    """Fold one batch's realized label counts into the ledger."""
    if batch_counts.counts.shape != state.cumulative.counts.shape:
        raise ValueError(
            f"batch counts length {batch_counts.counts.shape[0]} does not match "
            f"ledger length {state.cumulative.counts.shape[0]}"
        )
    return RoutingState(
        cumulative=LabelHistogram(state.cumulative.counts + batch_counts.counts),
        round=state.round + 1,
        holder=state.holder,
    )


def enumerate_static_routes(num_nodes: int) -> list[tuple[int, ...]]:
    """All cyclic routes fixing node 0 first, in lexicographic order."""
    if not 2 <= num_nodes <= 8:
        raise ValueError(f"route enumeration supports 2..8 nodes, got {num_nodes}")
    return [(0,) + p for p in permutations(range(1, num_nodes))]
