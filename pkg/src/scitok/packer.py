"""Variable-Length Balanced Strategy (VLBS) for packing training batches.

1. Shuffle documents with a seeded RNG and pack them into capacity-bounded
   buckets, recording each bucket's longest document.
2. Tile the bucket list into consecutive windows of ``S`` buckets.
3. Sort each window by max length, ascending.

``simulate_ranks`` replays a plan on ``num_ranks`` data-parallel ranks and
reports how unevenly the per-step work is spread.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from statistics import fmean
from typing import Sequence


class CostModel(str, Enum):
    PADDED_MAX = "padded-max"
    QUADRATIC_ATTENTION = "quad-attn"


class OversizeDocumentError(ValueError):
    def __init__(self, doc_id, length: int, capacity: int):
        super().__init__(f"document {doc_id!r} has length {length} > capacity {capacity}")
        self.doc_id = doc_id
        self._args = (doc_id, length, capacity)

    def __reduce__(self):
        return type(self), self._args


@dataclass(frozen=True)
class Document:
    id: str
    length: int

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"document {self.id!r} has non-positive length {self.length}")


@dataclass(frozen=True)
class Bucket:
    doc_ids: tuple[str, ...]
    lengths: tuple[int, ...]
    capacity: int

    @property
    def used(self) -> int:
        return sum(self.lengths)

    @property
    def max_len(self) -> int:
        return max(self.lengths)

    def cost(self, model: CostModel) -> int:
        if model is CostModel.PADDED_MAX:
            return self.max_len * len(self.lengths)
        return sum(n * n for n in self.lengths)

    def to_dict(self, index: int) -> dict:
        return {"bucket": index, "doc_ids": list(self.doc_ids), "max_len": self.max_len}


@dataclass(frozen=True)
class PackingPlan:
    buckets: tuple[Bucket, ...]
    window: int
    seed: int
    cost_model: CostModel = CostModel.PADDED_MAX


@dataclass(frozen=True)
class BalanceStats:
    mean_imbalance: float
    max_imbalance: float
    step_imbalances: tuple[float, ...]
    rank_totals: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "mean_imbalance": self.mean_imbalance,
            "max_imbalance": self.max_imbalance,
            "steps": len(self.step_imbalances),
            "rank_totals": list(self.rank_totals),
        }


def pack(docs: Sequence[Document], capacity: int, seed: int) -> list[Bucket]:
    """Pack a seeded random permutation of ``docs`` into buckets.

    Each document goes into the currently open bucket if it fits, otherwise
    it opens a new one.
    """
    if not docs:
        raise ValueError("no documents to pack")
    for doc in docs:
        if doc.length > capacity:
            raise OversizeDocumentError(doc.id, doc.length, capacity)
    order = list(docs)
    random.Random(seed).shuffle(order)

    buckets = []
    ids: list[str] = []
    lengths: list[int] = []
    used = 0
    for doc in order:
        if used + doc.length > capacity:
            buckets.append(Bucket(tuple(ids), tuple(lengths), capacity))
            ids, lengths, used = [], [], 0
        ids.append(doc.id)
        lengths.append(doc.length)
        used += doc.length
    buckets.append(Bucket(tuple(ids), tuple(lengths), capacity))
    return buckets


def window_sort(buckets: Sequence[Bucket], window: int) -> list[Bucket]:
    if window < 1:
        raise ValueError("window must be at least 1")
    out: list[Bucket] = []
    for start in range(0, len(buckets), window):
        # sorted() is stable, so ties keep their original order.
        out.extend(sorted(buckets[start : start + window], key=lambda b: b.max_len))
    return out


def build_plan(
    docs: Sequence[Document],
    capacity: int,
    window: int,
    seed: int,
    cost_model: CostModel = CostModel.PADDED_MAX,
    balanced: bool = True,
) -> PackingPlan:
    """Run the full strategy; ``balanced=False`` skips the window sort."""
    buckets = pack(docs, capacity, seed)
    if balanced:
        buckets = window_sort(buckets, window)
    return PackingPlan(tuple(buckets), window, seed, CostModel(cost_model))


def rank_schedule(n_buckets: int, window: int, num_ranks: int) -> list[list[int | None]]:
    """Bucket index per ``[step][rank]``; None marks an idle rank.

    Windows are dealt round-robin to ranks and each rank walks through its
    window one bucket per step, so at step ``t`` every rank holds the same
    position of its own window. With ``window=1`` this is plain striping.
    """
    if num_ranks < 1:
        raise ValueError("num_ranks must be at least 1")
    steps: list[list[int | None]] = []
    n_windows = -(-n_buckets // window)
    for first in range(0, n_windows, num_ranks):
        block = [[None] * num_ranks for _ in range(window)]
        for rank in range(num_ranks):
            w = first + rank
            if w >= n_windows:
                break
            for offset, b in enumerate(range(w * window, min((w + 1) * window, n_buckets))):
                block[offset][rank] = b
        steps.extend(row for row in block if any(b is not None for b in row))
    return steps


def simulate_ranks(plan: PackingPlan, num_ranks: int) -> BalanceStats:
    """Per-step imbalance (max rank cost / mean rank cost) of a plan.

    Idle ranks in a partial trailing step count as zero cost.
    """
    if num_ranks < 1:
        raise ValueError("num_ranks must be at least 1")
    costs = [b.cost(plan.cost_model) for b in plan.buckets]
    totals = [0] * num_ranks
    imbalances = []
    for row in rank_schedule(len(costs), plan.window, num_ranks):
        step = [0 if b is None else costs[b] for b in row]
        for rank, c in enumerate(step):
            totals[rank] += c
        imbalances.append(max(step) / fmean(step))
    return BalanceStats(fmean(imbalances), max(imbalances), tuple(imbalances), tuple(totals))
