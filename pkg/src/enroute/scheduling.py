"""Transmission schedules and causal broadcast neighbourhoods."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .topology import Network

__all__ = [
    "Schedule",
    "CausalSets",
    "assign_schedule",
    "derive_causal_sets",
    "prune_for_decodability",
    "causal_sets_for",
    "check_causal_sets",
    "schedule_to_json",
    "schedule_from_json",
    "causal_sets_to_json",
]


@dataclass(frozen=True, eq=False)
class Schedule:
    """``slot[n]`` is the 1-based time slot in which node ``n`` transmits."""

    slot: np.ndarray

    def __post_init__(self):
        slot = np.asarray(self.slot, dtype=int)
        object.__setattr__(self, "slot", slot)
        if sorted(slot.tolist()) != list(range(1, len(slot) + 1)):
            raise ValidationError("slots must be a permutation of 1..N")
        object.__setattr__(self, "order", tuple(int(v) for v in np.argsort(slot, kind="stable")))

    def __getitem__(self, n: int) -> int:
        return int(self.slot[n])

    def __len__(self) -> int:
        return len(self.slot)

    def check_causal(self, network: Network) -> None:
        for v in range(network.n):
            p = int(network.parent[v])
            if p != network.sink and self.slot[v] >= self.slot[p]:
                raise ValidationError(f"node {v} transmits after its parent {p}")


def assign_schedule(network: Network, order: Sequence[int] | None = None) -> Schedule:
    """Unique slots, deepest nodes first and lower index first within a depth.

    An explicit transmission ``order`` may be supplied instead; it is checked
    for descendant-before-ancestor causality.
    """
    if order is None:
        order = sorted(range(network.n), key=lambda v: (-network.depth[v], v))
    slot = np.empty(network.n, dtype=int)
    if sorted(order) != list(range(network.n)):
        raise ValidationError("order must list every node exactly once")
    for t, v in enumerate(order, start=1):
        slot[v] = t
    sched = Schedule(slot)
    sched.check_causal(network)
    return sched


@dataclass(frozen=True)
class CausalSets:
    """Per-node causal broadcast sources ``B_n`` (ascending slot) and ``B̄_n``."""

    broadcast: tuple[tuple[int, ...], ...]
    extended: tuple[frozenset, ...]

    def sources(self, n: int) -> tuple[int, ...]:
        return self.broadcast[n]

    def link_count(self) -> int:
        return sum(len(b) for b in self.broadcast)


def _extended(network: Network, broadcast) -> tuple[frozenset, ...]:
    out = []
    for srcs in broadcast:
        s = set()
        for m in srcs:
            s.update(network.block(m))
        out.append(frozenset(s))
    return tuple(out)


def _make(network: Network, schedule: Schedule, sets: Sequence[Sequence[int]]) -> CausalSets:
    ordered = tuple(tuple(sorted(set(s), key=lambda m: schedule.slot[m])) for s in sets)
    return CausalSets(ordered, _extended(network, ordered))


def derive_causal_sets(network: Network, schedule: Schedule) -> CausalSets:
    """Keep the overheard sources that transmit before the listener."""
    sets: list[list[int]] = [[] for _ in range(network.n)]
    for m, n in network.broadcast:
        if schedule.slot[m] < schedule.slot[n]:
            sets[n].append(m)
    return _make(network, schedule, sets)


def _parent_slot(network: Network, schedule: Schedule, m: int) -> int:
    # the sink never reprocesses, so it acts as a slot after every sensor
    p = int(network.parent[m])
    return len(schedule) + 1 if p == network.sink else int(schedule.slot[p])


def prune_for_decodability(causal: CausalSets, network: Network, schedule: Schedule) -> CausalSets:
    """Drop sources that break step-by-step decoding.

    A source ``m`` survives at ``n`` only if ``m``'s parent transmits after
    ``n``, and no ancestor of ``m`` is also a source at ``n`` (the ancestor
    carries the latest version of ``m``'s data).
    """
    out = []
    for n, srcs in enumerate(causal.broadcast):
        timed = [m for m in srcs if _parent_slot(network, schedule, m) > schedule.slot[n]]
        keep = [m for m in timed if not any(network.is_ancestor(a, m) for a in timed if a != m)]
        out.append(keep)
    return _make(network, schedule, out)


def causal_sets_for(network: Network, schedule: Schedule) -> CausalSets:
    return prune_for_decodability(derive_causal_sets(network, schedule), network, schedule)


def check_causal_sets(causal: CausalSets, network: Network, schedule: Schedule) -> list[str]:
    """Return descriptions of every violated timing predicate (empty if none)."""
    problems = []
    for n, srcs in enumerate(causal.broadcast):
        for m in srcs:
            if not schedule.slot[m] < schedule.slot[n]:
                problems.append(f"source {m} of {n} transmits too late")
            if not _parent_slot(network, schedule, m) > schedule.slot[n]:
                problems.append(f"parent of source {m} transmits before {n}")
            if any(network.is_ancestor(a, m) for a in srcs if a != m):
                problems.append(f"source {m} of {n} shadowed by an ancestor")
    return problems


def schedule_to_json(schedule: Schedule) -> str:
    return json.dumps({"slot": schedule.slot.tolist()})


def schedule_from_json(text: str) -> Schedule:
    return Schedule(np.array(json.loads(text)["slot"], dtype=int))


def causal_sets_to_json(causal: CausalSets) -> str:
    return json.dumps({"broadcast": [list(b) for b in causal.broadcast]})


def causal_sets_from_json(text: str, network: Network, schedule: Schedule) -> CausalSets:
    return _make(network, schedule, json.loads(text)["broadcast"])
