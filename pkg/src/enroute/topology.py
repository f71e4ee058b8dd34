"""Node placement, shortest-path routing trees and broadcast links.

Node indices are 0-based.  A network with ``N`` sensors numbers them
``0..N-1`` in pre-order (the descendants of ``n`` are exactly
``n+1 .. n+|D_n|``) and gives the sink index ``N``.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .energy import E_ELEC, EPS_AMP
from .errors import InvalidArgument, TopologyError

__all__ = [
    "RadioModel",
    "Network",
    "TreeQuery",
    "network_from_parent",
    "place_nodes",
    "build_spt",
    "derive_broadcast_links",
    "preorder_renumber",
    "tree_queries",
    "euclidean_weight",
    "hop_energy_weight",
    "random_network",
    "network_to_json",
    "network_from_json",
]

_RANGE_TOL = 1e-9


@dataclass(frozen=True)
class RadioModel:
    """``kind`` is ``"variable"`` (range = distance to parent) or ``"fixed"``."""

    kind: str = "variable"
    radius: float | None = None

    def __post_init__(self):
        if self.kind not in ("variable", "fixed"):
            raise InvalidArgument(f"unknown radio model {self.kind!r}")
        if self.kind == "fixed" and (self.radius is None or not self.radius > 0):
            raise InvalidArgument("fixed radio range needs a positive radius")

    @classmethod
    def variable(cls) -> "RadioModel":
        return cls("variable")

    @classmethod
    def fixed(cls, radius: float) -> "RadioModel":
        return cls("fixed", float(radius))


def place_nodes(count: int, extent: float, rng_seed: int) -> np.ndarray:
    """Uniform random sensor positions in ``[0, extent]^2`` plus a central sink.

    Returns an array of shape ``(count + 1, 2)``; the last row is the sink.
    """
    if count < 1:
        raise InvalidArgument("count must be at least 1")
    if not extent > 0:
        raise InvalidArgument("extent must be positive")
    rng = np.random.default_rng(rng_seed)
    pts = rng.uniform(0.0, extent, size=(count, 2))
    return np.vstack([pts, [[extent / 2.0, extent / 2.0]]])


def euclidean_weight(d: float) -> float:
    return d


def hop_energy_weight(e_elec: float = E_ELEC, eps_amp: float = EPS_AMP) -> Callable[[float], float]:
    """Per-bit energy of one hop (transmit plus receive) at distance ``d``."""

    def weight(d: float) -> float:
        return 2.0 * e_elec + eps_amp * d * d

    return weight


def _pairwise(positions: np.ndarray) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt((diff ** 2).sum(-1))


def build_spt(
    positions: np.ndarray,
    sink: int,
    link_predicate: Callable[[int, int], bool] | None = None,
    weight: Callable[[float], float] = euclidean_weight,
) -> np.ndarray:
    """Shortest-path tree towards ``sink`` by Dijkstra.

    ``link_predicate(i, j)`` says whether ``i`` and ``j`` can talk directly
    (``None`` means the complete graph).  Edge costs are ``weight(distance)``.
    Equal-cost predecessors are resolved to the smallest index.

    Returns ``parent`` with ``parent[sink] == -1``.
    """
    positions = np.asarray(positions, dtype=float)
    count = len(positions)
    dmat = _pairwise(positions)
    if link_predicate is None:
        adj = ~np.eye(count, dtype=bool)
    else:
        adj = np.array(
            [[i != j and bool(link_predicate(i, j)) for j in range(count)] for i in range(count)]
        )
    cost = np.where(adj, np.vectorize(weight, otypes=[float])(dmat), np.inf)

    dist = np.full(count, np.inf)
    parent = np.full(count, -1, dtype=int)
    done = np.zeros(count, dtype=bool)
    dist[sink] = 0.0
    heap = [(0.0, sink)]
    while heap:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v in np.flatnonzero(adj[u] & ~done):
            alt = du + cost[u, v]
            tol = 1e-12 * max(alt, dist[v]) if np.isfinite(dist[v]) else 0.0
            if alt < dist[v] - tol:
                dist[v] = alt
                parent[v] = u
                heapq.heappush(heap, (alt, v))
            elif abs(alt - dist[v]) <= tol and u < parent[v]:
                parent[v] = u
    missing = [i for i in range(count) if not done[i]]
    if missing:
        raise TopologyError(f"node {missing[0]} cannot reach the sink", node=missing[0])
    return parent


def preorder_renumber(parent: Sequence[int], sink: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Relabel a tree so that every subtree occupies a contiguous index block.

    ``parent`` uses ``-1`` (or omits) for the sink.  Children are visited in
    ascending old index.  Returns ``(perm, new_parent)`` where ``perm[old]`` is
    the new label (the sink becomes ``N``) and ``new_parent`` has length ``N``.
    """
    parent = np.asarray(parent, dtype=int)
    if sink is None:
        roots = np.flatnonzero(parent < 0)
        if len(roots) != 1:
            raise TopologyError("tree must have exactly one sink")
        sink = int(roots[0])
    count = len(parent)
    kids: list[list[int]] = [[] for _ in range(count)]
    for v in range(count):
        if v != sink:
            kids[parent[v]].append(v)
    perm = np.full(count, -1, dtype=int)
    nxt = 0
    stack = list(reversed(kids[sink]))
    while stack:
        v = stack.pop()
        perm[v] = nxt
        nxt += 1
        stack.extend(reversed(kids[v]))
    if nxt != count - 1:
        raise TopologyError("parent map is not a tree rooted at the sink")
    perm[sink] = count - 1
    new_parent = np.empty(count - 1, dtype=int)
    for v in range(count):
        if v != sink:
            new_parent[perm[v]] = perm[parent[v]]
    return perm, new_parent


def _ranges(positions: np.ndarray, parent: np.ndarray, radio: RadioModel) -> np.ndarray:
    n = len(parent)
    if radio.kind == "fixed":
        return np.full(n, radio.radius)
    return np.linalg.norm(positions[:n] - positions[parent], axis=1)


def derive_broadcast_links(positions, parent, radio: RadioModel) -> tuple[tuple[int, int], ...]:
    """Directed overhearing links ``(source, listener)`` between sensors.

    A sensor ``n`` overhears ``m`` when it lies within ``m``'s radio range and
    is not adjacent to ``m`` in the tree.
    """
    positions = np.asarray(positions, dtype=float)
    parent = np.asarray(parent, dtype=int)
    n = len(parent)
    rng = _ranges(positions, parent, radio)
    dmat = _pairwise(positions[:n])
    links = []
    for m in range(n):
        reach = dmat[m] <= rng[m] * (1 + _RANGE_TOL) + _RANGE_TOL
        for l in np.flatnonzero(reach):
            if l == m or l == parent[m] or parent[l] == m:
                continue
            links.append((m, int(l)))
    return tuple(links)


@dataclass(frozen=True, eq=False)
class Network:
    """A pre-order numbered routing tree with broadcast links.

    ``positions`` has ``N + 1`` rows (sink last); ``parent[n]`` is in
    ``0..N`` where ``N`` denotes the sink.
    """

    positions: np.ndarray
    parent: np.ndarray
    broadcast: tuple[tuple[int, int], ...] = ()
    radio: RadioModel = field(default_factory=RadioModel)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        par = np.asarray(self.parent, dtype=int)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "parent", par)
        object.__setattr__(self, "broadcast", tuple((int(a), int(b)) for a, b in self.broadcast))
        n = len(par)
        if pos.shape != (n + 1, 2):
            raise TopologyError(f"expected {n + 1} positions, got shape {pos.shape}")
        if n and (par.min() < 0 or par.max() > n):
            raise TopologyError("parent index out of range")
        depth = np.zeros(n, dtype=int)
        size = np.ones(n, dtype=int)
        children: list[list[int]] = [[] for _ in range(n + 1)]
        for v in range(n):
            if par[v] != n and par[v] >= v:
                raise TopologyError(f"node {v} breaks pre-order numbering", node=v)
            children[par[v]].append(v)
            depth[v] = 1 if par[v] == n else depth[par[v]] + 1
        for v in reversed(range(n)):
            if par[v] != n:
                size[par[v]] += size[v]
        for v in range(n):
            below = [c for c in range(v + 1, v + size[v]) if par[c] < v]
            if below:
                raise TopologyError(f"descendants of {v} are not contiguous", node=v)
        tree_edges = {(v, int(par[v])) for v in range(n)}
        for m, l in self.broadcast:
            if not (0 <= m < n and 0 <= l < n) or m == l:
                raise TopologyError(f"bad broadcast link {(m, l)}")
            if (m, l) in tree_edges or (l, m) in tree_edges:
                raise TopologyError(f"broadcast link {(m, l)} duplicates a tree edge")
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "subtree_size", size)
        object.__setattr__(self, "_children", tuple(tuple(c) for c in children))

    @property
    def n(self) -> int:
        return len(self.parent)

    @property
    def sink(self) -> int:
        return len(self.parent)

    def children(self, v: int) -> tuple[int, ...]:
        return self._children[v]

    def descendants(self, v: int) -> range:
        return range(v + 1, v + self.subtree_size[v])

    def block(self, v: int) -> range:
        """``{v} ∪ D_v`` as an index range."""
        return range(v, v + self.subtree_size[v])

    def ancestors(self, v: int) -> list[int]:
        out = []
        while v != self.sink:
            v = int(self.parent[v])
            out.append(v)
        return out

    def is_ancestor(self, a: int, v: int) -> bool:
        """True when ``a`` is a strict tree ancestor of sensor ``v``."""
        if a == self.sink:
            return True
        return a < v < a + self.subtree_size[a]

    def distance(self, a: int, b: int) -> float:
        return float(np.linalg.norm(self.positions[a] - self.positions[b]))

    @property
    def ranges(self) -> np.ndarray:
        return _ranges(self.positions, self.parent, self.radio)

    def link_distance(self, v: int) -> float:
        """Distance used to cost ``v``'s transmission to its parent."""
        if self.radio.kind == "fixed":
            return float(self.radio.radius)
        return self.distance(v, int(self.parent[v]))

    def roots(self) -> tuple[int, ...]:
        return self._children[self.sink]


@dataclass(frozen=True)
class TreeQuery:
    descendants: frozenset
    ancestors: frozenset
    children_k: dict
    depth: int


def tree_queries(network: Network, n: int) -> TreeQuery:
    if not 0 <= n < network.n:
        raise InvalidArgument(f"unknown node {n}")
    desc = frozenset(network.descendants(n))
    by_k: dict[int, set] = {}
    for m in desc:
        k, v = 0, m
        while v != n:
            v = int(network.parent[v])
            k += 1
        by_k.setdefault(k, set()).add(m)
    return TreeQuery(
        descendants=desc,
        ancestors=frozenset(network.ancestors(n)),
        children_k={k: frozenset(s) for k, s in sorted(by_k.items())},
        depth=int(network.depth[n]),
    )


def _renumbered_network(positions, parent, radio) -> Network:
    perm, new_parent = preorder_renumber(parent)
    new_pos = np.empty_like(positions)
    new_pos[perm] = positions
    links = derive_broadcast_links(new_pos, new_parent, radio)
    return Network(new_pos, new_parent, links, radio)


def network_from_parent(positions, parent, radio: RadioModel | None = None) -> Network:
    """Renumber an arbitrary ``parent`` map (sink marked ``-1``) into a Network."""
    return _renumbered_network(np.asarray(positions, dtype=float), np.asarray(parent), radio or RadioModel())


def random_network(
    count: int,
    extent: float = 600.0,
    radio: RadioModel | None = None,
    seed: int = 0,
    max_tries: int = 200,
) -> Network:
    """Place nodes, build the SPT and derive broadcast links.

    Variable-range trees minimise per-bit hop energy over the complete graph;
    fixed-range trees minimise Euclidean path length over links within the
    radius.  Disconnected fixed-range placements are redrawn from the seed
    sequence ``(seed, attempt)``.
    """
    radio = radio or RadioModel()
    for attempt in range(max_tries):
        s = seed if attempt == 0 else int(np.random.SeedSequence([seed, attempt]).generate_state(1)[0])
        pos = place_nodes(count, extent, s)
        sink = count
        if radio.kind == "fixed":
            dmat = _pairwise(pos)
            r = radio.radius * (1 + _RANGE_TOL)
            try:
                parent = build_spt(pos, sink, lambda i, j: dmat[i, j] <= r, euclidean_weight)
            except TopologyError:
                continue
        else:
            parent = build_spt(pos, sink, None, hop_energy_weight())
        return _renumbered_network(pos, parent, radio)
    raise TopologyError(f"no connected placement found after {max_tries} tries")


def network_to_json(network: Network) -> str:
    doc = {
        "positions": network.positions.tolist(),
        "sink": network.sink,
        "parent": network.parent.tolist(),
        "broadcast": [list(p) for p in network.broadcast],
        "radio": {"kind": network.radio.kind, "radius": network.radio.radius},
    }
    return json.dumps(doc)


def network_from_json(text: str) -> Network:
    doc = json.loads(text)
    radio = doc.get("radio") or {"kind": "variable"}
    net = Network(
        np.array(doc["positions"], dtype=float),
        np.array(doc["parent"], dtype=int),
        [tuple(p) for p in doc.get("broadcast", [])],
        RadioModel(radio["kind"], radio.get("radius")),
    )
    if doc.get("sink", net.sink) != net.sink:
        raise TopologyError("sink index must equal the sensor count")
    return net
