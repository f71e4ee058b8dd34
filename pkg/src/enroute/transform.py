"""Unidirectional transforms: per-node local matrices executed in slot order.

At its slot, node ``n`` replaces the block ``[x(n); y(D_n)]`` by
``A_n @ block + sum_i B_n^i @ y_block(B_n(i))`` where each broadcast block is
the source's vector as it was transmitted.  Decoding undoes the nodes in
reverse slot order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgument, InvertibilityError, ValidationError
from .scheduling import CausalSets, Schedule, check_causal_sets
from .topology import Network

__all__ = [
    "CoefClass",
    "RAW",
    "smooth",
    "detail",
    "LocalTransform",
    "UnidirectionalTransform",
    "CoefficientSet",
    "InvertibilityReport",
    "Trace",
    "validate",
    "encode_epoch",
    "encode_epochs",
    "decode_epoch",
    "decode_epochs",
    "assemble_global_matrix",
    "verify_invertibility",
    "verify_critical_sampling",
    "final_classes",
    "identity_transform",
    "transform_to_json",
    "transform_from_json",
]


@dataclass(frozen=True, order=True)
class CoefClass:
    kind: str
    level: int = 0

    def __str__(self):
        return self.kind if self.kind == "raw" else f"{self.kind}{self.level}"

    @property
    def is_detail(self) -> bool:
        return self.kind == "detail"


RAW = CoefClass("raw", 0)


def smooth(level: int = 1) -> CoefClass:
    return CoefClass("smooth", level)


def detail(level: int = 1) -> CoefClass:
    return CoefClass("detail", level)


@dataclass(frozen=True, eq=False)
class LocalTransform:
    """Matrices applied at one node.

    ``broadcast`` pairs each source ``m`` with its ``(1+|D_n|) x (1+|D_m|)``
    matrix.  ``labels`` maps global coefficient indices to the class they
    carry after this node's processing; unlisted entries keep their class.
    """

    node: int
    a: np.ndarray
    broadcast: tuple[tuple[int, np.ndarray], ...] = ()
    labels: Mapping[int, CoefClass] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "a", np.atleast_2d(np.asarray(self.a, dtype=float)))
        object.__setattr__(
            self,
            "broadcast",
            tuple((int(m), np.atleast_2d(np.asarray(b, dtype=float))) for m, b in self.broadcast),
        )

    def used_sources(self) -> tuple[int, ...]:
        """Sources whose broadcast matrix is not identically zero."""
        return tuple(m for m, b in self.broadcast if np.any(b != 0))


@dataclass(frozen=True, eq=False)
class UnidirectionalTransform:
    network: Network
    schedule: Schedule
    causal: CausalSets
    locals: tuple[LocalTransform, ...]
    name: str = "custom"
    lifting: bool = False

    def local(self, n: int) -> LocalTransform:
        return self.locals[n]


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    values: np.ndarray
    classes: tuple[CoefClass, ...]

    def __len__(self):
        return len(self.values)


@dataclass
class Trace:
    """Per-transmission record of an encoding run, in slot order.

    ``packets[k]`` is ``(node, values)`` where ``values`` has one row per
    entry of the node's block; ``classes[k]`` holds the matching classes;
    ``changed[k]`` lists the global indices whose values were modified.
    """

    packets: list = field(default_factory=list)
    classes: list = field(default_factory=list)
    changed: list = field(default_factory=list)


def _blocks(net: Network) -> list[np.ndarray]:
    return [np.arange(v, v + net.subtree_size[v]) for v in range(net.n)]


def validate(transform: UnidirectionalTransform) -> None:
    """Check dimensions, source sets and the broadcast timing constraints."""
    net, sched = transform.network, transform.schedule
    if len(transform.locals) != net.n:
        raise ValidationError(f"expected {net.n} local transforms, got {len(transform.locals)}")
    if len(sched) != net.n:
        raise ValidationError("schedule length does not match the network")
    problems = check_causal_sets(transform.causal, net, sched)
    if problems:
        raise ValidationError(problems[0])
    for n, loc in enumerate(transform.locals):
        if loc.node != n:
            raise ValidationError(f"local transform {n} is labelled {loc.node}")
        k = int(net.subtree_size[n])
        if loc.a.shape != (k, k):
            raise ValidationError(f"A at node {n} has shape {loc.a.shape}, expected {(k, k)}")
        srcs = [m for m, _ in loc.broadcast]
        allowed = transform.causal.broadcast[n]
        if not set(srcs) <= set(allowed):
            raise ValidationError(f"node {n} uses broadcast sources outside its causal set")
        if srcs != sorted(srcs, key=lambda m: sched.slot[m]):
            raise ValidationError(f"broadcast matrices at node {n} are not in slot order")
        for m, b in loc.broadcast:
            if b.shape != (k, int(net.subtree_size[m])):
                raise ValidationError(f"B from {m} at node {n} has shape {b.shape}")


def _as_matrix(transform: UnidirectionalTransform, x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    mat = arr[:, None] if single else arr.T
    if mat.shape[0] != transform.network.n:
        raise ValidationError(f"expected {transform.network.n} values per epoch, got {mat.shape[0]}")
    if not np.all(np.isfinite(mat)):
        raise InvalidArgument("input contains non-finite values")
    return mat.copy(), single


def _run(transform: UnidirectionalTransform, y: np.ndarray, trace: Trace | None) -> np.ndarray:
    net = transform.network
    blocks = _blocks(net)
    snapshots: dict[int, np.ndarray] = {}
    classes = [RAW] * net.n
    for n in transform.schedule.order:
        loc = transform.locals[n]
        blk = blocks[n]
        before = y[blk].copy() if trace is not None else None
        out = loc.a @ y[blk]
        for m, b in loc.broadcast:
            out += b @ snapshots[m]
        y[blk] = out
        snapshots[n] = out.copy()
        for k, c in loc.labels.items():
            classes[k] = c
        if trace is not None:
            trace.packets.append((n, out.copy()))
            trace.classes.append(tuple(classes[k] for k in blk))
            diff = np.any(out != before, axis=1)
            trace.changed.append(tuple(int(k) for k in blk[diff]))
    return y


def encode_epochs(transform: UnidirectionalTransform, x, trace: Trace | None = None) -> np.ndarray:
    """Encode one epoch (shape ``(N,)``) or many (shape ``(M, N)``)."""
    validate(transform)
    y, single = _as_matrix(transform, x)
    y = _run(transform, y, trace)
    return y[:, 0] if single else y.T


def encode_epoch(transform: UnidirectionalTransform, x) -> CoefficientSet:
    y = encode_epochs(transform, np.asarray(x, dtype=float).reshape(-1))
    return CoefficientSet(y, final_classes(transform))


def decode_epochs(transform: UnidirectionalTransform, y) -> np.ndarray:
    """Invert :func:`encode_epochs` node by node in reverse slot order."""
    if isinstance(y, CoefficientSet):
        y = y.values
    validate(transform)
    z, single = _as_matrix(transform, y)
    blocks = _blocks(transform.network)
    for n in reversed(transform.schedule.order):
        loc = transform.locals[n]
        blk = blocks[n]
        rhs = z[blk].copy()
        for m, b in loc.broadcast:
            rhs -= b @ z[blocks[m]]
        dim = loc.a.shape[0]
        if abs(np.linalg.det(loc.a)) <= _SINGULAR * dim:
            raise InvertibilityError(f"A at node {n} is singular", node=n)
        z[blk] = np.linalg.solve(loc.a, rhs)
    return z[:, 0] if single else z.T


def decode_epoch(transform: UnidirectionalTransform, y) -> np.ndarray:
    return decode_epochs(transform, y)


def global_step(transform: UnidirectionalTransform, n: int) -> np.ndarray:
    """The ``N x N`` matrix applied to the whole coefficient vector at ``n``'s slot."""
    net = transform.network
    loc = transform.locals[n]
    c = np.eye(net.n)
    blk = net.block(n)
    rows = slice(blk.start, blk.stop)
    c[rows, :] = 0.0
    c[rows, rows] = loc.a
    for m, b in loc.broadcast:
        mb = net.block(m)
        c[rows, mb.start:mb.stop] = b
    return c


def assemble_global_matrix(transform: UnidirectionalTransform) -> np.ndarray:
    """Product ``C_N ... C_1`` of the per-slot global matrices."""
    validate(transform)
    g = np.eye(transform.network.n)
    for n in transform.schedule.order:
        g = global_step(transform, n) @ g
    return g


_SINGULAR = 1e-12


@dataclass(frozen=True)
class InvertibilityReport:
    ok: bool
    dets: np.ndarray
    offending: tuple[int, ...]


def verify_invertibility(transform: UnidirectionalTransform) -> InvertibilityReport:
    """Invertible iff every ``|det A_n|`` clears the singularity threshold.

    Broadcast matrices never enter the verdict.
    """
    dets = np.array([np.linalg.det(loc.a) for loc in transform.locals])
    dims = np.array([loc.a.shape[0] for loc in transform.locals])
    bad = tuple(int(n) for n in np.flatnonzero(np.abs(dets) <= _SINGULAR * dims))
    return InvertibilityReport(not bad, dets, bad)


def verify_critical_sampling(transform: UnidirectionalTransform, network: Network | None = None) -> bool:
    """Each node emits ``1+|D_n|`` values and the sink receives each node once."""
    net = network or transform.network
    if len(transform.locals) != net.n:
        return False
    for n, loc in enumerate(transform.locals):
        k = int(net.subtree_size[n])
        if loc.node != n or loc.a.shape != (k, k):
            return False
        if any(b.shape[0] != k for _, b in loc.broadcast):
            return False
    covered = np.zeros(net.n, dtype=int)
    for r in net.roots():
        covered[net.block(r).start:net.block(r).stop] += 1
    return bool(np.all(covered == 1))


def final_classes(transform: UnidirectionalTransform) -> tuple[CoefClass, ...]:
    """Class of every coefficient as it reaches the sink."""
    classes = [RAW] * transform.network.n
    for n in transform.schedule.order:
        for k, c in transform.locals[n].labels.items():
            classes[k] = c
    return tuple(classes)


def identity_transform(network: Network, schedule: Schedule, causal: CausalSets) -> UnidirectionalTransform:
    locs = tuple(LocalTransform(n, np.eye(network.subtree_size[n])) for n in range(network.n))
    return UnidirectionalTransform(network, schedule, causal, locs, name="identity")


def transform_to_json(transform: UnidirectionalTransform) -> str:
    nodes = []
    for loc in transform.locals:
        nodes.append(
            {
                "node": loc.node,
                "a": loc.a.tolist(),
                "b": [{"src": m, "mat": b.tolist()} for m, b in loc.broadcast],
                "labels": {str(k): [c.kind, c.level] for k, c in sorted(loc.labels.items())},
            }
        )
    return json.dumps({"name": transform.name, "lifting": transform.lifting, "nodes": nodes})


def transform_from_json(text: str, network: Network, schedule: Schedule, causal: CausalSets) -> UnidirectionalTransform:
    doc = json.loads(text)
    locs = []
    for item in doc["nodes"]:
        labels = {int(k): CoefClass(v[0], int(v[1])) for k, v in item.get("labels", {}).items()}
        locs.append(
            LocalTransform(
                int(item["node"]),
                np.array(item["a"], dtype=float),
                tuple((int(e["src"]), np.array(e["mat"], dtype=float)) for e in item.get("b", [])),
                labels,
            )
        )
    locs.sort(key=lambda l: l.node)
    return UnidirectionalTransform(
        network, schedule, causal, tuple(locs), doc.get("name", "custom"), bool(doc.get("lifting", False))
    )
