"""Concrete unidirectional transforms.

Tree KLT, both tree DPCM variants, the lifting building blocks (single
level and multi-level), the 5/3-like and the Haar-like wavelets.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgument, ParityViolation, PlanError
from .scheduling import CausalSets, Schedule
from .topology import Network
from .transform import (
    CoefClass,
    LocalTransform,
    UnidirectionalTransform,
    detail,
    final_classes,
    smooth,
)

__all__ = [
    "ParitySplit",
    "LiftingFactors",
    "LevelSpec",
    "split_by_depth_parity",
    "averaging_prediction",
    "smoothing_update",
    "orthogonalizing_update",
    "build_lifting_level",
    "compose_multilevel",
    "minimum_spanning_tree",
    "build_tklt",
    "build_tdpcm_decoding",
    "build_tdpcm_onehop",
    "build_53like",
    "build_haarlike",
    "annotate_coefficient_classes",
    "raw_forwarding_hops",
    "SCHEMES",
    "build_scheme",
]

Weights = Mapping[int, Mapping[int, float]]


@dataclass(frozen=True)
class ParitySplit:
    odd: frozenset
    even: frozenset


def split_by_depth_parity(network: Network) -> ParitySplit:
    odd = frozenset(v for v in range(network.n) if network.depth[v] % 2 == 1)
    return ParitySplit(odd, frozenset(range(network.n)) - odd)


def averaging_prediction(neighbors: Sequence) -> np.ndarray:
    if len(neighbors) == 0:
        raise InvalidArgument("prediction needs at least one neighbour")
    return np.full(len(neighbors), 1.0 / len(neighbors))


def smoothing_update(neighbors: Sequence) -> np.ndarray:
    if len(neighbors) == 0:
        raise InvalidArgument("update needs at least one neighbour")
    return np.full(len(neighbors), 1.0 / (2 * len(neighbors)))


def orthogonalizing_update(p) -> np.ndarray:
    """Update weights making each smooth orthogonal to the detail it absorbs.

    For a detail ``d = x_n - p @ x_N`` and ``s_i = x_i + u_i d`` the analysis
    vectors of ``s_i`` and ``d`` are orthogonal iff ``u_i = p_i / (1 + |p|^2)``.
    """
    p = np.asarray(p, dtype=float)
    return p / (1.0 + p @ p)


def _perm(order: Sequence[int], index: Mapping[int, int]) -> np.ndarray:
    m = np.zeros((len(order), len(index)))
    for r, k in enumerate(order):
        m[r, index[k]] = 1.0
    return m


@dataclass(frozen=True, eq=False)
class LiftingFactors:
    """Single-level lifting at one node, kept in factored form.

    ``a = perm.T @ update @ predict @ perm`` and ``b`` holds the broadcast
    columns (ordered as ``bcast``).
    """

    local: tuple[int, ...]
    bcast: tuple[int, ...]
    odd: tuple[int, ...]
    even: tuple[int, ...]
    perm: np.ndarray
    perm_b: np.ndarray
    predict: np.ndarray
    update: np.ndarray
    a: np.ndarray
    b: np.ndarray


def build_lifting_level(
    local: Sequence[int],
    bcast: Sequence[int],
    odd: set | frozenset,
    predict: Weights,
    update: Weights,
) -> LiftingFactors:
    """Local matrices of one predict-then-update lifting step.

    ``predict[t][s] = w`` computes ``y(t) -= w * y(s)`` for odd ``t`` from
    even ``s``; ``update[t][s] = w`` computes ``y(t) += w * y(s)`` for even
    ``t`` from odd ``s`` (after prediction).  Sources may be local or
    broadcast coefficients; targets must be local.
    """
    local = tuple(local)
    bcast = tuple(bcast)
    lidx = {k: i for i, k in enumerate(local)}
    bidx = {k: i for i, k in enumerate(bcast)}
    o_loc = tuple(k for k in local if k in odd)
    e_loc = tuple(k for k in local if k not in odd)
    o_b = tuple(k for k in bcast if k in odd)
    e_b = tuple(k for k in bcast if k not in odd)
    pos_o = {k: i for i, k in enumerate(o_loc)}
    pos_e = {k: i for i, k in enumerate(e_loc)}
    pos_ob = {k: i for i, k in enumerate(o_b)}
    pos_eb = {k: i for i, k in enumerate(e_b)}

    p = np.zeros((len(o_loc), len(e_loc)))
    pb = np.zeros((len(o_loc), len(e_b)))
    for t, srcs in predict.items():
        if t not in pos_o:
            raise ParityViolation(f"prediction target {t} is not a local odd coefficient")
        for s, w in srcs.items():
            if s in pos_e:
                p[pos_o[t], pos_e[s]] -= w
            elif s in pos_eb:
                pb[pos_o[t], pos_eb[s]] -= w
            else:
                raise ParityViolation(f"prediction of {t} reads {s}, which is not an available even coefficient")
    u = np.zeros((len(e_loc), len(o_loc)))
    ub = np.zeros((len(e_loc), len(o_b)))
    for t, srcs in update.items():
        if t not in pos_e:
            raise ParityViolation(f"update target {t} is not a local even coefficient")
        for s, w in srcs.items():
            if s in pos_o:
                u[pos_e[t], pos_o[s]] += w
            elif s in pos_ob:
                ub[pos_e[t], pos_ob[s]] += w
            else:
                raise ParityViolation(f"update of {t} reads {s}, which is not an available odd coefficient")

    no, ne = len(o_loc), len(e_loc)
    perm = _perm(o_loc + e_loc, lidx)
    perm_b = _perm(o_b + e_b, bidx)
    pred = np.eye(no + ne)
    pred[:no, no:] = p
    upd = np.eye(no + ne)
    upd[no:, :no] = u
    a = perm.T @ upd @ pred @ perm
    mid = np.zeros((no + ne, len(o_b) + len(e_b)))
    mid[:no, len(o_b):] = pb
    mid[no:, :len(o_b)] = ub
    mid[no:, len(o_b):] = u @ pb
    b = perm.T @ mid @ perm_b
    return LiftingFactors(local, bcast, o_loc, e_loc, perm, perm_b, pred, upd, a, b)


@dataclass(frozen=True)
class LevelSpec:
    """One extra lifting level on already-smooth local coefficients."""

    odd: tuple[int, ...]
    even: tuple[int, ...]
    predict: Weights = field(default_factory=dict)
    update: Weights = field(default_factory=dict)


def _level_matrix(local: Sequence[int], spec: LevelSpec) -> np.ndarray:
    lidx = {k: i for i, k in enumerate(local)}
    odd, even = tuple(spec.odd), tuple(spec.even)
    rest = tuple(k for k in local if k not in set(odd) | set(even))
    pos_o = {k: i for i, k in enumerate(odd)}
    pos_e = {k: i for i, k in enumerate(even)}
    no, ne = len(odd), len(even)
    p = np.zeros((no, ne))
    for t, srcs in spec.predict.items():
        if t not in pos_o:
            raise ParityViolation(f"level prediction target {t} is not odd at this level")
        for s, w in srcs.items():
            if s not in pos_e:
                raise ParityViolation(f"level prediction of {t} reads non-even {s}")
            p[pos_o[t], pos_e[s]] -= w
    u = np.zeros((ne, no))
    for t, srcs in spec.update.items():
        if t not in pos_e:
            raise ParityViolation(f"level update target {t} is not even at this level")
        for s, w in srcs.items():
            if s not in pos_o:
                raise ParityViolation(f"level update of {t} reads non-odd {s}")
            u[pos_e[t], pos_o[s]] += w
    dim = len(local)
    perm = _perm(odd + even + rest, lidx)
    pred = np.eye(dim)
    pred[:no, no:no + ne] = p
    upd = np.eye(dim)
    upd[no:no + ne, :no] = u
    return perm.T @ upd @ pred @ perm


def compose_multilevel(first: LiftingFactors, levels: Sequence[LevelSpec]) -> tuple[np.ndarray, np.ndarray]:
    """Stack further lifting levels on top of a single-level step.

    Level ``j`` must split (part of) the even set of level ``j-1``.  Returns
    ``(A, B)``; later levels only act on local coefficients.
    """
    local = first.local
    prev_even = set(first.even)
    a, b = first.a, first.b
    for j, spec in enumerate(levels, start=2):
        odd, even = set(spec.odd), set(spec.even)
        if odd & even:
            raise PlanError(f"level {j} odd and even sets overlap")
        if not (odd | even) <= prev_even:
            raise PlanError(f"level {j} sets are not drawn from the level {j - 1} even set")
        lm = _level_matrix(local, spec)
        a = lm @ a
        b = lm @ b
        prev_even = even
    return a, b


def minimum_spanning_tree(points: np.ndarray, ids: Sequence[int]) -> dict[int, list[int]]:
    """Euclidean MST (Prim) as an adjacency map; ties go to smaller ids."""
    ids = list(ids)
    if not ids:
        return {}
    pts = np.asarray(points, dtype=float)
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    inside = {order[0]}
    adj: dict[int, list[int]] = {k: [] for k in ids}
    while len(inside) < len(ids):
        best = None
        for i in sorted(inside, key=lambda i: ids[i]):
            for j in order:
                if j in inside:
                    continue
                d = float(np.linalg.norm(pts[i] - pts[j]))
                key = (d, min(ids[i], ids[j]), max(ids[i], ids[j]))
                if best is None or key < best[0]:
                    best = (key, i, j)
        _, i, j = best
        inside.add(j)
        adj[ids[i]].append(ids[j])
        adj[ids[j]].append(ids[i])
    return {k: sorted(v) for k, v in adj.items()}


def _pred_weights(kind: str, neighbors: Sequence[int]) -> dict[int, float]:
    if kind != "average":
        raise InvalidArgument(f"unknown prediction filter {kind!r}")
    return dict(zip(neighbors, averaging_prediction(neighbors).tolist()))


def _split_broadcast(net: Network, sources: Sequence[int], b: np.ndarray):
    out, col = [], 0
    for m in sources:
        w = int(net.subtree_size[m])
        out.append((m, b[:, col:col + w]))
        col += w
    return tuple(out)


def _bcast_ids(net: Network, sources: Sequence[int]) -> tuple[int, ...]:
    ids: list[int] = []
    for m in sources:
        ids.extend(net.block(m))
    return tuple(ids)


def _tree_levels(net: Network, active: Sequence[int], levels: int, update_kind: str):
    """Extra Haar levels over ``active`` smooth coefficients along MSTs."""
    specs, labels = [], {}
    active = sorted(active)
    for j in range(2, levels + 2):
        if len(active) < 2:
            break
        adj = minimum_spanning_tree(net.positions[active], active)
        depth = {active[0]: 1}
        queue = [active[0]]
        while queue:
            v = queue.pop(0)
            for w in adj[v]:
                if w not in depth:
                    depth[w] = depth[v] + 1
                    queue.append(w)
        odd = tuple(k for k in active if depth[k] % 2 == 1)
        even = tuple(k for k in active if depth[k] % 2 == 0)
        predict = {l: _pred_weights("average", adj[l]) for l in odd}
        update: dict[int, dict[int, float]] = {k: {} for k in even}
        if update_kind == "ortho":
            for l in odd:
                u = orthogonalizing_update(list(predict[l].values()))
                for k, w in zip(predict[l], u):
                    update[k][l] = float(w)
        elif update_kind == "smoothing":
            for k in even:
                update[k] = dict(zip(adj[k], smoothing_update(adj[k]).tolist()))
        else:
            raise InvalidArgument(f"unknown update filter {update_kind!r}")
        specs.append(LevelSpec(odd, even, predict, update))
        labels.update({l: detail(j) for l in odd})
        labels.update({k: smooth(j) for k in even})
        active = list(even)
    return specs, labels


def _lifting_local(
    net: Network,
    n: int,
    sources: Sequence[int],
    odd: frozenset,
    predict: Weights,
    update: Weights,
    labels: dict,
    levels: Sequence[LevelSpec] = (),
) -> LocalTransform:
    bcast = _bcast_ids(net, sources)
    f = build_lifting_level(tuple(net.block(n)), bcast, odd, predict, update)
    a, b = compose_multilevel(f, levels)
    return LocalTransform(n, a, _split_broadcast(net, sources, b), labels)


def _no_broadcast(net: Network) -> CausalSets:
    return CausalSets(tuple(() for _ in range(net.n)), tuple(frozenset() for _ in range(net.n)))


def build_haarlike(
    network: Network,
    schedule: Schedule,
    causal: CausalSets | None = None,
    use_broadcast: bool = False,
    levels: int = 1,
    update: str = "ortho",
    predict: str = "average",
    childless_weight: float = 1.0,
    broadcast_use: str = "all",
) -> UnidirectionalTransform:
    """Haar-like lifting: evens forward raw data one hop, odds predict themselves.

    Odd nodes with children (or, with ``use_broadcast``, even broadcast
    sources) compute their own detail and update their children; childless
    odd nodes without such sources are predicted from their parent.  With
    ``levels > 0`` each odd node runs further levels over its children's
    smooth coefficients along a minimum spanning tree.  ``broadcast_use`` is
    ``"all"`` (any odd node reads even sources) or ``"childless"``.
    """
    if use_broadcast and causal is None:
        raise InvalidArgument("broadcast use needs causal sets")
    if broadcast_use not in ("all", "childless"):
        raise InvalidArgument(f"unknown broadcast use {broadcast_use!r}")
    net = network
    split = split_by_depth_parity(net)
    causal = causal if use_broadcast else _no_broadcast(net)

    def even_sources(n):
        if not use_broadcast:
            return []
        if broadcast_use == "childless" and net.children(n):
            return []
        return [m for m in causal.broadcast[n] if m in split.even]

    self_predicting = {n for n in split.odd if net.children(n) or even_sources(n)}
    locs = []
    for n in range(net.n):
        sources = causal.broadcast[n]
        predict_w: dict[int, dict[int, float]] = {}
        update_w: dict[int, dict[int, float]] = {}
        labels: dict[int, CoefClass] = {}
        specs: list[LevelSpec] = []
        if n in split.odd:
            if n in self_predicting:
                kids = list(net.children(n))
                nbrs = kids + even_sources(n)
                predict_w[n] = _pred_weights(predict, nbrs)
                labels[n] = detail(1)
                pvec = list(predict_w[n].values())
                for idx, c in enumerate(kids):
                    if update == "ortho":
                        w = orthogonalizing_update(pvec)[idx]
                    elif update == "smoothing":
                        w = smoothing_update([n])[0]
                    else:
                        raise InvalidArgument(f"unknown update filter {update!r}")
                    update_w[c] = {n: float(w)}
                    labels[c] = smooth(1)
                specs, more = _tree_levels(net, kids, levels, update)
                labels.update(more)
        else:
            for c in net.children(n):
                if c not in self_predicting:
                    predict_w[c] = {n: childless_weight}
                    labels[c] = detail(1)
        locs.append(_lifting_local(net, n, sources, split.odd, predict_w, update_w, labels, specs))
    name = "haar-broadcast" if use_broadcast else "haar"
    return UnidirectionalTransform(net, schedule, causal, tuple(locs), name=name, lifting=True)


def build_53like(
    network: Network,
    schedule: Schedule,
    causal: CausalSets | None = None,
    update: str = "smoothing",
    predict: str = "average",
) -> UnidirectionalTransform:
    """5/3-like lifting with neighbourhoods ``{parent} ∪ children``.

    Odd details are computed at the parent (odd roots predict themselves from
    their children); even smooths are computed where the parent's detail
    becomes available, normally the grandparent.
    """
    net = network
    split = split_by_depth_parity(net)
    sink = net.sink

    def pred_nbrs(v):
        p = int(net.parent[v])
        return ([p] if p != sink else []) + list(net.children(v))

    pvecs = {v: _pred_weights(predict, pred_nbrs(v)) for v in split.odd if pred_nbrs(v)}
    # node at which each odd detail is computed
    where = {v: (v if net.parent[v] == sink else int(net.parent[v])) for v in pvecs}

    def upd_weights(m):
        nbrs = [int(net.parent[m])] + list(net.children(m))
        if update == "smoothing":
            return dict(zip(nbrs, smoothing_update(nbrs).tolist()))
        if update == "ortho":
            out = {}
            for j in nbrs:
                pv = pvecs[j]
                u = orthogonalizing_update(list(pv.values()))
                out[j] = float(u[list(pv).index(m)])
            return out
        raise InvalidArgument(f"unknown update filter {update!r}")

    locs = []
    for g in range(net.n):
        predict_w, update_w, labels = {}, {}, {}
        for v, at in where.items():
            if at == g:
                predict_w[v] = pvecs[v]
                labels[v] = detail(1)
                for m in net.children(v):
                    update_w[m] = upd_weights(m)
                    labels[m] = smooth(1)
        locs.append(_lifting_local(net, g, (), split.odd, predict_w, update_w, labels))
    return UnidirectionalTransform(net, schedule, _no_broadcast(net), tuple(locs), name="lifting53", lifting=True)


def _edge_weights(weights, n, nodes, default):
    if weights is None:
        return [default(n, m) for m in nodes]
    if callable(weights):
        return [float(weights(n, m)) for m in nodes]
    return [float(weights.get((n, m), default(n, m))) for m in nodes]


def build_tdpcm_decoding(
    network: Network,
    schedule: Schedule,
    causal: CausalSets | None = None,
    weights=None,
) -> UnidirectionalTransform:
    """Each node differences itself against its decoded children.

    ``y(n) = x(n) - sum_c a_n(c) x(c)`` with ``x(c)`` recovered from the
    child's coefficient vector through ``A_c^{-1}``.  Default weights average
    the children.  Only leaves stay raw.
    """
    net = network
    locs: list[LocalTransform | None] = [None] * net.n
    for n in schedule.order:
        kids = list(net.children(n))
        size = int(net.subtree_size[n])
        diff = np.eye(size)
        decode = np.eye(size)
        labels = {}
        if kids:
            a_w = _edge_weights(weights, n, kids, lambda n_, m_: 1.0 / len(kids))
            for c, w in zip(kids, a_w):
                off = c - n
                diff[0, off] = -w
                ac = locs[c].a
                try:
                    inv = np.linalg.inv(ac)
                except np.linalg.LinAlgError as exc:
                    from .errors import InvertibilityError

                    raise InvertibilityError(f"A at node {c} is singular", node=c) from exc
                w_c = ac.shape[0]
                decode[off:off + w_c, off:off + w_c] = inv
            labels[n] = detail(1)
        # the product re-encodes children after extracting x(c): only row 0 changes
        a = np.eye(size)
        a[0, :] = (diff @ decode)[0, :]
        locs[n] = LocalTransform(n, a, (), labels)
    return UnidirectionalTransform(net, schedule, _no_broadcast(net), tuple(locs), name="tdpcm-decoding")


def build_tdpcm_onehop(
    network: Network,
    schedule: Schedule,
    causal: CausalSets | None = None,
    weights=None,
) -> UnidirectionalTransform:
    """Children forward raw data; the parent differences them against itself."""
    net = network
    locs = []
    for n in range(net.n):
        size = int(net.subtree_size[n])
        a = np.eye(size)
        labels = {}
        kids = list(net.children(n))
        for c, w in zip(kids, _edge_weights(weights, c_parent := n, kids, lambda n_, m_: 1.0)):
            if w != 0.0:
                a[c - n, 0] = -w
                labels[c] = detail(1)
        locs.append(LocalTransform(n, a, (), labels))
    return UnidirectionalTransform(net, schedule, _no_broadcast(net), tuple(locs), name="tdpcm-onehop", lifting=True)


def _klt_basis(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    vecs = vecs[:, np.argsort(vals)[::-1]]
    for j in range(vecs.shape[1]):
        k = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[k, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vecs.T


def build_tklt(
    network: Network,
    schedule: Schedule,
    covariance: np.ndarray,
    causal: CausalSets | None = None,
) -> UnidirectionalTransform:
    """Tree KLT: undo each child's KLT, then decorrelate the whole subtree.

    ``H_n`` is the orthonormal eigenbasis of the subtree covariance (largest
    eigenvalue first), ``G_c = H_c^{-1} = H_c^T``.
    """
    cov = np.asarray(covariance, dtype=float)
    net = network
    if cov.shape != (net.n, net.n) or not np.allclose(cov, cov.T):
        raise InvalidArgument("covariance must be a symmetric N x N matrix")
    eig = np.linalg.eigvalsh(cov)
    if eig[0] < -1e-9 * max(eig[-1], 1.0):
        raise InvalidArgument("covariance is not positive semidefinite")
    h = [None] * net.n
    locs = []
    for n in range(net.n):
        blk = net.block(n)
        h[n] = _klt_basis(cov[blk.start:blk.stop, blk.start:blk.stop])
    for n in range(net.n):
        blk = net.block(n)
        unwhiten = np.eye(len(blk))
        for c in net.children(n):
            cb = net.block(c)
            off = c - n
            unwhiten[off:off + len(cb), off:off + len(cb)] = h[c].T
        labels = {blk.start: smooth(1)}
        labels.update({k: detail(1) for k in blk if k != blk.start})
        locs.append(LocalTransform(n, h[n] @ unwhiten, (), labels))
    return UnidirectionalTransform(net, schedule, _no_broadcast(net), tuple(locs), name="tklt")


def annotate_coefficient_classes(transform: UnidirectionalTransform) -> tuple[CoefClass, ...]:
    return final_classes(transform)


def raw_forwarding_hops(transform: UnidirectionalTransform) -> np.ndarray:
    """Number of transmissions each node's coefficient makes while still raw."""
    net = transform.network
    raw = np.ones(net.n, dtype=bool)
    hops = np.zeros(net.n, dtype=int)
    for n in transform.schedule.order:
        for k, c in transform.locals[n].labels.items():
            raw[k] = c.kind == "raw"
        blk = net.block(n)
        hops[blk.start:blk.stop] += raw[blk.start:blk.stop]
    return hops


def _identity(network, schedule, causal=None, **_):
    from .transform import identity_transform

    return identity_transform(network, schedule, _no_broadcast(network))


SCHEMES: dict[str, Callable] = {
    "identity": _identity,
    "tklt": build_tklt,
    "tdpcm-decoding": build_tdpcm_decoding,
    "tdpcm-onehop": build_tdpcm_onehop,
    "lifting53": build_53like,
    "haar": lambda net, sched, causal=None, **kw: build_haarlike(net, sched, causal, use_broadcast=False, **kw),
    "haar-broadcast": lambda net, sched, causal=None, **kw: build_haarlike(net, sched, causal, use_broadcast=True, **kw),
}


def build_scheme(
    name: str,
    network: Network,
    schedule: Schedule,
    causal: CausalSets,
    *,
    covariance: np.ndarray | None = None,
    levels: int = 1,
    update: str = "ortho",
    predict: str = "average",
    broadcast_use: str = "all",
) -> UnidirectionalTransform:
    """Build a transform from its selector string."""
    if name not in SCHEMES:
        raise InvalidArgument(f"unknown scheme {name!r}; choose from {sorted(SCHEMES)}")
    if name == "tklt":
        if covariance is None:
            raise InvalidArgument("tklt needs a covariance matrix")
        return build_tklt(network, schedule, covariance, causal)
    if name == "haar":
        return build_haarlike(network, schedule, causal, False, levels, update, predict)
    if name == "haar-broadcast":
        return build_haarlike(network, schedule, causal, True, levels, update, predict, broadcast_use=broadcast_use)
    if name == "lifting53":
        return build_53like(network, schedule, causal, update=update, predict=predict)
    return SCHEMES[name](network, schedule, causal)
