import json

import numpy as np
import pytest
from scipy.sparse.csgraph import dijkstra

from enroute.errors import InvalidArgument, TopologyError
from enroute.topology import (
    RadioModel,
    build_spt,
    derive_broadcast_links,
    euclidean_weight,
    network_from_json,
    network_from_parent,
    network_to_json,
    place_nodes,
    preorder_renumber,
    random_network,
    tree_queries,
)

from conftest import make_network


def test_place_nodes_bounds_and_determinism():
    one = place_nodes(1, 600, 3)
    assert one.shape == (2, 2) and np.all((one >= 0) & (one <= 600))
    assert np.array_equal(place_nodes(50, 600, 7), place_nodes(50, 600, 7))
    assert np.allclose(place_nodes(5, 600, 7)[-1], [300, 300])
    with pytest.raises(InvalidArgument):
        place_nodes(0, 600, 1)


def test_place_nodes_mean_position():
    means = np.array([place_nodes(50, 600, s)[:-1].mean(0) for s in range(100)])
    assert np.all(np.abs(means.mean(0) / 600 - 0.5) < 0.15)


def test_spt_forced_chain():
    pos = np.array([[0.0, 0], [10, 0], [20, 0]])
    parent = build_spt(pos, 0, lambda i, j: np.linalg.norm(pos[i] - pos[j]) <= 11)
    assert parent.tolist() == [-1, 0, 1]


def test_spt_matches_dijkstra_oracle():
    rng = np.random.default_rng(4)
    for _ in range(20):
        pos = rng.uniform(0, 100, size=(8, 2))
        d = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
        r = 45.0
        adj = np.where((d <= r) & (d > 0), d, 0.0)
        oracle = dijkstra(adj, directed=False, indices=0)
        if not np.all(np.isfinite(oracle)):
            continue
        parent = build_spt(pos, 0, lambda i, j: d[i, j] <= r, euclidean_weight)
        for v in range(1, 8):
            length, u = 0.0, v
            while u != 0:
                length += d[u, parent[u]]
                u = parent[u]
            assert length == pytest.approx(oracle[v], rel=1e-9)


def test_spt_tie_goes_to_lower_index():
    pos = np.array([[0.0, 0.0], [5, 5], [5, -5], [10, 0]])
    reach = lambda i, j: {i, j} != {0, 3}
    assert build_spt(pos, 0, reach)[3] == 1


def test_spt_disconnected_names_node():
    pos = np.array([[0.0, 0], [1, 0], [100, 0]])
    with pytest.raises(TopologyError) as err:
        build_spt(pos, 0, lambda i, j: np.linalg.norm(pos[i] - pos[j]) < 5)
    assert err.value.node == 2


def test_broadcast_links_chain_variable_range_empty():
    pos = np.array([[10.0, 0], [20, 0], [0, 0]])
    assert derive_broadcast_links(pos, np.array([2, 0]), RadioModel.variable()) == ()


def test_broadcast_link_nearer_than_parent():
    # node 0 talks to the sink 5 m away; node 1 sits 4 m from node 0 but routes elsewhere
    pos = np.array([[0.0, 0], [4, 0], [0, 5]])
    links = derive_broadcast_links(pos, np.array([2, 2]), RadioModel.variable())
    assert [l for l in links if l[0] == 0] == [(0, 1)]


def test_broadcast_links_match_bruteforce():
    net = random_network(50, radio=RadioModel.fixed(150), seed=11)
    expect = set()
    for m in range(net.n):
        for l in range(net.n):
            if l != m and net.parent[m] != l and net.parent[l] != m and net.distance(m, l) <= 150 + 1e-6:
                expect.add((m, l))
    assert set(net.broadcast) == expect


def test_preorder_contiguity_random():
    for s in range(10):
        net = random_network(50, seed=s)
        for v in range(net.n):
            d = list(net.descendants(v))
            assert d == list(range(v + 1, v + net.subtree_size[v]))
            for m in d:
                assert net.is_ancestor(v, m)


def test_preorder_star_and_chain():
    # hub 4 under the sink 0, leaves 1..3 hang off the hub
    perm, par = preorder_renumber([-1, 4, 4, 4, 0])
    assert perm.tolist() == [4, 1, 2, 3, 0] and par.tolist() == [4, 0, 0, 0]
    perm, par = preorder_renumber([1, 2, -1])
    assert par.tolist() == [2, 0]


def test_tree_queries():
    net = make_network([-1, 0, 1, 0, 3])
    q = tree_queries(net, 2)
    assert q.descendants == frozenset() and q.depth == 3
    root = tree_queries(net, 0)
    assert root.ancestors == frozenset({net.sink})
    assert root.children_k == {1: frozenset({1, 3}), 2: frozenset({2, 4})}
    total = sum(len(tree_queries(net, r).descendants) + 1 for r in net.roots())
    assert total == net.n
    with pytest.raises(InvalidArgument):
        tree_queries(net, 7)


def test_network_json_round_trip():
    net = random_network(20, radio=RadioModel.fixed(200), seed=2)
    back = network_from_json(network_to_json(net))
    assert np.array_equal(back.parent, net.parent) and back.broadcast == net.broadcast
    assert json.loads(network_to_json(net))["sink"] == net.sink


def test_network_from_parent_renumbers():
    pos = np.array([[0.0, 0], [1, 0], [2, 0], [3, 0]])
    net = network_from_parent(pos, [1, 3, 1, -1])
    assert net.parent.tolist() == [3, 0, 0]


def test_broadcast_excludes_tree_edges():
    net = random_network(40, radio=RadioModel.fixed(200), seed=3)
    for m, l in net.broadcast:
        assert net.parent[m] != l and net.parent[l] != m
