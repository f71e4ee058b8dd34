import numpy as np
import pytest

from enroute.errors import InvertibilityError, ValidationError
from enroute.transform import (
    RAW,
    LocalTransform,
    Trace,
    UnidirectionalTransform,
    assemble_global_matrix,
    decode_epochs,
    detail,
    encode_epoch,
    encode_epochs,
    global_step,
    identity_transform,
    transform_from_json,
    transform_to_json,
    validate,
    verify_critical_sampling,
    verify_invertibility,
)

from conftest import random_setups


def five_node_transform(net, sched, causal, rng):
    """Arbitrary matrices in the five-node example's shapes."""
    a4, b4 = rng.normal(size=(2, 2)), rng.normal(size=(2, 1))
    a2, b2 = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    a1 = rng.normal(size=(5, 5))
    locs = (
        LocalTransform(0, a1),
        LocalTransform(1, a2, ((3, b2),), {1: detail(1)}),
        LocalTransform(2, np.eye(1)),
        LocalTransform(3, a4, ((2, b4),)),
        LocalTransform(4, np.eye(1)),
    )
    return UnidirectionalTransform(net, sched, causal, locs), (a1, a2, b2, a4, b4)


def test_five_node_global_product_structure(five_node):
    net, sched, causal = five_node
    t, (a1, a2, b2, a4, b4) = five_node_transform(net, sched, causal, np.random.default_rng(0))
    c3 = np.eye(5)
    c3[3:5, 2:3] = b4
    c3[3:5, 3:5] = a4
    c4 = np.eye(5)
    c4[1:3, 1:3] = a2
    c4[1:3, 3:5] = b2
    assert np.allclose(global_step(t, 2), np.eye(5)) and np.allclose(global_step(t, 4), np.eye(5))
    assert np.array_equal(global_step(t, 3), c3)
    assert np.array_equal(global_step(t, 1), c4)
    assert np.allclose(assemble_global_matrix(t), a1 @ c4 @ c3, rtol=1e-12, atol=1e-12)
    pattern = (np.abs(c4 @ c3) > 0).astype(int)
    assert pattern[0].tolist() == [1, 0, 0, 0, 0]
    assert pattern[:, 0].tolist() == [1, 0, 0, 0, 0]
    assert pattern[3:, :3].tolist() == [[0, 0, 1], [0, 0, 1]]


def test_encode_matches_global_and_round_trips(five_node):
    net, sched, causal = five_node
    rng = np.random.default_rng(1)
    t, _ = five_node_transform(net, sched, causal, rng)
    x = rng.normal(size=(7, 5))
    y = encode_epochs(t, x)
    assert np.allclose(y, x @ assemble_global_matrix(t).T, rtol=1e-12, atol=1e-12)
    assert np.allclose(decode_epochs(t, y), x, atol=1e-9)
    single = encode_epoch(t, x[0])
    assert np.allclose(single.values, y[0]) and single.classes[1] == detail(1) and single.classes[0] == RAW


def test_determinant_product(five_node):
    net, sched, causal = five_node
    t, _ = five_node_transform(net, sched, causal, np.random.default_rng(2))
    rep = verify_invertibility(t)
    assert rep.ok
    assert np.linalg.det(assemble_global_matrix(t)) == pytest.approx(np.prod(rep.dets), rel=1e-9)


def test_singular_local_matrix_detected(five_node):
    net, sched, causal = five_node
    t, _ = five_node_transform(net, sched, causal, np.random.default_rng(3))
    locs = list(t.locals)
    locs[3] = LocalTransform(3, np.array([[1.0, 2.0], [2.0, 4.0]]), locs[3].broadcast)
    bad = UnidirectionalTransform(net, sched, causal, tuple(locs))
    rep = verify_invertibility(bad)
    assert not rep.ok and rep.offending == (3,)
    with pytest.raises(InvertibilityError) as err:
        decode_epochs(bad, np.ones(5))
    assert err.value.node == 3


def test_validation_rejects_bad_shapes_and_sources(five_node):
    net, sched, causal = five_node
    t, _ = five_node_transform(net, sched, causal, np.random.default_rng(4))
    locs = list(t.locals)
    locs[1] = LocalTransform(1, np.eye(3))
    with pytest.raises(ValidationError):
        validate(UnidirectionalTransform(net, sched, causal, tuple(locs)))
    locs = list(t.locals)
    locs[0] = LocalTransform(0, np.eye(5), ((2, np.ones((5, 1))),))
    with pytest.raises(ValidationError):
        validate(UnidirectionalTransform(net, sched, causal, tuple(locs)))
    with pytest.raises(ValidationError):
        encode_epochs(t, np.ones(4))


def test_identity_and_critical_sampling():
    for net, sched, causal in random_setups(6, seed=9):
        t = identity_transform(net, sched, causal)
        x = np.arange(net.n, dtype=float)
        assert np.array_equal(encode_epochs(t, x), x)
        assert verify_critical_sampling(t)


def test_trace_records_packets(five_node):
    net, sched, causal = five_node
    t, _ = five_node_transform(net, sched, causal, np.random.default_rng(5))
    tr = Trace()
    encode_epochs(t, np.ones((3, 5)), tr)
    assert [p[0] for p in tr.packets] == list(sched.order)
    assert tr.packets[-1][1].shape == (5, 3)
    assert tr.classes[3] == (detail(1), RAW)
    assert tr.changed[0] == ()


def test_json_round_trip(five_node):
    net, sched, causal = five_node
    t, _ = five_node_transform(net, sched, causal, np.random.default_rng(6))
    back = transform_from_json(transform_to_json(t), net, sched, causal)
    assert np.allclose(assemble_global_matrix(back), assemble_global_matrix(t))
    assert back.locals[1].labels == {1: detail(1)}
