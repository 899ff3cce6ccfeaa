import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gbsopt.pgraph import (Derived, GraphError, MappingFn, ParamGraph, ParamNode, affine, eval_graph,
                           grid_box, identity, pullback)


def graph(thetas, derived):
    return ParamGraph(tuple(ParamNode(*t) for t in thetas), tuple(Derived(*d) for d in derived))


def test_identity_map():
    g = graph([("t1", 1.5)], [("p1", identity("t1"))])
    assert eval_graph(g, [1.5]).tolist() == [1.5]


def test_negate_mirrored_centers():
    g = graph([("t1", 0.7)], [("za", identity("t1")), ("zb", MappingFn("negate", ("t1",)))])
    assert eval_graph(g, [0.7]).tolist() == [0.7, -0.7]


def test_affine_scale():
    g = graph([("t1", 0.55)], [("p", affine("t1", 2.0, 0.0))])
    assert eval_graph(g, [0.55])[0] == pytest.approx(1.10, abs=1e-15)


def test_pullback_identity_graph():
    g = graph([("a", 1.0), ("b", 2.0)], [("pa", identity("a")), ("pb", identity("b"))])
    np.testing.assert_array_equal(pullback(g, [0.3, -0.2]), [0.3, -0.2])


def test_pullback_sum_rule():
    g = graph([("t", 1.0)], [("p1", identity("t")), ("p2", identity("t"))])
    assert pullback(g, [0.3, 0.4])[0] == pytest.approx(0.7, abs=1e-15)


def test_pullback_exp_chain():
    g = graph([("t", 0.0)], [("p", MappingFn("exp", ("t",)))])
    assert pullback(g, [2.0])[0] == pytest.approx(2.0, abs=1e-15)


def test_pullback_frozen_is_zero():
    g = graph([("t", 1.0, True), ("u", 2.0)], [("p", identity("t")), ("q", identity("u"))])
    np.testing.assert_array_equal(pullback(g, [1.0, 1.0]), [0.0, 1.0])


def test_pullback_dimension_mismatch():
    g = graph([("t", 1.0)], [("p", identity("t"))])
    with pytest.raises(GraphError):
        pullback(g, [1.0, 2.0])


def test_cycle_detected():
    with pytest.raises(GraphError, match="cycle"):
        graph([("t", 1.0)], [("a", MappingFn("sum", ("t", "b"))), ("b", identity("a"))])


def test_unknown_node():
    with pytest.raises(GraphError, match="unknown"):
        graph([("t", 1.0)], [("a", identity("nope"))])


def test_duplicate_id():
    with pytest.raises(GraphError, match="duplicate"):
        graph([("t", 1.0)], [("t", identity("t"))])


def test_non_positive_exponent():
    g = graph([("t", 1.0)], [("a", identity("t"), "alpha")])
    with pytest.raises(GraphError, match="non-positive"):
        eval_graph(g, [-0.1])


def test_unknown_kind():
    with pytest.raises(GraphError):
        MappingFn("log", ("t",))


def test_theta_length_checked():
    g = graph([("t", 1.0)], [("a", identity("t"))])
    with pytest.raises(GraphError):
        eval_graph(g, [1.0, 2.0])


def test_composition_order_independent():
    # derived entries listed before their inputs still evaluate
    g = graph([("t", 0.5)], [("b", affine("a", 3.0, 1.0)), ("a", MappingFn("exp", ("t",)))])
    p = eval_graph(g, [0.5])
    assert p[1] == pytest.approx(math.exp(0.5))
    assert p[0] == pytest.approx(3 * math.exp(0.5) + 1)


def test_determinism_bit_identical():
    g = graph([("t", 0.3), ("u", 1.7)], [("p", MappingFn("product", ("t", "u"))),
                                         ("q", MappingFn("exp", ("p",)))])
    a = eval_graph(g, [0.3, 1.7])
    b = eval_graph(g, [0.3, 1.7])
    assert a.tobytes() == b.tobytes()


def test_round_trip_dict():
    g = graph([("t", 0.3, False, "alpha"), ("u", 1.7)],
              [("p", MappingFn("sum", ("t", "u")), "alpha"), ("q", affine("p", 2.0, -1.0))])
    assert ParamGraph.from_dict(g.to_dict()) == g


def test_grid_box_1x2x1():
    L = ParamNode("L", 1.4)
    pts = grid_box(1, 2, 1, L)
    assert len(pts) == 12
    g = ParamGraph((L,), tuple(d for t in pts for d in t))
    p, J = g.jacobian([1.4])
    xyz = p.reshape(-1, 3)
    assert set(np.round(xyz[:, 1], 12)) == {-1.4, 0.0, 1.4}
    assert set(np.round(xyz[:, 0], 12)) == {-0.7, 0.7}
    assert set(np.round(xyz[:, 2], 12)) == {-0.7, 0.7}
    k = [n for n, r in enumerate(xyz) if np.allclose(r, [0.7, 1.4, -0.7])][0]
    np.testing.assert_allclose(J.reshape(-1, 3)[k], [0.5, 1.0, -0.5], atol=1e-15)


def test_grid_box_degenerate():
    pts = grid_box(0, 0, 0, ParamNode("L", 1.0), origin=(0.1, 0.2, 0.3))
    g = ParamGraph((ParamNode("L", 1.0),), pts[0])
    np.testing.assert_allclose(g.evaluate(), [0.1, 0.2, 0.3])


def test_grid_box_bad_spacing():
    with pytest.raises(GraphError):
        grid_box(1, 1, 1, ParamNode("L", 0.0))


KIND_FACTORY = {
    "identity": lambda: MappingFn("identity", ("t0",)),
    "affine": lambda: MappingFn("affine", ("t0",), (-1.3, 0.4)),
    "negate": lambda: MappingFn("negate", ("t0",)),
    "exp": lambda: MappingFn("exp", ("t0",)),
    "product": lambda: MappingFn("product", ("t0", "t1", "t2")),
    "sum": lambda: MappingFn("sum", ("t0", "t1", "t2")),
}


@pytest.mark.parametrize("kind", sorted(KIND_FACTORY))
@settings(max_examples=25, deadline=None)
@given(theta=st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3),
       w=st.lists(st.floats(-2.0, 2.0), min_size=2, max_size=2))
def test_pullback_matches_finite_difference(kind, theta, w):
    # two-level composition so chain products are exercised too
    g = ParamGraph(tuple(ParamNode(f"t{i}", v) for i, v in enumerate(theta)),
                   (Derived("a", KIND_FACTORY[kind]()), Derived("b", MappingFn("product", ("a", "t1")))))
    theta = np.array(theta)
    w = np.array(w)
    an = pullback(g, w, theta)
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (w @ eval_graph(g, theta + e) - w @ eval_graph(g, theta - e)) / (2 * h)
        assert abs(an[i] - fd) <= 1e-8 * max(1.0, abs(fd))
