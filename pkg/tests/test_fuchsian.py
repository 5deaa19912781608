import json
import math

import numpy as np
import pytest

from hypdet.errors import EllipticElement, InvalidDecomposition
from hypdet.fuchsian import (
    FenchelNielsen,
    MobiusMatrix,
    build_surface_group,
    fn_from_json,
    fn_to_json,
    generators_from_json,
    group_to_json,
    pants_generators,
    standard_pants_graph,
    trace_to_length,
)

from conftest import make_fn


def test_trace_to_length_boundary_and_inverse():
    assert trace_to_length(2.0) == 0.0
    assert trace_to_length(-2.0) == 0.0
    assert abs(trace_to_length(2.0 * math.cosh(1.0)) - 2.0) <= 1e-9
    # arccosh oracle: 2*acosh(1.5) = 1.9248473002384139 (mpmath, 20 digits)
    assert abs(trace_to_length(-3.0) - 1.9248473002384139) <= 1e-12


def test_trace_to_length_rejects_elliptic():
    with pytest.raises(EllipticElement):
        trace_to_length(1.3)


@pytest.mark.parametrize("ls", [(1.0, 1.0, 1.0), (2.0, 2.0, 2.0), (1.0, 2.0, 3.0)])
def test_pants_generators_postconditions(ls):
    x1, x2, x3 = pants_generators(*ls)
    prod = x1 @ x2 @ x3
    residual = max(
        abs(prod.a - 1.0), abs(prod.b), abs(prod.c), abs(prod.d - 1.0),
        abs(prod.a + 1.0), abs(prod.d + 1.0),
    )
    # product is identity in PSL(2,R): +-I both fine
    signed = min(
        max(abs(prod.a - s), abs(prod.b), abs(prod.c), abs(prod.d - s))
        for s in (1.0, -1.0)
    )
    assert signed <= 1e-10, residual
    for m, l in zip((x1, x2, x3), ls):
        assert abs(trace_to_length(m.trace()) - l) <= 1e-9


def test_pants_generators_traces_pinned():
    x1, _, _ = pants_generators(1.0, 1.0, 1.0)
    assert abs(abs(x1.trace()) - 2.0 * math.cosh(0.5)) <= 1e-10
    y1, _, _ = pants_generators(2.0, 2.0, 2.0)
    assert abs(abs(y1.trace()) - 2.0 * math.cosh(1.0)) <= 1e-10


def test_mobius_inverse_and_det():
    m = MobiusMatrix(2.0, 3.0, 1.0, 2.0)
    assert abs(m.a * m.d - m.b * m.c - 1.0) <= 1e-12
    ident = m @ m.inverse()
    assert abs(ident.a - 1.0) <= 1e-10 and abs(ident.b) <= 1e-10


def test_conjugation_and_inversion_invariance():
    rng = np.random.default_rng(11)
    g1, g2, _ = pants_generators(1.7, 2.3, 2.9)
    words = [g1 @ g2, g2 @ g1 @ g1, g1 @ g2 @ g1.inverse() @ g2]
    for m in words:
        l = trace_to_length(m.trace())
        assert abs(trace_to_length(m.inverse().trace()) - l) <= 1e-9
        for _ in range(3):
            a, b, c = rng.normal(size=3)
            d = (1.0 + b * c) / a if abs(a) > 0.1 else 1.0
            if abs(a) <= 0.1:
                a, b, c = 1.0, b, 0.0
            conj = MobiusMatrix(a, b, c, d)
            t = (conj @ m @ conj.inverse()).trace()
            assert abs(trace_to_length(t) - l) <= 1e-8


def test_fn_validation_errors():
    with pytest.raises(InvalidDecomposition):
        FenchelNielsen(2, ((0, 1), (0, 1)), (2.0, 2.0), (0.0, 0.0)).validate()
    with pytest.raises(InvalidDecomposition):
        make_fn(2, (2.0, -1.0, 2.0), (0.0, 0.0, 0.0))
    # near-cusp floor: conditioning of the gluing blows up below 1e-4
    with pytest.raises(InvalidDecomposition):
        make_fn(2, (5e-5, 2.0, 2.0), (0.0, 0.0, 0.0))
    with pytest.raises(InvalidDecomposition):
        make_fn(2, (2.0, 2.0, 2.0), (0.0, math.inf, 0.0))


def test_standard_pants_graph_shapes():
    for g in (2, 3, 4, 5):
        edges = standard_pants_graph(g)
        assert len(edges) == 3 * g - 3
        degree = {}
        for (u, v) in edges:
            degree[u] = degree.get(u, 0) + 1
            degree[v] = degree.get(v, 0) + 1
        assert set(degree.values()) == {3}
        assert len(degree) == 2 * g - 2


def test_fn_json_round_trip():
    fn = make_fn(3, (1.5, 2.0, 2.5, 3.0, 1.0, 2.0), (0.2, 0.4, 0.0, 1.0, 0.3, 0.8))
    back = fn_from_json(fn_to_json(fn))
    assert back.genus == fn.genus
    assert back.edges == fn.edges
    assert back.lengths == fn.lengths
    assert back.twists == fn.twists


def test_fn_json_malformed():
    with pytest.raises(InvalidDecomposition):
        fn_from_json("{broken")
    with pytest.raises(InvalidDecomposition):
        fn_from_json('{"genus": 2, "edges": [[0, 1]], "lengths": [1], "twists": [0]}')


def test_build_surface_group_invariants(golden_group):
    grp = golden_group
    assert grp.genus == 2
    assert abs(grp.area - 4.0 * math.pi) <= 1e-12
    assert grp.relator_residual <= 1e-8
    assert len(grp.generators) == 5 * 2 - 4
    for m in grp.generators:
        assert abs(m.trace()) > 2.0
    # each pants curve is realized at its FN length
    for e, want in enumerate(grp.fn.lengths):
        got = trace_to_length(grp.curve_elements[e].trace())
        assert abs(got - want) <= 1e-8


def test_group_relator_residual_across_inputs():
    for genus, lengths, twists in [
        (2, (1.0, 1.0, 1.0), (0.0, 0.0, 0.0)),
        (2, (3.0, 0.4, 1.7), (0.9, -1.3, 4.0)),
        (3, (2.0,) * 6, (0.5,) * 6),
        (4, (1.8,) * 9, (0.0,) * 9),
    ]:
        grp = build_surface_group(make_fn(genus, lengths, twists))
        assert grp.relator_residual <= 1e-8, (genus, lengths)


def test_discreteness_smoke_random_words():
    grp = build_surface_group(make_fn(2, (2.0, 2.0, 2.0), (0.3, 0.7, 1.1)))
    gens = [m.mat for m in grp.generators]
    gens += [np.linalg.inv(m) for m in gens]
    rng = np.random.default_rng(5)
    for _ in range(200):
        word = rng.integers(0, len(gens), size=rng.integers(1, 13))
        m = np.eye(2)
        for k in word:
            m = m @ gens[k]
        tr = abs(m[0, 0] + m[1, 1])
        assert tr >= 2.0 - 1e-9


def test_generator_json_round_trip(golden_group):
    text = group_to_json(golden_group)
    obj = json.loads(text)
    assert {"a", "b", "c", "d"} <= set(obj["generators"][0].keys())
    gens = generators_from_json(text)
    assert len(gens) == len(golden_group.generators)
    for got, want in zip(gens, golden_group.generators):
        assert abs(got.trace() - want.trace()) <= 1e-12
