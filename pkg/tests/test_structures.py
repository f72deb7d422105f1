import itertools
import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from garside_nf.errors import CapacityError, ParseError, UsageError
from garside_nf.structures import (
    G1_TRANSITION, build_bkl, build_classical, build_g1, build_structure,
    g1_transition_matrix, load_table_structure, noncrossing_partitions, validate_structure,
)

from conftest import SMALL, structure


def catalan(n):
    return math.comb(2 * n, n) // (n + 1)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_classical_size_is_factorial(n):
    assert build_classical(n).size == math.factorial(n)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_bkl_size_is_catalan(n):
    assert build_bkl(n).size == catalan(n)
    assert build_bkl(n).num_atoms == n * (n - 1) // 2


@pytest.mark.parametrize("n", range(1, 8))
def test_noncrossing_partition_count(n):
    assert sum(1 for _ in noncrossing_partitions(range(n))) == catalan(n)


def test_g1_simples():
    g = build_g1()
    assert g.size == 8
    assert sorted(g.label(s) for s in g.simples) == sorted(["1", "A", "B", "AB", "BA", "BB", "BAB", "BBB"])
    assert g.label(g.delta) == "BBB"
    assert g.delta_length == 6
    # ABA and BB name the same simple
    A, B = (g.simple_from_label(x) for x in "AB")
    assert g.word_to_simple([A, B, A]) == g.word_to_simple([B, B])
    assert [g.atom_weight(a) for a in g.atoms] == [1, 2]


@pytest.mark.parametrize("name", SMALL + ["classical5", "bkl5", "bkl2"])
def test_validation_passes(name):
    report = validate_structure(structure(name))
    assert report.ok, [c.axiom for c in report.failures()]


def test_g1_transition_table():
    assert g1_transition_matrix(build_g1()) == [list(r) for r in G1_TRANSITION]


def meet_oracle(g, s, t):
    common = [d for d in g.simples if g.left_divides(d, s) and g.left_divides(d, t)]
    top = max(common, key=lambda d: g.length[d])
    assert all(g.left_divides(d, top) for d in common)
    return top


@pytest.mark.parametrize("name", ["classical4", "bkl4", "g1"])
def test_meet_matches_brute_force(name):
    g = structure(name)
    for s, t in itertools.product(g.simples, repeat=2):
        assert g.meet(s, t) == meet_oracle(g, s, t)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_classical_left_weighting_via_descents(n):
    # x|y is left-weighted iff every left descent of y is a right descent of x
    g = build_classical(n)
    for x, y in itertools.product(g.simples, repeat=2):
        p, q = g.labels[x], g.labels[y]
        qinv = [0] * n
        for i, v in enumerate(q):
            qinv[v] = i
        right_desc = {i for i in range(n - 1) if p[i] > p[i + 1]}
        left_desc = {i for i in range(n - 1) if qinv[i] > qinv[i + 1]}
        assert g.is_left_weighted(x, y) == (left_desc <= right_desc)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_classical_tau_reverses_generators(n):
    g = build_classical(n)
    assert g.central_power == 2
    for i, a in enumerate(g.atoms):
        assert g.tau(a) == g.atoms[n - 2 - i]


@pytest.mark.parametrize("n", [3, 4, 5])
def test_bkl_tau_rotates_bands(n):
    g = build_bkl(n)
    assert g.central_power == n
    pairs = g.band_pairs
    for (s, t), a in zip(pairs, g.atoms):
        img = tuple(sorted(((s + 1) % n, (t + 1) % n)))
        assert g.tau(a) == g.atoms[pairs.index(img)]


def test_left_weighted_pair_keeps_the_product(small):
    g = small
    for x, y in itertools.product(g.simples, repeat=2):
        a, b = g.left_weighted_pair(x, y)
        m = g.ldiv(x, a)
        assert m >= 0 and g.mul(m, b) == y
        assert a == g.delta or g.is_left_weighted(a, b)
        assert g.length[a] + g.length[b] == g.length[x] + g.length[y]


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_meet_lattice_laws_classical6(data):
    g = structure("classical6")
    pick = st.integers(0, g.size - 1)
    s, t, u = data.draw(pick), data.draw(pick), data.draw(pick)
    assert g.meet(s, t) == g.meet(t, s)
    assert g.meet(g.meet(s, t), u) == g.meet(s, g.meet(t, u))
    assert g.meet(s, s) == s
    assert g.meet(s, g.delta) == s and g.meet(s, g.identity) == g.identity


def test_lazy_classical_structure_matches_table():
    lazy, full = build_classical(5, table=False), build_classical(5)
    assert not lazy.complete
    with pytest.raises(CapacityError):
        lazy.size
    for p in itertools.islice(itertools.permutations(range(5)), 40):
        x, y = lazy.simple_from_perm(p), full.simple_from_perm(p)
        assert lazy.length[x] == full.length[y]
        assert lazy.start_mask[x] == full.start_mask[y]


def test_build_structure_dispatch_and_errors(tmp_path):
    assert build_structure("Classical", 3).name == "classical3"
    assert build_structure("g1").name == "g1"
    with pytest.raises(UsageError):
        build_structure("classical")
    with pytest.raises(UsageError):
        build_structure("nope", 3)
    with pytest.raises(UsageError):
        build_bkl(1)
    with pytest.raises(CapacityError):
        build_classical(12, table=True)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        load_table_structure(bad)


def test_table_structure_json_round_trip(tmp_path):
    g = build_g1()
    path = tmp_path / "g1.json"
    path.write_text(json.dumps(g.to_json()))
    h = load_table_structure(path)
    assert h.size == g.size
    assert validate_structure(h).ok
    assert g1_transition_matrix(h) == g1_transition_matrix(g)
