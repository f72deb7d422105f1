import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from garside_nf.core import CanonicalForm
from garside_nf.errors import DomainError, UsageError
from garside_nf.normalform import normal_form_linear, penetration_distance, word_from_indices
from garside_nf.sampling import SampleSet, brute_force_elements, make_sample
from garside_nf.stats import (
    distribution_distance, fmt, pd_stats, position_stats, power_fit,
    read_csv_body, sample_stable_region, stable_region, stable_region_csv, supported_positions,
    with_metadata,
)
from garside_nf.structures import build_classical, build_g1


def best_interval(y, w_min):
    """Brute-force arg-min of range/width, widest then leftmost on ties."""
    best = None
    for p1 in range(len(y)):
        for p2 in range(p1 + w_min - 1, len(y)):
            seg = y[p1:p2 + 1]
            key = ((max(seg) - min(seg)) / (p2 - p1), -(p2 - p1), p1)
            if best is None or key < best:
                best = key
    return best[2], best[2] - best[1]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=4, max_size=25), st.integers(2, 4))
def test_stable_region_search_matches_brute_force(values, w_min):
    y = [float(v) for v in values]
    r = stable_region(y, w_min, first_position=0)
    p1, p2 = best_interval(y, w_min)
    assert math.isclose(r.ratio, (max(y[p1:p2 + 1]) - min(y[p1:p2 + 1])) / (p2 - p1))
    if not r.empty:
        assert (r.start, r.end) == (p1, p2)


def test_constant_function_is_stable_everywhere():
    r = stable_region([3.0] * 101, 10, first_position=0)
    assert (r.start, r.end) == (0, 100)
    assert r.accepted and r.ratio == 0


@pytest.mark.parametrize("f", [np.arange(50.0), -np.arange(50.0) ** 2, np.exp(np.arange(30.0) / 5)])
def test_monotone_function_is_rejected(f):
    assert stable_region(f, 10).empty


def test_noisy_plateau_is_found():
    rng = np.random.default_rng(0)
    y = np.concatenate([np.linspace(0, 5, 20), 5 + 0.01 * rng.standard_normal(200)])
    r = stable_region(y, 10)
    assert not r.empty and r.start >= 20


def test_stable_region_needs_enough_positions():
    with pytest.raises(DomainError):
        stable_region([1.0] * 5, 10)
    with pytest.raises(UsageError):
        stable_region([1.0] * 5, 1)


def test_single_element_stats_are_its_factor_lengths():
    g = build_classical(4)
    x = normal_form_linear(word_from_indices(g, [0, 1, 2, 0, 1, 0, 2, 2, 1]))
    ps = position_stats([x])
    assert list(ps.mean_len) == [g.length[f] for f in x.factors]
    right = position_stats([x], "right")
    assert list(right.mean_len) == [g.length[f] for f in reversed(x.factors)]
    for i, f in enumerate(x.factors):
        assert [a for a in range(3) if ps.start_freq[i, a]] == \
               [a for a, atom in enumerate(g.atoms) if atom in g.starting_set(f)]


def test_position_stats_merge_equals_union():
    g = build_classical(4)
    s = make_sample(g, "urb", 30, 40, seed=3)
    whole = position_stats(s)
    parts = position_stats(s.items[:13], g=g).merge(position_stats(s.items[13:], g=g))
    assert parts == whole
    assert whole.counts[0] == sum(1 for x in s.items if x.factors)


def test_supported_positions_and_sample_region():
    g = build_classical(3)
    items = [CanonicalForm(g, 0, (g.atoms[0],) * n) for n in (20, 25, 30)]
    ps = position_stats(items)
    assert supported_positions(ps, 1.0) == 20
    assert supported_positions(ps, 0.5) == 25
    r = sample_stable_region(ps, w_min=10)
    assert (r.start, r.end) == (1, 20)
    with pytest.raises(DomainError):
        sample_stable_region(ps, w_min=21)


def test_pd_stats_histogram_is_a_distribution():
    g = build_classical(4)
    s = make_sample(g, "urb", 40, 60, seed=1)
    p = pd_stats(s)
    assert math.isclose(sum(p.histogram.values()), 1.0)
    assert p.max_pd == max(d for d, v in p.histogram.items() if v > 0)
    brute = [penetration_distance(x, a) for x in s.items for a in g.atoms]
    assert math.isclose(p.mean_pd, sum(brute) / len(brute))
    merged = pd_stats(s.items[:20], g).merge(pd_stats(s.items[20:], g))
    assert merged.hist == p.hist


def test_g1_pd_is_bounded_in_samples():
    g = build_g1()
    for method in ("urb", "word"):
        assert pd_stats(make_sample(g, method, 300, 100, seed=9)).max_pd <= 2


def test_distribution_distance():
    g = build_classical(4)
    a = make_sample(g, "urb", 30, 200, seed=1)
    b = make_sample(g, "urb", 30, 200, seed=2)
    assert distribution_distance(a, a, 2) == 0
    d = distribution_distance(a, b, 2)
    assert 0 < d <= 1
    assert d == distribution_distance(b, a, 2)


def test_power_fit_recovers_exponent():
    fit = power_fit([(n, 3.0 * n ** 0.75) for n in (5, 10, 20, 40)])
    assert math.isclose(fit.c, 0.75, rel_tol=1e-9)
    assert fit.residual_rms < 1e-9
    with pytest.raises(DomainError):
        power_fit([(1, 1), (2, 2)])
    with pytest.raises(DomainError):
        power_fit([(1, 1), (2, 0), (3, 1)])


def test_csv_formats():
    g = build_classical(3)
    ps = position_stats([CanonicalForm(g, 0, (g.atoms[0], g.atoms[1]))])
    assert ps.mean_len_csv() == "pos,LEN\n1,1\n2,1\n"
    assert ps.freq_csv("start").splitlines()[0] == "pos,gen1,gen2"
    text = with_metadata({"seed": 1}, ps.mean_len_csv())
    assert text.startswith("# {")
    assert read_csv_body(text) == [["pos", "LEN"], ["1", "1"], ["2", "1"]]
    empty = stable_region([1.0, 2.0, 3.0, 4.0], 2)
    assert stable_region_csv([(64, 3, "urb", empty)]) == "k,n,method,start,end\n64,3,urb,,\n"
    assert fmt(1 / 3) == "0.333333" and fmt(7) == "7" and fmt(1e-7) == "1e-07"


def test_distribution_distance_edge_cases():
    g = build_classical(3)
    a = SampleSet("urb", g, 1, 0, [CanonicalForm(g, 0, (g.atoms[0],))])
    b = SampleSet("urb", g, 1, 0, [CanonicalForm(g, 0, (g.atoms[1],))])
    assert distribution_distance(a, b, 1) == 1
    other = build_classical(4)
    c = SampleSet("urb", other, 1, 0, [CanonicalForm(other, 0, (other.atoms[0],))])
    with pytest.raises(UsageError):
        distribution_distance(a, c, 1)


# seeded regression baseline: URB on B3, i = 3, k = 64 (seed 1) vs k = 128 (seed 2)
B3_TV_BASELINE = 0.0115


def test_distribution_distance_regression():
    g = build_classical(3)
    a = make_sample(g, "urb", 64, 10_000, seed=1)
    b = make_sample(g, "urb", 128, 10_000, seed=2)
    assert distribution_distance(a, b, 3) == pytest.approx(B3_TV_BASELINE, abs=1e-12)


def test_b3_mean_pd_by_enumeration():
    g = build_classical(3)
    elements = brute_force_elements(g, 3)
    assert len(elements) == 7
    pds = [penetration_distance(x, a) for x in elements for a in g.atoms]
    p = pd_stats(elements, g)
    assert Fraction(sum(pds), len(pds)) == Fraction(p.mean_pd).limit_denominator(100)
    assert pd_stats([CanonicalForm.trivial(g)], g).histogram == {0: 1.0}
