"""
Test Orbit Explorer

Word enumeration, multiplier separation, orbit semi-decisions and the
disjoint-orbit certificates on the demo and richer pairs.
"""

import itertools
import sys
from pathlib import Path

import numpy as np
import pytest

# Add modules to path
sys.path.insert(0, str(Path(__file__).parent))

from modules.config import TOLERANCES, HyperbolicSettings, load_run_config
from modules.orbit_explorer import (
    MultiplierGroup,
    OrbitVerdict,
    cell_of,
    certificate_rows,
    disjoint_hyperbolic_orbits,
    enumerate_words,
    explore_orbit,
    find_hyperbolic,
    multiplier_separation,
    same_orbit,
    separation_margin,
)
from modules.pseudogroup_engine import analytic_map, apply, element_derivative, pair_from_config
from modules.word_algebra import FREE, Orders, format_word, make_reduced

ROOT = Path(__file__).parent
DEMO = ROOT / "config" / "config.yaml"
FIXTURES = ROOT / "config" / "fixtures"


def load_pair(path: Path):
    cfg = load_run_config(str(path))
    return pair_from_config(cfg), cfg


def texts(words):
    return [format_word(w) for w in words]


# ===========================================
# ENUMERATION
# ===========================================
def test_enumerate_single_syllables():
    assert set(texts(enumerate_words(FREE, 1, 1))) == {"a", "a^-1", "b", "b^-1"}
    assert set(texts(enumerate_words(Orders(2, 3), 1, 5))) == {"a", "b", "b^2"}


def test_enumeration_matches_brute_force():
    words = list(enumerate_words(FREE, 2, 2))
    assert len(words) == 40
    assert len(set(words)) == 40

    exps = [1, -1, 2, -2]
    brute = set()
    for n in (1, 2):
        for raw in itertools.product(itertools.product("ab", exps), repeat=n):
            w = make_reduced(raw)
            if 1 <= w.length <= 2 and all(abs(e) <= 2 for _, e in w.syllables):
                brute.add(w)
    assert set(words) == brute


def test_enumeration_is_shortest_first():
    lengths = [w.length for w in enumerate_words(FREE, 3, 1)]
    assert lengths == sorted(lengths)
    with pytest.raises(ValueError):
        list(enumerate_words(FREE, 0, 1))


def test_conjugacy_representatives_thin_the_list():
    full = list(enumerate_words(FREE, 2, 1))
    reps = list(enumerate_words(FREE, 2, 1, representatives=True))
    assert 0 < len(reps) < len(full)


# ===========================================
# MULTIPLIERS
# ===========================================
def test_multiplier_separation():
    two = MultiplierGroup.from_multiplier(2.0)
    three = MultiplierGroup.from_multiplier(3.0)
    assert multiplier_separation(two, three, 5, 1e-3)
    assert not multiplier_separation(two, MultiplierGroup.from_multiplier(2.0), 5, 1e-3)
    # 4 = 2^2
    assert not multiplier_separation(two, MultiplierGroup.from_multiplier(4.0), 5, 1e-3)
    # 1/2 generates the same group as 2
    assert separation_margin(two, MultiplierGroup.from_multiplier(0.5), 1) == pytest.approx(0.0, abs=1e-15)


def test_multiplier_group_rejects_unit_circle():
    with pytest.raises(ValueError):
        MultiplierGroup.from_multiplier(1.0)
    with pytest.raises(ValueError):
        MultiplierGroup.from_multiplier(1j)
    group = MultiplierGroup.from_multiplier(-2.0)
    assert abs(group.generator - (-2.0)) < 1e-12
    with pytest.raises(ValueError):
        multiplier_separation(group, group, 5, 0.0)


# ===========================================
# ORBITS
# ===========================================
def test_same_orbit_verdicts():
    pair, _ = load_pair(DEMO)
    # a(1/4) = 1/3
    assert same_orbit(0.25, 1 / 3, pair, depth=2) == OrbitVerdict.YES
    assert same_orbit(1 / 3, 0.25, pair, depth=2) == OrbitVerdict.YES
    # positive reals stay positive under every generator
    assert same_orbit(0.25, -0.25, pair, depth=3) == OrbitVerdict.NO_WITHIN_BUDGET
    assert same_orbit(0.25, -0.25, pair, depth=5, max_cells=3) == OrbitVerdict.BUDGET_EXHAUSTED


def test_same_orbit_is_symmetric():
    pair, _ = load_pair(DEMO)
    points = [0.25, 1 / 3, 0.2, 0.1, 0.125, -0.25]
    for p in points:
        for q in points:
            if p != q:
                assert same_orbit(p, q, pair, depth=3) == same_orbit(q, p, pair, depth=3), (p, q)
    # a^-1(1/3) = 1/4, a^-1(1/4) = 1/5, b(1/5) = 1/10
    assert same_orbit(1 / 3, 0.1, pair, depth=3) == OrbitVerdict.YES
    assert same_orbit(0.1, 1 / 3, pair, depth=3) == OrbitVerdict.YES


def test_explore_orbit_stays_in_the_disc():
    pair, _ = load_pair(DEMO)
    exploration = explore_orbit(0.25, pair, depth=3, max_cells=1000, cell_size=1e-7)
    assert exploration.depth == 3
    assert not exploration.exhausted
    assert all(abs(z) < 0.6 for z in exploration.points.values())
    assert all(z.real > 0 for z in exploration.points.values())

    outside = explore_orbit(0.7, pair, depth=3, max_cells=1000, cell_size=1e-7)
    assert len(outside.points) == 1


# ===========================================
# HARVEST AND CERTIFICATES
# ===========================================
def test_linear_pair_has_no_nonzero_hyperbolic_points():
    pair, cfg = load_pair(FIXTURES / "linear_pair.yaml")
    assert find_hyperbolic(pair, settings=cfg.hyperbolic) == []
    assert disjoint_hyperbolic_orbits(pair, settings=cfg.hyperbolic) == []


def test_demo_pair_harvest_and_certificate():
    pair, _ = load_pair(DEMO)
    settings = HyperbolicSettings(max_syllables=2, max_abs_exponent=1)
    records = find_hyperbolic(pair, settings=settings)
    assert any(abs(rec.location - 0.5) < 1e-8 and abs(rec.multiplier - 2.0) < 1e-6 for _, rec in records)
    assert all(abs(rec.location) > 1e-6 and rec.hyperbolic for _, rec in records)

    certificates = disjoint_hyperbolic_orbits(pair, settings=settings, records=records)
    # every other hyperbolic point here has multiplier 2 or 1/2
    assert len(certificates) == 1
    cert = certificates[0]
    assert abs(cert.location - 0.5) < 1e-8
    assert format_word(cert.word) == "b a"
    assert cert.margins == [] and cert.min_margin is None

    document = cert.to_dict()
    assert document["word"] == "b a"
    assert document["budget"]["depth"] <= settings.orbit_depth
    assert len(document["visited_cells"]) == len(cert.exploration.points)


def test_richer_pair_certificates_are_disjoint_and_separated():
    pair, cfg = load_pair(FIXTURES / "richer_pair.yaml")
    settings = cfg.hyperbolic
    certificates = disjoint_hyperbolic_orbits(pair, settings=settings)
    assert len(certificates) >= 2

    for i, c1 in enumerate(certificates):
        assert all(m["margin"] > 0 for m in c1.margins)
        assert len(c1.margins) == len(certificates) - 1
        for c2 in certificates[i + 1:]:
            assert not (c1.cells & c2.cells)
            assert multiplier_separation(c1.group, c2.group, settings.separation_n, settings.separation_eps)

    moduli = [abs(c.location) for c in certificates]
    assert moduli == sorted(moduli, reverse=True)
    assert any(abs(c.location - 0.5) < 1e-8 for c in certificates)

    rows = certificate_rows(certificates)
    assert len(rows) == len(certificates)
    assert set(rows[0]) == {"word", "re", "im", "multiplier_re", "multiplier_im", "cells", "depth",
                            "min_margin", "findings"}


def test_records_and_certificates_are_sound():
    """Each harvested word fixes its point with the reported multiplier"""
    pair, cfg = load_pair(FIXTURES / "richer_pair.yaml")
    records = find_hyperbolic(pair, settings=cfg.hyperbolic)
    assert records
    for word, rec in records:
        assert rec.in_domain
        el = pair.element(word, closed=True)
        assert abs(apply(el, rec.location) - rec.location) < 1e-9
        assert abs(element_derivative(el, rec.location) - rec.multiplier) < 1e-8 * abs(rec.multiplier)

    certificates = disjoint_hyperbolic_orbits(pair, settings=cfg.hyperbolic, records=records)
    size = TOLERANCES.MATCH_FACTOR * TOLERANCES.SUBDIVISION_FLOOR
    for cert in certificates:
        values, slopes = analytic_map(pair.element(cert.word)).evaluate(np.array([cert.location]))
        assert abs(values[0] - cert.location) < 1e-9
        assert abs(slopes[0] - cert.multiplier) < 1e-8 * abs(cert.multiplier)
        assert cell_of(cert.location, size) in cert.cells


if __name__ == "__main__":
    print("=" * 60)
    print("🧪 ORBIT EXPLORER TESTS")
    print("=" * 60)
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"✅ {name}")
