"""
Test Pseudogroup Engine

Recursive domains, itineraries, conjugate spellings, domain grids and
run-document validation on the bundled configs.
"""

import cmath
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

# Add modules to path
sys.path.insert(0, str(Path(__file__).parent))

from modules.config import load_run_config
from modules.errors import OutOfDomain
from modules.pseudogroup_engine import (
    CLOSED,
    OPEN,
    apply,
    apply_many,
    conjugate_spelling_element,
    domain_grid,
    domain_sample,
    element_derivative,
    extension_neighborhood,
    itinerary,
    pair_from_config,
    validate_run_config,
)
from modules.word_algebra import parse_word

ROOT = Path(__file__).parent
DEMO = ROOT / "config" / "config.yaml"
FIXTURES = ROOT / "config" / "fixtures"


def demo_pair():
    """f(z) = z/(1-z), g(z) = z/2 on |z| < 0.6"""
    return pair_from_config(load_run_config(str(DEMO)))


def test_apply_inside_the_domain():
    pair = demo_pair()
    el = pair.element(parse_word("b a"))
    # a(1/4) = 1/3, b(1/3) = 1/6
    assert abs(apply(el, 0.25) - 1 / 6) < 1e-15
    # (z/(2(1-z)))' = 1/(2(1-z)^2)
    assert abs(element_derivative(el, 0.25) - 1 / (2 * 0.75 ** 2)) < 1e-12


def test_apply_reports_failing_prefix():
    pair = demo_pair()
    with pytest.raises(OutOfDomain) as info:
        apply(pair.element(parse_word("a")), 0.7)
    assert info.value.index == 0

    # a(0.5) = 1 leaves D after the first letter
    with pytest.raises(OutOfDomain) as info:
        apply(pair.element(parse_word("b a")), 0.5)
    assert info.value.index == 1

    ev = apply_many(pair.element(parse_word("b a")), [0.25, 0.5, 0.7])
    assert list(ev.ok) == [True, False, False]
    assert list(ev.failing_index) == [-1, 1, 0]
    assert np.isnan(ev.values[1])


def test_last_letter_may_leave_the_disc():
    pair = demo_pair()
    # only intermediate points must stay in D: a(0.5) = 1
    assert abs(apply(pair.element(parse_word("a")), 0.5) - 1.0) < 1e-15


def test_closed_membership_accepts_the_boundary():
    pair = demo_pair()
    word = parse_word("a")
    with pytest.raises(OutOfDomain):
        apply(pair.element(word), 0.6)
    assert apply(pair.element(word, closed=True), 0.6) == pytest.approx(1.5)


def disc_samples(n=400, radius=0.6, seed=3):
    rng = np.random.default_rng(seed)
    inner = radius * np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))
    rim = np.array([radius, -radius, 1j * radius, -1j * radius])
    return np.concatenate([inner, rim])


def test_longer_words_have_smaller_domains():
    pair = demo_pair()
    z = disc_samples()
    # (outer, inner) spelled without cancellation, so u∘v runs v's letters first
    for outer, inner in (("a^-1", "b a"), ("b^-1", "a"), ("a b", "b^2 a^-1"), ("a^2", "a b^-1")):
        v = parse_word(inner)
        uv = parse_word(f"{outer} {inner}")
        ok_uv = apply_many(pair.element(uv), z).ok
        ok_v = apply_many(pair.element(v), z).ok
        assert not np.any(ok_uv & ~ok_v), f"{outer} {inner}"
        assert np.any(ok_uv)


def test_open_domain_sits_inside_the_closed_one():
    pair = demo_pair()
    z = disc_samples()
    for text in ("a", "b^-1", "b a", "a^-1 b^2 a"):
        el = pair.element(parse_word(text))
        open_ok = apply_many(el, z, OPEN).ok
        closed_ok = apply_many(el, z, CLOSED).ok
        assert not np.any(open_ok & ~closed_ok), text
    # |z| = R is in the closed domain of a but not the open one
    rim = z[-4:]
    assert not np.any(apply_many(pair.element(parse_word("a")), rim, OPEN).ok)
    assert np.all(apply_many(pair.element(parse_word("a")), rim, CLOSED).ok)


def test_empty_word_is_the_identity_on_the_disc():
    pair = demo_pair()
    el = pair.element(parse_word(""))
    z = disc_samples()[:-4]
    ev = apply_many(el, z)
    assert np.all(ev.ok)
    assert np.array_equal(ev.values, z)
    assert element_derivative(el, 0.3) == 1.0
    assert itinerary(el, 0.3).points == (0.3,)
    with pytest.raises(OutOfDomain) as info:
        apply(el, 0.6)
    assert info.value.index == 0


def test_extension_neighborhood_relaxes_membership():
    pair = demo_pair()
    # b(0.62) = 0.31 is back in D
    el = pair.element(parse_word("a b"))
    values, slopes = extension_neighborhood(el, 0.05).evaluate(np.array([0.62]))
    assert np.isfinite(values[0]) and np.isfinite(slopes[0])
    values, _ = extension_neighborhood(el, 0.0).evaluate(np.array([0.62]))
    assert np.isnan(values[0])
    with pytest.raises(ValueError):
        extension_neighborhood(el, -0.1)


def test_itinerary_points():
    pair = demo_pair()
    route = itinerary(pair.element(parse_word("b a")), 0.25)
    assert route.success
    assert np.allclose(route.points, [0.25, 1 / 3, 1 / 6], atol=1e-15)

    # a^2 at 0.1: 0.1 -> 1/9 -> 1/8
    el = pair.element(parse_word("a^2"))
    assert np.allclose(itinerary(el, 0.1).points, [0.1, 0.125], atol=1e-15)
    assert np.allclose(itinerary(el, 0.1, granularity="letter").points, [0.1, 1 / 9, 0.125], atol=1e-15)

    failed = itinerary(pair.element(parse_word("b a")), 0.5)
    assert not failed.success
    # a(0.5) = 1 leaves D, so the first syllable fails like apply reports
    assert failed.failing_index == 1
    assert len(failed.points) == 2
    assert np.allclose(failed.points, [0.5, 1.0])
    with pytest.raises(OutOfDomain) as excinfo:
        apply(pair.element(parse_word("b a")), 0.5)
    assert excinfo.value.index == failed.failing_index

    with pytest.raises(ValueError):
        itinerary(el, 0.1, granularity="word")


def test_conjugate_spelling_skips_the_fictitious_point():
    pair = demo_pair()
    word = parse_word("a^-1 b a^2")
    el = conjugate_spelling_element(word, pair)
    assert el.fictitious == 3
    assert len(el.syllables) == 4

    route = itinerary(el, 0.1)
    assert route.success
    assert len(route.points) == 4
    assert abs(route.points[-1] - apply(pair.element(word), 0.1)) < 1e-12


def test_domain_grid_shapes_and_sample():
    pair = demo_pair()
    x, y, mask = domain_grid(pair.element(parse_word("")), 16)
    assert x.shape == y.shape == mask.shape == (256,)
    expected = int(np.sum(np.abs(x + 1j * y) < 0.6))
    assert int(mask.sum()) == expected
    assert len(domain_sample(pair.element(parse_word("")), 16)) == expected

    # b a needs a(z) in D, a strictly smaller set than D itself
    _, _, mask_ba = domain_grid(pair.element(parse_word("b a")), 16, threads=2)
    assert 0 < int(mask_ba.sum()) < expected

    _, _, closed_mask = domain_grid(pair.element(parse_word("b a")), 16, mode=CLOSED)
    assert int(closed_mask.sum()) >= int(mask_ba.sum())

    with pytest.raises(ValueError):
        domain_grid(pair.element(parse_word("a")), 4)


def test_bundled_configs_validate():
    for path in [DEMO] + sorted(FIXTURES.glob("*.yaml")):
        if path.name == "bad_config.yaml":
            continue
        cfg = load_run_config(str(path))
        validation = validate_run_config(cfg)
        assert validation.is_valid, (path.name, validation.failed_checks)
        pair = pair_from_config(cfg)
        assert pair.disc.radius == cfg.disc_radius


def test_torsion_pair_reduces_exponents():
    cfg = load_run_config(str(FIXTURES / "torsion_pair.yaml"))
    pair = pair_from_config(cfg)
    assert pair.orders.r == 3
    assert pair.f.core.torsion == 3
    word = parse_word("a^4", pair.orders)
    z = 0.2 + 0.1j
    assert abs(apply(pair.element(word), z) - cmath.exp(2j * math.pi / 3) * z) < 1e-12


def test_bad_config_is_rejected():
    cfg = load_run_config(str(FIXTURES / "bad_config.yaml"))
    validation = validate_run_config(cfg)
    assert not validation.is_valid
    assert "unknown key analysis.warp_speed" in validation.failed_checks
    assert "generators.disc_radius must be positive" in validation.failed_checks


def test_irrational_rotation_of_nonlinear_germ_is_rejected():
    cfg = load_run_config(str(DEMO))
    theta = math.sqrt(2)
    lam = [math.cos(2 * math.pi * theta), math.sin(2 * math.pi * theta)]
    cremer = replace(cfg, f_spec={"family": "polynomial", "parameters": {"coefficients": [lam, [0.1, 0.0]]}})
    validation = validate_run_config(cremer)
    assert not validation.is_valid
    assert any("Cremer" in check for check in validation.failed_checks)


def test_orders_must_match_declared_torsion():
    cfg = load_run_config(str(FIXTURES / "torsion_pair.yaml"))
    wrong = replace(cfg, orders=(None, None))
    validation = validate_run_config(wrong)
    assert not validation.is_valid
    assert any("disagrees with torsion" in check for check in validation.failed_checks)


if __name__ == "__main__":
    print("=" * 60)
    print("🧪 PSEUDOGROUP ENGINE TESTS")
    print("=" * 60)
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"✅ {name}")
