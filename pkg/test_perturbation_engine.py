"""
Test Perturbation Engine

Interpolants, conjugator steps, breaking periodic points, disjoint itineraries
and splitting common fixed points on the bundled fixtures.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add modules to path
sys.path.insert(0, str(Path(__file__).parent))

from modules.config import SplitSettings, load_run_config
from modules.errors import BudgetExhausted, CommensurableWords, DegenerateNodes, PreconditionError
from modules.fixed_point_engine import common_fixed_points
from modules.germ_core import DiskDomain, analytic_distance, identity, tangency_order
from modules.perturbation_engine import (
    PerturbationStep,
    break_periodic_point,
    case_label,
    disjoint_itinerary,
    displacement,
    eliminate_all_common_fixed_points,
    perturb_conjugator,
    second_interpolant,
    split_common_fixed_point,
    t_grid,
    vanishing_interpolant,
)
from modules.pseudogroup_engine import apply_many, itinerary, pair_from_config
from modules.word_algebra import parse_word

FIXTURES = Path(__file__).parent / "config" / "fixtures"


def fixture_pair(name: str):
    return pair_from_config(load_run_config(str(FIXTURES / name)))


def pairwise_distinct(points, gap=1e-8):
    return all(abs(a - b) > gap for i, a in enumerate(points) for b in points[i + 1:])


# ===========================================
# INTERPOLANTS AND STEPS
# ===========================================
def test_vanishing_interpolant_values():
    P = vanishing_interpolant([0.1, 0.2], (0.3, 1.0))
    assert abs(P(0.1)) == 0.0 and abs(P(0.2)) == 0.0
    assert abs(P(0.3) - 1.0) < 1e-15
    # 50 (z - 0.1)(z - 0.2) = 1 - 15z + 50z²
    assert np.allclose(P.coefficients, [1.0, -15.0, 50.0])
    residuals = P.residuals()
    assert residuals["zeros"] < 1e-12 and residuals["anchor"] < 1e-12

    constant = vanishing_interpolant([], (0.3, 2.0 + 1j))
    assert constant.degree == 0
    assert constant(0.7) == pytest.approx(2.0 + 1j)


def test_degenerate_nodes():
    with pytest.raises(DegenerateNodes):
        vanishing_interpolant([0.1, 0.1], (0.3, 1.0))
    with pytest.raises(DegenerateNodes):
        vanishing_interpolant([0.3], (0.3, 1.0))


def test_t_grid():
    grid = t_grid()
    assert grid[0] == pytest.approx(0.064)
    assert any(abs(t - 1e-3) < 1e-18 for t in grid)
    assert all(a > b for a, b in zip(grid, grid[1:]))
    assert grid[-1] >= 1e-8
    with pytest.raises(ValueError):
        t_grid(1e-2, 1e-3)


def test_steps_preserve_tangency_and_pinned_zeros():
    rng = np.random.default_rng(17)
    h = identity(1.0)
    for _ in range(200):
        alpha = int(rng.integers(0, 4))
        zeros = list(-0.1 - 0.2 * rng.random(int(rng.integers(0, 3))) + 0.1j * rng.standard_normal(1))
        if len(zeros) == 2 and abs(zeros[0] - zeros[1]) < 1e-6:
            continue
        P = vanishing_interpolant(zeros, (0.3, 1.0))
        step = PerturbationStep(1, P, float(10 ** rng.uniform(-5, -3)), alpha)
        h_new = perturb_conjugator(h, step)

        assert tangency_order(h_new) >= alpha
        z = np.array([0.05, 0.1j, -0.2 + 0.1j])
        assert np.allclose(h_new.evaluate(z) - h.evaluate(z), step.term(z), atol=1e-15)
        if zeros:
            pinned = np.array(zeros)
            assert np.max(np.abs(h_new.evaluate(pinned) - h.evaluate(pinned))) < 1e-12


def test_analytic_distance_grows_with_t():
    h = identity(1.0)
    P = vanishing_interpolant([0.1], (0.3, 1.0))
    distances = [analytic_distance(h, perturb_conjugator(h, PerturbationStep(2, P, t, 1)))
                 for t in reversed(t_grid(1e-8, 1e-2))]
    assert all(a <= b for a, b in zip(distances, distances[1:]))
    assert distances[0] > 0.0


def test_step_rejects_bad_parameters():
    P = vanishing_interpolant([], (0.3, 1.0))
    with pytest.raises(ValueError):
        PerturbationStep(3, P, 1e-3)
    with pytest.raises(ValueError):
        PerturbationStep(1, P, 0.0)
    with pytest.raises(ValueError):
        PerturbationStep(1, P, 1e-3, alpha=-1)


# ===========================================
# PERIODIC POINTS AND ITINERARIES
# ===========================================
def test_break_periodic_point_on_parabolic_pair():
    pair = fixture_pair("parabolic.yaml")
    word = parse_word("b a")
    q = 1 / 3
    # 1/3 -> 1/2 -> 1/3
    assert np.allclose(itinerary(pair.element(word), q).points, [q, 0.5, q])
    assert displacement(word, pair, q) < 1e-12

    step, new_pair = break_periodic_point(word, pair, q)
    assert step is not None and step.target == 2
    assert bool(apply_many(new_pair.element(word), [q]).ok[0])
    assert displacement(word, new_pair, q) > 1e-7


def test_break_is_a_no_op_when_the_point_already_moves():
    pair = fixture_pair("parabolic.yaml")
    step, same = break_periodic_point(parse_word("a"), pair, 0.2)
    assert step is None and same is pair
    with pytest.raises(PreconditionError):
        break_periodic_point(parse_word("b a"), pair, 0.0)


def test_free_endpoint_disjoints_repeated_visits():
    pair = fixture_pair("parabolic.yaml")
    word = parse_word("a b a b^-1")
    q = 0.2
    # 0.2 -> 1/3 -> 1/2 -> 1/3 -> 1/2
    before = itinerary(pair.element(word), q).points
    assert not pairwise_distinct(before[:4])

    steps, new_pair = disjoint_itinerary(word, pair, q, mode="free-endpoint")
    assert steps
    after = itinerary(new_pair.element(word), q)
    assert after.success
    assert pairwise_distinct(after.points[:4])
    # the free end is pinned to 1e-10
    assert abs(after.points[4] - before[4]) < 1e-10


def test_conjugate_mode_with_distinct_spelling_is_a_no_op():
    pair = fixture_pair("parabolic.yaml")
    steps, same = disjoint_itinerary(parse_word("a^-1 b a^2"), pair, 0.25, mode="conjugate")
    assert steps == []
    assert same is pair


def test_disjoint_mode_preconditions():
    pair = fixture_pair("parabolic.yaml")
    with pytest.raises(ValueError):
        disjoint_itinerary(parse_word("b a"), pair, 1 / 3, mode="sideways")
    # b a closes its loop at 1/3
    with pytest.raises(PreconditionError):
        disjoint_itinerary(parse_word("b a"), pair, 1 / 3, mode="free-endpoint")
    with pytest.raises(PreconditionError):
        disjoint_itinerary(parse_word("a b a b^-1"), pair, 0.2, mode="pinned-endpoint")


# ===========================================
# SPLITTING
# ===========================================
def test_case_labels():
    assert case_label(parse_word("a"), parse_word("b a")) == "1"
    assert case_label(parse_word("a^-1 b a"), parse_word("b")) == "2"
    assert case_label(parse_word("a"), parse_word("b")) == "3a"
    assert case_label(parse_word("a"), parse_word("a^2")) == "3b"
    assert case_label(parse_word("b a"), parse_word("b^-1 a")) == "3c"


def test_split_engineered_common_fixed_point():
    pair = fixture_pair("split_fixture.yaml")
    w_i, w_j = parse_word("b a"), parse_word("a b")
    q = 0.3
    assert displacement(w_i, pair, q) < 1e-12
    assert displacement(w_j, pair, q) < 1e-12

    new_pair, transcript = split_common_fixed_point(w_i, w_j, pair, q)
    assert transcript.case == "3a"
    assert len(transcript.steps) == 1
    assert transcript.verification["ok"]
    assert transcript.verification["common_pairs"] == 0
    assert transcript.verification["count_after"] == transcript.verification["count_before"]
    # w_i reduces to a at q, which keeps its fixed point
    assert displacement(parse_word("a"), new_pair, q) < 1e-12
    assert displacement(parse_word("b"), new_pair, q) > 1e-7


def test_split_preconditions():
    pair = fixture_pair("split_fixture.yaml")
    with pytest.raises(PreconditionError):
        split_common_fixed_point(parse_word("b a"), parse_word("a b"), pair, 0.0)
    with pytest.raises(CommensurableWords) as info:
        split_common_fixed_point(parse_word("b a"), parse_word("a^-1 b^-1"), pair, 0.3)
    assert info.value.witness is not None
    with pytest.raises(CommensurableWords):
        split_common_fixed_point(parse_word("b a"), parse_word("b a b a"), pair, 0.3)
    # both generators fix 0.3 but b a moves 0.2
    with pytest.raises(PreconditionError):
        split_common_fixed_point(parse_word("b a"), parse_word("a b"), pair, 0.2)


def test_eliminate_without_common_points_returns_the_pair():
    pair = fixture_pair("linear_pair.yaml")
    new_pair, transcript = eliminate_all_common_fixed_points(parse_word("a"), parse_word("b"), pair)
    assert new_pair is pair
    assert transcript.verification == {"common_points": 0}
    assert transcript.steps == []


def test_budget_exhaustion_carries_transcript():
    pair = fixture_pair("split_fixture.yaml")
    # a single t of about 1.5e-8 moves b by less than the matching tolerance
    starved = SplitSettings(t_min=1e-8, t_max=2e-8)
    with pytest.raises(BudgetExhausted) as info:
        split_common_fixed_point(parse_word("b a"), parse_word("a b"), pair, 0.3, settings=starved)
    assert info.value.transcript["operation"] == "split_common_fixed_point"
    assert info.value.transcript["case"] == "3a"
    assert info.value.transcript["attempts"]



def path_cases(transcript):
    return [entry["case"] for entry in transcript.path if "case" in entry]


def constructions(transcript):
    return [entry for entry in transcript.path if "construction" in entry]


def nonzero_common(w_i, w_j, pair):
    region = DiskDomain(pair.disc.center, pair.disc.radius, True)
    return [a.location for a, _ in common_fixed_points(pair.element(w_i), pair.element(w_j), region)
            if abs(a.location) > 1e-7]


def test_split_case_1_uses_an_exclusive_point():
    cfg = load_run_config(str(FIXTURES / "exclusive_visit.yaml"))
    pair = pair_from_config(cfg)
    kept, moved = parse_word("a"), parse_word("b a^-1 b")
    q = 0.1
    route = itinerary(pair.element(moved), q)
    assert np.allclose(route.points, [0.1, -0.08, -0.125, 0.1])

    new_pair, transcript = split_common_fixed_point(kept, moved, pair, q, settings=cfg.split)
    assert transcript.case == "1"
    assert path_cases(transcript) == ["1"]
    built = constructions(transcript)
    assert built[-1]["construction"] == "exclusive point"
    assert built[-1]["moved"] == "b a^-1 b"
    assert not built[-1]["double_visit"]
    assert transcript.verification["ok"]
    # the longer word leaves q, the shorter one keeps it
    assert displacement(kept, new_pair, q) < 1e-7
    assert displacement(moved, new_pair, q) > 1e-7


def test_split_case_2_records_the_double_visit():
    cfg = load_run_config(str(FIXTURES / "double_visit.yaml"))
    pair = pair_from_config(cfg)
    kept, moved = parse_word("b"), parse_word("a^-1 b a")
    q = 0.4
    route = itinerary(pair.element(moved), q)
    assert np.allclose(route.points, [0.4, -0.2, -0.2, 0.4])

    new_pair, transcript = split_common_fixed_point(kept, moved, pair, q, settings=cfg.split)
    assert transcript.case == "2"
    assert path_cases(transcript) == ["2"]
    built = constructions(transcript)
    assert built[-1]["moved"] == "a^-1 b a"
    assert built[-1]["double_visit"]
    assert transcript.verification["ok"]
    assert displacement(kept, new_pair, q) < 1e-7
    assert displacement(moved, new_pair, q) > 1e-7


def test_second_interpolant_follows_the_perturbed_pass():
    pair = fixture_pair("double_visit.yaml")
    anchor, nodes = -0.2, [0.4]
    first = PerturbationStep(2, vanishing_interpolant(nodes, (anchor, 1.0)), 0.016, pair.alpha)
    follow = second_interpolant(pair, first, anchor, nodes)
    assert follow.target == first.target and follow.t == first.t and follow.alpha == first.alpha

    h = pair.conjugator(2)
    h_t = perturb_conjugator(h, first)
    x_star = follow.interpolant.anchor[0]
    assert abs(x_star - anchor) > 1e-6
    # the second pass enters h_t at x*, which h_t sends where h sent the anchor
    assert abs(h_t.evaluate(x_star) - h.evaluate(anchor)) < 1e-10
    assert abs(follow.interpolant(x_star) - 1.0) < 1e-10
    assert abs(follow.interpolant(0.4)) < 1e-12


def test_split_case_3b_goes_through_an_auxiliary_word():
    cfg = load_run_config(str(FIXTURES / "two_cycle.yaml"))
    pair = pair_from_config(cfg)
    q = 0.10512492197250395
    w_i, w_j = parse_word("b a"), parse_word("b a^3")
    assert displacement(w_i, pair, q) < 1e-12
    assert displacement(w_j, pair, q) < 1e-12

    new_pair, transcript = split_common_fixed_point(w_i, w_j, pair, q, settings=cfg.split)
    assert transcript.case == "3b"
    assert path_cases(transcript) == ["3b", "1"]
    auxiliary = constructions(transcript)[0]
    assert auxiliary["construction"] == "auxiliary word"
    assert auxiliary["aux"] == "a^2"
    assert auxiliary["index"] == 1
    assert auxiliary["tau"] == pytest.approx(0.2002498, abs=1e-6)
    assert auxiliary["drift"] is not None
    assert transcript.verification["ok"]
    assert transcript.verification["common_pairs"] == 0
    assert max(displacement(w_i, new_pair, q), displacement(w_j, new_pair, q)) > 1e-7


def test_split_case_3c_peels_the_shared_syllable():
    cfg = load_run_config(str(FIXTURES / "two_cycle.yaml"))
    pair = pair_from_config(cfg)
    x = -0.09512492197250395
    w_i, w_j = parse_word("a b"), parse_word("a^3 b")
    assert displacement(w_i, pair, x) < 1e-12
    assert displacement(w_j, pair, x) < 1e-12

    new_pair, transcript = split_common_fixed_point(w_i, w_j, pair, x, settings=cfg.split)
    assert transcript.case == "3c"
    assert path_cases(transcript) == ["3c", "3b", "1"]
    peel = constructions(transcript)[0]
    assert peel["construction"] == "peel" and peel["count"] == 1
    assert peel["q"][0] == pytest.approx(0.10512492197250395, abs=1e-9)
    assert transcript.verification["ok"]
    assert transcript.verification["common_pairs"] == 0


def test_eliminate_single_common_point_of_longer_words():
    pair = fixture_pair("exclusive_visit.yaml")
    w_i, w_j = parse_word("b a^-1 b"), parse_word("a b a^-1 b")
    assert len(nonzero_common(w_i, w_j, pair)) == 1

    new_pair, transcript = eliminate_all_common_fixed_points(w_i, w_j, pair)
    assert transcript.verification == {"common_points": 1, "split": 1, "remaining": 0}
    assert transcript.rounds[0]["reductions"]
    assert nonzero_common(w_i, w_j, new_pair) == []


def test_eliminate_two_common_points():
    pair = fixture_pair("double_visit.yaml")
    w_i, w_j = parse_word("a^-1 b a"), parse_word("b a^-1 b a")
    common = nonzero_common(w_i, w_j, pair)
    assert len(common) == 2
    assert sorted(round(z.real, 6) for z in common) == [-0.2, 0.4]

    new_pair, transcript = eliminate_all_common_fixed_points(w_i, w_j, pair)
    assert transcript.verification["common_points"] == 2
    assert transcript.verification["remaining"] == 0
    assert 1 <= transcript.verification["split"] <= 2
    assert nonzero_common(w_i, w_j, new_pair) == []


if __name__ == "__main__":
    print("=" * 60)
    print("🧪 PERTURBATION ENGINE TESTS")
    print("=" * 60)
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"✅ {name}")
