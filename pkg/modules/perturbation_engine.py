"""
Perturbation Engine
Vanishing interpolants, h + t·z^(α+1)·P(z) conjugator perturbations, and the
constructions that break periodic points, disjoint itineraries and split
common fixed points
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from modules.config import TOLERANCES, SplitSettings, format_complex
from modules.errors import (
    BudgetExhausted,
    CommensurableWords,
    DegenerateNodes,
    EmptyDomain,
    InjectivityLoss,
    NewtonDivergence,
    OutOfDomain,
    PreconditionError,
    PseudogroupError,
)
from modules.fixed_point_engine import (
    Contour,
    common_fixed_points,
    displacement_winding,
    isolate_fixed_points,
)
from modules.germ_core import DiskDomain, Germ, analytic_distance, inverse as germ_inverse, perturbed
from modules.pseudogroup_engine import (
    GeneratorPair,
    PseudogroupElement,
    analytic_map,
    apply_many,
    itinerary,
    letter_target,
)
from modules.word_algebra import (
    ReducedWord,
    Syllable,
    commensurable,
    format_word,
    inverse as word_inverse,
    is_cyclically_reduced,
    make_reduced,
    minimal_conjugate,
    primitive_root,
)

logger = logging.getLogger(__name__)

MODES = ("free-endpoint", "pinned-endpoint", "conjugate")
PIN_TOL = 1e-10

# perturbation attempts that only mean "try a smaller t"
_RETRYABLE = (InjectivityLoss, EmptyDomain, OutOfDomain, NewtonDivergence)


# ===========================================
# INTERPOLANTS
# ===========================================
@dataclass(frozen=True)
class VanishingInterpolant:
    """P with P(zero_k) = 0 and P(anchor point) = anchor value"""
    zeros: Tuple[complex, ...]
    anchor: Tuple[complex, complex]
    coefficients: Tuple[complex, ...]     # ascending powers

    @property
    def degree(self) -> int:
        return len(self.zeros)

    def __call__(self, z):
        """Product form, exact zeros"""
        z = np.asarray(z, dtype=complex)
        point, value = self.anchor
        out = np.full_like(z, value, dtype=complex)
        for zero in self.zeros:
            out = out * (z - zero) / (point - zero)
        return out.item() if out.ndim == 0 else out

    def derivative(self, z):
        return npoly.polyval(np.asarray(z, dtype=complex), npoly.polyder(np.array(self.coefficients)))

    def residuals(self) -> Dict[str, float]:
        point, value = self.anchor
        zeros = np.array(self.zeros, dtype=complex)
        at_zeros = np.abs(npoly.polyval(zeros, np.array(self.coefficients))) if zeros.size else np.zeros(1)
        return {"zeros": float(np.max(at_zeros)),
                "anchor": float(abs(npoly.polyval(point, np.array(self.coefficients)) - value))}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "zeros": [format_complex(z) for z in self.zeros],
            "anchor": {"point": format_complex(self.anchor[0]), "value": format_complex(self.anchor[1])},
            "coefficients": [format_complex(c) for c in self.coefficients],
        }


def dedupe_nodes(points: Sequence[complex], gap: float = TOLERANCES.INTERPOLATION_GAP) -> List[complex]:
    """First representative of every cluster closer than gap, in input order"""
    kept: List[complex] = []
    for p in points:
        p = complex(p)
        if all(abs(p - k) > gap for k in kept):
            kept.append(p)
    return kept


def vanishing_interpolant(zeros: Sequence[complex], anchor: Tuple[complex, complex]) -> VanishingInterpolant:
    """P(z) = value · Π (z − zero_k)/(point − zero_k)"""
    zeros = tuple(complex(z) for z in zeros)
    point, value = complex(anchor[0]), complex(anchor[1])
    gap = TOLERANCES.INTERPOLATION_GAP
    for i, a in enumerate(zeros):
        if abs(a - point) <= gap:
            raise DegenerateNodes(f"zero {a:.6g} coincides with the anchor {point:.6g}")
        for b in zeros[i + 1:]:
            if abs(a - b) <= gap:
                raise DegenerateNodes(f"zeros {a:.6g} and {b:.6g} are closer than {gap:g}")

    if value == 0:
        coefficients = (0j,)
    else:
        scale = value / np.prod([point - z for z in zeros]) if zeros else value
        coefficients = tuple(complex(c) for c in scale * npoly.polyfromroots(zeros)) if zeros else (value,)
    return VanishingInterpolant(zeros, (point, value), coefficients)


# ===========================================
# STEPS
# ===========================================
@dataclass(frozen=True)
class PerturbationStep:
    """h ↦ h + t·z^(α+1)·P(z) on conjugator ``target`` (1 = a, 2 = b)"""
    target: int
    interpolant: VanishingInterpolant
    t: float
    alpha: int = 0
    label: str = ""

    def __post_init__(self):
        if self.target not in (1, 2):
            raise ValueError(f"target must be 1 or 2, got {self.target}")
        if not self.t > 0:
            raise ValueError("perturbation magnitude t must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")

    def coefficients(self) -> List[complex]:
        """Coefficients of the added term from order 1 upward"""
        return [0j] * self.alpha + [self.t * c for c in self.interpolant.coefficients]

    def term(self, z):
        z = np.asarray(z, dtype=complex)
        return self.t * z ** (self.alpha + 1) * self.interpolant(z)

    def to_dict(self) -> Dict[str, Any]:
        out = {"target": self.target, "t": self.t, "alpha": self.alpha, "label": self.label}
        out.update(self.interpolant.to_dict())
        return out


def t_grid(t_min: float = TOLERANCES.T_MIN, t_max: float = TOLERANCES.T_MAX,
           anchor: float = TOLERANCES.T_ANCHOR) -> List[float]:
    """anchor·2^k inside [t_min, t_max], largest first"""
    if not 0 < t_min <= t_max:
        raise ValueError("need 0 < t_min <= t_max")
    k_hi = math.floor(math.log2(t_max / anchor) + 1e-12)
    k_lo = math.ceil(math.log2(t_min / anchor) - 1e-12)
    return [anchor * 2.0 ** k for k in range(k_hi, k_lo - 1, -1)]


def perturb_conjugator(h: Germ, step: PerturbationStep) -> Germ:
    """h + t·z^(α+1)·P, checked injective on the 9/10 disc by a derivative bound"""
    coeffs = step.coefficients()
    if not any(coeffs):
        return h
    ring = TOLERANCES.SHRINK * h.radius * np.exp(
        2j * np.pi * np.arange(4 * TOLERANCES.BOUNDARY_SAMPLES) / (4 * TOLERANCES.BOUNDARY_SAMPLES))
    added = np.abs(npoly.polyval(ring, npoly.polyder(np.concatenate(([0j], coeffs)))))
    base = np.abs(h.derivative(ring, strict=False))
    if not np.all(np.isfinite(base)):
        raise InjectivityLoss(f"conjugator {h.label or 'h'} is not evaluable on its 9/10 circle")
    if float(np.max(added)) >= 0.5 * float(np.min(base)):
        raise InjectivityLoss(f"t={step.t:.3g}: |Q'| reaches {np.max(added):.3g} against "
                              f"min|h'| = {np.min(base):.3g}")
    try:
        return perturbed(h, coeffs, label=h.label)
    except ValueError as e:
        raise InjectivityLoss(f"t={step.t:.3g}: {e}") from e


def apply_step(pair: GeneratorPair, step: PerturbationStep) -> GeneratorPair:
    """Pair with conjugator ``step.target`` replaced by its perturbation"""
    h = pair.conjugator(step.target)
    return pair.with_conjugator(step.target, perturb_conjugator(h, step))


def step_residuals(pair: GeneratorPair, step: PerturbationStep, new_pair: GeneratorPair) -> Dict[str, float]:
    """Interpolation residuals, pinning drift at the zeros and d_A to the old conjugator"""
    old = pair.conjugator(step.target)
    new = new_pair.conjugator(step.target)
    out = step.interpolant.residuals()
    if step.interpolant.zeros:
        zeros = np.array(step.interpolant.zeros, dtype=complex)
        drift = np.abs(new.evaluate(zeros, strict=False) - old.evaluate(zeros, strict=False))
        out["pinning"] = float(np.max(drift))
    else:
        out["pinning"] = 0.0
    out["analytic_distance"] = analytic_distance(old, new)
    return out


# ===========================================
# TRANSCRIPTS
# ===========================================
@dataclass
class PerturbationTranscript:
    """Ordered record of one perturbation job"""
    operation: str
    words: List[str]
    q: Optional[complex] = None
    delta: Optional[float] = None
    case: Optional[str] = None
    reductions: List[str] = field(default_factory=list)
    steps: List[Dict[str, Any]] = field(default_factory=list)
    attempts: List[Dict[str, Any]] = field(default_factory=list)
    verification: Dict[str, Any] = field(default_factory=dict)
    rounds: List[Dict[str, Any]] = field(default_factory=list)
    path: List[Dict[str, Any]] = field(default_factory=list)

    def record_step(self, step: PerturbationStep, residuals: Dict[str, float]):
        entry = step.to_dict()
        entry["residuals"] = residuals
        self.steps.append(entry)

    def record_attempt(self, **info):
        self.attempts.append({k: (format_complex(v) if isinstance(v, complex) else v) for k, v in info.items()})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "operation": self.operation,
            "words": list(self.words),
            "q": format_complex(self.q) if self.q is not None else None,
            "delta": self.delta,
            "case": self.case,
            "reductions": list(self.reductions),
            "steps": list(self.steps),
            "attempts": list(self.attempts),
            "verification": dict(self.verification),
            "rounds": list(self.rounds),
            "path": list(self.path),
        }


# ===========================================
# ITINERARY HELPERS
# ===========================================
def touched_points(syllables: Sequence[Syllable], points: Sequence[complex], letter: str) -> List[complex]:
    """Entry and exit of every syllable spelled with ``letter``"""
    out: List[complex] = []
    for k, (name, _) in enumerate(syllables, start=1):
        if name == letter and k < len(points):
            out.extend((points[k - 1], points[k]))
    return out


def _near_any(z: complex, points: Sequence[complex], gap: float) -> bool:
    return any(abs(z - p) <= gap for p in points)


def _first_collision(points: Sequence[complex], allow_wrap: bool = False,
                     gap: float = TOLERANCES.INTERPOLATION_GAP) -> Optional[int]:
    """Smallest k whose point repeats an earlier one; the closing q_l = q_0 may be allowed"""
    last = len(points) - 1
    for k in range(1, len(points)):
        for j in range(k):
            if abs(points[k] - points[j]) <= gap and not (allow_wrap and k == last and j == 0):
                return k
    return None


def _open_route(word: ReducedWord, pair: GeneratorPair, q: complex,
                spelling: Optional[Tuple[Syllable, ...]] = None) -> List[complex]:
    el = PseudogroupElement(word, pair, False, spelling=spelling)
    route = itinerary(el, q)
    if not route.success:
        raise PreconditionError(f"{q:.6g} leaves the domain of {format_word(word) or 'id'} "
                                f"at syllable {route.failing_index}")
    return list(route.points)


def _analytic_route(word: ReducedWord, pair: GeneratorPair, q: complex) -> List[complex]:
    """Syllable-end points of the analytic continuation"""
    points = [complex(q)]
    for k in range(1, word.length + 1):
        prefix = ReducedWord(word.syllables[:k], word.orders)
        values, _ = analytic_map(pair.element(prefix)).evaluate(np.array([q], dtype=complex))
        if not np.isfinite(values[0]):
            raise PreconditionError(f"{format_word(word)} is not evaluable at {q:.6g}")
        points.append(complex(values[0]))
    return points


def displacement(word: ReducedWord, pair: GeneratorPair, q: complex) -> float:
    """|W(q) − q| on the analytic continuation; inf where W is undefined"""
    values, _ = analytic_map(pair.element(word)).evaluate(np.array([q], dtype=complex))
    return float(abs(values[0] - q)) if np.isfinite(values[0]) else math.inf


# ===========================================
# BREAKING PERIODIC POINTS
# ===========================================
def break_periodic_point(word: ReducedWord, pair: GeneratorPair, q: complex, alpha: Optional[int] = None,
                         settings: Optional[SplitSettings] = None, tol: float = TOLERANCES.SUBDIVISION_FLOOR,
                         transcript: Optional[PerturbationTranscript] = None,
                         _depth: int = 0) -> Tuple[Optional[PerturbationStep], GeneratorPair]:
    """Perturb the last syllable's conjugator so that W no longer fixes q

    Returns (None, pair) when W already moves q.
    """
    settings = settings or SplitSettings()
    alpha = pair.alpha if alpha is None else alpha
    q = complex(q)
    match = TOLERANCES.MATCH_FACTOR * tol
    if abs(q) <= match:
        raise PreconditionError("0 is fixed by every element; only q != 0 can be broken")
    if word.is_identity:
        raise PreconditionError("the identity fixes every point")
    transcript = transcript or PerturbationTranscript("break_periodic_point", [format_word(word)], q)

    points = _open_route(word, pair, q)
    if abs(points[-1] - q) > match:
        logger.debug(f"{format_word(word)} already moves {q:.6g}")
        return None, pair
    if _depth > settings.max_depth:
        raise BudgetExhausted(f"recursion depth {settings.max_depth} reached breaking {format_word(word)}",
                              transcript.to_dict())

    l = word.length
    last = points[l - 1]
    hit = next((j for j in range(l - 1) if abs(points[j] - last) <= TOLERANCES.INTERPOLATION_GAP), None)
    if hit is not None:
        # the sub-word between the two visits is periodic at points[hit]: break it first
        sub = ReducedWord(word.syllables[hit:l - 1], word.orders)
        logger.debug(f"itinerary of {format_word(word)} revisits q_{hit}; breaking {format_word(sub)} first")
        sub_step, pair = break_periodic_point(sub, pair, points[hit], alpha, settings, tol, transcript, _depth + 1)
        step, pair = break_periodic_point(word, pair, q, alpha, settings, tol, transcript, _depth + 1)
        return step or sub_step, pair

    letter = word.syllables[-1][0]
    interpolant = vanishing_interpolant(dedupe_nodes(points[:l - 1]), (last, 1.0))
    for t in t_grid(settings.t_min, settings.t_max):
        step = PerturbationStep(letter_target(letter), interpolant, t, alpha, label=f"break {format_word(word)}")
        try:
            candidate = apply_step(pair, step)
        except _RETRYABLE as e:
            transcript.record_attempt(word=format_word(word), t=t, outcome=str(e))
            continue
        in_domain = bool(apply_many(candidate.element(word), [q]).ok[0])
        moved = displacement(word, candidate, q)
        if in_domain and match < moved < math.inf:
            transcript.record_step(step, dict(step_residuals(pair, step, candidate), displacement=moved))
            logger.info(f"🔧 broke {format_word(word)} at {q:.6g} with t={t:.3g} (moved {moved:.3g})")
            return step, candidate
        transcript.record_attempt(word=format_word(word), t=t, outcome="not moved" if in_domain else "left domain")
    raise BudgetExhausted(f"no t in [{settings.t_min:g}, {settings.t_max:g}] moves {q:.6g} under "
                          f"{format_word(word)}", transcript.to_dict())


# ===========================================
# DISJOINTING ITINERARIES
# ===========================================
def _reverse_pass(inverse_word: ReducedWord, pair: GeneratorPair, start: complex, t: float, alpha: int,
                  allow_wrap: bool, max_steps: int) -> Optional[Tuple[List[PerturbationStep], GeneratorPair, complex]]:
    """First-collision perturbations along the inverse word from q_l; returns its final point q_0′"""
    current, steps = pair, []
    for _ in range(max_steps + 1):
        points = _open_route(inverse_word, current, start)
        k = _first_collision(points, allow_wrap)
        if k is None:
            return steps, current, points[-1]
        if len(steps) == max_steps:
            break
        letter = inverse_word.syllables[k - 1][0]
        zeros = dedupe_nodes(touched_points(inverse_word.syllables[:k - 1], points, letter))
        step = PerturbationStep(letter_target(letter), vanishing_interpolant(zeros, (points[k - 1], 1.0)),
                                t, alpha, label=f"reverse collision at {k}")
        current = apply_step(current, step)
        steps.append(step)
    return None


def _correction(word: ReducedWord, pair: GeneratorPair, q0: complex, q0_prime: complex, alpha: int,
                pinned: bool) -> PerturbationStep:
    """P(q_0) = (h_*(q_0′) − h_*(q_0)) / q_0^(α+1) with P vanishing on q_1′..q_l′"""
    forward = _open_route(word, pair, q0_prime)
    l = word.length
    zeros = forward[1:l] if pinned else forward[1:l + 1]
    target = letter_target(word.syllables[0][0])
    h = pair.conjugator(target)
    value = (h.evaluate(q0_prime) - h.evaluate(q0)) / q0 ** (alpha + 1)
    interpolant = vanishing_interpolant(dedupe_nodes(zeros), (q0, value))
    return PerturbationStep(target, interpolant, 1.0, alpha, label="endpoint correction")


def _distinct(points: Sequence[complex]) -> bool:
    return _first_collision(points) is None


def disjoint_itinerary(word: ReducedWord, pair: GeneratorPair, q: complex, mode: str = "free-endpoint",
                       settings: Optional[SplitSettings] = None, tol: float = TOLERANCES.SUBDIVISION_FLOOR,
                       alpha: Optional[int] = None,
                       transcript: Optional[PerturbationTranscript] = None) -> Tuple[List[PerturbationStep], GeneratorPair]:
    """Make the itinerary of q pairwise distinct on the range the mode demands

    free-endpoint / pinned-endpoint: q_0..q_{l-1} distinct and q_l unchanged.
    conjugate: the W3⁻¹∗W4∗W3 spelling distinct on q_0..q_{s0+l′-1}.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    settings = settings or SplitSettings()
    alpha = pair.alpha if alpha is None else alpha
    q = complex(q)
    if word.is_identity:
        return [], pair
    transcript = transcript or PerturbationTranscript("disjoint_itinerary", [format_word(word)], q)
    if mode == "conjugate":
        return _disjoint_conjugate(word, pair, q, settings, tol, alpha, transcript)

    match = TOLERANCES.MATCH_FACTOR * tol
    l = word.length
    points = _open_route(word, pair, q)
    closed_loop = abs(points[l] - points[0]) <= match
    if mode == "free-endpoint" and closed_loop:
        raise PreconditionError("free-endpoint mode needs q_0 != q_l")
    if mode == "pinned-endpoint":
        if not closed_loop:
            raise PreconditionError("pinned-endpoint mode needs q_0 = q_l")
        if not is_cyclically_reduced(word):
            raise PreconditionError(f"{format_word(word)} is conjugate to a shorter word; use conjugate mode")
    if _distinct(points[:l]):
        return [], pair

    pinned = mode == "pinned-endpoint"
    end = points[l]
    inverse_word = word_inverse(word)
    for t in t_grid(settings.t_min, settings.t_max):
        try:
            outcome = _reverse_pass(inverse_word, pair, end, t, alpha, pinned, settings.max_steps)
            if outcome is None:
                transcript.record_attempt(t=t, outcome="reverse pass over step budget")
                continue
            steps, star, q0_prime = outcome
            if abs(q0_prime - q) >= settings.tau:
                transcript.record_attempt(t=t, outcome=f"|q_0 - q_0'| = {abs(q0_prime - q):.3g} >= tau")
                continue
            correction = _correction(word, star, q, q0_prime, alpha, pinned)
            final = apply_step(star, correction)
            new_points = _open_route(word, final, q)
        except (PreconditionError,) + _RETRYABLE as e:
            transcript.record_attempt(t=t, outcome=str(e))
            continue
        if _distinct(new_points[:l]) and abs(new_points[l] - end) < PIN_TOL:
            current = pair
            for step in steps + [correction]:
                nxt = apply_step(current, step)
                transcript.record_step(step, step_residuals(current, step, nxt))
                current = nxt
            transcript.verification = {"endpoint_drift": abs(new_points[l] - end), "t": t}
            logger.info(f"🔧 disjointed itinerary of {format_word(word)} ({mode}) with t={t:.3g}, "
                        f"{len(steps) + 1} step(s)")
            return steps + [correction], final
        transcript.record_attempt(t=t, outcome="itinerary still collides or endpoint moved")
    raise BudgetExhausted(f"could not disjoint the itinerary of {format_word(word)} at {q:.6g}",
                          transcript.to_dict())


def _disjoint_conjugate(word: ReducedWord, pair: GeneratorPair, q: complex, settings: SplitSettings, tol: float,
                        alpha: int, transcript: PerturbationTranscript) -> Tuple[List[PerturbationStep], GeneratorPair]:
    w3, w4, _ = minimal_conjugate(word)
    spelling = w3.syllables + w4.syllables + word_inverse(w3).syllables
    limit = w3.length + w4.length
    points = _open_route(word, pair, q, spelling)
    if abs(points[-1] - points[0]) > TOLERANCES.MATCH_FACTOR * tol:
        raise PreconditionError("conjugate mode needs q_0 = q_l")

    current, steps = pair, []
    for _ in range(settings.max_steps):
        points = _open_route(word, current, q, spelling)
        k = _first_collision(points[:limit])
        if k is None:
            if steps:
                logger.info(f"🔧 disjointed conjugate spelling of {format_word(word)} in {len(steps)} step(s)")
            return steps, current
        letter = spelling[k - 1][0]
        zeros = dedupe_nodes(touched_points(spelling[:k - 1], points, letter))
        interpolant = vanishing_interpolant(zeros, (points[k - 1], 1.0))
        for t in t_grid(settings.t_min, settings.t_max):
            step = PerturbationStep(letter_target(letter), interpolant, t, alpha, label=f"collision at {k}")
            try:
                candidate = apply_step(current, step)
                new_points = _open_route(word, candidate, q, spelling)
            except (PreconditionError,) + _RETRYABLE as e:
                transcript.record_attempt(index=k, t=t, outcome=str(e))
                continue
            if _distinct(new_points[:k + 1]):
                transcript.record_step(step, step_residuals(current, step, candidate))
                current = candidate
                steps.append(step)
                break
            transcript.record_attempt(index=k, t=t, outcome="collision persists")
        else:
            raise BudgetExhausted(f"collision at spelling index {k} of {format_word(word)} survives the t grid",
                                  transcript.to_dict())
    raise BudgetExhausted(f"step budget {settings.max_steps} spent on {format_word(word)}", transcript.to_dict())


# ===========================================
# SPLITTING COMMON FIXED POINTS
# ===========================================
def _guard_commensurable(w_i: ReducedWord, w_j: ReducedWord):
    for other in (w_j, word_inverse(w_j)):
        same, witness = commensurable(w_i, other)
        if same:
            raise CommensurableWords(f"{format_word(w_i)} and {format_word(w_j)} are powers of "
                                     f"{format_word(witness)}", witness)


def case_label(w_i: ReducedWord, w_j: ReducedWord) -> str:
    """Which branch of the splitting case analysis the pair falls in"""
    w3_i, w4_i, _ = minimal_conjugate(w_i)
    w3_j, w4_j, _ = minimal_conjugate(w_j)
    if w4_i.length != w4_j.length:
        return "1"
    if w3_i.length or w3_j.length:
        return "2"
    first_i, first_j = w4_i.syllables[0], w4_j.syllables[0]
    if first_i[0] != first_j[0]:
        return "3a"
    if first_i[1] != first_j[1]:
        return "3b"
    return "3c"


def _incommensurable(u: ReducedWord, v: ReducedWord) -> bool:
    try:
        _guard_commensurable(u, v)
    except CommensurableWords:
        return False
    return True


def _reduce_at(word: ReducedWord, pair: GeneratorPair, q: complex, match: float, name: str,
               transcript: PerturbationTranscript, tail: bool = False) -> ReducedWord:
    """Primitive root when it fixes q; else the shortest prefix (or suffix) whose itinerary closes at q"""
    while True:
        root, n = primitive_root(word)
        if n > 1 and displacement(root, pair, q) <= match:
            transcript.reductions.append(f"{name}: {format_word(word)} -> root {format_word(root)} (n={n})")
            word = root
            continue
        points = _analytic_route(word, pair, q)
        returns = [k for k in range(1, word.length) if abs(points[k] - q) <= match]
        if not returns:
            return word
        if tail:
            part = ReducedWord(word.syllables[returns[-1]:], word.orders)
            transcript.reductions.append(f"{name}: {format_word(word)} -> suffix {format_word(part)}")
        else:
            part = ReducedWord(word.syllables[:returns[0]], word.orders)
            transcript.reductions.append(f"{name}: {format_word(word)} -> sub-word {format_word(part)}")
        word = part


def _working_words(w_i: ReducedWord, w_j: ReducedWord, pair: GeneratorPair, q: complex, match: float,
                   transcript: PerturbationTranscript) -> Tuple[ReducedWord, ReducedWord]:
    """Shortest incommensurable sub-words that still fix q"""
    head_i = _reduce_at(w_i, pair, q, match, "w_i", transcript)
    head_j = _reduce_at(w_j, pair, q, match, "w_j", transcript)
    if _incommensurable(head_i, head_j):
        return head_i, head_j
    tail_j = _reduce_at(w_j, pair, q, match, "w_j", transcript, tail=True)
    if _incommensurable(head_i, tail_j):
        return head_i, tail_j
    tail_i = _reduce_at(w_i, pair, q, match, "w_i", transcript, tail=True)
    if _incommensurable(tail_i, head_j):
        return tail_i, head_j
    transcript.reductions.append("reduced words are commensurable; using the words as given")
    return w_i, w_j


def _verify_split(pair: GeneratorPair, w_i: ReducedWord, w_j: ReducedWord, q: complex, delta: float,
                  count_before: int, tol: float, threads: int) -> Dict[str, Any]:
    match = TOLERANCES.MATCH_FACTOR * tol
    report: Dict[str, Any] = {"ok": False}
    ball = DiskDomain(q, delta, True)
    try:
        common = common_fixed_points(pair.element(w_i), pair.element(w_j), ball, tol, threads)
        count_after = displacement_winding(pair.element(w_i), Contour.circle(q, delta))
    except PseudogroupError as e:
        report["reason"] = f"{type(e).__name__}: {e}"
        return report
    common = [(a, b) for a, b in common if abs(a.location) > match]
    report.update(common_pairs=len(common), count_before=count_before, count_after=count_after)
    if common:
        report["reason"] = "common fixed point remains in the ball"
    elif count_after != count_before:
        report["reason"] = "fixed-point count of w_i in the ball changed"
    else:
        report["ok"] = True
    return report


def second_interpolant(pair: GeneratorPair, step: PerturbationStep, anchor: complex,
                       nodes: Sequence[complex]) -> PerturbationStep:
    """Follow-up step for an itinerary that passes the anchor twice

    After ``step`` the second pass enters h_t at x* = h_t⁻¹(h(anchor)) instead of
    the anchor; Q(x*) = 1 and Q vanishes on ``nodes``.
    """
    h = pair.conjugator(step.target)
    h_t = perturb_conjugator(h, step)
    x_star = complex(germ_inverse(h_t).evaluate(h.evaluate(complex(anchor))))
    interpolant = vanishing_interpolant(dedupe_nodes(nodes), (x_star, 1.0))
    return PerturbationStep(step.target, interpolant, step.t, step.alpha, label="second interpolant")


@dataclass(frozen=True)
class _Branch:
    """One candidate perturbation chain with the case path that produced it"""
    pair: GeneratorPair
    steps: Tuple[PerturbationStep, ...]
    path: Tuple[Dict[str, Any], ...]


@dataclass
class _SplitJob:
    w_i: ReducedWord
    w_j: ReducedWord
    q: complex
    delta: float
    count_before: int
    settings: SplitSettings
    tol: float
    threads: int
    transcript: PerturbationTranscript

    @property
    def match(self) -> float:
        return TOLERANCES.MATCH_FACTOR * self.tol

    def verify(self, pair: GeneratorPair) -> Dict[str, Any]:
        return _verify_split(pair, self.w_i, self.w_j, self.q, self.delta, self.count_before, self.tol,
                             self.threads)

    def separates(self, kept: ReducedWord, moved: ReducedWord, pair: GeneratorPair, q: complex) -> bool:
        """Both words defined at q and at least one of them moves it"""
        d_kept, d_moved = displacement(kept, pair, q), displacement(moved, pair, q)
        return math.isfinite(d_kept) and math.isfinite(d_moved) and max(d_kept, d_moved) > self.match

    def grid(self) -> List[float]:
        return t_grid(self.settings.t_min, self.settings.t_max)


def _same_points(a: Sequence[complex], b: Sequence[complex], gap: float) -> bool:
    return all(_near_any(p, b, gap) for p in a) and all(_near_any(p, a, gap) for p in b)


def _min_gap(points: Sequence[complex], gap: float) -> Optional[float]:
    distances = [abs(p - r) for i, p in enumerate(points) for r in points[i + 1:] if abs(p - r) > gap]
    return min(distances) if distances else None


def _drift(words: Sequence[ReducedWord], before: GeneratorPair, after: GeneratorPair,
           q: complex) -> Optional[float]:
    """Largest itinerary change of the words between two pairs"""
    try:
        return max(abs(x - y) for w in words
                   for x, y in zip(_analytic_route(w, before, q), _analytic_route(w, after, q)))
    except PreconditionError:
        return None


def _orientations(case: str, first: ReducedWord, second: ReducedWord) -> List[Tuple[ReducedWord, ReducedWord]]:
    """(kept, moved) orders worth trying"""
    w3_first, w4_first, _ = minimal_conjugate(first)
    w3_second, w4_second, _ = minimal_conjugate(second)
    if case == "1":
        return [(second, first)] if w4_first.length > w4_second.length else [(first, second)]
    if case == "2" and bool(w3_first.length) != bool(w3_second.length):
        return [(second, first)] if w3_first.length else [(first, second)]
    return [(first, second), (second, first)]


def _split_branches(job: _SplitJob, pair: GeneratorPair, first: ReducedWord, second: ReducedWord, q: complex,
                    depth: int, path: Tuple[Dict[str, Any], ...] = ()) -> Iterator[_Branch]:
    """Case dispatch at q; yields perturbed pairs on which first or second moves q"""
    if depth > job.settings.max_depth:
        job.transcript.record_attempt(depth=depth, outcome=f"recursion depth {job.settings.max_depth} reached")
        return
    case = case_label(first, second)
    path = path + ({"depth": depth, "case": case, "words": [format_word(first), format_word(second)],
                    "q": format_complex(q)},)
    try:
        first_points = _analytic_route(first, pair, q)
        second_points = _analytic_route(second, pair, q)
    except PreconditionError as e:
        job.transcript.record_attempt(depth=depth, case=case, outcome=str(e))
        return
    logger.debug(f"case {case} at depth {depth}: {format_word(first)} | {format_word(second)}")

    if case in ("1", "2") or not _same_points(first_points, second_points, TOLERANCES.INTERPOLATION_GAP):
        for kept, moved in _orientations(case, first, second):
            yield from _exclusive_route(job, pair, kept, moved, q, path)
    elif case == "3a":
        yield from _first_letter_route(job, pair, first, second, q, path)
    elif case == "3b":
        yield from _auxiliary_route(job, pair, first, second, q, depth, path)
    else:
        yield from _peel_route(job, pair, first, second, q, depth, path)


def _exclusive_route(job: _SplitJob, pair: GeneratorPair, kept: ReducedWord, moved: ReducedWord, q: complex,
                     path: Tuple[Dict[str, Any], ...], spread: bool = True) -> Iterator[_Branch]:
    """Perturb the moved word at an itinerary point the kept word never visits"""
    gap = TOLERANCES.INTERPOLATION_GAP
    try:
        kept_points = _analytic_route(kept, pair, q)
        moved_points = _analytic_route(moved, pair, q)
    except PreconditionError as e:
        job.transcript.record_attempt(moved=format_word(moved), outcome=str(e))
        return
    indices = [n for n in range(1, moved.length) if not _near_any(moved_points[n], kept_points, gap)]

    for n in indices:
        anchor = moved_points[n]
        letter = moved.syllables[n][0]
        zeros = dedupe_nodes([p for p in kept_points + moved_points if abs(p - anchor) > gap])
        double = sum(abs(p - anchor) <= gap for p in moved_points) > 1
        try:
            interpolant = vanishing_interpolant(zeros, (anchor, 1.0))
        except DegenerateNodes as e:
            job.transcript.record_attempt(moved=format_word(moved), index=n, outcome=str(e))
            continue
        for t in job.grid():
            step = PerturbationStep(letter_target(letter), interpolant, t, pair.alpha,
                                    label=f"exclusive point {n} of {format_word(moved)}")
            steps = [step]
            try:
                candidate = apply_step(pair, step)
                if double and displacement(moved, candidate, q) <= job.match:
                    steps.append(second_interpolant(pair, step, anchor, zeros))
                    candidate = apply_step(candidate, steps[-1])
            except (DegenerateNodes,) + _RETRYABLE as e:
                job.transcript.record_attempt(moved=format_word(moved), index=n, t=t, outcome=str(e))
                continue
            if not job.separates(kept, moved, candidate, q):
                job.transcript.record_attempt(moved=format_word(moved), index=n, t=t, outcome="q still fixed")
                continue
            info = {"construction": "exclusive point", "moved": format_word(moved), "index": n,
                    "letter": letter, "double_visit": double, "second_interpolant": len(steps) == 2, "t": t}
            yield _Branch(candidate, tuple(steps), path + (info,))

    if indices or not spread:
        return
    # every point of the moved word is visited by the kept word: spread its itinerary first
    mode = "pinned-endpoint" if is_cyclically_reduced(moved) else "conjugate"
    scratch = PerturbationTranscript("disjoint_itinerary", [format_word(moved)], q)
    try:
        pre, spread_pair = disjoint_itinerary(moved, pair, q, mode, job.settings, job.tol, transcript=scratch)
    except (PreconditionError, BudgetExhausted, DegenerateNodes) as e:
        job.transcript.attempts.extend(scratch.attempts)
        job.transcript.record_attempt(moved=format_word(moved), outcome=f"disjoint_itinerary: {e}")
        return
    job.transcript.attempts.extend(scratch.attempts)
    if not pre:
        return
    info = {"construction": "disjoint itinerary", "moved": format_word(moved), "mode": mode, "steps": len(pre)}
    for branch in _exclusive_route(job, spread_pair, kept, moved, q, path + (info,), spread=False):
        yield _Branch(branch.pair, tuple(pre) + branch.steps, branch.path)


def _first_letter_route(job: _SplitJob, pair: GeneratorPair, kept: ReducedWord, moved: ReducedWord, q: complex,
                        path: Tuple[Dict[str, Any], ...]) -> Iterator[_Branch]:
    """First letters differ: perturb the moved word's first conjugator at q itself"""
    gap = TOLERANCES.INTERPOLATION_GAP
    letter = moved.syllables[0][0]
    points = _analytic_route(kept, pair, q) + _analytic_route(moved, pair, q)
    try:
        interpolant = vanishing_interpolant(dedupe_nodes([p for p in points if abs(p - q) > gap]), (q, 1.0))
    except DegenerateNodes as e:
        job.transcript.record_attempt(moved=format_word(moved), outcome=str(e))
        return
    for t in job.grid():
        step = PerturbationStep(letter_target(letter), interpolant, t, pair.alpha,
                                label=f"first letter of {format_word(moved)}")
        try:
            candidate = apply_step(pair, step)
        except _RETRYABLE as e:
            job.transcript.record_attempt(moved=format_word(moved), t=t, outcome=str(e))
            continue
        if not job.separates(kept, moved, candidate, q):
            job.transcript.record_attempt(moved=format_word(moved), t=t, outcome="q still fixed")
            continue
        info = {"construction": "first letter", "moved": format_word(moved), "letter": letter, "t": t}
        yield _Branch(candidate, (step,), path + (info,))


def _auxiliary_route(job: _SplitJob, pair: GeneratorPair, kept: ReducedWord, moved: ReducedWord, q: complex,
                     depth: int, path: Tuple[Dict[str, Any], ...]) -> Iterator[_Branch]:
    """Same first letter, different powers: split kept from an auxiliary word first

    The auxiliary word runs the moved word up to the point where the kept word
    lands after one syllable, then undoes the kept word's first syllable, so it
    fixes q as well.
    """
    gap = TOLERANCES.INTERPOLATION_GAP
    kept_points = _analytic_route(kept, pair, q)
    moved_points = _analytic_route(moved, pair, q)
    letter, power = kept.syllables[0]
    tau = _min_gap(kept_points + moved_points, gap)
    for n in range(1, moved.length + 1):
        if abs(moved_points[n] - kept_points[1]) > gap:
            continue
        aux = make_reduced(moved.syllables[:n] + ((letter, -power),), moved.orders)
        if aux.is_identity or not _incommensurable(kept, aux):
            job.transcript.record_attempt(moved=format_word(moved), index=n,
                                          outcome=f"auxiliary word {format_word(aux) or 'id'} is unusable")
            continue
        info = {"construction": "auxiliary word", "aux": format_word(aux), "index": n}
        for sub in _split_branches(job, pair, kept, aux, q, depth + 1):
            drift = _drift((kept, moved), pair, sub.pair, q)
            entry = dict(info, tau=tau, drift=drift,
                         tracking=drift is not None and tau is not None and drift < tau / 4)
            prefix = path + (entry,) + sub.path
            if job.separates(kept, moved, sub.pair, q):
                yield _Branch(sub.pair, sub.steps, prefix)
                continue
            # kept and moved still share q: finish with an exclusive point of the moved word
            for more in _exclusive_route(job, sub.pair, kept, moved, q, ()):
                yield _Branch(more.pair, sub.steps + more.steps, prefix + more.path)


def _rotate(word: ReducedWord) -> ReducedWord:
    return make_reduced(word.syllables[1:] + word.syllables[:1], word.orders)


def _peel_route(job: _SplitJob, pair: GeneratorPair, first: ReducedWord, second: ReducedWord, q: complex,
                depth: int, path: Tuple[Dict[str, Any], ...]) -> Iterator[_Branch]:
    """Equal first syllables: conjugate both words by it and move q along"""
    count = 0
    while first.syllables[0] == second.syllables[0] and count < first.length:
        q = _analytic_route(ReducedWord(first.syllables[:1], first.orders), pair, q)[1]
        first, second = _rotate(first), _rotate(second)
        count += 1
    if first.syllables[0] == second.syllables[0]:
        job.transcript.record_attempt(words=[format_word(first), format_word(second)],
                                      outcome="peeling never separates the first syllables")
        return
    info = {"construction": "peel", "count": count, "q": format_complex(q)}
    yield from _split_branches(job, pair, first, second, q, depth + 1, path + (info,))


def split_common_fixed_point(w_i: ReducedWord, w_j: ReducedWord, pair: GeneratorPair, q: complex,
                             delta: Optional[float] = None, settings: Optional[SplitSettings] = None,
                             tol: float = TOLERANCES.SUBDIVISION_FLOOR,
                             threads: int = 1) -> Tuple[GeneratorPair, PerturbationTranscript]:
    """Perturb the conjugators so that w_i and w_j share no fixed point in B(q, δ)

    w_i keeps its fixed-point count in B(δ). Raises CommensurableWords,
    PreconditionError or BudgetExhausted (with the transcript).
    """
    settings = settings or SplitSettings()
    delta = settings.delta if delta is None else float(delta)
    q = complex(q)
    match = TOLERANCES.MATCH_FACTOR * tol
    if abs(q) <= match:
        raise PreconditionError("0 is a common fixed point of every pair of words; only q != 0 can be split")
    _guard_commensurable(w_i, w_j)
    transcript = PerturbationTranscript("split_common_fixed_point", [format_word(w_i), format_word(w_j)], q, delta)

    for name, word in (("w_i", w_i), ("w_j", w_j)):
        moved = displacement(word, pair, q)
        if not moved <= match:
            raise PreconditionError(f"{q:.6g} is not a fixed point of {name} = {format_word(word)} "
                                    f"(displacement {moved:.3g})")

    logger.info("=" * 60)
    logger.info(f"SPLIT {format_word(w_i)} | {format_word(w_j)} at q={q:.6g}, delta={delta:g}")
    logger.info("=" * 60)

    count_before = displacement_winding(pair.element(w_i), Contour.circle(q, delta))
    kept_i, kept_j = _working_words(w_i, w_j, pair, q, match, transcript)
    transcript.case = case_label(kept_i, kept_j)
    logger.info(f"📐 case {transcript.case}: working words {format_word(kept_i)} | {format_word(kept_j)}")

    job = _SplitJob(w_i, w_j, q, delta, count_before, settings, tol, threads, transcript)
    budget = settings.max_steps * len(job.grid())
    for tried, branch in enumerate(_split_branches(job, pair, kept_i, kept_j, q, 0), start=1):
        report = job.verify(branch.pair)
        if report["ok"]:
            current = pair
            for step in branch.steps:
                nxt = apply_step(current, step)
                transcript.record_step(step, step_residuals(current, step, nxt))
                current = nxt
            report.update(w_i_displacement=displacement(w_i, branch.pair, q),
                          w_j_displacement=displacement(w_j, branch.pair, q))
            transcript.verification = report
            transcript.path = list(branch.path)
            cases = " -> ".join(e["case"] for e in branch.path if "case" in e)
            logger.info(f"✅ split at {q:.6g} via {cases} in {len(branch.steps)} step(s)")
            return branch.pair, transcript
        transcript.record_attempt(path=[e.get("case", e.get("construction")) for e in branch.path],
                                  t=branch.path[-1].get("t"), outcome=report.get("reason", "rejected"))
        if tried >= budget:
            break

    logger.warning(f"⚠️ split at {q:.6g} exhausted {len(transcript.attempts)} attempt(s)")
    raise BudgetExhausted(f"no verified split of {format_word(w_i)} | {format_word(w_j)} at {q:.6g}",
                          transcript.to_dict())


def _nonzero_common(w_i: ReducedWord, w_j: ReducedWord, pair: GeneratorPair, region: DiskDomain, tol: float,
                    threads: int) -> List[complex]:
    match = TOLERANCES.MATCH_FACTOR * tol
    return [a.location for a, _ in common_fixed_points(pair.element(w_i), pair.element(w_j), region, tol, threads)
            if abs(a.location) > match]


def eliminate_all_common_fixed_points(w_i: ReducedWord, w_j: ReducedWord, pair: GeneratorPair,
                                      region: Optional[DiskDomain] = None, settings: Optional[SplitSettings] = None,
                                      tol: float = TOLERANCES.SUBDIVISION_FLOOR,
                                      threads: int = 1) -> Tuple[GeneratorPair, PerturbationTranscript]:
    """Split nonzero common fixed points in the region until none is left"""
    settings = settings or SplitSettings()
    region = region or DiskDomain(pair.disc.center, pair.disc.radius, True)
    match = TOLERANCES.MATCH_FACTOR * tol
    _guard_commensurable(w_i, w_j)
    transcript = PerturbationTranscript("eliminate_all_common_fixed_points", [format_word(w_i), format_word(w_j)])

    common = _nonzero_common(w_i, w_j, pair, region, tol, threads)
    if not common:
        transcript.verification = {"common_points": 0}
        logger.info(f"no common fixed point of {format_word(w_i)} | {format_word(w_j)} besides 0")
        return pair, transcript

    fixed = [r.location for word in (w_i, w_j)
             for r in isolate_fixed_points(pair.element(word), region, tol, threads=threads)]
    gaps = [abs(a - b) for i, a in enumerate(fixed) for b in fixed[i + 1:] if abs(a - b) > match]
    delta = min([settings.delta, 0.5 * min(abs(q) for q in common)] + [0.25 * g for g in gaps])
    transcript.delta = delta
    logger.info(f"🎯 {len(common)} common fixed point(s); ball radius {delta:.3g}")

    remaining = common
    split = 0
    # a split may move or remove other common points: recount the whole region every round
    while remaining:
        if split >= settings.max_steps:
            raise BudgetExhausted(f"{len(remaining)} common fixed point(s) left after {split} split(s)",
                                  transcript.to_dict())
        q = remaining[0]
        try:
            pair, sub = split_common_fixed_point(w_i, w_j, pair, q, delta, settings, tol, threads)
        except BudgetExhausted as e:
            transcript.rounds.append(e.transcript)
            raise BudgetExhausted(f"stopped after {split} split(s): {e}", transcript.to_dict()) from e
        transcript.rounds.append(sub.to_dict())
        split += 1
        remaining = _nonzero_common(w_i, w_j, pair, region, tol, threads)
    transcript.verification = {"common_points": len(common), "split": split, "remaining": 0}
    return pair, transcript
