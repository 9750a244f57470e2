"""
Pseudogroup Engine
Reduced words bound to a generator pair on a base disc, with the recursive
domain-of-definition semantics, itineraries and domain sampling
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from modules.config import TOLERANCES, ConfigValidation, RunConfig
from modules.errors import OutOfDomain
from modules.germ_core import (
    DiskDomain,
    Germ,
    OriginType,
    compose,
    germ_from_spec,
    identity,
    inverse,
    origin_type,
    tangency_order,
    verify_torsion,
)
from modules.word_algebra import (
    Orders,
    ReducedWord,
    Syllable,
    format_word,
    inverse as word_inverse,
    minimal_conjugate,
)

logger = logging.getLogger(__name__)


# ===========================================
# MEMBERSHIP MODES
# ===========================================
@dataclass(frozen=True)
class Membership:
    """How domain tests are made during letterwise evaluation

    closed: non-strict inequalities; slack: every radius enlarged by slack;
    analytic: only the germs' own radii are enforced (no base-disc recursion).
    """
    closed: bool = False
    slack: float = 0.0
    analytic: bool = False

    def within(self, z: np.ndarray, radius: float) -> np.ndarray:
        dist = np.abs(z)
        with np.errstate(invalid="ignore"):
            if self.slack > 0:
                return dist <= radius + self.slack
            if self.closed:
                return dist <= radius
            return dist < radius


OPEN = Membership()
CLOSED = Membership(closed=True)
ANALYTIC = Membership(analytic=True)


# ===========================================
# GENERATORS
# ===========================================
@dataclass(frozen=True, eq=False)
class Generator:
    """core germ, optionally conjugated as h⁻¹∘core∘h"""
    letter: str
    core: Germ
    conjugator: Optional[Germ] = None
    core_inverse: Germ = field(init=False, repr=False)
    conjugator_inverse: Optional[Germ] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "core_inverse", inverse(self.core))
        object.__setattr__(self, "conjugator_inverse",
                           inverse(self.conjugator) if self.conjugator is not None else None)

    @property
    def tilde(self) -> Germ:
        """The conjugated generator as a single germ"""
        if self.conjugator is None:
            return self.core
        return compose(self.conjugator_inverse, compose(self.core, self.conjugator),
                       label=f"{self.letter}~")

    def with_conjugator(self, h: Germ) -> "Generator":
        return Generator(self.letter, self.core, h)

    def step(self, z: np.ndarray, sign: int, disc_radius: float, mode: Membership):
        """One letter; returns (values, ok, slope)"""
        core = self.core if sign > 0 else self.core_inverse
        if self.conjugator is None:
            ok = mode.within(z, core.radius) if not mode.analytic else core.inside(z)
            values = core.evaluate(np.where(ok, z, 0j), strict=False)
            slopes = core.derivative(np.where(ok, z, 0j), strict=False)
        else:
            h, h_inv = self.conjugator, self.conjugator_inverse
            if mode.analytic:
                r_h, r_core, r_back = h.radius, core.radius, h_inv.radius
            else:
                r_h = TOLERANCES.SHRINK * h.radius
                r_core = disc_radius
                r_back = TOLERANCES.SHRINK * h_inv.radius
            ok = mode.within(z, r_h) & h.inside(z)
            y = h.evaluate(np.where(ok, z, 0j), strict=False)
            ok &= mode.within(y, r_core) & core.inside(y)
            y2 = core.evaluate(np.where(ok, y, 0j), strict=False)
            ok &= mode.within(y2, r_back) & h_inv.inside(y2)
            values = h_inv.evaluate(np.where(ok, y2, 0j), strict=False)
            slopes = (h.derivative(np.where(ok, z, 0j), strict=False)
                      * core.derivative(np.where(ok, y, 0j), strict=False)
                      * h_inv.derivative(np.where(ok, y2, 0j), strict=False))
        ok = ok & np.isfinite(values) & np.isfinite(slopes)
        return values, ok, slopes

    def to_spec(self) -> Dict[str, Any]:
        spec = self.core.to_spec()
        if self.conjugator is not None:
            spec["conjugator"] = self.conjugator.to_spec()
        return spec


@dataclass(frozen=True, eq=False)
class GeneratorPair:
    """f̃, g̃ on the base disc D"""
    f: Generator
    g: Generator
    disc: DiskDomain
    orders: Orders = Orders()
    alpha: int = 0

    def generator(self, letter: str) -> Generator:
        return self.f if letter == "a" else self.g

    @property
    def f_tilde(self) -> Germ:
        return self.f.tilde

    @property
    def g_tilde(self) -> Germ:
        return self.g.tilde

    def conjugator(self, target: int) -> Germ:
        gen = self.f if target == 1 else self.g
        return gen.conjugator if gen.conjugator is not None else _identity_conjugator(gen, self.disc.radius)

    def with_conjugator(self, target: int, h: Germ) -> "GeneratorPair":
        if target == 1:
            return GeneratorPair(self.f.with_conjugator(h), self.g, self.disc, self.orders, self.alpha)
        return GeneratorPair(self.f, self.g.with_conjugator(h), self.disc, self.orders, self.alpha)

    def element(self, word: ReducedWord, closed: bool = False) -> "PseudogroupElement":
        return PseudogroupElement(word, self, closed)


def _identity_conjugator(gen: Generator, disc_radius: float) -> Germ:
    """Identity wide enough that conjugating by it leaves the letter's domain unchanged"""
    ring = disc_radius * np.exp(2j * np.pi * np.arange(TOLERANCES.BOUNDARY_SAMPLES) / TOLERANCES.BOUNDARY_SAMPLES)
    images = np.concatenate([gen.core.evaluate(ring, strict=False),
                             gen.core_inverse.evaluate(ring, strict=False)])
    if not np.all(np.isfinite(images)):
        return identity(TOLERANCES.LINEAR_RADIUS)
    reach = max(disc_radius, float(np.max(np.abs(images))))
    return identity(1.1 * reach / TOLERANCES.SHRINK)


def letter_target(letter: str) -> int:
    """a → conjugator 1, b → conjugator 2"""
    return 1 if letter == "a" else 2


# ===========================================
# ELEMENTS
# ===========================================
@dataclass(frozen=True, eq=False)
class PseudogroupElement:
    """A reduced word evaluated on the pair with recursive domains

    ``spelling`` (optional) replaces the reduced syllables for unreduced
    evaluation; ``fictitious`` is the syllable-itinerary index left out.
    """
    word: ReducedWord
    pair: GeneratorPair
    closed: bool = False
    spelling: Optional[Tuple[Syllable, ...]] = None
    fictitious: Optional[int] = None

    @property
    def syllables(self) -> Tuple[Syllable, ...]:
        return self.spelling if self.spelling is not None else self.word.syllables

    @property
    def membership(self) -> Membership:
        return CLOSED if self.closed else OPEN

    @property
    def text(self) -> str:
        return format_word(self.word)

    def letter_sequence(self) -> List[Tuple[str, int, int]]:
        """(letter, sign, syllable index) per applied letter"""
        out = []
        for idx, (letter, exponent) in enumerate(self.syllables):
            sign = 1 if exponent > 0 else -1
            out.extend([(letter, sign, idx)] * abs(exponent))
        return out


@dataclass
class Evaluation:
    """Vectorized evaluation result"""
    values: np.ndarray
    ok: np.ndarray
    failing_index: np.ndarray
    slopes: Optional[np.ndarray] = None
    trail: Optional[List[np.ndarray]] = None


def _evaluate(el: PseudogroupElement, z: np.ndarray, mode: Membership, want_slope: bool = False,
              keep_trail: bool = False) -> Evaluation:
    z = np.asarray(z, dtype=complex)
    R = el.pair.disc.radius
    ok = np.isfinite(z)
    if not mode.analytic:
        ok &= mode.within(z, R)
    failing = np.where(ok, -1, 0)
    current = np.where(ok, z, 0j)
    slopes = np.ones_like(current)
    trail = [current.copy()] if keep_trail else None
    seq = el.letter_sequence()
    for k, (letter, sign, _) in enumerate(seq, start=1):
        values, ok_k, d = el.pair.generator(letter).step(current, sign, R, mode)
        newly = ok & ~ok_k
        failing = np.where(newly, k, failing)
        ok &= ok_k
        if k < len(seq) and not mode.analytic:
            inside = mode.within(values, R)
            newly = ok & ~inside
            failing = np.where(newly, k, failing)
            ok &= inside
        current = np.where(ok, values, 0j)
        if want_slope:
            slopes = np.where(ok, slopes * d, 0j)
        if keep_trail:
            trail.append(np.where(ok_k, values, np.nan + 0j))
    result = np.where(ok, current, np.nan + 0j)
    return Evaluation(result, ok, failing, slopes if want_slope else None, trail)


def apply_many(el: PseudogroupElement, z: Sequence[complex], mode: Optional[Membership] = None) -> Evaluation:
    """Vectorized apply; ``failing_index`` is -1 where the point is in the domain"""
    return _evaluate(el, np.asarray(z, dtype=complex), mode or el.membership)


def apply(el: PseudogroupElement, z: complex) -> complex:
    """W(z) for z in the recursively defined domain; OutOfDomain carries the failing prefix"""
    ev = _evaluate(el, np.array([z], dtype=complex), el.membership)
    if not ev.ok[0]:
        index = int(ev.failing_index[0])
        raise OutOfDomain(f"{el.text or 'id'}: prefix {index} leaves the domain at z={complex(z):.6g}",
                          index=index, point=complex(z))
    return complex(ev.values[0])


def element_derivative(el: PseudogroupElement, z: complex) -> complex:
    ev = _evaluate(el, np.array([z], dtype=complex), el.membership, want_slope=True)
    if not ev.ok[0]:
        raise OutOfDomain(f"{el.text}: derivative outside the domain", index=int(ev.failing_index[0]))
    return complex(ev.slopes[0])


@dataclass
class Itinerary:
    """Points after each syllable (or letter)"""
    points: Tuple[complex, ...]
    granularity: str = "syllable"
    success: bool = True
    failing_index: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"points": [[p.real, p.imag] for p in self.points], "granularity": self.granularity,
                "success": self.success, "failing_index": self.failing_index}


def itinerary(el: PseudogroupElement, z: complex, granularity: str = "syllable") -> Itinerary:
    if granularity not in ("syllable", "letter"):
        raise ValueError(f"unknown granularity {granularity!r}")
    ev = _evaluate(el, np.array([z], dtype=complex), el.membership, keep_trail=True)
    seq = el.letter_sequence()
    trail = [complex(t[0]) for t in ev.trail]
    success = bool(ev.ok[0])
    failing = None if success else int(ev.failing_index[0])
    reached = len(seq) if success else failing

    if granularity == "letter":
        points = [complex(z)] + trail[1:reached + 1]
        return Itinerary(tuple(points), "letter", success, failing)

    # syllable boundaries: letter counts at the end of each syllable
    ends, count = [], 0
    for _, exponent in el.syllables:
        count += abs(exponent)
        ends.append(count)
    points = [complex(z)] + [trail[end] for end in ends if end <= reached]
    failing_syllable = None
    if not success:
        # syllable holding the failing letter, 0 when z itself is outside D
        failing_syllable = next((idx for idx, end in enumerate(ends, start=1) if end >= failing), 0) if failing else 0
        if failing not in ends and 0 < failing < len(trail) and np.isfinite(trail[failing]):
            points.append(trail[failing])
    if el.fictitious is not None and len(points) > el.fictitious:
        points.pop(el.fictitious)
    return Itinerary(tuple(points), "syllable", success, failing_syllable)


def conjugate_spelling_element(word: ReducedWord, pair: GeneratorPair, closed: bool = False) -> PseudogroupElement:
    """Element spelled W3⁻¹ ∗ W4 ∗ W3 without reduction, fictitious point marked"""
    w3, w4, simplified = minimal_conjugate(word)
    spelling = w3.syllables + w4.syllables + word_inverse(w3).syllables
    fictitious = len(w3.syllables) + len(w4.syllables) if simplified else None
    return PseudogroupElement(word, pair, closed, spelling=spelling, fictitious=fictitious)


# ===========================================
# MAPS FOR CONTOUR WORK
# ===========================================
@dataclass(frozen=True)
class ElementMap:
    """Vectorized value/slope view of an element under a membership mode"""
    element: PseudogroupElement
    mode: Membership

    def evaluate(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        ev = _evaluate(self.element, np.asarray(z, dtype=complex), self.mode, want_slope=True)
        return ev.values, np.where(ev.ok, ev.slopes, np.nan + 0j)

    @property
    def label(self) -> str:
        return self.element.text


def extension_neighborhood(el: PseudogroupElement, margin: float) -> ElementMap:
    """Letterwise evaluation with every membership test relaxed by ``margin``"""
    if margin < 0:
        raise ValueError("margin must be >= 0")
    return ElementMap(el, Membership(closed=True, slack=margin))


def analytic_map(el: PseudogroupElement) -> ElementMap:
    """Letterwise continuation limited only by the germs' own radii"""
    return ElementMap(el, ANALYTIC)


# ===========================================
# DOMAIN SAMPLING
# ===========================================
def domain_grid(el: PseudogroupElement, resolution: int, threads: int = 1,
                mode: Optional[Membership] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x, y, in_domain) over the n×n grid on the bounding square of D"""
    if resolution < 8:
        raise ValueError("domain grid resolution must be >= 8")
    disc = el.pair.disc
    axis = np.linspace(-disc.radius, disc.radius, resolution)
    xs = disc.center.real + axis
    ys = disc.center.imag + axis
    mode = mode or el.membership

    def row(j: int) -> np.ndarray:
        zs = xs + 1j * ys[j]
        return _evaluate(el, zs, mode).ok

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(row, range(resolution)))
    X, Y = np.meshgrid(xs, ys)
    return X.ravel(), Y.ravel(), np.concatenate(rows)


def domain_sample(el: PseudogroupElement, resolution: int, threads: int = 1) -> List[complex]:
    """Grid points of D where apply succeeds, row-major"""
    x, y, mask = domain_grid(el, resolution, threads)
    return [complex(a, b) for a, b, m in zip(x, y, mask) if m]


# ===========================================
# CONFIG BINDING
# ===========================================
def _generator_from_spec(letter: str, spec: Dict[str, Any]) -> Generator:
    core = germ_from_spec({k: v for k, v in spec.items() if k != "conjugator"}, label=letter)
    conj_spec = spec.get("conjugator")
    conjugator = germ_from_spec(conj_spec, label=f"h{letter_target(letter)}") if conj_spec else None
    return Generator(letter, core, conjugator)


def pair_from_config(cfg: RunConfig) -> GeneratorPair:
    """Build the generator pair described by a run config"""
    return GeneratorPair(
        f=_generator_from_spec("a", cfg.f_spec),
        g=_generator_from_spec("b", cfg.g_spec),
        disc=DiskDomain(0j, cfg.disc_radius, False),
        orders=Orders(*cfg.orders),
        alpha=cfg.alpha,
    )


def pair_to_specs(pair: GeneratorPair) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    return pair.f.to_spec(), pair.g.to_spec()


def _check_generator(gen: Generator, order: Optional[int], disc_radius: float, alpha: int,
                     failed: List[str]):
    name = f"generator {gen.letter}"
    if gen.core.torsion is not None and not verify_torsion(gen.core, gen.core.torsion):
        failed.append(f"{name}: declared torsion order {gen.core.torsion} does not verify")
    if order != gen.core.torsion:
        failed.append(f"{name}: orders entry {order or 'inf'} disagrees with torsion "
                      f"{gen.core.torsion or 'inf'}")
    kind = origin_type(gen.core)
    if kind == OriginType.CREMER_CANDIDATE:
        failed.append(f"{name}: multiplier at 0 is an irrational rotation of a non-linear germ "
                      f"(possible Cremer point)")
    if gen.conjugator is not None and alpha >= 1 and tangency_order(gen.conjugator) < alpha:
        failed.append(f"{name}: conjugator is not tangent to the identity to order {alpha}")
    ring = 1.02 * disc_radius * np.exp(2j * np.pi * np.arange(128) / 128)
    for sign in (1, -1):
        values, ok, _ = gen.step(ring, sign, disc_radius, ANALYTIC)
        if not np.all(ok):
            failed.append(f"{name}^{sign:+d} is not evaluable on a neighborhood of the closed disc")
    values, ok, _ = gen.step(np.zeros(1, dtype=complex), 1, disc_radius, ANALYTIC)
    if not ok[0] or abs(values[0]) > 1e-12:
        failed.append(f"{name}: 0 is not fixed")


def validate_run_config(cfg: RunConfig) -> ConfigValidation:
    """Check a run document against families, orders, torsion and the Cremer-exclusion rule"""
    failed: List[str] = [f"unknown key {k}" for k in cfg.unknown_keys]
    if not cfg.disc_radius > 0:
        failed.append("generators.disc_radius must be positive")
    if cfg.jet_order < TOLERANCES.MIN_RUN_JET_ORDER:
        failed.append(f"analysis.jet_order must be >= {TOLERANCES.MIN_RUN_JET_ORDER}")
    if cfg.alpha < 0:
        failed.append("generators.alpha must be >= 0")
    if cfg.threads < 1:
        failed.append("run.threads must be >= 1")
    if cfg.domain_map.resolution < 8:
        failed.append("analysis.domain_map.resolution must be >= 8")
    hyp = cfg.hyperbolic
    if min(hyp.max_syllables, hyp.max_abs_exponent, hyp.separation_n) < 1 or hyp.separation_eps <= 0:
        failed.append("analysis.hyperbolic bounds must be >= 1 and separation_eps > 0")
    try:
        Orders(*cfg.orders)
    except ValueError as e:
        failed.append(str(e))

    if not failed:
        try:
            pair = pair_from_config(cfg)
            _check_generator(pair.f, cfg.orders[0], cfg.disc_radius, cfg.alpha, failed)
            _check_generator(pair.g, cfg.orders[1], cfg.disc_radius, cfg.alpha, failed)
        except Exception as e:
            failed.append(f"generator spec: {e}")

    if failed:
        return ConfigValidation(False, f"{len(failed)} check(s) failed", failed)
    return ConfigValidation(True, "configuration valid", [])
