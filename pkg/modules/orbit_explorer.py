"""
Orbit Explorer
Word enumeration, hyperbolic fixed-point harvesting, multiplier groups and
budgeted certificates of pairwise-disjoint orbits
"""

import itertools
import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from modules.config import TOLERANCES, HyperbolicSettings, format_complex
from modules.errors import ContourOutOfDomain, NonConvergence, SeparationFailure
from modules.fixed_point_engine import FixedPointRecord, isolate_fixed_points
from modules.germ_core import DiskDomain
from modules.pseudogroup_engine import OPEN, GeneratorPair
from modules.word_algebra import (
    LETTERS,
    Orders,
    ReducedWord,
    commensurable,
    cyclic_normal_form,
    format_word,
    inverse as word_inverse,
    primitive_root,
)

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]
ORIGIN_EXCLUSION = 1e-6
_MOVES = (("a", 1), ("a", -1), ("b", 1), ("b", -1))


class OrbitVerdict(Enum):
    YES = "yes"
    NO_WITHIN_BUDGET = "no-within-budget"
    BUDGET_EXHAUSTED = "budget-exhausted"


@dataclass(frozen=True)
class MultiplierGroup:
    """{λⁿ : n ∈ ℤ} stored through (log|λ|, arg λ)"""
    log_modulus: float
    argument: float

    @classmethod
    def from_multiplier(cls, multiplier: complex, tol_hyp: float = TOLERANCES.HYPERBOLIC_TOL) -> "MultiplierGroup":
        multiplier = complex(multiplier)
        if abs(abs(multiplier) - 1.0) <= tol_hyp:
            raise ValueError(f"multiplier {multiplier:.6g} is on the unit circle")
        return cls(math.log(abs(multiplier)), math.atan2(multiplier.imag, multiplier.real))

    @property
    def generator(self) -> complex:
        return complex(math.exp(self.log_modulus) * np.exp(1j * self.argument))

    def to_dict(self) -> Dict[str, Any]:
        return {"log_modulus": self.log_modulus, "argument": self.argument,
                "generator": format_complex(self.generator)}


@dataclass
class OrbitExploration:
    """Cells reached breadth-first from a start point"""
    start: complex
    points: Dict[Cell, complex]
    depth: int
    exhausted: bool
    found: bool = False

    @property
    def cells(self) -> FrozenSet[Cell]:
        return frozenset(self.points)


@dataclass
class OrbitCertificate:
    """Representative hyperbolic point with its stabilizer word and explored orbit"""
    location: complex
    word: ReducedWord
    multiplier: complex
    group: MultiplierGroup
    exploration: OrbitExploration
    margins: List[Dict[str, Any]] = field(default_factory=list)
    findings: List[str] = field(default_factory=list)

    @property
    def cells(self) -> FrozenSet[Cell]:
        return self.exploration.cells

    @property
    def min_margin(self) -> Optional[float]:
        return min((m["margin"] for m in self.margins), default=None)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "word": format_word(self.word),
            "location": format_complex(self.location),
            "multiplier": format_complex(self.multiplier),
            "group": self.group.to_dict(),
            "budget": {"depth": self.exploration.depth, "cells": len(self.exploration.points),
                       "exhausted": self.exploration.exhausted},
            "visited_cells": [list(c) for c in sorted(self.exploration.points)],
            "margins": list(self.margins),
            "findings": list(self.findings),
        }


# ===========================================
# WORD ENUMERATION
# ===========================================
def _exponents(order: Optional[int], bound: int) -> List[int]:
    if order:
        return list(range(1, min(order - 1, bound) + 1))
    return [e for k in range(1, bound + 1) for e in (k, -k)]


def enumerate_words(orders: Orders, max_syllables: int, max_abs_exponent: int,
                    representatives: bool = False) -> Iterator[ReducedWord]:
    """Every reduced word within the bounds once, shortest first"""
    if max_syllables < 1 or max_abs_exponent < 1:
        raise ValueError("enumeration bounds must be >= 1")
    ranges = {letter: _exponents(orders.of(letter), max_abs_exponent) for letter in LETTERS}
    for length in range(1, max_syllables + 1):
        for first in LETTERS:
            spelled = [LETTERS[(LETTERS.index(first) + k) % 2] for k in range(length)]
            for exps in itertools.product(*(ranges[letter] for letter in spelled)):
                word = ReducedWord(tuple(zip(spelled, exps)), orders)
                if representatives and cyclic_normal_form(word) != word:
                    continue
                yield word


# ===========================================
# HYPERBOLIC HARVEST
# ===========================================
def cell_of(z: complex, size: float) -> Cell:
    return int(math.floor(z.real / size)), int(math.floor(z.imag / size))


def _neighbors(cell: Cell) -> Iterator[Cell]:
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            yield cell[0] + dx, cell[1] + dy


def _root_key(word: ReducedWord) -> str:
    """Same key for a word, its powers and its inverse"""
    forward = format_word(primitive_root(word)[0])
    backward = format_word(primitive_root(word_inverse(word))[0])
    return min(forward, backward)


def find_hyperbolic(pair: GeneratorPair, region: Optional[DiskDomain] = None,
                    settings: Optional[HyperbolicSettings] = None, tol: float = TOLERANCES.SUBDIVISION_FLOOR,
                    threads: int = 1,
                    tol_hyp: float = TOLERANCES.HYPERBOLIC_TOL) -> List[Tuple[ReducedWord, FixedPointRecord]]:
    """Hyperbolic nonzero fixed points of the enumerated words, one per (cell, primitive root)"""
    settings = settings or HyperbolicSettings()
    if region is None:
        radius = settings.region_radius or pair.disc.radius
        region = DiskDomain(pair.disc.center, radius, True)
    words = list(itertools.islice(
        enumerate_words(pair.orders, settings.max_syllables, settings.max_abs_exponent,
                        settings.conjugacy_representatives),
        settings.max_words))
    logger.info(f"🔍 scanning {len(words)} word(s) for hyperbolic fixed points")

    def analyze(word: ReducedWord) -> List[FixedPointRecord]:
        try:
            return isolate_fixed_points(pair.element(word), region, tol, word=word, tol_hyp=tol_hyp)
        except (SeparationFailure, ContourOutOfDomain, NonConvergence) as e:
            logger.warning(f"⚠️ skipping {format_word(word)}: {e}")
            return []

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(analyze, words))

    size = TOLERANCES.MATCH_FACTOR * tol
    seen: Dict[Tuple[Cell, str], complex] = {}
    out: List[Tuple[ReducedWord, FixedPointRecord]] = []
    for word, records in zip(words, results):
        key = _root_key(word)
        for rec in records:
            if not rec.hyperbolic or abs(rec.location) < ORIGIN_EXCLUSION:
                continue
            if settings.require_in_domain and not rec.in_domain:
                continue
            cell = cell_of(rec.location, size)
            if any((c, key) in seen for c in _neighbors(cell)):
                continue
            seen[(cell, key)] = rec.location
            out.append((word, rec))
    logger.info(f"found {len(out)} hyperbolic record(s)")
    return out


# ===========================================
# MULTIPLIERS
# ===========================================
def _wrap(angle: float) -> float:
    return abs((angle + math.pi) % (2 * math.pi) - math.pi)


def separation_margin(m1: MultiplierGroup, m2: MultiplierGroup, N: int) -> float:
    """min over 0<|n|,|m|≤N of max(|n·log|λ1| − m·log|λ2||, wrapped arg gap)"""
    if N < 1:
        raise ValueError("N must be >= 1")
    best = math.inf
    powers = [k for k in range(-N, N + 1) if k]
    for n in powers:
        for m in powers:
            gap = max(abs(n * m1.log_modulus - m * m2.log_modulus),
                      _wrap(n * m1.argument - m * m2.argument))
            best = min(best, gap)
    return best


def multiplier_separation(m1: MultiplierGroup, m2: MultiplierGroup, N: int, eps: float) -> bool:
    if eps <= 0:
        raise ValueError("eps must be > 0")
    return separation_margin(m1, m2, N) > eps


# ===========================================
# ORBITS
# ===========================================
def explore_orbit(p: complex, pair: GeneratorPair, depth: int, max_cells: int, cell_size: float,
                  target: Optional[complex] = None) -> OrbitExploration:
    """Breadth-first images under a^±1, b^±1, kept only inside D"""
    disc = pair.disc
    p = complex(p)
    points = {cell_of(p, cell_size): p}
    found = target is not None and abs(p - target) <= cell_size
    frontier = [p] if abs(p - disc.center) < disc.radius else []
    exhausted = False
    level = 0
    while frontier and level < depth and not found and not exhausted:
        level += 1
        zs = np.array(frontier, dtype=complex)
        nxt: List[complex] = []
        for letter, sign in _MOVES:
            values, ok, _ = pair.generator(letter).step(zs, sign, disc.radius, OPEN)
            ok &= np.abs(values - disc.center) < disc.radius
            for v in values[ok]:
                c = cell_of(complex(v), cell_size)
                if c in points:
                    continue
                if len(points) >= max_cells:
                    exhausted = True
                    break
                points[c] = complex(v)
                nxt.append(complex(v))
                if target is not None and abs(v - target) <= cell_size:
                    found = True
            if exhausted or found:
                break
        frontier = nxt
    return OrbitExploration(p, points, level, exhausted, found)


def same_orbit(p: complex, q: complex, pair: GeneratorPair, depth: int,
               max_cells: int = HyperbolicSettings.max_cells,
               tol: float = TOLERANCES.SUBDIVISION_FLOOR) -> OrbitVerdict:
    """Semi-decision: yes once q's cell is reached, never a definitive no"""
    exploration = explore_orbit(p, pair, depth, max_cells, TOLERANCES.MATCH_FACTOR * tol, target=complex(q))
    if exploration.found:
        return OrbitVerdict.YES
    if exploration.exhausted:
        return OrbitVerdict.BUDGET_EXHAUSTED
    return OrbitVerdict.NO_WITHIN_BUDGET


def _set_distance(a: Sequence[complex], b: Sequence[complex]) -> float:
    xa = np.array(a, dtype=complex)
    xb = np.array(b, dtype=complex)
    return float(np.min(np.abs(xa[:, None] - xb[None, :])))


def stabilizer_findings(certificate: OrbitCertificate,
                        records: Sequence[Tuple[ReducedWord, FixedPointRecord]],
                        tol: float = TOLERANCES.SUBDIVISION_FLOOR) -> List[str]:
    """Stabilizing words found at the representative that are not powers of one primitive word"""
    match = TOLERANCES.MATCH_FACTOR * tol
    findings = []
    for word, rec in records:
        if abs(rec.location - certificate.location) >= match:
            continue
        same = commensurable(word, certificate.word)[0] or commensurable(word_inverse(word), certificate.word)[0]
        if not same:
            findings.append(f"{format_word(word)} also fixes {format_complex(certificate.location)} but is not "
                            f"commensurable with {format_word(certificate.word)}")
    return findings


def disjoint_hyperbolic_orbits(pair: GeneratorPair, region: Optional[DiskDomain] = None,
                               settings: Optional[HyperbolicSettings] = None,
                               tol: float = TOLERANCES.SUBDIVISION_FLOOR, threads: int = 1,
                               records: Optional[List[Tuple[ReducedWord, FixedPointRecord]]] = None
                               ) -> List[OrbitCertificate]:
    """Greedy certificates with separated multiplier groups and cell-disjoint orbits

    Records are taken in word-enumeration order (shortest stabilizer first); the
    certificates come back ordered by |location| descending.
    """
    settings = settings or HyperbolicSettings()
    if records is None:
        records = find_hyperbolic(pair, region, settings, tol, threads)
    size = TOLERANCES.MATCH_FACTOR * tol

    logger.info("=" * 60)
    logger.info(f"ORBIT CERTIFICATES: depth {settings.orbit_depth}, {settings.max_cells} cells, "
                f"N={settings.separation_n}, eps={settings.separation_eps:g}")
    logger.info("=" * 60)

    certificates: List[OrbitCertificate] = []
    for word, rec in records:
        group = MultiplierGroup.from_multiplier(rec.multiplier)
        if any(not multiplier_separation(group, c.group, settings.separation_n, settings.separation_eps)
               for c in certificates):
            logger.debug(f"{format_word(word)} at {rec.location:.6g}: multiplier not separated")
            continue
        exploration = explore_orbit(rec.location, pair, settings.orbit_depth, settings.max_cells, size)
        if any(exploration.cells & c.cells for c in certificates):
            logger.debug(f"{format_word(word)} at {rec.location:.6g}: orbit meets an earlier certificate")
            continue
        certificates.append(OrbitCertificate(rec.location, word, rec.multiplier, group, exploration))
        logger.info(f"📜 certificate {len(certificates)}: {format_word(word)} at {rec.location:.6g} "
                    f"(λ={rec.multiplier:.6g}, {len(exploration.points)} cells)")

    certificates.sort(key=lambda c: (-abs(c.location), c.location.real, c.location.imag))

    for i, cert in enumerate(certificates):
        mine = list(cert.exploration.points.values())
        for j, other in enumerate(certificates):
            if i != j:
                cert.margins.append({"index": j, "word": format_word(other.word),
                                     "margin": _set_distance(mine, list(other.exploration.points.values()))})
        cert.findings = stabilizer_findings(cert, records, tol)
    if not certificates:
        logger.info("no certificate within budget")
    return certificates


def certificate_rows(certificates: Sequence[OrbitCertificate]) -> List[Dict[str, Any]]:
    """Summary table rows"""
    rows = []
    for cert in certificates:
        rows.append({
            "word": format_word(cert.word),
            "re": float(cert.location.real),
            "im": float(cert.location.imag),
            "multiplier_re": float(cert.multiplier.real),
            "multiplier_im": float(cert.multiplier.imag),
            "cells": len(cert.exploration.points),
            "depth": cert.exploration.depth,
            "min_margin": cert.min_margin,
            "findings": len(cert.findings),
        })
    return rows
