"""
Fixed Point Engine
Argument-principle counting, quadtree isolation, Newton polishing,
multiplicity and hyperbolicity of fixed points, and count stability checks
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from modules.config import TOLERANCES, format_complex
from modules.errors import ContourOutOfDomain, NonConvergence, SeparationFailure
from modules.germ_core import DiskDomain, Germ
from modules.pseudogroup_engine import (
    CLOSED,
    ElementMap,
    PseudogroupElement,
    analytic_map,
    apply_many,
)
from modules.word_algebra import ReducedWord, format_word

logger = logging.getLogger(__name__)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


# ===========================================
# MAPS
# ===========================================
@dataclass(frozen=True)
class AnalyticMap:
    """Any vectorized holomorphic map: NaN marks points where it is undefined"""
    value_fn: Callable[[np.ndarray], np.ndarray]
    slope_fn: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    def evaluate(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        with np.errstate(all="ignore"):
            values = np.asarray(self.value_fn(z), dtype=complex) * np.ones_like(z)
            slopes = np.asarray(self.slope_fn(z), dtype=complex) * np.ones_like(z)
        return values, slopes

    @classmethod
    def from_germ(cls, g: Germ) -> "AnalyticMap":
        return cls(lambda z: g.evaluate(z, strict=False), lambda z: g.derivative(z, strict=False),
                   g.label)


EvaluableMap = Union[AnalyticMap, ElementMap]


def as_map(obj: Any) -> EvaluableMap:
    """Elements count on their analytic continuation"""
    if isinstance(obj, PseudogroupElement):
        return analytic_map(obj)
    if isinstance(obj, Germ):
        return AnalyticMap.from_germ(obj)
    if isinstance(obj, (AnalyticMap, ElementMap)):
        return obj
    raise TypeError(f"cannot evaluate {type(obj).__name__} as a map")


# ===========================================
# CONTOURS
# ===========================================
@dataclass(frozen=True)
class Contour:
    """Circle (center, radius) or axis-aligned rectangle [x0, x1] × [y0, y1]"""
    kind: str
    center: complex = 0j
    radius: float = 0.0
    x0: float = 0.0
    x1: float = 0.0
    y0: float = 0.0
    y1: float = 0.0
    samples: int = TOLERANCES.CONTOUR_BASE_SAMPLES

    @classmethod
    def circle(cls, center: complex, radius: float, samples: int = TOLERANCES.CONTOUR_BASE_SAMPLES):
        return cls("circle", complex(center), float(radius), samples=samples)

    @classmethod
    def square(cls, center: complex, half_width: float, samples: int = TOLERANCES.CONTOUR_BASE_SAMPLES):
        c = complex(center)
        return cls.rectangle(c.real - half_width, c.real + half_width,
                             c.imag - half_width, c.imag + half_width, samples)

    @classmethod
    def rectangle(cls, x0: float, x1: float, y0: float, y1: float,
                  samples: int = TOLERANCES.CONTOUR_BASE_SAMPLES):
        center = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
        return cls("rectangle", center, 0.0, float(x0), float(x1), float(y0), float(y1), samples)

    @property
    def half_width(self) -> float:
        if self.kind == "circle":
            return self.radius
        return 0.5 * max(self.x1 - self.x0, self.y1 - self.y0)

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        if self.kind == "circle":
            return abs(z - self.center) <= self.radius + margin
        return (self.x0 - margin <= z.real <= self.x1 + margin
                and self.y0 - margin <= z.imag <= self.y1 + margin)

    def nodes(self, m: int) -> Tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes and dz weights for m samples"""
        if self.kind == "circle":
            theta = 2 * np.pi * np.arange(m) / m
            e = np.exp(1j * theta)
            return self.center + self.radius * e, 1j * self.radius * e * (2 * np.pi / m)
        corners = [complex(self.x0, self.y0), complex(self.x1, self.y0),
                   complex(self.x1, self.y1), complex(self.x0, self.y1)]
        panels = max(1, m // (4 * len(_GL_NODES)))
        zs, ws = [], []
        for k in range(4):
            a, b = corners[k], corners[(k + 1) % 4]
            edges = np.linspace(0.0, 1.0, panels + 1)
            for p in range(panels):
                pa = a + (b - a) * edges[p]
                pb = a + (b - a) * edges[p + 1]
                zs.append(0.5 * (pa + pb) + 0.5 * (pb - pa) * _GL_NODES)
                ws.append(0.5 * (pb - pa) * _GL_WEIGHTS)
        return np.concatenate(zs), np.concatenate(ws)

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "circle":
            return {"kind": "circle", "center": format_complex(self.center), "radius": self.radius}
        return {"kind": "rectangle", "x": [self.x0, self.x1], "y": [self.y0, self.y1]}


def winding_integral(F: Any, contour: Contour, m: Optional[int] = None,
                     eta: float = TOLERANCES.SEPARATION_ETA) -> complex:
    """(1/2πi)∮ (W′−1)/(W−z) dz at m samples"""
    F = as_map(F)
    z, dz = contour.nodes(m or contour.samples)
    values, slopes = F.evaluate(z)
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(slopes))):
        raise ContourOutOfDomain("contour leaves the evaluable region", index=0)
    displacement = values - z
    gap = float(np.min(np.abs(displacement)))
    if gap < eta:
        raise SeparationFailure(f"fixed point within {gap:.3g} of contour", contour, gap)
    return complex(np.sum((slopes - 1.0) / displacement * dz) / (2j * np.pi))


def _winding(F: EvaluableMap, contour: Contour, eta: float) -> Tuple[int, complex]:
    m = contour.samples
    previous = None
    while m <= TOLERANCES.CONTOUR_MAX_SAMPLES:
        value = winding_integral(F, contour, m, eta)
        n = int(round(value.real))
        if abs(value - n) < TOLERANCES.WINDING_ACCEPT:
            if previous == n:
                return n, value
            previous = n
        else:
            previous = None
        m *= 2
    raise NonConvergence(f"winding quadrature unsettled after {TOLERANCES.CONTOUR_MAX_SAMPLES} samples")


def displacement_winding(el: Any, contour: Contour, eta: float = TOLERANCES.SEPARATION_ETA) -> int:
    """Number of fixed points inside the contour, with multiplicity"""
    return _winding(as_map(el), contour, eta)[0]


# ===========================================
# RECORDS
# ===========================================
@dataclass(frozen=True)
class FixedPointRecord:
    """Polished fixed point"""
    location: complex
    multiplicity: int
    multiplier: complex
    hyperbolic: bool = False
    near_boundary: bool = False
    word: Optional[ReducedWord] = None
    in_domain: Optional[bool] = None

    @property
    def word_text(self) -> str:
        return format_word(self.word) if self.word is not None else ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "word": self.word_text,
            "re": float(self.location.real),
            "im": float(self.location.imag),
            "multiplicity": int(self.multiplicity),
            "multiplier_re": float(self.multiplier.real),
            "multiplier_im": float(self.multiplier.imag),
            "hyperbolic": bool(self.hyperbolic),
            "near_boundary": bool(self.near_boundary),
            "in_domain": self.in_domain,
        }


def classify(record: FixedPointRecord, tol_hyp: float = TOLERANCES.HYPERBOLIC_TOL) -> FixedPointRecord:
    """hyperbolic iff simple and | |λ| − 1 | > tol_hyp"""
    hyperbolic = record.multiplicity == 1 and abs(abs(record.multiplier) - 1.0) > tol_hyp
    return replace(record, hyperbolic=hyperbolic)


# ===========================================
# NEWTON
# ===========================================
def _newton(F: EvaluableMap, seeds: np.ndarray, iterations: int = 100,
            multiplicity: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized Newton on W(z) − z; returns (points, residuals) with NaN on failure"""
    z = np.asarray(seeds, dtype=complex).copy()
    with np.errstate(all="ignore"):
        for _ in range(iterations):
            values, slopes = F.evaluate(z)
            residual = values - z
            step = multiplicity * residual / (slopes - 1.0)
            bad = ~np.isfinite(step)
            z = np.where(bad, np.nan + 0j, z - step)
            if np.all(bad | (np.abs(step) <= 1e-16 * np.maximum(1.0, np.abs(z)))):
                break
        values, _ = F.evaluate(z)
        residual = np.abs(values - z)
    residual = np.where(np.isfinite(residual), residual, np.inf)
    return z, residual


def newton_polish(el: Any, z0: complex, multiplicity: int = 1) -> Tuple[complex, float]:
    z, residual = _newton(as_map(el), np.array([z0], dtype=complex), multiplicity=multiplicity)
    return complex(z[0]), float(residual[0])


def newton_sweep(el: Any, region: DiskDomain, seeds: int = 2000,
                 match_tol: float = 10 * TOLERANCES.SUBDIVISION_FLOOR) -> List[complex]:
    """Distinct fixed points reached from a dense seed grid over the region"""
    F = as_map(el)
    side = int(np.ceil(np.sqrt(seeds * 4 / np.pi)))
    axis = np.linspace(-region.radius, region.radius, side)
    X, Y = np.meshgrid(axis, axis)
    grid = region.center + (X + 1j * Y).ravel()
    grid = grid[np.abs(grid - region.center) <= region.radius]
    z, residual = _newton(F, grid)
    keep = (residual < TOLERANCES.POLISH_RESIDUAL) & (np.abs(z - region.center) <= region.radius)
    roots: List[complex] = []
    for p in z[keep]:
        if all(abs(p - q) >= match_tol for q in roots):
            roots.append(complex(p))
    return sorted(roots, key=lambda c: (round(c.real, 12), round(c.imag, 12)))


# ===========================================
# ISOLATION
# ===========================================
@dataclass
class _Square:
    address: str
    contour: Contour
    count: Optional[int]
    evaluable: bool = True


def _stabilized_count(F: EvaluableMap, p: complex, r0: float, eta: float) -> Optional[int]:
    """Winding count about p once two consecutive halvings agree"""
    previous = None
    r = r0
    for _ in range(8):
        try:
            n = _winding(F, Contour.circle(p, r), eta)[0]
        except (SeparationFailure, ContourOutOfDomain, NonConvergence):
            n = None
        if n is not None and n == previous:
            return n
        previous = n
        r *= 0.5
    return None


def _cut(contour: Contour, attempt: int) -> List[Contour]:
    """Four children; the cut point is shifted by one grid step per attempt"""
    w = contour.x1 - contour.x0
    h = contour.y1 - contour.y0
    step = 1.0 / 16.0
    cx = contour.x0 + w * (0.5 + 0.0625 + step * attempt * 0.61803398875 % 0.25)
    cy = contour.y0 + h * (0.5 + 0.03125 + step * attempt * 0.41421356237 % 0.25)
    return [Contour.rectangle(contour.x0, cx, contour.y0, cy),
            Contour.rectangle(cx, contour.x1, contour.y0, cy),
            Contour.rectangle(contour.x0, cx, cy, contour.y1),
            Contour.rectangle(cx, contour.x1, cy, contour.y1)]


def _intersects_disc(contour: Contour, region: DiskDomain) -> bool:
    c = region.center
    nx = min(max(c.real, contour.x0), contour.x1)
    ny = min(max(c.imag, contour.y0), contour.y1)
    return abs(complex(nx, ny) - c) <= region.radius


class _Isolator:
    """Quadtree driven by winding counts"""

    def __init__(self, F: EvaluableMap, region: DiskDomain, tol: float, eta: float):
        self.F = F
        self.region = region
        self.tol = tol
        self.eta = eta
        self.coarse_floor = region.radius / 64.0

    def split(self, square: _Square) -> List[_Square]:
        last_error = None
        for attempt in range(TOLERANCES.SHIFT_RETRIES + 1):
            children = []
            try:
                for i, child in enumerate(_cut(square.contour, attempt)):
                    if not _intersects_disc(child, self.region):
                        continue
                    try:
                        count = _winding(self.F, child, self.eta)[0]
                        children.append(_Square(square.address + str(i), child, count, True))
                    except ContourOutOfDomain:
                        children.append(_Square(square.address + str(i), child, None, False))
                return [c for c in children if c.count != 0]
            except SeparationFailure as e:
                last_error = e
                logger.debug(f"square {square.address or 'root'}: shifting cut (attempt {attempt + 1})")
        raise SeparationFailure(f"square {square.address or 'root'} could not be split without "
                                f"touching a fixed point", square.contour,
                                getattr(last_error, "displacement", 0.0))

    def _seeds(self, contour: Contour) -> np.ndarray:
        xs = np.linspace(contour.x0, contour.x1, 5)[1:-1]
        ys = np.linspace(contour.y0, contour.y1, 5)[1:-1]
        X, Y = np.meshgrid(xs, ys)
        seeds = (X + 1j * Y).ravel()
        return np.concatenate(([contour.center], seeds))

    def _newton_inside(self, contour: Contour, multiplicity: int = 1) -> List[complex]:
        z, residual = _newton(self.F, self._seeds(contour), multiplicity=multiplicity)
        margin = 1e-12 * max(1.0, contour.half_width)
        found: List[complex] = []
        for p, r in zip(z, residual):
            if r < TOLERANCES.POLISH_RESIDUAL and contour.contains(complex(p), margin):
                if all(abs(p - q) >= 10 * self.tol for q in found):
                    found.append(complex(p))
        return found

    def resolve(self, square: _Square) -> Tuple[List[Tuple[complex, int]], List[_Square]]:
        """(roots with multiplicity, children)"""
        contour = square.contour
        hw = contour.half_width
        if not square.evaluable:
            if hw > self.coarse_floor:
                return [], self.split(square)
            return [(p, self._fallback_multiplicity(p)) for p in self._newton_inside(contour)], []

        count = square.count
        found = self._newton_inside(contour, 1)
        if found:
            p = found[0]
            if count == 1 and len(found) == 1:
                m = _stabilized_count(self.F, p, 0.5 * hw, self.eta)
                if m == 1:
                    return [(p, 1)], []
            elif count > 1 and len(found) == 1:
                _, slope = self.F.evaluate(np.array([p]))
                if abs(slope[0] - 1.0) < TOLERANCES.MULTIPLE_ROOT_SLOPE:
                    p_m, _ = newton_polish(self.F, p, multiplicity=count)
                    if contour.contains(p_m, 1e-12):
                        p = p_m
                    if _stabilized_count(self.F, p, 0.5 * hw, self.eta) == count:
                        return [(p, count)], []
        if hw <= self.tol:
            p = found[0] if found else contour.center
            logger.debug(f"cluster of {count} at floor square {square.address}")
            return [(p, count)], []
        return [], self.split(square)

    def _fallback_multiplicity(self, p: complex) -> int:
        _, slope = self.F.evaluate(np.array([p]))
        if abs(slope[0] - 1.0) >= TOLERANCES.MULTIPLE_ROOT_SLOPE:
            return 1
        return _stabilized_count(self.F, p, 1e-3 * self.region.radius, self.eta) or 1

    def root(self) -> _Square:
        R = self.region.radius
        last_error = None
        for attempt in range(TOLERANCES.SHIFT_RETRIES + 1):
            contour = Contour.square(self.region.center, R * (1.0 + 0.01 * attempt))
            try:
                return _Square("", contour, _winding(self.F, contour, self.eta)[0], True)
            except SeparationFailure as e:
                last_error = e
            except ContourOutOfDomain:
                return _Square("", contour, None, False)
        raise last_error


def isolate_fixed_points(el: Any, region: DiskDomain, tol: float = TOLERANCES.SUBDIVISION_FLOOR,
                         eta: float = TOLERANCES.SEPARATION_ETA, word: Optional[ReducedWord] = None,
                         threads: int = 1, tol_hyp: float = TOLERANCES.HYPERBOLIC_TOL) -> List[FixedPointRecord]:
    """All fixed points in the region, polished and classified, ordered by square address"""
    F = as_map(el)
    element = el if isinstance(el, PseudogroupElement) else getattr(el, "element", None)
    if word is None and element is not None:
        word = element.word
    iso = _Isolator(F, region, tol, eta)

    level = [iso.root()]
    found: List[Tuple[str, complex, int]] = []
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        while level:
            outcomes = list(pool.map(iso.resolve, level))
            next_level = []
            for square, (roots, children) in zip(level, outcomes):
                found.extend((square.address, p, m) for p, m in roots)
                next_level.extend(children)
            level = next_level

    match_tol = TOLERANCES.MATCH_FACTOR * tol
    records: List[FixedPointRecord] = []
    for address, p, m in sorted(found, key=lambda item: item[0]):
        if abs(p - region.center) > region.radius + tol:
            continue
        if any(abs(p - r.location) < match_tol for r in records):
            continue
        _, slope = F.evaluate(np.array([p]))
        in_domain, near = _domain_flags(element, p, tol)
        records.append(classify(FixedPointRecord(p, int(m), complex(slope[0]), False, near, word, in_domain),
                                tol_hyp))
    logger.debug(f"isolated {len(records)} fixed point(s) for {format_word(word) if word else F}")
    return records


def _domain_flags(element: Optional[PseudogroupElement], p: complex, tol: float) -> Tuple[Optional[bool], bool]:
    if element is None:
        return None, False
    closed = PseudogroupElement(element.word, element.pair, True, element.spelling, element.fictitious)
    ring = p + 2 * tol * np.exp(2j * np.pi * np.arange(8) / 8)
    ev = apply_many(closed, np.concatenate(([p], ring)), CLOSED)
    inside = bool(ev.ok[0])
    return inside, bool(np.any(ev.ok[1:] != inside))


def common_fixed_points(el_i: Any, el_j: Any, region: DiskDomain, tol: float = TOLERANCES.SUBDIVISION_FLOOR,
                        threads: int = 1) -> List[Tuple[FixedPointRecord, FixedPointRecord]]:
    """Pairs of fixed points of the two maps closer than the matching tolerance"""
    match_tol = TOLERANCES.MATCH_FACTOR * tol
    rec_i = isolate_fixed_points(el_i, region, tol, threads=threads)
    rec_j = isolate_fixed_points(el_j, region, tol, threads=threads)
    pairs = [(a, b) for a in rec_i for b in rec_j if abs(a.location - b.location) < match_tol]
    if region.contains(0j, slack=tol) and not any(abs(a.location) < match_tol for a, _ in pairs):
        pairs.insert(0, (_origin_record(el_i), _origin_record(el_j)))
    return pairs


def _origin_record(el: Any) -> FixedPointRecord:
    F = as_map(el)
    _, slope = F.evaluate(np.array([0j]))
    word = el.word if isinstance(el, PseudogroupElement) else None
    return classify(FixedPointRecord(0j, 1, complex(slope[0]), word=word))


def _grid(region: DiskDomain, resolution: int) -> np.ndarray:
    axis = np.linspace(-region.radius, region.radius, resolution)
    X, Y = np.meshgrid(axis, axis)
    pts = region.center + (X + 1j * Y).ravel()
    return pts[np.abs(pts - region.center) <= region.radius]


def verify_count_stability(el: Any, perturbed_el: Any, balls: Sequence[DiskDomain],
                           region: Optional[DiskDomain] = None, resolution: int = 96,
                           eta: float = TOLERANCES.SEPARATION_ETA) -> bool:
    """Same winding count in every ball, and no new fixed point on the compact remainder"""
    F, G = as_map(el), as_map(perturbed_el)
    for ball in balls:
        contour = Contour.circle(ball.center, ball.radius)
        before = _winding(F, contour, eta)[0]
        after = _winding(G, contour, eta)[0]
        if before != after:
            logger.info(f"count in ball at {ball.center:.4g} changed: {before} -> {after}")
            return False

    if region is None:
        if isinstance(el, PseudogroupElement):
            region = el.pair.disc
        else:
            reach = max((abs(b.center) + b.radius for b in balls), default=1.0)
            region = DiskDomain(0j, 2.0 * reach, True)
    pts = _grid(region, resolution)
    for ball in balls:
        pts = pts[np.abs(pts - ball.center) > ball.radius]
    if pts.size == 0:
        return True
    fv, _ = F.evaluate(pts)
    gv, _ = G.evaluate(pts)
    usable = np.isfinite(fv) & np.isfinite(gv)
    if not np.any(usable):
        return True
    tau = float(np.min(np.abs(fv[usable] - pts[usable])))
    moved = float(np.min(np.abs(gv[usable] - pts[usable])))
    if moved < 0.5 * tau:
        logger.info(f"displacement on the compact remainder fell to {moved:.3g} (tau {tau:.3g})")
        return False
    return True
