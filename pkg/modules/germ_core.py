"""
Germ Core
Holomorphic germs fixing 0 as expression trees over primitive families,
with exact evaluation, chain-rule derivatives, truncated jets and the analytic metric
"""

import cmath
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from modules.config import TOLERANCES, format_complex, parse_complex
from modules.errors import EmptyDomain, NewtonDivergence, OutOfDomain

logger = logging.getLogger(__name__)

ArrayLike = Union[complex, float, np.ndarray, Sequence[complex]]


class OriginType(Enum):
    """Classification of the multiplier at 0"""
    HYPERBOLIC = "hyperbolic"
    ROOT_OF_UNITY = "root_of_unity"
    PARABOLIC = "parabolic"
    LINEAR_ROTATION = "linear_rotation"
    CREMER_CANDIDATE = "cremer_candidate"


@dataclass(frozen=True)
class Jet:
    """Truncated Taylor coefficients c_1..c_K at 0 (no constant term)"""
    coefficients: Tuple[complex, ...]

    @property
    def order(self) -> int:
        return len(self.coefficients)

    @property
    def is_invertible(self) -> bool:
        return abs(self.coefficients[0]) > 0.0

    def as_array(self) -> np.ndarray:
        return np.array(self.coefficients, dtype=complex)

    def __getitem__(self, k: int) -> complex:
        """c_k, 1-based"""
        return self.coefficients[k - 1]

    def to_dict(self) -> Dict[str, Any]:
        return {"order": self.order, "coefficients": [format_complex(c) for c in self.coefficients]}


@dataclass(frozen=True)
class DiskDomain:
    """Disc membership oracle"""
    center: complex = 0j
    radius: float = 1.0
    closed: bool = False

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"DiskDomain radius must be positive, got {self.radius}")

    def contains(self, z: ArrayLike, slack: float = 0.0):
        dist = np.abs(np.asarray(z, dtype=complex) - self.center)
        if self.closed or slack > 0:
            return dist <= self.radius + slack
        return dist < self.radius

    def shrink(self, factor: float) -> "DiskDomain":
        return DiskDomain(self.center, self.radius * factor, self.closed)

    def to_dict(self) -> Dict[str, Any]:
        return {"center": format_complex(self.center), "radius": self.radius, "closed": self.closed}


# ===========================================
# SERIES ARITHMETIC
# ===========================================
def _series_mul(a: np.ndarray, b: np.ndarray, K: int) -> np.ndarray:
    return np.convolve(a, b)[: K + 1]


def jet_compose(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Coefficients of outer∘inner; both arrays hold c_1..c_K"""
    K = len(outer)
    inner_full = np.concatenate(([0j], np.asarray(inner, dtype=complex)))
    acc = np.zeros(K + 1, dtype=complex)
    acc[0] = outer[K - 1]
    for k in range(K - 1, 0, -1):
        acc = _series_mul(acc, inner_full, K)
        acc[0] += outer[k - 1]
    acc = _series_mul(acc, inner_full, K)
    out = np.zeros(K, dtype=complex)
    out[: len(acc) - 1] = acc[1:]
    return out


def jet_revert(coefficients: np.ndarray) -> np.ndarray:
    """Compositional inverse of a jet with c_1 ≠ 0"""
    c = np.asarray(coefficients, dtype=complex)
    K = len(c)
    if c[0] == 0:
        raise ValueError("jet with c_1 = 0 is not invertible")
    w = np.zeros(K, dtype=complex)
    w[0] = 1.0 / c[0]
    # each pass fixes one more order
    for _ in range(K):
        residual = jet_compose(c, w)
        residual[0] -= 1.0
        w = w - residual / c[0]
    return w


def jet_distance(a: Jet, b: Jet) -> float:
    """max_k |c_k|^{1/k} over the coefficientwise difference"""
    K = min(a.order, b.order)
    diff = np.abs(a.as_array()[:K] - b.as_array()[:K])
    if not np.any(diff > 0):
        return 0.0
    k = np.arange(1, K + 1, dtype=float)
    return float(np.max(diff ** (1.0 / k)))


# ===========================================
# EXPRESSION NODES
# ===========================================
@dataclass(frozen=True, eq=False)
class _Node:
    _cache: Dict[Any, Any] = field(default_factory=dict, init=False, repr=False, compare=False)

    has_inverse = False
    is_linear = False

    def value(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def slope(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _jet(self, K: int) -> np.ndarray:
        raise NotImplementedError

    def jet(self, K: int) -> np.ndarray:
        key = ("jet", K)
        if key not in self._cache:
            self._cache[key] = self._jet(K)
        return self._cache[key].copy()

    def inverse_radius(self, radius: float) -> Optional[float]:
        """Analytic radius of the inverse, when the family has one"""
        return None

    def spec(self) -> Dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class LinearNode(_Node):
    multiplier: complex = 1.0

    is_linear = True

    def value(self, z):
        return self.multiplier * z

    def slope(self, z):
        return np.full_like(z, self.multiplier, dtype=complex)

    def _jet(self, K):
        out = np.zeros(K, dtype=complex)
        out[0] = self.multiplier
        return out

    def inverse_radius(self, radius):
        return radius * abs(self.multiplier)

    def spec(self):
        return {"family": "linear", "parameters": {"lambda": format_complex(self.multiplier)}}


@dataclass(frozen=True, eq=False)
class MobiusNode(_Node):
    """z ↦ λz/(1 − az)"""
    a: complex = 0.0
    multiplier: complex = 1.0

    def value(self, z):
        return self.multiplier * z / (1.0 - self.a * z)

    def slope(self, z):
        return self.multiplier / (1.0 - self.a * z) ** 2

    def _jet(self, K):
        k = np.arange(K)
        return self.multiplier * np.power(complex(self.a), k)

    def inverse_radius(self, radius):
        # inverse z/(λ + az) has its pole at -λ/a
        if self.a == 0:
            return radius * abs(self.multiplier)
        return abs(self.multiplier / self.a)

    def spec(self):
        return {"family": "mobius",
                "parameters": {"a": format_complex(self.a), "lambda": format_complex(self.multiplier)}}


@dataclass(frozen=True, eq=False)
class PolynomialNode(_Node):
    """z ↦ Σ c_k z^k, coefficients from order 1"""
    coefficients: Tuple[complex, ...] = (1.0,)

    def _full(self) -> np.ndarray:
        return np.concatenate(([0j], np.array(self.coefficients, dtype=complex)))

    def value(self, z):
        return npoly.polyval(z, self._full())

    def slope(self, z):
        return npoly.polyval(z, npoly.polyder(self._full()))

    def _jet(self, K):
        out = np.zeros(K, dtype=complex)
        n = min(K, len(self.coefficients))
        out[:n] = np.array(self.coefficients[:n], dtype=complex)
        return out

    def spec(self):
        return {"family": "polynomial",
                "parameters": {"coefficients": [format_complex(c) for c in self.coefficients]}}


@dataclass(frozen=True, eq=False)
class PerturbedNode(_Node):
    """z ↦ h(z) + Q(z), Q given by coefficients from order 1"""
    base: "Germ" = None
    coefficients: Tuple[complex, ...] = ()

    @property
    def has_inverse(self):
        return self.base.node.has_inverse

    def _full(self) -> np.ndarray:
        return np.concatenate(([0j], np.array(self.coefficients, dtype=complex)))

    def value(self, z):
        return self.base.node.value(z) + npoly.polyval(z, self._full())

    def slope(self, z):
        return self.base.node.slope(z) + npoly.polyval(z, npoly.polyder(self._full()))

    def _jet(self, K):
        out = self.base.node.jet(K)
        n = min(K, len(self.coefficients))
        out[:n] += np.array(self.coefficients[:n], dtype=complex)
        return out

    def spec(self):
        return {"family": "perturbed",
                "parameters": {"base": self.base.to_spec(),
                               "coefficients": [format_complex(c) for c in self.coefficients]}}


@dataclass(frozen=True, eq=False)
class ComposeNode(_Node):
    outer: "Germ" = None
    inner: "Germ" = None

    @property
    def has_inverse(self):
        return self.outer.node.has_inverse or self.inner.node.has_inverse

    @property
    def is_linear(self):
        return self.outer.node.is_linear and self.inner.node.is_linear

    def value(self, z):
        return self.outer.node.value(self.inner.node.value(z))

    def slope(self, z):
        w = self.inner.node.value(z)
        return self.outer.node.slope(w) * self.inner.node.slope(z)

    def _jet(self, K):
        return jet_compose(self.outer.node.jet(K), self.inner.node.jet(K))

    def spec(self):
        return {"family": "compose",
                "parameters": {"outer": self.outer.to_spec(), "inner": self.inner.to_spec()}}


@dataclass(frozen=True, eq=False)
class InverseNode(_Node):
    """Formal inverse solved by Newton, seeded by jet reversion"""
    forward: "Germ" = None

    has_inverse = True

    @property
    def is_linear(self):
        return self.forward.node.is_linear

    def _seed(self, z: np.ndarray) -> np.ndarray:
        terms = TOLERANCES.REVERSION_SEED_TERMS
        key = ("seed", terms)
        if key not in self._cache:
            self._cache[key] = np.concatenate(([0j], jet_revert(self.forward.node.jet(terms))))
        with np.errstate(all="ignore"):
            seed = npoly.polyval(z, self._cache[key])
            fallback = z / self.forward.node.jet(1)[0]
        bad = ~np.isfinite(seed) | (np.abs(seed) > 4.0 * np.abs(fallback) + 1e-300)
        return np.where(bad, fallback, seed)

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        forward = self.forward.node
        w = self._seed(z)
        with np.errstate(all="ignore"):
            for _ in range(TOLERANCES.INVERSE_MAX_ITERATIONS):
                residual = forward.value(w) - z
                done = np.abs(residual) <= 1e-15 * np.maximum(1.0, np.abs(z))
                if np.all(done | ~np.isfinite(residual)):
                    break
                w = np.where(done, w, w - residual / forward.slope(w))
            residual = np.abs(forward.value(w) - z)
        ok = np.isfinite(residual) & (residual < TOLERANCES.INVERSE_RESIDUAL)
        return np.where(ok, w, np.nan + 0j)

    def slope(self, z):
        with np.errstate(all="ignore"):
            return 1.0 / self.forward.node.slope(self.value(z))

    def _jet(self, K):
        return jet_revert(self.forward.node.jet(K))

    def spec(self):
        return {"family": "inverse", "parameters": {"of": self.forward.to_spec()}}


# ===========================================
# GERM
# ===========================================
@dataclass(frozen=True, eq=False)
class Germ:
    """Invertible analytic map fixing 0 with a conservative domain radius"""
    node: _Node
    radius: float
    torsion: Optional[int] = None          # None = infinite order
    declared_alpha: Optional[int] = None
    label: str = ""

    def __post_init__(self):
        if not self.radius > 0:
            raise EmptyDomain(f"germ {self.label or self.node.spec()['family']} has no positive radius")

    @property
    def alpha(self) -> int:
        if self.declared_alpha is not None:
            return self.declared_alpha
        return tangency_order(self, TOLERANCES.JET_ORDER)

    @property
    def multiplier(self) -> complex:
        return complex(self.node.jet(1)[0])

    def inside(self, z: ArrayLike, slack: float = 0.0):
        return np.abs(np.asarray(z, dtype=complex)) < self.radius + slack

    def _run(self, fn, z: ArrayLike, strict: bool):
        arr = np.asarray(z, dtype=complex)
        outside = ~self.inside(arr)
        if strict and np.any(outside):
            bad = arr[outside] if arr.ndim else arr
            raise OutOfDomain(f"|z| >= {self.radius:.6g} for germ {self.label or 'g'}",
                              index=0, point=complex(np.ravel(bad)[0]))
        with np.errstate(all="ignore"):
            out = np.asarray(fn(arr), dtype=complex)
        if strict and not np.all(np.isfinite(out)):
            if self.node.has_inverse:
                raise NewtonDivergence(f"inverse node of {self.label or 'g'} did not converge")
            raise OutOfDomain(f"germ {self.label or 'g'} not finite at requested point", index=0)
        if not strict:
            out = np.where(outside, np.nan + 0j, out)
        return out.item() if out.ndim == 0 else out

    def evaluate(self, z: ArrayLike, strict: bool = True):
        return self._run(self.node.value, z, strict)

    def derivative(self, z: ArrayLike, strict: bool = True):
        return self._run(self.node.slope, z, strict)

    def __call__(self, z: ArrayLike):
        return self.evaluate(z)

    def jet(self, K: int = TOLERANCES.JET_ORDER) -> Jet:
        return taylor_jet(self, K)

    def inverse(self) -> "Germ":
        return inverse(self)

    def to_spec(self) -> Dict[str, Any]:
        spec = self.node.spec()
        spec["domain_radius"] = float(self.radius)
        spec["torsion_order"] = "inf" if self.torsion is None else int(self.torsion)
        if self.declared_alpha is not None:
            spec["alpha"] = int(self.declared_alpha)
        return spec


def evaluate(g: Germ, z: ArrayLike):
    """g(z); raises OutOfDomain / NewtonDivergence"""
    return g.evaluate(z)


def derivative(g: Germ, z: ArrayLike):
    """g′(z) by the chain rule over the tree"""
    return g.derivative(z)


def taylor_jet(g: Germ, K: int) -> Jet:
    if K < 1:
        raise ValueError("jet order must be >= 1")
    return Jet(tuple(complex(c) for c in g.node.jet(K)))


def analytic_distance(a: Germ, b: Germ, K: int = TOLERANCES.JET_ORDER) -> float:
    """d_A truncated at order K"""
    return jet_distance(taylor_jet(a, K), taylor_jet(b, K))


def tangency_order(g: Germ, K: int = TOLERANCES.JET_ORDER) -> int:
    """Largest α ≤ K-1 with g - id vanishing to order α+1"""
    c = g.node.jet(K)
    threshold = TOLERANCES.TANGENCY_THRESHOLD
    if abs(c[0] - 1.0) > threshold:
        return 0
    for k in range(2, K + 1):
        if abs(c[k - 1]) > threshold:
            return k - 1
    return K - 1


def origin_type(g: Germ) -> OriginType:
    """Where the multiplier at 0 sits relative to the unit circle"""
    lam = g.multiplier
    tol = TOLERANCES.UNIT_CIRCLE_TOL
    if abs(abs(lam) - 1.0) > tol:
        return OriginType.HYPERBOLIC
    if abs(lam - 1.0) <= tol:
        return OriginType.PARABOLIC
    for q in range(2, TOLERANCES.ROOT_OF_UNITY_MAX_ORDER + 1):
        if abs(lam ** q - 1.0) <= tol * q:
            return OriginType.ROOT_OF_UNITY
    if g.node.is_linear:
        return OriginType.LINEAR_ROTATION
    return OriginType.CREMER_CANDIDATE


# ===========================================
# CONSTRUCTION
# ===========================================
def _circle(radius: float, n: int) -> np.ndarray:
    return radius * np.exp(2j * np.pi * np.arange(n) / n)


def spot_check_injective(g: Germ) -> bool:
    """Derivative nonzero and images distinct on a ring sample of the disc"""
    pts = np.concatenate([[0j]] + [_circle(f * g.radius, 16) * np.exp(0.1j * i)
                                    for i, f in enumerate((0.3, 0.6, 0.9, 0.99))])
    values = g.evaluate(pts, strict=False)
    slopes = g.derivative(pts, strict=False)
    if not (np.all(np.isfinite(values)) and np.all(np.abs(slopes) > 1e-12)):
        return False
    gaps = np.abs(values[:, None] - values[None, :])
    np.fill_diagonal(gaps, np.inf)
    return bool(np.min(gaps) > 1e-12)


def _declared(germ: Germ) -> Germ:
    if not spot_check_injective(germ):
        raise ValueError(f"germ {germ.label or germ.node.spec()['family']} fails the injectivity "
                         f"spot check on radius {germ.radius:.6g}")
    return germ


def identity(radius: float = TOLERANCES.LINEAR_RADIUS) -> Germ:
    return Germ(LinearNode(multiplier=1.0), radius, torsion=1, label="id")


def linear(multiplier: complex, radius: Optional[float] = None, torsion: Optional[int] = None,
           label: str = "") -> Germ:
    if multiplier == 0:
        raise ValueError("linear germ needs a nonzero multiplier")
    return Germ(LinearNode(multiplier=complex(multiplier)), radius or TOLERANCES.LINEAR_RADIUS,
                torsion=torsion, label=label)


def rotation(p: int, q: int, radius: Optional[float] = None, label: str = "") -> Germ:
    """z ↦ exp(2πi p/q) z, of order q / gcd(p, q)"""
    order = q // math.gcd(p, q)
    return linear(cmath.exp(2j * math.pi * p / q), radius, torsion=order, label=label)


def mobius(a: complex, multiplier: complex = 1.0, radius: Optional[float] = None,
           label: str = "") -> Germ:
    """z ↦ λz/(1 − az) on ρ = 0.9/|a|"""
    a = complex(a)
    bound = TOLERANCES.SHRINK / abs(a) if a != 0 else TOLERANCES.LINEAR_RADIUS
    germ = Germ(MobiusNode(a=a, multiplier=complex(multiplier)), min(radius or bound, bound), label=label)
    return _declared(germ)


def _polynomial_radius(coefficients: Sequence[complex]) -> float:
    """Radius where |Σ_{k≥2} k c_k z^{k-1}| < |c_1|, so Re(p′/c_1) > 0"""
    c = np.abs(np.array(coefficients, dtype=complex))
    if len(c) < 2 or not np.any(c[1:] > 0):
        return TOLERANCES.LINEAR_RADIUS
    k = np.arange(2, len(c) + 1)

    def excess(r):
        return float(np.sum(k * c[1:] * r ** (k - 1)) - c[0])

    lo, hi = 0.0, 1.0
    while excess(hi) < 0 and hi < TOLERANCES.LINEAR_RADIUS:
        hi *= 2.0
    if excess(hi) < 0:
        return TOLERANCES.LINEAR_RADIUS
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if excess(mid) < 0 else (lo, mid)
    return lo


def polynomial(coefficients: Sequence[complex], radius: Optional[float] = None,
               torsion: Optional[int] = None, label: str = "") -> Germ:
    """z ↦ c_1 z + c_2 z² + ⋯"""
    coeffs = tuple(complex(c) for c in coefficients)
    if not coeffs or coeffs[0] == 0:
        raise ValueError("polynomial germ needs c_1 != 0")
    germ = Germ(PolynomialNode(coefficients=coeffs), radius or _polynomial_radius(coeffs),
                torsion=torsion, label=label)
    return _declared(germ)


def perturbed(base: Germ, coefficients: Sequence[complex], label: str = "") -> Germ:
    """h + Q; nested perturbations are merged into one node"""
    coeffs = np.array(coefficients, dtype=complex)
    if isinstance(base.node, PerturbedNode):
        prev = np.array(base.node.coefficients, dtype=complex)
        n = max(len(prev), len(coeffs))
        merged = np.zeros(n, dtype=complex)
        merged[: len(prev)] += prev
        merged[: len(coeffs)] += coeffs
        coeffs, base = merged, base.node.base
    node = PerturbedNode(base=base, coefficients=tuple(complex(c) for c in coeffs))
    return _declared(Germ(node, base.radius, declared_alpha=None, label=label or base.label))


def _image_radius(g: Germ) -> float:
    ring = g.evaluate(_circle(TOLERANCES.SHRINK * g.radius, 4 * TOLERANCES.BOUNDARY_SAMPLES), strict=False)
    finite = ring[np.isfinite(ring)]
    if finite.size == 0:
        raise EmptyDomain(f"no finite image ring for {g.label or 'g'}")
    return 0.99 * float(np.min(np.abs(finite)))


def inverse(g: Germ) -> Germ:
    """Formal-inverse node on an analytic or image-based radius"""
    if isinstance(g.node, InverseNode):
        return g.node.forward
    radius = g.node.inverse_radius(g.radius)
    if radius is None:
        radius = _image_radius(g)
    label = f"{g.label}^-1" if g.label else ""
    return Germ(InverseNode(forward=g), radius, torsion=g.torsion, declared_alpha=g.declared_alpha, label=label)


def _maps_into(inner: Germ, r: float, target: float) -> bool:
    ring = inner.evaluate(_circle(r, 4 * TOLERANCES.BOUNDARY_SAMPLES), strict=False)
    return bool(np.all(np.isfinite(ring)) and np.max(np.abs(ring)) < target)


def compose(outer: Germ, inner: Germ, label: str = "") -> Germ:
    """outer∘inner on the largest sampled radius that inner maps into outer's disc"""
    if isinstance(inner.node, LinearNode):
        radius = min(inner.radius, outer.radius / abs(inner.node.multiplier))
    elif _maps_into(inner, inner.radius * (1 - 1e-12), outer.radius):
        radius = inner.radius
    else:
        lo, hi = 0.0, inner.radius
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if _maps_into(inner, mid, outer.radius) else (lo, mid)
        radius = 0.999 * lo
    if radius < 1e-12:
        raise EmptyDomain(f"composition {outer.label}∘{inner.label} has empty domain")
    return Germ(ComposeNode(outer=outer, inner=inner), radius, label=label)


def iterate(g: Germ, n: int) -> Germ:
    """n-fold self-composition (n ≥ 1)"""
    result = g
    for _ in range(n - 1):
        result = compose(g, result)
    return result


def verify_torsion(g: Germ, r: int) -> bool:
    """r-fold composition is the identity at the radial samples and no proper divisor is"""
    if r < 1:
        raise ValueError("torsion order must be >= 1")
    n = TOLERANCES.TORSION_SAMPLES
    start = 0.5 * g.radius * (np.arange(1, n + 1) / n) * np.exp(2j * np.pi * np.arange(n) / n)
    orbit = [start]
    current = start
    for _ in range(r):
        current = g.evaluate(current, strict=False)
        orbit.append(current)
    alive = np.all(np.isfinite(np.array(orbit)), axis=0)
    if not np.any(alive):
        raise OutOfDomain(f"all torsion samples left the domain before {r} steps", index=0)

    def returns(k: int) -> bool:
        return bool(np.all(np.abs(orbit[k][alive] - start[alive]) < TOLERANCES.TORSION_TOL))

    if not returns(r):
        return False
    return not any(returns(d) for d in range(1, r) if r % d == 0)


# ===========================================
# SPECS
# ===========================================
def _coefficients(values: Sequence[Any]) -> List[complex]:
    return [parse_complex(v) for v in values]


def germ_from_spec(spec: Dict[str, Any], label: str = "") -> Germ:
    """Build a germ from {family, parameters, domain_radius, torsion_order, alpha}"""
    family = str(spec.get("family", "")).lower()
    params = spec.get("parameters") or {}
    radius = spec.get("domain_radius")
    radius = float(radius) if radius is not None else None
    torsion_raw = spec.get("torsion_order")
    torsion = None if torsion_raw in (None, "inf", ".inf") or (
        isinstance(torsion_raw, float) and math.isinf(torsion_raw)) else int(torsion_raw)
    alpha = spec.get("alpha")

    if family == "linear":
        germ = linear(parse_complex(params.get("lambda", 1.0)), radius, torsion, label)
    elif family == "rotation":
        germ = rotation(int(params["p"]), int(params["q"]), radius, label)
    elif family == "mobius":
        germ = mobius(parse_complex(params.get("a", 0.0)), parse_complex(params.get("lambda", 1.0)),
                      radius, label)
    elif family == "polynomial":
        germ = polynomial(_coefficients(params["coefficients"]), radius, torsion, label)
    elif family == "perturbed":
        germ = perturbed(germ_from_spec(params["base"], label), _coefficients(params["coefficients"]), label)
    elif family == "compose":
        germ = compose(germ_from_spec(params["outer"]), germ_from_spec(params["inner"]), label)
    elif family == "inverse":
        germ = inverse(germ_from_spec(params["of"], label))
    else:
        raise ValueError(f"unknown germ family {family!r}")

    if torsion is not None and germ.torsion != torsion:
        germ = Germ(germ.node, germ.radius, torsion=torsion, declared_alpha=germ.declared_alpha, label=label)
    if alpha is not None:
        germ = Germ(germ.node, germ.radius, torsion=germ.torsion, declared_alpha=int(alpha), label=label)
    return germ
