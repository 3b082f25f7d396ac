"""Empirical minimal moduli and L-omega certificates.

All estimates here come from finite samples. ``EmpiricalModulus`` is a lower
bound for the true minimal modulus; a passing ``Certificate`` says no sampled
pair violates ``rho(Tx, Ty) <= L rho(x, y) + omega(rho(x, y))``, nothing more.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from .moduli import GridSpec, Modulus, DIVERGES, CONVERGES, UNDETERMINED
from .spaces import DomainSpec, StepFn, TailSeq, point_to_json, vec_norm

DEFAULT_TOL = 1e-9


@dataclass
class Certificate:
    """Outcome of checking an inequality on samples.

    ``worst_pair`` is the tightest (or most violating) instance; ``witness``
    is the first violating instance in scan order, or ``None`` on a pass.
    """

    verdict: str
    margin: float
    worst_pair: dict
    samples: int
    seed: int | None
    tol: float = DEFAULT_TOL
    label: str = ""
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict, "margin": _num(self.margin), "worst_pair": self.worst_pair,
            "samples": self.samples, "seed": self.seed, "tol": self.tol, "label": self.label,
            "witness": self.witness, "details": self.details,
        }


def _num(x: float) -> Any:
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


@dataclass
class EmpiricalModulus:
    """Sampled minimal modulus: the largest image distance seen per scale."""

    delta_grid: np.ndarray
    sup_values: np.ndarray
    pair_count: int
    source: str

    def __call__(self, d: Any) -> Any:
        idx = np.searchsorted(self.delta_grid, d, side="right") - 1
        vals = np.where(idx >= 0, self.sup_values[np.maximum(idx, 0)], 0.0)
        return float(vals) if np.ndim(vals) == 0 else vals

    def to_dict(self) -> dict:
        return {"delta_grid": self.delta_grid.tolist(), "sup_values": self.sup_values.tolist(),
                "pair_count": self.pair_count, "source": self.source}


@dataclass
class DerivativeEstimate:
    """Lower directional derivative along the segment from ``x`` toward ``y``."""

    value: float
    scales: np.ndarray
    infima: np.ndarray
    segment_points: np.ndarray  # the t in z = x + t (y - x)
    trend: str

    def to_dict(self) -> dict:
        return {"value": _num(self.value), "scales": self.scales.tolist(),
                "infima": [_num(float(v)) for v in self.infima],
                "segment_points": self.segment_points.tolist(), "trend": self.trend}


# ---------------------------------------------------------------------------
# pair sampling

def _near_batch(domain: DomainSpec, xs: Any, radii: np.ndarray, rng: np.random.Generator) -> Any:
    """One point within ``radii[i]`` of ``xs[i]`` for each ``i``, inside the domain."""
    n = len(radii)
    zs = domain.sample(n, rng, "uniform")
    u = rng.random(n)
    if domain.point_type == "vec":
        X, Z = np.asarray(xs), np.asarray(zs)
        dist = vec_norm(Z - X, domain.norm_kind)
        s = u * np.minimum(1.0, radii / np.maximum(dist, 1e-300))
        return X + s[:, None] * (Z - X)
    dist = domain.distances(zs, xs)
    out = []
    for x, z, d, r, ui in zip(xs, zs, dist, radii, u):
        t = ui * min(1.0, r / d) if d > 0 else 0.0
        if isinstance(x, StepFn):
            # a coarse dyadic weight keeps the exact arithmetic cheap
            t = Fraction(math.floor(t * 2**40), 2**40)
        out.append(x + (z - x) * t)
    return out


def _concat(domain: DomainSpec, parts: Sequence[Any]) -> Any:
    if domain.point_type == "vec":
        return np.concatenate([np.asarray(p) for p in parts], axis=0)
    out: list = []
    for p in parts:
        out.extend(p)
    return out


def sample_pairs(domain: DomainSpec, n: int, seed: int | np.random.Generator = 0) -> tuple[Any, Any]:
    """Mixed pair sample: uniform, near-diagonal, multi-scale and boundary pairs.

    The inequalities of interest are tightest at small separations and at
    extreme points, so only a quarter of the pairs is drawn uniformly.
    """
    if n < 1:
        raise ValueError("pairs must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    q = n // 4
    sizes = [n - 3 * q, q, q, q]
    diam = domain.diameter()
    xs_parts, ys_parts = [], []
    # uniform
    if sizes[0]:
        xs_parts.append(domain.sample(sizes[0], rng, "uniform"))
        ys_parts.append(domain.sample(sizes[0], rng, "uniform"))
    # near-diagonal, rho <= 1e-4
    if sizes[1]:
        x = domain.sample(sizes[1], rng, "uniform")
        r = 10.0 ** rng.uniform(-10, -4, sizes[1])
        xs_parts.append(x)
        ys_parts.append(_near_batch(domain, x, r, rng))
    # multi-scale near pairs
    if sizes[2]:
        x = domain.sample(sizes[2], rng, "uniform")
        r = 10.0 ** rng.uniform(-4, math.log10(diam), sizes[2])
        xs_parts.append(x)
        ys_parts.append(_near_batch(domain, x, r, rng))
    # boundary-biased
    if sizes[3]:
        h = sizes[3] // 2
        x = domain.sample(sizes[3], rng, "boundary")
        y1 = domain.sample(h, rng, "boundary") if h else None
        y2 = domain.sample(sizes[3] - h, rng, "uniform")
        xs_parts.append(x)
        ys_parts.append(_concat(domain, [p for p in (y1, y2) if p is not None]))
    return _concat(domain, xs_parts), _concat(domain, ys_parts)


def sample_interval_pairs(interval: tuple[float, float], n: int,
                          seed: int | np.random.Generator = 0) -> tuple[np.ndarray, np.ndarray]:
    """Pairs in ``[a, b]``: uniform, near-diagonal and endpoint-anchored."""
    a, b = map(float, interval)
    if not b > a:
        raise ValueError("interval must have b > a")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    q = n // 4
    n0 = n - 3 * q
    x0, y0 = rng.uniform(a, b, n0), rng.uniform(a, b, n0)
    xn = rng.uniform(a, b, q)
    gap = (b - a) * 10.0 ** rng.uniform(-10, 0, q) * rng.choice([-1.0, 1.0], q)
    yn = np.clip(xn + gap, a, b)
    h = q // 2
    xa = np.concatenate([np.full(h, a), np.full(q - h, b)])
    ya = rng.uniform(a, b, q)
    xm = rng.uniform(a, b, q)
    ym = np.where(rng.random(q) < 0.5, a, b) + 0.0 * xm
    ym = np.where(rng.random(q) < 0.5, ym, np.clip(xm + (b - a) * 10.0 ** rng.uniform(-6, 0, q), a, b))
    return (np.concatenate([x0, xn, xa, xm]), np.concatenate([y0, yn, ya, ym]))


# ---------------------------------------------------------------------------
# minimal modulus

def _grid_points(grid: GridSpec | Sequence[float] | None, hi: float) -> np.ndarray:
    if grid is None:
        grid = GridSpec(lo=1e-8, hi=hi, n=10_000)
    pts = grid.points(hi) if isinstance(grid, GridSpec) else np.asarray(grid, dtype=float)
    pts = np.sort(pts)
    if pts.size == 0:
        raise ValueError("empty grid")
    return pts


def _pair_distances(target: Any, pairs: int, seed: int, interval: tuple[float, float] | None
                    ) -> tuple[np.ndarray, np.ndarray, Any, Any, str, float]:
    """Sample pairs and return (domain distances, image distances, xs, ys, label, diameter)."""
    if hasattr(target, "apply_many"):
        dom = target.domain
        xs, ys = sample_pairs(dom, pairs, seed)
        d = dom.distances(xs, ys)
        tx, ty = target.apply_many(xs), target.apply_many(ys)
        v = target.image_distances(tx, ty)
        return d, v, xs, ys, target.catalog_id, dom.diameter()
    if interval is None:
        interval = getattr(target, "interval", None)
    if interval is None:
        raise ValueError("a plain function target needs an interval")
    x, y = sample_interval_pairs(interval, pairs, seed)
    fx, fy = np.asarray(target(x), dtype=float), np.asarray(target(y), dtype=float)
    if not (np.all(np.isfinite(fx)) and np.all(np.isfinite(fy))):
        raise ValueError("function produced non-finite values on its interval")
    label = getattr(target, "__name__", type(target).__name__)
    return np.abs(x - y), np.abs(fx - fy), x, y, label, interval[1] - interval[0]


def empirical_min_modulus(target: Any, grid: GridSpec | Sequence[float] | None = None,
                          pairs: int = 100_000, seed: int = 0,
                          interval: tuple[float, float] | None = None) -> EmpiricalModulus:
    """Sampled minimal modulus of a map or a 1-D function.

    ``target`` is either a map instance (pairs drawn from its domain) or a
    vectorized callable on ``interval``. For every ``delta`` of the grid the
    result holds the largest image distance among sampled pairs at distance
    at most ``delta``.
    """
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    d, v, _, _, label, diam = _pair_distances(target, pairs, seed, interval)
    pts = _grid_points(grid, diam)
    sup, _ = sup_profile(d, v, pts)
    return EmpiricalModulus(pts, sup, int(pairs), label)


def sup_profile(d: np.ndarray, v: np.ndarray, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``max{v[i] : d[i] <= p}`` for each ``p`` in ``pts``, and the attaining index (-1 if none)."""
    order = np.argsort(d, kind="stable")
    vs = v[order]
    cm = np.maximum.accumulate(vs)
    # index of the first pair reaching each running max
    first = np.maximum.accumulate(np.where(vs >= cm, np.arange(vs.size), 0))
    idx = np.searchsorted(d[order], pts, side="right") - 1
    ok = idx >= 0
    sup = np.where(ok, cm[np.maximum(idx, 0)], 0.0)
    arg = np.where(ok, order[first[np.maximum(idx, 0)]], -1)
    return sup, arg


# ---------------------------------------------------------------------------
# certificates

def _pair_record(dom_x: Any, dom_y: Any, lhs: float, rhs: float, dist: float) -> dict:
    return {"x": point_to_json(dom_x), "y": point_to_json(dom_y), "lhs": float(lhs),
            "rhs": float(rhs), "distance": float(dist)}


def _pick(points: Any, i: int) -> Any:
    return points[i]


def certify_L_omega(map: Any, L: float, omega: Modulus, pairs: int = 100_000, seed: int = 0,
                    tol: float = DEFAULT_TOL, extra_pairs: tuple[Any, Any] | None = None) -> Certificate:
    """Check ``rho(Tx, Ty) <= L rho(x, y) + omega(rho(x, y))`` on sampled pairs.

    ``L`` may exceed 1 (the Lipschitz-type regime). ``extra_pairs`` appends
    caller-chosen pairs to the random sample.
    """
    if L < 0:
        raise ValueError("L must be nonnegative")
    dom = map.domain
    diam = dom.diameter()
    if omega.domain_end < diam * (1 - 1e-12):
        raise ValueError(f"modulus domain [0, {omega.domain_end}] does not cover the domain diameter {diam}")
    xs, ys = sample_pairs(dom, pairs, seed)
    if extra_pairs is not None:
        xs, ys = _concat(dom, [xs, extra_pairs[0]]), _concat(dom, [ys, extra_pairs[1]])
    d = dom.distances(xs, ys)
    keep = d > 0  # coincident pairs carry no information
    if dom.point_type == "vec":
        xs, ys = np.asarray(xs)[keep], np.asarray(ys)[keep]
    else:
        xs = [x for x, k in zip(xs, keep) if k]
        ys = [y for y, k in zip(ys, keep) if k]
    d = d[keep]
    if d.size == 0:
        raise ValueError("all sampled pairs coincide")
    v = map.image_distances(map.apply_many(xs, check=False), map.apply_many(ys, check=False))
    v = np.where(np.isfinite(v), v, np.inf)
    rhs = L * d + np.asarray(omega(d), dtype=float)
    slack = rhs - v
    i = int(np.argmin(slack))
    margin = float(slack[i])
    failed = slack < -tol
    verdict = "fail" if failed.any() else "pass"
    witness = None
    if failed.any():
        j = int(np.argmax(failed))
        witness = _pair_record(_pick(xs, j), _pick(ys, j), v[j], rhs[j], d[j])
    return Certificate(
        verdict=verdict, margin=margin, worst_pair=_pair_record(_pick(xs, i), _pick(ys, i), v[i], rhs[i], d[i]),
        samples=len(d), seed=seed, tol=tol, label=f"{map.catalog_id}: L={L!r}, omega={omega.id}",
        witness=witness, details={"L": L, "omega": omega.describe(), "diameter": diam,
                                  "coincident_pairs_dropped": int((~keep).sum())},
    )


def nonexpansive_upgrade_check(L: float, omega: Modulus, grid: GridSpec | Sequence[float] | None = None,
                               tol: float = DEFAULT_TOL) -> Certificate:
    """Check ``L d + omega(d) <= d`` on scales ``d in (0, 1]``.

    When this holds, any map satisfying the ``L``-``omega`` inequality is
    1-Lipschitz on pairs at distance at most 1, and by chaining along
    segments, nonexpansive on a convex domain.
    """
    pts = _grid_points(grid if grid is not None else GridSpec(1e-8, 1.0, 10_000), 1.0)
    if pts[0] <= 0 or pts[-1] > 1.0:
        raise ValueError("grid must lie in (0, 1]")
    lhs = L * pts + np.asarray(omega(pts), dtype=float)
    slack = pts - lhs
    i = int(np.argmin(slack))
    failed = slack < -tol
    witness = None
    if failed.any():
        j = int(np.argmax(failed))
        witness = {"delta": float(pts[j]), "lhs": float(lhs[j]), "rhs": float(pts[j])}
    passed = not failed.any()
    return Certificate(
        verdict="pass" if passed else "fail", margin=float(slack[i]),
        worst_pair={"delta": float(pts[i]), "lhs": float(lhs[i]), "rhs": float(pts[i])},
        samples=int(pts.size), seed=None, tol=tol, label=f"upgrade: L={L!r}, omega={omega.id}",
        witness=witness, details={"implies_nonexpansive": passed, "omega": omega.describe(), "L": L},
    )


# ---------------------------------------------------------------------------
# lower derivative

def classify_growth(values: np.ndarray, threshold: float = 1e6) -> str:
    """Divergence verdict for a sequence sampled at geometrically shrinking scales."""
    v = np.asarray(values, dtype=float)
    if v.size < 4 or not np.all(np.isfinite(v)):
        return UNDETERMINED
    half = v.size // 2
    tail = v[half:]
    early, late = v[half] - v[0], v[-1] - v[half]
    if np.all(np.diff(tail) > 0) and (tail[-1] > threshold or (late > 0 and late >= 0.5 * early)):
        return DIVERGES
    if tail.max() - tail.min() <= 1e-6 * max(1.0, abs(tail.max())):
        return CONVERGES
    return UNDETERMINED


def lower_derivative(map: Any, x: Any, y: Any, scales: Sequence[float] | None = None,
                     points_per_decade: int = 8) -> DerivativeEstimate:
    """Estimate ``liminf_{z -> x, z in (x; y)} rho(Tz, Tx) / rho(z, x)``.

    Probe points are ``z = x + t (y - x)`` for a fixed geometric set of ``t``
    in ``(0, 1)``; for each scale ``eps`` the infimum is over probe points
    with ``rho(z, x) < eps`` (``inf`` when there are none). The probe set is
    shared across scales, so the recorded infima are nondecreasing as the
    scale shrinks, and the finest one is returned.
    """
    dom = map.domain
    D = float(dom.distance(x, y))
    if D == 0:
        return DerivativeEstimate(0.0, np.array([]), np.array([]), np.array([]), CONVERGES)
    sc = np.asarray(scales, dtype=float) if scales is not None else D * np.geomspace(0.5, 1e-10, 40)
    if np.any(np.diff(sc) >= 0):
        raise ValueError("scales must be strictly decreasing")
    decades = max(1, int(math.ceil(math.log10(D / sc[-1]))) + 2)
    t = np.geomspace(min(1.0, sc[-1] / D) * 1e-2, 1.0, decades * points_per_decade + 1)[:-1]
    if dom.point_type == "vec":
        X, Y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        Z = X + t[:, None] * (Y - X)
        dz = vec_norm(Z - X, dom.norm_kind)
        tz = map.apply_many(Z)
        tx = map.apply_many(X[None, :])
        num = map.image_distances(tz, np.repeat(tx, len(t), axis=0) if isinstance(tx, np.ndarray) else tx * len(t))
    else:
        tt = [Fraction(v) for v in t] if dom.point_type == "step" else list(t)
        Z = [x + (y - x) * s for s in tt]
        dz = dom.distances(Z, [x] * len(Z))
        tz = map.apply_many(Z)
        txs = map.apply_many([x])
        num = map.image_distances(tz, txs * len(Z))
    ratio = np.asarray(num, dtype=float) / dz
    inf = np.array([ratio[dz < e].min() if np.any(dz < e) else math.inf for e in sc])
    trend = classify_growth(inf)
    return DerivativeEstimate(float(inf[-1]), sc, inf, t, trend)
