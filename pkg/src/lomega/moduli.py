"""Moduli of continuity: catalog, evaluation and structural checks.

Logarithms are base 10 throughout. A modulus is an immutable callable; the
structural conditions used elsewhere in the package are

* ``omega1``: nondecreasing on ``[1, ell]``;
* ``omega2``: ``omega(d) / d -> inf`` as ``d -> 0``;
* ``omega3``: ``d -> omega(d) / d`` nonincreasing on ``(0, 1]``;
* ``omega4``: ``limsup omega(d) / d <= 1 - L`` for a given ``L in [0, 1]``.

Limit conditions cannot be decided from finitely many samples, so every check
returns a tri-state verdict (``holds`` / ``fails`` / ``undetermined``) and a
``fails`` verdict always carries a witness that reproduces the violation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import integrate

HOLDS, FAILS, UNDETERMINED = "holds", "fails", "undetermined"
DIVERGES, CONVERGES = "diverges", "converges"
LN10 = math.log(10.0)

DIVERGENCE_THRESHOLD = 1e6
DEFAULT_ELL = 2.0


def xabslog(d: Any, power: float = 1.0) -> np.ndarray:
    """``d |log10(d**power)|`` with the continuous value 0 at ``d = 0``."""
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(d > 0, d * np.abs(power * np.log10(np.where(d > 0, d, 1.0))), 0.0)
    return out


@dataclass(frozen=True)
class Modulus:
    """Evaluable modulus of continuity on ``[0, domain_end]``."""

    id: str
    params: dict
    domain_end: float
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)

    def __call__(self, d: Any) -> Any:
        arr = np.asarray(d, dtype=float)
        out = np.asarray(self.fn(arr), dtype=float)
        out = np.where(arr == 0, 0.0, out)
        return float(out) if out.ndim == 0 else out

    def describe(self) -> dict:
        return {"id": self.id, "params": _jsonable(self.params), "domain_end": self.domain_end}

    def to_dict(self) -> dict:
        return self.describe()

    @classmethod
    def from_dict(cls, d: dict) -> "Modulus":
        params = dict(d.get("params", {}))
        if d["id"] == "hull":
            return monotone_hull(cls.from_dict(params["base"]), int(params.get("nodes", 1 << 16)))
        if d["id"] == "rescaled":
            return rescaled(cls.from_dict(params["base"]), params["inner"], params["outer"])
        if "domain_end" in d and d["id"] != "tabulated":
            params.setdefault("ell", d["domain_end"])
        return catalog_modulus(d["id"], **params)


def _jsonable(p: dict) -> dict:
    out = {}
    for k, v in p.items():
        if isinstance(v, np.ndarray):
            v = v.tolist()
        elif isinstance(v, (np.floating, np.integer)):
            v = v.item()
        out[k] = v
    return out


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


def _ell(params: dict, default: float = DEFAULT_ELL) -> float:
    ell = float(params.pop("ell", default))
    _need(ell > 0, "ell must be positive")
    return ell


MODULUS_IDS = (
    "log", "alog", "sqrt2", "radial", "radial-majorant", "ratio", "linear",
    "power", "tabulated", "zero-at-one", "zero",
)


def catalog_modulus(id: str, **params: Any) -> Modulus:
    """Build a catalog modulus.

    ============== =========================================== ==================
    id              formula                                     params
    ============== =========================================== ==================
    log             ``d (L + |log d|)``                         ``L >= 0``
    alog            ``alpha d |log d|``                         ``alpha >= 0``
    sqrt2           ``sqrt(2 d)``
    radial          ``(3 lam / 2) d sqrt|1 - d|``               ``0 < lam < 1``
    radial-majorant ``lam d / (2 sqrt 3) + (3 lam / 2) d sqrt|1 - d|``
    ratio           ``(1 - L) d / (1 + d)``                     ``0 <= L <= 1``
    linear          ``c d``                                     ``c >= 0``
    power           ``c d**p``                                  ``c >= 0, p > 0``
    tabulated       linear interpolation of ``(grid, values)``
    zero-at-one     ``c d |1 - d|`` (vanishes at 1)             ``c > 0``
    zero            ``0``
    ============== =========================================== ==================

    Every formula modulus also accepts ``ell``, the right end of its domain
    (default 2).
    """
    p = dict(params)
    raw = dict(params)
    if id == "log":
        L = float(p.pop("L", 0.0))
        _need(L >= 0, "log modulus needs L >= 0")
        fn = lambda d: d * L + xabslog(d)
    elif id == "alog":
        a = float(p.pop("alpha", 1.0))
        _need(a >= 0, "alog modulus needs alpha >= 0")
        fn = lambda d: a * xabslog(d)
    elif id == "sqrt2":
        fn = lambda d: np.sqrt(2.0 * np.maximum(d, 0.0))
    elif id in ("radial", "radial-majorant"):
        lam = float(p.pop("lam", 0.2))
        _need(0 < lam < 1, "radial moduli need lam in (0, 1)")
        lin = lam / (2.0 * math.sqrt(3.0)) if id == "radial-majorant" else 0.0
        fn = lambda d: lin * d + 1.5 * lam * d * np.sqrt(np.abs(1.0 - d))
    elif id == "ratio":
        L = float(p.pop("L", 0.0))
        _need(0 <= L <= 1, "ratio modulus needs L in [0, 1]")
        fn = lambda d: (1.0 - L) * d / (1.0 + d)
    elif id == "linear":
        c = float(p.pop("c", 1.0))
        _need(c >= 0, "linear modulus needs c >= 0")
        fn = lambda d: c * d
    elif id == "power":
        c = float(p.pop("c", 1.0))
        e = float(p.pop("p", 0.5))
        _need(c >= 0 and e > 0, "power modulus needs c >= 0 and p > 0")
        fn = lambda d: c * np.power(np.maximum(d, 0.0), e)
    elif id == "tabulated":
        return tabulated(p.pop("grid"), p.pop("values"), **p)
    elif id == "zero-at-one":
        c = float(p.pop("c", 1.0))
        _need(c > 0, "zero-at-one modulus needs c > 0")
        fn = lambda d: c * d * np.abs(1.0 - d)
    elif id == "zero":
        fn = lambda d: np.zeros_like(d)
    else:
        raise ValueError(f"unknown modulus id {id!r}; known: {', '.join(MODULUS_IDS)}")
    ell = _ell(p)
    if p:
        raise ValueError(f"unexpected parameters for {id!r}: {sorted(p)}")
    raw.pop("ell", None)
    return Modulus(id, raw, ell, fn)


def tabulated(grid: Sequence[float], values: Sequence[float], label: str | None = None) -> Modulus:
    """Piecewise-linear modulus through ``(grid[i], values[i])``.

    The grid must start at 0 with value 0; beyond the last node the last value
    is held.
    """
    g = np.asarray(grid, dtype=float)
    v = np.asarray(values, dtype=float)
    _need(g.ndim == 1 and g.shape == v.shape and g.size >= 2, "grid and values must be equal-length 1-D arrays")
    _need(g[0] == 0 and v[0] == 0, "tabulated modulus must start at (0, 0)")
    _need(bool(np.all(np.diff(g) > 0)), "grid must be strictly increasing")
    _need(bool(np.all(v >= 0)), "values must be nonnegative")
    params = {"grid": g.tolist(), "values": v.tolist()}
    if label:
        params["label"] = label
    return Modulus("tabulated", params, float(g[-1]), lambda d: np.interp(d, g, v))


def from_function(f: Callable[[np.ndarray], np.ndarray], interval: tuple[float, float], lipschitz: float,
                  n: int = 2000, ell: float = DEFAULT_ELL, label: str | None = None) -> Modulus:
    """Certified tabulated upper bound for the minimal modulus of ``f``.

    Sampling ``f`` on ``n + 1`` nodes of spacing ``h`` and knowing a Lipschitz
    bound ``lipschitz`` gives ``omega_f(d) <= W(m + 2) + lipschitz * h`` for
    ``d in [m h, (m + 1) h]``, where ``W(j)`` is the largest oscillation
    between nodes at most ``j`` apart.
    """
    a, b = interval
    x = np.linspace(a, b, n + 1)
    y = np.asarray(f(x), dtype=float)
    h = (b - a) / n
    W = np.zeros(n + 1)
    for j in range(1, n + 1):
        W[j] = np.abs(y[j:] - y[:-j]).max()
    W = np.maximum.accumulate(W)
    m = np.arange(n + 1)
    nodes = m * h
    vals = W[np.minimum(m + 2, n)] + lipschitz * h
    vals[0] = 0.0
    if ell > nodes[-1]:
        nodes = np.append(nodes, ell)
        vals = np.append(vals, vals[-1])
    return tabulated(nodes, vals, label=label)


def rescaled(m: Modulus, inner: float = 1.0, outer: float = 1.0) -> Modulus:
    """``d -> outer * m(inner * d)`` on ``[0, m.domain_end / inner]``."""
    _need(inner > 0 and outer >= 0, "rescaling needs inner > 0 and outer >= 0")
    params = {"base": m.to_dict(), "inner": float(inner), "outer": float(outer)}
    return Modulus("rescaled", params, m.domain_end / inner,
                   lambda d: outer * np.asarray(m(inner * np.asarray(d)), dtype=float))


def monotone_hull(m: Modulus, nodes: int = 1 << 16) -> Modulus:
    """Nondecreasing majorant ``d -> max(m(d), max_{s <= d} m(s))`` of ``m``.

    The running max is taken over ``nodes`` equispaced points of
    ``[0, domain_end]``, so the result never exceeds the exact hull.
    """
    g = np.linspace(0.0, m.domain_end, nodes)
    run = np.maximum.accumulate(np.asarray(m(g), dtype=float))
    step = g[1] - g[0]

    def fn(d: np.ndarray) -> np.ndarray:
        k = np.clip(np.floor(np.asarray(d) / step).astype(int), 0, nodes - 1)
        return np.maximum(np.asarray(m(d), dtype=float), run[k])

    return Modulus("hull", {"base": m.to_dict(), "nodes": nodes}, m.domain_end, fn)


# ---------------------------------------------------------------------------
# grids

@dataclass(frozen=True)
class GridSpec:
    """Grid of scales in ``(0, hi]``; geometric by default."""

    lo: float = 1e-8
    hi: float | None = None
    n: int = 10_000
    kind: str = "geometric"

    def points(self, ell: float | None = None) -> np.ndarray:
        hi = self.hi if self.hi is not None else ell
        if hi is None:
            raise ValueError("grid upper end unknown")
        if not 0 < self.lo < hi:
            raise ValueError("grid needs 0 < lo < hi")
        if self.n < 2:
            raise ValueError("empty grid")
        if self.kind == "geometric":
            return np.geomspace(self.lo, hi, self.n)
        if self.kind == "linear":
            return np.linspace(self.lo, hi, self.n)
        raise ValueError(f"unknown grid kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "n": self.n, "kind": self.kind}


def default_probe_scales(count: int = 600) -> np.ndarray:
    """Scales ``2**-1, ..., 2**-count``; powers of two keep ``c d / d == c`` exact.

    Stopping at ``2**-600`` keeps ``c d`` a normal float for ``c >= 2**-422``.
    """
    return np.ldexp(1.0, -np.arange(1, count + 1))


# ---------------------------------------------------------------------------
# limsup of omega(d)/d

@dataclass
class SlopeTail:
    """Ratios ``omega(d)/d`` along decreasing probe scales, and their verdict."""

    scales: np.ndarray
    ratios: np.ndarray
    trend: str  # DIVERGES / CONVERGES / UNDETERMINED
    value: float  # sup over the tail window, or inf
    running_sup: np.ndarray  # nonincreasing record of the limsup estimate


def slope_tail(m: Modulus, probe_scales: Sequence[float] | None = None, refine: int = 1,
               window: int | None = None, threshold: float = DIVERGENCE_THRESHOLD) -> SlopeTail:
    scales = default_probe_scales() if probe_scales is None else np.asarray(probe_scales, dtype=float)
    if scales.ndim != 1 or scales.size < 4:
        raise ValueError("need at least 4 probe scales")
    if not np.all(np.diff(scales) < 0) or scales[-1] <= 0:
        raise ValueError("probe scales must be strictly decreasing and positive")
    if scales[0] > m.domain_end:
        raise ValueError("probe scales must lie within the modulus domain")
    ratios = np.asarray(m(scales), dtype=float) / scales
    if refine > 1:
        # max over a geometric subgrid between consecutive scales
        for j in range(1, refine):
            sub = scales[:-1] * (scales[1:] / scales[:-1]) ** (j / refine)
            r = np.asarray(m(sub), dtype=float) / sub
            ratios[:-1] = np.maximum(ratios[:-1], r)
    w = window or max(4, scales.size // 10)
    tail = ratios[-w:]
    half = scales.size // 2
    running = np.maximum.accumulate(ratios[::-1])[::-1][-w:]

    increasing = bool(np.all(np.diff(tail) > 0))
    early = ratios[half] - ratios[0]
    late = ratios[-1] - ratios[half]
    spread = float(tail.max() - tail.min())
    if increasing and (tail[-1] > threshold or (late > 0 and late >= 0.5 * early)):
        trend = DIVERGES
    elif spread <= 1e-6 * max(1.0, abs(float(tail.max()))):
        trend = CONVERGES
    else:
        trend = UNDETERMINED
    value = math.inf if trend == DIVERGES else float(tail.max())
    return SlopeTail(scales, ratios, trend, value, running)


def delta_omega(m: Modulus, probe_scales: Sequence[float] | None = None, refine: int = 1,
                window: int | None = None, threshold: float = DIVERGENCE_THRESHOLD) -> float:
    """Estimate ``limsup_{d -> 0} omega(d) / d``.

    Returns the sup of the ratio over the final tail window of probe scales,
    or ``math.inf`` when the tail is increasing and either exceeds
    ``threshold`` or keeps growing at a non-decaying rate per scale (the
    logarithmic moduli never reach any fixed threshold in double precision).
    """
    return slope_tail(m, probe_scales, refine, window, threshold).value


# ---------------------------------------------------------------------------
# property report

@dataclass
class Verdict:
    status: str
    witness: Any = None
    note: str = ""

    def to_dict(self) -> dict:
        return {"status": self.status, "witness": self.witness, "note": self.note}


@dataclass
class ModulusReport:
    modulus: dict
    L: float
    omega1: Verdict
    omega2: Verdict
    omega3: Verdict
    omega4: Verdict
    subadditive: Verdict
    concave: Verdict
    nondecreasing_near_0: Verdict
    delta_omega: float
    osgood: str
    grid_spec: dict

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = v.to_dict() if isinstance(v, Verdict) else v
        if math.isinf(self.delta_omega):
            out["delta_omega"] = "inf"
        return out


_REL = 1e-12


def _tol(vals: np.ndarray) -> np.ndarray:
    return 1e-15 + _REL * np.abs(vals)


def _monotone_verdict(x: np.ndarray, y: np.ndarray, nonincreasing: bool = False) -> Verdict:
    if x.size < 2:
        return Verdict(UNDETERMINED, note="fewer than two grid points in range")
    diff = np.diff(y)
    bad = diff > _tol(y[:-1]) if nonincreasing else diff < -_tol(y[:-1])
    if bad.any():
        i = int(np.argmax(bad))
        return Verdict(FAILS, {"a": float(x[i]), "b": float(x[i + 1]),
                               "value_a": float(y[i]), "value_b": float(y[i + 1])})
    return Verdict(HOLDS)


def _pair_subgrid(pts: np.ndarray, size: int = 400) -> np.ndarray:
    if pts.size <= size:
        return pts
    idx = np.unique(np.linspace(0, pts.size - 1, size).round().astype(int))
    return pts[idx]


def check_properties(m: Modulus, L: float = 0.0, grid: GridSpec | None = None,
                     probe_scales: Sequence[float] | None = None) -> ModulusReport:
    """Decide the structural conditions of ``m`` on a finite grid.

    Verdicts depend only on the set of grid points, not their order.
    """
    if not 0 <= L <= 1:
        raise ValueError("L must lie in [0, 1]")
    grid = grid or GridSpec()
    pts = np.unique(np.asarray(grid.points(m.domain_end), dtype=float))
    if pts.size == 0:
        raise ValueError("empty grid")
    if pts[0] <= 0 or pts[-1] > m.domain_end * (1 + 1e-12):
        raise ValueError("grid outside the modulus domain (0, ell]")
    vals = np.asarray(m(pts), dtype=float)

    in1 = pts >= 1.0
    omega1 = _monotone_verdict(pts[in1], vals[in1])

    unit = pts <= 1.0
    omega3 = _monotone_verdict(pts[unit], vals[unit] / pts[unit], nonincreasing=True)

    tail = slope_tail(m, probe_scales)
    if tail.trend == DIVERGES:
        omega2 = Verdict(HOLDS, note="ratio increasing without flattening on probe scales")
    elif tail.trend == CONVERGES:
        omega2 = Verdict(FAILS, {"delta": float(tail.scales[-1]), "ratio": float(tail.ratios[-1])},
                         "ratio stabilizes at a finite value")
    else:
        omega2 = Verdict(UNDETERMINED)

    budget = 1.0 - L
    if tail.trend == DIVERGES:
        i = int(np.argmax(tail.ratios > budget + 1e-12)) if np.any(tail.ratios > budget) else -1
        omega4 = Verdict(FAILS, {"delta": float(tail.scales[i]), "ratio": float(tail.ratios[i]), "bound": budget})
    elif tail.trend == CONVERGES:
        if tail.value <= budget + 1e-12:
            omega4 = Verdict(HOLDS, note=f"limsup estimate {tail.value!r} <= {budget!r}")
        else:
            i = int(np.argmax(tail.ratios[-len(tail.running_sup):]))
            omega4 = Verdict(FAILS, {"delta": float(tail.scales[-len(tail.running_sup) + i]),
                                     "ratio": tail.value, "bound": budget})
    else:
        omega4 = Verdict(UNDETERMINED, note="limsup not resolved on probe scales")

    sub = _pair_subgrid(pts)
    A, B = np.meshgrid(sub, sub, indexing="ij")
    ok = A + B <= m.domain_end
    a, b = A[ok], B[ok]
    lhs = np.asarray(m(a + b))
    rhs = np.asarray(m(a)) + np.asarray(m(b))
    bad = lhs > rhs + _tol(rhs)
    if bad.any():
        i = int(np.argmax(lhs - rhs))
        subadditive = Verdict(FAILS, {"a": float(a[i]), "b": float(b[i]),
                                      "lhs": float(lhs[i]), "rhs": float(rhs[i])})
    else:
        subadditive = Verdict(HOLDS)

    full = np.concatenate(([0.0], sub))
    A, B = np.meshgrid(full, full, indexing="ij")
    upper = A < B
    a, b = A[upper], B[upper]
    mid = np.asarray(m((a + b) / 2))
    chord = (np.asarray(m(a)) + np.asarray(m(b))) / 2
    bad = mid < chord - _tol(chord)
    if bad.any():
        i = int(np.argmax(chord - mid))
        concave = Verdict(FAILS, {"a": float(a[i]), "b": float(b[i]),
                                  "midpoint_value": float(mid[i]), "chord_value": float(chord[i])})
    else:
        concave = Verdict(HOLDS)

    near = pts <= min(1e-2, m.domain_end)
    nd = _monotone_verdict(pts[near], vals[near])
    if nd.status == FAILS:
        nd.note = "not nondecreasing on the grid below 1e-2"

    return ModulusReport(
        modulus=m.describe(), L=float(L),
        omega1=omega1, omega2=omega2, omega3=omega3, omega4=omega4,
        subadditive=subadditive, concave=concave, nondecreasing_near_0=nd,
        delta_omega=tail.value, osgood=osgood_divergence(m) if _positive_on_unit(m) else UNDETERMINED,
        grid_spec=grid.to_dict(),
    )


def _positive_on_unit(m: Modulus) -> bool:
    x = np.geomspace(1e-12, 1.0, 2000)
    return bool(np.all(np.asarray(m(x)) > 0))


# ---------------------------------------------------------------------------
# Osgood heuristic

def osgood_divergence(m: Modulus, eps_schedule: Sequence[float] | None = None,
                      threshold: float = 1e12) -> str:
    """Heuristic verdict on whether ``int_0^1 dr / omega(r)`` diverges.

    The integrand is the reciprocal ``1 / omega`` (the classical Osgood
    condition), not the inverse function. The integral from each ``eps`` of
    the schedule to 1 is accumulated piecewise; increments that keep
    pace with the previous ones (harmonic-like or growing) are read as
    divergence, geometrically shrinking increments as convergence.
    """
    eps = np.asarray(eps_schedule if eps_schedule is not None else 10.0 ** -np.arange(1, 201), dtype=float)
    if eps.ndim != 1 or eps.size < 4 or np.any(np.diff(eps) >= 0) or eps[0] > 1 or eps[-1] <= 0:
        raise ValueError("eps_schedule must be strictly decreasing in (0, 1] with at least 4 entries")
    # below ~1e-100 a zero value is floating-point underflow, not a genuine zero
    check = np.geomspace(max(eps[-1], 1e-100), 1.0, 4000)
    if np.any(np.asarray(m(check)) <= 0):
        bad = check[np.asarray(m(check)) <= 0][0]
        raise ValueError(f"modulus vanishes at interior point {bad!r} of (0, 1]")

    def integrand(u: float) -> float:
        r = math.exp(u)
        w = float(m(r))
        return r / w if w > 0 else 1e300

    knots = np.concatenate(([1.0], eps))
    inc = np.empty(eps.size)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for i in range(eps.size):
            val, _ = integrate.quad(integrand, math.log(knots[i + 1]), math.log(knots[i]), limit=200)
            inc[i] = val
    total = np.cumsum(inc)
    if not np.all(np.isfinite(total)) or total[-1] > threshold:
        return DIVERGES
    tail = inc[-10:]
    q = tail[1:] / np.maximum(tail[:-1], 1e-300)
    if np.all(q >= 0.95):
        return DIVERGES
    if np.all(q <= 0.9) and tail[-1] <= 1e-9 * total[-1]:
        return CONVERGES
    return UNDETERMINED
