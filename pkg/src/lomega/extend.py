"""One-dimensional functions with a prescribed modulus of continuity.

Two constructions are provided: the McShane extension
``f(x) = inf_{y in D} (f0(y) + w(|x - y|))`` and an inductive rise/fall
construction on intervals ``[x_{n+1}, x_n]`` shrinking to 0, which yields a
nonnegative ``f`` on ``[0, 1]`` with ``f(0) = 0`` dominated by a modulus with a
finite positive slope at 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import optimize

from .minmod import Certificate, DEFAULT_TOL, _grid_points, sample_interval_pairs, sup_profile
from .moduli import CONVERGES, HOLDS, GridSpec, Modulus, check_properties, slope_tail, tabulated

SEGMENT_KINDS = ("zero", "rise", "fall", "table", "callable", "finite-inf")
_ARG_TOL = 1e-9
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class Segment:
    """Closed-form piece of a :class:`PiecewiseFunction` on ``[lo, hi]``.

    ``rise``: ``w(z) - w(base)``; ``fall``: ``w(top) - w(z)``; ``table``:
    linear interpolation; ``callable``: a Python function (tabulated on
    export); ``finite-inf``: ``min_j (values[j] + w(|z - points[j]|))``.
    """

    lo: float
    hi: float
    kind: str
    data: dict = field(default_factory=dict)

    def evaluate(self, z: np.ndarray, w: Modulus | None) -> np.ndarray:
        k = self.kind
        if k == "zero":
            return np.zeros_like(z)
        if k == "rise":
            return np.asarray(w(z)) - w(self.data["base"])
        if k == "fall":
            return w(self.data["top"]) - np.asarray(w(z))
        if k == "table":
            return np.interp(z, self.data["x"], self.data["y"])
        if k == "callable":
            return np.asarray(self.data["fn"](z), dtype=float)
        if k == "finite-inf":
            pts = np.asarray(self.data["points"], dtype=float)
            vals = np.asarray(self.data["values"], dtype=float)
            out = (vals[None, :] + np.asarray(w(np.abs(z[:, None] - pts[None, :])))).min(axis=1)
            return np.minimum(out, self.data.get("cap", math.inf))
        raise ValueError(f"unknown segment kind {k!r}")

    def to_dict(self, w: Modulus | None, table_points: int = 2001) -> dict:
        if self.kind == "callable":
            x = np.linspace(self.lo, self.hi, table_points)
            return {"lo": self.lo, "hi": self.hi, "kind": "table",
                    "data": {"x": x.tolist(), "y": self.evaluate(x, w).tolist()}}
        data = {k: (np.asarray(v).tolist() if isinstance(v, (list, np.ndarray)) else v) for k, v in self.data.items()}
        return {"lo": self.lo, "hi": self.hi, "kind": self.kind, "data": data}


@dataclass
class PiecewiseFunction:
    """Function on ``[breakpoints[0], breakpoints[-1]]`` given segment by segment.

    Arguments within ``1e-9`` outside the domain are clamped; anything further
    out raises ``ValueError``.
    """

    breakpoints: np.ndarray
    segments: list[Segment]
    value_bound: float
    omega_tilde: Modulus | None = None
    label: str = ""

    def __post_init__(self) -> None:
        self.breakpoints = np.asarray(self.breakpoints, dtype=float)
        if self.breakpoints.size != len(self.segments) + 1:
            raise ValueError("need exactly one more breakpoint than segments")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")

    @property
    def interval(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def __call__(self, z: Any) -> Any:
        arr = np.asarray(z, dtype=float)
        flat = np.atleast_1d(arr).ravel()
        lo, hi = self.interval
        if np.any(flat < lo - _ARG_TOL) or np.any(flat > hi + _ARG_TOL) or np.any(np.isnan(flat)):
            raise ValueError(f"argument outside [{lo}, {hi}]")
        flat = np.clip(flat, lo, hi)
        seg = np.clip(np.searchsorted(self.breakpoints, flat, side="right") - 1, 0, len(self.segments) - 1)
        out = np.empty_like(flat)
        for j in np.unique(seg):
            m = seg == j
            out[m] = self.segments[j].evaluate(flat[m], self.omega_tilde)
        out = out.reshape(arr.shape)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {
            "breakpoints": self.breakpoints.tolist(),
            "segments": [s.to_dict(self.omega_tilde) for s in self.segments],
            "value_bound": self.value_bound,
            "omega_tilde": None if self.omega_tilde is None else self.omega_tilde.to_dict(),
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseFunction":
        w = None if d.get("omega_tilde") is None else Modulus.from_dict(d["omega_tilde"])
        segs = [Segment(s["lo"], s["hi"], s["kind"], dict(s.get("data", {}))) for s in d["segments"]]
        return cls(np.asarray(d["breakpoints"]), segs, float(d["value_bound"]), w, d.get("label", ""))


# ---------------------------------------------------------------------------
# McShane extension

def _check_own_modulus(pts: np.ndarray, v: np.ndarray, w: Modulus, tol: float) -> None:
    """Reject ``f0`` when it is not ``w``-dominated on pairs of ``pts``."""
    if pts.size > 400:
        keep = np.linspace(0, pts.size - 1, 400).astype(int)
        pts, v = pts[keep], v[keep]
    gap = np.abs(v[:, None] - v[None, :]) - np.asarray(w(np.abs(pts[:, None] - pts[None, :])))
    i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
    if gap[i, j] > tol:
        raise ValueError(f"f0 is not dominated by {w.id} on its domain: witness x={pts[i]!r}, y={pts[j]!r}, "
                         f"|f0(x)-f0(y)|-w(|x-y|)={gap[i, j]:.3e}")


def _inf_over_interval(f0: Callable, a: float, b: float, w: Modulus, x: np.ndarray,
                       grid_n: int = 4097, iters: int = 80, chunk: int = 1024) -> np.ndarray:
    """``inf_{y in [a, b]} f0(y) + w(|x - y|)``: grid minimum, then golden-section polish."""
    ys = np.linspace(a, b, grid_n)
    fy = np.asarray(f0(ys), dtype=float)
    h = ys[1] - ys[0]
    out = np.empty_like(x)

    def obj(y: np.ndarray, xx: np.ndarray) -> np.ndarray:
        return np.asarray(f0(y), dtype=float) + np.asarray(w(np.abs(xx - y)))

    for s in range(0, x.size, chunk):
        xx = x[s:s + chunk]
        vals = fy[None, :] + np.asarray(w(np.abs(xx[:, None] - ys[None, :])))
        j = vals.argmin(axis=1)
        best = vals[np.arange(xx.size), j]
        lo, hi = np.maximum(ys[j] - h, a), np.minimum(ys[j] + h, b)
        c, d = hi - _GOLDEN * (hi - lo), lo + _GOLDEN * (hi - lo)
        fc, fd = obj(c, xx), obj(d, xx)
        for _ in range(iters):
            left = fc < fd
            hi = np.where(left, d, hi)
            lo = np.where(left, lo, c)
            c_new = hi - _GOLDEN * (hi - lo)
            d_new = lo + _GOLDEN * (hi - lo)
            c, d = c_new, d_new
            fc, fd = obj(c, xx), obj(d, xx)
        out[s:s + chunk] = np.minimum(best, np.minimum(fc, fd))
    return out


def mcshane_extend(f0: Callable[[np.ndarray], np.ndarray], D: tuple[float, float] | Sequence[float],
                   omega_tilde: Modulus, target: tuple[float, float], table_points: int = 20001,
                   values: Sequence[float] | None = None, cap: float | None = None,
                   tol: float = DEFAULT_TOL) -> PiecewiseFunction:
    """McShane extension ``f(x) = inf_{y in D} (f0(y) + w(|x - y|))`` on ``target``.

    ``D`` is either an interval ``(a, b)`` (then ``f0`` is a vectorized
    callable) or a finite point set (then ``values`` may replace ``f0``).
    On an interval ``D`` the result equals ``f0`` exactly; outside it the
    infimum is tabulated on ``table_points`` nodes (grid minimum plus a
    golden-section polish) and interpolated linearly. For finite ``D`` the
    infimum is evaluated exactly at every call.

    ``cap`` truncates the result at a level no smaller than ``max f0``;
    ``min(f, cap)`` keeps every modulus of ``f`` and agrees with ``f0`` on ``D``.

    Raises ``ValueError`` with a witness pair when ``f0`` is not dominated by
    ``w`` on ``D``.
    """
    t0, t1 = map(float, target)
    if not t1 > t0:
        raise ValueError("target interval must have positive length")
    props = check_properties(omega_tilde, grid=GridSpec(1e-6, min(omega_tilde.domain_end, t1 - t0), 2000))
    bad = [k for k in ("subadditive", "nondecreasing_near_0") if getattr(props, k).status != HOLDS]
    if bad:
        warnings.warn(f"{omega_tilde.id}: {', '.join(bad)} not confirmed; domination of the extension "
                      "is not guaranteed", stacklevel=2)

    is_interval = isinstance(D, tuple) and len(D) == 2 and values is None
    if is_interval:
        a, b = map(float, D)
        if not (t0 <= a < b <= t1):
            raise ValueError("D must be a subinterval of the target")
        grid_d = np.linspace(a, b, 2001)
        vals_d = np.asarray(f0(grid_d), dtype=float)
        _check_own_modulus(grid_d, vals_d, omega_tilde, tol)
        if cap is not None and cap < vals_d.max() - tol:
            raise ValueError("cap is below max f0 on D")
        bps: list[float] = []
        segs: list[Segment] = []
        for lo, hi in ((t0, a), (b, t1)):
            if hi - lo <= 0:
                continue
            n = max(3, int(table_points * (hi - lo) / (t1 - t0)))
            xs = np.linspace(lo, hi, n)
            ys = _inf_over_interval(f0, a, b, omega_tilde, xs)
            if cap is not None:
                ys = np.minimum(ys, cap)
            # pin the shared endpoint to f0 so the pieces join exactly
            if hi == a:
                ys[-1] = float(f0(np.array([a]))[0])
            if lo == b:
                ys[0] = float(f0(np.array([b]))[0])
            segs.append(Segment(lo, hi, "table", {"x": xs, "y": ys}))
        segs.append(Segment(a, b, "callable", {"fn": f0}))
        segs.sort(key=lambda s: s.lo)
        bps = [segs[0].lo] + [s.hi for s in segs]
        probe = np.linspace(t0, t1, 4001)
    else:
        pts = np.asarray(D, dtype=float)
        vals = np.asarray(values if values is not None else f0(pts), dtype=float)
        if pts.ndim != 1 or pts.size == 0 or pts.shape != vals.shape:
            raise ValueError("finite D needs matching 1-D points and values")
        if np.any(pts < t0) or np.any(pts > t1):
            raise ValueError("D must lie inside the target")
        _check_own_modulus(pts, vals, omega_tilde, tol)
        if cap is not None and cap < vals.max() - tol:
            raise ValueError("cap is below max f0 on D")
        data = {"points": pts, "values": vals}
        if cap is not None:
            data["cap"] = float(cap)
        segs = [Segment(t0, t1, "finite-inf", data)]
        bps = [t0, t1]
        probe = np.linspace(t0, t1, 4001)
    f = PiecewiseFunction(np.asarray(bps), segs, 0.0, omega_tilde, label=f"mcshane[{omega_tilde.id}]")
    f.value_bound = float(np.max(np.abs(f(probe))))
    return f


# ---------------------------------------------------------------------------
# inductive construction

@dataclass
class BreneisState:
    """Skeleton of the inductive construction: ``x_0 = 1 > x_1 > ...`` and midpoints ``y_n``."""

    x_seq: np.ndarray
    y_seq: np.ndarray  # y_seq[n - 1] = y_n, between x_n and x_{n-1}
    depth: int
    epsilon: float
    M: float
    delta0: float
    complete: bool  # x_n reached 0 exactly
    root_tol: float

    def to_dict(self) -> dict:
        return {"x_seq": self.x_seq.tolist(), "y_seq": self.y_seq.tolist(), "depth": self.depth,
                "epsilon": self.epsilon, "M": self.M, "delta0": self.delta0, "complete": self.complete,
                "root_tol": self.root_tol}


def capped_linear(slope: float, ell: float = 2.0) -> Modulus:
    """``slope * min(h, 1)``: increasing, Lipschitz on ``[0, 1]``, constant beyond 1."""
    return tabulated([0.0, 1.0, ell], [0.0, slope, slope], label=f"capped-linear({slope!r})")


def _slope_at_zero(omega: Modulus) -> float:
    st = slope_tail(omega)
    if st.trend != CONVERGES or not (0 < st.value < math.inf):
        raise ValueError("omega needs a finite positive limit of omega(d)/d at 0")
    return st.value


def _delta0(omega: Modulus, M: float, eps: float) -> float:
    """Largest probed ``d`` with ``(M - eps) t <= omega(t) <= (M + eps) t`` on ``(0, d]``."""
    t = np.geomspace(1e-12, 1.0, 2000)
    r = np.asarray(omega(t)) / t
    ok = (r >= M - eps - 1e-12) & (r <= M + eps + 1e-12)
    if not ok[0]:
        return 0.0
    bad = np.flatnonzero(~ok)
    return float(t[-1] if bad.size == 0 else t[bad[0] - 1])


def breneis_construct(omega: Modulus, omega_tilde: Modulus | None = None, epsilon: float = 0.25,
                      depth: int = 200, root_tol: float = 1e-12, stop: float = 1e-6,
                      h_points: int = 256, scan_points: int = 257,
                      tol: float = 1e-12) -> tuple[PiecewiseFunction, BreneisState]:
    """Build ``f: [0, 1] -> [0, M]`` with ``f(0) = 0`` and ``omega_f <= omega``.

    ``M`` is the limit of ``omega(d)/d`` at 0. With ``x_0 = 1``, each step
    sets ``x_{n+1}`` to the smallest ``x`` whose rise ``w(x + h) - w(x)``
    stays below ``omega(h)`` for ``h`` up to ``y_x - x``, where ``y_x`` splits
    ``[w(x), w(x_n)]`` in half; ``f`` rises from 0 on ``[x_{n+1}, y_{n+1}]``
    and falls back to 0 on ``[y_{n+1}, x_n]``. Membership is tested on
    ``h_points`` geometric values of ``h`` and the smallest member is found
    by a scan followed by bisection, so ``x_{n+1}`` is accurate to ``root_tol``
    relative to the scan. The loop stops after ``depth`` intervals or once
    ``x_n < stop``; ``f`` is 0 on the unreached part ``[0, x_N]``.
    """
    M = _slope_at_zero(omega)
    if not 0 < epsilon < M:
        raise ValueError(f"epsilon must lie in (0, M) with M={M!r}")
    probe = np.linspace(0.0, min(omega.domain_end, 1.0 + 1e-3), 4001)
    if np.any(np.diff(np.asarray(omega(probe))) < -tol):
        raise ValueError("omega must be nondecreasing on [0, b] for some b > 1")
    w = omega_tilde if omega_tilde is not None else capped_linear(M - epsilon)
    g = np.linspace(0.0, 1.0, 2001)
    wg = np.asarray(w(g))
    if np.any(np.diff(wg) <= 0):
        raise ValueError("omega_tilde must be increasing on [0, 1]")
    if np.any(np.diff(wg) > (M - epsilon) * np.diff(g) + 1e-12):
        raise ValueError("omega_tilde must be (M - epsilon)-Lipschitz on [0, 1]")
    if omega_tilde is not None and abs(w(min(w.domain_end, 1.5)) - w(1.0)) > 1e-12:
        raise ValueError("omega_tilde must be constant beyond 1")
    if h_points < 2:
        raise ValueError("membership test needs a nonempty h-grid")

    def y_of(x: float, xn: float) -> float:
        target = 0.5 * (w(x) + w(xn))
        if xn - x <= 0 or w(xn) - w(x) <= 0:
            return x
        fa, fb = w(x) - target, w(xn) - target
        if not (fa <= 0 <= fb):
            raise ValueError(f"cannot bracket y_x on [{x}, {xn}]")
        return optimize.brentq(lambda y: w(y) - target, x, xn, xtol=root_tol * 1e-2, rtol=4 * np.finfo(float).eps)

    def member(x: float, xn: float) -> bool:
        span = y_of(x, xn) - x
        if span <= 0:
            return True
        h = np.concatenate([[0.0], np.geomspace(span * 1e-6, span, h_points - 1)])
        return bool(np.all(np.asarray(w(x + h)) - w(x) <= np.asarray(omega(h)) + tol))

    xs, ys = [1.0], []
    complete = False
    while len(ys) < depth and xs[-1] >= stop:
        xn = xs[-1]
        cand = np.linspace(0.0, xn, scan_points)
        flags = [member(c, xn) for c in cand]
        j = flags.index(True)
        if j == 0:
            x_next = 0.0
        else:
            lo, hi = float(cand[j - 1]), float(cand[j])
            while hi - lo > root_tol:
                mid = 0.5 * (lo + hi)
                if member(mid, xn):
                    hi = mid
                else:
                    lo = mid
            x_next = hi
        if not x_next < xn:
            raise RuntimeError(f"construction stalled at x_n={xn!r}")
        xs.append(x_next)
        ys.append(y_of(x_next, xn))
        if x_next == 0.0:
            complete = True
            break

    segs: list[Segment] = []
    bps: list[float] = []
    x_arr, y_arr = np.array(xs), np.array(ys)
    if x_arr[-1] > 0:
        segs.append(Segment(0.0, float(x_arr[-1]), "zero"))
        bps.append(0.0)
    for n in range(len(ys) - 1, -1, -1):
        lo, mid, hi = float(x_arr[n + 1]), float(y_arr[n]), float(x_arr[n])
        if mid > lo:
            segs.append(Segment(lo, mid, "rise", {"base": lo}))
            bps.append(lo)
        if hi > mid:
            segs.append(Segment(mid, hi, "fall", {"top": hi}))
            bps.append(mid)
    bps.append(1.0)
    f = PiecewiseFunction(np.asarray(bps), segs, M, w, label=f"breneis[{omega.id}]")
    state = BreneisState(x_arr, y_arr, len(ys), float(epsilon), float(M), _delta0(omega, M, epsilon),
                         complete, float(root_tol))
    return f, state


# ---------------------------------------------------------------------------
# domination

def verify_domination(f: Callable[[np.ndarray], np.ndarray], omega: Modulus, pairs: int = 100_000,
                      seed: int = 0, grid: GridSpec | Sequence[float] | None = None,
                      interval: tuple[float, float] | None = None, tol: float = DEFAULT_TOL) -> Certificate:
    """Check ``omega_hat_f(d) <= omega(d) + tol`` on a grid of scales.

    ``omega_hat_f`` is the sampled minimal modulus of ``f``; a failing
    certificate's witness carries the pair that realises the violation.
    """
    iv = interval if interval is not None else getattr(f, "interval", None)
    if iv is None:
        raise ValueError("an interval is required for plain callables")
    a, b = map(float, iv)
    x, y = sample_interval_pairs((a, b), pairs, seed)
    fx, fy = np.asarray(f(x), dtype=float), np.asarray(f(y), dtype=float)
    d, v = np.abs(x - y), np.abs(fx - fy)
    pts = _grid_points(grid, b - a)
    if pts[-1] > omega.domain_end:
        raise ValueError("grid exceeds the modulus domain")
    sup, arg = sup_profile(d, v, pts)
    rhs = np.asarray(omega(pts), dtype=float)
    slack = rhs - sup
    i = int(np.argmin(slack))

    def rec(k: int) -> dict:
        p = int(arg[k])
        out = {"delta": float(pts[k]), "lhs": float(sup[k]), "rhs": float(rhs[k])}
        if p >= 0:
            out.update({"x": float(x[p]), "y": float(y[p])})
        return out

    failed = slack < -tol
    return Certificate(
        verdict="fail" if failed.any() else "pass", margin=float(slack[i]), worst_pair=rec(i),
        samples=int(pairs), seed=seed, tol=tol, label=f"domination by {omega.id}",
        witness=rec(int(np.argmax(failed))) if failed.any() else None,
        details={"omega": omega.describe(), "interval": [a, b]},
    )
