"""Fixed points, approximate fixed points and minimal displacement.

Everything here reports *upper bounds* on ``d(T, K) = inf ||Tx - x||``
together with the search metadata; the infimum over an infinite set is
never claimed.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.optimize import bisect

from .maps import ConstraintError, MapInstance, _axpy, mu_scale
from .minmod import DEFAULT_TOL, Certificate, _pair_record, certify_L_omega
from .moduli import Modulus, delta_omega
from .spaces import DomainSpec, point_to_json, positive_retraction, vec_norm

SCHEMES = ("picard", "krasnoselskii")
BISECT_XTOL = 1e-12


class PremiseError(ValueError):
    """A required premise failed; ``certificate`` says which pair broke it."""

    def __init__(self, msg: str, certificate: Certificate | None = None):
        super().__init__(msg)
        self.certificate = certificate


@dataclass
class DisplacementReport:
    """Best point seen by an iteration or search, and its residual ``||Tx - x||``."""

    best_point: Any
    best_residual: float
    iterations: int
    scheme: str
    converged: bool
    history: list[float] = field(default_factory=list)
    escaped: bool = False
    candidates: list[dict] = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def to_dict(self, history: bool = True) -> dict:
        out = {"best_point": point_to_json(self.best_point), "best_residual": self.best_residual,
               "iterations": self.iterations, "scheme": self.scheme, "converged": self.converged,
               "escaped": self.escaped, "candidates": self.candidates, "flags": self.flags,
               "bound": "upper bound on d(T, K)"}
        if history:
            out["history"] = list(self.history)
        return out


@dataclass
class AFPSequence:
    """Approximate fixed points ``y_n`` with residuals ``||T y_n - y_n||``."""

    points: list
    residuals: list[float]
    construction: str
    aux: dict = field(default_factory=dict)

    def to_dict(self, points: bool = False) -> dict:
        out = {"residuals": list(self.residuals), "construction": self.construction, "aux": self.aux}
        if points:
            out["points"] = [point_to_json(p) for p in self.points]
        return out


def history_csv(residuals: Sequence[float]) -> str:
    """Residual trace as CSV with header ``iter,residual``."""
    buf = io.StringIO()
    buf.write("iter,residual\n")
    for i, r in enumerate(residuals):
        buf.write(f"{i},{float(r)!r}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# iteration

def _as_point(map: MapInstance, x: Any) -> Any:
    if map.domain.point_type == "vec":
        return np.array(x, dtype=float).reshape(-1)
    return x


def iterate_displacement(map: MapInstance, x0: Any, scheme: str = "picard", lam: float = 0.5,
                         max_iter: int = 1000, tol: float = 1e-12) -> DisplacementReport:
    """Iterate ``x <- T x`` (Picard) or ``x <- (1 - lam) x + lam T x`` (Krasnoselskii).

    Stops once the residual drops to ``tol`` or the budget of ``max_iter``
    map evaluations is spent, and returns the best point seen. If an iterate
    leaves the domain (or stops being finite) the run ends with
    ``escaped=True`` and the last valid state.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if scheme == "krasnoselskii" and not 0 < lam < 1:
        raise ValueError(f"lam in (0, 1) violated: lam={lam!r}")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")
    dom = map.domain
    x = _as_point(map, x0)
    if not dom.contains(x, tol=1e-9):
        raise ValueError("x0 lies outside the domain")
    vec = dom.point_type == "vec"
    tag = scheme if scheme == "picard" else f"krasnoselskii({lam!r})"
    history: list[float] = []
    best, best_r = x, math.inf
    converged = escaped = False
    for _ in range(max_iter):
        tx = map.fn(x[None, :])[0] if vec else map.fn([x])[0]
        r = map.step_residual(x, tx)
        if not math.isfinite(r):
            escaped = True
            break
        history.append(r)
        if r < best_r:
            best, best_r = x, r
        if r <= tol:
            converged = True
            break
        if scheme == "picard":
            nxt = tx
        elif vec:
            nxt = (1.0 - lam) * x + lam * tx
        else:
            nxt = _axpy(1 - lam, x, lam, tx)
        if not dom.contains(nxt, tol=1e-9):
            escaped = True
            break
        x = nxt
    return DisplacementReport(best, best_r, len(history), tag, converged, history, escaped=escaped)


def basis_starts(domain: DomainSpec, count: int | None = None) -> np.ndarray:
    """Scaled standard basis vectors ``r e_k`` lying on the domain's boundary."""
    if domain.point_type != "vec" or domain.kind not in ("ball", "simplex", "box"):
        raise ValueError("basis starts need a ball, simplex or box of vectors")
    n = domain.dim if count is None else min(int(count), domain.dim)
    return domain.radius * np.eye(domain.dim)[:n]


def _refine(map: MapInstance, x: np.ndarray, r: float, budget: int, rng: np.random.Generator,
            batch: int = 64) -> tuple[np.ndarray, float, int]:
    """Stochastic local search around ``x``; the radius halves after a failed batch."""
    dom = map.domain
    radius = max(r, 1e-12)
    used = 0
    scale = 1.0 + float(np.abs(x).max(initial=0.0))
    while used + batch <= budget and radius > 1e-15 * scale:
        u = rng.standard_normal((batch, x.size))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        cand = x[None, :] + radius * rng.random((batch, 1)) * u
        cand = cand[dom.contains_many(cand, tol=0.0)]
        used += batch
        if len(cand) == 0:
            radius *= 0.5
            continue
        rs = map.residuals(cand)
        i = int(np.argmin(rs))
        if rs[i] < r:
            x, r = cand[i], float(rs[i])
        else:
            radius *= 0.5
    return x, r, used


def displacement_search(map: MapInstance, multistart: int = 8, seed: int = 0, budget: int = 10_000,
                        starts: Any = None, scheme: str = "picard", lam: float = 0.5, tol: float = 1e-12,
                        refine: float = 0.1, domain: DomainSpec | None = None,
                        workers: int = 1) -> DisplacementReport:
    """Upper bound on ``d(T, K)`` from multistart iteration plus local refinement.

    Parameters
    ----------
    multistart
        Number of random starts, ignored when ``starts`` is given.
    budget
        Total number of map evaluations. A fraction ``refine`` of it goes to
        stochastic local search around the best point (vector domains only).
    domain
        Where to draw starts; defaults to the map's domain.
    workers
        Thread count for the starts. The reduction takes the smallest
        residual with ties broken by start index, so it does not depend on
        scheduling.

    Returns
    -------
    DisplacementReport
        ``best_residual`` is re-evaluated at ``best_point``. ``candidates``
        lists per-start results including ``start_residual``.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    rng = np.random.default_rng(seed)
    dom = map.domain if domain is None else domain
    if starts is None:
        if multistart < 1:
            raise ValueError("multistart must be positive")
        starts = dom.sample(multistart, seed=rng, strategy="uniform")
    starts = list(starts)
    vec = map.domain.point_type == "vec"
    share = refine if vec else 0.0
    per = max(1, int(budget * (1 - share)) // len(starts))

    def run(x0: Any) -> DisplacementReport:
        return iterate_displacement(map, x0, scheme=scheme, lam=lam, max_iter=per, tol=tol)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            runs = list(pool.map(run, starts))
    else:
        runs = [run(x0) for x0 in starts]
    candidates = []
    for i, (x0, rep) in enumerate(zip(starts, runs)):
        candidates.append({"start": i, "start_residual": rep.history[0] if rep.history else None,
                           "best_residual": rep.best_residual, "iterations": rep.iterations,
                           "converged": rep.converged, "escaped": rep.escaped})
    k = min(range(len(runs)), key=lambda i: (runs[i].best_residual, i))
    best, best_r = runs[k].best_point, runs[k].best_residual
    used = sum(rep.iterations for rep in runs)
    refined = 0
    if vec and best_r > tol and share > 0:
        best, best_r, refined = _refine(map, best, best_r, max(budget - used, 0), rng)
        used += refined
    best_r = map.residual(best)
    claim = map.claims.get("fixed_points", "")
    flags = {"refinement_evaluations": refined, "best_start": k, "fixed_point_claim": claim}
    if "free" in claim:
        if map.claims.get("displacement") == "zero":
            # null displacement: small residuals are expected, nothing to contradict
            flags["fixed_point_free_claim_consistent"] = None
        else:
            flags["fixed_point_free_claim_consistent"] = bool(best_r > tol)
    return DisplacementReport(best, best_r, used, runs[k].scheme, best_r <= tol,
                              runs[k].history, escaped=runs[k].escaped, candidates=candidates, flags=flags)


# ---------------------------------------------------------------------------
# approximate fixed point constructions

def afp_thm510(map: MapInstance, n_max: int = 20, xtol: float = BISECT_XTOL) -> AFPSequence:
    """Approximate fixed points of the box map ``T x = sum (alpha_i f(eps x_i) + eta beta_i) e_i``.

    Each coordinate map ``g_i(t) = alpha_i f(eps t) + beta_i eta`` sends
    ``[beta_i eta, eta]`` into itself, so bisection on ``g_i(t) - t`` finds
    ``t_i``. With ``y_n = sum_{i <= n} t_i e_i`` the residual is exactly
    ``eta beta_{n+1}`` in the sup norm.
    """
    if map.catalog_id != "thm510" or "f" not in map.internals:
        raise ValueError("afp_thm510 needs a thm510 map instance")
    f, alpha, beta = map.internals["f"], map.internals["alpha"], map.internals["beta"]
    eta, eps = map.internals["eta"], map.internals["eps"]
    d = map.domain.dim
    if not 1 <= n_max < d:
        raise ValueError(f"n_max must lie in [1, {d - 1}] for truncation d={d}")

    ts, gres = [], []
    for i in range(n_max):
        g = lambda t, i=i: float(alpha[i] * f(np.array([eps * t]))[0] + beta[i] * eta) - t
        a, b = beta[i] * eta, eta
        ga, gb = g(a), g(b)
        if ga < 0 or gb > 0:
            raise ConstraintError(f"no sign change for g_{i + 1} on [{a!r}, {b!r}]: "
                                  f"g(a) - a = {ga!r}, g(b) - b = {gb!r}; f and the parameters disagree")
        t = a if ga == 0 else b if gb == 0 else bisect(g, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps,
                                                         maxiter=200)
        ts.append(t)
        gres.append(abs(g(t)))

    points, residuals, closed = [], [], []
    for n in range(1, n_max + 1):
        y = np.zeros(d)
        y[:n] = ts[:n]
        points.append(y)
        residuals.append(map.residual(y))
        closed.append(float(eta * beta[n]))
    return AFPSequence(points, residuals, "thm510",
                       {"t": ts, "g_residual": gres, "closed_form": closed, "eta": eta, "xtol": xtol})


def default_mu_schedule(k_max: int = 20) -> list[float]:
    return [1.0 - 2.0 ** -k for k in range(1, k_max + 1)]


def afp_mu_schedule(map: MapInstance, mu_schedule: Sequence[float] | None = None, inner_budget: int = 2000,
                    seed: int = 0, multistart: int = 4) -> AFPSequence:
    """Bound ``d(T, K)`` through the maps ``F_mu(x) = T(mu x)``.

    For each ``mu`` a displacement search on ``F_mu`` gives ``r_mu``, and
    ``d(T, K) <= r_mu + (1 - mu) L diam K + sup_{r <= diam K} omega((1 - mu) r)``.
    The search warm-starts from the previous best point. The premise
    ``Delta_omega <= 1 - L`` is estimated and reported, not enforced.
    """
    mus = default_mu_schedule() if mu_schedule is None else [float(m) for m in mu_schedule]
    if any(not 0 < m < 1 for m in mus) or any(b <= a for a, b in zip(mus, mus[1:])):
        raise ValueError("mu_schedule must increase strictly inside (0, 1)")
    if not map.domain.contains_zero():
        raise ValueError("afp_mu_schedule needs 0 in the domain")
    dw = delta_omega(map.omega)
    premise = bool(dw <= 1 - map.L + 1e-12)
    rng = np.random.default_rng(seed)
    zero = map.domain.zero()
    prev = None
    points, residuals, bounds, rows = [], [], [], []
    for j, mu in enumerate(mus):
        F = mu_scale(map, mu)
        starts = map.domain.sample(multistart, seed=rng, strategy="uniform")
        starts = list(starts) + [zero] + ([] if prev is None else [prev])
        rep = displacement_search(F, seed=int(rng.integers(2 ** 31)), budget=inner_budget, starts=starts)
        corr = F.claims["displacement_bound_correction"]
        prev = rep.best_point
        points.append(rep.best_point)
        residuals.append(rep.best_residual)
        bounds.append(rep.best_residual + corr)
        rows.append({"mu": mu, "residual_F_mu": rep.best_residual, "correction": corr,
                     "bound": rep.best_residual + corr, "residual_T": map.residual(rep.best_point),
                     "escaped": rep.escaped, "iterations": rep.iterations})
    return AFPSequence(points, residuals, "mu-schedule",
                       {"mu": mus, "bound": bounds, "rows": rows, "delta_omega": dw,
                        "premise_delta_omega_le_1_minus_L": premise})


# ---------------------------------------------------------------------------
# constancy

def _unit_pairs(dom: DomainSpec, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Pairs at distance exactly one (up to rounding), where ``omega(1) = 0`` bites."""
    if dom.kind == "ball":
        b = dom.sample(n, seed=rng, strategy="boundary") / dom.radius
        return np.concatenate([np.zeros_like(b), 0.5 * b]), np.concatenate([b, -0.5 * b])
    # positive part: 0 against a point whose norm is one
    b = dom.sample(n, seed=rng, strategy="uniform")
    if dom.kind == "box":
        b[np.arange(n), rng.integers(dom.dim, size=n)] = 1.0
    else:
        b /= np.maximum(b.sum(axis=1, keepdims=True), 1e-300)
    return np.zeros_like(b), b


def constancy_certify(map: MapInstance, omega: Modulus, samples: int = 10_000, seed: int = 0,
                      premise_pairs: int = 100_000, tol: float = DEFAULT_TOL) -> Certificate:
    """Check that an ``omega``-nonexpansive map with ``omega(1) = 0`` is constant.

    The premise ``rho(Tx, Ty) <= omega(rho(x, y))`` is certified first and a
    :class:`PremiseError` is raised if it fails. On the positive part of a
    ball the samples are drawn from the whole ball and pushed through the
    coordinate-wise absolute value, i.e. ``P = T o R`` is tested.
    """
    dom = map.domain
    if dom.point_type != "vec" or dom.dim < 2:
        raise ValueError("constancy needs a vector domain of dimension at least 2")
    positive = dom.kind in ("simplex", "box")
    if dom.kind not in ("ball", "simplex", "box") or dom.radius != 1.0:
        raise ValueError("constancy needs the unit ball or its positive part")
    w1 = float(np.asarray(omega(np.array([1.0])), dtype=float)[0])
    if abs(w1) > tol:
        raise PremiseError(f"omega(1) = {w1!r} is not 0")
    rng = np.random.default_rng(seed)
    extra = _unit_pairs(dom, max(samples // 10, 1), rng)
    prem = certify_L_omega(map, 0.0, omega, pairs=premise_pairs, seed=seed, tol=tol, extra_pairs=extra)
    if not prem.passed:
        raise PremiseError(f"{map.catalog_id} is not omega-nonexpansive for {omega.id}", prem)

    if positive:
        norm = "l1" if dom.kind == "simplex" else "sup"
        xs = positive_retraction(DomainSpec.ball(1.0, norm, dom.dim).sample(samples, seed=rng))
    else:
        xs = dom.sample(samples, seed=rng)
    t0 = map.apply(dom.zero())
    v = dom.distances(map.apply_many(xs, check=False), np.repeat(t0[None, :], len(xs), axis=0))
    v = np.where(np.isfinite(v), v, np.inf)
    i = int(np.argmax(v))
    failed = v > tol
    witness = None
    if failed.any():
        j = int(np.argmax(failed))
        witness = _pair_record(xs[j], dom.zero(), v[j], tol, float(dom.distance(xs[j], dom.zero())))
    return Certificate(
        verdict="fail" if failed.any() else "pass", margin=float(tol - v[i]),
        worst_pair=_pair_record(xs[i], dom.zero(), v[i], tol, float(dom.distance(xs[i], dom.zero()))),
        samples=len(xs), seed=seed, tol=tol, label=f"{map.catalog_id}: constancy, omega={omega.id}",
        witness=witness, details={"premise": prem.to_dict(), "positive_part": positive,
                                  "omega_at_1": w1, "route": "T o R" if positive else "T"})


# ---------------------------------------------------------------------------
# diametral points

@dataclass
class DiametralProfile:
    radii: np.ndarray
    diameter: float
    non_diametral: list[int]

    def to_dict(self) -> dict:
        return {"radii": self.radii.tolist(), "diameter": self.diameter, "non_diametral": self.non_diametral}


def diametral_profile(points: Any, norm: str = "l2", rtol: float = 1e-12) -> DiametralProfile:
    """Farthest-point radii ``r(y) = max_x ||x - y||`` over a finite set.

    A point with ``r(y) < diam`` is non-diametral, which is what normal
    structure asks for.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if len(P) < 2:
        raise ValueError("need at least two points")
    D = vec_norm(P[:, None, :] - P[None, :, :], norm)
    radii = D.max(axis=1)
    diam = float(radii.max())
    cut = diam - rtol * diam
    return DiametralProfile(radii, diam, [int(i) for i in np.flatnonzero(radii < cut)])
