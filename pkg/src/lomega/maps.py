"""Catalog of explicit L-omega-nonexpansive maps and map combinators.

Every catalog map is built by :func:`build` from validated parameters and
carries its claimed ``(L, omega)`` pair, so that certificates can be checked
against it. Sequence-space maps act on finite truncations of dimension ``d``;
shifts drop the last coordinate.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from .extend import PiecewiseFunction, mcshane_extend
from .minmod import Certificate, DEFAULT_TOL
from .moduli import (LN10, Modulus, catalog_modulus, from_function, monotone_hull, rescaled, xabslog)
from .spaces import DomainSpec, StepFn, TailSeq, banach_limit, point_to_json, vec_norm

CATALOG_IDS = ("ex44", "ex45", "ex46", "thm51", "prop59", "thm510", "alspach", "radial", "c0shift",
               "identity", "constant")
RADIAL_LAM_MAX = 18.0 / (27.0 + 7.0 * math.sqrt(3.0))


class ConstraintError(ValueError):
    """Parameters outside the catalog entry's admissible set."""


class DomainError(ValueError):
    """A point handed to a map lies outside its domain."""


@dataclass
class MapParams:
    """Union of the parameters used across the catalog; unused ones stay ``None``.

    ``eps`` is the simplex size (ex45), the ball radius (prop59), the
    distortion constant (thm510) or the averaging slack (thm51), depending on
    the map. ``beta`` is the schedule ``beta_n``; ``None`` means
    ``2**-(n + 1)``. ``f`` names a scalar profile or holds a
    :class:`PiecewiseFunction`.
    """

    L: float | None = None
    sigma: float | None = None
    theta: float | None = None
    eta: float | None = None
    eps: float | None = None
    lam: float | None = None
    mu: float | None = None
    delta: float | None = None
    alpha: Any = None
    beta: Sequence[float] | None = None
    f: Any = None
    c: float | None = None
    norm: str | None = None

    @classmethod
    def from_dict(cls, d: dict | None) -> "MapParams":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConstraintError(f"unknown map parameter(s): {', '.join(unknown)}")
        if isinstance(d.get("f"), dict):
            d["f"] = PiecewiseFunction.from_dict(d["f"])
        return cls(**d)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, PiecewiseFunction):
                v = v.to_dict()
            elif isinstance(v, Fraction):
                v = str(v)
            elif isinstance(v, (np.ndarray, tuple)):
                v = list(np.asarray(v).tolist())
            out[f.name] = v
        return out


@dataclass(frozen=True)
class MapInstance:
    """An evaluable self-map of ``domain`` with its claimed properties.

    ``fn`` acts on a batch: a 2-D array of rows for vector domains, a list of
    points otherwise. ``claims`` is JSON-ready and records the claimed
    ``(L, omega)`` pair, fixed-point status and displacement status.
    """

    catalog_id: str
    params: MapParams
    domain: DomainSpec
    L: float
    omega: Modulus
    claims: dict
    fn: Callable[[Any], Any] = field(repr=False, compare=False)
    internals: dict = field(default_factory=dict, repr=False, compare=False)
    # optional batch formula for Tx - x, free of the cancellation in fn(x) - x
    disp: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False, compare=False)

    def apply_many(self, xs: Any, check: bool = True) -> Any:
        if check:
            ok = self.domain.contains_many(xs, tol=1e-9)
            if not np.all(ok):
                i = int(np.argmin(ok))
                raise DomainError(f"{self.catalog_id}: point {i} lies outside the domain")
        if self.domain.point_type == "vec":
            return self.fn(np.atleast_2d(np.asarray(xs, dtype=float)))
        return self.fn(list(xs))

    def apply(self, x: Any) -> Any:
        if self.domain.point_type == "vec":
            return self.apply_many(np.asarray(x, dtype=float)[None, :])[0]
        return self.apply_many([x])[0]

    def image_distances(self, txs: Any, tys: Any) -> np.ndarray:
        return self.domain.distances(txs, tys)

    def residual(self, x: Any) -> float:
        if self.disp is not None:
            return float(self.residuals(np.asarray(x, dtype=float)[None, :])[0])
        return float(self.domain.distance(self.apply(x), x))

    def residuals(self, xs: Any) -> np.ndarray:
        if self.disp is not None:
            X = np.atleast_2d(np.asarray(xs, dtype=float))
            self.apply_many(X)  # domain check
            D = self.disp(X)
            return self.domain.distances(D, np.zeros_like(D))
        return self.domain.distances(self.apply_many(xs), xs)

    def step_residual(self, x: Any, tx: Any) -> float:
        """``||Tx - x||`` given an already computed image ``tx``."""
        if self.disp is not None:
            D = self.disp(np.asarray(x, dtype=float)[None, :])
            return float(self.domain.distances(D, np.zeros_like(D))[0])
        return float(self.domain.distance(tx, x))

    def metadata(self) -> dict:
        return {"catalog_id": self.catalog_id, "params": self.params.to_dict(),
                "domain": domain_to_dict(self.domain), "claims": self.claims}


def domain_to_dict(dom: DomainSpec) -> dict:
    out = {"kind": dom.kind, "dim": dom.dim, "norm": dom.norm_kind, "diameter": dom.diameter()}
    if dom.kind in ("ball", "simplex", "box", "tail_ball"):
        out["radius"] = dom.radius
    if dom.kind == "stepfn":
        out.update({"alpha": None if dom.alpha is None else str(dom.alpha), "max_level": dom.max_level})
    if dom.kind == "scaled":
        out.update({"factor": dom.factor, "center": None if dom.center is None else list(dom.center),
                    "inner": domain_to_dict(dom.inner)})
    return out


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise ConstraintError(msg)


def _claims(L: float, omega: Modulus, fixed_points: str, displacement: str, construction: str, **extra: Any) -> dict:
    out = {"L": L, "omega": omega.describe(), "fixed_points": fixed_points, "displacement": displacement,
           "construction": construction}
    out.update(extra)
    return out


def default_beta(d: int) -> np.ndarray:
    """``beta_n = 2**-(n + 1)`` for ``n = 1..d``."""
    return np.ldexp(1.0, -np.arange(2, d + 2))


def _beta(p: MapParams, d: int) -> np.ndarray:
    if p.beta is None:
        return default_beta(d)
    b = np.asarray(p.beta, dtype=float)
    _need(b.ndim == 1 and b.size >= d, f"beta needs at least d={d} entries")
    b = b[:d]
    _need(bool(np.all((b > 0) & (b < 1))), "beta_n must lie in (0, 1)")
    _need(bool(np.all(np.diff(b) < 0)), "beta_n must be strictly decreasing")
    _need(float(b.sum()) <= 1.0 + 1e-15, "sum of beta_n must be <= 1")
    return b


def _shift(X: np.ndarray) -> np.ndarray:
    """Right shift ``(t1, t2, ...) -> (0, t1, t2, ...)`` truncated to the same length."""
    out = np.zeros_like(X)
    out[:, 1:] = X[:, :-1]
    return out


# ---------------------------------------------------------------------------
# scalar profiles

def ex41_profile(sigma: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """``r |log10 r**sigma|``, the basic log-type profile."""
    return lambda r: xabslog(r, sigma)


_C0_PROFILES: dict[str, tuple[Callable[[np.ndarray], np.ndarray], float]] = {
    "sin2": (lambda r: np.sin(np.asarray(r) ** 2), 2.0),
    "sin-half": (lambda r: np.sin(np.asarray(r) / 2.0), 0.5),
}


@functools.lru_cache(maxsize=16)
def radial_profile(lam: float) -> PiecewiseFunction:
    """McShane extension of ``lam r sqrt(1 - r)`` from ``[0, 2/3]`` to ``[0, 1]``.

    The extension uses the nondecreasing hull of the radial majorant and is
    truncated at ``max phi = phi(2/3)``; the result equals ``phi(2/3)`` on
    ``[2/3, 1]``.
    """
    phi = lambda r: lam * np.asarray(r) * np.sqrt(np.maximum(1.0 - np.asarray(r), 0.0))
    w = monotone_hull(catalog_modulus("radial-majorant", lam=lam))
    with warnings.catch_warnings():
        # the hull is not subadditive; the cap is what makes the map certificate pass
        warnings.simplefilter("ignore", UserWarning)
        return mcshane_extend(phi, (0.0, 2.0 / 3.0), w, (0.0, 1.0), cap=float(phi(2.0 / 3.0)))


@functools.lru_cache(maxsize=16)
def thm510_profile(omega_key: tuple, eta: float) -> PiecewiseFunction:
    """McShane extension of ``omega`` from ``[0, eta]`` to ``[0, 1]``, using ``omega`` frozen beyond ``eta``."""
    omega = Modulus.from_dict({"id": omega_key[0], "params": dict(omega_key[1])})
    top = float(omega(eta))
    w = Modulus(f"{omega.id}-frozen", {"base": omega.to_dict(), "eta": eta}, max(omega.domain_end, 2.0),
                lambda d: np.where(np.asarray(d) <= eta, omega(np.minimum(d, eta)), top))
    return mcshane_extend(lambda r: np.asarray(omega(r)), (0.0, eta), w, (0.0, 1.0))


# ---------------------------------------------------------------------------
# builders

def _build_ex44(p: MapParams, d: int) -> MapInstance:
    dom = DomainSpec.simplex(1.0, d)
    w = 2.0 ** -np.arange(1, d + 1)
    fn = lambda X: w * xabslog(X)
    L = 2.0 / LN10
    om = catalog_modulus("alog", alpha=1.0)
    return MapInstance("ex44", p, dom, L, om, fn=fn, claims=_claims(
        L, om, "has fixed point 0", "zero", "weighted t|log t| on the l1 simplex"))


def ex45_constraints(L: float, eps: float, theta: float, eta: float) -> None:
    """Raise :class:`ConstraintError` naming the first violated inequality."""
    _need(0 < L <= 1, f"L in (0, 1] violated: L={L!r}")
    _need(0.1 < eps <= 1.0 / (2.0 * math.e),
          f"0.1 < eps <= 1/(2e) violated (needed for eps|log eps| < eps and r|log r| nondecreasing on [0, 2 eps]): eps={eps!r}")
    _need(0 < theta < min(0.5, L * LN10), f"0 < theta < min(1/2, L ln10) violated: theta={theta!r}")
    bound = min(eps * (1 - theta), L - theta / LN10)
    _need(0 < eta < bound, f"0 < eta < min(eps(1-theta), L - theta/ln10) = {bound!r} violated: eta={eta!r}")


def _build_ex45(p: MapParams, d: int) -> MapInstance:
    L = 0.5 if p.L is None else float(p.L)
    eps = 0.15 if p.eps is None else float(p.eps)
    theta = 0.4 if p.theta is None else float(p.theta)
    eta = 0.08 if p.eta is None else float(p.eta)
    ex45_constraints(L, eps, theta, eta)
    p = MapParams(L=L, eps=eps, theta=theta, eta=eta)
    dom = DomainSpec.simplex(eps, d)

    def fn(X: np.ndarray) -> np.ndarray:
        out = theta * _shift(xabslog(X, 0.5))
        out[:, 0] = eta * (1.0 - X.sum(axis=1))
        return out

    om = catalog_modulus("alog", alpha=1.0)
    return MapInstance("ex45", p, dom, L, om, fn=fn, claims=_claims(
        L, om, "fixed-point free", "positive", "first-coordinate feed plus shifted t|log sqrt t|",
        recursion="t_{n+1} = theta t_n |log sqrt t_n|"))


def _build_ex46(p: MapParams, d: int) -> MapInstance:
    L = 1.0 if p.L is None else float(p.L)
    _need(0 < L <= 1, f"L in (0, 1] violated: L={L!r}")
    p = MapParams(L=L)
    dom = DomainSpec.ball(1.0, "l2", d)

    def fn(X: np.ndarray) -> np.ndarray:
        out = L * _shift(X)
        s = 1.0 - (X * X).sum(axis=1)
        # rounding can push |x| a hair past 1; anything further stays NaN
        s = np.where((s < 0) & (s > -1e-12), 0.0, s)
        with np.errstate(invalid="ignore"):
            out[:, 0] = np.sqrt(s)
        return out

    om = catalog_modulus("sqrt2")
    fp = "fixed-point free" if L == 1 else "has a fixed point"
    x1 = math.sqrt((1 - L * L) / (2 - L * L))
    return MapInstance("ex46", p, dom, L, om, fn=fn, claims=_claims(
        L, om, fp, "zero", "Kakutani map sqrt(1-|x|^2) e1 + L R x",
        fixed_point_first_coordinate=None if L == 1 else x1))


def _build_thm51(p: MapParams, d: int) -> MapInstance:
    dom = DomainSpec.ball(1.0, "l1", d)
    beta = _beta(p, d)
    alpha = 1.0 - beta
    fprof = p.f if isinstance(p.f, PiecewiseFunction) else None
    if p.f not in (None, "ex41") and fprof is None:
        raise ConstraintError(f"thm51 profile must be 'ex41' or a PiecewiseFunction, got {p.f!r}")
    f = fprof if fprof is not None else ex41_profile(1.0)
    f0 = float(np.asarray(f(np.array([0.0])))[0])

    def fn(X: np.ndarray) -> np.ndarray:
        r = np.minimum(vec_norm(X, "l1"), 1.0)
        amp = (1.0 - r) * np.cos(np.asarray(f(r)) - f0)
        return alpha * X + amp[:, None] * beta

    def disp(X: np.ndarray) -> np.ndarray:
        r = np.minimum(vec_norm(X, "l1"), 1.0)
        amp = (1.0 - r) * np.cos(np.asarray(f(r)) - f0)
        return (amp[:, None] - X) * beta

    om = catalog_modulus("log", L=2.0 / LN10)
    S = MapInstance("thm51", MapParams(beta=p.beta, f=p.f), dom, 2.0, om, fn=fn, claims=_claims(
        2.0, om, "fixed-point free", "zero", "basis-weighted contraction plus norm-dependent beta feed",
        basis_residual="x_k - S(x_k) = beta_k x_k"), internals={"beta": beta}, disp=disp)
    if p.eps is None:
        return S
    eps = float(p.eps)
    _need(0 < eps < 1, f"averaging slack eps in (0, 1) violated: eps={eps!r}")
    delta = eps / (2.0 * (S.L - 1.0)) if p.delta is None else float(p.delta)
    T = krasnoselskii_average(S, delta, eps)
    return MapInstance("thm51", MapParams(beta=p.beta, f=p.f, eps=eps, delta=delta), T.domain, T.L, T.omega,
                       fn=T.fn, claims=T.claims, internals=dict(S.internals, delta=delta), disp=T.disp)


def prop59_constraints(L: float, sigma: float, eps: float) -> None:
    _need(0 < L <= 1, f"L in (0, 1] violated: L={L!r}")
    _need(0 < sigma < 1 and 0 < eps < 1, "sigma, eps in (0, 1) violated")
    _need(2 * sigma <= L * LN10 * (1 + 1e-12), f"2 sigma <= L ln10 violated: sigma={sigma!r}, L={L!r}")
    # |log r^sigma| >= 1 on [0, eps] and r|log r^sigma| <= eps on [0, eps] pin eps^sigma = 1/10
    _need(abs(eps ** sigma - 0.1) <= 1e-12, f"eps**sigma = 1/10 violated: eps**sigma={eps ** sigma!r}")


def _build_prop59(p: MapParams, d: int) -> MapInstance:
    L = 0.5 if p.L is None else float(p.L)
    sigma = 0.5 if p.sigma is None else float(p.sigma)
    eps = 10.0 ** (-1.0 / sigma) if p.eps is None else float(p.eps)
    prop59_constraints(L, sigma, eps)
    p = MapParams(L=L, sigma=sigma, eps=eps)
    dom = DomainSpec.tail_ball(eps, d)

    def phi(t: Any) -> Any:
        return xabslog(np.abs(t), sigma)

    def one(x: TailSeq) -> TailSeq:
        lim = banach_limit(x)
        head = eps - float(phi(lim))
        return TailSeq(np.concatenate([[head], phi(x.prefix)]), float(phi(x.tail)))

    om = catalog_modulus("alog", alpha=1.0)
    return MapInstance("prop59", p, dom, L, om, fn=lambda xs: [one(x) for x in xs], claims=_claims(
        L, om, "fixed-point free", "unknown", "Banach-limit feed plus coordinatewise t|log t^sigma|",
        limit_equation="a = a|log a^sigma|", limit_roots=[0.0, eps]))


def _omega_key(m: Modulus) -> tuple:
    return (m.id, tuple(sorted((k, v) for k, v in m.params.items())))


def _build_thm510(p: MapParams, d: int, omega: Modulus | None = None) -> MapInstance:
    eta = 0.2 if p.eta is None else float(p.eta)
    eps = 0.5 if p.eps is None else float(p.eps)
    om = omega if omega is not None else catalog_modulus("alog", alpha=1.0)
    _need(0 < eta < 1, f"eta in (0, 1) violated: eta={eta!r}")
    _need(0 < eps <= 1, f"distortion eps in (0, 1] violated: eps={eps!r}")
    _need(om(eta) <= eta, f"omega(eta) <= eta violated: omega(eta)={om(eta)!r}")
    g = np.linspace(0.0, eta, 4001)
    _need(bool(np.all(np.diff(np.asarray(om(g))) >= 0)), "omega nondecreasing on [0, eta] violated")
    beta = _beta(p, d)
    alpha = 1.0 - beta
    if isinstance(p.f, PiecewiseFunction):
        f = p.f
    else:
        _need(p.f is None, f"thm510 profile must be a PiecewiseFunction or omitted, got {p.f!r}")
        f = thm510_profile(_omega_key(om), eta)
    fe = np.asarray(f(eps * g))
    _need(bool(np.all(alpha[0] * fe + eta * beta[0] <= eta + 1e-15)),
          "alpha_n f(eps t) + eta beta_n <= eta violated")
    p = MapParams(eta=eta, eps=eps, beta=p.beta, f=p.f)
    dom = DomainSpec.box(eta, d)

    def fn(X: np.ndarray) -> np.ndarray:
        vals = np.asarray(f(eps * X.ravel())).reshape(X.shape)
        return alpha * vals + eta * beta

    return MapInstance("thm510", p, dom, 0.0, om, fn=fn, claims=_claims(
        0.0, om, "fixed-point free", "zero", "coordinatewise alpha_n f(eps t_n) + eta beta_n on a c0 box",
        afp_residual="||T(y_n) - y_n|| = eta beta_{n+1}", profile=f.label),
        internals={"f": f, "alpha": alpha, "beta": beta, "eta": eta, "eps": eps})


def _alspach_one(f: StepFn) -> StepFn:
    one = Fraction(1)
    left = [min(2 * v, one) for v in f.values]
    right = [max(2 * v, one) - 1 for v in f.values]
    return StepFn(f.level + 1, left + right)


def _build_alspach(p: MapParams, d: int) -> MapInstance:
    alpha = None if p.alpha is None else Fraction(p.alpha)
    dom = DomainSpec.step_functions(alpha, max_level=8)
    om = catalog_modulus("zero")
    return MapInstance("alspach", MapParams(alpha=alpha), dom, 1.0, om,
                       fn=lambda fs: [_alspach_one(f) for f in fs], claims=_claims(
        1.0, om, "has fixed point 0" if alpha is None else "fixed-point free", "zero",
        "baker-type L1 isometry on [0, 1]-valued step functions"))


def _build_radial(p: MapParams, d: int) -> MapInstance:
    lam = 0.2 if p.lam is None else float(p.lam)
    norm = p.norm or "l2"
    _need(0 < lam < 1, f"lam in (0, 1) violated: lam={lam!r}")
    f = radial_profile(lam)
    dom = DomainSpec.ball(1.0, norm, d)

    def fn(X: np.ndarray) -> np.ndarray:
        r = np.minimum(vec_norm(X, norm), 1.0)
        return np.asarray(f(r))[:, None] * X

    L = 7.0 * math.sqrt(3.0) * lam / 18.0
    om = catalog_modulus("radial", lam=lam)
    return MapInstance("radial", MapParams(lam=lam, norm=norm), dom, L, om, fn=fn, claims=_claims(
        L, om, "has fixed point 0", "zero", "radial scaling f(|x|) x",
        slope_premise=bool(lam <= RADIAL_LAM_MAX), slope_at_zero=1.5 * lam))


def _build_c0shift(p: MapParams, d: int) -> MapInstance:
    name = p.f or "sin2"
    if name == "const":
        c = 0.5 if p.c is None else float(p.c)
        _need(0 <= c <= 1, "constant profile must lie in [0, 1]")
        f, lip = (lambda r: np.full_like(np.asarray(r, dtype=float), c)), 0.0
    else:
        _need(name in _C0_PROFILES, f"unknown c0shift profile {name!r}; known: const, {', '.join(_C0_PROFILES)}")
        f, lip = _C0_PROFILES[name]
    dom = DomainSpec.ball(1.0, "sup", d)

    def fn(X: np.ndarray) -> np.ndarray:
        r = np.minimum(vec_norm(X, "sup"), 1.0)
        out = _shift(X)
        out[:, 0] = 1.0 - np.asarray(f(r)) * r
        return out

    om = (catalog_modulus("zero") if name == "const"
          else from_function(f, (0.0, 1.0), lip, label=f"omega_f[{name}]"))
    return MapInstance("c0shift", MapParams(f=name, c=p.c), dom, 1.0, om, fn=fn, claims=_claims(
        1.0, om, "fixed-point free", "zero" if name == "sin2" else "unknown",
        "shift with norm-dependent first coordinate"))


def _build_identity(p: MapParams, d: int) -> MapInstance:
    dom = DomainSpec.ball(1.0, p.norm or "l2", d)
    om = catalog_modulus("zero")
    return MapInstance("identity", MapParams(norm=p.norm), dom, 1.0, om, fn=lambda X: X.copy(),
                       claims=_claims(1.0, om, "every point fixed", "zero", "identity"))


def _build_constant(p: MapParams, d: int) -> MapInstance:
    c = 0.25 if p.c is None else float(p.c)
    norm = p.norm or "l2"
    dom = DomainSpec.ball(1.0, norm, d)
    _need(abs(c) <= 1, "constant value must lie in the unit ball")
    point = np.zeros(d)
    point[0] = c
    om = catalog_modulus("zero")
    return MapInstance("constant", MapParams(c=c, norm=p.norm), dom, 0.0, om,
                       fn=lambda X: np.repeat(point[None, :], len(X), axis=0),
                       claims=_claims(0.0, om, "single fixed point c e1", "zero", "constant map"))


_BUILDERS: dict[str, Callable[[MapParams, int], MapInstance]] = {
    "ex44": _build_ex44, "ex45": _build_ex45, "ex46": _build_ex46, "thm51": _build_thm51,
    "prop59": _build_prop59, "thm510": _build_thm510, "alspach": _build_alspach, "radial": _build_radial,
    "c0shift": _build_c0shift, "identity": _build_identity, "constant": _build_constant,
}


def build(catalog_id: str, params: MapParams | dict | None = None, d: int = 64,
          domain: DomainSpec | None = None) -> MapInstance:
    """Build a catalog map with validated parameters.

    ``domain`` replaces the default domain (useful for probing a formula
    outside its admissible set); the claims are left untouched.
    """
    if catalog_id not in _BUILDERS:
        raise ConstraintError(f"unknown catalog id {catalog_id!r}; known: {', '.join(CATALOG_IDS)}")
    if d < 2:
        raise ConstraintError("truncation dimension d must be >= 2")
    p = params if isinstance(params, MapParams) else MapParams.from_dict(params)
    m = _BUILDERS[catalog_id](p, d)
    if domain is not None:
        m = MapInstance(m.catalog_id, m.params, domain, m.L, m.omega, m.claims, m.fn, m.internals, m.disp)
    return m


def catalog() -> list[dict]:
    """Default instances' metadata, for browsing."""
    out = []
    for cid in CATALOG_IDS:
        m = build(cid, d=8)
        out.append({"id": cid, "params": m.params.to_dict(), "domain": domain_to_dict(m.domain),
                    "claims": m.claims})
    return out


# ---------------------------------------------------------------------------
# combinators

def _axpy(a: Any, x: Any, b: Any, y: Any) -> Any:
    """``a x + b y`` for every point representation."""
    return x * a + y * b


def krasnoselskii_average(S: MapInstance, delta: float, eps: float | None = None) -> MapInstance:
    """``T = delta S + (1 - delta) I``.

    Fixed points are unchanged and ``||Tx - x|| = delta ||Sx - x||``. If ``S``
    is ``L0``-``omega``-Lipschitz with ``L0 > 1`` and ``eps`` is given, the
    weight must satisfy ``delta < eps / (L0 - 1)``, and ``T`` is claimed
    ``(1 + eps)``-``omega``-Lipschitz.
    """
    if not 0 < delta < 1:
        raise ConstraintError(f"delta in (0, 1) violated: delta={delta!r}")
    if eps is not None and S.L > 1 and not delta < eps / (S.L - 1):
        raise ConstraintError(f"delta < eps/(L0 - 1) = {eps / (S.L - 1)!r} violated: delta={delta!r}")
    L = 1.0 + eps if eps is not None else delta * S.L + (1 - delta)
    if S.domain.point_type == "vec":
        fn = lambda X: delta * S.fn(X) + (1.0 - delta) * X
    else:
        dl = Fraction(delta) if S.domain.point_type == "step" else delta
        fn = lambda xs: [_axpy(dl, sx, 1 - dl, x) for sx, x in zip(S.fn(xs), xs)]
    disp = None if S.disp is None else (lambda X: delta * S.disp(X))
    claims = dict(S.claims, L=L, construction=f"average({S.claims['construction']}, delta={delta!r})")
    return MapInstance(S.catalog_id, MapParams(**{**asdict(S.params), "delta": delta}), S.domain, L, S.omega,
                       claims, fn, dict(S.internals, base=S), disp)


def _correction(L: float, omega: Modulus, diam: float, mu: float, n: int = 4097) -> float:
    r = np.linspace(0.0, diam, n)
    return (1 - mu) * L * diam + float(np.max(np.asarray(omega((1 - mu) * r))))


def mu_scale(T: MapInstance, mu: float) -> MapInstance:
    """``F_mu(x) = T(mu x)``, which is ``mu L``-``omega(mu .)``-nonexpansive.

    The metadata records the correction in
    ``d(T, K) <= d(F_mu, K) + (1 - mu) L diam K + sup_{r <= diam K} omega((1 - mu) r)``.
    """
    if not 0 < mu < 1:
        raise ConstraintError(f"mu in the open interval (0, 1) violated: mu={mu!r}")
    if not T.domain.contains_zero():
        raise ConstraintError("mu_scale needs 0 in the domain")
    if T.domain.point_type == "vec":
        fn = lambda X: T.fn(mu * X)
    else:
        m = Fraction(mu) if T.domain.point_type == "step" else mu
        fn = lambda xs: T.fn([x * m for x in xs])
    om = rescaled(T.omega, inner=mu)
    diam = T.domain.diameter()
    claims = dict(T.claims, L=mu * T.L, omega=om.describe(), mu=mu,
                  construction=f"mu-scaled({T.claims['construction']})",
                  displacement_bound_correction=_correction(T.L, T.omega, diam, mu))
    return MapInstance(T.catalog_id, MapParams(**{**asdict(T.params), "mu": mu}), T.domain, mu * T.L, om,
                       claims, fn, dict(T.internals, base=T))


def shrink_scale(P: MapInstance, eta: float) -> MapInstance:
    """``T(u) = eta P(u / eta)`` on ``eta K``; displacements scale by ``eta``."""
    if not 0 < eta < 1:
        raise ConstraintError(f"eta in (0, 1) violated: eta={eta!r}")
    if not P.domain.contains_zero():
        raise ConstraintError("shrink_scale needs a domain star-shaped about 0")
    dom = DomainSpec.scaled(P.domain, eta)
    if P.domain.point_type == "vec":
        fn = lambda U: eta * P.fn(U / eta)
    else:
        e = Fraction(eta) if P.domain.point_type == "step" else eta
        fn = lambda us: [y * e for y in P.fn([u * (1 / e) for u in us])]
    om = rescaled(P.omega, inner=1.0 / eta, outer=eta)
    claims = dict(P.claims, omega=om.describe(), eta=eta, construction=f"shrunk({P.claims['construction']})")
    return MapInstance(P.catalog_id, P.params, dom, P.L, om, claims, fn, dict(P.internals, base=P))


# ---------------------------------------------------------------------------
# invariance

def _violation(dom: DomainSpec, ys: Any) -> np.ndarray:
    """Amount by which each point leaves the domain (0 inside, inf for non-finite)."""
    if dom.kind == "scaled":
        if dom.point_type == "vec":
            Y = np.asarray(ys, dtype=float)
            base = Y if dom.center is None else Y - np.asarray(dom.center)
            return dom.factor * _violation(dom.inner, base / dom.factor)
        return dom.factor * _violation(dom.inner, [y * (1 / dom.factor) for y in ys])
    if dom.point_type == "step":
        return np.array([0.0 if dom.contains(y) else 1.0 for y in ys])
    if dom.point_type == "tail":
        n = np.array([y.norm() for y in ys])
        out = np.maximum(n - dom.radius, 0.0)
        return np.where(np.isfinite(n), out, np.inf)
    Y = np.asarray(ys, dtype=float)
    with np.errstate(invalid="ignore"):
        if dom.kind == "ball":
            out = np.maximum(vec_norm(Y, dom.norm_kind) - dom.radius, 0.0)
        elif dom.kind == "simplex":
            out = np.maximum(np.maximum(-Y.min(axis=1), Y.sum(axis=1) - dom.radius), 0.0)
        else:
            out = np.maximum(np.maximum(-Y.min(axis=1), Y.max(axis=1) - dom.radius), 0.0)
    return np.where(np.all(np.isfinite(Y), axis=1), out, np.inf)


def check_invariance(map: MapInstance, n: int = 10_000, seed: int = 0, tol: float = DEFAULT_TOL) -> Certificate:
    """Check ``T(x) in K`` on ``n`` sampled points (half uniform, half boundary)."""
    rng = np.random.default_rng(seed)
    h = n // 2
    parts = [map.domain.sample(n - h, rng, "uniform")]
    if h:
        parts.append(map.domain.sample(h, rng, "boundary"))
    xs = np.concatenate(parts) if map.domain.point_type == "vec" else [p for part in parts for p in part]
    ys = map.apply_many(xs, check=False)
    viol = _violation(map.domain, ys)
    i = int(np.argmax(viol))
    failed = viol > tol
    rec = lambda k: {"x": point_to_json(xs[k]), "image": point_to_json(ys[k]), "violation": float(viol[k])}
    return Certificate(
        verdict="fail" if failed.any() else "pass", margin=-float(viol[i]), worst_pair=rec(i),
        samples=int(n), seed=seed, tol=tol, label=f"{map.catalog_id}: invariance",
        witness=rec(int(np.argmax(failed))) if failed.any() else None,
        details={"domain": domain_to_dict(map.domain)},
    )
