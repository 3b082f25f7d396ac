"""Finite-truncation points and convex domains.

Three point representations are used throughout the package:

* plain ``numpy`` vectors of a fixed truncation dimension, measured in the
  ``l1``, ``l2`` or ``sup`` norm (the norm lives on the domain, not the vector);
* :class:`TailSeq`, an eventually-constant bounded sequence, for which a
  Banach limit is exactly computable;
* :class:`StepFn`, a dyadic step function on ``[0, 1)`` with exact rational
  values, measured in ``L1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

NORMS = ("l1", "l2", "sup")


def vec_norm(v: np.ndarray, kind: str) -> float:
    """Norm of a vector (or of each row of a 2-D batch)."""
    v = np.asarray(v, dtype=float)
    if kind == "l1":
        return np.abs(v).sum(axis=-1)
    if kind == "l2":
        return np.sqrt((v * v).sum(axis=-1))
    if kind == "sup":
        return np.abs(v).max(axis=-1, initial=0.0)
    raise ValueError(f"unknown norm {kind!r}; expected one of {NORMS}")


class TailSeq:
    """Eventually-constant real sequence ``(p_1, ..., p_k, c, c, c, ...)``.

    Trailing prefix entries equal to the tail are dropped so that equal
    sequences have equal representations.
    """

    __slots__ = ("prefix", "tail")

    def __init__(self, prefix: Sequence[float] | np.ndarray = (), tail: float = 0.0):
        p = np.asarray(prefix, dtype=float).ravel()
        t = float(tail)
        k = p.size
        while k > 0 and p[k - 1] == t:
            k -= 1
        self.prefix = p[:k].copy()
        self.tail = t

    def __len__(self) -> int:
        return self.prefix.size

    def __repr__(self) -> str:
        return f"TailSeq(prefix={self.prefix.tolist()!r}, tail={self.tail!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TailSeq):
            return NotImplemented
        return self.tail == other.tail and np.array_equal(self.prefix, other.prefix)

    def dense(self, length: int) -> np.ndarray:
        """First ``length`` coordinates (``length >= len(self)``)."""
        out = np.full(length, self.tail)
        out[: self.prefix.size] = self.prefix
        return out

    def coord(self, n: int) -> float:
        """Coordinate ``n`` (1-based)."""
        return float(self.prefix[n - 1]) if n <= self.prefix.size else self.tail

    def _binary(self, other: "TailSeq", op) -> "TailSeq":
        m = max(self.prefix.size, other.prefix.size)
        return TailSeq(op(self.dense(m), other.dense(m)), op(self.tail, other.tail))

    def __add__(self, other: "TailSeq") -> "TailSeq":
        return self._binary(other, lambda a, b: a + b)

    def __sub__(self, other: "TailSeq") -> "TailSeq":
        return self._binary(other, lambda a, b: a - b)

    def __mul__(self, s: float) -> "TailSeq":
        return TailSeq(self.prefix * s, self.tail * s)

    __rmul__ = __mul__

    def __neg__(self) -> "TailSeq":
        return self * -1.0

    def norm(self) -> float:
        return max(float(np.abs(self.prefix).max(initial=0.0)), abs(self.tail))

    def shift_right(self) -> "TailSeq":
        """``(0, x_1, x_2, ...)``."""
        return TailSeq(np.concatenate(([0.0], self.prefix)), self.tail)

    def shift_left(self) -> "TailSeq":
        """``(x_2, x_3, ...)``."""
        return TailSeq(self.prefix[1:], self.tail)

    def to_dict(self) -> dict:
        return {"prefix": self.prefix.tolist(), "tail": self.tail}

    @classmethod
    def from_dict(cls, d: dict) -> "TailSeq":
        return cls(d["prefix"], d["tail"])


def banach_limit(s: TailSeq) -> float:
    """Banach limit of an eventually-constant sequence, i.e. its tail.

    Every Banach limit agrees with the ordinary limit on convergent sequences,
    so the value does not depend on which Banach limit is meant.
    """
    return s.tail


def stack_tails(seqs: Sequence[TailSeq]) -> np.ndarray:
    """Dense ``(n, m + 1)`` array: common-length prefixes plus a tail column.

    The sup norm of a row difference equals the ``TailSeq`` norm of the
    difference, which is what batch distance computations rely on.
    """
    m = max((len(s) for s in seqs), default=0)
    out = np.empty((len(seqs), m + 1))
    for i, s in enumerate(seqs):
        out[i, :m] = s.dense(m)
        out[i, m] = s.tail
    return out


def _frac(x: Any) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


class StepFn:
    """Dyadic step function: ``values[j]`` on ``[j 2^-k, (j+1) 2^-k)``.

    Values are exact :class:`~fractions.Fraction` objects. Membership in the
    order interval ``C = {0 <= f <= 1}`` is a domain question; arithmetic
    results may leave it.
    """

    __slots__ = ("level", "values")

    def __init__(self, level: int, values: Sequence[Any]):
        if level < 0:
            raise ValueError("level must be >= 0")
        vals = tuple(_frac(v) for v in values)
        if len(vals) != 2**level:
            raise ValueError(f"level {level} needs {2**level} values, got {len(vals)}")
        self.level = int(level)
        self.values = vals

    @classmethod
    def constant(cls, c: Any, level: int = 0) -> "StepFn":
        return cls(level, [_frac(c)] * 2**level)

    def __repr__(self) -> str:
        return f"StepFn(level={self.level}, values={[str(v) for v in self.values]})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StepFn):
            return NotImplemented
        k = max(self.level, other.level)
        return self.refine(k).values == other.refine(k).values

    def __hash__(self) -> int:
        return hash(self.coarsest().values)

    def refine(self, level: int) -> "StepFn":
        if level < self.level:
            raise ValueError("cannot refine to a coarser level")
        rep = 2 ** (level - self.level)
        return StepFn(level, [v for v in self.values for _ in range(rep)])

    def coarsest(self) -> "StepFn":
        f = self
        while f.level > 0:
            v = f.values
            if any(v[2 * j] != v[2 * j + 1] for j in range(len(v) // 2)):
                break
            f = StepFn(f.level - 1, v[::2])
        return f

    def __call__(self, x: float) -> Fraction:
        j = min(int(x * 2**self.level), 2**self.level - 1)
        return self.values[j]

    def _binary(self, other: "StepFn", op) -> "StepFn":
        k = max(self.level, other.level)
        a, b = self.refine(k).values, other.refine(k).values
        return StepFn(k, [op(u, w) for u, w in zip(a, b)])

    def __add__(self, other: "StepFn") -> "StepFn":
        return self._binary(other, lambda u, w: u + w)

    def __sub__(self, other: "StepFn") -> "StepFn":
        return self._binary(other, lambda u, w: u - w)

    def __mul__(self, s: Any) -> "StepFn":
        s = _frac(s)
        return StepFn(self.level, [v * s for v in self.values])

    __rmul__ = __mul__

    def __neg__(self) -> "StepFn":
        return self * -1

    def l1_norm(self) -> Fraction:
        return sum((abs(v) for v in self.values), Fraction(0)) / 2**self.level

    def integral(self) -> Fraction:
        return sum(self.values, Fraction(0)) / 2**self.level

    def to_dict(self) -> dict:
        den = math.lcm(*(v.denominator for v in self.values))
        return {
            "k": self.level,
            "numerators": [int(v * den) for v in self.values],
            "denominator": den,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepFn":
        den = int(d["denominator"])
        return cls(int(d["k"]), [Fraction(int(n), den) for n in d["numerators"]])


def l1_distance_exact(f: StepFn, g: StepFn) -> Fraction:
    """Exact ``integral |f - g|`` over ``[0, 1]``."""
    return (f - g).l1_norm()


def norm(v: Any, kind: str | None = None) -> float | Fraction:
    """Norm of a point of any supported representation.

    ``kind`` is required for plain vectors; ``TailSeq`` always uses the sup
    norm and ``StepFn`` the exact ``L1`` norm.
    """
    if isinstance(v, TailSeq):
        return v.norm()
    if isinstance(v, StepFn):
        return v.l1_norm()
    if kind is None:
        raise ValueError("vector norm needs a kind: 'l1', 'l2' or 'sup'")
    return float(vec_norm(v, kind))


def positive_retraction(v: np.ndarray) -> np.ndarray:
    """Coordinate-wise absolute value, the retraction of the ball onto its positive part."""
    return np.abs(np.asarray(v, dtype=float))


# ---------------------------------------------------------------------------
# point serialization

def point_to_json(x: Any) -> Any:
    if isinstance(x, TailSeq):
        return {"tailseq": x.to_dict()}
    if isinstance(x, StepFn):
        return {"stepfn": x.to_dict()}
    if isinstance(x, (float, int, np.floating)):
        return float(x)
    return np.asarray(x, dtype=float).tolist()


def point_from_json(obj: Any) -> Any:
    if isinstance(obj, dict):
        if "tailseq" in obj:
            return TailSeq.from_dict(obj["tailseq"])
        if "stepfn" in obj:
            return StepFn.from_dict(obj["stepfn"])
        raise ValueError(f"unrecognized point encoding: {sorted(obj)}")
    if isinstance(obj, (int, float)):
        return float(obj)
    return np.asarray(obj, dtype=float)


# ---------------------------------------------------------------------------
# domains

KINDS = ("ball", "simplex", "box", "tail_ball", "stepfn", "scaled")
STRATEGIES = ("uniform", "boundary", "near")


@dataclass(frozen=True)
class DomainSpec:
    """A closed convex domain ``K`` together with its metric.

    Use the classmethod constructors rather than building one by hand.

    ========== ======================================= ==============
    kind        set                                     points
    ========== ======================================= ==============
    ball        ``{||x|| <= r}`` in ``norm``             vectors
    simplex     ``{t_n >= 0, sum t_n <= eps}`` (l1)      vectors
    box         ``{0 <= t_n <= eta}`` (sup)              vectors
    tail_ball   sup-ball of radius ``r``                 ``TailSeq``
    stepfn      ``C`` or the slice ``C_alpha``           ``StepFn``
    scaled      ``center + factor * inner``              as inner
    ========== ======================================= ==============
    """

    kind: str
    dim: int = 64
    norm_kind: str = "l2"
    radius: float = 1.0
    alpha: Fraction | None = None
    max_level: int = 8
    factor: float = 1.0
    center: tuple[float, ...] | None = None
    inner: "DomainSpec | None" = field(default=None, repr=False)

    # -- constructors -------------------------------------------------------
    @classmethod
    def ball(cls, r: float = 1.0, norm: str = "l2", dim: int = 64) -> "DomainSpec":
        if norm not in NORMS:
            raise ValueError(f"unknown norm {norm!r}")
        if r <= 0:
            raise ValueError("ball radius must be positive")
        return cls("ball", dim=dim, norm_kind=norm, radius=float(r))

    @classmethod
    def simplex(cls, eps: float = 1.0, dim: int = 64) -> "DomainSpec":
        if eps <= 0:
            raise ValueError("simplex size must be positive")
        return cls("simplex", dim=dim, norm_kind="l1", radius=float(eps))

    @classmethod
    def box(cls, eta: float = 1.0, dim: int = 64) -> "DomainSpec":
        if eta <= 0:
            raise ValueError("box side must be positive")
        return cls("box", dim=dim, norm_kind="sup", radius=float(eta))

    @classmethod
    def positive_ball(cls, norm: str = "l1", dim: int = 64) -> "DomainSpec":
        """Positive part of the unit ball of ``l1`` or ``c0``."""
        if norm == "l1":
            return cls.simplex(1.0, dim)
        if norm == "sup":
            return cls.box(1.0, dim)
        raise ValueError("positive_ball is defined for 'l1' and 'sup' only")

    @classmethod
    def tail_ball(cls, r: float = 1.0, dim: int = 64) -> "DomainSpec":
        return cls("tail_ball", dim=dim, norm_kind="sup", radius=float(r))

    @classmethod
    def step_functions(cls, alpha: Any = None, max_level: int = 8) -> "DomainSpec":
        a = None if alpha is None else _frac(alpha)
        if a is not None and not 0 < a < 1:
            raise ValueError("alpha must lie in (0, 1)")
        return cls("stepfn", dim=0, norm_kind="L1", alpha=a, max_level=max_level)

    @classmethod
    def scaled(cls, inner: "DomainSpec", factor: float, center: Sequence[float] | None = None) -> "DomainSpec":
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        c = None if center is None else tuple(float(v) for v in center)
        if c is not None and inner.point_type != "vec":
            raise ValueError("shifted domains are supported for vector points only")
        return cls("scaled", dim=inner.dim, norm_kind=inner.norm_kind, factor=float(factor),
                   center=c, inner=inner)

    # -- basic geometry ---------------------------------------------------
    @property
    def point_type(self) -> str:
        if self.kind == "scaled":
            return self.inner.point_type
        return {"tail_ball": "tail", "stepfn": "step"}.get(self.kind, "vec")

    def distance(self, x: Any, y: Any) -> float:
        d = norm(x - y, self.norm_kind if self.point_type == "vec" else None)
        return float(d)

    def distances(self, xs: Any, ys: Any) -> np.ndarray:
        """Row-wise distances for a batch of pairs."""
        if self.point_type == "vec":
            return vec_norm(np.asarray(xs) - np.asarray(ys), self.norm_kind)
        if self.point_type == "tail":
            return tail_distances(xs, ys)
        return np.array([float(l1_distance_exact(a, b)) for a, b in zip(xs, ys)])

    def diameter(self) -> float:
        if self.kind == "ball":
            return 2.0 * self.radius
        if self.kind == "simplex":
            return 2.0 * self.radius if self.dim >= 2 else self.radius
        if self.kind in ("box",):
            return self.radius
        if self.kind == "tail_ball":
            return 2.0 * self.radius
        if self.kind == "stepfn":
            return 2.0 * float(min(self.alpha, 1 - self.alpha)) if self.alpha is not None else 1.0
        return self.factor * self.inner.diameter()

    def zero(self) -> Any:
        if self.point_type == "vec":
            return np.zeros(self.dim)
        if self.point_type == "tail":
            return TailSeq((), 0.0)
        return StepFn.constant(0)

    def contains_zero(self) -> bool:
        if self.kind == "stepfn":
            return self.alpha is None
        if self.kind == "scaled":
            if self.center is not None and any(self.center):
                return self.contains(self.zero())
            return self.inner.contains_zero()
        return True

    def contains(self, x: Any, tol: float = 1e-12) -> bool:
        k = self.kind
        if k == "scaled":
            base = x if self.center is None else np.asarray(x) - np.asarray(self.center)
            return self.inner.contains(base * (1.0 / self.factor), tol / self.factor)
        if k == "tail_ball":
            return isinstance(x, TailSeq) and bool(np.isfinite(x.norm())) and x.norm() <= self.radius + tol
        if k == "stepfn":
            if not isinstance(x, StepFn):
                return False
            if any(v < 0 or v > 1 for v in x.values):
                return False
            return self.alpha is None or x.integral() == self.alpha
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        if k == "ball":
            return float(vec_norm(x, self.norm_kind)) <= self.radius + tol
        if k == "simplex":
            return bool(np.all(x >= -tol)) and float(x.sum()) <= self.radius + tol
        if k == "box":
            return bool(np.all(x >= -tol)) and bool(np.all(x <= self.radius + tol))
        raise ValueError(f"unknown domain kind {k!r}")

    def contains_many(self, xs: Any, tol: float = 1e-12) -> np.ndarray:
        if self.point_type != "vec":
            return np.array([self.contains(x, tol) for x in xs], dtype=bool)
        X = np.asarray(xs, dtype=float)
        if self.kind == "scaled":
            base = X if self.center is None else X - np.asarray(self.center)
            return self.inner.contains_many(base / self.factor, tol / self.factor)
        ok = np.all(np.isfinite(X), axis=1)
        with np.errstate(invalid="ignore"):
            if self.kind == "ball":
                ok &= vec_norm(X, self.norm_kind) <= self.radius + tol
            elif self.kind == "simplex":
                ok &= np.all(X >= -tol, axis=1) & (X.sum(axis=1) <= self.radius + tol)
            elif self.kind == "box":
                ok &= np.all(X >= -tol, axis=1) & np.all(X <= self.radius + tol, axis=1)
        return ok

    # -- sampling -----------------------------------------------------------
    def sample(self, n: int, seed: int | np.random.Generator = 0, strategy: str = "uniform",
               center: Any = None, radius: float | None = None) -> Any:
        """Draw ``n`` points of the domain.

        ``uniform`` draws with a random support size and a norm spread evenly
        over ``[0, r]`` (rather than volume-uniform, which in high dimension
        puts every point on the sphere). ``boundary`` puts every point on the
        relative boundary. ``near`` draws within ``radius`` of ``center`` by
        convex combination with a uniform point, so it stays inside.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        if strategy not in STRATEGIES:
            raise ValueError(f"unsupported strategy {strategy!r}")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        if strategy == "near":
            if center is None or radius is None:
                raise ValueError("strategy 'near' needs center and radius")
            return self._sample_near(n, rng, center, float(radius))
        if self.kind == "scaled":
            base = self.inner.sample(n, rng, strategy)
            if self.point_type == "vec":
                out = np.asarray(base) * self.factor
                return out + np.asarray(self.center) if self.center is not None else out
            return [b * self.factor for b in base]
        if self.kind == "tail_ball":
            return self._sample_tail(n, rng, strategy)
        if self.kind == "stepfn":
            return self._sample_step(n, rng, strategy)
        return self._sample_vec(n, rng, strategy)

    def _support_mask(self, n: int, rng: np.random.Generator) -> np.ndarray:
        d = self.dim
        # log-uniform support size: sparse and dense points both common
        sizes = np.clip(np.floor(np.exp(rng.uniform(0, math.log(d + 1), n))).astype(int), 1, d)
        ranks = rng.random((n, d)).argsort(axis=1)
        return ranks < sizes[:, None]

    def _sample_vec(self, n: int, rng: np.random.Generator, strategy: str) -> np.ndarray:
        d, r = self.dim, self.radius
        mask = self._support_mask(n, rng)
        if self.kind == "ball":
            if self.norm_kind == "l2":
                raw = rng.standard_normal((n, d))
            elif self.norm_kind == "l1":
                raw = rng.standard_exponential((n, d)) * rng.choice([-1.0, 1.0], (n, d))
            else:
                raw = rng.uniform(-1.0, 1.0, (n, d))
            raw *= mask
            raw[~mask.any(axis=1), 0] = 1.0
            dirs = raw / vec_norm(raw, self.norm_kind)[:, None]
            rad = np.full(n, r) if strategy == "boundary" else r * rng.random(n)
            out = dirs * rad[:, None]
            # guard against rounding the norm past r
            nr = vec_norm(out, self.norm_kind)
            over = nr > r
            out[over] *= (r / nr[over])[:, None]
            return out
        if self.kind == "simplex":
            # exponential spacings give a uniform point of the standard simplex
            e = rng.standard_exponential((n, d + 1))
            e[:, :d] *= mask
            if strategy == "boundary":
                e[:, d] = 0.0
                e[e.sum(axis=1) == 0, 0] = 1.0
            w = e / e.sum(axis=1, keepdims=True)
            out = r * w[:, :d]
            s = out.sum(axis=1)
            over = s > r
            out[over] *= (r / s[over])[:, None]
            return out
        if self.kind == "box":
            out = r * rng.random((n, d)) * mask
            if strategy == "boundary":
                j = rng.integers(0, d, n)
                out[np.arange(n), j] = np.where(rng.random(n) < 0.5, 0.0, r)
            return out
        raise ValueError(f"unsupported kind {self.kind!r}")

    def _sample_tail(self, n: int, rng: np.random.Generator, strategy: str) -> list[TailSeq]:
        r, d = self.radius, self.dim
        mask = self._support_mask(n, rng)
        pre = rng.uniform(-r, r, (n, d)) * mask
        tails = rng.uniform(-r, r, n) * (rng.random(n) < 0.75)
        if strategy == "boundary":
            j = rng.integers(0, d + 1, n)
            sgn = np.where(rng.random(n) < 0.5, -r, r)
            for i in range(n):
                if j[i] == d:
                    tails[i] = sgn[i]
                else:
                    pre[i, j[i]] = sgn[i]
        return [TailSeq(pre[i], tails[i]) for i in range(n)]

    def _sample_step(self, n: int, rng: np.random.Generator, strategy: str) -> list[StepFn]:
        out = []
        for _ in range(n):
            k = int(rng.integers(0, self.max_level + 1))
            den = int(2 ** rng.integers(0, 7)) * int(rng.integers(1, 6))
            nums = rng.integers(0, den + 1, 2**k)
            if strategy == "boundary":
                nums[rng.integers(0, 2**k)] = den if rng.random() < 0.5 else 0
            f = StepFn(k, [Fraction(int(v), den) for v in nums])
            if self.alpha is not None:
                f = _onto_slice(f, self.alpha)
            out.append(f)
        return out

    def _sample_near(self, n: int, rng: np.random.Generator, center: Any, radius: float) -> Any:
        far = self.sample(n, rng, "uniform")
        s = rng.random(n)
        if self.point_type == "vec":
            c = np.asarray(center, dtype=float)
            F = np.asarray(far)
            dist = vec_norm(F - c, self.norm_kind)
            scale = s * np.minimum(1.0, radius / np.maximum(dist, 1e-300))
            return c + scale[:, None] * (F - c)
        pts = []
        for z, si in zip(far, s):
            dist = float(self.distance(z, center))
            t = si * min(1.0, radius / dist) if dist > 0 else 0.0
            if self.point_type == "step":
                t = Fraction(t).limit_denominator(2**20)
                if t * dist > radius:
                    t = Fraction(0)
            pts.append(center + (z - center) * t)
        return pts


def _onto_slice(f: StepFn, alpha: Fraction) -> StepFn:
    """Move ``f in C`` onto ``{integral = alpha}`` staying inside ``C``."""
    m = f.integral()
    if m == alpha:
        return f
    if m > alpha:
        return f * (alpha / m)
    # mix with the constant 1: f + s (1 - f) has mean m + s (1 - m)
    s = (alpha - m) / (1 - m)
    return f + (StepFn.constant(1, f.level) - f) * s


def tail_distances(xs: Sequence[TailSeq], ys: Sequence[TailSeq]) -> np.ndarray:
    X, Y = stack_tails(xs), stack_tails(ys)
    m = max(X.shape[1], Y.shape[1]) - 1

    def pad(A: np.ndarray) -> np.ndarray:
        k = A.shape[1] - 1
        if k == m:
            return A
        tail = A[:, -1:]
        return np.hstack([A[:, :k], np.repeat(tail, m - k, axis=1), tail])

    return np.abs(pad(X) - pad(Y)).max(axis=1)
