"""Acceptance checks, one test per criterion.

Each test records a single ``[criterion k] PASS|FAIL ...`` line before
asserting. The lines are printed in the terminal summary (see conftest.py)
and also to stdout, which ``pytest -s`` shows inline.
"""

import json
import math
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from lomega.cli import ExperimentConfig, run
from lomega.extend import breneis_construct, verify_domination
from lomega.fpengine import (PremiseError, afp_thm510, basis_starts, constancy_certify, displacement_search,
                             iterate_displacement)
from lomega.maps import CATALOG_IDS, MapInstance, build, check_invariance
from lomega.minmod import certify_L_omega, empirical_min_modulus, nonexpansive_upgrade_check
from lomega.moduli import LN10, GridSpec, catalog_modulus
from lomega.spaces import DomainSpec, l1_distance_exact


CRITERIA: dict[int, str] = {}


def report(k: int, ok: bool, detail: str) -> None:
    CRITERIA[k] = f"[criterion {k}] {'PASS' if ok else 'FAIL'} {detail}"
    print(CRITERIA[k])
    assert ok, detail


def ex41(sigma):
    return lambda r: np.asarray(r) * np.abs(sigma * np.log10(np.where(np.asarray(r) > 0, r, 1.0)))


def test_criterion_01_ex41_bound():
    worst, elapsed = -math.inf, []
    for sigma in (0.5, 1.0):
        t = time.perf_counter()
        e = empirical_min_modulus(ex41(sigma), grid=GridSpec(1e-8, 1.0, 10_000), pairs=1_000_000,
                                  interval=(0.0, 1.0))
        elapsed.append(time.perf_counter() - t)
        d = e.delta_grid
        worst = max(worst, float(np.max(e.sup_values - d * (2 * sigma / LN10 + np.abs(np.log10(d))))))
    ok = worst <= 1e-9 and max(elapsed) < 30
    report(1, ok, f"max excess {worst:.3e} (tol 1e-9), slowest run {max(elapsed):.2f}s (< 30s)")


def test_criterion_02_sqrt_modulus():
    grid = np.arange(0.01, 1.0 + 1e-12, 1e-4)
    e = empirical_min_modulus(np.sqrt, grid=grid, pairs=1_000_000, interval=(0.0, 1.0))
    err = float(np.max(np.abs(e.sup_values - np.sqrt(e.delta_grid))))
    report(2, err <= 5e-3, f"max |w_hat - sqrt| = {err:.3e} on {len(grid)} grid points (tol 5e-3)")


def test_criterion_03_breneis_linear():
    omega = catalog_modulus("linear", c=1.0)
    f, s = breneis_construct(omega, epsilon=0.25, depth=200)
    x = s.x_seq
    zeros = bool(np.all(f(x) == 0))
    z = np.linspace(0.0, 1.0, 100_001)
    top = float(np.max(f(z)))
    dom = verify_domination(f, omega, pairs=100_000).passed
    reach = len(x) - 1 <= 200 and x[-1] < 1e-3
    ok = zeros and top <= s.M + 1e-12 and dom and reach
    report(3, ok, f"f(x_n)=0: {zeros}, max f {top:.6f} vs M {s.M}, domination {dom}, "
                  f"x_N={x[-1]:.3e} after {len(x) - 1} steps")


CERT_MAPS = [("ex44", {}), ("ex45", {}), ("ex46", {}), ("thm51", {"eps": 0.5}), ("prop59", {}),
             ("thm510", {}), ("radial", {}), ("c0shift", {})]


def test_criterion_04_catalog_certificates():
    lines, ok = [], True
    for cid, params in CERT_MAPS:
        m = build(cid, params)
        c = certify_L_omega(m, m.L, m.omega, pairs=100_000, seed=0)
        inv = check_invariance(m, n=1000 if cid == "prop59" else 10_000, seed=0)
        good = c.passed and c.margin >= -1e-9 and inv.passed
        ok &= good
        lines.append(f"{cid}:{'ok' if good else 'FAIL'}(margin {c.margin:.2e})")
    report(4, ok, " ".join(lines))


def test_criterion_05_alspach_isometry():
    m = build("alspach")
    xs = m.domain.sample(1000, seed=11)
    ys = m.domain.sample(1000, seed=12)
    levels = max(max(f.level for f in xs), max(g.level for g in ys))
    bad = sum(l1_distance_exact(m.apply(f), m.apply(g)) != l1_distance_exact(f, g) for f, g in zip(xs, ys))
    exact = all(isinstance(l1_distance_exact(f, g), Fraction) for f, g in zip(xs[:10], ys[:10]))
    report(5, bad == 0 and levels <= 8 and exact, f"{bad} mismatches in 1000 exact pairs (levels <= {levels})")


def test_criterion_06_thm510_afp():
    m = build("thm510")
    seq = afp_thm510(m, 20)
    eta = m.internals["eta"]
    exact = all(r == eta * 2.0 ** -(n + 2) for n, r in enumerate(seq.residuals, start=1))
    mono = all(b < a for a, b in zip(seq.residuals, seq.residuals[1:]))
    last = seq.residuals[-1]
    report(6, exact and mono and last < 1e-6,
           f"closed form exact: {exact}, strictly decreasing: {mono}, residual at n=20 {last:.3e}")


def test_criterion_07_thm51_basis():
    d = 64
    m = build("thm51", d=d)
    rep = displacement_search(m, starts=basis_starts(m.domain), budget=d * 5)
    beta = 2.0 ** -(np.arange(1, d + 1) + 1)
    got = np.array([c["start_residual"] for c in rep.candidates])
    rel = float(np.max(np.abs(got - beta) / beta))
    report(7, rel <= 1e-12, f"max relative error {rel:.3e} over {d} basis starts (tol 1e-12)")


def test_criterion_08_kakutani():
    m = build("ex46", {"L": 0.5}, d=64)
    r = iterate_displacement(m, np.zeros(64), max_iter=5000, tol=1e-13)
    x1_err = abs(r.best_point[0] - math.sqrt(3 / 7))
    ok_contract = r.best_residual < 1e-10 and x1_err <= 1e-6
    k = build("ex46", {"L": 1.0}, d=64)
    s = displacement_search(k, multistart=32, seed=0, budget=100_000)
    ok = ok_contract and s.best_residual > 1e-3
    report(8, ok, f"L=0.5 residual {r.best_residual:.2e}, |x1 - sqrt(3/7)| {x1_err:.1e}; "
                  f"L=1 best residual {s.best_residual:.4f} over 32 starts")


def test_criterion_09_upgrade():
    a = nonexpansive_upgrade_check(0.3, catalog_modulus("ratio", L=0.3))
    b = nonexpansive_upgrade_check(0.0, catalog_modulus("sqrt2"))
    wd = None if b.witness is None else b.witness["delta"]
    ok = a.passed and not b.passed and wd is not None and wd < 0.1
    report(9, ok, f"ratio L=0.3 passes: {a.passed}; sqrt2 L=0 fails: {not b.passed} with witness delta {wd}")


def _constant_user_map(c: np.ndarray) -> MapInstance:
    return MapInstance("user", None, DomainSpec.ball(1.0, "l2", len(c)), 0.0, catalog_modulus("zero"), {},
                       fn=lambda X: np.repeat(c[None, :], len(X), axis=0))


def test_criterion_10_constancy():
    omega = catalog_modulus("zero-at-one")
    m = build("constant", d=16)
    end_to_end = constancy_certify(m, omega, samples=10_000, tol=1e-9).passed
    premise_ok = passed = skipped = 0
    cands = [build(cid, d=16) for cid in CATALOG_IDS if cid not in ("alspach", "prop59")]
    rng = np.random.default_rng(0)
    cands += [_constant_user_map(0.3 * rng.uniform(-1, 1, 8) / math.sqrt(8)) for _ in range(5)]
    for T in cands:
        try:
            c = constancy_certify(T, omega, samples=10_000, premise_pairs=20_000, tol=1e-9)
        except PremiseError:
            continue
        except ValueError:
            skipped += 1  # domain not a unit ball, simplex or box
            continue
        premise_ok += 1
        passed += c.passed
    ok = end_to_end and premise_ok == passed and premise_ok >= 1
    report(10, ok, f"constant map end-to-end: {end_to_end}; {passed}/{premise_ok} premise-passing maps "
                   f"certified constant ({skipped} out of scope)")


DET_CONFIGS = [
    dict(command="modulus", map="ex44", omega="alog", L=2 / LN10, dim=8, pairs=5000, grid_n=200),
    dict(command="certify", map="ex46", params={"L": 1.0}, dim=16, pairs=5000, samples=1000),
    dict(command="displace", map="ex46", params={"L": 1.0}, dim=16, budget=2000, multistart=4),
    dict(command="afp", map="thm510", dim=32, n=8),
    dict(command="afp", map="radial", dim=8, budget=400),
    dict(command="extend", omega="ratio", pairs=5000, depth=40),
    dict(command="catalog"),
]


def test_criterion_11_determinism(tmp_path):
    diffs = []
    for i, d in enumerate(DET_CONFIGS):
        _, a = run(ExperimentConfig(**d))
        _, b = run(ExperimentConfig(**d))
        cfg = tmp_path / f"c{i}.json"
        cfg.write_text(json.dumps(d))
        proc = subprocess.run([sys.executable, "-m", "lomega", d["command"], "--config", str(cfg)],
                              capture_output=True, text=True)
        if not (a == b == proc.stdout):
            diffs.append(f"{d['command']}:{d.get('map') or d.get('omega') or ''}")
    report(11, not diffs, f"{len(DET_CONFIGS)} commands rerun in-process and in a fresh process; "
                          f"differing: {diffs or 'none'}")
