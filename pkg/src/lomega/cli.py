"""Command-line front end.

Every command resolves a single JSON-serializable :class:`ExperimentConfig`
(config file first, then flags), runs it and emits a JSON report with sorted
keys and no timestamps, so identical configs give byte-identical reports.

Exit status: 0 on pass or completion, 1 when a certificate fails, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from . import __version__
from .extend import breneis_construct, verify_domination
from .fpengine import (afp_mu_schedule, afp_thm510, basis_starts, displacement_search, history_csv)
from .maps import CATALOG_IDS, ConstraintError, build, catalog, check_invariance
from .minmod import certify_L_omega, empirical_min_modulus, nonexpansive_upgrade_check
from .moduli import MODULUS_IDS, GridSpec, Modulus, catalog_modulus, check_properties, osgood_divergence

COMMANDS = ("modulus", "certify", "displace", "afp", "extend", "catalog")
OUT_DIR_ENV = "LOMEGA_OUT_DIR"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class ExperimentConfig:
    """Everything needed to rerun one experiment."""

    command: str
    map: str | None = None
    params: dict = field(default_factory=dict)
    dim: int = 64
    omega: str | None = None
    omega_params: dict = field(default_factory=dict)
    L: float | None = None
    seed: int = 0
    pairs: int = 100_000
    samples: int = 10_000
    grid_n: int = 1000
    n: int = 20
    budget: int = 10_000
    multistart: int = 8
    scheme: str = "picard"
    lam: float = 0.5
    starts: str = "random"
    epsilon: float = 0.25
    depth: int = 200
    out: str | None = None
    csv: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: expected a JSON object")
        known = {f.name for f in fields(cls)}
        for k in sorted(d):
            if k not in known:
                raise ConfigError(f"{k}: unknown config field")
        if "command" not in d:
            raise ConfigError("command: missing")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"command: {self.command!r} is not one of {', '.join(COMMANDS)}")
        if self.map is not None and self.map not in CATALOG_IDS:
            raise ConfigError(f"map: unknown id {self.map!r}; known: {', '.join(CATALOG_IDS)}")
        if self.omega is not None and self.omega not in MODULUS_IDS:
            raise ConfigError(f"omega: unknown id {self.omega!r}; known: {', '.join(MODULUS_IDS)}")
        for name in ("params", "omega_params"):
            if not isinstance(getattr(self, name), dict):
                raise ConfigError(f"{name}: expected an object")
        for name in ("dim", "pairs", "samples", "grid_n", "n", "budget", "multistart", "depth", "seed"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < (0 if name == "seed" else 1):
                raise ConfigError(f"{name}: expected a {'non-negative' if name == 'seed' else 'positive'} "
                                  f"integer, got {v!r}")
        if self.scheme not in ("picard", "krasnoselskii"):
            raise ConfigError(f"scheme: {self.scheme!r} is not picard or krasnoselskii")
        if self.starts not in ("random", "basis"):
            raise ConfigError(f"starts: {self.starts!r} is not random or basis")
        if self.L is not None and (not isinstance(self.L, (int, float)) or self.L < 0):
            raise ConfigError(f"L: expected a non-negative number, got {self.L!r}")
        needs_map = {"certify", "displace", "afp"}
        if self.command in needs_map and self.map is None:
            raise ConfigError(f"map: required for {self.command}")
        if self.command in ("extend",) and self.omega is None:
            raise ConfigError("omega: required for extend")
        if self.command == "modulus" and self.omega is None and self.map is None:
            raise ConfigError("omega: modulus needs --omega or --map")


# ---------------------------------------------------------------------------
# JSON

def _clean(x: Any) -> Any:
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, Fraction):
        return str(x)
    if x is None or isinstance(x, str):
        return x
    if hasattr(x, "to_dict"):
        return _clean(x.to_dict())
    return repr(x)


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# commands

def _modulus(cfg: ExperimentConfig) -> Modulus:
    try:
        return catalog_modulus(cfg.omega, **cfg.omega_params)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"omega_params: {e}") from e


def _map(cfg: ExperimentConfig):
    try:
        return build(cfg.map, cfg.params, d=cfg.dim)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"params: {e}") from e


def run_modulus(cfg: ExperimentConfig) -> tuple[int, dict]:
    out: dict = {}
    status = 0
    if cfg.map is not None:
        m = _map(cfg)
        emp = empirical_min_modulus(m, grid=GridSpec(lo=1e-6, hi=m.domain.diameter(), n=cfg.grid_n),
                                    pairs=cfg.pairs, seed=cfg.seed)
        out["empirical_modulus"] = emp.to_dict()
        out["citation"] = m.claims["construction"]
    if cfg.omega is not None:
        w = _modulus(cfg)
        L = 0.0 if cfg.L is None else float(cfg.L)
        if L > 1:
            raise ConfigError("L: modulus properties need L in [0, 1]")
        rep = check_properties(w, L=L)
        out["properties"] = rep.to_dict()
        try:
            out["osgood"] = osgood_divergence(w)
        except ValueError as e:
            out["osgood"] = f"not applicable: {e}"
        out["citation"] = w.describe()
        if cfg.L is not None:
            up = nonexpansive_upgrade_check(L, w)
            out["upgrade"] = up.to_dict()
            status = 0 if up.passed else 1
    return status, out


def run_certify(cfg: ExperimentConfig) -> tuple[int, dict]:
    m = _map(cfg)
    L = m.L if cfg.L is None else float(cfg.L)
    w = m.omega if cfg.omega is None else _modulus(cfg)
    try:
        cert = certify_L_omega(m, L, w, pairs=cfg.pairs, seed=cfg.seed)
    except ValueError as e:
        raise ConfigError(f"omega: {e}") from e
    inv = check_invariance(m, n=cfg.samples, seed=cfg.seed)
    status = 0 if cert.passed and inv.passed else 1
    return status, {"certificate": cert.to_dict(), "invariance": inv.to_dict(), "map": m.metadata(),
                    "citation": m.claims["construction"]}


def run_displace(cfg: ExperimentConfig) -> tuple[int, dict]:
    m = _map(cfg)
    starts = None
    if cfg.starts == "basis":
        try:
            starts = basis_starts(m.domain)
        except ValueError as e:
            raise ConfigError(f"starts: {e}") from e
    rep = displacement_search(m, multistart=cfg.multistart, seed=cfg.seed, budget=cfg.budget,
                              starts=starts, scheme=cfg.scheme, lam=cfg.lam)
    if cfg.csv:
        _write(cfg.csv, history_csv(rep.history))
    return 0, {"displacement": rep.to_dict(history=False), "map": m.metadata(),
               "citation": m.claims["construction"]}


def run_afp(cfg: ExperimentConfig) -> tuple[int, dict]:
    m = _map(cfg)
    if m.catalog_id == "thm510":
        try:
            seq = afp_thm510(m, cfg.n)
        except ValueError as e:
            raise ConfigError(f"n: {e}") from e
        rows = [{"n": i + 1, "residual": r, "closed_form": c}
                for i, (r, c) in enumerate(zip(seq.residuals, seq.aux["closed_form"]))]
    else:
        try:
            seq = afp_mu_schedule(m, inner_budget=cfg.budget, seed=cfg.seed)
        except ValueError as e:
            raise ConfigError(f"map: {e}") from e
        rows = seq.aux["rows"]
    if cfg.csv:
        _write(cfg.csv, history_csv(seq.residuals))
    return 0, {"afp": seq.to_dict(), "rows": rows, "map": m.metadata(), "citation": m.claims["construction"]}


def run_extend(cfg: ExperimentConfig) -> tuple[int, dict]:
    w = _modulus(cfg)
    try:
        f, state = breneis_construct(w, epsilon=cfg.epsilon, depth=cfg.depth)
    except ValueError as e:
        raise ConfigError(f"omega: {e}") from e
    cert = verify_domination(f, w, pairs=cfg.pairs, seed=cfg.seed)
    return (0 if cert.passed else 1), {"construction": state.to_dict(), "domination": cert.to_dict(),
                                       "value_bound": f.value_bound, "citation": w.describe()}


def run_catalog(cfg: ExperimentConfig) -> tuple[int, dict]:
    entries = catalog()
    if cfg.map is not None:
        entries = [e for e in entries if e["id"] == cfg.map]
    return 0, {"maps": entries, "moduli": list(MODULUS_IDS)}


RUNNERS = {"modulus": run_modulus, "certify": run_certify, "displace": run_displace, "afp": run_afp,
           "extend": run_extend, "catalog": run_catalog}


def _write(path: str, text: str) -> None:
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def run(cfg: ExperimentConfig) -> tuple[int, str]:
    """Execute ``cfg``; returns the exit status and the JSON report text."""
    cfg.validate()
    status, result = RUNNERS[cfg.command](cfg)
    report = {"version": f"v{__version__}", "config": cfg.to_dict(), "status": status, "result": result}
    text = dumps(report)
    path = cfg.out
    if path is None and os.environ.get(OUT_DIR_ENV):
        path = os.path.join(os.environ[OUT_DIR_ENV], f"{cfg.command}.json")
    if path:
        _write(path, text)
    return status, text


# ---------------------------------------------------------------------------
# argument parsing

def _kv(items: Sequence[str] | None, flag: str) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"{flag}: expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lomega", description="Moduli, L-omega certificates and displacement runs.")
    p.add_argument("--version", action="version", version=f"v{__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config; flags override its fields")
        s.add_argument("--map", choices=CATALOG_IDS)
        s.add_argument("--param", action="append", metavar="KEY=VALUE", help="map parameter (repeatable)")
        s.add_argument("--dim", type=int, help="truncation dimension")
        s.add_argument("--omega", help="modulus id")
        s.add_argument("--omega-param", action="append", metavar="KEY=VALUE", help="modulus parameter")
        s.add_argument("--L", type=float)
        s.add_argument("--seed", type=int)
        s.add_argument("--pairs", type=int)
        s.add_argument("--samples", type=int)
        s.add_argument("--grid-n", type=int)
        s.add_argument("--n", type=int, help="number of approximate fixed points")
        s.add_argument("--budget", type=int)
        s.add_argument("--multistart", type=int)
        s.add_argument("--scheme", choices=("picard", "krasnoselskii"))
        s.add_argument("--lam", type=float)
        s.add_argument("--starts", choices=("random", "basis"))
        s.add_argument("--epsilon", type=float)
        s.add_argument("--depth", type=int)
        s.add_argument("--out", help=f"report path (default: ${OUT_DIR_ENV}/<command>.json if set)")
        s.add_argument("--csv", help="write the residual trace as CSV")
    return p


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    base: dict = {}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"config: {e}") from e
        if not isinstance(base, dict):
            raise ConfigError("config: expected a JSON object")
        if base.get("command", ns.command) != ns.command:
            raise ConfigError(f"command: config says {base['command']!r} but {ns.command!r} was invoked")
    base["command"] = ns.command
    simple = ("map", "dim", "omega", "L", "seed", "pairs", "samples", "grid_n", "n", "budget", "multistart",
              "scheme", "lam", "starts", "epsilon", "depth", "out", "csv")
    for k in simple:
        v = getattr(ns, k)
        if v is not None:
            base[k] = v
    if ns.param:
        base["params"] = {**base.get("params", {}), **_kv(ns.param, "--param")}
    if ns.omega_param:
        base["omega_params"] = {**base.get("omega_params", {}), **_kv(ns.omega_param, "--omega-param")}
    return ExperimentConfig.from_dict(base)


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        status, text = run(cfg)
    except (ConfigError, ConstraintError, TypeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
