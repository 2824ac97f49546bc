"""Command-line orchestration: YAML config parsing and validation, probe
dispatch, and CSV/JSON report emission.

Exit codes: 0 when every pass flag of the executed probes is true, 1 on a
numerical failure or failed pass flag (partial reports are preserved), 2 on a
config validation error (the message names the violated invariant).
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import yaml

from .birman_schwinger import inv_norm_sweep
from .counterexample import build_embedded_pair, save_embedded_pair, verify_embedded
from .grid import GridSpec, read_field
from .hamiltonian import Hamiltonian, clr_check
from .kernels import ResolventQuery
from .potentials import Potential, bracket_decay, gaussian_well
from .probes import (
    AdmissiblePair,
    kato_smoothing_probe,
    sobolev_scaling_probe,
    stein_weiss_probe,
    strichartz_probe,
)
from .reporting import SCHEMA_VERSION, ProbeReport

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_VALIDATION = 2

PROBE_SUBCOMMANDS = (
    "kernels", "bs-sweep", "spectrum", "counterexample",
    "smoothing", "strichartz", "sobolev", "stein-weiss",
)
SUBCOMMANDS = PROBE_SUBCOMMANDS + ("all",)

POTENTIAL_FAMILIES = ("gaussian-well", "polynomial-decay",
                      "embedded-counterexample", "file")


class ConfigError(ValueError):
    """A config invariant was violated; the message names it."""


# ---------------------------------------------------------------------------
# parameter schemas (the machine-readable probe table)
# ---------------------------------------------------------------------------

def _f(default=None, required=False, kind="number", doc=""):
    return {"default": default, "required": required, "type": kind, "doc": doc}


PROBE_SCHEMAS: Dict[str, Dict[str, Dict[str, Any]]] = {
    "kernels": {
        "trials": _f(1000, kind="int", doc="random (xi, z) identity checks"),
        "tol": _f(1e-12, doc="max allowed partial-fraction residual"),
    },
    "bs-sweep": {
        "lambda_min": _f(0.5, doc="low end of the energy sweep"),
        "lambda_max": _f(4.0, doc="high end of the energy sweep"),
        "lambda_count": _f(4, kind="int"),
        "thetas": _f([0.03, 0.01], kind="list", doc="imaginary-offset ladder"),
        "nu": _f(0.2, doc="exclusion radius around known point spectrum"),
    },
    "spectrum": {
        "clr_constant": _f(1.0, doc="calibrated constant of the bound-state count bound"),
        "residual_tol": _f(1e-6, doc="max allowed eigenpair residual"),
    },
    "counterexample": {
        "m": _f(2, kind="int", doc="operator order of the constructed pair (even)"),
        "n": _f(3, kind="int", doc="dimension of the constructed pair (odd)"),
        "npts": _f(48, kind="int"),
        "half_width": _f(1.1),
        "delta": _f(1.0, doc="support radius of the potential"),
        "sigma": _f(None, doc="mollifier width (default 0.135 * delta)"),
        "method": _f("mollified", kind="str"),
        "residual_tol": _f(1e-3, doc="max allowed eigenvalue-equation residual"),
        "save": _f(False, kind="bool", doc="write the pair into the output directory"),
    },
    "smoothing": {
        "gamma": _f(0.0, doc="derivative order of the weighted functional"),
        "eps": _f(0.1, doc="endpoint bracket-weight exponent margin"),
        "t_final": _f(8.0),
        "samples": _f(3, kind="int"),
        "time_step": _f(0.25),
        "refine_iters": _f(0, kind="int", doc="quadratic-form power-iteration steps"),
        "plateau_tol": _f(0.05, doc="relative increment budget per T-doubling"),
    },
    "strichartz": {
        "p": _f(None, required=True, doc="time exponent"),
        "q": _f(None, required=True, doc="space exponent"),
        "alpha": _f(None, required=True, doc="pair scaling parameter"),
        "mode": _f("standard", kind="str", doc="standard | gain"),
        "t_final": _f(8.0),
        "samples": _f(3, kind="int"),
        "time_step": _f(0.25),
        "plateau_tol": _f(0.05),
    },
    "sobolev": {
        "alpha": _f(0.0, doc="derivative order on the output side"),
        "p": _f(1.2),
        "q": _f(6.0),
        "z_min": _f(0.3),
        "z_max": _f(10.0),
        "z_count": _f(7, kind="int"),
        "z_arg": _f(math.pi / 2, doc="ray angle in (0, 2 pi)"),
        "samples": _f(3, kind="int"),
        "slope_tol": _f(0.05),
        "npts": _f(None, kind="int", doc="probe-grid override (default: main grid)"),
        "half_width": _f(None, doc="probe-grid override (default: main grid)"),
    },
    "stein-weiss": {
        "lam": _f(2.0, doc="multiplier order offset (|D|^{-n+lam})"),
        "alpha": _f(0.0, doc="input weight exponent"),
        "beta": _f(1.0, doc="output weight exponent"),
        "npts_ladder": _f([8, 16, 32], kind="list"),
        "half_width": _f(6.0),
        "stab_tol": _f(0.05, doc="relative change budget on the last doubling"),
    },
}

_TOLERANCE_KEYS = ("tol", "residual_tol", "plateau_tol", "slope_tol",
                   "stab_tol", "nu")


def list_probes() -> Dict[str, Any]:
    """Machine-readable schema dump of every subcommand's parameters."""
    return {
        "schema_version": SCHEMA_VERSION,
        "subcommands": {name: PROBE_SCHEMAS.get(name, {})
                        for name in SUBCOMMANDS},
    }


def default_config() -> Dict[str, Any]:
    """Full config dict built from schema defaults (round-trips through
    validation)."""
    probes = {}
    for name, schema in PROBE_SCHEMAS.items():
        block = {k: v["default"] for k, v in schema.items()
                 if not v["required"]}
        probes[name] = block
    # strichartz requires an explicit pair; the default is the m=1, n=3
    # standard pair (8/3, 4) at alpha = 3/2
    probes["strichartz"].update(p=8.0 / 3.0, q=4.0, alpha=1.5)
    return {
        "seed": 0,
        "threads": None,
        "output_dir": "reports",
        "grid": {"n": 3, "npts": 16, "half_width": 6.0},
        "operator": {"m": 1,
                     "potential": {"family": "gaussian-well",
                                   "depth": 5.0, "width": 1.0,
                                   "coupling": 1.0}},
        "probes": probes,
    }


# ---------------------------------------------------------------------------
# config parsing and validation
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    grid: GridSpec
    m: int
    potential_spec: Dict[str, Any]
    seed: int
    output_dir: Path
    threads: int
    probes: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)


def _require(cond: bool, invariant: str) -> None:
    if not cond:
        raise ConfigError(invariant)


def parse_config(raw: Dict[str, Any], out_dir: Optional[str] = None,
                 threads: Optional[int] = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _require("seed" in raw and isinstance(raw["seed"], int),
             "seed present: an integer seed field is mandatory")
    gblock = raw.get("grid") or {}
    _require(isinstance(gblock, dict) and {"n", "npts", "half_width"} <= set(gblock),
             "grid block with n, npts, half_width is mandatory")
    oblock = raw.get("operator") or {}
    _require(isinstance(oblock, dict) and "m" in oblock,
             "operator block with m is mandatory")
    m = int(oblock["m"])
    n = int(gblock["n"])
    _require(n > 2 * m, f"n > 2m: got n={n}, m={m}")
    try:
        kwargs = {}
        if gblock.get("max_points"):
            kwargs["max_points"] = int(gblock["max_points"])
        grid = GridSpec(n, int(gblock["npts"]), float(gblock["half_width"]),
                        **kwargs)
    except ValueError as exc:
        raise ConfigError(f"grid block invalid: {exc}") from exc

    pot_spec = oblock.get("potential") or {"family": "gaussian-well",
                                           "depth": 1.0, "width": 1.0}
    _require(pot_spec.get("family") in POTENTIAL_FAMILIES,
             f"potential family must be one of {POTENTIAL_FAMILIES}, "
             f"got {pot_spec.get('family')!r}")

    warnings: List[str] = []
    if pot_spec["family"] == "polynomial-decay":
        s = float(pot_spec.get("s", 0.0))
        _require(s > 0, "polynomial-decay potential needs s > 0")
        if s <= 2 * m:
            warnings.append(
                f"polynomial decay s={s:g} <= 2m={2 * m}: outside the "
                "hypothesis range of the smoothing estimates"
            )

    probes: Dict[str, Dict[str, Any]] = {}
    user_probes = raw.get("probes") or {}
    _require(isinstance(user_probes, dict), "probes block must be a mapping")
    for name in user_probes:
        _require(name in PROBE_SCHEMAS,
                 f"unknown probe block {name!r}; valid: {sorted(PROBE_SCHEMAS)}")
    for name, schema in PROBE_SCHEMAS.items():
        block = dict(user_probes.get(name) or {})
        for key in block:
            _require(key in schema,
                     f"unknown parameter {key!r} in probe block {name!r}")
        for key, meta in schema.items():
            if key not in block:
                _require(not meta["required"] or name not in user_probes,
                         f"probe {name!r} requires parameter {key!r}")
                block[key] = meta["default"]
        for key in _TOLERANCE_KEYS:
            if key in block and block[key] is not None:
                _require(float(block[key]) > 0,
                         f"tolerance {name}.{key} must be strictly positive")
        probes[name] = block

    outp = Path(out_dir if out_dir is not None
                else raw.get("output_dir", "reports"))
    nthreads = threads if threads is not None else raw.get("threads")
    if nthreads is None:
        nthreads = os.cpu_count() or 1
    _require(int(nthreads) >= 1, "threads must be >= 1")

    return RunConfig(grid=grid, m=m, potential_spec=dict(pot_spec),
                     seed=int(raw["seed"]), output_dir=outp,
                     threads=int(nthreads), probes=probes, warnings=warnings)


def load_config(path, out_dir: Optional[str] = None,
                threads: Optional[int] = None) -> RunConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return parse_config(raw, out_dir=out_dir, threads=threads)


def build_potential(cfg: RunConfig) -> Potential:
    spec = cfg.potential_spec
    family = spec["family"]
    coupling = float(spec.get("coupling", 1.0))
    if family == "gaussian-well":
        pot = gaussian_well(cfg.grid, float(spec.get("depth", 1.0)),
                            float(spec.get("width", 1.0)))
    elif family == "polynomial-decay":
        pot = bracket_decay(cfg.grid, float(spec.get("g", spec.get("amplitude", 1.0))),
                            float(spec["s"]))
    elif family == "embedded-counterexample":
        pair = build_embedded_pair(cfg.grid, cfg.m,
                                   float(spec.get("delta", 1.0)))
        pot = pair.potential
    elif family == "file":
        path = spec.get("path")
        _require(path is not None, "file potential needs a path")
        with open(path, "rb") as fh:
            fld = read_field(fh)
        _require(fld.grid == cfg.grid,
                 "file potential grid does not match the config grid")
        pot = Potential(cfg.grid, fld.values.real,
                        decay_exponent=float(spec.get("s", 2.0 * cfg.grid.n)),
                        name=f"file({Path(path).name})")
    else:  # pragma: no cover - guarded by parse_config
        raise ConfigError(f"unknown potential family {family!r}")
    if coupling != 1.0:
        pot = pot.scaled(coupling)
    return pot


# ---------------------------------------------------------------------------
# probe runners
# ---------------------------------------------------------------------------

def _probe_rng(cfg: RunConfig, name: str) -> np.random.Generator:
    """Independent deterministic stream per probe, stable across subsets."""
    tag = sum(ord(c) * 31 ** i for i, c in enumerate(name)) % (2 ** 31)
    return np.random.default_rng([cfg.seed, tag])


def _run_kernels(cfg: RunConfig) -> ProbeReport:
    block = cfg.probes["kernels"]
    rng = _probe_rng(cfg, "kernels")
    m, n = cfg.m, cfg.grid.n
    trials, tol = int(block["trials"]), float(block["tol"])
    report = ProbeReport(
        name="kernels",
        params={"m": m, "n": n, "trials": trials, "tol": tol},
        provenance={"seed": cfg.seed},
    )
    worst = 0.0
    for t in range(trials):
        xi = rng.uniform(0.0, cfg.grid.nyquist_radius)
        mag = float(np.exp(rng.uniform(np.log(0.1), np.log(100.0))))
        ang = rng.uniform(0.05, 2.0 * np.pi - 0.05)
        z = mag * complex(math.cos(ang), math.sin(ang))
        q = ResolventQuery(z=z, m=m, n=n)
        lhs = 1.0 / (xi ** (2 * m) - z)
        rhs = sum(zl / (xi ** 2 - zl) for zl in q.roots()) / (m * z)
        resid = abs(lhs - rhs) / max(abs(lhs), 1e-300)
        worst = max(worst, resid)
        if t < 64 or resid > tol:
            report.add_row(trial=t, xi=xi, re_z=z.real, im_z=z.imag,
                           residual=resid)
    report.metrics.update(max_residual=worst)
    report.passes["identity_holds"] = bool(worst < tol)
    return report


def _run_bs_sweep(cfg: RunConfig) -> ProbeReport:
    block = cfg.probes["bs-sweep"]
    pot = build_potential(cfg)
    lambdas = np.linspace(float(block["lambda_min"]),
                          float(block["lambda_max"]),
                          int(block["lambda_count"]))
    report = inv_norm_sweep(pot, cfg.m, list(lambdas),
                            [float(t) for t in block["thetas"]],
                            float(block["nu"]))
    report.provenance.update(seed=cfg.seed,
                             grid={"n": cfg.grid.n, "N": cfg.grid.npts,
                                   "L": cfg.grid.half_width})
    return report


def _run_spectrum(cfg: RunConfig) -> ProbeReport:
    block = cfg.probes["spectrum"]
    pot = build_potential(cfg)
    h = Hamiltonian(cfg.grid, cfg.m, pot)
    n0, bound, ok = clr_check(h, float(block["clr_constant"]))
    es = h.eigenset()
    report = ProbeReport(
        name="spectrum",
        params={"m": cfg.m, "n": cfg.grid.n, "potential": pot.name,
                "clr_constant": float(block["clr_constant"])},
        provenance={"seed": cfg.seed,
                    "grid": {"n": cfg.grid.n, "N": cfg.grid.npts,
                             "L": cfg.grid.half_width},
                    "residual_tol": float(block["residual_tol"])},
    )
    for ev, res in zip(es.eigenvalues, es.residuals):
        report.add_row(eigenvalue=ev, residual=res)
    report.metrics.update(count_negative=n0, clr_bound=bound)
    report.passes["clr_bound_holds"] = bool(ok)
    report.passes["eigenpairs_converged"] = bool(
        all(r < float(block["residual_tol"]) * max(1.0, abs(e))
            for e, r in zip(es.eigenvalues, es.residuals)))
    return report


def _run_counterexample(cfg: RunConfig) -> ProbeReport:
    block = cfg.probes["counterexample"]
    grid = GridSpec(int(block["n"]), int(block["npts"]),
                    float(block["half_width"]))
    sigma = block["sigma"]
    pair = build_embedded_pair(grid, int(block["m"]),
                               float(block["delta"]),
                               method=str(block["method"]),
                               sigma=None if sigma is None else float(sigma))
    report = verify_embedded(pair)
    report.provenance.update(seed=cfg.seed)
    tol = float(block["residual_tol"])
    report.passes["residual_below_tol"] = bool(
        pair.residuals["eigen_residual"] < tol)
    if block.get("save"):
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        save_embedded_pair(pair, cfg.output_dir / "embedded_pair")
    return report


def _run_smoothing(cfg: RunConfig) -> ProbeReport:
    block = cfg.probes["smoothing"]
    pot = build_potential(cfg)
    h = Hamiltonian(cfg.grid, cfg.m, pot)
    return kato_smoothing_probe(
        h, float(block["gamma"]), eps=float(block["eps"]),
        t_final=float(block["t_final"]), samples=int(block["samples"]),
        time_step=float(block["time_step"]),
        rng=_probe_rng(cfg, "smoothing"),
        refine_iters=int(block["refine_iters"]),
        plateau_tol=float(block["plateau_tol"]))


def _run_strichartz(cfg: RunConfig) -> ProbeReport:
    block = cfg.probes["strichartz"]
    for key in ("p", "q", "alpha"):
        _require(block[key] is not None, f"strichartz requires {key}")
    pot = build_potential(cfg)
    h = Hamiltonian(cfg.grid, cfg.m, pot)
    try:
        pair = AdmissiblePair(float(block["p"]), float(block["q"]),
                              float(block["alpha"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return strichartz_probe(
        h, pair, mode=str(block["mode"]), t_final=float(block["t_final"]),
        samples=int(block["samples"]), time_step=float(block["time_step"]),
        rng=_probe_rng(cfg, "strichartz"),
        plateau_tol=float(block["plateau_tol"]))


def _run_sobolev(cfg: RunConfig) -> ProbeReport:
    block = cfg.probes["sobolev"]
    npts = block["npts"] or cfg.grid.npts
    half_width = block["half_width"] or cfg.grid.half_width
    grid = GridSpec(cfg.grid.n, int(npts), float(half_width))
    mags = np.geomspace(float(block["z_min"]), float(block["z_max"]),
                        int(block["z_count"]))
    return sobolev_scaling_probe(
        grid, cfg.m, float(block["alpha"]), float(block["p"]),
        float(block["q"]), mags, z_arg=float(block["z_arg"]),
        samples=int(block["samples"]), rng=_probe_rng(cfg, "sobolev"),
        slope_tol=float(block["slope_tol"]))


def _run_stein_weiss(cfg: RunConfig) -> ProbeReport:
    block = cfg.probes["stein-weiss"]
    return stein_weiss_probe(
        float(block["lam"]), float(block["alpha"]), float(block["beta"]),
        cfg.grid.n, npts_ladder=[int(x) for x in block["npts_ladder"]],
        half_width=float(block["half_width"]),
        rng=_probe_rng(cfg, "stein-weiss"),
        stab_tol=float(block["stab_tol"]))


PROBE_RUNNERS: Dict[str, Callable[[RunConfig], ProbeReport]] = {
    "kernels": _run_kernels,
    "bs-sweep": _run_bs_sweep,
    "spectrum": _run_spectrum,
    "counterexample": _run_counterexample,
    "smoothing": _run_smoothing,
    "strichartz": _run_strichartz,
    "sobolev": _run_sobolev,
    "stein-weiss": _run_stein_weiss,
}


# ---------------------------------------------------------------------------
# report emission and orchestration
# ---------------------------------------------------------------------------

def _write_reports(report: ProbeReport, out_dir: Path, name: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    report.write_csv(csv_path)
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    payload = csv_path.read_text(encoding="utf-8")
    csv_path.write_text(f"# generated {stamp}\n" + payload, encoding="utf-8")
    report.write_json(out_dir / f"{name}.json")


def run(config_path, subcommand: str, out_dir: Optional[str] = None,
        threads: Optional[int] = None) -> int:
    """Execute one subcommand (or 'all') against a config file."""
    if subcommand not in SUBCOMMANDS:
        print(f"unknown subcommand {subcommand!r}; valid: {SUBCOMMANDS}",
              file=sys.stderr)
        return EXIT_VALIDATION
    try:
        cfg = load_config(config_path, out_dir=out_dir, threads=threads)
        if cfg.potential_spec["family"] == "polynomial-decay":
            if subcommand in ("smoothing", "strichartz", "all"):
                for w in cfg.warnings:
                    print(f"warning: {w}", file=sys.stderr)
    except ConfigError as exc:
        print(f"config validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    names = list(PROBE_SUBCOMMANDS) if subcommand == "all" else [subcommand]
    reports: Dict[str, ProbeReport] = {}
    failure: Optional[str] = None

    def job(name: str):
        return name, PROBE_RUNNERS[name](cfg)

    try:
        if len(names) > 1 and cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                for name, rep in pool.map(job, names):
                    reports[name] = rep
        else:
            for name in names:
                reports[name] = PROBE_RUNNERS[name](cfg)
    except ConfigError as exc:
        print(f"config validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # numerical failure: preserve partial reports
        failure = f"{type(exc).__name__}: {exc}"

    for name in names:
        if name in reports:
            _write_reports(reports[name], cfg.output_dir, name)

    if subcommand == "all":
        summary = {
            "schema_version": SCHEMA_VERSION,
            "seed": cfg.seed,
            "probes": {name: reports[name].summary()
                       for name in names if name in reports},
            "passed": (failure is None
                       and all(reports[n].passed() for n in names
                               if n in reports)
                       and len(reports) == len(names)),
        }
        if failure is not None:
            summary["failure"] = failure
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        (cfg.output_dir / "all.json").write_text(
            json.dumps(summary, indent=2) + "\n", encoding="utf-8")

    if failure is not None:
        print(f"numerical failure: {failure}", file=sys.stderr)
        return EXIT_NUMERICAL
    if all(reports[n].passed() for n in names):
        return EXIT_OK
    failed = [n for n in names if not reports[n].passed()]
    print(f"pass flags false in: {', '.join(failed)}", file=sys.stderr)
    return EXIT_NUMERICAL


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="polyharmlab",
        description="probe suites for polyharmonic Schrodinger operators")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int, default=None)
    sub.add_parser("list-probes")
    args = parser.parse_args(argv)
    if args.subcommand == "list-probes":
        print(json.dumps(list_probes(), indent=2))
        return EXIT_OK
    return run(args.config, args.subcommand, out_dir=args.out,
               threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
