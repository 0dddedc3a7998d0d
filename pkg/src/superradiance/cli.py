"""Command line front end: run, sweep, marginal-width, fit and presets.

Outputs are CSV time series (first line ``# superradiance-csv v<N>``) and JSON
summaries carrying the scenario hash. The default output directory comes from
``$SUPERRADIANCE_OUT`` when ``--out`` is not given.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import (
    PRESETS,
    SCHEMA_VERSION,
    ConfigError,
    MarginalConfig,
    RunRecord,
    Scenario,
    SweepSpec,
    dumps,
    load,
    scenario_hash,
)
from .dicke import DickeLadder, emission_curve, evolve_cascade
from .doppler import fit_power_law, marginal_width
from .rates import MediumParams
from .twobody import run_scenario

log = logging.getLogger(__name__)

OUT_ENV = "SUPERRADIANCE_OUT"
_HBAR = 1.054571817e-34

TWOBODY_COLUMNS = ("t", "I_em", "Gamma", "Gamma_bar", "A", "V", "Y")
DIAGNOSTIC_KEYS = ("max_trace_drift", "max_hermiticity", "min_eigenvalue", "energy_balance")


class ScenarioError(RuntimeError):
    """A physics-layer failure tagged with the scenario that produced it."""


def summary_keys(scenario: Scenario) -> list[str]:
    """Fixed, mode-dependent summary columns for sweep tables."""
    if scenario.mode == "dicke":
        return ["I0", "peak_I_em", "t_max"]
    keys = []
    if scenario.mode == "twobody" or scenario.Delta_D > 0:
        keys += ["I0", "peak_I_em", "t_max", "Gamma0", "Gamma_max", *DIAGNOSTIC_KEYS]
    if scenario.mode == "doppler" and scenario.marginal is not None:
        keys.append("Delta_m")
    return keys


def _si_columns(scenario: Scenario, cols: dict) -> None:
    if scenario.gamma_SI is None:
        return
    cols["t_s"] = cols["t"] / scenario.gamma_SI
    if scenario.omega0_SI is not None:
        cols["I_em_W"] = cols["I_em"] * scenario.gamma_SI * _HBAR * scenario.omega0_SI


def execute(scenario: Scenario) -> tuple[dict, dict]:
    """Run one scenario; returns (time-series columns, summary scalars)."""
    t_grid = np.linspace(0.0, scenario.t_end, scenario.n_out)
    cols: dict = {}
    summary: dict = {}
    if scenario.mode == "dicke":
        ladder = DickeLadder.build(scenario.N, scenario.j)
        traj = evolve_cascade(ladder, t_grid, scenario.integrator)
        I = emission_curve(traj)
        cols["t"], cols["I_em"] = traj.t, I
        for k, M in enumerate(ladder.M):
            cols[f"rho_M={M:g}"] = traj.rho[:, k]
        k = int(np.argmax(I))
        summary.update(I0=float(I[0]), peak_I_em=float(I[k]), t_max=float(traj.t[k]))
    else:
        if scenario.mode == "twobody" or scenario.Delta_D > 0:
            run = run_scenario(scenario)
            cols = {"t": run.t, "I_em": run.I_em, "Gamma": run.Gamma, "Gamma_bar": run.GammaBar,
                    "A": run.A, "V": run.V, "Y": run.Y}
            summary.update(run.summary())
        if scenario.mode == "doppler" and scenario.marginal is not None:
            m: MarginalConfig = scenario.marginal
            summary["Delta_m"] = marginal_width(
                MediumParams(scenario.C, scenario.rho_size),
                scenario.j,
                search_bracket=m.bracket,
                eps_peak=m.eps_peak,
                rel_tol=m.rel_tol,
                t_end=m.t_end,
                quad_order=scenario.quad_order,
                convention=scenario.doppler_convention,
                config=scenario.integrator,
            )
    if cols:
        _si_columns(scenario, cols)
        if scenario.gamma_SI is not None and "t_max" in summary:
            summary["t_max_s"] = summary["t_max"] / scenario.gamma_SI
    return cols, summary


def run_one(scenario: Scenario) -> tuple[dict, RunRecord]:
    t0 = time.perf_counter()
    try:
        cols, summary = execute(scenario)
    except ConfigError:
        raise
    except Exception as exc:
        raise ScenarioError(
            f"scenario {scenario.name!r} (mode={scenario.mode}, j={scenario.j}, C={scenario.C}, "
            f"rho_size={scenario.rho_size}, Delta_D={scenario.Delta_D}): "
            f"{type(exc).__name__}: {exc}"
        ) from exc
    record = RunRecord(scenario_hash(scenario), __version__, time.perf_counter() - t0, summary)
    return cols, record


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, cols: dict) -> None:
    names = list(cols)
    with open(path, "w", newline="") as fh:
        fh.write(f"# superradiance-csv v{SCHEMA_VERSION}\n")
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*(cols[n] for n in names)):
            w.writerow([_fmt(x) for x in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise ValueError(f"{path}: no header row")
    return rows[0], rows[1:]


def _cell_tag(combo: dict) -> str:
    return "_".join(f"{k}={str(v).replace('/', 'o')}" for k, v in combo.items())


def write_outputs(out: Path, stem: str, scenario: Scenario, cols: dict, record: RunRecord) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    fmt = scenario.output.format
    if "csv" in fmt and cols:
        p = out / f"{stem}.csv"
        write_csv(p, cols)
        written.append(p)
    if "json" in fmt:
        p = out / f"{stem}.summary.json"
        p.write_text(record.summary_json() + "\n")
        written.append(p)
        p = out / f"{stem}.record.json"
        p.write_text(record.record_json() + "\n")
        written.append(p)
    return written


def _sweep_worker(args):
    index, scenario = args
    try:
        _, record = run_one(scenario)
        return index, record.summary, ""
    except Exception as exc:  # recorded per cell, the sweep carries on
        return index, {}, f"{type(exc).__name__}: {exc}"


def _sweep_worker_full(args):
    index, scenario = args
    try:
        cols, record = run_one(scenario)
        return index, cols, record, ""
    except Exception as exc:
        return index, {}, None, f"{type(exc).__name__}: {exc}"


def _pool_map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def sweep_table(spec: SweepSpec, workers: int = 1) -> tuple[list[str], list[list]]:
    """One row per cell in documented order: axes, summary scalars, error."""
    cells = spec.cells()
    keys = summary_keys(spec.base)
    header = ["cell", *spec.axes, *keys, "error"]
    results = _pool_map(_sweep_worker, list(enumerate(cells)), workers)
    results.sort(key=lambda r: r[0])
    rows = []
    for (index, summary, err), combo in zip(results, spec.combos()):
        row = [index, *[str(v) for v in combo.values()]]
        row += [summary.get(k, "") for k in keys]
        rows.append(row + [err])
    return header, rows


def write_table(path: Path, header: list, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# superradiance-csv v{SCHEMA_VERSION}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _apply_overrides(obj, overrides: Sequence[str]):
    if not overrides:
        return obj
    changes = {}
    fields = {f.name: f for f in dataclasses.fields(obj.integrator if isinstance(obj, Scenario) else obj.base.integrator)}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or key not in fields:
            raise ConfigError(f"integrator.{key}", f"bad --tol-override {item!r}; use KEY=VALUE with KEY in {sorted(fields)}")
        try:
            changes[key] = int(value) if key == "max_steps" else float(value)
        except ValueError:
            raise ConfigError(f"integrator.{key}", f"not a number: {value!r}") from None

    def patch(s: Scenario) -> Scenario:
        try:
            integ = dataclasses.replace(s.integrator, **changes)
        except ValueError as exc:
            raise ConfigError("integrator", str(exc)) from exc
        return dataclasses.replace(s, integrator=integ)

    if isinstance(obj, SweepSpec):
        return SweepSpec(patch(obj.base), obj.axes, obj.zipped)
    return patch(obj)


def _resolve_config(args):
    if getattr(args, "preset", None):
        if args.preset not in PRESETS:
            raise ConfigError("preset", f"unknown preset {args.preset!r}; available: {sorted(PRESETS)}")
        obj = PRESETS[args.preset]
    elif args.config:
        obj = load(args.config)
    else:
        raise ConfigError("--config", "give --config FILE or --preset NAME")
    return _apply_overrides(obj, args.tol_override or [])


def _out_dir(args, obj) -> Path:
    root = Path(args.out or os.environ.get(OUT_ENV) or ".")
    base = obj.base if isinstance(obj, SweepSpec) else obj
    return root / base.output.path


def cmd_run(args) -> int:
    obj = _resolve_config(args)
    out = _out_dir(args, obj)
    if isinstance(obj, Scenario):
        cols, record = run_one(obj)
        for p in write_outputs(out, obj.name, obj, cols, record):
            print(p)
        return 0
    cells = obj.cells()
    results = _pool_map(_sweep_worker_full, list(enumerate(cells)), args.workers)
    results.sort(key=lambda r: r[0])
    combined = []
    status = 0
    for (index, cols, record, err), combo, cell in zip(results, obj.combos(), cells):
        stem = f"{obj.base.name}_{index:03d}_{_cell_tag(combo)}"
        entry = {"cell": index, **{k: str(v) for k, v in combo.items()}}
        if err:
            entry["error"] = err
            status = 1
            print(f"cell {index} failed: {err}", file=sys.stderr)
        else:
            for p in write_outputs(out, stem, cell, cols, record):
                print(p)
            entry.update(scenario_hash=record.scenario_hash, summary=record.summary)
        combined.append(entry)
    p = out / f"{obj.base.name}.summary.json"
    doc = {"schema_version": SCHEMA_VERSION, "code_version": __version__,
           "scenario_hash": scenario_hash(obj), "cells": combined}
    p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(p)
    return status


def cmd_sweep(args) -> int:
    obj = _resolve_config(args)
    if not isinstance(obj, SweepSpec):
        obj = SweepSpec(obj, {})
    header, rows = sweep_table(obj, args.workers)
    out = _out_dir(args, obj)
    p = out / f"{obj.base.name}_sweep.csv"
    write_table(p, header, rows)
    print(p)
    return 1 if any(r[-1] for r in rows) else 0


def cmd_marginal(args) -> int:
    obj = _resolve_config(args)
    if isinstance(obj, SweepSpec):
        raise ConfigError("sweep", "marginal-width takes a single scenario; use 'sweep' for grids")
    if obj.mode != "doppler":
        raise ConfigError("mode", "marginal-width needs mode = 'doppler'")
    scenario = obj.replace(Delta_D=0.0, marginal=obj.marginal or MarginalConfig())
    _, record = run_one(scenario)
    out = _out_dir(args, obj)
    out.mkdir(parents=True, exist_ok=True)
    p = out / f"{obj.name}.marginal.json"
    p.write_text(record.summary_json() + "\n")
    print(json.dumps({"j": str(obj.j), "C": obj.C, "rho_size": obj.rho_size,
                      "Delta_m": record.summary["Delta_m"]}))
    return 0


def cmd_fit(args) -> int:
    header, rows = read_csv(args.csv)
    for name in (args.x, args.y):
        if name not in header:
            raise ConfigError(name, f"column not found in {args.csv}; have {header}")
    ix, iy = header.index(args.x), header.index(args.y)
    err = header.index("error") if "error" in header else None
    pts = [(float(r[ix]), float(r[iy])) for r in rows
           if r[iy] != "" and (err is None or not r[err])]
    fit = fit_power_law(pts)
    doc = {"x": args.x, "y": args.y, "n_points": len(pts), **dataclasses.asdict(fit)}
    text = json.dumps(doc, indent=2)
    print(text)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    return 0


def cmd_presets(args) -> int:
    if args.action == "list":
        for name, obj in PRESETS.items():
            base = obj.base if isinstance(obj, SweepSpec) else obj
            n = len(obj.cells()) if isinstance(obj, SweepSpec) else 1
            print(f"{name:8s} mode={base.mode:8s} cells={n}")
        return 0
    if args.name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {args.name!r}; available: {sorted(PRESETS)}")
    sys.stdout.write(dumps(PRESETS[args.name]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="superradiance", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, workers=True):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--config", help="scenario or sweep TOML file")
        g.add_argument("--preset", help="built-in preset name")
        sp.add_argument("--out", help=f"output root (default ${OUT_ENV} or .)")
        sp.add_argument("--tol-override", action="append", metavar="KEY=VALUE",
                        help="override an integrator setting, e.g. rel_tol=1e-8")
        if workers:
            sp.add_argument("--workers", type=int, default=1, help="parallel sweep cells")

    sp = sub.add_parser("run", help="run a scenario (or every cell of a sweep)")
    common(sp)
    sp.set_defaults(func=cmd_run)
    sp = sub.add_parser("sweep", help="aggregate summary scalars over a sweep")
    common(sp)
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("marginal-width", help="bisect the marginal Doppler width")
    common(sp, workers=False)
    sp.set_defaults(func=cmd_marginal)
    sp = sub.add_parser("fit", help="power-law fit of two CSV columns")
    sp.add_argument("csv")
    sp.add_argument("--x", default="C")
    sp.add_argument("--y", default="Delta_m")
    sp.add_argument("--out", help="write the fit JSON here")
    sp.set_defaults(func=cmd_fit)
    sp = sub.add_parser("presets", help="list or show built-in presets")
    sp.add_argument("action", choices=("list", "show"))
    sp.add_argument("name", nargs="?")
    sp.set_defaults(func=cmd_presets)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "presets" and args.action == "show" and not args.name:
        parser.error("presets show needs a name")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ScenarioError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
