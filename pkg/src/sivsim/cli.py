"""Command-line runner.

Subcommands: ``run <config>`` executes one scenario from a YAML config,
``validate <config>`` reports every schema violation without running
anything, ``figures [--out DIR]`` runs the five bundled scenario configs.
``--seed`` and ``--workers`` override the config. Exit codes: 0 success,
2 config error, 3 solver error.

Identical config and seed produce byte-identical data files (for a fixed
execution backend); every run leaves a ``manifest.json`` that records the
resolved configuration, seed, backend, convergence checks and outcome,
which suffices to reproduce the run. ``SIVSIM_OUTDIR`` sets the default
output directory only.
"""

from __future__ import annotations

import argparse
import hashlib
import importlib.resources
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig, load_config, validate_config
from .kernels import get_backend
from .records import write_records
from .scenarios import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

BUNDLED = ("spectrum", "saturation", "switch", "correlations", "raman",
           "entangle")


def _write_csv(path: Path, comments: list[str], columns: dict) -> None:
    cols = {k: np.asarray(v) for k, v in columns.items()}
    n = len(next(iter(cols.values())))
    with open(path, "w") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(",".join(cols) + "\n")
        for i in range(n):
            fh.write(",".join(f"{c[i]:.12g}" for c in cols.values()) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _run_one(cfg: ScenarioConfig, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    import scipy

    versions = {"numpy": np.__version__, "scipy": scipy.__version__}
    try:
        import numba
        versions["numba"] = numba.__version__
    except ImportError:
        pass

    manifest = {
        "tool": "sivsim",
        "version": __version__,
        "backend": get_backend(),
        "library_versions": versions,
        "scenario": cfg.scenario,
        "seed": cfg.solver["seed"],
        "config": cfg.raw,
        "solver": cfg.solver,
        "status": "running",
        "outputs": {},
    }
    t0 = time.perf_counter()
    try:
        tables, extras, records = run_scenario(cfg)
        for stem, (comments, columns) in tables.items():
            path = out_dir / f"{stem}.csv"
            header = [f"sivsim {cfg.scenario} output", *comments,
                      f"seed: {cfg.solver['seed']}"]
            _write_csv(path, header, columns)
            manifest["outputs"][path.name] = _sha256(path)
        if records is not None:
            rec_path = out_dir / "records.txt"
            write_records(rec_path, records)
            manifest["outputs"][rec_path.name] = _sha256(rec_path)
        manifest["results"] = {k: (float(v) if isinstance(v, (int, float, np.floating))
                                   else v)
                               for k, v in extras.items()}
        manifest["status"] = "ok"
    except Exception as exc:
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        manifest["wall_time_s"] = round(time.perf_counter() - t0, 3)
        with open(out_dir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
    return manifest


def _apply_overrides(args, data: dict) -> dict:
    solver = dict(data.get("solver") or {})
    if args.seed is not None:
        solver["seed"] = args.seed
    if args.workers is not None:
        solver["workers"] = args.workers
    if solver:
        data = {**data, "solver": solver}
    return data


def _cmd_run(args) -> int:
    import yaml

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = validate_config(args.config)
    if report:
        for line in report:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    data = _apply_overrides(args, yaml.safe_load(text))
    cfg = load_config(data)
    out_dir = Path(args.out or cfg.output["directory"])
    try:
        manifest = _run_one(cfg, out_dir)
    except Exception as exc:
        print(f"solver error in scenario {cfg.scenario!r}: "
              f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"{cfg.scenario}: wrote {len(manifest['outputs'])} file(s) to "
          f"{out_dir} in {manifest['wall_time_s']} s")
    return EXIT_OK


def _cmd_validate(args) -> int:
    report = validate_config(args.config)
    if not report:
        print("config is valid")
        return EXIT_OK
    for line in report:
        print(line, file=sys.stderr)
    return EXIT_CONFIG


def _cmd_figures(args) -> int:
    base = Path(args.out)
    for name in BUNDLED:
        ref = importlib.resources.files("sivsim.configs") / f"{name}.yaml"
        with importlib.resources.as_file(ref) as path:
            report = validate_config(path)
            if report:
                for line in report:
                    print(f"bundled config {name}: {line}", file=sys.stderr)
                return EXIT_CONFIG
            import yaml
            data = _apply_overrides(args, yaml.safe_load(path.read_text()))
            cfg = load_config(data)
        try:
            manifest = _run_one(cfg, base / name)
        except Exception as exc:
            print(f"solver error in scenario {name!r}: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        print(f"{name}: ok ({manifest['wall_time_s']} s)")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sivsim",
        description="Simulate multilevel emitters in nanophotonic cavities "
                    "and waveguides.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=os.environ.get("SIVSIM_OUTDIR"),
                       help="output directory (default: config output block "
                            "or SIVSIM_OUTDIR)")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=None)
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="check a config without running")
    p_val.add_argument("config")
    p_val.set_defaults(func=_cmd_validate)

    p_fig = sub.add_parser("figures",
                           help="run the five bundled scenario configs")
    p_fig.add_argument("--out", default=os.environ.get("SIVSIM_OUTDIR", "figures"))
    p_fig.add_argument("--seed", type=int, default=None)
    p_fig.add_argument("--workers", type=int, default=None)
    p_fig.set_defaults(func=_cmd_figures)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
