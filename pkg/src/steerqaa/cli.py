"""Command-line experiments that emit the annealing study's data as CSV.

Every subcommand resolves a JSON experiment config (built-in defaults, then an
optional ``--config`` file, then command-line flags), runs a Cartesian sweep of
ensembles and writes a CSV preceded by ``#`` header lines that echo the resolved
config.  Passing an earlier output file as ``--config`` re-runs it exactly.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import (
    EnsembleError,
    EnsembleSpec,
    naive_level_statistics,
    run_ensemble,
    smallest_count_reaching,
)
from .evolution import IntegrationError, IntegratorConfig
from .model import Boundary
from .schedule import ScheduleKind
from .steering import CDForm, Steering

EXIT_OK, EXIT_CONFIG, EXIT_INTEGRATION = 0, 2, 3
MAX_LEVEL_SPINS = 14
QUICK_REALIZATIONS = 200
QUICK_MAX_SPINS = 8


class ConfigError(ValueError):
    pass


def logspace(lo: float, hi: float, count: int) -> list[float]:
    return [float(x) for x in np.logspace(np.log10(lo), np.log10(hi), count)]


T_A_AXIS = logspace(0.1, 1000.0, 9)
J_AXIS = logspace(0.01, 10.0, 7)


def _base(L, J, t_a, modes, boundary="ring") -> dict:
    return {
        "model": {"L": L, "J": J, "W": 1.0, "h0": 10.0, "boundary": boundary},
        "protocol": {
            "t_a": t_a,
            "steering": modes,
            "schedule": "cos-sin",
            "cap_steering": None,
            "cd_form": "ground",
        },
        "ensemble": {"n_realizations": 10_000, "master_seed": 20181108},
        "integrator": {"rtol": 1e-10, "atol": 1e-12, "max_step": None},
        "output": {"path": None, "format": "csv"},
    }


def default_config(command: str, panel: str = "a") -> dict:
    if command == "fig1":
        cfg = _base([1, 3], 0.1, T_A_AXIS, ["none", "single", "exact"], boundary="open")
    elif command == "fig2":
        if panel == "a":
            cfg = _base([8, 10, 12], 0.1, T_A_AXIS, ["none", "single"])
        else:
            cfg = _base([8, 10, 12], J_AXIS, 1.0 if panel == "b" else 100.0, ["none", "single"])
        cfg["panel"] = panel
    elif command == "fig3":
        cfg = _base([8, 10, 12], 0.3, 1.0, ["none", "single"])
    elif command == "grid":
        cfg = _base(12, J_AXIS, T_A_AXIS, ["none", "single"])
    elif command == "cluster":
        cfg = _base(12, logspace(0.01, 10.0, 7), 128.0, ["none", "single", "cluster"])
    elif command == "run":
        cfg = _base(8, 0.1, 1.0, ["single"])
        cfg["levels"] = False
    else:
        raise ConfigError(f"unknown command {command!r}")
    return cfg


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in out:
            raise ConfigError(f"unknown config field '{where}'")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config field '{where}' must be an object")
            out[key] = _merge(out[key], value, where)
        else:
            out[key] = value
    return out


def load_config_file(path: str | Path) -> dict:
    """Read a JSON config, or the ``# config:`` header of an earlier CSV output."""
    text = Path(path).read_text()
    if text.startswith("#"):
        for line in text.splitlines():
            if line.startswith("# config: "):
                text = line[len("# config: "):]
                break
        else:
            raise ConfigError(f"{path}: no '# config:' header line")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _as_list(value, field: str, kind=float) -> list:
    values = value if isinstance(value, list) else [value]
    if not values:
        raise ConfigError(f"config field '{field}' is empty")
    try:
        return [kind(v) for v in values]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field '{field}': {exc}") from exc


def _positive(values: list, field: str) -> None:
    for v in values:
        if not v > 0:
            raise ConfigError(f"config field '{field}' must be positive, got {v}")


def validate(cfg: dict, command: str) -> dict:
    """Check a resolved config; returns it with list-valued sweep axes."""
    model, proto = cfg["model"], cfg["protocol"]
    Ls = _as_list(model["L"], "model.L", int)
    if any(L < 1 for L in Ls):
        raise ConfigError("config field 'model.L' must be >= 1")
    Js = _as_list(model["J"], "model.J")
    t_as = _as_list(proto["t_a"], "protocol.t_a")
    _positive(t_as, "protocol.t_a")
    _positive(_as_list(model["h0"], "model.h0"), "model.h0")
    _positive(_as_list(model["W"], "model.W"), "model.W")
    try:
        Boundary(model["boundary"])
        modes = [Steering(m) for m in _as_list(proto["steering"], "protocol.steering", str)]
        ScheduleKind(proto["schedule"])
        CDForm(proto["cd_form"])
    except ValueError as exc:
        raise ConfigError(f"config field: {exc}") from exc
    ens = cfg["ensemble"]
    if not int(ens["n_realizations"]) >= 1:
        raise ConfigError("config field 'ensemble.n_realizations' must be >= 1")
    if not 0 <= int(ens["master_seed"]) < 2**64:
        raise ConfigError("config field 'ensemble.master_seed' must be a 64-bit unsigned integer")
    if Boundary(model["boundary"]) is Boundary.RING and min(Ls) < 3:
        bad = [L for L in Ls if L < 3]
        raise ConfigError(f"config field 'model.L': ring boundary needs L >= 3, got {bad}")
    if Steering.CLUSTER in modes and min(Ls) < 3:
        raise ConfigError("config field 'protocol.steering': cluster steering needs L >= 3")
    if command == "fig3" and max(Ls) > MAX_LEVEL_SPINS:
        raise ConfigError(f"config field 'model.L': level distributions refuse L > {MAX_LEVEL_SPINS}")
    try:
        integrator_from(cfg)
    except ValueError as exc:
        raise ConfigError(f"config block 'integrator': {exc}") from exc
    return {"L": Ls, "J": Js, "t_a": t_as, "modes": modes}


def integrator_from(cfg: dict) -> IntegratorConfig:
    i = cfg["integrator"]
    return IntegratorConfig(
        rtol=float(i["rtol"]),
        atol=float(i["atol"]),
        max_step=None if i["max_step"] is None else float(i["max_step"]),
    )


def spec_from(cfg: dict, L: int, J: float, t_a: float, mode: Steering, levels: bool = False) -> EnsembleSpec:
    m, p, e = cfg["model"], cfg["protocol"], cfg["ensemble"]
    return EnsembleSpec(
        L=L,
        J=J,
        t_a=t_a,
        mode=mode,
        n_realizations=int(e["n_realizations"]),
        master_seed=int(e["master_seed"]),
        W=float(m["W"]),
        h0=float(m["h0"]),
        boundary=Boundary(m["boundary"]),
        compute_levels=levels,
        cap=None if p["cap_steering"] is None else float(p["cap_steering"]),
        cd_form=CDForm(p["cd_form"]),
    )


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class Table:
    def __init__(self, columns: list[str]):
        self.columns = columns
        self.rows: list[list] = []

    def add(self, **values):
        self.rows.append([values[c] for c in self.columns])

    def render(self, header: list[str]) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()


class Runner:
    """Runs ensembles for sweep points and streams audit records."""

    def __init__(self, cfg: dict, jobs: int, audit_path: str | None, log=None):
        self.cfg = cfg
        self.jobs = jobs
        self.integrator = integrator_from(cfg)
        self.audit = open(audit_path, "w") if audit_path else None
        self.log = log or (lambda msg: None)

    def __call__(self, L, J, t_a, mode, levels=False):
        spec = spec_from(self.cfg, L, J, t_a, mode, levels)
        self.log(f"L={L} J={J:g} t_a={t_a:g} mode={mode.value} n={spec.n_realizations}")
        res = run_ensemble(spec, self.integrator, jobs=self.jobs)
        if self.audit:
            for r in res.records:
                rec = {"L": L, "J": J, "t_a": t_a, "mode": mode.value, **r.audit()}
                self.audit.write(json.dumps(rec) + "\n")
        return res

    def close(self):
        if self.audit:
            self.audit.close()


def sweep_table(cfg: dict, axes: dict, run: Runner, naive: bool = True) -> Table:
    cols = ["t_a", "mode", "L", "J", "mean_P1", "stderr_P1"]
    if naive:
        cols.append("mean_naive_success")
    table = Table(cols + ["n_realizations"])
    for L, J, t_a, mode in itertools.product(axes["L"], axes["J"], axes["t_a"], axes["modes"]):
        if mode is Steering.EXACT and L > 6:
            continue
        if cfg["model"]["boundary"] == "ring" and L < 3:
            continue
        res = run(L, J, t_a, mode)
        table.add(
            t_a=t_a,
            mode=mode.value,
            L=L,
            J=J,
            mean_P1=res.mean_P1,
            stderr_P1=res.stderr_P1,
            mean_naive_success=res.mean_naive_success,
            n_realizations=res.n_realizations,
        )
    return table


def fig3_table(cfg: dict, axes: dict, run: Runner) -> Table:
    table = Table(["L", "J", "t_a", "mode", "n", "mean_Pn", "S_N"])
    for L, J, t_a in itertools.product(axes["L"], axes["J"], axes["t_a"]):
        naive_done = False
        for mode in axes["modes"]:
            res = run(L, J, t_a, mode, levels=True)
            dists = [(mode.value, res.mean_Pn, res.S_N)]
            if not naive_done:
                dists.append(("naive", *naive_level_statistics(res.records, L)))
                naive_done = True
            for name, Pn, S in dists:
                for n in range(1 << L):
                    table.add(L=L, J=J, t_a=t_a, mode=name, n=n + 1, mean_Pn=Pn[n], S_N=S[n])
    return table


def grid_table(cfg: dict, axes: dict, run: Runner) -> Table:
    table = Table(
        ["J", "t_a", "L", "mode", "mean_infidelity", "stderr_infidelity", "n_realizations", "single_best"]
    )
    for L, J, t_a in itertools.product(axes["L"], axes["J"], axes["t_a"]):
        rows = {}
        stderr_naive = None
        for mode in axes["modes"]:
            res = run(L, J, t_a, mode)
            rows[mode.value] = (1.0 - res.mean_P1, res.stderr_P1, res.n_realizations)
            if stderr_naive is None:
                # naive outcome is 0/1 per realization
                p = res.mean_naive_success
                n = res.n_realizations
                stderr_naive = float(np.sqrt(p * (1 - p) / (n - 1))) if n > 1 else 0.0
                rows["naive"] = (1.0 - p, stderr_naive, n)
        best = None
        if "single" in rows:
            others = [v[0] for k, v in rows.items() if k != "single"]
            best = all(rows["single"][0] < o for o in others)
        for name in ["naive", *[m.value for m in axes["modes"]]]:
            inf, err, n = rows[name]
            table.add(
                J=J, t_a=t_a, L=L, mode=name, mean_infidelity=inf, stderr_infidelity=err,
                n_realizations=n, single_best=best,
            )
    return table


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steerqaa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"steerqaa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "fig1": "ground-state probability vs annealing time for 1 and 3 spins",
        "fig2": "ensemble P1 vs t_a (panel a) or J (panels b, c) with the naive baseline",
        "fig3": "level distribution P_n and cumulative S_N",
        "grid": "infidelity over a (J, t_a) grid for naive, unsteered and steered runs",
        "cluster": "J sweep comparing no, single-spin and cluster steering",
        "run": "generic sweep driven entirely by the config",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="JSON config, or an earlier output CSV to reproduce")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--realizations", type=int, help="disorder realizations per point")
        p.add_argument("--steering", help="comma-separated modes from none,single,cluster,exact")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--quick", action="store_true", help=f"{QUICK_REALIZATIONS} realizations, L <= {QUICK_MAX_SPINS}")
        p.add_argument("--L", dest="L", help="comma-separated system sizes")
        p.add_argument("--J", dest="J", help="comma-separated couplings")
        p.add_argument("--t-a", dest="t_a", help="comma-separated annealing times")
        p.add_argument("--boundary", choices=[b.value for b in Boundary])
        p.add_argument("--schedule", choices=[k.value for k in ScheduleKind])
        p.add_argument("--cap-steering", type=float, help="clip single-spin steering amplitudes")
        p.add_argument("--cd-form", choices=[f.value for f in CDForm])
        p.add_argument("--rtol", type=float)
        p.add_argument("--atol", type=float)
        p.add_argument("--max-step", type=float)
        p.add_argument("--audit", help="write per-realization NDJSON records here")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "fig2":
            p.add_argument("--panel", choices=["a", "b", "c"], default="a")
        if name == "run":
            p.add_argument("--levels", action="store_true", help="also emit S_N summary columns")
    return parser


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def resolve_config(args: argparse.Namespace) -> dict:
    panel = getattr(args, "panel", "a")
    cfg = default_config(args.command, panel)
    if args.config:
        loaded = load_config_file(args.config)
        # command-specific keys are dropped when a config moves between commands
        for key, owner in (("panel", "fig2"), ("levels", "run")):
            if key in loaded and args.command != owner:
                del loaded[key]
        if "panel" in loaded:
            cfg = default_config("fig2", loaded["panel"])
        cfg = _merge(cfg, loaded)
    if args.quick:
        cfg["ensemble"]["n_realizations"] = QUICK_REALIZATIONS
        Ls = [min(L, QUICK_MAX_SPINS) for L in _as_list(cfg["model"]["L"], "model.L", int)]
        cfg["model"]["L"] = sorted(set(Ls)) if len(Ls) > 1 else Ls[0]
    if args.realizations is not None:
        cfg["ensemble"]["n_realizations"] = args.realizations
    if args.seed is not None:
        cfg["ensemble"]["master_seed"] = args.seed
    if args.steering:
        cfg["protocol"]["steering"] = args.steering.split(",")
    if args.L:
        cfg["model"]["L"] = [int(x) for x in args.L.split(",")]
    if args.J:
        cfg["model"]["J"] = _floats(args.J)
    if args.t_a:
        cfg["protocol"]["t_a"] = _floats(args.t_a)
    for flag, block, key in [
        ("boundary", "model", "boundary"),
        ("schedule", "protocol", "schedule"),
        ("cap_steering", "protocol", "cap_steering"),
        ("cd_form", "protocol", "cd_form"),
        ("rtol", "integrator", "rtol"),
        ("atol", "integrator", "atol"),
        ("max_step", "integrator", "max_step"),
    ]:
        value = getattr(args, flag)
        if value is not None:
            cfg[block][key] = value
    if getattr(args, "levels", False):
        cfg["levels"] = True
    if args.out:
        cfg["output"]["path"] = args.out
    return cfg


def run_command(command: str, cfg: dict, jobs: int = 1, audit: str | None = None, log=None) -> str:
    axes = validate(cfg, command)
    runner = Runner(cfg, jobs, audit, log)
    try:
        if command == "fig3":
            table = fig3_table(cfg, axes, runner)
        elif command == "grid":
            table = grid_table(cfg, axes, runner)
        elif command == "run" and cfg.get("levels"):
            table = Table(["t_a", "mode", "L", "J", "mean_P1", "stderr_P1", "mean_naive_success",
                           "n_realizations", "N_99", "S_41"])
            for L, J, t_a, mode in itertools.product(axes["L"], axes["J"], axes["t_a"], axes["modes"]):
                res = runner(L, J, t_a, mode, levels=True)
                table.add(t_a=t_a, mode=mode.value, L=L, J=J, mean_P1=res.mean_P1,
                          stderr_P1=res.stderr_P1, mean_naive_success=res.mean_naive_success,
                          n_realizations=res.n_realizations,
                          N_99=smallest_count_reaching(res.S_N, 0.99),
                          S_41=res.S_N[min(40, res.S_N.size - 1)])
        else:
            table = sweep_table(cfg, axes, runner, naive=command != "fig1")
    finally:
        runner.close()
    header = [
        f"steerqaa {__version__} {command}",
        "config: " + json.dumps(cfg, sort_keys=True),
        "integrator: " + json.dumps(integrator_from(cfg).to_dict(), sort_keys=True),
        f"seed: {cfg['ensemble']['master_seed']}",
        "generated: " + datetime.now(timezone.utc).isoformat(timespec="seconds"),
    ]
    return table.render(header)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    log = (lambda msg: print(msg, file=sys.stderr, flush=True)) if args.verbose else None
    try:
        cfg = resolve_config(args)
        text = run_command(args.command, cfg, args.jobs, args.audit, log)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EnsembleError, IntegrationError) as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    out = cfg["output"]["path"]
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
