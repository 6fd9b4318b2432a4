"""Command-line front end: ``hermite-mrt modes|velset|sim``.

Exit codes: 0 success, 1 error (bad config, bad file, blow-up), 2 tolerance failure.
"""
from __future__ import annotations

import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from . import config as cfgmod
from .config import ConfigError
from .modes import MODE_NAMES, extract_amplitudes, init_plane_wave, run_mode_experiment
from .solver import conserved_totals, load_checkpoint, save_checkpoint, step
from .velset import (
    BUILTINS,
    InfeasibleQuadratureError,
    builtin,
    derive_velocity_set,
    read_velocity_set,
    validate,
    write_velocity_set,
)

WORKERS_ENV = "HERMITE_MRT_WORKERS"
EXIT_OK, EXIT_ERROR, EXIT_TOLERANCE = 0, 1, 2


class ToleranceFailure(Exception):
    pass


def _workers(flag):
    if flag:
        return int(flag)
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _fail(msg):
    raise click.ClickException(msg)


@click.group()
def main():
    """Hermite-expansion MRT lattice Boltzmann: mode experiments and velocity sets."""


# --- modes -------------------------------------------------------------------


def _run_point(args):
    index, point, out_dir, prefix, base_dir = args
    vset = cfgmod.resolve_velset(point["velset"], base_dir)
    exp = cfgmod.build_experiment(point, vset)
    stem = Path(out_dir) / f"{prefix}_{index:03d}"
    result = run_mode_experiment(exp, csv_path=f"{stem}.csv")
    summary = result.summary()
    summary["config"] = cfgmod.echo(point)
    tol = point["tolerance"]
    checks = {}
    for m, err in result.rel_error.items():
        limit = tol["acoustic"] if m in "+-" else tol[m]
        checks[m] = err <= limit
    summary["within_tolerance"] = checks
    Path(f"{stem}.json").write_text(json.dumps(summary, indent=2))
    return index, summary


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--set", "overrides", multiple=True, help="Override a field, e.g. relaxation.tau21=0.6")
@click.option("--workers", type=int, default=None, help=f"Worker processes (env {WORKERS_ENV}).")
@click.option("--out", "out_dir", default=None, help="Output directory (overrides output.dir).")
def modes(config_path, overrides, workers, out_dir):
    """Run plane-wave mode experiments (one per sweep point)."""
    cfg = cfgmod.load_config(config_path, overrides)
    out_dir = Path(out_dir or cfg["output"]["dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    base_dir = Path(config_path).parent
    points = cfgmod.sweep_points(cfg)
    # validate every point before any compute
    for p in points:
        cfgmod.build_experiment(p, cfgmod.resolve_velset(p["velset"], base_dir))
    jobs = [(i, p, str(out_dir), cfg["output"]["prefix"], str(base_dir)) for i, p in enumerate(points)]
    n = min(_workers(workers), len(jobs))
    if n > 1:
        with ProcessPoolExecutor(n) as pool:
            results = list(pool.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]
    rows = [s for _, s in sorted(results, key=lambda r: r[0])]
    (out_dir / f"{cfg['output']['prefix']}_summary.json").write_text(json.dumps(rows, indent=2))
    failed = 0
    for i, s in enumerate(rows):
        errs = "  ".join(
            f"w*_{m}={s['rel_error'][m]:.3e}" for m in MODE_NAMES if s["rel_error"].get(m) is not None
        )
        ok = all(s["within_tolerance"].values())
        failed += not ok
        click.echo(f"[{i:03d}] nu={s['transport']['nu']:.6g} kappa={s['transport']['kappa']:.6g} "
                   f"{errs}  {'ok' if ok else 'TOLERANCE FAILURE'}")
    if failed:
        raise ToleranceFailure(f"{failed} of {len(rows)} runs outside tolerance")


# --- velset ------------------------------------------------------------------


@main.group()
def velset():
    """Inspect, validate and derive velocity sets."""


def _load_set(name):
    if name.upper() in BUILTINS:
        return builtin(name)
    try:
        return read_velocity_set(name)
    except (OSError, ValueError) as exc:
        _fail(str(exc))


@velset.command("list")
def velset_list():
    """Print the built-in sets."""
    for name in BUILTINS:
        v = builtin(name)
        click.echo(f"{v.name:6s} D={v.dim} d={v.count:<3d} Q={v.degree} r={v.scale:.17g}")


@velset.command("validate")
@click.argument("name")
@click.option("--degree", type=int, default=None, help="Degree to check (default: declared).")
@click.option("--tol", type=float, default=1e-12, show_default=True)
def velset_validate(name, degree, tol):
    """Check Gaussian-moment exactness of a built-in set or a set file."""
    v = _load_set(name)
    rep = validate(v, degree, tol)
    click.echo(f"{v.name}: declared degree {v.degree}, checked degree {rep.degree}, "
               f"max defect {rep.max_defect:.3e}")
    if not rep.passed:
        click.echo(f"first failing monomial exponents {rep.first_failure} "
                   f"(defect {rep.failure_defect:.3e})")
        raise ToleranceFailure(f"{v.name} is not exact to degree {rep.degree}")


def _parse_groups(text, dim=None):
    groups = []
    for part in text.split(";"):
        part = part.strip()
        if part:
            groups.append(tuple(int(x) for x in part.split(",")))
    if not groups or len({len(g) for g in groups}) != 1:
        _fail("groups must be ';'-separated representatives of equal length, e.g. '0,0;1,0;1,1'")
    return groups


@velset.command("derive")
@click.option("--groups", required=True, help="Representatives, e.g. '0,0;1,0;1,1'.")
@click.option("--degree", type=int, required=True)
@click.option("--name", default=None)
@click.option("-o", "--output", "output", required=True, type=click.Path(dir_okay=False))
def velset_derive(groups, degree, name, output):
    """Solve for weights and scale, then write a set file."""
    try:
        v = derive_velocity_set(_parse_groups(groups), degree, name)
    except InfeasibleQuadratureError as exc:
        _fail(f"{exc} (residual {exc.residual})")
    write_velocity_set(v, output)
    rep = validate(v)
    click.echo(f"{v.name}: d={v.count} r={v.scale:.17g} max defect {rep.max_defect:.3e} -> {output}")


# --- sim ---------------------------------------------------------------------


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--set", "overrides", multiple=True, help="Override a field, e.g. sim.steps=500")
@click.option("--out", "out_dir", default=None)
def sim(config_path, overrides, out_dir):
    """Free-form periodic simulation with conservation diagnostics and checkpoints."""
    cfg = cfgmod.load_config(config_path, overrides)
    if cfg["sweep"]:
        raise ConfigError("sweep: not supported by sim")
    out_dir = Path(out_dir or cfg["output"]["dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    vset = cfgmod.resolve_velset(cfg["velset"], Path(config_path).parent)
    exp = cfgmod.build_experiment(cfg, vset)
    spec, gas, N = exp.spec, exp.gas, exp.N
    simcfg = cfg["sim"]
    if simcfg["restart"]:
        ck = load_checkpoint(simcfg["restart"], vset)
        if (ck.N, ck.S) != (N, gas.S):
            raise ConfigError(f"sim.restart: checkpoint has N={ck.N}, S={ck.S}")
        state = ck.state
    else:
        state = init_plane_wave(exp, vset)
    (out_dir / "config.json").write_text(json.dumps(cfgmod.echo(cfg), indent=2))
    prefix = cfg["output"]["prefix"]
    diag = out_dir / f"{prefix}_diagnostics.csv"
    every, ck_every = simcfg["diagnostics_every"], simcfg["checkpoint_every"]
    D = vset.dim
    with open(diag, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "mass"] + [f"momentum_{a}" for a in range(D)] + ["energy", "max_u_perp"])

        def record(st):
            tot = conserved_totals(st)
            amp = extract_amplitudes(st, exp.wave_index, exp.base_flow, gas, exp.base_rho, exp.base_theta)
            w.writerow([st.time] + [f"{x:.17g}" for x in [tot["mass"], *tot["momentum"], tot["energy"],
                                                         abs(amp[2])]])

        record(state)
        target = state.time + simcfg["steps"]
        while state.time < target:
            state = step(state, spec, gas, N)
            if state.time % every == 0:
                record(state)
            if ck_every and state.time % ck_every == 0:
                save_checkpoint(out_dir / f"{prefix}_{state.time:08d}.ckpt", state, N, gas.S)
    save_checkpoint(out_dir / f"{prefix}_final.ckpt", state, N, gas.S)
    click.echo(f"ran to step {state.time}; diagnostics in {diag}")


def run(argv=None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        main.main(args=argv, standalone_mode=False)
    except ToleranceFailure as exc:
        click.echo(f"tolerance failure: {exc}", err=True)
        return EXIT_TOLERANCE
    except click.exceptions.Exit as exc:
        return EXIT_OK if exc.exit_code == 0 else EXIT_ERROR
    except click.Abort:
        return EXIT_ERROR
    except click.ClickException as exc:
        exc.show()
        return EXIT_ERROR
    except (ConfigError, ValueError, OSError, RuntimeError, FloatingPointError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_ERROR
    return EXIT_OK


def entry():
    sys.exit(run())


if __name__ == "__main__":
    entry()
