"""Batch command surface: load, classify, optimize, verify, report.

Exit codes form a stable contract: 0 for success or "inside", 1 for
"outside" or a failed theorem-backed check, 2 for input errors, 3 for
numeric/optimization failures.  Reports are JSON by default; ``--format
text`` renders the same content for humans.  Wall time goes to stderr so
reports stay byte-identical for a fixed seed.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import serialize as sz
from . import suite as suite_mod
from .assemblages import is_unsteerable, is_urns, relative_entropy_steering_ub
from .behaviors import is_nonsignalling
from .divergence import ElrConfig, relative_entropy_nl
from .errors import BoxcastError, OptimizationError, SolverError, ValidationError
from .polytopes import local_deterministic_vertices, lrns_vertices_222, membership
from . import fixtures as fixtures_mod

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _apply_thread_cap():
    cap = os.environ.get("BOXCAST_THREADS")
    if cap:
        for var in _THREAD_VARS:
            os.environ.setdefault(var, cap)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _render_text(report: dict, indent: int = 0) -> str:
    lines = []
    pad = "  " * indent
    for key, val in report.items():
        if isinstance(val, dict):
            lines.append(f"{pad}{key}:")
            lines.append(_render_text(val, indent + 1))
        elif isinstance(val, list) and val and isinstance(val[0], dict):
            lines.append(f"{pad}{key}:")
            for item in val:
                lines.append(_render_text(item, indent + 1))
                lines.append("")
        else:
            lines.append(f"{pad}{key}: {val}")
    return "\n".join(line for line in lines if line is not None)


def _emit(report: dict, fmt: str, out: str | None, started: float) -> None:
    payload = _jsonable(report)
    if fmt == "json":
        text = json.dumps(payload, indent=1, sort_keys=True) + "\n"
    else:
        text = _render_text(payload) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)
    click.echo(f"wall_time_s: {time.time() - started:.3f}", err=True)


@click.group()
def main():
    """Toolkit for local broadcasting limits of boxes and assemblages."""
    _apply_thread_cap()


@main.command()
@click.argument("path", type=click.Path(exists=False))
@click.option("--kind", type=click.Choice(["ns", "local", "lrns", "unsteerable", "urns"]), required=True)
@click.option("--tol", type=float, default=1e-7, show_default=True)
@click.option("--iters", type=int, default=50_000, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json")
@click.option("--out", type=click.Path(), default=None)
def check(path, kind, tol, iters, fmt, out):
    """Classify a behavior or assemblage file against a free set."""
    started = time.time()
    target = Path(path)
    try:
        data = sz.load_json(target)
        report: dict = {"command": "check", "kind": kind, "input_digest": _digest(target)}
        if kind in ("ns", "local", "lrns"):
            b = sz.behavior_from_dict(data)
            if kind == "ns":
                ok, worst = is_nonsignalling(b)
                report["inside"] = ok
                report["worst_violation"] = worst
            else:
                cat = lrns_vertices_222() if kind == "lrns" else local_deterministic_vertices(b.scenario)
                res = membership(b, cat, tol=tol)
                report["inside"] = res.inside
                report["residual"] = res.residual
                if res.inside:
                    report["weights_head"] = res.weights[:16]
                else:
                    report["margin"] = res.margin
                    report["threshold"] = res.threshold
                    report["functional"] = res.functional
        else:
            asm = sz.assemblage_from_dict(data)
            res = is_urns(asm, iters=iters) if kind == "urns" else is_unsteerable(asm, iters=iters)
            report["inside"] = res.found
            report["status"] = res.status
            report["residual"] = res.residual
            if res.functional is not None:
                report["functional_value"] = res.functional.value
                report["functional_bound"] = res.functional.bound
                report["functional_violated"] = res.functional.violated
        inside = bool(report["inside"])
    except (ValidationError, FileNotFoundError, OSError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(2)
    except (SolverError, OptimizationError) as exc:
        click.echo(f"numeric error: {exc}", err=True)
        sys.exit(3)
    _emit(report, fmt, out, started)
    sys.exit(0 if inside else 1)


@main.command()
@click.argument("path", type=click.Path(exists=False))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--iters", type=int, default=20_000, show_default=True)
@click.option("--tol", type=float, default=1e-7, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json")
@click.option("--out", type=click.Path(), default=None)
@click.option("--witness-out", type=click.Path(), default=None)
def elr(path, seed, iters, tol, fmt, out, witness_out):
    """Relative entropy of nonlocality of a behavior file."""
    started = time.time()
    target = Path(path)
    try:
        b = sz.behavior_from_dict(sz.load_json(target))
        if b.scenario.num_sites == 4:
            cat = lrns_vertices_222()
        else:
            cat = local_deterministic_vertices(b.scenario)
        cfg = ElrConfig(iters=iters, gap_tol=tol, seed=seed)
        res = relative_entropy_nl(b, cat, cfg)
    except (ValidationError, FileNotFoundError, OSError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(2)
    except (SolverError, OptimizationError) as exc:
        click.echo(f"optimization error: {exc}", err=True)
        sys.exit(3)
    report = {
        "command": "elr",
        "input_digest": _digest(target),
        "seed": seed,
        "value": res.value,
        "lower_bound": res.gap_certificate,
        "extrapolated": res.extrapolated,
        "ladder": list(res.ladder),
        "witness_weights_nonzero": int(np.sum(res.weights > 1e-12)),
    }
    if witness_out:
        sz.save_json(sz.behavior_to_dict(res.witness), witness_out)
        report["witness_file"] = str(witness_out)
    _emit(report, fmt, out, started)
    sys.exit(0)


@main.command()
@click.argument("path", type=click.Path(exists=False))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--iters", type=int, default=2000, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json")
@click.option("--out", type=click.Path(), default=None)
@click.option("--witness-out", type=click.Path(), default=None)
def steering(path, seed, iters, fmt, out, witness_out):
    """Upper bound on the relative entropy of steering of an assemblage file."""
    started = time.time()
    target = Path(path)
    try:
        asm = sz.assemblage_from_dict(sz.load_json(target))
        from .assemblages import SteeringUbConfig

        res = relative_entropy_steering_ub(asm, SteeringUbConfig(iters=iters, seed=seed))
    except (ValidationError, FileNotFoundError, OSError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(2)
    except (SolverError, OptimizationError) as exc:
        click.echo(f"optimization error: {exc}", err=True)
        sys.exit(3)
    report = {
        "command": "steering",
        "input_digest": _digest(target),
        "seed": seed,
        "upper_bound": res.upper_bound,
        "shortcut": res.shortcut,
        "iterations": res.iterations,
    }
    if witness_out:
        sz.save_json(sz.assemblage_to_dict(res.witness), witness_out)
        report["witness_file"] = str(witness_out)
    _emit(report, fmt, out, started)
    sys.exit(0)


@main.command("verify-suite")
@click.option("--seed", type=int, default=2024, show_default=True)
@click.option("--scope", type=click.Choice(["boxes", "assemblages", "all"]), default="all")
@click.option("--scale", type=float, default=1.0, show_default=True,
              help="Multiply every instance count (minimum one instance).")
@click.option("--tamper", type=str, default=None, hidden=True,
              help="Deliberately corrupt one named check (negative control).")
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json")
@click.option("--out", type=click.Path(), default=None)
def verify_suite(seed, scope, scale, tamper, fmt, out):
    """Run every module property plus the two broadcast demos."""
    started = time.time()
    try:
        report = suite_mod.run_suite(seed=seed, scope=scope, scale=scale, tamper=tamper)
    except BoxcastError as exc:
        click.echo(f"numeric error: {exc}", err=True)
        sys.exit(3)
    report = {"command": "verify-suite", **report}
    _emit(report, fmt, out, started)
    sys.exit(0 if report["failed"] == 0 else 1)


@main.command()
@click.argument("directory", type=click.Path())
@click.option("--seed", type=int, default=2024, show_default=True)
def fixtures(directory, seed):
    """Generate the deterministic fixture files."""
    written = fixtures_mod.generate(directory, seed=seed)
    for name in written:
        click.echo(name)


if __name__ == "__main__":
    main()
