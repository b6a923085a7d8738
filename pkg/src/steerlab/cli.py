"""Command-line front end: ``steerlab <subcommand> ...``.

Tabular output is CSV (LF newlines, 12 significant digits). When ``--out`` is
given, a ``<out>.manifest.json`` is written after the output.

Exit codes: 0 success, 2 argument error, 3 numeric non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, cvsteer, steer, tomo
from .protosim import ProtocolConfig, run_protocol

EXIT_ARGS = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def write_csv(header, rows, out) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, newline="")
    return text


def parse_grid(text: str) -> np.ndarray:
    """``a,b,c`` for explicit values or ``lo:hi:steps`` for an inclusive linspace."""
    try:
        if ":" in text:
            lo, hi, steps = text.split(":")
            return np.linspace(float(lo), float(hi), int(steps))
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise UsageError(f"cannot parse grid {text!r}: {exc}") from None


def parse_point(text: str) -> tuple[float, float]:
    try:
        mu, p = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--point expects 'mu,p', got {text!r}") from None
    return mu, p


# ---------------------------------------------------------------------------
# subcommands; each returns the list of files it wrote


def cmd_region(args) -> list[str]:
    if args.point:
        mu, p = parse_point(args.point)
        try:
            verdict = steer.classify(mu, p)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        print(verdict.label.value)
        if args.out is None:
            return []
    if not (0.5 <= args.mu_min < args.mu_max <= 1.0):
        raise UsageError("need 0.5 <= mu-min < mu-max <= 1")
    if args.steps < 2:
        raise UsageError("--steps must be >= 2")
    rows = steer.boundary_curves(np.linspace(args.mu_min, args.mu_max, args.steps))
    write_csv(("mu", "p_proj_boundary", "p_povm_boundary"), rows, args.out)
    return [args.out] if args.out else []


def cmd_bound(args) -> list[str]:
    if args.n not in steer.SUPPORTED_N:
        raise UsageError(f"--n must be one of {steer.SUPPORTED_N}")
    etas = parse_grid(args.eta_grid)
    if len(etas) == 0 or np.any(etas <= 0) or np.any(etas > 1):
        raise UsageError("eta grid values must lie in (0, 1]")
    axes = steer.measurement_axes(args.n)
    rows = [(args.n, e, steer.deterministic_bound(axes, e).value, steer.asymptotic_bound(e)) for e in etas]
    write_csv(("n", "eta", "c_n", "c_inf"), rows, args.out)
    return [args.out] if args.out else []


def cmd_simulate(args) -> list[str]:
    try:
        raw = json.loads(Path(args.config).read_text())
        if args.seed_given:
            raw["seed"] = args.seed
        cfg = ProtocolConfig.from_dict(raw).with_seed()
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"bad config {args.config}: {exc}") from None
    args.seed = cfg.seed
    rec = run_protocol(cfg)
    text = rec.to_json()
    if args.out is None:
        sys.stdout.write(text)
        return []
    Path(args.out).write_text(text)
    return [args.out]


def cmd_cv(args) -> list[str]:
    if args.vsq < 1:
        raise UsageError("--vsq must be >= 1")
    grid = parse_grid(args.t_grid)
    if len(grid) == 0 or np.any(grid < -1e-12) or np.any(grid > 1 + 1e-12):
        raise UsageError("T grid values must lie in [0, 1]")
    rows = cvsteer.transmission_sweep(args.vsq, grid, n_trunc=args.n_trunc)
    write_csv(cvsteer.SWEEP_COLUMNS, rows, args.out)
    return [args.out] if args.out else []


def cmd_fit(args) -> list[str]:
    try:
        counts = tomo.TomographyCounts.from_csv(args.counts)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"bad counts file {args.counts}: {exc}") from None
    rho = tomo.reconstruct(counts)
    fit = tomo.werner_fit(rho, restarts=args.restarts, seed=args.seed)
    text = json.dumps(fit.to_json(), indent=2) + "\n"
    if args.out is None:
        sys.stdout.write(text)
        return []
    Path(args.out).write_text(text)
    return [args.out]


def cmd_tomo_sim(args) -> list[str]:
    rng = np.random.default_rng(args.seed)
    U = tomo.random_su2(rng) if args.rotate else np.eye(2)
    rho = tomo.rotated_werner(args.mu, U)
    if args.noiseless:
        counts = tomo.expected_counts(rho, args.shots)
    else:
        counts = tomo.simulate_counts(rho, args.shots, seed=rng)
    counts.to_csv(args.out)
    return [args.out]


def cmd_check(args) -> list[str]:
    from .checks import run_checks

    failures = run_checks(verbose=True)
    if failures:
        raise NumericFailure(f"{failures} check(s) failed")
    return []


class NumericFailure(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="steerlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"steerlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_required=False):
        p.add_argument("--out", required=out_required, help="output path (default: stdout)")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("region", help="steering-regime boundaries in the (mu, p) plane")
    p.add_argument("--mu-min", type=float, default=0.5)
    p.add_argument("--mu-max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=51)
    p.add_argument("--point", help="classify a single 'mu,p' point and print its label")
    common(p)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("bound", help="cheating bound C_n(eta) table")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--eta-grid", default="0.05:1:20")
    common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("simulate", help="Monte Carlo steering run from a JSON config")
    p.add_argument("--config", required=True)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cv", help="pseudo-spin and Reid steering sweep over transmission")
    p.add_argument("--vsq", type=float, default=2.0)
    p.add_argument("--t-grid", default="0:1:21")
    p.add_argument("--n-trunc", type=int, default=cvsteer.DEFAULT_CUTOFF)
    common(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("fit", help="nearest rotated Werner state from tomography counts")
    p.add_argument("--counts", required=True)
    p.add_argument("--restarts", type=int, default=20)
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("tomo-sim", help="write simulated tomography counts for a Werner state")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--shots", type=int, default=100_000)
    p.add_argument("--rotate", action="store_true", help="apply a random local unitary on Alice")
    p.add_argument("--noiseless", action="store_true", help="write expected counts instead of Poisson draws")
    common(p, out_required=True)
    p.set_defaults(func=cmd_tomo_sim)

    p = sub.add_parser("check", help="run the built-in invariant and oracle checks")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_check, out=None)
    return ap


def write_manifest(args, outputs: list[str], elapsed: float) -> None:
    params = {k: v for k, v in vars(args).items() if k not in ("func", "seed_given")}
    manifest = {
        "subcommand": args.command,
        "parameters": params,
        "outputs": outputs,
        "seed": args.seed,
        "version": __version__,
        "wall_clock_seconds": elapsed,
    }
    Path(f"{args.out}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = secrets.randbits(63)
    start = time.perf_counter()
    try:
        outputs = args.func(args)
    except UsageError as exc:
        print(f"steerlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (cvsteer.ConvergenceError, tomo.FitConvergenceError, NumericFailure) as exc:
        print(f"steerlab {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"steerlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    if args.out is not None and outputs:
        write_manifest(args, outputs, time.perf_counter() - start)
    return 0


if __name__ == "__main__":
    sys.exit(main())
