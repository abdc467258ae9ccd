"""Command-line front end: validate, bounds, certify, simulate, find-periodic.

Exit codes: 0 success, 2 validation or configuration problem, 3 invalid
certificate or degenerate box, 4 runtime failure (blow-up, non-convergence,
orbit outside the box).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

import numpy as np

from .bounds import DegenerateBoxError, compute_bounds, miranda_certificate
from .dde import BlowUpError, ConfigurationError, HistorySegment, default_step, integrate
from .io import ConfigError, RunConfig, load_config, write_csv, write_json
from .model import ImageContainmentError
from .periodic import NonConvergenceError, box_containment, find_periodic, segment_span
from .validation import check_conditions

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CERTIFICATE = 3
EXIT_RUNTIME = 4


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _build_config(args) -> RunConfig:
    try:
        cfg = load_config(args.config)
        overrides = {
            "lam": args.lam,
            "tol": args.tol,
            "step": args.step,
            "max_periods": args.max_periods,
            "seed": args.seed,
            "out": args.out,
        }
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(cfg, **overrides) if overrides else cfg
    except FileNotFoundError as exc:
        raise _Exit(EXIT_CONFIG, f"config not found: {exc.filename}") from exc
    except ConfigError as exc:
        raise _Exit(EXIT_CONFIG, str(exc)) from exc
    except DegenerateBoxError as exc:
        raise _Exit(EXIT_CERTIFICATE, f"degenerate box at component {exc.index}: {exc}") from exc


def _validated(cfg: RunConfig, out: Path):
    report = check_conditions(cfg.model, delta=cfg.delta, grid=cfg.grid, seed=cfg.seed)
    write_json(out / "validation.json", report.to_dict())
    return report


def _require_valid(cfg: RunConfig, out: Path) -> None:
    report = _validated(cfg, out)
    if not report.ok:
        for line in report.failures():
            print(line)
        raise _Exit(EXIT_CONFIG, "model fails the structural hypotheses (see validation.json)")


def _box(cfg: RunConfig):
    if cfg.box is not None:
        return cfg.box
    try:
        return compute_bounds(cfg.model, cfg.delta, cfg.grid)
    except ImageContainmentError as exc:
        raise _Exit(EXIT_CONFIG, f"image-containment: {exc}") from exc
    except DegenerateBoxError as exc:
        raise _Exit(EXIT_CERTIFICATE, f"degenerate box at component {exc.index}: {exc}") from exc


def _certify(cfg: RunConfig, out: Path):
    box = _box(cfg)
    cert = miranda_certificate(cfg.model, box, cfg.face_samples, cfg.lambda_steps, cfg.quad_nodes)
    write_json(out / "certificate.json", cert.to_dict())
    return cert


def cmd_validate(cfg: RunConfig, out: Path) -> int:
    report = _validated(cfg, out)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_CONFIG


def cmd_bounds(cfg: RunConfig, out: Path) -> int:
    box = _box(cfg)
    write_json(out / "bounds.json", box.to_dict())
    for k, (lo, hi) in enumerate(zip(box.m, box.M)):
        print(f"x{k}: m = {lo:.12g}  M = {hi:.12g}")
    return EXIT_OK


def cmd_certify(cfg: RunConfig, out: Path) -> int:
    _require_valid(cfg, out)
    cert = _certify(cfg, out)
    for k in range(cfg.model.dim):
        print(f"face {k}: min phi on lower = {cert.lower_min[k]:+.6e}  max phi on upper = {cert.upper_max[k]:+.6e}")
    print(f"homotopy min |h| = {cert.homotopy_min:.6e}")
    if not cert.valid:
        for v in cert.violations:
            print(f"violation: {v}")
        print("certificate INVALID")
        return EXIT_CERTIFICATE
    print(f"certificate valid, degree = {cert.degree}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    model = cfg.model
    step = cfg.step if cfg.step is not None else default_step(model)
    horizon = cfg.horizon if cfg.horizon is not None else 50 * model.T
    if cfg.history is not None:
        init = np.asarray(cfg.history, dtype=float)
    else:
        init = _box(cfg).center
    seg = HistorySegment.constant(init, 0.0, segment_span(model, step), step)
    try:
        traj = integrate(model, seg, horizon, step, cfg.lam)
    except ConfigurationError as exc:
        raise _Exit(EXIT_CONFIG, str(exc)) from exc
    except BlowUpError as exc:
        raise _Exit(EXIT_RUNTIME, str(exc)) from exc
    write_csv(out / "trajectory.csv", traj.times, traj.states)
    print(f"wrote {traj.nodes} rows to {out / 'trajectory.csv'}")
    return EXIT_OK


def cmd_find_periodic(cfg: RunConfig, out: Path) -> int:
    _require_valid(cfg, out)
    cert = _certify(cfg, out)
    if not cert.valid:
        for v in cert.violations:
            print(f"violation: {v}")
        raise _Exit(EXIT_CERTIFICATE, "certificate invalid; periodic search not attempted")
    try:
        orbit = find_periodic(cfg.model, cert.box, cfg.tol, cfg.max_periods, cfg.lam, cfg.step,
                              init=None if cfg.history is None else np.asarray(cfg.history, dtype=float),
                              quad_nodes=cfg.quad_nodes)
    except ConfigurationError as exc:
        raise _Exit(EXIT_CONFIG, str(exc)) from exc
    except BlowUpError as exc:
        raise _Exit(EXIT_RUNTIME, str(exc)) from exc
    except NonConvergenceError as exc:
        write_json(out / "orbit.json", {"converged": False, "message": str(exc),
                                        "residual_history": exc.residuals, "lambda": cfg.lam})
        raise _Exit(EXIT_RUNTIME, str(exc)) from exc
    report = box_containment(orbit, cert.box)
    times, states = orbit.orbit.window(0.0, orbit.orbit.t1)
    write_csv(out / "orbit.csv", times, states)
    meta = {"converged": True, **orbit.to_dict(), "containment": report.to_dict(), "degree": cert.degree}
    write_json(out / "orbit.json", meta)
    print(f"converged after {orbit.iterations} periods, residual {orbit.residual:.3e}")
    print("amplitude: " + ", ".join(f"{a:.6g}" for a in orbit.amplitude))
    print(f"box containment: {'pass' if report.ok else 'FAIL'}")
    return EXIT_OK if report.ok else EXIT_RUNTIME


COMMANDS = {
    "validate": cmd_validate,
    "bounds": cmd_bounds,
    "certify": cmd_certify,
    "simulate": cmd_simulate,
    "find-periodic": cmd_find_periodic,
}

HELP = {
    "validate": "check the structural hypotheses H1-H5 on the model",
    "bounds": "compute the a-priori box [m_k, M_k]",
    "certify": "face-sign certificate and homotopy scan on the box",
    "simulate": "integrate from a constant history and write trajectory.csv",
    "find-periodic": "certify, then iterate the period map to a periodic orbit",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run config or bare model file")
    common.add_argument("--out", default=None, help="output directory (default: config 'out', else ./out)")
    common.add_argument("--lambda", dest="lam", type=float, default=None, help="homotopy parameter in (0, 1]")
    common.add_argument("--tol", type=float, default=None, help="periodicity tolerance")
    common.add_argument("--step", type=float, default=None, help="integration step")
    common.add_argument("--max-periods", dest="max_periods", type=int, default=None)
    common.add_argument("--seed", type=int, default=None, help="seed for random validation probes")

    parser = argparse.ArgumentParser(
        prog="feedback-dde",
        description="Bounds, degree certificate and periodic orbits for cyclic feedback delay systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _build_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "effective_config.json", cfg.to_dict())
        start = time.perf_counter()
        code = COMMANDS[args.command](cfg, out)
        print(f"[{args.command}] done in {time.perf_counter() - start:.2f} s")
        return code
    except _Exit as exc:
        _err(str(exc))
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
