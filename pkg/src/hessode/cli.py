"""Command-line interface.

Subcommands: ``hessian`` (gradient/Hessian of orbit nonclosure by dp, bp2,
or fd), ``find-orbit`` (BFGS search plus optional eigenvector deformation),
``plot`` (SVG orbit tracks), ``bench`` (dp-vs-bp2 timing and agreement on
random quadratic ODEs), and ``tcd-check`` (notation checker).  Every
subcommand writes a run manifest next to its output; rerunning the same
invocation reproduces outputs bitwise.

Exit codes: 0 ok, 1 check failures, 2 usage, 3 solver failure,
4 non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from . import __version__
from . import backend as _backend
from .bp2 import bp2_hessian, nc_gradient
from .dp import dp_hessian_two_point
from .errors import DidNotConverge, HessodeError
from .fd import fd_grad, fd_hessian
from .ode import IntegratorConfig, integrate
from .orbit import (FLAT_THRESHOLD_DEFAULT, OrbitProblem, deform_and_reconverge,
                    eigh, find_orbit, mass_tracks)
from .svg import render_tracks
from .systems import SYSTEM_TAGS, system_by_tag
from .tcd import check_document
from .tcd.diagnostics import Severity, format_line, to_json
from .twopoint import HessianResult, l2_loss

SCHEMA = "hessode/1"


def _parse_vec(text: str) -> np.ndarray:
    if text.startswith("@"):
        with open(text[1:], "r", encoding="utf-8") as fh:
            raw = fh.read()
        parts = raw.replace(",", " ").split()
    else:
        parts = text.split(",")
    return np.array([float(p) for p in parts])


def _fmt_vec(vec) -> list:
    return [float(v) for v in np.asarray(vec).ravel()]


def _count_flat(eigenvalues, threshold=FLAT_THRESHOLD_DEFAULT) -> int:
    w = np.asarray(eigenvalues, dtype=float)
    lam_max = float(np.max(w)) if w.size else 0.0
    return int(np.sum(np.abs(w) < threshold * max(1.0, lam_max)))


def _write_manifest(out_path: str, manifest: dict) -> None:
    manifest = dict(manifest)
    manifest["schema"] = SCHEMA
    manifest["version"] = __version__
    manifest["backend"] = _backend.active_backend()
    with open(out_path + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _config_from_args(args) -> IntegratorConfig:
    return IntegratorConfig(rtol=args.rtol, atol=args.atol)


def _system_from_args(args):
    return system_by_tag(args.system, dim=getattr(args, "dim", 10),
                         max_order=getattr(args, "order", 2),
                         seed=getattr(args, "seed", 0))


def _add_common(p, y0_flag):
    p.add_argument("--system", required=True, choices=SYSTEM_TAGS)
    p.add_argument(y0_flag, required=True,
                   help="comma-separated coordinates, or @file")
    p.add_argument("--t-final", type=float, required=True)
    p.add_argument("--rtol", type=float, default=1e-10)
    p.add_argument("--atol", type=float, default=1e-10)
    p.add_argument("--dim", type=int, default=10, help="randpoly dimension")
    p.add_argument("--seed", type=int, default=0, help="randpoly seed")
    p.add_argument("--order", type=int, default=2, choices=(2, 3),
                   help="randpoly polynomial order")
    p.add_argument("--out", required=True)


# --- hessian ------------------------------------------------------------------

def cmd_hessian(args) -> int:
    system = _system_from_args(args)
    y0 = _parse_vec(args.y0)
    config = _config_from_args(args)
    loss = l2_loss()
    times = {}
    t0 = time.perf_counter()
    if args.method == "dp":
        result = dp_hessian_two_point(system, loss, y0, args.t_final, config)
    elif args.method == "bp2":
        result = bp2_hessian(system, loss, y0, args.t_final, config,
                             jobs=args.jobs)
    else:
        def nc_value(x):
            fwd = integrate(system, x, 0.0, args.t_final, config)
            return loss.value(x, fwd.endpoint)

        value = nc_value(y0)
        gradient = fd_grad(nc_value, y0)
        hessian = fd_hessian(nc_value, y0)
        result = HessianResult.from_raw(value, gradient, hessian, "fd")
    times["hessian_seconds"] = time.perf_counter() - t0
    w, _ = eigh(result.hessian_sym)
    value = result.value
    if not np.isfinite(value):
        fwd = integrate(system, y0, 0.0, args.t_final, config)
        value = loss.value(y0, fwd.endpoint)
    payload = {
        "schema": SCHEMA,
        "system": args.system,
        "method": args.method,
        "t_final": args.t_final,
        "value": float(value),
        "gradient": _fmt_vec(result.gradient),
        "eigenvalues": _fmt_vec(w),
        "n_flat": _count_flat(w),
        "asymmetry": result.asymmetry,
        "hessian": _fmt_vec(result.hessian_raw),
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    _write_manifest(args.out, {
        "subcommand": "hessian", "system": args.system,
        "y0": _fmt_vec(y0), "t_final": args.t_final, "method": args.method,
        "rtol": args.rtol, "atol": args.atol, "seed": args.seed,
        "dim": args.dim, "order": args.order, "wall_times": times,
    })
    return 0


# --- find-orbit ------------------------------------------------------------------

def _report_payload(report) -> dict:
    return {
        "y0": _fmt_vec(report.y0),
        "nc_value": report.nc_value,
        "grad_norm": report.grad_norm,
        "eigenvalues": _fmt_vec(report.eigenvalues),
        "n_flat": report.n_flat,
        "n_calls": report.n_calls,
        "asymmetry": report.hessian.asymmetry,
    }


def cmd_find_orbit(args) -> int:
    system = _system_from_args(args)
    y0_init = _parse_vec(args.y0_init)
    config = _config_from_args(args)
    problem = OrbitProblem(system=system, T=args.t_final, config=config)
    times = {}
    payload = {"schema": SCHEMA, "system": args.system, "t_final": args.t_final}
    status = 0
    t0 = time.perf_counter()
    try:
        report = find_orbit(problem, y0_init, gtol=args.gtol,
                            max_iters=args.max_iters)
        payload["report"] = _report_payload(report)
    except (DidNotConverge, HessodeError) as exc:
        best = getattr(exc, "best", None)
        payload["error"] = str(exc)
        if best is not None:
            payload["best"] = {k: (_fmt_vec(v) if hasattr(v, "__len__") else v)
                               for k, v in best.items()}
        report = None
        status = 4
    times["find_orbit_seconds"] = time.perf_counter() - t0
    if report is not None and args.deform_eig is not None:
        t0 = time.perf_counter()
        deformed = deform_and_reconverge(problem, report, args.deform_eig,
                                         args.deform_step, gtol=args.gtol)
        times["deform_seconds"] = time.perf_counter() - t0
        payload["deformed"] = _report_payload(deformed)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    _write_manifest(args.out, {
        "subcommand": "find-orbit", "system": args.system,
        "y0_init": _fmt_vec(y0_init), "t_final": args.t_final,
        "gtol": args.gtol, "rtol": args.rtol, "atol": args.atol,
        "deform_eig": args.deform_eig, "deform_step": args.deform_step,
        "seed": args.seed, "dim": args.dim, "order": args.order,
        "wall_times": times,
    })
    return status


# --- plot ---------------------------------------------------------------------

def cmd_plot(args) -> int:
    system = _system_from_args(args)
    y0 = _parse_vec(args.y0)
    try:
        pi, pj = (int(p) for p in args.projection.split(","))
    except ValueError:
        print(f"invalid projection {args.projection!r} (need 'i,j')",
              file=sys.stderr)
        return 2
    samples = max(600, 12 * max(args.markers, 1))
    config = IntegratorConfig(rtol=args.rtol, atol=args.atol,
                              dense_samples=samples)
    t0 = time.perf_counter()
    traj = integrate(system, y0, 0.0, args.t_final, config)
    tracks = mass_tracks(args.system, traj.states)
    if not all(max(pi, pj) < t.shape[1] for t in tracks):
        print(f"projection {args.projection!r} out of range for "
              f"{args.system} position tracks", file=sys.stderr)
        return 2
    lines = [t[:, (pi, pj)] for t in tracks]
    markers = None
    if args.markers > 0:
        stride = max(1, samples // args.markers)
        markers = [line[::stride][: args.markers] for line in lines]
    doc = render_tracks(lines, markers)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(doc)
    _write_manifest(args.out, {
        "subcommand": "plot", "system": args.system, "y0": _fmt_vec(y0),
        "t_final": args.t_final, "projection": [pi, pj],
        "markers": args.markers, "rtol": args.rtol, "atol": args.atol,
        "seed": args.seed, "dim": args.dim, "order": args.order,
        "wall_times": {"plot_seconds": time.perf_counter() - t0},
    })
    return 0


# --- bench ------------------------------------------------------------------------

def _parse_dims(text: str):
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 10
        return list(range(start, stop + 1, step))
    return [int(p) for p in text.split(",")]


def _checksum(arr) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr, dtype=float).tobytes()) \
        .hexdigest()[:16]


def cmd_bench(args) -> int:
    from .twopoint import endpoint_loss

    if args.backend != "auto":
        _backend.set_backend(args.backend)
    dims = _parse_dims(args.dims)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    loss = endpoint_loss()
    timing_cfg = IntegratorConfig(rtol=1e-5, atol=1e-5)
    agree_cfg = IntegratorConfig(rtol=1e-10, atol=1e-10)
    rows = []
    status = 0
    for dim in dims:
        rng = np.random.default_rng(args.seed + dim)
        system = system_by_tag("randpoly", dim=dim, seed=args.seed + dim)
        y0 = rng.standard_normal(dim)
        results = {}
        for method in methods:
            run = (lambda: dp_hessian_two_point(system, loss, y0, args.t_max,
                                                timing_cfg)) \
                if method == "dp" else \
                (lambda: bp2_hessian(system, loss, y0, args.t_max, timing_cfg))
            try:
                best = float("inf")
                for _ in range(args.repeats):
                    t0 = time.perf_counter()
                    result = run()
                    best = min(best, time.perf_counter() - t0)
                results[method] = result
                rows.append((dim, method, f"{best:.6e}",
                             _checksum(result.hessian_raw), ""))
            except HessodeError as exc:
                print(f"dim {dim} method {method}: {exc}", file=sys.stderr)
                rows.append((dim, method, "failed", "", ""))
                status = 3
        if "dp" in results and "bp2" in results:
            hd = dp_hessian_two_point(system, loss, y0, args.t_max, agree_cfg)
            hb = bp2_hessian(system, loss, y0, args.t_max, agree_cfg)
            agreement = float(np.max(np.abs(hd.hessian_raw - hb.hessian_raw)))
            rows.append((dim, "dp_vs_bp2", "", "", f"{agreement:.6e}"))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("dim,method,best_seconds,checksum,agreement\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")
    _write_manifest(args.out, {
        "subcommand": "bench", "dims": dims, "seed": args.seed,
        "repeats": args.repeats, "methods": methods, "t_max": args.t_max,
        "bench_backend": _backend.active_backend(),
        "wall_times": {},
    })
    return status


# --- tcd-check ---------------------------------------------------------------------

def cmd_tcd_check(args) -> int:
    any_errors = False
    collected = []
    for path in args.files:
        try:
            with open(path, "r", encoding="utf-8", errors="strict") as fh:
                text = fh.read()
        except OSError as exc:
            print(f"{path}: unreadable: {exc}", file=sys.stderr)
            return 2
        diags = check_document(text, mode=args.mode)
        collected.append((path, diags))
        for d in diags:
            if d.severity is Severity.ERROR:
                any_errors = True
    if args.json:
        merged = []
        for path, diags in collected:
            merged.extend(json.loads(to_json(diags, path)))
        print(json.dumps(merged, indent=2))
    else:
        for path, diags in collected:
            for d in diags:
                print(format_line(d, path))
    return 1 if any_errors else 0


# --- driver --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hessode",
        description="Gradients and Hessians through reversible ODEs; "
                    "closed-orbit search and spectra; notation checking.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("hessian", help="orbit-nonclosure gradient + Hessian")
    _add_common(p, "--y0")
    p.add_argument("--method", choices=("dp", "bp2", "fd"), default="bp2")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_hessian)

    p = sub.add_parser("find-orbit", help="BFGS orbit search")
    _add_common(p, "--y0-init")
    p.add_argument("--gtol", type=float, default=1e-12)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--deform-eig", type=int, default=None)
    p.add_argument("--deform-step", type=float, default=-0.02)
    p.set_defaults(func=cmd_find_orbit)

    p = sub.add_parser("plot", help="SVG orbit tracks")
    _add_common(p, "--y0")
    p.add_argument("--projection", default="0,1",
                   help="pair of per-mass position coordinates, e.g. 0,1")
    p.add_argument("--markers", type=int, default=20,
                   help="uniformly-time-spaced markers per track (0 = none)")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("bench", help="dp vs bp2 timing on random quadratic ODEs")
    p.add_argument("--dims", default="10:150:10",
                   help="comma list or start:stop[:step]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--methods", default="dp,bp2")
    p.add_argument("--t-max", type=float, default=0.2)
    p.add_argument("--backend", choices=("auto", "compiled", "python"),
                   default="auto")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("tcd-check", help="check notation files")
    p.add_argument("--mode", choices=("whole", "fenced"), default="whole")
    p.add_argument("--json", action="store_true")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_tcd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HessodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
