"""Command-line entry point.

Every command that writes a file also writes ``<file>.manifest.json`` (config
echo, versions, seeds, wall-clock, output list).  Exit status: 0 success,
1 failed experiment check or non-converged solve, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import tempfile
import time
from pathlib import Path

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _cap_threads():
    n = os.environ.get("ELLIPTLAB_THREADS")
    if n:
        if not n.isdigit() or int(n) < 1:
            raise UsageError(f"ELLIPTLAB_THREADS must be a positive integer, got {n!r}")
        for var in THREAD_VARS:
            os.environ.setdefault(var, n)


# ---------------------------------------------------------------------------
# output helpers


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return path


def _dump(obj):
    from .experiments import _clean

    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _versions():
    import matplotlib
    import numpy
    import scipy

    from . import __version__

    return {"python": platform.python_version(), "numpy": numpy.__version__, "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__, "elliptlab": __version__}


def _write_manifest(args, config, outputs, t0):
    if not outputs:
        return None
    manifest = {
        "command": args.command,
        "argv": args.argv,
        "config": config,
        "versions": _versions(),
        "seeds": {"seed": args.seed},
        "threads": os.environ.get("ELLIPTLAB_THREADS"),
        "wall_clock_seconds": round(time.perf_counter() - t0, 6),
        "outputs": [str(p) for p in outputs],
    }
    return _atomic_write(f"{outputs[0]}.manifest.json", _dump(manifest))


def _load_config(path, allowed):
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    unknown = sorted(set(cfg) - set(allowed))
    if unknown:
        raise UsageError(f"unknown config key(s) in {path}: {', '.join(unknown)}")
    return cfg


def _point(text):
    try:
        x, y = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from None
    return (x, y)


def _gamma(text):
    if text.lower() in ("inf", "infinity"):
        return float("inf")
    return float(text)


def _mesh_from_args(args):
    from .geometry import build_disc_mesh, read_mesh

    if args.mesh:
        return read_mesh(args.mesh)
    if args.rings:
        return build_disc_mesh(args.rings, args.sectors)
    raise UsageError("a mesh is required: pass --mesh FILE or --rings R [--sectors S]")


# ---------------------------------------------------------------------------
# commands


def cmd_mesh(args):
    from .geometry import build_disc_mesh, write_mesh

    mesh = build_disc_mesh(args.rings, args.sectors, args.grading)
    write_mesh(mesh, args.out)
    print(f"mesh: {mesh.num_nodes} nodes, {mesh.num_elements} triangles -> {args.out}")
    return EXIT_OK, {"rings": args.rings, "sectors": mesh.sector_count, "grading": args.grading}, [args.out]


SOLVE_KEYS = ("mesh", "integrand", "boundary", "source", "tol", "max_iter", "mu_floor")


def _problem_from_config(cfg):
    from .experiments import make_boundary, make_source
    from .geometry import FeFunction, build_disc_mesh
    from .integrand import integrand_from_dict
    from .solver import Problem

    m = cfg.get("mesh", {})
    mesh = build_disc_mesh(int(m.get("rings", 8)), m.get("sectors"), float(m.get("grading", 1.0)))
    I = integrand_from_dict(cfg["integrand"])
    b = cfg.get("boundary", {"name": "zero"})
    g = make_boundary(b.get("name", "zero"), b.get("params"))
    src = cfg.get("source")
    source = None
    if src:
        source = FeFunction(mesh, make_source(src.get("name", "zero"), src.get("params"))(mesh.nodes))
    return mesh, Problem.from_function(mesh, I, g, source=source)


def cmd_solve(args):
    from .solver import minimize, verify_first_order

    cfg = _load_config(args.config, SOLVE_KEYS)
    if "integrand" not in cfg:
        raise UsageError("solve config needs an 'integrand' object")
    mesh, P = _problem_from_config(cfg)
    tol = args.tol if args.tol is not None else float(cfg.get("tol", 1e-8))
    S = minimize(P, tol=tol, max_iter=int(cfg.get("max_iter", 100)), mu_floor=float(cfg.get("mu_floor", 1e-6)))
    resid, flagged = verify_first_order(P, S, seed=args.seed)
    out = {
        "config": cfg,
        "mesh": {"rings": mesh.ring_count, "sectors": mesh.sector_count,
                 "grading": float(cfg.get("mesh", {}).get("grading", 1.0))},
        "integrand": P.integrand.to_dict(),
        "solution": S.to_dict(),
        "first_order_residual": resid,
        "first_order_flagged": flagged,
    }
    _atomic_write(args.out, _dump(out))
    print(f"solve: energy={S.energy:.12g} grad_norm={S.grad_norm:.3e} converged={S.converged} -> {args.out}")
    return (EXIT_OK if S.converged else EXIT_FAIL), dict(cfg, tol=tol), [args.out]


def cmd_potential(args):
    from .potentials import PotentialQuery, havin_mazya_potential, read_field_csv, riesz_potential

    mesh = _mesh_from_args(args)
    f = read_field_csv(args.field, mesh)
    Q = PotentialQuery(args.sigma, args.theta, args.center, args.radius)
    result = {
        "havin_mazya": havin_mazya_potential(f.abs(), Q),
        "riesz": riesz_potential(f.abs(), Q.center, Q.radius),
        "query": {"sigma": Q.sigma, "theta": Q.theta, "center": list(Q.center), "radius": Q.radius},
    }
    text = _dump(result)
    print(text, end="")
    outputs = [_atomic_write(args.out, text)] if args.out else []
    return EXIT_OK, result["query"], outputs


def cmd_lorentz(args):
    from .potentials import LorentzParams, lorentz_norm_of_field, read_field_csv

    mesh = _mesh_from_args(args)
    f = read_field_csv(args.field, mesh)
    lp = LorentzParams(args.s, args.gamma)
    if (args.center is None) != (args.region_radius is None):
        raise UsageError("--center and --region-radius go together")
    norm = lorentz_norm_of_field(f, lp, args.center, args.region_radius, args.level_grid)
    result = {"lorentz_norm": norm, "s": args.s, "gamma": args.gamma}
    text = _dump(result)
    print(text, end="")
    outputs = [_atomic_write(args.out, text)] if args.out else []
    return EXIT_OK, {"s": args.s, "gamma": args.gamma}, outputs


def cmd_degiorgi(args):
    import numpy as np

    from .geometry import build_disc_mesh, discrete_ball
    from .truncation import (IterationParams, TruncationField, degiorgi_bound, kappa_levels,
                             reverse_holder_fit, reverse_holder_sweep)

    try:
        sol = json.loads(Path(args.solution).read_text())
        m = sol["mesh"]
        values = np.asarray(sol["solution"]["values"], dtype=float)
    except (FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read solution file {args.solution}: {exc}") from None
    mesh = build_disc_mesh(int(m["rings"]), int(m["sectors"]), float(m.get("grading", 1.0)))
    T = TruncationField(mesh, values)
    P = IterationParams(args.chi, args.sigma, args.theta, 1.0, args.M0, args.Mstar, args.kappa0)
    ball = discrete_ball(mesh, args.x, args.r)
    vmax = float(values[mesh.triangles[ball.element_ids]].max()) if not ball.is_empty else args.kappa0
    grid = kappa_levels(args.kappa0, vmax)
    radii = args.r * np.array([1.0, 0.75, 0.5, 0.375, 0.25])
    rows = reverse_holder_sweep(T, P, grid, radii, args.x)
    c_tilde = reverse_holder_fit(T, P, grid, radii, args.x)
    bound, ok = degiorgi_bound(T, P.replace(c_tilde=max(c_tilde, 1e-300)) if np.isfinite(c_tilde) else P,
                               args.x, args.r, args.c)
    lines = ["kappa,rho,lhs,rhs,ratio"]
    for k, rho, lhs, a, b in rows:
        rhs = a + b
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else float("inf"))
        lines.append(",".join(_fmt(v) for v in (k, rho, lhs, rhs, ratio)))
    summary = {"c_tilde": c_tilde, "bound": bound, "satisfied": ok, "value_at_x": T.value_at(args.x),
               "x": list(args.x), "r": args.r, "c": args.c}
    print(_dump(summary), end="")
    outputs = []
    if args.out:
        outputs.append(_atomic_write(args.out, "\n".join(lines) + "\n"))
        outputs.append(_atomic_write(f"{args.out}.summary.json", _dump(summary)))
    config = {"solution": args.solution, "chi": args.chi, "sigma": args.sigma, "theta": args.theta,
              "x": list(args.x), "r": args.r, "M0": args.M0, "Mstar": args.Mstar, "kappa0": args.kappa0, "c": args.c}
    return (EXIT_OK if ok else EXIT_FAIL), config, outputs


def _fmt(v):
    v = float(v)
    if v != v:
        return "nan"
    if v in (float("inf"), float("-inf")):
        return "inf" if v > 0 else "-inf"
    return repr(v)


ZHIKOV_KEYS = ("p", "q", "alpha", "h", "levels", "sectors_per_ring", "grading", "tol")
SCALING_KEYS = ("integrand", "amplitudes", "rings", "sectors", "boundary", "boundary_params", "radius", "tol")
BLOWUP_KEYS = ("p", "q", "alpha", "levels", "coefficient", "h", "sub", "radius", "sectors_per_ring", "tol")
PPPOT_KEYS = ("p", "source", "sample_points", "sample_count", "rings", "rho", "mu", "boundary", "boundary_params", "tol")


def _report_outputs(args, rep):
    from .plotting import FIGURES

    outputs = [_atomic_write(args.out, _dump(rep.to_dict()))]
    if args.svg:
        outputs.append(FIGURES[rep.name](rep, args.svg))
    status = "passed" if rep.passed else "FAILED"
    print(f"{rep.name}: {status} -> {args.out}")
    return (EXIT_OK if rep.passed else EXIT_FAIL), outputs


def cmd_zhikov_gap(args):
    from .experiments import H_STAR, ZhikovSetup, zhikov_gap

    cfg = _load_config(args.config, ZHIKOV_KEYS)
    kw = {k: cfg[k] for k in ZHIKOV_KEYS if k in cfg}
    kw["h"] = H_STAR if kw.get("h") in (None, "h*") else float(kw["h"])
    if "levels" in kw:
        kw["levels"] = tuple(kw["levels"])
    p, q, a = float(kw.get("p", 1.5)), float(kw.get("q", 3.0)), float(kw.get("alpha", 0.5))
    kw["strict"] = bool(1 < p < 2 < 2 + a < q)
    rep = zhikov_gap(ZhikovSetup(**kw))
    rep.seeds["seed"] = args.seed
    code, outputs = _report_outputs(args, rep)
    return code, cfg, outputs


def cmd_scaling(args):
    import numpy as np

    from .experiments import gradient_scaling
    from .integrand import integrand_from_dict

    cfg = _load_config(args.config, SCALING_KEYS)
    if "integrand" not in cfg:
        raise UsageError("scaling config needs an 'integrand' object")
    amps = cfg.get("amplitudes", {"min": 0.1, "max": 10.0, "count": 10})
    if isinstance(amps, dict):
        amps = np.logspace(np.log10(amps["min"]), np.log10(amps["max"]), int(amps["count"]))
    rep = gradient_scaling(integrand_from_dict(cfg["integrand"]), amps, rings=int(cfg.get("rings", 8)),
                           sectors=cfg.get("sectors"), boundary=cfg.get("boundary", "cubic-harmonic"),
                           boundary_params=cfg.get("boundary_params"), radius=float(cfg.get("radius", 0.9)),
                           tol=float(cfg.get("tol", 1e-9)))
    rep.seeds["seed"] = args.seed
    code, outputs = _report_outputs(args, rep)
    return code, cfg, outputs


def cmd_blowup(args):
    from .experiments import blowup_probe

    cfg = _load_config(args.config, BLOWUP_KEYS)
    kw = {k: cfg[k] for k in ("levels", "coefficient", "h", "sub", "radius", "sectors_per_ring", "tol") if k in cfg}
    if kw.get("h") == "h*":
        kw.pop("h")
    rep = blowup_probe(float(cfg.get("p", 1.5)), float(cfg.get("q", 3.0)), float(cfg.get("alpha", 0.5)), **kw)
    rep.seeds["seed"] = args.seed
    code, outputs = _report_outputs(args, rep)
    return code, cfg, outputs


def cmd_pppot(args):
    import numpy as np

    from .experiments import make_source, pppot_check

    cfg = _load_config(args.config, PPPOT_KEYS)
    rho = float(cfg.get("rho", 0.25))
    if "sample_points" in cfg:
        pts = np.asarray(cfg["sample_points"], dtype=float)
    else:
        rng = np.random.default_rng(args.seed)
        n = int(cfg.get("sample_count", 8))
        r = (1 - rho) * 0.95 * np.sqrt(rng.uniform(size=n))
        a = 2 * np.pi * rng.uniform(size=n)
        pts = np.stack([r * np.cos(a), r * np.sin(a)], axis=1)
    src = cfg.get("source", {"name": "constant", "params": {"value": 1.0}})
    rep = pppot_check(float(cfg.get("p", 2.0)), make_source(src.get("name", "zero"), src.get("params")), pts,
                      rings=tuple(cfg.get("rings", (8, 16))), rho=rho, mu=float(cfg.get("mu", 1e-3)),
                      boundary=cfg.get("boundary", "zero"), boundary_params=cfg.get("boundary_params"),
                      tol=float(cfg.get("tol", 1e-9)))
    rep.seeds["seed"] = args.seed
    code, outputs = _report_outputs(args, rep)
    return code, cfg, outputs


# ---------------------------------------------------------------------------
# parser


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for all sampling")

    mesh_src = _Parser(add_help=False)
    mesh_src.add_argument("--mesh", help="mesh file in the nodes/triangles text format")
    mesh_src.add_argument("--rings", type=int)
    mesh_src.add_argument("--sectors", type=int)

    parser = _Parser(prog="elliptlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("mesh", parents=[common], help="build a polar disc mesh")
    p.add_argument("--rings", type=int, required=True)
    p.add_argument("--sectors", type=int)
    p.add_argument("--grading", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("solve", parents=[common], help="minimise a discrete energy")
    p.add_argument("--config", required=True)
    p.add_argument("--tol", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("potential", parents=[common, mesh_src], help="Havin-Maz'ya and Riesz potentials")
    p.add_argument("--field", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--center", type=_point, required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_potential)

    p = sub.add_parser("lorentz", parents=[common, mesh_src], help="Lorentz norm of an element field")
    p.add_argument("--field", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--gamma", type=_gamma, required=True)
    p.add_argument("--center", type=_point)
    p.add_argument("--region-radius", type=float)
    p.add_argument("--level-grid", type=int, default=64)
    p.add_argument("--out")
    p.set_defaults(func=cmd_lorentz)

    p = sub.add_parser("degiorgi", parents=[common], help="reverse Hoelder sweep and pointwise bound")
    p.add_argument("--solution", required=True)
    p.add_argument("--chi", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--x", type=_point, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--M0", type=float, default=1.0)
    p.add_argument("--Mstar", type=float, default=0.0)
    p.add_argument("--kappa0", type=float, default=0.0)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_degiorgi)

    for name, func, text in (
        ("zhikov-gap", cmd_zhikov_gap, "Lavrentiev gap across refinements"),
        ("scaling", cmd_scaling, "gradient-bound scaling across amplitudes"),
        ("blowup-probe", cmd_blowup, "max-gradient growth in sub/supercritical regimes"),
        ("pppot-check", cmd_pppot, "p-Laplace potential bound"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--svg")
        p.set_defaults(func=func)
    return parser


def run(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    t0 = time.perf_counter()
    try:
        _cap_threads()
        args = build_parser().parse_args(argv)
        args.argv = argv
        code, config, outputs = args.func(args)
        _write_manifest(args, config, outputs, t0)
        return code
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"elliptlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, TypeError) as exc:
        print(f"elliptlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None):
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
