"""Experiment presets, batch execution, and artifact serialization.

Run artifacts (all numbers at 17 significant digits, deterministic order):

    timeseries.csv  one row per recorded step (schema in diagnostics.CSV_COLUMNS)
    final_u.csv     x1,x2,u,du1,du2,hess11,hess12,hess22 per active node
    summary.json    drift estimate, residuals, termination, invariant verdicts
    config.json     the resolved configuration (re-runnable)

Exit codes: 0 converged and all checks pass, 2 invalid config or missing
artifacts, 3 invariant violation or failed check, 4 ran out of time.
"""

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import diagnostics, operators, solver, transform
from .config import ConfigError, ExperimentConfig, build_domain, load_config
from .fields import GridField, hessians, node_gradients
from .geometry import ResolutionError, classify_grid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3
EXIT_TIME = 4

_PRESET_FAMILIES = {
    "ma-urbas": operators.TAU_0,
    "warren-pi4": operators.TAU_PI4,
    "brendle-warren": operators.TAU_PI2,
}
_PRESET_VARIANTS = {
    "disk": ({"kind": "ellipse", "semi_axes": [1.0, 1.0]},
             {"kind": "ellipse", "semi_axes": [2.0, 2.0]}),
    "disk-ellipse": ({"kind": "ellipse", "semi_axes": [1.0, 1.0]},
                     {"kind": "ellipse", "semi_axes": [1.3, 0.8]}),
    "ellipse": ({"kind": "ellipse", "semi_axes": [1.0, 1.2]},
                {"kind": "ellipse", "semi_axes": [1.5, 0.84]}),
}


def preset_names():
    return [f"{fam}-{var}" for fam in _PRESET_FAMILIES
            for var in _PRESET_VARIANTS]


def preset_config(name, spacing=1.0 / 32.0, seed=0):
    for fam, prof in _PRESET_FAMILIES.items():
        for var, (src, tgt) in _PRESET_VARIANTS.items():
            if name == f"{fam}-{var}":
                return ExperimentConfig(
                    source=dict(src), target=dict(tgt), profile=prof,
                    spacing=spacing, seed=seed, preset=name)
    raise ConfigError(f"unknown preset {name!r}; known: {', '.join(preset_names())}")


def _fmt(x, nonfinite="null"):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return nonfinite
    return format(x, ".17g")


def _fmt_csv(x):
    return _fmt(x, nonfinite="nan")


def _json_dumps(obj, indent=0):
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  "{k}": {_json_dumps(v, indent + 2)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[" + ", ".join(_json_dumps(v, indent) for v in obj) + "]"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    return _fmt(obj)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(_json_dumps(obj))
        fh.write("\n")


def write_timeseries(path, records):
    with open(path, "w") as fh:
        fh.write(",".join(diagnostics.CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join(_fmt_csv(v) for v in rec.csv_row()) + "\n")


FIELD_COLUMNS = ("x1", "x2", "u", "du1", "du2", "hess11", "hess12", "hess22")


def write_field(path, field):
    g = field.grid
    u = field.active_values()
    gr = node_gradients(field)
    hxx, hyy, hxy, _, _ = hessians(field)
    with open(path, "w") as fh:
        fh.write(",".join(FIELD_COLUMNS) + "\n")
        for k in range(g.n_active):
            row = (g.coords[k, 0], g.coords[k, 1], u[k], gr[k, 0], gr[k, 1],
                   hxx[k], hxy[k], hyy[k])
            fh.write(",".join(_fmt_csv(v) for v in row) + "\n")


def summary_dict(cfg, result):
    s = result.summary
    return {
        "c_infty": s.c_infty,
        "c_infty_crosscheck": s.c_infty_crosscheck,
        "stat_residual": s.stat_residual,
        "hausdorff": s.hausdorff,
        "steps": s.steps,
        "termination": s.termination,
        "t_final": s.t_final,
        "theta0": s.theta0,
        "theta1": s.theta1,
        "mu1": s.mu1,
        "mu2": s.mu2,
        "spacing": cfg.spacing,
        "profile": cfg.profile,
        "preset": cfg.preset,
        "violation": s.violation,
        "checks": result.checks,
    }


def run(cfg, out_dir):
    """Execute one flow and write the artifact files; returns the exit code."""
    os.makedirs(out_dir, exist_ok=True)
    try:
        result = solver.run_flow(cfg)
    except ResolutionError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    write_json(os.path.join(out_dir, "config.json"), cfg.to_json_dict())
    write_timeseries(os.path.join(out_dir, "timeseries.csv"), result.records)
    write_field(os.path.join(out_dir, "final_u.csv"), result.field)
    write_json(os.path.join(out_dir, "summary.json"), summary_dict(cfg, result))
    s = result.summary
    all_pass = all(c.get("pass", False) for c in result.checks.values())
    label = cfg.preset or "run"
    print(f"{label}: termination={s.termination} steps={s.steps} "
          f"c_infty={s.c_infty:.6g} stat_residual={s.stat_residual:.3g} "
          f"checks={'pass' if all_pass else 'FAIL'}")
    if s.termination == "invariant-violation":
        return EXIT_CHECK
    if s.termination == "max-time":
        return EXIT_TIME
    return EXIT_OK if all_pass else EXIT_CHECK


def _run_preset_job(args):
    name, out_root, seed, spacing = args
    cfg = preset_config(name, spacing=spacing, seed=seed)
    return run(cfg, os.path.join(out_root, name))


def check_operators(seed=0, samples=100, dims=(2, 3), fd_step=1e-5, verbose=True):
    """Property suite over the operator algebra; returns the exit code.

    Per preset and its dual: spectral gradient vs central differences,
    dual involution, F*(A) = -F(A^{-1}) by explicit inversion, concavity
    second differences, monotonicity, and the eigenvalue envelope.
    """
    rng = np.random.default_rng(seed)
    failures = []

    def fail(msg, sample):
        failures.append((msg, sample))

    for name in operators.PRESET_NAMES:
        p = operators.profile(name)
        d = operators.dual_profile(p)
        dd = operators.dual_profile(d)
        worst_fd = 0.0
        worst_dual = 0.0
        worst_invol = 0.0
        worst_conc = -np.inf
        for n in dims:
            for _ in range(samples):
                A = operators.random_spd(rng, n)
                # gradient vs symmetric central differences
                Gm = operators.gradient_F(p, A)
                scale = max(1.0, float(np.max(np.abs(Gm))))
                for i in range(n):
                    for j in range(i, n):
                        S = np.zeros((n, n))
                        S[i, j] = S[j, i] = 1.0
                        fd = (operators.evaluate_F(p, A + fd_step * S)
                              - operators.evaluate_F(p, A - fd_step * S)) / (2 * fd_step)
                        an = float(np.sum(Gm * S))
                        worst_fd = max(worst_fd, abs(fd - an) / scale)
                # duality by explicit inversion
                lhs = operators.evaluate_F(d, A)
                rhs = -operators.evaluate_F(p, np.linalg.inv(A))
                worst_dual = max(worst_dual, abs(lhs - rhs))
                worst_invol = max(worst_invol,
                                  abs(operators.evaluate_F(dd, A)
                                      - operators.evaluate_F(p, A)))
                # concavity of the profile and its dual
                B = operators.random_spd(rng, n) - operators.random_spd(rng, n)
                B /= max(1.0, float(np.max(np.abs(B))))
                for q in (p, d):
                    try:
                        worst_conc = max(worst_conc,
                                         operators.check_concavity(q, A, B, 1e-4))
                    except operators.OutsideConeError:
                        continue
                # monotonicity along a random positive direction
                C = operators.random_spd(rng, n, lam_lo=0.01, lam_hi=0.5)
                if operators.evaluate_F(p, A + C) < operators.evaluate_F(p, A) - 1e-12:
                    fail(f"{name}: monotonicity violated", (A, C))
                # envelope bounds against the sampled spectrum
                lam = np.sort(np.linalg.eigvalsh(A))
                fv = float(np.sum(p.f(lam)))
                env = operators.envelope_bounds(p, fv, fv, n)
                if lam[0] > env.mu1 + 1e-9 or lam[-1] < env.mu2 - 1e-9:
                    fail(f"{name}: envelope violated", (A,))
        if worst_fd >= 1e-6:
            fail(f"{name}: gradient/finite-difference mismatch {worst_fd:g}", None)
        if worst_dual >= 1e-10:
            fail(f"{name}: F*(A) != -F(A^-1), worst {worst_dual:g}", None)
        if worst_invol >= 1e-10:
            fail(f"{name}: dual involution broken, worst {worst_invol:g}", None)
        if worst_conc >= 1e-6:
            fail(f"{name}: concavity second difference {worst_conc:g} > 0", None)
        band = operators.structure_band(
            p, np.ones(2), *operators.band_thetas(
                p, 2 * float(p.f(1.0)), 2 * float(p.f(1.0))))
        if verbose:
            print(f"{name}: fd={worst_fd:.2e} dual={worst_dual:.2e} "
                  f"involution={worst_invol:.2e} concavity<={worst_conc:.2e} "
                  f"band[{band.provenance}]="
                  f"[{band.band_fp[0]:.4g},{band.band_fp[1]:.4g}] ok")
    if failures:
        for msg, sample in failures:
            print(f"FAIL {msg}", file=sys.stderr)
            if sample is not None:
                print(f"  sample: {sample}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _read_field_csv(path, grid):
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if tuple(header) != FIELD_COLUMNS:
                raise ConfigError(f"unexpected final_u.csv columns {header}")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read {path}: {e}")
    if data.shape[0] != grid.n_active or data.shape[1] != len(FIELD_COLUMNS):
        raise ConfigError(
            f"final_u.csv has shape {data.shape}, expected "
            f"({grid.n_active}, {len(FIELD_COLUMNS)})")
    if np.max(np.abs(data[:, 0] - grid.coords[:, 0])) > 1e-12 or \
       np.max(np.abs(data[:, 1] - grid.coords[:, 1])) > 1e-12:
        raise ConfigError("final_u.csv node coordinates do not match the grid")
    values = np.full((grid.nx, grid.ny), np.nan)
    values.ravel()[grid.active_flat] = data[:, 2]
    return GridField(grid=grid, values=values)


def legendre_test(run_dir, tol_factor=20.0):
    """Conjugate the stored final field and verify the duality residuals.

    Writes the metrics into summary.json under "legendre"; exits 0 iff the
    combined duality residual is at most tol_factor * spacing^2 and the
    operator reciprocity holds to 1e-8.
    """
    cfg_path = os.path.join(run_dir, "config.json")
    sum_path = os.path.join(run_dir, "summary.json")
    u_path = os.path.join(run_dir, "final_u.csv")
    for path in (cfg_path, sum_path, u_path):
        if not os.path.exists(path):
            print(f"error: missing run artifact {path}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        cfg = load_config(cfg_path)
        with open(sum_path) as fh:
            summary = json.load(fh)
        source = build_domain(cfg.source)
        target = build_domain(cfg.target)
        grid = classify_grid(source, cfg.spacing,
                             boundary_gradient_order=cfg.boundary_gradient_order)
        field = _read_field_csv(u_path, grid)
        dual_grid = classify_grid(target, cfg.spacing)
        profile_ = operators.profile(cfg.profile)
        dual = transform.legendre(field, dual_grid)
        pair = transform.make_pair(field, dual)
        hess_res, coverage = transform.duality_residual(field, dual)
        ident = transform.dual_identity_residual(field, profile_)
    except (ConfigError, transform.ConvexityError, ResolutionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    duality = max(pair.young_residual, hess_res)
    tol = tol_factor * cfg.spacing**2
    ok = duality <= tol and ident <= 1e-8
    summary["legendre"] = {
        "young_residual": pair.young_residual,
        "hessian_residual": hess_res,
        "duality_residual": duality,
        "identity_residual": ident,
        "coverage": coverage,
        "tolerance": tol,
        "pass": bool(ok),
    }
    write_json(sum_path, summary)
    print(f"legendre-test: duality_residual={duality:.3e} (tol {tol:.3e}) "
          f"identity={ident:.3e} coverage={coverage:.3f} "
          f"{'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="slgflow",
        description="Gradient-image-constrained parabolic flows on convex domains")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment or a preset batch")
    p_run.add_argument("--config", help="JSON experiment configuration")
    p_run.add_argument("--preset", help="preset name, comma list, or 'all'")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--spacing", type=float, default=1.0 / 32.0,
                       help="grid spacing for presets")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="parallel processes for preset batches")

    p_chk = sub.add_parser("check-operators",
                           help="run the operator algebra property suite")
    p_chk.add_argument("--seed", type=int, default=0)
    p_chk.add_argument("--samples", type=int, default=100)

    p_leg = sub.add_parser("legendre-test",
                           help="duality checks on a completed run directory")
    p_leg.add_argument("--run", required=True, help="run directory")
    p_leg.add_argument("--tol-factor", type=float, default=20.0)

    sub.add_parser("presets", help="list bundled experiment presets")

    args = parser.parse_args(argv)

    if args.command == "presets":
        for name in preset_names():
            cfg = preset_config(name)
            print(f"{name}: profile={cfg.profile} "
                  f"source={cfg.source['semi_axes']} target={cfg.target['semi_axes']}")
        return EXIT_OK

    if args.command == "check-operators":
        return check_operators(seed=args.seed, samples=args.samples)

    if args.command == "legendre-test":
        return legendre_test(args.run, tol_factor=args.tol_factor)

    # run
    if bool(args.config) == bool(args.preset):
        print("error: exactly one of --config/--preset is required",
              file=sys.stderr)
        return EXIT_CONFIG
    if args.config:
        try:
            cfg = load_config(args.config)
        except ConfigError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        if args.seed is not None:
            cfg.seed = args.seed
        out = args.out or cfg.output_dir
        if not out:
            base = os.path.splitext(os.path.basename(args.config))[0]
            out = os.path.join("runs", base)
        try:
            return run(cfg, out)
        except ConfigError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_CONFIG

    names = preset_names() if args.preset == "all" else args.preset.split(",")
    try:
        for name in names:
            preset_config(name)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out_root = args.out or "runs"
    seed = 0 if args.seed is None else args.seed
    jobs = [(name, out_root, seed, args.spacing) for name in names]
    if args.jobs > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_preset_job, jobs))
    else:
        codes = [_run_preset_job(job) for job in jobs]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
