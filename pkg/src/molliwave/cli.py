"""Config-driven experiment runner.

Every module is exposed as a subcommand that reads one INI-style config,
runs the mapped operations, writes CSV artifacts (17 significant digits,
byte-stable across identical runs), renders companion figures, and prints
one summary line per check.

Exit status: 0 when every check in the run passes, 1 when a check fails,
2 on config validation errors (the message names the offending key), 3 on
numerical failures (a diagnostic file path is printed).

Output directory resolution: --outdir flag, else the MOLLIWAVE_OUTDIR
environment variable, else the config's [output] dir, else ./out.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback

import numpy as np

from . import embedding, kernels, solver, transmission
from .characteristics import TwoSpeedMedium, gamma_curve, trace_backward
from .config import ConfigError, ExperimentConfig, load_config
from .reporting import ensure_dir, write_csv

__all__ = ["main", "run"]

DEFAULT_SCHEDULE = "1e-1 3e-2 1e-2 3e-3 1e-3"


class CheckFailure(Exception):
    """A post-run invariant check failed (exit status 1)."""


def _emit(line: str):
    print(line)


def _check(name: str, ok: bool, detail: str, failures: list):
    _emit("CHECK %-28s %s  %s" % (name, "PASS" if ok else "FAIL", detail))
    if not ok:
        failures.append(name)


def _out_path(outdir: str, prefix: str, name: str) -> str:
    return os.path.join(outdir, "%s_%s" % (prefix, name))


def _schedule(cfg: ExperimentConfig, section: str, key: str = "schedule"):
    sched = cfg.get_floats(section, key, default=None)
    if sched is None:
        sched = tuple(float(v) for v in DEFAULT_SCHEDULE.split())
    if any(e2 >= e1 for e1, e2 in zip(sched, sched[1:])) or any(
            e <= 0 or e >= 1 for e in sched):
        raise ConfigError("key %r in section [%s] must be a strictly "
                          "decreasing list inside (0, 1)" % (key, section))
    return sched


def _build_kernel(cfg: ExperimentConfig):
    q = cfg.get_int("kernel", "q", default=0)
    radius = cfg.get_float("kernel", "radius", default=1.0)
    resolution = cfg.get_int("kernel", "resolution", default=2049)
    if q < 0:
        raise ConfigError("key 'q' in section [kernel] must be >= 0")
    if radius <= 0:
        raise ConfigError("key 'radius' in section [kernel] must be > 0")
    return kernels.build_kernel(q, radius, resolution=resolution)


def _medium(cfg: ExperimentConfig) -> TwoSpeedMedium:
    cl = cfg.get_float("medium", "c_left", required=True)
    cr = cfg.get_float("medium", "c_right", required=True)
    x0 = cfg.get_float("medium", "interface", required=True)
    try:
        return TwoSpeedMedium(cl, cr, x0)
    except ValueError as exc:
        raise ConfigError("section [medium]: %s" % exc)


# ---------------------------------------------------------------------------
# subcommand bodies (each returns the list of failed check names)
# ---------------------------------------------------------------------------


def _run_kernel(cfg, outdir, prefix, plots):
    kern = _build_kernel(cfg)
    failures = []
    mass_dev = abs(kern.mass() - 1.0)
    _check("kernel-mass", mass_dev <= kernels.MASS_TOL,
           "|mass-1| = %.3e" % mass_dev, failures)
    worst = 0.0
    for k in range(1, kern.moment_order + 1):
        worst = max(worst, abs(kern.moment(k)))
    _check("kernel-moments", worst <= kernels.MOMENT_TOL,
           "max |moment 1..q| = %.3e, condition %.3e"
           % (worst, kern.condition_number), failures)
    path = write_csv(_out_path(outdir, prefix, "kernel.csv"),
                     ["x", "chi_x"],
                     zip(kern.samples_x, kern.samples_chi))
    _emit("wrote %s" % path)
    if plots:
        from . import plots as _plots
        _emit("wrote %s" % _plots.plot_kernel(
            kern, _out_path(outdir, prefix, "kernel.png")))
    return failures


def _embed_family(cfg):
    kern = _build_kernel(cfg)
    coeff = cfg.get_coefficient("embed", "f", required=True)
    law_name = cfg.get("embed", "law", default="log_inverse")
    if law_name not in ("log_inverse", "linear"):
        raise ConfigError("key 'law' in section [embed] must be log_inverse "
                          "or linear")
    law = embedding.WidthLaw(law_name)
    zero_radius = cfg.get_float("embed", "zero_radius", default=0.0)
    domain = cfg.get_floats("embed", "domain", default=(0.0, 4.0))
    fam = embedding.embed_linf(coeff.evaluator, kern, law,
                               zero_radius=zero_radius, jumps=coeff.jumps,
                               domain=domain)
    return kern, coeff, fam, domain


def _run_embed(cfg, outdir, prefix, plots):
    kern, coeff, fam, domain = _embed_family(cfg)
    sched = _schedule(cfg, "embed")
    npts = cfg.get_int("embed", "grid", default=513)
    xs = np.linspace(domain[0], domain[1], npts)
    sup_f = float(np.max(np.abs(np.asarray(coeff.evaluator(xs), dtype=float))))
    failures = []
    rows = []
    samples = {}
    worst_ratio = 0.0
    for eps in sched:
        vals = np.asarray(fam.evaluator(eps, xs), dtype=float)
        samples[eps] = (xs, vals)
        rows.extend((eps, x, v) for x, v in zip(xs, vals))
        worst_ratio = max(worst_ratio, float(np.max(np.abs(vals))) / max(sup_f, 1e-300))
    if kern.nonnegative:
        # non-expansive in exact arithmetic; the slack covers the declared
        # 1e-10 quadrature tolerance on the kernel mass
        _check("embed-sup-bound", worst_ratio <= 1.0 + 1e-9,
               "max sup ratio %.12f (kernel is nonnegative)" % worst_ratio,
               failures)
    else:
        _emit("NOTE  embed-sup-bound         skipped: kernel changes sign, "
              "mollification may overshoot (ratio %.6f)" % worst_ratio)
    path = write_csv(_out_path(outdir, prefix, "family.csv"),
                     ["epsilon", "x", "value"], rows)
    _emit("wrote %s" % path)
    if plots:
        from . import plots as _plots
        _emit("wrote %s" % _plots.plot_family(
            samples, _out_path(outdir, prefix, "family.png")))
    return failures


def _run_growth(cfg, outdir, prefix, plots):
    kern, coeff, fam, domain = _embed_family(cfg)
    sched = _schedule(cfg, "embed")
    target = cfg.get("growth", "target", default="value")
    if target not in ("value", "derivative"):
        raise ConfigError("key 'target' in section [growth] must be value "
                          "or derivative")
    region = cfg.get_floats("growth", "region", default=domain)
    resolution = cfg.get_int("growth", "resolution", default=512)
    chosen = fam.x_derivative if target == "derivative" else fam
    report = embedding.classify_growth(chosen, region, sched,
                                       grid_resolution=resolution)
    failures = []
    _check("growth-finite", all(np.isfinite(report.sup_norms)),
           "fitted %s, residual %.3e" % (report.fitted_class,
                                         report.fit_residual), failures)
    path = write_csv(_out_path(outdir, prefix, "growth.csv"),
                     ["epsilon", "sup_norm"], report.csv_rows(),
                     footer_lines=[report.csv_footer()])
    _emit("wrote %s" % path)
    if plots:
        from . import plots as _plots
        _emit("wrote %s" % _plots.plot_growth(
            report, _out_path(outdir, prefix, "growth.png")))
    return failures


def _run_characteristics(cfg, outdir, prefix, plots):
    medium = _medium(cfg)
    kern = _build_kernel(cfg)
    start = cfg.get_floats("trace", "start", required=True)
    if len(start) != 2:
        raise ConfigError("key 'start' in section [trace] needs two numbers")
    horizon = cfg.get_float("trace", "horizon", default=max(1.0, start[1]))
    extent = cfg.get_float("trace", "extent", default=4.0)
    margin = cfg.get_float("trace", "margin", default=0.01)
    eps_single = cfg.get_float("trace", "epsilon", default=1e-2)
    failures = []

    law = embedding.log_inverse_law()
    eta = law(eps_single)
    speed_ev = transmission.mollified_speed(medium, kern, eta)
    step = cfg.get_float("trace", "step", default=eta / 4.0)
    trace = trace_backward(lambda x, t: speed_ev(x), start, step)
    lip = trace.lipschitz_ratio()
    _check("trace-lipschitz", lip <= max(medium.c_left, medium.c_right) * 1.01,
           "max |dgamma/dtau| = %.6f" % lip, failures)
    path = write_csv(_out_path(outdir, prefix, "trace.csv"),
                     ["tau", "gamma"], trace.csv_rows())
    _emit("wrote %s" % path)

    sched = _schedule(cfg, "trace")
    problem = transmission.TransmissionProblem(
        medium=medium, u0=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        v0=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        horizon=horizon, extent=extent)
    report = transmission.characteristic_convergence(problem, kern, start,
                                                     sched, margin=margin)
    for row in report.rows:
        _emit("  eps=%-8g eta=%.4f foot=%.6f bracket=[%.6f, %.6f] "
              "err=%.2e contained=%s" % (row[0], row[1], row[2], row[3],
                                         row[4], row[5], row[6]))
    _check("foot-error-3eta", report.all_within_3eta,
           "limit foot %.6f" % report.limit_foot, failures)
    path = write_csv(_out_path(outdir, prefix, "convergence.csv"),
                     ["epsilon", "eta", "foot", "x1", "x2", "error"],
                     report.csv_rows())
    _emit("wrote %s" % path)
    if plots:
        from . import plots as _plots
        _emit("wrote %s" % _plots.plot_trace(
            trace, _out_path(outdir, prefix, "trace.png")))
        _emit("wrote %s" % _plots.plot_convergence(
            report, _out_path(outdir, prefix, "convergence.png")))
    return failures


def _system_from_config(cfg) -> solver.SystemSpec:
    n = cfg.get_int("system", "n", required=True)
    r = cfg.get_int("system", "r", required=True)
    T = cfg.get_float("system", "T", required=True)
    X = cfg.get_float("system", "X", required=True)

    def as_xt(coeff):
        return lambda x, t, c=coeff: c.evaluator(x)

    def as_t(coeff):
        return lambda t, c=coeff: float(np.asarray(c.evaluator(
            np.array([t])), dtype=float)[0])

    speeds_idx = cfg.indexed("speed")
    if sorted(speeds_idx) != [(i,) for i in range(1, n + 1)]:
        raise ConfigError("section [speed] must define keys 1..%d" % n)
    speeds = [as_xt(speeds_idx[(i,)]) for i in range(1, n + 1)]

    initial_idx = cfg.indexed("initial")
    initial = []
    for i in range(1, n + 1):
        coeff = initial_idx.get((i,))
        initial.append(coeff.evaluator if coeff else
                       (lambda x: np.zeros_like(np.asarray(x, dtype=float))))

    coupling = [[None] * n for _ in range(n)]
    for idx, coeff in cfg.indexed("coupling").items():
        if len(idx) != 2 or not (1 <= idx[0] <= n and 1 <= idx[1] <= n):
            raise ConfigError("section [coupling]: bad index %r" % (idx,))
        coupling[idx[0] - 1][idx[1] - 1] = as_xt(coeff)

    source = [None] * n
    for idx, coeff in cfg.indexed("source").items():
        if len(idx) != 1 or not 1 <= idx[0] <= n:
            raise ConfigError("section [source]: bad index %r" % (idx,))
        source[idx[0] - 1] = as_xt(coeff)

    if r > n:
        raise ConfigError("r exceeds n (r=%d, n=%d)" % (r, n))

    bmat = [[None] * (n - r) for _ in range(r)]
    for idx, coeff in cfg.indexed("boundary_matrix").items():
        if len(idx) != 2 or not (1 <= idx[0] <= r and r + 1 <= idx[1] <= n):
            raise ConfigError("section [boundary_matrix]: index %r must pair "
                              "an incoming row with an outgoing column"
                              % (idx,))
        bmat[idx[0] - 1][idx[1] - 1 - r] = as_t(coeff)

    bdata = [None] * r
    for idx, coeff in cfg.indexed("boundary_data").items():
        if len(idx) != 1 or not 1 <= idx[0] <= r:
            raise ConfigError("section [boundary_data]: bad index %r" % (idx,))
        bdata[idx[0] - 1] = as_t(coeff)

    spec = solver.SystemSpec(n=n, r=r, speeds=speeds, initial_data=initial,
                             coupling=coupling, source=source,
                             boundary_matrix=bmat, boundary_data=bdata,
                             horizon=T, extent=X,
                             corner_dx=cfg.get_float("system", "corner_dx"),
                             corner_dt=cfg.get_float("system", "corner_dt"))
    try:
        solver.validate_spec(spec)
    except solver.SpecError as exc:
        raise ConfigError(str(exc))
    return spec


def _write_field(fieldsol, outdir, prefix, name, stride=1):
    rows = []
    eps = fieldsol.epsilon if fieldsol.epsilon is not None else float("nan")
    for m in range(0, len(fieldsol.t), stride):
        for j in range(0, len(fieldsol.x), stride):
            for i in range(fieldsol.ncomp):
                rows.append((eps, fieldsol.x[j], fieldsol.t[m], i + 1,
                             fieldsol.values[m, j, i]))
    return write_csv(_out_path(outdir, prefix, name),
                     ["epsilon", "x", "t", "component", "value"], rows)


def _run_solve(cfg, outdir, prefix, plots):
    spec = _system_from_config(cfg)
    nx = cfg.get_int("grid", "nx", default=100)
    cfl = cfg.get_float("grid", "cfl", default=0.9)
    nt = cfg.get_int("grid", "nt", default=None)
    fieldsol = solver.solve_mixed(spec, nx, cfl=cfl, nt=nt)
    failures = []

    base = cfg.get_floats("bound", "base", default=(0.0, spec.extent))
    margin = cfg.get_float("bound", "slope_margin", default=0.01)
    M = fieldsol.scheme_metadata["max_speed"] * (1.0 + margin)
    domain = solver.determination_domain(base, M, spec.horizon)
    ginp = solver.measure_gronwall_inputs(spec, domain)
    chk = solver.check_bound(fieldsol, domain=domain, g=ginp)
    _check("gronwall-bound", chk.passed,
           "sups %s <= bound %.6g" % (["%.4g" % s for s in chk.component_sups],
                                      chk.bound), failures)
    res = fieldsol.boundary_residual(spec)
    _check("boundary-identity", res <= 1e-9, "max residual %.3e" % res,
           failures)

    stride = cfg.get_int("output", "stride", default=1)
    _emit("wrote %s" % _write_field(fieldsol, outdir, prefix, "solution.csv",
                                    stride))
    if plots:
        from . import plots as _plots
        _emit("wrote %s" % _plots.plot_field(
            fieldsol, _out_path(outdir, prefix, "solution.png")))
    return failures


def _run_picard(cfg, outdir, prefix, plots):
    spec = _system_from_config(cfg)
    nx = cfg.get_int("grid", "nx", default=50)
    nt = cfg.get_int("grid", "nt", default=nx)
    max_iter = cfg.get_int("grid", "max_iter", default=50)
    tol = cfg.get_float("grid", "tol", default=1e-10)
    fieldsol = solver.picard_solve(spec, nx, nt, max_iter=max_iter, tol=tol)
    failures = []
    meta = fieldsol.scheme_metadata
    _check("picard-converged", meta["residuals"][-1] < tol,
           "%d sweeps, last change %.3e"
           % (meta["iterations"], meta["residuals"][-1]), failures)
    stride = cfg.get_int("output", "stride", default=1)
    _emit("wrote %s" % _write_field(fieldsol, outdir, prefix, "picard.csv",
                                    stride))
    if plots:
        from . import plots as _plots
        _emit("wrote %s" % _plots.plot_field(
            fieldsol, _out_path(outdir, prefix, "picard.png")))
    return failures


def _transmission_problem(cfg) -> transmission.TransmissionProblem:
    medium = _medium(cfg)
    u0 = cfg.get_coefficient("problem", "u0", required=True)
    v0 = cfg.get_coefficient("problem", "v0", required=True)
    h = cfg.get_coefficient("problem", "h", default="constant:1.0")
    b = cfg.get_coefficient("problem", "b", default="constant:0.0")
    T = cfg.get_float("problem", "T", default=1.0)
    X = cfg.get_float("problem", "X", default=4.0)

    def as_t(coeff):
        return lambda t, c=coeff: float(np.asarray(c.evaluator(
            np.array([t])), dtype=float)[0])

    try:
        return transmission.TransmissionProblem(
            medium=medium, u0=u0.evaluator, v0=v0.evaluator,
            h=as_t(h), b=as_t(b), horizon=T, extent=X)
    except ValueError as exc:
        raise ConfigError("section [problem]: %s" % exc)


def _interior_mask(problem, fieldsol, eta_max):
    """Region-I samples away from the dividing curve and the jump layer."""
    m = problem.medium
    tt, xx = np.meshgrid(fieldsol.t, fieldsol.x, indexing="ij")
    gam = np.array([gamma_curve(m, tq) for tq in fieldsol.t])[:, None]
    layer_lo = m.interface - eta_max - 0.1
    layer_hi = m.interface + eta_max + 0.1
    return (xx - gam > 0.3) & ((xx < layer_lo) | (xx > layer_hi)) \
        & (tt > 2.0 * (fieldsol.t[1] - fieldsol.t[0]))


def _run_transmit(cfg, outdir, prefix, plots):
    problem = _transmission_problem(cfg)
    kern = _build_kernel(cfg)
    sched = _schedule(cfg, "regularization")
    nx = cfg.get_int("grid", "nx", default=200)
    cfl = cfg.get_float("grid", "cfl", default=0.9)
    fields = transmission.regularized_family(problem, kern, sched, nx, cfl=cfl)
    failures = []

    classical = transmission.classical_field(problem, fields[0].x, fields[0].t)
    eta_max = fields[0].scheme_metadata["eta"]
    mask = _interior_mask(problem, fields[0], eta_max)
    diffs = []
    for fld in fields:
        d = np.abs(fld.values[:, :, 0] - classical.values[:, :, 0])[mask]
        diffs.append(float(np.max(d)) if d.size else 0.0)
        _emit("  eps=%-8g interior |u - classical| max = %.4e"
              % (fld.epsilon, diffs[-1]))
    monotone = all(d2 <= 1.1 * d1 + 1e-300 for d1, d2 in zip(diffs, diffs[1:]))
    _check("interior-convergence", monotone,
           "interior diff sequence decreasing within 10%%", failures)
    bres = max(_transmission_boundary_residual(fld, problem)
               for fld in fields)
    _check("boundary-identity", bres <= 1e-9, "max residual %.3e" % bres,
           failures)

    stride = cfg.get_int("output", "stride", default=4)
    for fld in fields:
        _emit("wrote %s" % _write_field(
            fld, outdir, prefix, "solution_eps%g.csv" % fld.epsilon, stride))
    if plots:
        from . import plots as _plots
        _emit("wrote %s" % _plots.plot_field(
            fields[-1], _out_path(outdir, prefix, "solution.png")))
    return failures


def _transmission_boundary_residual(fieldsol, problem) -> float:
    worst = 0.0
    for m, tm in enumerate(fieldsol.t):
        rhs = float(problem.h(tm)) * fieldsol.values[m, 0, 1] \
            + float(problem.b(tm))
        worst = max(worst, abs(fieldsol.values[m, 0, 0] - rhs))
    return worst


def _run_associate(cfg, outdir, prefix, plots):
    problem = _transmission_problem(cfg)
    kern = _build_kernel(cfg)
    sched = _schedule(cfg, "regularization")
    nx = cfg.get_int("grid", "nx", default=200)
    cfl = cfg.get_float("grid", "cfl", default=0.9)
    center = cfg.get_floats("test_function", "center", required=True)
    radii = cfg.get_floats("test_function", "radii", required=True)
    amplitude = cfg.get_float("test_function", "amplitude", default=1.0)
    tol_factor = cfg.get_float("test_function", "tol_factor", default=1e-2)
    slack = cfg.get_float("test_function", "slack", default=0.10)
    if len(center) != 2 or len(radii) != 2:
        raise ConfigError("test_function center and radii need two numbers")
    psi = transmission.TestFunction(center=tuple(center), radii=tuple(radii),
                                    amplitude=amplitude)

    fields = transmission.regularized_family(problem, kern, sched, nx, cfl=cfl)
    failures = []
    reports = []
    names = {0: "u", 1: "v"}
    for comp in (0, 1):
        rep = transmission.association_test(fields, problem, psi,
                                            component=comp, tol=tol_factor,
                                            slack=slack)
        reports.append(rep)
        _emit("  component %s pairings: %s (tolerance %.3e)"
              % (names[comp], ["%.3e" % v for v in rep.integrals],
                 rep.tolerance))
        _check("associate-%s" % names[comp], rep.verdict,
               "monotone=%s final=%s" % (rep.monotone_ok, rep.final_ok),
               failures)
        _emit("wrote %s" % write_csv(
            _out_path(outdir, prefix, "association_%s.csv" % names[comp]),
            ["epsilon", "integral_value"], rep.csv_rows()))
    if plots:
        from . import plots as _plots
        _emit("wrote %s" % _plots.plot_association(
            reports, _out_path(outdir, prefix, "association.png")))
    return failures


_RUNNERS = {
    "kernel": _run_kernel,
    "embed": _run_embed,
    "growth": _run_growth,
    "characteristics": _run_characteristics,
    "solve": _run_solve,
    "picard": _run_picard,
    "transmit": _run_transmit,
    "associate": _run_associate,
}


def run(config_path: str, subcommand: str, outdir: str | None = None,
        prefix: str | None = None, plots: bool = True) -> int:
    """Execute one subcommand against a config file; returns the exit status."""
    try:
        cfg = load_config(config_path, subcommand)
        resolved_outdir = outdir or os.environ.get("MOLLIWAVE_OUTDIR") \
            or cfg.get("output", "dir", default="out")
        resolved_prefix = prefix or cfg.get("output", "prefix",
                                            default=subcommand)
        ensure_dir(resolved_outdir)
    except ConfigError as exc:
        _emit("config error: %s" % exc)
        return 2

    try:
        failures = _RUNNERS[subcommand](cfg, resolved_outdir, resolved_prefix,
                                        plots)
    except ConfigError as exc:
        _emit("config error: %s" % exc)
        return 2
    except (solver.SolverError, solver.SpecError, kernels.KernelError,
            embedding.EmbeddingError, ValueError) as exc:
        diag = _out_path(resolved_outdir, resolved_prefix, "error.txt")
        with open(diag, "w") as fh:
            fh.write(traceback.format_exc())
        _emit("numerical failure: %s" % exc)
        _emit("diagnostic written to %s" % diag)
        return 3

    if failures:
        _emit("RESULT: %d check(s) failed: %s" % (len(failures),
                                                  ", ".join(failures)))
        return 1
    _emit("RESULT: all checks passed")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="molliwave",
        description="Mollified-coefficient hyperbolic mixed-problem toolkit")
    parser.add_argument("subcommand", choices=sorted(_RUNNERS),
                        help="operation to run")
    parser.add_argument("config", help="experiment config file (INI format)")
    parser.add_argument("--outdir", default=None,
                        help="output directory (overrides config and "
                             "MOLLIWAVE_OUTDIR)")
    parser.add_argument("--prefix", default=None,
                        help="artifact filename prefix (default: subcommand)")
    parser.add_argument("--no-plots", action="store_true",
                        help="skip figure rendering")
    args = parser.parse_args(argv)
    return run(args.config, args.subcommand, outdir=args.outdir,
               prefix=args.prefix, plots=not args.no_plots)


if __name__ == "__main__":
    sys.exit(main())
