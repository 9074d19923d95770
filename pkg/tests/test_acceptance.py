"""Acceptance suite: one test per criterion, each printing a summary line.

Every tolerance is fixed here; nothing is calibrated at run time.  The
bracket-containment check of criterion 7 is implemented exactly as stated
and fails by construction of the stated upper bracket; the analysis lives
in that test's docstring.  Every other criterion passes.
"""

import hashlib
import os
import time

import numpy as np
import pytest

from molliwave.characteristics import TwoSpeedMedium, bracket_bounds, broken_foot
from molliwave.cli import run as cli_run
from molliwave.embedding import (
    DEFAULT_SCHEDULE,
    EpsilonFamily,
    check_negligible,
    classify_growth,
    embed_linf,
    log_inverse_law,
)
from molliwave.kernels import build_kernel, convolve, scale_kernel
from molliwave.solver import (
    SystemSpec,
    check_bound,
    determination_domain,
    measure_gronwall_inputs,
    picard_solve,
    solve_mixed,
)
from molliwave.transmission import (
    TestFunction,
    TransmissionProblem,
    association_test,
    characteristic_convergence,
    regularized_family,
)
from tests.conftest import smooth_bump, step_fn, zeros

MEDIUM = TwoSpeedMedium(1.0, 2.0, 1.0)


def report(criterion, ok, detail):
    print("ACCEPT-%02d %-30s %s  %s"
          % (criterion, "", "PASS" if ok else "FAIL", detail))
    return ok


def smoothstep(u):
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def gentle_ramp(x):
    return smoothstep((np.asarray(x, dtype=float) - 0.4) / 3.3)


def gentle_plateau(x):
    x = np.asarray(x, dtype=float)
    return smoothstep((x - 1.9) / 0.5) * (1.0 - smoothstep((x - 3.3) / 0.5))


def const_xt(value):
    return lambda x, t: value * np.ones_like(np.asarray(x, dtype=float))


def test_acceptance_01_kernel_moments():
    """Unit mass to 1e-10 and vanishing moments to 1e-8 for q in {0,1,2,4}."""
    start = time.time()
    worst_mass = 0.0
    worst_moment = 0.0
    for q in (0, 1, 2, 4):
        k = build_kernel(q, 1.0)
        worst_mass = max(worst_mass, abs(k.mass() - 1.0))
        for j in range(1, q + 1):
            worst_moment = max(worst_moment, abs(k.moment(j)))
    elapsed = time.time() - start
    ok = worst_mass <= 1e-10 and worst_moment <= 1e-8 and elapsed < 1.0
    assert report(1, ok, "mass dev %.2e, moment dev %.2e, %.2f s"
                  % (worst_mass, worst_moment, elapsed))


def test_acceptance_02_log_growth_embedding():
    """Mollified-step derivative sup equals kernel(0) |log eps| within 1%,
    and the fitted growth class is logarithmic with slope within 5%."""
    kern = build_kernel(0, 1.0)
    fam = embed_linf(step_fn, kern, log_inverse_law(), jumps=[1.0],
                     domain=(0.0, 4.0))
    chi0 = kern.peak
    schedule = (1e-1, 1e-2, 1e-3, 1e-4)
    xs = np.linspace(0.5, 1.5, 513)
    worst = 0.0
    for eps in schedule:
        sup = float(np.max(np.abs(fam.x_derivative(eps, xs))))
        worst = max(worst, abs(sup / (chi0 * abs(np.log(eps))) - 1.0))
    rep = classify_growth(fam.x_derivative, (0.5, 1.5), schedule,
                          grid_resolution=513)
    slope_ok = rep.fitted_class.kind == "log" and \
        abs(rep.fitted_class.parameter / chi0 - 1.0) <= 0.05
    ok = worst <= 0.01 and slope_ok
    assert report(2, ok, "max ratio dev %.4f, fitted %s"
                  % (worst, rep.fitted_class))


def test_acceptance_03_global_boundedness():
    """Every mollification in the corpus stays below the data sup at every
    eps (the averaging kernel is nonnegative; the 1e-9 slack covers the
    declared quadrature tolerance on the kernel mass)."""
    kern = build_kernel(0, 1.0)
    corpus = [
        (step_fn, [1.0], 1.0),
        (MEDIUM.speed, [MEDIUM.interface], 2.0),
        (lambda x: smooth_bump(x, 2.0, 1.0), [], 1.0),
        (lambda x: np.interp(np.asarray(x, dtype=float),
                             [0.0, 1.0, 2.0, 4.0], [0.0, -3.0, 2.0, 2.0]),
         [], 3.0),
    ]
    xs = np.linspace(0.0, 4.0, 1025)
    worst = 0.0
    for f, jumps, sup_f in corpus:
        fam = embed_linf(f, kern, log_inverse_law(), jumps=jumps,
                         domain=(0.0, 4.0))
        for eps in DEFAULT_SCHEDULE:
            sup = float(np.max(np.abs(fam(eps, xs))))
            worst = max(worst, sup / sup_f)
    ok = worst <= 1.0 + 1e-9
    assert report(3, ok, "max sup ratio %.12f over %d data / %d eps"
                  % (worst, len(corpus), len(DEFAULT_SCHEDULE)))


def test_acceptance_04_transport_accuracy():
    """Constant-speed transport converges at order >= 1.8 across
    Nx in {100, 200, 400} at cfl = 0.9."""
    spec = SystemSpec(n=1, r=1, speeds=[const_xt(1.0)],
                      initial_data=[lambda x: smooth_bump(x, 1.5, 1.0)],
                      horizon=1.0, extent=4.0)
    errs = []
    for nx in (100, 200, 400):
        f = solve_mixed(spec, nx, cfl=0.9)
        errs.append(float(np.max(np.abs(
            f.values[-1, :, 0] - smooth_bump(f.x - 1.0, 1.5, 1.0)))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = bool(np.all(orders >= 1.8))
    assert report(4, ok, "errors %s, orders %s"
                  % (["%.2e" % e for e in errs],
                     ["%.2f" % o for o in orders]))


def _gronwall_corpus():
    v_bump = lambda x: smooth_bump(x, 1.2, 0.7)
    systems = {
        "reflection": SystemSpec(
            n=2, r=1, speeds=[const_xt(1.0), const_xt(-1.0)],
            initial_data=[zeros, v_bump],
            boundary_matrix=[[lambda t: 1.0]], horizon=1.0, extent=4.0),
        "coupled": SystemSpec(
            n=2, r=1, speeds=[const_xt(1.0), const_xt(-1.0)],
            initial_data=[lambda x: smooth_bump(x, 1.6, 1.0),
                          lambda x: smooth_bump(x, 2.2, 1.0)],
            coupling=[[const_xt(0.5), const_xt(0.5)],
                      [const_xt(0.5), const_xt(0.5)]],
            horizon=1.0, extent=4.0),
        "source": SystemSpec(
            n=2, r=1, speeds=[const_xt(1.0), const_xt(-1.0)],
            initial_data=[zeros, zeros],
            source=[const_xt(1.0), const_xt(1.0)], horizon=1.0, extent=4.0),
        "three-component": SystemSpec(
            n=3, r=2, speeds=[const_xt(2.0), const_xt(1.0), const_xt(-1.0)],
            initial_data=[lambda x: smooth_bump(x, 1.5, 0.8),
                          lambda x: smooth_bump(x, 2.0, 0.8), v_bump],
            coupling=[[None, const_xt(0.1), None],
                      [const_xt(0.1), None, const_xt(0.1)],
                      [None, const_xt(0.1), None]],
            boundary_matrix=[[lambda t: 0.5], [lambda t: 0.5]],
            boundary_data=[lambda t: 0.0, lambda t: 0.0],
            horizon=1.0, extent=4.0),
        "mixed-data": SystemSpec(
            n=2, r=1, speeds=[const_xt(1.5), const_xt(-0.5)],
            initial_data=[lambda x: smooth_bump(x, 2.0, 1.2),
                          lambda x: 0.5 * smooth_bump(x, 2.5, 0.9)],
            coupling=[[None, const_xt(0.25)], [const_xt(0.25), None]],
            source=[const_xt(0.2), None],
            boundary_matrix=[[lambda t: 0.75]],
            boundary_data=[lambda t: 0.1 * smoothstep((t - 0.15) / 0.3)],
            horizon=1.0, extent=4.0),
    }
    return systems


def test_acceptance_05_gronwall_invariant():
    """Every corpus system (reflection, coupling, sources, three components,
    a regularized transmission run) satisfies the a-priori sup bound."""
    failures = []
    details = []
    for name, spec in _gronwall_corpus().items():
        f = solve_mixed(spec, 100, cfl=0.9)
        dom = determination_domain((0.0, spec.extent),
                                   f.scheme_metadata["max_speed"] * 1.01,
                                   spec.horizon)
        g = measure_gronwall_inputs(spec, dom, resolution=401)
        chk = check_bound(f, g, dom)
        details.append("%s sup %.3f <= %.3f" % (name,
                                                max(chk.component_sups),
                                                chk.bound))
        if not chk.passed:
            failures.append(name)
    # regularized transmission run at a mid-schedule width
    prob = TransmissionProblem(medium=MEDIUM, u0=gentle_ramp,
                               v0=gentle_plateau, horizon=1.0, extent=4.0)
    fields = regularized_family(prob, build_kernel(0, 1.0), (1e-2,), nx=100)
    fld = fields[0]
    spec_proxy = SystemSpec(
        n=2, r=1, speeds=[const_xt(2.0), const_xt(-2.0)],
        initial_data=[gentle_ramp, gentle_plateau],
        boundary_matrix=[[lambda t: 1.0]], horizon=1.0, extent=4.0)
    dom = determination_domain((0.0, 4.0), 2.0 * 1.01, 1.0)
    g = measure_gronwall_inputs(spec_proxy, dom, resolution=401)
    chk = check_bound(fld, g, dom)
    details.append("transmission sup %.3f <= %.3f"
                   % (max(chk.component_sups), chk.bound))
    if not chk.passed:
        failures.append("transmission")
    ok = not failures
    assert report(5, ok, "; ".join(details))


def _coupled_instance():
    return SystemSpec(
        n=2, r=1, speeds=[const_xt(1.0), const_xt(-1.0)],
        initial_data=[lambda x: smooth_bump(x, 1.6, 1.0),
                      lambda x: smooth_bump(x, 2.2, 1.0)],
        coupling=[[const_xt(0.5), const_xt(0.5)],
                  [const_xt(0.5), const_xt(0.5)]],
        horizon=1.0, extent=4.0)


def test_acceptance_06_oracle_agreement():
    """Fixed-point integral solver and marching scheme agree within 5e-2 on
    the 50x50 grid and 2e-2 on the 100x100 grid."""
    spec = _coupled_instance()
    details = []
    ok = True
    for n, tol in ((50, 5e-2), (100, 2e-2)):
        fp = picard_solve(spec, n, n)
        fm = solve_mixed(spec, n, cfl=0.9)
        worst = 0.0
        for m, tm in enumerate(fp.t):
            for i in range(2):
                sampled = fm.sample(fp.x, np.full_like(fp.x, tm), i)
                worst = max(worst, float(np.max(np.abs(
                    sampled - fp.values[m, :, i]))))
        details.append("%dx%d diff %.4f (tol %g)" % (n, n, worst, tol))
        ok = ok and worst <= tol
    assert report(6, ok, "; ".join(details))


def test_acceptance_07_broken_characteristic_limit():
    """The sharp broken foot is exact and the traced mollified feet stay
    within three widths of it at every schedule eps."""
    limit = broken_foot(MEDIUM, (1.5, 0.5), +1)
    exact_ok = limit.x == 0.75
    prob = TransmissionProblem(medium=MEDIUM, u0=zeros, v0=zeros,
                               horizon=1.0, extent=4.0)
    rep = characteristic_convergence(prob, build_kernel(0, 1.0), (1.5, 0.5),
                                     DEFAULT_SCHEDULE)
    ok = exact_ok and rep.all_within_3eta
    detail = "limit %.4f exact=%s; errors %s vs 3*eta %s" % (
        limit.x, exact_ok,
        ["%.4f" % r[5] for r in rep.rows],
        ["%.4f" % (3 * r[1]) for r in rep.rows])
    assert report(7, ok, detail)


def test_acceptance_07_bracket_containment():
    """Faithful check of the closed-form containment x1 <= foot <= x2 with
    M = max speed * 1.01, per width law, at start (1.5, 0.5).

    This check fails by construction of the stated upper bracket: containment
    against x2 demands the traced ray cross the width-2*eta transition layer
    in time at most 2*eta/M, i.e. at the maximum speed throughout, while the
    mollified speed is strictly below that maximum inside the layer.  The
    traced foot therefore always lands slightly above x2 (the sharp limit
    0.75 itself exceeds x2 = 0.75 - 0.5*eta at every eta).  The failure is
    recorded deliberately; the effective convergence statement is the
    3*eta error bound of the companion criterion, which passes.
    """
    prob = TransmissionProblem(medium=MEDIUM, u0=zeros, v0=zeros,
                               horizon=1.0, extent=4.0)
    rep = characteristic_convergence(prob, build_kernel(0, 1.0), (1.5, 0.5),
                                     DEFAULT_SCHEDULE)
    rows = ["eps=%g foot=%.4f in [%.4f, %.4f]: %s"
            % (r[0], r[2], r[3], r[4], r[6]) for r in rep.rows]
    ok = rep.all_contained
    assert report(7, ok, "containment " + "; ".join(rows))


def test_acceptance_08_association():
    """Two-speed scenario at 200x200: the pairing of (regularized -
    classical) against an interior bump is non-increasing within 10% slack
    and its final magnitude is below 1e-2 * |psi|_1 * sup|data|, for both
    the rightgoing and leftgoing components."""
    prob = TransmissionProblem(medium=MEDIUM, u0=gentle_ramp,
                               v0=gentle_plateau, horizon=1.0, extent=4.0)
    psi = TestFunction(center=(1.55, 0.65), radii=(0.22, 0.16))
    fields = regularized_family(prob, build_kernel(0, 1.0), DEFAULT_SCHEDULE,
                                nx=200)
    details = []
    ok = True
    for comp, name in ((0, "u"), (1, "v")):
        rep = association_test(fields, prob, psi, component=comp)
        details.append("%s: |I| %s, tol %.2e, monotone=%s final=%s"
                       % (name, ["%.2e" % abs(v) for v in rep.integrals],
                          rep.tolerance, rep.monotone_ok, rep.final_ok))
        ok = ok and rep.verdict
    assert report(8, ok, "; ".join(details))


def test_acceptance_09_uniqueness_proxy():
    """Solutions built from two distinct moment-order-2 kernels at the
    canonical width law differ with fitted decay exponent >= 1 and log-log
    fit residual <= 0.2."""
    c_raw = lambda x: 1.5 + 0.3 * np.tanh((np.asarray(x, dtype=float) - 2.0) / 0.7)
    u0_raw = lambda x: smooth_bump(x, 1.2, 0.5)
    v0_raw = lambda x: smooth_bump(x, 2.6, 0.5)
    kernels = {"wide": build_kernel(2, 1.0), "narrow": build_kernel(2, 0.6)}
    X, T, nx = 4.0, 1.0, 100
    dense = np.linspace(0.0, X, 4 * nx + 1)
    schedule = (3e-2, 1e-2, 3e-3, 1e-3)
    half = const_xt(0.5)

    def mollify_tab(f, kern, eps):
        sk = scale_kernel(kern, eps)
        vals = np.array([convolve(f, sk, float(x)) for x in dense])
        return lambda x, v=vals: np.interp(np.asarray(x, dtype=float),
                                           dense, v)

    fields = {}
    for tag, kern in kernels.items():
        for eps in schedule:
            ce = mollify_tab(c_raw, kern, eps)
            spec = SystemSpec(
                n=2, r=1,
                speeds=[lambda x, t, c=ce: c(x), lambda x, t, c=ce: -c(x)],
                initial_data=[mollify_tab(u0_raw, kern, eps),
                              mollify_tab(v0_raw, kern, eps)],
                coupling=[[half, half], [half, half]],
                boundary_matrix=[[lambda t: 0.5]],
                horizon=T, extent=X)
            fields[(tag, eps)] = solve_mixed(spec, nx, cfl=0.9, nt=60)

    fam_a = EpsilonFamily(((0.0, X), (0.0, T)),
                          lambda e, x, t: fields[("wide", e)].sample(x, t, 0))
    fam_b = EpsilonFamily(((0.0, X), (0.0, T)),
                          lambda e, x, t: fields[("narrow", e)].sample(x, t, 0))
    rep = check_negligible(fam_a, fam_b, ((0.2, 3.8), (0.0, T)),
                           schedule=schedule, grid_resolution=48)
    exponent = rep.model_residuals.get("exponent", 0.0)
    ok = rep.fitted_class.kind == "negligible" and exponent >= 1.0 \
        and rep.fit_residual <= 0.2
    assert report(9, ok, "exponent %.2f, log-log residual %.3f, sups %s"
                  % (exponent, rep.fit_residual,
                     ["%.1e" % s for s in rep.sup_norms]))


SOLVE_INI = """
[system]
n = 2
r = 1
T = 1.0
X = 4.0

[speed]
1 = constant:1.0
2 = constant:-1.0

[coupling]
1,2 = constant:0.5
2,1 = constant:0.5

[initial]
1 = bump:center=1.6,width=1.0,amplitude=1.0
2 = bump:center=2.2,width=1.0,amplitude=1.0

[grid]
nx = 60
cfl = 0.9
"""

KERNEL_INI = """
[kernel]
q = 2
radius = 1.0
"""


def test_acceptance_10_determinism(tmp_path):
    """Identical CLI runs produce byte-identical CSV artifacts."""
    cfgs = {"kernel": KERNEL_INI, "solve": SOLVE_INI}
    digests = []
    for tag in ("first", "second"):
        acc = hashlib.sha256()
        for name, text in sorted(cfgs.items()):
            cfg = tmp_path / ("%s.ini" % name)
            cfg.write_text(text)
            out = tmp_path / tag / name
            code = cli_run(str(cfg), name, outdir=str(out), plots=False)
            assert code == 0
            for fname in sorted(os.listdir(out)):
                if fname.endswith(".csv"):
                    acc.update(fname.encode())
                    acc.update((out / fname).read_bytes())
        digests.append(acc.hexdigest())
    ok = digests[0] == digests[1]
    assert report(10, ok, "sha256 %s" % digests[0][:16])
