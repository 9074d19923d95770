import numpy as np
import pytest

from molliwave.embedding import (
    DEFAULT_SCHEDULE,
    EmbeddingError,
    EpsilonFamily,
    check_negligible,
    classify_growth,
    embed_linf,
    fd_smoothness_drift,
    linear_law,
    log_inverse_law,
    smooth_cutoff,
)
from molliwave.kernels import scale_kernel
from tests.conftest import smooth_bump, step_fn


def synthetic(fn):
    return EpsilonFamily(domain=((0.0, 4.0),), evaluator=fn)


class TestWidthLaws:
    def test_log_inverse_values(self):
        law = log_inverse_law()
        assert law(1e-2) == pytest.approx(1.0 / np.log(100.0))
        assert law(1e-1) > law(1e-2) > law(1e-3) > 0

    def test_linear(self):
        assert linear_law()(3e-3) == 3e-3

    def test_domain_of_definition(self):
        with pytest.raises(EmbeddingError):
            log_inverse_law()(1.5)
        with pytest.raises(EmbeddingError):
            linear_law()(0.0)


class TestSmoothCutoff:
    def test_zero_radius_is_identity(self):
        cut = smooth_cutoff(0.0)
        xs = np.linspace(0, 4, 33)
        np.testing.assert_array_equal(cut(xs), np.ones_like(xs))

    def test_ramp_shape(self):
        cut = smooth_cutoff(0.5)
        assert np.all(cut(np.linspace(0.0, 0.5, 9)) == 0.0)
        assert np.all(cut(np.linspace(1.0, 4.0, 9)) == 1.0)
        mid = cut(np.linspace(0.55, 0.95, 9))
        assert np.all(np.diff(mid) > 0)

    def test_smoothness(self):
        cut = smooth_cutoff(0.5)
        assert fd_smoothness_drift(lambda x: float(cut(x)), 0.3, 1.2) < 1e-5


class TestEmbedLinf:
    def test_constant_stays_constant(self, kernel_q0):
        c = 3.25
        fam = embed_linf(lambda x: c * np.ones_like(np.asarray(x, dtype=float)),
                         kernel_q0, log_inverse_law(), zero_radius=0.0,
                         domain=(0.0, 4.0))
        for eps in (1e-1, 1e-3):
            vals = fam(eps, np.linspace(1.0, 3.0, 7))
            np.testing.assert_allclose(vals, c, rtol=1e-9)

    def test_step_value_at_jump_is_half(self, kernel_q0):
        fam = embed_linf(step_fn, kernel_q0, log_inverse_law(), jumps=[1.0],
                         domain=(0.0, 4.0))
        assert fam(1e-2, 1.0) == pytest.approx(0.5, abs=1e-9)

    def test_step_derivative_log_law(self, kernel_q0):
        # oracle: the exact derivative of a mollified step is
        # jump * scaled_kernel(x - x0); its sup is kernel(0)/width
        fam = embed_linf(step_fn, kernel_q0, log_inverse_law(), jumps=[1.0],
                         domain=(0.0, 4.0))
        chi0 = kernel_q0.peak
        ratios = []
        for eps in (1e-1, 1e-2, 1e-3):
            log_factor = abs(np.log(eps))
            xs = np.linspace(0.5, 1.5, 513)  # includes the jump point
            sup = float(np.max(np.abs(fam.x_derivative(eps, xs))))
            assert sup == pytest.approx(chi0 * log_factor, rel=1e-3)
            ratios.append(sup / log_factor)
        spread = (max(ratios) - min(ratios)) / min(ratios)
        assert spread < 0.05

    def test_derivative_matches_direct_kernel(self, kernel_q0):
        fam = embed_linf(step_fn, kernel_q0, log_inverse_law(), jumps=[1.0],
                         domain=(0.0, 4.0))
        eps = 1e-2
        eta = log_inverse_law()(eps)
        sk = scale_kernel(kernel_q0, eta)
        for x in (0.95, 1.0, 1.07):
            assert fam.x_derivative(eps, x) == pytest.approx(sk(x - 1.0), rel=1e-8)

    def test_global_bound_nonnegative_kernel(self, kernel_q0):
        # averaging against a nonnegative unit-mass kernel cannot expand the sup
        fam = embed_linf(step_fn, kernel_q0, log_inverse_law(), jumps=[1.0],
                         domain=(0.0, 4.0))
        xs = np.linspace(0.0, 4.0, 1025)
        for eps in DEFAULT_SCHEDULE:
            sup = float(np.max(np.abs(fam(eps, xs))))
            assert sup <= 1.0 + 1e-9

    def test_sign_changing_kernel_overshoots(self, kernel_q2):
        # the sup bound genuinely fails for moment order >= 2: the kernel
        # has negative lobes and the mollified step leaves [0, 1]
        fam = embed_linf(step_fn, kernel_q2, log_inverse_law(), jumps=[1.0],
                         domain=(0.0, 4.0))
        xs = np.linspace(0.5, 1.5, 513)
        sup = float(np.max(np.abs(fam(1e-2, xs))))
        assert sup > 1.0 + 1e-3

    def test_zero_radius_cutoff_applied(self, kernel_q0):
        one = lambda x: np.ones_like(np.asarray(x, dtype=float))
        fam = embed_linf(one, kernel_q0, log_inverse_law(), zero_radius=0.5,
                         domain=(0.0, 4.0))
        assert abs(fam(1e-3, 0.2)) < 1e-12
        assert fam(1e-3, 3.0) == pytest.approx(1.0, rel=1e-9)

    def test_zero_radius_validation(self, kernel_q0):
        one = lambda x: np.ones_like(np.asarray(x, dtype=float))
        with pytest.raises(EmbeddingError):
            embed_linf(one, kernel_q0, log_inverse_law(), zero_radius=3.0,
                       domain=(0.0, 4.0))

    def test_smooth_in_x_for_fixed_eps(self, kernel_q0):
        fam = embed_linf(step_fn, kernel_q0, log_inverse_law(), jumps=[1.0],
                         domain=(0.0, 4.0))
        drift = fd_smoothness_drift(lambda x: fam(1e-1, float(x)), 0.8, 1.2)
        assert drift < 1e-4


class TestClassifyGrowth:
    def test_bounded(self):
        fam = synthetic(lambda e, x: np.sin(np.asarray(x, dtype=float)))
        rep = classify_growth(fam, (0.0, 4.0), grid_resolution=128)
        assert rep.fitted_class.kind == "bounded"

    def test_log_growth_slope(self):
        fam = synthetic(lambda e, x: abs(np.log(e)) * smooth_bump(x, 2.0, 1.0))
        rep = classify_growth(fam, (0.0, 4.0), grid_resolution=128)
        assert rep.fitted_class.kind == "log"
        assert rep.fitted_class.parameter == pytest.approx(1.0, rel=0.05)

    def test_power_growth_exponent(self):
        fam = synthetic(lambda e, x: e ** -2.0 * smooth_bump(x, 2.0, 1.0))
        rep = classify_growth(fam, (0.0, 4.0), grid_resolution=128)
        assert rep.fitted_class.kind == "power"
        assert rep.fitted_class.parameter == pytest.approx(2.0, rel=0.05)

    @pytest.mark.parametrize("factor", [0.5, 3.0])
    def test_scale_consistency(self, factor):
        base = lambda e, x: abs(np.log(e)) * smooth_bump(x, 2.0, 1.0)
        rep1 = classify_growth(synthetic(base), (0.0, 4.0), grid_resolution=64)
        rep2 = classify_growth(
            synthetic(lambda e, x: factor * base(e, x)), (0.0, 4.0),
            grid_resolution=64)
        assert rep2.fitted_class.kind == rep1.fitted_class.kind
        assert rep2.fitted_class.parameter == pytest.approx(
            factor * rep1.fitted_class.parameter, rel=0.05)
        np.testing.assert_allclose(rep2.sup_norms,
                                   factor * np.asarray(rep1.sup_norms),
                                   rtol=1e-12)

    def test_two_dimensional_region(self):
        fam = EpsilonFamily(
            domain=((0.0, 4.0), (0.0, 1.0)),
            evaluator=lambda e, x, t: np.asarray(x, dtype=float) * 0 + np.cos(t))
        rep = classify_growth(fam, ((0.0, 4.0), (0.0, 1.0)),
                              grid_resolution=32)
        assert rep.fitted_class.kind == "bounded"

    def test_schedule_validation(self):
        fam = synthetic(lambda e, x: np.asarray(x, dtype=float) * 0.0)
        with pytest.raises(EmbeddingError):
            classify_growth(fam, (0.0, 4.0), schedule=(1e-1, 1e-2))
        with pytest.raises(EmbeddingError):
            classify_growth(fam, (0.0, 4.0), schedule=(1e-1, 3e-2, 1e-2, 2e-2))
        with pytest.raises(EmbeddingError):
            classify_growth(fam, (0.0, 4.0), schedule=(1e-1, 7e-2, 5e-2, 2e-2))

    def test_nonfinite_values_reported_with_location(self):
        def ev(e, x):
            vals = np.asarray(x, dtype=float).copy()
            vals[vals > 3.9] = np.nan
            return vals
        fam = synthetic(ev)
        with pytest.raises(EmbeddingError, match="eps"):
            classify_growth(fam, (0.0, 4.0), grid_resolution=64)


class TestCheckNegligible:
    def test_identical_families_saturate(self):
        fam = synthetic(lambda e, x: smooth_bump(x))
        rep = check_negligible(fam, fam, (0.0, 4.0), q_max=5,
                               grid_resolution=64)
        assert rep.fitted_class.kind == "negligible"
        assert rep.fitted_class.parameter == 5

    def test_quadratic_difference(self):
        fa = synthetic(lambda e, x: smooth_bump(x)
                       + e ** 2 * np.sin(np.asarray(x, dtype=float)))
        fb = synthetic(lambda e, x: smooth_bump(x))
        rep = check_negligible(fa, fb, (0.0, 4.0), grid_resolution=64)
        assert rep.fitted_class.kind == "negligible"
        exponent = rep.model_residuals["exponent"]
        assert exponent == pytest.approx(2.0, rel=0.10)

    def test_slow_difference_classified(self):
        fa = synthetic(lambda e, x: smooth_bump(x)
                       + abs(np.log(e)) * 0.1 * smooth_bump(x, 2.5, 0.5))
        fb = synthetic(lambda e, x: smooth_bump(x))
        rep = check_negligible(fa, fb, (0.0, 4.0), grid_resolution=64)
        assert rep.fitted_class.kind == "log"

    def test_step_two_kernels_away_from_jump(self, kernel_q2, kernel_q2_narrow):
        # mollifier support misses a region at positive distance from the
        # jump once the width law shrinks below it, so the two embeddings
        # agree there identically: negligible at the saturation order
        fa = embed_linf(step_fn, kernel_q2, linear_law(), jumps=[1.0],
                        domain=(0.0, 4.0))
        fb = embed_linf(step_fn, kernel_q2_narrow, linear_law(), jumps=[1.0],
                        domain=(0.0, 4.0))
        rep = check_negligible(fa, fb, (1.5, 3.0),
                               schedule=(1e-1, 3e-2, 1e-2, 3e-3, 1e-4),
                               q_max=8, grid_resolution=48)
        assert rep.fitted_class.kind == "negligible"
        assert rep.fitted_class.parameter >= 1

    def test_smooth_data_two_kernels_power_decay(self, kernel_q2,
                                                 kernel_q2_narrow):
        # for smooth data the two moment-order-2 embeddings differ at the
        # quartic remainder order under the canonical width law
        smooth = lambda x: np.sin(2.0 * np.asarray(x, dtype=float))
        fa = embed_linf(smooth, kernel_q2, linear_law(), domain=(0.0, 4.0))
        fb = embed_linf(smooth, kernel_q2_narrow, linear_law(), domain=(0.0, 4.0))
        rep = check_negligible(fa, fb, (1.0, 3.0),
                               schedule=(1e-1, 3e-2, 1e-2, 3e-3),
                               grid_resolution=48)
        assert rep.fitted_class.kind == "negligible"
        assert rep.fitted_class.parameter >= 1
        assert rep.fit_residual <= 0.2

    def test_domain_mismatch_rejected(self):
        fa = synthetic(lambda e, x: smooth_bump(x))
        fb = EpsilonFamily(domain=((0.0, 2.0),),
                           evaluator=lambda e, x: smooth_bump(x))
        with pytest.raises(EmbeddingError):
            check_negligible(fa, fb, (0.0, 2.0))


def test_growth_report_csv_round_trip(tmp_path):
    fam = synthetic(lambda e, x: abs(np.log(e)) * smooth_bump(x, 2.0, 1.0))
    rep = classify_growth(fam, (0.0, 4.0), grid_resolution=64)
    rows = rep.csv_rows()
    assert len(rows) == len(DEFAULT_SCHEDULE)
    footer = rep.csv_footer()
    assert footer.startswith("# fit: ")
    assert "LogGrowth" in footer
