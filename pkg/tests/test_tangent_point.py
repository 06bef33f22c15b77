import numpy as np
import pytest
import scipy.integrate

from knotflow.curve import HermiteCurve, HermiteField, PeriodicPartition, from_samples
from knotflow.tangent_point import (
    NonEmbeddedError,
    TpParams,
    build_quadrature,
    sobolev_seminorm,
    tp_classical,
    tp_energy,
    tp_first_variation,
    tp_second_variation,
    wedge_pair,
)

from conftest import fourier_maps, random_embedded_curve, random_field, shift_curve
from test_curve import circle_maps


def unit_length_circle_maps(warp=0.0):
    """Unit-length circle; warp > 0 makes the speed non-constant."""
    r = 1.0 / (2.0 * np.pi)
    w = 2.0 * np.pi

    def phi(x):
        return x + warp * np.sin(w * x) / w

    def dphi(x):
        return 1.0 + warp * np.cos(w * x)

    def f(x):
        x = np.asarray(x, dtype=float)
        a = w * phi(x)
        return r * np.stack([np.cos(a), np.sin(a), np.zeros_like(a)], axis=-1)

    def fp(x):
        x = np.asarray(x, dtype=float)
        a = w * phi(x)
        return dphi(x)[..., None] * np.stack([-np.sin(a), np.cos(a), np.zeros_like(a)], axis=-1)

    return f, fp


def peanut_maps(a):
    """Two-lobed planar curve; the lobes pinch toward the origin as a -> 1."""

    def f(x):
        x = np.asarray(x, dtype=float)
        r = 1.0 + a * np.cos(4.0 * np.pi * x)
        return np.stack([r * np.cos(2.0 * np.pi * x), r * np.sin(2.0 * np.pi * x),
                         np.zeros_like(x)], axis=-1)

    def fp(x):
        x = np.asarray(x, dtype=float)
        r = 1.0 + a * np.cos(4.0 * np.pi * x)
        dr = -4.0 * np.pi * a * np.sin(4.0 * np.pi * x)
        c, s = np.cos(2.0 * np.pi * x), np.sin(2.0 * np.pi * x)
        return np.stack([dr * c - 2.0 * np.pi * r * s, dr * s + 2.0 * np.pi * r * c,
                         np.zeros_like(x)], axis=-1)

    return f, fp


class TestWedgePair:
    def test_orthonormal(self):
        e1, e2 = np.eye(3)[0], np.eye(3)[1]
        assert wedge_pair(e1, e2, e1, e2) == pytest.approx(1.0)

    def test_degenerate(self):
        rng = np.random.default_rng(0)
        a, c, d = rng.normal(size=(3, 3))
        assert wedge_pair(a, a, c, d) == pytest.approx(0.0, abs=1e-14)

    def test_cross_product_oracle(self):
        rng = np.random.default_rng(1)
        a, b, c, d = rng.normal(size=(4, 10, 3))
        via_cross = np.einsum("ni,ni->n", np.cross(a, b), np.cross(c, d))
        np.testing.assert_allclose(wedge_pair(a, b, c, d), via_cross, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(
            wedge_pair(a, b, a, b),
            np.sum(np.cross(a, b) ** 2, axis=1), rtol=1e-12)


class TestParamsAndRule:
    def test_param_validation(self):
        with pytest.raises(ValueError):
            TpParams(q=2.0)
        with pytest.raises(ValueError):
            TpParams(q=4.0)
        with pytest.raises(ValueError):
            TpParams(q=3.0, epsilon=-0.1)
        with pytest.raises(ValueError):
            TpParams(q=3.0, gauss_order=0)

    def test_rule_excludes_diagonal_band(self):
        part = PeriodicPartition.uniform(40)
        rule = build_quadrature(part, TpParams(q=3.0))
        assert rule.epsilon == pytest.approx(2.0 / 40.0)
        ci, cj = rule.cell_pairs[:, 0], rule.cell_pairs[:, 1]
        assert np.all(ci != cj)
        gap = np.abs((ci - cj + 20) % 40 - 20)
        # midpoint distance k/N >= 2/N means |i-j| >= 2
        assert gap.min() == 2
        # ordered pairs: both (i,j) and (j,i) present
        assert rule.pair_count == 40 * 37 * 4

    def test_weights_tile_cell_areas(self):
        part = PeriodicPartition(np.array([0.0, 0.21, 0.5, 0.77]))
        rule = build_quadrature(part, TpParams(q=3.0, epsilon=0.1, gauss_order=3))
        assert np.all(rule.weight > 0.0)
        h = part.widths
        for (i, j) in rule.cell_pairs:
            mask = (rule.ax // 3 == i) & (rule.ay // 3 == j)
            assert rule.weight[mask].sum() == pytest.approx(h[i] * h[j], rel=1e-12)

    def test_epsilon_too_large(self):
        part = PeriodicPartition.uniform(10)
        with pytest.raises(ValueError):
            build_quadrature(part, TpParams(q=3.0, epsilon=0.6))


class TestEnergy:
    def test_circle_closed_form(self):
        # the integrand of the constant-speed circle is identically pi^q;
        # extrapolating the cutoff to zero recovers (1/q) pi^q
        f, fp = circle_maps(1.0)
        part = PeriodicPartition.uniform(200)
        curve = from_samples(part, f, fp)
        h = part.h_max
        e_full = tp_energy(curve, TpParams(q=3.0, epsilon=2.0 * h))
        e_half = tp_energy(curve, TpParams(q=3.0, epsilon=h))
        extrapolated = 2.0 * e_half - e_full
        exact = np.pi ** 3 / 3.0
        assert abs(extrapolated - exact) < 0.01 * exact
        assert e_full < exact

    def test_radius_independent(self):
        part = PeriodicPartition.uniform(80)
        params = TpParams(q=3.0)
        values = []
        for radius in (0.5, 1.0, 5.0):
            f, fp = circle_maps(radius)
            values.append(tp_energy(from_samples(part, f, fp), params))
        assert values[0] == pytest.approx(values[1], rel=1e-12)
        assert values[2] == pytest.approx(values[1], rel=1e-12)

    def test_gauss_refinement(self):
        f, fp = fourier_maps([(np.array([2.0, 0, 0]), np.array([0, 1.0, 0]), 1)])
        curve = from_samples(PeriodicPartition.uniform(128), f, fp)
        e2 = tp_energy(curve, TpParams(q=3.0, gauss_order=2))
        e4 = tp_energy(curve, TpParams(q=3.0, gauss_order=4))
        assert abs(e2 - e4) < 1e-6 * abs(e4)

    def test_pinch_monotone(self):
        part = PeriodicPartition.uniform(160)
        params = TpParams(q=3.0)
        energies = []
        for a in (0.5, 0.7, 0.8, 0.9):
            f, fp = peanut_maps(a)
            energies.append(tp_energy(from_samples(part, f, fp), params))
        assert all(b > a for a, b in zip(energies, energies[1:]))

    def test_non_embedded_detected(self):
        # doubly covered circle: u(x) and u(x + 1/2) coincide exactly
        f, fp = fourier_maps([(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), 2)])
        curve = from_samples(PeriodicPartition.uniform(40), f, fp)
        with pytest.raises(NonEmbeddedError):
            tp_energy(curve, TpParams(q=3.0))

    def test_rigid_motion_invariance(self):
        curve = random_embedded_curve(3, n=60)
        params = TpParams(q=2.5)
        base = tp_energy(curve, params)
        th = 1.1
        R = np.array([
            [np.cos(th), 0.0, np.sin(th)],
            [0.0, 1.0, 0.0],
            [-np.sin(th), 0.0, np.cos(th)],
        ])
        moved = curve.rotated(R).translated([0.3, -4.0, 2.0])
        assert tp_energy(moved, params) == pytest.approx(base, rel=1e-10)

    def test_deterministic(self):
        curve = random_embedded_curve(9, n=40)
        params = TpParams(q=3.3)
        assert tp_energy(curve, params) == tp_energy(curve, params)


class TestFirstVariation:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_finite_difference(self, seed):
        curve = random_embedded_curve(seed, n=50)
        params = TpParams(q=3.0)
        rule = build_quadrature(curve.partition, params)
        fv = tp_first_variation(curve, params, rule)
        # perturbation directions a fraction of the curve scale keep the
        # cubic term of the difference quotient below the tolerance
        field = random_field(100 + seed, 50, scale=0.2)
        s = 1e-5
        fd = (
            tp_energy(shift_curve(curve, field, s), params, rule)
            - tp_energy(shift_curve(curve, field, -s), params, rule)
        ) / (2.0 * s)
        assert fv.pairing(field) == pytest.approx(fd, rel=1e-5)

    def test_translation_invariance(self):
        curve = random_embedded_curve(4, n=40)
        fv = tp_first_variation(curve, TpParams(q=3.0))
        const = HermiteField(np.tile([1.0, -2.0, 0.5], (40, 1)), np.zeros((40, 3)))
        scale = np.abs(fv.position_grad).max()
        assert abs(fv.pairing(const)) < 1e-12 * scale

    def test_circle_gradient_radial(self):
        f, fp = circle_maps(1.0)
        curve = from_samples(PeriodicPartition.uniform(100), f, fp)
        fv = tp_first_variation(curve, TpParams(q=3.0))
        radial = curve.positions / np.linalg.norm(curve.positions, axis=1, keepdims=True)
        along = np.sum(fv.position_grad * radial, axis=1)
        residual = fv.position_grad - along[:, None] * radial
        assert np.abs(residual).max() < 1e-6 * np.abs(along).max()

    def test_rotation_equivariance(self):
        curve = random_embedded_curve(5, n=40)
        params = TpParams(q=3.0)
        th = 0.8
        R = np.array([
            [1.0, 0.0, 0.0],
            [0.0, np.cos(th), -np.sin(th)],
            [0.0, np.sin(th), np.cos(th)],
        ])
        field = random_field(55, 40)
        rotated_field = HermiteField(field.positions @ R.T, field.derivatives @ R.T)
        a = tp_first_variation(curve, params).pairing(field)
        b = tp_first_variation(curve.rotated(R), params).pairing(rotated_field)
        assert b == pytest.approx(a, rel=1e-10)

    def test_dof_layout(self):
        curve = random_embedded_curve(6, n=30)
        fv = tp_first_variation(curve, TpParams(q=3.0))
        dofs = fv.as_dofs()
        np.testing.assert_array_equal(dofs[0::2], fv.position_grad)
        np.testing.assert_array_equal(dofs[1::2], fv.derivative_grad)


def merged_second_variation(curve, v, w, params, rule):
    """Independent oracle: exact Hessian of the quadrature sum, merged algebra."""
    q = params.q
    xs = rule.grid_x[rule.ax]
    ys = rule.grid_x[rule.ay]

    def pair_data(obj):
        if isinstance(obj, HermiteField):
            obj = HermiteCurve(curve.partition, obj.positions, obj.derivatives)
        vx = obj.evaluate(xs)
        vy = obj.evaluate(ys)
        ty = obj.evaluate(ys, order=1)
        return vx - vy, ty

    EU, TU = pair_data(curve)
    EV, TV = pair_data(v)
    EW, TW = pair_data(w)
    dot = lambda a, b: np.einsum("ni,ni->n", a, b)
    D2 = dot(EU, EU)
    AA = dot(TU, TU)
    AE = dot(TU, EU)
    K2 = AA * D2 - AE * AE
    k4 = K2 ** (0.5 * (q - 4.0))
    k2 = K2 ** (0.5 * (q - 2.0))
    k0 = K2 ** (0.5 * q)

    def wp(a, b, c, d):
        return dot(a, c) * dot(b, d) - dot(a, d) * dot(b, c)

    av = wp(TU, EU, TU, EV)
    bv = wp(TU, EU, TV, EU)
    aw = wp(TU, EU, TU, EW)
    bw = wp(TU, EU, TW, EU)
    wv = wp(TU, EV, TU, EW) + wp(TU, EV, TW, EU) + wp(TV, EU, TU, EW) + wp(TV, EU, TW, EU)
    cross = wp(TU, EU, TW, EV) + wp(TU, EU, TV, EW)
    integ = (
        (q - 2.0) * k4 / D2 ** q * (av + bv) * (aw + bw)
        + k2 / D2 ** q * (wv + cross)
        - 2.0 * q * k2 / D2 ** (q + 1.0) * ((av + bv) * dot(EU, EW) + (aw + bw) * dot(EU, EV))
        + 4.0 * (q + 1.0) * k0 / D2 ** (q + 2.0) * dot(EU, EV) * dot(EU, EW)
        - 2.0 * k0 / D2 ** (q + 1.0) * dot(EV, EW)
    )
    return float(np.sum(rule.weight * integ))


class TestSecondVariation:
    def test_symmetry(self):
        curve = random_embedded_curve(7, n=50)
        params = TpParams(q=3.0)
        rule = build_quadrature(curve.partition, params)
        v = random_field(70, 50)
        w = random_field(71, 50)
        a = tp_second_variation(curve, v, w, params, rule)
        b = tp_second_variation(curve, w, v, params, rule)
        assert b == pytest.approx(a, rel=1e-8)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_finite_difference_against_first_variation(self, seed):
        curve = random_embedded_curve(seed, n=50)
        params = TpParams(q=3.0)
        rule = build_quadrature(curve.partition, params)
        v = random_field(80 + seed, 50)
        w = random_field(90 + seed, 50)
        s = 1e-5
        fd = (
            tp_first_variation(shift_curve(curve, v, s), params, rule).pairing(w)
            - tp_first_variation(shift_curve(curve, v, -s), params, rule).pairing(w)
        ) / (2.0 * s)
        value = tp_second_variation(curve, v, w, params, rule)
        assert value == pytest.approx(fd, rel=1e-4)

    def test_second_difference_of_energy(self):
        curve = random_embedded_curve(12, n=40)
        params = TpParams(q=3.5)
        rule = build_quadrature(curve.partition, params)
        v = random_field(120, 40)
        s = 1e-4
        fd = (
            tp_energy(shift_curve(curve, v, s), params, rule)
            - 2.0 * tp_energy(curve, params, rule)
            + tp_energy(shift_curve(curve, v, -s), params, rule)
        ) / (s * s)
        assert tp_second_variation(curve, v, v, params, rule) == pytest.approx(fd, rel=1e-4)

    def test_translation_annihilates(self):
        curve = random_embedded_curve(13, n=30)
        params = TpParams(q=3.0)
        const = HermiteField(np.tile([0.4, 1.0, -0.7], (30, 1)), np.zeros((30, 3)))
        w = random_field(130, 30)
        scale = abs(tp_second_variation(curve, w, w, params))
        assert abs(tp_second_variation(curve, const, w, params)) < 1e-12 * scale

    def test_matches_merged_oracle(self):
        # term-by-term assembly against an independently derived merged
        # integrand; equality also certifies that the parameter-difference
        # correction cancels pointwise in the symmetric pair of wedge terms
        curve = random_embedded_curve(14, n=40)
        params = TpParams(q=3.0)
        rule = build_quadrature(curve.partition, params)
        v = random_field(140, 40)
        w = random_field(141, 40)
        ours = tp_second_variation(curve, v, w, params, rule)
        oracle = merged_second_variation(curve, v, w, params, rule)
        assert ours == pytest.approx(oracle, rel=1e-12)


class TestClassical:
    def test_agrees_at_unit_speed(self):
        f, fp = unit_length_circle_maps(0.0)
        curve = from_samples(PeriodicPartition.uniform(100), f, fp)
        params = TpParams(q=3.0)
        a = tp_energy(curve, params)
        b = tp_classical(curve, params)
        assert b == pytest.approx(a, rel=1e-5)

    def test_reparametrization_behaviour(self):
        params = TpParams(q=3.0)
        part = PeriodicPartition.uniform(200)
        f0, fp0 = unit_length_circle_maps(0.0)
        base = from_samples(part, f0, fp0)
        fw, fpw = unit_length_circle_maps(0.5)
        warped = from_samples(part, fw, fpw)
        cl_shift = abs(tp_classical(warped, params) - tp_classical(base, params))
        var_shift = abs(tp_energy(warped, params) - tp_energy(base, params))
        assert cl_shift < 2e-3 * tp_classical(base, params)
        # the flowed functional is genuinely parametrization dependent
        assert var_shift > 10.0 * cl_shift

    def test_difference_shrinks_toward_unit_speed(self):
        params = TpParams(q=3.0)
        part = PeriodicPartition.uniform(200)
        diffs = []
        for warp in (0.6, 0.3, 0.15, 0.075):
            f, fp = unit_length_circle_maps(warp)
            curve = from_samples(part, f, fp)
            diffs.append(abs(tp_classical(curve, params) - tp_energy(curve, params)))
        assert all(b < a for a, b in zip(diffs, diffs[1:]))


class TestSeminorm:
    def test_constant_curve_zero(self):
        part = PeriodicPartition.uniform(20)
        curve = HermiteCurve(part, np.tile([1.0, 2.0, 3.0], (20, 1)), np.zeros((20, 3)))
        rule = build_quadrature(part, TpParams(q=3.0))
        assert sobolev_seminorm(curve, 2.0 / 3.0, 3.0, rule) == 0.0

    def test_parameter_validation(self):
        curve = random_embedded_curve(20, n=20)
        rule = build_quadrature(curve.partition, TpParams(q=3.0))
        with pytest.raises(ValueError):
            sobolev_seminorm(curve, 1.5, 3.0, rule)
        with pytest.raises(ValueError):
            sobolev_seminorm(curve, 0.5, 0.5, rule)

    def test_circle_against_quadrature_oracle(self):
        # independent 1d reduction: pair density at parameter distance d is 2
        radius = 1.0
        s, p = 2.0 / 3.0, 3.0
        f, fp = circle_maps(radius)
        part = PeriodicPartition.uniform(200)
        curve = from_samples(part, f, fp)
        rule = build_quadrature(part, TpParams(q=3.0))
        ours = sobolev_seminorm(curve, s, p, rule)

        def integrand(d):
            jump = 2.0 * np.pi * radius * 2.0 * np.sin(np.pi * d)
            return 2.0 * jump ** p / d ** (1.0 + s * p)

        oracle, _ = scipy.integrate.quad(integrand, rule.epsilon, 0.5, limit=200)
        assert ours == pytest.approx(oracle, rel=0.05)

    def test_resolution_convergence(self):
        s, p = 2.0 / 3.0, 3.0
        f, fp = circle_maps(1.0)
        values = []
        for n in (50, 100, 200, 400):
            part = PeriodicPartition.uniform(n)
            curve = from_samples(part, f, fp)
            rule = build_quadrature(part, TpParams(q=3.0))
            values.append(sobolev_seminorm(curve, s, p, rule))
        # epsilon shrinks with h, so values increase toward the full seminorm
        gaps = np.diff(values)
        assert np.all(gaps > 0.0)
        assert gaps[-1] < gaps[0]
