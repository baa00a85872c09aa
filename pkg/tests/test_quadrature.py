"""Contour quadrature on circles and product contours."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ahrkit.quadrature import (
    Circle,
    MultiContour,
    QuadratureError,
    integrate_circle,
    integrate_multi,
)


class TestCircle:
    def test_rejects_bad_points(self):
        with pytest.raises(ValueError):
            Circle(0.0, 1.0, points=7)
        with pytest.raises(ValueError):
            Circle(0.0, 1.0, points=48)

    def test_rejects_bad_radius(self):
        with pytest.raises(ValueError):
            Circle(0.0, 0.0)

    def test_nodes_on_circle(self):
        c = Circle(1.0 + 2.0j, 0.5, points=16)
        assert np.allclose(np.abs(c.nodes() - c.center), 0.5)


class TestIntegrateCircle:
    def test_residue_one_over_z(self):
        out = integrate_circle(lambda z: 1.0 / z, Circle(0.0, 1.0, points=32))
        assert out.value == pytest.approx(1.0, abs=1e-13)
        assert out.err_estimate < 1e-13

    def test_poisson_coefficient(self):
        # coefficient of z^{-1} in e^{t/z} z^{d-1} is t^d/d!
        t, d = 1.0, 2
        out = integrate_circle(
            lambda z: np.exp(t / z) * z ** (d - 1), Circle(0.0, 0.5, points=64)
        )
        assert out.value == pytest.approx(t**d / math.factorial(d), abs=1e-13)

    def test_entire_integrand_vanishes(self):
        out = integrate_circle(lambda z: np.exp(z) * z**2, Circle(0.0, 0.7, points=32))
        assert abs(out.value) < 1e-14

    def test_radius_independence(self):
        f = lambda z: 1.0 / (z - 0.3)
        a = integrate_circle(f, Circle(0.0, 0.5, points=64)).value
        b = integrate_circle(f, Circle(0.0, 0.9, points=64)).value
        assert a == pytest.approx(b, abs=1e-12)
        assert a == pytest.approx(1.0, abs=1e-12)

    @given(
        st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False),
        st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False),
    )
    @settings(max_examples=40, deadline=None)
    def test_linearity(self, a, b):
        circ = Circle(0.0, 1.0, points=32)
        f = lambda z: 1.0 / z
        g = lambda z: 1.0 / z**2 + np.cos(z)
        combo = integrate_circle(lambda z: a * f(z) + b * g(z), circ).value
        parts = a * integrate_circle(f, circ).value + b * integrate_circle(g, circ).value
        assert combo == pytest.approx(parts, abs=1e-10)

    def test_nonfinite_sample_reported(self):
        circ = Circle(0.0, 1.0, points=8)
        with pytest.raises(QuadratureError, match="non-finite"):
            integrate_circle(lambda z: 1.0 / (z - circ.nodes()[0]), circ)

    def test_scalar_callable_supported(self):
        out = integrate_circle(lambda z: 1.0 / complex(z), Circle(0.0, 1.0, points=16))
        assert out.value == pytest.approx(1.0, abs=1e-12)


class TestIntegrateMulti:
    def test_separable_product(self):
        mc = MultiContour(
            circles=(Circle(0.0, 1.0, points=16), Circle(0.0, 0.5, points=16))
        )
        out = integrate_multi(lambda z, w: np.exp(1.0 / z) * (1.0 / w**2 + 3.0 / w), mc)
        f1 = integrate_circle(lambda z: np.exp(1.0 / z), Circle(0.0, 1.0, points=64))
        f2 = integrate_circle(
            lambda w: 1.0 / w**2 + 3.0 / w, Circle(0.0, 0.5, points=64)
        )
        assert out.value == pytest.approx(f1.value * f2.value, abs=1e-12)
        assert out.converged

    def test_hand_residue_chain_zero(self):
        # inner w-residue at 0 of 1/(z w (z+w)) is 1/z^2, outer integral 0
        mc = MultiContour(
            circles=(Circle(0.0, 0.8, points=32), Circle(0.0, 0.2, points=32)),
            poles=((), (lambda z: -z,)),
        )
        out = integrate_multi(lambda z, w: 1.0 / (z * w * (z + w)), mc, tol=1e-12)
        assert abs(out.value) < 1e-11

    def test_evaluation_order_irrelevant_for_compatible_radii(self):
        f = lambda z, w: 1.0 / (z * w * (1.0 - z * w / 4.0))
        a = integrate_multi(
            f,
            MultiContour((Circle(0.0, 1.0, points=32), Circle(0.0, 0.5, points=32))),
            tol=1e-12,
        )
        b = integrate_multi(
            lambda w, z: f(z, w),
            MultiContour((Circle(0.0, 0.5, points=32), Circle(0.0, 1.0, points=32))),
            tol=1e-12,
        )
        assert a.value == pytest.approx(b.value, abs=1e-11)
        assert a.value == pytest.approx(1.0, abs=1e-11)

    def test_three_dim_chunked(self):
        circ = lambda: Circle(0.0, 1.0, points=8)
        mc = MultiContour((circ(), circ(), circ()))
        out = integrate_multi(lambda a, b, c: (1.0 / a) * (1.0 / b) * (2.0 / c), mc)
        assert out.value == pytest.approx(2.0, abs=1e-11)

    def test_pole_on_contour_rejected(self):
        mc = MultiContour(
            circles=(Circle(0.0, 1.0, points=16),), poles=((1.0 + 0.0j,),)
        )
        with pytest.raises(QuadratureError, match="declared pole"):
            integrate_multi(lambda z: 1.0 / (z - 1.0), mc)

    def test_cap_hit_flagged_not_raised(self):
        mc = MultiContour(circles=(Circle(0.0, 1.0, points=8),))
        out = integrate_multi(
            lambda z: 1.0 / (z - 0.999), mc, tol=1e-14, max_points_per_dim=16
        )
        assert not out.converged
        assert np.isfinite(out.value.real)
        with pytest.raises(QuadratureError, match="unconverged"):
            out.require_converged()

    def test_scalar_integrand_via_flag(self):
        mc = MultiContour(circles=(Circle(0.0, 1.0, points=16),))
        out = integrate_multi(
            lambda z: 1.0 / complex(z), mc, vectorized=False, tol=1e-12
        )
        assert out.value == pytest.approx(1.0, abs=1e-12)

    def test_doubling_stays_within_estimate(self):
        mc = MultiContour(circles=(Circle(0.0, 0.6, points=8),))
        out = integrate_multi(lambda z: np.exp(1.0 / z) / z, mc, tol=1e-10)
        refined = integrate_multi(lambda z: np.exp(1.0 / z) / z, mc, tol=1e-13)
        assert abs(out.value - refined.value) <= max(out.err_estimate, 1e-13)
