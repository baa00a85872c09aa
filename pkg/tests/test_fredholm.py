"""Fredholm transform of contour integrals and the two-term current split."""

import cmath
import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ahrkit.core import ModelParams, default_shift
from ahrkit.current import CurrentQuery, joint_current_prob
from ahrkit.fredholm import (
    DecompositionResult,
    DiscreteKernel,
    GFunctionSpec,
    decompose,
    direct_multifold,
    eval_I1,
    eval_I1_direct,
    eval_I2_direct,
    eval_I2_main,
    eval_Iz,
    eval_Jn,
    eval_Jn_direct,
    eval_Jn_kernel,
    g_function,
    i1_phi,
    i1_psi,
    jn_kernel,
    kernel_Aj,
    kernel_B,
    kernel_I1,
    kernel_KW,
    kernel_zvec,
    kw_determinant,
    l_weight,
    phi_k,
    psi_k,
    sum_identity_residual,
    transform_to_fredholm,
)
from ahrkit.quadrature import Circle, QuadratureError

# A moderately awkward but well-separated generating function: two inner
# zeros, one v-type pole, distinct a's.  The pinned value comes from the
# literal nu-fold quadrature, converged to machine precision.
GENERIC = GFunctionSpec(nu=2, mu=1, s=1, gamma=0.7, c=1.5,
                        u=(0.2, 0.1), v=(0.8,), a=(1.0, 1.3))
GENERIC_VALUE = 0.0010483793561684863


def sym_params(rho):
    return ModelParams(alpha=0.5, beta=0.5, rho=rho)


def reference_prob(n, m, rho, t):
    return joint_current_prob(CurrentQuery(n, m, t, sym_params(rho)))


def z_average(func, n, n_z):
    """(n-1)-fold average over the small outer circles around 1."""
    circ = Circle(1.0, 0.07)
    zs = circ.nodes(n_z)
    ws = circ.weights(n_z)
    total = 0.0j
    for idx in itertools.product(range(n_z), repeat=n - 1):
        z = tuple(zs[i] for i in idx)
        w = 1.0 + 0.0j
        for i in idx:
            w *= ws[i]
        total += w * func(z)
    return total


class TestGFunctionSpec:
    def test_tuples_coerced_and_frozen(self):
        spec = GFunctionSpec(nu=1, mu=0, s=0, gamma=0.0, c=1.0,
                             u=[0.1], v=[], a=[1.2])
        assert spec.u == (0.1 + 0.0j,)
        assert spec.a == (1.2 + 0.0j,)
        with pytest.raises(Exception):
            spec.gamma = 1.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            GFunctionSpec(nu=2, mu=0, s=0, gamma=0.0, c=1.0,
                          u=(0.1,), v=(), a=(1.0, 1.1))
        with pytest.raises(ValueError):
            GFunctionSpec(nu=1, mu=0, s=0, gamma=0.0, c=1.0,
                          u=(0.1, 0.2), v=(), a=(1.0,))

    def test_noninteger_s_rejected(self):
        with pytest.raises(ValueError):
            GFunctionSpec(nu=1, mu=0, s=0.5, gamma=0.0, c=1.0,
                          u=(0.0,), v=(), a=(1.0,))

    def test_disc_must_contain_inner_poles(self):
        # u = 3 sits outside the disc of radius min|a + c| = 2.
        with pytest.raises(ValueError):
            GFunctionSpec(nu=1, mu=0, s=0, gamma=0.0, c=1.0,
                          u=(3.0,), v=(), a=(1.0,))

    def test_inner_poles_and_radius(self):
        assert GENERIC.disc_radius == pytest.approx(2.5)
        poles = GENERIC.inner_poles
        assert 0.0 in poles
        assert any(abs(p - (-1.25)) < 1e-12 for p in poles)


class TestGFunction:
    def test_empty_spec_is_exponential(self):
        spec = GFunctionSpec(nu=0, mu=0, s=0, gamma=0.3, c=1.0,
                             u=(), v=(), a=())
        z = 0.7 + 0.4j
        assert g_function(spec, z) == pytest.approx(cmath.exp(0.3 * z))

    def test_kappa_multiplies_shifted_power(self):
        z = 0.9 - 0.5j
        base = g_function(GENERIC, z)
        assert g_function(GENERIC, z, kappa=3) == pytest.approx(
            base * (z + GENERIC.c) ** 3, rel=1e-13)

    @pytest.mark.parametrize("z", [0.7 + 0.4j, -0.3 + 0.9j, 2.1 - 1.3j])
    @pytest.mark.parametrize("kappa", [0, 2])
    def test_matches_high_precision_evaluation(self, z, kappa):
        with mpmath.workdps(40):
            zr = mpmath.mpc(z)
            ref = zr ** (GENERIC.mu - GENERIC.s) * mpmath.exp(GENERIC.gamma * zr)
            for u in GENERIC.u:
                ref /= (zr - u)
            for v in GENERIC.v:
                ref /= (1 + v * zr)
            ref *= (zr + GENERIC.c) ** kappa
            ref = complex(ref)
        val = g_function(GENERIC, z, kappa=kappa)
        assert abs(val - ref) <= 1e-13 * abs(ref)

    def test_pole_points_rejected(self):
        with pytest.raises(ValueError):
            g_function(GENERIC, 0.2)
        with pytest.raises(ValueError):
            g_function(GENERIC, -1.25)
        with pytest.raises(ValueError):
            g_function(GENERIC, 0.0, s=2)
        with pytest.raises(ValueError):
            g_function(GENERIC, -GENERIC.c, kappa=-1)


class TestDirectMultifold:
    def test_single_fold_cancelling_residues(self):
        # g = 1/zeta, a = 1: the integrand is 1/(zeta(zeta-1)), whose
        # residues at 0 and 1 cancel exactly.
        spec = GFunctionSpec(nu=1, mu=0, s=0, gamma=0.0, c=1.0,
                             u=(0.0,), v=(), a=(1.0,))
        val = direct_multifold(spec)
        assert abs(val) <= 1e-12

    def test_single_fold_exponential_value(self):
        # Same spec with gamma on: residues give 1 - exp(-gamma).
        gamma = 0.9
        spec = GFunctionSpec(nu=1, mu=0, s=0, gamma=gamma, c=1.0,
                             u=(0.0,), v=(), a=(1.0,))
        val = direct_multifold(spec)
        assert val.real == pytest.approx(1.0 - math.exp(-gamma), rel=1e-10)
        assert abs(val.imag) <= 1e-12

    def test_relabelling_a_and_u_is_symmetric(self):
        swapped = GFunctionSpec(nu=2, mu=1, s=1, gamma=0.7, c=1.5,
                                u=(0.1, 0.2), v=(0.8,), a=(1.3, 1.0))
        v1 = direct_multifold(GENERIC)
        v2 = direct_multifold(swapped)
        assert abs(v1 - v2) <= 1e-10 * max(1.0, abs(v1))

    def test_matches_pinned_value(self):
        val = direct_multifold(GENERIC)
        assert val.real == pytest.approx(GENERIC_VALUE, rel=1e-9)
        assert abs(val.imag) <= 1e-12


class TestPhiPsi:
    # One inner zero, one v pole, single a, with s - mu cancelling the
    # k - nu power: phi_0 collapses to the residue at a alone.
    ONE = GFunctionSpec(nu=1, mu=1, s=2, gamma=0.5, c=1.2,
                        u=(0.15,), v=(0.6,), a=(1.1,))

    @pytest.mark.parametrize("x", [1, 2, 5])
    def test_phi0_is_residue_at_a(self, x):
        a1 = self.ONE.a[0]
        expected = 1.0 / (a1 * g_function(self.ONE, a1, kappa=x))
        val = phi_k(self.ONE, 0, x)
        assert abs(val - expected) <= 1e-12 * abs(expected)

    def test_summed_geometric_tail(self):
        # The x-sum that glues phi to psi is the geometric series
        # sum_x (zeta+c)^(x-1)/(a+c)^x = 1/(a - zeta) for |zeta+c|<|a+c|.
        c, a, zeta = 2.0, 1.0, 0.3
        total = sum((zeta + c) ** (x - 1) / (a + c) ** x for x in range(1, 161))
        assert total == pytest.approx(1.0 / (a - zeta), rel=1e-12)

    def test_factor_product_decays_along_diagonal(self):
        vals = [abs(phi_k(GENERIC, 0, x) * psi_k(GENERIC, 0, x))
                for x in range(5, 12)]
        q = (vals[-1] / vals[0]) ** (1.0 / (len(vals) - 1))
        assert q < 0.85

    def test_overlapping_contours_reported(self):
        # Passes the disc invariant (radius 2 vs worst pole 1.8) but the
        # a-circle cannot avoid u = 1.8, so building contours must fail.
        a = (2.0 * cmath.exp(1j * math.pi / 6), 2.0 * cmath.exp(-1j * math.pi / 6))
        bad = GFunctionSpec(nu=2, mu=0, s=0, gamma=0.0, c=0.0,
                            u=(1.8, 0.1), v=(), a=a)
        with pytest.raises(QuadratureError):
            phi_k(bad, 0, 1)


def _random_spec(rng, nu):
    mu = int(rng.integers(0, 3))
    u = tuple(complex(rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25))
              for _ in range(nu))
    v = []
    for _ in range(mu):
        mag = rng.uniform(0.8, 1.5)
        ph = rng.uniform(-0.35, 0.35)
        v.append(mag * complex(math.cos(ph), math.sin(ph)))
    a = tuple(1.0 + 0.5 * k / max(nu, 1) + rng.uniform(0.0, 0.1)
              for k in range(nu))
    return GFunctionSpec(nu=nu, mu=mu, s=int(rng.integers(0, 3)),
                         gamma=float(rng.uniform(0.0, 1.2)),
                         c=2.0, u=u, v=tuple(v), a=a)


class TestTransform:
    def test_matches_pinned_value(self):
        val, m_used = transform_to_fredholm(GENERIC)
        assert val.real == pytest.approx(GENERIC_VALUE, rel=1e-9)
        assert m_used >= 32

    def test_shift_independence(self):
        moved = GFunctionSpec(nu=2, mu=1, s=1, gamma=0.7, c=2.0,
                              u=(0.2, 0.1), v=(0.8,), a=(1.0, 1.3))
        val, _ = transform_to_fredholm(moved)
        assert val.real == pytest.approx(GENERIC_VALUE, rel=1e-8)

    def test_zero_fold_is_one(self):
        spec = GFunctionSpec(nu=0, mu=0, s=0, gamma=0.4, c=1.0,
                             u=(), v=(), a=())
        val, m_used = transform_to_fredholm(spec)
        assert val == 1.0 + 0.0j
        assert m_used == 0

    @pytest.mark.parametrize("nu,seed", [(1, 11), (2, 12), (3, 13)])
    def test_agrees_with_direct_quadrature(self, nu, seed):
        rng = np.random.default_rng(seed)
        spec = _random_spec(rng, nu)
        cap = 128 if nu == 3 else 256
        ref = direct_multifold(spec, tol=1e-8, max_points_per_dim=cap)
        val, _ = transform_to_fredholm(spec, tol=1e-10)
        assert abs(val - ref) <= 2e-8 * max(1.0, abs(ref))


class TestDiscreteKernel:
    def test_rank_one_determinant(self):
        # K(x,y) = u(x) v(y) with u = 0.5^x, v = 0.3^y: det(1-K) is
        # 1 - sum 0.15^x = 1 - 0.15/0.85.
        kern = DiscreteKernel(entry=lambda x, y: 0.5 ** x * 0.3 ** y)
        val, m_used = kern.det(tol=1e-12)
        assert val.real == pytest.approx(1.0 - 0.15 / 0.85, rel=1e-10)
        assert m_used <= 1024

    def test_weight_is_similarity(self):
        kern = DiscreteKernel(entry=lambda x, y: 0.5 ** x * 0.3 ** y,
                              weight=lambda x: 2.0 ** x)
        val, _ = kern.det(tol=1e-12)
        assert val.real == pytest.approx(1.0 - 0.15 / 0.85, rel=1e-9)

    def test_non_decaying_kernel_raises(self):
        kern = DiscreteKernel(entry=lambda x, y: 0.5 if x == y else 0.0)
        with pytest.raises(QuadratureError):
            kern.det(tol=1e-12, m_cap=64)


class TestSumIdentity:
    A3 = (1.0, 1.3, 0.7)

    def test_small_residual_at_fixed_points(self):
        assert sum_identity_residual(2.5 + 1.0j, -1.7 + 0.4j, (1.0,)) <= 1e-14
        assert sum_identity_residual(4.0 - 2.0j, 2.2 + 0.3j, self.A3) <= 1e-12

    def test_near_degenerate_arguments(self):
        zeta = 2.0 + 1e-3 * cmath.exp(0.7j)
        assert sum_identity_residual(zeta, 2.0, self.A3) <= 1e-9

    @given(st.floats(2.0, 3.0), st.floats(0.0, 2.0 * math.pi),
           st.floats(4.0, 6.0), st.floats(0.0, 2.0 * math.pi))
    @settings(max_examples=40, deadline=None)
    def test_residual_vanishes_generically(self, r_xi, th_xi, r_z, th_z):
        xi = r_xi * cmath.exp(1j * th_xi)
        zeta = r_z * cmath.exp(1j * th_z)
        assert sum_identity_residual(zeta, xi, self.A3) <= 1e-11


class TestKernelI1:
    N, M, T = 3, 2, 1.2

    @pytest.mark.parametrize("x,y", [(1, 1), (2, 3), (4, 2)])
    def test_equals_factor_sum(self, x, y):
        total = sum(i1_phi(k, x, self.N, self.M, self.T)
                    * i1_psi(k, y, self.N, self.M, self.T)
                    for k in range(self.M))
        val = kernel_I1(x, y, self.N, self.M, self.T)
        assert abs(val - total) <= 1e-12 * max(1.0, abs(val))

    def test_diagonal_decays(self):
        diag = [abs(kernel_I1(x, x, self.N, self.M, self.T))
                for x in (4, 7, 10, 13)]
        assert diag[3] < 0.05 * diag[1]
        assert diag[2] < diag[0]

    def test_determinant_shift_invariant(self):
        v2 = eval_I1(self.N, self.M, 0.5, self.T, c=2.0)
        v3 = eval_I1(self.N, self.M, 0.5, self.T, c=3.0)
        assert v2 == pytest.approx(v3, rel=1e-9)


class TestEvalI1:
    def test_matches_direct_m_fold(self):
        assert eval_I1(3, 2, 0.5, 1.2) == pytest.approx(
            0.16329875719517123, rel=1e-9)
        direct = eval_I1_direct(2, 2, 3.0)
        assert eval_I1(2, 2, 0.7, 3.0) == pytest.approx(direct, rel=1e-8)

    def test_values_look_like_probabilities(self):
        for n, m, t in [(1, 1, 0.5), (2, 3, 4.0), (3, 2, 1.2)]:
            v = eval_I1(n, m, 0.5, t)
            assert -1e-6 <= v <= 1.0 + 1e-6

    @pytest.mark.parametrize("kwargs", [
        dict(n=6, m=2, rho=0.5, t=1.0),
        dict(n=1, m=1, rho=0.5, t=0.0),
        dict(n=1, m=1, rho=0.5, t=1.0, c=1.0),
        dict(n=1, m=1, rho=1.2, t=1.0),
        dict(n=0, m=1, rho=0.5, t=1.0),
    ])
    def test_bad_arguments_rejected(self, kwargs):
        with pytest.raises(ValueError):
            eval_I1(**kwargs)

    def test_direct_route_limited(self):
        with pytest.raises(ValueError):
            eval_I1_direct(2, 4, 1.0)


class TestKWKernel:
    ARGS = dict(n=3, m=2, rho=0.5, t=2.0)

    @pytest.mark.parametrize("x,y", [(1, 1), (2, 4)])
    def test_unit_outer_variables_collapse(self, x, y):
        zs = (1.0,) * (self.ARGS["n"] - 1)
        kz = kernel_zvec(x, y, zs, **self.ARGS)
        kw = kernel_KW(x, y, **self.ARGS)
        assert abs(kz - kw) <= 1e-12 * max(1.0, abs(kw))

    def test_outer_size_enforced(self):
        with pytest.raises(ValueError):
            kernel_zvec(1, 1, (1.0,), **self.ARGS)

    @pytest.mark.parametrize("x,y", [(1, 1), (2, 3)])
    def test_two_fold_decoupling(self, x, y):
        n, m, rho, t = 2, 2, 0.5, 3.0
        lhs = z_average(
            lambda zs: l_weight(zs, n, m, rho, t)
            * kernel_zvec(x, y, zs, n, m, rho, t), n, 32)
        kw = kernel_KW(x, y, n, m, rho, t)
        a1 = kernel_Aj(x, 1, n, m, rho, t)
        b = kernel_B(y, n, m, rho, t)
        il = z_average(lambda zs: l_weight(zs, n, m, rho, t), n, 32)
        c1 = z_average(
            lambda zs: l_weight(zs, n, m, rho, t) * (zs[0] - 1.0), n, 32)
        rhs = il * kw - c1 * a1 * b
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))

    def test_three_fold_decoupling(self):
        n, m, rho, t = 3, 2, 0.5, 2.0
        x, y = 1, 2
        pts = 384

        def weighted_kernel(zs):
            return (l_weight(zs, n, m, rho, t)
                    * kernel_zvec(x, y, zs, n, m, rho, t, n_points=pts))

        lhs = z_average(weighted_kernel, n, 16)
        kw = kernel_KW(x, y, n, m, rho, t, n_points=pts)
        b = kernel_B(y, n, m, rho, t, n_points=pts)
        il = z_average(lambda zs: l_weight(zs, n, m, rho, t), n, 16)
        rhs = il * kw
        for p in (1, 2):
            cp = z_average(
                lambda zs: l_weight(zs, n, m, rho, t)
                * np.prod([zq - 1.0 for zq in zs[:p]]), n, 16)
            rhs -= cp * kernel_Aj(x, p, n, m, rho, t, n_points=pts) * b
        assert abs(lhs - rhs) <= 5e-8 * max(1.0, abs(lhs))

    def test_column_factor_decays_once_conjugated(self):
        # Raw B grows like (w_c + c)^y; the similarity weight used by the
        # truncation ladder divides it out, leaving geometric decay.
        n, m, rho, t = 2, 2, 0.5, 3.0
        sigma = (1.0 - rho) / 2.0 + default_shift(rho)
        conj = [abs(kernel_B(y, n, m, rho, t)) / sigma ** y
                for y in range(7, 17)]
        q = (conj[-1] / conj[0]) ** (1.0 / (len(conj) - 1))
        assert q < 0.9
        assert conj[-1] < conj[0]


class TestJFunction:
    PINS = [
        (2, 2, 0.5, 1.5, 0.15997977036658984),
        (3, 1, 0.7, 0.8, 0.14654574426384237),
        (1, 3, 0.3, 2.0, 0.58623952828197945),
    ]

    @pytest.mark.parametrize("n,m,rho,t,pin", PINS)
    def test_closed_form_pins(self, n, m, rho, t, pin):
        assert eval_Jn(n, m, rho, t) == pytest.approx(pin, rel=1e-10)

    @pytest.mark.parametrize("n,m,rho,t,pin", PINS)
    def test_multifold_route_agrees(self, n, m, rho, t, pin):
        assert eval_Jn_direct(n, m, rho, t) == pytest.approx(pin, rel=1e-8)

    def test_contour_around_one_only_gives_unity(self):
        val = eval_Jn_direct(2, 2, 0.5, 1.5, around_one_only=True)
        assert val == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("n,m,rho,t,pin", PINS)
    def test_values_inside_unit_interval(self, n, m, rho, t, pin):
        assert 0.0 < eval_Jn(n, m, rho, t) < 1.0

    def test_kernel_route_agrees(self):
        n, m, rho, t = 2, 2, 0.5, 1.5
        assert eval_Jn_kernel(n, m, rho, t) == pytest.approx(
            eval_Jn(n, m, rho, t), rel=1e-9)

    def test_kernel_conjugation_invariant(self):
        n, m, rho, t = 2, 2, 0.5, 1.5
        v1, _ = jn_kernel(n, m, rho, t).det(1e-11)
        v2, _ = jn_kernel(n, m, rho, t, sigma=0.3).det(1e-11)
        assert abs(v1 - v2) <= 1e-10 * max(1.0, abs(v1))

    def test_entry_path_matches_block_path(self):
        kern = jn_kernel(2, 2, 0.5, 1.5)
        slow = DiscreteKernel(entry=kern.entry, weight=kern.weight)
        assert np.allclose(kern.matrix(12), slow.matrix(12),
                           rtol=1e-11, atol=1e-13)

    def test_outer_average_reproduces_one_minus_j(self):
        n, m, rho, t = 3, 2, 0.5, 2.0
        il = z_average(lambda zs: l_weight(zs, n, m, rho, t), n, 16)
        assert abs(il - (1.0 - eval_Jn(n, m, rho, t))) <= 1e-9

    @pytest.mark.parametrize("n,p", [(3, 1), (3, 2), (4, 1), (4, 2)])
    def test_outer_average_with_prefactors(self, n, p):
        m, rho, t = 2, 0.5, 2.0
        rp = 1.0 - rho
        n_z = 16 if n == 3 else 12
        val = z_average(
            lambda zs: l_weight(zs, n, m, rho, t)
            * np.prod([zq - 1.0 for zq in zs[:p]]), n, n_z)
        expected = -((-rho / rp) ** p) * (eval_Jn(n - p, m, rho, t) - 1.0)
        assert abs(val - expected) <= 1e-9 * max(1.0, abs(expected))


class TestSecondTerm:
    def test_outer_weight_closed_form_for_single_plus(self):
        # n = 1 leaves no outer variables; the weight is the scalar
        # exp(-rho t / 2) (2(1-rho)/(2-rho))^m.
        val = l_weight((), 1, 3, 0.4, 2.0)
        assert val.real == pytest.approx(math.exp(-0.4) * 0.75 ** 3, rel=1e-13)
        assert val.imag == 0.0

    def test_single_plus_consistent_with_reference(self):
        n, m, rho, t = 1, 2, 0.4, 2.5
        i2 = eval_I2_direct(n, m, rho, t)
        gap = eval_I1(n, m, rho, t) - reference_prob(n, m, rho, t)
        assert i2 == pytest.approx(gap, abs=1e-8)

    def test_moment_and_transform_routes_agree(self):
        n, m, rho, t = 1, 3, 0.5, 2.0
        vt = eval_I2_direct(n, m, rho, t, route="transform")
        vm = eval_I2_direct(n, m, rho, t, route="moments")
        assert vt == pytest.approx(vm, rel=1e-9, abs=1e-12)

    def test_main_term_factorizes(self):
        n, m, rho, t = 2, 2, 0.5, 3.0
        assert eval_I2_main(n, m, rho, t) == pytest.approx(
            eval_Iz(n, m, rho, t) * kw_determinant(n, m, rho, t), rel=1e-11)

    @pytest.mark.parametrize("n,m,rho,t", [(2, 2, 0.5, 3.0), (2, 3, 0.6, 4.0)])
    def test_decomposition_reproduces_reference(self, n, m, rho, t):
        res = decompose(n, m, rho, t)
        assert isinstance(res, DecompositionResult)
        assert res.I2_direct is not None
        assert res.P == pytest.approx(res.I1 - res.I2_direct, abs=0.0)
        assert res.P == pytest.approx(reference_prob(n, m, rho, t), abs=1e-6)

    def test_main_term_remainder_shrinks_in_time(self):
        gaps = []
        for t in (3.0, 12.0):
            res = decompose(2, 2, 0.5, t)
            gaps.append(abs(res.I2_main - res.I2_direct))
        assert gaps[1] < gaps[0]
        assert gaps[1] < 5e-3

    def test_early_time_probability_is_small(self):
        # One swap already realizes (1, 1), so P is O(t) rather than
        # O(t^2); the split must still track the reference exactly.
        res = decompose(1, 1, 0.5, 0.05)
        assert res.P == pytest.approx(reference_prob(1, 1, 0.5, 0.05), abs=1e-9)
        assert 0.0 <= res.P < 0.05

    @pytest.mark.parametrize("call,kwargs", [
        (eval_I2_direct, dict(n=4, m=2, rho=0.5, t=1.0)),
        (eval_I2_direct, dict(n=1, m=1, rho=0.0, t=1.0)),
        (eval_I2_main, dict(n=2, m=2, rho=0.5, t=-1.0)),
        (kw_determinant, dict(n=2, m=2, rho=1.5, t=1.0)),
        (decompose, dict(n=2, m=0, rho=0.5, t=1.0)),
    ])
    def test_bad_arguments_rejected(self, call, kwargs):
        with pytest.raises(ValueError):
            call(**kwargs)


class TestLargeTime:
    def test_step_route_stays_bounded_at_moderate_scale(self):
        # Counts sit near the mean current at t = 50; both determinant
        # factors must stay finite and combine to a genuine probability.
        n, m, rho, t = 10, 11, 0.5, 50.0
        i1 = eval_I1(n, m, rho, t)
        kw = kw_determinant(n, m, rho, t)
        iz = eval_Iz(n, m, rho, t)
        assert -1e-6 <= i1 <= 1.0 + 1e-6
        assert abs(kw) < 10.0
        assert 0.0 <= iz <= 1.0
        p_main = i1 - iz * kw
        assert -0.02 <= p_main <= 1.02
