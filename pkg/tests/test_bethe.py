"""Transition-probability layer: delta start, Poisson marginals, CTMC
agreement, master equation, boundary conditions, wave function identities."""

import math

import numpy as np
import pytest

from ahrkit.core import ModelParams, ParticleConfig
from ahrkit.bethe import (
    TransitionQuery,
    bethe_wavefunction,
    check_boundary_conditions,
    check_master_equation,
    eigenvalue,
    green_function,
    right_counts,
)
from ahrkit.ctmc import LatticeWindow, build_generator, enumerate_states, evolve
from ahrkit.quadrature import QuadratureError

HALF = ModelParams(alpha=0.5, beta=0.5)


def poisson(lam: float, d: int) -> float:
    return math.exp(-lam) * lam**d / math.factorial(d)


class TestRightCounts:
    def test_all_right(self):
        assert right_counts((0, 1), (-2, -1)).r == (2, 2)

    def test_none_right(self):
        assert right_counts((-3,), (5,)).r == (0,)

    def test_interleaved(self):
        assert right_counts((0, 2, 4), (1, 3)).r == (2, 1)

    def test_empty(self):
        assert right_counts((), (0, 1)).r == (0, 0)
        assert right_counts((0,), ()).r == ()


class TestQueryValidation:
    def test_unsorted(self):
        with pytest.raises(ValueError):
            TransitionQuery(x0=(1, 0), y0=(), x=(0, 1), y=(), t=1.0)

    def test_overlap(self):
        with pytest.raises(ValueError):
            TransitionQuery(x0=(0,), y0=(0,), x=(1,), y=(-1,), t=1.0)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            TransitionQuery(x0=(0,), y0=(), x=(0, 1), y=(), t=1.0)

    def test_negative_time(self):
        with pytest.raises(ValueError):
            TransitionQuery(x0=(0,), y0=(), x=(0,), y=(), t=-1.0)

    def test_size_cap(self):
        q = TransitionQuery(x0=(-3, -2, -1), y0=(0, 1, 2),
                            x=(-3, -2, -1), y=(0, 1, 2), t=1.0)
        with pytest.raises(ValueError):
            green_function(q, HALF)


class TestInitialCondition:
    CASES = [
        ((-1,), (0,)),
        ((-2, -1), (0,)),
        ((-2, -1), (0, 1)),
    ]

    @pytest.mark.parametrize("x0,y0", CASES)
    def test_same_state_is_one(self, x0, y0):
        q = TransitionQuery(x0=x0, y0=y0, x=x0, y=y0, t=0.0)
        assert abs(green_function(q, HALF).raw - 1.0) < 1e-10

    def test_other_states_are_zero(self):
        x0, y0 = (-1,), (0,)
        for x, y in [((0,), (-1,)), ((1,), (0,)), ((-1,), (-2,))]:
            q = TransitionQuery(x0=x0, y0=y0, x=x, y=y, t=0.0)
            assert abs(green_function(q, HALF).raw) < 1e-10


class TestSingleSpecies:
    def test_plus_poisson(self):
        t, beta = 0.7, 0.5
        for d in range(4):
            q = TransitionQuery(x0=(0,), y0=(), x=(d,), y=(), t=t)
            got = green_function(q, HALF).raw.real
            assert abs(got - poisson(beta * t, d)) < 1e-10

    def test_minus_poisson(self):
        t, alpha = 0.9, 0.5
        for d in range(3):
            q = TransitionQuery(x0=(), y0=(0,), x=(), y=(-d,), t=t)
            got = green_function(q, HALF).raw.real
            assert abs(got - poisson(alpha * t, d)) < 1e-10

    def test_backward_motion_impossible(self):
        q = TransitionQuery(x0=(0,), y0=(), x=(-1,), y=(), t=1.0)
        assert abs(green_function(q, HALF).raw) < 1e-10

    def test_short_time_derivative_matches_poisson(self):
        # d/dt of the one-particle marginal straight from the density
        beta, d, t, h = 0.5, 1, 0.1, 1e-5
        vals = []
        for tt in (t + h, t - h):
            q = TransitionQuery(x0=(0,), y0=(), x=(d,), y=(), t=tt)
            vals.append(green_function(q, HALF).raw.real)
        dgdt = (vals[0] - vals[1]) / (2 * h)
        want = beta * (poisson(beta * t, d - 1) - poisson(beta * t, d))
        assert abs(dgdt - want) < 1e-8


def _delta_evolved(params, window, n, m, config0, t):
    idx = enumerate_states(window, n, m)
    gen = build_generator(params, idx)
    p0 = np.zeros(idx.size)
    p0[idx.index_of(config0)] = 1.0
    return idx, evolve(gen, p0, t)


class TestAgainstCTMC:
    def test_single_pair(self):
        t = 1.0
        idx, pt = _delta_evolved(
            HALF, LatticeWindow(-9, 9), 1, 1, ParticleConfig((-1,), (0,)), t
        )
        for x, y in [(-1, 0), (0, -1), (1, -2), (2, 0), (3, -3), (-1, -3)]:
            q = TransitionQuery(x0=(-1,), y0=(0,), x=(x,), y=(y,), t=t)
            got = green_function(q, HALF).raw.real
            want = pt[idx.index_of(ParticleConfig((x,), (y,)))]
            assert abs(got - want) < 1e-8

    def test_two_plus_one_minus(self):
        t = 0.8
        params = ModelParams(alpha=0.4, beta=0.6)
        idx, pt = _delta_evolved(
            params, LatticeWindow(-8, 8), 2, 1, ParticleConfig((-2, -1), (0,)), t
        )
        for x, y in [((-2, -1), (0,)), ((-1, 0), (-1,)), ((0, 1), (-2,)),
                     ((-2, 0), (-1,)), ((1, 2), (0,))]:
            if set(x) & set(y):
                continue
            q = TransitionQuery(x0=(-2, -1), y0=(0,), x=x, y=y, t=t)
            got = green_function(q, params).raw.real
            want = pt[idx.index_of(ParticleConfig(x, y))]
            assert abs(got - want) < 1e-8


class TestInvariants:
    def test_normalization_single_pair(self):
        t, x0, y0 = 0.8, -1, 0
        total = 0.0
        for x in range(x0, x0 + 13):
            for y in range(y0 - 12, y0 + 1):
                if x == y:
                    continue
                q = TransitionQuery(x0=(x0,), y0=(y0,), x=(x,), y=(y,), t=t)
                v = green_function(q, HALF).raw.real
                assert v > -1e-8
                total += v
        assert abs(total - 1.0) < 1e-6

    def test_normalization_two_plus_one_minus(self):
        t = 0.5
        x0, y0 = (-2, -1), (0,)
        total = 0.0
        for x1 in range(-2, 8):
            for x2 in range(x1 + 1, 9):
                for y in range(-9, 1):
                    if y in (x1, x2):
                        continue
                    q = TransitionQuery(x0=x0, y0=y0, x=(x1, x2), y=(y,), t=t)
                    total += green_function(q, HALF, tol=1e-9).raw.real
        assert abs(total - 1.0) < 1e-6

    def test_translation_invariance(self):
        q = TransitionQuery(x0=(-2, -1), y0=(0,), x=(-1, 1), y=(-2,), t=0.9)
        base = green_function(q, HALF).raw
        for c in (-3, 4):
            qq = TransitionQuery(
                x0=tuple(v + c for v in q.x0), y0=tuple(v + c for v in q.y0),
                x=tuple(v + c for v in q.x), y=tuple(v + c for v in q.y), t=q.t,
            )
            assert abs(green_function(qq, HALF).raw - base) < 1e-10

    def test_unconverged_raises_with_estimate(self):
        # huge backward displacement: the exact value is 0 but the contour
        # samples reach 1e89, so roundoff keeps the doubling from settling
        q = TransitionQuery(x0=(400,), y0=(), x=(0,), y=(), t=1.0)
        with pytest.raises(QuadratureError) as err:
            green_function(q, HALF)
        assert hasattr(err.value, "err_estimate")


class TestMasterEquation:
    def test_well_separated(self):
        q = TransitionQuery(x0=(-4,), y0=(3,), x=(-2,), y=(1,), t=1.0)
        assert check_master_equation(q, HALF) < 1e-6

    def test_adjacent_pair(self):
        q = TransitionQuery(x0=(-1,), y0=(0,), x=(0,), y=(-1,), t=1.0)
        assert check_master_equation(q, HALF) < 1e-6

    def test_two_plus_one_minus(self):
        params = ModelParams(alpha=0.4, beta=0.6)
        q = TransitionQuery(x0=(-2, -1), y0=(0,), x=(-1, 1), y=(0,), t=0.8)
        assert check_master_equation(q, params) < 1e-6


class TestBoundaryConditions:
    def test_worst_residual(self):
        assert check_boundary_conditions(HALF, samples=8) < 1e-8

    def test_asymmetric_rates(self):
        params = ModelParams(alpha=0.35, beta=0.65)
        rng = np.random.default_rng(7)
        assert check_boundary_conditions(params, samples=6, rng=rng) < 1e-8


class TestWaveFunction:
    def _rand(self, rng, k):
        return (rng.uniform(0.1, 0.5, k) * np.exp(2j * np.pi * rng.random(k))).tolist()

    def test_single_plus_closed_form(self):
        z = 0.3 + 0.2j
        got = bethe_wavefunction((2,), (), [z], [], HALF)
        assert abs(got - z**2 / (1 - z)) < 1e-14

    def test_eigen_relation(self):
        rng = np.random.default_rng(5)
        zs, ws = self._rand(rng, 2), self._rand(rng, 1)
        x, y = (-8, -4), (5,)
        lam = eigenvalue(zs, ws, HALF)
        psi = lambda xx, yy: bethe_wavefunction(xx, yy, zs, ws, HALF)
        rhs = -(0.5 * 2 + 0.5 * 1) * psi(x, y)
        rhs += 0.5 * (psi((x[0] - 1, x[1]), y) + psi((x[0], x[1] - 1), y))
        rhs += 0.5 * psi(x, (y[0] + 1,))
        assert abs(lam * psi(x, y) - rhs) < 1e-12 * abs(psi(x, y))

    def test_contact_relation_single_pair(self):
        rng = np.random.default_rng(11)
        zs, ws = self._rand(rng, 1), self._rand(rng, 1)
        c = 2
        lhs = bethe_wavefunction((c,), (c + 1,), zs, ws, HALF)
        rhs = 0.5 * bethe_wavefunction((c,), (c,), zs, ws, HALF)
        rhs += 0.5 * bethe_wavefunction((c + 1,), (c + 1,), zs, ws, HALF)
        assert abs(lhs - rhs) < 1e-12 * abs(lhs)

    def test_contact_relation_with_spectator(self):
        params = ModelParams(alpha=0.4, beta=0.6)
        rng = np.random.default_rng(13)
        zs, ws = self._rand(rng, 2), self._rand(rng, 1)
        lhs = bethe_wavefunction((0, 3), (4,), zs, ws, params)
        rhs = params.beta * bethe_wavefunction((0, 3), (3,), zs, ws, params)
        rhs += params.alpha * bethe_wavefunction((0, 4), (4,), zs, ws, params)
        assert abs(lhs - rhs) < 1e-12 * abs(lhs)

    def test_pole_rejection(self):
        with pytest.raises(ValueError):
            bethe_wavefunction((0,), (), [1.0], [], HALF)
        with pytest.raises(ValueError):
            bethe_wavefunction((0,), (1,), [0.4], [-0.4], HALF)
