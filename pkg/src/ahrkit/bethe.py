"""Exact finite-system transition probabilities for the two-species process.

The transition probability (Green's function) between particle configurations
is a nested contour integral of a double permutation sum: one symmetric group
per species, coupled by scattering factors 1/(alpha*z + beta*w) whose
exponents count plus particles to the right of each minus particle.  For
fixed minus-side variables the plus-side permutation sum is a determinant of
one-dimensional contour integrals, which keeps the cost at m! * n^2 * grid
instead of n! * m! * grid.

Contours are origin-centered circles with |w| < (alpha/beta)|z|, so the
scattering factor expands in nonnegative powers of w and the only residues
picked up are the Laurent coefficients at the origin.  Everything here is
checked downstream against the finite-window CTMC oracle and against the
master equation and boundary conditions the formula is built to satisfy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from .core import ModelParams
from .quadrature import Circle, QuadratureError

Z_RADIUS = 0.6
W_RADIUS_FACTOR = 0.25  # r_w = 0.25*(alpha/beta)*r_z keeps w-poles nested

# refuse w-tensor grids whose coupled intermediates would not fit in memory
_MAX_GRID_COMPLEX = 40_000_000


def _w_radius(params: ModelParams) -> float:
    # clip below the w = 1 pole for extreme rate ratios
    return min(W_RADIUS_FACTOR * (params.alpha / params.beta) * Z_RADIUS, 0.8)


@dataclass(frozen=True)
class TransitionQuery:
    """Initial halves (x0, y0), final halves (x, y), elapsed time t."""

    x0: Tuple[int, ...]
    y0: Tuple[int, ...]
    x: Tuple[int, ...]
    y: Tuple[int, ...]
    t: float

    def __post_init__(self) -> None:
        for name in ("x0", "y0", "x", "y"):
            vals = tuple(int(v) for v in getattr(self, name))
            object.__setattr__(self, name, vals)
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError("%s must be strictly increasing" % name)
        if len(self.x) != len(self.x0) or len(self.y) != len(self.y0):
            raise ValueError("final and initial halves must have equal sizes")
        if set(self.x) & set(self.y) or set(self.x0) & set(self.y0):
            raise ValueError("plus and minus positions must be disjoint")
        if self.t < 0:
            raise ValueError("t must be nonnegative")


@dataclass(frozen=True)
class RightCounts:
    """r[j] = number of plus particles at or right of the j-th minus."""

    r: Tuple[int, ...]


def right_counts(x: Sequence[int], y: Sequence[int]) -> RightCounts:
    """Counts #{x_i >= y_j} for sorted inputs by a single merge scan."""
    n = len(x)
    out = []
    i = 0
    for yj in y:
        while i < n and x[i] < yj:
            i += 1
        out.append(n - i)
    return RightCounts(r=tuple(out))


class GreenValue(NamedTuple):
    """Clamped probability plus raw diagnostics from the quadrature."""

    value: float
    raw: complex
    err_estimate: float
    points: int


def _perm_sign(perm: Tuple[int, ...]) -> int:
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def _counts(x: Sequence[int], y: Sequence[int]) -> Tuple[int, ...]:
    # tolerant variant for analytically continued coordinates (ties allowed)
    return tuple(sum(1 for xi in x if xi >= yj) for yj in y)


def _green_raw(x, y, x0, y0, t, params: ModelParams, n_points: int) -> complex:
    n, m = len(x), len(y)
    if n == 0 and m == 0:
        return 1.0 + 0.0j
    alpha, beta = params.alpha, params.beta
    r = _counts(x, y)
    r0 = _counts(x0, y0)
    N = n_points

    zc = Circle(0.0, Z_RADIUS)
    zn, zw = zc.nodes(N), zc.weights(N)
    if n:
        ez = np.exp(beta * (1.0 / zn - 1.0) * t)
        zm1 = zn - 1.0
        # coef[a, p, s]: variable a sitting in final slot p, sampled at node s
        coef = np.empty((n, n, N), dtype=complex)
        for a in range(n):
            for p in range(n):
                coef[a, p] = zw * ez * zn ** (x[p] - x0[a] - 1) * zm1 ** (a - p)
        if not np.all(np.isfinite(coef)):
            raise QuadratureError("non-finite plus-side integrand sample")

    if m:
        wc = Circle(0.0, _w_radius(params))
        wn, ww = wc.nodes(N), wc.weights(N)
        flat = N**m
        digits = np.stack(np.unravel_index(np.arange(flat), (N,) * m))
        wdim = wn[digits]
        ew = np.exp(alpha * (1.0 / wn - 1.0) * t)
        base_w = np.ones(flat, dtype=complex)
        for b in range(m):
            vb = wdim[b]
            base_w *= (
                ww[digits[b]]
                * ew[digits[b]]
                * (beta * vb) ** r0[b]
                * (vb - 1.0) ** (-(b + 1))
                * vb ** (y0[b] - 1)
            )
        if not np.all(np.isfinite(base_w)):
            raise QuadratureError("non-finite minus-side integrand sample")
        gtab = 1.0 / (alpha * zn[:, None] + beta * wn[None, :])
    else:
        flat = 1
        base_w = np.ones(1, dtype=complex)

    total = 0.0 + 0.0j
    for sigma in itertools.permutations(range(m)):
        sgn_s = _perm_sign(sigma)
        wfac = base_w
        for k in range(m):
            vb = wdim[sigma[k]]
            wfac = wfac * (vb - 1.0) ** (k + 1) * vb ** (-y[k])

        if n:
            # h[a][p]: 1-D z-integral of variable a in slot p; a scalar when
            # slot p carries no scattering factor, else a w-grid array
            h = [[None] * n for _ in range(n)]
            for p in range(n):
                ks = [k for k in range(m) if r[k] >= n - p]
                if not ks:
                    for a in range(n):
                        h[a][p] = complex(coef[a, p].sum())
                    continue
                acc = [np.zeros(flat, dtype=complex) for _ in range(n)]
                for s in range(N):
                    cpl = gtab[s, digits[sigma[ks[0]]]]
                    for k in ks[1:]:
                        cpl = cpl * gtab[s, digits[sigma[k]]]
                    for a in range(n):
                        acc[a] += coef[a, p, s] * cpl
                for a in range(n):
                    h[a][p] = acc[a]
            det = 0.0
            for pi in itertools.permutations(range(n)):
                term = h[pi[0]][0]
                for p in range(1, n):
                    term = term * h[pi[p]][p]
                det = det + _perm_sign(pi) * term
        else:
            det = 1.0

        total += sgn_s * np.sum(wfac * det)
    return complex(total)


def _green_eval(
    x, y, x0, y0, t, params: ModelParams,
    tol: float = 1e-10,
    start_points: int = 32,
    max_points: int = 512,
) -> GreenValue:
    m = len(y)
    prev = _green_raw(x, y, x0, y0, t, params, start_points)
    pts = start_points
    while True:
        nxt = 2 * pts
        if nxt > max_points or (m and nxt**m * max(len(x), 1) > _MAX_GRID_COMPLEX):
            err = QuadratureError(
                "transition probability unconverged at %d points per dim" % pts
            )
            err.err_estimate = float("nan")
            raise err
        cur = _green_raw(x, y, x0, y0, t, params, nxt)
        delta = abs(cur - prev)
        if delta < tol:
            return GreenValue(
                value=min(max(cur.real, 0.0), 1.0),
                raw=cur,
                err_estimate=float(delta),
                points=nxt,
            )
        prev, pts = cur, nxt


def green_function(
    q: TransitionQuery, params: ModelParams, tol: float = 1e-10
) -> GreenValue:
    """Transition probability from (x0, y0) to (x, y) after time t.

    Point counts double until two refinements agree to tol; the returned
    value is the real part clamped to [0, 1], with the raw complex value and
    the doubling difference kept for diagnostics.  Cost grows as
    m! * n^2 * grid, so n + m is capped at 5.
    """
    n, m = len(q.x), len(q.y)
    if n + m > 5:
        raise ValueError("permutation sum limited to n + m <= 5")
    return _green_eval(q.x, q.y, q.x0, q.y0, q.t, params, tol=tol)


def bethe_wavefunction(
    x: Sequence[int],
    y: Sequence[int],
    zs: Sequence[complex],
    ws: Sequence[complex],
    params: ModelParams,
) -> complex:
    """Bethe wave function psi(x; y) at spectral parameters (zs, ws).

    Double permutation sum with amplitudes (1-z)^{-i}, (1-w)^{j} and the
    scattering factors 1/(alpha*z + beta*w) raised per right-count.  Inputs
    must avoid the poles z = 1, w = 1 and alpha*z + beta*w = 0.
    """
    n, m = len(x), len(y)
    if len(zs) != n or len(ws) != m:
        raise ValueError("need one z per plus particle and one w per minus")
    zs = [complex(z) for z in zs]
    ws = [complex(w) for w in ws]
    alpha, beta = params.alpha, params.beta
    if any(abs(1.0 - z) < 1e-12 for z in zs) or any(
        abs(1.0 - w) < 1e-12 for w in ws
    ):
        raise ValueError("spectral parameter at the pole z = 1 or w = 1")
    if any(abs(alpha * z + beta * w) < 1e-12 for z in zs for w in ws):
        raise ValueError("spectral parameters hit alpha*z + beta*w = 0")
    r = _counts(x, y)
    total = 0.0 + 0.0j
    for pi in itertools.permutations(range(n)):
        amp_z = _perm_sign(pi)
        for i in range(n):
            amp_z *= (1.0 / (1.0 - zs[pi[i]])) ** (i + 1) * zs[pi[i]] ** x[i]
        for sigma in itertools.permutations(range(m)):
            amp = _perm_sign(sigma)
            for j in range(m):
                wv = ws[sigma[j]]
                amp *= (1.0 - wv) ** (j + 1) * wv ** (-y[j])
                for k in range(r[j]):
                    amp /= alpha * zs[pi[n - 1 - k]] + beta * wv
            total += amp_z * amp
    return total


def eigenvalue(zs: Sequence[complex], ws: Sequence[complex],
               params: ModelParams) -> complex:
    """Generator eigenvalue attached to the wave function parameters."""
    return params.beta * sum(1.0 / z - 1.0 for z in zs) + params.alpha * sum(
        1.0 / w - 1.0 for w in ws
    )


def check_master_equation(
    q: TransitionQuery, params: ModelParams, h: float | None = None
) -> float:
    """|central-difference dG/dt - free-generator RHS| at the query point.

    The RHS shifts single coordinates, which can leave the physical domain;
    those values are the analytic continuation of the integral formula, which
    is exactly what the boundary conditions are for.
    """
    if h is None:
        h = 1e-4 * max(1.0, q.t)
    if q.t - h < 0:
        raise ValueError("need t >= h for the central difference")
    alpha, beta = params.alpha, params.beta
    quad_tol = 1e-13

    def g(x, y, t):
        return _green_eval(x, y, q.x0, q.y0, t, params, tol=quad_tol).raw.real

    dgdt = (g(q.x, q.y, q.t + h) - g(q.x, q.y, q.t - h)) / (2.0 * h)
    n, m = len(q.x), len(q.y)
    rhs = -(beta * n + alpha * m) * g(q.x, q.y, q.t)
    for i in range(n):
        shifted = q.x[:i] + (q.x[i] - 1,) + q.x[i + 1:]
        rhs += beta * g(shifted, q.y, q.t)
    for j in range(m):
        shifted = q.y[:j] + (q.y[j] + 1,) + q.y[j + 1:]
        rhs += alpha * g(q.x, shifted, q.t)
    return abs(dgdt - rhs)


def check_boundary_conditions(
    params: ModelParams, samples: int = 12, rng: np.random.Generator | None = None
) -> float:
    """Worst violation of the three contact identities on random inputs.

    Same-species contacts: G at x_{i+1} = x_i equals G at x_{i+1} = x_i + 1
    (mirrored for minus).  Opposite-species contact at y_j = x_i + 1 equals
    beta * G(y_j -> x_i) + alpha * G(x_i -> x_i + 1).  All identities are
    evaluated on the analytic continuation.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    alpha, beta = params.alpha, params.beta
    quad_tol = 1e-12
    worst = 0.0

    def g(x, y, x0, y0, t):
        return _green_eval(x, y, x0, y0, t, params, tol=quad_tol).raw.real

    for _ in range(samples):
        t = float(rng.uniform(0.2, 1.2))
        c = int(rng.integers(-2, 3))

        # plus-plus contact, with and without a minus spectator
        x0 = (c - 2, c - 1)
        y0 = (c + 2,) if rng.integers(2) else ()
        ysp = (c + 3,) if y0 else ()
        lhs = g((c, c), ysp, x0, y0, t)
        rhs = g((c, c + 1), ysp, x0, y0, t)
        worst = max(worst, abs(lhs - rhs))

        # minus-minus contact
        y0m = (c + 1, c + 2)
        x0m = (c - 2,) if rng.integers(2) else ()
        xsp = (c - 3,) if x0m else ()
        lhs = g(xsp, (c, c), x0m, y0m, t)
        rhs = g(xsp, (c - 1, c), x0m, y0m, t)
        worst = max(worst, abs(lhs - rhs))

        # plus-minus contact
        x0c, y0c = (c - 1,), (c,)
        lhs = g((c,), (c + 1,), x0c, y0c, t)
        rhs = beta * g((c,), (c,), x0c, y0c, t) + alpha * g(
            (c + 1,), (c + 1,), x0c, y0c, t
        )
        worst = max(worst, abs(lhs - rhs))
    return worst
