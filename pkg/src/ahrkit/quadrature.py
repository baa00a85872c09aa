"""Trapezoid quadrature on circles and nested product contours.

For integrands analytic in an annulus around the contour the equispaced
trapezoid rule converges geometrically, so every exact formula in this
package reduces to modest tensor grids.  Error control is purely empirical:
double the point counts, compare.  Unconverged results are flagged, never
silently returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Tuple

import numpy as np

MAX_POINTS_PER_DIM = 2**14
_CHUNK_LIMIT = 1 << 21


class QuadratureError(RuntimeError):
    """Evaluation failure (non-finite sample, pole on contour)."""


@dataclass(frozen=True)
class Circle:
    """Positively oriented circle center + radius*e^{i*theta}."""

    center: complex
    radius: float
    points: int = 64

    def __post_init__(self) -> None:
        if not self.radius > 0.0:
            raise ValueError("radius must be positive")
        if self.points < 8 or self.points & (self.points - 1):
            raise ValueError("points must be a power of two, at least 8")

    def nodes(self, points: int | None = None) -> np.ndarray:
        n = self.points if points is None else points
        theta = 2.0 * np.pi * np.arange(n) / n
        return self.center + self.radius * np.exp(1j * theta)

    def weights(self, points: int | None = None) -> np.ndarray:
        """Weights w_k with (1/2pi i) * contour integral ~ sum f(z_k) w_k."""
        n = self.points if points is None else points
        theta = 2.0 * np.pi * np.arange(n) / n
        return (self.radius / n) * np.exp(1j * theta)

    def distance_to(self, pole: complex) -> float:
        return abs(abs(pole - self.center) - self.radius)


# A declared pole is a constant, or a callable of the outer variables for
# coupling poles like w = -alpha*z/beta that move with the outer contour.
PoleDecl = "complex | Callable[..., complex]"


@dataclass(frozen=True)
class MultiContour:
    """Product contour, one Circle per variable, outermost first.

    poles[i] lists singularities the i-th variable must stay away from;
    entries are complex constants or callables of the outer variables
    (variables 0..i-1).  Constraints are checked numerically before use.
    """

    circles: Tuple[Circle, ...]
    poles: Tuple[Tuple[object, ...], ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "circles", tuple(self.circles))
        poles = tuple(tuple(ps) for ps in self.poles) if self.poles else ()
        if poles and len(poles) != len(self.circles):
            raise ValueError("poles must list one (possibly empty) tuple per variable")
        object.__setattr__(self, "poles", poles)

    @property
    def dim(self) -> int:
        return len(self.circles)

    def check_poles(self, min_distance: float = 1e-9) -> None:
        """Verify every declared pole stays off its circle.

        Constant poles get the exact circle distance; moving poles are
        sampled on a coarse grid of the outer contours.
        """
        if not self.poles:
            return
        for i, pole_list in enumerate(self.poles):
            circ = self.circles[i]
            for pole in pole_list:
                if callable(pole):
                    outer = [c.nodes(min(c.points, 64)) for c in self.circles[:i]]
                    grids = np.meshgrid(*outer, indexing="ij") if outer else []
                    locs = np.asarray(pole(*grids), dtype=complex).ravel()
                    d = np.abs(np.abs(locs - circ.center) - circ.radius).min()
                else:
                    d = circ.distance_to(complex(pole))
                if d < min_distance:
                    raise QuadratureError(
                        "declared pole %r within %.2e of contour %d" % (pole, d, i)
                    )


@dataclass(frozen=True)
class QuadValue:
    """Quadrature result with the doubling-difference error estimate."""

    value: complex
    err_estimate: float
    converged: bool = True
    points: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.err_estimate < 0.0:
            raise ValueError("err_estimate must be nonnegative")

    def require_converged(self) -> complex:
        if not self.converged:
            err = QuadratureError(
                "quadrature unconverged: err_estimate %.3e at %s points"
                % (self.err_estimate, (self.points,))
            )
            err.err_estimate = self.err_estimate
            raise err
        return self.value


def _sample(f: Callable, zs: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        try:
            vals = np.asarray(f(zs), dtype=complex)
            if vals.shape != zs.shape:
                raise TypeError
        except (TypeError, ValueError):
            vals = np.asarray([f(z) for z in zs], dtype=complex)
    if not np.all(np.isfinite(vals)):
        bad = zs[~np.isfinite(vals)][0]
        raise QuadratureError("non-finite integrand sample at z = %r" % bad)
    return vals


def integrate_circle(f: Callable, circle: Circle) -> QuadValue:
    """(1/2pi i) * contour integral of f over the circle.

    Evaluates at the declared point count and at double that; the difference
    is the error estimate, the finer value is returned.
    """
    n = circle.points
    coarse = np.sum(_sample(f, circle.nodes(n)) * circle.weights(n))
    fine = np.sum(_sample(f, circle.nodes(2 * n)) * circle.weights(2 * n))
    return QuadValue(
        value=complex(fine),
        err_estimate=float(abs(fine - coarse)),
        converged=True,
        points=(2 * n,),
    )


def _tensor_sum(f: Callable, circles: Sequence[Circle], counts: Sequence[int]) -> complex:
    """Weighted tensor-grid sum, chunked over leading dims to bound memory."""
    nodes = [c.nodes(n) for c, n in zip(circles, counts)]
    weights = [c.weights(n) for c, n in zip(circles, counts)]
    d = len(nodes)
    lead = d
    block = 1
    while lead > 0 and block * counts[lead - 1] <= _CHUNK_LIMIT:
        block *= counts[lead - 1]
        lead -= 1

    inner_shape = [1] * (d - lead)
    mesh = []
    wprod = np.ones(1, dtype=complex).reshape(inner_shape) if lead < d else None
    for j in range(lead, d):
        shape = inner_shape.copy()
        shape[j - lead] = counts[j]
        mesh.append(nodes[j].reshape(shape))
        wprod = wprod * weights[j].reshape(shape)

    total = 0.0 + 0.0j
    for idx in np.ndindex(*counts[:lead]):
        args = [nodes[i][idx[i]] for i in range(lead)] + mesh
        with np.errstate(all="ignore"):
            vals = np.asarray(f(*args), dtype=complex)
        if not np.all(np.isfinite(vals)):
            raise QuadratureError(
                "non-finite integrand sample in tensor grid at outer index %s" % (idx,)
            )
        w_lead = 1.0 + 0.0j
        for i in range(lead):
            w_lead *= weights[i][idx[i]]
        total += w_lead * np.sum(vals * wprod) if mesh else w_lead * complex(vals)
    return total


def integrate_multi(
    f: Callable,
    contour: MultiContour,
    tol: float = 1e-10,
    max_points_per_dim: int = MAX_POINTS_PER_DIM,
    vectorized: bool = True,
) -> QuadValue:
    """Iterated contour integral over the product contour, (1/2pi i) per dim.

    All dimensions refine together (point counts double in lockstep) until
    the change between refinements drops below tol or a dimension hits the
    point cap; a capped result is returned flagged, never raised.

    Vectorized integrands receive broadcastable complex arrays, one per
    variable, outermost first.  Pass vectorized=False for scalar callables.
    """
    contour.check_poles()
    g = f if vectorized else np.vectorize(f, otypes=[complex])
    counts = [c.points for c in contour.circles]
    prev = _tensor_sum(g, contour.circles, counts)
    while True:
        if any(2 * n > max_points_per_dim for n in counts):
            return QuadValue(
                value=complex(prev),
                err_estimate=float("inf"),
                converged=False,
                points=tuple(counts),
            )
        counts = [2 * n for n in counts]
        cur = _tensor_sum(g, contour.circles, counts)
        delta = abs(cur - prev)
        if delta < tol:
            return QuadValue(
                value=complex(cur),
                err_estimate=float(delta),
                converged=True,
                points=tuple(counts),
            )
        prev = cur
