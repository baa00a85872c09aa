"""Shared domain types, scaling constants, and normal-mode coordinate maps.

Everything here is closed-form arithmetic: model rates, the macroscopic
currents j+/j-, the (n, m, t) <-> (s2, sg) coordinate maps used by the limit
studies, and the saddle-point constants needed by the Fredholm kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple


@dataclass(frozen=True)
class ModelParams:
    """Hop rates of the two-species process and the Bernoulli density rho.

    alpha: rate of (0,-) -> (-,0);  beta: rate of (+,0) -> (0,+);
    swap_rate: rate of (+,-) -> (-,+), fixed to 1.  The eigenfunctions behind
    every exact formula require alpha + beta = 1; construction rejects
    anything else.
    """

    alpha: float
    beta: float
    rho: float = 1.0
    swap_rate: float = 1.0

    def __post_init__(self) -> None:
        if not (self.alpha > 0.0 and self.beta > 0.0):
            raise ValueError("rates alpha, beta must be positive")
        if abs(self.alpha + self.beta - 1.0) > 1e-12:
            raise ValueError(
                "alpha + beta must equal 1 exactly (got %r)" % (self.alpha + self.beta)
            )
        if self.swap_rate != 1.0:
            raise ValueError("swap rate is fixed to 1")
        if not (0.0 < self.rho <= 1.0):
            raise ValueError("rho must lie in (0, 1]")

    @property
    def rho_prime(self) -> float:
        """Complementary density 1 - rho (written rho' throughout)."""
        return 1.0 - self.rho


@dataclass(frozen=True)
class ParticleConfig:
    """Positions of + and - particles on the integer lattice.

    Both lists strictly increasing; the two species never share a site.
    """

    plus: Tuple[int, ...]
    minus: Tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "plus", tuple(int(p) for p in self.plus))
        object.__setattr__(self, "minus", tuple(int(q) for q in self.minus))
        for name, xs in (("plus", self.plus), ("minus", self.minus)):
            if any(a >= b for a, b in zip(xs, xs[1:])):
                raise ValueError("%s positions must be strictly increasing" % name)
        if set(self.plus) & set(self.minus):
            raise ValueError("plus and minus positions must be disjoint")

    @property
    def n(self) -> int:
        return len(self.plus)

    @property
    def m(self) -> int:
        return len(self.minus)


@dataclass(frozen=True)
class ScalingConstants:
    """Closed-form constants tying (n, m, t) to the limit laws.

    lam is the normalization with 6*a1 = lam**3; lam_c = (w_c + c)*lam is the
    x/y rescaling used by the shifted kernels; w_c = (1-rho)/2 is the double
    saddle of the kernel exponent.
    """

    rho: float
    c: float
    c2: float
    cg: float
    j_plus: float
    j_minus: float
    w_c: float
    lam: float
    lam_c: float


@dataclass(frozen=True)
class ScalingCoords:
    """Normal-mode values: s2 (Tracy-Widom mode), sg (Gaussian mode)."""

    s2: float
    sg: float


def eigenvalue_lambda(
    params: ModelParams,
    zs: Sequence[complex],
    ws: Sequence[complex],
) -> complex:
    """Generator eigenvalue: beta*sum(1/z_j - 1) + alpha*sum(1/w_k - 1)."""
    for v in list(zs) + list(ws):
        if v == 0:
            raise ValueError("eigenvalue_lambda: zero argument")
    out = 0.0 + 0.0j
    for z in zs:
        out += params.beta * (1.0 / z - 1.0)
    for w in ws:
        out += params.alpha * (1.0 / w - 1.0)
    return out


def macroscopic_currents(rho: float) -> Tuple[float, float]:
    """Macroscopic currents (j+, j-) = (rho(3-rho)^2/16, (1+rho)^2(2-rho)/16)."""
    if not (0.0 < rho <= 1.0):
        raise ValueError("rho must lie in (0, 1]")
    j_plus = rho * (3.0 - rho) ** 2 / 16.0
    j_minus = (1.0 + rho) ** 2 * (2.0 - rho) / 16.0
    return j_plus, j_minus


def shift_lower_bound(rho: float) -> float:
    """Smallest admissible kernel shift c for the given density."""
    return (3.0 + rho) / 2.0


def default_shift(rho: float) -> float:
    """Default kernel shift: 2 for rho <= 1/2, else the bound plus 1/2."""
    return 2.0 if rho <= 0.5 else shift_lower_bound(rho) + 0.5


def scaling_constants(rho: float, c: float | None = None) -> ScalingConstants:
    """All scaling constants at density rho and kernel shift c.

    Requires rho in (0,1) (cg degenerates at rho=1) and c > (3+rho)/2.
    """
    if not (0.0 < rho < 1.0):
        raise ValueError(
            "scaling constants require rho in (0, 1); the Gaussian-mode "
            "constant cg vanishes at rho = 1"
        )
    if c is None:
        c = default_shift(rho)
    bound = shift_lower_bound(rho)
    if not c > bound:
        raise ValueError(
            "shift c = %g violates the requirement c > (3 + rho)/2 = %g" % (c, bound)
        )
    c2 = (3.0 / 32.0) ** (1.0 / 3.0) * (1.0 - rho) * (3.0 - rho) ** (2.0 / 3.0) * (
        1.0 + rho
    ) ** (2.0 / 3.0)
    cg = 2.0 ** (-0.5) * 3.0 * (1.0 - rho) ** 1.5 * math.sqrt(rho * (2.0 - rho))
    j_plus, j_minus = macroscopic_currents(rho)
    w_c = (1.0 - rho) / 2.0
    lam = (6.0 / ((1.0 + rho) * (3.0 - rho))) ** (1.0 / 3.0)
    lam_c = (1.0 - rho + 2.0 * c) * (3.0 / (4.0 * (1.0 + rho) * (3.0 - rho))) ** (
        1.0 / 3.0
    )
    return ScalingConstants(
        rho=rho,
        c=c,
        c2=c2,
        cg=cg,
        j_plus=j_plus,
        j_minus=j_minus,
        w_c=w_c,
        lam=lam,
        lam_c=lam_c,
    )


def normal_mode_coords(n: float, m: float, t: float, rho: float) -> ScalingCoords:
    """Normal-mode coordinates (s2, sg) of the current pair (n, m) at time t."""
    if not t > 0.0:
        raise ValueError("t must be positive")
    sc = scaling_constants(rho)
    s2 = (
        (1.0 + rho) * n
        - (3.0 - rho) * m
        + 0.5 * (1.0 - rho) * (1.0 - (1.0 - rho) ** 2 / 4.0) * t
    ) / (sc.c2 * t ** (1.0 / 3.0))
    sg = (
        -2.0 * (2.0 - rho) * n
        + 2.0 * rho * m
        + (2.0 - rho) * (1.0 - rho) * rho * t
    ) / (sc.cg * math.sqrt(t))
    return ScalingCoords(s2=s2, sg=sg)


def scaled_particle_numbers(
    t: float, s2: float, sg: float, rho: float
) -> Tuple[float, float]:
    """Real-valued (n, m) targeting normal-mode values (s2, sg) at time t."""
    if not t > 0.0:
        raise ValueError("t must be positive")
    sc = scaling_constants(rho)
    pref = 1.0 / (12.0 * (1.0 - rho))
    n_real = sc.j_plus * t - pref * (
        2.0 * rho * sc.c2 * s2 * t ** (1.0 / 3.0)
        + (3.0 - rho) * sc.cg * sg * math.sqrt(t)
    )
    m_real = sc.j_minus * t - pref * (
        2.0 * (2.0 - rho) * sc.c2 * s2 * t ** (1.0 / 3.0)
        + (1.0 + rho) * sc.cg * sg * math.sqrt(t)
    )
    if n_real < 0.0 or m_real < 0.0:
        raise ValueError(
            "scaled particle numbers (%.3f, %.3f) negative; experiment vacuous"
            % (n_real, m_real)
        )
    return n_real, m_real


def rounded_scaled_experiment(
    t: float, s2: float, sg: float, rho: float
) -> Tuple[int, int, ScalingCoords]:
    """Integer (n, m) nearest the scaling targets, plus the effective coords.

    Rounds half-to-even and recomputes the exact (s2, sg) realized by the
    integer pair; downstream comparisons always use the effective values.
    """
    n_real, m_real = scaled_particle_numbers(t, s2, sg, rho)
    n = int(round(n_real))
    m = int(round(m_real))
    if n < 1 or m < 1:
        raise ValueError("rounded particle numbers below 1; experiment vacuous")
    return n, m, normal_mode_coords(n, m, t, rho)
