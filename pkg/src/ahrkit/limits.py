"""Limit laws of the rescaled currents.

The Airy function and Airy kernel, the GUE Tracy-Widom distribution F2
as a continuous Fredholm determinant on L2(s, infinity), the Gaussian
factor F_G, the product prediction for the joint current probability,
and a random-matrix Monte Carlo oracle that pins F2 independently of
the quadrature pipeline.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import eigvalsh_tridiagonal
from scipy.linalg import eigh as _scipy_eigh

from .core import normal_mode_coords
from .quadrature import QuadratureError
from .simulate import thread_count, trajectory_rng

__all__ = [
    "LimitPrediction",
    "NystromGrid",
    "airy",
    "airy_kernel",
    "gaussian_FG",
    "gue_mc_oracle",
    "limit_prediction",
    "tracy_widom_F2",
]

# Ai(0) = 3^(-2/3)/Gamma(2/3) and -Ai'(0) = 3^(-1/3)/Gamma(1/3).
_AI0 = 0.35502805388781724
_AIP0 = 0.25881940379280678

# Switchover between the Maclaurin series and the saddle-point contour.
_SERIES_CUT = 3.0

# exp(-46) ~ 1e-20: where Gaussian tails on the descent paths are cut.
_TAIL_LOG = 46.0


def _airy_series(x: np.ndarray) -> np.ndarray:
    """Maclaurin pair f, g; fully converged for |x| <= 3."""
    f = np.ones_like(x)
    g = x.copy()
    tf = np.ones_like(x)
    tg = x.copy()
    x3 = x ** 3
    for k in range(60):
        tf = tf * x3 / ((3 * k + 2) * (3 * k + 3))
        tg = tg * x3 / ((3 * k + 3) * (3 * k + 4))
        f += tf
        g += tg
        if np.all(np.abs(tf) + np.abs(tg) < 1e-19):
            break
    return _AI0 * f - _AIP0 * g


def _airy_right(x: np.ndarray, n_nodes: int) -> np.ndarray:
    # Vertical steepest-descent line through the saddle sqrt(x):
    # Ai(x) = e^{-(2/3)x^{3/2}}/pi * Re int_0^inf e^{-sqrt(x)s^2 - is^3/3} ds.
    tau, wq = leggauss(n_nodes)
    tau = (tau + 1.0) / 2.0
    wq = wq / 2.0
    smax = math.sqrt(_TAIL_LOG) / x ** 0.25
    s = smax[:, None] * tau[None, :]
    phase = -np.sqrt(x)[:, None] * s ** 2 - 1j * s ** 3 / 3.0
    core = (np.exp(phase).real * wq[None, :]).sum(axis=1) * smax
    with np.errstate(under="ignore"):
        amp = np.exp(-(2.0 / 3.0) * x ** 1.5)
    return amp * core / math.pi


def _airy_left(x: np.ndarray, n_nodes: int) -> np.ndarray:
    # Two-piece path through the upper saddle i*sqrt(y), y = -x: the
    # vertical segment [0, i sqrt(y)] (purely oscillatory) followed by
    # the descent ray at angle pi/4.  Conjugate symmetry of the full
    # contour leaves Ai = Im(V)/pi with V the upper-half integral.
    y = -x
    nn = max(n_nodes, int(6.0 * float(y.max()) + 60))
    tau, wq = leggauss(nn)
    tau = (tau + 1.0) / 2.0
    wq = wq / 2.0
    ry = np.sqrt(y)
    s = ry[:, None] * tau[None, :]
    seg = 1j * np.exp(1j * (y[:, None] * s - s ** 3 / 3.0))
    v = (seg * wq[None, :]).sum(axis=1) * ry
    e4 = complex(math.cos(math.pi / 4.0), math.sin(math.pi / 4.0))
    umax = math.sqrt(_TAIL_LOG) / y ** 0.25
    u = umax[:, None] * tau[None, :]
    zeta = 1j * ry[:, None] + e4 * u
    phi = zeta ** 3 / 3.0 + y[:, None] * zeta
    ray = e4 * np.exp(phi)
    v = v + (ray * wq[None, :]).sum(axis=1) * umax
    return v.imag / math.pi


def _airy_array(x, n_nodes: int = 240) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x).ravel()
    out = np.empty_like(flat)
    ser = np.abs(flat) <= _SERIES_CUT
    pos = (~ser) & (flat > 0)
    neg = (~ser) & (flat < 0)
    if ser.any():
        out[ser] = _airy_series(flat[ser])
    if pos.any():
        out[pos] = _airy_right(flat[pos], n_nodes)
    if neg.any():
        out[neg] = _airy_left(flat[neg], n_nodes)
    return out.reshape(np.atleast_1d(x).shape)


def airy(x: float) -> float:
    """Ai(x): Maclaurin series for |x| <= 3, saddle-point contour beyond.

    The contour pieces carry their magnitude in a separate exponential
    factor, so large positive x underflows cleanly to 0 instead of
    overflowing, and large negative x only costs quadrature nodes.
    """
    return float(_airy_array(float(x))[0])


def _tail_rule(base: float, n_nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    # Ai(u)^2 ~ e^{-(4/3)u^{3/2}} is dead past u ~ 16, so integrate the
    # half-line on [0, L] with L pushing base + L past that point.
    length = max(16.0 - base, 8.0)
    lam, wl = leggauss(n_nodes)
    return (lam + 1.0) * (length / 2.0), wl * (length / 2.0)


def airy_kernel(x: float, y: float, n_nodes: int = 200) -> float:
    """The Airy kernel A(x,y) = int_0^inf Ai(x+l) Ai(y+l) dl."""
    lam, wl = _tail_rule(min(x, y), n_nodes)
    vals = _airy_array(np.array([x, y])[:, None] + lam[None, :])
    return float(np.sum(wl * vals[0] * vals[1]))


@dataclass(frozen=True, eq=False)
class NystromGrid:
    """Gauss-Legendre rule mapped affinely onto (s, s + cutoff)."""

    nodes: np.ndarray
    weights: np.ndarray
    n: int
    cutoff: float

    def __post_init__(self) -> None:
        if self.cutoff < 12.0:
            raise ValueError("cutoff must be at least 12")
        if not np.all(self.weights > 0.0):
            raise ValueError("quadrature weights must be positive")
        if abs(self.weights.sum() - self.cutoff) > 1e-9 * self.cutoff:
            raise ValueError("weights must sum to the interval length")

    @classmethod
    def build(cls, s: float, n: int = 80, cutoff: float = 14.0) -> "NystromGrid":
        x, w = leggauss(n)
        return cls(nodes=s + (x + 1.0) * (cutoff / 2.0),
                   weights=w * (cutoff / 2.0), n=n, cutoff=cutoff)


def _f2_determinant(grid: NystromGrid) -> float:
    xs = grid.nodes
    lam, wl = _tail_rule(float(xs.min()), 200)
    amat = _airy_array(xs[:, None] + lam[None, :])
    kmat = amat @ (wl[:, None] * amat.T)
    half = np.sqrt(grid.weights)
    sym = half[:, None] * kmat * half[None, :]
    sym = (sym + sym.T) / 2.0
    eigs = np.linalg.eigvalsh(sym)
    det = float(np.prod(1.0 - eigs))
    if det < -1e-8 or det > 1.0 + 1e-8:
        raise QuadratureError("Airy-kernel determinant left [0, 1]: %g" % det)
    return min(max(det, 0.0), 1.0)


def tracy_widom_F2(s: float, grid: Optional[NystromGrid] = None,
                   tol: float = 1e-9) -> float:
    """GUE Tracy-Widom distribution F2(s) = det(1 - A) on L2(s, inf).

    With an explicit grid the determinant is evaluated on it as given;
    otherwise the node count doubles from 40 until two stages agree
    within tol.
    """
    if grid is not None:
        return _f2_determinant(grid)
    prev = None
    for n in (40, 80, 160, 320):
        val = _f2_determinant(NystromGrid.build(s, n=n))
        if prev is not None and abs(val - prev) <= tol:
            return val
        prev = val
    raise QuadratureError("F2(%g) not settled under node doubling" % s)


def gaussian_FG(s: float) -> float:
    """Standard normal CDF through the complementary error function."""
    return 0.5 * math.erfc(-s / math.sqrt(2.0))


@dataclass(frozen=True)
class LimitPrediction:
    """Predicted limit of P[N+ >= n, N- >= m] at given normal modes."""

    s2: float
    sg: float
    F2_value: float
    FG_value: float
    product: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.product <= 1.0:
            raise ValueError("predicted probability left [0, 1]")


def limit_prediction(n: float, m: float, t: float, rho: float) -> LimitPrediction:
    """F2(s2) * F_G(sg) at the normal-mode coordinates of (n, m, t)."""
    coords = normal_mode_coords(float(n), float(m), t, rho)
    f2 = tracy_widom_F2(coords.s2)
    fg = gaussian_FG(coords.sg)
    return LimitPrediction(s2=coords.s2, sg=coords.sg,
                           F2_value=f2, FG_value=fg, product=f2 * fg)


def _gue_largest_dense(dim: int, rng: np.random.Generator) -> float:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (a + a.conj().T) / 2.0
    return float(_scipy_eigh(h, eigvals_only=True,
                             subset_by_index=(dim - 1, dim - 1))[0])


def _gue_largest_tridiagonal(dim: int, rng: np.random.Generator) -> float:
    # beta = 2 tridiagonal model: same eigenvalue law as the dense
    # ensemble above (diagonal N(0,1), off-diagonal chi_{2k}/sqrt(2)).
    d = rng.standard_normal(dim)
    e = np.sqrt(rng.chisquare(2.0 * np.arange(dim - 1, 0, -1)) / 2.0)
    return float(eigvalsh_tridiagonal(
        d, e, select="i", select_range=(dim - 1, dim - 1))[0])


def gue_mc_oracle(N: int, samples: int, s: float, seed: int,
                  method: str = "dense") -> Tuple[float, float]:
    """Empirical F2(s) from the largest eigenvalues of N x N GUE matrices.

    Entries are scaled so the spectrum edge sits at 2 sqrt(N); each
    largest eigenvalue is centered there and magnified by N^(1/6).
    Returns (estimate, binomial stderr).  Per-sample counter-based RNG
    streams keep the result independent of the thread count.
    """
    if N < 100:
        raise ValueError("matrix size must be at least 100")
    if samples < 2:
        raise ValueError("need at least two samples")
    if method == "dense":
        largest = _gue_largest_dense
    elif method == "tridiagonal":
        largest = _gue_largest_tridiagonal
    else:
        raise ValueError("method must be 'dense' or 'tridiagonal'")

    def one(i: int) -> float:
        return largest(N, trajectory_rng(seed, i))

    threads = thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = np.fromiter(pool.map(one, range(samples)), dtype=float,
                               count=samples)
    else:
        vals = np.fromiter((one(i) for i in range(samples)), dtype=float,
                           count=samples)
    scaled = (vals - 2.0 * math.sqrt(N)) * N ** (1.0 / 6.0)
    p_hat = float(np.mean(scaled <= s))
    stderr = math.sqrt(max(p_hat * (1.0 - p_hat), 1.0 / samples) / samples)
    return p_hat, stderr
