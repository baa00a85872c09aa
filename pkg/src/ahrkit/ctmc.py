"""Exact finite-window CTMC ground truth for the two-species process.

States are full particle configurations on a bounded lattice window with
reflecting walls; the generator is assembled sparsely and evolved by
uniformization.  Because + particles only ever move right and - particles
only ever move left, a particle that reaches its wall stays there, so the
probability mass sitting on wall-touching states at time t equals the mass
that ever touched a wall.  That makes the reported leakage a true bound on
the finite-window bias.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.stats import nbinom, poisson

from .core import ModelParams, ParticleConfig

STATE_CAP = 5_000_000


class ResourceError(RuntimeError):
    """State space above the configured cap."""


class WindowLeakageError(RuntimeError):
    """Boundary leakage above tolerance; enlarge the window."""


class ConvergenceError(RuntimeError):
    """Uniformization failed to reach tolerance within the step cap."""


@dataclass(frozen=True)
class LatticeWindow:
    """Closed site interval [left, right] with reflecting walls."""

    left: int
    right: int

    def __post_init__(self) -> None:
        if self.right < self.left:
            raise ValueError("window right must be >= left")

    @property
    def width(self) -> int:
        return self.right - self.left + 1


def _colex_rank(combos: np.ndarray, binom: np.ndarray) -> np.ndarray:
    """Rank of each sorted k-subset row in colexicographic order."""
    k = combos.shape[1]
    rank = np.zeros(combos.shape[0], dtype=np.int64)
    for j in range(k):
        rank += binom[combos[:, j].astype(np.int64), j + 1]
    return rank


class StateIndexer:
    """Dense bijection between window configurations and 0..S-1.

    index = rank(plus subset) * C(W-n, m) + rank(minus subset relabeled to
    the W-n sites not taken by plus); both ranks colexicographic.
    """

    def __init__(self, window: LatticeWindow, n: int, m: int):
        if n < 0 or m < 0:
            raise ValueError("particle counts must be nonnegative")
        w = window.width
        if n + m > w:
            raise ValueError("window too small for the particles")
        self.window = window
        self.n = n
        self.m = m
        self.n_plus_combos = math.comb(w, n)
        self.n_minus_combos = math.comb(w - n, m)
        self.size = self.n_plus_combos * self.n_minus_combos
        if self.size > STATE_CAP:
            raise ResourceError(
                "state space %d exceeds cap %d" % (self.size, STATE_CAP)
            )
        self._binom = np.zeros((w + 1, max(n, m) + 2), dtype=np.int64)
        for a in range(w + 1):
            for b in range(self._binom.shape[1]):
                self._binom[a, b] = math.comb(a, b)
        self._plus_combos = self._combo_table(w, n)
        self._minus_combos = self._combo_table(w - n, m)

    def _combo_table(self, w: int, k: int) -> np.ndarray:
        if k == 0:
            return np.zeros((1, 0), dtype=np.int16)
        combos = np.array(list(itertools.combinations(range(w), k)), dtype=np.int16)
        out = np.empty_like(combos)
        out[_colex_rank(combos, self._binom)] = combos
        return out

    def _relabel_minus(self, plus_off: np.ndarray, minus_off: np.ndarray) -> np.ndarray:
        """Map absolute minus offsets to slots among the non-plus sites."""
        if self.n == 0 or self.m == 0:
            return minus_off
        cnt = (plus_off[:, :, None] < minus_off[:, None, :]).sum(axis=1)
        return minus_off - cnt.astype(minus_off.dtype)

    def rank_arrays(self, plus_off: np.ndarray, minus_off: np.ndarray) -> np.ndarray:
        """Indices for batches of configurations given as offset arrays."""
        a = _colex_rank(plus_off, self._binom)
        b = _colex_rank(self._relabel_minus(plus_off, minus_off), self._binom)
        return a * self.n_minus_combos + b

    def index_of(self, config: ParticleConfig) -> int:
        if config.n != self.n or config.m != self.m:
            raise ValueError("configuration has wrong particle counts")
        left, right = self.window.left, self.window.right
        for x in config.plus + config.minus:
            if not (left <= x <= right):
                raise ValueError("site %d outside window" % x)
        p = np.array([config.plus], dtype=np.int16) - left
        q = np.array([config.minus], dtype=np.int16) - left
        return int(self.rank_arrays(p, q)[0])

    def config_at(self, index: int) -> ParticleConfig:
        if not (0 <= index < self.size):
            raise ValueError("index out of range")
        a, b = divmod(index, self.n_minus_combos)
        plus_off = self._plus_combos[a]
        minus_rel = self._minus_combos[b].astype(np.int16)
        minus_off = minus_rel.copy()
        for p in plus_off:
            minus_off += minus_off >= p
        left = self.window.left
        return ParticleConfig(
            plus=tuple(int(x) + left for x in plus_off),
            minus=tuple(int(x) + left for x in minus_off),
        )

    @cached_property
    def decoded(self) -> Tuple[np.ndarray, np.ndarray]:
        """(plus, minus) offset arrays of shape (S, n) and (S, m), sorted rows."""
        a = np.repeat(np.arange(self.n_plus_combos), self.n_minus_combos)
        b = np.tile(np.arange(self.n_minus_combos), self.n_plus_combos)
        plus_off = self._plus_combos[a]
        minus_off = self._minus_combos[b].astype(np.int16).copy()
        for j in range(self.n):
            minus_off += minus_off >= plus_off[:, j : j + 1]
        return plus_off, minus_off


def enumerate_states(window: LatticeWindow, n: int, m: int) -> StateIndexer:
    """Complete enumeration of n-plus/m-minus configurations in the window."""
    return StateIndexer(window, n, m)


@dataclass(frozen=True)
class SparseGenerator:
    """Sparse CTMC generator; rows sum to zero."""

    Q: sp.csr_matrix
    size: int

    @property
    def uniformization_rate(self) -> float:
        if self.size == 0:
            return 0.0
        return float(-self.Q.diagonal().min())


def build_generator(params: ModelParams, idx: StateIndexer) -> SparseGenerator:
    """All allowed transitions: + hops right at beta, - hops left at alpha,
    adjacent (+,-) swaps at 1; walls simply disable jumps."""
    plus, minus = idx.decoded
    s = idx.size
    w = idx.window.width
    ids = np.arange(s, dtype=np.int64)
    rows, cols, vals = [], [], []

    def add(mask: np.ndarray, p2: np.ndarray, m2: np.ndarray, rate: float) -> None:
        rows.append(ids[mask])
        cols.append(idx.rank_arrays(p2, m2))
        vals.append(np.full(int(mask.sum()), rate))

    for j in range(idx.n):
        tgt = plus[:, j] + 1
        can = tgt <= w - 1
        on_plus = (plus == tgt[:, None]).any(axis=1)
        on_minus = (minus == tgt[:, None]).any(axis=1)
        hop = can & ~on_plus & ~on_minus
        if hop.any():
            p2 = plus[hop].copy()
            p2[:, j] += 1
            add(hop, p2, minus[hop], params.beta)
        swap = can & on_minus
        if swap.any():
            p2 = plus[swap].copy()
            p2[:, j] += 1
            m2 = minus[swap].copy()
            k = (m2 == p2[:, j : j + 1]).argmax(axis=1)
            m2[np.arange(m2.shape[0]), k] = p2[:, j] - 1
            add(swap, p2, m2, params.swap_rate)

    for k in range(idx.m):
        tgt = minus[:, k] - 1
        can = tgt >= 0
        on_plus = (plus == tgt[:, None]).any(axis=1)
        on_minus = (minus == tgt[:, None]).any(axis=1)
        hop = can & ~on_plus & ~on_minus
        if hop.any():
            m2 = minus[hop].copy()
            m2[:, k] -= 1
            add(hop, plus[hop], m2, params.alpha)

    if rows:
        off = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(s, s),
        ).tocsr()
    else:
        off = sp.csr_matrix((s, s))
    out_rate = np.asarray(off.sum(axis=1)).ravel()
    q = (off - sp.diags(out_rate)).tocsr()
    return SparseGenerator(Q=q, size=s)


def evolve(
    gen: SparseGenerator,
    p0: np.ndarray,
    t: float,
    tol: float = 1e-12,
    step_cap: int = 200_000,
) -> np.ndarray:
    """exp(Q^T t) p0 by uniformization, neglected Poisson tail < tol."""
    p0 = np.asarray(p0, dtype=float)
    # deliberately truncated initial mixtures fall slightly short of 1
    if abs(p0.sum() - 1.0) > 1e-6:
        raise ValueError("p0 must sum to 1")
    if t < 0:
        raise ValueError("t must be nonnegative")
    lam = gen.uniformization_rate
    if t == 0.0 or lam == 0.0:
        return p0.copy()
    # substeps keep exp(-lam*tau) well above underflow
    nsub = max(1, int(math.ceil(lam * t / 300.0)))
    tau = t / nsub
    a = lam * tau
    pt = (sp.eye(gen.size, format="csr") + gen.Q / lam).T.tocsr()
    p = p0
    tail = tol / nsub
    for _ in range(nsub):
        weight = math.exp(-a)
        v = p
        acc = weight * v
        cum = weight
        k = 0
        while cum < 1.0 - tail:
            k += 1
            if k > step_cap:
                raise ConvergenceError(
                    "uniformization needs more than %d terms" % step_cap
                )
            v = pt @ v
            weight *= a / k
            acc = acc + weight * v
            cum += weight
        p = acc
    return p


def _weak_compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    if parts == 0:
        if total == 0:
            yield ()
        return
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        comp = []
        for b in bars:
            comp.append(b - prev - 1)
            prev = b
        comp.append(total + parts - 2 - prev)
        yield tuple(comp)


def initial_distribution(
    params: ModelParams, idx: StateIndexer, tol: float = 1e-9
) -> Tuple[np.ndarray, float]:
    """Step-Bernoulli start: minus packed on 0..m-1; plus on the negatives
    with i.i.d. geometric(rho) gaps (including the gap to site -1).

    Returns (p0, truncated_weight); rho=1 is the packed deterministic start.
    """
    n, m = idx.n, idx.m
    p0 = np.zeros(idx.size)
    minus_sites = tuple(range(m))
    if params.rho == 1.0:
        cfg = ParticleConfig(plus=tuple(range(-n, 0)), minus=minus_sites)
        p0[idx.index_of(cfg)] = 1.0
        return p0, 0.0
    if n == 0:
        cfg = ParticleConfig(plus=(), minus=minus_sites)
        p0[idx.index_of(cfg)] = 1.0
        return p0, 0.0
    rho = params.rho
    b_max = int(nbinom.isf(tol * 0.25, n, rho))
    while nbinom.sf(b_max, n, rho) > tol * 0.25:
        b_max += 1
    placed = 0.0
    dropped = 0.0
    for b in range(b_max + 1):
        weight = rho**n * (1.0 - rho) ** b
        for gaps in _weak_compositions(b, n):
            xs = [0] * n
            xs[n - 1] = -1 - gaps[n - 1]
            for i in range(n - 2, -1, -1):
                xs[i] = xs[i + 1] - 1 - gaps[i]
            if xs[0] < idx.window.left:
                dropped += weight
                continue
            cfg = ParticleConfig(plus=tuple(xs), minus=minus_sites)
            p0[idx.index_of(cfg)] += weight
            placed += weight
    truncated = 1.0 - placed
    return p0, truncated


def default_window(
    params: ModelParams, n: int, m: int, t: float, tol: float = 1e-9
) -> LatticeWindow:
    """Window sized so expected boundary leakage stays below tol.

    Particle displacement is stochastically below Poisson(t) (unit bound on
    each particle's move rate), and the initial plus spread below a negative
    binomial; quantiles of both set the margins.
    """
    t_eff = max(t, 1e-9)
    q = int(poisson.isf(min(tol, 1e-6) * 0.125 / max(1, n + m), t_eff)) + 2
    b_max = 0
    if params.rho < 1.0 and n > 0:
        b_max = int(nbinom.isf(tol * 0.25, n, params.rho)) + 1
    return LatticeWindow(left=-n - max(b_max, q) - 2, right=m + q + 1)


@dataclass(frozen=True)
class OracleResult:
    """Crossing probability with its finite-window leakage bound."""

    prob: float
    leakage: float
    window: LatticeWindow
    n_states: int


def oracle_crossing_prob(
    params: ModelParams,
    n: int,
    m: int,
    t: float,
    window: LatticeWindow | None = None,
    tol: float = 1e-9,
) -> OracleResult:
    """P[all n plus particles at sites >= 0 and all m minus at sites <= -1].

    Monotone particle motion makes this the probability that the first n
    plus and first m minus currents across the origin have all occurred.
    """
    if n < 1 or m < 1:
        raise ValueError("crossing event needs n, m >= 1")
    if window is None:
        window = default_window(params, n, m, t, tol)
    if window.width < n + m + 2:
        raise ValueError("window width must be at least n + m + 2")
    idx = enumerate_states(window, n, m)
    gen = build_generator(params, idx)
    p0, truncated = initial_distribution(params, idx, tol)
    evolve_tol = min(tol * 0.25, 1e-12)
    p = evolve(gen, p0, t, tol=evolve_tol)
    plus, minus = idx.decoded
    left = window.left
    event = (plus[:, 0] + left >= 0) & (minus[:, -1] + left <= -1)
    prob = float(p[event].sum())
    wall = (plus[:, -1] == idx.window.width - 1) | (minus[:, 0] == 0)
    leakage = float(p[wall].sum()) + truncated + evolve_tol
    if leakage > tol:
        raise WindowLeakageError(
            "boundary leakage %.3e exceeds tol %.3e; enlarge the window"
            % (leakage, tol)
        )
    return OracleResult(prob=prob, leakage=leakage, window=window, n_states=idx.size)
