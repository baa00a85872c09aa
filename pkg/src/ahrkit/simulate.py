"""Kinetic Monte Carlo driver: trajectory ensembles and crossing estimates.

Per-trajectory randomness comes from counter-based Philox streams keyed by
(seed, trajectory index), so results are reproducible and independent of
how trajectories are distributed over threads.  The hot loop lives in a
compiled extension when available, with a pure-Python fallback selected at
import; both consume identical RNG buffers and produce bit-identical
trajectories.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import _gillespie_py
from .core import ModelParams, ParticleConfig, normal_mode_coords
from ._gillespie_py import BLOCK, WindowOverflowError

try:
    from . import _gillespie as _ext
except ImportError:
    _ext = None

_FORCE_PY = os.environ.get("AHRKIT_FORCE_PYTHON_KERNEL", "") not in ("", "0")


def backend_name() -> str:
    """Kernel chosen at import: "compiled" or "python"."""
    return "python" if (_ext is None or _FORCE_PY) else "compiled"


def _kernel(backend: str):
    if backend == "auto":
        backend = backend_name()
    if backend == "compiled":
        if _ext is None:
            raise RuntimeError("compiled kernel not built")
        return _ext.run_kernel
    if backend == "python":
        return _gillespie_py.run_kernel
    raise ValueError("backend must be auto, compiled, or python")


def thread_count() -> int:
    env = os.environ.get("AHRKIT_THREADS", "1")
    try:
        k = int(env)
    except ValueError:
        raise ValueError("AHRKIT_THREADS must be an integer") from None
    return max(1, k)


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    n: int
    m: int
    t_max: float
    trials: int
    seed: int
    checkpoint_times: Tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.n < 0 or self.m < 0:
            raise ValueError("particle counts must be nonnegative")
        if self.t_max < 0:
            raise ValueError("t_max must be nonnegative")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        cks = tuple(float(c) for c in self.checkpoint_times)
        if any(b < a for a, b in zip(cks, cks[1:])):
            raise ValueError("checkpoint_times must be sorted")
        if cks and (cks[0] < 0.0 or cks[-1] > self.t_max):
            raise ValueError("checkpoint_times must lie in [0, t_max]")
        object.__setattr__(self, "checkpoint_times", cks)


class Event(NamedTuple):
    kind: str  # plus_hop | minus_hop | swap
    site: int
    rate: float


def enabled_events(config: ParticleConfig, params: ModelParams) -> List[Event]:
    """Exact enabled-event list: + hops right into empty at beta, - hops
    left into empty at alpha, adjacent (+,-) swaps at 1."""
    plus = set(config.plus)
    minus = set(config.minus)
    out: List[Event] = []
    for s in config.plus:
        if s + 1 in minus:
            out.append(Event("swap", s, params.swap_rate))
        elif s + 1 not in plus:
            out.append(Event("plus_hop", s, params.beta))
    for s in config.minus:
        if s - 1 not in plus and s - 1 not in minus:
            out.append(Event("minus_hop", s, params.alpha))
    return out


def sample_step_bernoulli_initial(
    params: ModelParams, n: int, m: int, rng: np.random.Generator
) -> ParticleConfig:
    """Minus packed on {0..m-1}; plus below the origin with i.i.d.
    geometric(rho) gaps, the first drawn gap sitting between site -1 and the
    rightmost plus."""
    gaps = rng.geometric(params.rho, size=n) - 1 if n else np.zeros(0, dtype=int)
    plus = np.zeros(n, dtype=np.int64)
    pos = 0
    for i in range(n):
        # built right to left: rightmost plus at -1 - gaps[0]
        pos -= 1 + int(gaps[i])
        plus[n - 1 - i] = pos
    return ParticleConfig(plus=tuple(int(x) for x in plus), minus=tuple(range(m)))


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    key = np.array([np.uint64(seed), np.uint64(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _make_refill(rng: np.random.Generator) -> Callable:
    # ramp the block size so short runs do not pay for a full block
    state = {"size": 512}

    def refill():
        size = state["size"]
        state["size"] = min(2 * size, BLOCK)
        return (
            rng.standard_exponential(size, dtype=np.float32),
            rng.random(size, dtype=np.float32),
        )

    return refill


def _padded_window(config0: ParticleConfig, params: ModelParams, t_max: float):
    n, m = config0.n, config0.m

    def pad(rate_t: float, swaps: int) -> int:
        return swaps + int(math.ceil(rate_t + 12.0 * math.sqrt(rate_t + 64.0))) + 24

    lo = min(config0.plus) if n else 0
    hi = max(config0.minus) if m else -1
    left = min(lo, 0) - pad(params.alpha * t_max, n)
    right = max(hi, 0) + pad(params.beta * t_max, m)
    width = right - left + 1 + 2  # wall sentinels
    return left, width


def _run_kernel_once(
    config0: ParticleConfig,
    params: ModelParams,
    t_max: float,
    checkpoints: np.ndarray,
    rng: np.random.Generator,
    record_configs: bool,
    stop_when_crossed: bool,
    backend: str,
):
    left, width = _padded_window(config0, params, t_max)
    return _kernel(backend)(
        np.asarray(config0.plus, dtype=np.int64),
        np.asarray(config0.minus, dtype=np.int64),
        params.alpha,
        params.beta,
        t_max,
        checkpoints,
        left,
        width,
        _make_refill(rng),
        record_configs,
        stop_when_crossed,
    )


@dataclass(frozen=True)
class TrajectoryResult:
    """Per-checkpoint configurations and crossing counts for one trajectory."""

    checkpoint_times: Tuple[float, ...]
    configs: Tuple[ParticleConfig, ...]
    n_plus_crossed: np.ndarray
    n_minus_crossed: np.ndarray
    final_config: ParticleConfig
    crossed: bool
    events: int


def run_trajectory(
    config0: ParticleConfig,
    sim: SimConfig,
    rng: np.random.Generator,
    backend: str = "auto",
) -> TrajectoryResult:
    """Statistically exact Gillespie run recording every checkpoint."""
    cks = np.asarray(sim.checkpoint_times, dtype=np.float64)
    res = _run_kernel_once(
        config0, sim.params, sim.t_max, cks, rng,
        record_configs=True, stop_when_crossed=False, backend=backend,
    )
    configs = tuple(
        ParticleConfig(
            plus=tuple(int(x) for x in res.ck_plus[i]),
            minus=tuple(int(x) for x in res.ck_minus[i]),
        )
        for i in range(len(cks))
    )
    final = ParticleConfig(
        plus=tuple(int(x) for x in res.final_plus),
        minus=tuple(int(x) for x in res.final_minus),
    )
    return TrajectoryResult(
        checkpoint_times=sim.checkpoint_times,
        configs=configs,
        n_plus_crossed=res.ck_nplus.copy(),
        n_minus_crossed=res.ck_nminus.copy(),
        final_config=final,
        crossed=res.crossed,
        events=res.events,
    )


class CrossingEstimate(NamedTuple):
    p_hat: float
    stderr: float
    trials: int


def _batch(
    sim: SimConfig,
    per_traj: Callable,
    out: np.ndarray,
    backend: str,
) -> None:
    threads = thread_count()

    def work(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            rng = trajectory_rng(sim.seed, i)
            config0 = sample_step_bernoulli_initial(sim.params, sim.n, sim.m, rng)
            out[i] = per_traj(config0, rng)

    if threads == 1:
        work(0, sim.trials)
        return
    chunk = (sim.trials + threads - 1) // threads
    spans = [
        (lo, min(lo + chunk, sim.trials)) for lo in range(0, sim.trials, chunk)
    ]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(lambda span: work(*span), spans))


def estimate_crossing_prob(
    sim: SimConfig, t: Optional[float] = None, backend: str = "auto"
) -> CrossingEstimate:
    """Monte Carlo P[all n plus at sites >= 0 and all m minus at <= -1] at t,
    with the binomial standard error."""
    t = sim.t_max if t is None else float(t)
    if not 0.0 <= t <= sim.t_max:
        raise ValueError("t must lie in [0, t_max]")
    if t == 0.0 and (sim.n > 0 or sim.m > 0):
        return CrossingEstimate(0.0, 0.0, sim.trials)
    empty = np.zeros(0, dtype=np.float64)
    hits = np.zeros(sim.trials, dtype=np.uint8)

    def per_traj(config0, rng):
        res = _run_kernel_once(
            config0, sim.params, t, empty, rng,
            record_configs=False, stop_when_crossed=True, backend=backend,
        )
        return 1 if res.crossed else 0

    _batch(sim, per_traj, hits, backend)
    p_hat = float(hits.mean())
    stderr = math.sqrt(p_hat * (1.0 - p_hat) / sim.trials)
    return CrossingEstimate(p_hat=p_hat, stderr=stderr, trials=sim.trials)


def empirical_crossing_counts(
    sim: SimConfig, t: Optional[float] = None, backend: str = "auto"
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-trajectory (N_plus(t), N_minus(t)) crossing counts."""
    t = sim.t_max if t is None else float(t)
    cks = np.array([t], dtype=np.float64)
    counts = np.zeros((sim.trials, 2), dtype=np.int64)

    def per_traj(config0, rng):
        res = _run_kernel_once(
            config0, sim.params, t, cks, rng,
            record_configs=False, stop_when_crossed=False, backend=backend,
        )
        return (res.ck_nplus[0], res.ck_nminus[0])

    _batch(sim, per_traj, counts, backend)
    return counts[:, 0], counts[:, 1]


def crossing_count_checkpoints(
    sim: SimConfig, times, backend: str = "auto"
) -> np.ndarray:
    """Crossing counts at several times from one ensemble, with early stop.

    Returns a (trials, len(times), 2) int array of (N_plus, N_minus) at each
    checkpoint.  Trajectories stop once (sim.n, sim.m) crossings happened;
    checkpoints after the stop hold the stop-time counts.  Since counts never
    decrease, the entries decide any event {N_plus(t) >= a and N_minus(t) >= b}
    with a <= sim.n and b <= sim.m exactly, which is the intended use: one
    ensemble serves a whole family of dominated thresholds.
    """
    cks = np.asarray(sorted(times), dtype=np.float64)
    if len(cks) == 0 or cks[0] < 0.0 or cks[-1] > sim.t_max:
        raise ValueError("checkpoint times must be nonempty and lie in [0, t_max]")
    out = np.zeros((sim.trials, len(cks), 2), dtype=np.int64)

    def per_traj(config0, rng):
        res = _run_kernel_once(
            config0, sim.params, sim.t_max, cks, rng,
            record_configs=False, stop_when_crossed=True, backend=backend,
        )
        return np.stack([res.ck_nplus, res.ck_nminus], axis=1)

    _batch(sim, per_traj, out, backend)
    return out


def empirical_normal_modes(
    sim: SimConfig, t: Optional[float] = None, backend: str = "auto"
) -> np.ndarray:
    """Per-trajectory normal-mode coordinates (s2, sg) of the crossing
    counts at time t; a (trials, 2) array."""
    t = sim.t_max if t is None else float(t)
    nplus, nminus = empirical_crossing_counts(sim, t, backend=backend)
    coords = normal_mode_coords(
        nplus.astype(float), nminus.astype(float), t, sim.params.rho
    )
    return np.column_stack([coords.s2, coords.sg])
