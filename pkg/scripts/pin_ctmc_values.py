"""Pin CTMC oracle values used as frozen constants in the test suite.

Each value is computed at two window sizes; the run aborts if they disagree
beyond 1e-8. Output is meant to be pasted into tests.
"""
import time

from ahrkit.core import ModelParams
from ahrkit.ctmc import LatticeWindow, oracle_crossing_prob


def pin(alpha, rho, n, m, t, win_a, win_b, tol=1e-7):
    params = ModelParams(alpha=alpha, beta=1.0 - alpha, rho=rho)
    t0 = time.time()
    ra = oracle_crossing_prob(params, n, m, t, window=win_a, tol=tol)
    rb = oracle_crossing_prob(params, n, m, t, window=win_b, tol=tol)
    dt = time.time() - t0
    gap = abs(ra.prob - rb.prob)
    assert gap < 1e-8, (ra.prob, rb.prob)
    print(
        "alpha=%g rho=%g n=%d m=%d t=%g -> %.12f  (windows agree to %.1e; "
        "leak %.1e/%.1e; %.1fs)"
        % (alpha, rho, n, m, t, rb.prob, gap, ra.leakage, rb.leakage, dt)
    )


pin(0.5, 1.0, 2, 1, 2.0, LatticeWindow(-12, 12), LatticeWindow(-16, 16))
pin(0.5, 1.0, 1, 2, 1.0, LatticeWindow(-10, 10), LatticeWindow(-14, 14))
pin(0.5, 1.0, 2, 2, 4.0, LatticeWindow(-22, 22), LatticeWindow(-26, 26))
pin(0.5, 0.7, 1, 1, 1.0, LatticeWindow(-28, 12), LatticeWindow(-32, 16))
pin(0.5, 0.7, 2, 2, 2.0, LatticeWindow(-30, 14), LatticeWindow(-34, 18))
pin(0.3, 1.0, 1, 1, 2.0, LatticeWindow(-14, 14), LatticeWindow(-18, 18))
