"""Command-line front end.

Four subcommands: ``simulate`` (Monte Carlo crossing probabilities with
checkpoints), ``exact`` (one probability by a chosen route), ``limit-study``
(observed vs predicted probabilities along a time sweep), and ``identities``
(the numeric-identity battery with randomized inputs).  Tabular sweeps come
out as CSV, single-shot results as JSON; writing to a file also writes a
reproducibility manifest next to it.
"""

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .bethe import check_boundary_conditions
from .core import ModelParams, normal_mode_coords, scaled_particle_numbers
from .current import (
    CurrentQuery,
    joint_current_prob,
    joint_current_prob_reduced,
    symmetrization_identity_residual,
    vandermonde_identity_residual,
)
from .fredholm import (
    GFunctionSpec,
    decompose,
    direct_multifold,
    eval_Jn,
    kernel_Aj,
    kernel_B,
    kernel_KW,
    kernel_zvec,
    l_weight,
    sum_identity_residual,
    transform_to_fredholm,
)
from .limits import gaussian_FG, tracy_widom_F2
from .quadrature import Circle, QuadratureError
from .simulate import (
    SimConfig,
    backend_name,
    crossing_count_checkpoints,
    thread_count,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONVERGENCE = 3
EXIT_IDENTITY = 4


@dataclass
class RunManifest:
    """Reproducibility sidecar written next to every output file."""

    command: str
    parameters: Dict[str, object]
    seed: Optional[int]
    version: str = __version__
    started: str = ""
    finished: str = ""
    diagnostics: Dict[str, object] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _emit(text: str, manifest: RunManifest, out: Optional[str]) -> None:
    manifest.finished = _now()
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        with open(out + ".manifest.json", "w", encoding="utf-8") as fh:
            fh.write(manifest.to_json())
    else:
        sys.stdout.write(text)


def _fmt(x: float) -> str:
    return "%.12g" % x


def _sym_params(rho: float) -> ModelParams:
    return ModelParams(alpha=0.5, beta=0.5, rho=rho)


# -- simulate ----------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    checkpoints = sorted(args.checkpoints or [args.t])
    manifest = RunManifest(
        command="simulate",
        parameters=dict(n=args.n, m=args.m, rho=args.rho, t=args.t,
                        trials=args.trials, checkpoints=checkpoints),
        seed=args.seed,
        started=_now(),
        diagnostics=dict(backend=backend_name(), threads=thread_count()),
    )
    sim = SimConfig(params=_sym_params(args.rho), n=args.n, m=args.m,
                    t_max=max(args.t, checkpoints[-1]), trials=args.trials,
                    seed=args.seed)
    counts = crossing_count_checkpoints(sim, checkpoints)
    lines = ["t,n,m,s2_eff,sg_eff,p_hat,stderr,trials"]
    for i, ck in enumerate(checkpoints):
        hit = (counts[:, i, 0] >= args.n) & (counts[:, i, 1] >= args.m)
        p_hat = float(hit.mean())
        stderr = math.sqrt(p_hat * (1.0 - p_hat) / args.trials)
        if ck > 0.0:
            coords = normal_mode_coords(args.n, args.m, ck, args.rho)
            s2, sg = coords.s2, coords.sg
        else:
            s2 = sg = math.nan
        lines.append(",".join([
            _fmt(ck), str(args.n), str(args.m), _fmt(s2), _fmt(sg),
            _fmt(p_hat), _fmt(stderr), str(args.trials),
        ]))
    _emit("\n".join(lines) + "\n", manifest, args.out)
    return EXIT_OK


# -- exact -------------------------------------------------------------------

def cmd_exact(args: argparse.Namespace) -> int:
    manifest = RunManifest(
        command="exact",
        parameters=dict(n=args.n, m=args.m, rho=args.rho, t=args.t,
                        route=args.route, tol=args.tol),
        seed=None,
        started=_now(),
    )
    query = CurrentQuery(args.n, args.m, args.t, _sym_params(args.rho))
    diagnostics: Dict[str, object] = {}
    if args.route == "direct":
        value = joint_current_prob(query, tol=args.tol)
    elif args.route == "reduced":
        value = joint_current_prob_reduced(query, tol=args.tol)
    else:
        res = decompose(args.n, args.m, args.rho, args.t, tol=args.tol)
        value = res.P
        diagnostics.update(I1=res.I1, I2_main=res.I2_main,
                           I2_direct=res.I2_direct)
        if args.n + args.m <= 6:
            direct = joint_current_prob(query, tol=args.tol)
            diagnostics["delta_vs_direct"] = abs(value - direct)
    manifest.diagnostics = diagnostics
    payload = dict(command="exact", route=args.route, n=args.n, m=args.m,
                   rho=args.rho, t=args.t, value=value,
                   tolerance=args.tol, diagnostics=diagnostics)
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n",
          manifest, args.out)
    return EXIT_OK


# -- limit-study -------------------------------------------------------------

def cmd_limit_study(args: argparse.Namespace) -> int:
    if args.method == "mc" and args.seed is None:
        print("error: --seed is required with --method mc", file=sys.stderr)
        return EXIT_USAGE
    manifest = RunManifest(
        command="limit-study",
        parameters=dict(rho=args.rho, s2=args.s2, sg=args.sg,
                        t_list=list(args.t_list), method=args.method,
                        trials=args.trials),
        seed=args.seed,
        started=_now(),
        diagnostics=dict(skipped=[]),
    )
    lines = ["t,n,m,s2_eff,sg_eff,P_obs,P_obs_err,F2,FG,prediction,gap"]
    for i, t in enumerate(args.t_list):
        try:
            n_real, m_real = scaled_particle_numbers(
                t, args.s2, args.sg, args.rho)
        except ValueError:
            n_real = m_real = 0.0
        if n_real < 1.0 or m_real < 1.0:
            print("warning: t=%g gives (n, m) = (%.2f, %.2f); row skipped"
                  % (t, n_real, m_real), file=sys.stderr)
            manifest.diagnostics["skipped"].append(t)
            continue
        n = int(np.rint(n_real))
        m = int(np.rint(m_real))
        coords = normal_mode_coords(n, m, t, args.rho)
        if args.method == "mc":
            sim = SimConfig(params=_sym_params(args.rho), n=n, m=m, t_max=t,
                            trials=args.trials, seed=args.seed + 7919 * i)
            counts = crossing_count_checkpoints(sim, [t])
            hit = (counts[:, 0, 0] >= n) & (counts[:, 0, 1] >= m)
            p_obs = float(hit.mean())
            p_err = math.sqrt(p_obs * (1.0 - p_obs) / args.trials)
        else:
            p_obs = joint_current_prob(
                CurrentQuery(n, m, t, _sym_params(args.rho)))
            p_err = 0.0
        f2 = tracy_widom_F2(coords.s2)
        fg = gaussian_FG(coords.sg)
        pred = f2 * fg
        lines.append(",".join(_fmt(v) for v in (
            t, n, m, coords.s2, coords.sg, p_obs, p_err, f2, fg, pred,
            abs(p_obs - pred))))
    _emit("\n".join(lines) + "\n", manifest, args.out)
    return EXIT_OK


# -- identities --------------------------------------------------------------

def _outer_average(func: Callable, n: int, n_z: int) -> complex:
    import itertools

    circ = Circle(1.0, 0.07)
    zs = circ.nodes(n_z)
    ws = circ.weights(n_z)
    total = 0.0j
    for idx in itertools.product(range(n_z), repeat=n - 1):
        w = 1.0 + 0.0j
        for i in idx:
            w *= ws[i]
        total += w * func(tuple(zs[i] for i in idx))
    return total


def _decoupling_residual(n: int, m: int, rho: float, t: float,
                         x: int, y: int, n_z: int, n_points: int) -> float:
    lhs = _outer_average(
        lambda zs: l_weight(zs, n, m, rho, t)
        * kernel_zvec(x, y, zs, n, m, rho, t, n_points=n_points), n, n_z)
    il = _outer_average(lambda zs: l_weight(zs, n, m, rho, t), n, n_z)
    rhs = il * kernel_KW(x, y, n, m, rho, t, n_points=n_points)
    b = kernel_B(y, n, m, rho, t, n_points=n_points)
    for p in range(1, n):
        cp = _outer_average(
            lambda zs: l_weight(zs, n, m, rho, t)
            * np.prod([zq - 1.0 for zq in zs[:p]]), n, n_z)
        rhs -= cp * kernel_Aj(x, p, n, m, rho, t, n_points=n_points) * b
    return abs(lhs - rhs)


def _outer_moment_residual(n: int, m: int, rho: float, t: float,
                           p: int, n_z: int) -> float:
    val = _outer_average(
        lambda zs: l_weight(zs, n, m, rho, t)
        * np.prod([zq - 1.0 for zq in zs[:p]]), n, n_z)
    expected = -((-rho / (1.0 - rho)) ** p) * (eval_Jn(n - p, m, rho, t) - 1.0)
    return abs(val - expected)


def _random_points(rng: np.random.Generator, n: int) -> np.ndarray:
    r = rng.uniform(0.4, 0.9, size=n)
    th = rng.uniform(0.0, 2.0 * math.pi, size=n)
    return 1.0 + r * np.exp(1j * th)


def identity_report(seed: int) -> List[Dict[str, object]]:
    """Worst residual of every algebraic identity on randomized inputs."""
    rng = np.random.default_rng(seed)
    report: List[Dict[str, object]] = []

    def add(name: str, residual: float, threshold: float) -> None:
        report.append(dict(name=name, residual=float(residual),
                           threshold=threshold,
                           passed=bool(residual <= threshold)))

    worst = 0.0
    for n in (2, 3, 4):
        rho = float(rng.uniform(0.35, 0.9))
        worst = max(worst, symmetrization_identity_residual(
            _random_points(rng, n), rho))
    add("symmetrization", worst, 1e-12)

    worst = max(vandermonde_identity_residual(_random_points(rng, n))
                for n in (2, 3, 4))
    add("vandermonde", worst, 1e-12)

    worst = 0.0
    for nu in (1, 2, 3):
        a = tuple(1.0 + 0.3 * k + rng.uniform(0.0, 0.1) for k in range(nu))
        xi = complex(rng.uniform(2.0, 3.0) * np.exp(1j * rng.uniform(0, 6.28)))
        zeta = complex(rng.uniform(4.0, 6.0) * np.exp(1j * rng.uniform(0, 6.28)))
        worst = max(worst, sum_identity_residual(zeta, xi, a))
    add("telescoping-sum", worst, 1e-12)

    alpha = float(rng.uniform(0.3, 0.7))
    params = ModelParams(alpha=alpha, beta=1.0 - alpha,
                         rho=float(rng.uniform(0.3, 0.9)))
    add("boundary-conditions",
        check_boundary_conditions(params, samples=8, rng=rng), 1e-8)

    worst = 0.0
    for n in (2, 3):
        rho = float(rng.uniform(0.4, 0.6))
        t = float(rng.uniform(1.5, 3.0))
        x = int(rng.integers(1, 3))
        y = int(rng.integers(1, 3))
        n_z = 24 if n == 2 else 14
        pts = 512 if n == 2 else 384
        worst = max(worst, _decoupling_residual(n, 2, rho, t, x, y, n_z, pts))
    add("kernel-decoupling", worst, 1e-8)

    worst = 0.0
    for n, p in ((3, 1), (4, 1), (4, 2)):
        rho = float(rng.uniform(0.4, 0.6))
        t = float(rng.uniform(1.5, 3.0))
        worst = max(worst, _outer_moment_residual(
            n, 2, rho, t, p, 14 if n == 3 else 10))
    add("outer-average", worst, 1e-8)

    u = tuple(complex(rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25))
              for _ in range(2))
    spec = GFunctionSpec(nu=2, mu=1, s=int(rng.integers(0, 3)),
                         gamma=float(rng.uniform(0.0, 1.2)), c=2.0,
                         u=u, v=(float(rng.uniform(0.8, 1.4)),),
                         a=(1.0 + rng.uniform(0.0, 0.1),
                            1.25 + rng.uniform(0.0, 0.1)))
    ref = direct_multifold(spec, tol=1e-9, max_points_per_dim=256)
    val, _ = transform_to_fredholm(spec)
    add("determinant-transform", abs(val - ref), 1e-8)

    return report


def cmd_identities(args: argparse.Namespace) -> int:
    manifest = RunManifest(
        command="identities",
        parameters=dict(),
        seed=args.seed,
        started=_now(),
    )
    report = identity_report(args.seed)
    all_pass = all(entry["passed"] for entry in report)
    manifest.diagnostics = dict(all_pass=all_pass)
    payload = dict(command="identities", seed=args.seed,
                   identities=report, all_pass=all_pass)
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n",
          manifest, args.out)
    if not all_pass:
        failing = [e["name"] for e in report if not e["passed"]]
        print("identity check failed: %s" % ", ".join(failing),
              file=sys.stderr)
        return EXIT_IDENTITY
    return EXIT_OK


# -- wiring ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ahrkit",
        description="Two-species exclusion currents: simulation, exact "
                    "values, and limit-law studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="Monte Carlo crossing probability")
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--m", type=int, required=True)
    p_sim.add_argument("--rho", type=float, required=True)
    p_sim.add_argument("--t", type=float, required=True)
    p_sim.add_argument("--trials", type=int, required=True)
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--checkpoints", type=float, nargs="+")
    p_sim.add_argument("--out")
    p_sim.set_defaults(func=cmd_simulate)

    p_ex = sub.add_parser("exact", help="one probability by a chosen route")
    p_ex.add_argument("--n", type=int, required=True)
    p_ex.add_argument("--m", type=int, required=True)
    p_ex.add_argument("--rho", type=float, required=True)
    p_ex.add_argument("--t", type=float, required=True)
    p_ex.add_argument("--route", choices=("direct", "reduced", "fredholm"),
                      default="direct")
    p_ex.add_argument("--tol", type=float, default=1e-9)
    p_ex.add_argument("--out")
    p_ex.set_defaults(func=cmd_exact)

    p_ls = sub.add_parser("limit-study",
                          help="observed vs predicted along a time sweep")
    p_ls.add_argument("--rho", type=float, required=True)
    p_ls.add_argument("--s2", type=float, required=True)
    p_ls.add_argument("--sg", type=float, required=True)
    p_ls.add_argument("--t-list", type=float, nargs="+", required=True)
    p_ls.add_argument("--method", choices=("mc", "exact"), default="mc")
    p_ls.add_argument("--trials", type=int, default=100000)
    p_ls.add_argument("--seed", type=int)
    p_ls.add_argument("--out")
    p_ls.set_defaults(func=cmd_limit_study)

    p_id = sub.add_parser("identities", help="numeric-identity battery")
    p_id.add_argument("--seed", type=int, default=0)
    p_id.add_argument("--out")
    p_id.set_defaults(func=cmd_identities)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except QuadratureError as exc:
        print("convergence failure: %s" % exc, file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
