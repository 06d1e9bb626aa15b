"""Command-line entry point.

Every subcommand writes a CSV file and, next to it, ``<out>.manifest.json``
with the resolved configuration, package versions, wall time and results
summary. Exit codes: 0 success, 2 invalid input, 3 inconclusive result.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from ._validation import check_increasing, check_int, check_probability, check_seed
from .balls import bfs_ball, local_radius
from .errors import BallSizeError, IsomorphismUndecided, NonBracketingError, SolverError
from .families import family_sequence, parse_family
from .graphs import CosetQuotientGraph, FreeProductGraph, ModifiedGrandparentGraph
from .walks import harmonic_measure, quotient_identity_check, ratio_report, sphere_classes, spectral_estimate

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INCONCLUSIVE = 3

COMMANDS = (
    "graph-info", "ball", "harmonic", "assumption", "spectral", "quotient-check",
    "percolate", "pc-estimate", "explore", "locality",
)
STOCHASTIC = {"percolate", "pc-estimate", "explore", "locality"}
# Settings that describe the run environment rather than the experiment.
RUN_LOCAL = {"out", "threads", "config", "command"}


class Inconclusive(Exception):
    """The computation finished without a verdict."""


def _float_list(text: str) -> List[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _int_list(text: str) -> List[int]:
    return [int(x) for x in str(text).split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pclocality", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--family", help="t<d>, z2z3, fp:<o1>,<o2>,..., mgp<d>, optional /q<n>")
        p.add_argument("--out", default="-", help="CSV path ('-' for stdout, no manifest)")
        p.add_argument("--config", help="YAML or JSON file; its values override flags")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        p.add_argument("--master-seed", dest="master_seed", type=int, help="seed for every random variate")
        return p

    p = add("graph-info", "degree, classes and level sizes")
    p.add_argument("--radius", type=int, default=3)
    p = add("ball", "per-level counts of B(root, radius)")
    p.add_argument("--radius", type=int, default=2)
    p = add("harmonic", "exit distribution on the sphere of radius R")
    p.add_argument("--radius", type=int, default=3)
    p = add("assumption", "exit-measure ratios, and connection ratios when --p is given")
    p.add_argument("--radius", type=int, default=3)
    p.add_argument("--p", type=_float_list)
    p.add_argument("--trials", type=int, default=100_000)
    p = add("spectral", "return-probability roots and spectral radius band")
    p.add_argument("--tmax", type=int, default=20)
    p = add("quotient-check", "return-probability identity between a quotient and its base")
    p.add_argument("--radius", type=int, default=10, help="largest walk length j")
    p = add("percolate", "sphere-reaching probability h_n(p) on a grid")
    p.add_argument("--p", type=_float_list, help="comma-separated p grid")
    p.add_argument("--n-list", dest="n_list", type=_int_list, default=[4])
    p.add_argument("--trials", type=int, default=20_000)
    p = add("pc-estimate", "theta*-crossing estimate of p_c per radius")
    p.add_argument("--n-list", dest="n_list", type=_int_list, default=[4, 8])
    p.add_argument("--theta-star", dest="theta_star", type=float)
    p.add_argument("--trials", type=int, default=20_000)
    p = add("explore", "coupled exploration process runs")
    p.add_argument("--p", type=float)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--eps1", type=float, default=0.05)
    p.add_argument("--M", dest="M", type=int, default=10_000)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--radius", type=int, help="ball radius r_n (default: local radius against the base)")
    p.add_argument("--lambda1", type=float, help="default: pessimistic end of the spectral band")
    p = add("locality", "p_c estimates along a quotient sequence")
    p.add_argument("--n-list", dest="n_list", type=_int_list, default=[3, 4, 5, 6, 7, 8])
    p.add_argument("--radius", type=int, default=10, help="estimator radius")
    p.add_argument("--theta-star", dest="theta_star", type=float)
    p.add_argument("--trials", type=int, default=20_000)
    p.add_argument("--tmax", type=int, default=20)
    return parser


def _load_config(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith((".yaml", ".yml")):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("config must be a mapping")
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    return data


_ALIASES = {"p_grid": "p", "theta": "theta_star", "seed": "master_seed", "n": "n_list"}


def _apply_config(args: argparse.Namespace, data: dict, parser: argparse.ArgumentParser) -> None:
    known = vars(args)
    for key, value in data.items():
        key = _ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if key in RUN_LOCAL:
            continue
        if key not in known:
            parser.error(f"config key {key!r} is not a setting of {args.command}")
        if key == "n_list" and isinstance(value, (int, str)):
            value = _int_list(value)
        if key == "p" and isinstance(value, str):
            value = _float_list(value)
        if key == "p" and args.command in ("percolate", "assumption") and isinstance(value, (int, float)):
            value = [float(value)]
        setattr(args, key, value)


def _validate(args: argparse.Namespace) -> None:
    """Check every parameter against the operation it feeds; raises ValueError/TypeError."""
    cmd = args.command
    if args.family is None:
        raise ValueError("--family is required")
    args.graph = parse_family(args.family)
    check_int(args.threads, "threads", minimum=1)
    if cmd in STOCHASTIC or (cmd == "assumption" and args.p):
        check_seed(args.master_seed)
    if hasattr(args, "radius") and args.radius is not None:
        check_int(args.radius, "radius", minimum=0 if cmd in ("ball", "graph-info", "quotient-check") else 1)
    if hasattr(args, "trials"):
        check_int(args.trials, "trials", minimum=1)
    if cmd == "percolate":
        if not args.p:
            raise ValueError("--p grid is required")
        args.p = [check_probability(float(x)) for x in args.p]
        args.n_list = check_increasing(args.n_list, "n_list")
    if cmd == "assumption" and args.p:
        args.p = [check_probability(float(x), open_interval=True) for x in args.p]
    if cmd in ("pc-estimate", "locality"):
        args.n_list = check_increasing(args.n_list, "n_list")
        if args.theta_star is not None:
            check_probability(args.theta_star, "theta_star")
    if cmd == "spectral" or cmd == "locality":
        check_int(args.tmax, "tmax", minimum=2)
        if args.tmax % 2:
            raise ValueError("--tmax must be even")
    if cmd == "explore":
        if args.p is None:
            raise ValueError("--p is required")
        for name in ("p", "eps", "eps1"):
            check_probability(getattr(args, name), name)
        if (1 - args.p) * (1 - args.eps) * (1 - args.eps1) <= 0:
            raise ValueError("combined open probability must be < 1")
        check_int(args.M, "M", minimum=1)
        check_int(args.runs, "runs", minimum=1)
        if args.lambda1 is not None and not 0 < args.lambda1 <= 1:
            raise ValueError("--lambda1 must lie in (0, 1]")
    if cmd == "quotient-check" and not isinstance(args.graph, CosetQuotientGraph):
        raise ValueError("quotient-check needs a quotient family such as z2z3/q3")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _csv_text(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# --- subcommands: each returns (rows, columns, results) --------------------------------------


def _graph_info(args):
    g = args.graph
    ball = bfs_ball(g, g.root, args.radius)
    classes = sorted({g.sphere_class(v) for v in ball.keys})
    rows = [
        {"field": "family", "value": json.dumps(g.descriptor(), sort_keys=True)},
        {"field": "degree", "value": g.degree},
        {"field": "level_sizes", "value": " ".join(map(str, ball.level_sizes))},
        {"field": "edges", "value": ball.n_edges},
        {"field": "classes", "value": " ".join(classes)},
    ]
    return rows, ["field", "value"], {"degree": g.degree, "level_sizes": ball.level_sizes}


def _ball(args):
    ball = bfs_ball(args.graph, args.graph.root, args.radius)
    rows = ball.level_table()
    return rows, ["level", "vertices", "edges_within", "edges_down"], {"level_sizes": ball.level_sizes}


def _harmonic(args):
    g = args.graph
    ball = bfs_ball(g, g.root, args.radius)
    dist = harmonic_measure(ball)
    rows = [
        {"vertex": g.key(v).hex(), "word": g.format(v), "level": args.radius, "class": g.sphere_class(v), "mu": mu}
        for v, mu in zip(dist.vertices, dist.prob)
    ]
    return rows, ["vertex", "word", "level", "class", "mu"], {"sum": float(dist.prob.sum()), "size": len(rows)}


def _known_bounds(g):
    """Bounds on the exit-measure ratio known for the named families, else None."""
    core = g.base if isinstance(g, CosetQuotientGraph) else g
    if isinstance(core, ModifiedGrandparentGraph):
        return 1.0, float(core.degree)
    if isinstance(core, FreeProductGraph):
        if core.is_tree:
            return 1.0, 1.0
        if core.group.orders == (2, 3):
            return 1.0, 3.0
    return None


def _assumption(args):
    from .percolation import assumption2_report

    g = args.graph
    ball = bfs_ball(g, g.root, args.radius)
    rep = ratio_report(harmonic_measure(ball), sphere_classes(ball, args.radius))
    bounds = _known_bounds(g)
    row = {
        "radius": args.radius,
        "global_ratio": rep.global_ratio,
        "within_class_max": rep.within_class_max,
        "bound_low": bounds[0] if bounds else "",
        "bound_high": bounds[1] if bounds else "",
        "mu_ok": bool(bounds is None or rep.global_ratio <= bounds[1] + 1e-10),
    }
    columns = list(row)
    rows = []
    for p in args.p or [None]:
        r = dict(row)
        if p is not None:
            b = assumption2_report(ball, p, args.trials, args.master_seed)
            r.update(p=p, b_ratio_min=b.ratio_min, b_ratio_max=b.ratio_max, b_sigma=b.worst_sigma,
                     b_ok=b.within_bounds, trials=args.trials)
        rows.append(r)
    if args.p:
        columns += ["p", "b_ratio_min", "b_ratio_max", "b_sigma", "b_ok", "trials"]
    return rows, columns, {"rows": rows}


def _spectral(args):
    est = spectral_estimate(args.graph, args.tmax)
    rows = [{"t": int(t), "estimate": r} for t, r in zip(est.t, est.roots)]
    res = {
        "rho_hat": est.rho_hat, "rho_fit": est.rho_fit, "rho_upper": est.rho_upper,
        "upper_certified": est.upper_certified, "lambda1_hat": est.lambda1_hat,
        "lambda1_lower": est.lambda1_lower,
    }
    return rows, ["t", "estimate"], res


def _quotient_check(args):
    q = args.graph
    rows = [{"j": j, "residual": quotient_identity_check(q.base, q, j)} for j in range(args.radius + 1)]
    return rows, ["j", "residual"], {"max_residual": max(r["residual"] for r in rows)}


def _percolate(args):
    from .percolation import reach_prob

    g = args.graph
    ball = bfs_ball(g, g.root, max(args.n_list))
    rows = []
    for p in args.p:
        for n in args.n_list:
            est = reach_prob(g, p, n, args.trials, args.master_seed, ball=ball)
            rows.append({"p": p, "n": n, "h_n": est.estimate, "stderr": est.stderr})
    return rows, ["p", "n", "h_n", "stderr"], {}


def _pc_estimate(args):
    from .percolation import DEFAULT_THETA_STAR, pc_estimate

    theta = DEFAULT_THETA_STAR if args.theta_star is None else args.theta_star
    args.theta_star = theta
    est = pc_estimate(args.graph, args.n_list, theta, args.trials, args.master_seed)
    return est.rows(), ["n", "p_hat", "stderr", "trials"], {
        "estimate": est.estimate, "estimate_stderr": est.estimate_stderr,
        "estimator": "theta-star crossing of the sphere-reaching probability (finite-size)",
    }


def _base_of(g):
    if isinstance(g, CosetQuotientGraph):
        return g.base
    if isinstance(g, ModifiedGrandparentGraph) and isinstance(g.base, CosetQuotientGraph):
        return ModifiedGrandparentGraph(g.base.base)
    return None


def _explore(args):
    from .exploration import estimate_delta, drift_reference, run_exploration, survival_summary
    from .walks import ExitTemplates

    g = args.graph
    base = _base_of(g)
    r_n = args.radius
    if r_n is None:
        if base is None:
            raise ValueError("--radius is required for a non-quotient family")
        r_n = local_radius(g, base, 12)
        if r_n < 1:
            raise ValueError("quotient agrees with its base only at radius 0")
        args.radius = r_n
    lam = args.lambda1
    if lam is None:
        lam = spectral_estimate(g, 20).lambda1_lower
        args.lambda1 = lam
    templates = ExitTemplates(g)
    traces = []
    rows = []
    for k in range(args.runs):
        tr = run_exploration(g, g.root, args.p, args.eps, args.eps1, r_n, lam, args.M, args.master_seed, run=k,
                             templates=templates)
        traces.append(tr)
        for r in tr.rows():
            rows.append(dict(run=k, **r))
    summary = survival_summary(traces)
    delta = estimate_delta(base or g, args.p, r_n, 20_000, args.master_seed)
    res = {
        "runs": summary.runs, "survived": summary.survived, "survival_frequency": summary.frequency,
        "tau_stops": summary.tau, "frontier_empty": summary.empty, "step_cap": summary.inconclusive,
        "mean_drift": summary.mean_drift, "drift_reference": drift_reference(args.eps1, lam, delta, r_n),
        "delta_hat": delta, "delta_note": "sphere-reaching probability, an upper approximation",
        "r_n": r_n, "lambda1": lam,
    }
    if summary.inconclusive:
        res["_inconclusive"] = f"{summary.inconclusive} runs hit the step cap"
    return rows, ["run", "t", "size", "checked_closed", "xi", "stop_cause"], res


def _locality(args):
    from .exploration import locality_experiment
    from .percolation import DEFAULT_THETA_STAR

    theta = DEFAULT_THETA_STAR if args.theta_star is None else args.theta_star
    args.theta_star = theta
    G, make = family_sequence(args.family)
    rep = locality_experiment(G, make, args.n_list, radius=args.radius, theta_star=theta, trials=args.trials,
                              seed=args.master_seed, tmax=args.tmax, family=str(args.family))
    cols = ["n", "r_n", "lambda1_hat", "lambda1_lower", "lambda1_sq_r", "pc_n", "pc_n_stderr", "pc_G",
            "pc_G_stderr", "gap"]
    return rep.table(), cols, {"trend_ok": rep.trend_ok, "violations": rep.violations}


HANDLERS = {
    "graph-info": _graph_info, "ball": _ball, "harmonic": _harmonic, "assumption": _assumption,
    "spectral": _spectral, "quotient-check": _quotient_check, "percolate": _percolate,
    "pc-estimate": _pc_estimate, "explore": _explore, "locality": _locality,
}


def _set_threads(n: int) -> int:
    import numba

    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def _versions() -> Dict[str, str]:
    import numba
    import scipy

    return {"pclocality": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": sys.version.split()[0]}


def _config_echo(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in RUN_LOCAL or k == "graph":
            continue
        out[k] = v
    return _jsonable(out)


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.config:
            _apply_config(args, _load_config(args.config), parser)
        _validate(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, TypeError, OSError) as exc:
        print(f"pclocality {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    threads = _set_threads(args.threads)
    start = time.perf_counter()
    code = EXIT_OK
    try:
        rows, columns, results = HANDLERS[args.command](args)
    except (IsomorphismUndecided, SolverError) as exc:
        print(f"pclocality {args.command}: inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except (NonBracketingError, BallSizeError, ValueError, TypeError) as exc:
        print(f"pclocality {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    note = results.pop("_inconclusive", None)
    if note:
        print(f"pclocality {args.command}: inconclusive: {note}", file=sys.stderr)
        code = EXIT_INCONCLUSIVE
    text = _csv_text(rows, columns)
    wall = time.perf_counter() - start
    if args.out == "-":
        sys.stdout.write(text)
        return code
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(text.encode())
    manifest = {
        "command": args.command,
        "config": _config_echo(args),
        "data_file": out.name,
        "master_seed": args.master_seed,
        "results": _jsonable(results),
        "threads": threads,
        "versions": _versions(),
        "wall_time_s": round(wall, 3),
    }
    Path(str(out) + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
