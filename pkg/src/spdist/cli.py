"""Command line entry point: ``spdist {run,sweep,validate} CONFIG [--out DIR] [--seed N]``.

Exit codes: 0 success (including a zero horizon), 1 configuration error, 2 the run diverged or failed to
converge (``run``) or the centralized reference diverged (``sweep``).
Without ``--out`` or ``[run] out``, results go to ``$SPDIST_OUT/<config name>``
(``./spdist_out/<config name>`` if the variable is unset).
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .experiment import (build_experiment, run_centralized_experiment, run_experiment, sweep_experiment,
                         validate_config)
from .io import write_graph, write_instance, write_solution, write_weights

OUT_ENV = "SPDIST_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2


def _out_dir(cfg, override):
    if override is not None:
        out = Path(override)
    elif cfg.out is not None:
        out = cfg.out
    else:
        out = Path(os.environ.get(OUT_ENV, "spdist_out")) / cfg.source.stem
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(v):
    return format(float(v), ".17g")


def _write_artifacts(exp, out):
    try:
        write_instance(exp.problem, out / "instance.txt")
    except TypeError:
        cfg = exp.config
        with open(out / "instance.txt", "w") as fh:
            fh.write(f"kind {cfg.kind}\n# generated: n_agents={cfg.n_agents} local_dim={cfg.local_dim} "
                     f"constraint_dim={cfg.constraint_dim} agg_dim={cfg.agg_dim} seed={cfg.seed}\n")
    write_graph(exp.graph, out / "graph.txt")
    write_weights(exp.W, out / "weights.csv")
    if exp.solution is None:
        (out / "solution.txt").write_text("none\n")
    elif isinstance(exp.solution, np.ndarray):
        (out / "solution.txt").write_text("x_star\n" + ",".join(_fmt(v) for v in exp.solution) + "\n")
    else:
        write_solution(exp.solution, out / "solution.txt")


def _summary(result, delta, path):
    tr = result.trace
    lines = [
        f"status = {result.status}",
        f"delta = {delta:g}",
        f"iterations = {tr.t[-1]}",
        f"diverged = {int(tr.diverged)}",
        f"divergence_t = {tr.divergence_t if tr.diverged else ''}",
        f"initial_opt_err = {_fmt(tr.opt_err[0])}",
        f"final_opt_err = {_fmt(tr.opt_err[-1])}",
        f"final_x_err = {_fmt(tr.x_err[-1])}",
        f"final_track_err = {_fmt(tr.track_err[-1])}",
        f"final_constr_res = {_fmt(tr.constr_res[-1])}",
        f"slope = {_fmt(result.slope)}",
        f"r_squared = {_fmt(result.r_squared)}",
    ]
    path.write_text("\n".join(lines) + "\n")


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def cmd_run(args):
    cfg = _load(args)
    exp = build_experiment(cfg)
    out = _out_dir(cfg, args.out)
    _write_artifacts(exp, out)
    result = run_experiment(exp, record_states=args.full_state)
    result.trace.to_csv(out / "trace.csv", full_state=args.full_state)
    _summary(result, cfg.delta, out / "summary.txt")
    print(f"{result.status}: final opt_err {result.trace.opt_err[-1]:.3e} after {result.trace.t[-1]} iterations "
          f"(results in {out})")
    if not result.converged and result.status != "empty":
        print(f"run {result.status}" + (f" at t={result.trace.divergence_t}" if result.trace.diverged else ""),
              file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _fig4_table(results, deltas, central, path):
    """Columns ``t, centralized, delta_<d>...`` of ``|x - x*|``; blank after a run stops."""
    series = [central.trace] + [r.trace for r in results]
    rows = sorted({t for tr in series for t in tr.t})
    header = ["t", "centralized"] + [f"delta_{d:g}" for d in deltas]
    lookup = [dict(zip(tr.t, tr.x_err)) for tr in series]
    lines = [",".join(header)]
    for t in rows:
        lines.append(",".join([str(t)] + [_fmt(m[t]) if t in m else "" for m in lookup]))
    path.write_text("\n".join(lines) + "\n")


def cmd_sweep(args):
    cfg = _load(args)
    if len(cfg.deltas) < 2:
        raise ConfigError("a sweep needs at least two values in [run] deltas")
    exp = build_experiment(cfg)
    out = _out_dir(cfg, args.out)
    _write_artifacts(exp, out)
    central = run_centralized_experiment(exp)
    central.trace.to_csv(out / "trace_centralized.csv")
    results = sweep_experiment(exp)
    lines = ["delta,converged,slope,final_error"]
    for d, r in zip(cfg.deltas, results):
        r.trace.to_csv(out / f"trace_delta_{d:g}.csv")
        lines.append(f"{d:g},{int(r.converged)},{_fmt(r.slope)},{_fmt(r.trace.x_err[-1])}")
        print(f"delta={d:g}: {r.status}, final |x - x*| {r.trace.x_err[-1]:.3e}")
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    _fig4_table(results, cfg.deltas, central, out / "fig4.csv")
    print(f"centralized: {central.status}, final |x - x*| {central.trace.x_err[-1]:.3e} (results in {out})")
    if central.trace.diverged:
        print("centralized reference diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_validate(args):
    cfg = _load(args)
    checks = validate_config(cfg)
    for name, ok, detail in checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    failed = [name for name, ok, _ in checks if not ok]
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="spdist", description="Distributed algorithms from centralized blocks "
                                     "and consensus trackers.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (("run", cmd_run, "run one distributed experiment"),
                            ("sweep", cmd_sweep, "run a delta sweep plus the centralized reference"),
                            ("validate", cmd_validate, "check a config without running it")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="experiment config file")
        p.add_argument("--out", metavar="DIR", help=f"output directory (default: ${OUT_ENV}/<config name>)")
        p.add_argument("--seed", type=int, metavar="N", help="override [run] seed")
        if name == "run":
            p.add_argument("--full-state", action="store_true", help="append the full state to trace.csv")
        p.set_defaults(func=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, TypeError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
