"""Command-line entry point.

Exit status: 0 on success, 1 on solver failure, 2 on configuration or usage errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import fga, io, selftest
from .config import CONFIG_KEYS, ConfigError, RunConfig
from .flow import initial_state, integrate_trajectory, symplectic_defect, z_matrix
from .harness import (TABLE_ALPHAS, convergence_sweep, error_table, reference_solution, run_compare,
                      wkb_initial, write_tables)

logger = logging.getLogger("fracfga")

SCHEMA_HELP = """config file: a JSON object with any of the keys
  {keys}
example: {{"example": "Ex1D", "eps_pow": 6, "alpha": 1.5, "delta_exponent": 1.0,
          "t_final": 0.25, "dt_fga": 0.01, "dq_factor": 0.5, "prune_tol": 1e-7,
          "output_dir": "out"}}""".format(keys=", ".join(CONFIG_KEYS))

# 2D eps exponents above this need --large
MAX_2D_EPS_POW = 7


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}\n\n{SCHEMA_HELP}", file=sys.stderr)
        raise SystemExit(2)


def _common(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--example", choices=["Ex1D", "Ex2D"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--eps-pow", type=int, help="eps = 2**-EPS_POW")
    p.add_argument("--delta-exponent", type=float, help="delta = eps**K")
    p.add_argument("--dt-fga", type=float)
    p.add_argument("--output-dir")
    p.add_argument("--workers", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="fracfga", description="Frozen Gaussian approximation for the "
                     "semiclassical fractional Schrodinger equation.", epilog=SCHEMA_HELP,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run-fga", help="FGA solution at the final time")
    _common(p)
    p.add_argument("--trace", type=int, default=0, metavar="N",
                   help="dump per-step CSV traces of the N heaviest trajectories")
    p.add_argument("--dump-amplitudes", action="store_true", help="write |A(0,q,p)| as CSV")

    p = sub.add_parser("run-ref", help="spectral reference solution")
    _common(p)

    p = sub.add_parser("compare", help="FGA vs reference L2 error")
    _common(p)
    p.add_argument("--save-fields", action="store_true")

    p = sub.add_parser("sweep", help="error table and decay slopes")
    _common(p)
    p.add_argument("--alphas", type=lambda s: [float(v) for v in s.split(",")],
                   default=list(TABLE_ALPHAS))
    p.add_argument("--eps-pows", type=lambda s: [int(v) for v in s.split(",")])
    p.add_argument("--large", action="store_true", help="allow 2D eps below 2^-7")

    p = sub.add_parser("selftest", help="run the invariant checks")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    changes = {}
    for attr, key in (("example", "example"), ("alpha", "alpha"), ("eps_pow", "eps_pow"),
                      ("delta_exponent", "delta_exponent"), ("dt_fga", "dt_fga"),
                      ("output_dir", "output_dir"), ("workers", "workers")):
        v = getattr(args, attr, None)
        if v is not None:
            changes[key] = v
    return cfg.replace(**changes) if changes else cfg


def _summary_path(cfg):
    return Path(cfg.output_dir) / "summary.json"


def _trace(trajs, cfg, n, out_dir):
    order = np.argsort(-np.abs(trajs.A), kind="stable")[:n]
    sub = trajs.take(order)
    rows = [[] for _ in range(len(sub))]

    def record(state):
        detz = np.linalg.det(z_matrix(state.F))
        defect = symplectic_defect(state.F)
        A = state.A
        for i in range(len(state)):
            rows[i].append([state.t, *state.Q[i], *state.P[i], state.S[i], A[i].real, A[i].imag,
                            abs(detz[i]), defect[i]])

    integrate_trajectory(sub, cfg.final_time, cfg.dt_fga, cfg.symbols(), callback=record)
    for i, r in enumerate(rows):
        io.write_trajectory_csv(r, Path(out_dir) / f"traj_{i:04d}.csv")


def cmd_run_fga(args, cfg):
    out = Path(cfg.output_dir)
    grid = fga.output_grid(cfg)
    psi0 = wkb_initial(cfg.example, cfg.eps, grid)
    t0 = time.perf_counter()
    sol = fga.solve(psi0, cfg)
    elapsed = time.perf_counter() - t0
    tag = f"{cfg.example}_a{cfg.alpha:g}_e{cfg.eps_pow}"
    io.write_field(sol.field, out / f"field_fga_{tag}")
    m = sol.diagnostics["mesh"]
    print(f"phase mesh: {m['nodes']} nodes, {m['active']} active, pruned mass {m['pruned_mass']:.2e}")
    if args.dump_amplitudes:
        trajs, mesh = fga.decompose(psi0, cfg)
        io.write_amplitudes_csv(trajs.q0, trajs.p0, trajs.A, out / f"amplitudes_{tag}.csv")
    if args.trace:
        trajs, _ = fga.decompose(psi0, cfg)
        _trace(trajs, cfg, args.trace, out / f"traces_{tag}")
    io.append_summary({"command": "run-fga", "config": cfg.to_dict(), "runtime_s": elapsed,
                       "diagnostics": sol.diagnostics}, _summary_path(cfg))
    print(f"FGA done in {elapsed:.2f}s; min|det Z|={sol.diagnostics['min_abs_det_z']:.4f}, "
          f"max symplectic defect={sol.diagnostics['max_symplectic_defect']:.2e}")


def cmd_run_ref(args, cfg):
    out = Path(cfg.output_dir)
    psi0 = wkb_initial(cfg.example, cfg.eps, fga.output_grid(cfg))
    t0 = time.perf_counter()
    ref = reference_solution(psi0, cfg, out / "ref_cache")
    elapsed = time.perf_counter() - t0
    io.write_field(ref, out / f"field_ref_{cfg.example}_a{cfg.alpha:g}_e{cfg.eps_pow}")
    io.append_summary({"command": "run-ref", "config": cfg.to_dict(), "runtime_s": elapsed},
                      _summary_path(cfg))
    print(f"reference done in {elapsed:.2f}s; norm {ref.norm():.12f}")


def cmd_compare(args, cfg):
    rec, sol, _ = run_compare(cfg, Path(cfg.output_dir) / "ref_cache", save_fields=args.save_fields)
    print("alpha,eps,delta,l2_abs,l2_rel,runtime_fga_s,runtime_ref_s")
    print(f"{rec.alpha:g},{rec.eps:.10g},{rec.delta:.6g},{rec.l2_abs:.6e},{rec.l2_rel:.6e},"
          f"{rec.runtime_fga_s:.3f},{rec.runtime_ref_s:.3f}")
    io.append_summary({"command": "compare", "config": cfg.to_dict(), "record": vars(rec),
                       "diagnostics": sol.diagnostics}, _summary_path(cfg))


def cmd_sweep(args, cfg):
    pows = args.eps_pows
    if pows is None:
        pows = [6, 7, 8, 9, 10] if cfg.dim == 1 else ([6, 7, 8, 9] if args.large else [6, 7])
    if cfg.dim == 2 and max(pows) > MAX_2D_EPS_POW and not args.large:
        raise ConfigError(f"2D sweeps beyond eps=2^-{MAX_2D_EPS_POW} need --large")
    if any(b <= a for a, b in zip(pows, pows[1:])):
        raise ConfigError("--eps-pows must be strictly increasing")
    cache = Path(cfg.output_dir) / "ref_cache"
    if len(pows) >= 3:
        fits, records, failures = convergence_sweep(args.alphas, pows, cfg.delta_exponent, cfg,
                                                    workers=cfg.workers, cache_dir=cache)
    else:
        # too few eps values for a slope: table only
        fits = []
        records, failures = error_table(args.alphas, pows, cfg.delta_exponent, cfg,
                                        workers=cfg.workers, cache_dir=cache)
    paths = write_tables(records, fits, cfg.output_dir, failures)
    with open(paths["table"]) as fh:
        print(fh.read(), end="")
    for f in fits:
        print(f"alpha={f.alpha:g}: slope {f.slope:.3f}")
    for key, msg in failures.items():
        print(f"FAILED alpha={key[0]:g} eps=2^-{key[1]}: {msg}", file=sys.stderr)
    io.append_summary({"command": "sweep", "config": cfg.to_dict(),
                       "slopes": {f"{f.alpha:g}": f.slope for f in fits},
                       "failures": {f"{a:g},{k}": m for (a, k), m in failures.items()}},
                      _summary_path(cfg))
    if failures:
        raise RuntimeError(f"{len(failures)} sweep cells failed")


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="[%(name)s] %(message)s")
    if args.command == "selftest":
        return 0 if selftest.run_all() else 1
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"config error: {exc}\n\n{SCHEMA_HELP}", file=sys.stderr)
        return 2
    handlers = {"run-fga": cmd_run_fga, "run-ref": cmd_run_ref, "compare": cmd_compare,
                "sweep": cmd_sweep}
    try:
        handlers[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}\n\n{SCHEMA_HELP}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
