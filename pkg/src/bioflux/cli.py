"""Command line entry point.

    bioflux run --config CFG --out DIR [--until T] [--checkpoint-every N] [--resume SNAP]
    bioflux validate --config CFG
    bioflux diff-snapshots A B
    bioflux study --spec STUDY --out DIR

Exit codes: 0 success, 1 negative verdict (differing snapshots, failed
study), 2 bad input, 3 aborted run.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from .coupler import RunAborted, run
from .errors import BiofluxError
from .io import read_snapshot, write_diagnostics_csv, write_pgm, write_snapshot

log = logging.getLogger("bioflux")


def _cmd_validate(args) -> int:
    from .config import load_config

    cfg = load_config(args.config)
    print(f"regime: {cfg.params.regime.value}")
    print(f"purpose: {cfg.purpose.value}")
    print(f"grid: {cfg.grid.nx} x {cfg.grid.ny} on [0, {cfg.grid.Lx:g}] x [0, {cfg.grid.Ly:g}]")
    if cfg.params.gamma > 0:
        print(f"gamma: {cfg.params.gamma:.6g}")
    print(cfg.report)
    print("configuration OK")
    return 0


def _cmd_run(args) -> int:
    from .config import load_config
    from .diagnostics import record
    from .scenarios import scenario

    cfg = load_config(args.config)
    grid, params = cfg.grid, cfg.params
    os.makedirs(args.out, exist_ok=True)
    if args.resume:
        state, header = read_snapshot(args.resume)
        if not header.matches(grid):
            print(f"error: snapshot grid {header.nx}x{header.ny} does not match the configuration",
                  file=sys.stderr)
            return 2
        log.info("resuming from %s at t=%g (step %d)", args.resume, state.t, state.step)
    else:
        sc = cfg.scenario
        state = scenario(sc.name, grid, params, seed=sc.seed, amplitude=sc.amplitude)
    runcfg = dataclasses.replace(
        cfg.run,
        t_end=cfg.run.t_end if args.until is None else args.until,
        checkpoint_every=cfg.run.checkpoint_every if args.checkpoint_every is None else args.checkpoint_every,
        checkpoint_dir=os.path.join(args.out, cfg.output.snapshot_dir),
    )
    records = []
    every = cfg.output.pgm_every

    def sample(s):
        records.append(record(grid, s, params, last_dt[0]))
        if every and (len(records) - 1) % every == 0:
            write_pgm(os.path.join(args.out, f"n_{s.step:08d}.pgm"), s.n)
            write_pgm(os.path.join(args.out, f"c_{s.step:08d}.pgm"), s.c)

    last_dt = [0.0]

    def hook(s, info):
        last_dt[0] = info.dt

    csv_path = os.path.join(args.out, cfg.output.csv)
    try:
        final = run(grid, state, params, runcfg, hooks=(hook,), sample=sample)
    except RunAborted as exc:
        write_diagnostics_csv(csv_path, records)
        print(f"error: {exc}", file=sys.stderr)
        if exc.state is not None:
            write_snapshot(os.path.join(args.out, "aborted.bcnv"), grid, exc.state)
        return 3
    write_diagnostics_csv(csv_path, records)
    write_snapshot(os.path.join(args.out, "final.bcnv"), grid, final)
    write_pgm(os.path.join(args.out, "n_final.pgm"), final.n)
    write_pgm(os.path.join(args.out, "c_final.pgm"), final.c)
    last = records[-1] if records else None
    print(f"t = {final.t:.6g} after {final.step} steps; "
          + (f"mass = {last.mass:.12g}, max c = {last.max_c:.6g}" if last else "no samples"))
    return 0


def _cmd_diff(args) -> int:
    a, ha = read_snapshot(args.a)
    b, hb = read_snapshot(args.b)
    if (ha.nx, ha.ny) != (hb.nx, hb.ny):
        print(f"grids differ: {ha.nx}x{ha.ny} vs {hb.nx}x{hb.ny}")
        return 1
    same = a.same_as(b) and ha == hb
    print(f"t: {a.t!r} vs {b.t!r}; step: {a.step} vs {b.step}")
    for name, x, y in (("n", a.n, b.n), ("c", a.c, b.c), ("u", a.u.u, b.u.u), ("v", a.u.v, b.u.v)):
        diff = float(np.max(np.abs(x - y))) if x.size else 0.0
        print(f"{name}: max |diff| = {diff:.3e}{'' if np.array_equal(x, y) else ' (differs)'}")
    print("identical" if same else "different")
    return 0 if same else 1


def _cmd_study(args) -> int:
    from .experiments import load_study, run_study

    spec = load_study(args.spec)
    report = run_study(spec)
    report.write(args.out)
    print(report.summary())
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bioflux",
                                     description="Chemotaxis-fluid bioconvection simulator.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--until", type=float, default=None, help="override t_end")
    p.add_argument("--checkpoint-every", type=int, default=None, metavar="STEPS")
    p.add_argument("--resume", default=None, metavar="SNAPSHOT")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="parse a configuration and check the model hypotheses")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("diff-snapshots", help="compare two snapshots field by field")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=_cmd_diff)

    p = sub.add_parser("study", help="run a multi-run study")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_study)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (BiofluxError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
