"""Command line interface: run, mesh, export, config-extract, calibrate-cfl."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import DGFluxError


def _cmd_run(args) -> int:
    from .config import load_config
    from .run import run

    cfg, text = load_config(args.config)
    out = Path(args.output) if args.output else Path(args.config).resolve().parent / f"{cfg.project}_out"
    result = run(cfg, text, k=args.partitions, restart=args.restart, output_dir=out,
                 max_steps=args.max_steps, report=not args.no_report)
    st = result.state
    print(f"finished t={st.t:.10g} after {st.step} steps "
          f"({result.wall_time:.2f} s, {len(result.checkpoints)} checkpoints) in {out}")
    last = result.records[-1]
    if last.l2 is not None:
        names = result.sim.op.eq.var_names
        print("L2 error: " + ", ".join(f"{n}={v:.6e}" for n, v in zip(names, last.l2)))
    return 0


def _cmd_mesh(args) -> int:
    from .config import load_config
    from .mesh import side_counts
    from .meshio import write_mesh
    from .run import build_mesh

    cfg, _ = load_config(args.config)
    mesh = build_mesh(cfg)
    out = Path(args.output) if args.output else Path(args.config).with_suffix(".dgfxmesh")
    write_mesh(mesh, out)
    counts = side_counts(mesh)
    print(f"wrote {out}: {mesh.n_elems} elements, Ngeo={mesh.ngeo}, sides " +
          ", ".join(f"{k}={v}" for k, v in counts.items()))
    return 0


def _cmd_export(args) -> int:
    from .checkpoint import read_checkpoint
    from .run import build_simulation, state_from_checkpoint
    from .visualize import export_visualization

    ck = read_checkpoint(args.checkpoint)
    sim = build_simulation(ck.config_text)
    state = state_from_checkpoint(sim, ck)
    names = [v.strip() for v in args.vars.split(",") if v.strip()] if args.vars else []
    out = args.output or str(Path(args.checkpoint).with_suffix("." + args.format))
    export_visualization(sim.op, state.U, args.nvis, out, names, state.is_fv, state.t, fmt=args.format)
    print(f"wrote {out}")
    return 0


def _cmd_config_extract(args) -> int:
    from .checkpoint import read_checkpoint

    ck = read_checkpoint(args.checkpoint)
    data = ck.config_text.encode("utf-8")
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    if args.verbose:
        print(f"# version {ck.version}; build {ck.build}; t={ck.time!r}; step {ck.step}", file=sys.stderr)
    return 0


def _cmd_calibrate(args) -> int:
    from .config import load_config
    from .timeint import calibrate_cfl

    cfg, _ = load_config(args.config)
    orders = range(1, cfg.N + 1) if args.all_orders else [cfg.N]
    print("N  family  scheme  form    dt_formula    dt_stable     gamma1")
    for N in orders:
        r = calibrate_cfl(N, cfg.nodes, cfg.scheme, cfg.form, nelem=args.nelem)
        print(f"{N:<2d} {r['family']:<7s} {r['scheme']:<7s} {cfg.form:<7s} {r['dt_formula']:.6e}  "
              f"{r['dt_stable']:.6e}  {r['gamma1']:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dgflux", description="DG spectral element solver with FV shock capturing")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress at analysis times")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a simulation from a configuration file")
    r.add_argument("config")
    r.add_argument("--partitions", "-k", type=int, default=1, help="number of SFC partitions")
    r.add_argument("--restart", help="checkpoint to restart from")
    r.add_argument("--output", "-o", help="output directory (default <project>_out next to the config)")
    r.add_argument("--max-steps", type=int, default=None)
    r.add_argument("--no-report", action="store_true", help="skip the PNG figures")
    r.set_defaults(func=_cmd_run)

    m = sub.add_parser("mesh", help="generate the configured mesh and write it as a mesh file")
    m.add_argument("config")
    m.add_argument("--output", "-o")
    m.set_defaults(func=_cmd_mesh)

    e = sub.add_parser("export", help="supersampled VTK/CSV export of a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("--nvis", type=int, default=8)
    e.add_argument("--vars", default="", help="comma-separated derived quantities, e.g. p,s,omega")
    e.add_argument("--format", choices=("vtk", "csv"), default="vtk")
    e.add_argument("--output", "-o")
    e.set_defaults(func=_cmd_export)

    c = sub.add_parser("config-extract", help="print the configuration stored in a checkpoint")
    c.add_argument("checkpoint")
    c.add_argument("--output", "-o")
    c.set_defaults(func=_cmd_config_extract)

    k = sub.add_parser("calibrate-cfl", help="empirical time-step factor for the configured N")
    k.add_argument("config")
    k.add_argument("--all-orders", action="store_true", help="report N = 1 .. configured N")
    k.add_argument("--nelem", type=int, default=4)
    k.set_defaults(func=_cmd_calibrate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DGFluxError, OSError, ValueError) as exc:
        print(f"dgflux: error: {exc}", file=sys.stderr)
        path = getattr(exc, "dump_path", None)
        if path is not None:
            print(f"dgflux: state before the failing step written to {path}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
