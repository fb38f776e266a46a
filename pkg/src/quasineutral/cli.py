"""Command-line entry point ``quasineutral``.

Subcommands ``equilibrium``, ``simulate``, ``sweep``, ``verify`` and ``plot``.
Exit status is 0 on success, 2 for usage or configuration errors and 1 when
a computation fails or a verification check does not pass.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

from . import __version__
from .config import (Config, build_equilibrium, build_flow, build_sim_config,
                     build_test_fields, load_config, parse_float_list)
from .errors import ConfigurationError, QuasineutralError

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- manifest ------------------------------------------------------------------

class Manifest:
    """``manifest.json``: config echo, version, seed, outputs and timings.

    Written as soon as the output directory is claimed and rewritten when
    the command finishes.
    """

    def __init__(self, out_dir, command, config: Config | None, seed=None, force=False):
        self.path = os.path.join(out_dir, "manifest.json")
        if os.path.exists(self.path) and not force:
            raise UsageError(f"{self.path} exists; choose a fresh --out directory or pass --force")
        os.makedirs(out_dir, exist_ok=True)
        self.out_dir = out_dir
        self.data = {
            "command": command,
            "version": __version__,
            "seed": seed,
            "config": config.echo() if config is not None else None,
            "outputs": {},
            "timings": {},
            "status": "running",
        }
        self._t0 = time.perf_counter()
        self.write()

    def output(self, key, path):
        self.data["outputs"][key] = os.path.relpath(path, self.out_dir)
        return path

    def timing(self, key, seconds):
        self.data["timings"][key] = seconds

    def finish(self, status="complete", **extra):
        self.data["timings"]["total"] = time.perf_counter() - self._t0
        self.data["status"] = status
        self.data.update(extra)
        self.write()

    def write(self):
        with open(self.path, "w") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=False)
            fh.write("\n")


# -- helpers -------------------------------------------------------------------

def _load(args) -> Config:
    if args.config is None:
        raise UsageError("--config is required")
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.set("simulation", "seed", str(args.seed))
    if getattr(args, "jobs", None) is not None:
        cfg.set("simulation", "jobs", str(args.jobs))
    return cfg


def _eps_list(text):
    try:
        return parse_float_list(text)
    except ValueError as exc:
        raise UsageError(f"--eps: {exc}") from None


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
    return path


def _equilibrium(cfg):
    try:
        return build_equilibrium(cfg)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid [potential]: {exc}") from None


def _summary(eq) -> dict:
    s = eq.summary()
    if eq.kind == "quadratic":
        axes = list(eq.axes)
        s["aspect_ratio"] = max(axes) / min(axes)
    return s


def _simulate_into(cfg: Config, out_dir, manifest: Manifest, log):
    from .kinetic import run
    from .snapshots import write_grid, write_particles

    t0 = time.perf_counter()
    eq = _equilibrium(cfg)
    flow = build_flow(cfg, eq)
    sim = build_sim_config(cfg)
    fields = build_test_fields(cfg, eq)
    manifest.timing("setup", time.perf_counter() - t0)
    every = cfg.get("simulation", "snapshot_every", 0)
    snaps = cfg.get("diagnostics", "write_snapshots", True)
    log(f"simulate: eps={sim.eps} theta={sim.theta} T={sim.T} particles={sim.particles} "
        f"seed={sim.seed}")
    t0 = time.perf_counter()
    res = run(sim, eq, flow, test_fields=fields, snapshot_every=every or None)
    manifest.timing("run", time.perf_counter() - t0)
    res.series.to_csv(manifest.output("diagnostics", os.path.join(out_dir, "diagnostics.csv")))
    if snaps:
        sdir = os.path.join(out_dir, "snapshots")
        os.makedirs(sdir, exist_ok=True)
        taken = res.snapshots or [(sim.T, res.ensemble)]
        steps = []
        for t, ens in taken:
            k = int(round(t / res.dt)) if res.dt else 0
            write_particles(os.path.join(sdir, f"particles_{k:06d}.csv"), ens)
            steps.append(k)
        write_grid(manifest.output("grid_final", os.path.join(sdir, f"grid_{res.steps:06d}.csv")),
                   res.grid)
        manifest.data["outputs"]["particle_snapshots"] = [
            os.path.join("snapshots", f"particles_{k:06d}.csv") for k in steps]
    manifest.data["dt"] = res.dt
    manifest.data["steps"] = res.steps
    return res


# -- subcommands ---------------------------------------------------------------

def cmd_equilibrium(args, log):
    from .snapshots import write_profile

    cfg = _load(args)
    m = Manifest(args.out, "equilibrium", cfg, force=args.force)
    t0 = time.perf_counter()
    eq = _equilibrium(cfg)
    m.timing("solve", time.perf_counter() - t0)
    p = cfg["potential"]
    write_profile(m.output("profile", os.path.join(args.out, "equilibrium_profile.csv")), eq,
                  p.get("profile_points", 401), p.get("profile_extent"))
    _write_json(m.output("summary", os.path.join(args.out, "equilibrium_summary.json")),
                _summary(eq))
    log(json.dumps(_summary(eq)))
    m.finish()
    return EXIT_OK


def cmd_simulate(args, log):
    cfg = _load(args)
    if args.eps is not None:
        eps = _eps_list(args.eps)
        if len(eps) != 1:
            raise UsageError("simulate takes a single --eps value")
        cfg.set("simulation", "eps", repr(eps[0]))
    m = Manifest(args.out, "simulate", cfg, seed=cfg.get("simulation", "seed", 0),
                 force=args.force)
    with open(m.output("config", os.path.join(args.out, "config.ini")), "w") as fh:
        fh.write(cfg.render())
    res = _simulate_into(cfg, args.out, m, log)
    last = res.series.last()
    log(f"done: H_mod(T)={last['H_mod']!r} energy(T)={last['energy']!r}")
    m.finish()
    return EXIT_OK


def cmd_sweep(args, log):
    from .diagnostics import DiagnosticSeries

    cfg = _load(args)
    eps_list = _eps_list(args.eps) if args.eps is not None else cfg.get("sweep", "eps")
    if not eps_list or len(eps_list) < 2:
        raise UsageError("a sweep needs at least two eps values (--eps or [sweep] eps)")
    m = Manifest(args.out, "sweep", cfg, seed=cfg.get("simulation", "seed", 0),
                 force=args.force)
    table = DiagnosticSeries()
    children = []
    for i, eps in enumerate(eps_list):
        child = Config(cfg.echo())
        child.set("simulation", "eps", repr(eps))
        child_dir = os.path.join(args.out, f"run_{i:02d}")
        cm = Manifest(child_dir, "simulate", child, seed=child.get("simulation", "seed", 0),
                      force=args.force)
        res = _simulate_into(child, child_dir, cm, log)
        cm.finish()
        children.append(os.path.relpath(cm.path, args.out))
        s = res.series
        last = s.last()
        pairings = [v for k, v in last.items() if k.startswith("pairing_")]
        E = s["energy"]
        table.append({
            "eps": eps,
            "H_T": last["H_mod"],
            "dist_Hminus1_T": last["dist_Hminus1"],
            "dist_L1_T": last["dist_L1"],
            "pairing_norm_T": math.sqrt(sum(p * p for p in pairings)),
            "energy_drift": float(abs(E[-1] - E[0]) / E[0]) if E[0] else 0.0,
        })
    table.to_csv(m.output("sweep", os.path.join(args.out, "sweep.csv")))
    order = sorted(range(len(eps_list)), key=lambda k: -eps_list[k])

    def decreasing(col, band=0.2):
        vals = [table[col][k] for k in order]
        return all(b <= (1 + band) * a for a, b in zip(vals, vals[1:]))

    monotone = {c: decreasing(c) for c in ("H_T", "dist_Hminus1_T")}
    log(f"sweep: decreasing within 20% as eps shrinks: {monotone}")
    m.finish(children=children, monotone_within_20pct=monotone)
    return EXIT_OK


def cmd_verify(args, log):
    from .verify import CHECKS, run_checks

    names = None
    if args.only:
        names = [n.strip() for n in args.only.split(",") if n.strip()]
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            raise UsageError(f"unknown checks: {', '.join(unknown)}")
    m = Manifest(args.out, "verify", None, force=args.force)

    def progress(name, res):
        log(f"{name} {res.test}: {'PASS' if res.passed else 'FAIL'} margin={res.margin:.3g}")

    t0 = time.perf_counter()
    results = run_checks(names, progress)
    m.timing("checks", time.perf_counter() - t0)
    _write_json(m.output("report", os.path.join(args.out, "verify_report.json")),
                [r.report() for r in results])
    ok = all(r.passed for r in results)
    m.finish("complete" if ok else "failed")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_plot(args, log):
    from .plotting import plot_csv

    try:
        paths = plot_csv(args.csv, args.out)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None
    for p in paths:
        log(p)
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="quasineutral",
                                description="Quasi-neutral limit equilibria and PIC runs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", metavar="PATH", help="configuration file")
        sp.add_argument("--out", metavar="DIR", default=".", help="output directory")
        sp.add_argument("--force", action="store_true",
                        help="reuse an output directory that already holds a manifest")
        sp.add_argument("--quiet", action="store_true")

    sp = sub.add_parser("equilibrium", help="solve for an equilibrium and dump profiles")
    common(sp)
    sp.set_defaults(func=cmd_equilibrium)

    for name, func, helptext in (("simulate", cmd_simulate, "run one simulation"),
                                 ("sweep", cmd_sweep, "run the same setup across eps values")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--seed", type=int, metavar="U64")
        sp.add_argument("--eps", metavar="LIST", help="eps value(s), comma separated")
        sp.add_argument("--jobs", type=int, metavar="N", help="worker threads per run")
        sp.set_defaults(func=func)

    sp = sub.add_parser("verify", help="run the verification checks, write a JSON report")
    common(sp, config=False)
    sp.add_argument("--only", metavar="NAMES", help="comma separated check names")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("plot", help="render SVG plots from a diagnostics or sweep CSV")
    sp.add_argument("csv", metavar="CSV")
    sp.add_argument("--out", metavar="DIR", default=".")
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    log = (lambda msg: None) if args.quiet else (lambda msg: print(msg, flush=True))
    try:
        return args.func(args, log)
    except (UsageError, ConfigurationError) as exc:
        print(f"quasineutral {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QuasineutralError as exc:
        print(f"quasineutral {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
