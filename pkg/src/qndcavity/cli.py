"""Command-line front end for the two-atom cavity simulator.

Every subcommand reads a YAML (or JSON) config with the keys ``omega, g,
kappa, epsilon, delta_p, gamma, n_max, dt``. Optional keys: ``initial``
(initial atomic preparation, default ``ge``), ``record_every``, ``t_relax``
and ``t_settle`` (protocol phase lengths) and ``workers``.

Exit codes: 0 success, 2 invalid config, 3 truncation breach, 4 numerical
failure.
"""

import argparse
import csv
import dataclasses
import logging
import math
import sys
import warnings

import numpy as np
import yaml

from . import evolution, experiments, trajectories
from .model import SystemParams, build_space
from .numerics import NotHermitian, Singular

EXIT_CONFIG = 2
EXIT_TRUNCATION = 3
EXIT_NUMERICAL = 4

PARAM_KEYS = ("omega", "g", "kappa", "epsilon", "delta_p", "gamma", "n_max")
EXTRA_KEYS = ("dt", "initial", "record_every", "t_relax", "t_settle", "workers")


class ConfigError(ValueError):
    pass


def load_config(path):
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - set(PARAM_KEYS) - set(EXTRA_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "g" not in raw:
        raise ConfigError("config must set g")
    kappa = raw.get("kappa", 1.0)
    if kappa != 1.0:
        raise ConfigError(f"kappa sets the unit and must be 1.0, got {kappa}")
    try:
        kwargs = {k: float(raw[k]) for k in PARAM_KEYS if k in raw and k != "n_max"}
        if "n_max" in raw:
            if int(raw["n_max"]) != raw["n_max"]:
                raise ValueError("n_max must be an integer")
            kwargs["n_max"] = int(raw["n_max"])
        params = SystemParams(**kwargs)
        cfg = {
            "dt": float(raw.get("dt", evolution.DEFAULT_DT)),
            "initial": str(raw.get("initial", "ge")),
            "record_every": float(raw.get("record_every", 1.0)),
            "t_relax": raw.get("t_relax"),
            "t_settle": raw.get("t_settle"),
            "workers": int(raw.get("workers", 1)),
        }
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if not cfg["dt"] > 0 or not cfg["record_every"] > 0:
        raise ConfigError("dt and record_every must be positive")
    try:
        evolution.initial_state(build_space(params), cfg["initial"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return params, cfg


def _fmt(x):
    return f"{x:.9g}"


def _dump(doc, out):
    yaml.safe_dump(doc, out, sort_keys=False, default_flow_style=False)


def _traj_config(params, cfg, seed, t_end):
    """Trajectory grid: the configured dt if it passes the jump guard, else the largest that does."""
    stride = int(round(cfg["record_every"] / cfg["dt"]))
    tc = trajectories.TrajectoryConfig(seed=seed, dt=cfg["dt"], t_end=t_end, record_stride=max(stride, 1))
    try:
        tc.check(params)
        if abs(stride * cfg["dt"] - cfg["record_every"]) > 1e-9:
            raise ValueError("record_every is not a multiple of dt")
        return tc
    except ValueError:
        tc = trajectories.TrajectoryConfig.for_params(params, seed, t_end, cfg["record_every"])
        logging.info("using trajectory step dt=%g", tc.dt)
        return tc


def cmd_steady(args, params, cfg, out):
    space = build_space(params)
    if args.p is not None:
        if not 0 <= args.p <= 1:
            raise ConfigError("--p must lie in [0, 1]")
        # triplet part starts fully excited so the relaxation is not trivial
        rho0 = (1 - args.p) * evolution.ket_to_dm(space.ket("E")) + args.p * evolution.ket_to_dm(space.ket("D"))
    else:
        rho0 = evolution.initial_state(space, cfg["initial"])
    report = experiments.steady_report(params, rho0)
    _dump({"params": dataclasses.asdict(params), **report}, out)


def cmd_spectrum(args, params, cfg, out):
    if not args.dstep > 0 or args.dmax < args.dmin:
        raise ConfigError("need dstep > 0 and dmax >= dmin")
    grid = experiments.default_grid(args.dmin, args.dmax, args.dstep)
    method = {"me": "master_equation", "lr": "linear_response"}[args.method]
    rows = experiments.spectrum_scan(params, grid, method, workers=cfg["workers"])
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["delta_p", "T_ground", "T_dark"])
    for r in rows:
        w.writerow([_fmt(r.delta_p), _fmt(r.T_ground), _fmt(r.T_dark)])


def cmd_trajectory(args, params, cfg, out):
    space = build_space(params)
    rho0 = evolution.initial_state(space, cfg["initial"])
    tc = _traj_config(params, cfg, args.seed, args.tend)
    spec = evolution.lindblad_spec(params, space)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t", "nbar", "C", "T", "jumps_so_far"])
    if args.ntraj == 1:
        rec = trajectories.evolve_trajectory(spec, rho0, tc)
        rows = zip(rec.times, rec.nbar, rec.concurrence, rec.transmission, rec.jumps_so_far)
        jumps = [(0, j) for j in rec.jumps]
    else:
        ens = trajectories.run_ensemble(spec, rho0, tc, args.ntraj, args.seed, workers=cfg["workers"])
        m = ens.mean
        rows = zip(ens.times, m["nbar"], m["C"], m["T"], m["jumps"])
        jumps = [(k, j) for k, js in enumerate(ens.jumps) for j in js]
    for t, n, c, tr, k in rows:
        w.writerow([_fmt(t), _fmt(n), _fmt(c), _fmt(tr), _fmt(k)])
    sidecar = args.jumps_out or (f"{args.out}.jumps.csv" if args.out else "trajectory_jumps.csv")
    with open(sidecar, "w", newline="") as fh:
        sw = csv.writer(fh, lineterminator="\n")
        sw.writerow(["traj", "t", "channel"])
        for k, j in jumps:
            sw.writerow([k, _fmt(j.time), j.channel])


def cmd_protocol(args, params, cfg, out):
    space = build_space(params)
    rho0 = evolution.initial_state(space, cfg["initial"])
    report = experiments.validity_window(params)
    settle_default = max(report.t_min, 20.0 / params.kappa) if math.isfinite(report.t_min) else 20.0
    relax = float(cfg["t_relax"]) if cfg["t_relax"] is not None else settle_default
    settle = float(cfg["t_settle"]) if cfg["t_settle"] is not None else settle_default
    schedule = experiments.ProtocolSchedule(relax, settle, args.window)
    tc = _traj_config(params, cfg, args.seed, schedule.total)
    results = experiments.protocol_ensemble(params, rho0, schedule, tc, args.runs, args.seed, workers=cfg["workers"])
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["run", "branch", "clicks", "heralded", "post_click_fidelity"])
    for k, r in enumerate(results):
        w.writerow([k, r.branch, r.clicks, int(r.heralded), _fmt(r.post_click_fidelity)])
    for key, value in experiments.protocol_summary(results).items():
        out.write(f"# {key}={value}\n")


def cmd_validity(args, params, cfg, out):
    r = experiments.validity_window(params)
    _dump({"t_min": r.t_min, "t_max": r.t_max, "window_ok": r.window_ok, "ratio": r.ratio}, out)


def build_parser():
    ap = argparse.ArgumentParser(prog="qndcavity", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("steady", help="steady-state report")
    p.add_argument("--config", required=True)
    p.add_argument("--p", type=float, default=None, help="override the singlet weight of the initial state")
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("spectrum", help="transmission versus probe detuning")
    p.add_argument("--config", required=True)
    p.add_argument("--dmin", type=float, required=True)
    p.add_argument("--dmax", type=float, required=True)
    p.add_argument("--dstep", type=float, required=True)
    p.add_argument("--method", choices=["me", "lr"], required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("trajectory", help="quantum-jump trajectory (or ensemble mean)")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--tend", type=float, required=True)
    p.add_argument("--ntraj", type=int, default=1)
    p.add_argument("--jumps-out", default=None, help="jump-times sidecar path")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("protocol", help="heralded preparation runs")
    p.add_argument("--config", required=True)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--window", type=float, required=True)
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("validity", help="monitoring-window advisory")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validity)

    for p in sub.choices.values():
        p.add_argument("--out", default=None, help="write the main output here instead of stdout")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            params, cfg = load_config(args.config)
        if getattr(args, "seed", 0) < 0 or getattr(args, "ntraj", 1) < 1 or getattr(args, "runs", 1) < 1:
            raise ConfigError("seed must be >= 0 and counts >= 1")
        if args.out:
            with open(args.out, "w", newline="") as out:
                args.func(args, params, cfg, out)
        else:
            args.func(args, params, cfg, sys.stdout)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except evolution.TruncationBreach as exc:
        print(f"truncation breach: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except (evolution.NumericalFailure, Singular, NotHermitian, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
