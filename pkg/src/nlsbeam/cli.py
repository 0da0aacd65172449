"""Command line entry point: ``nlsbeam <command> [subcommand] [options]``."""

import argparse
import sys
import time

from . import io
from . import harness

QM_EXPERIMENTS = ("residual-sweep", "localization-sweep", "norm-sweep")


def _add_common(p):
    p.add_argument("--config", help="key=value file; flags given here override it")
    p.add_argument("--out-root", help=f"output root (default ${io.OUT_ENV} or ./out)")
    p.add_argument("--jobs", help="worker processes for sweep points (wall time only)")
    p.add_argument("--k-list", dest="k_list", help="comma-separated mode numbers")
    p.add_argument("--p", help="nonlinearity power")
    p.add_argument("--sigma", help="NLS coupling sign, +1 or -1")
    p.add_argument("--N", dest="N", help="comma-separated hierarchy orders")
    p.add_argument("--delta", help="tube exponent offset")
    p.add_argument("--preset", help="profile preset: paper, flat or toy")
    p.add_argument("--profile-csv", dest="profile_csv", help="(x, A) samples; replaces --preset")
    p.add_argument("--n-x", dest="n_x", help="explicit grid size in x (with --n-theta)")
    p.add_argument("--n-theta", dest="n_theta", help="explicit grid size in theta")
    p.add_argument("--out-dir", dest="out_dir", help="subdirectory under the output root")


OVERRIDE_KEYS = ("jobs", "k_list", "p", "sigma", "N", "delta", "preset", "profile_csv",
                 "n_x", "n_theta", "out_dir")


def _experiment(args, name, extra=()):
    over = {k: getattr(args, k, None) for k in OVERRIDE_KEYS + tuple(extra)}
    over["experiment"] = name
    cfg = harness.load_config(args.config, over)
    t0 = time.perf_counter()
    summary, out = harness.run_experiment(cfg, args.out_root)
    for b in summary["bars"]:
        print(harness.format_bar(b))
    for err in summary["failed_points"]:
        print(f"FAILED POINT  {err}")
    print(f"wrote {out} ({time.perf_counter() - t0:.1f} s)")
    return 0 if summary["all_passed"] else 1


def cmd_selftest(args):
    return _experiment(args, "oscillator-selftest")


def cmd_wkb_solve(args):
    from . import wkb
    cfg = wkb.WKBConfig(p=args.p, sigma=args.sigma, N=args.N, omega=args.omega,
                        h=args.h, n_max=args.n_max,
                        shifted_mode={"auto": None, "on": True, "off": False}[args.shifted])
    sol = wkb.solve_hierarchy(cfg)
    rec = wkb.solution_record(sol, args.h)
    rec["schema_version"] = io.SCHEMA_VERSION
    if args.json:
        io.write_json(args.json, rec)
    sys.stdout.write(io.dumps(rec))
    return 0


def _cli_profile(args):
    from . import geometry
    if args.profile_csv:
        return geometry.load_profile_csv(args.profile_csv)
    return geometry.build_profile(args.preset)


def _profile_name(args):
    return args.profile_csv or args.preset


def cmd_qm_build(args):
    from . import quasimode as qm
    prof = _cli_profile(args)
    grid = qm.TorusGrid(args.n_theta, args.n_x) if args.n_x else None
    u, diag = qm.build_and_diagnose(args.k, p=args.p, sigma=args.sigma, N=args.N,
                                    profile=prof, delta=args.delta, grid=grid)
    out = io.output_root(args.out_root) / (args.out_dir or f"quasimode_k{args.k}")
    rec = qm.diagnostics_record(u, diag)
    io.write_json(out / "diagnostics.json", rec)
    io.write_csv(out / "field.csv", ["theta_index", "x_index", "re_u", "im_u"],
                 ([int(a), int(b), c, d] for a, b, c, d in qm.field_rows(u)))
    io.write_json(out / "manifest.json", {
        "config": {"k": args.k, "p": args.p, "sigma": args.sigma, "N": args.N,
                   "preset": _profile_name(args), "delta": args.delta},
        "grid": {"n_theta": u.grid.n_theta, "n_x": u.grid.n_x},
        "build": io.build_metadata()})
    sys.stdout.write(io.dumps(rec))
    return 0


def cmd_qm_sweep(args):
    return _experiment(args, args.experiment, ("r_list",))


def cmd_evolve_run(args):
    from . import evolve as ev, quasimode as qm
    prof = _cli_profile(args)
    grid = qm.TorusGrid(args.n_theta, args.n_x) if args.n_x else None
    h = 1.0 / args.k
    sol = qm.solve_for(p=args.p, sigma=args.sigma, N=args.N, profile=prof, h=h)
    u0 = qm.build_quasimode(sol, args.k, prof, grid)
    t_final = args.t_final if args.t_final is not None else ev.horizon(args.law, h, args.p)
    cfg = ev.EvolveConfig(t_final=t_final, dt=args.dt_factor * h * h, p=args.p,
                          sigma=args.sigma, record_every=args.record_every, delta=args.delta)
    out = io.output_root(args.out_root) / (args.out_dir or f"evolve_k{args.k}")
    status = 0
    try:
        trace = ev.run(u0, cfg, prof)
    except ev.EvolutionError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        trace, status = exc.trace, 2
    io.write_csv(out / "trace.csv", ev.EvolutionTrace.COLUMNS, trace.rows())
    dt, n_steps = cfg.time_step(h)
    io.write_json(out / "manifest.json", {
        "config": {"k": args.k, "p": args.p, "sigma": args.sigma, "N": args.N,
                   "preset": _profile_name(args), "law": args.law, "t_final": t_final,
                   "dt": dt, "steps": n_steps, "record_every": args.record_every,
                   "delta": args.delta, "lambda": u0.lam},
        "grid": {"n_theta": u0.grid.n_theta, "n_x": u0.grid.n_x},
        "build": io.build_metadata(),
        "completed": status == 0})
    print(f"wrote {out}")
    return status


def cmd_evolve_sweep(args):
    return _experiment(args, "evolve-horizon", ("law", "dt_factor", "record_every"))


def cmd_report(args):
    if args.run:
        cfg_path = args.config
        for name in harness.EXPERIMENTS:
            over = {"experiment": name, "jobs": args.jobs}
            if name == "residual-sweep":
                over.update(preset="toy", N="1,3", out_dir="residual-sweep-toy")
            harness.run_experiment(harness.load_config(cfg_path, over), args.out_root)
    reports = harness.collect_reports(args.out_root)
    if not reports:
        print("no summaries found under the output root", file=sys.stderr)
        return 1
    rows, ok = [], True
    for name, summary in reports:
        for b in summary["bars"]:
            print(harness.format_bar(b))
            rows.append([name, b["name"], b["measured"] if b["measured"] is not None else "",
                         b["op"], b["bar"], b["passed"]])
            ok &= b["passed"]
    io.write_csv(io.output_root(args.out_root) / "report.csv",
                 ["directory", "bar", "measured", "op", "threshold", "passed"], rows)
    return 0 if ok else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="nlsbeam", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("selftest", help="oscillator invariants and energy oracles")
    _add_common(p)
    p.set_defaults(func=cmd_selftest)

    wkb_p = sub.add_parser("wkb", help="oscillator hierarchy")
    wsub = wkb_p.add_subparsers(dest="sub", required=True)
    p = wsub.add_parser("solve", help="solve the hierarchy and print energies")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--sigma", type=int, default=1, help="reduced-equation sign")
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--n-max", dest="n_max", type=int, default=None)
    p.add_argument("--shifted", choices=("auto", "on", "off"), default="auto")
    p.add_argument("--json", help="also write the record to this file")
    p.set_defaults(func=cmd_wkb_solve)

    qm_p = sub.add_parser("quasimode", help="2D quasimodes on the torus")
    qsub = qm_p.add_subparsers(dest="sub", required=True)
    p = qsub.add_parser("build", help="build one quasimode, dump the field and diagnostics")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--sigma", type=int, default=1)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--preset", default="paper")
    p.add_argument("--profile-csv", dest="profile_csv", help="(x, A) samples; replaces --preset")
    p.add_argument("--n-x", dest="n_x", type=int, default=0)
    p.add_argument("--n-theta", dest="n_theta", type=int, default=0)
    p.add_argument("--out-root")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_qm_build)
    p = qsub.add_parser("sweep", help="residual, localization or norm sweep over k")
    p.add_argument("--experiment", choices=QM_EXPERIMENTS, default="residual-sweep")
    p.add_argument("--r-list", dest="r_list")
    _add_common(p)
    p.set_defaults(func=cmd_qm_sweep)

    ev_p = sub.add_parser("evolve", help="time evolution from a quasimode")
    esub = ev_p.add_subparsers(dest="sub", required=True)
    p = esub.add_parser("run", help="one run; writes trace.csv and manifest.json")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--sigma", type=int, default=1)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--preset", default="paper")
    p.add_argument("--profile-csv", dest="profile_csv", help="(x, A) samples; replaces --preset")
    p.add_argument("--law", default="power", choices=harness.LAWS)
    p.add_argument("--t-final", dest="t_final", type=float, default=None,
                   help="overrides --law")
    p.add_argument("--dt-factor", dest="dt_factor", type=float, default=0.1,
                   help="dt = factor * h^2")
    p.add_argument("--record-every", dest="record_every", type=int, default=1)
    p.add_argument("--n-x", dest="n_x", type=int, default=0)
    p.add_argument("--n-theta", dest="n_theta", type=int, default=0)
    p.add_argument("--out-root")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_evolve_run)
    p = esub.add_parser("sweep", help="horizon sweep over k")
    p.add_argument("--law", choices=harness.LAWS)
    p.add_argument("--dt-factor", dest="dt_factor")
    p.add_argument("--record-every", dest="record_every")
    _add_common(p)
    p.set_defaults(func=cmd_evolve_sweep)

    p = sub.add_parser("report", help="collect summaries under the output root")
    p.add_argument("--run", action="store_true", help="run every experiment first")
    p.add_argument("--config")
    p.add_argument("--jobs")
    p.add_argument("--out-root")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
