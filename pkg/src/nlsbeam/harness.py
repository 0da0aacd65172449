"""Experiment configuration, sweep orchestration and report emission.

Each experiment writes four files into ``<output root>/<out_dir>/``:
``summary.json`` (bars with measured values), ``points.csv`` (one row per
sweep point), ``long.csv`` (plot-ready long format) and ``manifest.json``
(config, grids and build metadata).
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict, fields
import math
import os
from typing import Tuple

import numpy as np

from . import io
from .fitting import fit_slope, log2_ratio

EXPERIMENTS = ("oscillator-selftest", "fourier-decay", "residual-sweep",
               "localization-sweep", "norm-sweep", "evolve-horizon")
LAWS = ("power", "log", "zero")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "oscillator-selftest"
    k_list: Tuple[int, ...] = (8, 16, 32, 64)
    p: float = 2.0
    sigma: int = 1
    N: Tuple[int, ...] = (1,)
    delta: float = 0.1
    preset: str = "paper"
    c2: float = 0.5
    profile_csv: str = ""        # non-empty: (x, A) samples replace the preset
    n_x: int = 0                 # 0: auto grid for each k
    n_theta: int = 0
    out_dir: str = ""            # "": the experiment name
    jobs: int = 1
    r_list: Tuple[int, ...] = (1, 2)
    rescale_k: Tuple[int, ...] = (8, 16, 32)
    fourier_cases: Tuple[Tuple[int, float], ...] = ((1, 1.0), (2, 1.0), (1, 0.5))
    tube_bar: float = 4.0
    law: str = "power"
    dt_factor: float = 0.1
    record_every: int = 1
    slope_tol: float = 0.3

    def __post_init__(self):
        validate(self)

    @property
    def target_dir(self):
        return self.out_dir or self.experiment


def validate(cfg):
    from .geometry import PRESETS
    from .quasimode import TorusGrid
    if cfg.experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {cfg.experiment!r}; choose from {EXPERIMENTS}")
    ks = list(cfg.k_list)
    if not ks or any(k <= 4 for k in ks) or sorted(set(ks)) != ks:
        raise ValueError("k_list must be strictly ascending integers > 4")
    if cfg.sigma not in (1, -1):
        raise ValueError("sigma must be +1 or -1")
    if not cfg.p > 0:
        raise ValueError("p must be positive")
    if not cfg.N or any(n < 0 for n in cfg.N):
        raise ValueError("N must list non-negative orders")
    if not 0 < cfg.delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    if cfg.profile_csv and not os.path.isfile(cfg.profile_csv):
        raise ValueError(f"profile_csv {cfg.profile_csv!r} is not a file")
    if cfg.preset not in PRESETS:
        raise ValueError(f"preset must be one of {PRESETS}")
    if cfg.jobs < 1:
        raise ValueError("jobs must be >= 1")
    if cfg.law not in LAWS:
        raise ValueError(f"law must be one of {LAWS}")
    if not cfg.dt_factor > 0 or cfg.record_every < 1:
        raise ValueError("dt_factor must be positive and record_every >= 1")
    if any(r < 0 for r in cfg.r_list):
        raise ValueError("r_list entries must be >= 0")
    if (cfg.n_x == 0) != (cfg.n_theta == 0):
        raise ValueError("set both n_x and n_theta, or neither (auto)")
    if cfg.n_x:
        TorusGrid(cfg.n_theta, cfg.n_x).check_resolves(max(ks))
    if "/" in cfg.out_dir or cfg.out_dir.startswith("."):
        raise ValueError("out_dir must be a plain directory name")


# -- key=value config files ---------------------------------------------------------

def _ints(s):
    return tuple(int(v) for v in s.split(",") if v.strip())


def _cases(s):
    out = []
    for item in s.split(","):
        if item.strip():
            n, p = item.split(":")
            out.append((int(n), float(p)))
    return tuple(out)


PARSERS = {
    "experiment": str, "k_list": _ints, "p": float, "sigma": int, "N": _ints,
    "delta": float, "preset": str, "c2": float, "profile_csv": str, "n_x": int, "n_theta": int,
    "out_dir": str, "jobs": int, "r_list": _ints, "rescale_k": _ints,
    "fourier_cases": _cases, "tube_bar": float, "law": str, "dt_factor": float,
    "record_every": int, "slope_tol": float,
}


def parse_pairs(lines):
    """Dict of raw string values from ``key = value`` lines (# comments allowed)."""
    out = {}
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {num}: expected key=value, got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in PARSERS:
            raise ValueError(f"line {num}: unknown key {key!r}")
        out[key] = val
    return out


def load_config(path=None, overrides=None):
    """ExperimentConfig from a key=value file, with ``overrides`` (raw strings) winning."""
    raw = {}
    if path is not None:
        with open(path) as fh:
            raw.update(parse_pairs(fh))
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in PARSERS:
            raise ValueError(f"unknown key {key!r}")
        raw[key] = val
    typed = {}
    for key, val in raw.items():
        try:
            typed[key] = PARSERS[key](val) if isinstance(val, str) else val
        except ValueError as exc:
            raise ValueError(f"bad value for {key}: {val!r} ({exc})") from None
    return ExperimentConfig(**typed)


def config_text(cfg):
    """Round-trippable key=value rendering of a config."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "fourier_cases":
            v = ",".join(f"{n}:{io.fmt_float(p)}" for n, p in v)
        elif isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, float):
            v = io.fmt_float(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def config_record(cfg):
    d = asdict(cfg)
    d["fourier_cases"] = [list(c) for c in cfg.fourier_cases]
    return d


# -- sweep points (module-level so they pickle for the process pool) ----------------

def _profile(cfg):
    from .geometry import build_profile, load_profile_csv
    if cfg.profile_csv:
        return load_profile_csv(cfg.profile_csv)
    return build_profile(cfg.preset, c2=cfg.c2)


def _grid(cfg, k):
    from .quasimode import TorusGrid
    return TorusGrid(cfg.n_theta, cfg.n_x) if cfg.n_x else TorusGrid.auto(k)


def _quasimode_point(cfg, N, k):
    from . import quasimode as qm
    prof = _profile(cfg)
    u, d = qm.build_and_diagnose(k, p=cfg.p, sigma=cfg.sigma, N=N, profile=prof,
                                 delta=cfg.delta, grid=_grid(cfg, k))
    rec = qm.diagnostics_record(u, d)
    rec["N"] = N
    rec["tube_mass_half"] = qm.tube_mass_out(u.values, u.grid, u.h, 0.49)
    return rec


def _evolve_point(cfg, k):
    from . import evolve as ev
    prof = _profile(cfg)
    tmpl = ev.EvolveConfig(dt=cfg.dt_factor / k ** 2, record_every=cfg.record_every,
                           delta=cfg.delta)
    u0, tr = ev.horizon_point(k, cfg.p, cfg.sigma, cfg.N[0], prof, cfg.law, tmpl,
                              grid=_grid(cfg, k))
    rec = ev.trace_summary(k, u0.h, tr)
    rec["trace"] = tr.as_dict()
    rec["n_theta"], rec["n_x"] = u0.grid.n_theta, u0.grid.n_x
    return rec


def _fourier_point(n, p):
    from .oscillator import fourier_decay_slope
    return {"n": n, "p": p, "slope": fourier_decay_slope(n, p), "target": -(2.0 + p)}


def _guarded(task):
    fn, args = task
    try:
        rec = fn(*args)
        rec["ok"] = True
        rec["error"] = ""
    except Exception as exc:   # one failed point must not sink the sweep
        rec = {"ok": False, "error": f"{type(exc).__name__}: {exc}"}
    return rec


def fan_out(tasks, jobs):
    """Run tasks, preserving submission order whatever the completion order."""
    if jobs <= 1 or len(tasks) <= 1:
        return [_guarded(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_guarded, tasks))


# -- bars ---------------------------------------------------------------------------

def bar(experiment, name, measured, op, threshold):
    """Acceptance bar record; ``op`` is one of >=, <=, >, abs<= (|measured| <= threshold)."""
    if measured is None or (isinstance(measured, float) and not math.isfinite(measured)):
        passed = False
    elif op == ">=":
        passed = measured >= threshold
    elif op == "<=":
        passed = measured <= threshold
    elif op == ">":
        passed = measured > threshold
    elif op == "abs<=":
        passed = abs(measured) <= threshold
    else:
        raise ValueError(op)
    return {"experiment": experiment, "name": name, "measured": measured,
            "op": op, "bar": threshold, "passed": bool(passed)}


# -- experiments --------------------------------------------------------------------

def _exp_selftest(cfg):
    from . import oscillator as osc, oracles, wkb
    name = cfg.experiment
    rows, bars = [], []
    for omega in (1.0, 2 ** -0.5):
        for check, value, thr, _ in osc.invariant_report(omega=omega, n_max=20):
            rows.append({"omega": omega, "check": check, "value": value, "bar": thr})
            bars.append(bar(name, f"{check} omega={omega:.6g}", value, "<=", thr))
        for p in (2, 4):
            basis = osc.build_basis(omega, 16, power=p)
            for sigma in (1, -1):
                phi0, e0 = wkb.solve_order0(wkb.WKBConfig(omega=omega), basis)
                nl = sigma * osc.expand_nonlinear(phi0, p, basis)
                e1 = wkb.solvability_energy(nl, phi0)
                want = oracles.first_energy(p, sigma, omega)
                err = max(abs(e1 - want), abs(e0 - omega))
                rows.append({"omega": omega, "check": f"E1 p={p} sigma={sigma:+d}",
                             "value": e1, "bar": want})
                bars.append(bar(name, f"energy p={p} sigma={sigma:+d} omega={omega:.6g}",
                                err, "<=", 1e-10))
    z, energies, phis = oracles.dense_hierarchy(p=2, sigma=1, N=2, omega=1.0)
    sol = wkb.solve_hierarchy(wkb.WKBConfig(p=2, sigma=1, N=2, omega=1.0))
    e_err = max(abs(a - b) for a, b in zip(energies, sol.energies))
    f_err = max(float(np.max(np.abs(sol.basis.synth(c, z) - d)))
                for c, d in zip(sol.phis, phis))
    rows.append({"omega": 1.0, "check": "dense_oracle_energy", "value": e_err, "bar": 1e-6})
    rows.append({"omega": 1.0, "check": "dense_oracle_profile", "value": f_err, "bar": 1e-6})
    bars.append(bar(name, "dense oracle energies p=2 N=2", e_err, "<=", 1e-6))
    bars.append(bar(name, "dense oracle profiles p=2 N=2", f_err, "<=", 1e-6))
    header = ["omega", "check", "value", "bar"]
    long = [(r["check"], "omega", r["omega"], "value", r["value"]) for r in rows]
    return rows, header, bars, {}, long, {}


def _exp_fourier(cfg):
    tasks = [(_fourier_point, (n, p)) for n, p in cfg.fourier_cases]
    rows = fan_out(tasks, cfg.jobs)
    bars = []
    for (n, p), r in zip(cfg.fourier_cases, rows):
        r.setdefault("n", n)
        r.setdefault("p", p)
        measured = r["slope"] - r["target"] if r["ok"] else None
        bars.append(bar(cfg.experiment, f"decay slope n={n} p={p:g} minus -(2+p)",
                        measured, "abs<=", 0.4))
    header = ["n", "p", "slope", "target", "ok", "error"]
    long = [(f"n={r['n']} p={r['p']:g}", "n", r["n"], "slope", r.get("slope", math.nan))
            for r in rows]
    return rows, header, bars, {}, long, {}


QM_HEADER = ["N", "k", "h", "lambda", "norm", "n_theta", "n_x", "residual_l2",
             "reduced_residual", "tube_mass_out", "tube_mass_half",
             "hr_0", "hr_1", "hr_2", "ok", "error"]


def _qm_rows(cfg, orders):
    tasks = [(_quasimode_point, (cfg, N, k)) for N in orders for k in cfg.k_list]
    rows = fan_out(tasks, cfg.jobs)
    for (_, (_, N, k)), r in zip(tasks, rows):
        r.setdefault("N", N)
        r.setdefault("k", k)
        r.setdefault("h", 1.0 / k)
        for rr, v in r.pop("hr_norms", {}).items():
            r[f"hr_{rr}"] = v
    grids = {str(r["k"]): [r["n_theta"], r["n_x"]] for r in rows if r["ok"]}
    return rows, grids


def _fit_or_none(pairs):
    try:
        return fit_slope(pairs)
    except ValueError:
        return None


def _exp_residual(cfg):
    from .wkb import WKBConfig
    rows, grids = _qm_rows(cfg, cfg.N)
    q = WKBConfig(p=cfg.p, N=0).q
    fits, bars = {}, []
    for N in cfg.N:
        pts = [r for r in rows if r["N"] == N]
        fit = _fit_or_none([(r["h"], r["reduced_residual"]) for r in pts if r["ok"]]) \
            if all(r["ok"] for r in pts) else None
        target = (N + 1) * q if cfg.preset == "toy" else min((N + 1) * q, 1.0)
        fits[f"N={N}"] = fit.as_dict() if fit else None
        bars.append(bar(cfg.experiment, f"reduced residual slope N={N} ({cfg.preset})",
                        fit.slope if fit else None, ">=", target - cfg.slope_tol))
    long = [(f"N={r['N']}", "h", r["h"], "reduced_residual", r.get("reduced_residual", math.nan))
            for r in rows]
    return rows, QM_HEADER, bars, fits, long, grids


def _hr_bars(cfg, rows, fits, bars, ratios):
    for rr in cfg.r_list:
        key = f"hr_{rr}"
        ok = all(r["ok"] and key in r for r in rows)
        fit = _fit_or_none([(r["h"], r[key]) for r in rows]) if ok else None
        fits[f"hr_{rr}"] = fit.as_dict() if fit else None
        bars.append(bar(cfg.experiment, f"H^{rr} slope + {rr}",
                        fit.slope + rr if fit else None, "abs<=", 0.1))
        if ratios and ok:
            for a, b in zip(rows[:-1], rows[1:]):
                rel = b[key] / a[key] * (a["k"] / b["k"]) ** rr - 1.0
                bars.append(bar(cfg.experiment,
                                f"H^{rr} ratio k={a['k']}->{b['k']} vs (k ratio)^{rr}, relative",
                                rel, "abs<=", 0.1))


def _exp_localization(cfg):
    rows, grids = _qm_rows(cfg, cfg.N[:1])
    fits, bars = {}, []
    ok = all(r["ok"] for r in rows)
    for a, b in zip(rows[:-1], rows[1:]):
        dec = log2_ratio(a["tube_mass_out"], b["tube_mass_out"]) if ok else None
        bars.append(bar(cfg.experiment, f"tube mass decay k={a['k']}->{b['k']} (log2)",
                        dec, ">=", cfg.tube_bar))
    for r in rows:
        if r["ok"]:
            bars.append(bar(cfg.experiment, f"mass outside tube at delta=0.49, k={r['k']}",
                            r["tube_mass_half"], "<=", 0.01))
    _hr_bars(cfg, rows, fits, bars, ratios=False)
    long = [(f"N={r['N']}", "h", r["h"], q, r.get(q, math.nan)) for r in rows
            for q in ("tube_mass_out", "hr_0", "hr_1", "hr_2")]
    return rows, QM_HEADER, bars, fits, long, grids


def rescale_checks(ks, n=4096, length=None):
    """Scaling identities of T_{h,0} on a Gaussian: list of (name, rel. error)."""
    from .quasimode import rescale, homogeneous_norm
    length = 2 * np.pi if length is None else length
    x = -length / 2 + (length / n) * np.arange(n)
    w = np.exp(-4.0 * x ** 2) * (1 + 0.3 * x)
    out = []
    for k in ks:
        h = 1.0 / k
        tw = rescale(w, h, 0.0, "forward", length)
        back = rescale(tw, h, 0.0, "inverse", length)
        for r in (0, 1):
            a = homogeneous_norm(tw, r, length)
            b = homogeneous_norm(w, r, length) * h ** (-r / 2.0)
            out.append((f"||T w||_H{r} = h^(-{r}/2) ||w||_H{r}, k={k}", abs(a / b - 1.0)))
        out.append((f"inverse(forward(w)) = w, k={k}",
                    float(np.max(np.abs(back - w)) / np.max(np.abs(w)))))
    return out


def _exp_norm(cfg):
    rows, grids = _qm_rows(cfg, cfg.N[:1])
    fits, bars = {}, []
    _hr_bars(cfg, rows, fits, bars, ratios=True)
    for label, err in rescale_checks(cfg.rescale_k):
        bars.append(bar(cfg.experiment, label, err, "<=", 1e-8))
    long = [(f"r={rr}", "h", r["h"], "hr_norm", r.get(f"hr_{rr}", math.nan))
            for rr in (0, 1, 2) for r in rows]
    return rows, QM_HEADER, bars, fits, long, grids


EVOLVE_HEADER = ["k", "h", "T", "records", "sup_dist", "sup_tube", "tube0",
                 "mass_drift", "n_theta", "n_x", "ok", "error"]


def propagator_checks(k, profile_name="paper", c2=0.5, t_final=None):
    """Linear phase exactness on A = 1 and the Strang self-convergence ratio."""
    from . import evolve as ev, quasimode as qm
    from .geometry import build_profile
    flat = build_profile("flat")
    g = qm.TorusGrid.auto(k)
    u = np.exp(1j * k * g.theta)[:, None] * np.ones(g.n_x)[None, :]
    t = 1.0 / k ** 2 if t_final is None else t_final
    n = 50
    out = ev.Propagator(g, flat, t / n, 2.0, 0).advance(u.copy(), n)
    lin = float(np.max(np.abs(out - np.exp(-1j * k * k * t) * u)))
    prof = build_profile(profile_name, c2=c2)
    sol = qm.solve_for(p=2.0, sigma=1, N=1, profile=prof, h=1.0 / k)
    u0 = qm.build_quasimode(sol, k, prof)
    ratio = ev.self_convergence(u0, ev.EvolveConfig(t_final=t, dt=t / 8), prof)
    return lin, ratio


def _exp_evolve(cfg):
    from . import evolve as ev
    if len(cfg.k_list) < 3:
        raise ValueError("evolve-horizon needs at least 3 k values")
    tasks = [(_evolve_point, (cfg, k)) for k in cfg.k_list]
    rows = fan_out(tasks, cfg.jobs)
    for k, r in zip(cfg.k_list, rows):
        r.setdefault("k", k)
        r.setdefault("h", 1.0 / k)
    name = cfg.experiment
    bars, fits = [], {}
    ok = all(r["ok"] for r in rows)
    if cfg.law != "zero":
        fit = ev.nu_fit(rows) if ok else None
        fits["nu"] = fit.as_dict() if fit else None
        bars.append(bar(name, "fitted nu in sup_t dist ~ h^nu", fit.slope if fit else None,
                        ">=" if cfg.law == "log" else ">", 0.4 if cfg.law == "log" else 0.0))
        traces = [(r["h"], ev.EvolutionTrace(**r["trace"])) for r in rows if r["ok"]]
        try:
            g = ev.gronwall_fit(traces, p=cfg.p) if ok else None
        except ValueError:
            g = None
        fits["gronwall"] = g
        bars.append(bar(name, "Gronwall-shape log misfit", g["misfit"] if g else None, "<=", 0.2))
        bars.append(bar(name, "Gronwall min(C1, C2, beta)",
                        min(g["C1"], g["C2"], g["beta"]) if g else None, ">", 0.0))
    else:
        bars.append(bar(name, "max distance under the zero law",
                        max(r["sup_dist"] for r in rows) if ok else None, "<=", 0.0))
    for r in rows:
        if r["ok"]:
            bars.append(bar(name, f"sup tube / initial tube, k={r['k']}",
                            r["sup_tube"] / r["tube0"] if r["tube0"] > 0 else 1.0, "<=", 10.0))
            bars.append(bar(name, f"mass drift, k={r['k']}", r["mass_drift"], "<=", 1e-9))
        else:
            bars.append(bar(name, f"sweep point k={r['k']}", None, "<=", 0.0))
    lin, ratio = propagator_checks(cfg.k_list[0], cfg.preset, cfg.c2)
    bars.append(bar(name, "linear single-mode phase error", lin, "<=", 1e-9))
    bars.append(bar(name, "Strang self-convergence ratio minus 4", ratio - 4.0, "abs<=", 1.0))
    long = []
    for r in rows:
        tr = r.get("trace")
        if not tr:
            continue
        for i, t in enumerate(tr["times"]):
            for q in ("mass", "tube_mass_out", "dist_to_app", "hkh_norm"):
                long.append((f"k={r['k']}", "t", t, q, tr[q][i]))
    grids = {str(r["k"]): [r["n_theta"], r["n_x"]] for r in rows if r["ok"]}
    return rows, EVOLVE_HEADER, bars, fits, long, grids


RUNNERS = {
    "oscillator-selftest": _exp_selftest,
    "fourier-decay": _exp_fourier,
    "residual-sweep": _exp_residual,
    "localization-sweep": _exp_localization,
    "norm-sweep": _exp_norm,
    "evolve-horizon": _exp_evolve,
}

LONG_HEADER = ["series", "x_name", "x", "y_name", "y"]


def run_experiment(cfg, root=None):
    """Run one experiment and write its files; returns (summary, output directory)."""
    rows, header, bars, fits, long, grids = RUNNERS[cfg.experiment](cfg)
    out = io.output_root(root) / cfg.target_dir
    out.mkdir(parents=True, exist_ok=True)
    io.write_csv(out / "points.csv", header, [[r.get(c, "") for c in header] for r in rows])
    io.write_csv(out / "long.csv", LONG_HEADER, long)
    if cfg.experiment == "evolve-horizon":
        from .evolve import EvolutionTrace
        for r in rows:
            if r.get("trace"):
                tr = EvolutionTrace(**r["trace"])
                io.write_csv(out / f"trace_k{r['k']}.csv", EvolutionTrace.COLUMNS, tr.rows())
    summary = {
        "experiment": cfg.experiment,
        "bars": bars,
        "fits": fits,
        "failed_points": [r["error"] for r in rows if not r.get("ok", True)],
        "all_passed": all(b["passed"] for b in bars),
    }
    io.write_json(out / "summary.json", summary)
    io.write_json(out / "manifest.json", {
        "config": config_record(cfg), "grids": grids, "build": io.build_metadata()})
    return summary, out


def collect_reports(root=None):
    """All summary.json files under the output root, sorted by path."""
    import json
    base = io.output_root(root)
    out = []
    for path in sorted(base.glob("*/summary.json")):
        with open(path) as fh:
            out.append((path.parent.name, json.load(fh)))
    return out


def format_bar(b):
    status = "PASS" if b["passed"] else "FAIL"
    m = b["measured"]
    ms = "n/a" if m is None else f"{m:.6g}"
    return f"{status}  [{b['experiment']}] {b['name']}: {ms} {b['op']} {b['bar']:g}"
