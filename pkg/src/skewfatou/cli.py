"""Command line: ``skewfatou <subcommand> [options]``.

Options may also come from a TOML file (``--config``); flags win over the
file, and the file wins over built-in defaults.  Top-level keys apply to
every subcommand, a table named after the subcommand to that one only.
Exit status is 1 for invalid input and 2 for numerical failures.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import Manifest, escape_image, stream, write_csv, write_png
from .cache import cache_get, cache_key, cache_put
from .errors import NumericalFailure, ValidationError
from .poly import SkewProduct, format_poly, parse_complex

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

DEFAULTS = {
    "map": "z^2-2+w",
    "lambda": "0.25",
    "out": None,
    "out_dir": ".",
    "threads": None,
    "seed": 42,
    "budget": 200,
    # sublevel-areas
    "grid": 2048,
    "cap": 60,
    "mmax": 30,
    "png": None,
    "no_cache": False,
    # koenigs / linearize / tracking
    "critical": 0,
    "order": 30,
    "eps": 0.1,
    "nmax": None,
    "w0": "0.05+0.05i",
    "u_radius": 0.05,
    "mrange": 40,
    # equidistribution
    "mu": "4",
    "y": "0.3",
    "n": 100000,
    "rects": 4,
    # disk-bounds
    "trials": 500,
    "dmax": 6,
}

NMAX = {"linearize": 30, "track-critical": 2000, "resonant": 60}
OUTS = {
    "sublevel-areas": "areas.csv",
    "koenigs": "koenigs.csv",
    "linearize": "phi.csv",
    "track-critical": "sn.csv",
    "resonant": "grid.csv",
    "equidistribution": "equi.csv",
    "disk-bounds": "bounds.csv",
}


class StageError(Exception):
    def __init__(self, stage, err):
        super().__init__(f"{stage}: {err}")
        self.stage, self.err = stage, err


class Run:
    """Stage timer; failures are re-raised tagged with the stage name."""

    def __init__(self, manifest, quiet=False):
        self.manifest = manifest
        self.quiet = quiet

    def __call__(self, name, fn, *args, **kw):
        t0 = time.perf_counter()
        try:
            out = fn(*args, **kw)
        except (ValidationError, NumericalFailure) as e:
            raise StageError(name, e) from e
        self.manifest.stage(name, time.perf_counter() - t0)
        return out

    def say(self, *msg):
        if not self.quiet:
            print(*msg)


# ---------------------------------------------------------------------------
# shared setup


def _skew(cfg):
    return SkewProduct.parse(cfg["map"], cfg["lambda"])


def _certified(run, cfg, F=None):
    from .dynamics import certify_subhyperbolic

    F = run("parse", _skew, cfg) if F is None else F
    cert = run("certify", certify_subhyperbolic, F.p, budget=int(cfg["budget"]))
    return F, cert


def _branch(run, cfg):
    from .dynamics import build_escape_region
    from .linearization import detect_branch, detect_order_k

    F, cert = _certified(run, cfg)
    region = run("escape-region", build_escape_region, F.p, cert, F, seed=int(cfg["seed"]))
    br = run("branch", detect_branch, F, cert, int(cfg["critical"]), eps=float(cfg["eps"]))
    k = run("order-k", detect_order_k, br, F)
    return F, cert, region, br.with_k(k)


def _out(cfg, cmd):
    out = cfg["out"] or OUTS[cmd]
    return Path(cfg["out_dir"]) / out if not os.path.isabs(out) else Path(out)


# ---------------------------------------------------------------------------
# subcommands


def cmd_classify(run, cfg):
    """Certify the base polynomial and print the critical-point verdicts."""
    F, cert = _certified(run, cfg)
    recs = [r.as_dict() for r in cert.critical_records]
    run.say(f"map        {F.f}")
    run.say(f"base       p(z) = {format_poly(F.p)}")
    run.say(f"R          {cert.R:.6g}")
    run.say(f"{'critical point':>28}  {'verdict':<26} {'r':>3}  cycle / multiplier")
    for rec in cert.critical_records:
        c = rec.critical_point
        cyc = "-" if rec.cycle is None else (
            "{" + ", ".join(f"{z:.6g}" for z in rec.cycle.points) + f"}}  mult {rec.cycle.multiplier:.6g}")
        run.say(f"{c.real:>13.6g}{c.imag:+13.6g}i  {rec.verdict:<26} {rec.preperiod:>3}  {cyc}")
    print(json.dumps(recs))
    return []


def cmd_sublevel_areas(run, cfg):
    """Raster escape times and tabulate the areas of V_m."""
    from .dynamics import region_from_polynomial
    from .sublevel import GridRaster, area_table, default_bounds, rasterize

    F = run("parse", _skew, cfg)
    region = run("escape-region", region_from_polynomial, F.p)
    res, cap, mmax = int(cfg["grid"]), int(cfg["cap"]), int(cfg["mmax"])
    if mmax > cap:
        raise StageError("config", ValidationError(f"mmax {mmax} exceeds cap {cap}"))
    bounds = default_bounds(region.R)
    key = cache_key(str(F.p), bounds, res, cap)
    values = None if cfg["no_cache"] else cache_get(key)
    if values is not None and values.shape == (res, res):
        raster = GridRaster(bounds, res, values, cap)
        run.manifest.stage("raster (cached)", 0.0)
    else:
        raster = run("raster", rasterize, F.p, region, bounds, res, cap, threads=cfg["threads"], julia=False)
        if not cfg["no_cache"]:
            cache_put(key, raster.values)
    rows = area_table(raster, range(mmax + 1))
    out = write_csv(_out(cfg, "sublevel-areas"), ["m", "area_sq_units", "pixel_count"], rows)
    outs = [out]
    if cfg["png"]:
        png = Path(cfg["png"])
        png = png if png.is_absolute() else Path(cfg["out_dir"]) / png
        outs.append(write_png(png, escape_image(raster.values)))
    run.say(f"wrote {len(rows)} rows to {out}")
    return outs


def cmd_koenigs(run, cfg):
    """Koenigs series at the landing cycle of a critical point."""
    from .linearization import koenigs, koenigs_residual

    F, cert = _certified(run, cfg)
    recs = cert.repelling_records()
    i = int(cfg["critical"])
    if not 0 <= i < len(recs):
        raise StageError("koenigs", ValidationError(f"no repelling landing for critical index {i}"))
    cyc = recs[i].cycle
    chart = run("koenigs", koenigs, F.p, cyc, int(cfg["order"]))
    th = np.exp(2j * np.pi * np.arange(64) / 64)
    res = koenigs_residual(F.p, chart, chart.fixed_point + 0.5 * chart.radius * th)
    rows = [(k, c.real, c.imag) for k, c in enumerate(chart.series)]
    out = write_csv(_out(cfg, "koenigs"), ["k", "coef_re", "coef_im"], rows)
    run.say(f"fixed point {chart.fixed_point:.12g}, multiplier {chart.mu:.12g}, radius {chart.radius:.6g}")
    run.say(f"max residual on the half-radius circle {float(np.max(res)):.3e}")
    return [out]


def cmd_linearize(run, cfg):
    """Stages of the fiberwise linearization with Cauchy gaps and residuals."""
    from .linearization import functional_equation_residual, phi_stage

    F, _, _, br = _branch(run, cfg)
    nmax = int(cfg["nmax"] or NMAX["linearize"])
    rows = []
    for n in range(1, nmax + 1):
        ph = run(f"stage {n}", phi_stage, br, F, n)
        resid = run(f"residual {n}", functional_equation_residual, ph, F)
        for t, z in zip(ph.t, ph.values):
            rows.append((n, t.real, t.imag, z.real, z.imag, ph.cauchy_gap, resid))
    out = write_csv(_out(cfg, "linearize"),
                    ["n", "t_re", "t_im", "phi_re", "phi_im", "cauchy_gap", "residual"], rows)
    run.say(f"l = {br.l}, k = {br.k}, mu = {br.mu:.12g}; wrote {out}")
    return [out]


def cmd_track_critical(run, cfg):
    """Count the non-escaping critical orbits #S_n in one fiber."""
    from .tracker import count_non_escaped, postcritical_disks

    F, cert, region, br = _branch(run, cfg)
    w0 = parse_complex(cfg["w0"])
    U = postcritical_disks(cert, float(cfg["u_radius"]))
    nmax = int(cfg["nmax"] or NMAX["track-critical"])
    res = run("count", count_non_escaped, F, br, region, w0, U, nmax, cert=cert)
    out = write_csv(_out(cfg, "track-critical"), ["n", "count_Sn"], res.counts)
    worst = max(c / math.log(n + 2) for n, c in res.counts)
    run.say(f"max #S_n = {max(c for _, c in res.counts)}, max #S_n/log(n+2) = {worst:.4g}; wrote {out}")
    return [out]


def cmd_resonant(run, cfg):
    """Resonant table a_{n,m} with its column gaps."""
    from .tracker import resonant_grid

    F, _, region, br = _branch(run, cfg)
    w0 = parse_complex(cfg["w0"])
    nmax = int(cfg["nmax"] or NMAX["resonant"])
    mr = int(cfg["mrange"])
    g = run("grid", resonant_grid, F, br, w0, nmax, mr, region)
    rows = []
    for n in range(1, nmax + 1):
        for m in range(-min(n - 1, mr), mr + 1):
            a, b = g.z[n + m, n], g.z[n - 1 + m, n - 1]
            if not (np.isfinite(a) and np.isfinite(b)):
                continue
            wm, we = g.second_coordinate(n, m)
            w = complex(np.ldexp(wm.real[0], int(np.clip(we[0], -4000, 4000)))
                        + 1j * np.ldexp(wm.imag[0], int(np.clip(we[0], -4000, 4000))))
            rows.append((n, m, a.real, a.imag, w.real, w.imag, float(abs(a - b))))
    out = write_csv(_out(cfg, "resonant"), ["n", "m", "z_re", "z_im", "w_re", "w_im", "gap"], rows)
    run.say(f"identity F(a[n,m]) = a[n,m+1] exact: {g.identity_holds()}; wrote {out}")
    return [out]


def cmd_equidistribution(run, cfg):
    """Orbit closure on the torus and equidistribution gaps."""
    from .errors import ClosureMismatch
    from .torus import TorusLattice, embed, equidistribution_gap, grid_rects, orbit_closure

    lat = run("lattice", TorusLattice.from_mu, parse_complex(cfg["mu"]))
    y = run("embed", embed, lat, parse_complex(cfg["y"]))
    cl = orbit_closure(lat, y)
    n_top = int(cfg["n"])
    ns = sorted({min(10 ** k, n_top) for k in range(1, 12) if 10 ** (k - 1) < n_top} | {n_top})
    rects = grid_rects(int(cfg["rects"]))
    rows = []
    for n in ns:
        gaps = []
        for r in rects:
            try:
                gaps.append(equidistribution_gap(lat, y, [r], 0, n, closure=cl))
            except ClosureMismatch:
                continue
        if gaps:
            rows.append((n, float(np.mean(gaps))))
    out = write_csv(_out(cfg, "equidistribution"), ["n", "gap"], rows)
    run.say(f"closure {cl}; wrote {out}")
    return [out]


def disk_bound_rows(trials, dmax, seed):
    """The three verification sweeps as CSV rows (deterministic in ``seed``)."""
    from .hyperbolic import (BlaschkeMap, HypDisk, admissible_random, sweep_area_target,
                             verify_area_bound, verify_critical_proximity, verify_diameter_bound)

    rows = []
    rng = stream(seed, "diameter")
    for i in range(max(1, trials // 5)):
        d = int(rng.integers(1, min(dmax, 5) + 1))
        r = (0.1, 0.5, 0.9)[i % 3]
        b = BlaschkeMap.random(rng, d)
        m, bd, ok = verify_diameter_bound(b, r)
        rows.append((i, "diameter", d, r, m, bd, ok))
    rng = stream(seed, "critical")
    for i in range(trials):
        d = int(rng.integers(1, dmax + 1))
        delta = float(rng.uniform(0.01, 0.24))
        b = admissible_random(rng, d, delta)
        m, bd, ok = verify_critical_proximity(b, delta)
        rows.append((i, "critical", d, delta, m, bd, ok))
    rng = stream(seed, "area")
    for i in range(max(1, trials // 5)):
        d = int(rng.integers(1, min(dmax, 4) + 1))
        A = sweep_area_target(d)
        c = 0.5 * math.sqrt(rng.random()) * complex(math.cos(2 * math.pi * rng.random()),
                                                     math.sin(2 * math.pi * rng.random()))
        b = BlaschkeMap.random(rng, d)
        m, bd, ok = verify_area_bound(b, HypDisk.with_area(c, A))
        rows.append((i, "area", d, A, m, bd, ok))
    return rows


def cmd_disk_bounds(run, cfg):
    """Random sweeps of the Blaschke diameter, proximity and area bounds."""
    rows = run("sweeps", disk_bound_rows, int(cfg["trials"]), int(cfg["dmax"]), int(cfg["seed"]))
    out = write_csv(_out(cfg, "disk-bounds"),
                    ["trial", "kind", "d", "param", "measured", "bound", "pass"], rows)
    for kind in ("diameter", "critical", "area"):
        sel = [r for r in rows if r[1] == kind]
        run.say(f"{kind:<9} {sum(r[-1] for r in sel)}/{len(sel)} passed")
    return [out]


def cmd_demo(run, cfg):
    """The default map end to end, with reduced sizes."""
    outs = []
    base = dict(cfg)
    plan = [
        ("classify", {}),
        ("sublevel-areas", {"grid": 1024, "png": "vm.png"}),
        ("koenigs", {}),
        ("linearize", {"nmax": 20}),
        ("track-critical", {"nmax": 400}),
        ("resonant", {}),
        ("equidistribution", {"mu": "4", "y": "0.3", "n": 10000}),
        ("disk-bounds", {"trials": 50}),
    ]
    for name, over in plan:
        sub = dict(base, **over)
        sub["out"] = None
        run.say(f"== {name}")
        outs += COMMANDS[name](run, sub) or []
    return outs


COMMANDS = {
    "classify": cmd_classify,
    "sublevel-areas": cmd_sublevel_areas,
    "koenigs": cmd_koenigs,
    "linearize": cmd_linearize,
    "track-critical": cmd_track_critical,
    "resonant": cmd_resonant,
    "equidistribution": cmd_equidistribution,
    "disk-bounds": cmd_disk_bounds,
    "demo": cmd_demo,
}

# option name -> (type, help)
OPTIONS = {
    "map": (str, "map f(z, w) as a polynomial string"),
    "lambda": (str, "fiber contraction lambda (complex)"),
    "out": (str, "output CSV path"),
    "out_dir": (str, "directory for outputs and manifest.json"),
    "threads": (int, "worker threads for rasters"),
    "seed": (int, "64-bit root seed"),
    "budget": (int, "certification iteration budget"),
    "grid": (int, "raster resolution"),
    "cap": (int, "escape-time cap"),
    "mmax": (int, "largest m in the area table"),
    "png": (str, "escape-time PNG path"),
    "critical": (int, "index of the critical point"),
    "order": (int, "Koenigs series order"),
    "eps": (float, "branch radius eps"),
    "nmax": (int, "largest n"),
    "w0": (str, "fiber parameter w0 (complex)"),
    "u_radius": (float, "radius of the disks covering the postcritical set"),
    "mrange": (int, "largest |m| in the resonant table"),
    "mu": (str, "multiplier mu (complex)"),
    "y": (str, "point of C* embedded in the torus"),
    "n": (int, "orbit length"),
    "rects": (int, "k for the k x k rectangle grid"),
    "trials": (int, "trials in the critical sweep (diameter and area use trials/5)"),
    "dmax": (int, "largest degree"),
}

USES = {
    "classify": ["map", "lambda", "budget"],
    "sublevel-areas": ["map", "lambda", "grid", "cap", "mmax", "png", "threads"],
    "koenigs": ["map", "lambda", "budget", "critical", "order"],
    "linearize": ["map", "lambda", "budget", "critical", "eps", "nmax"],
    "track-critical": ["map", "lambda", "budget", "critical", "eps", "nmax", "w0", "u_radius"],
    "resonant": ["map", "lambda", "budget", "critical", "eps", "nmax", "w0", "mrange"],
    "equidistribution": ["mu", "y", "n", "rects"],
    "disk-bounds": ["trials", "dmax"],
    "demo": ["map", "lambda", "threads"],
}


def build_parser():
    ap = argparse.ArgumentParser(prog="skewfatou", description="Numerical companion for polynomial skew products.")
    ap.add_argument("--version", action="version", version=f"skewfatou {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, keys in USES.items():
        sp = sub.add_parser(name, argument_default=argparse.SUPPRESS, help=(COMMANDS[name].__doc__ or "").strip() or None)
        sp.add_argument("--config", help="TOML file with option defaults")
        sp.add_argument("--quiet", action="store_true", help="no progress output")
        for k in ["out", "out_dir", "seed"] + keys:
            typ, hlp = OPTIONS[k]
            sp.add_argument("--" + k.replace("_", "-"), dest=k, type=typ, help=hlp)
        if name == "sublevel-areas":
            sp.add_argument("--no-cache", dest="no_cache", action="store_true", help="bypass the raster cache")
    return ap


def resolve_config(command, args):
    """Defaults, then the TOML file, then flags."""
    cfg = dict(DEFAULTS)
    path = args.pop("config", None)
    if path:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        top = {k.replace("-", "_"): v for k, v in data.items() if not isinstance(v, dict)}
        own = {k.replace("-", "_"): v for k, v in data.get(command, {}).items()}
        for k, v in {**top, **own}.items():
            if k not in DEFAULTS:
                raise ValidationError(f"unknown config key {k!r}")
            cfg[k] = v
    cfg.update(args)
    return cfg


def main(argv=None):
    ap = build_parser()
    ns = vars(ap.parse_args(argv))
    command = ns.pop("command")
    quiet = ns.pop("quiet", False)
    try:
        cfg = resolve_config(command, ns)
    except (ValidationError, OSError, tomllib.TOMLDecodeError) as e:
        print(f"skewfatou: config: {e}", file=sys.stderr)
        return 1
    manifest = Manifest(command, cfg)
    run = Run(manifest, quiet)
    try:
        outs = COMMANDS[command](run, cfg)
    except StageError as e:
        print(f"skewfatou: {e.stage}: {type(e.err).__name__}: {e.err}", file=sys.stderr)
        return 1 if isinstance(e.err, ValidationError) else 2
    except ValidationError as e:
        print(f"skewfatou: {command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except NumericalFailure as e:
        print(f"skewfatou: {command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    for p in outs:
        manifest.output(p)
    if outs:
        manifest.write(cfg["out_dir"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
