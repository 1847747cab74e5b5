"""Command-line driver: ``fingeo <subcommand> --scenario <path> [options]``.

Subcommands
    inspect         full tensor payloads at the scenario's probes
    validate        invariant suite; nonzero exit on any failure
    geodesic        integrate the scenario's geodesics to CSV
    maxwell-sweep   Maxwell residuals along the section at the probes
    berwald-check   Berwald test (and divergence probe with --order 3)

Every subcommand writes ``report.json`` (deterministic) and ``timing.json``
(wall-clock, not deterministic) into ``--out``.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import curvature as cv
from . import invariants as inv
from . import maxwell as mx
from . import report as rp
from . import spray as sp
from .adnum import DomainError
from .exprlang import ExprError
from .scenario import ScenarioError, load_scenario, parse_scenario

__all__ = ["main", "build_parser", "run_inspect", "run_validate", "run_geodesic",
           "run_maxwell_sweep", "run_berwald_check"]

TRAJECTORY_HEADER = ["tau", "x0", "x1", "x2", "x3", "y0", "y1", "y2", "y3", "L"]
SWEEP_HEADER = ["x0", "x1", "x2", "x3", "res0", "res1", "res2", "res3", "bianchi_max", "gauge_max"]


# ---------------------------------------------------------------------------
# per-probe jobs (top-level so worker processes can pickle them)
# ---------------------------------------------------------------------------

_CACHE = {}


def _scenario_from(doc, path):
    key = (path, rp.dumps(doc))
    if key not in _CACHE:
        _CACHE[key] = parse_scenario(doc, path)
    return _CACHE[key]


def _skip(exc):
    return {"status": "domain-skip", "error": f"{type(exc).__name__}: {exc}"}


def _job(task):
    kind, doc, path, x, y, level, section, toggles = task
    scn = _scenario_from(doc, path)
    section = mx._section(section, scn.background) if section else scn.section
    toggles = mx.Toggles.from_names(toggles) if toggles is not None else scn.toggles
    t0 = time.perf_counter()
    try:
        out = _KINDS[kind](scn, np.asarray(x), np.asarray(y), level, section, toggles)
    except DomainError as exc:
        out = _skip(exc)
    return out, time.perf_counter() - t0


def _inspect_probe(scn, x, y, level, section, toggles):
    return rp.probe_payload(scn, x, y, level, section, toggles)


def _validate_probe(scn, x, y, level, section, toggles):
    scn = _with(scn, section, toggles)
    rows = inv.probe_checks(scn, x, y, level)
    return {"status": "ok", "checks": [[r.id, r.measured, r.tolerance, r.passed] for r in rows]}


def _sweep_probe(scn, x, y, level, section, toggles):
    r = mx.maxwell_residual(scn.background, section, x, toggles)
    return {"status": "ok", "x": rp._plain(x),
            "source_eq": rp._plain(r.source_eq), "bianchi_max": r.bianchi_max,
            "bianchi_upper_index": r.bianchi_upper,
            "gauge_max": float(np.abs(r.gauge).max()),
            "berwald_eq": None if r.berwald_eq is None else rp._plain(r.berwald_eq)}


def _berwald_probe(scn, x, y, level, section, toggles):
    bg = scn.background
    br = sp.berwald_report(bg, (x, y))
    out = {"status": "ok", "x": rp._plain(x), "y": rp._plain(y),
           "is_berwald": br.is_berwald,
           "B_cov": rp.tensor(br.B_cov, "B[j][k] = B_{j|k}", "e dA - b gamma~"),
           "deviation": rp.tensor(br.deviation, "D[mu] = calB^mu", "corrected alpha/m^2 weight"),
           "deviation_literal": rp.tensor(br.deviation_literal, "D[mu] = calB^mu", "m^2 alpha weight"),
           "christoffel_gap": br.christoffel_gap,
           "F_reconstructed_max": float(np.abs(br.F_reconstructed).max())}
    if level >= 2 and br.is_berwald:
        res = mx.berwald_maxwell_residual(bg, section, x, toggles)
        out["berwald_maxwell"] = rp.tensor(res, "r[mu]", "geometric-field-only equation minus J")
    if level >= 3:
        out["divergence"] = rp.divergence_payload(bg, x, y)
    return out


_KINDS = {"inspect": _inspect_probe, "validate": _validate_probe,
          "sweep": _sweep_probe, "berwald": _berwald_probe}


def _with(scn, section, toggles):
    if section is scn.section and toggles is scn.toggles:
        return scn
    from dataclasses import replace
    return replace(scn, section=section, toggles=toggles)


def _run_probes(kind, scn, points, level, section=None, toggles=None, jobs=1):
    """Evaluate ``kind`` at every probe; results keep probe order."""
    tasks = [(kind, scn.raw, scn.path, rp._plain(x), rp._plain(y), level, section, toggles)
             for x, y in points]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_job, tasks))
    else:
        results = [_job(t) for t in tasks]
    return [r for r, _ in results], [t for _, t in results]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _header(scn, command, args):
    return {
        "tool": rp.tool_info(),
        "command": command,
        "options": {"probes": args.get("probes"), "seed": args.get("seed"),
                    "order": args.get("order"), "section": args.get("section"),
                    "toggles": args.get("toggles")},
        "scenario": scn.to_dict(),
        "conventions": {
            "signature": "(+,-,-,-)",
            "index_order": "derivative index last",
            "rho": "J^0 (contravariant)",
            "stress_energy_sign": "trace-free (+1/4 g F:F)",
        },
    }


def _points(scn, probes, seed):
    return [(np.asarray(x, float), np.asarray(y, float)) for x, y in scn.probe_points(probes, seed)]


def _timing(times, total):
    t = np.asarray(times, dtype=float)
    return {"total_s": total, "probes": len(t),
            "per_probe_mean_s": float(t.mean()) if len(t) else 0.0,
            "per_probe_max_s": float(t.max()) if len(t) else 0.0}


def run_inspect(scn, probes=None, seed=None, order=2, section=None, toggles=None, jobs=1):
    """Payload report over the scenario's probes."""
    t0 = time.perf_counter()
    pts = _points(scn, probes, seed)
    payloads, times = _run_probes("inspect", scn, pts, order, section, toggles, jobs)
    rep = _header(scn, "inspect", dict(probes=probes, seed=seed, order=order, section=section,
                                       toggles=toggles))
    rep["probes"] = payloads
    rep["skipped"] = sum(p["status"] != "ok" for p in payloads)
    return rep, _timing(times, time.perf_counter() - t0)


def run_validate(scn, probes=None, seed=None, order=2, section=None, toggles=None, jobs=1):
    """Invariant table over the scenario's probes; ``report["passed"]`` is the verdict."""
    t0 = time.perf_counter()
    pts = _points(scn, probes, seed)
    results, times = _run_probes("validate", scn, pts, order, section, toggles, jobs)
    rows, skips = [], []
    for (x, y), r in zip(pts, results):
        if r["status"] != "ok":
            skips.append({"x": rp._plain(x), "y": rp._plain(y), "error": r["error"]})
            continue
        rows += [inv.Check(*c) for c in r["checks"]]
    table = inv.summarize(rows)
    rep = _header(scn, "validate", dict(probes=probes, seed=seed, order=order, section=section,
                                        toggles=toggles))
    rep["invariants"] = [{"id": c.id, "measured": c.measured, "tolerance": c.tolerance,
                          "passed": c.passed} for c in table]
    rep["domain_skips"] = skips
    rep["evaluated_probes"] = len(pts) - len(skips)
    rep["passed"] = all(c.passed for c in table)
    return rep, _timing(times, time.perf_counter() - t0)


def run_geodesic(scn, out_dir=None):
    """Integrate every geodesic of the scenario; CSV per trajectory."""
    t0 = time.perf_counter()
    geo = scn.geodesics
    rep = _header(scn, "geodesic", {})
    rep["trajectories"] = []
    times = []
    if geo is None:
        rep["message"] = "scenario has no geodesics block"
        return rep, _timing(times, 0.0), []
    trajs = []
    for k, (x0, y0) in enumerate(geo.initial):
        t1 = time.perf_counter()
        tr = sp.integrate_geodesic(scn.background, (x0, y0), geo.tau_end, geo.rtol, geo.atol)
        times.append(time.perf_counter() - t1)
        trajs.append(tr)
        name = f"trajectory_{k}.csv"
        if out_dir is not None:
            rows = [[t, *x, *y, L] for t, x, y, L in tr.samples]
            rp.write_csv(Path(out_dir) / name, TRAJECTORY_HEADER, rows)
        rep["trajectories"].append({
            "file": name, "x0": rp._plain(x0), "y0": rp._plain(y0), "tau_end": geo.tau_end,
            "samples": len(tr.tau), "accepted": tr.accepted, "rejected": tr.rejected,
            "conservation_drift": tr.conservation_drift, "domain_exit": tr.domain_exit,
            "message": tr.message,
        })
    return rep, _timing(times, time.perf_counter() - t0), trajs


def run_maxwell_sweep(scn, probes=None, seed=None, section=None, toggles=None, jobs=1, out_dir=None):
    """Maxwell residual at each probe's x along the section."""
    t0 = time.perf_counter()
    pts = _points(scn, probes, seed)
    results, times = _run_probes("sweep", scn, pts, 2, section, toggles, jobs)
    rep = _header(scn, "maxwell-sweep", dict(probes=probes, seed=seed, section=section,
                                             toggles=toggles))
    rep["residual_index"] = "r[mu]: sourced equation minus J along the section"
    rep["probes"] = results
    rows = [[*r["x"], *r["source_eq"], r["bianchi_max"], r["gauge_max"]]
            for r in results if r["status"] == "ok"]
    rep["file"] = "maxwell_sweep.csv"
    if rows:
        res = np.array([r[4:8] for r in rows])
        rep["max_abs_residual"] = float(np.abs(res).max())
        rep["max_bianchi"] = float(max(r[8] for r in rows))
    if out_dir is not None:
        rp.write_csv(Path(out_dir) / "maxwell_sweep.csv", SWEEP_HEADER, rows)
    return rep, _timing(times, time.perf_counter() - t0)


def run_berwald_check(scn, probes=None, seed=None, order=2, section=None, toggles=None, jobs=1):
    """Berwald test at each probe plus the Berwald-form Maxwell residual."""
    t0 = time.perf_counter()
    pts = _points(scn, probes, seed)
    results, times = _run_probes("berwald", scn, pts, order, section, toggles, jobs)
    rep = _header(scn, "berwald-check", dict(probes=probes, seed=seed, order=order,
                                             section=section, toggles=toggles))
    ok = [r for r in results if r["status"] == "ok"]
    rep["is_berwald"] = bool(ok) and all(r["is_berwald"] for r in ok)
    rep["probes"] = results
    return rep, _timing(times, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _order(text):
    v = int(text)
    if v not in inv.LEVELS:
        raise argparse.ArgumentTypeError("order must be 1, 2 or 3")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="fingeo", description="Randers-Finsler geometry toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("inspect", "tensor payloads at the probes"),
                           ("validate", "run the invariant suite"),
                           ("geodesic", "integrate the scenario's geodesics"),
                           ("maxwell-sweep", "Maxwell residuals at the probes"),
                           ("berwald-check", "Berwald test at the probes")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--scenario", required=True, help="scenario JSON file or shipped name")
        s.add_argument("--out", default=".", help="output directory (created if missing)")
        s.add_argument("--probes", type=int, default=None, help="number of probes")
        s.add_argument("--seed", type=_u64, default=None, help="probe sampling seed")
        s.add_argument("--order", type=_order, default=2,
                       help="pipeline depth: 1 pointwise, 2 curvature and Maxwell, 3 divergence")
        s.add_argument("--section", default=None, help="'const:v0,v1,v2,v3' or 'expr:e0;e1;e2;e3'")
        s.add_argument("--toggle", action="append", default=None, dest="toggles",
                       help="drop_beta_over_L | connection_corrected_maxwell | no_geometric_terms")
        s.add_argument("--jobs", type=int, default=1, help="worker processes for probe evaluation")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        scn = load_scenario(args.scenario)
        if args.section:
            mx._section(args.section, scn.background)
        if args.toggles is not None:
            mx.Toggles.from_names(args.toggles)
    except (FileNotFoundError, ScenarioError, ExprError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kw = dict(probes=args.probes, seed=args.seed, section=args.section,
              toggles=args.toggles, jobs=max(1, args.jobs))
    status = 0
    if args.command == "inspect":
        rep, timing = run_inspect(scn, order=args.order, **kw)
        print(f"{scn.name}: {len(rep['probes'])} probes, {rep['skipped']} domain-skips")
    elif args.command == "validate":
        rep, timing = run_validate(scn, order=args.order, **kw)
        width = max((len(r["id"]) for r in rep["invariants"]), default=10)
        for r in rep["invariants"]:
            flag = "PASS" if r["passed"] else "FAIL"
            print(f"{flag}  {r['id']:<{width}}  {r['measured']:.3e}  tol {r['tolerance']:.1e}")
        for s in rep["domain_skips"]:
            print(f"SKIP  x={s['x']} y={s['y']}: {s['error']}")
        status = 0 if rep["passed"] else 1
    elif args.command == "geodesic":
        rep, timing, _ = run_geodesic(scn, out)
        for t in rep["trajectories"]:
            tag = " (domain exit)" if t["domain_exit"] else ""
            print(f"{t['file']}: {t['samples']} samples, drift {t['conservation_drift']:.2e}{tag}")
    elif args.command == "maxwell-sweep":
        rep, timing = run_maxwell_sweep(scn, out_dir=out, **kw)
        print(f"max |residual| {rep.get('max_abs_residual', float('nan')):.3e}, "
              f"max Bianchi {rep.get('max_bianchi', float('nan')):.3e}")
    else:
        rep, timing = run_berwald_check(scn, order=args.order, **kw)
        print(f"{scn.name}: is_berwald = {rep['is_berwald']}")
    rp.write_json(out / "report.json", rep)
    rp.write_json(out / "timing.json", timing)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
