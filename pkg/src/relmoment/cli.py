"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 admissibility failure, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AdmissibilityError, ConvergenceError

EXIT_OK, EXIT_USAGE, EXIT_ADMISSIBILITY, EXIT_NUMERIC = 0, 2, 3, 4
CSV_FIELDS = ("x", "rho", "u", "theta", "p0", "pi", "n1")
SHOCK_TUBE_SETUP = {"cfl": 0.9, "t_end": 0.3, "domain": [-1.5, 1.5], "wl": [7.0, 0.0, 1.0], "wr": [1.0, 0.0, 1.0]}


class UsageError(Exception):
    pass


def _grid(spec: str) -> np.ndarray:
    try:
        lo, hi, n = spec.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError as exc:
        raise UsageError(f"grid must look like a:b:n, got {spec!r}") from exc


def _floats(spec: str) -> list[float]:
    try:
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {spec!r}") from exc


def _open_out(path):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", newline="")


def _fmt(v) -> str:
    return repr(float(v))


# --- table and analysis commands ---------------------------------------------------

def cmd_gen_tables(args) -> int:
    from .orthopoly import build_tables

    tab = build_tables(args.zeta, args.nmax)
    with _open_out(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(["family", "n", "a", "b", "c", "p", "q", "r", "pt", "qt", "rt"])
        for ell in range(2):
            for n in range(args.nmax + 1):
                w.writerow([ell, n] + [_fmt(v) for v in (
                    tab.a[ell][n], tab.b[ell][n], tab.c[ell][n],
                    tab.p[n], tab.q[n], tab.r[n], tab.pt[n], tab.qt[n], tab.rt[n])])
    if args.out not in (None, "-"):
        zpath = Path(args.out)
        zpath = zpath.with_name(zpath.stem + "_zeros" + (zpath.suffix or ".csv"))
        with open(zpath, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["family", "n", "index", "zero"])
            for ell in range(2):
                for n in range(1, args.nmax + 2):
                    for i, x in enumerate(tab.zeros[ell][n], start=1):
                        w.writerow([ell, n, i, _fmt(x)])
    return EXIT_OK


def _state_from_args(m: int, spec: str):
    from .hme_solver import _state

    vals = _floats(spec)
    if len(vals) < 3 or len(vals) > 2 * m + 1:
        raise UsageError(f"state needs 3..{2 * m + 1} entries (rho,u,theta,...)")
    return _state(m, vals)


def cmd_analyze(args) -> int:
    from .analysis import char_field_survey, hyperbolicity_report

    if args.state:
        state = _state_from_args(args.m, args.state)
    elif args.zeta is not None:
        vals = [args.rho, args.u, 1.0 / args.zeta]
        if args.m >= 2:
            vals += [args.pi, args.n1]
        elif args.pi or args.n1:
            raise UsageError("--pi and --n1 need m >= 2")
        state = _state_from_args(args.m, ",".join(map(repr, vals)))
    else:
        raise UsageError("give --zeta or --state")
    rep = hyperbolicity_report(state)
    ghat = char_field_survey(args.m, [state.zeta])[0]
    w = csv.writer(sys.stdout)
    w.writerow(["quantity", "index", "value"])
    for i, (lam, pred) in enumerate(zip(rep.eigenvalues, rep.predicted)):
        w.writerow(["eigenvalue", i - args.m, _fmt(lam)])
        w.writerow(["predicted", i - args.m, _fmt(pred)])
    for key in ("spectral_radius", "det_d", "eigvec_cond", "min_gap"):
        w.writerow([key, "", _fmt(getattr(rep, key))])
    w.writerow(["ghat", 1, _fmt(ghat)])
    w.writerow(["hyperbolic", "", int(rep.passed)])
    w.writerow(["ill_conditioned", "", int(rep.ill_conditioned)])
    return EXIT_OK if rep.passed else EXIT_NUMERIC


def cmd_stability(args) -> int:
    from .analysis import dispersion_spectrum
    from .moment_model import MomentState

    w0 = MomentState(args.m, args.rho, args.u, 1.0 / args.zeta)
    with _open_out(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(["k", "index", "re", "im"])
        for k in _grid(args.k_grid):
            res = dispersion_spectrum(w0, float(k), args.tau)
            for i, om in enumerate(res.omegas):
                w.writerow([_fmt(k), i, _fmt(om.real), _fmt(om.imag)])
    return EXIT_OK


def cmd_char_fields(args) -> int:
    from .analysis import char_field_survey

    zetas = _grid(args.zeta_grid)
    vals = char_field_survey(args.m, zetas, args.field)
    with _open_out(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(["zeta", "ghat"])
        for z, g in zip(zetas, vals):
            w.writerow([_fmt(z), _fmt(g)])
    return EXIT_OK


# --- runs ---------------------------------------------------------------------------

def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    return raw


def write_profile(path: Path, cols: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for row in zip(*(cols[k] for k in CSV_FIELDS)):
            w.writerow([_fmt(v) for v in row])


def read_profile(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != CSV_FIELDS:
        raise UsageError(f"{path}: unexpected header {rows[0]}")
    data = np.array(rows[1:], dtype=float).reshape(-1, len(CSV_FIELDS))
    return {k: data[:, i] for i, k in enumerate(CSV_FIELDS)}


def _run_to_dir(kind: str, raw: dict, out_dir: Path, dvm_nodes: int = 50, dvm_t_max: float = 6.0) -> Path:
    from .dvm_reference import dvm_run, macroscopic
    from .hme_solver import SolverConfig, run

    try:
        cfg = SolverConfig.from_dict({k: v for k, v in raw.items() if not (kind == "dvm" and k == "m")})
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}") from exc
    out_dir.mkdir(parents=True, exist_ok=True)
    snaps = []
    stamp = time.perf_counter()

    def emit(cols, t):
        name = f"{kind}_{len(snaps):04d}.csv"
        write_profile(out_dir / name, cols)
        snaps.append({"time": float(t), "file": name})

    if kind == "hme":
        _, clock = run(cfg, on_snapshot=lambda g: emit(g.primitives(), g.t))
    else:
        def on_dvm(fld):
            cols = macroscopic(fld.grid, fld.f)
            cols["x"] = fld.x
            emit(cols, fld.t)
        _, clock = dvm_run(cfg, nodes=dvm_nodes, t_max=dvm_t_max, on_snapshot=on_dvm)
    manifest = {
        "kind": kind,
        "config": raw,
        "version": __version__,
        "cells": cfg.cells,
        "domain": [cfg.x_lo, cfg.x_hi],
        "snapshots": snaps,
        "timing": {"steps": clock["steps"], "step_wall": clock["wall"],
                   "total_wall": time.perf_counter() - stamp},
    }
    if kind == "dvm":
        manifest["velocity_nodes"] = {"count": dvm_nodes, "t_max": dvm_t_max}
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def _out_dir(args, raw) -> Path:
    out = args.out_dir or raw.get("out_dir")
    if not out:
        raise UsageError("no output directory: pass --out-dir or set out_dir in the config")
    return Path(out)


def cmd_run_hme(args) -> int:
    raw = load_config(args.config)
    print(_run_to_dir("hme", raw, _out_dir(args, raw)))
    return EXIT_OK


def cmd_run_dvm(args) -> int:
    raw = load_config(args.config)
    print(_run_to_dir("dvm", raw, _out_dir(args, raw), args.nodes, args.t_max))
    return EXIT_OK


# --- comparison -----------------------------------------------------------------------

def load_manifest(path) -> tuple[dict, Path]:
    path = Path(path)
    try:
        man = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from exc
    return man, path.parent


def _snapshot(man: dict, base: Path, t: float, tol: float):
    times = np.array([s["time"] for s in man["snapshots"]])
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > tol:
        raise UsageError(f"no snapshot within {tol} of t={t} (nearest {times[k]})")
    return read_profile(base / man["snapshots"][k]["file"])


def resample(edges_from, values, edges_to) -> np.ndarray:
    """Conservative piecewise-constant remap through the cumulative integral."""
    cum = np.concatenate([[0.0], np.cumsum(values * np.diff(edges_from))])
    at = np.interp(edges_to, edges_from, cum)
    return np.diff(at) / np.diff(edges_to)


def _edges(x, lo, hi):
    return np.linspace(lo, hi, x.size + 1)


def l1_distance(prof_a, prof_b, field: str, domain) -> float:
    lo, hi = domain
    a, b = prof_a[field], prof_b[field]
    ea, eb = _edges(prof_a["x"], lo, hi), _edges(prof_b["x"], lo, hi)
    if a.size == b.size:
        edges = ea
    elif a.size > b.size:
        a = resample(ea, a, eb)
        edges = eb
    else:
        b = resample(eb, b, ea)
        edges = ea
    return float(np.sum(np.abs(a - b) * np.diff(edges)))


def compare_runs(path_a, path_b, field: str, t: float, tol: float | None = None) -> float:
    if field not in ("rho", "u", "p0", "theta"):
        raise UsageError(f"unknown field {field!r}")
    man_a, base_a = load_manifest(path_a)
    man_b, base_b = load_manifest(path_b)
    dom_a, dom_b = man_a["domain"], man_b["domain"]
    if not np.allclose(dom_a, dom_b):
        raise UsageError(f"runs cover different domains {dom_a} and {dom_b}")
    if tol is None:
        tol = 1e-9 * max(1.0, abs(t))
    return l1_distance(_snapshot(man_a, base_a, t, tol), _snapshot(man_b, base_b, t, tol), field, dom_a)


def cmd_compare(args) -> int:
    print(_fmt(compare_runs(args.run_a, args.run_b, args.field, args.t, args.tol)))
    return EXIT_OK


GNUPLOT_TEMPLATE = """set datafile separator ','
set key autotitle columnhead
set xlabel 'x'
set ylabel '{field}'
plot {curves}
"""


def shock_tube_suite(kn: float, m_list, out_dir, cells: int = 1000, dvm_cells: int = 10000,
                     dvm_nodes: int = 50) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = dict(SHOCK_TUBE_SETUP, kn=kn)
    dvm_manifest = _run_to_dir("dvm", dict(base, cells=dvm_cells), out_dir / "dvm", dvm_nodes)
    rows = []
    curves = [f"'dvm/{json.loads(dvm_manifest.read_text())['snapshots'][-1]['file']}' using 1:2 with lines"]
    for m in m_list:
        row = {"m": m, "status": "ok"}
        try:
            path = _run_to_dir("hme", dict(base, m=m, cells=cells), out_dir / f"hme_m{m}")
            for fld in ("rho", "u", "p0"):
                row[f"l1_{fld}"] = compare_runs(path, dvm_manifest, fld, base["t_end"])
            last = json.loads(path.read_text())["snapshots"][-1]["file"]
            curves.append(f"'hme_m{m}/{last}' using 1:2 with lines")
        except (AdmissibilityError, ConvergenceError, ArithmeticError, np.linalg.LinAlgError) as exc:
            row["status"] = f"failed: {exc}"
        rows.append(row)
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "l1_rho", "l1_u", "l1_p0", "status"])
        for r in rows:
            w.writerow([r["m"]] + [_fmt(r[k]) if k in r else "" for k in ("l1_rho", "l1_u", "l1_p0")] + [r["status"]])
    (out_dir / "plot_rho.gp").write_text(GNUPLOT_TEMPLATE.format(field="rho", curves=", ".join(curves)))
    return out_dir / "summary.csv"


def cmd_shock_tube_suite(args) -> int:
    m_list = [int(v) for v in _floats(args.m_list)] if args.m_list else []
    if any(not 1 <= m <= 9 for m in m_list):
        raise UsageError("orders must lie in 1..9")
    print(shock_tube_suite(args.kn, m_list, args.out_dir, args.cells, args.dvm_cells, args.dvm_nodes))
    return EXIT_OK


# --- entry point ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relmoment", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-tables", help="recurrence and cross coefficients at one zeta")
    p.add_argument("--zeta", type=float, required=True)
    p.add_argument("--nmax", "--n-max", dest="nmax", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_tables)

    p = sub.add_parser("analyze", help="hyperbolicity report for one state")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--zeta", type=float)
    p.add_argument("--u", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--pi", type=float, default=0.0)
    p.add_argument("--n1", type=float, default=0.0)
    p.add_argument("--state", help="full state rho,u,theta[,pi,n1,f...]; overrides the other options")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("stability", help="dispersion roots omega(k) at equilibrium")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--zeta", type=float, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--k-grid", required=True)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--u", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("char-fields", help="genuine-nonlinearity indicator over zeta")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--zeta-grid", required=True)
    p.add_argument("--field", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_char_fields)

    for name, func in (("run-hme", cmd_run_hme), ("run-dvm", cmd_run_dvm)):
        p = sub.add_parser(name, help=f"{name[4:].upper()} shock-tube style run from a JSON config")
        p.add_argument("--config", required=True)
        p.add_argument("--out-dir")
        if name == "run-dvm":
            p.add_argument("--nodes", type=int, default=50)
            p.add_argument("--t-max", type=float, default=6.0, help="rapidity cut-off")
        p.set_defaults(func=func)

    p = sub.add_parser("compare", help="L1 distance between two runs at one time")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--field", default="rho")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("shock-tube-suite", help="HME orders against the DVM reference")
    p.add_argument("--kn", type=float, required=True)
    p.add_argument("--m-list", default="1,3,9")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--cells", type=int, default=1000)
    p.add_argument("--dvm-cells", type=int, default=10000)
    p.add_argument("--dvm-nodes", type=int, default=50)
    p.set_defaults(func=cmd_shock_tube_suite)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AdmissibilityError as exc:
        print(f"admissibility failure: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY
    except (ConvergenceError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
