"""Command-line entry point: ``klplf <command> ...``.

Failures exit nonzero with one line on stderr of the form
``klplf-error: <ErrorClass>: <message>``.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import pathlib
import sys
from dataclasses import replace

import numpy as np

from . import kl, plf_driver, quadrature, sparse_grid, stats
from .errors import PLFError

ERROR_PREFIX = "klplf-error"
USAGE_EXIT = 2
FAIL_EXIT = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_list(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


# ------------------------------------------------------------------ grid
def cmd_grid(args) -> int:
    if args.d < 1:
        raise UsageError(f"--d must be >= 1, got {args.d}")
    chosen = [x is not None for x in (args.level, args.w, args.l_max)]
    if sum(chosen) != 1:
        raise UsageError("give exactly one of --level, --w, --l-max")
    gamma = None
    if args.gamma:
        gamma = _float_list(args.gamma)
        if len(gamma) != args.d:
            raise UsageError(f"--gamma has {len(gamma)} entries, --d is {args.d}")
    kind = args.kind
    if kind == sparse_grid.ANISOTROPIC and gamma is None:
        raise UsageError("anisotropic grids need --gamma")
    cap = None
    if args.level is not None:
        if args.level < 1:
            raise UsageError("--level must be >= 1")
        if kind == sparse_grid.TENSOR:
            w = args.level - 1
        else:
            w, cap = sparse_grid.LEVEL_CONVENTIONS[args.convention](args.level)
    elif args.w is not None:
        w = args.w
    else:
        if args.l_max < 1:
            raise UsageError("--l-max must be >= 1")
        w, cap = sparse_grid.w_for_l_max(args.l_max), args.l_max
    grid = sparse_grid.assemble(kind, args.rule, w, args.d, gamma, cap)
    if args.out:
        out = pathlib.Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "nodes.csv").write_text(grid.nodes_csv())
        (out / "terms.json").write_text(grid.terms_json() + "\n")
    print(grid.n_nodes)
    return 0


def cmd_rule(args) -> int:
    sys.stdout.write(quadrature.to_csv(quadrature.rule(args.rule, args.level)))
    return 0


# ------------------------------------------------------------------- run
def _workers(args, rc=None) -> int:
    if getattr(args, "workers", None):
        return args.workers
    if rc is not None and rc.workers:
        return rc.workers
    return plf_driver.default_workers()


def cmd_run(args) -> int:
    rc = plf_driver.load_config(args.config)
    out = args.out or rc.out_dir
    if not out:
        raise UsageError("no output directory: pass --out or set out_dir in the config")
    out = pathlib.Path(out)
    if not out.is_absolute() and not args.out:
        out = pathlib.Path(args.config).parent / out
    result = plf_driver.run(rc.config, _workers(args, rc))
    plf_driver.save_result(result, out, rc.raw)
    print(f"run directory: {out}")
    print(f"mode: {result.mode}, points: {result.n_points}, diverged: {result.n_diverged}")
    sys.stdout.write(plf_driver.timing_table(result))
    return 0


# --------------------------------------------------------------- compare
_SCALES = {"v_mag": 1.0, "v_ang": 180.0 / math.pi, "p_inj": None, "q_inj": None,
           "p_flow": None, "q_flow": None}


def _scale(quantity: str, base_mva: float) -> float:
    s = _SCALES[quantity]
    return base_mva if s is None else s


def _select_column(columns, quantity: str, bus=None, branch=None) -> int:
    if quantity not in _SCALES:
        raise UsageError(f"unknown quantity {quantity!r}")
    for k, name in enumerate(columns):
        parts = name.split(":")
        if parts[0] != quantity:
            continue
        if bus is not None and quantity in ("v_mag", "v_ang", "p_inj", "q_inj") and int(parts[1]) == bus:
            return k
        if branch is not None and quantity in ("p_flow", "q_flow") and int(parts[1]) == branch:
            return k
    raise UsageError(f"no column for {quantity} at bus={bus} branch={branch}")


def cmd_compare(args) -> int:
    if len(args.runs) < 2:
        raise UsageError("compare needs a reference run and at least one other run")
    runs = [plf_driver.load_result(r) for r in args.runs]
    names = [pathlib.Path(r).name for r in args.runs]
    report = stats.build_report(runs[0], *runs[1:], names=names[1:], n_bins=args.bins,
                                interp_samples=args.samples, seed=args.seed)
    report.reference = names[0]
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(report.metrics_csv())
    (out / "timing.csv").write_text(report.timing_csv())
    (out / "report.json").write_text(report.to_json() + "\n")
    (out / "report.txt").write_text(report.text())
    sys.stdout.write(report.text())

    if args.quantity is not None:
        if (args.cdf_bus is None) == (args.cdf_branch is None):
            raise UsageError("--quantity needs exactly one of --cdf-bus, --cdf-branch")
        col = _select_column(runs[0].columns, args.quantity, args.cdf_bus, args.cdf_branch)
        base_mva = args.base_mva
        scale = _scale(args.quantity, base_mva)
        samples = [stats.result_samples(r, args.samples, args.seed)[:, col] for r in runs]
        edges = stats.shared_edges(*samples, n_bins=args.bins)
        where = f"bus{args.cdf_bus}" if args.cdf_bus is not None else f"branch{args.cdf_branch}"
        for name, x in zip(names, samples):
            dist = stats.histogram(x, edges)
            stem = f"{args.quantity}_{where}_{name}"
            (out / f"cdf_{stem}.csv").write_text(dist.cdf_csv(scale))
            (out / f"pdf_{stem}.csv").write_text(dist.pdf_csv(scale))
    return 0


# ------------------------------------------------------------ zeta sweep
def cmd_zeta_sweep(args) -> int:
    zetas = _float_list(args.zetas) if args.zetas else []
    if not zetas:
        raise UsageError("--zetas needs at least one value")
    rc = plf_driver.load_config(args.config)
    cfg = rc.config
    if cfg.gamma_policy != "zeta_scaled":
        raise UsageError("zeta-sweep needs a config with gamma_policy 'zeta_scaled'")
    workers = _workers(args, rc)
    xs = plf_driver.build_xi_space(cfg)
    if args.reference:
        ref = plf_driver.load_result(args.reference)
    else:
        ref = plf_driver.run_monte_carlo(replace(cfg, mode="monte_carlo"), workers, xs)
    rows = sweep(cfg, zetas, ref, workers, args.repeats, args.samples, args.seed, args.bins)
    text = sweep_csv(rows)
    if args.out:
        pathlib.Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def sweep(cfg, zetas, ref, workers=1, repeats=1, samples=stats.DEFAULT_INTERP_SAMPLES, seed=0,
          n_bins=stats.DEFAULT_BINS) -> list:
    """One collocation run per zeta; failed runs are recorded and skipped."""
    rows = []
    for z in zetas:
        row = {"zeta": z}
        try:
            c = replace(cfg, zeta=z, gamma_policy="zeta_scaled", mode="collocation")
            xs = plf_driver.build_xi_space(c)
            best = None
            for _ in range(max(1, repeats)):
                r = plf_driver.run_collocation(c, workers, xs)
                t = r.timing["t_total"]
                if best is None or t < best[1]:
                    best = (r, t)
            r = best[0]
            rep = stats.build_report(ref, r, names=["grid"], n_bins=n_bins, interp_samples=samples, seed=seed)
            rws = [x for x in rep.rows if x.run == "grid"]
            row.update(nodes=r.n_points, total_time=best[1],
                       kld=float(np.mean([x.kld_mean for x in rws])),
                       eps_sigma=float(np.mean([x.eps_sigma_mean for x in rws])), error="")
        except (PLFError, ValueError) as exc:
            row.update(nodes="", total_time="", kld="", eps_sigma="", error=f"{type(exc).__name__}: {exc}")
        rows.append(row)
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, ["zeta", "nodes", "total_time", "kld", "eps_sigma", "error"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


# ------------------------------------------------------------ inspection
def cmd_case_info(args) -> int:
    case = plf_driver.resolve_case(args.case)
    slack = case.buses[case.slack_position]
    types = {t: sum(b.bus_type == t for b in case.buses) for t in ("slack", "pv", "pq")}
    print(f"base_mva: {case.base_mva}")
    print(f"buses: {case.n_bus} (slack {types['slack']}, pv {types['pv']}, pq {types['pq']}); slack bus {slack.id}")
    print(f"branches: {case.n_branch} ({sum(b.in_service for b in case.branches)} in service)")
    print(f"generators: {len(case.generators)} ({sum(g.in_service for g in case.generators)} in service)")
    print(f"total demand: {sum(b.p_demand for b in case.buses) * case.base_mva:.3f} MW, "
          f"{sum(b.q_demand for b in case.buses) * case.base_mva:.3f} MVAr")
    print(f"checksum: {case.checksum()}")
    return 0


def cmd_kl_info(args) -> int:
    case = plf_driver.resolve_case(args.case)
    path = pathlib.Path(args.uncertainty)
    specs = plf_driver.resolve_uncertainty(str(path), case)
    total = 0
    for spec in specs:
        g = spec.build(allow_degenerate=True)
        basis = kl.truncate(kl.decompose(g.covariance, g.mean, g.name), args.energy_fraction)
        lam = basis.eigenvalues
        share = lam / lam.sum() if lam.sum() > 0 else np.zeros_like(lam)
        print(f"group {g.name}: m={g.m}, d={basis.d} at {args.energy_fraction:g}, "
              f"captured {kl.variance_captured(basis):.6f}")
        for n, (v, c) in enumerate(zip(lam[:args.show], np.cumsum(share)[:args.show]), start=1):
            print(f"  {n:>3}  {v:.6e}  {c:.6f}")
        total += basis.d
    print(f"d_total: {total}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="klplf", description="Probabilistic load flow with KL inputs and sparse grids.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("grid", help="build a grid and dump its nodes")
    g.add_argument("--kind", choices=sparse_grid.GRID_KINDS, default=sparse_grid.ISOTROPIC)
    g.add_argument("--rule", default="f2", help="cc or f2 (default f2)")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--level", type=int, help="per-dimension level (tensor) or level under --convention")
    g.add_argument("--convention", choices=sorted(sparse_grid.LEVEL_CONVENTIONS), default="zero_based")
    g.add_argument("--w", type=int, help="0-based grid index")
    g.add_argument("--l-max", type=int, dest="l_max", help="cap on every 1-D level; w = l_max - 1")
    g.add_argument("--gamma", help="comma-separated weights")
    g.add_argument("--out", help="directory for nodes.csv and terms.json")
    g.set_defaults(func=cmd_grid)

    r = sub.add_parser("rule", help="print a 1-D rule as CSV")
    r.add_argument("--rule", default="f2")
    r.add_argument("--level", type=int, required=True)
    r.set_defaults(func=cmd_rule)

    rn = sub.add_parser("run", help="run a configured collocation or Monte Carlo study")
    rn.add_argument("config")
    rn.add_argument("--out")
    rn.add_argument("--workers", type=int)
    rn.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="compare runs against the first (reference) run")
    c.add_argument("runs", nargs="+")
    c.add_argument("--out", required=True)
    c.add_argument("--bins", type=int, default=stats.DEFAULT_BINS)
    c.add_argument("--samples", type=int, default=stats.DEFAULT_INTERP_SAMPLES)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--quantity", choices=sorted(_SCALES))
    c.add_argument("--cdf-bus", type=int, dest="cdf_bus")
    c.add_argument("--cdf-branch", type=int, dest="cdf_branch", help="0-based branch position")
    c.add_argument("--base-mva", type=float, default=100.0, dest="base_mva")
    c.set_defaults(func=cmd_compare)

    z = sub.add_parser("zeta-sweep", help="node count, time and accuracy versus zeta")
    z.add_argument("config")
    z.add_argument("--zetas", required=True, help="comma-separated, e.g. 1,1.5,2,4")
    z.add_argument("--reference", help="Monte Carlo run directory (computed if absent)")
    z.add_argument("--repeats", type=int, default=1, help="keep the fastest of this many runs")
    z.add_argument("--samples", type=int, default=stats.DEFAULT_INTERP_SAMPLES)
    z.add_argument("--bins", type=int, default=stats.DEFAULT_BINS)
    z.add_argument("--seed", type=int, default=0)
    z.add_argument("--workers", type=int)
    z.add_argument("--out")
    z.set_defaults(func=cmd_zeta_sweep)

    ci = sub.add_parser("case-info", help="summarize a case")
    ci.add_argument("case", help="case file or bundled name (case9, case118)")
    ci.set_defaults(func=cmd_case_info)

    k = sub.add_parser("kl-info", help="eigenvalue spectrum and truncation order per group")
    k.add_argument("uncertainty")
    k.add_argument("--case", required=True)
    k.add_argument("--energy-fraction", type=float, default=kl.DEFAULT_ENERGY_FRACTION, dest="energy_fraction")
    k.add_argument("--show", type=int, default=20, help="eigenvalues to print per group")
    k.set_defaults(func=cmd_kl_info)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("missing command")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"{ERROR_PREFIX}: usage: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (PLFError, ValueError, OSError) as exc:
        msg = " ".join(str(exc).split())
        print(f"{ERROR_PREFIX}: {type(exc).__name__}: {msg}", file=sys.stderr)
        return FAIL_EXIT


if __name__ == "__main__":
    sys.exit(main())
