"""Command-line entry point.

Subcommands: model1d, solve, concentration, sweep, large-domain,
partition-check, waveguide.  Tables go to CSV with the resolved
configuration as `# key = value` header comments; structured results go
to JSON with a "config" block.  Writes are atomic (temp file + rename).
Exit codes: 0 success, 1 validation error, 2 solver non-convergence.
"""

from __future__ import annotations

import argparse
import io
import json
import sys

import numpy as np

from . import asymptotics, geometry, model1d, models, partition, waveguide
from ._util import atomic_write
from .config import ConfigError, load_geometry
from .discretize import assemble, build_grid, wavefunction_rows
from .errors import NoConvergence, SemisobolevError
from .minimize import MinimizeOptions, minimize_quotient


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; the contract is 1
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _csv_text(config: dict, header: list, rows: list) -> str:
    buf = io.StringIO()
    for k in sorted(config):
        buf.write(f"# {k} = {config[k]}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _json_text(config: dict, payload: dict) -> str:
    return json.dumps({"config": config, **payload}, indent=2, sort_keys=True)


def _parse_h_list(s: str) -> list:
    try:
        return [float(x) for x in s.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"--h-list: {exc}") from exc


def _parse_profile(s: str) -> waveguide.WidthProfile:
    kind, _, rest = s.partition(":")
    if kind == "constant":
        return waveguide.constant_profile(float(rest or 1.0))
    if kind == "gaussian":
        amp, s0, w = (float(x) for x in rest.split(","))
        return waveguide.gaussian_profile(amp=amp, center=s0, width=w)
    if kind == "cosine":
        return waveguide.cosine_profile()
    if kind == "table":
        data = np.loadtxt(rest, delimiter=",")
        return waveguide.table_profile(data[:, 0], data[:, 1])
    raise ConfigError(f"--profile: unknown kind {kind!r}")


def _cmd_model1d(args) -> int:
    p = args.p
    rows = []
    if args.sweep:
        try:
            lo, hi, n = args.sweep.split(":")
            cs = np.linspace(float(lo), float(hi), int(n))
        except ValueError as exc:
            raise ConfigError(f"--sweep: expected lo:hi:n ({exc})") from exc
    elif args.c is not None:
        cs = [args.c]
    else:
        raise ConfigError("model1d: pass --c or --sweep")
    for c in cs:
        pt = model1d.lambda_c_point(float(c), p)
        rows.append((pt.c, pt.lam, pt.u0, pt.t_escape))
    config = {"p": p, "sweep": args.sweep or f"{args.c}", "seed": args.seed}
    text = _csv_text(config, ["c", "lambda_c", "u0", "T_escape"], rows)
    _emit(args.out, text)
    if args.json:
        payload = {"rows": [dict(zip(("c", "lambda_c", "u0", "T_escape"), r))
                            for r in rows]}
        atomic_write(args.json, _json_text(config, payload))
    print(f"model1d: {len(rows)} rows, p={p}, "
          f"lambda range [{min(r[1] for r in rows):.6g}, "
          f"{max(r[1] for r in rows):.6g}]")
    return 0


def _cmd_solve(args) -> int:
    spec, resolved = load_geometry(args.config)
    spacing = args.spacing or float(resolved.get("spacing", 0) or 0) or \
        asymptotics.default_mesh_rule(args.h)
    grid = build_grid(spec, spacing)
    form = assemble(spec, args.h, grid)
    opts = MinimizeOptions(seed=args.seed, grad_tol=args.grad_tol)
    res = minimize_quotient(form, args.p, opts)
    config = {"config_file": args.config, "h": args.h, "p": args.p,
              "seed": args.seed, "spacing": spacing,
              "grad_tol": args.grad_tol, **{f"geometry.{k}": v
                                            for k, v in resolved.items()}}
    payload = {
        "lambda": res.lam,
        "normalized_ratio": res.lam / args.h ** asymptotics.h_power(spec.dim, args.p),
        "el_residual": res.el_residual,
        "iterations": res.iterations,
        "converged": res.converged,
        "restart_values": res.restart_values,
        "nodes": grid.n_nodes,
        "free_nodes": grid.n_free,
    }
    atomic_write(args.out, _json_text(config, payload))
    if args.psi_csv:
        hdr = ["x", "y", "re", "im", "abs"] if spec.dim == 2 else \
            ["x", "re", "im", "abs"]
        _emit(args.psi_csv, _csv_text(config, hdr, list(wavefunction_rows(res.psi))))
    print(f"solve: lambda={res.lam:.8g} residual={res.el_residual:.2e} "
          f"iters={res.iterations} -> {args.out}")
    return 0 if res.converged else 2


def _cmd_concentration(args) -> int:
    spec, resolved = load_geometry(args.config)
    pts = asymptotics.default_sample_points(spec, args.n_interior, args.n_boundary)
    cmap = models.concentration_map(spec, pts, args.p, eps=args.eps)
    config = {"config_file": args.config, "p": args.p, "eps": args.eps,
              "seed": args.seed,
              **{f"geometry.{k}": v for k, v in resolved.items()}}
    rows = [(s.x[0], (s.x[1] if len(s.x) > 1 else 0.0), s.kind, s.value)
            for s in cmap.samples]
    _emit(args.out, _csv_text(config, ["x", "y", "kind", "lambda"], rows))
    if args.json:
        payload = {
            "inf": cmap.inf_value,
            "argmin": [list(s.x) for s in cmap.argmin],
            "eps": cmap.eps,
            "delta": cmap.delta,
        }
        atomic_write(args.json, _json_text(config, payload))
    print(f"concentration: {len(rows)} samples, inf={cmap.inf_value:.8g}, "
          f"|M|={len(cmap.argmin)}")
    return 0


def _cmd_sweep(args) -> int:
    spec, resolved = load_geometry(args.config)
    h_list = _parse_h_list(args.h_list)
    rows = asymptotics.sweep(spec, args.p, h_list, keep_fields=False)
    config = {"config_file": args.config, "p": args.p, "h_list": args.h_list,
              "seed": args.seed,
              **{f"geometry.{k}": v for k, v in resolved.items()}}
    table = [(r.h, r.lam, r.ratio, r.target, r.gap, r.center[0],
              (r.center[1] if len(r.center) > 1 else 0.0), r.mass_outside,
              r.spacing, int(r.converged)) for r in rows]
    hdr = ["h", "lambda", "ratio", "target", "gap", "center_x", "center_y",
           "mass_outside", "spacing", "converged"]
    if args.format == "json":
        payload = {"rows": [dict(zip(hdr, t)) for t in table]}
        atomic_write(args.out, _json_text(config, payload))
    else:
        _emit(args.out, _csv_text(config, hdr, table))
    bad = [r for r in rows if not r.converged]
    print(f"sweep: {len(rows)} rows, final gap={rows[-1].gap:+.4%}"
          + (f", {len(bad)} unconverged" if bad else ""))
    return 2 if bad else 0


def _cmd_large_domain(args) -> int:
    spec, resolved = load_geometry(args.config)
    R_list = _parse_h_list(args.R_list)
    rows = asymptotics.large_domain(spec, args.p, R_list)
    config = {"config_file": args.config, "p": args.p, "R_list": args.R_list,
              "seed": args.seed,
              **{f"geometry.{k}": v for k, v in resolved.items()}}
    hdr = ["R", "h", "lambda_semiclassical", "lambda_neumann", "ratio"]
    table = [(r.R, r.h, r.lam_semiclassical, r.lam_neumann, r.ratio)
             for r in rows]
    _emit(args.out, _csv_text(config, hdr, table))
    print(f"large-domain: {len(rows)} rows, last ratio={rows[-1].ratio:.6g}")
    return 0


def _cmd_partition_check(args) -> int:
    spec, _ = (None, None) if not args.config else load_geometry(args.config)
    if spec is None:
        dom = geometry.plane(3.0)
        spec = geometry.GeometrySpec(domain=dom, V=1.0, gamma=0.0)
    grid = build_grid(spec, args.spacing)
    form = assemble(spec, args.h, grid)
    rng = np.random.default_rng(args.seed)
    from .discretize import gaussian_bump
    psi = gaussian_bump(grid, np.zeros(spec.dim), 0.8)
    psi.values = psi.values * (1.0 + 0.3 * rng.standard_normal(grid.n_nodes))
    fam = partition.build_partition(args.alpha, args.rho, args.h, spec.dim)
    pts = grid.points
    sum_sq_err = float(np.abs(fam.sum_sq(pts) - 1.0).max())
    grad_bound = float(fam.grad_sq_sum(pts).max() * args.h ** (2 * args.alpha))
    cell_mass = fam.cell_grad_mass() / (args.h ** (fam.dim * args.rho)
                                        * args.h ** (-args.alpha - args.rho))
    ims_defect = partition.ims_identity_defect(form, psi, fam)
    report = partition.find_translation(form, psi, args.alpha, args.rho,
                                        args.p, n_samples=args.samples,
                                        seed=args.seed)
    config = {"alpha": args.alpha, "rho": args.rho, "h": args.h, "p": args.p,
              "samples": args.samples, "seed": args.seed,
              "spacing": args.spacing}
    payload = {
        "sum_sq_error": sum_sq_err,
        "grad_bound_constant": grad_bound,
        "cell_grad_mass_constant": cell_mass,
        "ims_identity_defect": ims_defect,
        "acceptance_fraction": report.fraction,
        "accepted": report.accepted,
        "tau": list(report.tau),
        "rescaled": report.rescaled,
    }
    atomic_write(args.out, _json_text(config, payload))
    print(f"partition-check: sum_sq_err={sum_sq_err:.2e} "
          f"fraction={report.fraction:.3f} -> {args.out}")
    return 0


def _cmd_waveguide(args) -> int:
    prof = _parse_profile(args.profile)
    h_list = _parse_h_list(args.h_list)
    rows = waveguide.waveguide_sweep(prof, args.p, h_list)
    config = {"profile": args.profile, "p": args.p, "h_list": args.h_list,
              "seed": args.seed}
    hdr = ["h", "lambda_reduced", "ratio", "mass_outside", "spacing_s",
           "converged"]
    table = [(r.h, r.lam_reduced, r.ratio, r.mass_outside, r.spacing_s,
              int(r.converged)) for r in rows]
    if args.format == "json":
        atomic_write(args.out, _json_text(config,
                                          {"rows": [dict(zip(hdr, t)) for t in table]}))
    else:
        _emit(args.out, _csv_text(config, hdr, table))
    bad = [r for r in rows if not r.converged]
    print(f"waveguide: {len(rows)} rows, last ratio={rows[-1].ratio:.6f}")
    return 2 if bad else 0


def _emit(path: str | None, text: str) -> None:
    if path:
        atomic_write(path, text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="semisobolev",
                 description="Sobolev constants of electro-magnetic Robin "
                             "Laplacians at desk scale")
    ap.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("model1d", help="half-line Robin model curves")
    m.add_argument("--p", type=float, required=True)
    m.add_argument("--c", type=float)
    m.add_argument("--sweep", help="c_min:c_max:n")
    m.add_argument("--out", help="CSV path (stdout when omitted)")
    m.add_argument("--json", help="optional JSON path")
    m.set_defaults(func=_cmd_model1d)

    s = sub.add_parser("solve", help="minimize the quotient on a geometry")
    s.add_argument("--config", required=True)
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--out", required=True, help="JSON result path")
    s.add_argument("--psi-csv", help="optional minimizer dump")
    s.add_argument("--spacing", type=float)
    s.add_argument("--grad-tol", type=float, default=1e-8)
    s.set_defaults(func=_cmd_solve)

    c = sub.add_parser("concentration", help="sample the concentration function")
    c.add_argument("--config", required=True)
    c.add_argument("--p", type=float, required=True)
    c.add_argument("--eps", type=float, default=0.2)
    c.add_argument("--n-interior", type=int, default=25)
    c.add_argument("--n-boundary", type=int, default=16)
    c.add_argument("--out", help="CSV path (stdout when omitted)")
    c.add_argument("--json", help="optional JSON path")
    c.set_defaults(func=_cmd_concentration)

    w = sub.add_parser("sweep", help="semiclassical h-sweep")
    w.add_argument("--config", required=True)
    w.add_argument("--p", type=float, required=True)
    w.add_argument("--h-list", required=True)
    w.add_argument("--out", required=True)
    w.add_argument("--format", choices=("csv", "json"), default="csv")
    w.set_defaults(func=_cmd_sweep)

    ld = sub.add_parser("large-domain", help="Neumann constants of dilated domains")
    ld.add_argument("--config", required=True)
    ld.add_argument("--p", type=float, required=True)
    ld.add_argument("--R-list", required=True)
    ld.add_argument("--out", help="CSV path (stdout when omitted)")
    ld.set_defaults(func=_cmd_large_domain)

    pc = sub.add_parser("partition-check", help="two-scale partition report")
    pc.add_argument("--alpha", type=float, required=True)
    pc.add_argument("--rho", type=float, required=True)
    pc.add_argument("--h", type=float, required=True)
    pc.add_argument("--p", type=float, default=4.0)
    pc.add_argument("--samples", type=int, default=200)
    pc.add_argument("--spacing", type=float, default=0.05)
    pc.add_argument("--config", help="optional geometry (default: 2D box)")
    pc.add_argument("--out", required=True, help="JSON report path")
    pc.set_defaults(func=_cmd_partition_check)

    wg = sub.add_parser("waveguide", help="shrinking-waveguide sweep")
    wg.add_argument("--profile", required=True,
                    help="constant:v | gaussian:A,s0,w | cosine | table:file.csv")
    wg.add_argument("--p", type=float, required=True)
    wg.add_argument("--h-list", required=True)
    wg.add_argument("--out", help="CSV path (stdout when omitted)")
    wg.add_argument("--format", choices=("csv", "json"), default="csv")
    wg.set_defaults(func=_cmd_waveguide)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NoConvergence as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return 2
    except SemisobolevError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
