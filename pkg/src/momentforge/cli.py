"""Command-line interface: derive, close, export, simulate, bifurcate, compare.

Exit codes: 0 success, 2 validation error, 3 capacity error.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .closure import ROUTES
from .config import CapacityError, ValidationError, max_order
from .derivation import RateModel, sis_rates
from .export import closed_from_dict, closed_to_dict, closures_text, digest, dumps, system_from_dict, system_to_dict
from .network_models import NetworkSpec, census_for_spec, generate
from .odesys import bifurcation_scan, pair_correlations, steady_states
from .pipeline import derive_system, mean_field_model
from .simulator import controlled_sis, gillespie, make_rng, time_average


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _load_model(text):
    if text in (None, "sis"):
        return sis_rates(), {}
    path = Path(text)
    if not path.exists():
        raise ValidationError(f"model file {text!r} not found")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"model file is not valid JSON: {exc}") from exc
    return RateModel.from_dict(data), {k: float(v) for k, v in data.get("params", {}).items()}


def _parse_params(items, base):
    params = dict(base)
    for item in items or []:
        if "=" not in item:
            raise ValidationError(f"--param expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = float(v)
    return params


def _parse_range(text):
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise ValidationError(f"range must look like LO:HI, got {text!r}") from exc
    return lo, hi


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from exc


def _setup(args, kmax):
    spec = NetworkSpec.parse(args.network)
    census = census_for_spec(spec, kmax, args.seed)
    homogeneous = spec.kind in ("lattice", "random_regular", "complete")
    return spec, census, homogeneous


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, out, extra=None):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["version"] = __version__
    cfg["max_order"] = max_order()
    if extra:
        cfg.update(extra)
    (out / "manifest.json").write_text(dumps(cfg) + "\n")


def _targets(args):
    return [t.strip() for t in args.targets.split(",")] if getattr(args, "targets", None) else None


# ------------------------------------------------------------------ commands


def cmd_derive(args):
    rates, _ = _load_model(args.model)
    _, census, homogeneous = _setup(args, args.order + 1)
    system = derive_system(args.order, rates, census, homogeneous, _targets(args))
    out = _out_dir(args)
    data = system_to_dict(system)
    (out / "equations.json").write_text(dumps(data) + "\n")
    (out / "equations.txt").write_text(system.format() + "\n")
    _manifest(args, out, {"digest": digest(data)})
    print(system.format())
    return 0


def cmd_close(args):
    rates, _ = _load_model(args.model)
    _, census, homogeneous = _setup(args, args.order + 1)
    closed = mean_field_model(args.order, rates, census, homogeneous, args.route, _targets(args))
    out = _out_dir(args)
    data = closed_to_dict(closed)
    (out / "closed.json").write_text(dumps(data) + "\n")
    text = closed.source.format() + "\n\n" + closures_text(closed.closures, rates.species) + "\n"
    (out / "closed.txt").write_text(text)
    _manifest(args, out, {"digest": digest(data)})
    print(text, end="")
    return 0


def cmd_export(args):
    src = Path(args.input)
    if not src.exists():
        raise ValidationError(f"input {args.input!r} not found")
    data = json.loads(src.read_text())
    if data.get("format", "").startswith("momentforge.closed"):
        closed = closed_from_dict(data)
        text = closed.source.format() + "\n\n" + closures_text(closed.closures, closed.species) + "\n"
    else:
        system = system_from_dict(data)
        text = system.format() + "\n"
    if args.out:
        out = _out_dir(args)
        (out / "export.txt").write_text(text)
        (out / "export.json").write_text(dumps(data) + "\n")
    print(text, end="")
    return 0


def _orders(args):
    return [int(x) for x in str(args.order).split(",")]


def _branch_tables(args, out):
    """Per order: branch CSV and threshold; returns {order: (closed, rows, threshold)}."""
    rates, base = _load_model(args.model)
    params = _parse_params(args.param, {"gamma": 1.0, **base})
    lo, hi = _parse_range(args.range)
    results = {}
    for k in _orders(args):
        spec, census, homogeneous = _setup(args, k + 1)
        closed = mean_field_model(k, rates, census, homogeneous, args.route, _targets(args) if k == 3 else None)
        rows, th = bifurcation_scan(closed, params, (lo, hi), args.steps, kappa=spec.kappa)
        names = [m.name(rates.species) for m in closed.variables]
        table = [[r.beta_over_gamma, r.branch_id, r.stable, *r.state, r.C_II, r.C_SI] for r in rows]
        _write_csv(out / f"branches_MF{k}.csv", ["beta_over_gamma", "branch_id", "stability", *names, "C_II", "C_SI"], table)
        results[k] = (closed, rows, th)
    (out / "thresholds.json").write_text(dumps({f"MF{k}": v[2] for k, v in results.items()}) + "\n")
    return results


def cmd_bifurcate(args):
    out = _out_dir(args)
    results = _branch_tables(args, out)
    for k, (_, _, th) in results.items():
        print(f"MF{k} threshold beta/gamma = {_fmt(th) if th is not None else 'none'}")
    _manifest(args, out)
    return 0


def _controlled_sweep(args, network):
    rows, runs = [], []
    for t, dens in enumerate(_floats(args.densities)):
        n_inf = max(1, int(round(dens * network.N)))
        run = controlled_sis(network, n_inf, args.gamma, window=args.window, seed=args.seed + t)
        est = run.estimate
        rows.append([est.density, est.beta_over_gamma, est.stderr / args.gamma, run.C_II, run.C_SI, est.t_equilibration, est.seed])
        runs.append(run)
    return rows, runs


def cmd_simulate(args):
    spec = NetworkSpec.parse(args.network)
    network = generate(spec, args.seed)
    out = _out_dir(args)
    if args.mode == "controlled":
        rows, _ = _controlled_sweep(args, network)
        _write_csv(out / "controlled.csv", ["density", "beta_over_gamma", "stderr", "C_II", "C_SI", "t_equilibration", "seed"], rows)
        for r in rows:
            print(f"[[I]]={_fmt(r[0])}  beta/gamma={_fmt(r[1])} +- {_fmt(r[2])}")
    else:
        rates, base = _load_model(args.model)
        params = _parse_params(args.param, base)
        rng = make_rng(args.seed)
        init = (rng.random(network.N) < args.initial).astype(np.int64)
        traj = gillespie(network, rates, params, init, args.t_end, seed=args.seed + 1, n_points=args.points)
        traj.to_csv(out / "trajectory.csv", list(rates.species))
        sp, _ = time_average(traj, args.t_end / 3)
        summary = {"absorbed": traj.absorbed, "seed": args.seed, "mean_density": [float(x) / network.N for x in sp]}
        (out / "summary.json").write_text(dumps(summary) + "\n")
        print(dumps(summary))
    _manifest(args, out)
    return 0


def cmd_compare(args):
    out = _out_dir(args)
    results = _branch_tables(args, out)
    network = generate(NetworkSpec.parse(args.network), args.seed)
    sim_rows, _ = _controlled_sweep(args, network)
    _write_csv(out / "controlled.csv", ["density", "beta_over_gamma", "stderr", "C_II", "C_SI", "t_equilibration", "seed"], sim_rows)
    header = ["beta_over_gamma", "sim_I"]
    overlay = []
    worst = {}
    rates, base = _load_model(args.model)
    for r in sim_rows:
        row = [r[1], r[0]]
        for k, (closed, _, _) in results.items():
            params = {"gamma": args.gamma, "beta": r[1] * args.gamma}
            pts = [f for f in steady_states(closed, params) if f.admissible and f.stable]
            idx = next(i for i, m in enumerate(closed.variables) if m.order == 1 and m.labels == (1,))
            mf = max((f.state[idx] for f in pts), default=0.0)
            row.append(mf)
            worst[k] = max(worst.get(k, 0.0), abs(mf - r[0]))
        overlay.append(row)
    header += [f"MF{k}_I" for k in results]
    _write_csv(out / "overlay.csv", header, overlay)
    report = {f"MF{k}_max_abs_deviation": v for k, v in worst.items()}
    (out / "compare.json").write_text(dumps(report) + "\n")
    _manifest(args, out)
    print(dumps(report))
    return 0


# -------------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="momentforge", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, order_default="2"):
        sp.add_argument("--model", default="sis", help="'sis' or a JSON rate model file")
        sp.add_argument("--network", default="lattice:2:32", help="lattice:D:L, rr:N:k, er:N:k, complete:N, file:PATH or a JSON spec")
        sp.add_argument("--order", default=order_default, help="closure order k (comma list for bifurcate/compare)")
        sp.add_argument("--route", default="auto", choices=ROUTES)
        sp.add_argument("--targets", default=None, help="comma-separated motifs to eliminate, e.g. II,SIS,SSI,SII")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="momentforge_out")

    d = sub.add_parser("derive", help="derive the unclosed hierarchy")
    common(d)
    d.set_defaults(func=cmd_derive)

    c = sub.add_parser("close", help="derive and close")
    common(c)
    c.set_defaults(func=cmd_close)

    e = sub.add_parser("export", help="render a saved JSON AST as text")
    e.add_argument("input")
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_export)

    def scan(sp):
        sp.add_argument("--range", default="0.05:1.5", help="beta/gamma range LO:HI")
        sp.add_argument("--steps", type=int, default=30)
        sp.add_argument("--param", action="append", help="name=value (repeatable)")

    def sim(sp):
        sp.add_argument("--densities", default="0.02,0.05,0.1,0.2,0.3,0.4,0.5,0.6")
        sp.add_argument("--window", type=float, default=200.0)
        sp.add_argument("--gamma", type=float, default=1.0)

    b = sub.add_parser("bifurcate", help="steady-state branches and thresholds")
    common(b, "1,2")
    scan(b)
    b.set_defaults(func=cmd_bifurcate)

    s = sub.add_parser("simulate", help="stochastic simulation")
    common(s)
    sim(s)
    s.add_argument("--mode", choices=("controlled", "gillespie"), default="controlled")
    s.add_argument("--param", action="append", help="name=value (repeatable)")
    s.add_argument("--t-end", type=float, default=100.0)
    s.add_argument("--points", type=int, default=201)
    s.add_argument("--initial", type=float, default=0.5, help="initial fraction in species 1")
    s.set_defaults(func=cmd_simulate)

    cp = sub.add_parser("compare", help="mean-field branches against controlled simulation")
    common(cp, "1,2")
    scan(cp)
    sim(cp)
    cp.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "order") and args.func in (cmd_derive, cmd_close):
        try:
            args.order = int(args.order)
        except ValueError:
            print("error: --order must be an integer", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, KeyError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
