"""Command-line front end.

Exit codes: 0 pass, 1 predicted-vs-observed failure (or a boundary regime),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from . import io as sio
from .covariance import Dominating, ModelError, classify_regime, load_model
from .harness import (correlation_summary, check_correlation_regime, load_config,
                      run_experiment, summarize)
from .io import IntegrityError
from .rosenblatt import RosenblattParams, kolmogorov_distance, sample_composite, sample_rosenblatt
from .simulate import TimeGrid, simulate_field, write_field_dump
from .special import SphereQuadrature
from .variance import var_total

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _out_dir(args):
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
    return args.out_dir


def _emit(args, text, record, stem):
    """Human text on stdout (or JSON with --json); JSON mirror in the output dir."""
    print(sio.dumps(record) if args.json else text)
    d = _out_dir(args)
    if d:
        path = os.path.join(d, f"{stem}.json")
        sio.write_json(path, record)
        return [path]
    return []


def cmd_regime(args):
    model = load_model(args.model)
    rep = classify_regime(model, args.u)
    text = rep.summary()
    if rep.diagnostic:
        text += f"\n{rep.diagnostic}"
    _emit(args, text, {"u": args.u, **rep.as_dict()}, "regime")
    return EXIT_FAIL if rep.dominating is Dominating.BOUNDARY else EXIT_OK


def cmd_variance(args):
    model = load_model(args.model)
    if args.T is None or not args.T > 0:
        raise UsageError("--T must be positive")
    b = var_total(model, args.u, args.T, args.qmax)
    header = ["q", "variance", "share"]
    rows = b.rows()
    lines = [f"Var M_T(u), u={args.u:g}, T={args.T:g}", "q,variance,share"]
    lines += [f"{q},{v:.10g},{s:.6f}" for q, v, s in rows]
    lines.append(f"total {b.total:.10g}  tail bound {b.tail_bound:.4g}  tail share {b.tail_share:.3g}")
    record = {"u": args.u, "T": args.T, "q_max": args.qmax, "total": b.total,
              "tail_bound": b.tail_bound, "tail_share": b.tail_share,
              "rows": [{"q": q, "variance": v, "share": s} for q, v, s in rows]}
    d = _out_dir(args)
    if d:
        h = sio.text_hash(model.digest() + f"|{args.u!r}|{args.T!r}|{args.qmax}")
        sio.write_csv(os.path.join(d, "variance.csv"), header, rows, h)
    _emit(args, "\n".join(lines), record, "variance")
    return EXIT_OK


def cmd_simulate(args):
    model = load_model(args.model)
    if args.T is None:
        raise UsageError("--T is required")
    d = _out_dir(args)
    if not d:
        raise UsageError("--out-dir is required for field dumps")
    sphere = SphereQuadrature.gauss(args.degree if args.degree is not None else max(2 * model.lmax, 2))
    grid = TimeGrid.from_dt(args.T, args.dt)
    written = []
    for r in range(args.replications):
        f = simulate_field(model, sphere, grid, args.seed, key=(0, r))
        base = os.path.join(d, f"field_r{r}")
        write_field_dump(f, base, model)
        written.append(base + ".npy")
    record = {"T": args.T, "dt": grid.dt, "n_steps": grid.n_steps, "grid_points": sphere.size,
              "replications": args.replications, "seed": args.seed, "files": written}
    _emit(args, f"wrote {len(written)} field dump(s) to {d}", record, "simulate")
    return EXIT_OK


def _write_table(d, table, h):
    path = os.path.join(d, "replicates.csv")
    sio.write_csv(path, table.header, table.rows(), h)
    return path


def _summary_text(summary):
    lines = [f"{summary['name']}: largest T {summary['largest_T']:g}, R={summary['replications']}"]
    for e in summary["levels"]:
        lines.append(f"u={e['u']:g}: {e['regime']['dominating']}")
        for c in e["checks"]:
            if "line" in c:
                lines.append("  " + c["line"])
            elif "skipped" in c:
                lines.append(f"  {c['name']}: skipped ({c['skipped']})")
            elif "statistic" in c:
                lines.append(f"  {c['name']}: {'PASS' if c['passed'] else 'FAIL'} "
                             f"(stat {c['statistic']:.4g}, threshold {c['threshold']:.4g})")
            else:
                lines.append(f"  {c['name']}: {'PASS' if c['passed'] else 'FAIL'} {c.get('detail', '')}")
    lines.append("PASS" if summary["passed"] else "FAIL")
    return "\n".join(lines)


def _config_with_seed(cfg, seed):
    if seed is None:
        return cfg
    from dataclasses import replace
    return replace(cfg, master_seed=seed)


def cmd_mc(args):
    if args.verify:
        rec = sio.verify_manifest(args.verify)
        print(f"manifest {rec['manifest_hash']}: {len(rec['outputs'])} file(s) verified")
        return EXIT_OK
    if not args.config:
        raise UsageError("--config is required")
    cfg = _config_with_seed(load_config(args.config), args.seed)
    started = sio.now()
    table = run_experiment(cfg, _threads(args))
    summary = summarize(table)
    h = sio.text_hash(cfg.digest())
    summary["manifest_hash"] = h
    outputs = []
    d = _out_dir(args)
    if d:
        outputs.append(_write_table(d, table, h))
        fits = [(e["u"], T, v, s) for e in summary["levels"] if e.get("fit")
                for T, v, s in zip(e["fit"]["T"], e["fit"]["variance"], e["fit"]["variance_se"])]
        fpath = os.path.join(d, "variances.csv")
        sio.write_csv(fpath, ["u", "T", "variance", "se"], fits, h)
        outputs.append(fpath)
    outputs += _emit(args, _summary_text(summary), summary, "summary")
    if d:
        sio.write_manifest(d, h, cfg.master_seed, __version__, outputs, started)
    return EXIT_OK if summary["passed"] else EXIT_FAIL


def cmd_corr(args):
    if not args.config:
        raise UsageError("--config is required")
    cfg = _config_with_seed(load_config(args.config), args.seed)
    check_correlation_regime(cfg)
    started = sio.now()
    table = run_experiment(cfg, _threads(args))
    results = correlation_summary(table)
    h = sio.text_hash(cfg.digest() + "|corr")
    rows = [(r.u, T, c, s, e) for r in results for T, c, s, e in zip(r.T, r.corr, r.se, r.exact)]
    lines = ["u,T,corr,se,exact"] + [f"{u:g},{T:g},{c:.4f},{s:.4f},{e:.4f}" for u, T, c, s, e in rows]
    ok = True
    for r in results:
        up = r.spearman > 0
        hi = r.corr[-1] >= 0.9
        ok &= up and hi
        lines.append(f"u={r.u:g}: corr at largest T {r.corr[-1]:.4f} >= 0.9: {'PASS' if hi else 'FAIL'}; "
                     f"rank trend {r.spearman:+.2f}: {'PASS' if up else 'FAIL'}")
    record = {"manifest_hash": h, "results": [r.as_dict() for r in results], "passed": bool(ok)}
    outputs = []
    d = _out_dir(args)
    if d:
        p = os.path.join(d, "correlation.csv")
        sio.write_csv(p, ["u", "T", "corr", "se", "exact"], rows, h)
        outputs.append(p)
    outputs += _emit(args, "\n".join(lines), record, "correlation")
    if d:
        sio.write_manifest(d, h, cfg.master_seed, __version__, outputs, started)
    return EXIT_OK if ok else EXIT_FAIL


def _moments(x):
    n = x.size
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    return {"n": n, "mean": mean, "mean_se": math.sqrt(var / n), "variance": var,
            "variance_se": float(np.std((x - mean) ** 2, ddof=1) / math.sqrt(n)),
            "d_kol_normal": kolmogorov_distance(x)}


def cmd_rosenblatt(args):
    if args.beta is None:
        raise UsageError("--beta is required")
    weights = None
    if args.weights:
        try:
            weights = tuple(float(w) for w in args.weights.split(","))
        except ValueError:
            raise UsageError("--weights must be comma-separated numbers") from None
    try:
        params = RosenblattParams(args.beta, args.n_terms, 0, weights)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if weights:
        x = sample_composite(params, args.n, seed=args.seed)
    else:
        x = sample_rosenblatt(params, args.n, seed=args.seed)
    mom = _moments(x)
    record = {"beta": args.beta, "n_terms": args.n_terms, "weights": list(weights or []),
              "seed": args.seed, **mom}
    d = _out_dir(args)
    if d:
        h = sio.text_hash(f"{args.beta!r}|{args.n_terms}|{weights!r}|{args.n}|{args.seed}")
        sio.write_csv(os.path.join(d, "rosenblatt.csv"), ["x"], ([v] for v in x), h)
    text = (f"{'composite' if weights else 'standard'} Rosenblatt, beta={args.beta:g}, n={args.n}\n"
            f"mean {mom['mean']:.4f} ± {mom['mean_se']:.4f}, variance {mom['variance']:.4f} "
            f"± {mom['variance_se']:.4f}, d_Kol(normal) {mom['d_kol_normal']:.4f}")
    _emit(args, text, record, "rosenblatt")
    return EXIT_OK


def _threads(args):
    return args.threads if args.threads else (os.cpu_count() or 1)


def build_parser():
    p = argparse.ArgumentParser(prog="spherefield", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out-dir", help="directory for data files and JSON mirrors")
        sp.add_argument("--json", action="store_true", help="print the JSON record instead of text")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("regime", help="classify the dominating chaos and limit law")
    sp.add_argument("--model", required=True)
    sp.add_argument("--u", type=float, required=True)
    common(sp)
    sp.set_defaults(func=cmd_regime)

    sp = sub.add_parser("variance", help="exact per-chaos variance table")
    sp.add_argument("--model", required=True)
    sp.add_argument("--u", type=float, required=True)
    sp.add_argument("--T", type=float, required=True)
    sp.add_argument("--qmax", type=int, default=7)
    common(sp)
    sp.set_defaults(func=cmd_variance)

    sp = sub.add_parser("simulate", help="write field dumps")
    sp.add_argument("--model", required=True)
    sp.add_argument("--T", type=float, required=True)
    sp.add_argument("--dt", type=float, default=0.25)
    sp.add_argument("--degree", type=int, help="sphere quadrature exactness degree")
    sp.add_argument("--replications", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    for name, func, text in (("mc", cmd_mc, "Monte Carlo campaign from an experiment config"),
                             ("corr", cmd_corr, "correlation with the monochromatic component")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config")
        sp.add_argument("--seed", type=int, help="override the config master seed")
        sp.add_argument("--threads", type=int, help="parallel replications (default: all cores)")
        if name == "mc":
            sp.add_argument("--verify", metavar="MANIFEST", help="check output files against a manifest")
        common(sp)
        sp.set_defaults(func=func)

    sp = sub.add_parser("rosenblatt", help="sample the (composite) Rosenblatt law")
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--n", type=int, default=10000, help="number of samples")
    sp.add_argument("--n-terms", type=int, default=2 ** 16)
    sp.add_argument("--weights", help="comma-separated composite weights")
    sp.add_argument("--seed", type=int, default=0)
    common(sp)
    sp.set_defaults(func=cmd_rosenblatt)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ModelError, UsageError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
