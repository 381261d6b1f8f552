"""Command-line entry point.

Verbs::

    ttoption build --config cfg.json --out surface.tt
    ttoption query --surface surface.tt --params 0.2,0.18,0.21,0.2,0.24
    ttoption query --surface surface.tt --params 50,30,61,50,90 --indices
    ttoption eval  --surface surface.tt --truth mc:10000000 --samples 20 --seed 0
    ttoption mc    --config cfg.json --paths 1000000 --seed 0 --json
    ttoption bench table --d 5-7 --vary sigma --out-dir out/
    ttoption bench sweep --d 10 --tolerances 1e-7,1e-6,1e-5 --out-dir out/
    ttoption bench bonds --d 5,10 --vary sigma --out-dir out/
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .config import load_config
from .mc import McConfig, mc_price
from .model import ModelParams
from .pricer import BuildError, PriceSurface, build_surface, query, surface_error_eval


def _ints(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _emit(obj, as_json: bool):
    if as_json:
        print(json.dumps(obj, indent=2))
    else:
        for k, v in obj.items():
            print(f"{k}: {v}")


def cmd_build(args):
    cfg = load_config(args.config)
    cfg.require_convergence = not args.allow_unconverged
    try:
        surface, report = build_surface(cfg)
    except BuildError as exc:
        print(f"build failed: {exc}", file=sys.stderr)
        return 2
    surface.save(args.out)
    _emit({"surface": str(args.out), "chi_phi": report.chi_phi, "chi_vhat": report.chi_vhat,
           "chi_V": report.chi_surface, "bonds_V": report.bonds_surface,
           "converged": report.converged}, args.json)
    return 0


def cmd_query(args):
    surface = PriceSurface.load(args.surface)
    vals = _floats(args.params)
    if args.indices:
        k = np.array([int(v) for v in vals])
    else:
        k = surface.pgrid.index(np.array(vals))
    price, count = query(surface, k)
    _emit({"price": price, "indices": [int(x) for x in k], "mult_count": count}, args.json)
    return 0


def cmd_eval(args):
    surface = PriceSurface.load(args.surface)
    kind, _, paths = args.truth.partition(":")
    if kind != "mc":
        raise SystemExit(f"unsupported truth {args.truth!r}; use mc:<paths>")
    n = int(float(paths)) if paths else 5 * 10**7

    def truth(p: ModelParams) -> float:
        return mc_price(p, McConfig(n_path=n, seed=args.truth_seed)).price

    res = surface_error_eval(surface, args.samples, truth, seed=args.seed)
    _emit({"mean_abs_error": res["mean_abs_error"], "max_abs_error": res["max_abs_error"],
           "samples": args.samples, "truth_paths": n}, args.json)
    return 0


def cmd_mc(args):
    cfg = load_config(args.config)
    res = mc_price(cfg.params, McConfig(n_path=args.paths, seed=args.seed, chunk=args.chunk))
    _emit(res.to_dict(), args.json)
    return 0


def _spec_from_args(args, ds) -> bench.ExperimentSpec:
    spec = bench.ExperimentSpec(
        ds=tuple(ds),
        vary=args.vary,
        sample_count=args.samples,
        truth_paths=args.truth_paths,
        mc_paths=args.mc_paths,
        tci_seed=args.seed,
        sample_seed=args.sample_seed,
        out_dir=str(args.out_dir),
    )
    if getattr(args, "truth", None) == "analytic":
        spec.truth = "analytic"
    if args.full_scale:
        spec = spec.full_scale()
    return spec


def cmd_bench_table(args):
    spec = _spec_from_args(args, _ints(args.d))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = bench.run_table(spec)
    stem = out / f"table_{spec.vary}"
    bench.write_table_csv(rows, f"{stem}.csv")
    bench.write_table_json(rows, spec, f"{stem}.json")
    if not args.no_plot:
        from .plotting import plot_table

        plot_table(rows, f"{stem}.png", title=f"varying {spec.vary}")
    for r in rows:
        print(",".join(str(v) for v in r.table_dict().values()) + f",{r.status}")
    return 0


def cmd_bench_sweep(args):
    ds = _ints(args.d)
    spec = _spec_from_args(args, ds)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curve = bench.svd_sweep(spec, _floats(args.tolerances), d=ds[0], truth=args.truth)
    stem = out / f"sweep_{spec.vary}_d{ds[0]}"
    bench.write_records_csv(curve, f"{stem}.csv")
    Path(f"{stem}.json").write_text(json.dumps({"d": ds[0], "vary": spec.vary,
                                                "truth": args.truth, "curve": curve}, indent=2))
    if not args.no_plot:
        from .plotting import plot_svd_sweep

        plot_svd_sweep(curve, f"{stem}.png", title=f"d={ds[0]}, varying {spec.vary}")
    for c in curve:
        print(f"{c['svd_tolerance']:.1e},{c['e_TT']:.3e},{c['e_TT_max']:.3e},{c['chi_phi']}")
    return 0


def cmd_bench_bonds(args):
    spec = _spec_from_args(args, _ints(args.d))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from .pricer import assemble_surface, learn_components

    profiles = {}
    for d in spec.ds:
        cfg = spec.pipeline(d)
        learned = learn_components(cfg)
        _, report, phi_c = assemble_surface(cfg, learned)
        phi_prof = bench.bond_profile(phi_c)
        from .tt import truncate_svd

        vhat_c, _ = truncate_svd(learned.vhat, cfg.svd_tolerance)
        v_prof = bench.vhat_profile(vhat_c)
        records = [{"tensor": "phi", **r} for r in phi_prof] + [{"tensor": "vhat", **r} for r in v_prof]
        bench.write_records_csv(records, out / f"bonds_{spec.vary}_d{d}.csv")
        profiles[f"phi d={d}"] = phi_prof
        profiles[f"vhat d={d}"] = v_prof
        print(f"d={d} phi: {[r['chi'] for r in phi_prof]}")
        print(f"d={d} vhat: {[r['chi'] for r in v_prof]}")
    if not args.no_plot:
        from .plotting import plot_bond_profile

        plot_bond_profile(profiles, out / f"bonds_{spec.vary}.png", title=f"varying {spec.vary}")
    return 0


def _bench_common(p):
    p.add_argument("--d", default="5", help="asset counts, e.g. 5 or 5-11 or 5,10")
    p.add_argument("--vary", choices=("sigma", "s0"), default="sigma")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--truth-paths", type=int, default=10**7)
    p.add_argument("--mc-paths", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0, help="TCI seed")
    p.add_argument("--sample-seed", type=int, default=2024)
    p.add_argument("--full-scale", action="store_true",
                   help="5e7-path truth and 100 parameter samples")
    p.add_argument("--out-dir", default="bench_out")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figures")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttoption", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="learn and save a price surface")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--allow-unconverged", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="price from a saved surface")
    p.add_argument("--surface", required=True)
    p.add_argument("--params", required=True, help="comma-separated parameter values")
    p.add_argument("--indices", action="store_true", help="treat --params as grid indices")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="mean absolute error of a surface against MC truth")
    p.add_argument("--surface", required=True)
    p.add_argument("--truth", default="mc:10000000")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth-seed", type=int, default=777)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mc", help="Monte Carlo price at the config's base parameters")
    p.add_argument("--config", required=True)
    p.add_argument("--paths", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chunk", type=int, default=2**18)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_mc)

    pb = sub.add_parser("bench", help="benchmark reports")
    bsub = pb.add_subparsers(dest="bench_command", required=True)
    p = bsub.add_parser("table", help="accuracy/complexity table per d")
    _bench_common(p)
    p.add_argument("--truth", choices=("mc", "analytic"), default="mc",
                   help="analytic uses the closed-form call (d = 1 only)")
    p.set_defaults(func=cmd_bench_table)
    p = bsub.add_parser("sweep", help="error versus phi/payoff SVD tolerance")
    _bench_common(p)
    p.add_argument("--tolerances", default="1e-9,1e-8,1e-7,1e-6,1e-5,1e-4")
    p.add_argument("--truth", choices=("reference", "mc"), default="reference")
    p.set_defaults(func=cmd_bench_sweep)
    p = bsub.add_parser("bonds", help="bond-dimension profiles")
    _bench_common(p)
    p.set_defaults(func=cmd_bench_bonds)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
