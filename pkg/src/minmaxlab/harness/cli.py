"""Command line entry points.

    minmaxlab run --preset sbg-b1-lagda --out runs/ --seeds 5
    minmaxlab run --config my_run.yaml --out runs/
    minmaxlab sweep-k --preset sbg-b16-lagda --k 5,50,500 --out sweep/
    minmaxlab spectrum --problem bilinear2d --method gda-sim --eta 0.3 --json
    minmaxlab replicate fig-stoch-bilinear --out figs/
    minmaxlab presets
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..spectral import OperatorSpec, la as la_spec, nested_la, spectrum_of
from .config import RunConfig, load_config, preset, preset_names
from .replicate import RECIPES, replicate
from .runner import build_problem, run_many
from .sweep import sweep_k, sweep_medians, sweep_rows_to_csv


def _load_run_config(args) -> RunConfig:
    if args.preset and args.config:
        raise SystemExit("give either --preset or --config, not both")
    if args.preset:
        cfg = preset(args.preset)
    elif args.config:
        cfg = load_config(args.config)
    else:
        raise SystemExit("need --preset or --config")
    if args.seed is not None:
        cfg.run_seed = args.seed
    if getattr(args, "budget", None) is not None:
        cfg.budget_passes = args.budget
    if getattr(args, "engine", None):
        cfg.engine = args.engine
    return cfg.validate()


def _cmd_run(args):
    cfg = _load_run_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    label = cfg.preset_name or "run"
    for result in run_many(cfg, args.seeds, args.threads):
        stem = f"{label}__s{result.config.run_seed}"
        result.trajectory.to_csv(out / f"{stem}.csv")
        with open(out / f"{stem}.meta.json", "w", encoding="utf-8",
                  newline="\n") as fh:
            json.dump(result.metadata, fh, indent=1, sort_keys=True)
            fh.write("\n")
        final = (result.trajectory.final_distance("fast")
                 if len(result.trajectory) else float("nan"))
        print(f"{stem}: final distance {final:.6g} "
              f"({result.metadata['wall_time_s']:.2f}s)")
    return 0


def _cmd_sweep(args):
    cfg = _load_run_config(args)
    k_values = [int(k) for k in args.k.split(",")]
    rows, _ = sweep_k(cfg, k_values, num_seeds=args.seeds,
                      include_baseline=args.baseline)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sweep_rows_to_csv(rows, out / "sweep_k.csv")
    for k, med in sweep_medians(rows).items():
        name = "baseline" if k == 0 else f"k={k}"
        print(f"{name}: median final distance {med:.6g}")
    return 0


_PROBLEM_JACOBIANS = ("bilinear2d", "qp1", "qp2", "sbg")


def _spectrum_jacobian(args):
    if args.problem == "bilinear2d":
        cfg = {"kind": "bilinear2d"}
    elif args.problem == "qp1":
        cfg = {"kind": "quadratic2d", "a": -3.0, "b": 4.0, "c": -1.0}
    elif args.problem == "qp2":
        cfg = {"kind": "quadratic2d", "a": 1.0, "b": 5.0, "c": -1.0}
    elif args.problem == "sbg":
        cfg = {"kind": "stochastic-bilinear", "n": 100, "d": 100,
               "data_seed": args.data_seed}
    else:
        raise SystemExit(f"unknown problem {args.problem!r}")
    from .config import ProblemConfig

    problem = build_problem(
        RunConfig(problem=ProblemConfig(**cfg),
                  method=_dummy_method())
    )
    jac = problem.jvf_jacobian()
    if args.problem == "sbg" and args.scale == "sum":
        jac = problem.n_samples * jac
    return jac, problem.d_theta


def _dummy_method():
    from .config import MethodConfig

    return MethodConfig(name="gda-sim", eta=0.1)


def _cmd_spectrum(args):
    jac, d_theta = _spectrum_jacobian(args)
    base = OperatorSpec(
        args.method,
        eta=args.eta,
        eta_theta=args.eta_theta,
        eta_phi=args.eta_phi,
        ratio=args.ratio,
    )
    spec = base
    if args.la_k is not None:
        if args.la_kss is not None:
            spec = nested_la(base, args.la_k, args.la_kss, args.la_alpha)
        else:
            spec = la_spec(base, args.la_k, args.la_alpha)
    report = spectrum_of(spec, jac, d_theta)
    payload = report.to_json_dict()
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
    print(json.dumps(payload, indent=None if args.json else 1, sort_keys=True))
    return 0


def _cmd_replicate(args):
    manifest = replicate(args.figure, args.out, seeds=args.seeds,
                         budget=args.budget, threads=args.threads)
    print(f"wrote {manifest}")
    return 0


def _cmd_presets(_args):
    for name in preset_names():
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="minmaxlab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, budget=True):
        sp.add_argument("--preset", help="named preset")
        sp.add_argument("--config", help="YAML run config path")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the base run seed")
        sp.add_argument("--seeds", type=int, default=1,
                        help="number of seed variants")
        sp.add_argument("--threads", type=int, default=1)
        if budget:
            sp.add_argument("--budget", type=float, default=None,
                            help="override the pass budget")
        sp.add_argument("--engine", choices=["auto", "kernel", "python"],
                        default=None)

    sp = sub.add_parser("run", help="execute one configured run")
    add_common(sp)
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("sweep-k", help="sweep the lookahead period")
    add_common(sp)
    sp.add_argument("--k", required=True, help="comma-separated k values")
    sp.add_argument("--baseline", action="store_true",
                    help="also run the bare base optimizer")
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("spectrum", help="operator spectrum report as JSON")
    sp.add_argument("--problem", required=True, choices=_PROBLEM_JACOBIANS)
    sp.add_argument("--method", required=True,
                    choices=["gda-sim", "gda-alt", "eg", "ogda"])
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--eta-theta", dest="eta_theta", type=float, default=None)
    sp.add_argument("--eta-phi", dest="eta_phi", type=float, default=None)
    sp.add_argument("--ratio", type=int, default=1)
    sp.add_argument("--la-k", dest="la_k", type=int, default=None)
    sp.add_argument("--la-alpha", dest="la_alpha", type=float, default=0.5)
    sp.add_argument("--la-kss", dest="la_kss", type=int, default=None)
    sp.add_argument("--scale", choices=["sum", "mean"], default="sum",
                    help="gradient convention for the finite-sum field")
    sp.add_argument("--data-seed", dest="data_seed", type=int, default=1234)
    sp.add_argument("--json", action="store_true",
                    help="compact single-line JSON")
    sp.add_argument("--json-out", dest="json_out", default=None,
                    help="also write the report to this path")
    sp.set_defaults(func=_cmd_spectrum)

    sp = sub.add_parser("replicate", help="run a bundled recipe")
    sp.add_argument("figure", choices=RECIPES)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seeds", type=int, default=5)
    sp.add_argument("--budget", type=float, default=None)
    sp.add_argument("--threads", type=int, default=1)
    sp.set_defaults(func=_cmd_replicate)

    sp = sub.add_parser("presets", help="list shipped presets")
    sp.set_defaults(func=_cmd_presets)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
