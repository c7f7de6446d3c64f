"""Bundled experiment recipes.

Each recipe expands to a list of named runs over the shipped presets, writes
one trajectory CSV per run (schema: update,passes,distance,series), a JSON
metadata sidecar per run, and a manifest listing every file with its config
hash. Identical seeds reproduce every byte.

Recipes:
  fig-batch-bilinear   full-batch comparison on the bilinear testbed: plain,
                       unrolled, optimistic and extragradient steps with and
                       without the lookahead wrapper, shared step size.
  fig-stoch-bilinear   adam / extra-adam / extragradient / lookahead-gda at
                       batch sizes 1, 16, 64 and full, plus restarted
                       variance-reduced extragradient at batch size 1.
  fig-ema-stoch        the same stochastic grid with an exponential moving
                       average of the fast weights logged alongside.
  fig-sensitivity-k    final distance vs lookahead period on the batch-16
                       setting, bare baseline included.
  quadratics           spectral-radius tuning and simulation races on the two
                       quadratic saddle problems.
"""

from __future__ import annotations

import json
from pathlib import Path

from .. import __version__
from ..spectral import OperatorSpec, la as la_spec, spectrum_of, tune_by_spectral_radius
from .config import RunConfig, preset
from .runner import RunResult, build_problem, run_many
from .sweep import sweep_k, sweep_medians, sweep_rows_to_csv

_BATCH_PRESETS = [
    ("gda", "fb-gda"),
    ("unroll-y", "fb-unroll-y"),
    ("unroll-xy", "fb-unroll-xy"),
    ("la-gda-a0.5", "fb-lagda-a05"),
    ("la-gda-a0.4", "fb-lagda-a04"),
    ("eg", "fb-eg"),
    ("la-eg", "fb-laeg"),
    ("ogda", "fb-ogda"),
    ("la-ogda", "fb-laogda"),
]

_STOCH_GRID = {
    "b1": ["sbg-b1-adam", "sbg-b1-extraadam", "sbg-b1-eg", "sbg-b1-lagda",
           "sbg-b1-svre"],
    "b16": ["sbg-b16-adam", "sbg-b16-extraadam", "sbg-b16-eg", "sbg-b16-lagda"],
    "b64": ["sbg-b64-adam", "sbg-b64-extraadam", "sbg-b64-eg", "sbg-b64-lagda"],
    "full": ["sbg-full-adam", "sbg-full-extraadam", "sbg-full-eg",
             "sbg-full-lagda"],
}

RECIPES = (
    "fig-batch-bilinear",
    "fig-stoch-bilinear",
    "fig-ema-stoch",
    "fig-sensitivity-k",
    "quadratics",
)


def _write_run(out: Path, label: str, result: RunResult, manifest: list):
    stem = f"{label}__s{result.config.run_seed}"
    csv_path = out / f"{stem}.csv"
    result.trajectory.to_csv(csv_path)
    meta_path = out / f"{stem}.meta.json"
    with open(meta_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.metadata, fh, indent=1, sort_keys=True)
        fh.write("\n")
    manifest.append(
        {
            "file": csv_path.name,
            "label": label,
            "config_hash": result.config.config_hash(),
            "preset": result.config.preset_name,
            "run_seed": result.config.run_seed,
            "data_seed": result.config.problem.data_seed,
        }
    )


def _run_preset_set(items, out, seeds, budget, threads, manifest, track_ema=False):
    for label, preset_name in items:
        cfg = preset(preset_name)
        if budget is not None:
            cfg.budget_passes = float(budget)
        if track_ema:
            cfg.track.ema_beta = 0.999
            cfg.track.ema_source = "fast"
        for result in run_many(cfg, seeds, threads):
            _write_run(out, label, result, manifest)


def replicate(figure_id, out_dir, seeds=5, budget=None, threads=1) -> Path:
    """Run one bundled recipe; returns the path of the written manifest."""
    if figure_id not in RECIPES:
        raise KeyError(f"unknown recipe {figure_id!r}; known: {', '.join(RECIPES)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: list[dict] = []

    if figure_id == "fig-batch-bilinear":
        _run_preset_set(_BATCH_PRESETS, out, seeds, budget, threads, manifest)
    elif figure_id in ("fig-stoch-bilinear", "fig-ema-stoch"):
        items = [
            (f"{p.split('sbg-')[1]}", p)
            for batch, names in sorted(_STOCH_GRID.items())
            for p in names
        ]
        _run_preset_set(items, out, seeds, budget, threads, manifest,
                        track_ema=figure_id == "fig-ema-stoch")
    elif figure_id == "fig-sensitivity-k":
        cfg = preset("sbg-b16-lagda")
        if budget is not None:
            cfg.budget_passes = float(budget)
        rows, _ = sweep_k(cfg, [5, 15, 50, 150, 500, 1500, 3000],
                          num_seeds=seeds, include_baseline=True)
        csv_path = out / "sensitivity_k.csv"
        sweep_rows_to_csv(rows, csv_path)
        manifest.append(
            {
                "file": csv_path.name,
                "label": "sensitivity-k",
                "config_hash": cfg.config_hash(),
                "preset": cfg.preset_name,
                "medians": {str(k): v for k, v in sweep_medians(rows).items()},
            }
        )
    elif figure_id == "quadratics":
        _quadratics_recipe(out, seeds, budget, threads, manifest)

    manifest_path = out / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(
            {"figure": figure_id, "version": __version__, "runs": manifest},
            fh, indent=1, sort_keys=True,
        )
        fh.write("\n")
    return manifest_path


def _quadratic_config(coeffs, method, budget) -> RunConfig:
    a, b, c = coeffs
    return RunConfig.from_dict(
        {
            "problem": {"kind": "quadratic2d", "a": a, "b": b, "c": c},
            "method": method,
            "batch_size": "full",
            "budget_passes": budget if budget is not None else 2000.0,
            "eval_stride_passes": 1.0,
            "run_seed": 7,
        }
    )


def shared_eta_grid(lo=0.01, hi=2.0, step=0.01):
    return [round(step * i, 10) for i in range(int(lo / step), int(hi / step) + 1)]


def tune_gda_per_player(jacobian, etas):
    """Grid over per-player step sizes, lexicographic order, smallest
    spectral radius wins."""
    specs = (
        OperatorSpec("gda-sim", eta_theta=et, eta_phi=ep)
        for et in etas
        for ep in etas
    )
    return tune_by_spectral_radius(jacobian, specs)


def tune_la_over_base(jacobian, base: OperatorSpec, ks, alphas):
    specs = (la_spec(base, k, a) for k in ks for a in alphas)
    return tune_by_spectral_radius(jacobian, specs)


def _quadratics_recipe(out, seeds, budget, threads, manifest):
    summary = {}
    qp = {"qp1": (-3.0, 4.0, -1.0), "qp2": (1.0, 5.0, -1.0)}
    ks = list(range(1, 11))
    alphas = [round(0.1 * i, 10) for i in range(1, 11)]

    for name, coeffs in qp.items():
        probe = _quadratic_config(coeffs, {"name": "gda-sim", "eta": 0.1}, budget)
        jac = build_problem(probe).jvf_jacobian()

        shared = [
            (eta, spectrum_of(OperatorSpec("gda-sim", eta=eta), jac).spectral_radius)
            for eta in shared_eta_grid()
        ]
        best_shared = min(shared, key=lambda t: t[1])
        per_spec, per_report = tune_gda_per_player(jac, shared_eta_grid(0.01, 1.0))
        la_best, la_report = tune_la_over_base(jac, per_spec, ks, alphas)
        summary[name] = {
            "shared_eta_best": {"eta": best_shared[0], "rho": best_shared[1]},
            "shared_eta_all_diverge": bool(all(r > 1.0 for _, r in shared)),
            "per_player": {
                "eta_theta": per_spec.eta_theta,
                "eta_phi": per_spec.eta_phi,
                "rho": per_report.spectral_radius,
            },
            "lookahead": {
                "k": la_best.k,
                "alpha": la_best.alpha,
                "rho": la_report.spectral_radius,
            },
        }

        method = {
            "name": "gda-sim",
            "eta_theta": per_spec.eta_theta,
            "eta_phi": per_spec.eta_phi,
        }
        cfg = _quadratic_config(coeffs, method, budget)
        for result in run_many(cfg, seeds, threads):
            _write_run(out, f"{name}-gda-tuned", result, manifest)
        la_cfg = _quadratic_config(coeffs, method, budget)
        la_cfg.lookahead.style = "joint"
        la_cfg.lookahead.k = la_best.k
        la_cfg.lookahead.alpha = la_best.alpha
        for result in run_many(la_cfg.validate(), seeds, threads):
            _write_run(out, f"{name}-lagda-tuned", result, manifest)

    with open(out / "tuning.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
