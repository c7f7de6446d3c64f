"""Sensitivity sweep over the lookahead period k.

All runs in a sweep share the data seed (same problem instance); run seeds
are derived per (k, seed) pair as base + 1000*k_index + seed_index, so the
whole table is reproducible from the base config alone.
"""

from __future__ import annotations

import numpy as np

from .config import RunConfig
from .runner import run


def _sweep_config(cfg: RunConfig, k: int | None, k_index: int, seed_index: int):
    out = RunConfig.from_dict(cfg.to_dict())
    if k is None:
        out.lookahead.style = "none"
        out.lookahead.k = None
        out.lookahead.alpha = None
    else:
        if out.lookahead.style == "none":
            out.lookahead.style = "joint"
        out.lookahead.k = int(k)
        if out.lookahead.alpha is None:
            raise ValueError("sweep config needs a lookahead alpha")
    out.run_seed = cfg.run_seed + 1000 * k_index + seed_index
    return out.validate()


def sweep_k(cfg: RunConfig, k_values, num_seeds: int = 1, include_baseline=False):
    """One run per (k, seed); returns rows of (k, seed_index, final_distance).

    ``k = 0`` rows denote the bare base optimizer when ``include_baseline``
    is set (run last, after the k grid).
    """
    rows = []
    results = {}
    grid = [int(k) for k in k_values]
    ks: list[int | None] = list(grid) + ([None] if include_baseline else [])
    for k_index, k in enumerate(ks):
        for s in range(num_seeds):
            rc = run(_sweep_config(cfg, k, k_index, s))
            final = rc.trajectory.final_distance("fast")
            rows.append((0 if k is None else k, s, final))
            results[(0 if k is None else k, s)] = rc
    return rows, results


def sweep_rows_to_csv(rows, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("k,seed,final_distance\n")
        for k, s, final in rows:
            fh.write(f"{int(k)},{int(s)},{float(final)!r}\n")


def sweep_medians(rows) -> dict[int, float]:
    by_k: dict[int, list[float]] = {}
    for k, _, final in rows:
        by_k.setdefault(k, []).append(final)
    return {k: float(np.median(v)) for k, v in sorted(by_k.items())}
