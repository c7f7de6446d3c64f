"""Figure specs and trajectory-CSV loading.

A figure spec is a YAML tree listing (csv, label, series-filter) entries plus
an output path. CSVs must carry exactly the harness schema header
``update,passes,distance,series``; anything else is refused with a schema
diagnostic. Entries sharing a label are treated as seeds of one curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

EXPECTED_HEADER = "update,passes,distance,series"
SERIES_TAGS = ("fast", "slow", "super_slow", "ema", "uma")


class PlotInputError(Exception):
    """Base class for figure-input problems."""


class MissingFileError(PlotInputError):
    pass


class SchemaError(PlotInputError):
    pass


class EmptySeriesError(PlotInputError):
    pass


@dataclass
class SeriesEntry:
    csv: str
    label: str
    filter: str = "fast"

    def validate(self):
        if self.filter not in SERIES_TAGS:
            raise SchemaError(
                f"unknown series filter {self.filter!r}; "
                f"expected one of {', '.join(SERIES_TAGS)}"
            )


@dataclass
class FigureSpec:
    output: str
    series: list[SeriesEntry]
    kind: str = "curves"
    title: str | None = None
    image_format: str | None = None  # inferred from output suffix when None
    x_label: str = "passes"
    y_label: str = "normalized distance"

    def validate(self):
        if self.kind not in ("curves", "spectrum"):
            raise SchemaError(f"unknown figure kind {self.kind!r}")
        if not self.series:
            raise SchemaError("figure spec lists no series")
        for entry in self.series:
            entry.validate()
        return self


def load_figure_spec(path) -> FigureSpec:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"figure spec not found: {path}")
    data = yaml.safe_load(path.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise SchemaError(f"figure spec {path} is not a mapping")
    try:
        entries = [SeriesEntry(**e) for e in data.pop("series", [])]
        spec = FigureSpec(series=entries, **data)
    except TypeError as exc:
        raise SchemaError(f"bad figure spec field: {exc}") from exc
    return spec.validate()


def load_trajectory_csv(path):
    """Read one harness CSV into (update, passes, distance, series) arrays,
    validating the header byte-for-byte."""
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"trajectory CSV not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != EXPECTED_HEADER:
            raise SchemaError(
                f"{path}: header {header!r} does not match the trajectory "
                f"schema {EXPECTED_HEADER!r}"
            )
        update, passes, dist, series = [], [], [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4 or parts[3] not in SERIES_TAGS:
                raise SchemaError(f"{path}:{lineno}: malformed row {line!r}")
            try:
                update.append(int(parts[0]))
                passes.append(float(parts[1]))
                dist.append(float(parts[2]))
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
            series.append(parts[3])
    return (
        np.asarray(update, dtype=np.int64),
        np.asarray(passes),
        np.asarray(dist),
        np.asarray(series, dtype=object),
    )


def select_series(path, tag: str):
    """(passes, distance) of one series of one CSV, in file order."""
    _, passes, dist, series = load_trajectory_csv(path)
    mask = series == tag
    if not mask.any():
        raise EmptySeriesError(f"{path}: no rows for series {tag!r}")
    return passes[mask], dist[mask]
