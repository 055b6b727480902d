"""Deterministic CSV tables with JSON metadata sidecars.

Floats are written with ``repr`` (shortest string that round-trips), rows end
in a bare ``\\n`` and nothing time- or host-dependent goes into the sidecar,
so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path as FsPath

import numpy as np

from . import __version__, model
from .solver import SolverGrid, ValueSurface

__all__ = [
    "SURFACE_COLUMNS",
    "FRONTIER_COLUMNS",
    "EVENT_COLUMNS",
    "SERIES_COLUMNS",
    "STATS_COLUMNS",
    "format_value",
    "write_table",
    "read_table",
    "metadata",
    "surface_rows",
    "frontier_rows",
    "event_rows",
    "series_rows",
    "stats_rows",
]

SURFACE_COLUMNS = ("x", "R", "V", "MV", "region", "price")
FRONTIER_COLUMNS = ("x", "r_star", "p_star")
EVENT_COLUMNS = ("index", "kind", "time", "x_before", "x_after", "r_before", "r_after", "finds",
                 "price_before", "price_after", "discounted_cost")
SERIES_COLUMNS = ("time", "price", "reserves", "explored_area", "consumption_rate", "exhausted")
STATS_COLUMNS = ("time", "statistic", "value", "stderr")


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_table(path, columns, rows, meta: dict) -> None:
    """Write ``rows`` under a header and ``meta`` to ``<path>.meta.json``."""
    path = FsPath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(v) for v in row])
    sidecar = dict(meta)
    sidecar["columns"] = list(columns)
    with open(str(path) + ".meta.json", "w", encoding="utf-8", newline="") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_table(path) -> dict:
    """Columns of a CSV written by :func:`write_table`, as lists of strings."""
    with open(path, encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        cols = {h: [] for h in header}
        for row in r:
            for h, v in zip(header, row):
                cols[h].append(v)
    return cols


def _grid_meta(grid: SolverGrid) -> dict:
    return {"x_step": grid.x_step, "r_step": grid.r_step, "x_max": grid.x_max, "r_max": grid.r_max,
            "n_x": len(grid.x_nodes), "n_r": len(grid.r_nodes)}


def metadata(schema: str, params: model.ModelParams, grid: SolverGrid | None = None, **extra) -> dict:
    meta = {"artifact": "resexplore", "version": __version__, "schema": schema, "params": params.as_dict()}
    if grid is not None:
        meta["grid"] = _grid_meta(grid)
    meta.update(extra)
    return meta


def surface_rows(surface: ValueSurface):
    g = surface.grid
    prices = surface.price_table()
    mask = surface.exploration_mask
    for i, x in enumerate(g.x_nodes):
        for j, R in enumerate(g.r_nodes):
            yield (float(x), float(R), float(surface.v[i, j]), float(surface.mv[i, j]),
                   "E" if mask[i, j] else "C", float(prices[i, j]))


def frontier_rows(surface: ValueSurface):
    fr = surface.frontier
    for x, rs, ps in zip(fr.x_nodes, fr.r_star, fr.p_star):
        yield float(x), float(rs), float(ps)


def event_rows(path):
    for n, e in enumerate(path.events):
        yield (n, e.kind, e.time, e.x_before, e.x_after, e.r_before, e.r_after, e.finds,
               e.price_before, e.price_after, e.discounted_cost)


def series_rows(series):
    for row in zip(series.times, series.price, series.reserves, series.explored_area,
                   series.consumption_rate, series.exhausted):
        yield tuple(row[:5]) + (bool(row[5]),)


def stats_rows(stats):
    """Long format: one row per (time, statistic)."""
    pairs = [
        ("mean_price", stats.mean_price, stats.stderr_price),
        ("mean_price_conditional", stats.mean_price_conditional, stats.stderr_price_conditional),
        ("mean_price_exhausted", stats.mean_price_exhausted, None),
        ("mean_reserves", stats.mean_reserves, stats.stderr_reserves),
        ("mean_explored_area", stats.mean_explored_area, stats.stderr_explored_area),
        ("mean_consumption", stats.mean_consumption, stats.stderr_consumption),
        ("survival", stats.survival, None),
    ]
    from .ensemble import QUANTILES

    for name, bands in stats.quantiles.items():
        for q, band in zip(QUANTILES, bands):
            pairs.append((f"q{int(round(q * 100)):02d}_{name}", band, None))
    for j, t in enumerate(stats.times):
        for name, vals, errs in pairs:
            yield float(t), name, float(vals[j]), None if errs is None else float(errs[j])


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)
