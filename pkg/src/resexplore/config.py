"""Run configuration: an INI document with four flat sections.

    [model]        alpha, r, a, lambda, k                       (all required)
    [grid]         x_max (required); x_step, r_step (optional)
    [simulation]   x0, R0 (number or "midpoint"), n_paths, horizon,
                   base_seed, n_times, workers                  (all optional)
    [output]       directory, formats                           (optional)

Keys are case-sensitive and unknown sections or keys are rejected.
``R0 = midpoint`` means the middle of the consumption region at x0, i.e.
halfway between R*(x0) and the top of the reserve grid.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from . import model
from .errors import ParseError

__all__ = [
    "GridConfig",
    "SimulationConfig",
    "OutputConfig",
    "RunConfig",
    "parse_config",
    "load_config",
    "serialize_config",
    "bundled_config",
]

MIDPOINT = "midpoint"
FORMATS = ("csv",)


@dataclass(frozen=True)
class GridConfig:
    x_max: float
    x_step: Optional[float] = None
    r_step: Optional[float] = None


@dataclass(frozen=True)
class SimulationConfig:
    x0: float = 1.0
    R0: Union[float, str] = MIDPOINT
    n_paths: int = 1000
    horizon: float = 100.0
    base_seed: int = 0
    n_times: int = 200
    workers: int = 1


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = ("csv",)


@dataclass(frozen=True)
class RunConfig:
    model: model.ModelParams
    grid: GridConfig
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, simulation=replace(self.simulation, base_seed=int(seed)))


# (section, key) -> (converter, required)
_SCHEMA = {
    "model": {"alpha": (float, True), "r": (float, True), "a": (float, True),
              "lambda": (float, True), "k": (float, True)},
    "grid": {"x_max": (float, True), "x_step": (float, False), "r_step": (float, False)},
    "simulation": {"x0": (float, False), "R0": ("r0", False), "n_paths": (int, False),
                   "horizon": (float, False), "base_seed": (int, False), "n_times": (int, False),
                   "workers": (int, False)},
    "output": {"directory": (str, False), "formats": ("formats", False)},
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _line_index(text: str) -> dict:
    """Map (section, key) and (section, None) to 1-based line numbers."""
    where, section = {}, None
    for n, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), n)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            where.setdefault((section, m.group(1)), n)
    return where


def _convert(kind, raw: str, section: str, key: str, line):
    name = f"{section}.{key}"
    raw = raw.strip()
    try:
        if kind is float:
            return float(raw)
        if kind is int:
            if not re.fullmatch(r"[+-]?\d+", raw):
                raise ValueError
            return int(raw)
        if kind == "r0":
            return MIDPOINT if raw.lower() == MIDPOINT else float(raw)
        if kind == "formats":
            fmts = tuple(f.strip().lower() for f in raw.split(",") if f.strip())
            bad = [f for f in fmts if f not in FORMATS]
            if bad or not fmts:
                raise ParseError(f"unsupported output format(s) {bad or raw!r}; choose from {FORMATS}", line, name)
            return fmts
        return raw
    except ParseError:
        raise
    except ValueError:
        expected = {float: "a number", int: "an integer", "r0": "a number or 'midpoint'"}.get(kind, "a value")
        raise ParseError(f"expected {expected}, got {raw!r}", line, name) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document.

    Raises :class:`ParseError` (with line and field where known) for syntax,
    schema or range problems, and lets model validation errors through.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ParseError("duplicate key", exc.lineno, f"{exc.section}.{exc.option}") from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError("duplicate section", exc.lineno, exc.section) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("key outside any [section]", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ParseError("malformed line", line) from None
    where = _line_index(text)

    for section in cp.sections():
        if section not in _SCHEMA:
            raise ParseError(f"unknown section [{section}]", where.get((section, None)), section)
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ParseError("unknown key", where.get((section, key)), f"{section}.{key}")

    missing = [f"{s}.{k}" for s, keys in _SCHEMA.items() for k, (_, req) in keys.items()
               if req and not (cp.has_section(s) and k in cp[s])]
    if missing:
        raise ParseError("missing required keys: " + ", ".join(missing))

    values = {}
    for s, keys in _SCHEMA.items():
        values[s] = {}
        if not cp.has_section(s):
            continue
        for k, (kind, _) in keys.items():
            if k in cp[s]:
                values[s][k] = _convert(kind, cp[s][k], s, k, where.get((s, k)))

    def check(cond, s, k, msg):
        if not cond:
            raise ParseError(msg, where.get((s, k)), f"{s}.{k}")

    m = values["model"]
    params = model.validate(m["alpha"], m["r"], m["a"], m["lambda"], m["k"])

    g = values["grid"]
    check(g["x_max"] > 0, "grid", "x_max", "x_max must be positive")
    for k in ("x_step", "r_step"):
        if k in g:
            check(g[k] > 0, "grid", k, f"{k} must be positive")
    grid = GridConfig(**g)

    sv = values["simulation"]
    sim = SimulationConfig(**sv)
    check(sim.n_paths >= 1, "simulation", "n_paths", "n_paths must be at least 1")
    check(sim.horizon > 0, "simulation", "horizon", "horizon must be positive")
    check(0 <= sim.x0 <= grid.x_max, "simulation", "x0", "x0 must lie in [0, grid.x_max]")
    check(sim.R0 == MIDPOINT or sim.R0 >= 0, "simulation", "R0", "R0 must be non-negative")
    check(sim.n_times >= 2, "simulation", "n_times", "n_times must be at least 2")
    check(sim.workers >= 1, "simulation", "workers", "workers must be at least 1")
    check(0 <= sim.base_seed < 2**63, "simulation", "base_seed", "base_seed must be a non-negative 63-bit integer")

    out = OutputConfig(**values["output"])
    return RunConfig(params, grid, sim, out)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(cfg: RunConfig) -> str:
    """Render ``cfg`` so that ``parse_config`` gives it back unchanged."""
    p = cfg.model
    lines = ["[model]", f"alpha = {p.alpha!r}", f"r = {p.r!r}", f"a = {p.a!r}",
             f"lambda = {p.lam!r}", f"k = {p.k!r}", "", "[grid]", f"x_max = {cfg.grid.x_max!r}"]
    for k in ("x_step", "r_step"):
        v = getattr(cfg.grid, k)
        if v is not None:
            lines.append(f"{k} = {v!r}")
    s = cfg.simulation
    r0 = s.R0 if s.R0 == MIDPOINT else repr(float(s.R0))
    lines += ["", "[simulation]", f"x0 = {s.x0!r}", f"R0 = {r0}", f"n_paths = {s.n_paths}",
              f"horizon = {s.horizon!r}", f"base_seed = {s.base_seed}", f"n_times = {s.n_times}",
              f"workers = {s.workers}", "", "[output]", f"directory = {cfg.output.directory}",
              f"formats = {', '.join(cfg.output.formats)}", ""]
    return "\n".join(lines)


def bundled_config(name: str) -> str:
    """Text of a configuration shipped with the package (e.g. ``"set_a.cfg"``)."""
    from importlib.resources import files

    return files("resexplore").joinpath("configs", name).read_text(encoding="utf-8")
