"""
Run configuration: INI-style ``[section]`` headers with ``key = value`` lines,
read with :mod:`configparser`. Validation reports every problem at once.

Sections and keys (defaults in brackets)::

    [chart]   kind = sphere | ellipsoid | plate, radius [1], a1 a2 a3, c [0.5]
    [mesh]    nx [16], ny [nx]
    [lame]    lambda [1], mu [1]
    [gap]     s [1000]                  scalar field expression in y1, y2
    [load]    p1 p2 p3 [0]              scalar field expressions
    [solver]  tol [1e-9], max_iter [200]
    [koiter]  eps [0.1]
    [sweep]   eps_list [0.2, 0.1, 0.05, 0.025, 0.0125]
    [probe]   center [0, 0], halfwidth [0.25], levels [3]
    [geometry] samples [16]
    [output]  dir [out], export_mesh [false]
    [run]     seed [0]
"""

import configparser
import math
from dataclasses import asdict, dataclass, field

from .errors import ConfigError
from .fieldexpr import ExprError
from .fieldexpr import parse_expr
from .geometry import Chart, MAX_EPS
from .shell import LameConstants

__all__ = ["RunConfig", "load_config", "parse_config_text", "config_summary"]

_KNOWN = {
    "chart": {"kind", "radius", "a1", "a2", "a3", "c"},
    "mesh": {"nx", "ny"},
    "lame": {"lambda", "mu"},
    "gap": {"s"},
    "load": {"p1", "p2", "p3"},
    "solver": {"tol", "max_iter"},
    "koiter": {"eps"},
    "sweep": {"eps_list"},
    "probe": {"center", "halfwidth", "levels"},
    "geometry": {"samples"},
    "output": {"dir", "export_mesh"},
    "run": {"seed"},
}


@dataclass
class RunConfig:
    chart: Chart
    nx: int
    ny: int
    lame: LameConstants
    gap: str
    loads: tuple
    tol: float = 1e-9
    max_iter: int = 200
    eps: float = 0.1
    eps_list: tuple = (0.2, 0.1, 0.05, 0.025, 0.0125)
    probe_center: tuple = (0.0, 0.0)
    probe_halfwidth: float = 0.25
    probe_levels: int = 3
    geometry_samples: int = 16
    out_dir: str = "out"
    export_mesh: bool = False
    seed: int = 0
    echo: dict = field(default_factory=dict)


class _Reader:
    def __init__(self, cp):
        self.cp = cp
        self.problems = []

    def raw(self, sec, key, default):
        if self.cp.has_option(sec, key):
            return self.cp.get(sec, key).strip()
        return default

    def number(self, sec, key, default, kind=float, low=None, high=None,
               low_open=False):
        text = self.raw(sec, key, None)
        if text is None:
            return default
        try:
            val = kind(text)
        except ValueError:
            self.problems.append(f"[{sec}] {key}: expected {kind.__name__}, got {text!r}")
            return default
        if not math.isfinite(val):
            self.problems.append(f"[{sec}] {key}: must be finite")
            return default
        if low is not None and (val <= low if low_open else val < low):
            op = ">" if low_open else ">="
            self.problems.append(f"[{sec}] {key}: must be {op} {low}, got {val}")
        if high is not None and val > high:
            self.problems.append(f"[{sec}] {key}: must be <= {high}, got {val}")
        return val

    def floats(self, sec, key, default):
        text = self.raw(sec, key, None)
        if text is None:
            return default
        try:
            vals = tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())
        except ValueError:
            self.problems.append(f"[{sec}] {key}: expected comma-separated numbers")
            return default
        if not all(math.isfinite(v) for v in vals):
            self.problems.append(f"[{sec}] {key}: must be finite")
        return vals

    def expr(self, sec, key, default):
        text = self.raw(sec, key, default)
        try:
            parse_expr(text)
        except ExprError as exc:
            self.problems.append(f"[{sec}] {key}: {exc}")
        return text


def parse_config_text(text, source="<config>"):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"malformed config: {exc}"]) from None
    r = _Reader(cp)
    for sec in cp.sections():
        if sec not in _KNOWN:
            r.problems.append(f"unknown section [{sec}]")
            continue
        for key in cp.options(sec):
            if key not in _KNOWN[sec]:
                r.problems.append(f"[{sec}] unknown key {key!r}")

    kind = r.raw("chart", "kind", "sphere")
    c = r.number("chart", "c", 0.5, low=0.0, low_open=True)
    chart = None
    try:
        if kind == "sphere":
            chart = Chart.sphere(r.number("chart", "radius", 1.0, low=0.0, low_open=True), c)
        elif kind == "ellipsoid":
            axes = [r.number("chart", k, 1.0, low=0.0, low_open=True) for k in ("a1", "a2", "a3")]
            chart = Chart.ellipsoid(*axes, c=c)
        elif kind == "plate":
            chart = Chart.plate(c)
        else:
            r.problems.append(f"[chart] kind: expected sphere, ellipsoid or plate, got {kind!r}")
    except ValueError as exc:
        r.problems.append(f"[chart] {exc}")

    nx = r.number("mesh", "nx", 16, int, low=2)
    ny = r.number("mesh", "ny", nx, int, low=2)
    lam = r.number("lame", "lambda", 1.0, low=0.0)
    mu = r.number("lame", "mu", 1.0, low=0.0, low_open=True)
    gap = r.expr("gap", "s", "1000")
    loads = tuple(r.expr("load", k, "0") for k in ("p1", "p2", "p3"))
    tol = r.number("solver", "tol", 1e-9, low=0.0, low_open=True)
    max_iter = r.number("solver", "max_iter", 200, int, low=1)
    eps = r.number("koiter", "eps", 0.1, low=0.0, low_open=True, high=MAX_EPS)
    eps_list = r.floats("sweep", "eps_list", (0.2, 0.1, 0.05, 0.025, 0.0125))
    if len(eps_list) < 3:
        r.problems.append("[sweep] eps_list: need at least 3 values")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        r.problems.append("[sweep] eps_list: must be strictly decreasing")
    if any(not (0 < e <= MAX_EPS) for e in eps_list):
        r.problems.append(f"[sweep] eps_list: values must lie in (0, {MAX_EPS}]")
    center = r.floats("probe", "center", (0.0, 0.0))
    if len(center) != 2:
        r.problems.append("[probe] center: expected two numbers")
    halfwidth = r.number("probe", "halfwidth", 0.25, low=0.0, low_open=True)
    levels = r.number("probe", "levels", 3, int, low=1)
    samples = r.number("geometry", "samples", 16, int, low=8)
    out_dir = r.raw("output", "dir", "out")
    export_text = r.raw("output", "export_mesh", "false").lower()
    if export_text not in ("true", "false", "yes", "no", "1", "0"):
        r.problems.append("[output] export_mesh: expected true or false")
    export_mesh = export_text in ("true", "yes", "1")
    seed = r.number("run", "seed", 0, int, low=0)

    if r.problems:
        raise ConfigError(r.problems)
    echo = {sec: dict(cp.items(sec)) for sec in cp.sections()}
    return RunConfig(chart=chart, nx=nx, ny=ny, lame=LameConstants(lam, mu), gap=gap,
                     loads=loads, tol=tol, max_iter=max_iter, eps=eps,
                     eps_list=tuple(eps_list), probe_center=tuple(center),
                     probe_halfwidth=halfwidth, probe_levels=levels,
                     geometry_samples=samples, out_dir=out_dir,
                     export_mesh=export_mesh, seed=seed, echo=echo)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc.strerror}"]) from None
    return parse_config_text(text, str(path))


def config_summary(cfg):
    """Plain dict of the resolved configuration for report echoes."""
    chart = asdict(cfg.chart)
    chart["semiaxes"] = list(chart["semiaxes"])
    return {
        "chart": chart,
        "mesh": {"nx": cfg.nx, "ny": cfg.ny},
        "lame": {"lambda": cfg.lame.lam, "mu": cfg.lame.mu},
        "gap": cfg.gap,
        "load": list(cfg.loads),
        "solver": {"tol": cfg.tol, "max_iter": cfg.max_iter},
        "koiter": {"eps": cfg.eps},
        "sweep": {"eps_list": list(cfg.eps_list)},
        "probe": {"center": list(cfg.probe_center), "halfwidth": cfg.probe_halfwidth,
                  "levels": cfg.probe_levels},
        "geometry": {"samples": cfg.geometry_samples},
        "run": {"seed": cfg.seed},
    }
