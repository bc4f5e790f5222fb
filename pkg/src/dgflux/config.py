"""Run configuration: ``key = value`` text with ``#`` comments.

Absent keys take their defaults, unknown or repeated keys are errors
reported with their line number.  Boundary conditions are given as
``bc.<tag> = <type>`` and initial-condition parameters as
``ic.<name> = <value>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .basis import NodeFamily
from .boundary import BCType
from .dg import Form
from .equations import parse_riemann, parse_two_point
from .errors import ConfigError
from .fv import IndicatorKind, get_limiter
from .timeint import get_scheme

EQUATIONS = ("scalar", "euler", "navierstokes")
CURVINGS = ("none", "sine_x", "sine_xy")
FV_MODES = ("off", "indicator", "all")


def _bool(text: str) -> bool:
    key = text.strip().lower()
    if key in ("1", "true", "yes", "on"):
        return True
    if key in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(count):
    def conv(text: str):
        vals = tuple(float(v) for v in text.replace(",", " ").split())
        if len(vals) != count:
            raise ValueError(f"expected {count} numbers, got {len(vals)}")
        return vals
    return conv


def _ints(count):
    def conv(text: str):
        vals = tuple(int(v) for v in text.replace(",", " ").split())
        if len(vals) != count:
            raise ValueError(f"expected {count} integers, got {len(vals)}")
        return vals
    return conv


def _periodic(text: str):
    key = text.strip().lower().replace(",", " ")
    if key in ("none", "off", ""):
        return (False, False)
    if key in ("both", "all", "xy", "x y"):
        return (True, True)
    if key == "x":
        return (True, False)
    if key == "y":
        return (False, True)
    raise ValueError(f"expected none, x, y or both, got {text!r}")


def _optional(conv):
    def inner(text: str):
        return None if text.strip().lower() in ("none", "") else conv(text)
    return inner


def _choice(options):
    def conv(text: str):
        key = text.strip().lower()
        if key not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return key
    return conv


def _selector(parse):
    def conv(text: str):
        return parse(text.strip()).value
    return conv


def _param(text: str):
    """Initial-condition parameter: number, tuple of numbers or word."""
    parts = text.replace(",", " ").split()
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError:
        return text.strip()
    if len(vals) == 1:
        return vals[0]
    return vals


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(_fmt(v) for v in value)
    return str(value)


def _fmt_periodic(p) -> str:
    return {(False, False): "none", (True, False): "x", (False, True): "y", (True, True): "both"}[tuple(p)]


@dataclass(frozen=True)
class RunConfig:
    project: str = "run"
    # mesh
    mesh: str = "cartesian"
    nelems: tuple = (8, 8)
    bounds: tuple = (0.0, 1.0, 0.0, 1.0)
    periodic: tuple = (True, True)
    curving: str = "none"
    curving_amplitude: float = 0.1
    ngeo: int = 1
    refine: tuple | None = None
    bc: dict = field(default_factory=dict)
    # equations
    equation: str = "scalar"
    gamma: float = 1.4
    advection: tuple = (1.0, 1.0)
    kappa: float = 0.0
    mu: float = 0.0
    prandtl: float = 0.72
    # discretization
    N: int = 3
    nodes: str = "LGL"
    form: str = "weak"
    two_point: str = "standardmean"
    riemann: str = "rusanov"
    lifting: bool = True
    # shock capturing
    fv: str = "off"
    indicator: str = "persson"
    indicator_upper: float | None = None
    indicator_lower: float | None = None
    limiter: str = "minmod"
    # time integration
    scheme: str = "rk4"
    cfl: float = 0.9
    cfld: float = 0.4
    dt: float | None = None
    t_end: float = 1.0
    analyze_dt: float | None = None
    output_dt: float | None = None
    # initial / exact solution
    initial: str = "sine"
    ic: dict = field(default_factory=dict)

    def __post_init__(self):
        validate(self)

    @property
    def domain(self):
        b = self.bounds
        return ((b[0], b[1]), (b[2], b[3]))

    def with_changes(self, **changes) -> "RunConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return RunConfig(**data)


CONVERTERS = {
    "project": str.strip,
    "mesh": str.strip,
    "nelems": _ints(2),
    "bounds": _floats(4),
    "periodic": _periodic,
    "curving": _choice(CURVINGS),
    "curving_amplitude": float,
    "ngeo": int,
    "refine": _optional(_floats(4)),
    "equation": _choice(EQUATIONS),
    "gamma": float,
    "advection": _floats(2),
    "kappa": float,
    "mu": float,
    "prandtl": float,
    "N": int,
    "nodes": _selector(NodeFamily.parse),
    "form": _selector(Form.parse),
    "two_point": _selector(parse_two_point),
    "riemann": _selector(parse_riemann),
    "lifting": _bool,
    "fv": _choice(FV_MODES),
    "indicator": _selector(IndicatorKind.parse),
    "indicator_upper": _optional(float),
    "indicator_lower": _optional(float),
    "limiter": lambda s: s.strip().lower(),
    "scheme": lambda s: get_scheme(s).name,
    "cfl": float,
    "cfld": float,
    "dt": _optional(float),
    "t_end": float,
    "analyze_dt": _optional(float),
    "output_dt": _optional(float),
    "initial": lambda s: s.strip().lower(),
}

KEY_ALIASES = {"n": "N", "tend": "t_end", "nodetype": "nodes"}


def validate(cfg: RunConfig) -> None:
    """Cross-field rules; raises ConfigError."""
    from .initial import REGISTRY

    if cfg.form == Form.SPLIT.value and cfg.nodes != NodeFamily.LGL.value:
        raise ConfigError("form = split requires nodes = LGL: the split form relies on the "
                          "summation-by-parts property of the Gauss-Lobatto collocation")
    if cfg.N < 1:
        raise ConfigError("N must be at least 1")
    if cfg.ngeo < 1:
        raise ConfigError("ngeo must be at least 1")
    if min(cfg.nelems) < 1:
        raise ConfigError("nelems must be positive")
    if not (cfg.cfl > 0 and cfg.cfld > 0):
        raise ConfigError("cfl and cfld must be positive")
    if not cfg.t_end > 0:
        raise ConfigError("t_end must be positive")
    for key in ("dt", "analyze_dt", "output_dt"):
        val = getattr(cfg, key)
        if val is not None and not val > 0:
            raise ConfigError(f"{key} must be positive")
    get_limiter(cfg.limiter)
    get_scheme(cfg.scheme)
    if cfg.initial not in REGISTRY:
        raise ConfigError(f"unknown initial condition {cfg.initial!r} ({', '.join(REGISTRY)})")
    for tag, kind in cfg.bc.items():
        BCType.parse(kind)
    if cfg.equation == "scalar" and cfg.form == Form.SPLIT.value and cfg.two_point != "standardmean":
        raise ConfigError("only the standardmean two-point flux exists for the scalar equation")
    if cfg.fv != "off" and cfg.equation == "navierstokes" and cfg.mu > 0:
        raise ConfigError("finite-volume subcells are only available for inviscid systems")
    if cfg.fv != "off" and cfg.equation == "scalar":
        raise ConfigError("finite-volume subcells need the Euler equations (pressure-based reconstruction)")
    if (cfg.indicator_upper is not None and cfg.indicator_lower is not None
            and not cfg.indicator_upper > cfg.indicator_lower):
        raise ConfigError("indicator_upper must exceed indicator_lower")


def parse_config(text: str) -> RunConfig:
    values: dict = {}
    bc: dict = {}
    ic: dict = {}
    seen: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("missing key", line=lineno)
        key = KEY_ALIASES.get(key.lower(), key)
        if key in seen:
            raise ConfigError(f"key {key!r} repeated (first given on line {seen[key]})", line=lineno)
        seen[key] = lineno
        try:
            if key.startswith("bc."):
                tag = key[3:]
                if not tag:
                    raise ValueError("empty boundary tag")
                bc[tag] = BCType.parse(value).value
            elif key.startswith("ic."):
                name = key[3:]
                if not name:
                    raise ValueError("empty parameter name")
                ic[name] = _param(value)
            elif key in CONVERTERS:
                values[key] = CONVERTERS[key](value)
            else:
                raise ConfigError(f"unknown key {key!r}", line=lineno)
        except ConfigError as exc:
            if exc.line is None:
                raise ConfigError(str(exc), line=lineno) from None
            raise
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", line=lineno) from None
    try:
        return RunConfig(bc=bc, ic=ic, **values)
    except ConfigError as exc:
        offending = [seen[k] for k in ("form", "nodes") if k in seen]
        if "split" in str(exc) and offending and exc.line is None:
            raise ConfigError(str(exc), line=max(offending)) from None
        raise


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text; ``parse_config(serialize_config(c)) == c``."""
    lines = []
    for f in fields(cfg):
        if f.name in ("bc", "ic"):
            continue
        value = getattr(cfg, f.name)
        if value is None:
            continue
        text = _fmt_periodic(value) if f.name == "periodic" else _fmt(value)
        lines.append(f"{f.name} = {text}")
    for tag in sorted(cfg.bc):
        lines.append(f"bc.{tag} = {cfg.bc[tag]}")
    for name in sorted(cfg.ic):
        lines.append(f"ic.{name} = {_fmt(cfg.ic[name])}")
    return "\n".join(lines) + "\n"


def load_config(path) -> tuple[RunConfig, str]:
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    return parse_config(text), text
