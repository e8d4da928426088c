"""Run configuration files.

The grammar is line oriented::

    # comment
    [flow]
    variant = conformal
    dt = 1e-4

    [shape]
    kind = sh_bump
    l = 2
    m = 2
    amplitude = 0.05

Sections are ``flow``, ``shape``, ``gauge`` and ``output``. Every key is
optional and falls back to the dataclass default. Floats are written with
``repr`` so that a serialized configuration parses back to an equal object.
"""

from dataclasses import dataclass, field, fields
from typing import Callable, Dict, List, Optional, Tuple

from willflow.log import logger
from willflow.errors import ConfigurationError
from willflow.flow import FlowConfig
from willflow.gauge import AdmissibilityTolerances
from willflow.io import read_text

SHAPE_KINDS = ("sphere", "sh_bump", "multi_bump", "ellipsoid_like", "random_bumps")
EXPORT_FORMATS = ("obj", "coeffs")


class ConfigSyntaxError(ConfigurationError):
    """Malformed line, header or value."""


class UnknownKeyError(ConfigurationError):
    """Section or key that the grammar does not know."""


class OutOfRangeError(ConfigurationError):
    """Well-formed value outside its admissible range."""


@dataclass
class ShapeSpec:
    """Initial surface ``I + sum a Y_lm N`` or a stretched sphere.

    ``sh_bump`` uses ``l``, ``m`` and ``amplitude``; ``multi_bump`` uses
    ``bumps``; ``ellipsoid_like`` uses ``axes``; ``random_bumps`` draws
    ``count`` terms of degree at most ``max_l`` and absolute amplitude at most
    ``amplitude`` from ``seed``.
    """

    kind: str = "sphere"
    l: int = 2
    m: int = 2
    amplitude: float = 0.05
    bumps: List[Tuple[int, int, float]] = field(default_factory=list)
    axes: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    count: int = 3
    max_l: int = 4
    seed: int = 0

    def validate(self):
        checks = [
            ("kind", self.kind in SHAPE_KINDS),
            ("l", self.l >= 0),
            ("m", abs(self.m) <= self.l),
            ("amplitude", self.kind != "random_bumps" or self.amplitude > 0),
            ("bumps", all(l >= 0 and abs(m) <= l for l, m, _ in self.bumps)),
            ("axes", len(self.axes) == 3 and all(a > 0 for a in self.axes)),
            ("count", self.count >= 1),
            ("max_l", self.max_l >= 1),
            ("seed", self.seed >= 0),
        ]
        if self.kind == "multi_bump" and not self.bumps:
            checks.append(("bumps", False))
        _raise_first(self, checks)
        return self


@dataclass
class OutputSpec:
    """Where and how often to write results.

    ``snapshot_every = 0`` writes only the final snapshot.
    """

    directory: str = "willflow_out"
    snapshot_every: int = 0
    formats: Tuple[str, ...] = ("obj", "coeffs")
    resume: Optional[str] = None

    def validate(self):
        checks = [
            ("directory", len(self.directory) > 0),
            ("snapshot_every", self.snapshot_every >= 0),
            ("formats", len(self.formats) > 0 and all(f in EXPORT_FORMATS for f in self.formats)),
        ]
        _raise_first(self, checks)
        return self


def _validate_gauge(tol: AdmissibilityTolerances):
    checks = [(f.name, getattr(tol, f.name) > 0) for f in fields(tol)]
    _raise_first(tol, checks)
    return tol


@dataclass
class RunConfig:
    flow: FlowConfig = field(default_factory=FlowConfig)
    shape: ShapeSpec = field(default_factory=ShapeSpec)
    gauge: AdmissibilityTolerances = field(default_factory=AdmissibilityTolerances)
    output: OutputSpec = field(default_factory=OutputSpec)

    def validate(self):
        self.flow.validate()
        self.shape.validate()
        _validate_gauge(self.gauge)
        self.output.validate()
        return self


def _raise_first(obj, checks):
    for key, ok in checks:
        if not ok:
            raise ConfigurationError(
                "value {!r} out of range".format(getattr(obj, key)), key=key
            )


# value codecs


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected a boolean, got {!r}".format(text))


def _parse_optional_float(text: str) -> Optional[float]:
    if text.lower() in ("auto", "none"):
        return None
    return float(text)


def _parse_bumps(text: str) -> List[Tuple[int, int, float]]:
    bumps = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError("expected l:m:amplitude, got {!r}".format(item))
        bumps.append((int(parts[0]), int(parts[1]), float(parts[2])))
    return bumps


def _parse_axes(text: str) -> Tuple[float, float, float]:
    axes = tuple(float(a) for a in text.split(","))
    if len(axes) != 3:
        raise ValueError("expected three comma separated axes")
    return axes


def _parse_formats(text: str) -> Tuple[str, ...]:
    return tuple(f.strip() for f in text.split(",") if f.strip())


def _format_float(x: float) -> str:
    return repr(float(x))


def _format_bool(x: bool) -> str:
    return "true" if x else "false"


Codec = Tuple[Callable[[str], object], Callable[[object], str]]

_FLOAT: Codec = (float, _format_float)
_INT: Codec = (int, str)
_BOOL: Codec = (_parse_bool, _format_bool)
_STR: Codec = (str, str)

SECTIONS: Dict[str, Tuple[type, Dict[str, Codec]]] = {
    "flow": (
        FlowConfig,
        {
            "variant": _STR,
            "dt": _FLOAT,
            "t_end": _FLOAT,
            "stabilizer": (
                _parse_optional_float,
                lambda x: "auto" if x is None else _format_float(x),
            ),
            "rebalance_every": _INT,
            "stop_w0": _FLOAT,
            "L_max": _INT,
            "max_hopf": _FLOAT,
            "max_lambda_excursion": _FLOAT,
            "energy_tolerance": _FLOAT,
            "conformal_relaxation": _FLOAT,
            "dealias": _BOOL,
            "reproject_fraction": _FLOAT,
            "max_halvings": _INT,
            "grow_after": _INT,
            "grow_factor": _FLOAT,
            "store_every": _INT,
        },
    ),
    "shape": (
        ShapeSpec,
        {
            "kind": _STR,
            "l": _INT,
            "m": _INT,
            "amplitude": _FLOAT,
            "bumps": (
                _parse_bumps,
                lambda b: ", ".join(
                    "{:d}:{:d}:{}".format(l, m, _format_float(a)) for l, m, a in b
                ),
            ),
            "axes": (_parse_axes, lambda a: ", ".join(_format_float(x) for x in a)),
            "count": _INT,
            "max_l": _INT,
            "seed": _INT,
        },
    ),
    "gauge": (
        AdmissibilityTolerances,
        {f.name: _FLOAT for f in fields(AdmissibilityTolerances)},
    ),
    "output": (
        OutputSpec,
        {
            "directory": _STR,
            "snapshot_every": _INT,
            "formats": (_parse_formats, lambda f: ", ".join(f)),
            "resume": _STR,
        },
    ),
}


def _strip_comment(line: str) -> str:
    if line.lstrip().startswith("#"):
        return ""
    index = line.find(" #")
    if index >= 0:
        line = line[:index]
    return line.strip()


def parse_config(text: str) -> RunConfig:
    """Parses and validates configuration text.

    Args:
        text (str): File contents.

    Returns:
        RunConfig: Validated configuration with defaults filled in.

    Raises:
        ConfigSyntaxError: malformed header, line or value.
        UnknownKeyError: unknown section or key.
        OutOfRangeError: a value outside its admissible range.
    """
    values: Dict[str, Dict[str, object]] = {name: {} for name in SECTIONS}
    lines: Dict[Tuple[str, str], int] = {}
    section = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigSyntaxError("malformed section header {!r}".format(line), line=number)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise UnknownKeyError("unknown section", line=number, key=section)
            continue
        if "=" not in line:
            raise ConfigSyntaxError("expected 'key = value', got {!r}".format(line), line=number)
        key, value = (part.strip() for part in line.split("=", 1))
        if section is None:
            raise ConfigSyntaxError("key outside of a section", line=number, key=key)
        if not key or not value:
            raise ConfigSyntaxError("empty key or value", line=number, key=key or None)
        codecs = SECTIONS[section][1]
        if key not in codecs:
            raise UnknownKeyError("unknown key in section [{}]".format(section), line=number, key=key)
        if key in values[section]:
            raise ConfigSyntaxError("duplicate key", line=number, key=key)
        try:
            values[section][key] = codecs[key][0](value)
        except ValueError as err:
            raise ConfigSyntaxError("cannot parse value: {}".format(err), line=number, key=key)
        lines[(section, key)] = number

    parts = {name: SECTIONS[name][0](**values[name]) for name in SECTIONS}
    config = RunConfig(**parts)
    validators = {
        "flow": config.flow.validate,
        "shape": config.shape.validate,
        "gauge": lambda: _validate_gauge(config.gauge),
        "output": config.output.validate,
    }
    for name, validate in validators.items():
        try:
            validate()
        except ConfigurationError as err:
            line = lines.get((name, err.key))
            logger.error("Invalid value for {}.{}.".format(name, err.key))
            raise OutOfRangeError(
                "value {!r} out of range".format(values[name].get(err.key, "default")),
                line=line,
                key=err.key,
            )
    return config


def serialize_config(config: RunConfig) -> str:
    """Canonical text of ``config``; keys at their default are written too."""
    out = []
    for name, (_, codecs) in SECTIONS.items():
        section = getattr(config, name)
        out.append("[{}]".format(name))
        for key, (_, fmt) in codecs.items():
            value = getattr(section, key)
            if value is None and key == "resume" or value == []:
                continue
            out.append("{} = {}".format(key, fmt(value)))
        out.append("")
    return "\n".join(out)


def read_config(path) -> RunConfig:
    return parse_config(read_text(path))
