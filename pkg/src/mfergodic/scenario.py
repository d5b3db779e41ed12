"""Scenario files: strict YAML schema mapped onto dataclass settings."""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ScenarioError
from .potentials import (
    Kernel,
    bump_kernel,
    cosine_kernel,
    gaussian_kernel,
    load_table_kernel,
    polynomial,
)


class _StrictLoader(yaml.SafeLoader):
    """SafeLoader that refuses duplicate mapping keys."""


def _construct_mapping(loader, node, deep=False):
    seen = {}
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        line = key_node.start_mark.line + 1
        if key in seen:
            raise ScenarioError(
                f"duplicate key {key!r} at line {line} (first defined at line {seen[key]})"
            )
        seen[key] = line
    return loader.construct_mapping(node, deep=deep)


_StrictLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


# -- constructor strings -----------------------------------------------------------

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_POLY = re.compile(rf"^poly\s*\[\s*({_NUM}(?:\s*,\s*{_NUM})*)\s*\]$")
_CALL = re.compile(r"^(gaussian|cosine|bump|table)\s*\(\s*(.+?)\s*\)$")


def parse_polynomial(text: str) -> tuple[float, ...]:
    m = _POLY.match(str(text).strip())
    if not m:
        raise ScenarioError(f"expected 'poly [c0, c2, c4, ...]', got {text!r}")
    return tuple(float(c) for c in m.group(1).split(","))


def parse_kernel(text: str, base_dir: Path | None = None) -> Kernel:
    m = _CALL.match(str(text).strip())
    if not m:
        raise ScenarioError(
            f"unknown kernel {text!r}; expected gaussian(s), cosine(k), bump(w) or table(path)"
        )
    name, arg = m.groups()
    if name == "table":
        path = Path(arg.strip("'\""))
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            return load_table_kernel(path)
        except OSError as exc:
            raise ScenarioError(f"cannot read kernel table {path}: {exc}") from exc
    try:
        val = float(arg)
    except ValueError:
        raise ScenarioError(f"{name}() needs a numeric argument, got {arg!r}") from None
    if not val > 0:
        raise ScenarioError(f"{name}() argument must be positive, got {val}")
    return {"gaussian": gaussian_kernel, "cosine": cosine_kernel, "bump": bump_kernel}[name](val)


# -- schema ------------------------------------------------------------------------


@dataclass
class GridSpec:
    lower: float = -6.0
    upper: float = 6.0
    points: int = 33

    def validate(self):
        if not self.upper > self.lower:
            raise ScenarioError("grid: rule 'upper > lower' violated")
        if self.points < 8:
            raise ScenarioError("grid: rule 'points >= 8' violated")


@dataclass
class PotentialSpec:
    V0: str = "poly [0, 1]"
    v0: str | None = None
    v1: str | None = None
    g: float = 0.0
    local: bool = False

    def validate(self):
        parse_polynomial(self.V0)
        if self.v0 is not None:
            parse_polynomial(self.v0)
        if self.g < 0:
            raise ScenarioError("potential: rule 'g >= 0' violated")


@dataclass
class MeanFieldSpec:
    tol: float = 1e-9
    max_outer: int = 500
    mixing: float = 0.5
    init: str = "gaussian"

    def validate(self):
        if not self.tol > 0:
            raise ScenarioError("meanfield: rule 'tol > 0' violated")
        if self.max_outer < 1:
            raise ScenarioError("meanfield: rule 'max_outer >= 1' violated")
        if not 0 < self.mixing <= 1:
            raise ScenarioError("meanfield: rule 'mixing in (0, 1]' violated")
        if self.init not in ("gaussian", "uniform"):
            raise ScenarioError("meanfield: rule 'init in {gaussian, uniform}' violated")


@dataclass
class NParticleSpec:
    N_list: list = field(default_factory=list)
    points_per_axis: dict = field(default_factory=dict)
    tol_N: float = 1e-8

    def validate(self):
        for N in self.N_list:
            if not isinstance(N, int) or not 2 <= N <= 4:
                raise ScenarioError(f"nparticle: rule 'N in {{2, 3, 4}}' violated by {N!r}")
        for k, v in self.points_per_axis.items():
            if not isinstance(k, int) or not isinstance(v, int) or v < 8:
                raise ScenarioError(
                    f"nparticle: rule 'points_per_axis maps N to an integer >= 8' violated by {k!r}: {v!r}"
                )
        if not self.tol_N > 0:
            raise ScenarioError("nparticle: rule 'tol_N > 0' violated")


@dataclass
class DiagnosticsSpec:
    T: float = 1.0
    girsanov_constant: float = 0.25
    moment_k: float = 4.0

    def validate(self):
        if not self.T > 0:
            raise ScenarioError("diagnostics: rule 'T > 0' violated")
        if self.girsanov_constant not in (0.25, 0.5):
            raise ScenarioError("diagnostics: rule 'girsanov_constant in {0.25, 0.5}' violated")


@dataclass
class SDESpec:
    enabled: bool = False
    dt: float = 2e-3
    T: float = 30.0
    burn_in: float = 5.0
    n_paths: int = 1024
    seed: int = 0
    bins: int = 256
    thin: int | None = None
    points: int | None = None
    N_list: list = field(default_factory=list)

    def validate(self):
        if not self.dt > 0:
            raise ScenarioError("sde: rule 'dt > 0' violated")
        if not 0 <= self.burn_in < self.T:
            raise ScenarioError("sde: rule '0 <= burn_in < T' violated")
        if self.n_paths < 16:
            raise ScenarioError("sde: rule 'n_paths >= 16' violated")
        if self.points is not None and (not isinstance(self.points, int) or self.points < 8):
            raise ScenarioError("sde: rule 'points is an integer >= 8' violated")
        if not 0 <= self.seed < 2**64:
            raise ScenarioError("sde: rule 'seed is an unsigned 64-bit integer' violated")
        for N in self.N_list:
            if not isinstance(N, int) or not 2 <= N <= 4:
                raise ScenarioError(f"sde: rule 'N in {{2, 3, 4}}' violated by {N!r}")


@dataclass
class ScalingSpec:
    beta_list: list = field(default_factory=list)
    N_list: list = field(default_factory=lambda: [2, 3, 4])
    kernel: str = "bump(5)"

    def validate(self):
        for b in self.beta_list:
            if not isinstance(b, (int, float)) or not 0.0 < b < 1.0:
                raise ScenarioError(f"scaling: rule 'beta in (0, 1)' violated by beta={b!r}")
        for N in self.N_list:
            if not isinstance(N, int) or not 2 <= N <= 4:
                raise ScenarioError(f"scaling: rule 'N in {{2, 3, 4}}' violated by {N!r}")
        if not str(self.kernel).strip().startswith("bump("):
            raise ScenarioError("scaling: rule 'kernel = bump(width)' violated")


@dataclass
class OutputSpec:
    directory: str | None = None
    formats: list = field(default_factory=lambda: ["csv", "json"])

    def validate(self):
        bad = [f for f in self.formats if f not in ("csv", "json")]
        if bad or not self.formats:
            raise ScenarioError(f"output: rule 'formats is a nonempty subset of {{csv, json}}' violated by {bad}")


@dataclass
class Scenario:
    grid: GridSpec
    potential: PotentialSpec
    meanfield: MeanFieldSpec = field(default_factory=MeanFieldSpec)
    nparticle: NParticleSpec = field(default_factory=NParticleSpec)
    diagnostics: DiagnosticsSpec = field(default_factory=DiagnosticsSpec)
    sde: SDESpec = field(default_factory=SDESpec)
    scaling: ScalingSpec | None = None
    output: OutputSpec = field(default_factory=OutputSpec)
    source_text: str = ""
    base_dir: Path | None = None

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()


_SECTIONS = {
    "grid": GridSpec,
    "potential": PotentialSpec,
    "meanfield": MeanFieldSpec,
    "nparticle": NParticleSpec,
    "diagnostics": DiagnosticsSpec,
    "sde": SDESpec,
    "scaling": ScalingSpec,
    "output": OutputSpec,
}
_REQUIRED = ("grid", "potential")


def _coerce(section: str, name: str, value, default):
    """Light type coercion: ints for int fields, floats for float fields."""
    if value is None:
        return None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ScenarioError(f"{section}.{name}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(f"{section}.{name}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, str):
            # YAML 1.1 reads exponent literals without a dot (1e-9) as strings
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(f"{section}.{name}: expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ScenarioError(f"{section}.{name}: must be finite")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ScenarioError(f"{section}.{name}: expected a list, got {value!r}")
        return value
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ScenarioError(f"{section}.{name}: expected a mapping, got {value!r}")
        return value
    return value


def _build_section(section: str, cls, data):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError(f"section {section!r} must be a mapping")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ScenarioError(f"unknown key(s) {unknown} in section {section!r}; allowed: {sorted(names)}")
    proto = cls()
    kwargs = {k: _coerce(section, k, v, getattr(proto, k)) for k, v in data.items()}
    if section == "grid" and "points" in kwargs and not isinstance(kwargs["points"], int):
        raise ScenarioError("grid.points: expected an integer")
    obj = cls(**kwargs)
    obj.validate()
    return obj


def parse_scenario(source, base_dir: Path | None = None) -> Scenario:
    """Parse a scenario from a path or YAML text; everything is validated up front."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).is_file()):
        path = Path(source)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
        base_dir = path.parent if base_dir is None else base_dir
    else:
        text = str(source)
    try:
        data = yaml.load(text, Loader=_StrictLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark is not None else "?"
        raise ScenarioError(f"syntax error at line {line}: {exc.problem}") from None
    except yaml.YAMLError as exc:
        raise ScenarioError(f"syntax error: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping of sections")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ScenarioError(f"unknown section(s) {unknown}; allowed: {sorted(_SECTIONS)}")
    for req in _REQUIRED:
        if req not in data:
            raise ScenarioError(f"missing required section {req!r}")
    built = {}
    for name, cls in _SECTIONS.items():
        if name in data or name in _REQUIRED:
            built[name] = _build_section(name, cls, data.get(name))
    sc = Scenario(**built, source_text=text, base_dir=base_dir)
    if sc.potential.v1 is not None:
        parse_kernel(sc.potential.v1, base_dir)
    if sc.scaling is not None:
        parse_kernel(sc.scaling.kernel, base_dir)
    return sc
