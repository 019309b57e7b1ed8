"""
Run configuration: a line-oriented ``key = value`` file grouped under
``[section]`` headers.

Grammar
-------
* ``#`` or ``;`` starts a comment that runs to the end of the line.
* ``[name]`` opens a section; a section may appear only once.
* ``key = value`` sets a key in the current section.  Values are numbers,
  booleans (true/false), or bare strings.
* Blank lines are ignored.

Constitutive functions are chosen by family name; their parameters are
given as ``<field>_<parameter>`` keys.  For example::

    [eos]
    family = ideal_gas
    gamma_ad = 1.3333333333333333
    m = 1

    [transport]
    zeta = n_exp
    zeta_coef = 1
    tau0 = constant
    tau0_value = 1

Every problem in the file is collected and reported together, each with its
line number.  The documented default of every optional key is listed in
``SCHEMA`` and in the README.
"""

from __future__ import annotations

import difflib
import inspect
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import constitutive as C
from .certifier import CertifyOptions, ShellData
from .state import ConstantState


class ConfigError(ValueError):
    """All problems found in a configuration file."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


REQUIRED = object()


@dataclass(frozen=True)
class Key:
    kind: type
    default: object = REQUIRED
    check: Optional[tuple] = None  # (predicate, message)
    doc: str = ""


def _positive():
    return (lambda v: v > 0, "must be > 0")


def _nonneg():
    return (lambda v: v >= 0, "must be >= 0")


SCHEMA = {
    "eos": {
        "family": Key(str, "ideal_gas", doc="pressure family"),
        "p0": Key(float, 0.0, _nonneg(), "lower pressure constant"),
        "p1": Key(float, 0.0, _nonneg(), "upper pressure constant"),
    },
    "transport": {
        "zeta": Key(str, "zero", doc="bulk viscosity family"),
        "tau0": Key(str, "constant", doc="relaxation time family (default constant 1)"),
        "lambda": Key(str, "zero", doc="second-order coefficient family"),
        "tau0_floor": Key(float, 0.0, _nonneg(), "declared lower bound of tau0; 0 infers one"),
        "lipschitz_bound": Key(float, math.nan, doc="declared Lipschitz bound of p; nan skips"),
    },
    "background": {
        "rho_bar": Key(float, REQUIRED, _positive()),
        "n_bar": Key(float, REQUIRED, _positive()),
    },
    "data": {
        "R0": Key(float, 1.0, _positive()),
        "ell": Key(float, 0.05, _positive()),
        "sigma": Key(float, 1.0, _nonneg()),
        "smooth_w": Key(float, math.nan, _nonneg(), "ramp width; nan means ell/10"),
    },
    "grid": {
        "mode": Key(str, "radial", (lambda v: v in ("planar", "radial"), "must be planar or radial")),
        "N": Key(int, 2000, (lambda v: v >= 8, "must be >= 8")),
        "L": Key(float, math.nan, _positive(), "domain size; nan sizes it from the causal cone"),
        "cfl": Key(float, 0.4, (lambda v: 0 < v <= 1, "must lie in (0, 1]")),
        "eps_d": Key(float, 0.1, _nonneg(), "fourth-difference dissipation strength"),
        "t_max": Key(float, 1.0, _positive()),
    },
    "thresholds": {
        "grad_factor": Key(float, 1e3, (lambda v: v > 1, "must be > 1")),
        "delta": Key(float, 1e-6, _positive()),
        "leak_tol": Key(float, 1e-6, _positive()),
        "n_floor": Key(float, 1e-12, _nonneg()),
    },
    "certify": {
        "mu_margin": Key(float, 0.05, _positive()),
        "sigma_min": Key(float, 1.0, _positive()),
        "sigma_max": Key(float, 2.0**20, _positive()),
        "rel_tol": Key(float, 0.01, _positive()),
    },
    "flowline": {
        "rho0": Key(float, math.nan, _positive(), "initial rho; nan uses rho_bar"),
        "n0": Key(float, math.nan, _positive(), "initial n; nan uses n_bar"),
        "Pi0": Key(float, 0.0),
        "forcing": Key(str, "sine", (lambda v: v in ("constant", "sine", "random"),
                                     "must be constant, sine or random")),
        "amp": Key(float, 0.5),
        "omega": Key(float, 1.0),
        "offset": Key(float, 0.0),
        "tau_max": Key(float, 10.0, _positive()),
        "samples": Key(int, 201, (lambda v: v >= 2, "must be >= 2")),
        "seed": Key(int, 0),
        "eps": Key(float, 1e-3, _positive(), "scale of the transport initial value"),
    },
    "riemann": {
        "n": Key(float, 1.0, _positive(), "frozen particle density"),
        "rho_min": Key(float, 0.1, _positive()),
        "rho_max": Key(float, 10.0, _positive()),
        "u_max": Key(float, 5.0, _nonneg()),
        "Pi_frac": Key(float, 0.2, _nonneg(), "q ranges over p +- Pi_frac * rho"),
        "points": Key(int, 5, (lambda v: v >= 2, "must be >= 2")),
    },
    "output": {
        "directory": Key(str, "out"),
        "interval": Key(int, 10, (lambda v: v >= 1, "must be >= 1"), "steps between diagnostics rows"),
        "snapshots": Key(int, 0, (lambda v: v >= 0, "must be >= 0"), "rows between snapshots; 0 none"),
    },
}

REQUIRED_SECTIONS = ("eos", "background")
FIELD_KEYS = {"eos": ("family",), "transport": ("zeta", "tau0", "lambda")}
STRING_PARAMS = ("path", "variable")
# config names that differ from the family's parameter name
PARAM_ALIASES = {("ideal_gas", "gamma"): "gamma_ad"}
# parameters with a documented default although the family requires them
FALLBACK_PARAMS = {("tau0", "value"): 1.0}


def family_params(name: str) -> dict:
    """{parameter: default or REQUIRED} for a registered family."""
    sig = inspect.signature(C.FAMILIES[name])
    return {
        p.name: (REQUIRED if p.default is inspect.Parameter.empty else p.default)
        for p in sig.parameters.values()
    }


# ---------------------------------------------------------------------------
# Typed configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldConfig:
    family: str
    params: dict = field(default_factory=dict)

    def build(self) -> C.Field:
        return C.FAMILIES[self.family](**self.params)


@dataclass(frozen=True)
class RunConfig:
    eos: FieldConfig
    zeta: FieldConfig
    tau0: FieldConfig
    lam: FieldConfig
    sections: dict  # section -> {key: value} after defaults
    present: frozenset = frozenset()
    path: Optional[str] = None

    def get(self, section, key):
        return self.sections[section][key]

    def constitutive_set(self) -> C.ConstitutiveSet:
        t = self.sections["transport"]
        lip = t["lipschitz_bound"]
        return C.ConstitutiveSet(
            pressure=self.eos.build(),
            zeta=self.zeta.build(),
            tau0=self.tau0.build(),
            lam=self.lam.build(),
            p0=self.get("eos", "p0"),
            p1=self.get("eos", "p1"),
            tau0_floor=t["tau0_floor"],
            lipschitz_bound=None if math.isnan(lip) else lip,
        )

    def background(self) -> ConstantState:
        b = self.sections["background"]
        return ConstantState(b["rho_bar"], b["n_bar"])

    def shell_data(self) -> ShellData:
        d = self.sections["data"]
        w = None if math.isnan(d["smooth_w"]) else d["smooth_w"]
        return ShellData(d["R0"], d["ell"], d["sigma"], self.background(), smooth_w=w)

    def certify_options(self) -> CertifyOptions:
        return CertifyOptions(mu_margin=self.get("certify", "mu_margin"))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _strip_comment(line: str) -> str:
    for mark in ("#", ";"):
        i = line.find(mark)
        if i >= 0:
            line = line[:i]
    return line.strip()


def _convert(kind, text):
    if kind is str:
        return text
    if kind is bool:
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError("expected true or false")
    if kind is int:
        try:
            return int(text)
        except ValueError:
            value = float(text)
            if not value.is_integer():
                raise ValueError("expected an integer") from None
            return int(value)
    return float(text)


def _line_of(message):
    head = message.split(":", 1)[0]
    return int(head[5:]) if head.startswith("line ") and head[5:].isdigit() else 0


def _suggest(key, allowed):
    close = difflib.get_close_matches(key, allowed, n=1)
    return f" (did you mean '{close[0]}'?)" if close else ""


def read_sections(text: str):
    """Raw {section: {key: (value, line)}} plus syntax errors."""
    sections, errors = {}, []
    header_line = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append(f"line {lineno}: malformed section header {line!r}")
                current = None
                continue
            name = line[1:-1].strip()
            if name in sections:
                errors.append(f"line {lineno}: section [{name}] repeated (first at line {header_line[name]})")
            sections.setdefault(name, {})
            header_line.setdefault(name, lineno)
            current = name
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            errors.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        if current is None:
            errors.append(f"line {lineno}: key '{key}' appears before any section header")
            continue
        if key in sections[current]:
            errors.append(f"line {lineno}: [{current}] {key} repeated (first at line {sections[current][key][1]})")
            continue
        sections[current][key] = (value, lineno)
    return sections, header_line, errors


def parse_config_text(text: str, path: Optional[str] = None) -> RunConfig:
    raw, header_line, errors = read_sections(text)
    base = Path(path).parent if path else Path(".")

    for name in raw:
        if name not in SCHEMA:
            errors.append(f"line {header_line[name]}: unknown section [{name}]"
                          + _suggest(name, list(SCHEMA)))
    for name in REQUIRED_SECTIONS:
        if name not in raw:
            errors.append(f"missing required section [{name}]")

    values = {}
    fields = {}
    for section, schema in SCHEMA.items():
        given = dict(raw.get(section, {}))
        out = {}
        # family-valued keys first, so their parameter keys become known
        allowed = set(schema)
        for fkey in FIELD_KEYS.get(section, ()):
            fam_text, fam_line = given.get(fkey, (schema[fkey].default, None))
            fam = fam_text
            if fam not in C.FAMILIES:
                errors.append(f"line {fam_line}: [{section}] {fkey} = {fam}: unknown family"
                              + _suggest(fam, list(C.FAMILIES)))
                continue
            prefix = "" if section == "eos" else f"{fkey}_"
            params, complete = {}, True
            for pname, pdef in family_params(fam).items():
                full = prefix + PARAM_ALIASES.get((fam, pname), pname)
                allowed.add(full)
                if full in given:
                    text_v, ln = given[full]
                    kind = str if pname in STRING_PARAMS else float
                    try:
                        v = _convert(kind, text_v)
                    except ValueError:
                        errors.append(f"line {ln}: [{section}] {full}: expected a number, got {text_v!r}")
                        complete = False
                        continue
                    if pname == "path":
                        v = str((base / v).resolve()) if not Path(v).is_absolute() else v
                    params[pname] = v
                elif (fkey, pname) in FALLBACK_PARAMS:
                    params[pname] = FALLBACK_PARAMS[(fkey, pname)]
                elif pdef is REQUIRED:
                    where = f"line {fam_line}: " if fam_line else ""
                    errors.append(f"{where}[{section}] family {fam} needs key '{full}'")
                    complete = False
            if complete:
                fields[(section, fkey)] = (fam, params, fam_line)
        for key, (text_v, ln) in given.items():
            if key not in allowed:
                errors.append(f"line {ln}: unknown key [{section}] {key}" + _suggest(key, sorted(allowed)))
        for key, spec in schema.items():
            if key in given:
                text_v, ln = given[key]
                try:
                    v = _convert(spec.kind, text_v)
                except ValueError:
                    kind = {float: "a number", int: "an integer", bool: "true/false"}.get(spec.kind, "text")
                    errors.append(f"line {ln}: [{section}] {key}: expected {kind}, got {text_v!r}")
                    continue
                if spec.check and not (isinstance(v, float) and math.isnan(v)) and not spec.check[0](v):
                    errors.append(f"line {ln}: [{section}] {key} = {text_v}: {spec.check[1]}")
                    continue
                out[key] = v
            elif spec.default is REQUIRED:
                if section in raw:
                    errors.append(f"line {header_line[section]}: [{section}] missing required key '{key}'")
            else:
                out[key] = spec.default
        values[section] = out

    built = {}
    for (section, fkey), (fam, params, ln) in fields.items():
        try:
            built[fkey] = FieldConfig(fam, params)
            built[fkey].build()
        except (ValueError, OSError) as exc:
            errors.append(f"line {ln}: [{section}] {fkey} = {fam}: {exc}")

    if errors:
        raise ConfigError(sorted(errors, key=_line_of))
    return RunConfig(built["family"], built["zeta"], built["tau0"], built["lambda"], values,
                     frozenset(raw), path)


def parse_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    return parse_config_text(text, str(path))
