"""Flat INI-style run configuration.

The format is deliberately small: five known sections, ``key = value``
pairs, ``#``/``;`` comments.  Every diagnostic carries the offending key
and line number, and unknown keys are errors rather than silently dropped,
so a typo cannot quietly fall back to a default.
"""

import hashlib
from dataclasses import dataclass

from .errors import ConfigError, InitialConditionError
from .model import (BeamParams, Constant, InitialCondition, Polynomial,
                    SineMode, SinusoidalOffset, SmoothRamp, SplineTable, Zero)
from .timestep import SimulationConfig

__all__ = ["RunConfig", "parse_config", "config_hash"]

_SECTIONS = ("beam", "fluid", "numerics", "output", "sweep")

_BEAM_KEYS = ("m_p", "m_f", "EI", "T", "c", "L")

# allowed / required keys per velocity profile kind
_FLUID_KEYS = {
    "Constant": ({"V0", "horizon"}, {"V0"}),
    "SinusoidalOffset": ({"V0", "A", "omega", "horizon"}, {"V0", "A", "omega"}),
    "SmoothRamp": ({"V_start", "V_end", "t_ramp", "horizon"},
                   {"V_start", "V_end", "t_ramp"}),
    "SplineTable": ({"knots_t", "knots_V", "horizon"}, {"knots_t", "knots_V"}),
}

_IC_KINDS = ("SineMode", "Polynomial", "Zero")

_NUMERICS_KEYS = {
    "n_elements", "dt", "t_end", "output_stride",
    "ic_kind", "ic_n", "ic_amplitude", "ic_coeffs",
    "ic_velocity_kind", "ic_velocity_n", "ic_velocity_amplitude",
    "ic_velocity_coeffs",
}

_OUTPUT_KEYS = {"timeseries", "plots"}

_SWEEP_KEYS = {"T_values"}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration: physics, numerics, and output plumbing."""

    params: BeamParams
    profile: object
    ic: InitialCondition
    n_elements: int
    dt: float
    t_end: float
    output_stride: int
    timeseries: str
    plots: str
    sweep_T: tuple
    config_hash: str

    def simulation(self, backend=None):
        """The SimulationConfig this run describes."""
        return SimulationConfig(params=self.params, profile=self.profile,
                                ic=self.ic, n_elements=self.n_elements,
                                dt=self.dt, t_end=self.t_end,
                                output_stride=self.output_stride,
                                backend=backend, config_hash=self.config_hash)


def _split_sections(text):
    """{section: {key: (raw_value, line_no)}} with strict validation."""
    sections = {}
    current = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise ConfigError("line %d: unknown section [%s]"
                                  % (line_no, name))
            if name in sections:
                raise ConfigError("line %d: duplicate section [%s]"
                                  % (line_no, name))
            current = sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected 'key = value', got %r"
                              % (line_no, raw.strip()))
        if current is None:
            raise ConfigError("line %d: key outside any section" % line_no)
        key, _, value = line.partition("=")
        key = key.strip()
        if key in current:
            raise ConfigError("line %d: duplicate key %r" % (line_no, key))
        current[key] = (value.strip(), line_no)
    return sections


def _check_keys(section, entries, allowed):
    for key, (_, line_no) in entries.items():
        if key not in allowed:
            raise ConfigError("line %d: unknown key %r in section [%s]"
                              % (line_no, key, section))


def _take(entries, key, convert, default=None, required=False, section=""):
    if key not in entries:
        if required:
            raise ConfigError("section [%s]: missing required key %r"
                              % (section, key))
        return default
    raw, line_no = entries[key]
    try:
        return convert(raw)
    except (ValueError, TypeError):
        raise ConfigError("line %d: cannot parse %s=%r" % (line_no, key, raw))


def _float_list(raw):
    parts = [p for p in raw.replace(",", " ").split() if p]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _parse_beam(entries):
    _check_keys("beam", entries, set(_BEAM_KEYS))
    values = {k: _take(entries, k, float, required=True, section="beam")
              for k in _BEAM_KEYS}
    try:
        return BeamParams(**values)
    except ConfigError as exc:
        raise ConfigError("section [beam]: %s" % exc)


def _parse_fluid(entries):
    kind = _take(entries, "kind", str, required=True, section="fluid")
    if kind not in _FLUID_KEYS:
        _, line_no = entries["kind"]
        raise ConfigError("line %d: unknown velocity kind %r (expected one "
                          "of %s)" % (line_no, kind,
                                      ", ".join(sorted(_FLUID_KEYS))))
    allowed, required = _FLUID_KEYS[kind]
    _check_keys("fluid", entries, allowed | {"kind"})
    for key in required:
        if key not in entries:
            raise ConfigError("section [fluid]: missing required key %r "
                              "for kind %s" % (key, kind))
    horizon = _take(entries, "horizon", float, section="fluid")
    try:
        if kind == "Constant":
            return Constant(_take(entries, "V0", float, required=True,
                                  section="fluid"), horizon=horizon)
        if kind == "SinusoidalOffset":
            return SinusoidalOffset(
                _take(entries, "V0", float, required=True, section="fluid"),
                _take(entries, "A", float, required=True, section="fluid"),
                _take(entries, "omega", float, required=True,
                      section="fluid"),
                horizon=horizon)
        if kind == "SmoothRamp":
            return SmoothRamp(
                _take(entries, "V_start", float, required=True,
                      section="fluid"),
                _take(entries, "V_end", float, required=True,
                      section="fluid"),
                _take(entries, "t_ramp", float, required=True,
                      section="fluid"),
                horizon=horizon)
        return SplineTable(
            _take(entries, "knots_t", _float_list, required=True,
                  section="fluid"),
            _take(entries, "knots_V", _float_list, required=True,
                  section="fluid"),
            horizon=horizon)
    except ConfigError as exc:
        raise ConfigError("section [fluid]: %s" % exc)


def _parse_field(entries, prefix, default_kind):
    kind = _take(entries, prefix + "kind", str, default=default_kind)
    if kind not in _IC_KINDS:
        _, line_no = entries[prefix + "kind"]
        raise ConfigError("line %d: unknown initial-condition kind %r "
                          "(expected one of %s)"
                          % (line_no, kind, ", ".join(_IC_KINDS)))
    used = {k for k in entries
            if k.startswith(prefix) and k != prefix + "kind"
            and not (prefix == "ic_" and k.startswith("ic_velocity_"))}
    wanted = {"SineMode": {prefix + "n", prefix + "amplitude"},
              "Polynomial": {prefix + "coeffs"},
              "Zero": set()}[kind]
    extra = used - wanted
    if extra:
        key = sorted(extra)[0]
        _, line_no = entries[key]
        raise ConfigError("line %d: key %r does not apply to kind %s"
                          % (line_no, key, kind))
    try:
        if kind == "SineMode":
            return SineMode(_take(entries, prefix + "n", int, default=1),
                            _take(entries, prefix + "amplitude", float,
                                  default=0.1))
        if kind == "Polynomial":
            return Polynomial(_take(entries, prefix + "coeffs", _float_list,
                                    required=True, section="numerics"))
        return Zero()
    except InitialConditionError as exc:
        raise ConfigError("section [numerics]: %s" % exc)


def _parse_numerics(entries):
    _check_keys("numerics", entries, _NUMERICS_KEYS)
    n_elements = _take(entries, "n_elements", int, default=32)
    dt = _take(entries, "dt", float, default=1e-3)
    t_end = _take(entries, "t_end", float, default=10.0)
    stride = _take(entries, "output_stride", int, default=10)
    displacement = _parse_field(entries, "ic_", "SineMode")
    velocity = _parse_field(entries, "ic_velocity_", "Zero")
    if n_elements < 1:
        raise ConfigError("section [numerics]: n_elements must be >= 1, "
                          "got %d" % n_elements)
    return (n_elements, dt, t_end, stride,
            InitialCondition(displacement, velocity))


def _canonical(params, profile, ic, n_elements, dt, t_end, stride,
               timeseries, plots, sweep_T):
    """Stable one-line-per-value rendering of the resolved configuration."""
    lines = ["beam.%s=%r" % (k, getattr(params, k)) for k in _BEAM_KEYS]
    lines.append("fluid.kind=%s" % profile.kind)
    for key in sorted(vars(profile)):
        value = getattr(profile, key)
        if hasattr(value, "tolist"):
            value = tuple(value.tolist())
        lines.append("fluid.%s=%r" % (key, value))
    for label, part in (("ic", ic.displacement), ("ic_velocity", ic.velocity)):
        lines.append("numerics.%s_kind=%s" % (label, part.kind))
        for key in sorted(vars(part)):
            lines.append("numerics.%s_%s=%r" % (label, key,
                                                getattr(part, key)))
    lines.append("numerics.n_elements=%d" % n_elements)
    lines.append("numerics.dt=%r" % dt)
    lines.append("numerics.t_end=%r" % t_end)
    lines.append("numerics.output_stride=%d" % stride)
    lines.append("output.timeseries=%s" % timeseries)
    lines.append("output.plots=%s" % plots)
    lines.append("sweep.T_values=%r" % (sweep_T,))
    return "\n".join(lines)


def config_hash(text):
    """Hash of a canonical configuration rendering."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def parse_config(text):
    """Parse configuration text into a validated RunConfig."""
    sections = _split_sections(text)
    for name in ("beam", "fluid"):
        if name not in sections:
            raise ConfigError("missing required section [%s]" % name)
    params = _parse_beam(sections["beam"])
    profile = _parse_fluid(sections["fluid"])
    n_elements, dt, t_end, stride, ic = _parse_numerics(
        sections.get("numerics", {}))

    out = sections.get("output", {})
    _check_keys("output", out, _OUTPUT_KEYS)
    timeseries = _take(out, "timeseries", str, default="timeseries.csv")
    plots = _take(out, "plots", str, default="")

    sweep = sections.get("sweep", {})
    _check_keys("sweep", sweep, _SWEEP_KEYS)
    sweep_T = _take(sweep, "T_values", _float_list, default=())

    digest = config_hash(_canonical(params, profile, ic, n_elements, dt,
                                    t_end, stride, timeseries, plots,
                                    sweep_T))
    run = RunConfig(params=params, profile=profile, ic=ic,
                    n_elements=n_elements, dt=dt, t_end=t_end,
                    output_stride=stride, timeseries=timeseries, plots=plots,
                    sweep_T=sweep_T, config_hash=digest)
    run.simulation()       # surface dt/t_end/stride violations at parse time
    return run
