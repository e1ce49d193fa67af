"""Run configuration: INI-style sections, total validation, deterministic dumps.

Every key has a default, so an empty document is a valid configuration.
``dump_config(parse_config(text))`` is a fixed point of
``parse_config``/``dump_config``: dumping twice gives identical bytes.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .contour import CompactK
from .exceptions import ConfigurationError
from .grand_canonical import EnsembleParams
from .lattice import (BoxSpec, CoulombWells, FieldConfig, InversePowerWells,
                      SinusoidalVectorPotential, TabulatedPotential, ZeroPotential,
                      ZeroVectorPotential)

__all__ = [
    "BoxSection",
    "FieldSection",
    "EnsembleSection",
    "ContourSection",
    "OutputSection",
    "RunSection",
    "RunConfig",
    "parse_config",
    "dump_config",
    "load_config",
]

POTENTIALS = ("zero", "coulomb", "inverse_power", "tabulated")
VECTOR_POTENTIALS = ("zero", "sinusoidal")
METHODS = ("eigen", "dunford")
GAUGES = ("symmetric",)


def _opt(kind, **meta):
    return dict(kind=kind, **meta)


@dataclass(frozen=True)
class BoxSection:
    n: int = field(default=4, metadata=_opt("int", min=2))
    scale: float = field(default=1.0, metadata=_opt("float", min=1.0))
    scales: tuple = field(default=(1.0, 2.0, 3.0), metadata=_opt("floats", min=1.0))
    base_cell: tuple = field(default=(1.0, 1.0, 1.0), metadata=_opt("floats", length=3, positive=True))
    max_sites: int = field(default=200_000, metadata=_opt("int", min=1))


@dataclass(frozen=True)
class FieldSection:
    omega_re: float = field(default=0.0, metadata=_opt("float"))
    omega_im: float = field(default=0.0, metadata=_opt("float"))
    omega_grid: tuple = field(default=(), metadata=_opt("floats"))
    gauge: str = field(default="symmetric", metadata=_opt("choice", choices=GAUGES))
    vector_potential: str = field(default="zero", metadata=_opt("choice", choices=VECTOR_POTENTIALS))
    vp_amplitude: float = field(default=0.5, metadata=_opt("float"))
    potential: str = field(default="zero", metadata=_opt("choice", choices=POTENTIALS))
    coupling: float = field(default=1.0, metadata=_opt("float"))
    alpha: float = field(default=1.5, metadata=_opt("float", min_open=0.0, max_open=2.0))
    potential_file: str = field(default="", metadata=_opt("str"))
    r_cut: Optional[float] = field(default=None, metadata=_opt("float?", positive=True))


@dataclass(frozen=True)
class EnsembleSection:
    beta: float = field(default=1.0, metadata=_opt("float", positive=True))
    z_re: float = field(default=1.0, metadata=_opt("float"))
    z_im: float = field(default=0.0, metadata=_opt("float"))
    z_grid: tuple = field(default=(), metadata=_opt("floats"))
    epsilon: int = field(default=1, metadata=_opt("int", choices=(1, -1)))
    rho0: Optional[float] = field(default=None, metadata=_opt("float?", positive=True))
    n_particles: Optional[int] = field(default=None, metadata=_opt("int?", min=0))
    order: int = field(default=2, metadata=_opt("int", min=1, max=8))


@dataclass(frozen=True)
class ContourSection:
    method: str = field(default="eigen", metadata=_opt("choice", choices=METHODS))
    e0_offset: float = field(default=1.0, metadata=_opt("float", positive=True))
    k_radius: float = field(default=0.0, metadata=_opt("float", min=0.0))
    ray_tol: float = field(default=1e-14, metadata=_opt("float", positive=True))
    segment_nodes: int = field(default=64, metadata=_opt("int", min=16))
    ray_nodes: int = field(default=128, metadata=_opt("int", min=16))
    cauchy_radius: float = field(default=0.1, metadata=_opt("float", positive=True))
    cauchy_nodes: int = field(default=32, metadata=_opt("int", min=4))


@dataclass(frozen=True)
class OutputSection:
    directory: str = field(default="out", metadata=_opt("str"))
    formats: tuple = field(default=("csv", "json"), metadata=_opt("words", choices=("csv", "json")))


@dataclass(frozen=True)
class RunSection:
    seed: int = field(default=0, metadata=_opt("int", min=0))
    threads: int = field(default=1, metadata=_opt("int", min=1))
    dense_cap: int = field(default=4096, metadata=_opt("int", min=1))


SECTIONS = {
    "box": BoxSection,
    "field": FieldSection,
    "ensemble": EnsembleSection,
    "contour": ContourSection,
    "output": OutputSection,
    "run": RunSection,
}


@dataclass(frozen=True)
class RunConfig:
    box: BoxSection = dataclasses.field(default_factory=BoxSection)
    field: FieldSection = dataclasses.field(default_factory=FieldSection)
    ensemble: EnsembleSection = dataclasses.field(default_factory=EnsembleSection)
    contour: ContourSection = dataclasses.field(default_factory=ContourSection)
    output: OutputSection = dataclasses.field(default_factory=OutputSection)
    run: RunSection = dataclasses.field(default_factory=RunSection)

    # -- builders -----------------------------------------------------------
    @property
    def omega(self) -> complex:
        return complex(self.field.omega_re, self.field.omega_im)

    @property
    def z(self) -> complex:
        return complex(self.ensemble.z_re, self.ensemble.z_im)

    def omegas(self) -> list:
        if self.field.omega_grid:
            return [complex(w, self.field.omega_im) for w in self.field.omega_grid]
        return [self.omega]

    def zs(self) -> list:
        if self.ensemble.z_grid:
            return [complex(z, self.ensemble.z_im) for z in self.ensemble.z_grid]
        return [self.z]

    def box_spec(self, scale: Optional[float] = None) -> BoxSpec:
        return BoxSpec(n=self.box.n, scale=self.box.scale if scale is None else scale,
                       base_cell=tuple(self.box.base_cell))

    def field_config(self, omega: Optional[complex] = None) -> FieldConfig:
        f = self.field
        if f.vector_potential == "sinusoidal":
            vp = SinusoidalVectorPotential(f.vp_amplitude)
        else:
            vp = ZeroVectorPotential()
        if f.potential == "coulomb":
            V = CoulombWells(f.coupling)
        elif f.potential == "inverse_power":
            V = InversePowerWells(f.coupling, f.alpha)
        elif f.potential == "tabulated":
            V = TabulatedPotential.from_file(f.potential_file)
        else:
            V = ZeroPotential()
        return FieldConfig(omega=self.omega if omega is None else omega, vector_potential=vp,
                           potential=V, r_cut=f.r_cut)

    def ensemble_params(self, omega=None, z=None) -> EnsembleParams:
        e = self.ensemble
        z = self.z if z is None else z
        if complex(z).imag == 0:
            z = complex(z).real
        return EnsembleParams(beta=e.beta, omega=self.omega if omega is None else omega,
                              z=z, epsilon=e.epsilon)

    def compact_k(self, z=None) -> CompactK:
        return CompactK.disc(self.z if z is None else z, self.contour.k_radius)


# -- parsing ---------------------------------------------------------------

def _parse_float(raw: str) -> float:
    v = float(raw)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _parse_int(raw: str) -> int:
    s = raw.strip()
    v = int(s, 10)
    return v


def _parse_value(kind: str, raw: str):
    raw = raw.strip()
    if kind.endswith("?"):
        if raw == "":
            return None
        kind = kind[:-1]
    if kind == "int":
        return _parse_int(raw)
    if kind == "float":
        return _parse_float(raw)
    if kind == "str" or kind == "choice":
        return raw
    if kind == "floats":
        return tuple(_parse_float(x) for x in raw.replace(",", " ").split())
    if kind == "words":
        return tuple(x for x in raw.replace(",", " ").split())
    raise AssertionError(kind)


def _validate(name: str, value, meta: dict) -> Optional[str]:
    if value is None:
        return None
    vals = value if isinstance(value, tuple) else (value,)
    if "length" in meta and len(vals) != meta["length"]:
        return f"{name}: expected {meta['length']} values, got {len(vals)}"
    choices = meta.get("choices")
    for v in vals:
        if choices is not None and v not in choices:
            return f"{name}: {v!r} not one of {', '.join(map(str, choices))}"
        if "min" in meta and v < meta["min"]:
            return f"{name}: {v!r} below minimum {meta['min']}"
        if "max" in meta and v > meta["max"]:
            return f"{name}: {v!r} above maximum {meta['max']}"
        if meta.get("positive") and not v > 0:
            return f"{name}: {v!r} must be positive"
        if "min_open" in meta and not v > meta["min_open"]:
            return f"{name}: {v!r} must exceed {meta['min_open']}"
        if "max_open" in meta and not v < meta["max_open"]:
            return f"{name}: {v!r} must stay below {meta['max_open']}"
    return None


def _cross_checks(cfg: RunConfig) -> list:
    errors = []
    b = cfg.box
    for s in (b.scale,) + tuple(b.scales):
        for side in b.base_cell:
            cells = s * side * b.n
            if abs(cells - round(cells)) > 1e-9:
                errors.append(f"box: scale {s} x side {side} x n {b.n} is not an integer "
                              "number of grid cells")
                break
    if cfg.field.potential == "tabulated":
        path = cfg.field.potential_file
        if not path:
            errors.append("field.potential_file: required for the tabulated potential")
        elif not Path(path).is_file():
            errors.append(f"field.potential_file: {path!r} does not exist")
    e = cfg.ensemble
    if e.rho0 is not None and e.n_particles is not None:
        errors.append("ensemble: give either rho0 or n_particles, not both")
    return errors


def parse_config(text: str) -> RunConfig:
    """Validate an INI document; raises ``ConfigurationError`` listing every problem."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration: {exc}", [str(exc)]) from None
    errors = []
    sections = {}
    for sec in parser.sections():
        if sec not in SECTIONS:
            errors.append(f"unknown section [{sec}]")
    for sec, cls in SECTIONS.items():
        known = {f.name: f for f in fields(cls)}
        values = {}
        if parser.has_section(sec):
            for key, raw in parser.items(sec):
                if key not in known:
                    errors.append(f"unknown key {sec}.{key}")
                    continue
                meta = known[key].metadata
                try:
                    v = _parse_value(meta["kind"], raw)
                except (ValueError, TypeError) as exc:
                    errors.append(f"{sec}.{key}: cannot parse {raw!r} ({exc})")
                    continue
                msg = _validate(f"{sec}.{key}", v, meta)
                if msg:
                    errors.append(msg)
                    continue
                values[key] = v
        sections[sec] = cls(**values)
    cfg = RunConfig(**sections)
    if not errors:
        errors += _cross_checks(cfg)
    if errors:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(errors), errors)
    return cfg


def _format_value(kind: str, value) -> str:
    if value is None:
        return ""
    if kind.startswith("float") and not kind.startswith("floats"):
        return repr(float(value))
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind == "words":
        return ", ".join(value)
    return str(value)


def dump_config(cfg: RunConfig) -> str:
    """Serialize every key (defaults included) in a fixed order."""
    lines = []
    for sec, cls in SECTIONS.items():
        lines.append(f"[{sec}]")
        obj = getattr(cfg, sec)
        for f in fields(cls):
            lines.append(f"{f.name} = {_format_value(f.metadata['kind'], getattr(obj, f.name))}".rstrip())
        lines.append("")
    return "\n".join(lines)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def override(cfg: RunConfig, section: str, **values) -> RunConfig:
    """Copy of ``cfg`` with some keys of one section replaced."""
    return replace(cfg, **{section: replace(getattr(cfg, section), **values)})


def to_dict(cfg: RunConfig) -> dict:
    out = {}
    for sec in SECTIONS:
        obj = getattr(cfg, sec)
        out[sec] = {f.name: (list(v) if isinstance(v, tuple) else v)
                    for f in fields(obj) for v in [getattr(obj, f.name)]}
    return out


def bose_warning(cfg: RunConfig, E0_guess: float) -> Optional[str]:
    """Pre-run admissibility note for Bose activities (hard check happens later)."""
    e = cfg.ensemble
    if e.epsilon != -1:
        return None
    bound = float(np.exp(e.beta * E0_guess))
    bad = [z for z in cfg.zs() if z.imag == 0 and z.real >= bound]
    if bad:
        return (f"Bose activity {bad[0].real} is not below exp(beta E0) ~ {bound:.6g}; "
                "evaluation will fail")
    return None
