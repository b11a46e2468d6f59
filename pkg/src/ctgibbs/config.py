"""Run configuration: INI-style sections of ``key = value`` pairs.

Grammar
-------
The file is read with :mod:`configparser` (no interpolation, ``#`` and
``;`` comments, also after a value; keys case-sensitive).  Recognized sections and keys::

    [geometry]   N, dso, dod, det_len, p, fov, det_offset
    [phantom]    kind (grains | ppower), n_grains, zero_fraction, power, seed
    [data]       noise_level, sigma_true_deg, angle_step_deg, span_deg, seed
    [sampler]    mode (uncertain | fixed) and every GibbsConfig field except
                 sample_angles, which ``mode`` controls
    [output]     dir

Every key is optional.  Unknown sections or keys raise :class:`ConfigError`
naming the offender; values are validated before anything is computed.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import FanBeamGeometry
from .gibbs import GibbsConfig

OUTPUT_ROOT_ENV = "CTGIBBS_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "ctgibbs_out"
MODES = ("uncertain", "fixed")
PHANTOMS = ("grains", "ppower")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is ``section.name`` when known."""

    def __init__(self, message, key=None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


@dataclass
class GeometrySection:
    N: int = 64
    dso: float = 450.0
    dod: float = 150.0
    det_len: float = 300.0
    p: int | None = None
    fov: float | None = None
    det_offset: float = 0.0

    def build(self) -> FanBeamGeometry:
        geom = FanBeamGeometry.reference(self.N, fov=self.fov, dso=self.dso, dod=self.dod,
                                             det_len=self.det_len)
        if self.p is not None or self.det_offset:
            geom = dataclasses.replace(geom, p=self.p if self.p is not None else geom.p,
                                       det_offset=self.det_offset)
        return geom


@dataclass
class PhantomSection:
    kind: str = "grains"
    n_grains: int = 30
    zero_fraction: float = 0.5
    power: float = 2.0
    seed: int = 0


@dataclass
class DataSection:
    noise_level: float = 0.01
    sigma_true_deg: float = 0.5
    angle_step_deg: float = 8.0
    span_deg: float = 360.0
    seed: int = 0


@dataclass
class SamplerSection:
    mode: str = "uncertain"
    gibbs: GibbsConfig = field(default_factory=GibbsConfig)


@dataclass
class RunConfig:
    geometry: GeometrySection = field(default_factory=GeometrySection)
    phantom: PhantomSection = field(default_factory=PhantomSection)
    data: DataSection = field(default_factory=DataSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    output_dir: str | None = None
    source: str | None = None

    @property
    def gibbs(self) -> GibbsConfig:
        return self.sampler.gibbs

    def output_root(self) -> Path:
        """``[output] dir``, else ``$CTGIBBS_OUTPUT_ROOT``, else ``./ctgibbs_out``."""
        if self.output_dir:
            return Path(self.output_dir)
        return Path(os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT))


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int(text):
    v = float(text)
    if not math.isfinite(v) or v != int(v):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def _parse_float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {text!r}")
    return v


def _converter(annotation):
    ann = str(annotation).replace(" ", "")
    optional = "None" in ann
    base = ann.replace("|None", "").replace("None|", "")
    fn = {"int": _parse_int, "float": _parse_float, "bool": _parse_bool, "str": str.strip}[base]
    if not optional:
        return fn

    def parse(text):
        return None if text.strip().lower() in ("", "none") else fn(text)

    return parse


def _fill(target_cls, items, section, skip=()):
    spec = {f.name: f for f in dataclasses.fields(target_cls) if f.name not in skip}
    values = {}
    for key, text in items:
        if key not in spec:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(spec))})", f"{section}.{key}")
        try:
            values[key] = _converter(spec[key].type)(text)
        except ValueError as exc:
            raise ConfigError(str(exc), f"{section}.{key}") from None
    return values


def parse_config(text: str, source: str | None = None) -> RunConfig:
    """Parse and validate configuration text."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__",
                                   inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(f"unparseable configuration: {exc}") from None

    cfg = RunConfig(source=source)
    known = {"geometry", "phantom", "data", "sampler", "output"}
    for name in cp.sections():
        if name not in known:
            raise ConfigError(f"unknown section (allowed: {', '.join(sorted(known))})", name)

    if cp.has_section("geometry"):
        cfg.geometry = GeometrySection(**_fill(GeometrySection, cp.items("geometry"), "geometry"))
    if cp.has_section("phantom"):
        cfg.phantom = PhantomSection(**_fill(PhantomSection, cp.items("phantom"), "phantom"))
    if cp.has_section("data"):
        cfg.data = DataSection(**_fill(DataSection, cp.items("data"), "data"))
    if cp.has_section("output"):
        for key, value in cp.items("output"):
            if key != "dir":
                raise ConfigError("unknown key (allowed: dir)", f"output.{key}")
            cfg.output_dir = value.strip() or None

    mode = "uncertain"
    gibbs_items = []
    if cp.has_section("sampler"):
        for key, value in cp.items("sampler"):
            if key == "mode":
                mode = value.strip().lower()
            else:
                gibbs_items.append((key, value))
    if mode not in MODES:
        raise ConfigError(f"must be one of {MODES}, got {mode!r}", "sampler.mode")
    gvals = _fill(GibbsConfig, gibbs_items, "sampler", skip=("sample_angles",))
    try:
        gibbs = GibbsConfig(**gvals, sample_angles=(mode == "uncertain"))
    except ValueError as exc:
        raise ConfigError(str(exc), "sampler") from None
    cfg.sampler = SamplerSection(mode=mode, gibbs=gibbs)

    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Range checks that need no computation; raises :class:`ConfigError`."""
    g = cfg.geometry
    if g.N < 8:
        raise ConfigError("must be >= 8", "geometry.N")
    for name in ("dso", "dod", "det_len"):
        if not getattr(g, name) > 0:
            raise ConfigError("must be positive", f"geometry.{name}")
    if g.p is not None and g.p < 1:
        raise ConfigError("must be >= 1", "geometry.p")
    if g.fov is not None and not g.fov > 0:
        raise ConfigError("must be positive", "geometry.fov")
    try:
        g.build()
    except ValueError as exc:
        raise ConfigError(str(exc), "geometry") from None

    ph = cfg.phantom
    if ph.kind not in PHANTOMS:
        raise ConfigError(f"must be one of {PHANTOMS}, got {ph.kind!r}", "phantom.kind")
    if ph.n_grains < 1:
        raise ConfigError("must be >= 1", "phantom.n_grains")
    if not 0 <= ph.zero_fraction < 1:
        raise ConfigError("must lie in [0, 1)", "phantom.zero_fraction")
    if ph.power < 1:
        raise ConfigError("must be >= 1", "phantom.power")

    d = cfg.data
    if not d.noise_level > 0:
        raise ConfigError("must be positive", "data.noise_level")
    if d.sigma_true_deg < 0:
        raise ConfigError("must be non-negative", "data.sigma_true_deg")
    if not 0 < d.angle_step_deg <= d.span_deg:
        raise ConfigError("must lie in (0, span_deg]", "data.angle_step_deg")
    if not 0 < d.span_deg <= 360:
        raise ConfigError("must lie in (0, 360]", "data.span_deg")


def load_config(path) -> RunConfig:
    """Read and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration file {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def dump_config(cfg: RunConfig) -> str:
    """Serialize ``cfg`` back to the INI grammar (round-trips through :func:`parse_config`)."""
    def fmt(v):
        return "none" if v is None else str(v).lower() if isinstance(v, bool) else repr(v) if isinstance(v, float) else str(v)

    lines = ["[geometry]"]
    lines += [f"{k} = {fmt(v)}" for k, v in dataclasses.asdict(cfg.geometry).items()]
    lines += ["", "[phantom]"] + [f"{k} = {fmt(v)}" for k, v in dataclasses.asdict(cfg.phantom).items()]
    lines += ["", "[data]"] + [f"{k} = {fmt(v)}" for k, v in dataclasses.asdict(cfg.data).items()]
    lines += ["", "[sampler]", f"mode = {cfg.sampler.mode}"]
    lines += [f"{k} = {fmt(v)}" for k, v in dataclasses.asdict(cfg.gibbs).items() if k != "sample_angles"]
    if cfg.output_dir:
        lines += ["", "[output]", f"dir = {cfg.output_dir}"]
    return "\n".join(lines) + "\n"
