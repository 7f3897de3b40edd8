"""Run configuration: INI-style text with one section per concern.

Frequencies are given in MHz (divided by 2 pi), times in ns. Lists are
comma separated. Example::

    [run]
    experiment = radiation

    [lattice]
    n = 10
    profile = tanh
    beta_mhz = 4.39
    eta_d = 0.35
    j_h = 3

    [initial]
    state = 1000000000

    [time]
    t_max_ns = 1000
    n_samples = 101

Every option of every section is listed in ``SECTIONS`` below together with
its default. :func:`dumps_config` writes floats with ``repr`` so a dumped
config parses back to an equal :class:`RunConfig`.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .exceptions import ConfigError

EXPERIMENTS = ("walk", "radiation", "entangle", "continuum", "device", "sweep")
PROFILES = ("tanh", "flat", "centered", "table")


def _opt(conv):
    def parse(s):
        return None if s.strip().lower() in ("", "none") else conv(s)
    return parse


def _tuple(conv):
    def parse(s):
        items = [x.strip() for x in s.split(",") if x.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(conv(x) for x in items)
    return parse


def _f(default, conv=None, **kw):
    return field(default=default, metadata={"conv": conv}, **kw)


@dataclass(frozen=True)
class RunSection:
    experiment: str = _f("walk", str)
    output: Optional[str] = _f(None, _opt(str))
    threads: int = _f(1, int)


@dataclass(frozen=True)
class LatticeSection:
    n: int = _f(10, int)
    profile: str = _f("tanh", str)
    beta_mhz: float = _f(4.39, float)
    eta_d: float = _f(0.35, float)
    j_h: int = _f(3, int)
    kappa_mhz: float = _f(2.94, float)
    table: Optional[str] = _f(None, _opt(str))


@dataclass(frozen=True)
class InitialSection:
    state: Optional[str] = _f(None, _opt(str))
    site: Optional[int] = _f(None, _opt(int))


@dataclass(frozen=True)
class TimeSection:
    t_max_ns: float = _f(1000.0, float)
    n_samples: int = _f(101, int)


@dataclass(frozen=True)
class DisorderSection:
    w_nnn_mhz: tuple = _f((0.0,), _tuple(float))
    w_mu_mhz: tuple = _f((0.0,), _tuple(float))
    realizations: int = _f(1, int)
    seed: int = _f(0, int)


@dataclass(frozen=True)
class RadiationSection:
    e_tol_mhz: float = _f(1e-3, float)
    e_max_mhz: Optional[float] = _f(None, _opt(float))


@dataclass(frozen=True)
class EntangleSection:
    profiles: tuple = _f(("tanh", "flat"), _tuple(str))
    subset: tuple = _f((1, 2), _tuple(int))
    step_ns: float = _f(10.0, float)


@dataclass(frozen=True)
class ContinuumSection:
    metric: str = _f("tanh", str)
    d: float = _f(0.05, float)
    alpha: float = _f(0.01, float)
    k: float = _f(0.01, float)
    delta: float = _f(20.0, float)
    x0: float = _f(-100.0, float)
    x_min: float = _f(-170.0, float)
    x_max: float = _f(40.0, float)
    mu: float = _f(0.0, float)
    t_max: float = _f(1400.0, float)
    n_samples: int = _f(141, int)
    site_stride: int = _f(10, int)


@dataclass(frozen=True)
class DeviceSection:
    coupler: int = _f(2, int)
    omega_ghz: float = _f(5.1, float)
    g_swap_mhz: float = _f(2.94, float)
    swap_t_max_ns: float = _f(1000.0, float)
    zpa_min: float = _f(0.0, float)
    zpa_max: float = _f(0.85, float)
    zpa_points: int = _f(60, int)
    noise_mhz: float = _f(0.0, float)
    restarts: int = _f(3, int)
    seed: int = _f(0, int)


@dataclass(frozen=True)
class SweepSection:
    kind: str = _f("disorder", str)
    sizes: tuple = _f((300,), _tuple(int))
    horizons: tuple = _f((25, 50, 150), _tuple(int))


SECTIONS = {
    "run": RunSection,
    "lattice": LatticeSection,
    "initial": InitialSection,
    "time": TimeSection,
    "disorder": DisorderSection,
    "radiation": RadiationSection,
    "entangle": EntangleSection,
    "continuum": ContinuumSection,
    "device": DeviceSection,
    "sweep": SweepSection,
}

REQUIRED = {
    "walk": ("lattice", "initial", "time"),
    "radiation": ("lattice", "initial", "time"),
    "entangle": ("lattice", "time"),
    "continuum": ("continuum",),
    "device": ("device",),
    "sweep": ("lattice", "initial", "time", "sweep"),
}


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = RunSection()
    lattice: Optional[LatticeSection] = None
    initial: Optional[InitialSection] = None
    time: Optional[TimeSection] = None
    disorder: Optional[DisorderSection] = None
    radiation: Optional[RadiationSection] = None
    entangle: Optional[EntangleSection] = None
    continuum: Optional[ContinuumSection] = None
    device: Optional[DeviceSection] = None
    sweep: Optional[SweepSection] = None

    @property
    def experiment(self) -> str:
        return self.run.experiment

    def section(self, name: str):
        """Section ``name``, falling back to its defaults when absent."""
        return getattr(self, name) or SECTIONS[name]()

    def with_seed(self, seed: int) -> "RunConfig":
        out = self
        if self.disorder is not None:
            out = replace(out, disorder=replace(self.disorder, seed=seed))
        if self.device is not None:
            out = replace(out, device=replace(self.device, seed=seed))
        if out is self:
            out = replace(out, disorder=DisorderSection(seed=seed))
        return out


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s\[][^=:]*?)\s*[=:]")


def _line_index(text: str, prefix: str) -> dict:
    where = {}
    section = None
    for i, line in enumerate(text.splitlines(), 1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = i
            continue
        m = _KEY_RE.match(line)
        if m and section is not None and not line[:1].isspace():
            where[(section, m.group(1).strip())] = i
    return {(s[len(prefix):], k): v for (s, k), v in where.items() if s.startswith(prefix)}


def parse_config_text(text: str, experiment: str | None = None, prefix: str = "") -> RunConfig:
    """Parse and validate; ``prefix`` selects sections named ``prefix + name``.

    Sections not carrying the prefix are ignored when a prefix is given.
    """
    parser = configparser.ConfigParser(interpolation=None, empty_lines_in_values=False)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate option {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("option outside any section", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", lineno) from None

    lines = _line_index(text, prefix)
    values = {}
    for raw in parser.sections():
        if not raw.startswith(prefix):
            if prefix:
                continue
        name = raw[len(prefix):]
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{raw}]", lines.get((name, None)))
        cls = SECTIONS[name]
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for key, val in parser[raw].items():
            line = lines.get((name, key))
            if key not in known:
                raise ConfigError(f"unknown option {key!r} in [{raw}]", line)
            try:
                kw[key] = known[key].metadata["conv"](val)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{raw}] {key} = {val!r}: {exc}", line) from None
        values[name] = cls(**kw)

    run = values.get("run", RunSection())
    if experiment is not None:
        if "run" in values and "experiment" in parser[prefix + "run"] and run.experiment != experiment:
            raise ConfigError(
                f"config is for experiment {run.experiment!r}, not {experiment!r}",
                lines.get(("run", "experiment")),
            )
        run = replace(run, experiment=experiment)
    values["run"] = run
    cfg = RunConfig(**values)
    validate(cfg, lines)
    return cfg


def validate(cfg: RunConfig, lines: dict | None = None) -> None:
    lines = lines or {}

    def fail(msg, section, key=None):
        raise ConfigError(msg, lines.get((section, key), lines.get((section, None))))

    exp = cfg.run.experiment
    if exp not in EXPERIMENTS:
        fail(f"experiment must be one of {', '.join(EXPERIMENTS)}", "run", "experiment")
    if cfg.run.threads < 1:
        fail("threads must be >= 1", "run", "threads")
    for name in REQUIRED[exp]:
        if getattr(cfg, name) is None:
            raise ConfigError(f"experiment {exp!r} needs a [{name}] section")
    if exp == "sweep" and cfg.section("sweep").kind == "disorder" and cfg.disorder is None:
        raise ConfigError("disorder sweep needs a [disorder] section")

    lat = cfg.lattice
    if lat is not None:
        if lat.profile not in PROFILES:
            fail(f"profile must be one of {', '.join(PROFILES)}", "lattice", "profile")
        if lat.n < 2:
            fail("n must be >= 2", "lattice", "n")
        if lat.profile == "table" and not lat.table:
            fail("profile = table needs a table path", "lattice", "profile")
        if lat.profile in ("tanh", "centered") and (lat.beta_mhz <= 0 or lat.eta_d <= 0):
            fail("beta_mhz and eta_d must be positive", "lattice", "beta_mhz")
        if not 1 <= lat.j_h <= lat.n:
            fail(f"j_h must lie in 1..{lat.n}", "lattice", "j_h")
    ini = cfg.initial
    if ini is not None:
        if (ini.state is None) == (ini.site is None):
            fail("give exactly one of state or site", "initial")
        if ini.state is not None and ini.state != "bell":
            if set(ini.state) - {"0", "1"}:
                fail("state must be a 0/1 pattern or 'bell'", "initial", "state")
            if lat is not None and len(ini.state) != lat.n:
                fail(f"state has {len(ini.state)} sites, lattice has {lat.n}", "initial", "state")
        if ini.site is not None and lat is not None and not 1 <= ini.site <= lat.n:
            fail(f"site must lie in 1..{lat.n}", "initial", "site")
    tm = cfg.time
    if tm is not None:
        if tm.t_max_ns < 0:
            fail("times must be nonnegative", "time", "t_max_ns")
        if tm.n_samples < 1:
            fail("n_samples must be >= 1", "time", "n_samples")
    dis = cfg.disorder
    if dis is not None:
        if min(dis.w_nnn_mhz) < 0 or min(dis.w_mu_mhz) < 0:
            fail("disorder widths must be nonnegative", "disorder")
        if dis.realizations < 1:
            fail("realizations must be >= 1", "disorder", "realizations")
        if dis.seed < 0 or dis.seed >= 2**64:
            fail("seed must be an unsigned 64-bit integer", "disorder", "seed")
    rad = cfg.radiation
    if rad is not None and rad.e_tol_mhz < 0:
        fail("e_tol_mhz must be nonnegative", "radiation", "e_tol_mhz")
    ent = cfg.entangle
    if ent is not None:
        bad = set(ent.profiles) - set(PROFILES)
        if bad:
            fail(f"unknown profiles {sorted(bad)}", "entangle", "profiles")
        if len(ent.subset) != 2:
            fail("concurrence needs exactly two sites", "entangle", "subset")
        if ent.step_ns <= 0:
            fail("step_ns must be positive", "entangle", "step_ns")
    con = cfg.continuum
    if con is not None:
        if con.metric not in ("tanh", "flat"):
            fail("metric must be tanh or flat", "continuum", "metric")
        if con.d <= 0 or con.delta <= 0:
            fail("d and delta must be positive", "continuum")
        if con.x_max <= con.x_min:
            fail("x_max must exceed x_min", "continuum", "x_max")
        if con.t_max < 0 or con.n_samples < 2:
            fail("need t_max >= 0 and n_samples >= 2", "continuum")
        if con.site_stride < 1:
            fail("site_stride must be >= 1", "continuum", "site_stride")
    dev = cfg.device
    if dev is not None:
        if not 1 <= dev.coupler <= 9:
            fail("coupler must lie in 1..9", "device", "coupler")
        if dev.zpa_points < 5:
            fail("zpa_points must be >= 5", "device", "zpa_points")
        if dev.noise_mhz < 0 or dev.swap_t_max_ns <= 0:
            fail("noise must be nonnegative and swap_t_max_ns positive", "device")
        if dev.seed < 0 or dev.seed >= 2**64:
            fail("seed must be an unsigned 64-bit integer", "device", "seed")
    sw = cfg.sweep
    if sw is not None:
        if sw.kind not in ("disorder", "size"):
            fail("sweep kind must be disorder or size", "sweep", "kind")
        if min(sw.sizes) < 2:
            fail("sizes must be >= 2", "sweep", "sizes")


def load_config(path, experiment: str | None = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config_text(text, experiment)


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_sections(cfg: RunConfig) -> dict:
    """Present sections as ``{name: {key: text}}``; ``None`` options are left out."""
    out = {}
    for f in fields(cfg):
        sec = getattr(cfg, f.name)
        if sec is None:
            continue
        out[f.name] = {g.name: _fmt(getattr(sec, g.name)) for g in fields(sec) if getattr(sec, g.name) is not None}
    return out


def dumps_config(cfg: RunConfig, prefix: str = "") -> str:
    parts = []
    for name, items in config_sections(cfg).items():
        parts.append(f"[{prefix}{name}]")
        parts.extend(f"{k} = {v}" for k, v in items.items())
        parts.append("")
    return "\n".join(parts)
