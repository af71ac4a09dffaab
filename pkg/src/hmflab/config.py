"""Flat key-value run configuration for the command-line entry point.

A configuration file is plain text, one ``section.key = value``
assignment per line, with ``#`` comments and blank lines ignored. Every
key has a typed schema entry with a default, so a file only lists the
values it changes; parsing an unknown key is a usage error that cites
the full schema. Serialization writes every resolved key in schema
order with shortest-roundtrip floats, so configurations round-trip
byte-identically.

Two named presets ship with the package: ``defaults`` (the schema
defaults, a desk-scale configuration of the stable Gaussian state) and
``stable_gaussian`` (the frozen damping preset: the (0.6, 1.0) state
with the eye-supported bump, long horizon, and asymptotic fit windows).
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "ConfigError", "ConfigField", "RunConfig", "SCHEMA", "PRESETS",
    "default_config", "parse_config", "load_config", "apply_overrides",
    "schema_text",
]


class ConfigError(ValueError):
    """Malformed, unknown, or out-of-range configuration input."""


@dataclass(frozen=True)
class ConfigField:
    key: str
    kind: str
    default: object
    help: str
    nonnegative: bool = False


SCHEMA = (
    ConfigField("state.profile", "str", "gaussian",
                "stationary profile family (gaussian is the one shipped)"),
    ConfigField("state.alpha", "float", 0.3,
                "Gaussian prefactor alpha of G = alpha exp(-beta h)"),
    ConfigField("state.beta", "float", 4.0,
                "Gaussian inverse temperature beta"),
    ConfigField("grid.eye_n1", "int", 160,
                "eye-chart nodes on the square-root graded segment"),
    ConfigField("grid.eye_n2", "int", 80,
                "eye-chart nodes on the separatrix refinement segment"),
    ConfigField("grid.outer_n1", "int", 80,
                "rotation-chart nodes between separatrix and 2 M0"),
    ConfigField("grid.outer_n2", "int", 96,
                "rotation-chart nodes above 2 M0"),
    ConfigField("grid.n_theta", "int", 512,
                "angle samples per node for observable rows"),
    ConfigField("grid.l_max", "int", 64,
                "highest retained angle harmonic"),
    ConfigField("grid.eps_sep", "float", 1e-6,
                "separatrix cutoff |h - M0| >= eps_sep * M0"),
    ConfigField("grid.h_max", "float", 200.0,
                "outer truncation h <= h_max * M0"),
    ConfigField("time.dt", "float", 0.05,
                "Volterra time step"),
    ConfigField("time.t_final", "float", 200.0,
                "Volterra horizon T"),
    ConfigField("fit.c_lo", "float", 20.0,
                "lower edge of the |C| slope window"),
    ConfigField("fit.c_hi", "float", 200.0,
                "upper edge of the |C| slope window"),
    ConfigField("fit.s_lo", "float", 20.0,
                "lower edge of the |S| slope window"),
    ConfigField("fit.s_hi", "float", 200.0,
                "upper edge of the |S| slope window"),
    ConfigField("fit.scatter_lo", "float", 20.0,
                "lower edge of the scattering surrogate window"),
    ConfigField("fit.scatter_hi", "float", 200.0,
                "upper edge of the scattering surrogate window"),
    ConfigField("penrose.gamma_max", "float", 0.0,
                "real-axis scan radius B; 0 selects the certified radius",
                nonnegative=True),
    ConfigField("penrose.n_gamma", "int", 61,
                "real-axis scan resolution"),
    ConfigField("penrose.tau_max", "float", 1.0,
                "largest scanned decay depth (Im xi = -tau)"),
    ConfigField("penrose.n_tau", "int", 7,
                "decay-depth resolution"),
    ConfigField("damp.r0", "str", "eye_bump",
                "named initial perturbation for the damping run"),
    ConfigField("damp.p", "int", 0,
                "declared flatness order of damp.r0 at the eye center",
                nonnegative=True),
    ConfigField("damp.amp_cut", "float", 1e-17,
                "relative amplitude cutoff for source assembly"),
    ConfigField("disp.f", "str", "trapped_bump_a",
                "named f observable of the dispersion pairing"),
    ConfigField("disp.phi", "str", "trapped_bump_b",
                "named phi observable of the dispersion pairing"),
    ConfigField("disp.p", "int", 0,
                "flatness order of disp.f at the eye center",
                nonnegative=True),
    ConfigField("disp.q", "int", 0,
                "flatness order of disp.phi at the eye center",
                nonnegative=True),
    ConfigField("disp.dt", "float", 0.2,
                "pairing sample spacing (the curve is evaluated exactly "
                "at each time, not stepped)"),
    ConfigField("disp.t_final", "float", 1000.0,
                "pairing horizon"),
    ConfigField("disp.lo", "float", 100.0,
                "lower edge of the pairing decay window"),
    ConfigField("disp.hi", "float", 1000.0,
                "upper edge of the pairing decay window"),
    ConfigField("scatter.n_theta", "int", 64,
                "angle resolution of the reconstructed scattering state"),
    ConfigField("scatter.n_samples", "int", 40,
                "geometric sample count for the surrogate distance"),
    ConfigField("out.dir", "str", "runs",
                "output directory for CSV and JSON artifacts"),
    ConfigField("run.deterministic", "bool", True,
                "assert the seedless determinism contract in reports"),
)

_BY_KEY = {entry.key: entry for entry in SCHEMA}

PRESETS = {
    "defaults": "",
    "stable_gaussian": """\
# Frozen damping preset: deeply trapped smooth bump on the (0.6, 1.0)
# Gaussian state, long horizon, windows on the asymptotic regime.
state.alpha = 0.6
state.beta = 1.0
time.dt = 0.1
time.t_final = 600.0
fit.c_lo = 100.0
fit.c_hi = 500.0
fit.s_lo = 25.0
fit.s_hi = 150.0
fit.scatter_lo = 20.0
fit.scatter_hi = 200.0
damp.amp_cut = 1e-12
""",
}


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration: every schema key bound to a typed value."""

    values: dict

    def __getitem__(self, key: str):
        if key not in _BY_KEY:
            raise ConfigError(f"unknown configuration key {key!r}")
        return self.values[key]

    def as_dict(self) -> dict:
        return dict(self.values)

    def serialize(self) -> str:
        lines = []
        for entry in SCHEMA:
            lines.append(f"{entry.key} = {_format(entry, self.values[entry.key])}")
        return "\n".join(lines) + "\n"

    def validate(self) -> "RunConfig":
        for entry in SCHEMA:
            value = self.values[entry.key]
            if entry.kind in ("float", "int"):
                if entry.nonnegative:
                    if value < 0:
                        raise ConfigError(
                            f"{entry.key} must be nonnegative, got {value!r}")
                elif value <= 0:
                    raise ConfigError(
                        f"{entry.key} must be positive, got {value!r}")
        t_final = self.values["time.t_final"]
        for label in ("c", "s", "scatter"):
            lo = self.values[f"fit.{label}_lo"]
            hi = self.values[f"fit.{label}_hi"]
            if not 0.0 < lo < hi <= t_final:
                raise ConfigError(
                    f"fit window fit.{label}_lo..fit.{label}_hi = "
                    f"({lo!r}, {hi!r}) must satisfy 0 < lo < hi <= "
                    f"time.t_final = {t_final!r}")
        lo, hi = self.values["disp.lo"], self.values["disp.hi"]
        if not 0.0 < lo < hi <= self.values["disp.t_final"]:
            raise ConfigError(
                f"pairing window disp.lo..disp.hi = ({lo!r}, {hi!r}) must "
                "satisfy 0 < lo < hi <= disp.t_final = "
                f"{self.values['disp.t_final']!r}")
        return self


def _format(entry: ConfigField, value) -> str:
    if entry.kind == "bool":
        return "true" if value else "false"
    if entry.kind == "float":
        return repr(float(value))
    return str(value)


def _coerce(entry: ConfigField, raw: str):
    raw = raw.strip()
    try:
        if entry.kind == "float":
            return float(raw)
        if entry.kind == "int":
            return int(raw)
        if entry.kind == "bool":
            if raw not in ("true", "false"):
                raise ValueError
            return raw == "true"
        return raw
    except ValueError:
        raise ConfigError(
            f"cannot parse {raw!r} as {entry.kind} for key {entry.key}"
        ) from None


def schema_text() -> str:
    """Human-readable schema listing: key, type, default, description."""
    lines = ["# Configuration schema: key = default  (type)  description"]
    for entry in SCHEMA:
        lines.append(
            f"{entry.key} = {_format(entry, entry.default)}  "
            f"({entry.kind})  {entry.help}")
    return "\n".join(lines) + "\n"


def default_config() -> RunConfig:
    return RunConfig({entry.key: entry.default for entry in SCHEMA})


def parse_config(text: str) -> RunConfig:
    """Defaults overlaid with the assignments in the given text."""
    values = {entry.key: entry.default for entry in SCHEMA}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(
                f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _BY_KEY:
            raise ConfigError(
                f"line {lineno}: unknown key {key!r}; valid keys:\n"
                + schema_text())
        values[key] = _coerce(_BY_KEY[key], raw)
    return RunConfig(values).validate()


def load_config(source: str) -> RunConfig:
    """Configuration from a preset name or a file path."""
    if source in PRESETS:
        return parse_config(PRESETS[source])
    try:
        with open(source, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as err:
        raise ConfigError(
            f"cannot read config {source!r} ({err}); known presets: "
            f"{sorted(PRESETS)}") from None
    return parse_config(text)


def apply_overrides(config: RunConfig, pairs) -> RunConfig:
    """New configuration with ``key=value`` override strings applied."""
    values = config.as_dict()
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        key, raw = (part.strip() for part in pair.split("=", 1))
        if key not in _BY_KEY:
            raise ConfigError(
                f"unknown override key {key!r}; valid keys:\n" + schema_text())
        values[key] = _coerce(_BY_KEY[key], raw)
    return RunConfig(values).validate()
