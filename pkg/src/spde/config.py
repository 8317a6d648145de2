"""Study configuration files: INI-style typed sections with strict keys.

Example::

    [model]
    time_cov = fbm:H0=0.8
    measure = white:scale=1
    dim = 1

    [sampler]
    t = 1.0
    seed = 42

Values may be quoted.  Unknown sections or keys are rejected, naming the
offending entry.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from . import covariance, spectral
from .covariance import TimeCovariance
from .spectral import SpectralMeasure


class ConfigError(ValueError):
    pass


def _power(tok: str) -> tuple:
    base, _, exp = tok.partition("^")
    return float(base), int(exp)


def _floats(text: str) -> tuple:
    """Comma list of floats; ``b^m`` is a power and ``b^m .. b^n`` runs the integer exponents."""
    out = []
    for part in text.replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            (b1, m), (b2, n) = (_power(x.strip()) for x in part.split(".."))
            if b1 != b2:
                raise ValueError(f"range ends need a common base: {part!r}")
            step = 1 if n >= m else -1
            out.extend(b1**k for k in range(m, n + step, step))
        elif "^" in part:
            b, m = _power(part)
            out.append(b**m)
        else:
            out.append(float(part))
    return tuple(out)


def _ints(text: str) -> tuple:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMA: dict[str, dict[str, tuple]] = {
    "model": {
        "time_cov": (str, "brownian"),
        "measure": (str, "white:scale=1"),
        "dim": (int, None),
        "beta": (float, None),
    },
    "sampler": {
        "t": (float, 1.0),
        "eps": (float, 2e-3),
        "eps_list": (_floats, tuple(2.0 ** -k for k in range(4, 11))),
        "seed": (int, 42),
        "n_rep": (int, 10000),
        "x": (_floats, (0.0,)),
        "burn_in": (int, 1),
    },
    "grid": {
        "N": (int, 1024),
        "L": (float, 32.0),
    },
    "besov": {
        "kappa": (float, None),
        "q": (int, 1),
        "sigma": (float, None),
        "eta": (float, 0.2),
        "n_rep": (int, 200),
        "s0": (float, 0.1),
        "lags": (_floats, (1e-3, 2e-3, 4e-3, 8e-3, 1.6e-2, 3.2e-2, 6.4e-2, 0.128, 0.256)),
        "level": (int, 5),
        "times": (_floats, tuple(0.5 + k / 32 for k in range(17))),
        "levels": (_ints, (2, 3, 4, 5, 6, 7)),
    },
    "ibp": {
        "eps": (float, 0.125),
        "eps_tilde": (float, 0.125),
        "t": (float, 1.0),
        "t_tilde": (float, 1.0),
        "kernel_t": (float, 2.0),
        "gamma": (str, "kernel"),
    },
    "tolerances": {
        "rel_err": (float, 1e-3),
        "dalang_rtol": (float, 1e-6),
        "slope": (float, 0.1),
        "margin": (float, 0.1),
        "theta_min": (float, 0.2),
        "residual": (float, 1e-9),
    },
}


@dataclass
class StudyConfig:
    time_cov: TimeCovariance
    measure: SpectralMeasure
    sections: dict[str, dict[str, Any]] = field(default_factory=dict)
    source: Optional[str] = None

    def get(self, section: str, key: str):
        return self.sections[section][key]

    @property
    def dim(self) -> int:
        return self.measure.dim


def _unquote(v: str) -> str:
    v = v.strip()
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
        return v[1:-1]
    return v


def parse_config_text(text: str, base_dir: Optional[Path] = None, source: Optional[str] = None) -> StudyConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    sections: dict[str, dict[str, Any]] = {s: {k: d for k, (_, d) in keys.items()}
                                           for s, keys in SCHEMA.items()}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key '{key}' in section [{sec}]")
            conv = SCHEMA[sec][key][0]
            try:
                sections[sec][key] = conv(_unquote(raw))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for '{key}' in [{sec}]: {exc}") from None
    model = sections["model"]
    try:
        cov = covariance.parse_time_cov(model["time_cov"])
    except ValueError as exc:
        raise ConfigError(f"bad value for 'time_cov' in [model]: {exc}") from None
    dim = model["dim"]
    if dim is None and model["measure"].split(":")[0].strip().lower() != "fracprod":
        dim = 1  # fracprod takes its dimension from the H list
    try:
        m = spectral.parse_measure(model["measure"], dim, base_dir)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"bad value for 'measure' in [model]: {exc}") from None
    if model["dim"] is None:
        model["dim"] = m.dim
    if model["beta"] is not None and not 0 < model["beta"] <= 2:
        raise ConfigError("'beta' in [model] must lie in (0, 2]")
    return StudyConfig(cov, m, sections, source)


def load_config(path) -> StudyConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, base_dir=path.parent, source=str(path))
