"""Flat key-value run configuration.

The file format is one `section.key = value` assignment per line, with
blank lines and `#` comments ignored.  No nesting, no quoting, no
interpolation: the format stays trivially diffable and greppable.
Unknown keys are rejected instead of silently ignored, since a typoed
key that reverts a run to defaults is the worst failure mode a config
file can have.

All randomness in a run flows from one root seed, split into named
independent streams so adding a consumer never perturbs the others.
"""

from __future__ import annotations

import numpy as np


class ConfigError(ValueError):
    """Unparseable, unknown, or contradictory configuration input."""


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "on", "yes"):
        return True
    if t in ("false", "0", "off", "no"):
        return False
    raise ConfigError("expected a boolean, got %r" % (text,))


def _parse_tribool(text: str):
    """Boolean with an explicit 'auto' for kind-dependent defaults."""
    t = text.strip().lower()
    if t == "auto":
        return None
    return _parse_bool(t)


def _parse_int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError("expected an integer, got %r" % (text,)) from None


def _parse_float(text: str) -> float:
    try:
        return float(text.strip())
    except ValueError:
        raise ConfigError("expected a number, got %r" % (text,)) from None


def _parse_token(text: str) -> str:
    return text.strip()


# every accepted key and the coercion applied to its value; token
# domains (kind names, muladd modes) are validated by the constructors
# that consume them
CONFIG_SCHEMA = {
    "fp16.flush_subnormals": _parse_bool,
    "fp16.muladd": _parse_token,
    "swm.kind": _parse_token,
    "swm.nx": _parse_int,
    "swm.ny": _parse_int,
    "swm.Lx": _parse_float,
    "swm.Ly": _parse_float,
    "swm.g": _parse_float,
    "swm.H": _parse_float,
    "swm.f0": _parse_float,
    "swm.beta": _parse_float,
    "swm.wind_amplitude": _parse_float,
    "swm.nu4": _parse_float,
    "swm.r_bottom": _parse_float,
    "swm.dt": _parse_float,
    "swm.n_steps": _parse_int,
    "swm.scale_s": _parse_float,
    "swm.nonlinear": _parse_bool,
    "swm.compensated": _parse_tribool,
    "swm.integration_kind": _parse_token,
}


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse config text into a {key: coerced value} mapping."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("%s:%d: expected 'section.key = value', got %r"
                              % (source, lineno, raw))
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in CONFIG_SCHEMA:
            raise ConfigError("%s:%d: unknown key %r" % (source, lineno, key))
        if key in out:
            raise ConfigError("%s:%d: duplicate key %r"
                              % (source, lineno, key))
        try:
            out[key] = CONFIG_SCHEMA[key](value)
        except ConfigError as exc:
            raise ConfigError("%s:%d: %s" % (source, lineno, exc)) from None
    return out


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("cannot read config file %s: %s"
                          % (path, exc.strerror or exc)) from None
    return parse_config(text, source=path)


# fixed component order: appending new consumers must not reshuffle
# the streams existing runs draw from
_SEED_COMPONENTS = ("swm", "axpy", "net")


def spawn_seeds(seed: int) -> dict:
    """Split one root seed into named independent SeedSequence streams."""
    children = np.random.SeedSequence(seed).spawn(len(_SEED_COMPONENTS))
    return dict(zip(_SEED_COMPONENTS, children))


def seed_to_int(ss: np.random.SeedSequence) -> int:
    """Collapse a stream to a plain int for consumers that take one."""
    return int(ss.generate_state(1, dtype=np.uint32)[0])
