"""Flat ``key = value`` configuration files with sections.

Recognized sections and keys are listed in :data:`SCHEMA`; anything else is
rejected. Values are converted with the listed type.
"""
import configparser
import math

SCHEMA = {
    "pipeline": {
        "method": str,
        "delay": int,
        "lw": int,
        "schedule": str,
        "iterations": int,
        "ref_channel": int,
        "head_ms": float,
        "tail_ms": float,
        "loading": float,
        "frame_ms": float,
        "hop_ms": float,
    },
    "scene": {
        "channels": int,
        "t60_min": float,
        "t60_max": float,
        "snr_db": float,
        "early_ms": float,
        "duration_s": float,
        "head_s": float,
        "tail_s": float,
        "sample_rate": int,
        "noise_color": str,
        "delay_spread_ms": float,
        "tail_level": float,
    },
    "bench": {
        "scenes": int,
        "seed": int,
        "methods": str,
        "baseline": bool,
    },
}


class ConfigError(ValueError):
    pass


def _convert(section, key, raw):
    kind = SCHEMA[section][key]
    try:
        if kind is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if kind is float and raw.strip().lower() in ("inf", "+inf"):
            return math.inf
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config_text(text, source="<config>"):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    out = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        values = {}
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            values[key] = _convert(section, key, raw)
        out[section] = values
    return out


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=str(path))
