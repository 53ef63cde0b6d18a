"""Human-readable run configuration files.

One ``key = value`` pair per line, ``#`` comments, keys named after the run
configuration fields. Lists are comma-separated, ``none`` clears an optional.
Parsing reports the offending line number; serialize/parse round-trips are
exact.
"""

from __future__ import annotations

from pathlib import Path

from .engine import ConfigError
from .runner import RunConfig

_LIST_STR = ("placement",)
_LIST_INT = ("weights", "commit_ws")
_OPT_FLOAT = ("speed_kms",)
_OPT_INT = ("horizon_ms",)
_FLOAT = ("delay_scale", "phi_cap", "t_upper", "t_lower",
          "p_gain", "i_gain", "d_gain", "pid_target")
_STR = ("backend", "topology", "mode", "adaptation", "label")


def _parse_value(key: str, raw: str):
    if key in _LIST_STR:
        return None if raw == "none" else [p.strip() for p in raw.split(",") if p.strip()]
    if key in _LIST_INT:
        return None if raw == "none" else [int(p) for p in raw.split(",") if p.strip()]
    if key in _OPT_FLOAT:
        return None if raw == "none" else float(raw)
    if key in _OPT_INT:
        return None if raw == "none" else int(raw)
    if key in _FLOAT:
        return float(raw)
    if key in _STR:
        return raw
    return int(raw)


def parse_config_text(text: str, name: str = "config") -> RunConfig:
    cfg = RunConfig()
    known = set(cfg.__dataclass_fields__)
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{name}:{lineno}: expected 'key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{name}:{lineno}: unknown key {key!r}")
        try:
            setattr(cfg, key, _parse_value(key, raw))
        except ValueError as exc:
            raise ConfigError(f"{name}:{lineno}: bad value for {key}: {exc}") from None
    return cfg


def parse_config_file(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_config_text(path.read_text(), name=path.name)


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


def config_to_text(cfg: RunConfig) -> str:
    lines = [f"{key} = {_format_value(getattr(cfg, key))}"
             for key in cfg.__dataclass_fields__]
    return "\n".join(lines) + "\n"
