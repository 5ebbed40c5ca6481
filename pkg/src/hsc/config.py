"""Plain key = value configuration files for the train and eval commands."""

from .errors import ConfigError


def parse_config(text):
    """Parse `key = value` lines; '#' starts a comment, blanks ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def read_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def get_int(cfg, key, default=None):
    return _get(cfg, key, default, int)


def get_float(cfg, key, default=None):
    return _get(cfg, key, default, float)


def get_str(cfg, key, default=None):
    return _get(cfg, key, default, str)


def get_float_list(cfg, key, default=None):
    raw = cfg.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing config key {key!r}")
        return list(default)
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"config key {key!r}: bad float list {raw!r}") from None


def _get(cfg, key, default, cast):
    raw = cfg.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing config key {key!r}")
        return default
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from None
