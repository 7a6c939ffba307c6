"""Flat key=value config text with section prefixes (model., train., data.)."""
from dataclasses import fields


class ConfigParseError(ValueError):
    pass


def coerce(field, raw):
    t = field.type
    if t in ("int", int):
        return int(raw)
    if t in ("bool", bool):
        return raw.strip().lower() in ("1", "true", "yes")
    if t in ("str", str):
        return raw.strip()
    if t in ("tuple", tuple):
        return tuple(float(x) for x in raw.split(",") if x.strip())
    return float(raw)


def dataclass_from_text(cls, text, prefix):
    """Fill a dataclass from lines "<prefix><field>=<value>"; others ignored."""
    names = {f.name: f for f in fields(cls)}
    kwargs = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line or not line.startswith(prefix):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigParseError(f"bad config line {line!r}")
        name = key[len(prefix):].strip()
        if name not in names:
            raise ConfigParseError(f"unknown key {key.strip()!r}")
        kwargs[name] = coerce(names[name], val)
    return cls(**kwargs)


def dataclass_to_text(obj, prefix):
    lines = []
    for f in fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, tuple):
            v = ",".join(repr(x) for x in v)
        lines.append(f"{prefix}{f.name}={v}")
    return "\n".join(lines) + "\n"
