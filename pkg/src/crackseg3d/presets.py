"""Named parameter presets (method / crack width / tuning objective).

Presets are data, not code: they live in ``data/presets.json`` and are
addressed as ``"<method>/w<width>/<objective>"``, e.g. ``"hp/w3/precision"``.
"""

import json
from importlib import resources

from .errors import ParameterError

__all__ = ["load_presets", "resolve_preset", "preset_names"]

_cache = None


def load_presets():
    global _cache
    if _cache is None:
        text = resources.files("crackseg3d").joinpath("data/presets.json").read_text()
        _cache = json.loads(text)
    return _cache


def preset_names():
    presets = load_presets()
    return [
        f"{method}/{width}/{objective}"
        for method, widths in presets.items()
        for width, objectives in widths.items()
        for objective in objectives
    ]


def resolve_preset(name):
    """Resolve ``method/wN/objective`` to (method, params dict)."""
    parts = name.split("/")
    if len(parts) != 3:
        raise ParameterError(
            f"preset name must be method/wN/objective, got {name!r}"
        )
    method, width, objective = parts
    presets = load_presets()
    try:
        params = presets[method][width][objective]
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}") from None
    return method, dict(params)
