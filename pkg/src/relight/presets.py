"""Lights-preset documents: schema validation and the canonical codec.

The preset document carries the full light set plus the two shading
constants.  Serialization is canonical (fixed key order, compact separators,
ECMAScript number formatting) so the Python service and the browser editor
produce byte-identical files for the same parameters.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import MissingFileError, SchemaError
from .lights import LightingParams, ParamStats, VirtualLight
from .render import DEFAULT_SIGMA1, DEFAULT_SIGMA2, ShadingConfig


@dataclass(frozen=True)
class LoadedLights:
    params: LightingParams
    shading: ShadingConfig
    notes: tuple[str, ...]


def js_number_str(x: float) -> str:
    """Format a float exactly as ECMAScript Number::toString does.

    Both sides of the wire use shortest round-trip digits; only the textual
    layout differs between languages, so this reproduces the JS layout rules
    (plain decimal between 1e-6 and 1e21, bare integers, e-notation outside).
    """
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise ValueError("cannot serialize non-finite numbers")
    if x == 0.0:
        return "0"
    sign = "-" if x < 0 else ""
    r = repr(abs(x))
    if "e" in r:
        mantissa, _, exp_str = r.partition("e")
        exp = int(exp_str)
    else:
        mantissa, exp = r, 0
    int_part, _, frac_part = mantissa.partition(".")
    if int_part.lstrip("0"):
        n = len(int_part) + exp
        digits = (int_part + frac_part).strip("0") or "0"
    else:
        leading = len(frac_part) - len(frac_part.lstrip("0"))
        n = -leading + exp
        digits = frac_part.lstrip("0").rstrip("0")
    k = len(digits)
    if k <= n <= 21:
        return sign + digits + "0" * (n - k)
    if 0 < n <= 21:
        return sign + digits[:n] + "." + digits[n:]
    if -6 < n <= 0:
        return sign + "0." + "0" * (-n) + digits
    e = n - 1
    head = digits[0] + ("." + digits[1:] if k > 1 else "")
    return f"{sign}{head}e{'+' if e >= 0 else '-'}{abs(e)}"


def _vec3_json(values) -> str:
    return "[" + ",".join(js_number_str(v) for v in values) + "]"


def preset_doc(params: LightingParams, shading: ShadingConfig) -> dict:
    """Plain-dict form of the preset document, in canonical key order."""
    return {
        "k": params.k,
        "ambient": [float(v) for v in params.ambient],
        "lights": [
            {
                "color": [float(v) for v in light.color],
                "direction": [float(v) for v in light.direction],
                "position": [float(v) for v in light.position],
                "attenuation": float(light.attenuation),
            }
            for light in params.lights
        ],
        "sigma1": shading.sigma1,
        "sigma2": shading.sigma2,
    }


def canonical_preset_json(params: LightingParams, shading: ShadingConfig) -> str:
    """Byte-exact canonical serialization (matches JSON.stringify output)."""
    lights = ",".join(
        "{"
        + f'"color":{_vec3_json(light.color)},'
        + f'"direction":{_vec3_json(light.direction)},'
        + f'"position":{_vec3_json(light.position)},'
        + f'"attenuation":{js_number_str(light.attenuation)}'
        + "}"
        for light in params.lights
    )
    return (
        "{"
        + f'"k":{params.k},'
        + f'"ambient":{_vec3_json(params.ambient)},'
        + f'"lights":[{lights}],'
        + f'"sigma1":{js_number_str(shading.sigma1)},'
        + f'"sigma2":{js_number_str(shading.sigma2)}'
        + "}"
    )


def _require_number(doc: dict, field: str, context: str):
    value = doc.get(field)
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise SchemaError(f"{context}{field}: expected a finite number, got {value!r}")
    return float(value)


def _require_vec3(doc: dict, field: str, context: str) -> list[float]:
    value = doc.get(field)
    if not isinstance(value, list) or len(value) != 3:
        raise SchemaError(f"{context}{field}: expected an array of 3 numbers, got {value!r}")
    out = []
    for i, item in enumerate(value):
        if not isinstance(item, (int, float)) or isinstance(item, bool) or not math.isfinite(item):
            raise SchemaError(f"{context}{field}[{i}]: expected a finite number, got {item!r}")
        out.append(float(item))
    return out


def parse_preset(doc) -> LoadedLights:
    """Validate a preset document and build the parameter objects.

    Raises SchemaError naming the offending field.  Missing shading constants
    fall back to their defaults, recorded in the returned notes.
    """
    if not isinstance(doc, dict):
        raise SchemaError(f"preset root: expected an object, got {type(doc).__name__}")
    k = doc.get("k")
    if not isinstance(k, int) or isinstance(k, bool) or k < 0:
        raise SchemaError(f"k: expected a nonnegative integer, got {k!r}")
    ambient = _require_vec3(doc, "ambient", "")
    raw_lights = doc.get("lights")
    if not isinstance(raw_lights, list):
        raise SchemaError(f"lights: expected an array, got {raw_lights!r}")
    if len(raw_lights) != k:
        raise SchemaError(f"lights: k is {k} but the array has {len(raw_lights)} entries")
    lights = []
    for i, entry in enumerate(raw_lights):
        context = f"lights[{i}]."
        if not isinstance(entry, dict):
            raise SchemaError(f"lights[{i}]: expected an object, got {entry!r}")
        lights.append(
            VirtualLight(
                color=_require_vec3(entry, "color", context),
                direction=_require_vec3(entry, "direction", context),
                position=_require_vec3(entry, "position", context),
                attenuation=_require_number(entry, "attenuation", context),
            )
        )
    notes = []
    if "sigma1" in doc:
        sigma1 = _require_number(doc, "sigma1", "")
        if sigma1 <= 0:
            raise SchemaError(f"sigma1: must be positive, got {sigma1}")
    else:
        sigma1 = DEFAULT_SIGMA1
        notes.append(f"sigma1 missing, default {DEFAULT_SIGMA1} applied")
    if "sigma2" in doc:
        sigma2 = _require_number(doc, "sigma2", "")
        if sigma2 < 0:
            raise SchemaError(f"sigma2: must be nonnegative, got {sigma2}")
    else:
        sigma2 = DEFAULT_SIGMA2
        notes.append(f"sigma2 missing, default {DEFAULT_SIGMA2} applied")
    params = LightingParams(lights=tuple(lights), ambient=np.array(ambient))
    return LoadedLights(params=params, shading=ShadingConfig(sigma1, sigma2), notes=tuple(notes))


def load_lights(path: str) -> LoadedLights:
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON in {path}: {exc}") from exc
    return parse_preset(doc)


def save_lights(path: str, params: LightingParams, shading: ShadingConfig = ShadingConfig()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_preset_json(params, shading))
        fh.write("\n")


def load_stats(path: str) -> ParamStats:
    """Read mu/sigma normalization statistics from a JSON file."""
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict) or "mu" not in doc or "sigma" not in doc:
        raise SchemaError("stats file must be an object with 'mu' and 'sigma' arrays")
    mu = np.asarray(doc["mu"], dtype=np.float64)
    sigma = np.asarray(doc["sigma"], dtype=np.float64)
    if (mu.size - 3) % 10 != 0:
        raise SchemaError(f"mu: dimension {mu.size} is not of the form 10K+3")
    try:
        return ParamStats(mu=mu, sigma=sigma)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


def save_stats(path: str, stats: ParamStats) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"mu": stats.mu.tolist(), "sigma": stats.sigma.tolist()}, fh)
        fh.write("\n")
