"""Scenario files: JSON schema, line-anchored validation, norm and field builders.

A scenario is one JSON object.  ``norm`` is required; each command reads its
own block (``solve``, ``verify``, ``regularize``, ``consistency``, ``eigen``,
``simulate``, ``convergence``, ``norm_info``).  Unknown keys are rejected.

Norm specs::

    {"type": "pnorm", "p": 2}                    # optional "A": [[..],[..]]
    {"type": "l1"} / {"type": "linf"} / {"type": "euclidean"}
    {"type": "hexagon"}                          # regular hexagon ball, vertex at (1, 0)
    {"type": "polytope_h", "rows": [[..], ..]}   # ball {<a_i, q> <= 1}
    {"type": "polytope_v", "vertices": [[..], ..]}
    {"type": "inverted", "base": {...}}
    {"type": "regularized", "base": {...}, "zeta": 0.25}

Field specs are either a number (constant) or ``{"name": ..., "params": {...}}``
with the names of :mod:`finsler_lab.functions`.
"""

from __future__ import annotations

import json
import math

import numpy as np
from jsonschema import Draft202012Validator

from .functions import make_field
from .norms import FinslerNorm, Inverted, PNorm, PolytopeH, PolytopeV
from .regularize import Regularized

__all__ = ["SCHEMA", "ScenarioError", "load_scenario", "build_norm", "build_field", "locate"]


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer", "minimum": 0}
_vec2 = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_box = {"type": "array", "items": _num, "minItems": 4, "maxItems": 4}
_matrix = {"type": "array", "items": {"type": "array", "items": _num, "minItems": 1}, "minItems": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {
        "norm": {
            "oneOf": [
                _obj({"type": {"const": "pnorm"}, "p": {"type": ["number", "string"]},
                      "dim": {"type": "integer", "minimum": 1}, "A": _matrix}, ["type", "p"]),
                _obj({"type": {"enum": ["l1", "linf", "euclidean", "hexagon"]}}, ["type"]),
                _obj({"type": {"const": "polytope_h"}, "rows": _matrix}, ["type", "rows"]),
                _obj({"type": {"const": "polytope_v"}, "vertices": _matrix}, ["type", "vertices"]),
                _obj({"type": {"const": "inverted"}, "base": {"$ref": "#/$defs/norm"}},
                     ["type", "base"]),
                _obj({"type": {"const": "regularized"}, "base": {"$ref": "#/$defs/norm"},
                      "zeta": _pos}, ["type", "base", "zeta"]),
            ]
        },
        "field": {
            "oneOf": [
                _num,
                _obj({"name": {"type": "string"}, "params": {"type": "object"}}, ["name"]),
            ]
        },
        "problem": _obj({
            "box": _box, "h": _pos, "eps": _pos, "mu": {"type": "number", "minimum": 0},
            "c": {"$ref": "#/$defs/field"}, "f": {"$ref": "#/$defs/field"},
            "G": {"$ref": "#/$defs/field"}, "tol": _pos, "max_iters": _int,
            "sweep": {"enum": ["jacobi", "gauss_seidel"]},
            "init": {"enum": ["G", "mcshane", "zero"]},
        }, ["box", "h", "eps", "mu", "f", "G"]),
    },
    "type": "object",
    "properties": {
        "command": {"enum": ["norm-info", "regularize", "solve", "consistency", "verify-cones",
                             "eigen", "convergence", "simulate"]},
        "norm": {"$ref": "#/$defs/norm"},
        "seed": _int,
        "output": {"type": "string"},
        "norm_info": _obj({"samples": _int}),
        "regularize": _obj({"zetas": {"type": "array", "items": _pos, "minItems": 1},
                            "samples": _int, "tol": _pos}, ["zetas"]),
        "solve": {"$ref": "#/$defs/problem"},
        "consistency": _obj({"f": {"$ref": "#/$defs/field"}, "x0": _vec2,
                             "eps": {"type": "array", "items": _pos, "minItems": 2},
                             "random_probes": _int, "margin": _num}, ["f", "x0"]),
        "verify": _obj({"probes": _int, "C": _pos, "domain": _box, "margin": _num,
                        "threads": {"type": "integer", "minimum": 1}}),
        "eigen": _obj({"box": _box, "h": _pos, "expected": _num}),
        "convergence": _obj({"ladder": {"type": "array", "items": _vec2, "minItems": 2},
                             "box": _box, "v": _vec2, "mu": _pos, "tol": _pos,
                             "max_ratio": _pos}, ["ladder"]),
        "simulate": _obj({"box": _box, "h": _pos, "eps": _pos, "mu": _pos,
                          "c": {"$ref": "#/$defs/field"}, "f": {"$ref": "#/$defs/field"},
                          "G": {"$ref": "#/$defs/field"}, "x0": _vec2,
                          "episodes": {"type": "integer", "minimum": 100},
                          "strategy": {"enum": ["greedy", "random"]}, "cap": _int,
                          "log_episodes": _int}, ["box", "h", "eps", "mu", "f", "G", "x0"]),
    },
    "required": ["norm"],
    "additionalProperties": False,
}


class ScenarioError(ValueError):
    """Invalid scenario; the message names the offending line when known."""


# ---------------------------------------------------------------------------
# locating a JSON path in the source text


_DECODER = json.JSONDecoder()


def _skip_ws(text, i):
    while i < len(text) and text[i] in " \t\r\n":
        i += 1
    return i


def locate(text: str, path) -> int:
    """1-based line of the value at ``path`` (keys and indices) in ``text``.

    Walks the document structurally and returns the deepest position it can
    reach, so a path into a missing key points at the enclosing value.
    """
    i = _skip_ws(text, 0)
    for key in path:
        if i >= len(text):
            break
        if text[i] == "{" and isinstance(key, str):
            j = _skip_ws(text, i + 1)
            found = None
            while j < len(text) and text[j] != "}":
                k, j = _DECODER.raw_decode(text, j)
                j = _skip_ws(text, j) + 1          # ':'
                j = _skip_ws(text, j)
                if k == key:
                    found = j
                    break
                _, j = _DECODER.raw_decode(text, j)
                j = _skip_ws(text, j)
                if j < len(text) and text[j] == ",":
                    j = _skip_ws(text, j + 1)
            if found is None:
                break
            i = found
        elif text[i] == "[" and isinstance(key, int):
            j = _skip_ws(text, i + 1)
            for _ in range(key):
                _, j = _DECODER.raw_decode(text, j)
                j = _skip_ws(text, j)
                if j < len(text) and text[j] == ",":
                    j = _skip_ws(text, j + 1)
            i = j
        else:
            break
    return text.count("\n", 0, i) + 1


def _finite(obj, path=()):
    if isinstance(obj, float) and not math.isfinite(obj):
        return list(path)
    if isinstance(obj, dict):
        for k, v in obj.items():
            bad = _finite(v, path + (k,))
            if bad is not None:
                return bad
    if isinstance(obj, list):
        for k, v in enumerate(obj):
            bad = _finite(v, path + (k,))
            if bad is not None:
                return bad
    return None


def _specific(err):
    """Descend through ``oneOf`` failures into the branch whose ``type`` matched."""
    while err.context:
        branches = {}
        for sub in err.context:
            branches.setdefault(sub.relative_schema_path[0], []).append(sub)
        matched = [errs for errs in branches.values()
                   if not any(list(s.relative_path)[-1:] == ["type"] for s in errs)]
        pool = matched[0] if matched else err.context
        err = max(pool, key=lambda s: len(s.absolute_path))
    return err


def load_scenario(path) -> dict:
    """Read, parse and schema-validate a scenario file.

    Raises
    ------
    ScenarioError
        With ``"<path>:<line>: <message>"`` for syntax, schema or
        non-finite-number violations; ``OSError`` propagates.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    errors = sorted(Draft202012Validator(SCHEMA).iter_errors(data),
                    key=lambda e: (locate(text, list(e.absolute_path)), e.message))
    if errors:
        e = errors[0]
        e = _specific(e)
        at = list(e.absolute_path)
        if e.validator == "additionalProperties" and isinstance(e.instance, dict):
            extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
            if extra:
                at.append(extra[0])
        where = "/".join(map(str, e.absolute_path)) or "<root>"
        raise ScenarioError(f"{path}:{locate(text, at)}: {where}: {e.message}")
    bad = _finite(data)
    if bad is not None:
        raise ScenarioError(f"{path}:{locate(text, bad)}: non-finite number")
    return data


# ---------------------------------------------------------------------------
# builders


def _hexagon():
    t = np.pi * np.arange(6) / 3.0
    return PolytopeV(np.stack([np.cos(t), np.sin(t)], axis=1))


def build_norm(spec: dict) -> FinslerNorm:
    """Instantiate a norm from a validated spec; ``ScenarioError`` on bad values."""
    kind = spec["type"]
    try:
        if kind == "euclidean":
            return PNorm(2.0)
        if kind == "l1":
            return PNorm(1.0)
        if kind == "linf":
            return PNorm(math.inf)
        if kind == "hexagon":
            return _hexagon()
        if kind == "pnorm":
            p = spec["p"]
            p = math.inf if p in ("inf", "infinity") else float(p)
            if "A" in spec:
                return PNorm(p, A=np.asarray(spec["A"], float))
            return PNorm(p, dim=int(spec.get("dim", 2)))
        if kind == "polytope_h":
            return PolytopeH(np.asarray(spec["rows"], float))
        if kind == "polytope_v":
            return PolytopeV(np.asarray(spec["vertices"], float))
        if kind == "inverted":
            return Inverted(build_norm(spec["base"]))
        if kind == "regularized":
            return Regularized(build_norm(spec["base"]), float(spec["zeta"]))
    except ScenarioError:
        raise
    except (ValueError, TypeError, np.linalg.LinAlgError) as exc:
        raise ScenarioError(f"bad {kind} norm: {exc}") from None
    raise ScenarioError(f"unknown norm type {kind!r}")


def build_field(spec, norm: FinslerNorm | None = None):
    """A number or a ``{"name", "params"}`` block as a field."""
    if isinstance(spec, (int, float)):
        return make_field("constant", {"value": float(spec)})
    try:
        return make_field(spec["name"], spec.get("params", {}), norm)
    except (KeyError, ValueError) as exc:
        raise ScenarioError(f"bad field {spec.get('name')!r}: {exc}") from None
