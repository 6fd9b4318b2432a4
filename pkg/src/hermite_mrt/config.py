"""Run configuration: YAML/JSON documents, schema validation, dotted overrides."""
from __future__ import annotations

import copy
import itertools
import json
from pathlib import Path

import jsonschema
import yaml

from .collision import RelaxationSpec
from .modes import MODE_KINDS, ModeExperiment
from .solver import GasSpec
from .velset import VelocitySet, builtin, read_velocity_set


class ConfigError(ValueError):
    pass


_num = {"type": "number"}
_int = {"type": "integer"}
_vec = {"type": "array", "items": _num}
_ivec = {"type": "array", "items": _int, "minItems": 1}
_taus = ("tau21", "tau22", "tau31", "tau32", "tau41", "tau42", "tau43")


def _obj(props, required=()):
    return {
        "type": "object",
        "properties": props,
        "additionalProperties": False,
        "required": list(required),
    }


SCHEMA = _obj(
    {
        "velset": {"type": "string"},
        "N": {"type": "integer", "minimum": 2, "maximum": 4},
        "gas": _obj({"D": {"type": "integer", "minimum": 1}, "S": {"type": "integer", "minimum": 0}}),
        "relaxation": _obj(
            {t: {"type": ["number", "null"]} for t in _taus}, required=("tau21", "tau22", "tau32")
        ),
        "experiment": _obj(
            {
                "grid": _ivec,
                "wave_index": _ivec,
                "kind": {"enum": list(MODE_KINDS)},
                "amplitude": _num,
                "amplitudes": {"type": ["array", "null"], "items": _num},
                "base_flow": _vec,
                "base_rho": _num,
                "base_theta": _num,
                "steps": {"type": ["integer", "null"], "minimum": 1},
                "discard": {"type": ["integer", "null"], "minimum": 0},
            }
        ),
        "sweep": _obj({k: {"type": "array", "minItems": 1} for k in (*_taus, "S")}),
        "tolerance": _obj({m: _num for m in ("v", "t", "acoustic")}),
        "sim": _obj(
            {
                "steps": {"type": "integer", "minimum": 0},
                "diagnostics_every": {"type": "integer", "minimum": 1},
                "checkpoint_every": {"type": "integer", "minimum": 0},
                "restart": {"type": ["string", "null"]},
            }
        ),
        "output": _obj({"dir": {"type": "string"}, "prefix": {"type": "string"}}),
        "stability_eps": {"type": "number", "minimum": 0},
    },
    required=("relaxation",),
)

DEFAULTS = {
    "velset": "D2Q37",
    "N": 4,
    "gas": {"D": 2, "S": 0},
    "experiment": {},
    "sweep": {},
    "tolerance": {"v": 0.01, "t": 0.02, "acoustic": 0.02},
    "sim": {"steps": 100, "diagnostics_every": 1, "checkpoint_every": 0, "restart": None},
    "output": {"dir": "out", "prefix": "run"},
    "stability_eps": 1e-6,
}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(text: str):
    """``a.b.c=value`` with the value parsed as YAML (so numbers, lists, null work)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key.path=value")
    key, raw = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"override {text!r} has an empty key")
    return path, yaml.safe_load(raw)


def apply_overrides(doc: dict, overrides) -> dict:
    doc = copy.deepcopy(doc)
    for text in overrides:
        path, value = parse_override(text)
        node = doc
        for p in path[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {text!r}: {p!r} is not a section")
        node[path[-1]] = value
    return doc


def validate_document(doc: dict) -> dict:
    """Check against the schema and fill defaults; error messages name the key."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping")
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = ".".join(str(p) for p in e.absolute_path) or "<top level>"
        raise ConfigError(f"config key {where}: {e.message}")
    return _merge(DEFAULTS, doc)


def load_config(path, overrides=()) -> dict:
    text = Path(path).read_text()
    try:
        doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: cannot parse ({exc})") from exc
    return validate_document(apply_overrides(doc or {}, overrides))


def resolve_velset(name: str, base_dir=None) -> VelocitySet:
    try:
        return builtin(name)
    except KeyError:
        pass
    path = Path(name)
    if base_dir is not None and not path.is_absolute():
        candidate = Path(base_dir) / path
        if candidate.exists():
            path = candidate
    if not path.exists():
        raise ConfigError(f"velset {name!r} is neither a built-in nor a readable file")
    return read_velocity_set(path)


def relaxation_spec(cfg: dict) -> RelaxationSpec:
    try:
        spec = RelaxationSpec(**{k: v for k, v in cfg["relaxation"].items()})
        return spec.check_stable(cfg["stability_eps"])
    except ValueError as exc:
        raise ConfigError(f"relaxation: {exc}") from exc


def sweep_points(cfg: dict) -> list[dict]:
    """Cartesian product of the sweep axes; each point is a full config without ``sweep``."""
    axes = list(cfg["sweep"].items())
    base = copy.deepcopy(cfg)
    base["sweep"] = {}
    if not axes:
        return [base]
    points = []
    for values in itertools.product(*(v for _, v in axes)):
        point = copy.deepcopy(base)
        for (key, _), value in zip(axes, values):
            if key == "S":
                point["gas"]["S"] = value
            else:
                point["relaxation"][key] = value
        points.append(point)
    return points


def build_experiment(cfg: dict, vset: VelocitySet) -> ModeExperiment:
    gas = GasSpec(**cfg["gas"])
    exp = dict(cfg["experiment"])
    D = gas.D
    exp.setdefault("grid", [100] * D)
    exp.setdefault("wave_index", [1] + [0] * (D - 1))
    exp.setdefault("base_flow", [0.0] * D)
    try:
        return ModeExperiment(spec=relaxation_spec(cfg), gas=gas, velset=vset, N=cfg["N"], **exp)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"experiment: {exc}") from exc


def echo(cfg: dict) -> dict:
    """A JSON-ready copy of the resolved configuration."""
    return json.loads(json.dumps(cfg))
