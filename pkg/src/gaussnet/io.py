"""Network documents and canonical JSON output."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Union

import jsonschema
import numpy as np

from .errors import SchemaError, ValidationError
from .kernel import MfBmKernel
from .network import Network

SCHEMA_VERSION = 1
NodeId = Union[int, str]


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("gaussnet").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _validate(doc: Any, name: str) -> None:
    validator = jsonschema.Draft202012Validator(load_schema(name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise SchemaError(f"{name} document invalid at {where}: {e.message}")


@dataclass(frozen=True)
class NetworkDocument:
    net: Network
    kernel: MfBmKernel
    ids: tuple

    def index(self, node_id: NodeId) -> int:
        """Internal index of a node id; string forms of integer ids are accepted."""
        for a, x in enumerate(self.ids):
            if x == node_id or str(x) == str(node_id):
                return a
        raise ValidationError(f"unknown node id {node_id!r}")


def parse_network(doc: dict) -> NetworkDocument:
    _validate(doc, "network")
    nodes = doc["nodes"]
    ids = tuple(n["id"] for n in nodes)
    if len(set(map(str, ids))) != len(ids):
        raise SchemaError("node ids must be unique")
    pos = {str(x): a for a, x in enumerate(ids)}
    k = len(ids)
    edges = []
    for e in doc["edges"]:
        for end in ("from", "to"):
            if str(e[end]) not in pos:
                raise SchemaError(f"edge refers to unknown node {e[end]!r}")
        edges.append((pos[str(e["from"])], pos[str(e["to"])], float(e["p"])))
    rho = np.asarray(doc["rho"], dtype=float)
    eta = np.asarray(doc.get("eta", np.zeros((k, k))), dtype=float)
    for name, m in (("rho", rho), ("eta", eta)):
        if m.shape != (k, k):
            raise SchemaError(f"{name} must be a {k}x{k} matrix")
    net = Network.from_edges([n["mu"] for n in nodes], [n["lambda"] for n in nodes], edges)
    kernel = MfBmKernel(
        np.array([n["hurst"] for n in nodes], dtype=float),
        np.array([n["sigma"] for n in nodes], dtype=float),
        rho,
        eta,
    )
    return NetworkDocument(net, kernel, ids)


def load_network(source: Union[str, Path, dict]) -> NetworkDocument:
    if isinstance(source, dict):
        return parse_network(source)
    try:
        text = Path(source).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {source}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{source} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("network document must be a JSON object")
    return parse_network(doc)


def jsonable(obj: Any) -> Any:
    """Plain Python structure; numpy scalars and arrays become floats and lists."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, dict)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[" + ",".join(pad + _encode(v, indent, level + 1) for v in obj) + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = (pad + json.dumps(k) + ": " + _encode(v, indent, level + 1) for k, v in obj.items())
        return "{" + ",".join(items) + end + "}"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON with floats written to 17 significant digits and non-finite values as null."""
    return _encode(jsonable(obj), indent, 0) + "\n"


def validate_output(doc: dict) -> None:
    _validate(doc, "output")
