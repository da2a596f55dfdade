"""Workload documents: variables plus loop nests, parametrised by sizes.

Example::

    {
      "name": "gemv",
      "parameters": {"N": 32},
      "variables": [
        {"name": "A", "element_size_bytes": 8, "dims": ["N", "N"]},
        {"name": "x", "element_size_bytes": 8, "dims": ["N"]},
        {"name": "y", "element_size_bytes": 8, "dims": ["N"], "cache_friendly": "friendly"}
      ],
      "loop_nests": [
        {"name": "main", "body": [
          {"for": "i", "from": 0, "to": "N", "body": [
            {"for": "j", "from": 0, "to": "N", "body": [
              {"access": "A[i][j]", "mode": "read"},
              {"access": "x[j]", "mode": "read"}
            ]}
          ]}
        ]}
      ]
    }

Index arrays used in indirect subscripts need an ``init``: an explicit
list, or ``{"pattern": "iota" | "reverse" | "permutation" | "random",
"seed": int, "high": expr}``.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Union

from .._numbers import loads_exact
from ..exceptions import BindingError, ConfigError, ParseError
from .analysis import variable_cf
from .expr import parse_access, parse_affine
from .model import Access, CacheFriendliness, Loop, LoopNest, Mode, VariableProfile, count_accesses

__all__ = ["VariableDecl", "Workload", "load_workload", "bundled_workload", "bundled_workload_names"]


@dataclass(frozen=True)
class VariableDecl:
    name: str
    element_size_bytes: int
    dims: tuple  # of Affine over parameters
    reads: Optional[int] = None
    writes: Optional[int] = None
    cache_friendly: CacheFriendliness = CacheFriendliness.AUTO
    init: object = None


@dataclass(frozen=True)
class Workload:
    name: str
    variables: tuple
    nests: tuple
    parameters: Mapping[str, int] = field(default_factory=dict)
    description: str = ""

    def variable(self, name: str) -> VariableDecl:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def bind(self, overrides: Optional[Mapping[str, int]] = None) -> dict:
        env = dict(self.parameters)
        for key, value in (overrides or {}).items():
            if not isinstance(value, int) or isinstance(value, bool):
                raise BindingError(f"binding {key}={value!r} is not an integer")
            env[key] = value
        return env

    def shape(self, decl: VariableDecl, env: Mapping[str, int]) -> tuple:
        dims = tuple(d.evaluate(env) for d in decl.dims)
        if any(d <= 0 for d in dims):
            raise BindingError(f"variable {decl.name!r} has non-positive dimension {dims} under {dict(env)}")
        return dims

    def profiles(self, bindings: Optional[Mapping[str, int]] = None) -> list:
        """Concrete VariableProfiles with static (or overridden) counts."""
        env = self.bind(bindings)
        counts = count_accesses(self.nests, env)
        out = []
        for decl in self.variables:
            reads, writes = counts.get(decl.name, (0, 0))
            out.append(
                VariableProfile(
                    decl.name,
                    decl.element_size_bytes,
                    self.shape(decl, env),
                    reads if decl.reads is None else decl.reads,
                    writes if decl.writes is None else decl.writes,
                    decl.cache_friendly,
                )
            )
        return out

    def cache_flags(self, profiles, line_size_bytes: int) -> dict:
        return {p.name: variable_cf(p, self.nests, line_size_bytes) for p in profiles}

    def index_contents(self, name: str, env: Mapping[str, int]) -> list:
        """Flattened row-major contents of an index array."""
        decl = self.variable(name)
        if decl.init is None:
            raise ConfigError(f"variable {name!r} is used as an index array but has no 'init'")
        size = 1
        for d in self.shape(decl, env):
            size *= d
        init = decl.init
        if isinstance(init, list):
            values = list(init)
        else:
            pattern = init.get("pattern")
            rng = random.Random(init.get("seed", 0))
            if pattern == "iota":
                values = list(range(size))
            elif pattern == "reverse":
                values = list(range(size - 1, -1, -1))
            elif pattern == "permutation":
                values = list(range(size))
                rng.shuffle(values)
            elif pattern == "random":
                high = parse_affine(init.get("high", size)).evaluate(env)
                values = [rng.randrange(high) for _ in range(size)]
            else:
                raise ConfigError(f"variable {name!r}: unknown init pattern {pattern!r}")
        if len(values) != size:
            raise ConfigError(f"variable {name!r}: init has {len(values)} values, expected {size}")
        return values


# -- loading -----------------------------------------------------------------


def _int_field(doc, key, where, required=True, positive=False):
    if key not in doc:
        if required:
            raise ConfigError(f"{where}: missing required field {key!r}")
        return None
    value = doc[key]
    if not isinstance(value, int) or isinstance(value, bool) or value < (1 if positive else 0):
        raise ConfigError(f"{where}: field {key!r} must be a {'positive' if positive else 'non-negative'} integer")
    return value


def _affine_field(value, where):
    try:
        return parse_affine(value)
    except ParseError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _statement(doc, where, known, dims_of):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    if "for" in doc:
        unknown = set(doc) - {"for", "from", "to", "body"}
        if unknown:
            raise ConfigError(f"{where}: unknown loop field(s) {sorted(unknown)}")
        for key in ("from", "to"):
            if key not in doc:
                raise ConfigError(f"{where}: loop missing {key!r}")
        body = doc.get("body", [])
        if not isinstance(body, list):
            raise ConfigError(f"{where}: loop body must be a list")
        return Loop(
            doc["for"],
            _affine_field(doc["from"], f"{where}.from"),
            _affine_field(doc["to"], f"{where}.to"),
            tuple(_statement(s, f"{where}.body[{i}]", known, dims_of) for i, s in enumerate(body)),
        )
    if "access" in doc:
        unknown = set(doc) - {"access", "mode"}
        if unknown:
            raise ConfigError(f"{where}: unknown access field(s) {sorted(unknown)}")
        try:
            expr = parse_access(doc["access"], known)
        except ParseError as exc:
            raise type(exc)(f"{where}: {exc}") from exc
        for e in list(expr.nested_accesses()) + [expr]:
            if len(e.indices) != dims_of[e.base]:
                raise ConfigError(
                    f"{where}: {e} has {len(e.indices)} indices, {e.base!r} has {dims_of[e.base]} dimensions"
                )
        return Access(expr, Mode.parse(doc.get("mode", "read")))
    raise ConfigError(f"{where}: statement must have 'for' or 'access'")


def load_workload(document: Union[str, bytes, dict, Path]) -> Workload:
    default_name = "workload"
    if isinstance(document, Path):
        default_name = document.stem
        document = document.read_text(encoding="utf-8")
    if isinstance(document, (str, bytes)):
        try:
            document = loads_exact(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"workload document is not valid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise ConfigError("workload document must be a JSON object")
    unknown = set(document) - {"name", "description", "parameters", "variables", "loop_nests"}
    if unknown:
        raise ConfigError(f"workload document: unknown top-level field(s) {sorted(unknown)}")

    params = document.get("parameters", {})
    if not isinstance(params, dict) or any(
        not isinstance(v, int) or isinstance(v, bool) for v in params.values()
    ):
        raise ConfigError("workload document: 'parameters' must map names to integers")

    decls = []
    for i, vdoc in enumerate(document.get("variables", [])):
        where = f"variables[{i}]"
        if not isinstance(vdoc, dict):
            raise ConfigError(f"{where}: expected an object")
        unknown = set(vdoc) - {"name", "element_size_bytes", "dims", "reads", "writes", "cache_friendly", "init"}
        if unknown:
            raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
        if not isinstance(vdoc.get("name"), str):
            raise ConfigError(f"{where}: missing required field 'name'")
        dims = vdoc.get("dims", [1])
        if not isinstance(dims, list) or not dims:
            raise ConfigError(f"{where}: 'dims' must be a non-empty list")
        try:
            friendly = CacheFriendliness(vdoc.get("cache_friendly", "auto"))
        except ValueError:
            raise ConfigError(f"{where}: cache_friendly must be friendly, unfriendly or auto") from None
        init = vdoc.get("init")
        if init is not None and not isinstance(init, (list, dict)):
            raise ConfigError(f"{where}: 'init' must be a list or a pattern object")
        decls.append(
            VariableDecl(
                vdoc["name"],
                _int_field(vdoc, "element_size_bytes", where, positive=True),
                tuple(_affine_field(d, f"{where}.dims") for d in dims),
                _int_field(vdoc, "reads", where, required=False),
                _int_field(vdoc, "writes", where, required=False),
                friendly,
                init,
            )
        )
    names = [d.name for d in decls]
    if len(set(names)) != len(names):
        raise ConfigError("workload document: duplicate variable names")
    dims_of = {d.name: len(d.dims) for d in decls}

    nests = []
    for i, ndoc in enumerate(document.get("loop_nests", [])):
        where = f"loop_nests[{i}]"
        if not isinstance(ndoc, dict) or not isinstance(ndoc.get("body", []), list):
            raise ConfigError(f"{where}: expected an object with a 'body' list")
        body = tuple(
            _statement(s, f"{where}.body[{j}]", set(names), dims_of) for j, s in enumerate(ndoc.get("body", []))
        )
        nests.append(LoopNest(body, ndoc.get("name", f"nest{i}")))

    return Workload(
        document.get("name", default_name),
        tuple(decls),
        tuple(nests),
        dict(params),
        document.get("description", ""),
    )


def _workload_dir() -> Path:
    return Path(str(resources.files("hetmem").joinpath("data", "workloads")))


def bundled_workload_names() -> list:
    return sorted(p.stem for p in _workload_dir().glob("*.json"))


def bundled_workload(name: str) -> Workload:
    path = _workload_dir() / f"{name}.json"
    if not path.exists():
        raise ConfigError(f"no bundled workload {name!r}; available: {bundled_workload_names()}")
    return load_workload(path)
