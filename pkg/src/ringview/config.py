"""Run configuration: one JSON document describing the relations and their
CSV files, the view tree, the aggregate mode, and engine parameters.

Relative file paths resolve against the config file's directory so fixture
directories stay relocatable.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .errors import ConfigError, SchemaError
from .relations import Attribute, RelationSchema
from .rings import CATEGORICAL, CONTINUOUS

MODES = ("count", "covar", "mi")

_TOP_KEYS = {"relations", "mode", "tree", "stream", "batch_size", "pause_ms",
             "label", "mi_threshold", "lambda", "bins", "serve", "port",
             "output"}


@dataclass
class RelationConfig:
    schema: RelationSchema
    path: str | None = None


@dataclass
class EngineConfig:
    relations: list[RelationConfig]
    mode: str
    tree: dict
    stream: str | None = None
    batch_size: int = 10_000
    pause_ms: int | None = None
    label: str | None = None
    mi_threshold: float = 0.0
    lam: float = 0.0
    bins: int = 16
    serve: bool = False
    port: int = 8000
    output: str | None = None
    source: str | None = None  # config file path, for diagnostics

    def schemas(self) -> dict[str, RelationSchema]:
        return {r.schema.name: r.schema for r in self.relations}

    def relation_order(self) -> list[str]:
        return [r.schema.name for r in self.relations]

    def leaf_keys(self) -> dict[str, tuple[str, ...]]:
        """Relation name -> leaf key attributes, read off the tree config."""
        out: dict[str, tuple[str, ...]] = {}

        def walk(node: dict) -> None:
            if "relation" in node:
                out[node["relation"]] = tuple(node.get("key", ()))
            for ch in node.get("children", ()):
                walk(ch)

        walk(self.tree)
        return out

    def aggregate_attrs(self) -> list[Attribute]:
        """Attributes folded into payloads (schema minus leaf key), in
        config order; this fixes the moment-ring attribute order."""
        keys = self.leaf_keys()
        out: list[Attribute] = []
        for rc in self.relations:
            key = keys.get(rc.schema.name, ())
            out.extend(a for a in rc.schema.attrs if a.name not in key)
        return out

    def effective_pause_ms(self) -> int:
        if self.pause_ms is not None:
            return self.pause_ms
        return 1000 if self.serve else 0


def parse_config(doc: dict, base_dir: str | None = None,
                 source: str | None = None) -> EngineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    rels_doc = doc.get("relations")
    if not rels_doc:
        raise ConfigError("config needs a non-empty 'relations' list")
    relations: list[RelationConfig] = []
    seen: set[str] = set()
    for rd in rels_doc:
        name = rd.get("name")
        if not name:
            raise ConfigError("relation entry missing 'name'")
        if name in seen:
            raise ConfigError(f"duplicate relation {name!r}")
        seen.add(name)
        attrs_doc = rd.get("attrs")
        if not attrs_doc:
            raise ConfigError(f"relation {name!r} has no attributes")
        attrs = []
        for ad in attrs_doc:
            try:
                attr = Attribute(
                    ad["name"],
                    ad.get("dtype", "float"),
                    ad.get("kind") or _default_kind(ad.get("dtype", "float")),
                )
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"bad attribute entry in {name!r}: {ad!r}") from exc
            except (ValueError, SchemaError) as exc:
                raise ConfigError(f"relation {name!r}: {exc}") from exc
            attrs.append(attr)
        if len({a.name for a in attrs}) != len(attrs):
            raise ConfigError(f"relation {name!r} has duplicate attribute names")
        path = rd.get("file")
        if path is not None and base_dir is not None:
            path = os.path.join(base_dir, path) if not os.path.isabs(path) else path
        relations.append(RelationConfig(RelationSchema(name, tuple(attrs)), path))

    mode = doc.get("mode", "count")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    tree = doc.get("tree")
    if not isinstance(tree, dict):
        raise ConfigError("config needs a 'tree' object")

    stream = doc.get("stream")
    if stream is not None and base_dir is not None and not os.path.isabs(stream):
        stream = os.path.join(base_dir, stream)
    output = doc.get("output")
    if output is not None and base_dir is not None and not os.path.isabs(output):
        output = os.path.join(base_dir, output)

    cfg = EngineConfig(
        relations=relations,
        mode=mode,
        tree=tree,
        stream=stream,
        batch_size=int(doc.get("batch_size", 10_000)),
        pause_ms=None if doc.get("pause_ms") is None else int(doc["pause_ms"]),
        label=doc.get("label"),
        mi_threshold=float(doc.get("mi_threshold", 0.0)),
        lam=float(doc.get("lambda", 0.0)),
        bins=int(doc.get("bins", 16)),
        serve=bool(doc.get("serve", False)),
        port=int(doc.get("port", 8000)),
        output=output,
        source=source,
    )
    validate_config(cfg)
    return cfg


def _default_kind(dtype: str) -> str:
    return CATEGORICAL if dtype == "str" else CONTINUOUS


def validate_config(cfg: EngineConfig) -> None:
    if cfg.batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    if cfg.bins < 1:
        raise ConfigError("bins must be >= 1")
    if cfg.lam < 0:
        raise ConfigError("lambda must be >= 0")
    if cfg.pause_ms is not None and cfg.pause_ms < 0:
        raise ConfigError("pause_ms must be >= 0")
    if not (0 < cfg.port < 65536):
        raise ConfigError(f"port {cfg.port} out of range")

    agg = cfg.aggregate_attrs()
    names = [a.name for a in agg]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise ConfigError(f"aggregate attribute(s) {dup} appear in more than "
                          "one relation; join attributes must be leaf keys")
    by_name = {a.name: a for a in agg}

    if cfg.mode == "covar":
        if not cfg.label:
            raise ConfigError("covar mode needs a 'label' attribute")
        attr = by_name.get(cfg.label)
        if attr is None:
            raise ConfigError(f"label {cfg.label!r} is not an aggregated attribute")
        if attr.kind != CONTINUOUS:
            raise ConfigError(f"label {cfg.label!r} must be continuous in covar mode")
    elif cfg.mode == "mi":
        if not agg:
            raise ConfigError("mi mode needs at least one aggregated attribute")
        if cfg.label is not None and cfg.label not in by_name:
            raise ConfigError(f"label {cfg.label!r} is not an aggregated attribute")


def load_config(path: str) -> EngineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc, base_dir=os.path.dirname(os.path.abspath(path)),
                        source=path)
