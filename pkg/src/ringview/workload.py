"""Deterministic workload generator: join-compatible CSVs, a mixed
insert/delete update stream, and a ready-to-run config.

Three shapes, picked by relation count: 2 = a two-relation star on one key,
3 = a triangle with one measure per relation, 4+ = a fact table with
dimension tables joined along a chain.  Updates pick their target relation
proportionally to its size, so fact tables dominate star streams the way
they do in practice.  Every delete targets a tuple that is live at that
point in the stream, so multiplicities never go negative.  Identical
arguments produce byte-identical files.
"""

from __future__ import annotations

import bisect
import json
import os
import random

from .errors import ConfigError

_CAT_DOMAIN = 6


def gen_workload(seed: int, out_dir: str, tuples: int = 1000,
                 relations: int = 2, delete_frac: float = 0.2,
                 mode: str = "count", updates: int | None = None,
                 skew: float = 1.0, batch_size: int | None = None,
                 bins: int = 8) -> str:
    """Write CSVs, stream and config under out_dir; returns the config path."""
    if relations < 2:
        raise ConfigError("need at least 2 relations")
    if not 0.0 <= delete_frac <= 1.0:
        raise ConfigError("delete-frac must be in [0, 1]")
    if updates is None:
        updates = tuples
    rng = random.Random(seed)
    os.makedirs(out_dir, exist_ok=True)

    if relations == 2:
        shape = _pair_shape(tuples)
    elif relations == 3:
        shape = _triangle_shape(tuples)
    else:
        shape = _star_shape(tuples, relations - 1)

    live: dict[str, list[tuple]] = {}
    for rel in shape["relations"]:
        rows = [_gen_row(rng, rel, skew) for _ in range(rel["rows"])]
        live[rel["name"]] = rows
        with open(os.path.join(out_dir, rel["file"]), "w", encoding="utf-8",
                  newline="") as fh:
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")

    rel_names = [r["name"] for r in shape["relations"]]
    rel_weights = [r["rows"] for r in shape["relations"]]
    by_name = {r["name"]: r for r in shape["relations"]}
    with open(os.path.join(out_dir, "stream.txt"), "w", encoding="utf-8") as fh:
        for _ in range(updates):
            name = rng.choices(rel_names, weights=rel_weights)[0]
            rows = live[name]
            if rows and rng.random() < delete_frac:
                row = rows.pop(rng.randrange(len(rows)))
                fh.write(f"{name},-1," + ",".join(_fmt(v) for v in row) + "\n")
            else:
                row = _gen_row(rng, by_name[name], skew)
                rows.append(row)
                fh.write(f"{name},+1," + ",".join(_fmt(v) for v in row) + "\n")

    config = {
        "relations": [{"name": r["name"], "file": r["file"], "attrs": r["attrs"]}
                      for r in shape["relations"]],
        "mode": mode,
        "tree": shape["tree"],
        "stream": "stream.txt",
        "batch_size": batch_size or max(1, min(10_000, updates // 10 or 1)),
        "bins": bins,
    }
    if mode == "covar":
        config["label"] = shape["label"]
        config["lambda"] = 0.1
    elif mode == "mi":
        config["label"] = shape["label"]
        config["mi_threshold"] = 0.05
    config_path = os.path.join(out_dir, "config.json")
    with open(config_path, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return config_path


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _key_domain(tuples: int) -> int:
    return max(4, int(round(tuples ** 0.5)))


def _attr(name: str, dtype: str, kind: str | None = None) -> dict:
    a = {"name": name, "dtype": dtype}
    if kind:
        a["kind"] = kind
    return a


def _pair_shape(tuples: int) -> dict:
    d = _key_domain(tuples)
    return {
        "relations": [
            {"name": "R", "file": "R.csv", "rows": tuples,
             "attrs": [_attr("A", "int", "categorical"), _attr("B", "float")],
             "keys": {"A": d}, "measures": ["B"]},
            {"name": "S", "file": "S.csv", "rows": tuples,
             "attrs": [_attr("A", "int", "categorical"), _attr("C", "float"),
                       _attr("D", "float")],
             "keys": {"A": d}, "measures": ["C", "D"]},
        ],
        "tree": {"key": [], "children": [
            {"relation": "R", "key": ["A"]},
            {"relation": "S", "key": ["A"]},
        ]},
        "label": "D",
    }


def _triangle_shape(tuples: int) -> dict:
    d = _key_domain(tuples)
    return {
        "relations": [
            {"name": "R", "file": "R.csv", "rows": tuples,
             "attrs": [_attr("A", "int", "categorical"),
                       _attr("B", "int", "categorical"), _attr("X", "str")],
             "keys": {"A": d, "B": d}, "measures": ["X"]},
            {"name": "S", "file": "S.csv", "rows": tuples,
             "attrs": [_attr("B", "int", "categorical"),
                       _attr("C", "int", "categorical"), _attr("Y", "float")],
             "keys": {"B": d, "C": d}, "measures": ["Y"]},
            {"name": "T", "file": "T.csv", "rows": tuples,
             "attrs": [_attr("A", "int", "categorical"),
                       _attr("C", "int", "categorical"), _attr("Z", "float")],
             "keys": {"A": d, "C": d}, "measures": ["Z"]},
        ],
        "tree": {"key": [], "children": [
            {"key": ["A", "C"], "children": [
                {"relation": "R", "key": ["A", "B"]},
                {"relation": "S", "key": ["B", "C"]},
            ]},
            {"relation": "T", "key": ["A", "C"]},
        ]},
        "label": "Z",
    }


def _star_shape(tuples: int, dims: int) -> dict:
    d = _key_domain(tuples)
    fact_keys = [f"K{i}" for i in range(1, dims + 1)]
    rels = [{
        "name": "F", "file": "F.csv", "rows": tuples,
        "attrs": [_attr(k, "int", "categorical") for k in fact_keys]
                 + [_attr("M", "float")],
        "keys": {k: d for k in fact_keys}, "measures": ["M"],
    }]
    for i in range(1, dims + 1):
        dtype = "str" if i % 2 else "float"
        rels.append({
            "name": f"D{i}", "file": f"D{i}.csv", "rows": max(d, 4),
            "attrs": [_attr(f"K{i}", "int", "categorical"),
                      _attr(f"V{i}", dtype)],
            "keys": {f"K{i}": d}, "measures": [f"V{i}"],
        })
    node: dict = {"relation": "F", "key": list(fact_keys)}
    for i in range(1, dims + 1):
        node = {"key": [f"K{j}" for j in range(i + 1, dims + 1)],
                "children": [node, {"relation": f"D{i}", "key": [f"K{i}"]}]}
    return {"relations": rels, "tree": node, "label": "M"}


def _gen_row(rng: random.Random, rel: dict, skew: float) -> tuple:
    row = []
    key_sum = 0
    for a in rel["attrs"]:
        dom = rel["keys"].get(a["name"])
        if dom is not None:
            k = _skewed_key(rng, dom, skew)
            key_sum += k
            row.append(k)
        elif a["dtype"] == "str":
            row.append(f"c{(key_sum * 13 + rng.randrange(3)) % _CAT_DOMAIN}")
        else:
            base = (key_sum * 37) % 11 - 5
            row.append(round(base + rng.gauss(0.0, 1.0), 4))
    return tuple(row)


_CUM_CACHE: dict[tuple[int, float], list[float]] = {}


def _skewed_key(rng: random.Random, domain: int, skew: float) -> int:
    if skew <= 0:
        return rng.randrange(domain)
    cum = _CUM_CACHE.get((domain, skew))
    if cum is None:
        total, cum = 0.0, []
        for k in range(domain):
            total += 1.0 / (k + 1) ** skew
            cum.append(total)
        _CUM_CACHE[(domain, skew)] = cum
    return bisect.bisect_left(cum, rng.random() * cum[-1])
