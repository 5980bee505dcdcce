"""View trees: bottom-up evaluation and leaf-to-root delta propagation.

A tree has base relations at its leaves and the fully aggregated query at
its root.  Each leaf groups its relation by the leaf's key attributes and
folds the remaining attributes into ring payloads via the ring's lift
functions; each internal node joins its children on shared key attributes,
multiplies payloads, and sums them per group.

An update batch to one relation is evaluated exactly like a leaf (signed
multiplicities produce negated payloads), then joined with the current
sibling materializations at every ancestor; only the materializations on
the leaf-to-root path change.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

from .errors import TreeValidationError
from .relations import KeyedRelation, RelationSchema, UpdateBatch, projector
from .rings import Ring


class LeafNode:
    def __init__(self, node_id: str, schema: RelationSchema, key_attrs: Iterable[str]):
        self.id = node_id
        self.relation = schema.name
        self.base_schema = schema
        self.key_attrs = tuple(key_attrs)
        self.lifted_attrs = tuple(a for a in schema.names if a not in self.key_attrs)
        self.materialized: KeyedRelation | None = None
        self._lift_cache: dict = {}

    children = ()


class ViewNode:
    def __init__(self, node_id: str, key_attrs: Iterable[str], children: list):
        self.id = node_id
        self.key_attrs = tuple(key_attrs)
        self.children = children
        self.materialized: KeyedRelation | None = None


class ViewTree:
    """A validated tree plus its leaf index, base relations and transforms."""

    def __init__(self, root, ring: Ring, schemas: dict[str, RelationSchema],
                 transforms: Mapping[str, Callable] | None = None):
        self.root = root
        self.ring = ring
        self.schemas = schemas
        self.transforms = dict(transforms or {})
        self.leaves: dict[str, LeafNode] = {}
        self.paths: dict[str, list] = {}  # relation -> [leaf, ..., root]
        self.bases: dict[str, KeyedRelation] = {}
        self._index_leaves(root, [])

    def _index_leaves(self, node, ancestors):
        if isinstance(node, LeafNode):
            self.leaves[node.relation] = node
            self.paths[node.relation] = [node] + list(reversed(ancestors))
        else:
            for ch in node.children:
                self._index_leaves(ch, ancestors + [node])

    def nodes(self) -> list:
        out = []

        def walk(n):
            out.append(n)
            for ch in n.children:
                walk(ch)

        walk(self.root)
        return out

    def root_payload(self):
        """Payload of the empty key at the fully aggregating root."""
        data = self.root.materialized.data if self.root.materialized else {}
        return data.get((), self.ring.zero())


def build_tree(config: Mapping, schemas: dict[str, RelationSchema], ring: Ring,
               transforms: Mapping[str, Callable] | None = None) -> ViewTree:
    """Construct and validate a view tree from its configuration dict.

    Leaves are ``{"relation": name, "key": [...]}``; internal nodes are
    ``{"key": [...], "children": [...]}`` with an optional ``"id"``.
    Rejects trees that violate the running-intersection condition, project a
    leaf below an attribute the ring cannot lift, or mention a relation
    twice.
    """
    counter = [0]
    seen_relations: set[str] = set()

    def build(cfg, is_root):
        if "relation" in cfg:
            name = cfg["relation"]
            if name not in schemas:
                raise TreeValidationError(f"unknown relation {name!r} in tree config")
            if name in seen_relations:
                raise TreeValidationError(f"relation {name!r} appears in two leaves")
            seen_relations.add(name)
            schema = schemas[name]
            key = tuple(cfg.get("key", ()))
            for a in key:
                if a not in schema.names:
                    raise TreeValidationError(
                        f"leaf {name!r}: key attribute {a!r} not in relation schema")
            if len(set(key)) != len(key):
                raise TreeValidationError(f"leaf {name!r}: duplicate key attribute")
            leaf = LeafNode(cfg.get("id", f"V_{name}"), schema, key)
            for a in leaf.lifted_attrs:
                if not ring.tracks(a):
                    raise TreeValidationError(
                        f"leaf {name!r}: lifted attribute {a!r} is not tracked "
                        f"by the {ring.name} ring")
            return leaf
        children = cfg.get("children")
        if not children:
            raise TreeValidationError("internal node with no children")
        built = [build(c, False) for c in children]
        key = tuple(cfg.get("key", ()))
        if len(set(key)) != len(key):
            raise TreeValidationError("internal node with duplicate key attribute")
        child_attrs = set()
        for ch in built:
            child_attrs.update(ch.key_attrs)
        for a in key:
            if a not in child_attrs:
                raise TreeValidationError(
                    f"node key attribute {a!r} does not occur in any child key")
        if is_root:
            node_id = cfg.get("id", "root")
            if key:
                raise TreeValidationError(
                    "root must aggregate away all attributes (empty key)")
        else:
            counter[0] += 1
            node_id = cfg.get("id", f"join{counter[0]}")
        return ViewNode(node_id, key, built)

    root = build(dict(config), True)
    if isinstance(root, LeafNode) and root.key_attrs:
        raise TreeValidationError("root must aggregate away all attributes (empty key)")
    _check_running_intersection(root, schemas)
    return ViewTree(root, ring, schemas, transforms)


def _check_running_intersection(root, schemas: dict[str, RelationSchema]) -> None:
    """An attribute projected away at a node must not occur in any base
    relation outside that node's subtree."""
    tree_relations = _collect_relations(root)
    occurs: dict[str, set[str]] = {}
    for name in tree_relations:
        for a in schemas[name].names:
            occurs.setdefault(a, set()).add(name)

    def walk(node):
        if isinstance(node, LeafNode):
            below_rels = {node.relation}
            below_attrs = set(node.base_schema.names)
        else:
            below_rels, below_attrs = set(), set()
            for ch in node.children:
                r, a = walk(ch)
                below_rels |= r
                below_attrs |= a
        for a in sorted(below_attrs - set(node.key_attrs)):
            outside = occurs.get(a, set()) - below_rels
            if outside:
                raise TreeValidationError(
                    f"attribute {a!r} is projected away at node {node.id!r} but "
                    f"occurs in {sorted(outside)} outside its subtree")
        return below_rels, below_attrs

    walk(root)


def _collect_relations(node) -> set[str]:
    if isinstance(node, LeafNode):
        return {node.relation}
    out: set[str] = set()
    for ch in node.children:
        out |= _collect_relations(ch)
    return out


def evaluate_leaf(tree: ViewTree, leaf: LeafNode,
                  base_data: Mapping[tuple, int]) -> dict:
    """Group a multiplicity map by the leaf key, lifting the other attributes.

    Each tuple contributes its lift product scaled by its (signed)
    multiplicity; groups that sum to zero are dropped.
    """
    ring = tree.ring
    names = leaf.base_schema.names
    kpos = [names.index(a) for a in leaf.key_attrs]
    lifted = [(a, names.index(a), tree.transforms.get(a)) for a in leaf.lifted_attrs]
    cache = leaf._lift_cache
    out: dict = {}
    for key, mult in base_data.items():
        raw = tuple(key[p] for _, p, _ in lifted)
        pv = cache.get(raw)
        if pv is None:
            for (a, _, tf), x in zip(lifted, raw):
                g = ring.lift(a, tf(x) if tf else x)
                pv = g if pv is None else ring.mul(pv, g)
            if pv is None:
                pv = ring.one()
            cache[raw] = pv
        contrib = ring.scale(pv, mult)
        gk = (key[kpos[0]],) if len(kpos) == 1 else tuple(key[p] for p in kpos)
        cur = out.get(gk)
        out[gk] = contrib if cur is None else ring.add(cur, contrib)
    return {k: v for k, v in out.items() if not ring.is_zero(v)}


def _hash_join(ring: Ring, lschema, ldata: dict, rschema, rdata: dict):
    """Natural join of two keyed maps; payloads multiply in (left, right) order.

    The hash index is built on the smaller input; the output key order and
    payload product order do not depend on that choice.
    """
    shared = [a for a in lschema if a in rschema]
    lpos = [lschema.index(a) for a in shared]
    rpos = [rschema.index(a) for a in shared]
    extra = [i for i, a in enumerate(rschema) if a not in lschema]
    out_schema = tuple(lschema) + tuple(rschema[i] for i in extra)
    out: dict = {}
    if len(ldata) <= len(rdata):
        index: dict = {}
        for k, v in ldata.items():
            index.setdefault(tuple(k[p] for p in lpos), []).append((k, v))
        for rk, rv in rdata.items():
            bucket = index.get(tuple(rk[p] for p in rpos))
            if not bucket:
                continue
            tail = tuple(rk[i] for i in extra)
            for lk, lv in bucket:
                out[lk + tail] = ring.mul(lv, rv)
    else:
        index = {}
        for k, v in rdata.items():
            index.setdefault(tuple(k[p] for p in rpos), []).append((k, v))
        for lk, lv in ldata.items():
            bucket = index.get(tuple(lk[p] for p in lpos))
            if bucket:
                for rk, rv in bucket:
                    out[lk + tuple(rk[i] for i in extra)] = ring.mul(lv, rv)
    return out_schema, out


def _group_by(ring: Ring, schema, data: dict, key_attrs) -> dict:
    pos = [schema.index(a) for a in key_attrs]
    out: dict = {}
    add = ring.add
    if len(pos) == 1:
        p = pos[0]
        for k, v in data.items():
            gk = (k[p],)
            cur = out.get(gk)
            out[gk] = v if cur is None else add(cur, v)
    else:
        getter = projector(pos)  # () and 2+ positions both yield tuples
        for k, v in data.items():
            gk = getter(k)
            cur = out.get(gk)
            out[gk] = v if cur is None else add(cur, v)
    return {k: v for k, v in out.items() if not ring.is_zero(v)}


def _evaluate_join(ring: Ring, inputs: list, key_attrs) -> dict:
    """Join (schema, data) inputs left to right, then group by key_attrs."""
    schema, data = inputs[0]
    for nschema, ndata in inputs[1:]:
        schema, data = _hash_join(ring, schema, data, nschema, ndata)
    return _group_by(ring, schema, data, key_attrs)


def _join_delta(ring: Ring, xschema: tuple, xdata: dict, sibling) -> tuple:
    """Join a delta against a materialized sibling by probing the sibling on
    the shared attributes, so cost scales with the delta, not the sibling.

    When the shared attributes are the sibling's whole key this is a direct
    map lookup; otherwise a maintained secondary index supplies the matching
    bucket.
    """
    sschema = tuple(sibling.key_attrs)
    rel = sibling.materialized
    xset = set(xschema)
    shared = tuple(a for a in sschema if a in xset)
    xpos = [xschema.index(a) for a in shared]
    extra = [i for i, a in enumerate(sschema) if a not in xset]
    out_schema = xschema + tuple(sschema[i] for i in extra)
    out: dict = {}
    mul = ring.mul
    if len(shared) == len(sschema):
        # the sibling is keyed exactly by the shared attributes
        data = rel.data
        if len(xpos) == 1:
            p = xpos[0]
            for xk, xv in xdata.items():
                sv = data.get((xk[p],))
                if sv is not None:
                    out[xk] = mul(xv, sv)
        else:
            getter = projector(xpos)  # () and 2+ both project to tuples
            for xk, xv in xdata.items():
                sv = data.get(getter(xk))
                if sv is not None:
                    out[xk] = mul(xv, sv)
    else:
        index = rel.index_for(shared)
        getter = projector(xpos)  # bare-value keys for single attrs
        if len(extra) == 1:
            e = extra[0]
            for xk, xv in xdata.items():
                bucket = index.get(getter(xk))
                if not bucket:
                    continue
                for sk, sv in bucket.items():
                    out[xk + (sk[e],)] = mul(xv, sv)
        else:
            for xk, xv in xdata.items():
                bucket = index.get(getter(xk))
                if not bucket:
                    continue
                for sk, sv in bucket.items():
                    out[xk + tuple(sk[i] for i in extra)] = mul(xv, sv)
    return out_schema, out


def evaluate_node(tree: ViewTree, node: ViewNode) -> dict:
    """Join the children's current materializations and group by node key."""
    inputs = [(ch.key_attrs, ch.materialized.data) for ch in node.children]
    return _evaluate_join(tree.ring, inputs, node.key_attrs)


def initial_eval(tree: ViewTree, bases: dict[str, KeyedRelation]) -> None:
    """Materialize every view bottom-up from the loaded base relations."""
    tree.bases = bases

    def walk(node):
        for ch in node.children:
            walk(ch)
        if isinstance(node, LeafNode):
            data = evaluate_leaf(tree, node, bases[node.relation].data)
        else:
            data = evaluate_node(tree, node)
        rel = KeyedRelation(node.key_attrs, tree.ring, node.id)
        rel.data = data
        node.materialized = rel

    walk(tree.root)


def register_probe_indexes(tree: ViewTree) -> None:
    """Create every secondary index delta propagation can probe.

    The tree shape fixes which projections `_join_delta` will ever ask a
    sibling for, so an engine that maintains views incrementally can build
    them right after the initial evaluation instead of on the first affected
    update; apply_delta keeps them current from then on.  Engines that
    re-evaluate from scratch never probe and should not pay for this.
    """
    def walk(node):
        for ch in node.children:
            walk(ch)
        if isinstance(node, LeafNode):
            return
        for src in node.children:
            seen = set(src.key_attrs)
            for ch in node.children:
                if ch is src:
                    continue
                sschema = tuple(ch.key_attrs)
                shared = tuple(a for a in sschema if a in seen)
                if len(shared) < len(sschema):
                    ch.materialized.index_for(shared)
                seen.update(sschema)

    walk(tree.root)


def propagate_delta(tree: ViewTree, batch: UpdateBatch):
    """Apply one single-relation batch along its leaf-to-root path.

    Returns the root's delta payload.  Materializations off the path and
    sibling views are read but never written; the base relation is updated
    alongside the leaf.
    """
    if batch.target not in tree.leaves:
        raise TreeValidationError(f"no leaf for relation {batch.target!r}")
    ring = tree.ring
    path = tree.paths[batch.target]
    leaf = path[0]

    base = tree.bases.get(batch.target)
    delta_counts: dict[tuple, int] = {}
    for key, mult in batch.deltas:
        nm = delta_counts.get(key, 0) + mult
        if nm:
            delta_counts[key] = nm
        else:
            delta_counts.pop(key, None)
    if base is not None:
        base.apply_many(delta_counts.items())

    delta = evaluate_leaf(tree, leaf, delta_counts)
    _apply_into(leaf.materialized, delta)

    prev_node, prev_delta = leaf, delta
    for node in path[1:]:
        xschema, xdata = tuple(prev_node.key_attrs), prev_delta
        for ch in node.children:
            if ch is not prev_node:
                xschema, xdata = _join_delta(ring, xschema, xdata, ch)
        node_delta = _group_by(ring, xschema, xdata, node.key_attrs)
        _apply_into(node.materialized, node_delta)
        prev_node, prev_delta = node, node_delta

    return prev_delta.get((), ring.zero())


def _apply_into(rel: KeyedRelation, delta: dict) -> None:
    rel.apply_many(delta.items())


def describe(tree: ViewTree, include_sql: bool = False) -> dict:
    """Structure dump: node ids, keys, child edges, live key counts."""
    nodes, edges = [], []

    def walk(node):
        entry = {"id": node.id, "key": list(node.key_attrs)}
        if isinstance(node, LeafNode):
            entry["relation"] = node.relation
        entry["count"] = len(node.materialized) if node.materialized else 0
        if include_sql:
            entry["sql"] = node_sql(tree, node)
        nodes.append(entry)
        for ch in node.children:
            edges.append([node.id, ch.id])
            walk(ch)

    walk(tree.root)
    return {"nodes": nodes, "edges": edges}


def node_sql(tree: ViewTree, node) -> str:
    """Pseudo-SQL for the aggregate query one node maintains."""
    keys = ", ".join(node.key_attrs)
    if isinstance(node, LeafNode):
        if tree.ring.name == "count" or not node.lifted_attrs:
            agg = "SUM(1)"
        else:
            agg = "SUM(" + " * ".join(f"g_{a}({a})" for a in node.lifted_attrs) + ")"
        sql = f"SELECT {keys + ', ' if keys else ''}{agg} AS agg FROM {node.relation}"
    else:
        prod = " * ".join(f"{ch.id}.agg" for ch in node.children)
        frm = " NATURAL JOIN ".join(ch.id for ch in node.children)
        sql = f"SELECT {keys + ', ' if keys else ''}SUM({prod}) AS agg FROM {frm}"
    if keys:
        sql += f" GROUP BY {keys}"
    return sql
