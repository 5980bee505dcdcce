"""Keyed relations with ring payloads, CSV ingestion, and update-stream parsing.

Base relations, deltas and materialized views all share one representation:
a finite map from key tuples to non-zero ring payloads.  Keys hold native
ints and floats; string values are interned to integer ids at ingestion so
relation values over categorical schemas stay cheap to hash and compare.
"""

from __future__ import annotations

import csv
import io
import operator
import os
import sys
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import CsvParseError, SchemaError, UpdateStreamError
from .rings import CATEGORICAL, CONTINUOUS, CountRing, MomentTriple, RelationValue, Ring

DTYPES = ("int", "float", "str")


@dataclass(frozen=True)
class Attribute:
    name: str
    dtype: str = "float"
    kind: str = CONTINUOUS

    def __post_init__(self):
        if self.dtype not in DTYPES:
            raise SchemaError(f"attribute {self.name!r}: unknown dtype {self.dtype!r}")
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise SchemaError(f"attribute {self.name!r}: unknown kind {self.kind!r}")
        if self.dtype == "str" and self.kind == CONTINUOUS:
            raise SchemaError(f"attribute {self.name!r}: str attributes must be categorical")


@dataclass(frozen=True)
class RelationSchema:
    name: str
    attrs: tuple[Attribute, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attrs)

    def position(self, attr: str) -> int:
        for i, a in enumerate(self.attrs):
            if a.name == attr:
                return i
        raise SchemaError(f"relation {self.name!r} has no attribute {attr!r}")

    def __len__(self) -> int:
        return len(self.attrs)


class Interner:
    """Bidirectional string <-> int id map; ids follow first-seen order."""

    def __init__(self):
        self._ids: dict[str, int] = {}
        self._strings: list[str] = []

    def intern(self, s: str) -> int:
        i = self._ids.get(s)
        if i is None:
            i = len(self._strings)
            self._ids[s] = i
            self._strings.append(s)
        return i

    def lookup(self, i: int) -> str:
        return self._strings[i]

    def __len__(self) -> int:
        return len(self._strings)


def parse_value(raw: str, attr: Attribute, interner: Interner):
    if attr.dtype == "int":
        return int(raw)
    if attr.dtype == "float":
        return float(raw)
    return interner.intern(raw)


def projector(pos: list[int]):
    """Tuple projection at C speed.  A single position projects to the bare
    value (cheaper hash, no allocation); callers must use the same positions
    on both sides of a lookup."""
    if not pos:
        return lambda _key: ()
    if len(pos) == 1:
        return operator.itemgetter(pos[0])
    return operator.itemgetter(*pos)


class KeyedRelation:
    """A finite map from schema-conformant key tuples to ring payloads.

    Zero payloads are evicted eagerly on write, which makes map equality the
    correctness criterion for delete/insert inverses.  Iteration follows
    insertion order and is therefore deterministic for identical histories;
    use :meth:`sorted_items` where history-independent order matters.
    """

    def __init__(self, schema: tuple[str, ...], ring: Ring, name: str = ""):
        self.schema = tuple(schema)
        self.ring = ring
        self.name = name or "relation"
        self.data: dict[tuple, object] = {}
        self._indexes: dict[tuple[str, ...], tuple[list[int], dict]] = {}

    def apply_delta(self, key: tuple, dv) -> None:
        if len(key) != len(self.schema):
            raise SchemaError(
                f"{self.name}: key arity {len(key)} != schema arity {len(self.schema)}")
        self.apply_many(((key, dv),))

    def apply_many(self, pairs: Iterable[tuple[tuple, object]]) -> None:
        """Apply (key, delta) pairs produced by our own grouping code: keys
        are trusted to match the schema arity.  This is the propagation hot
        path, hence the local bindings."""
        data = self.data
        add = self.ring.add
        is_zero = self.ring.is_zero
        indexes = self._indexes
        for key, dv in pairs:
            old = data.get(key)
            nv = dv if old is None else add(old, dv)
            if is_zero(nv):
                data.pop(key, None)
                nv = None
            else:
                data[key] = nv
            if indexes:
                for getter, idx in indexes.values():
                    bk = getter(key)
                    bucket = idx.get(bk)
                    if nv is not None:
                        if bucket is None:
                            idx[bk] = {key: nv}
                        else:
                            bucket[key] = nv
                    elif bucket is not None:
                        bucket.pop(key, None)
                        if not bucket:
                            del idx[bk]

    def index_for(self, attrs: tuple[str, ...]) -> dict:
        """Secondary index: projection of `attrs` -> {full key: payload}.

        Built once on first use, then kept in lockstep with the data map by
        apply_delta (including eviction), so repeated probes cost only the
        matching bucket.  Single-attribute projections use the bare value as
        the bucket key; probe with `projector` over the same attribute list.
        """
        entry = self._indexes.get(attrs)
        if entry is None:
            getter = projector([self.schema.index(a) for a in attrs])
            idx: dict = {}
            for k, v in self.data.items():
                idx.setdefault(getter(k), {})[k] = v
            entry = (getter, idx)
            self._indexes[attrs] = entry
        return entry[1]

    def get(self, key: tuple, default=None):
        return self.data.get(key, default)

    def sorted_items(self) -> list:
        return sorted(self.data.items())

    def __len__(self) -> int:
        return len(self.data)

    def __contains__(self, key) -> bool:
        return key in self.data


def payload_bytes(v) -> int:
    """Rough in-memory size of one payload, for stats and the UI."""
    if isinstance(v, int):
        return 8
    if isinstance(v, float):
        return 8
    if isinstance(v, RelationValue):
        return 16 + sum(8 * (len(k) + 1) for k in v.entries)
    if isinstance(v, MomentTriple):
        return payload_bytes(v.c) + sum(payload_bytes(x) for x in v.s) \
            + sum(payload_bytes(x) for x in v.q)
    return sys.getsizeof(v)


def snapshot_stats(rel: KeyedRelation) -> tuple[int, int]:
    """(key count, payload bytes estimate) for logs and the maintenance tab."""
    total = sum(8 * len(k) + payload_bytes(v) for k, v in rel.data.items())
    return len(rel.data), total


def load_csv(path: str, schema: RelationSchema, interner: Interner,
             ring: Ring | None = None) -> KeyedRelation:
    """Load a headerless CSV into a multiplicity relation (CountRing payloads).

    Every row contributes multiplicity 1; duplicate rows accumulate.
    """
    ring = ring or CountRing()
    rel = KeyedRelation(schema.names, ring, schema.name)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(schema):
                raise CsvParseError(path, line_no,
                                    f"expected {len(schema)} columns, got {len(row)}")
            try:
                key = tuple(parse_value(raw.strip(), attr, interner)
                            for raw, attr in zip(row, schema.attrs))
            except ValueError as exc:
                raise CsvParseError(path, line_no, str(exc)) from None
            rel.apply_delta(key, 1)
    return rel


@dataclass
class StreamDelta:
    """One signed update: positive multiplicity inserts, negative deletes."""
    relation: str
    key: tuple
    multiplicity: int


@dataclass
class UpdateBatch:
    """All deltas of one engine batch that target a single relation."""
    target: str
    deltas: list[tuple[tuple, int]] = field(default_factory=list)

    def total_updates(self) -> int:
        return sum(abs(m) for _, m in self.deltas)


def parse_update_stream(source, schemas: dict[str, RelationSchema],
                        interner: Interner) -> Iterator[StreamDelta]:
    """Parse lines `relation,±mult,v1,...,vk` into deltas, in file order.

    `source` is a path or an iterable of lines.  Lines starting with `#` and
    blank lines are skipped.  Grouping deltas into batches is the engine's
    job, not the parser's.
    """
    if isinstance(source, (str, os.PathLike)):
        fh = open(source, encoding="utf-8")
        close = True
    else:
        fh = source
        close = False
    try:
        line_no = 0
        for line in fh:
            line_no += 1
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = next(csv.reader(io.StringIO(line)))
            if len(fields) < 2:
                raise UpdateStreamError(line_no, f"malformed line {line!r}")
            name = fields[0].strip()
            schema = schemas.get(name)
            if schema is None:
                raise UpdateStreamError(line_no, f"unknown relation {name!r}")
            try:
                mult = int(fields[1])
            except ValueError:
                raise UpdateStreamError(
                    line_no, f"bad multiplicity {fields[1]!r}") from None
            if mult == 0:
                raise UpdateStreamError(line_no, "zero multiplicity")
            values = fields[2:]
            if len(values) != len(schema):
                raise UpdateStreamError(
                    line_no, f"{name}: expected {len(schema)} values, got {len(values)}")
            try:
                key = tuple(parse_value(raw.strip(), attr, interner)
                            for raw, attr in zip(values, schema.attrs))
            except ValueError as exc:
                raise UpdateStreamError(line_no, str(exc)) from None
            yield StreamDelta(name, key, mult)
    finally:
        if close:
            fh.close()


def group_into_batches(deltas: Iterable[StreamDelta], batch_size: int,
                       relation_order: list[str]) -> Iterator[list[UpdateBatch]]:
    """Chunk a delta stream into engine batches of at most `batch_size` deltas,
    each grouped per target relation in the given (config) order."""
    order = {name: i for i, name in enumerate(relation_order)}
    chunk: list[StreamDelta] = []
    for d in deltas:
        chunk.append(d)
        if len(chunk) >= batch_size:
            yield _split_by_relation(chunk, order)
            chunk = []
    if chunk:
        yield _split_by_relation(chunk, order)


def _split_by_relation(chunk: list[StreamDelta], order: dict[str, int]) -> list[UpdateBatch]:
    per: dict[str, UpdateBatch] = {}
    for d in chunk:
        b = per.get(d.relation)
        if b is None:
            b = per[d.relation] = UpdateBatch(d.relation)
        b.deltas.append((d.key, d.multiplicity))
    return [per[name] for name in sorted(per, key=order.__getitem__)]
