"""CSV loading, update-stream parsing, batching, and keyed-relation state."""

import pytest

from ringview.errors import (
    CsvParseError,
    SchemaError,
    UpdateStreamError,
)
from ringview.relations import (
    Attribute,
    Interner,
    KeyedRelation,
    RelationSchema,
    group_into_batches,
    load_csv,
    parse_update_stream,
    parse_value,
    snapshot_stats,
)
from ringview.rings import CountRing


def schema_r():
    return RelationSchema("R", (Attribute("A", "int", "categorical"),
                                Attribute("B", "float")))


def schema_s():
    return RelationSchema("S", (Attribute("A", "int", "categorical"),
                                Attribute("C", "str", "categorical")))


def test_attribute_validation():
    with pytest.raises(SchemaError):
        Attribute("A", "bool")
    with pytest.raises(SchemaError):
        Attribute("A", "str")  # strings cannot be (default) continuous
    assert Attribute("A", "str", "categorical").kind == "categorical"


def test_interner_is_first_seen_order():
    it = Interner()
    assert [it.intern(s) for s in ("b", "a", "b", "c")] == [0, 1, 0, 2]
    assert it.lookup(2) == "c"
    assert len(it) == 3


def test_parse_value_by_dtype():
    it = Interner()
    assert parse_value("12", Attribute("A", "int", "categorical"), it) == 12
    assert parse_value("1.5", Attribute("B", "float"), it) == 1.5
    assert parse_value("red", Attribute("C", "str", "categorical"), it) == 0
    assert parse_value("red", Attribute("C", "str", "categorical"), it) == 0


def test_keyed_relation_accumulates_and_evicts():
    rel = KeyedRelation(("A", "B"), CountRing(), "R")
    rel.apply_delta((1, 2), 1)
    rel.apply_delta((1, 2), 2)
    assert rel.get((1, 2)) == 3
    rel.apply_delta((1, 2), -3)
    assert (1, 2) not in rel
    assert len(rel) == 0
    with pytest.raises(SchemaError):
        rel.apply_delta((1,), 1)


def test_load_csv_counts_duplicates(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("1,2.5\n1,2.5\n2,0.25\n")
    rel = load_csv(str(p), schema_r(), Interner())
    assert rel.get((1, 2.5)) == 2
    assert rel.get((2, 0.25)) == 1
    assert len(rel) == 2


def test_load_csv_reports_line_numbers(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2.5\n1\n")
    with pytest.raises(CsvParseError) as exc:
        load_csv(str(p), schema_r(), Interner())
    assert exc.value.line_no == 2
    p2 = tmp_path / "bad2.csv"
    p2.write_text("1,2.5\nx,3.0\n")
    with pytest.raises(CsvParseError) as exc:
        load_csv(str(p2), schema_r(), Interner())
    assert exc.value.line_no == 2


def test_parse_update_stream_basics():
    schemas = {"R": schema_r(), "S": schema_s()}
    lines = [
        "# a comment",
        "",
        "R,+1,3,1.5",
        "S,-2,3,red",
        "R,+1, 4 , 2.0 ",
    ]
    out = list(parse_update_stream(lines, schemas, Interner()))
    assert [(d.relation, d.key, d.multiplicity) for d in out] == [
        ("R", (3, 1.5), 1),
        ("S", (3, 0), -2),
        ("R", (4, 2.0), 1),
    ]


@pytest.mark.parametrize("line,fragment", [
    ("Q,+1,1,2", "unknown relation"),
    ("R,0,1,2.0", "zero multiplicity"),
    ("R,x,1,2.0", "bad multiplicity"),
    ("R,+1,1", "expected 2 values"),
    ("R", "malformed"),
])
def test_parse_update_stream_rejects(line, fragment):
    schemas = {"R": schema_r()}
    with pytest.raises(UpdateStreamError) as exc:
        list(parse_update_stream(["# hi", line], schemas, Interner()))
    assert exc.value.line_no == 2
    assert fragment in str(exc.value)


def test_group_into_batches_sizes_and_relation_order():
    schemas = {"R": schema_r(), "S": schema_s()}
    lines = [f"R,+1,{i},1.0" for i in range(3)] + ["S,+1,1,red"] * 4
    deltas = list(parse_update_stream(lines, schemas, Interner()))
    chunks = list(group_into_batches(deltas, 3, ["S", "R"]))
    assert len(chunks) == 3  # ceil(7/3)
    # First chunk holds 3 R-deltas; relation grouping follows config order.
    assert [b.target for b in chunks[0]] == ["R"]
    assert [b.target for b in chunks[1]] == ["S"]
    assert sum(len(b.deltas) for c in chunks for b in c) == 7
    mixed = list(group_into_batches(deltas, 7, ["S", "R"]))
    assert [b.target for b in mixed[0]] == ["S", "R"]


def test_inverse_stream_restores_base_exactly():
    schemas = {"R": schema_r()}
    it = Interner()
    base = KeyedRelation(schema_r().names, CountRing(), "R")
    for key in [(1, 1.0), (1, 1.0), (2, 0.5)]:
        base.apply_delta(key, 1)
    before = dict(base.data)
    lines = ["R,+1,3,9.5", "R,-1,1,1.0", "R,+2,2,0.5", "R,-1,2,0.5"]
    deltas = list(parse_update_stream(lines, schemas, it))
    for d in deltas:
        base.apply_delta(d.key, d.multiplicity)
    assert base.data != before
    for d in reversed(deltas):
        base.apply_delta(d.key, -d.multiplicity)
    assert base.data == before  # byte-exact for integer counts


def test_snapshot_stats_counts_keys():
    rel = KeyedRelation(("A",), CountRing(), "R")
    rel.apply_delta((1,), 5)
    rel.apply_delta((2,), 1)
    count, size = snapshot_stats(rel)
    assert count == 2 and size > 0
