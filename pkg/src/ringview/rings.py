"""Aggregation rings: the payload algebras that view maintenance is generic over.

Every key in a base relation, delta or materialized view carries a payload
drawn from one of four commutative rings:

* ``CountRing``        -- plain integers; payloads are (signed) tuple
  multiplicities, so inserts and deletes are the same operation.
* ``MomentRing``       -- triples (c, s, q) of scalar statistics over m
  continuous attributes: count, per-attribute sums, and the upper triangle
  of the matrix of pairwise sums of products.  Summing lifted tuples over a
  join yields exactly the aggregates a least-squares solver needs.
* ``RelationRing``     -- finite maps from key tuples to float coefficients,
  with union as addition and natural join as multiplication.
* ``RelationalMomentRing`` -- the moment triple with relation-valued entries,
  which one-hot encodes categorical attributes as singleton relations while
  continuous attributes live under the empty key.  The triple formulas are
  shared verbatim with ``MomentRing``; only the entry operations change.

All payloads are immutable after construction and every operation is a pure
function, so ring values may be shared freely across threads.
"""

from __future__ import annotations

from typing import Iterable, Mapping

from .errors import KindMismatchError, RingMismatchError, UnknownAttributeError

#: Absolute tolerance under which a float entry counts as zero (and its key
#: is dropped from relation values / evicted from views).
DEFAULT_ZERO_TOL = 1e-12

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


def upper_index(m: int, i: int, j: int) -> int:
    """Position of the (i, j) cell, i <= j, in a row-major upper triangle."""
    if i > j:
        i, j = j, i
    return i * m - (i * (i + 1)) // 2 + j


def _close(a: float, b: float, rtol: float, atol: float) -> bool:
    return abs(a - b) <= atol + rtol * max(abs(a), abs(b))


class RelationValue:
    """A finite map from key tuples to nonzero float coefficients.

    The schema is an ordered tuple of attribute names; every key has the
    schema's arity.  The empty relation doubles as the additive zero for all
    schemas, so a zero produced before the schema is known still combines
    with anything.
    """

    __slots__ = ("schema", "entries")

    def __init__(self, schema: Iterable[str] = (), entries: Mapping | None = None,
                 tol: float = DEFAULT_ZERO_TOL):
        self.schema = tuple(schema)
        if entries:
            self.entries = {k: v for k, v in entries.items() if abs(v) > tol}
        else:
            self.entries = {}

    @classmethod
    def _raw(cls, schema, entries) -> "RelationValue":
        # Internal fast path: entries already normalized, no copy.
        rv = object.__new__(cls)
        rv.schema = schema
        rv.entries = entries
        return rv

    @classmethod
    def singleton(cls, schema, key, coeff: float = 1.0,
                  tol: float = DEFAULT_ZERO_TOL) -> "RelationValue":
        if abs(coeff) <= tol:
            return EMPTY_RELATION
        return cls._raw(tuple(schema), {tuple(key): float(coeff)})

    def is_empty(self) -> bool:
        return not self.entries

    def add(self, other: "RelationValue", tol: float = DEFAULT_ZERO_TOL) -> "RelationValue":
        if not other.entries:
            return self
        if not self.entries:
            return other
        if self.schema != other.schema:
            raise RingMismatchError(
                f"cannot add relations over {self.schema} and {other.schema}")
        out = dict(self.entries)
        for k, v in other.entries.items():
            nv = out.get(k, 0.0) + v
            if abs(nv) <= tol:
                out.pop(k, None)
            else:
                out[k] = nv
        return RelationValue._raw(self.schema, out)

    def join(self, other: "RelationValue", tol: float = DEFAULT_ZERO_TOL) -> "RelationValue":
        """Multiset natural join; coefficients of matching keys multiply.

        The result schema is this relation's schema followed by the other's
        attributes not already present.  Coefficient products keep operand
        order (self first) so results are bit-deterministic.
        """
        if not self.entries or not other.entries:
            return EMPTY_RELATION
        shared = [a for a in self.schema if a in other.schema]
        spos = [self.schema.index(a) for a in shared]
        opos = [other.schema.index(a) for a in shared]
        extra = [i for i, a in enumerate(other.schema) if a not in self.schema]
        out_schema = self.schema + tuple(other.schema[i] for i in extra)
        out: dict = {}
        # Build the hash index on the smaller operand, probe with the larger.
        if len(self.entries) <= len(other.entries):
            index: dict = {}
            for k, v in self.entries.items():
                index.setdefault(tuple(k[p] for p in spos), []).append((k, v))
            for ok, ov in other.entries.items():
                bucket = index.get(tuple(ok[p] for p in opos))
                if not bucket:
                    continue
                tail = tuple(ok[i] for i in extra)
                for sk, sv in bucket:
                    c = sv * ov
                    if abs(c) > tol:
                        out[sk + tail] = c
        else:
            index = {}
            for k, v in other.entries.items():
                index.setdefault(tuple(k[p] for p in opos), []).append((k, v))
            for sk, sv in self.entries.items():
                bucket = index.get(tuple(sk[p] for p in spos))
                if not bucket:
                    continue
                for ok, ov in bucket:
                    c = sv * ov
                    if abs(c) > tol:
                        out[sk + tuple(ok[i] for i in extra)] = c
        if not out:
            return EMPTY_RELATION
        return RelationValue._raw(out_schema, out)

    def neg(self) -> "RelationValue":
        if not self.entries:
            return self
        return RelationValue._raw(self.schema, {k: -v for k, v in self.entries.items()})

    def get(self, key, default: float = 0.0) -> float:
        return self.entries.get(tuple(key), default)

    def total(self) -> float:
        return sum(self.entries.values())

    def close_to(self, other: "RelationValue", rtol: float, atol: float) -> bool:
        # Schemas may differ only when one side is empty (schema-free zero).
        if self.entries and other.entries and self.schema != other.schema:
            return False
        for k in self.entries.keys() | other.entries.keys():
            if not _close(self.entries.get(k, 0.0), other.entries.get(k, 0.0), rtol, atol):
                return False
        return True

    def __eq__(self, other) -> bool:
        if not isinstance(other, RelationValue):
            return NotImplemented
        if not self.entries and not other.entries:
            return True
        return self.schema == other.schema and self.entries == other.entries

    def __hash__(self):
        raise TypeError("RelationValue is not hashable")

    def __repr__(self) -> str:
        body = ", ".join(f"{k}↦{v:g}" for k, v in sorted(self.entries.items()))
        return f"Rel[{','.join(self.schema)}]{{{body}}}"


EMPTY_RELATION = RelationValue()


class MomentTriple:
    """Compound payload (c, s, q): count, linear sums, quadratic co-moments.

    ``s`` has one entry per tracked attribute; ``q`` stores the symmetric
    matrix of pairwise products as its upper triangle, row-major.  Entries
    are floats or :class:`RelationValue`, fixed per ring.
    """

    __slots__ = ("c", "s", "q")

    def __init__(self, c, s, q):
        self.c = c
        self.s = tuple(s)
        self.q = tuple(q)

    def q_at(self, m: int, i: int, j: int):
        return self.q[upper_index(m, i, j)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, MomentTriple):
            return NotImplemented
        return self.c == other.c and self.s == other.s and self.q == other.q

    def __hash__(self):
        raise TypeError("MomentTriple is not hashable")

    def __repr__(self) -> str:
        return f"MomentTriple(c={self.c!r}, s={self.s!r}, q={self.q!r})"


class Ring:
    """Common interface of the four payload rings."""

    name: str = "ring"
    zero_tol: float = DEFAULT_ZERO_TOL

    def zero(self):
        raise NotImplementedError

    def one(self):
        raise NotImplementedError

    def add(self, a, b):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def neg(self, v):
        raise NotImplementedError

    def is_zero(self, v) -> bool:
        raise NotImplementedError

    def lift(self, attr: str, value):
        """Map a raw attribute value to the ring element it aggregates as."""
        raise NotImplementedError

    def tracks(self, attr: str) -> bool:
        return False

    def allclose(self, a, b, rtol: float = 1e-9, atol: float = DEFAULT_ZERO_TOL) -> bool:
        raise NotImplementedError

    def scale(self, v, n: int):
        """n-fold ring sum of v for signed integer n, via repeated doubling.

        Stays correct for every ring (relational entries included) where
        entry-wise numeric scaling would not be.
        """
        if n == 0:
            return self.zero()
        if n < 0:
            return self.neg(self.scale(v, -n))
        acc = None
        base = v
        while n:
            if n & 1:
                acc = base if acc is None else self.add(acc, base)
            n >>= 1
            if n:
                base = self.add(base, base)
        return acc


class CountRing(Ring):
    """The integers; payloads are signed tuple multiplicities."""

    name = "count"

    def zero(self):
        return 0

    def one(self):
        return 1

    def _check(self, v):
        if not isinstance(v, int):
            raise RingMismatchError(f"count ring got {type(v).__name__} payload")

    def add(self, a, b):
        # hot path: validate inline, delegate only to raise
        if isinstance(a, int) and isinstance(b, int):
            return a + b
        self._check(a)
        self._check(b)
        raise AssertionError("unreachable")

    def mul(self, a, b):
        if isinstance(a, int) and isinstance(b, int):
            return a * b
        self._check(a)
        self._check(b)
        raise AssertionError("unreachable")

    def neg(self, v):
        return -v

    def is_zero(self, v) -> bool:
        return v == 0

    def lift(self, attr, value):
        # Every attribute lifts to 1: aggregation counts join tuples.
        return 1

    def tracks(self, attr) -> bool:
        return True

    def scale(self, v, n: int):
        self._check(v)
        return v * n  # doubling would produce the same integer, just slower

    def allclose(self, a, b, rtol=1e-9, atol=DEFAULT_ZERO_TOL) -> bool:
        return a == b


class RelationRing(Ring):
    """Relations as payloads: union is addition, natural join is product."""

    name = "relation"

    def __init__(self, zero_tol: float = DEFAULT_ZERO_TOL):
        self.zero_tol = zero_tol

    def zero(self):
        return EMPTY_RELATION

    def one(self):
        return RelationValue._raw((), {(): 1.0})

    def _check(self, v):
        if not isinstance(v, RelationValue):
            raise RingMismatchError(f"relation ring got {type(v).__name__} payload")

    def add(self, a, b):
        self._check(a)
        self._check(b)
        return a.add(b, self.zero_tol)

    def mul(self, a, b):
        self._check(a)
        self._check(b)
        return a.join(b, self.zero_tol)

    def neg(self, v):
        return v.neg()

    def is_zero(self, v) -> bool:
        return not v.entries

    def lift(self, attr, value):
        # This ring tracks no attributes; leaves over it must key on their
        # full schema.
        raise UnknownAttributeError(
            f"relation ring tracks no attributes; cannot lift {attr!r}")

    def allclose(self, a, b, rtol=1e-9, atol=DEFAULT_ZERO_TOL) -> bool:
        return a.close_to(b, rtol, atol)


class _MomentRingBase(Ring):
    """Shared (c, s, q) formulas; subclasses supply the entry operations.

    Addition is componentwise.  The product of a = (c_a, s_a, q_a) and
    b = (c_b, s_b, q_b) is

        (c_a*c_b,  c_b*s_a + c_a*s_b,  c_b*q_a + c_a*q_b + s_a s_b^T + s_b s_a^T)

    which preserves symmetry, so only the upper triangle is materialized.
    """

    def __init__(self, attrs: Iterable[str], zero_tol: float = DEFAULT_ZERO_TOL):
        self.attrs = tuple(attrs)
        self.m = len(self.attrs)
        self.index = {a: i for i, a in enumerate(self.attrs)}
        if len(self.index) != self.m:
            raise UnknownAttributeError(f"duplicate tracked attribute in {self.attrs}")
        self.zero_tol = zero_tol
        self._qlen = self.m * (self.m + 1) // 2

    # entry ops -----------------------------------------------------------
    def _e_zero(self):
        raise NotImplementedError

    def _e_add(self, a, b):
        raise NotImplementedError

    def _e_mul(self, a, b):
        raise NotImplementedError

    def _e_neg(self, a):
        raise NotImplementedError

    def _e_is_zero(self, a) -> bool:
        raise NotImplementedError

    def _e_close(self, a, b, rtol, atol) -> bool:
        raise NotImplementedError

    def _e_check(self, a) -> bool:
        raise NotImplementedError

    # ring ops ------------------------------------------------------------
    def _check(self, v):
        if (not isinstance(v, MomentTriple) or len(v.s) != self.m
                or len(v.q) != self._qlen or not self._e_check(v.c)):
            raise RingMismatchError(
                f"payload {v!r} does not belong to {self.name} ring over {self.attrs}")

    def zero(self):
        z = self._e_zero()
        return MomentTriple(z, (z,) * self.m, (z,) * self._qlen)

    def add(self, a, b):
        self._check(a)
        self._check(b)
        ea = self._e_add
        return MomentTriple(
            ea(a.c, b.c),
            tuple(ea(x, y) for x, y in zip(a.s, b.s)),
            tuple(ea(x, y) for x, y in zip(a.q, b.q)),
        )

    def mul(self, a, b):
        self._check(a)
        self._check(b)
        ea, em = self._e_add, self._e_mul
        c = em(a.c, b.c)
        s = tuple(ea(em(b.c, a.s[i]), em(a.c, b.s[i])) for i in range(self.m))
        q = []
        for i in range(self.m):
            for j in range(i, self.m):
                k = upper_index(self.m, i, j)
                cell = ea(em(b.c, a.q[k]), em(a.c, b.q[k]))
                cell = ea(cell, em(a.s[i], b.s[j]))
                cell = ea(cell, em(b.s[i], a.s[j]))
                q.append(cell)
        return MomentTriple(c, s, tuple(q))

    def neg(self, v):
        en = self._e_neg
        return MomentTriple(en(v.c), tuple(en(x) for x in v.s), tuple(en(x) for x in v.q))

    def is_zero(self, v) -> bool:
        ez = self._e_is_zero
        return ez(v.c) and all(ez(x) for x in v.s) and all(ez(x) for x in v.q)

    def tracks(self, attr) -> bool:
        return attr in self.index

    def allclose(self, a, b, rtol=1e-9, atol=DEFAULT_ZERO_TOL) -> bool:
        ec = self._e_close
        return (ec(a.c, b.c, rtol, atol)
                and all(ec(x, y, rtol, atol) for x, y in zip(a.s, b.s))
                and all(ec(x, y, rtol, atol) for x, y in zip(a.q, b.q)))

    def _attr_index(self, attr) -> int:
        try:
            return self.index[attr]
        except KeyError:
            raise UnknownAttributeError(
                f"attribute {attr!r} not tracked by {self.name} ring over {self.attrs}") from None


class MomentRing(_MomentRingBase):
    """Moment triples with scalar entries; all tracked attributes continuous."""

    name = "moments"

    def _e_zero(self):
        return 0.0

    def _e_add(self, a, b):
        return a + b

    def _e_mul(self, a, b):
        return a * b

    def _e_neg(self, a):
        return -a

    def _e_is_zero(self, a) -> bool:
        return abs(a) <= self.zero_tol

    def _e_close(self, a, b, rtol, atol) -> bool:
        return _close(a, b, rtol, atol)

    def _e_check(self, a) -> bool:
        return isinstance(a, float)

    def one(self):
        z = 0.0
        return MomentTriple(1.0, (z,) * self.m, (z,) * self._qlen)

    def lift(self, attr, value):
        """g(x) for continuous x: c = 1, s_attr = x, q_attr,attr = x^2."""
        i = self._attr_index(attr)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise KindMismatchError(f"continuous attribute {attr!r} got {value!r}")
        x = float(value)
        s = [0.0] * self.m
        s[i] = x
        q = [0.0] * self._qlen
        q[upper_index(self.m, i, i)] = x * x
        return MomentTriple(1.0, s, q)


class RelationalMomentRing(_MomentRingBase):
    """Moment triples with relation-valued entries.

    Continuous attributes store their sums under the empty key; categorical
    attributes one-hot encode as singleton relations over their own name, so
    the q cells hold group-by counts and sums keyed by category.
    """

    name = "relational-moments"

    def __init__(self, attrs: Iterable[str], kinds: Mapping[str, str],
                 zero_tol: float = DEFAULT_ZERO_TOL):
        super().__init__(attrs, zero_tol)
        self.kinds = {a: kinds[a] for a in self.attrs}
        for a, k in self.kinds.items():
            if k not in (CONTINUOUS, CATEGORICAL):
                raise KindMismatchError(f"attribute {a!r} has unknown kind {k!r}")

    def _e_zero(self):
        return EMPTY_RELATION

    def _e_add(self, a, b):
        return a.add(b, self.zero_tol)

    def _e_mul(self, a, b):
        return a.join(b, self.zero_tol)

    def _e_neg(self, a):
        return a.neg()

    def _e_is_zero(self, a) -> bool:
        return not a.entries

    def _e_close(self, a, b, rtol, atol) -> bool:
        return a.close_to(b, rtol, atol)

    def _e_check(self, a) -> bool:
        return isinstance(a, RelationValue)

    def one(self):
        z = EMPTY_RELATION
        return MomentTriple(RelationValue._raw((), {(): 1.0}),
                            (z,) * self.m, (z,) * self._qlen)

    def lift(self, attr, value):
        """g(x): continuous keeps x under the empty key, categorical one-hots.

        For categorical attributes the s and q entries are the same singleton
        {x -> 1} over schema (attr,).
        """
        i = self._attr_index(attr)
        kind = self.kinds[attr]
        s = [EMPTY_RELATION] * self.m
        q = [EMPTY_RELATION] * self._qlen
        if kind == CONTINUOUS:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise KindMismatchError(f"continuous attribute {attr!r} got {value!r}")
            x = float(value)
            s[i] = RelationValue.singleton((), (), x, self.zero_tol)
            q[upper_index(self.m, i, i)] = RelationValue.singleton((), (), x * x, self.zero_tol)
        else:
            try:
                hash(value)
            except TypeError:
                raise KindMismatchError(
                    f"categorical attribute {attr!r} got unhashable {value!r}") from None
            cell = RelationValue._raw((attr,), {(value,): 1.0})
            s[i] = cell
            q[upper_index(self.m, i, i)] = cell
        return MomentTriple(RelationValue._raw((), {(): 1.0}), s, q)
