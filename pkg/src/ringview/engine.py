"""Run orchestration: load bases, evaluate the tree, process the update
stream in batches, and emit one immutable snapshot per batch.

The engine is single-threaded.  A service thread may queue steering
commands; they are drained at batch boundaries only, and each command is
acknowledged with the sequence number of the first snapshot whose analytics
will reflect it.  Steering changes analytics parameters, never payloads.

The oracle flag switches delta propagation for full bottom-up recomputation
per batch while keeping the identical snapshot schedule and schema; the
pair is the end-to-end equivalence and speedup harness.
"""

from __future__ import annotations

import hashlib
import json
import sys
import threading
import time
from dataclasses import dataclass, field, replace

from . import analytics
from .analytics import BinSpec
from .config import EngineConfig
from .errors import NoDataError, RingviewError, SteerRejectedError
from .relations import (
    Interner,
    KeyedRelation,
    group_into_batches,
    load_csv,
    parse_update_stream,
    snapshot_stats,
)
from .rings import (
    CATEGORICAL,
    CONTINUOUS,
    CountRing,
    MomentRing,
    MomentTriple,
    RelationalMomentRing,
    RelationValue,
)
from .viewtree import (build_tree, describe, initial_eval, propagate_delta,
                       register_probe_indexes)

STEER_TYPES = ("set_label", "set_threshold", "set_features", "set_lambda",
               "pause", "resume")


@dataclass
class SteerCommand:
    type: str
    value: object = None


@dataclass
class SteerState:
    label: str | None
    threshold: float
    lam: float
    features: list[str] | None = None  # None = all aggregated attributes
    paused: bool = False


class Engine:
    """One run: owns the interner, bases, ring, tree, and snapshot history."""

    def __init__(self, cfg: EngineConfig, oracle: bool = False):
        self.cfg = cfg
        self.oracle = oracle
        self.interner = Interner()
        self.schemas = cfg.schemas()
        self.agg_attrs = {a.name: a for a in cfg.aggregate_attrs()}
        self.steer = SteerState(cfg.label, cfg.mi_threshold, cfg.lam)
        self.bases: dict[str, KeyedRelation] = {}
        self.binspecs: dict[str, BinSpec] = {}
        self.ring = None
        self.tree = None
        self.prev_model: analytics.Model | None = None
        self.snapshots: list[dict] = []
        self.snapshot_texts: list[str] = []
        self.roots: list = []  # raw root payloads, one per snapshot
        self.total_updates = 0
        self.total_propagate_s = 0.0
        self.error: str | None = None
        self.on_snapshot = None  # callable(seq, json_text), set by the service
        self.done = threading.Event()
        self._lock = threading.Lock()
        self._pending: list[SteerCommand] = []
        self._effective_seq = 0
        self._stop = False
        self._prepared = False

    # -- setup ------------------------------------------------------------

    def prepare(self) -> None:
        if self._prepared:
            return
        for rc in self.cfg.relations:
            if rc.path:
                self.bases[rc.schema.name] = load_csv(rc.path, rc.schema,
                                                      self.interner)
            else:
                rel = KeyedRelation(rc.schema.names, CountRing(), rc.schema.name)
                self.bases[rc.schema.name] = rel
        transforms = self._freeze_bins()
        self.ring = self._make_ring()
        self.tree = build_tree(self.cfg.tree, self.schemas, self.ring, transforms)
        initial_eval(self.tree, self.bases)
        if not self.oracle:
            register_probe_indexes(self.tree)
        self._prepared = True

    def _freeze_bins(self) -> dict:
        """MI mode bins every continuous aggregate attribute over the value
        range observed in the initial load; edges never move afterwards."""
        if self.cfg.mode != "mi":
            return {}
        keys = self.cfg.leaf_keys()
        transforms: dict = {}
        for rc in self.cfg.relations:
            key = keys.get(rc.schema.name, ())
            base = self.bases[rc.schema.name]
            for pos, attr in enumerate(rc.schema.attrs):
                if attr.name in key or attr.kind != CONTINUOUS:
                    continue
                lo = hi = None
                for tup in base.data:
                    v = tup[pos]
                    lo = v if lo is None or v < lo else lo
                    hi = v if hi is None or v > hi else hi
                spec = BinSpec(float(lo) if lo is not None else 0.0,
                               float(hi) if hi is not None else 0.0,
                               self.cfg.bins)
                self.binspecs[attr.name] = spec
                transforms[attr.name] = spec.bin
        return transforms

    def _make_ring(self):
        names = tuple(self.agg_attrs)
        kinds = {n: a.kind for n, a in self.agg_attrs.items()}
        if self.cfg.mode == "count":
            return CountRing()
        if self.cfg.mode == "covar":
            if all(k == CONTINUOUS for k in kinds.values()):
                return MomentRing(names)
            return RelationalMomentRing(names, kinds)
        return RelationalMomentRing(names, {n: CATEGORICAL for n in names})

    # -- steering ---------------------------------------------------------

    def submit_steer(self, cmd: SteerCommand) -> int:
        """Queue a validated command; returns the sequence number of the
        first snapshot whose analytics will reflect it."""
        reason = self._steer_problem(cmd)
        if reason:
            raise SteerRejectedError(reason)
        with self._lock:
            self._pending.append(cmd)
            return self._effective_seq

    def _steer_problem(self, cmd: SteerCommand) -> str | None:
        if cmd.type not in STEER_TYPES:
            return f"unknown steering command {cmd.type!r}"
        if cmd.type == "set_label":
            attr = self.agg_attrs.get(cmd.value)
            if attr is None:
                return f"label {cmd.value!r} is not an aggregated attribute"
            if self.cfg.mode == "covar" and attr.kind != CONTINUOUS:
                return f"label {cmd.value!r} is categorical; covar needs continuous"
        elif cmd.type in ("set_threshold", "set_lambda"):
            try:
                v = float(cmd.value)
            except (TypeError, ValueError):
                return f"{cmd.type} needs a number, got {cmd.value!r}"
            if cmd.type == "set_lambda" and v < 0:
                return "lambda must be >= 0"
        elif cmd.type == "set_features":
            if cmd.value is not None:
                if not isinstance(cmd.value, (list, tuple)):
                    return "set_features needs a list of attribute names or null"
                bad = [a for a in cmd.value if a not in self.agg_attrs]
                if bad:
                    return f"unknown attribute(s) {bad}"
        return None

    def _apply_steer(self, cmd: SteerCommand) -> None:
        if cmd.type == "set_label":
            self.steer.label = cmd.value
        elif cmd.type == "set_threshold":
            self.steer.threshold = float(cmd.value)
        elif cmd.type == "set_lambda":
            self.steer.lam = float(cmd.value)
        elif cmd.type == "set_features":
            self.steer.features = None if cmd.value is None else list(cmd.value)
        elif cmd.type == "pause":
            self.steer.paused = True
        elif cmd.type == "resume":
            self.steer.paused = False

    def _drain(self, next_seq: int | None = None) -> None:
        with self._lock:
            cmds, self._pending = self._pending, []
            if next_seq is not None:
                self._effective_seq = next_seq
        for c in cmds:
            self._apply_steer(c)

    def _wait_if_paused(self) -> None:
        self._drain()
        while self.steer.paused and not self._stop:
            time.sleep(0.01)
            self._drain()

    def stop(self) -> None:
        self._stop = True

    # -- run loop ---------------------------------------------------------

    def run(self) -> int:
        seq = 0
        out = None
        try:
            self.prepare()
            if self.cfg.output:
                out = open(self.cfg.output, "w", encoding="utf-8")
            self._wait_if_paused()
            self._emit_cycle(0, batch_updates=0, propagate_s=0.0, out=out)
            if self.cfg.stream:
                deltas = parse_update_stream(self.cfg.stream, self.schemas,
                                             self.interner)
                batches = group_into_batches(deltas, self.cfg.batch_size,
                                             self.cfg.relation_order())
                pause_s = self.cfg.effective_pause_ms() / 1000.0
                for chunk in batches:
                    if self._stop:
                        break
                    if pause_s:
                        time.sleep(pause_s)
                    seq += 1
                    self._wait_if_paused()
                    if self._stop:
                        break
                    t0 = time.perf_counter()
                    if self.oracle:
                        self._recompute(chunk)
                    else:
                        for sub in chunk:
                            propagate_delta(self.tree, sub)
                    dt = time.perf_counter() - t0
                    n = sum(len(b.deltas) for b in chunk)
                    self._emit_cycle(seq, batch_updates=n, propagate_s=dt, out=out)
            return 0
        except RingviewError as exc:
            where = f"batch {seq}" if seq else "initial load"
            self.error = f"{where}: {exc}"
            print(f"ringview: {self.error}", file=sys.stderr)
            return 1
        finally:
            if out:
                out.close()
            self.done.set()

    def _recompute(self, chunk) -> None:
        for sub in chunk:
            base = self.bases[sub.target]
            for key, mult in sub.deltas:
                base.apply_delta(key, mult)
        initial_eval(self.tree, self.bases)

    def _emit_cycle(self, seq: int, batch_updates: int, propagate_s: float,
                    out) -> None:
        self._drain(next_seq=seq + 1)  # last steering read for this snapshot
        self.total_updates += batch_updates
        self.total_propagate_s += propagate_s
        root = self.tree.root_payload()
        t0 = time.perf_counter()
        try:
            adoc = self._analytics(root)
        except NoDataError as exc:
            # A join emptied by deletes is a data state, not a failure.
            adoc = {"error": str(exc)}
            self.prev_model = None
        analytics_s = time.perf_counter() - t0
        root_json = self.payload_json(root)
        root_text = json.dumps(root_json, sort_keys=True, separators=(",", ":"))
        snap = {
            "seq": seq,
            "mode": self.cfg.mode,
            "oracle": self.oracle,
            "batches_applied": seq,
            "batch_updates": batch_updates,
            "updates_applied": self.total_updates,
            "root": root_json,
            "root_hash": hashlib.sha256(root_text.encode()).hexdigest(),
            "analytics": adoc,
            "steering": {
                "label": self.steer.label,
                "threshold": self.steer.threshold,
                "lambda": self.steer.lam,
                "features": self.steer.features,
                "paused": self.steer.paused,
            },
            "timing": {"propagate_s": propagate_s, "analytics_s": analytics_s},
            "throughput_updates_per_s": (
                self.total_updates / self.total_propagate_s
                if self.total_propagate_s > 0 else None),
        }
        if self.binspecs:
            snap["bins"] = {a: {"lo": b.lo, "hi": b.hi, "k": b.k}
                            for a, b in sorted(self.binspecs.items())}
        text = json.dumps(snap, sort_keys=True, separators=(",", ":"))
        self.snapshots.append(snap)
        self.snapshot_texts.append(text)
        self.roots.append(root)
        if out:
            out.write(text + "\n")
            out.flush()
        if self.on_snapshot:
            self.on_snapshot(seq, text)

    # -- analytics per mode -------------------------------------------------

    def _analytics(self, root) -> dict:
        if self.cfg.mode == "count":
            return {"root_count": root}
        if self.cfg.mode == "covar":
            sys_ = analytics.assemble_covar(root, self.ring, self.steer.label,
                                            self.steer.features)
            theta0 = analytics.remap_theta(self.prev_model, sys_.features)
            model = analytics.train_ridge(sys_, lam=self.steer.lam, theta0=theta0)
            self.prev_model = model
            return {
                "covar": {
                    "n": sys_.n,
                    "features": [self._feature_json(f) for f in
                                 sys_.features.features],
                    "xtx": [[v for v in row] for row in sys_.xtx.tolist()],
                    "xty": sys_.xty.tolist(),
                    "yty": sys_.yty,
                    "label": self.steer.label,
                },
                "model": {
                    "theta": model.theta.tolist(),
                    "lambda": model.lam,
                    "iterations": model.iterations,
                    "grad_norm": model.grad_norm,
                    "tol": model.tol,
                    "converged": model.converged,
                },
            }
        mat = analytics.mi_matrix(root, self.ring)
        doc: dict = {"mi": {"attrs": list(mat.attrs),
                            "values": mat.values.tolist()}}
        if self.steer.label:
            ranking = analytics.select_features(mat, self.steer.label,
                                                self.steer.threshold)
            doc["selection"] = {
                "label": self.steer.label,
                "threshold": self.steer.threshold,
                "ranking": [{"attr": r.attr, "mi": r.mi, "selected": r.selected}
                            for r in ranking],
            }
        cl = analytics.chow_liu(mat)
        doc["chow_liu"] = {"edges": [[a, b, w] for a, b, w in cl.edges],
                           "total_weight": cl.total_weight}
        return doc

    def _feature_json(self, f) -> dict:
        if f == analytics.INTERCEPT:
            return {"attr": None, "category": None, "name": "intercept"}
        attr, cat = f
        if cat is None:
            return {"attr": attr, "category": None, "name": attr}
        return {"attr": attr, "category": self._decode(attr, cat),
                "name": f"{attr}={self._decode(attr, cat)}"}

    def _decode(self, attr: str, v):
        a = self.agg_attrs.get(attr)
        if a is not None and a.dtype == "str":
            return self.interner.lookup(v)
        if attr in self.binspecs:
            return self.binspecs[attr].label(v)
        return v

    # -- serialization ------------------------------------------------------

    def payload_json(self, payload):
        if not isinstance(payload, MomentTriple):
            return payload if isinstance(payload, int) else self._rel_json(payload)
        if isinstance(payload.c, RelationValue):
            return {
                "attrs": list(self.ring.attrs),
                "c": payload.c.get(()),
                "s": [self._rel_json(x) for x in payload.s],
                "q": [self._rel_json(x) for x in payload.q],
            }
        return {
            "attrs": list(self.ring.attrs),
            "c": payload.c,
            "s": list(payload.s),
            "q": list(payload.q),
        }

    def _rel_json(self, rv: RelationValue) -> dict:
        schema = list(rv.schema)
        attrs = [self.agg_attrs.get(a) for a in schema]
        entries = []
        for key, v in sorted(rv.entries.items()):
            dec = [self.interner.lookup(k) if a is not None and a.dtype == "str"
                   else k for k, a in zip(key, attrs)]
            entries.append(dec + [v])
        return {"schema": schema, "entries": entries}

    def describe_tree(self, include_sql: bool = True) -> dict:
        self.prepare()
        doc = describe(self.tree, include_sql=include_sql)
        for node, entry in zip(self.tree.nodes(), doc["nodes"]):
            if node.materialized is not None:
                entry["bytes"] = snapshot_stats(node.materialized)[1]
        return doc


def run(cfg: EngineConfig) -> int:
    return Engine(cfg).run()


def run_oracle(cfg: EngineConfig) -> int:
    return Engine(cfg, oracle=True).run()


def _side_report(eng: Engine) -> dict:
    return {
        "propagate_s": eng.total_propagate_s,
        "updates_per_s": (eng.total_updates / eng.total_propagate_s
                          if eng.total_propagate_s > 0 else None),
    }


def bench(cfg: EngineConfig) -> dict:
    """Run the incremental and recompute engines on the same stream and
    report throughput for each plus their speedup ratio."""
    quiet = replace(cfg, pause_ms=0, serve=False, output=None)
    inc = Engine(quiet)
    if inc.run() != 0:
        raise RingviewError(inc.error or "incremental run failed")
    orc = Engine(quiet, oracle=True)
    if orc.run() != 0:
        raise RingviewError(orc.error or "oracle run failed")
    inc_s, orc_s = inc.total_propagate_s, orc.total_propagate_s
    return {
        "updates": inc.total_updates,
        "batches": len(inc.snapshots) - 1,
        "incremental": _side_report(inc),
        "oracle": _side_report(orc),
        "speedup": (orc_s / inc_s) if inc_s > 0 else None,
    }
