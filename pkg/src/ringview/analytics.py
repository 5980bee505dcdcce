"""Analytics over the maintained root payload.

Everything here is a pure function of one root moment triple: the
covariance system and ridge regression model, the pairwise mutual
information matrix with feature ranking, and the Chow-Liu tree.  No routine
ever touches base relations or the join result; the maintained aggregates
are sufficient statistics for all of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataIntegrityError,
    DivergedError,
    KindMismatchError,
    NoDataError,
    UnknownAttributeError,
)
from .rings import (
    CATEGORICAL,
    CONTINUOUS,
    MomentRing,
    MomentTriple,
    RelationalMomentRing,
    RelationValue,
    upper_index,
)

INTERCEPT = ("@intercept", None)


@dataclass(frozen=True)
class FeatureIndex:
    """Ordered model features: intercept, then attributes in ring order,
    categorical ones expanded per category in id order.

    Rebuilt from every snapshot: categories present in the current root
    payload define the one-hot columns, so features can appear and
    disappear under updates.
    """

    features: tuple[tuple, ...]
    label: str

    def __len__(self) -> int:
        return len(self.features)

    def positions(self) -> dict:
        return {f: i for i, f in enumerate(self.features)}


def _attr_kind(ring, attr: str) -> str:
    if isinstance(ring, RelationalMomentRing):
        return ring.kinds[attr]
    return CONTINUOUS


def _categories(root: MomentTriple, ring, attr: str) -> list:
    i = ring.index[attr]
    cell = root.s[i]
    if not isinstance(cell, RelationValue):
        raise KindMismatchError(f"attribute {attr!r} has no categorical payload")
    return sorted(k[0] for k in cell.entries)


def build_feature_index(root: MomentTriple, ring, label: str,
                        selected: list[str] | None = None) -> FeatureIndex:
    feats = [INTERCEPT]
    for a in ring.attrs:
        if a == label:
            continue
        if selected is not None and a not in selected:
            continue
        if _attr_kind(ring, a) == CONTINUOUS:
            feats.append((a, None))
        else:
            feats.extend((a, c) for c in _categories(root, ring, a))
    return FeatureIndex(tuple(feats), label)


@dataclass
class CovarSystem:
    """Normal-equation ingredients assembled from one root payload."""

    n: float
    xtx: np.ndarray
    xty: np.ndarray
    yty: float
    features: FeatureIndex

    def __len__(self) -> int:
        return len(self.features)

    def penalty_mask(self) -> np.ndarray:
        mask = np.ones(len(self), dtype=float)
        mask[0] = 0.0  # intercept is never regularized
        return mask


def _count_of(root: MomentTriple) -> float:
    c = root.c
    if isinstance(c, RelationValue):
        return c.get(())
    return float(c)


def _pair_value(root: MomentTriple, ring, fa: tuple, fb: tuple) -> float:
    """Value of SUM(fa * fb) over the join, read off the triple.

    A feature is (attr, None) for a continuous column, (attr, category) for
    a one-hot column, or the intercept.  Missing relational entries read 0.
    """
    if fa == INTERCEPT and fb == INTERCEPT:
        return _count_of(root)
    if fa == INTERCEPT or fb == INTERCEPT:
        attr, cat = fb if fa == INTERCEPT else fa
        cell = root.s[ring.index[attr]]
        if isinstance(cell, RelationValue):
            return cell.get(() if cat is None else (cat,))
        return float(cell)
    (a, ca), (b, cb) = fa, fb
    i, j = ring.index[a], ring.index[b]
    if i > j:
        (a, ca), (b, cb), (i, j) = (b, cb), (a, ca), (j, i)
    cell = root.q[upper_index(ring.m, i, j)]
    if not isinstance(cell, RelationValue):
        return float(cell)
    if a == b:
        # One-hot columns of a single attribute: diagonal counts only.
        if ca is None or cb is None:
            return cell.get(())  # continuous square
        return cell.get((ca,)) if ca == cb else 0.0
    key = tuple(c for c in (ca, cb) if c is not None)
    return cell.get(key)


def assemble_covar(root: MomentTriple, ring, label: str,
                   selected: list[str] | None = None) -> CovarSystem:
    """Build the covariance system for a given continuous label attribute.

    Raises NoDataError on an empty root and DataIntegrityError if the
    assembled matrix is not positive semidefinite to within rounding.
    """
    if not isinstance(ring, (MomentRing, RelationalMomentRing)):
        raise KindMismatchError(f"{ring.name} ring carries no moment aggregates")
    if not ring.tracks(label):
        raise UnknownAttributeError(f"label {label!r} is not a tracked attribute")
    if _attr_kind(ring, label) != CONTINUOUS:
        raise KindMismatchError(f"label {label!r} must be continuous")
    n = _count_of(root)
    if n <= 0:
        raise NoDataError("no data: empty aggregate root")
    fi = build_feature_index(root, ring, label, selected)
    p = len(fi)
    xtx = np.zeros((p, p))
    xty = np.zeros(p)
    lab = (label, None)
    for i, f in enumerate(fi.features):
        xty[i] = _pair_value(root, ring, f, lab)
        for j in range(i, p):
            v = _pair_value(root, ring, f, fi.features[j])
            xtx[i, j] = v
            xtx[j, i] = v
    yty = _pair_value(root, ring, lab, lab)
    tr = float(np.trace(xtx))
    if p and float(np.linalg.eigvalsh(xtx)[0]) < -1e-8 * max(tr, 1.0):
        raise DataIntegrityError("covariance matrix is not positive semidefinite")
    return CovarSystem(n, xtx, xty, yty, fi)


@dataclass
class Model:
    theta: np.ndarray
    features: FeatureIndex
    lam: float
    iterations: int
    grad_norm: float
    tol: float
    converged: bool
    step: float


def loss(sys: CovarSystem, theta: np.ndarray, lam: float) -> float:
    """Half mean squared error plus the ridge penalty, from aggregates only."""
    theta = np.asarray(theta, dtype=float)
    quad = float(theta @ sys.xtx @ theta - 2.0 * theta @ sys.xty + sys.yty)
    pen = float(np.sum((theta * sys.penalty_mask()) ** 2))
    return quad / (2.0 * sys.n) + 0.5 * lam * pen


def gradient(sys: CovarSystem, theta: np.ndarray, lam: float) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return (sys.xtx @ theta - sys.xty) / sys.n + lam * sys.penalty_mask() * theta


def default_tolerance(sys: CovarSystem) -> float:
    return 1e-6 * (1.0 + float(np.linalg.norm(sys.xty / sys.n)))


def train_ridge(sys: CovarSystem, lam: float = 0.0,
                theta0: np.ndarray | None = None, step: float | str = "auto",
                tol: float | None = None, max_iters: int = 10_000) -> Model:
    """Batch gradient descent on the ridge objective, from aggregates only.

    The default step 1/L, with L the largest Gershgorin row-sum bound of
    (xtx/n + lam*I), cannot diverge on a positive semidefinite system; the
    10x gradient-growth guard catches misconfigured explicit steps.  Warm
    starts pass the previous snapshot's parameters as theta0.
    """
    if lam < 0:
        raise ValueError("ridge coefficient must be nonnegative")
    p = len(sys)
    theta = np.zeros(p) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    if theta.shape != (p,):
        raise ValueError(f"theta0 has shape {theta.shape}, expected ({p},)")
    if step == "auto":
        bound = np.abs(sys.xtx / sys.n + lam * np.eye(p)).sum(axis=1)
        lip = float(bound.max()) if p else 0.0
        eta = 1.0 / lip if lip > 0 else 1.0
    else:
        eta = float(step)
        if eta <= 0:
            raise ValueError("step must be positive")
    if tol is None:
        tol = default_tolerance(sys)

    mask = sys.penalty_mask()
    g = (sys.xtx @ theta - sys.xty) / sys.n + lam * mask * theta
    gn = float(np.linalg.norm(g))
    gn0 = gn
    iters = 0
    while gn > tol and iters < max_iters:
        theta -= eta * g
        g = (sys.xtx @ theta - sys.xty) / sys.n + lam * mask * theta
        gn = float(np.linalg.norm(g))
        iters += 1
        if gn > 10.0 * gn0 and gn > tol:
            raise DivergedError(
                f"gradient norm grew from {gn0:g} to {gn:g}; use a smaller step")
    return Model(theta=theta, features=sys.features, lam=lam, iterations=iters,
                 grad_norm=gn, tol=tol, converged=gn <= tol, step=eta)


def remap_theta(prev: Model | None, fi: FeatureIndex) -> np.ndarray | None:
    """Carry parameters across snapshots by feature identity: surviving
    features keep their value, new categories start at 0, vanished ones drop."""
    if prev is None:
        return None
    pos = prev.features.positions()
    theta = np.zeros(len(fi))
    for i, f in enumerate(fi.features):
        j = pos.get(f)
        if j is not None:
            theta[i] = prev.theta[j]
    return theta


def solve_closed_form(sys: CovarSystem, lam: float = 0.0) -> np.ndarray:
    """Direct ridge solution; the BGD fixed point.  Test oracle, not the
    production path."""
    p = len(sys)
    a = sys.xtx / sys.n + lam * np.diag(sys.penalty_mask())
    return np.linalg.solve(a, sys.xty / sys.n)


# --- mutual information -------------------------------------------------


@dataclass(frozen=True)
class BinSpec:
    """Equal-width binning of a continuous attribute, frozen at initial load."""

    lo: float
    hi: float
    k: int = 16

    def bin(self, x: float) -> int:
        if self.hi <= self.lo:
            return 0
        i = int(self.k * (x - self.lo) / (self.hi - self.lo))
        return min(max(i, 0), self.k - 1)

    def label(self, i: int) -> str:
        if self.hi <= self.lo:
            return f"[{self.lo:g}]"
        w = (self.hi - self.lo) / self.k
        lo = self.lo + i * w
        closer = "]" if i == self.k - 1 else ")"
        return f"[{lo:g},{lo + w:g}{closer}"


def bin_value(spec: BinSpec, x: float) -> int:
    """Bin index of x; out-of-range values clamp to the edge bins."""
    return spec.bin(x)


def mi_from_counts(c0: float, cx: RelationValue, cy: RelationValue,
                   cxy: RelationValue) -> float:
    """Mutual information of two attributes from four count aggregates.

    c0 is the total count, cx/cy the per-value counts, cxy the pair counts
    keyed (x, y).  Terms with a zero pair count vanish; natural log.
    """
    if c0 <= 0:
        raise NoDataError("no data: zero total count")
    check = 1e-9 * c0
    mx: dict = {}
    my: dict = {}
    for (x, y), v in cxy.entries.items():
        if v < -check:
            raise DataIntegrityError(f"negative pair count {v:g} for ({x!r}, {y!r})")
        mx[x] = mx.get(x, 0.0) + v
        my[y] = my.get(y, 0.0) + v
    for x in mx.keys() | {k[0] for k in cx.entries}:
        if abs(mx.get(x, 0.0) - cx.get((x,))) > check:
            raise DataIntegrityError(f"marginal of {x!r} disagrees with pair counts")
    for y in my.keys() | {k[0] for k in cy.entries}:
        if abs(my.get(y, 0.0) - cy.get((y,))) > check:
            raise DataIntegrityError(f"marginal of {y!r} disagrees with pair counts")
    total = 0.0
    for (x, y), nxy in cxy.entries.items():
        if nxy <= 0.0:
            continue
        total += (nxy / c0) * math.log(c0 * nxy / (cx.get((x,)) * cy.get((y,))))
    if total < 0.0:
        if total < -1e-12:
            raise DataIntegrityError(f"mutual information {total:g} below rounding floor")
        total = 0.0
    return total


def entropy_from_counts(c0: float, cx: RelationValue) -> float:
    if c0 <= 0:
        raise NoDataError("no data: zero total count")
    total = 0.0
    for v in cx.entries.values():
        if v > 0.0:
            total += (v / c0) * math.log(c0 / v)
    return max(total, 0.0)


@dataclass
class MIMatrix:
    """Pairwise mutual information; the diagonal carries entropies."""

    attrs: tuple[str, ...]
    values: np.ndarray

    def at(self, a: str, b: str) -> float:
        i, j = self.attrs.index(a), self.attrs.index(b)
        return float(self.values[i, j])


def mi_matrix(root: MomentTriple, ring: RelationalMomentRing) -> MIMatrix:
    """MI for every tracked attribute pair, read off the same aggregates the
    covariance assembly uses (c as total, s as marginals, q as pair counts)."""
    if not isinstance(ring, RelationalMomentRing):
        raise KindMismatchError("mutual information needs relation-valued aggregates")
    for a in ring.attrs:
        if ring.kinds[a] != CATEGORICAL:
            raise KindMismatchError(
                f"attribute {a!r} is continuous; bin it before tracking MI")
    c0 = _count_of(root)
    if c0 <= 0:
        raise NoDataError("no data: empty aggregate root")
    m = ring.m
    values = np.zeros((m, m))
    for i in range(m):
        values[i, i] = entropy_from_counts(c0, root.s[i])
        for j in range(i + 1, m):
            v = mi_from_counts(c0, root.s[i], root.s[j],
                               root.q[upper_index(m, i, j)])
            values[i, j] = v
            values[j, i] = v
    return MIMatrix(ring.attrs, values)


@dataclass
class FeatureRank:
    attr: str
    mi: float
    selected: bool


def select_features(mi: MIMatrix, label: str, threshold: float) -> list[FeatureRank]:
    """Attributes ranked by MI with the label, descending; ties keep config
    order.  Selected iff strictly above the threshold."""
    if label not in mi.attrs:
        raise UnknownAttributeError(f"label {label!r} not in MI matrix")
    li = mi.attrs.index(label)
    rows = [(float(mi.values[i, li]), i, a)
            for i, a in enumerate(mi.attrs) if a != label]
    rows.sort(key=lambda r: (-r[0], r[1]))
    return [FeatureRank(a, v, v > threshold) for v, _, a in rows]


@dataclass
class ChowLiuTree:
    """Maximum-weight spanning tree over pairwise MI (diagonal excluded)."""

    edges: list[tuple[str, str, float]] = field(default_factory=list)
    total_weight: float = 0.0


def chow_liu(mi: MIMatrix) -> ChowLiuTree:
    """Greedy maximum spanning tree: heaviest pair first, cycles rejected;
    ties broken by attribute order for determinism."""
    m = len(mi.attrs)
    if m == 0:
        raise NoDataError("no attributes")
    cand = [(-float(mi.values[i, j]), i, j)
            for i in range(m) for j in range(i + 1, m)]
    cand.sort()
    parent = list(range(m))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = ChowLiuTree()
    for nw, i, j in cand:
        ri, rj = find(i), find(j)
        if ri == rj:
            continue
        parent[ri] = rj
        tree.edges.append((mi.attrs[i], mi.attrs[j], -nw))
        tree.total_weight += -nw
        if len(tree.edges) == m - 1:
            break
    return tree
