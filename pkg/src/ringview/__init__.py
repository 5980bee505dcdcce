"""Incremental maintenance of join aggregates with pluggable payload rings,
plus the analytics (regression, mutual information, tree models) those
aggregates carry."""

from .analytics import (
    BinSpec,
    ChowLiuTree,
    CovarSystem,
    FeatureIndex,
    MIMatrix,
    Model,
    assemble_covar,
    chow_liu,
    mi_from_counts,
    mi_matrix,
    select_features,
    train_ridge,
)
from .config import EngineConfig, load_config, parse_config
from .engine import Engine, SteerCommand, bench, run, run_oracle
from .errors import RingviewError
from .relations import (
    Attribute,
    Interner,
    KeyedRelation,
    RelationSchema,
    load_csv,
    parse_update_stream,
)
from .rings import (
    CountRing,
    MomentRing,
    MomentTriple,
    RelationRing,
    RelationValue,
    RelationalMomentRing,
)
from .viewtree import ViewTree, build_tree, describe, initial_eval, propagate_delta
from .workload import gen_workload

__version__ = "0.1.0"
