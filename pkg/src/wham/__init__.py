"""Exact K-nearest-neighbour search over binary codes under weighted Hamming distance."""

from .core import (
    BinaryCode,
    CodeArray,
    QueryContext,
    WeightModel,
    build_query_context,
    distance_via_context,
    weighted_distance,
)
from .errors import CapacityError, ConfigurationError, DimensionError, ParseError, ValidationError, WhamError
from .index import (
    BucketSharingStats,
    FullTable,
    MultiIndexTables,
    SingleMultiIndexTable,
    bucket_sharing_stats,
    build_full_table,
    build_multi_index,
    build_single_table,
    choose_m,
)
from .probe import ProbeEnumerator, init_enumerator, next_index
from .search import (
    CandidateHeap,
    Criterion,
    Neighbor,
    SearchStats,
    brute_force_knn,
    knn,
    knn_full_table,
    knn_multi_index,
    linear_scan_knn,
    popcount_knn,
)

__version__ = "0.1.0"
