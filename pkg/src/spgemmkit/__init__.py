"""spgemmkit: a sparse matrix-multiply kit with hashed accumulation, a
ranged-indirect memory-mode simulator, and graph/propagation workloads.

Hot kernels are compiled with numba when available; set SPGEMMKIT_NO_NUMBA=1
to run the same kernels as pure Python/numpy.
"""

from ._accel import NUMBA_ENABLED
from .aia import (AccessTrace, AddressLayout, AiaRequest, CacheConfig,
                  CacheStats, ModeCell, ModeReport, build_spgemm_access_plan,
                  compare_modes, dump_trace, expand_trace, plan_layout,
                  plan_resolver, simulate_cache)
from .apps import (ClusterAssignment, LabelVector, MclParams, add_self_loops,
                   build_selector, column_normalize, connected_components,
                   graph_contract, inflate, mcl, prune_columns)
from .core import (INDEX_DTYPE, VALUE_DTYPE, CsrMatrix, Triplet,
                   csr_from_arrays, csr_from_dense, csr_from_triplets,
                   identity, max_abs_diff, oracle_spgemm, transpose, validate)
from .corpus import CORPUS, CorpusEntry, corpus_dir
from .engine import (RowGroupPlan, SpgemmConfig, SpgemmStats,
                     accumulation_phase, allocation_phase,
                     count_intermediate_products, group_rows, spgemm)
from .errors import (BadConfig, CapacityMismatch, DimensionMismatch,
                     DownloadError, DuplicateEntry, IndexOutOfRange,
                     LabelOutOfRange, MismatchError, NegativeEntry, NotSquare,
                     ParseError, PlanMismatch, ResolverFailure, SpgemmKitError,
                     TableFull, UnsupportedFormat)
from .hashtable import DEFAULT_MULTIPLIER, HashAccumulator, next_pow2
from .mmio import (load_csr_cache, load_matrix_market, save_csr_cache,
                   save_matrix_market)
from .propagation import (TopKMask, backward, forward, forward_with_mask,
                          gradient_check, topk_mask)
from .report import REPORT_SCHEMA, BenchReport, make_run_id, validate_report

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
