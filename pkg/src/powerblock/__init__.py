"""Cache-blocked matrix power kernels for Krylov solvers and preconditioners."""
from .kernels import BACKEND
from .levels import (
    DEFAULT_CACHE_MB,
    ExecutionPlan,
    LevelStructure,
    build_levels,
    group_levels,
    level_summary,
    prepare_blocking,
    validate_levels,
)
from .mpk import baseline_mpk, execute, mpk, mpk_shifted, schedule, tune_p
from .sparse import (
    CsrMatrix,
    LduSplit,
    gen_poisson,
    gen_random,
    parse_matrix_spec,
    permute,
    read_matrix_market,
    split_ldu,
    spmv,
    spmv_range,
    write_matrix_market,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CsrMatrix",
    "DEFAULT_CACHE_MB",
    "ExecutionPlan",
    "LduSplit",
    "LevelStructure",
    "baseline_mpk",
    "build_levels",
    "execute",
    "gen_poisson",
    "gen_random",
    "group_levels",
    "level_summary",
    "mpk",
    "mpk_shifted",
    "parse_matrix_spec",
    "permute",
    "prepare_blocking",
    "read_matrix_market",
    "schedule",
    "split_ldu",
    "spmv",
    "spmv_range",
    "tune_p",
    "validate_levels",
    "write_matrix_market",
]
