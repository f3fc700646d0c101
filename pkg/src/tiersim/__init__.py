"""tiersim: deterministic trace-driven simulator of a two-tier main memory
with an indirection-based remap table, saved-metadata-space caching, and an
identity-aware remap cache, plus flat-table and direct-mapped baselines."""

from .engine import PRESETS, AccessOutcome, SchemeSelector, TieringEngine
from .geometry import AddressRangeError, ConfigError, HybridLayout
from .remap_cache import (ConventionalRemapCache, IdentityAwareRemapCache,
                          RemapCacheConfig)
from .remap_table import (SENTINEL, IndirectionRemapTable, IrtConfig,
                          LinearRemapTable)
from .sim import MetricsReport, SimConfig, TimingParams, run_trace

__version__ = "0.1.0"

__all__ = [
    "AccessOutcome", "AddressRangeError", "ConfigError",
    "ConventionalRemapCache", "HybridLayout", "IdentityAwareRemapCache",
    "IndirectionRemapTable", "IrtConfig", "LinearRemapTable",
    "MetricsReport", "PRESETS", "RemapCacheConfig", "SENTINEL",
    "SchemeSelector", "SimConfig", "TieringEngine", "TimingParams",
    "run_trace",
]
