"""Simulation driver: configuration, metric derivation, and reporting.

All metrics are derived after the run from the engine's integer counters, so
timing parameters never influence simulated behavior and reports for the same
(config, trace, seed) are byte-identical across runs and across the compiled
and pure-Python execution paths.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import counters as C
from .engine import PRESETS, SchemeSelector, TieringEngine
from .geometry import ConfigError, HybridLayout
from .remap_cache import RemapCacheConfig
from .remap_table import IrtConfig

KiB = 1024
MiB = 1024 * KiB
GiB = 1024 * MiB

DEMAND_WORD = 64        # bytes moved per demand request
TRANSFER_UNIT = 64      # minimum metadata transfer granularity


@dataclass(frozen=True)
class TimingParams:
    fast_read_ns: float = 50.0
    fast_write_ns: float = 50.0
    slow_read_ns: float = 100.0
    slow_write_ns: float = 100.0
    core_ghz: float = 3.2
    rc_hit_cycles: int = 3

    @classmethod
    def nvm(cls) -> "TimingParams":
        return cls(slow_read_ns=77.0, slow_write_ns=231.0)

    @property
    def rc_hit_ns(self) -> float:
        return self.rc_hit_cycles / self.core_ghz


@dataclass
class SimConfig:
    fast_capacity: int = 16 * MiB
    slow_capacity: int | None = None    # default: capacity_ratio * fast
    capacity_ratio: int = 32
    block_size: int = 256
    num_sets: int = 4
    scheme: SchemeSelector = field(default_factory=lambda: PRESETS["trimma_c"])
    irt_levels: int = 2
    rc: RemapCacheConfig = field(default_factory=RemapCacheConfig)
    timing: TimingParams = field(default_factory=TimingParams)
    replacement: str = "fifo"
    prefetch_bits: int = 64
    batch_fill: bool = True
    include_metadata_in_bloat: bool = True
    strict: bool = False
    seed: int = 0

    def layout(self) -> HybridLayout:
        slow = self.slow_capacity
        if slow is None:
            slow = self.fast_capacity * self.capacity_ratio
        return HybridLayout(self.fast_capacity, slow, self.block_size,
                            self.num_sets, self.scheme.placement_mode)

    def build_engine(self, record_events: bool = False) -> TieringEngine:
        return TieringEngine(
            self.layout(), self.scheme,
            irt_config=IrtConfig(self.irt_levels, self.block_size),
            rc_config=self.rc, replacement=self.replacement,
            prefetch_bits=self.prefetch_bits, batch_fill=self.batch_fill,
            strict=self.strict, seed=self.seed, record_events=record_events)


def _counter_dict(counters: np.ndarray) -> dict:
    return {name.lower(): int(counters[i]) for i, name in enumerate(C.NAMES)}


@dataclass
class MetricsReport:
    scheme: dict
    config: dict
    counters: dict
    serve_rate: float
    bloat_factor: float
    rc_hit_rate: float
    rc_id_hit_rate: float
    metadata_fraction_of_fast: float
    degenerate: bool
    amat_metadata_ns: float
    amat_fast_ns: float
    amat_slow_ns: float
    amat_total_ns: float
    engine_path: str = "python"
    determinism_hash: str = ""

    def to_json(self, indent: int = 2) -> str:
        d = asdict(self)
        return json.dumps(d, indent=indent, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "MetricsReport":
        return MetricsReport(**json.loads(text))

    def seal(self) -> "MetricsReport":
        """Compute the determinism hash over everything but the hash itself
        and the execution-path tag (both paths must agree byte-for-byte)."""
        d = asdict(self)
        d.pop("determinism_hash")
        d.pop("engine_path")
        blob = json.dumps(d, sort_keys=True).encode()
        self.determinism_hash = hashlib.sha256(blob).hexdigest()
        return self


def metadata_traffic_bytes(counters: np.ndarray) -> int:
    """Metadata bytes moved: table probes and updates plus index-bit fetches,
    each a minimum-granularity transfer."""
    n = (counters[C.WALK_PROBES] + counters[C.META_WRITES]
         + counters[C.INDEXBIT_FETCHES])
    return int(n) * TRANSFER_UNIT


def bloat_factor(counters: np.ndarray, block_size: int,
                 include_metadata: bool = True) -> float:
    """Fast-memory traffic per byte of demand traffic."""
    reqs = int(counters[C.REQUESTS])
    if reqs == 0:
        return 0.0
    demand_fast = int(counters[C.FAST_READS] + counters[C.FAST_WRITES]) * DEMAND_WORD
    moved = int(counters[C.FILL_FAST_BYTES] + counters[C.WB_FAST_BYTES])
    total = demand_fast + moved
    if include_metadata:
        total += metadata_traffic_bytes(counters)
    return total / (reqs * DEMAND_WORD)


def serve_rate(counters: np.ndarray) -> float:
    reqs = int(counters[C.REQUESTS])
    if reqs == 0:
        return 0.0
    return int(counters[C.FAST_READS] + counters[C.FAST_WRITES]) / reqs


def amat_breakdown(counters: np.ndarray, timing: TimingParams) -> tuple:
    """(metadata_ns, fast_ns, slow_ns, total_ns) averaged per request.

    The remap-table levels are probed in parallel, so a walk costs one fast
    access; a remap-cache hit costs rc_hit_cycles of the core clock.
    """
    reqs = int(counters[C.REQUESTS])
    if reqs == 0:
        return 0.0, 0.0, 0.0, 0.0
    rc_res = int(counters[C.RC_ID_HITS] + counters[C.RC_NONID_HITS]
                 + counters[C.RC_MISSES])
    meta = (rc_res * timing.rc_hit_ns
            + int(counters[C.WALKS]) * timing.fast_read_ns)
    fast = (int(counters[C.FAST_READS]) * timing.fast_read_ns
            + int(counters[C.FAST_WRITES]) * timing.fast_write_ns)
    slow = (int(counters[C.SLOW_READS]) * timing.slow_read_ns
            + int(counters[C.SLOW_WRITES]) * timing.slow_write_ns)
    m, f, sl = meta / reqs, fast / reqs, slow / reqs
    return m, f, sl, m + f + sl


def build_report(cfg: SimConfig, engine: TieringEngine,
                 engine_path: str) -> MetricsReport:
    cnt = engine.counters
    rc_lookups = int(cnt[C.RC_LOOKUPS])
    hits = int(cnt[C.RC_ID_HITS] + cnt[C.RC_NONID_HITS])
    m, f, sl, tot = amat_breakdown(cnt, cfg.timing)
    lay = engine.layout
    rep = MetricsReport(
        scheme=asdict(cfg.scheme),
        config={
            "fast_capacity": lay.fast_capacity,
            "slow_capacity": lay.slow_capacity,
            "block_size": lay.block_size,
            "num_sets": lay.num_sets,
            "mode": lay.mode,
            "capacity_ratio": lay.capacity_ratio,
            "irt_levels": cfg.irt_levels,
            "replacement": cfg.replacement,
            "prefetch_bits": cfg.prefetch_bits,
            "batch_fill": cfg.batch_fill,
            "include_metadata_in_bloat": cfg.include_metadata_in_bloat,
            "seed": cfg.seed,
        },
        counters=_counter_dict(cnt),
        serve_rate=serve_rate(cnt),
        bloat_factor=bloat_factor(cnt, lay.block_size,
                                  cfg.include_metadata_in_bloat),
        rc_hit_rate=hits / rc_lookups if rc_lookups else 0.0,
        rc_id_hit_rate=int(cnt[C.RC_ID_HITS]) / rc_lookups if rc_lookups else 0.0,
        metadata_fraction_of_fast=engine.metadata_fraction(),
        degenerate=engine.degenerate,
        amat_metadata_ns=m, amat_fast_ns=f, amat_slow_ns=sl, amat_total_ns=tot,
        engine_path=engine_path,
    )
    return rep.seal()


def run_trace(cfg: SimConfig, ops: np.ndarray, addrs: np.ndarray,
              force_python: bool = False,
              record_events: bool = False) -> MetricsReport:
    """Simulate a trace and return the sealed report."""
    from . import kernel
    engine = cfg.build_engine(record_events=record_events)
    path = "python"
    if not force_python and not record_events and kernel.supports(engine):
        kernel.run(engine, ops, addrs)
        path = "compiled"
    else:
        engine.run(np.asarray(ops), np.asarray(addrs, dtype=np.int64))
    report = build_report(cfg, engine, path)
    report._engine = engine     # handy for tests; not serialized
    return report
