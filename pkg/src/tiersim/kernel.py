"""Compiled-kernel dispatch.

The Cython extension covers the hot configurations (cache mode, FIFO
replacement, linear or two-level table, any remap-cache flavor).  Everything
else runs through the pure-Python engine, which is also the behavioral
reference: both paths must produce identical counters and state.
"""

from __future__ import annotations

import numpy as np

from .engine import TieringEngine, TraceError
from .remap_table import IndirectionRemapTable

try:
    from . import _kernel
    HAVE_COMPILED = True
except ImportError:          # pure-Python install
    _kernel = None
    HAVE_COMPILED = False

_DUMMY_TAGS = np.zeros((1, 1), dtype=np.int64)
_DUMMY_VALS = np.zeros((1, 1), dtype=np.uint32)
_DUMMY_PTR = np.zeros(1, dtype=np.int64)


def supports(engine: TieringEngine) -> bool:
    if not HAVE_COMPILED:
        return False
    if engine.scheme.direct_mapped or engine.layout.mode != "cache":
        return False
    if engine.replacement != "fifo" or engine.events is not None:
        return False
    if isinstance(engine.table, IndirectionRemapTable) and \
            engine.irt_config.levels != 2:
        return False
    return True


def _cache_arrays(store):
    return store.tags, store.vals, store.ptr


def run(engine: TieringEngine, ops: np.ndarray, addrs: np.ndarray) -> None:
    """Drive the whole trace through the compiled loop, mutating the engine
    state in place exactly as engine.run would."""
    assert supports(engine)
    ops = np.ascontiguousarray(ops, dtype=np.uint8)
    addrs = np.ascontiguousarray(addrs, dtype=np.int64)

    table = engine.table
    is_tree = isinstance(table, IndirectionRemapTable)
    if is_tree:
        leaf_alloc, leaf_child = table.alloc[-1], table.child_count[-1]
        allocated_per_set = table.allocated_per_set
    else:
        leaf_alloc = np.zeros((1, 1), dtype=np.uint8)
        leaf_child = np.zeros((1, 1), dtype=np.int32)
        allocated_per_set = np.zeros(engine.layout.num_sets, dtype=np.int64)

    conv = nonid = idc = None
    rc_kind = 0
    if engine.scheme.rcache == "conventional":
        rc_kind, conv = 1, engine.rcache.store
    elif engine.scheme.rcache == "irc":
        rc_kind, nonid, idc = 2, engine.rcache.nonid, engine.rcache.idc
    conv_t, conv_v, conv_p = _cache_arrays(conv) if conv else \
        (_DUMMY_TAGS, _DUMMY_VALS, _DUMMY_PTR)
    nonid_t, nonid_v, nonid_p = _cache_arrays(nonid) if nonid else \
        (_DUMMY_TAGS, _DUMMY_VALS, _DUMMY_PTR)
    id_t, id_v, id_p = _cache_arrays(idc) if idc else \
        (_DUMMY_TAGS, _DUMMY_VALS, _DUMMY_PTR)

    cfg = engine.rc_config
    lay = engine.layout
    scalars = {
        "nslow": engine.nslow, "nfast": engine.nfast,
        "resident": engine.resident, "region_end": engine.region_end,
        "scan_base": engine.scan_base, "n_avail": max(engine.n_avail, 1),
        "inv_base": engine.inv_base,
        "leaf_entries": engine.irt_config.leaf_entries_per_block,
        "block_size": lay.block_size,
        "prefetch_bits": engine.prefetch_bits,
        "phys_cap": lay.physical_capacity,
        "table_kind": 1 if is_tree else 0,
        "rc_kind": rc_kind,
        "set_bits": lay.set_bits, "offset_bits": lay.offset_bits,
        "set_mask": lay.num_sets - 1,
        "batch_fill": 1 if engine.batch_fill else 0,
        "conv_index_mask": cfg.conv_sets - 1,
        "nonid_mask": cfg.nonid_sets - 1,
        "conv_ways": cfg.conv_ways, "nonid_ways": cfg.nonid_ways,
        "id_ways": cfg.id_ways,
        "id_index_bits": cfg.id_sets.bit_length() - 1,
        "id_phys_keys": getattr(engine.rcache, "physical_keys", 0),
    }
    try:
        _kernel.run_batch(
            ops, addrs, engine.counters,
            engine.slot_state, engine.slot_home, engine.slot_dirty,
            engine.owner, engine.home_of, engine.fifo_cur, engine.bits_left,
            table.entries, leaf_alloc, leaf_child, allocated_per_set,
            conv_t, conv_v, conv_p, nonid_t, nonid_v, nonid_p,
            id_t, id_v, id_p, scalars)
    except ValueError as e:
        raise TraceError(str(e)) from None
