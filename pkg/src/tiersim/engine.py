"""Placement engine: access flow, admission/eviction, metadata-priority
reclamation, FIFO-with-skip replacement, and both fast-memory use modes.

State is kept in flat numpy arrays so the compiled kernel can drive the same
structures; this module is the reference implementation and the fallback for
configurations the kernel does not cover.

Slot map (per set, slot = fast device block - slow_blocks_per_set):
  [0, resident)               always-resident root index blocks
  [resident, region_end)      demand metadata region; unallocated blocks are
                              lendable as cache slots when lending is enabled
  [region_end, nfast)         cache area (cache mode) or OS-visible flat area
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import counters as C
from .geometry import (ConfigError, HybridLayout, inverted_key_base,
                       metadata_region, table_key_count)
from .remap_cache import (MISS, ConventionalRemapCache,
                          IdentityAwareRemapCache, RemapCacheConfig)
from .remap_table import (SENTINEL, IndirectionRemapTable, IrtConfig,
                          LinearRemapTable)

# slot states
FREE = 0
DATA = 1            # cached block from the slow tier
META = 2            # resident or allocated metadata block
FLAT = 3            # OS-visible flat-area block (flat mode only)

_STATE_NAMES = {FREE: "free", DATA: "data", META: "meta", FLAT: "flat"}


@dataclass(frozen=True)
class SchemeSelector:
    metadata: str = "trimma_irt"        # trimma_irt | linear_table
    rcache: str = "irc"                 # none | conventional | irc
    placement_mode: str = "cache"       # cache | flat
    lend_saved_space: bool = True
    direct_mapped: bool = False         # Alloy-style tag-inlined direct map

    def __post_init__(self):
        if self.metadata not in ("trimma_irt", "linear_table"):
            raise ConfigError(f"unknown metadata scheme {self.metadata!r}")
        if self.rcache not in ("none", "conventional", "irc"):
            raise ConfigError(f"unknown remap cache {self.rcache!r}")
        if self.placement_mode not in ("cache", "flat"):
            raise ConfigError(f"unknown placement mode {self.placement_mode!r}")


PRESETS = {
    "trimma_c": SchemeSelector("trimma_irt", "irc", "cache", True),
    "trimma_f": SchemeSelector("trimma_irt", "irc", "flat", True),
    "linear_flat": SchemeSelector("linear_table", "conventional", "flat", False),
    "linear_cache": SchemeSelector("linear_table", "conventional", "cache", False),
    "alloy_direct": SchemeSelector("linear_table", "none", "cache", False,
                                   direct_mapped=True),
}


@dataclass(slots=True)
class AccessOutcome:
    served_by: str              # "fast" | "slow"
    device_block: int
    migration: str              # "none" | "admit" | "admit_with_eviction"
                                # | "swap" | "unswap"
    victim: int                 # evicted home key, -1 if none
    metadata_probe: str         # "rc_hit_id" | "rc_hit_nonid" | "table_walk" | "none"


class TraceError(ValueError):
    """Trace request that the configuration cannot serve."""


class InvariantViolation(AssertionError):
    """A debug sweep found inconsistent engine state."""


class TieringEngine:
    def __init__(self, layout: HybridLayout, scheme: SchemeSelector,
                 irt_config: IrtConfig | None = None,
                 rc_config: RemapCacheConfig | None = None,
                 replacement: str = "fifo", prefetch_bits: int = 64,
                 batch_fill: bool = True, strict: bool = False,
                 seed: int = 0, record_events: bool = False,
                 reserved_slots_override: int | None = None):
        if layout.block_size != (irt_config.block_size if irt_config else 256):
            irt_config = IrtConfig(levels=irt_config.levels if irt_config else 2,
                                   block_size=layout.block_size,
                                   entry_size=layout.entry_size)
        self.irt_config = irt_config or IrtConfig(block_size=layout.block_size,
                                                  entry_size=layout.entry_size)
        self.scheme = scheme
        self.rc_config = rc_config or RemapCacheConfig()
        if replacement not in ("fifo", "random"):
            raise ConfigError(f"unknown replacement policy {replacement!r}")
        self.replacement = replacement
        self.prefetch_bits = prefetch_bits
        self.batch_fill = batch_fill
        self.strict = strict
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.events: list | None = [] if record_events else None
        self.counters = np.zeros(C.N_COUNTERS, dtype=np.int64)
        self.degenerate = False

        S = layout.num_sets
        nfast = layout.fast_blocks_per_set
        self.nslow = layout.slow_blocks_per_set
        self.nfast = nfast

        if scheme.direct_mapped:
            # Alloy-style: no remap metadata at all, tags ride with the data
            self.layout = layout
            self.table = None
            self.rcache = None
            self.resident = 0
            self.region_end = 0
            self.scan_base = 0
            self.n_keys = layout.slow_blocks_per_set
            self.inv_base = self.n_keys
            self._init_slots(S, nfast)
            self.slot_home[:] = SENTINEL
            return

        # region arithmetic is independent of the flat split, so the layout
        # can be finalized after sizing the metadata region
        probe = HybridLayout(layout.fast_capacity, layout.slow_capacity,
                             layout.block_size, layout.num_sets, layout.mode,
                             layout.entry_size, 0)
        n_keys = table_key_count(probe)
        overflow_ok = (scheme.placement_mode == "cache")
        if scheme.metadata == "linear_table":
            cfg1 = IrtConfig(1, layout.block_size, layout.entry_size)
            region = metadata_region(probe, cfg1, n_keys, allow_overflow=True)
            resident = region.intermediate_blocks
            demand = 0
        else:
            region = metadata_region(probe, self.irt_config, n_keys,
                                     allow_overflow=overflow_ok)
            resident = region.intermediate_blocks
            demand = region.leaf_blocks
        if reserved_slots_override is not None:
            if reserved_slots_override < resident + demand:
                raise ConfigError("reserved_slots_override below the region size")
            resident_pad = reserved_slots_override - demand
        else:
            resident_pad = resident
        self.resident = resident_pad
        self.region_end = min(resident_pad + demand, nfast)
        self.n_demand = demand
        self.n_avail = nfast - resident_pad
        if scheme.metadata == "linear_table" and resident_pad >= nfast:
            # the dense table alone fills the fast memory; nothing can be cached
            self.degenerate = True
            self.resident = nfast
            self.region_end = nfast
        if self.n_avail <= 0 and not self.degenerate:
            raise ConfigError("no fast-memory slots left after the metadata region")

        if scheme.lend_saved_space and scheme.metadata == "trimma_irt":
            self.scan_base = self.resident
        else:
            self.scan_base = self.region_end

        if layout.mode == "flat":
            n_flat = nfast - self.region_end
            if n_flat <= 0:
                raise ConfigError("flat mode needs at least one OS-visible fast block")
            layout = HybridLayout(layout.fast_capacity, layout.slow_capacity,
                                  layout.block_size, layout.num_sets, "flat",
                                  layout.entry_size, n_flat)
        self.layout = layout
        self.n_keys = n_keys
        self.inv_base = inverted_key_base(layout)

        if scheme.metadata == "linear_table":
            self.table = LinearRemapTable(S, n_keys, self.irt_config,
                                          layout.fast_capacity)
        else:
            self.table = IndirectionRemapTable(S, n_keys, self.irt_config,
                                               layout.fast_capacity)

        if scheme.rcache == "none":
            self.rcache = None
        elif scheme.rcache == "conventional":
            self.rcache = ConventionalRemapCache(self.rc_config, layout.set_bits)
        else:
            self.rcache = IdentityAwareRemapCache(
                self.rc_config, layout.set_bits,
                physical_keys=self.inv_base,
                batch_fill=batch_fill)

        self._init_slots(S, nfast)
        # resident index blocks are pinned metadata
        self.slot_state[:, :self.resident] = META
        if layout.mode == "flat":
            self.slot_state[:, self.region_end:] = FLAT
            for s in range(S):
                for j in range(self.region_end, nfast):
                    self.slot_home[s, j] = self.nslow + j   # own home block
            nphys = layout.physical_blocks_per_set
            self.vmap = np.full((S, nphys), SENTINEL, dtype=np.uint32)
            self.next_home = np.zeros(S, dtype=np.int64)
        else:
            self.vmap = None
            self.next_home = None

    def _init_slots(self, S, nfast):
        self.slot_state = np.zeros((S, nfast), dtype=np.int8)
        self.slot_home = np.full((S, nfast), SENTINEL, dtype=np.uint32)
        self.slot_dirty = np.zeros((S, nfast), dtype=np.uint8)
        self.owner = np.full((S, nfast), -1, dtype=np.int64)
        self.home_of = np.full((S, max(getattr(self, "n_demand", 0), 1)), -1,
                               dtype=np.int64)
        self.fifo_cur = np.full(S, self.scan_base, dtype=np.int64)
        self.bits_left = np.zeros(S, dtype=np.int64)

    # ------------------------------------------------------------------
    # metadata home management

    def _claim_home(self, s: int, d: int) -> int:
        """Give demand block d a fast slot, displacing cached data if needed."""
        p = self.resident + d % self.n_avail
        while True:
            if self.owner[s, p] < 0 and self.slot_state[s, p] != FLAT:
                break
            p += 1
            if p >= self.nfast:
                p = self.resident
        if self.slot_state[s, p] == DATA:
            self.counters[C.RECLAIMS] += 1
            if self.events is not None:
                self.events.append(("reclaim", s, int(self.slot_home[s, p]), p))
            self._evict_cached(s, p)
        self.slot_state[s, p] = META
        self.owner[s, p] = d
        self.home_of[s, d] = p
        return p

    def _peek_home(self, s: int, d: int) -> int:
        p = self.resident + d % self.n_avail
        while True:
            if self.owner[s, p] < 0 and self.slot_state[s, p] != FLAT:
                return p
            p += 1
            if p >= self.nfast:
                p = self.resident

    def _release_home(self, s: int, d: int):
        p = self.home_of[s, d]
        self.slot_state[s, p] = FREE
        self.owner[s, p] = -1
        self.home_of[s, d] = -1

    def _table_insert(self, s: int, key: int, value: int):
        res = self.table.insert(s, key, value)
        self.counters[C.META_WRITES] += 1 + len(res.allocated)

    def _table_remove(self, s: int, key: int):
        res = self.table.remove(s, key)
        self.counters[C.META_WRITES] += 1 + len(res.freed)
        for d in res.freed:
            self._release_home(s, d)

    def _allocate_for(self, s: int, key: int):
        for d in self.table.required_allocations(s, key):
            if self.home_of[s, d] < 0:
                self._claim_home(s, d)

    # ------------------------------------------------------------------
    # metadata resolution

    def _resolve(self, s: int, k: int):
        """(identity, device_block, probe_kind); fills the cache on a miss."""
        if self.rcache is not None:
            self.counters[C.RC_LOOKUPS] += 1
            r = self.rcache.lookup(s, k)
            if r.outcome != MISS:
                if r.outcome == 1:      # identity
                    self.counters[C.RC_ID_HITS] += 1
                    return True, k, "rc_hit_id"
                self.counters[C.RC_NONID_HITS] += 1
                return False, r.device_block, "rc_hit_nonid"
            self.counters[C.RC_MISSES] += 1
        res = self.table.lookup(s, k)
        self.counters[C.WALKS] += 1
        self.counters[C.WALK_PROBES] += res.levels_touched
        if self.rcache is not None:
            snap = (self.table.leaf_allocated(s, res.leaf_block_id),
                    self.table.leaf_entries_view(s, res.leaf_block_id))
            self.rcache.fill(s, k, res.identity, res.device_block, snap)
            self.counters[C.RC_FILLS] += 1
        return res.identity, res.device_block, "table_walk"

    def _rc_update(self, s: int, k: int):
        if self.rcache is not None:
            before = self.rcache.stats["invalidations"]
            self.rcache.update(s, k)
            if self.rcache.stats["invalidations"] != before:
                self.counters[C.RC_INVALIDATIONS] += 1

    # ------------------------------------------------------------------
    # replacement

    def _consume_index_bit(self, s: int, slot: int):
        if self.scan_base <= slot < self.region_end and self.scan_base < self.region_end:
            if self.bits_left[s] == 0:
                self.counters[C.INDEXBIT_FETCHES] += 1
                self.bits_left[s] = self.prefetch_bits
            self.bits_left[s] -= 1

    def _next_candidate(self, s: int) -> int:
        if self.replacement == "random":
            n = self.nfast - self.scan_base
            while True:
                c = self.scan_base + int(self.rng.integers(n))
                self._consume_index_bit(s, c)
                if self.slot_state[s, c] != META:
                    return c
        cur = int(self.fifo_cur[s])
        while True:
            if cur >= self.nfast:
                cur = self.scan_base
            c = cur
            cur += 1
            self._consume_index_bit(s, c)
            if self.slot_state[s, c] != META:
                self.fifo_cur[s] = cur
                return c

    def fifo_next_victim(self, s: int) -> int:
        """Next replaceable slot (public surface; admission uses the same scan)."""
        return self._next_candidate(s)

    def _victim_conflicts(self, s: int, fwd_key: int, slot: int) -> bool:
        """True if installing into `slot` would need `slot` itself as a
        metadata home (the slot must then be skipped, not fought over)."""
        if self.scheme.metadata != "trimma_irt":
            return False
        inv = self.inv_base + slot
        for key in (fwd_key, inv):
            for d in self.table.required_allocations(s, key):
                if self._peek_home(s, d) == slot:
                    return True
        return False

    # ------------------------------------------------------------------
    # placement changes

    def _evict_cached(self, s: int, slot: int):
        """Return a cached block to its slow-tier home."""
        v = int(self.slot_home[s, slot])
        self.counters[C.EVICTIONS] += 1
        if self.slot_dirty[s, slot]:
            self.counters[C.DIRTY_EVICTIONS] += 1
            self.counters[C.WB_FAST_BYTES] += self.layout.block_size
        if self.events is not None:
            self.events.append(("evict", s, v, slot, int(self.slot_dirty[s, slot])))
        self.slot_state[s, slot] = FREE
        self.slot_home[s, slot] = SENTINEL
        self.slot_dirty[s, slot] = 0
        self._table_remove(s, v)
        self._table_remove(s, self.inv_base + slot)
        self._rc_update(s, v)

    def _admit_cached(self, s: int, k: int, dirty: bool) -> tuple[int, int]:
        """Cache-style admission of home block k; returns (slot, victim_key)."""
        victim = -1
        while True:
            slot = self._next_candidate(s)
            if self._victim_conflicts(s, k, slot):
                continue
            if self.slot_state[s, slot] == FLAT:
                return self._admit_flat_swap(s, k, slot)
            if self.slot_state[s, slot] == DATA:
                victim = int(self.slot_home[s, slot])
                self._evict_cached(s, slot)
            inv = self.inv_base + slot
            self._allocate_for(s, k)
            self._allocate_for(s, inv)
            if self.slot_state[s, slot] == META:
                # an overflow-mode home probe landed on our slot; undo and retry
                continue
            break
        self._table_insert(s, k, self.nslow + slot)
        self._table_insert(s, inv, k)
        self.slot_state[s, slot] = DATA
        self.slot_home[s, slot] = k
        self.slot_dirty[s, slot] = 1 if dirty else 0
        self._rc_update(s, k)
        self.counters[C.ADMISSIONS] += 1
        self.counters[C.FILL_FAST_BYTES] += self.layout.block_size
        if self.events is not None:
            self.events.append(("admit", s, k, slot))
        return slot, victim

    def _unswap(self, s: int, flat_key: int):
        """Restore a swapped pair: the flat block comes home, its partner
        returns to the slow tier."""
        slot = flat_key - self.nslow
        partner = int(self.slot_home[s, slot])
        self._table_remove(s, partner)
        self._table_remove(s, flat_key)
        self.slot_home[s, slot] = flat_key
        self._rc_update(s, partner)
        self._rc_update(s, flat_key)
        self.counters[C.UNSWAPS] += 1
        # partner leaves fast, flat block re-enters it
        self.counters[C.WB_FAST_BYTES] += self.layout.block_size
        self.counters[C.FILL_FAST_BYTES] += self.layout.block_size
        if self.events is not None:
            self.events.append(("unswap", s, partner, flat_key, slot))

    def _admit_flat_swap(self, s: int, k: int, slot: int) -> tuple[int, int]:
        """Swap slow-home block k into flat slot `slot` (slow swap policy:
        any previous tenant first goes back to its own home)."""
        flat_key = self.nslow + slot
        victim = -1
        if int(self.slot_home[s, slot]) != flat_key:
            victim = int(self.slot_home[s, slot])
            self._unswap(s, flat_key)
        self._allocate_for(s, k)
        self._allocate_for(s, flat_key)
        self._table_insert(s, k, self.nslow + slot)
        self._table_insert(s, flat_key, k)
        self.slot_home[s, slot] = k
        self._rc_update(s, k)
        self._rc_update(s, flat_key)
        self.counters[C.ADMISSIONS] += 1
        self.counters[C.SWAPS] += 1
        self.counters[C.FILL_FAST_BYTES] += self.layout.block_size
        self.counters[C.WB_FAST_BYTES] += self.layout.block_size
        if self.events is not None:
            self.events.append(("swap", s, k, flat_key, slot))
        return slot, victim

    def reclaim_metadata_block(self, s: int, d: int) -> int:
        """Force demand block d resident (public surface for tests);
        returns the displaced home key or -1."""
        if self.slot_state[s, self._peek_home(s, d)] == FLAT:
            raise InvariantViolation("flat slots are never lendable")
        p = self._peek_home(s, d)
        evicted = int(self.slot_home[s, p]) if self.slot_state[s, p] == DATA else -1
        self._claim_home(s, d)
        return evicted

    # ------------------------------------------------------------------
    # flat-mode first touch

    def first_touch_allocate(self, s: int, local: int) -> int:
        """Assign a never-touched block a home: fast flat area first."""
        n_flat = self.layout.flat_blocks_per_set
        idx = int(self.next_home[s])
        if idx >= self.layout.physical_blocks_per_set:
            raise TraceError(f"set {s} first-touch pool exhausted")
        if idx < n_flat:
            key = self.nslow + self.region_end + idx
        else:
            key = idx - n_flat
        self.vmap[s, local] = key
        self.next_home[s] = idx + 1
        self.counters[C.FIRST_TOUCHES] += 1
        return key

    # ------------------------------------------------------------------
    # the access flow

    def access(self, op: int, addr: int) -> AccessOutcome:
        """op: 0 = read, 1 = write; addr: physical byte address."""
        lay = self.layout
        if addr < 0 or addr >= lay.physical_capacity:
            raise TraceError(
                f"address {addr:#x} outside physical capacity {lay.physical_capacity:#x}")
        cnt = self.counters
        cnt[C.REQUESTS] += 1
        cnt[C.WRITES if op else C.READS] += 1
        s = (addr >> lay.offset_bits) & (lay.num_sets - 1)
        local = addr >> (lay.offset_bits + lay.set_bits)

        if self.scheme.direct_mapped:
            return self._access_direct(op, s, local)

        if lay.mode == "flat":
            k = int(self.vmap[s, local])
            if k == SENTINEL:
                if self.strict:
                    raise TraceError(
                        f"flat-mode address {addr:#x} was never first-touched")
                k = self.first_touch_allocate(s, local)
        else:
            k = local

        identity, dev, probe = self._resolve(s, k)
        fast = dev >= self.nslow
        if fast:
            cnt[C.FAST_WRITES if op else C.FAST_READS] += 1
            slot = dev - self.nslow
            if op and self.slot_state[s, slot] == DATA:
                self.slot_dirty[s, slot] = 1
            return AccessOutcome("fast", dev, "none", -1, probe)

        cnt[C.SLOW_WRITES if op else C.SLOW_READS] += 1
        # replacement happens off the critical path
        migration, victim = "none", -1
        if lay.mode == "flat" and k >= self.nslow:
            # a swapped-out flat block: restore it rather than re-migrate
            self._unswap(s, k)
            migration = "unswap"
        elif self.scan_base < self.nfast and not self.degenerate:
            slot, victim = self._admit_cached(s, k, dirty=bool(op))
            if self.slot_state[s, slot] == FLAT:
                migration = "swap"
            else:
                migration = "admit_with_eviction" if victim >= 0 else "admit"
        return AccessOutcome("slow", dev, migration, victim, probe)

    def _access_direct(self, op, s, local):
        cnt = self.counters
        slot = local % self.nfast
        cur = int(self.slot_home[s, slot])
        if cur == local:
            cnt[C.FAST_WRITES if op else C.FAST_READS] += 1
            if op:
                self.slot_dirty[s, slot] = 1
            return AccessOutcome("fast", self.nslow + slot, "none", -1, "none")
        cnt[C.SLOW_WRITES if op else C.SLOW_READS] += 1
        victim = -1
        if cur != SENTINEL:
            victim = cur
            cnt[C.EVICTIONS] += 1
            if self.slot_dirty[s, slot]:
                cnt[C.DIRTY_EVICTIONS] += 1
                cnt[C.WB_FAST_BYTES] += self.layout.block_size
            if self.events is not None:
                self.events.append(("evict", s, cur, slot,
                                    int(self.slot_dirty[s, slot])))
        self.slot_home[s, slot] = local
        self.slot_state[s, slot] = DATA
        self.slot_dirty[s, slot] = 1 if op else 0
        cnt[C.ADMISSIONS] += 1
        cnt[C.FILL_FAST_BYTES] += self.layout.block_size
        if self.events is not None:
            self.events.append(("admit", s, local, slot))
        mig = "admit_with_eviction" if victim >= 0 else "admit"
        return AccessOutcome("slow", local, mig, victim, "none")

    def run(self, ops: np.ndarray, addrs: np.ndarray):
        """Process a whole trace through the Python path."""
        access = self.access
        for i in range(len(ops)):
            access(int(ops[i]), int(addrs[i]))

    # ------------------------------------------------------------------
    # accounting and verification

    def metadata_fraction(self) -> float:
        if self.scheme.direct_mapped:
            return 0.0
        if self.scheme.metadata == "linear_table":
            return min(1.0, self.table.resident_blocks * self.layout.num_sets
                       * self.layout.block_size / self.layout.fast_capacity)
        fp = self.table.footprint()
        return fp.fraction_of_fast

    def debug_check(self):
        """Full-sweep consistency check; raises InvariantViolation."""
        lay = self.layout
        S = lay.num_sets
        for s in range(S):
            at_slot = {}
            for slot in range(self.nfast):
                st = self.slot_state[s, slot]
                if st == META and self.table is not None and slot >= self.resident:
                    d = self.owner[s, slot]
                    if d < 0 or self.home_of[s, d] != slot:
                        raise InvariantViolation(
                            f"set {s} slot {slot}: META without owner record")
                if st == DATA:
                    k = int(self.slot_home[s, slot])
                    at_slot[k] = slot
                    if self.table is not None:
                        fwd = self.table.lookup(s, k)
                        if fwd.identity or fwd.device_block != self.nslow + slot:
                            raise InvariantViolation(
                                f"set {s}: cached key {k} lacks forward entry")
                        inv = self.table.lookup(s, self.inv_base + slot)
                        if inv.identity or inv.device_block != k:
                            raise InvariantViolation(
                                f"set {s}: slot {slot} lacks inverted entry")
                if st == FLAT:
                    k = int(self.slot_home[s, slot])
                    if k != self.nslow + slot:
                        fwd = self.table.lookup(s, k)
                        if fwd.identity or fwd.device_block != self.nslow + slot:
                            raise InvariantViolation(
                                f"set {s}: swapped-in key {k} lacks forward entry")
            if self.table is None:
                continue
            if isinstance(self.table, IndirectionRemapTable):
                # intermediate bit set iff >= 1 non-sentinel entry in the leaf
                n = self.irt_config.leaf_entries_per_block
                ent = self.table.entries[s]
                bits = self.table.alloc[-1][s]
                nleaf = len(bits)
                used = (ent[:nleaf * n].reshape(nleaf, n) != SENTINEL).any(axis=1)
                if not np.array_equal(used, bits.astype(bool)):
                    raise InvariantViolation(f"set {s}: dangling intermediate bits")
                # every allocated demand block owns exactly its home slot
                for l, arr in enumerate(self.table.alloc):
                    for node in np.flatnonzero(arr[s]):
                        d = self.table.demand_index(l, int(node))
                        p = self.home_of[s, d]
                        if p < 0 or self.slot_state[s, p] != META or self.owner[s, p] != d:
                            raise InvariantViolation(
                                f"set {s}: demand block {d} has no resident home")
            # conservation: every non-identity forward mapping targets a fast
            # slot that records the same home key
            ent = self.table.entries[s]
            for k in np.flatnonzero(ent[:self.inv_base] != SENTINEL):
                k = int(k)
                if isinstance(self.table, IndirectionRemapTable) and \
                        not self.table.leaf_allocated(s, self.table.leaf_block_of(k)):
                    continue
                dev = int(ent[k])
                slot = dev - self.nslow
                if not (0 <= slot < self.nfast):
                    # a swapped-out flat block legitimately maps to its
                    # partner's slow home
                    if k >= self.nslow and int(self.slot_home[s, k - self.nslow]) == dev:
                        continue
                    raise InvariantViolation(f"set {s}: key {k} maps to slow block {dev}")
                if int(self.slot_home[s, slot]) != k:
                    raise InvariantViolation(
                        f"set {s}: key {k} maps to slot {slot} holding "
                        f"{int(self.slot_home[s, slot])}")
            # no stale identity assertions in the IdCache
            if isinstance(self.rcache, IdentityAwareRemapCache):
                idc = self.rcache.idc
                for idx in range(idc.sets):
                    for w in range(idc.ways):
                        sb = int(idc.tags[idx, w])
                        if sb < 0 or (sb & (lay.num_sets - 1)) != s:
                            continue
                        base = (sb >> lay.set_bits) << 5
                        bits = int(idc.vals[idx, w])
                        for i in range(32):
                            if bits >> i & 1:
                                r = self.table.lookup(s, base + i)
                                if not r.identity:
                                    raise InvariantViolation(
                                        f"set {s}: stale identity bit for key {base + i}")
