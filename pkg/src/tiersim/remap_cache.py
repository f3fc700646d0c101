"""On-chip metadata caches.

Two variants: the conventional remap cache (one full entry per block, identity
or not), and the identity-aware split cache with a NonIdCache holding pointer
entries and an IdCache holding per-super-block identity bit vectors.  Caches
are timing/traffic filters only: every value they return must equal what the
off-chip table would return, which update() guarantees by invalidating on any
mapping change.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ConfigError

MISS = 0
IDENTITY_HIT = 1
REMAP_HIT = 2

SUPER_BLOCK_BITS = 5            # 32 blocks per super-block


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class RemapCacheConfig:
    conv_sets: int = 2048
    conv_ways: int = 8
    nonid_sets: int = 2048
    nonid_ways: int = 6
    id_sets: int = 256
    id_ways: int = 16
    bits_per_line: int = 32
    hit_latency_cycles: int = 3

    def __post_init__(self):
        for n in (self.conv_sets, self.nonid_sets, self.id_sets):
            if not _is_pow2(n):
                raise ConfigError(f"cache set counts must be powers of two, got {n}")

    @property
    def conv_capacity_bytes(self) -> int:
        # 4-byte payload per entry
        return self.conv_sets * self.conv_ways * 4

    @property
    def irc_capacity_bytes(self) -> int:
        return (self.nonid_sets * self.nonid_ways + self.id_sets * self.id_ways) * 4

    @classmethod
    def with_partition(cls, id_fraction: float, budget_bytes: int = 65536,
                       **kw) -> "RemapCacheConfig":
        """Split a payload budget between IdCache and NonIdCache.

        id_fraction is the IdCache share (0 disables it, 0.25 is the default
        1:3 split).  NonIdCache keeps 2048 sets and absorbs the remainder in
        its way count; the IdCache keeps 16 ways and scales its set count.
        """
        if not 0 <= id_fraction < 1:
            raise ConfigError(f"id_fraction must be in [0, 1), got {id_fraction}")
        id_bytes = int(budget_bytes * id_fraction)
        nonid_bytes = budget_bytes - id_bytes
        nonid_sets = kw.pop("nonid_sets", 2048)
        id_ways = kw.pop("id_ways", 16)
        nonid_ways = max(1, nonid_bytes // (nonid_sets * 4))
        id_sets = id_bytes // (id_ways * 4)
        if id_fraction > 0 and (id_sets == 0 or not _is_pow2(id_sets)):
            raise ConfigError(
                f"id_fraction {id_fraction} does not yield a power-of-two "
                f"IdCache set count (got {id_sets})"
            )
        if id_fraction == 0:
            id_ways = 0          # IdCache disabled: no lines at all
        return cls(nonid_sets=nonid_sets, nonid_ways=nonid_ways,
                   id_sets=max(id_sets, 1), id_ways=id_ways, **kw)


@dataclass(slots=True)
class RcLookupResult:
    outcome: int                # MISS / IDENTITY_HIT / REMAP_HIT
    device_block: int           # valid for REMAP_HIT; == key for IDENTITY_HIT
    which: str                  # "id", "non_id", "conventional", "none"


def id_index(super_block: int, index_bits: int) -> int:
    """Hash index: XOR-fold of the two adjacent index-width fields."""
    mask = (1 << index_bits) - 1
    return (super_block ^ (super_block >> index_bits)) & mask


class _FifoArrayCache:
    """Set-associative tag/value store with per-set FIFO replacement."""

    def __init__(self, sets: int, ways: int):
        self.sets = sets
        self.ways = ways
        self.tags = np.full((sets, ways), -1, dtype=np.int64)
        self.vals = np.zeros((sets, ways), dtype=np.uint32)
        self.ptr = np.zeros(sets, dtype=np.int64)

    def find(self, idx: int, tag: int) -> int:
        row = self.tags[idx]
        for w in range(self.ways):
            if row[w] == tag:
                return w
        return -1

    def insert(self, idx: int, tag: int, val: int) -> None:
        if self.ways == 0:
            return
        w = int(self.ptr[idx])
        self.tags[idx, w] = tag
        self.vals[idx, w] = val
        self.ptr[idx] = (w + 1) % self.ways

    def invalidate(self, idx: int, tag: int) -> bool:
        w = self.find(idx, tag)
        if w < 0:
            return False
        self.tags[idx, w] = -1
        return True

    def reset(self):
        self.tags.fill(-1)
        self.vals.fill(0)
        self.ptr.fill(0)


class ConventionalRemapCache:
    """Baseline: caches the full resolution for every looked-up key,
    identity mappings included (that redundancy is what the split design
    removes)."""

    def __init__(self, config: RemapCacheConfig, set_bits: int):
        self.config = config
        self.set_bits = set_bits
        self.index_mask = config.conv_sets - 1
        self.store = _FifoArrayCache(config.conv_sets, config.conv_ways)
        self.stats = {"lookups": 0, "id_hits": 0, "non_id_hits": 0,
                      "misses": 0, "fills": 0, "invalidations": 0}

    def _key(self, set_id: int, local_block: int) -> int:
        return (local_block << self.set_bits) | set_id

    def lookup(self, set_id: int, local_block: int) -> RcLookupResult:
        self.stats["lookups"] += 1
        g = self._key(set_id, local_block)
        idx = g & self.index_mask
        tag = g >> 0
        w = self.store.find(idx, tag)
        if w < 0:
            self.stats["misses"] += 1
            return RcLookupResult(MISS, -1, "none")
        val = int(self.store.vals[idx, w])
        if val == local_block:
            self.stats["id_hits"] += 1
            return RcLookupResult(IDENTITY_HIT, local_block, "conventional")
        self.stats["non_id_hits"] += 1
        return RcLookupResult(REMAP_HIT, val, "conventional")

    def fill(self, set_id: int, local_block: int, identity: bool,
             device_block: int, leaf_snapshot=None) -> None:
        self.stats["fills"] += 1
        g = self._key(set_id, local_block)
        val = local_block if identity else device_block
        self.store.insert(g & self.index_mask, g, val)

    def update(self, set_id: int, local_block: int) -> None:
        g = self._key(set_id, local_block)
        if self.store.invalidate(g & self.index_mask, g):
            self.stats["invalidations"] += 1

    def reset(self):
        self.store.reset()
        for k in self.stats:
            self.stats[k] = 0


class IdentityAwareRemapCache:
    """Split cache: pointer entries in the NonIdCache, identity bit vectors
    keyed by super-block in the IdCache.

    An IdCache bit of 0 asserts nothing (the key may be identity or not); a
    bit of 1 asserts identity and is cleared the moment the mapping changes.
    Super-blocks group 32 consecutive local blocks of one memory set, so a
    fetched leaf block (64 entries) covers whole super-blocks and a fill can
    batch-set every bit the fetch resolved.
    """

    def __init__(self, config: RemapCacheConfig, set_bits: int,
                 physical_keys: int, batch_fill: bool = True):
        self.config = config
        self.set_bits = set_bits
        self.physical_keys = physical_keys
        self.batch_fill = batch_fill
        self.nonid = _FifoArrayCache(config.nonid_sets, config.nonid_ways)
        self.idc = _FifoArrayCache(config.id_sets, config.id_ways)
        self.nonid_mask = config.nonid_sets - 1
        self.id_index_bits = config.id_sets.bit_length() - 1
        self.stats = {"lookups": 0, "id_hits": 0, "non_id_hits": 0,
                      "misses": 0, "fills": 0, "invalidations": 0}

    def _key(self, set_id: int, local_block: int) -> int:
        return (local_block << self.set_bits) | set_id

    def _super_block(self, set_id: int, local_block: int) -> int:
        return ((local_block >> SUPER_BLOCK_BITS) << self.set_bits) | set_id

    def lookup(self, set_id: int, local_block: int) -> RcLookupResult:
        self.stats["lookups"] += 1
        # both components are probed in parallel; at most one can hit
        sb = self._super_block(set_id, local_block)
        idx = id_index(sb, self.id_index_bits)
        w = self.idc.find(idx, sb)
        if w >= 0 and (int(self.idc.vals[idx, w]) >> (local_block & 31)) & 1:
            self.stats["id_hits"] += 1
            return RcLookupResult(IDENTITY_HIT, local_block, "id")
        g = self._key(set_id, local_block)
        w = self.nonid.find(g & self.nonid_mask, g)
        if w >= 0:
            self.stats["non_id_hits"] += 1
            return RcLookupResult(REMAP_HIT, int(self.nonid.vals[g & self.nonid_mask, w]),
                                  "non_id")
        self.stats["misses"] += 1
        return RcLookupResult(MISS, -1, "none")

    def fill(self, set_id: int, local_block: int, identity: bool,
             device_block: int, leaf_snapshot=None) -> None:
        """Insert a table resolution.

        leaf_snapshot, when given, is (allocated, entries) for the fetched
        leaf block: entries is the 64-entry view and allocated its index bit.
        With batch fill enabled, the identity bits of the whole super-block
        are derived from it in one go; an unallocated leaf sets all of them.
        """
        self.stats["fills"] += 1
        if not identity:
            g = self._key(set_id, local_block)
            self.nonid.insert(g & self.nonid_mask, g, device_block)
            return
        sb = self._super_block(set_id, local_block)
        idx = id_index(sb, self.id_index_bits)
        mask = self._identity_mask(set_id, local_block, leaf_snapshot)
        w = self.idc.find(idx, sb)
        if w >= 0:
            self.idc.vals[idx, w] |= mask
        else:
            self.idc.insert(idx, sb, mask)

    def _identity_mask(self, set_id: int, local_block: int, leaf_snapshot) -> int:
        bit = 1 << (local_block & 31)
        if leaf_snapshot is None or not self.batch_fill:
            return bit
        allocated, entries = leaf_snapshot
        base = local_block & ~31             # first key of the super-block
        leaf_entries = len(entries)
        leaf_first = (local_block // leaf_entries) * leaf_entries
        mask = 0
        for i in range(32):
            key = base + i
            if key >= self.physical_keys:
                break
            if not allocated or entries[key - leaf_first] == 0xFFFFFFFF:
                mask |= 1 << i
        return mask | bit

    def update(self, set_id: int, local_block: int) -> None:
        g = self._key(set_id, local_block)
        hit = self.nonid.invalidate(g & self.nonid_mask, g)
        sb = self._super_block(set_id, local_block)
        idx = id_index(sb, self.id_index_bits)
        w = self.idc.find(idx, sb)
        if w >= 0:
            bit = np.uint32(1 << (local_block & 31))
            if self.idc.vals[idx, w] & bit:
                self.idc.vals[idx, w] &= ~bit   # line retained
                hit = True
        if hit:
            self.stats["invalidations"] += 1

    def reset(self):
        self.nonid.reset()
        self.idc.reset()
        for k in self.stats:
            self.stats[k] = 0
