"""Remap tables: the indirection-based radix tree and the dense linear table.

Both map per-set local block keys to device block IDs.  A key with no stored
entry is an identity mapping (device block == key).  The tree keeps one
always-resident root index level; every lower level is demand-allocated in
block-sized units at fixed addresses, which is what lets unused blocks be
lent out as cache space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ConfigError, level_block_counts

SENTINEL = 0xFFFFFFFF


class ContractViolation(RuntimeError):
    """The caller broke a table precondition (placement-state bug)."""


@dataclass(frozen=True)
class IrtConfig:
    levels: int = 2
    block_size: int = 256
    entry_size: int = 4

    def __post_init__(self):
        if self.levels < 1:
            raise ConfigError(f"levels must be >= 1, got {self.levels}")
        if self.block_size % self.entry_size:
            raise ConfigError("block_size must be a multiple of entry_size")

    @property
    def leaf_entries_per_block(self) -> int:
        return self.block_size // self.entry_size

    @property
    def intermediate_fanout(self) -> int:
        return self.block_size * 8

    @property
    def invalid_sentinel(self) -> int:
        return SENTINEL


@dataclass(slots=True)
class RemapLookupResult:
    identity: bool
    device_block: int          # == key for identity mappings
    levels_touched: int
    leaf_block_id: int         # leaf-level block index covering the key


@dataclass(slots=True)
class IrtFootprint:
    intermediate_bytes: int
    allocated_leaf_blocks: int
    leaf_bytes: int
    fraction_of_fast: float


@dataclass(slots=True)
class InsertResult:
    allocated: list            # demand-block indices newly allocated
    existing_value: int        # previous entry value (SENTINEL if none)


@dataclass(slots=True)
class RemoveResult:
    freed: list                # demand-block indices released


class IndirectionRemapTable:
    """Per-set radix tree over local block keys.

    Demand-allocated blocks are identified by a per-set *demand index*: the
    breadth-first position among all non-root blocks (upper levels first,
    leaves last).  The engine maps demand indices to fast-memory slots; the
    table itself only tracks allocation state and entries.
    """

    def __init__(self, num_sets: int, n_keys: int, config: IrtConfig,
                 fast_capacity: int):
        self.config = config
        self.num_sets = num_sets
        self.n_keys = n_keys
        self.fast_capacity = fast_capacity
        cfg = config
        counts = level_block_counts(n_keys, cfg.levels,
                                    cfg.leaf_entries_per_block,
                                    cfg.intermediate_fanout)
        self.level_counts = counts
        if cfg.levels == 1:
            raise ConfigError("a 1-level table is the linear table; use LinearRemapTable")
        self.resident_blocks = counts[0]
        self.demand_level_counts = counts[1:]
        self.demand_bases = []
        base = 0
        for c in self.demand_level_counts:
            self.demand_bases.append(base)
            base += c
        self.demand_blocks = base
        self.leaf_base = self.demand_bases[-1]

        pad = self.demand_level_counts[-1] * cfg.leaf_entries_per_block
        self.entries = np.full((num_sets, pad), SENTINEL, dtype=np.uint32)
        # presence bit and allocated-child count per demand-level block
        self.alloc = [np.zeros((num_sets, c), dtype=np.uint8)
                      for c in self.demand_level_counts]
        self.child_count = [np.zeros((num_sets, c), dtype=np.int32)
                            for c in self.demand_level_counts]
        self.allocated_per_set = np.zeros(num_sets, dtype=np.int64)

    # -- key/path helpers --------------------------------------------------

    def leaf_block_of(self, key: int) -> int:
        return key // self.config.leaf_entries_per_block

    def _path(self, key: int) -> list[int]:
        """Node index at each demand level (upper levels first, leaf last)."""
        idx = self.leaf_block_of(key)
        path = [idx]
        for _ in range(len(self.demand_level_counts) - 1):
            idx //= self.config.intermediate_fanout
            path.append(idx)
        return path[::-1]

    def demand_index(self, level: int, node: int) -> int:
        """level counts demand levels from the top (0 = highest demand level)."""
        return self.demand_bases[level] + node

    def _check_key(self, set_id: int, key: int):
        if not (0 <= set_id < self.num_sets):
            raise IndexError(f"set {set_id} out of range {self.num_sets}")
        if not (0 <= key < self.n_keys):
            raise IndexError(f"key {key} out of range {self.n_keys}")

    # -- operations ---------------------------------------------------------

    def lookup(self, set_id: int, key: int) -> RemapLookupResult:
        self._check_key(set_id, key)
        leaf = self.leaf_block_of(key)
        # all level probes are issued in parallel; deeper results are
        # discarded when an upper bit is clear
        touched = self.config.levels
        if not self.alloc[-1][set_id, leaf]:
            return RemapLookupResult(True, key, touched, leaf)
        e = int(self.entries[set_id, key])
        if e == SENTINEL:
            return RemapLookupResult(True, key, touched, leaf)
        return RemapLookupResult(False, e, touched, leaf)

    def required_allocations(self, set_id: int, key: int) -> list[int]:
        """Demand blocks that inserting this key would newly allocate."""
        self._check_key(set_id, key)
        path = self._path(key)
        return [self.demand_index(l, node)
                for l, node in enumerate(path)
                if not self.alloc[l][set_id, node]]

    def insert(self, set_id: int, key: int, device_block: int) -> InsertResult:
        self._check_key(set_id, key)
        if not (0 <= device_block < SENTINEL):
            raise ValueError(f"device block {device_block:#x} not encodable")
        path = self._path(key)
        allocated = []
        for l, node in enumerate(path):
            if not self.alloc[l][set_id, node]:
                self.alloc[l][set_id, node] = 1
                if l > 0:
                    self.child_count[l - 1][set_id, path[l - 1]] += 1
                allocated.append(self.demand_index(l, node))
        prev = int(self.entries[set_id, key])
        if prev == SENTINEL:
            self.child_count[-1][set_id, path[-1]] += 1
        self.entries[set_id, key] = device_block
        self.allocated_per_set[set_id] += len(allocated)
        return InsertResult(allocated, prev)

    def remove(self, set_id: int, key: int) -> RemoveResult:
        self._check_key(set_id, key)
        path = self._path(key)
        leaf = path[-1]
        if not self.alloc[-1][set_id, leaf] or self.entries[set_id, key] == SENTINEL:
            raise ContractViolation(
                f"remove of identity-mapped key {key} in set {set_id}"
            )
        self.entries[set_id, key] = SENTINEL
        freed = []
        self.child_count[-1][set_id, leaf] -= 1
        for l in range(len(path) - 1, -1, -1):
            node = path[l]
            if self.child_count[l][set_id, node]:
                break
            self.alloc[l][set_id, node] = 0
            freed.append(self.demand_index(l, node))
            if l > 0:
                self.child_count[l - 1][set_id, path[l - 1]] -= 1
        self.allocated_per_set[set_id] -= len(freed)
        return RemoveResult(freed)

    def leaf_entries_view(self, set_id: int, leaf_block: int) -> np.ndarray:
        n = self.config.leaf_entries_per_block
        return self.entries[set_id, leaf_block * n:(leaf_block + 1) * n]

    def leaf_allocated(self, set_id: int, leaf_block: int) -> bool:
        return bool(self.alloc[-1][set_id, leaf_block])

    # -- accounting ----------------------------------------------------------

    def footprint(self, set_id: int | None = None) -> IrtFootprint:
        bs = self.config.block_size
        if set_id is None:
            sets = list(range(self.num_sets))
            fast = self.fast_capacity
        else:
            sets = [set_id]
            fast = self.fast_capacity // self.num_sets
        leaf_blocks = 0
        upper_blocks = 0
        for s in sets:
            leaf_blocks += int(self.alloc[-1][s].sum())
            for a in self.alloc[:-1]:
                upper_blocks += int(a[s].sum())
        inter_bytes = (self.resident_blocks * len(sets) + upper_blocks) * bs
        leaf_bytes = leaf_blocks * bs
        return IrtFootprint(inter_bytes, leaf_blocks, leaf_bytes,
                            (inter_bytes + leaf_bytes) / fast)

    def dump(self, set_id: int) -> str:
        """One `key -> device_block` pair per line, allocated leaves only."""
        lines = []
        n = self.config.leaf_entries_per_block
        for leaf in np.flatnonzero(self.alloc[-1][set_id]):
            base = int(leaf) * n
            ent = self.entries[set_id, base:base + n]
            for i in np.flatnonzero(ent != SENTINEL):
                lines.append(f"{base + int(i)} -> {int(ent[i])}")
        return "\n".join(lines)


class LinearRemapTable:
    """Dense one-entry-per-key table; the baseline and the iRT oracle."""

    def __init__(self, num_sets: int, n_keys: int, config: IrtConfig,
                 fast_capacity: int):
        self.config = config
        self.num_sets = num_sets
        self.n_keys = n_keys
        self.fast_capacity = fast_capacity
        self.entries = np.full((num_sets, n_keys), SENTINEL, dtype=np.uint32)
        self.resident_blocks = level_block_counts(
            n_keys, 1, config.leaf_entries_per_block,
            config.intermediate_fanout)[0]
        self.demand_blocks = 0

    def _check_key(self, set_id: int, key: int):
        if not (0 <= set_id < self.num_sets):
            raise IndexError(f"set {set_id} out of range {self.num_sets}")
        if not (0 <= key < self.n_keys):
            raise IndexError(f"key {key} out of range {self.n_keys}")

    def lookup(self, set_id: int, key: int) -> RemapLookupResult:
        self._check_key(set_id, key)
        leaf = key // self.config.leaf_entries_per_block
        e = int(self.entries[set_id, key])
        if e == SENTINEL:
            return RemapLookupResult(True, key, 1, leaf)
        return RemapLookupResult(False, e, 1, leaf)

    def required_allocations(self, set_id: int, key: int) -> list[int]:
        return []

    def insert(self, set_id: int, key: int, device_block: int) -> InsertResult:
        self._check_key(set_id, key)
        prev = int(self.entries[set_id, key])
        self.entries[set_id, key] = device_block
        return InsertResult([], prev)

    # update() is the spec name for the baseline path
    update = insert

    def remove(self, set_id: int, key: int) -> RemoveResult:
        self._check_key(set_id, key)
        if self.entries[set_id, key] == SENTINEL:
            raise ContractViolation(
                f"remove of identity-mapped key {key} in set {set_id}"
            )
        self.entries[set_id, key] = SENTINEL
        return RemoveResult([])

    def leaf_block_of(self, key: int) -> int:
        return key // self.config.leaf_entries_per_block

    def leaf_entries_view(self, set_id: int, leaf_block: int) -> np.ndarray:
        n = self.config.leaf_entries_per_block
        return self.entries[set_id, leaf_block * n:(leaf_block + 1) * n]

    def leaf_allocated(self, set_id: int, leaf_block: int) -> bool:
        return True

    def footprint(self, set_id: int | None = None) -> IrtFootprint:
        bs = self.config.block_size
        nsets = 1 if set_id is not None else self.num_sets
        fast = self.fast_capacity // (self.num_sets if set_id is not None else 1)
        total = self.resident_blocks * nsets * bs
        return IrtFootprint(0, self.resident_blocks * nsets, total, total / fast)

    def dump(self, set_id: int) -> str:
        ent = self.entries[set_id]
        return "\n".join(f"{int(k)} -> {int(ent[k])}"
                         for k in np.flatnonzero(ent != SENTINEL))
