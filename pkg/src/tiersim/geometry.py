"""Address arithmetic and fast-memory layout.

Physical addresses decompose into (set, set-local block, offset) with the set
selected by the bits immediately above the block offset, so consecutive blocks
interleave across sets.  Device addresses use the same interleave over the
combined device block space: per set, device blocks [0, slow_blocks) are the
slow tier and [slow_blocks, slow_blocks + fast_blocks) are the fast tier.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class AddressRangeError(ValueError):
    """Address or component outside the configured bounds."""


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class HybridLayout:
    """Geometry of both memory tiers.

    flat_blocks_per_set is only meaningful in flat mode: it is the number of
    OS-visible fast blocks per set (the fast memory minus the metadata
    region), and bounds the physical address space together with the slow
    capacity.
    """

    fast_capacity: int
    slow_capacity: int
    block_size: int = 256
    num_sets: int = 4
    mode: str = "cache"
    entry_size: int = 4
    flat_blocks_per_set: int = 0

    def __post_init__(self):
        if self.mode not in ("cache", "flat"):
            raise ConfigError(f"mode must be 'cache' or 'flat', got {self.mode!r}")
        if not _is_pow2(self.block_size):
            raise ConfigError(f"block_size must be a power of two, got {self.block_size}")
        if not _is_pow2(self.num_sets):
            raise ConfigError(f"num_sets must be a power of two, got {self.num_sets}")
        if self.block_size < 2 * self.entry_size:
            raise ConfigError(
                f"block_size {self.block_size} must hold at least two "
                f"{self.entry_size}-byte entries"
            )
        chunk = self.block_size * self.num_sets
        for name, cap in (("fast_capacity", self.fast_capacity),
                          ("slow_capacity", self.slow_capacity)):
            if cap <= 0 or cap % chunk:
                raise ConfigError(
                    f"{name} ({cap}) must be a positive multiple of "
                    f"block_size*num_sets ({chunk})"
                )
        if self.slow_blocks_per_set + self.fast_blocks_per_set >= (1 << 32):
            raise ConfigError("per-set device block count exceeds the 32-bit entry range")

    @property
    def offset_bits(self) -> int:
        return self.block_size.bit_length() - 1

    @property
    def set_bits(self) -> int:
        return self.num_sets.bit_length() - 1

    @property
    def fast_blocks_per_set(self) -> int:
        return self.fast_capacity // (self.block_size * self.num_sets)

    @property
    def slow_blocks_per_set(self) -> int:
        return self.slow_capacity // (self.block_size * self.num_sets)

    @property
    def capacity_ratio(self) -> float:
        return self.slow_capacity / self.fast_capacity

    @property
    def physical_blocks_per_set(self) -> int:
        """Set-local block IDs addressable by the OS."""
        if self.mode == "cache":
            return self.slow_blocks_per_set
        return self.slow_blocks_per_set + self.flat_blocks_per_set

    @property
    def physical_capacity(self) -> int:
        return self.physical_blocks_per_set * self.num_sets * self.block_size

    @property
    def device_blocks_per_set(self) -> int:
        return self.slow_blocks_per_set + self.fast_blocks_per_set


@dataclass(frozen=True)
class AddressParts:
    set_id: int
    local_block: int
    offset: int


def decompose_physical(addr: int, layout: HybridLayout) -> AddressParts:
    """Split a physical byte address into (set, local block, offset)."""
    if addr < 0 or addr >= layout.physical_capacity:
        raise AddressRangeError(
            f"address {addr:#x} outside physical capacity {layout.physical_capacity:#x}"
        )
    offset = addr & (layout.block_size - 1)
    set_id = (addr >> layout.offset_bits) & (layout.num_sets - 1)
    local = addr >> (layout.offset_bits + layout.set_bits)
    return AddressParts(set_id, local, offset)


def compose_physical(parts: AddressParts, layout: HybridLayout) -> int:
    """Inverse of decompose_physical."""
    if not (0 <= parts.offset < layout.block_size):
        raise AddressRangeError(f"offset {parts.offset} out of range")
    if not (0 <= parts.set_id < layout.num_sets):
        raise AddressRangeError(f"set {parts.set_id} out of range")
    if not (0 <= parts.local_block < layout.physical_blocks_per_set):
        raise AddressRangeError(f"local block {parts.local_block} out of range")
    return (((parts.local_block << layout.set_bits) | parts.set_id)
            << layout.offset_bits) | parts.offset


def compose_device(set_id: int, device_block: int, offset: int,
                   layout: HybridLayout) -> int:
    """Byte address in the device space (slow tier first, then fast)."""
    if not (0 <= set_id < layout.num_sets):
        raise AddressRangeError(f"set {set_id} out of range")
    if not (0 <= device_block < layout.device_blocks_per_set):
        raise AddressRangeError(
            f"device block {device_block} out of per-set range "
            f"{layout.device_blocks_per_set}"
        )
    if not (0 <= offset < layout.block_size):
        raise AddressRangeError(f"offset {offset} out of range")
    return (((device_block << layout.set_bits) | set_id)
            << layout.offset_bits) | offset


def decompose_device(addr: int, layout: HybridLayout) -> AddressParts:
    total = layout.device_blocks_per_set * layout.num_sets * layout.block_size
    if addr < 0 or addr >= total:
        raise AddressRangeError(f"device address {addr:#x} outside {total:#x}")
    offset = addr & (layout.block_size - 1)
    set_id = (addr >> layout.offset_bits) & (layout.num_sets - 1)
    block = addr >> (layout.offset_bits + layout.set_bits)
    return AddressParts(set_id, block, offset)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def level_block_counts(n_keys: int, levels: int, leaf_entries: int,
                       fanout: int) -> list[int]:
    """Block count per tree level, root level first, leaves last.

    Level sizes follow from the key count: the leaf level holds leaf_entries
    keys per block, every level above tracks fanout children per block, and
    the root level absorbs whatever remains.  With levels == 1 the single
    level is the dense (linear) table itself.
    """
    if levels < 1:
        raise ConfigError(f"levels must be >= 1, got {levels}")
    counts = [_ceil_div(n_keys, leaf_entries)]
    for _ in range(levels - 1):
        counts.append(_ceil_div(counts[-1], fanout))
    return counts[::-1]


@dataclass(frozen=True)
class MetadataRegion:
    """Per-set metadata layout inside the fast memory, in slot units.

    Slots are per-set fast block indices.  The always-resident root index
    blocks occupy [intermediate_base, intermediate_base + intermediate_blocks);
    the demand-allocated blocks of all lower levels have fixed homes in
    [leaf_base, leaf_base + leaf_blocks), ordered breadth-first (upper levels
    before leaves).
    """

    intermediate_base: int
    intermediate_blocks: int
    leaf_base: int
    leaf_blocks: int
    level_counts: tuple[int, ...] = field(default=())

    @property
    def total_blocks(self) -> int:
        return self.intermediate_blocks + self.leaf_blocks

    @property
    def leaf_level_blocks(self) -> int:
        return self.level_counts[-1] if self.level_counts else self.leaf_blocks


def metadata_region(layout: HybridLayout, irt_config, n_keys: int | None = None,
                    allow_overflow: bool = False) -> MetadataRegion:
    """Reserved per-set metadata region for the remap table.

    The demand region is sized for the worst case (every key remapped).  When
    it does not fit in the fast memory, homes can no longer all be fixed; the
    caller decides whether that is tolerable (allow_overflow) or a
    configuration error.
    """
    if n_keys is None:
        n_keys = table_key_count(layout)
    counts = level_block_counts(n_keys, irt_config.levels,
                                irt_config.leaf_entries_per_block,
                                irt_config.intermediate_fanout)
    if irt_config.levels == 1:
        resident, demand = counts[0], 0
    else:
        resident, demand = counts[0], sum(counts[1:])
    nfast = layout.fast_blocks_per_set
    if resident >= nfast and not allow_overflow:
        raise ConfigError(
            f"resident index region ({resident} blocks/set) does not fit in the "
            f"fast memory ({nfast} blocks/set)"
        )
    if not allow_overflow and resident + demand > nfast:
        raise ConfigError(
            f"metadata region ({resident + demand} blocks/set) exceeds the fast "
            f"memory ({nfast} blocks/set)"
        )
    return MetadataRegion(
        intermediate_base=0,
        intermediate_blocks=resident,
        leaf_base=resident,
        leaf_blocks=demand,
        level_counts=tuple(counts),
    )


def table_key_count(layout: HybridLayout) -> int:
    """Per-set remap key space: physical keys plus one inverted key per fast slot."""
    if layout.mode == "cache":
        return layout.slow_blocks_per_set + layout.fast_blocks_per_set
    return layout.slow_blocks_per_set + 2 * layout.fast_blocks_per_set


def inverted_key_base(layout: HybridLayout) -> int:
    """First inverted-mapping key; inverted key for fast slot i is base + i."""
    if layout.mode == "cache":
        return layout.slow_blocks_per_set
    return layout.slow_blocks_per_set + layout.fast_blocks_per_set


def intermediate_bit_position(leaf_block: int, fanout: int) -> tuple[int, int]:
    """(index block, bit) tracking whether a leaf block is allocated."""
    return leaf_block // fanout, leaf_block % fanout
