# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loop for the cache-mode FIFO configuration.

This mirrors engine.TieringEngine.access step for step; equivalence against
the pure-Python path is enforced by tests, so any behavioral change must be
made in both places.
"""

from libc.stdint cimport int8_t, int32_t, int64_t, uint8_t, uint32_t, uint64_t

cdef uint32_t SENTINEL = 0xFFFFFFFFu

# counter indices (must match tiersim.counters)
cdef enum:
    REQUESTS = 0
    READS = 1
    WRITES = 2
    FAST_READS = 3
    FAST_WRITES = 4
    SLOW_READS = 5
    SLOW_WRITES = 6
    RC_LOOKUPS = 7
    RC_ID_HITS = 8
    RC_NONID_HITS = 9
    RC_MISSES = 10
    RC_FILLS = 11
    RC_INVALIDATIONS = 12
    WALKS = 13
    WALK_PROBES = 14
    META_WRITES = 15
    INDEXBIT_FETCHES = 16
    ADMISSIONS = 17
    EVICTIONS = 18
    DIRTY_EVICTIONS = 19
    RECLAIMS = 20
    SWAPS = 21
    UNSWAPS = 22
    FIRST_TOUCHES = 23
    FILL_FAST_BYTES = 24
    WB_FAST_BYTES = 25


cdef class Ctx:
    # geometry / scheme scalars
    cdef int64_t nslow, nfast, resident, region_end, scan_base, n_avail, inv_base
    cdef int64_t leaf_entries, block_size, prefetch_bits, phys_cap
    cdef int table_kind           # 0 linear, 1 two-level tree
    cdef int rc_kind              # 0 none, 1 conventional, 2 identity-aware
    cdef int set_bits, offset_bits, set_mask, batch_fill
    cdef int64_t conv_index_mask, nonid_mask
    cdef int conv_ways, nonid_ways, id_ways, id_index_bits
    cdef int64_t id_phys_keys
    # engine state
    cdef int64_t[::1] counters
    cdef int8_t[:, ::1] slot_state
    cdef uint32_t[:, ::1] slot_home
    cdef uint8_t[:, ::1] slot_dirty
    cdef int64_t[:, ::1] owner
    cdef int64_t[:, ::1] home_of
    cdef int64_t[::1] fifo_cur
    cdef int64_t[::1] bits_left
    # table state
    cdef uint32_t[:, ::1] entries
    cdef uint8_t[:, ::1] leaf_alloc
    cdef int32_t[:, ::1] leaf_child
    cdef int64_t[::1] allocated_per_set
    # remap-cache state (dummy 1x1 arrays when unused)
    cdef int64_t[:, ::1] conv_tags
    cdef uint32_t[:, ::1] conv_vals
    cdef int64_t[::1] conv_ptr
    cdef int64_t[:, ::1] nonid_tags
    cdef uint32_t[:, ::1] nonid_vals
    cdef int64_t[::1] nonid_ptr
    cdef int64_t[:, ::1] id_tags
    cdef uint32_t[:, ::1] id_vals
    cdef int64_t[::1] id_ptr


# ----------------------------------------------------------------- caches

cdef inline int64_t id_index(int64_t sb, int bits) noexcept:
    return (sb ^ (sb >> bits)) & ((1 << bits) - 1)


cdef inline int cache_find(int64_t[:, ::1] tags, int64_t idx, int64_t tag,
                           int ways) noexcept:
    cdef int w
    for w in range(ways):
        if tags[idx, w] == tag:
            return w
    return -1


cdef inline void cache_insert(int64_t[:, ::1] tags, uint32_t[:, ::1] vals,
                              int64_t[::1] ptr, int64_t idx, int64_t tag,
                              uint32_t val, int ways) noexcept:
    cdef int w
    if ways == 0:
        return
    w = <int>ptr[idx]
    tags[idx, w] = tag
    vals[idx, w] = val
    ptr[idx] = (w + 1) % ways


cdef inline int cache_invalidate(int64_t[:, ::1] tags, int64_t idx,
                                 int64_t tag, int ways) noexcept:
    cdef int w = cache_find(tags, idx, tag, ways)
    if w < 0:
        return 0
    tags[idx, w] = -1
    return 1


# -------------------------------------------------------------- the table

cdef inline int table_lookup(Ctx c, int s, int64_t k, int64_t *dev) noexcept:
    """Returns 1 for identity; fills *dev either way."""
    cdef int64_t leaf
    cdef uint32_t e
    if c.table_kind == 1:
        leaf = k // c.leaf_entries
        if not c.leaf_alloc[s, leaf]:
            dev[0] = k
            return 1
    e = c.entries[s, k]
    if e == SENTINEL:
        dev[0] = k
        return 1
    dev[0] = <int64_t>e
    return 0


cdef int64_t peek_home(Ctx c, int s, int64_t d) noexcept:
    cdef int64_t p = c.resident + d % c.n_avail
    while c.owner[s, p] >= 0:
        p += 1
        if p >= c.nfast:
            p = c.resident
    return p


cdef void claim_home(Ctx c, int s, int64_t d) noexcept:
    cdef int64_t p = peek_home(c, s, d)
    if c.slot_state[s, p] == 1:     # DATA
        c.counters[RECLAIMS] += 1
        evict_cached(c, s, p)
    c.slot_state[s, p] = 2          # META
    c.owner[s, p] = d
    c.home_of[s, d] = p


cdef void table_insert(Ctx c, int s, int64_t k, uint32_t val) noexcept:
    cdef int64_t leaf
    cdef int64_t newly = 0
    if c.table_kind == 1:
        leaf = k // c.leaf_entries
        if not c.leaf_alloc[s, leaf]:
            c.leaf_alloc[s, leaf] = 1
            newly = 1
            c.allocated_per_set[s] += 1
        if c.entries[s, k] == SENTINEL:
            c.leaf_child[s, leaf] += 1
    c.entries[s, k] = val
    c.counters[META_WRITES] += 1 + newly


cdef void table_remove(Ctx c, int s, int64_t k) noexcept:
    cdef int64_t leaf, freed = 0
    c.entries[s, k] = SENTINEL
    if c.table_kind == 1:
        leaf = k // c.leaf_entries
        c.leaf_child[s, leaf] -= 1
        if c.leaf_child[s, leaf] == 0:
            c.leaf_alloc[s, leaf] = 0
            freed = 1
            c.allocated_per_set[s] -= 1
            # release the freed block's fast slot
            c.slot_state[s, c.home_of[s, leaf]] = 0
            c.owner[s, c.home_of[s, leaf]] = -1
            c.home_of[s, leaf] = -1
    c.counters[META_WRITES] += 1 + freed


cdef void allocate_for(Ctx c, int s, int64_t k) noexcept:
    cdef int64_t leaf
    if c.table_kind != 1:
        return
    leaf = k // c.leaf_entries
    if not c.leaf_alloc[s, leaf] and c.home_of[s, leaf] < 0:
        claim_home(c, s, leaf)


# ------------------------------------------------------------ remap cache

cdef int rc_lookup(Ctx c, int s, int64_t k, int64_t *dev) noexcept:
    """0 miss, 1 identity hit, 2 remap hit."""
    cdef int64_t g, sb, idx
    cdef int w
    if c.rc_kind == 1:
        g = (k << c.set_bits) | s
        idx = g & c.conv_index_mask
        w = cache_find(c.conv_tags, idx, g, c.conv_ways)
        if w < 0:
            return 0
        if c.conv_vals[idx, w] == <uint32_t>k:
            dev[0] = k
            return 1
        dev[0] = <int64_t>c.conv_vals[idx, w]
        return 2
    sb = ((k >> 5) << c.set_bits) | s
    idx = id_index(sb, c.id_index_bits)
    w = cache_find(c.id_tags, idx, sb, c.id_ways)
    if w >= 0 and (c.id_vals[idx, w] >> (k & 31)) & 1:
        dev[0] = k
        return 1
    g = (k << c.set_bits) | s
    idx = g & c.nonid_mask
    w = cache_find(c.nonid_tags, idx, g, c.nonid_ways)
    if w >= 0:
        dev[0] = <int64_t>c.nonid_vals[idx, w]
        return 2
    return 0


cdef void rc_fill(Ctx c, int s, int64_t k, int identity, int64_t dev) noexcept:
    cdef int64_t g, sb, idx, base, leaf_first, key
    cdef uint32_t mask
    cdef int w, i, leaf_allocated
    if c.rc_kind == 1:
        g = (k << c.set_bits) | s
        cache_insert(c.conv_tags, c.conv_vals, c.conv_ptr,
                     g & c.conv_index_mask, g,
                     <uint32_t>(k if identity else dev), c.conv_ways)
        return
    if not identity:
        g = (k << c.set_bits) | s
        cache_insert(c.nonid_tags, c.nonid_vals, c.nonid_ptr,
                     g & c.nonid_mask, g, <uint32_t>dev, c.nonid_ways)
        return
    sb = ((k >> 5) << c.set_bits) | s
    idx = id_index(sb, c.id_index_bits)
    mask = <uint32_t>1 << (k & 31)
    if c.batch_fill:
        base = k & ~<int64_t>31
        leaf_first = (k // c.leaf_entries) * c.leaf_entries
        leaf_allocated = 1
        if c.table_kind == 1 and not c.leaf_alloc[s, k // c.leaf_entries]:
            leaf_allocated = 0
        for i in range(32):
            key = base + i
            if key >= c.id_phys_keys:
                break
            if not leaf_allocated or c.entries[s, key] == SENTINEL:
                mask |= <uint32_t>1 << i
    w = cache_find(c.id_tags, idx, sb, c.id_ways)
    if w >= 0:
        c.id_vals[idx, w] |= mask
    else:
        cache_insert(c.id_tags, c.id_vals, c.id_ptr, idx, sb, mask, c.id_ways)


cdef void rc_update(Ctx c, int s, int64_t k) noexcept:
    cdef int64_t g, sb, idx
    cdef int w, hit = 0
    cdef uint32_t bit
    if c.rc_kind == 0:
        return
    g = (k << c.set_bits) | s
    if c.rc_kind == 1:
        if cache_invalidate(c.conv_tags, g & c.conv_index_mask, g, c.conv_ways):
            c.counters[RC_INVALIDATIONS] += 1
        return
    hit = cache_invalidate(c.nonid_tags, g & c.nonid_mask, g, c.nonid_ways)
    sb = ((k >> 5) << c.set_bits) | s
    idx = id_index(sb, c.id_index_bits)
    w = cache_find(c.id_tags, idx, sb, c.id_ways)
    if w >= 0:
        bit = <uint32_t>1 << (k & 31)
        if c.id_vals[idx, w] & bit:
            c.id_vals[idx, w] &= ~bit
            hit = 1
    if hit:
        c.counters[RC_INVALIDATIONS] += 1


# --------------------------------------------------------------- placement

cdef void evict_cached(Ctx c, int s, int64_t slot) noexcept:
    cdef int64_t v = <int64_t>c.slot_home[s, slot]
    c.counters[EVICTIONS] += 1
    if c.slot_dirty[s, slot]:
        c.counters[DIRTY_EVICTIONS] += 1
        c.counters[WB_FAST_BYTES] += c.block_size
    c.slot_state[s, slot] = 0
    c.slot_home[s, slot] = SENTINEL
    c.slot_dirty[s, slot] = 0
    table_remove(c, s, v)
    table_remove(c, s, c.inv_base + slot)
    rc_update(c, s, v)


cdef inline void consume_index_bit(Ctx c, int s, int64_t slot) noexcept:
    if c.scan_base <= slot < c.region_end:
        if c.bits_left[s] == 0:
            c.counters[INDEXBIT_FETCHES] += 1
            c.bits_left[s] = c.prefetch_bits
        c.bits_left[s] -= 1


cdef int64_t next_candidate(Ctx c, int s) noexcept:
    cdef int64_t cur = c.fifo_cur[s]
    cdef int64_t cand
    while True:
        if cur >= c.nfast:
            cur = c.scan_base
        cand = cur
        cur += 1
        consume_index_bit(c, s, cand)
        if c.slot_state[s, cand] != 2:      # skip META
            c.fifo_cur[s] = cur
            return cand


cdef int victim_conflicts(Ctx c, int s, int64_t k, int64_t slot) noexcept:
    cdef int64_t leaf, i, key
    if c.table_kind != 1:
        return 0
    for i in range(2):
        key = k if i == 0 else c.inv_base + slot
        leaf = key // c.leaf_entries
        if not c.leaf_alloc[s, leaf] and peek_home(c, s, leaf) == slot:
            return 1
    return 0


cdef void admit_cached(Ctx c, int s, int64_t k, int dirty) noexcept:
    cdef int64_t slot, inv
    while True:
        slot = next_candidate(c, s)
        if victim_conflicts(c, s, k, slot):
            continue
        if c.slot_state[s, slot] == 1:      # DATA
            evict_cached(c, s, slot)
        inv = c.inv_base + slot
        allocate_for(c, s, k)
        allocate_for(c, s, inv)
        if c.slot_state[s, slot] == 2:      # a home probe took our slot; retry
            continue
        break
    table_insert(c, s, k, <uint32_t>(c.nslow + slot))
    table_insert(c, s, inv, <uint32_t>k)
    c.slot_state[s, slot] = 1
    c.slot_home[s, slot] = <uint32_t>k
    c.slot_dirty[s, slot] = 1 if dirty else 0
    rc_update(c, s, k)
    c.counters[ADMISSIONS] += 1
    c.counters[FILL_FAST_BYTES] += c.block_size


# ---------------------------------------------------------------- the loop

def run_batch(uint8_t[::1] ops, int64_t[::1] addrs,
              int64_t[::1] counters,
              int8_t[:, ::1] slot_state, uint32_t[:, ::1] slot_home,
              uint8_t[:, ::1] slot_dirty, int64_t[:, ::1] owner,
              int64_t[:, ::1] home_of, int64_t[::1] fifo_cur,
              int64_t[::1] bits_left,
              uint32_t[:, ::1] entries, uint8_t[:, ::1] leaf_alloc,
              int32_t[:, ::1] leaf_child, int64_t[::1] allocated_per_set,
              int64_t[:, ::1] conv_tags, uint32_t[:, ::1] conv_vals,
              int64_t[::1] conv_ptr,
              int64_t[:, ::1] nonid_tags, uint32_t[:, ::1] nonid_vals,
              int64_t[::1] nonid_ptr,
              int64_t[:, ::1] id_tags, uint32_t[:, ::1] id_vals,
              int64_t[::1] id_ptr,
              dict scalars):
    cdef Ctx c = Ctx()
    c.counters = counters
    c.slot_state = slot_state
    c.slot_home = slot_home
    c.slot_dirty = slot_dirty
    c.owner = owner
    c.home_of = home_of
    c.fifo_cur = fifo_cur
    c.bits_left = bits_left
    c.entries = entries
    c.leaf_alloc = leaf_alloc
    c.leaf_child = leaf_child
    c.allocated_per_set = allocated_per_set
    c.conv_tags = conv_tags
    c.conv_vals = conv_vals
    c.conv_ptr = conv_ptr
    c.nonid_tags = nonid_tags
    c.nonid_vals = nonid_vals
    c.nonid_ptr = nonid_ptr
    c.id_tags = id_tags
    c.id_vals = id_vals
    c.id_ptr = id_ptr
    c.nslow = scalars["nslow"]
    c.nfast = scalars["nfast"]
    c.resident = scalars["resident"]
    c.region_end = scalars["region_end"]
    c.scan_base = scalars["scan_base"]
    c.n_avail = scalars["n_avail"]
    c.inv_base = scalars["inv_base"]
    c.leaf_entries = scalars["leaf_entries"]
    c.block_size = scalars["block_size"]
    c.prefetch_bits = scalars["prefetch_bits"]
    c.phys_cap = scalars["phys_cap"]
    c.table_kind = scalars["table_kind"]
    c.rc_kind = scalars["rc_kind"]
    c.set_bits = scalars["set_bits"]
    c.offset_bits = scalars["offset_bits"]
    c.set_mask = scalars["set_mask"]
    c.batch_fill = scalars["batch_fill"]
    c.conv_index_mask = scalars["conv_index_mask"]
    c.nonid_mask = scalars["nonid_mask"]
    c.conv_ways = scalars["conv_ways"]
    c.nonid_ways = scalars["nonid_ways"]
    c.id_ways = scalars["id_ways"]
    c.id_index_bits = scalars["id_index_bits"]
    c.id_phys_keys = scalars["id_phys_keys"]

    cdef Py_ssize_t i, n = ops.shape[0]
    cdef int64_t addr, k, dev, slot
    cdef int op, s, outcome, identity
    for i in range(n):
        op = ops[i]
        addr = addrs[i]
        if addr < 0 or addr >= c.phys_cap:
            raise ValueError(f"address {addr:#x} outside physical capacity")
        c.counters[REQUESTS] += 1
        c.counters[WRITES if op else READS] += 1
        s = <int>((addr >> c.offset_bits) & c.set_mask)
        k = addr >> (c.offset_bits + c.set_bits)

        if c.rc_kind != 0:
            c.counters[RC_LOOKUPS] += 1
            outcome = rc_lookup(c, s, k, &dev)
            if outcome == 1:
                c.counters[RC_ID_HITS] += 1
                identity = 1
            elif outcome == 2:
                c.counters[RC_NONID_HITS] += 1
                identity = 0
            else:
                c.counters[RC_MISSES] += 1
        else:
            outcome = 0
        if c.rc_kind == 0 or outcome == 0:
            identity = table_lookup(c, s, k, &dev)
            c.counters[WALKS] += 1
            c.counters[WALK_PROBES] += 2 if c.table_kind == 1 else 1
            if c.rc_kind != 0:
                rc_fill(c, s, k, identity, dev)
                c.counters[RC_FILLS] += 1

        if dev >= c.nslow:
            c.counters[FAST_WRITES if op else FAST_READS] += 1
            slot = dev - c.nslow
            if op and c.slot_state[s, slot] == 1:
                c.slot_dirty[s, slot] = 1
            continue
        c.counters[SLOW_WRITES if op else SLOW_READS] += 1
        if c.scan_base < c.nfast:
            admit_cached(c, s, k, op)
