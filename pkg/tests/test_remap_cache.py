"""Remap-cache capacity arithmetic, hash quality, batch fill, and staleness."""

import numpy as np
import pytest

from tiersim.geometry import ConfigError
from tiersim.remap_cache import (IDENTITY_HIT, MISS, REMAP_HIT,
                                 ConventionalRemapCache,
                                 IdentityAwareRemapCache, RemapCacheConfig,
                                 id_index)


class TestCapacityMath:
    def test_default_split_entry_counts(self):
        cfg = RemapCacheConfig()
        assert cfg.nonid_sets * cfg.nonid_ways == 12288
        assert cfg.nonid_sets * cfg.nonid_ways * 4 == 48 * 1024
        # each IdCache line asserts identity for 32 blocks
        lines = cfg.id_sets * cfg.id_ways
        assert lines * cfg.bits_per_line == 131072
        assert lines * 4 == 16 * 1024

    def test_split_fits_conventional_budget(self):
        cfg = RemapCacheConfig()
        assert cfg.conv_capacity_bytes == 64 * 1024
        assert cfg.irc_capacity_bytes <= cfg.conv_capacity_bytes
        assert cfg.irc_capacity_bytes == 64 * 1024

    @pytest.mark.parametrize("frac,id_sets,nonid_ways", [
        (0.0, 1, 8), (1 / 8, 128, 7), (1 / 4, 256, 6), (1 / 2, 512, 4),
    ])
    def test_partition_sweep_points(self, frac, id_sets, nonid_ways):
        cfg = RemapCacheConfig.with_partition(frac)
        assert cfg.nonid_ways == nonid_ways
        if frac:
            assert cfg.id_sets == id_sets
        assert cfg.irc_capacity_bytes <= 64 * 1024

    def test_non_pow2_sets_rejected(self):
        with pytest.raises(ConfigError):
            RemapCacheConfig(nonid_sets=1000)


class TestIdIndexHash:
    def test_exhaustive_balance_small(self):
        """XOR-fold over 2^16 consecutive super-blocks spreads exactly."""
        bits = 8
        counts = np.zeros(1 << bits, dtype=np.int64)
        for sb in range(1 << 16):
            counts[id_index(sb, bits)] += 1
        assert counts.min() == counts.max() == (1 << 16) >> bits

    def test_chi_square_on_strided_population(self):
        bits = 8
        rng = np.random.Generator(np.random.PCG64(3))
        sbs = rng.integers(0, 1 << 30, size=200_000)
        counts = np.bincount([id_index(int(x), bits) for x in sbs],
                             minlength=1 << bits)
        expected = len(sbs) / (1 << bits)
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        # 255 dof; 99.9th percentile is ~330
        assert chi2 < 330


def make_irc(**kw):
    kw.setdefault("physical_keys", 1 << 20)
    return IdentityAwareRemapCache(RemapCacheConfig(), set_bits=2, **kw)


def leaf_snap(values, allocated=True):
    arr = np.full(64, 0xFFFFFFFF, dtype=np.uint32)
    for i, v in values.items():
        arr[i] = v
    return (allocated, arr)


class TestConventional:
    def test_miss_fill_hit(self):
        c = ConventionalRemapCache(RemapCacheConfig(), set_bits=2)
        assert c.lookup(1, 500).outcome == MISS
        c.fill(1, 500, False, 12345)
        r = c.lookup(1, 500)
        assert r.outcome == REMAP_HIT and r.device_block == 12345

    def test_identity_entries_occupy_normal_slots(self):
        c = ConventionalRemapCache(RemapCacheConfig(), set_bits=2)
        c.fill(0, 7, True, 7)
        assert c.lookup(0, 7).outcome == IDENTITY_HIT

    def test_update_invalidates(self):
        c = ConventionalRemapCache(RemapCacheConfig(), set_bits=2)
        c.fill(0, 9, False, 55)
        c.update(0, 9)
        assert c.lookup(0, 9).outcome == MISS
        assert c.stats["invalidations"] == 1

    def test_fifo_eviction_within_set(self):
        cfg = RemapCacheConfig(conv_sets=2, conv_ways=2)
        c = ConventionalRemapCache(cfg, set_bits=0)
        for k in (0, 2, 4):        # all map to index 0
            c.fill(0, k, False, k + 100)
        assert c.lookup(0, 0).outcome == MISS      # oldest evicted
        assert c.lookup(0, 2).outcome == REMAP_HIT


class TestIdentityAware:
    def test_batch_fill_covers_super_block(self):
        irc = make_irc()
        # leaf for keys [0, 64); key 3 identity, key 5 remapped
        snap = leaf_snap({5: 999})
        irc.fill(0, 3, True, 3, snap)
        for k in (0, 3, 31):
            assert irc.lookup(0, k).outcome == IDENTITY_HIT
        assert irc.lookup(0, 5).outcome == MISS      # remapped: bit stays 0
        assert irc.lookup(0, 37).outcome == MISS     # other super-block

    def test_unallocated_leaf_sets_all_bits(self):
        irc = make_irc()
        irc.fill(2, 64, True, 64, (False, np.full(64, 0xFFFFFFFF, np.uint32)))
        for k in range(64, 96):
            assert irc.lookup(2, k).outcome == IDENTITY_HIT

    def test_batch_fill_disabled_sets_single_bit(self):
        irc = make_irc(batch_fill=False)
        irc.fill(0, 3, True, 3, leaf_snap({}))
        assert irc.lookup(0, 3).outcome == IDENTITY_HIT
        assert irc.lookup(0, 4).outcome == MISS

    def test_physical_bound_limits_mask(self):
        irc = IdentityAwareRemapCache(RemapCacheConfig(), set_bits=0,
                                      physical_keys=40)
        irc.fill(0, 33, True, 33, leaf_snap({}))
        assert irc.lookup(0, 39).outcome == IDENTITY_HIT
        assert irc.lookup(0, 41).outcome == MISS

    def test_no_stale_identity_after_update(self):
        irc = make_irc()
        irc.fill(0, 3, True, 3, leaf_snap({}))
        assert irc.lookup(0, 3).outcome == IDENTITY_HIT
        irc.update(0, 3)        # the mapping just changed
        assert irc.lookup(0, 3).outcome == MISS
        # neighbors in the same line keep their assertions
        assert irc.lookup(0, 4).outcome == IDENTITY_HIT
        assert irc.stats["invalidations"] == 1

    def test_non_identity_goes_to_pointer_store(self):
        irc = make_irc()
        irc.fill(1, 70, False, 4242, leaf_snap({6: 4242}))
        r = irc.lookup(1, 70)
        assert r.outcome == REMAP_HIT and r.device_block == 4242
        irc.update(1, 70)
        assert irc.lookup(1, 70).outcome == MISS

    def test_super_blocks_do_not_mix_sets(self):
        irc = make_irc()
        irc.fill(0, 3, True, 3, leaf_snap({}))
        assert irc.lookup(1, 3).outcome == MISS

    def test_stats_snapshot(self):
        irc = make_irc()
        irc.lookup(0, 1)
        irc.fill(0, 1, True, 1, leaf_snap({}))
        irc.lookup(0, 1)
        assert irc.stats["misses"] == 1
        assert irc.stats["id_hits"] == 1
        assert irc.stats["fills"] == 1
