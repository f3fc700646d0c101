"""Counter vector layout shared by the Python engine and the compiled kernel.

The kernel mirrors these indices as C constants; keep the order stable.
Latency is derived from these counters after the run, so the hot loop only
does integer accounting.
"""

REQUESTS = 0
READS = 1
WRITES = 2
FAST_READS = 3          # demand requests served by the fast tier
FAST_WRITES = 4
SLOW_READS = 5
SLOW_WRITES = 6
RC_LOOKUPS = 7
RC_ID_HITS = 8          # IdCache hits (iRC) / identity-valued hits (conventional)
RC_NONID_HITS = 9       # NonIdCache hits (iRC) / non-identity hits (conventional)
RC_MISSES = 10
RC_FILLS = 11
RC_INVALIDATIONS = 12
WALKS = 13              # off-chip table resolutions
WALK_PROBES = 14        # individual level probes issued (traffic)
META_WRITES = 15        # table update writes (leaf entries + index bits)
INDEXBIT_FETCHES = 16   # replacement index-bit buffer refills
ADMISSIONS = 17
EVICTIONS = 18
DIRTY_EVICTIONS = 19
RECLAIMS = 20           # data blocks displaced by metadata allocation
SWAPS = 21              # flat-mode swaps installed
UNSWAPS = 22            # flat-mode swaps restored
FIRST_TOUCHES = 23
FILL_FAST_BYTES = 24    # bytes written into the fast tier by migration
WB_FAST_BYTES = 25      # bytes read out of the fast tier by eviction/swap-out

N_COUNTERS = 26

NAMES = [
    "requests", "reads", "writes",
    "fast_reads", "fast_writes", "slow_reads", "slow_writes",
    "rc_lookups", "rc_id_hits", "rc_nonid_hits", "rc_misses",
    "rc_fills", "rc_invalidations",
    "walks", "walk_probes", "meta_writes", "indexbit_fetches",
    "admissions", "evictions", "dirty_evictions", "reclaims",
    "swaps", "unswaps", "first_touches",
    "fill_fast_bytes", "wb_fast_bytes",
]
