"""Trace I/O and synthetic workload generators.

Text format: one request per line, ``R <hex-address>`` or ``W <hex-address>``;
``#`` starts a comment.  Binary format: little-endian uint64 per request, bit
63 set for writes, low 63 bits the byte address.
"""

from __future__ import annotations

import io

import numpy as np

_WRITE_BIT = np.uint64(1 << 63)
_ADDR_MASK = np.uint64((1 << 63) - 1)


class TraceFormatError(ValueError):
    pass


def parse_text(stream) -> tuple[np.ndarray, np.ndarray]:
    """Returns (ops uint8, addrs int64); op 1 = write."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    ops, addrs = [], []
    for lineno, line in enumerate(stream, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or parts[0].upper() not in ("R", "W"):
            raise TraceFormatError(f"line {lineno}: expected 'R <hex>' or 'W <hex>'")
        try:
            addr = int(parts[1], 16)
        except ValueError:
            raise TraceFormatError(f"line {lineno}: bad address {parts[1]!r}") from None
        ops.append(1 if parts[0].upper() == "W" else 0)
        addrs.append(addr)
    return np.asarray(ops, dtype=np.uint8), np.asarray(addrs, dtype=np.int64)


def format_text(ops: np.ndarray, addrs: np.ndarray) -> str:
    return "".join(f"{'W' if o else 'R'} {a:x}\n" for o, a in zip(ops, addrs))


def parse_binary(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    if len(data) % 8:
        raise TraceFormatError("binary trace length is not a multiple of 8")
    words = np.frombuffer(data, dtype="<u8")
    ops = (words >> np.uint64(63)).astype(np.uint8)
    addrs = (words & _ADDR_MASK).astype(np.int64)
    return ops, addrs


def format_binary(ops: np.ndarray, addrs: np.ndarray) -> bytes:
    words = addrs.astype(np.uint64)
    words = np.where(ops.astype(bool), words | _WRITE_BIT, words)
    return words.astype("<u8").tobytes()


def load(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Load a trace file; .bin is binary, everything else is text."""
    if path.endswith(".bin"):
        with open(path, "rb") as f:
            return parse_binary(f.read())
    with open(path) as f:
        return parse_text(f)


# ----------------------------------------------------------------------
# synthetic generators: all return (ops, addrs) and are fully determined by
# the seed.  footprint/alignment are in bytes.

def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _finish(rng, n, blocks, block_size, write_frac):
    ops = (rng.random(n) < write_frac).astype(np.uint8)
    offs = rng.integers(0, block_size // 8, size=n) * 8
    return ops, blocks * block_size + offs


def uniform(n: int, footprint: int, block_size: int = 256,
            write_frac: float = 0.3, seed: int = 0):
    rng = _rng(seed)
    nblocks = max(1, footprint // block_size)
    blocks = rng.integers(0, nblocks, size=n)
    return _finish(rng, n, blocks, block_size, write_frac)


def zipf(n: int, footprint: int, alpha: float = 0.9, block_size: int = 256,
         write_frac: float = 0.3, page_blocks: int = 16, seed: int = 0):
    """Zipf-popularity blocks with page-granular spatial locality.

    Ranks map to blocks through a permutation shuffled at page granularity
    (page_blocks consecutive blocks stay together), so hot data keeps the
    spatial clustering that real allocators produce.
    """
    rng = _rng(seed)
    nblocks = max(page_blocks, footprint // block_size)
    nblocks -= nblocks % page_blocks
    # inverse-CDF sampling over the truncated zipf pmf
    pmf = 1.0 / np.power(np.arange(1, nblocks + 1, dtype=np.float64), alpha)
    cdf = np.cumsum(pmf)
    cdf /= cdf[-1]
    ranks = np.searchsorted(cdf, rng.random(n), side="right")
    pages = rng.permutation(nblocks // page_blocks)
    perm = (pages[:, None] * page_blocks
            + np.arange(page_blocks)[None, :]).ravel()
    blocks = perm[ranks]
    return _finish(rng, n, blocks, block_size, write_frac)


def stride(n: int, footprint: int, stride_bytes: int = 256,
           block_size: int = 256, write_frac: float = 0.3, seed: int = 0):
    rng = _rng(seed)
    addrs = (np.arange(n, dtype=np.int64) * stride_bytes) % max(footprint, stride_bytes)
    ops = (rng.random(n) < write_frac).astype(np.uint8)
    return ops, addrs


def hotset(n: int, footprint: int, hot_frac: float = 0.1,
           hot_prob: float = 0.9, block_size: int = 256,
           write_frac: float = 0.3, seed: int = 0):
    """hot_prob of requests land in the first hot_frac of the footprint."""
    rng = _rng(seed)
    nblocks = max(2, footprint // block_size)
    nhot = max(1, int(nblocks * hot_frac))
    hot = rng.random(n) < hot_prob
    blocks = np.where(hot, rng.integers(0, nhot, size=n),
                      rng.integers(nhot, nblocks, size=n))
    return _finish(rng, n, blocks, block_size, write_frac)


GENERATORS = {"uniform": uniform, "zipf": zipf, "stride": stride,
              "hotset": hotset}


def generate(kind: str, n: int, footprint: int, seed: int = 0, **kw):
    try:
        gen = GENERATORS[kind]
    except KeyError:
        raise TraceFormatError(f"unknown generator {kind!r}; "
                               f"choose from {sorted(GENERATORS)}") from None
    return gen(n, footprint, seed=seed, **kw)
