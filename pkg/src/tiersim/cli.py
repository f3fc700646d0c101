"""Command-line workbench: single runs, scheme presets, and parameter sweeps.

Config files are plain ``key = value`` lines (# comments); sizes accept
KiB/MiB/GiB suffixes.  ``--sweep`` varies one axis and writes a CSV row per
point.
"""

from __future__ import annotations

import argparse
import csv
import sys

from .engine import PRESETS, SchemeSelector
from .geometry import ConfigError
from .remap_cache import RemapCacheConfig
from .sim import GiB, KiB, MiB, SimConfig, TimingParams, run_trace
from . import traces

_SUFFIXES = {"kib": KiB, "mib": MiB, "gib": GiB, "k": KiB, "m": MiB, "g": GiB}


def parse_size(text: str) -> int:
    t = text.strip().lower().replace("_", "")
    for suf, mult in _SUFFIXES.items():
        if t.endswith(suf):
            return int(float(t[: -len(suf)]) * mult)
    return int(t, 0)


_BOOL = {"true": True, "1": True, "yes": True,
         "false": False, "0": False, "no": False}

# config-file keys -> (SimConfig attribute, parser)
_KEYS = {
    "fast_capacity": ("fast_capacity", parse_size),
    "slow_capacity": ("slow_capacity", parse_size),
    "capacity_ratio": ("capacity_ratio", int),
    "block_size": ("block_size", parse_size),
    "num_sets": ("num_sets", int),
    "irt_levels": ("irt_levels", int),
    "replacement": ("replacement", str),
    "prefetch_bits": ("prefetch_bits", int),
    "batch_fill": ("batch_fill", lambda v: _BOOL[v.lower()]),
    "include_metadata_in_bloat": ("include_metadata_in_bloat",
                                  lambda v: _BOOL[v.lower()]),
    "seed": ("seed", int),
    "scheme": ("scheme", lambda v: PRESETS[v]),
}


def load_config(path: str, cfg: SimConfig) -> SimConfig:
    timing = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key in _KEYS:
                attr, conv = _KEYS[key]
                try:
                    setattr(cfg, attr, conv(val))
                except (ValueError, KeyError):
                    raise ConfigError(f"{path}:{lineno}: bad value "
                                      f"{val!r} for {key}") from None
            elif key in ("fast_read_ns", "fast_write_ns", "slow_read_ns",
                         "slow_write_ns", "core_ghz", "rc_hit_cycles"):
                timing[key] = float(val) if key != "rc_hit_cycles" else int(val)
            elif key == "irc_partition":
                cfg.rc = _partition(val)
            else:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    if timing:
        base = {k: getattr(cfg.timing, k) for k in
                ("fast_read_ns", "fast_write_ns", "slow_read_ns",
                 "slow_write_ns", "core_ghz", "rc_hit_cycles")}
        base.update(timing)
        cfg.timing = TimingParams(**base)
    return cfg


def _partition(spec: str) -> RemapCacheConfig:
    """'1:3' means 1 part IdCache to 3 parts NonIdCache of the budget."""
    try:
        a, b = (int(x) for x in spec.split(":"))
        return RemapCacheConfig.with_partition(a / (a + b))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad partition {spec!r}; expected e.g. 1:3") from None


def _get_trace(args, cfg: SimConfig):
    if args.trace:
        return traces.load(args.trace)
    footprint = args.footprint or cfg.fast_capacity * 8
    return traces.generate(args.synthetic, args.requests, footprint,
                           seed=args.seed)


def _dump_config(cfg: SimConfig):
    lay = cfg.layout()
    for k in ("fast_capacity", "slow_capacity", "block_size", "num_sets"):
        print(f"{k} = {getattr(lay, k)}")
    print(f"mode = {lay.mode}")
    print(f"capacity_ratio = {lay.capacity_ratio}")
    for k in ("irt_levels", "replacement", "prefetch_bits", "batch_fill",
              "include_metadata_in_bloat", "seed"):
        print(f"{k} = {getattr(cfg, k)}")
    for k in ("fast_read_ns", "fast_write_ns", "slow_read_ns",
              "slow_write_ns", "core_ghz", "rc_hit_cycles"):
        print(f"{k} = {getattr(cfg.timing, k)}")
    sch = cfg.scheme
    print(f"metadata = {sch.metadata}")
    print(f"rcache = {sch.rcache}")
    print(f"placement_mode = {sch.placement_mode}")
    print(f"lend_saved_space = {sch.lend_saved_space}")


SWEEP_AXES = {
    "capacity_ratio": [8, 16, 32, 64],
    "block_size": [64, 128, 256, 512],
    "irt_levels": [2, 3],
    "irc_partition": ["0:1", "1:7", "1:3", "1:1"],
}

_CSV_FIELDS = ["axis", "value", "scheme", "serve_rate", "bloat_factor",
               "rc_hit_rate", "rc_id_hit_rate", "metadata_fraction_of_fast",
               "amat_total_ns", "degenerate", "determinism_hash"]


def _apply_axis(cfg: SimConfig, axis: str, value):
    if axis == "irc_partition":
        cfg.rc = _partition(value)
    else:
        setattr(cfg, axis, value)


def run_sweep(cfg: SimConfig, axis: str, args) -> list[dict]:
    rows = []
    for value in SWEEP_AXES[axis]:
        point = SimConfig(**{**cfg.__dict__})
        _apply_axis(point, axis, value)
        tag = (f"{point.scheme.metadata}/{point.scheme.rcache}"
               f"/{point.scheme.placement_mode}")
        try:
            ops, addrs = _get_trace(args, point)
            rep = run_trace(point, ops, addrs, force_python=args.force_python)
        except ConfigError:
            # the scheme cannot be configured at this point (e.g. the table
            # no longer fits); report it as degenerate rather than aborting
            rows.append({"axis": axis, "value": value, "scheme": tag,
                         **dict.fromkeys(_CSV_FIELDS[3:9], ""),
                         "degenerate": True, "determinism_hash": ""})
            continue
        rows.append({"axis": axis, "value": value, "scheme": tag,
                     **{k: getattr(rep, k) for k in _CSV_FIELDS[3:]}})
    return rows


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tiersim",
        description="Trace-driven simulator of a two-tier main memory with "
                    "remap-table metadata management.")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--scheme", choices=sorted(PRESETS),
                   help="scheme preset (overrides the config file)")
    p.add_argument("--trace", help="trace file (.bin binary, else text)")
    p.add_argument("--synthetic", default="zipf",
                   choices=sorted(traces.GENERATORS),
                   help="generator used when no trace file is given")
    p.add_argument("--requests", type=int, default=1_000_000,
                   help="synthetic trace length")
    p.add_argument("--footprint", type=parse_size, default=None,
                   help="synthetic footprint in bytes (default 8x fast)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--sweep", choices=sorted(SWEEP_AXES),
                   help="sweep one axis and emit CSV")
    p.add_argument("--csv", help="sweep CSV output path (default stdout)")
    p.add_argument("--strict", action="store_true",
                   help="fail on flat-mode accesses that were never allocated")
    p.add_argument("--force-python", action="store_true",
                   help="skip the compiled kernel")
    p.add_argument("--dump-config", action="store_true",
                   help="print the resolved configuration and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = SimConfig()
    try:
        if args.config:
            load_config(args.config, cfg)
        if args.scheme:
            cfg.scheme = PRESETS[args.scheme]
        cfg.seed = args.seed
        cfg.strict = args.strict
        if args.dump_config:
            _dump_config(cfg)
            return 0
        if args.sweep:
            rows = run_sweep(cfg, args.sweep, args)
            out = open(args.csv, "w", newline="") if args.csv else sys.stdout
            try:
                w = csv.DictWriter(out, fieldnames=_CSV_FIELDS)
                w.writeheader()
                w.writerows(rows)
            finally:
                if args.csv:
                    out.close()
            return 0
        ops, addrs = _get_trace(args, cfg)
        rep = run_trace(cfg, ops, addrs, force_python=args.force_python)
        text = rep.to_json()
        if args.report:
            with open(args.report, "w") as f:
                f.write(text + "\n")
            print(f"serve_rate={rep.serve_rate:.4f} "
                  f"bloat={rep.bloat_factor:.4f} "
                  f"amat={rep.amat_total_ns:.2f}ns -> {args.report}")
        else:
            print(text)
        return 0
    except (ConfigError, traces.TraceFormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
