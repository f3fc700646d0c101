"""End-to-end checks of the command-line workbench."""

import csv
import json
import subprocess
import sys

import pytest

from tiersim.cli import main, parse_size
from tiersim import traces

BASE = ["--requests", "5000", "--footprint", "4MiB"]


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestParseSize:
    @pytest.mark.parametrize("text,val", [
        ("256", 256), ("0x100", 256), ("4KiB", 4096), ("16MiB", 16 << 20),
        ("1GiB", 1 << 30), ("2m", 2 << 20), ("8k", 8192),
    ])
    def test_sizes(self, text, val):
        assert parse_size(text) == val


class TestSingleRun:
    @pytest.mark.parametrize("scheme", ["trimma_c", "trimma_f", "linear_cache",
                                        "linear_flat", "alloy_direct"])
    def test_presets_produce_reports(self, capsys, tmp_path, scheme):
        cfgf = tmp_path / "c.conf"
        cfgf.write_text("fast_capacity = 1MiB\ncapacity_ratio = 16\n")
        code, out, _ = run_cli(capsys, "--config", str(cfgf),
                               "--scheme", scheme, *BASE)
        assert code == 0
        rep = json.loads(out)
        assert 0.0 <= rep["serve_rate"] <= 1.0
        assert rep["determinism_hash"]

    def test_report_file(self, capsys, tmp_path):
        cfgf = tmp_path / "c.conf"
        cfgf.write_text("fast_capacity = 1MiB\n")
        out_path = tmp_path / "r.json"
        code, out, _ = run_cli(capsys, "--config", str(cfgf),
                               "--report", str(out_path), *BASE)
        assert code == 0
        rep = json.loads(out_path.read_text())
        assert "serve_rate" in rep and "serve_rate" in out

    def test_trace_files_text_binary_equivalent(self, capsys, tmp_path):
        ops, addrs = traces.uniform(2000, 2 << 20, seed=5)
        txt, bin_ = tmp_path / "t.trace", tmp_path / "t.bin"
        txt.write_text(traces.format_text(ops, addrs))
        bin_.write_bytes(traces.format_binary(ops, addrs))
        cfgf = tmp_path / "c.conf"
        cfgf.write_text("fast_capacity = 1MiB\n")
        _, out_t, _ = run_cli(capsys, "--config", str(cfgf),
                              "--trace", str(txt))
        _, out_b, _ = run_cli(capsys, "--config", str(cfgf),
                              "--trace", str(bin_))
        ha = json.loads(out_t)["determinism_hash"]
        hb = json.loads(out_b)["determinism_hash"]
        assert ha == hb


class TestErrors:
    def test_malformed_trace_cites_line(self, capsys, tmp_path):
        t = tmp_path / "bad.trace"
        t.write_text("R 0x100\nR nonsense\n")
        code, _, err = run_cli(capsys, "--trace", str(t))
        assert code == 2
        assert "2" in err  # line number

    def test_unknown_config_key(self, capsys, tmp_path):
        cfgf = tmp_path / "c.conf"
        cfgf.write_text("not_a_key = 3\n")
        code, _, err = run_cli(capsys, "--config", str(cfgf), *BASE)
        assert code == 2
        assert "not_a_key" in err

    def test_bad_config_value(self, capsys, tmp_path):
        cfgf = tmp_path / "c.conf"
        cfgf.write_text("capacity_ratio = banana\n")
        code, _, err = run_cli(capsys, "--config", str(cfgf), *BASE)
        assert code == 2 and "banana" in err

    def test_missing_trace_file(self, capsys):
        code, _, err = run_cli(capsys, "--trace", "/nonexistent.trace")
        assert code == 2 and "error" in err

    def test_invalid_geometry(self, capsys, tmp_path):
        cfgf = tmp_path / "c.conf"
        cfgf.write_text("fast_capacity = 1000000\n")  # not a power of two
        code, _, err = run_cli(capsys, "--config", str(cfgf), *BASE)
        assert code == 2


class TestSweep:
    def _sweep(self, capsys, tmp_path, axis, extra=""):
        cfgf = tmp_path / "c.conf"
        cfgf.write_text("fast_capacity = 1MiB\n" + extra)
        out_csv = tmp_path / "s.csv"
        code, _, _ = run_cli(capsys, "--config", str(cfgf), "--sweep", axis,
                             "--csv", str(out_csv), *BASE)
        assert code == 0
        with open(out_csv) as f:
            return list(csv.DictReader(f))

    def test_ratio_sweep_shape(self, capsys, tmp_path):
        rows = self._sweep(capsys, tmp_path, "capacity_ratio")
        assert [r["value"] for r in rows] == ["8", "16", "32", "64"]
        assert all(r["determinism_hash"] for r in rows)

    def test_linear_degenerates_at_high_ratio(self, capsys, tmp_path):
        rows = self._sweep(capsys, tmp_path, "capacity_ratio",
                           "scheme = linear_cache\n")
        last = rows[-1]
        assert last["value"] == "64"
        assert last["degenerate"] == "True"
        ok = [r for r in rows[:-1]]
        assert all(float(r["serve_rate"]) > 0 for r in ok)

    def test_partition_sweep(self, capsys, tmp_path):
        rows = self._sweep(capsys, tmp_path, "irc_partition")
        assert [r["value"] for r in rows] == ["0:1", "1:7", "1:3", "1:1"]
        assert float(rows[0]["rc_id_hit_rate"]) == 0.0


class TestDumpConfig:
    def test_round_trips_through_loader(self, capsys, tmp_path):
        cfgf = tmp_path / "c.conf"
        cfgf.write_text("fast_capacity = 2MiB\ncapacity_ratio = 8\n"
                        "slow_read_ns = 77\n")
        code, out, _ = run_cli(capsys, "--config", str(cfgf), "--dump-config")
        assert code == 0
        keys = dict(line.split(" = ") for line in out.strip().splitlines())
        assert keys["fast_capacity"] == str(2 << 20)
        assert float(keys["capacity_ratio"]) == 8
        assert keys["slow_read_ns"] == "77.0"
        assert keys["metadata"] == "trimma_irt"


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "tiersim.cli", "--requests",
                        "2000", "--footprint", "2MiB"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["counters"]["requests"] == 2000
