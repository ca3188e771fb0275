import csv

import numpy as np
import pytest

from flipsim import io
from flipsim.cli import (EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, RunConfig,
                         config_from_sources, main)
from flipsim.errors import SnapshotFormatError
from flipsim.particles import ParticleSet


def run_cli(*argv):
    return main(list(argv))


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestSnapshotFormat:
    def make_set(self, n=10, seed=0):
        rng = np.random.default_rng(seed)
        arrs = [rng.random(n) for _ in range(6)]
        return ParticleSet(*arrs)

    def test_round_trip_bit_exact_after_quantization(self, tmp_path):
        path = tmp_path / "a.bin"
        io.write_snapshot(path, self.make_set())
        first = io.read_snapshot(path)
        io.write_snapshot(path, first)
        second = io.read_snapshot(path)
        for a, b in zip(first.arrays(), second.arrays()):
            assert np.array_equal(a, b)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "b.bin"
        io.write_snapshot(path, self.make_set(3))
        raw = path.read_bytes()
        assert raw[:4] == b"FLIP"
        assert int.from_bytes(raw[4:8], "little") == 1
        assert int.from_bytes(raw[8:16], "little") == 3
        assert len(raw) == 16 + 6 * 4 * 3

    def test_bad_magic_names_offset(self, tmp_path):
        path = tmp_path / "c.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(SnapshotFormatError) as exc:
            io.read_snapshot(path)
        assert exc.value.offset == 0

    def test_truncated_body_rejected(self, tmp_path):
        path = tmp_path / "d.bin"
        io.write_snapshot(path, self.make_set(5))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(SnapshotFormatError):
            io.read_snapshot(path)

    def test_empty_set_round_trip(self, tmp_path):
        path = tmp_path / "e.bin"
        io.write_snapshot(path, ParticleSet.empty())
        assert io.read_snapshot(path).count == 0


class TestConfig:
    def test_parse_and_round_trip(self):
        text = "scene = water-drop\nres = 16\ntol = 1e-7\n# comment\nflip=0.9\n"
        values = io.parse_config(text)
        cfg = config_from_sources(values, {})
        assert cfg.scene.name == "water-drop"
        assert cfg.scene.res == 16
        assert cfg.scene.tol == 1e-7
        assert cfg.scene.flip_fraction == 0.9
        # serialize -> parse -> build again: semantically identical
        text2 = io.format_config(cfg.config_dict())
        cfg2 = config_from_sources(io.parse_config(text2), {})
        assert cfg2.config_dict() == cfg.config_dict()

    def test_overrides_win(self):
        cfg = config_from_sources({"res": "16"}, {"res": 24})
        assert cfg.scene.res == 24

    def test_unknown_key_rejected(self):
        from flipsim.errors import ConfigError
        with pytest.raises(ConfigError):
            config_from_sources({"wibble": "1"}, {})

    def test_bad_value_names_field(self):
        from flipsim.errors import ConfigError
        with pytest.raises(ConfigError) as exc:
            config_from_sources({"tol": "fast"}, {})
        assert "tol" in str(exc.value)


class TestRunCommand:
    def test_zero_steps_initial_snapshot_only(self, tmp_path):
        out = tmp_path / "run0"
        code = run_cli("run", "--scene", "dam-break", "--res", "10",
                       "--steps", "0", "--out", str(out), "--seed", "1")
        assert code == EXIT_OK
        snaps = sorted(out.glob("snap_*.bin"))
        assert [s.name for s in snaps] == ["snap_000000.bin"]
        assert (out / "timings.csv").exists()
        assert io.read_snapshot(snaps[0]).count > 0

    def test_short_run_outputs(self, tmp_path):
        out = tmp_path / "run1"
        code = run_cli("run", "--scene", "dam-break", "--res", "10",
                       "--steps", "3", "--out", str(out), "--seed", "1",
                       "--snapshot-every", "2")
        assert code == EXIT_OK
        rows = read_csv(out / "timings.csv")
        assert len(rows) == 4  # header + 3 steps
        assert rows[0][0] == "step" and "project_ms" in rows[0]
        erows = read_csv(out / "energy.csv")
        assert len(erows) == 5  # header + step 0 + 3 steps
        names = {p.name for p in out.glob("snap_*.bin")}
        assert names == {"snap_000000.bin", "snap_000002.bin",
                         "snap_000003.bin"}

    def test_determinism_csv_identical_except_wallclock(self, tmp_path):
        outs = []
        for run in range(2):
            out = tmp_path / f"det{run}"
            assert run_cli("run", "--res", "10", "--steps", "4", "--seed",
                           "9", "--out", str(out)) == EXIT_OK
            outs.append(out)
        a = read_csv(outs[0] / "timings.csv")
        b = read_csv(outs[1] / "timings.csv")
        stable = slice(0, 5)  # step, dt, particles, iters, residual
        assert [r[stable] for r in a] == [r[stable] for r in b]
        assert (outs[0] / "energy.csv").read_bytes() == \
            (outs[1] / "energy.csv").read_bytes()
        assert (outs[0] / "snap_000004.bin").read_bytes() == \
            (outs[1] / "snap_000004.bin").read_bytes()

    def test_config_file_with_flag_override(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("scene = dam-break\nres = 10\nsteps = 5\n"
                           f"out = {tmp_path / 'cfgout'}\nseed = 2\n")
        code = run_cli("run", "--config", str(cfgfile), "--steps", "1")
        assert code == EXIT_OK
        rows = read_csv(tmp_path / "cfgout" / "timings.csv")
        assert len(rows) == 2  # override reduced steps to 1

    def test_bad_scene_usage_error(self, tmp_path):
        code = run_cli("run", "--scene", "volcano", "--out", str(tmp_path))
        assert code == EXIT_USAGE

    def test_bad_config_key_usage_error(self, tmp_path):
        cfgfile = tmp_path / "bad.cfg"
        cfgfile.write_text("explode = yes\n")
        assert run_cli("run", "--config", str(cfgfile)) == EXIT_USAGE


class TestMeshCommand:
    def test_mesh_from_run_snapshot(self, tmp_path):
        out = tmp_path / "m"
        assert run_cli("run", "--res", "10", "--steps", "2", "--seed", "3",
                       "--out", str(out)) == EXIT_OK
        obj = tmp_path / "mesh.obj"
        code = run_cli("mesh", str(out / "snap_000002.bin"), "--res", "10",
                       "--mesh-res", "24", "--out", str(obj))
        assert code == EXIT_OK
        text = obj.read_text()
        assert text.count("\nf ") + text.startswith("f ") > 0

    def test_empty_snapshot_empty_obj(self, tmp_path):
        snap = tmp_path / "empty.bin"
        io.write_snapshot(snap, ParticleSet.empty())
        obj = tmp_path / "empty.obj"
        code = run_cli("mesh", str(snap), "--res", "10", "--mesh-res", "8",
                       "--out", str(obj))
        assert code == EXIT_OK
        assert obj.read_text() == ""

    def test_minimum_lattice_runs(self, tmp_path):
        snap = tmp_path / "one.bin"
        ps = ParticleSet(*(np.full(4, 0.5) for _ in range(3)),
                         *(np.zeros(4) for _ in range(3)))
        io.write_snapshot(snap, ps)
        obj = tmp_path / "tiny.obj"
        assert run_cli("mesh", str(snap), "--res", "8", "--mesh-res", "2",
                       "--out", str(obj)) == EXIT_OK

    def test_missing_snapshot_io_error(self, tmp_path):
        code = run_cli("mesh", str(tmp_path / "nope.bin"), "--out",
                       str(tmp_path / "x.obj"))
        assert code == 3

    def test_corrupt_snapshot_runtime_error(self, tmp_path):
        snap = tmp_path / "corrupt.bin"
        snap.write_bytes(b"JUNKJUNKJUNKJUNKJUNK")
        assert run_cli("mesh", str(snap), "--out",
                       str(tmp_path / "x.obj")) == EXIT_RUNTIME


class TestBenchCommand:
    def test_single_cell_matrix(self, tmp_path):
        out = tmp_path / "bench1"
        code = run_cli("bench", "--scenes", "dam-break", "--resolutions",
                       "10", "--particles", "500", "--steps", "2",
                       "--seed", "4", "--out", str(out))
        assert code == EXIT_OK
        rows = read_csv(out / "bench.csv")
        assert rows[0] == ["scene", "res", "particles", "stage", "ms"]
        stages = {r[3] for r in rows[1:]}
        assert "project" in stages and "bin" in stages
        assert len(rows) == 1 + 10  # one row per stage

    def test_matrix_sweep(self, tmp_path):
        out = tmp_path / "bench2"
        code = run_cli("bench", "--scenes", "dam-break", "--resolutions",
                       "8,10", "--particles", "300,600", "--steps", "1",
                       "--seed", "4", "--out", str(out))
        assert code == EXIT_OK
        rows = read_csv(out / "bench.csv")
        combos = {(r[1], r[2]) for r in rows[1:]}
        assert combos == {("8", "300"), ("8", "600"), ("10", "300"),
                          ("10", "600")}
