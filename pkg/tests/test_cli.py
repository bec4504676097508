import json

import numpy as np
import pytest

from critheat import cli, families
from critheat.config import ConfigError, parse_config
from critheat.radial import CorruptionError, grid_for_span


def run_config_text(tmp_out=None, **overrides):
    tree = {
        "dimension": 5,
        "grid": {"R": 600.0, "n": 1375, "stretch": 1.004},
        "family": {"name": "aW", "a": 0.9},
        "integrator": {"tol": 1e-5, "t_max": 1e6},
        "seed": 0,
    }
    tree.update(overrides)
    if tmp_out is not None:
        tree["out_dir"] = str(tmp_out)
    return json.dumps(tree)


class TestParseConfig:
    def test_minimal_config_materializes_defaults(self):
        cfg = parse_config(run_config_text())
        assert cfg.dimension == 5
        assert cfg.snapshot_factor == 1.3  # default recorded explicitly
        assert cfg.dt_min == 1e-12
        assert cfg.params == {"a": 0.9}

    def test_round_trip_stability(self):
        cfg = parse_config(run_config_text())
        again = parse_config(cfg.to_json())
        assert again == cfg
        assert again.content_hash() == cfg.content_hash()

    def test_dimension_validation_names_the_field(self):
        with pytest.raises(ConfigError, match="dimension"):
            parse_config(run_config_text(dimension=2))

    def test_unknown_family_lists_registered(self):
        bad = json.loads(run_config_text())
        bad["family"] = {"name": "mystery"}
        with pytest.raises(ConfigError, match="aW"):
            parse_config(json.dumps(bad))

    def test_malformed_json(self):
        with pytest.raises(ConfigError, match="line"):
            parse_config("{not json")

    def test_invalid_tolerances(self):
        with pytest.raises(ConfigError):
            parse_config(run_config_text(integrator={"tol": -1.0}))

    def test_hash_ignores_output_location(self):
        a = parse_config(run_config_text())
        b = parse_config(run_config_text(out_dir="/somewhere/else"))
        assert a.content_hash() == b.content_hash()


@pytest.fixture()
def cfg_file(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return write


class TestCommands:
    def test_run_writes_series_and_manifest(self, tmp_path, cfg_file):
        out = tmp_path / "out"
        path = cfg_file("run.json", run_config_text(out))
        assert cli.main(["run", "--config", path]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["verdict"]["kind"] == "Dissipative"
        assert "series.csv" in manifest["outputs"]
        for name in manifest["outputs"]:
            assert (out / name).exists()
        header = (out / "series.csv").read_text().splitlines()[0]
        assert header.strip() == "t,quantity,value"

    def test_determinism_byte_identical_csv(self, tmp_path, cfg_file):
        path = cfg_file("run.json", run_config_text())
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert cli.main(["run", "--config", path, "--out", str(out1), "--seed", "7"]) == 0
        assert cli.main(["run", "--config", path, "--out", str(out2), "--seed", "7"]) == 0
        assert (out1 / "series.csv").read_bytes() == (out2 / "series.csv").read_bytes()

    def test_overwrite_protection(self, tmp_path, cfg_file):
        out = tmp_path / "out"
        path = cfg_file("run.json", run_config_text(out))
        assert cli.main(["run", "--config", path]) == 0
        assert cli.main(["run", "--config", path]) == 3
        assert cli.main(["run", "--config", path, "--overwrite"]) == 0

    def test_config_error_exit_code(self, tmp_path, cfg_file):
        path = cfg_file("bad.json", run_config_text(dimension=2))
        assert cli.main(["run", "--config", path, "--out", str(tmp_path / "o")]) == 2

    def test_missing_config_is_io_error(self, tmp_path):
        assert cli.main(["run", "--config", str(tmp_path / "nope.json"),
                         "--out", str(tmp_path / "o")]) == 3

    def test_corrupt_checkpoint_exit_code(self, tmp_path, cfg_file):
        # a NaN-laden initial-data file is numerical corruption, category 4
        grid = grid_for_span(5, 600.0, 0.01, 0.004)
        u0 = families.build_initial("aW", {"a": 0.9}, grid)
        ckpt = tmp_path / "bad_ckpt.txt"
        families.save_checkpoint(ckpt, u0, 0.0)
        text = ckpt.read_text().splitlines()
        text[5] = text[5].split()[0] + " nan"
        ckpt.write_text("\n".join(text) + "\n")
        tree = json.loads(run_config_text(tmp_path / "out"))
        tree["family"] = {"name": "from_file", "path": str(ckpt)}
        path = cfg_file("corrupt.json", json.dumps(tree))
        assert cli.main(["run", "--config", path]) == 4

    def test_sweep_rows_and_exit(self, tmp_path, cfg_file):
        tree = json.loads(run_config_text(tmp_path / "sw"))
        tree["integrator"]["t_max"] = 1e6
        tree["sweep"] = [{"a": 0.9}, {"a": 1.2}]
        path = cfg_file("sweep.json", json.dumps(tree))
        assert cli.main(["sweep", "--config", path, "--threads", "2"]) == 0
        rows = (tmp_path / "sw" / "sweep.csv").read_text().splitlines()
        assert len(rows) == 3  # header + 2 rows
        assert "Dissipative" in rows[1] and "Blowup" in rows[2]

    def test_sweep_partial_exit_for_undecided_row(self, tmp_path, cfg_file):
        tree = json.loads(run_config_text(tmp_path / "sw"))
        tree["integrator"]["t_max"] = 10.0
        tree["sweep"] = [{"a": 1.001}]  # margin inside the threshold band
        path = cfg_file("sweep.json", json.dumps(tree))
        assert cli.main(["sweep", "--config", path]) == 1

    def test_sweep_inconsistent_row_exit(self, tmp_path, cfg_file, monkeypatch):
        # control-flow contract: a theorem-inconsistent row is exit category 5
        import critheat.experiments as experiments

        real = experiments._sweep_row

        def poisoned(cfg):
            row = real(cfg)
            object.__setattr__(row, "consistent_with_theorem", False)
            return row

        monkeypatch.setattr(experiments, "_sweep_row", poisoned)
        tree = json.loads(run_config_text(tmp_path / "sw"))
        tree["sweep"] = [{"a": 0.9}]
        path = cfg_file("sweep.json", json.dumps(tree))
        assert cli.main(["sweep", "--config", path]) == 5

    def test_character_command(self, tmp_path, cfg_file):
        tree = {
            "dimension": 3,
            "spectrum": {"kind": "power_gauss", "k": 0.0},
            "out_dir": str(tmp_path / "char"),
        }
        path = cfg_file("char.json", json.dumps(tree))
        assert cli.main(["character", "--config", path]) == 0
        row = (tmp_path / "char" / "character.csv").read_text().splitlines()[1].split(",")
        assert abs(float(row[2]) - 0.0) < 0.02  # r* of a gaussian spectrum

    def test_decayfit_command(self, tmp_path, cfg_file):
        tree = {
            "dimension": 4,
            "grid": {"R": 160.0, "n": 1047, "stretch": 1.004},
            "family": {"name": "gaussian", "amp": 0.05, "width": 1.0},
            "integrator": {"tol": 1e-6, "dt_init": 1e-6, "t_max": 500.0},
            "snapshots": {"factor": 1.2},
            "verdict": {"eps_dissip_rel": 1e-7},
            "out_dir": str(tmp_path / "fit"),
        }
        path = cfg_file("fit.json", json.dumps(tree))
        assert cli.main(["decayfit", "--config", path]) == 0
        rows = (tmp_path / "fit" / "decayfit.csv").read_text().splitlines()
        header = rows[0].split(",")
        record = dict(zip(header, rows[1].split(",")))
        assert record["law"] == "power"
        assert float(record["r2"]) >= 0.98

    def test_splitting_command(self, tmp_path, cfg_file):
        tree = {
            "dimension": 4,
            "grid": {"R": 160.0, "n": 1047, "stretch": 1.004},
            "family": {"name": "gaussian", "amp": 0.05, "width": 1.0},
            "integrator": {"tol": 1e-6, "dt_init": 1e-6, "t_max": 40.0},
            "snapshots": {"first": 0.05, "checkpoint_every": 2},
            "out_dir": str(tmp_path / "split"),
        }
        path = cfg_file("split.json", json.dumps(tree))
        assert cli.main(["splitting", "--config", path]) == 0
        manifest = json.loads((tmp_path / "split" / "manifest.json").read_text())
        assert manifest["splitting"]["c_tilde"] > 0
        rows = (tmp_path / "split" / "splitting.csv").read_text().splitlines()[1:]
        assert all(float(r.split(",")[1]) >= -1e-9 for r in rows)


class TestCheckpointFormat:
    def test_round_trip(self, tmp_path):
        grid = grid_for_span(4, 50.0, 0.05, 0.01)
        u = families.build_initial("gaussian", {"amp": 0.3, "width": 2.0}, grid)
        path = tmp_path / "ck.txt"
        families.save_checkpoint(path, u, 1.25)
        back, t = families.load_checkpoint(path)
        assert t == 1.25
        assert back.grid.d == 4
        assert np.array_equal(back.values, u.values)
        assert np.array_equal(back.grid.nodes, grid.nodes)

    def test_nan_detected_on_load(self, tmp_path):
        grid = grid_for_span(4, 50.0, 0.05, 0.01)
        u = families.build_initial("gaussian", {"amp": 0.3, "width": 2.0}, grid)
        path = tmp_path / "ck.txt"
        families.save_checkpoint(path, u, 0.0)
        text = path.read_text().replace(repr(float(u.values[3])), "inf", 1)
        path.write_text(text)
        with pytest.raises(CorruptionError):
            families.load_checkpoint(path)

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("hello\n1 2\n")
        with pytest.raises(ValueError):
            families.load_checkpoint(path)
