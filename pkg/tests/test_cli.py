import json
from pathlib import Path

import numpy as np
import pytest

from photostat.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from photostat.histogram import CountHistogram


def _files(out: Path):
    return sorted(str(p.relative_to(out)) for p in out.rglob("*") if p.is_file())


def _assert_manifest_complete(out: Path):
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["outputs"] == _files(out)
    for key in ("command_line", "seed", "config", "config_digest", "tool_version", "wall_clock_s"):
        assert key in manifest
    return manifest


def _hist(out: Path) -> CountHistogram:
    return CountHistogram.from_csv((out / "histogram.csv").read_text())


class TestSimulate:
    def test_coherent_mean(self, tmp_path):
        out = tmp_path / "run"
        assert main(["simulate", "--source", "coherent", "--mean", "16", "--pulses", "40000",
                     "--seed", "1", "--out", str(out)]) == EXIT_OK
        assert _hist(out).mean() == pytest.approx(16.0, abs=0.2)
        manifest = _assert_manifest_complete(out)
        assert manifest["seed"] == 1
        assert manifest["config"]["efficiency_coupling_split"] == "modeling choice"

    def test_byte_identical(self, tmp_path):
        args = ["simulate", "--source", "bsv", "--modes", "3", "--mean", "1.5", "--pulses", "5000", "--seed", "7"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(a)]) == EXIT_OK
        assert main(args + ["--out", str(b), "--workers", "2"]) == EXIT_OK
        assert (a / "histogram.csv").read_bytes() == (b / "histogram.csv").read_bytes()
        assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PHOTOSTAT_SEED", "5")
        out = tmp_path / "env"
        main(["simulate", "--source", "coherent", "--mean", "2", "--pulses", "100", "--out", str(out)])
        assert json.loads((out / "manifest.json").read_text())["seed"] == 5
        monkeypatch.setenv("PHOTOSTAT_SEED", "abc")
        assert main(["simulate", "--source", "coherent", "--mean", "2", "--pulses", "100",
                     "--out", str(tmp_path / "bad")]) == EXIT_USAGE

    def test_extreme_counts(self, tmp_path):
        hits = 0
        for seed in range(5):
            out = tmp_path / f"s{seed}"
            main(["simulate", "--source", "bsv", "--modes", "1", "--nonlinearity", "4", "--mean", "0.27",
                  "--pulses", "40000", "--seed", str(seed), "--out", str(out)])
            hits += _hist(out).k_max >= 40
        assert hits >= 4

    @pytest.mark.parametrize("extra", [
        ["--pulses", "0", "--mean", "1"],
        ["--pulses", "10"],
        ["--pulses", "10", "--mean", "1", "--coupling", "1"],
        ["--pulses", "10", "--mean", "1", "--modes", "3"],
        ["--pulses", "10", "--mean", "1", "--efficiency", "2"],
        ["--pulses", "10", "--mean", "-1"],
        ["--pulses", "ten", "--mean", "1"],
    ])
    def test_usage_errors(self, tmp_path, extra):
        assert main(["simulate", "--source", "coherent", "--out", str(tmp_path / "x")] + extra) == EXIT_USAGE

    def test_no_command(self):
        assert main([]) == EXIT_USAGE


class TestFit:
    def test_nonlinearity(self, tmp_path, capsys):
        csv = tmp_path / "means.csv"
        csv.write_text("energy,mean\n" + "".join(f"{e},{0.01 * e**4}\n" for e in (7, 8, 9, 10, 11)))
        out = tmp_path / "fit"
        assert main(["fit", "nonlinearity", str(csv), "--out", str(out)]) == EXIT_OK
        assert json.loads((out / "fit.json").read_text())["exponent"] == pytest.approx(4.0, abs=1e-9)
        assert "n = 4.000" in capsys.readouterr().out
        _assert_manifest_complete(out)

    def test_malformed_csv_names_line(self, tmp_path, capsys):
        csv = tmp_path / "means.csv"
        csv.write_text("energy,mean\n7,1\n8,oops\n9,3\n")
        assert main(["fit", "nonlinearity", str(csv), "--out", str(tmp_path / "f")]) == EXIT_USAGE
        assert "line 3" in capsys.readouterr().err

    def test_modes(self, tmp_path):
        sim = tmp_path / "sim"
        main(["simulate", "--source", "bsv", "--modes", "11", "--mean", "2.6", "--pulses", "40000",
              "--seed", "3", "--out", str(sim)])
        out = tmp_path / "fit"
        assert main(["fit", "modes", str(sim / "histogram.csv"), "--n", "4", "--m-min", "1",
                     "--m-max", "30", "--out", str(out)]) == EXIT_OK
        fit = json.loads((out / "fit.json").read_text())
        assert fit["ci_low"] <= 11 <= fit["ci_high"]
        assert (out / "profile.csv").read_text().startswith("m,objective\n")
        _assert_manifest_complete(out)

    def test_modes_bad_histogram(self, tmp_path, capsys):
        bad = tmp_path / "h.csv"
        bad.write_text("k,frequency\n0,10\n1,zz\n")
        assert main(["fit", "modes", str(bad), "--n", "4", "--out", str(tmp_path / "o")]) == EXIT_USAGE
        assert "line 3" in capsys.readouterr().err

    @pytest.mark.parametrize("extra", [["--n", "0"], ["--n", "4", "--m-min", "5", "--m-max", "2"]])
    def test_modes_usage(self, tmp_path, extra):
        h = tmp_path / "h.csv"
        h.write_text("k,frequency\n0,10\n1,3\n")
        assert main(["fit", "modes", str(h), "--out", str(tmp_path / "o")] + extra) == EXIT_USAGE

    def test_missing_input(self, tmp_path):
        assert main(["fit", "nonlinearity", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == EXIT_USAGE

    def test_runtime_failure(self, tmp_path):
        h = tmp_path / "h.csv"
        h.write_text("k,frequency\n0,1000000\n10000,1\n")
        assert main(["fit", "modes", str(h), "--n", "1", "--m-max", "2", "--out", str(tmp_path / "o")]) == EXIT_RUNTIME


class TestFrames:
    def test_poisson_round_trip(self, tmp_path):
        frames = tmp_path / "frames"
        assert main(["frames", "generate", "--frames", "100", "--count-law", "poisson:5", "--width", "128",
                     "--height", "128", "--seed", "2", "--out", str(frames)]) == EXIT_OK
        _assert_manifest_complete(frames)
        out = tmp_path / "counted"
        assert main(["frames", "count", str(frames), "--out", str(out)]) == EXIT_OK
        hist = _hist(out)
        assert hist.mean() == pytest.approx(5.0, abs=0.5)
        truth = np.loadtxt(frames / "truth.csv", delimiter=",", skiprows=1, dtype=int)
        assert hist == CountHistogram.from_samples(truth[:, 1])
        assert json.loads((out / "summary.json").read_text())["skipped"] == []
        _assert_manifest_complete(out)

    def test_fixed_law(self, tmp_path):
        frames = tmp_path / "frames"
        main(["frames", "generate", "--frames", "10", "--count-law", "fixed:3", "--width", "64",
              "--height", "64", "--out", str(frames)])
        main(["frames", "count", str(frames), "--out", str(tmp_path / "c")])
        assert _hist(tmp_path / "c").counts == {3: 10}

    def test_empty_and_missing_dirs(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["frames", "count", str(empty), "--out", str(tmp_path / "o")]) == EXIT_USAGE
        assert main(["frames", "count", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]) == EXIT_USAGE

    @pytest.mark.parametrize("law", ["gauss:3", "fixed:-1", "poisson", "fixed:x"])
    def test_bad_count_law(self, tmp_path, law):
        assert main(["frames", "generate", "--frames", "2", "--count-law", law,
                     "--out", str(tmp_path / "f")]) == EXIT_USAGE

    def test_unsafe_threshold(self, tmp_path):
        assert main(["frames", "generate", "--frames", "2", "--threshold", "120",
                     "--out", str(tmp_path / "f")]) == EXIT_USAGE


class TestReproduce:
    def test_fig2b(self, tmp_path):
        out = tmp_path / "r"
        assert main(["reproduce", "fig2b", "--seed", "0", "--out", str(out)]) == EXIT_OK
        summary = json.loads((out / "fig2b_summary.json").read_text())
        assert summary["tv_to_poisson"] < 0.03
        assert (out / "fig2b.svg").read_text().lstrip().startswith(("<svg", "<?xml"))
        _assert_manifest_complete(out)

    def test_edfig1_panels(self, tmp_path):
        out = tmp_path / "r"
        assert main(["reproduce", "edfig1", "--out", str(out)]) == EXIT_OK
        summary = json.loads((out / "edfig1_summary.json").read_text())
        assert set(summary["tv_to_base"]) == {"0.01", "0.1", "0.5"}
        for panel in "bcd":
            assert (out / f"edfig1_{panel}_mixed.csv").exists()

    def test_fig3c_overlays(self, tmp_path):
        out = tmp_path / "r"
        assert main(["reproduce", "fig3c", "--seed", "1", "--out", str(out)]) == EXIT_OK
        assert (out / "fig3c_model_m1.csv").exists() and (out / "fig3c_model_m2.csv").exists()
        svg_text = (out / "fig3c.svg").read_text()
        assert "m=1" in svg_text and "m=2" in svg_text

    def test_deterministic_outputs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["reproduce", "fig3a", "--seed", "4", "--pulses", "3000", "--out", str(a)])
        main(["reproduce", "fig3a", "--seed", "4", "--pulses", "3000", "--out", str(b)])
        for name in _files(a):
            if name != "manifest.json":
                assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_unknown_figure(self, tmp_path, capsys):
        assert main(["reproduce", "fig9", "--out", str(tmp_path / "r")]) == EXIT_USAGE
        err = capsys.readouterr().err
        assert "fig2a" in err and "edfig1" in err
