from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from fourierfit.cli import PRESETS, RunConfig, build_parser, main, make_config, run_preset
from fourierfit.errors import ValidationError
from fourierfit.fourier import FourierTable, load_table, save_table

SMALL_2D = ["--order", "4", "--spacing", "0.25", "--levelset-order", "4", "--levelset-spacing", "0.25"]


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def circle_run(tmp_path_factory):
    """gen, detect and a two-iteration piecewise fit on a small quarter-circle case."""
    d = tmp_path_factory.mktemp("circle")
    assert main(["gen", "--function", "circle2d", "--table-M", "16", "--output", str(d / "c.json")]) == 0
    assert main(["detect", "--input", str(d / "c.json"), *SMALL_2D, "--output", str(d / "s.json")]) == 0
    assert main(["fit", "--input", str(d / "c.json"), "--seed", str(d / "s.json"), *SMALL_2D, "--M", "12",
                 "--max-outer", "2", "--function", "circle2d", "--exclusion-radius", "0.05",
                 "--error-grid", "51", "--output", str(d / "out" / "c")]) == 0
    return d


class TestGen:
    def test_const(self, tmp_path, capsys):
        code, out, _ = run(["gen", "--function", "const1", "--table-M", "5", "--output", str(tmp_path / "t.json")],
                           capsys)
        assert code == 0 and "max |change|" in out
        t = load_table(tmp_path / "t.json")
        assert t.data[0] == pytest.approx(1.0, abs=1e-14)
        assert np.abs(t.data[1:]).max() <= 1e-14

    def test_jump_table_size(self, tmp_path):
        assert main(["gen", "--function", "jump1d", "--table-M", "999", "--output", str(tmp_path / "j.json")]) == 0
        t = load_table(tmp_path / "j.json")
        assert t.half_table and len(t) == 1000

    def test_circle_table_size(self, circle_run):
        t = load_table(circle_run / "c.json")
        assert t.data.shape == (33, 33)

    def test_unknown_function(self, tmp_path, capsys):
        code, _, err = run(["gen", "--function", "nope", "--output", str(tmp_path / "x.json")], capsys)
        assert code == 2 and "unknown function" in err


class TestDetect:
    def test_jump(self, tmp_path):
        main(["gen", "--function", "jump1d", "--table-M", "999", "--output", str(tmp_path / "j.json")])
        assert main(["detect", "--input", str(tmp_path / "j.json"), "--output", str(tmp_path / "s.json")]) == 0
        seed = json.loads((tmp_path / "s.json").read_text())
        assert abs(seed["s0"] - 0.5) <= 1e-3
        assert "config" in seed and len(seed["inputs"]["table"]) == 64

    def test_curve_seed_has_both_signs(self, circle_run):
        seed = json.loads((circle_run / "s.json").read_text())
        v = np.array(seed["Q0"])[:, 2]
        assert v.min() < 0 < v.max()

    def test_smooth_table_no_singularity(self, tmp_path, capsys):
        main(["gen", "--function", "smooth1d", "--table-M", "300", "--output", str(tmp_path / "t.json")])
        code, out, _ = run(["detect", "--input", str(tmp_path / "t.json"), "--output", str(tmp_path / "s.json")],
                           capsys)
        assert code == 0 and "no interior singularity" in out
        assert json.loads((tmp_path / "s.json").read_text())["found"] is False

    def test_missing_input(self, capsys):
        code, _, err = run(["detect"], capsys)
        assert code == 2 and "--input" in err


class TestFit:
    def test_smooth_reference_decay(self, tmp_path):
        paths = run_preset("smooth1d-paper", tmp_path, log=lambda *a: None)
        with open(paths["decay"]) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 20
        drop = min(float(r["log10_abs_data"]) - float(r["log10_abs_residual"]) for r in rows)
        assert drop >= 6

    def test_piecewise_1d_reports_s_error(self, tmp_path):
        paths = run_preset("pw1d-paper", tmp_path, log=lambda *a: None)
        rep = json.loads(paths["report"].read_text())
        assert rep["extra"]["s_true"] == 0.5
        assert rep["extra"]["s_error"] <= 1e-6
        assert rep["error"]["exclusion_radius"] == 1e-3

    def test_piecewise_2d_history_strictly_decreasing(self, circle_run):
        rep = json.loads((circle_run / "out" / "c_report.json").read_text())
        h = rep["objective_history"]
        assert len(h) >= 3
        assert all(b < a for a, b in zip(h, h[1:]))
        assert rep["error"]["grid"] == 51

    def test_outputs_written(self, circle_run):
        names = sorted(p.name for p in (circle_run / "out").iterdir())
        assert names == ["c_decay.csv", "c_error.csv", "c_model.json", "c_report.json"]
        with open(circle_run / "out" / "c_error.csv") as fh:
            assert next(csv.reader(fh)) == ["x", "y", "model", "truth", "error", "excluded"]

    def test_deterministic_json(self, tmp_path):
        a = run_preset("smooth1d-paper", tmp_path / "a", log=lambda *a: None)
        b = run_preset("smooth1d-paper", tmp_path / "b", log=lambda *a: None)
        ra = json.loads(a["report"].read_text())
        rb = json.loads(b["report"].read_text())
        # only the paths differ between the two runs
        for r in (ra, rb):
            for key in ("input", "output", "seed"):
                r["config"][key] = None
        assert json.dumps(ra, sort_keys=True) == json.dumps(rb, sort_keys=True)

    def test_byte_identical_rerun(self, tmp_path):
        run_preset("smooth1d-paper", tmp_path, log=lambda *a: None)
        first = (tmp_path / "smooth1d-paper_report.json").read_bytes()
        run_preset("smooth1d-paper", tmp_path, log=lambda *a: None)
        assert (tmp_path / "smooth1d-paper_report.json").read_bytes() == first

    def test_report_embeds_config_and_digests(self, circle_run):
        rep = json.loads((circle_run / "out" / "c_report.json").read_text())
        assert rep["config"]["M"] == 12 and rep["config"]["max_outer"] == 2
        assert set(rep["inputs"]) == {"table", "seed"}

    def test_numeric_failure_exit_code(self, tmp_path, capsys):
        save_table(FourierTable(np.full(11, 1e300 + 0j), 10, half_table=True), tmp_path / "big.json")
        code, _, err = run(["fit", "--input", str(tmp_path / "big.json"), "--order", "4", "--spacing", "0.25",
                            "--M", "10"], capsys)
        assert code == 3 and "non-finite" in err

    def test_validation_exit_codes(self, tmp_path, capsys):
        main(["gen", "--function", "smooth1d", "--table-M", "10", "--output", str(tmp_path / "t.json")])
        code, _, err = run(["fit", "--input", str(tmp_path / "t.json"), "--M", "20"], capsys)
        assert code == 2 and "error" in err
        code, _, _ = run(["fit", "--input", str(tmp_path / "t.json"), "--spacing", "0.3"], capsys)
        assert code == 2
        code, _, _ = run(["fit", "--input", str(tmp_path / "missing.json")], capsys)
        assert code == 2
        code, _, err = run(["fit", "--input", str(tmp_path / "t.json"), "--mode", "piecewise"], capsys)
        assert code == 2 and "--seed" in err


class TestReport:
    def test_exact_fit(self, tmp_path, capsys):
        main(["gen", "--function", "const1", "--table-M", "8", "--output", str(tmp_path / "t.json")])
        main(["fit", "--input", str(tmp_path / "t.json"), "--order", "4", "--spacing", "0.25", "--M", "8",
              "--output", str(tmp_path / "f")])
        capsys.readouterr()
        code, out, _ = run(["report", "--input", str(tmp_path / "f_report.json")], capsys)
        assert code == 0
        assert "reduction: exact (objective <= 1e-20)" in out
        assert "error grid: omitted (no ground truth)" in out

    def test_config_verbatim(self, circle_run, capsys):
        path = circle_run / "out" / "c_report.json"
        rep = json.loads(path.read_text())
        code, out, _ = run(["report", "--input", str(path)], capsys)
        assert code == 0
        assert "config: " + json.dumps(rep["config"], sort_keys=True) in out
        assert "iteration history:" in out and "sup " in out

    def test_malformed(self, tmp_path, capsys):
        (tmp_path / "bad.json").write_text("{not json")
        code, _, err = run(["report", "--input", str(tmp_path / "bad.json")], capsys)
        assert code == 2 and "invalid JSON" in err
        (tmp_path / "other.json").write_text('{"a": 1}')
        code, _, err = run(["report", "--input", str(tmp_path / "other.json")], capsys)
        assert code == 2 and "not a report" in err


class TestConfig:
    def test_preset_then_override(self):
        cfg = make_config("fit", "pw2d-reduced", M=10)
        assert cfg.M == 10 and cfg.order == 6 and cfg.preset == "pw2d-reduced"

    def test_all_presets_validate(self):
        for name in PRESETS:
            assert isinstance(make_config("fit", name), RunConfig)

    def test_unknown_preset(self):
        with pytest.raises(ValidationError):
            make_config("fit", "nope")

    def test_flags_mirror_fields(self):
        p = build_parser()
        args = p.parse_args(["fit", "--levelset-spacing", "0.25", "--max-outer", "3", "--refine-target", "1e-14"])
        assert args.levelset_spacing == 0.25 and args.max_outer == 3 and args.refine_target == 1e-14
