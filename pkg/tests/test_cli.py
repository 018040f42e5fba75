"""Command-line behavior: exit codes, formats, round trips."""

import json
import os

import pytest

from pencil_forge import cli


NONFLAT_CASE = {
    "name": "round-sphere",
    "n": 2,
    "coordinates": ["u", "v"],
    "parameters": [],
    "metric": [
        ["(1 + (u^2 + v^2)/4)^2", "0"],
        ["0", "(1 + (u^2 + v^2)/4)^2"],
    ],
    "isometry": ["v", "-u"],
    "epsilon": "1",
    "c": "0",
}


class TestVerify:
    def test_builtin_pass_exit_zero(self, capsys):
        assert cli.main(["verify", "astigmatism"]) == 0
        out = capsys.readouterr().out
        assert "case astigmatism: PASS" in out

    def test_nonflat_case_file_exit_one(self, tmp_path, capsys):
        path = tmp_path / "mycase.json"
        path.write_text(json.dumps(NONFLAT_CASE))
        assert cli.main(["verify", str(path)]) == 1
        out = capsys.readouterr().out
        assert "[fail]" in out
        assert "R^" in out  # flatness witness names a curvature component

    def test_missing_file_exit_two(self, capsys):
        assert cli.main(["verify", "missing.json"]) == 2
        err = capsys.readouterr().err
        assert "missing.json" in err

    def test_unknown_builtin_exit_two(self, capsys):
        assert cli.main(["verify", "g10"]) == 2
        assert "builtin cases" in capsys.readouterr().err

    def test_schema_violation_exit_two(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text(json.dumps({"name": "x", "n": 2}))
        assert cli.main(["verify", str(path)]) == 2
        assert "schema" in capsys.readouterr().err

    def test_bad_expression_exit_two(self, tmp_path, capsys):
        data = dict(NONFLAT_CASE)
        data["metric"] = [["q + 1", "0"], ["0", "1"]]
        path = tmp_path / "badexpr.json"
        path.write_text(json.dumps(data))
        assert cli.main(["verify", str(path)]) == 2
        assert "unknown symbol" in capsys.readouterr().err

    def test_json_format(self, capsys):
        assert cli.main(["verify", "g6", "--format", "json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["case"] == "g6"
        assert payload["passed"] is True


class TestRecursion:
    def test_constant_family_text(self, capsys):
        assert cli.main(["recursion", "g6"]) == 0
        out = capsys.readouterr().out
        assert "beta*Dx + Dx^-1" in out
        assert "alpha*Dx + Dx^-1" in out
        assert "* Dx^-1" in out

    def test_no_reference_annotated(self, capsys):
        assert cli.main(["recursion", "g9"]) == 0
        out = capsys.readouterr().out
        assert "no printed reference" in out

    def test_json_matrix(self, capsys):
        assert cli.main(["recursion", "g3", "--format", "json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["trailing"] == "Dx^-1"
        assert payload["entries"][0][0]["dx"] == "beta"
        assert payload["entries"][0][1]["tails"] == [["1", "1"]]


class TestMagri:
    def test_astigmatism_step(self, capsys):
        assert cli.main([
            "magri", "astigmatism", "--density", "-2*v", "--steps", "1",
        ]) == 0
        out = capsys.readouterr().out
        assert "h_1" in out
        assert "ln(u)" in out

    def test_wdvv_step(self, capsys):
        assert cli.main([
            "magri", "wdvv3", "--density", "-u", "--steps", "1",
        ]) == 0
        out = capsys.readouterr().out
        assert "h_1" in out
        # the regenerated flow is the stored nonhomogeneous system
        assert "w_t = (1)*v_x" in out

    def test_jet_density_exit_two(self, capsys):
        assert cli.main(["magri", "astigmatism", "--density", "u*u_x"]) == 2
        assert "jet variables" in capsys.readouterr().err

    def test_obstruction_exit_one(self, capsys):
        # second step: the nonlocal kernel becomes field-dependent
        assert cli.main([
            "magri", "astigmatism", "--density", "-2*v", "--steps", "2",
        ]) == 1
        err = capsys.readouterr().err
        assert "NonlocalUnresolved" in err


class TestCatalog:
    def test_list_text(self, capsys):
        assert cli.main(["catalog", "list"]) == 0
        out = capsys.readouterr().out
        assert "11 builtin cases" in out
        for name in ("g1", "g9", "astigmatism", "wdvv3"):
            assert name in out

    def test_list_json(self, capsys):
        assert cli.main(["catalog", "list", "--format", "json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert [c["name"] for c in payload] == [
            "astigmatism", "g1", "g2", "g3", "g4", "g5",
            "g6", "g7", "g8", "g9", "wdvv3",
        ]

    def test_export_and_reload_byte_identical(self, tmp_path, capsys):
        out_dir = tmp_path / "cases"
        assert cli.main(["catalog", "export", str(out_dir)]) == 0
        capsys.readouterr()
        files = sorted(os.listdir(out_dir))
        assert len(files) == 11

        assert cli.main(["verify", str(out_dir / "g5.json"), "--format", "json"]) == 0
        from_file = capsys.readouterr().out
        assert cli.main(["verify", "g5", "--format", "json"]) == 0
        from_builtin = capsys.readouterr().out
        assert from_file == from_builtin

    def test_export_twice_deterministic(self, tmp_path):
        d1 = tmp_path / "a"
        d2 = tmp_path / "b"
        assert cli.main(["catalog", "export", str(d1)]) == 0
        assert cli.main(["catalog", "export", str(d2)]) == 0
        for name in os.listdir(d1):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()
