import csv
import io
import json
import math

import pytest

from locspec.cli import UsageError, main, parse_field, parse_number, read_config
from locspec.errors import DomainError

import numpy as np


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestParsing:
    @pytest.mark.parametrize("text,value", [
        ("pi", math.pi), ("pi/4", math.pi / 4), ("2*pi", 2 * math.pi), ("-1.5e-3", -1.5e-3),
        ("sqrt(2)", math.sqrt(2)), ("(1+2)**2", 9.0),
    ])
    def test_numbers(self, text, value):
        assert parse_number(text) == value

    @pytest.mark.parametrize("text", ["__import__('os')", "abc", "1+", "open('x')", "[1]"])
    def test_rejects_unsafe_or_malformed(self, text):
        with pytest.raises(UsageError):
            parse_number(text)

    def test_field_expression(self):
        f = parse_field("t**2 + sin(pi*t)")
        x = np.array([0.0, 0.5, 1.0])
        assert f(x) == pytest.approx(x**2 + np.sin(np.pi * x))
        assert parse_field("3")(x) == pytest.approx([3, 3, 3])

    def test_config_file(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("# comment\nk = 4\n\nmesh_h=1e-2\n")
        assert read_config(p) == {"k": "4", "mesh_h": "1e-2"}

    def test_malformed_config(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("no equals sign here\n")
        with pytest.raises(UsageError):
            read_config(p)


class TestSpectrumCommand:
    def test_symbolic_center(self, capsys):
        code, out, err = run(capsys, "spectrum", "--space", "half_line:0", "--weight", "const:1",
                             "--center", "pi/4", "--radius", "pi/4", "--convention", "H0", "--k", "3")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert float(rows[0]["lambda"]) == pytest.approx(4.0, rel=1e-3)
        assert err == ""

    def test_rounded_center_is_noted(self, capsys):
        code, out, err = run(capsys, "spectrum", "--space", "half_line:0", "--weight", "const:1",
                             "--center", "0.6854", "--radius", "0.7854", "--convention", "H0", "--k", "3")
        assert code == 0
        lam1 = float(list(csv.DictReader(io.StringIO(out)))[0]["lambda"])
        # 0.6854 is pi/4 - 0.1 rounded, so this is the moving-center value, not 4
        assert lam1 == pytest.approx((math.pi / (math.pi - 0.2)) ** 2, rel=1e-3)
        assert err == ""

    def test_nearly_exceptional_ball_is_noted(self, capsys):
        code, out, err = run(capsys, "spectrum", "--center", "0.7854", "--radius", "0.785", "--k", "1")
        assert code == 0
        assert "pi/4" in err

    def test_csv_and_json_agree(self, capsys):
        base = ["spectrum", "--space", "circle:2*pi", "--center", "0", "--radius", "2", "--k", "4", "--mesh-h", "1e-2"]
        _, out_csv, _ = run(capsys, *base, "--format", "csv")
        _, out_json, _ = run(capsys, *base, "--format", "json")
        from_csv = [row["lambda"] for row in csv.DictReader(io.StringIO(out_csv))]
        from_json = [repr(v) if v != int(v) else str(int(v)) for v in json.loads(out_json)["eigenvalues"]]
        assert [float(v) for v in from_csv] == [float(v) for v in from_json]
        assert all(len(v.replace("-", "").replace(".", "").lstrip("0").split("e")[0]) <= 15 for v in from_csv)

    def test_vectors_flag(self, capsys):
        code, out, _ = run(capsys, "spectrum", "--center", "1", "--radius", "0.5", "--mesh-h", "0.1", "--k", "1", "--vectors")
        assert code == 0
        header = out.splitlines()[0].split(",")
        assert header[:3] == ["k", "lambda", "residual"] and len(header) > 3

    def test_output_directory(self, capsys, tmp_path):
        code, _, _ = run(capsys, "spectrum", "--radius", "1", "--center", "1", "--out", str(tmp_path), "--mesh-h", "0.05")
        assert code == 0
        assert (tmp_path / "spectrum.csv").read_text().startswith("k,lambda,residual")

    def test_config_precedence(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("k = 2\nmesh_h = 0.05\ncenter = 1\nradius = 0.5\n")
        _, out, _ = run(capsys, "spectrum", "--config", str(cfg))
        assert len(out.splitlines()) == 3
        _, out, _ = run(capsys, "spectrum", "--config", str(cfg), "--k", "4")
        assert len(out.splitlines()) == 5

    @pytest.mark.parametrize("argv", [
        ["spectrum", "--k", "0"],
        ["spectrum", "--mesh-h", "-1"],
        ["spectrum", "--radius", "0"],
        ["spectrum", "--space", "torus"],
        ["spectrum", "--center", "-5"],
        ["spectrum", "--convention", "H2"],
    ])
    def test_usage_errors(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        assert code == 2
        assert err


class TestPoissonCommand:
    def test_quadratic_on_unit_interval(self, capsys):
        code, out, _ = run(capsys, "poisson", "--space", "interval:0:1", "--center", "0.5", "--radius", "0.5",
                           "--source", "1", "--boundary", "0", "--mesh-h", "0.01")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        x = np.array([float(r["coordinate"]) for r in rows])
        u = np.array([float(r["value"]) for r in rows])
        assert np.abs(u - x * (x - 1) / 2).max() < 1e-12

    def test_non_coercive_exit(self, capsys):
        code, _, err = run(capsys, "poisson", "--space", "circle:2*pi", "--center", "0", "--radius", "pi",
                           "--convention", "Hhat0", "--mesh-h", "0.05")
        assert code == 1
        assert "error" in err

    def test_json_diagnostics(self, capsys):
        code, out, _ = run(capsys, "poisson", "--center", "1", "--radius", "0.5", "--boundary", "t", "--format", "json",
                           "--mesh-h", "0.05")
        assert code == 0
        obj = json.loads(out)
        assert obj["diagnostics"]["galerkin_residual"] <= 1e-10


class TestRunCommand:
    def test_example_preset(self, capsys, tmp_path):
        code, out, _ = run(capsys, "run", "example1-halfline", "--mesh-h", "5e-4", "--out", str(tmp_path))
        assert code == 0
        report = json.loads((tmp_path / "example1-halfline.json").read_text())
        assert report["passed"] is True
        assert all(c["passed"] for c in report["checks"])
        assert "PASS" in out

    def test_unknown_preset(self, capsys):
        code, _, err = run(capsys, "run", "no-such-preset")
        assert code == 2
        assert "unknown preset" in err

    def test_strict_failure(self, capsys):
        code, _, err = run(capsys, "run", "nonextension-demo", "--strict")
        assert code == 1
        assert "strict" in err

    def test_strict_success(self, capsys):
        assert run(capsys, "run", "cone-scaling-pullback", "--strict")[0] == 0

    def test_param_override_and_errors(self, capsys):
        code, out, _ = run(capsys, "run", "example1-halfline", "--param", "eps=0.1", "--format", "json")
        assert code == 0
        assert json.loads(out)["parameters"]["eps"] == [0.1]
        assert run(capsys, "run", "example1-halfline", "--param", "bogus=1")[0] == 2
        assert run(capsys, "run", "example1-halfline", "--param", "eps")[0] == 2
        assert run(capsys, "run", "cone-scaling-pullback", "--k", "2")[0] == 2

    def test_unwritable_out(self, capsys, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        code, _, err = run(capsys, "run", "example1-halfline", "--out", str(blocker / "sub"))
        assert code == 2
        assert "cannot write" in err

    def test_byte_identical_reruns(self, capsys, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert run(capsys, "run", "heat-bounds", "--seed", "3", "--out", str(d), "--format", "csv")[0] == 0
        for name in sorted(p.name for p in a.iterdir()):
            if name.endswith(".meta.json"):
                continue
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_list_presets(self, capsys):
        code, out, _ = run(capsys, "list-presets", "--format", "json")
        assert code == 0
        assert len(json.loads(out)) == 11

    def test_help_exit_zero(self, capsys):
        assert run(capsys, "--help")[0] == 0


def test_domain_error_is_value_error():
    assert issubclass(DomainError, ValueError)


@pytest.mark.parametrize("text,value", [("[0.1,1.0]", [0.1, 1.0]), ("[0.5]", [0.5]), ("0.1,0.2", [0.1, 0.2]), ("pi/2", math.pi / 2)])
def test_parameter_values(text, value):
    from locspec.cli import parse_value

    assert parse_value(text) == value
