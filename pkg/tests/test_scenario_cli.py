import csv
import hashlib
import json
import math
from pathlib import Path

import pytest

from conftest import SQRT2
from mfergodic.cli import EXIT_OK, EXIT_SCENARIO, EXIT_SOLVER, main
from mfergodic.diagnostics import CSV_COLUMNS
from mfergodic.errors import PipelineError, ScenarioError
from mfergodic.runner import emit_report, resolve_output_dir, run_experiment
from mfergodic.scenario import parse_kernel, parse_polynomial, parse_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

MINIMAL = """
grid: {lower: -6.0, upper: 6.0, points: 33}
potential:
  V0: poly [0, 1]
"""


def write(tmp_path, text, name="s.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


class TestParse:
    def test_minimal_defaults(self):
        sc = parse_scenario(MINIMAL)
        assert sc.grid.points == 33
        assert sc.potential.g == 0.0
        assert sc.nparticle.N_list == []
        assert sc.meanfield.tol == 1e-9
        assert sc.diagnostics.girsanov_constant == 0.25
        assert not sc.sde.enabled
        assert sc.scaling is None
        assert sc.output.formats == ["csv", "json"]

    def test_exponent_literals(self):
        sc = parse_scenario(MINIMAL + "meanfield: {tol: 1e-7}\n")
        assert sc.meanfield.tol == 1e-7

    def test_beta_one_rejected(self):
        with pytest.raises(ScenarioError, match=r"beta in \(0, 1\)"):
            parse_scenario(MINIMAL + "scaling: {beta_list: [0.5, 1.0]}\n")

    def test_duplicate_key_cites_both_lines(self):
        text = "grid: {points: 33}\npotential:\n  V0: poly [0, 1]\n  g: 0.1\n  g: 0.2\n"
        with pytest.raises(ScenarioError, match=r"duplicate key 'g' at line 5 \(first defined at line 4\)"):
            parse_scenario(text)

    def test_syntax_error_line(self):
        # the mis-indented key sits on line 4
        with pytest.raises(ScenarioError, match=r"syntax error at line 4"):
            parse_scenario("grid: {points: 33}\npotential:\n  V0: poly\n g: 1\n  x: 2\n")

    def test_unknown_key(self):
        with pytest.raises(ScenarioError, match="unknown key"):
            parse_scenario(MINIMAL + "meanfield: {tolerance: 1e-9}\n")

    def test_unknown_section(self):
        with pytest.raises(ScenarioError, match="unknown section"):
            parse_scenario(MINIMAL + "plots: {}\n")

    def test_missing_section(self):
        with pytest.raises(ScenarioError, match="potential"):
            parse_scenario("grid: {points: 33}\n")

    @pytest.mark.parametrize(
        "extra, rule",
        [
            ("nparticle: {N_list: [5]}", "N in"),
            ("diagnostics: {girsanov_constant: 0.3}", "girsanov_constant"),
            ("meanfield: {mixing: 0}", "mixing"),
            ("sde: {burn_in: 50, T: 10}", "burn_in < T"),
            ("output: {formats: [xml]}", "formats"),
            ("nparticle: {tol_N: fast}", "expected a number"),
        ],
    )
    def test_rules_named(self, extra, rule):
        with pytest.raises(ScenarioError, match=rule):
            parse_scenario(MINIMAL + extra + "\n")

    def test_constructor_strings(self, tmp_path):
        assert parse_polynomial("poly [0, 1, 0.5]") == (0.0, 1.0, 0.5)
        with pytest.raises(ScenarioError):
            parse_polynomial("x^2")
        assert parse_kernel("bump(2)").mass == pytest.approx(1.0)
        with pytest.raises(ScenarioError):
            parse_kernel("lorentz(1)")
        write(tmp_path, "x,value\n-1,0\n0,1\n1,0\n", "k.csv")
        assert float(parse_kernel("table(k.csv)", tmp_path)(0.5)) == pytest.approx(0.5)

    def test_digest_and_base_dir(self, tmp_path):
        p = write(tmp_path, MINIMAL)
        sc = parse_scenario(p)
        assert sc.digest == hashlib.sha256(MINIMAL.encode()).hexdigest()
        assert sc.base_dir == tmp_path


class TestRunner:
    def test_harmonic_report(self, tmp_path):
        text = """
grid: {lower: -8.0, upper: 8.0, points: 1025}
potential: {V0: "poly [0, 1]"}
nparticle:
  N_list: [2, 3]
  points_per_axis: {2: 65, 3: 41}
"""
        rep = run_experiment(parse_scenario(text))
        assert rep.meanfield.E == pytest.approx(SQRT2, abs=1e-3)
        for N in (2, 3):
            assert abs(rep.row(N).entropy_per_particle) < 1e-6
            assert abs(rep.row(N).drift_discrepancy) < 1e-10

    def test_empty_N_list(self, tmp_path):
        sc = parse_scenario(MINIMAL)
        rep = run_experiment(sc)
        files = emit_report(rep, sc, tmp_path)
        rows = read_csv(tmp_path / "report.csv")
        assert rows[0] == list(CSV_COLUMNS)
        assert len(rows) == 2 and rows[1][0] == "meanfield"
        assert {f.name for f in files} == {"report.csv", "report.json", "manifest.json"}

    def test_bochner_warning_propagates(self, tmp_path):
        write(tmp_path, "x,value\n-1,0\n-0.5,0.75\n0,1\n0.5,0.75\n1,0\n", "parabola.csv")
        p = write(tmp_path, MINIMAL + "  v1: table(parabola.csv)\n  g: 0.3\nnparticle: {N_list: [2]}\n")
        rep = run_experiment(parse_scenario(p))
        assert rep.uniqueness_warning
        assert rep.hypotheses["bochner_pass"] is False
        assert len(rep.rows) == 1

    def test_stage_attached(self):
        sc = parse_scenario(MINIMAL + "  v1: gaussian(1.0)\n  g: 0.5\nmeanfield: {max_outer: 1}\n")
        with pytest.raises(PipelineError, match=r"\[meanfield\]"):
            run_experiment(sc)

    def test_output_dir_resolution(self, tmp_path, monkeypatch):
        sc = parse_scenario(write(tmp_path, MINIMAL))
        monkeypatch.setenv("MFERGODIC_OUT", str(tmp_path / "env"))
        assert resolve_output_dir(sc) == tmp_path / "env"
        assert resolve_output_dir(sc, "x") == Path("x")
        sc2 = parse_scenario(write(tmp_path, MINIMAL + "output: {directory: out}\n", "t.yaml"))
        assert resolve_output_dir(sc2) == tmp_path / "out"


SDE_SMALL = MINIMAL + """  v1: gaussian(1.0)
  g: 0.5
nparticle: {N_list: [2]}
sde: {enabled: true, dt: 0.01, T: 3.0, burn_in: 1.0, n_paths: 32, seed: 7, N_list: [2]}
"""


class TestCLI:
    def test_success_and_determinism(self, tmp_path):
        p = write(tmp_path, SDE_SMALL)
        assert main(["run", str(p), "--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(["run", str(p), "--out", str(tmp_path / "b")]) == EXIT_OK
        assert main(["run", str(p), "--out", str(tmp_path / "c"), "--threads", "2"]) == EXIT_OK
        assert main(["run", str(p), "--out", str(tmp_path / "d"), "--seed", "8"]) == EXIT_OK
        a = (tmp_path / "a" / "report.csv").read_bytes()
        assert a == (tmp_path / "b" / "report.csv").read_bytes()
        assert a == (tmp_path / "c" / "report.csv").read_bytes()
        assert a != (tmp_path / "d" / "report.csv").read_bytes()
        assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()

    def test_csv_json_consistent(self, tmp_path):
        p = write(tmp_path, SDE_SMALL)
        assert main(["run", str(p), "--out", str(tmp_path)]) == EXIT_OK
        rows = read_csv(tmp_path / "report.csv")
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["report_version"] == 1
        assert doc["columns"] == rows[0]
        for line, jrow in zip(rows[1:], doc["rows"]):
            for col, cell in zip(rows[0], line):
                v = jrow[col]
                if isinstance(v, float):
                    assert float(cell) == v
                elif v is None:
                    assert cell == "" or math.isnan(float(cell))
                else:
                    assert cell == str(v)
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert man["scenario_sha256"] == hashlib.sha256(SDE_SMALL.encode()).hexdigest()
        assert man["seed"] == 7 and man["report_version"] == 1
        assert sorted(man["files"]) == ["report.csv", "report.json"]

    def test_scenario_error_exit(self, tmp_path, capsys):
        p = write(tmp_path, MINIMAL + "scaling: {beta_list: [1.0]}\n")
        assert main(["run", str(p), "--out", str(tmp_path)]) == EXIT_SCENARIO
        assert "beta in (0, 1)" in capsys.readouterr().err

    def test_solver_failure_exit(self, tmp_path, capsys):
        p = write(tmp_path, MINIMAL + "nparticle: {N_list: [4], points_per_axis: {4: 101}}\n")
        assert main(["run", str(p), "--out", str(tmp_path)]) == EXIT_SOLVER
        assert "nparticle N=4" in capsys.readouterr().err

    def test_output_error_exit(self, tmp_path, capsys):
        blocker = write(tmp_path, "not a directory", "blocker")
        p = write(tmp_path, MINIMAL)
        assert main(["run", str(p), "--out", str(blocker / "sub")]) == EXIT_SOLVER
        assert str(blocker) in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.yaml")]) == EXIT_SCENARIO

    def test_bad_seed(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["run", str(write(tmp_path, MINIMAL)), "--seed", "-3"])


def test_shipped_scenarios_parse():
    for p in sorted(SCENARIOS.glob("*.yaml")):
        parse_scenario(p)
