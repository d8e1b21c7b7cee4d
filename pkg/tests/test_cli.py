import json

import numpy as np
import pytest

from airways.cli import apply_override, main
from projects import line_project, make_document


@pytest.fixture
def project_file(tmp_path):
    path = tmp_path / "project.json"
    path.write_text(json.dumps(make_document()))
    return path


class TestOverrides:
    def test_lambda_shorthand(self):
        doc = {"weights": {"lambda_k": 1.0}}
        apply_override(doc, "lambda_k=1e6")
        assert doc["weights"]["lambda_k"] == 1e6

    def test_dotted_path(self):
        doc = {}
        apply_override(doc, "solver.max_iter=500")
        assert doc["solver"]["max_iter"] == 500

    def test_top_level(self):
        doc = {"dt": 0.1}
        apply_override(doc, "dt=0.05")
        assert doc["dt"] == 0.05

    def test_malformed_spec_rejected(self):
        with pytest.raises(ValueError, match="key=value"):
            apply_override({}, "novalue")


class TestPlanCommand:
    def test_plan_writes_artifacts(self, project_file, tmp_path):
        out = tmp_path / "out"
        code = main(["plan", "--project", str(project_file),
                     "--out", str(out), "--no-plots"])
        assert code == 0
        assert (out / "trajectory.csv").exists()
        assert (out / "effective_project.json").exists()
        assert (out / "iqp_report.json").exists()
        assert (out / "feasibility.json").exists()
        feasibility = json.loads((out / "feasibility.json").read_text())
        assert feasibility["feasible"] is True

    def test_plan_with_plots(self, project_file, tmp_path):
        out = tmp_path / "out"
        code = main(["plan", "--project", str(project_file),
                     "--out", str(out)])
        assert code == 0
        assert (out / "plots" / "path_topdown.svg").exists()

    def test_override_lands_in_effective_project(self, project_file,
                                                 tmp_path):
        out = tmp_path / "out"
        code = main(["plan", "--project", str(project_file),
                     "--out", str(out), "--no-plots",
                     "--set", "lambda_k=1e6"])
        assert code == 0
        effective = json.loads((out / "effective_project.json").read_text())
        assert effective["weights"]["lambda_k"] == 1e6

    def test_unknown_flag_exits_2(self, project_file, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["plan", "--project", str(project_file),
                  "--out", str(tmp_path), "--bogus"])
        assert exc.value.code == 2

    def test_invalid_project_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"platform": {}}))
        code = main(["plan", "--project", str(bad),
                     "--out", str(tmp_path / "out")])
        assert code == 2

    def test_missing_file_exits_2(self, tmp_path):
        code = main(["plan", "--project", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "out")])
        assert code == 2


class TestSimulateAndReport:
    def test_simulate_and_report_round_trip(self, project_file, tmp_path):
        out = tmp_path / "out"
        assert main(["plan", "--project", str(project_file),
                     "--out", str(out), "--no-plots"]) == 0
        sim_out = tmp_path / "sim"
        code = main(["simulate", "--project", str(project_file),
                     "--trajectory", str(out / "trajectory.csv"),
                     "--out", str(sim_out), "--no-plots"])
        assert code == 0
        assert (sim_out / "simlog.csv").exists()
        summary = json.loads((sim_out / "summary.json").read_text())
        assert summary["rms_position_error"] < 0.1

        code = main(["report", "--project", str(project_file),
                     "--trajectory", str(out / "trajectory.csv")])
        assert code == 0

    def test_report_flags_corrupted_trajectory(self, project_file, tmp_path):
        out = tmp_path / "out"
        assert main(["plan", "--project", str(project_file),
                     "--out", str(out), "--no-plots"]) == 0
        # corrupt one force entry beyond the box
        lines = (out / "trajectory.csv").read_text().splitlines()
        parts = lines[5].split(",")
        parts[9] = "99.0"
        lines[5] = ",".join(parts)
        bad = tmp_path / "bad.csv"
        bad.write_text("\n".join(lines) + "\n")
        code = main(["report", "--project", str(project_file),
                     "--trajectory", str(bad)])
        assert code == 1
