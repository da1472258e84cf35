import csv
import json
import math

import numpy as np
import pytest

from bmv import cli, harness, matcore, report, words
from bmv.errors import DomainError
from bmv.harness import TrialConfig
from bmv.report import CheckReport


def small(checks, trials=2, **kw):
    return TrialConfig(master_seed=7, trials=trials, checks=tuple(checks), **kw)


class TestClassify:
    def test_boundaries(self):
        assert report.classify(0.0, 1.0, 0.0) == report.PASS
        assert report.classify(-1e-9, 1.0, 1e-8) == report.PASS
        assert report.classify(-1e-7, 1.0, 1e-8) == report.FINDING
        assert report.classify(math.nan, 1.0, 1.0) == report.FINDING

    def test_status_auto_filled(self):
        assert CheckReport("t3", -1.0, 1.0, 0.0).status == report.FINDING
        assert CheckReport("t3", -1.0, 1.0, 0.0, status=report.ERROR).status == report.ERROR


class TestReportEmit:
    def reports(self):
        return [CheckReport("t3", float(i) - 1, 2.0, 1e-8, method="exact", n=3, p=4, k=2, j=1, seed=i,
                            details={"x": [1, 2]}) for i in range(3)]

    def test_empty_json(self, tmp_path):
        path = report.report_emit([], "json", tmp_path)
        assert json.loads(path.read_text()) == []

    def test_empty_csv_has_header(self, tmp_path):
        path = report.report_emit([], "csv", tmp_path)
        assert path.read_text().strip().split(",") == list(report.CSV_COLUMNS)

    def test_csv_rows(self, tmp_path):
        path = report.report_emit(self.reports(), "csv", tmp_path)
        rows = list(csv.DictReader(path.open()))
        assert len(rows) == 3
        assert rows[0]["status"] == "finding" and rows[1]["status"] == "pass"
        assert rows[0]["r"] == ""

    def test_json_round_trip(self, tmp_path):
        reps = self.reports() + [CheckReport("t4b", math.nan, 1.0, 0.0, status=report.ERROR)]
        path = report.report_emit(reps, "json", tmp_path)
        back = report.reports_from_json(path.read_text())
        assert [r.to_dict() for r in back[:3]] == [r.to_dict() for r in reps[:3]]
        assert math.isnan(back[3].margin) and back[3].status == report.ERROR

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            report.report_emit([], "xml", tmp_path)


class TestConfig:
    def test_unknown_check(self):
        with pytest.raises(DomainError):
            small(["nope"]).validate()

    def test_bad_grid(self):
        with pytest.raises(DomainError):
            small(["t4b"], grid=(0.0, -1.0, 5)).validate()

    def test_matrices_go_together(self):
        with pytest.raises(DomainError):
            small(["t3"], matrix_a=np.eye(2)).validate()

    def test_seeds_are_stable_and_distinct(self):
        assert harness.trial_seed(1, 0, "t3") == harness.trial_seed(1, 0, "t3")
        assert len({harness.trial_seed(1, i, c) for i in range(20) for c in ("t3", "t4b")}) == 40


class TestRunSuite:
    def test_deterministic(self):
        checks = ["t1i", "t3", "t4b", "det_identity", "e2_diff", "t2c"]
        a = harness.run_suite(small(checks))
        b = harness.run_suite(small(checks))
        assert a.totals == b.totals and a.worst == b.worst
        assert [r.margin for r in a.reports] == [r.margin for r in b.reports]

    def test_thread_count_does_not_change_results(self, monkeypatch):
        checks = ["t3", "lemma1"]
        a = harness.run_suite(small(checks, trials=3))
        monkeypatch.setenv("BMV_THREADS", "3")
        b = harness.run_suite(small(checks, trials=3))
        assert [r.margin for r in a.reports] == [r.margin for r in b.reports]

    def test_totals_match_reports(self):
        m = harness.run_suite(small(["det_identity", "t4a"], trials=3))
        for check, t in m.totals.items():
            reps = [r for r in m.reports if r.check == check]
            assert t["reports"] == len(reps)
            assert t["pass"] + t["finding"] + t["error"] == len(reps)
        assert m.findings == 0 and m.exit_code == harness.EXIT_PASS

    def test_det_identity_clean(self):
        m = harness.run_suite(small(["det_identity"], trials=50))
        assert m.totals["det_identity"]["pass"] == 50

    def test_t2_items_share_instances(self):
        m = harness.run_suite(small(["t2a", "t2b"], trials=1))
        seeds = {r.check: {x.seed for x in m.reports if x.check == r.check} for r in m.reports}
        assert seeds["t2a"] == seeds["t2b"]

    def test_given_matrices(self, tmp_path):
        A, B = matcore.sample_psd(3, 1, cond=10.0), matcore.sample_psd(3, 2, cond=10.0)
        m = harness.run_suite(small(["t3", "det_identity"], matrix_a=A, matrix_b=B))
        assert all(r.n == 3 for r in m.reports)
        assert m.totals["det_identity"]["reports"] == 1

    def test_writes_run(self, tmp_path):
        harness.run_suite(small(["t3"], out_dir=str(tmp_path)))
        assert {p.name for p in tmp_path.iterdir()} == {"reports.json", "reports.csv", "manifest.json"}
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["exit_code"] == 0 and manifest["totals"]["t3"]["finding"] == 0

    def test_consistency_error_becomes_error_report(self, monkeypatch):
        from bmv.errors import ConsistencyError

        def broken(cfg, seed):
            raise ConsistencyError("planted")

        monkeypatch.setitem(harness.RUNNERS, "t3", broken)
        m = harness.run_suite(small(["t3"]))
        assert m.totals["t3"]["error"] == 2
        assert m.exit_code == harness.EXIT_CONSISTENCY


class TestSearch:
    def test_det_word_search_finds_certificate(self, tmp_path):
        res = harness.search_min("det_word_search", TrialConfig(trials=2000, n=3, out_dir=str(tmp_path)))
        assert res.status == "certificate" and res.margin < 0
        ok, det = words.validate_certificate(res.certificate)
        assert ok and det < 0

    def test_t3_search_stays_nonnegative(self):
        res = harness.search_min("t3", TrialConfig(trials=3, n=2), restarts=3, descent_steps=2)
        assert res.status == report.PASS

    def test_e2_search_with_planted_term(self):
        res = harness.search_min("e2_diff", TrialConfig(trials=1, n=2), inject=lambda x: math.cos(3 * x) + 1.5,
                                 restarts=1, descent_steps=0)
        assert res.status == report.FINDING

    def test_unknown_target(self):
        with pytest.raises(DomainError):
            harness.search_min("t1i", TrialConfig())


class TestCli:
    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["verify", "nope"])
        assert exc.value.code == 2

    def test_domain_error_is_usage(self):
        assert cli.main(["verify", "t3", "--trials", "0"]) == harness.EXIT_USAGE

    def test_selftest(self, capsys):
        assert cli.main(["selftest"]) == harness.EXIT_FINDING
        assert capsys.readouterr().out.count("finding") == 3

    def test_verify_passes(self, capsys):
        assert cli.main(["verify", "t3", "--trials", "3", "--n", "2"]) == harness.EXIT_PASS
        assert "t3" in capsys.readouterr().out

    def test_verify_with_matrix_files(self, tmp_path):
        matcore.save_matrix(tmp_path / "a.json", matcore.sample_psd(3, 5, cond=10.0))
        matcore.save_matrix(tmp_path / "b.json", matcore.sample_psd(3, 6, cond=10.0))
        code = cli.main(["verify", "det_identity", "--matrix-a", str(tmp_path / "a.json"),
                         "--matrix-b", str(tmp_path / "b.json"), "--out", str(tmp_path / "out")])
        assert code == harness.EXIT_PASS
        assert (tmp_path / "out" / "manifest.json").exists()

    def test_missing_matrix_file(self, tmp_path):
        code = cli.main(["verify", "t3", "--matrix-a", str(tmp_path / "x.json"), "--matrix-b",
                         str(tmp_path / "y.json")])
        assert code == harness.EXIT_USAGE

    def test_report_csv(self, tmp_path):
        code = cli.main(["report", "--format", "csv", "--out", str(tmp_path), "--checks", "t3", "e2_diff",
                         "--trials", "2"])
        assert code == harness.EXIT_PASS
        rows = list(csv.DictReader((tmp_path / "reports.csv").open()))
        assert {r["check"] for r in rows} == {"t3", "e2_diff"}
        assert (tmp_path / "manifest.json").exists()

    def test_grid_argument(self):
        assert cli.main(["verify", "t4b", "--trials", "1", "--grid", "0:0.1:20"]) == harness.EXIT_PASS
        with pytest.raises(SystemExit):
            cli.main(["verify", "t4b", "--grid", "0:0.1"])
