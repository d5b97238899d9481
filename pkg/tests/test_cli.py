import json
import shutil

import pytest

from mrphase.benchsuite import RSJ_REFERENCE_LOG, rsj_reference_log_text, rsj_reference_workload
from mrphase.cli import main
from mrphase.domain import ClusterProfile
from mrphase.tracelog import LogDocument, parse_log

QUIET = {"noise_sigma": 0.0}


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "quiet.json").write_text(json.dumps(QUIET))
    (root / "noisy.json").write_text(json.dumps({"noise_sigma": 0.05}))
    (root / "rsj_reference.json").write_text(json.dumps(rsj_reference_workload().to_dict()))
    (root / "maponly.json").write_text(json.dumps({"name": "scan", "input_mb": 900, "reducer_count": 0,
                                                   "map_ms_per_record": 1e-4}))
    (root / RSJ_REFERENCE_LOG).write_text(rsj_reference_log_text())
    assert main(["profile", "--cluster", str(root / "quiet.json"), "--out", str(root / "samples")]) == 0
    assert main(["fit", "--samples", str(root / "samples"), "--out", str(root / "fit")]) == 0
    return root


def test_profile_writes_six_csvs(work):
    names = sorted(p.name for p in (work / "samples").glob("*.csv"))
    assert names == ["collect.csv", "merge.csv", "read.csv", "shuffle.csv", "spill.csv", "write.csv"]
    assert (work / "samples" / "manifest.json").exists()


def test_profile_rerun_is_byte_identical(work, tmp_path):
    assert main(["profile", "--cluster", str(work / "quiet.json"), "--out", str(tmp_path)]) == 0
    for p in (work / "samples").glob("*.csv"):
        assert (tmp_path / p.name).read_bytes() == p.read_bytes()


def test_missing_cluster_file(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["profile", "--cluster", str(missing), "--out", str(tmp_path / "o")]) == 2
    assert str(missing) in capsys.readouterr().err


def test_invalid_cluster_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"container_count": 0}')
    assert main(["profile", "--cluster", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_fit_prints_read_slope(work, tmp_path, capsys):
    assert main(["fit", "--samples", str(work / "samples"), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("READ: T = 0.0100 x input_mb + 1.3300")
    assert "10-fold CV" in out
    assert (tmp_path / "models.json").exists()


def test_fit_missing_shuffle_csv(work, tmp_path, capsys):
    shutil.copytree(work / "samples", tmp_path / "s")
    (tmp_path / "s" / "shuffle.csv").unlink()
    assert main(["fit", "--samples", str(tmp_path / "s"), "--out", str(tmp_path / "f")]) == 3
    assert "SHUFFLE" in capsys.readouterr().err


def test_fit_under_sampled(work, tmp_path, capsys):
    shutil.copytree(work / "samples", tmp_path / "s")
    lines = (tmp_path / "s" / "merge.csv").read_text().splitlines()[:5]
    (tmp_path / "s" / "merge.csv").write_text("\n".join(lines) + "\n")
    assert main(["fit", "--samples", str(tmp_path / "s"), "--out", str(tmp_path / "f")]) == 3
    assert "MERGE" in capsys.readouterr().err


def test_predict_reference_job_flags(work, tmp_path, capsys):
    rc = main(["predict", "--models", str(work / "fit" / "models.json"), "--workload", str(work / "rsj_reference.json"),
               "--tmap-ms", "33069", "--treduce-ms", "286257", "--out", str(tmp_path)])
    assert rc == 0
    doc = json.loads((tmp_path / "prediction.json").read_text())
    assert doc["total_ms"] == pytest.approx(263146.11371402437, rel=1e-3)
    assert "predicted total" in capsys.readouterr().out


def test_predict_from_log(work, tmp_path):
    rc = main(["predict", "--models", str(work / "fit" / "models.json"), "--workload", str(work / "rsj_reference.json"),
               "--from-log", str(work / RSJ_REFERENCE_LOG), "--out", str(tmp_path)])
    assert rc == 0
    assert json.loads((tmp_path / "prediction.json").read_text())["total_ms"] == \
        pytest.approx(263146.11371402437, rel=1e-3)


def test_predict_map_only_without_reduce_time(work, tmp_path):
    rc = main(["predict", "--models", str(work / "fit" / "models.json"), "--workload", str(work / "maponly.json"),
               "--tmap-ms", "1200", "--out", str(tmp_path)])
    assert rc == 0
    assert json.loads((tmp_path / "prediction.json").read_text())["reduce_waves"] == 0


def test_predict_without_custom_source(work, tmp_path, capsys):
    rc = main(["predict", "--models", str(work / "fit" / "models.json"), "--workload", str(work / "rsj_reference.json"),
               "--out", str(tmp_path)])
    assert rc == 4
    assert "--from-log" in capsys.readouterr().err


def test_predict_reduce_time_missing(work, tmp_path):
    rc = main(["predict", "--models", str(work / "fit" / "models.json"), "--workload", str(work / "rsj_reference.json"),
               "--tmap-ms", "33069", "--out", str(tmp_path)])
    assert rc == 4


def test_usage_errors_exit_4():
    with pytest.raises(SystemExit) as err:
        main(["fit", "--bogus"])
    assert err.value.code == 4


def test_evaluate_gate(work, tmp_path):
    models = str(work / "fit" / "models.json")
    assert main(["evaluate", "--models", models, "--cluster", str(work / "noisy.json"), "--runs", "1",
                 "--gate", "0.01", "--out", str(tmp_path / "a")]) == 5
    assert main(["evaluate", "--models", models, "--cluster", str(work / "noisy.json"), "--runs", "1",
                 "--out", str(tmp_path / "b")]) == 0
    for name in ("suite_report.csv", "suite_report.md", "breakdown.csv", "manifest.json"):
        assert (tmp_path / "b" / name).exists()


def test_evaluate_custom_suite(work, tmp_path):
    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({"entries": [
        {"algorithm": "Tiny Grep", "pattern": "Filtering",
         "workload": {"name": "Tiny Grep", "input_mb": 700, "map_selectivity": 0.05, "reducer_count": 1}}]}))
    assert main(["evaluate", "--models", str(work / "fit" / "models.json"), "--cluster", str(work / "quiet.json"),
                 "--suite", str(suite), "--runs", "1", "--out", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o" / "suite_report.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("Tiny Grep,")


def test_simulate_writes_parseable_log(work, tmp_path):
    assert main(["simulate", "--workload", str(work / "maponly.json"), "--out", str(tmp_path)]) == 0
    trace = parse_log(LogDocument.read(tmp_path / "job.log"))
    assert trace.container_count == ClusterProfile().container_count


@pytest.mark.parametrize("argv", [
    ["simulate", "--workload", "{w}/rsj_reference.json", "--seed", "7"],
    ["predict", "--models", "{w}/fit/models.json", "--workload", "{w}/rsj_reference.json", "--rates"],
    ["evaluate", "--models", "{w}/fit/models.json", "--cluster", "{w}/noisy.json", "--runs", "2"],
])
def test_replay_is_byte_identical(work, tmp_path, argv):
    argv = [a.format(w=work) for a in argv]
    first = tmp_path / "first"
    assert main([*argv, "--out", str(first)]) in (0, 5)
    second = tmp_path / "second"
    main(["replay", str(first / "manifest.json"), "--out", str(second)])
    produced = sorted(p.name for p in first.iterdir() if p.name != "manifest.json")
    assert produced == sorted(p.name for p in second.iterdir() if p.name != "manifest.json")
    for name in produced:
        assert (second / name).read_bytes() == (first / name).read_bytes(), name
