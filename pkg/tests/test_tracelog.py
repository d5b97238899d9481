import logging
import math

import pytest
from hypothesis import given, settings, strategies as st

from mrphase.benchsuite import rsj_reference_log_text
from mrphase.domain import ClusterProfile, Phase, WorkloadSpec
from mrphase.simcluster import MAP, JobTrace, simulate_job
from mrphase.tracelog import (
    LogDocument,
    LogParseError,
    TruncatedLogError,
    emit_log,
    extract_samples,
    job_metrics,
    parse_log,
)

NOISY = ClusterProfile(noise_sigma=0.05)


def wl(**kw):
    base = dict(name="Word Count", input_mb=500.0, map_selectivity=0.7, reduce_selectivity=0.3, reducer_count=3,
                map_ms_per_record=1e-4, reduce_ms_per_key=2e-3)
    base.update(kw)
    return WorkloadSpec(**base)


def count(doc, prefix):
    return sum(1 for line in doc.lines if line.startswith(prefix))


def test_one_map_task_structure():
    doc = emit_log(simulate_job(NOISY, wl(input_mb=100.0, reducer_count=0), seed=1))
    assert count(doc, "JOB ") == 2
    assert count(doc, "TASK ") == 1
    assert sum(1 for line in doc.lines if "PHASE_MS." in line) == 5
    assert count(doc, "COUNTER ") == 5 + 3


def test_empty_task_list_is_header_and_footer():
    trace = JobTrace("job_empty", wl(), 8, 128.0, (), 0.0)
    doc = emit_log(trace)
    assert doc.lines[0].startswith("JOB job_empty START")
    assert doc.lines[-1] == "JOB job_empty END total_ms=0.0"
    assert count(doc, "TASK ") == 0 and count(doc, "COUNTER ") == 0
    assert parse_log(doc) == trace


@given(st.floats(1, 4000), st.floats(0, 1), st.floats(0, 2), st.integers(0, 20), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_emit_then_parse_round_trips(d, msel, rsel, rt, seed):
    trace = simulate_job(NOISY, wl(input_mb=d, map_selectivity=msel, reduce_selectivity=rsel, reducer_count=rt), seed)
    assert parse_log(emit_log(trace)) == trace
    assert parse_log(LogDocument.from_text(emit_log(trace).text())) == trace


def test_file_round_trip(tmp_path):
    trace = simulate_job(NOISY, wl(name="RSJ Left/Outer %"), seed=4)
    emit_log(trace).write(tmp_path / "job.log")
    assert parse_log(LogDocument.read(tmp_path / "job.log")) == trace


def test_corrupted_value_names_its_line():
    lines = list(emit_log(simulate_job(NOISY, wl(), seed=2)).lines)
    idx = next(i for i, line in enumerate(lines) if "PHASE_MS.SPILL" in line)
    lines[idx] = lines[idx].split("=")[0] + "=abc"
    with pytest.raises(LogParseError) as err:
        parse_log(lines)
    assert err.value.line_no == idx + 1
    assert f"line {idx + 1}" in str(err.value)


def test_missing_footer_is_truncated():
    lines = emit_log(simulate_job(NOISY, wl(), seed=2)).lines[:-1]
    with pytest.raises(TruncatedLogError):
        parse_log(lines)


def test_unknown_lines_are_skipped(caplog):
    trace = simulate_job(NOISY, wl(), seed=2)
    lines = list(emit_log(trace).lines)
    lines.insert(3, "2024-01-01 INFO container allocated")
    lines.insert(1, "# comment")
    with caplog.at_level(logging.WARNING):
        assert parse_log(lines) == trace
    assert "skipped 2" in caplog.text


def test_rsj_reference_fixture_counters():
    trace = parse_log(LogDocument.from_text(rsj_reference_log_text()))
    m = job_metrics(trace)
    assert m.input_mb == 19584
    assert m.map_output_mb == 19584
    assert m.total_mappers == 153
    assert m.total_reducers == 11
    assert m.container_count == 8
    assert m.map_selectivity_pct == 100.0
    assert m.shuffle_mb == pytest.approx(19584)
    assert m.map_total_ms == pytest.approx(33069.0, rel=1e-12)
    assert m.reduce_total_ms == pytest.approx(286257.0, rel=1e-12)


def test_rsj_reference_sample_count():
    samples = extract_samples(parse_log(LogDocument.from_text(rsj_reference_log_text())))
    assert len(samples) == 153 * 5 + 11 * 3 == 798


def test_map_only_four_tasks():
    trace = simulate_job(NOISY, wl(input_mb=512.0, map_selectivity=1.0, reducer_count=0), seed=0)
    samples = extract_samples(trace)
    assert len(trace.tasks) == 4
    assert {s.phase for s in samples} == {Phase.READ, Phase.MAP, Phase.COLLECT, Phase.SPILL, Phase.MERGE}
    assert len(samples) == 20


def test_single_spill_task_has_no_merge_sample():
    trace = simulate_job(NOISY, wl(input_mb=64.0, map_selectivity=1.0, reducer_count=1), seed=0)
    phases = [s.phase for s in extract_samples(trace)]
    assert Phase.MERGE not in phases
    assert len(phases) == 4 + 3


def test_full_block_read_feature():
    trace = simulate_job(NOISY, wl(input_mb=128.0), seed=0)
    read = [s for s in extract_samples(trace) if s.phase is Phase.READ]
    assert [s.features for s in read] == [(128.0,)]


@given(st.floats(1, 3000), st.floats(0, 1), st.integers(1, 10), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_map_output_counters_sum_to_job_volume(d, msel, rt, seed):
    trace = simulate_job(NOISY, wl(input_mb=d, map_selectivity=msel, reducer_count=rt), seed)
    m = job_metrics(trace)
    assert m.map_output_mb == pytest.approx(d * msel, rel=1e-9, abs=1e-9)
    assert m.shuffle_mb == pytest.approx(m.map_output_mb, rel=1e-9, abs=1e-9)
    assert math.fsum(t.counters["input_mb"] for t in trace.tasks_of(MAP)) == pytest.approx(d, rel=1e-12)


def test_log_without_workload_line():
    trace = simulate_job(NOISY, wl(input_mb=700.0, map_selectivity=0.4, reduce_selectivity=0.5), seed=3)
    lines = [line for line in emit_log(trace).lines if not line.startswith("WORKLOAD")]
    lines[0] = lines[0].split(" seed=")[0]
    parsed = parse_log(lines)
    assert parsed.tasks == trace.tasks
    assert parsed.workload.input_mb == pytest.approx(700.0)
    assert parsed.workload.map_selectivity == pytest.approx(0.4)
    assert parsed.workload.reduce_selectivity == pytest.approx(0.5)
    assert parsed.workload.reducer_count == 3
    assert job_metrics(parsed) == job_metrics(trace)
