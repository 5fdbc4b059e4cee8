import json
import math
import os
import subprocess

import pytest

import ctxshape

CLI = os.environ.get("CTXSHAPE_CLI")


def test_kl_matches_closed_form():
    p = [(1, 0.9), (2, 0.1)]
    q = [(1, 0.5), (2, 0.5)]
    expected = 0.9 * math.log(0.9 / 0.5) + 0.1 * math.log(0.1 / 0.5)
    assert ctxshape.kl_divergence(p, q) == pytest.approx(expected, abs=1e-9)
    assert ctxshape.kl_divergence(p, p) == 0.0


def test_mock_scores():
    b = ctxshape.mock_backend()
    q = "What is the capital of France?"
    assert ctxshape.ecs_utility(b, [], "The capital of France is Paris.", q, "Paris") > 0.05
    assert ctxshape.trajectory_divergence(b, [], "the conductor enjoys jazz", q) <= 1e-9
    assert b.call_count > 0
    assert set(b.cache_stats()) == {"prefix_tokens_reused", "tokens_encoded", "cold_calls"}


def test_filter_stream_decisions():
    b = ctxshape.mock_backend()
    r = ctxshape.filter_stream(
        b,
        [("a", "The capital of France is Paris."), ("b", "Paris is France's capital city."),
         ("c", "The conductor enjoys jazz.")],
        "What is the capital of France?",
        answer="Paris",
    )
    assert [s["decision"] for s in r["log"]] == ["accept", "reject", "reject"]
    assert r["accepted"] == ["a"]
    assert r["complete"]


def test_selection_and_metric():
    chosen = ctxshape.select_top_k([("x", 0.5), ("y", 0.9), ("z", 0.1)], 2)
    assert set(chosen) == {"x", "y"}
    assert ctxshape.f1_at_gold_size({"x", "y"}, {"y", "z"}) == pytest.approx(0.5)


def test_benchmark_on_generated_corpus():
    corpus = ctxshape.generate_synthetic(seed=3, questions=4)
    assert len(corpus["instances"]) == 4
    report = ctxshape.run_benchmark({"methods": ["ecs_answer", "tfidf", "random"]}, corpus)
    by_method = {m["method"]: m for m in report["methods"]}
    assert by_method["ecs_answer"]["mean_f1"] == pytest.approx(1.0)
    assert len(report["results"]) == 3 * 4


def test_errors_map_to_exceptions(tmp_path):
    with pytest.raises(ctxshape.InvalidArgument):
        ctxshape.select_top_k([("x", 1.0)], 2)
    with pytest.raises(ctxshape.ParseError):
        ctxshape.load_corpus("{not json")
    with pytest.raises(ctxshape.InvalidArgument):
        ctxshape.make_backend({"kind": "nope"})
    assert issubclass(ctxshape.ContextOverflowError, ctxshape.BackendError)


@pytest.mark.skipif(not CLI, reason="CLI binary not provided")
def test_cli_round_trip(tmp_path):
    corpus = tmp_path / "c.json"
    report = tmp_path / "r.json"
    subprocess.run([CLI, "gen", "--seed", "2", "--questions", "3", "--output", str(corpus)], check=True)
    out = subprocess.run([CLI, "validate", str(corpus)], check=True, capture_output=True, text=True)
    assert out.stdout.startswith("ok: 3 instances")
    out = subprocess.run([CLI, "run", "--corpus", str(corpus), "--methods", "all", "--output", str(report)],
                         check=True, capture_output=True, text=True)
    assert out.stdout.splitlines()[0] == "method,status,instances,mean_f1"
    assert json.loads(report.read_text())["report_schema_version"] == 1

    stream = "\n".join(json.dumps(x) for x in [{"id": "a", "text": "The capital of France is Paris."},
                                               {"id": "b", "text": "The conductor enjoys jazz."}])
    out = subprocess.run([CLI, "filter", "--input", "-", "--query", "What is the capital of France?",
                          "--answer", "Paris"], input=stream, check=True, capture_output=True, text=True)
    lines = [json.loads(x) for x in out.stdout.splitlines()]
    assert [x["decision"] for x in lines[:2]] == ["accept", "reject"]
    assert lines[-1]["complete"] is True


@pytest.mark.skipif(not CLI, reason="CLI binary not provided")
def test_cli_reports_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    r = subprocess.run([CLI, "validate", str(bad)], capture_output=True, text=True)
    assert r.returncode == 1
    assert r.stderr.startswith("error:")
