import json
import pathlib

import pytest

import ontorag

ROOT = pathlib.Path(__file__).resolve().parents[2]
FIXTURE = ROOT / "data" / "fixture"


def test_tokens_and_coordinates():
    assert ontorag.count_tokens("relay trips breaker") == 3
    assert ontorag.count_tokens("a,b") == 3
    assert ontorag.transform_coords((100, 200, 300, 400), 1000, 720) == pytest.approx((72, 144, 216, 288))
    assert ontorag.pad_region((72, 144, 216, 288), (0, 0, 612, 792)) == pytest.approx((52, 44, 236, 388))


def test_hybrid_chunk_partitions_fixture():
    text = (FIXTURE / "elements.jsonl").read_text()
    ids = [json.loads(line)["id"] for line in text.splitlines() if line.strip()]
    chunks = ontorag.hybrid_chunk(text, min_tokens=20, max_tokens=60)
    assert [e for c in chunks for e in c["element_ids"]] == ids


def test_graph_and_eval_helpers():
    edges = [(0, 1), (2, 3)]
    assert ontorag.modularity(4, edges, [0, 0, 1, 1]) == pytest.approx(0.5)
    assert ontorag.modularity(4, edges, [0, 1, 2, 3]) == pytest.approx(-0.25)
    cliques = [(i, j) for base in (0, 4) for i in range(base, base + 4) for j in range(i + 1, base + 4)] + [(3, 4)]
    assert ontorag.leiden(8, cliques) == [0, 0, 0, 0, 1, 1, 1, 1]
    assert ontorag.rouge_l_distance("a b c", "a c") == pytest.approx(0.2)
    assert ontorag.cluster_claims(["relay trips", "relay trips", "breaker opens"]) == [[0, 1], [2]]
    with pytest.raises(ontorag.OntoragError):
        ontorag.modularity(3, [], [0, 1, 2])


def test_pipeline_end_to_end(tmp_path):
    work = tmp_path / "work"
    p = ontorag.Pipeline(str(FIXTURE / "config.json"), workdir=str(work))
    manifest = p.run()
    assert set(manifest["stages"]) == set(ontorag.stage_names())
    assert ontorag.validate_artifacts(str(work)) == []

    result = p.query("Which relays protect the power transformer?", level=0)
    assert result["answer"]
    assert result["context"]["spans"]

    questions = p.generate_questions()
    assert len(questions) == 5
    p.run_conditions(["O0", "SS"])
    verdicts = p.judge(["comprehensiveness"], replicates=2)
    assert len(verdicts) == 10
    rates = ontorag.win_rates(verdicts)
    assert rates
    report = p.report()
    assert (work / "report.json").exists()
    assert "win_rates" in report


def test_config_errors_surface_as_python_exceptions(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"corpus": str(FIXTURE / "elements.jsonl"), "chunking": {"min_tokens": 900, "max_tokens": 10}}))
    with pytest.raises(ontorag.ConfigError, match="chunking"):
        ontorag.Pipeline(str(bad), workdir=str(tmp_path / "w"))
    with pytest.raises(ontorag.OntoragError):
        ontorag.Pipeline(str(tmp_path / "missing.json"))
