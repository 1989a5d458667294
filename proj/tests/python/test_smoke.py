import json
import math
import urllib.error
import urllib.request

import pytest

import clickbait as cb


def test_primitives():
    assert cb.tokenize("Hello, World!") == ["hello", ",", "world", "!"]
    assert cb.transport_cost([0.5, 0.5], [0.5, 0.5], [[0, 1], [1, 0]]) == pytest.approx(0.0)
    assert cb.transport_cost([1.0], [0.5, 0.5], [[1, 3]]) == pytest.approx(2.0)
    neg, pos = cb.balanced_class_weights([0] * 16474 + [1] * 5523)
    assert (neg, pos) == (pytest.approx(0.6676, abs=1e-3), pytest.approx(1.9914, abs=1e-3))
    counts = cb.mlp_parameter_counts(383)
    assert (counts["total"], counts["trainable"], counts["non_trainable"]) == (36502, 35802, 700)
    assert counts["layers"] == [19200, 200, 15300, 1200, 602]
    assert cb.auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    report = cb.evaluate_scores([0.9, 0.8, 0.4, 0.2], [1, 0, 1, 0])
    assert report["accuracy"] == 0.5
    assert cb.FEATURE_COUNT == 373


def test_errors_are_typed():
    with pytest.raises(cb.ValidationError):
        cb.balanced_class_weights([1, 1, 1])
    with pytest.raises(cb.IoError):
        cb.load_model("/nonexistent/model.json")
    assert issubclass(cb.ValidationError, cb.ClickbaitError)


def test_embeddings(workspace):
    table = cb.Embeddings.load(str(workspace / "vectors.txt"), 50)
    assert table.dimension == 50
    assert "budget" in table
    assert table.wmd("budget report", "budget report") == pytest.approx(0.0, abs=1e-9)
    assert table.wmd("shocking secret", "budget report") > 0.5
    assert table.wmd("zzzz", "budget") is None
    assert len(table.sentence_vector("budget economy")) == 50


def test_pipeline_and_scoring(workspace, tmp_path):
    summary = cb.ingest([str(workspace / "instances.jsonl")], [str(workspace / "truth.jsonl")],
                        str(tmp_path / "corpus.csv"))
    assert summary["merged"] == 120
    assert summary["clickbait"] == 40

    rows = cb.eda(str(tmp_path / "corpus.csv"), "weekday")
    assert rows == [{"group": "Tuesday", "clickbait": 40, "no_clickbait": 80,
                     "pct_clickbait": pytest.approx(100 / 3)}]

    fz = cb.featurize(str(tmp_path / "corpus.csv"), str(workspace / "vectors.txt"), str(tmp_path / "features.csv"))
    assert fz == {"rows": 120, "features": 373, "schema_version": fz["schema_version"]}

    for kind in ("lr", "rf", "mlp"):
        model = cb.train(str(tmp_path / "features.csv"), kind, epochs=5, batch_size=16, trees=20)
        assert model.model_type == kind
        reports = cb.evaluate(model, str(tmp_path / "features.csv"))
        assert reports["test"]["auc"] > 0.8
        model.save(str(tmp_path / f"{kind}.json"))

    model = cb.load_model(str(tmp_path / "lr.json"))
    assert len(model.feature_names) == 373
    with pytest.raises(cb.ValidationError):
        model.predict([0.0])

    scorer = cb.Scorer(str(tmp_path / "lr.json"), str(workspace / "vectors.txt"))
    request = {"postText": "You won't believe this shocking secret", "targetTitle": "What happened next"}
    result = scorer.score(request, echo=True)
    assert 0.0 <= result["probability"] <= 1.0
    assert result["label"] in ("clickbait", "no-clickbait")
    assert len(result["featureEcho"]) == 373
    assert model.predict(scorer.features(request)) == result["probability"]
    with pytest.raises(cb.ValidationError):
        scorer.score({"postText": ""})

    port = scorer.serve()
    try:
        base = f"http://127.0.0.1:{port}"
        with urllib.request.urlopen(base + "/health") as r:
            assert r.status == 200
        with urllib.request.urlopen(base + "/schema") as r:
            assert len(json.load(r)["featureSchema"]["names"]) == 373
        req = urllib.request.Request(base + "/score", data=json.dumps(request).encode(),
                                     headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req) as r:
            served = json.load(r)
        assert math.isclose(served["probability"], result["probability"], rel_tol=0, abs_tol=0)
        bad = urllib.request.Request(base + "/score", data=b'{"postText": 3}',
                                     headers={"Content-Type": "application/json"})
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(bad)
        assert err.value.code == 422
    finally:
        scorer.stop()
