import json
import math

import numpy as np
import pytest

import iqpp
from iqpp import adapters


@pytest.fixture
def rng():
    return np.random.default_rng(5)


def toy_corpus(tmp_path, rng, n_docs=100, n_queries=12, dim=8):
    centers = rng.normal(size=(4, dim)) * 2.0
    docs = centers[np.arange(n_docs) % 4] + rng.normal(size=(n_docs, dim))
    offsets = np.linspace(0.0, 4.0, n_queries)
    queries = centers[np.arange(n_queries) % 4] + offsets[:, None] * rng.normal(size=(n_queries, dim)) / math.sqrt(dim)
    doc_ids = [f"img{i:04d}" for i in range(n_docs)]
    query_ids = [f"q{i:03d}" for i in range(n_queries)]
    adapters.write_embeddings_binary(doc_ids, adapters.l2_normalize(docs), tmp_path / "collection.emb")
    adapters.write_embeddings_jsonl(query_ids, queries, tmp_path / "queries.jsonl")
    with (tmp_path / "qrels.tsv").open("w") as out:
        for qi, q in enumerate(query_ids):
            for di, d in enumerate(doc_ids):
                out.write(f"{q}\t{d}\t{int(di % 4 == qi % 4)}\n")
    adapters.write_scores({q: float(o) for q, o in zip(query_ids, offsets)}, tmp_path / "ae.tsv",
                          name="ae_error", orientation=adapters.HIGHER_IS_HARDER)
    adapters.write_detections({q: [(10.0, 20.0)] * (i % 3) for i, q in enumerate(query_ids)},
                              tmp_path / "detections.jsonl")
    config = {
        "output_dir": "out",
        "seed": 3,
        "qrels": "qrels.tsv",
        "detections": "detections.jsonl",
        "systems": [{"name": "cos", "collection": "collection.emb", "queries": "queries.jsonl",
                     "similarity": "cosine", "k": 20}],
        "external_scores": [{"path": "ae.tsv"}],
        "params": {"kmeans_k": 8, "feature_removal_m": 2, "feature_removal_l": 2,
                   "class_head_epochs": 3, "folds": 3, "measures": ["ap", "p@20"]},
    }
    (tmp_path / "config.json").write_text(json.dumps(config))
    return doc_ids, query_ids


def test_binary_embeddings_load_normalized(tmp_path, rng):
    ids = ["a", "b", "c"]
    values = adapters.l2_normalize(rng.normal(size=(3, 5)))
    adapters.write_embeddings_binary(ids, values, tmp_path / "e.emb")
    store = iqpp.load_embeddings(tmp_path / "e.emb")
    assert len(store) == 3
    assert store.normalized
    assert store.ids == ids
    np.testing.assert_allclose(np.linalg.norm(store.values, axis=1), 1.0, atol=1e-5)
    assert iqpp.validate_embeddings(store.ids, store.values) == []


def test_python_writer_matches_engine_bytes(tmp_path, rng):
    ids = ["x", "yé", "z"]
    values = rng.normal(size=(3, 4)).astype(np.float32)
    adapters.write_embeddings_binary(ids, values, tmp_path / "py.emb")
    iqpp.write_embeddings(iqpp.EmbeddingStore(ids, values), tmp_path / "cpp.emb")
    assert (tmp_path / "py.emb").read_bytes() == (tmp_path / "cpp.emb").read_bytes()


def test_jsonl_embeddings_and_validation_errors(tmp_path, rng):
    values = rng.normal(size=(4, 3))
    adapters.write_embeddings_jsonl(["a", "b", "c", "d"], values, tmp_path / "e.jsonl")
    store = iqpp.load_embeddings(tmp_path / "e.jsonl")
    np.testing.assert_allclose(store.values, values.astype(np.float32))
    bad = values.copy()
    bad[1, 1] = np.nan
    codes = {code for code, _ in iqpp.validate_embeddings(["a", "a", "c", "d"], bad)}
    assert codes == {"DUPLICATE_ID", "NON_FINITE_VALUE"}


def test_score_and_detection_files_round_trip(tmp_path):
    adapters.write_scores({"q1": 0.25, "q2": 1e-9}, tmp_path / "s.tsv", name="vit")
    name, orientation, scores = iqpp.load_scores(tmp_path / "s.tsv")
    assert (name, orientation) == ("vit", "HIGHER_IS_HARDER")
    assert scores == {"q1": 0.25, "q2": 1e-9}
    adapters.write_detections({"blank": [], "q": [(3.0, 4.0)]}, tmp_path / "d.jsonl")
    assert iqpp.load_detections(tmp_path / "d.jsonl") == {"blank": [], "q": [(3.0, 4.0)]}


def test_ranking_and_measures():
    store = iqpp.EmbeddingStore(["a", "b", "c"], np.array([[1, 0], [0, 1], [1, 1]], dtype=np.float32))
    ranked = iqpp.rank(np.array([1.0, 0.1]), store, iqpp.Similarity.COSINE, 3)
    assert [d for d, _ in ranked] == ["a", "c", "b"]
    assert ranked[0][1] == pytest.approx(1 / math.sqrt(1.01))


def test_correlations_and_significance():
    x = [1.0, 2.0, 3.0]
    assert iqpp.kendall_tau(x, [3.0, 1.0, 2.0]) == pytest.approx(-1 / 3)
    assert iqpp.pearson(x, [2 * v + 1 for v in x]) == pytest.approx(1.0)
    assert math.isnan(iqpp.pearson(x, [1.0, 1.0, 1.0]))
    assert iqpp.significance(0.5, 102)["t"] == pytest.approx(5.7735, abs=1e-4)


def test_errors_carry_codes():
    with pytest.raises(iqpp.IqppError) as info:
        iqpp.pearson([1.0, 2.0], [1.0])
    assert info.value.args[0] == "LENGTH_MISMATCH"


def test_pipeline_accepts_adapter_files(tmp_path, rng):
    doc_ids, query_ids = toy_corpus(tmp_path, rng)
    result = iqpp.run_pipeline(tmp_path / "config.json", threads=1)
    predictors = {row["predictor"] for row in result["rows"]}
    assert "ae_error" in predictors
    assert "objects_over_area" in predictors
    assert "meta_regressor" in predictors
    assert (tmp_path / "out" / "report.csv").exists()

    collection = iqpp.load_embeddings(tmp_path / "collection.emb")
    qrels = iqpp.load_qrels(tmp_path / "qrels.tsv", collection)
    assert qrels.relevant_count(query_ids[0]) == 25
    ap = iqpp.average_precision(doc_ids[0::4], qrels, query_ids[0], collection)
    assert ap == pytest.approx(1.0)
    assert iqpp.precision_at_k(doc_ids[0::4][:10], qrels, query_ids[0], collection, 20) == pytest.approx(0.5)


def test_similarity_matrices_readable_from_python(tmp_path, rng):
    toy_corpus(tmp_path, rng)
    paths = iqpp.emit_matrices(tmp_path / "config.json")
    assert len(paths) == 1
    ours = adapters.read_similarity_matrices(paths[0])
    engine = iqpp.load_similarity_matrices(paths[0])
    assert len(ours) == 12
    for (qa, a), (qb, b) in zip(ours, engine):
        assert qa == qb
        assert a.shape == (20, 20)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_allclose(np.diag(a), 1.0, atol=1e-6)
