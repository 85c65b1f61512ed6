import json

import pytest

from climafact.cli import main
from climafact.datasets import save_records
from climafact.dense import write_embeddings
from climafact.fid import format_output
from climafact.datasets import VeracityLabel
from conftest import (make_claim_records, random_embeddings,
                      write_feedback_fixture)
from test_datasets import MINI_CFEVER, write_cfever


def make_corpus(tmp_path, n_docs=20, words_per_doc=120):
    path = tmp_path / "docs.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n_docs):
            body = " ".join(f"word{i}x{j} ocean acid carbon".split()[j % 4]
                            for j in range(words_per_doc))
            fh.write(json.dumps({"doc_id": f"d{i}", "title": f"T{i}", "body": body}) + "\n")
    return path


@pytest.fixture()
def built(tmp_path):
    corpus = make_corpus(tmp_path)
    store = tmp_path / "store.cfps"
    assert main(["ingest", "--input", str(corpus), "--format", "jsonl",
                 "--out", str(store), "--source-label", "Pubs"]) == 0
    index = tmp_path / "index.cfix"
    assert main(["index-sparse", "--store", str(store), "--out", str(index)]) == 0
    return {"store": store, "index": index}


class TestIngestAndIndex:
    def test_ingest_and_sparse_index(self, built):
        assert built["store"].exists() and built["index"].exists()
        from climafact.corpus import PassageStore
        assert len(PassageStore.load(built["store"])) == 40

    def test_index_dense(self, built, tmp_path):
        from climafact.corpus import PassageStore
        store = PassageStore.load(built["store"])
        emb = tmp_path / "p.emb"
        write_embeddings(emb, range(len(store)), random_embeddings(len(store), 16, seed=1))
        out = tmp_path / "dense.cfdx"
        assert main(["index-dense", "--store", str(built["store"]),
                     "--embeddings", str(emb), "--out", str(out)]) == 0
        assert out.exists()

    def test_errors_are_clean(self, tmp_path, capsys):
        code = main(["ingest", "--input", str(tmp_path / "missing.jsonl"),
                     "--format", "jsonl", "--out", str(tmp_path / "s")])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestRetrieve:
    def test_single_query(self, built, capsys):
        assert main(["retrieve", "--index", str(built["index"]), "--method", "bm25",
                     "--k", "3", "--query", "ocean acid"]) == 0
        payload = json.loads(capsys.readouterr().out.strip().split("\n")[-1])
        assert payload["query"] == "ocean acid"
        assert len(payload["hits"]) == 3
        assert payload["hits"][0]["rank"] == 1

    def test_batch_claims(self, built, tmp_path):
        claims = tmp_path / "claims.jsonl"
        claims.write_text('{"claim_id": "a", "text": "ocean acid"}\n'
                          '{"claim_id": "b", "text": "carbon"}\n')
        out = tmp_path / "hits.jsonl"
        assert main(["retrieve", "--index", str(built["index"]), "--method", "bm25",
                     "--k", "2", "--claims", str(claims), "--out", str(out)]) == 0
        lines = [json.loads(l) for l in out.read_text().strip().split("\n")]
        assert [l["claim_id"] for l in lines] == ["a", "b"]
        assert all(len(l["hits"]) == 2 for l in lines)

    def test_bpr_requires_vector_source(self, built, tmp_path, capsys):
        code = main(["retrieve", "--index", str(built["index"]), "--method", "bpr",
                     "--query", "x"])
        assert code == 1

    def test_entity_augmented_query(self, built, tmp_path, capsys):
        import threading
        from http.server import BaseHTTPRequestHandler, HTTPServer

        class Annotator(BaseHTTPRequestHandler):
            def do_GET(self):
                body = json.dumps({"Resources": [{
                    "@URI": "http://dbpedia.org/resource/Ocean",
                    "@surfaceForm": "x", "@offset": "0",
                }]}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        server = HTTPServer(("127.0.0.1", 0), Annotator)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        try:
            assert main(["retrieve", "--index", str(built["index"]), "--method", "bm25",
                         "--k", "2", "--query", "unrelated words",
                         "--entity-augment",
                         "--linker-url", f"http://127.0.0.1:{server.server_port}",
                         "--linker-cache", str(tmp_path / "cache")]) == 0
        finally:
            server.shutdown()
        payload = json.loads(capsys.readouterr().out.strip().split("\n")[-1])
        # the query alone matches nothing; the linked concept term does
        assert len(payload["hits"]) == 2

    def test_entity_augment_requires_linker_url(self, built):
        assert main(["retrieve", "--index", str(built["index"]), "--method", "bm25",
                     "--query", "x", "--entity-augment"]) == 1


class TestBuildDataset:
    def test_cfever(self, tmp_path, capsys):
        src = write_cfever(tmp_path / "cfever.jsonl", MINI_CFEVER)
        out = tmp_path / "fev2"
        assert main(["build-dataset", "--source", "cfever", "--mode", "fev2",
                     "--input", str(src), "--seed", "1", "--out", str(out)]) == 0
        for part in ("train", "validation", "test"):
            assert (out / f"{part}.jsonl").exists()
        delta = json.loads((out / "delta_report.json").read_text())
        assert delta["claims_kept"] == 2
        assert delta["expected_claims"] == 907

    def test_feedback(self, tmp_path):
        src = write_feedback_fixture(tmp_path / "feedback.jsonl")
        out = tmp_path / "fb"
        assert main(["build-dataset", "--source", "feedback", "--input", str(src),
                     "--out", str(out), "--seeds", "0", "1"]) == 0
        for seed in (0, 1):
            test_part = out / f"seed_{seed}" / "test.jsonl"
            assert len(test_part.read_text().strip().split("\n")) == 25


class TestEvaluate:
    def test_rouge_and_accuracy(self, tmp_path):
        records = make_claim_records(5, seed=60)
        dataset = tmp_path / "dataset.jsonl"
        save_records(records, dataset)
        predictions = tmp_path / "predictions.jsonl"
        with open(predictions, "w") as fh:
            for r in records:
                fh.write(json.dumps({
                    "claim_id": r.claim_id,
                    "raw": format_output(r.overall_label, r.references[0]),
                }) + "\n")
        report_path = tmp_path / "report.json"
        assert main(["evaluate", "--predictions", str(predictions),
                     "--dataset", str(dataset), "--metrics", "rouge1,rougeL,acc",
                     "--out", str(report_path)]) == 0
        report = json.loads(report_path.read_text())
        assert report["accuracy"] == 1.0
        assert report["rouge1_f"] == 1.0
        assert report["rougeL_f"] == 1.0
        assert report["n"]["matched"] == 5

    def test_with_annotations(self, tmp_path):
        records = make_claim_records(2, seed=61)
        dataset = tmp_path / "dataset.jsonl"
        save_records(records, dataset)
        predictions = tmp_path / "predictions.jsonl"
        with open(predictions, "w") as fh:
            for r in records:
                fh.write(json.dumps({"claim_id": r.claim_id, "raw": "hello there"}) + "\n")
        annotations = tmp_path / "ann.csv"
        annotations.write_text(
            "item_id,annotator_id,task,value\n"
            "i1,a,judgment,yes\ni1,b,judgment,yes\n"
            "i2,a,judgment,no\ni2,b,judgment,no\n"
            "i1,a,rank,1\ni1,b,rank,1\n"
            "i2,a,rank,2\ni2,b,rank,2\n"
        )
        truth = tmp_path / "truth.json"
        truth.write_text(json.dumps({"i1": "yes", "i2": "yes"}))
        report_path = tmp_path / "report.json"
        assert main(["evaluate", "--predictions", str(predictions),
                     "--dataset", str(dataset), "--metrics", "rouge1",
                     "--annotations", str(annotations), "--true-labels", str(truth),
                     "--out", str(report_path)]) == 0
        report = json.loads(report_path.read_text())
        assert report["alpha"] == 1.0
        assert report["mar"] == 1.5
        assert report["v_agree"] == 0.5


class TestExperiment:
    def test_echo_run_from_config(self, built, tmp_path):
        records = make_claim_records(4, seed=62)
        dataset = tmp_path / "test.jsonl"
        save_records(records, dataset)
        config = {
            "schema_version": 1,
            "knowledge_source": str(built["store"]),
            "retriever": "bm25",
            "sparse_index": str(built["index"]),
            "k": 2,
            "test_dataset": str(dataset),
            "backend": {"kind": "echo"},
            "seeds": [0],
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config))
        out = tmp_path / "results"
        assert main(["experiment", "--config", str(config_path), "--out", str(out)]) == 0
        assert (out / "cells.csv").exists()
        rows = (out / "cells.csv").read_text().strip().split("\n")
        assert len(rows) == 2
