#!/usr/bin/env python3
"""Record the request/response contract the Python clients actually speak.

Captures the real HTTP bodies emitted by the climafact remote-generation and
encoder clients (via a stubbed session), plus the service-side contracts for
/train and /classify, into recorded_requests.json. The service's protocol
conformance test replays every entry and validates status codes and response
field types.

Regenerate with:  python3 service/fixtures/record_requests.py
"""
import json
from pathlib import Path

from climafact.datasets import (VeracityLabel, ClaimRecord, EvidenceSentence,
                                save_records, load_records)
from climafact.fid import EncoderClient, RemoteBackend, assemble


class RecordingSession:
    """Stands in for requests.Session; captures JSON bodies, answers canned."""

    def __init__(self, canned):
        self.canned = canned
        self.captured = []

    def post(self, url, json=None, timeout=None):
        self.captured.append({"url": url, "json": json})
        canned = self.canned

        class Response:
            def raise_for_status(self):
                pass

            def json(self):
                return canned

        return Response()


def capture_generate_body():
    session = RecordingSession({"raw": "REFUTES; recorded"})
    backend = RemoteBackend("http://service", session=session)
    fid_input = assemble(
        "the oceans cannot acidify",
        ["marine life is affected by falling ocean pH",
         "dissolved carbon dioxide forms carbonic acid"],
        claim_id="rec-1",
    )
    backend.generate(fid_input)
    return session.captured[0]["json"]


def capture_encode_body():
    session = RecordingSession({"dim": 4, "vectors": [[0.0, 0.0, 0.0, 1.0]]})
    client = EncoderClient("http://service", session=session)
    client.encode(["the oceans cannot acidify"])
    return session.captured[0]["json"]


def tiny_records(tmp_file: Path):
    labels = [VeracityLabel.REFUTES, VeracityLabel.REFUTES,
              VeracityLabel.SUPPORTS, VeracityLabel.REFUTES]
    records = []
    for i, label in enumerate(labels):
        ref = f"reference explanation number {i} about ocean acid levels"
        records.append(ClaimRecord(
            claim_id=f"t{i}", text=f"training claim {i} ocean acid",
            evidence=[EvidenceSentence(ref, label)],
            overall_label=label, references=[ref]))
    save_records(records, tmp_file)
    return [json.loads(line) for line in tmp_file.read_text().splitlines()]


def main():
    fixtures = Path(__file__).parent
    record_dicts = tiny_records(fixtures / "protocol_train_records.jsonl")

    suite = [
        {
            "name": "health",
            "method": "GET", "path": "/health", "body": None,
            "expect": {"status": 200, "fields": [["status", "string"]]},
        },
        {
            "name": "encode_json",
            "method": "POST", "path": "/encode",
            "body": capture_encode_body(),
            "expect": {"status": 200,
                       "fields": [["dim", "number"], ["vectors", "array"]]},
        },
        {
            "name": "encode_tokens",
            "method": "POST", "path": "/encode_tokens",
            "body": {"texts": ["oceans acidify as carbon dioxide dissolves"]},
            "expect": {"status": 200,
                       "fields": [["dim", "number"], ["results", "array"]]},
        },
        {
            "name": "train_generate",
            "method": "POST", "path": "/train",
            "body": {"task": "generate", "records": record_dicts,
                     "config": {"steps": 5, "evalEvery": 0}},
            "expect": {"status": 200,
                       "fields": [["steps", "number"], ["initial_loss", "number"],
                                  ["final_loss", "number"]]},
        },
        {
            "name": "generate",
            "method": "POST", "path": "/generate",
            "body": capture_generate_body(),
            "expect": {"status": 200, "fields": [["raw", "string"]]},
        },
        {
            "name": "generate_empty_contexts_rejected",
            "method": "POST", "path": "/generate",
            "body": {"claim_id": "rec-2", "contexts": [], "max_new_tokens": 150},
            "expect": {"status": 400, "fields": [["error", "string"]]},
        },
        {
            "name": "train_classify",
            "method": "POST", "path": "/train",
            "body": {"task": "classify", "records": record_dicts},
            "expect": {"status": 200, "fields": [["labels", "array"]]},
        },
        {
            "name": "classify",
            "method": "POST", "path": "/classify",
            "body": {"claim": "training claim 0 ocean acid",
                     "explanation": "reference explanation number 0 about ocean acid levels"},
            "expect": {"status": 200, "fields": [["label", "string"]]},
        },
        {
            "name": "classify_missing_explanation_rejected",
            "method": "POST", "path": "/classify",
            "body": {"claim": "no explanation provided"},
            "expect": {"status": 400, "fields": [["error", "string"]]},
        },
    ]

    out = fixtures / "recorded_requests.json"
    out.write_text(json.dumps({"suite": suite}, indent=2) + "\n")
    print(f"wrote {out} ({len(suite)} entries)")


if __name__ == "__main__":
    main()
