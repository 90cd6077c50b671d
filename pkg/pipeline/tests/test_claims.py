"""Claims file parsing."""

import json

import pytest

from claimpipe import read_claims, write_texts

from conftest import make_claims_file


def test_reads_valid_file(tmp_path):
    path = tmp_path / "claims.jsonl"
    make_claims_file(path, n=20)
    documents = read_claims(path)
    assert len(documents) == 20
    assert documents[0].patent_id == "9000000"
    assert documents[0].labels == ("A01B",)
    assert documents[0].claim_text


def test_first_claim_used_from_list(tmp_path):
    path = tmp_path / "claims.jsonl"
    path.write_text(json.dumps({
        "patent_id": "1",
        "labels": ["G06F"],
        "claims": ["the first claim", "the second claim"],
    }) + "\n")
    documents = read_claims(path)
    assert documents[0].claim_text == "the first claim"


def test_empty_claim_rejected(tmp_path):
    path = tmp_path / "claims.jsonl"
    path.write_text(json.dumps({"patent_id": "1", "labels": ["G06F"], "claim_text": "  "}) + "\n")
    with pytest.raises(ValueError, match="no claim text"):
        read_claims(path)


def test_missing_labels_rejected(tmp_path):
    path = tmp_path / "claims.jsonl"
    path.write_text(json.dumps({"patent_id": "1", "claim_text": "text", "labels": []}) + "\n")
    with pytest.raises(ValueError, match="no labels"):
        read_claims(path)


def test_invalid_code_rejected(tmp_path):
    path = tmp_path / "claims.jsonl"
    path.write_text(json.dumps({"patent_id": "1", "claim_text": "text", "labels": ["nope"]}) + "\n")
    with pytest.raises(ValueError, match="invalid CPC code"):
        read_claims(path)


def test_line_number_in_errors(tmp_path):
    path = tmp_path / "claims.jsonl"
    good = json.dumps({"patent_id": "1", "claim_text": "text", "labels": ["G06F"]})
    path.write_text(good + "\n{bad\n")
    with pytest.raises(ValueError, match="line 2"):
        read_claims(path)


def test_write_texts_scrubs_whitespace(tmp_path):
    path = tmp_path / "claims.jsonl"
    path.write_text(json.dumps({
        "patent_id": "1", "labels": ["G06F"], "claim_text": "line one\nline two\ttabbed",
    }) + "\n")
    documents = read_claims(path)
    out = tmp_path / "texts.txt"
    write_texts(documents, out)
    assert out.read_text(encoding="utf-8") == "line one line two tabbed\n"
