"""Encoding: engine-format output, determinism, truncation."""

import json
import subprocess

import numpy as np
import pytest

from claimpipe import PipelineConfig, encode_corpus, encode_documents, read_claims

from conftest import make_claims_file


@pytest.fixture(scope="module")
def documents(tmp_path_factory):
    path = tmp_path_factory.mktemp("claims") / "claims.jsonl"
    make_claims_file(path, n=100, duplicate_pair=True)
    return read_claims(path)


def test_one_vector_per_claim_fixed_dim(documents, encoder, tmp_path):
    config = PipelineConfig()
    out = tmp_path / "encoded.jsonl"
    vectors = encode_corpus(documents, config, out, model=encoder)
    assert vectors.shape == (100, encoder.get_sentence_embedding_dimension())
    lines = [json.loads(l) for l in out.read_text(encoding="utf-8").splitlines()]
    assert len(lines) == 100
    assert set(lines[0]) == {"patent_id", "labels", "vector", "claim_text"}
    assert len(lines[0]["vector"]) == vectors.shape[1]


def test_duplicate_claims_encode_identically(documents, encoder):
    config = PipelineConfig()
    vectors = encode_documents(documents, config, model=encoder)
    # records 0 and 1 share the same claim text
    sim = float(vectors[0] @ vectors[1])
    assert sim >= 1.0 - 1e-5


def test_re_encoding_is_deterministic(documents, encoder):
    config = PipelineConfig()
    first = encode_documents(documents[:20], config, model=encoder)
    second = encode_documents(documents[:20], config, model=encoder)
    np.testing.assert_allclose(first, second, atol=1e-5)


def test_normalized_vectors(documents, encoder):
    config = PipelineConfig(normalize=True)
    vectors = encode_documents(documents[:10], config, model=encoder)
    np.testing.assert_allclose(np.linalg.norm(vectors, axis=1), 1.0, atol=1e-5)


def test_overlong_claim_truncated_not_rejected(encoder, tmp_path):
    path = tmp_path / "long.jsonl"
    long_text = "packed data element processing " * 400  # far past 510 tokens
    path.write_text(json.dumps({
        "patent_id": "1", "labels": ["G06F"], "claim_text": long_text,
    }) + "\n")
    documents = read_claims(path)
    vectors = encode_documents(documents, PipelineConfig(), model=encoder)
    assert vectors.shape[0] == 1
    assert np.all(np.isfinite(vectors))


def test_max_seq_length_clamped_to_model_limit(encoder):
    config = PipelineConfig(max_seq_length=100000)
    from claimpipe import load_encoder

    with pytest.warns(UserWarning, match="clamping"):
        load_encoder(config.model, config.max_seq_length)


def test_engine_ingests_encoded_file(documents, encoder, engine_cli, tmp_path):
    config = PipelineConfig()
    encoded = tmp_path / "encoded.jsonl"
    encode_corpus(documents, config, encoded, model=encoder)
    corpus = tmp_path / "corpus.psbe"
    proc = subprocess.run(
        [engine_cli, "ingest", "--input", str(encoded), "--output", str(corpus), "--normalize"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    report = json.loads(proc.stdout)
    assert report["n_records"] == 100
    assert corpus.exists()


def test_pipeline_bypass_equals_plain_encoding(documents, encoder, tmp_path):
    # fine-tune toggle off: run_pipeline is the pretrained encoding path
    from claimpipe import run_pipeline

    config = PipelineConfig(finetune=False)
    direct = tmp_path / "direct.jsonl"
    encode_corpus(documents[:15], config, direct, model=encoder)
    via_pipeline = run_pipeline(documents[:15], config, tmp_path / "run")
    assert via_pipeline.read_text(encoding="utf-8") == direct.read_text(encoding="utf-8")
