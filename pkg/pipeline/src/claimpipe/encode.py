"""Encode claim text into engine-format embedding records."""

from __future__ import annotations

import json
import warnings
from pathlib import Path

import numpy as np

from .claims import ClaimDocument
from .config import PipelineConfig

_MODEL_CACHE: dict[str, object] = {}


def load_encoder(model_name: str, max_seq_length: int):
    """Load a bi-encoder in inference mode, clamping the sequence limit.

    Models are cached per process: encoding and fine-tuning smoke tests
    reuse the same weights instead of reloading them.
    """
    from sentence_transformers import SentenceTransformer

    if model_name not in _MODEL_CACHE:
        _MODEL_CACHE[model_name] = SentenceTransformer(model_name, device="cpu")
    model = _MODEL_CACHE[model_name]
    hard_limit = getattr(model.tokenizer, "model_max_length", max_seq_length)
    if max_seq_length > hard_limit:
        warnings.warn(
            f"max_seq_length {max_seq_length} exceeds the model limit "
            f"{hard_limit}; clamping",
            stacklevel=2,
        )
        max_seq_length = hard_limit
    model.max_seq_length = max_seq_length
    model.eval()
    return model


def encode_documents(
    documents: list[ClaimDocument], config: PipelineConfig, model=None
) -> np.ndarray:
    """Embed every claim; one float32 row per document, longest first inside
    the encoder's own batching, deterministic on CPU."""
    if model is None:
        model = load_encoder(config.model, config.max_seq_length)
    vectors = model.encode(
        [doc.claim_text for doc in documents],
        batch_size=config.batch_size,
        normalize_embeddings=config.normalize,
        convert_to_numpy=True,
        show_progress_bar=False,
    )
    return vectors.astype(np.float32)


def write_engine_jsonl(
    documents: list[ClaimDocument], vectors: np.ndarray, path: str | Path
) -> None:
    """Write records in the engine's JSONL schema: patent_id, labels,
    vector, claim_text."""
    if len(documents) != vectors.shape[0]:
        raise ValueError("documents and vectors differ in length")
    with Path(path).open("w", encoding="utf-8") as handle:
        for doc, vec in zip(documents, vectors):
            handle.write(
                json.dumps(
                    {
                        "patent_id": doc.patent_id,
                        "labels": list(doc.labels),
                        "vector": [float(x) for x in vec],
                        "claim_text": doc.claim_text,
                    }
                )
                + "\n"
            )


def encode_corpus(
    documents: list[ClaimDocument],
    config: PipelineConfig,
    output_path: str | Path,
    model=None,
) -> np.ndarray:
    """Encode claims and write the engine-format embedding file."""
    vectors = encode_documents(documents, config, model=model)
    write_engine_jsonl(documents, vectors, output_path)
    return vectors
