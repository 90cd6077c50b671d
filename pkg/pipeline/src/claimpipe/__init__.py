"""Claim-text embedding pipeline for the patent similarity engine."""

from .augment import (
    FinetuneResult,
    PipelineStepError,
    finetune_augsbert,
    read_sts_file,
    run_pipeline,
    sample_pairs_via_engine,
    write_sts_file,
)
from .claims import ClaimDocument, read_claims, write_texts
from .config import PipelineConfig
from .encode import encode_corpus, encode_documents, load_encoder, write_engine_jsonl

__version__ = "0.1.0"
