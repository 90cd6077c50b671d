"""Pipeline configuration: one declarative file plus flag overrides."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a pipeline run needs, serializable as JSON.

    ``model`` is the bi-encoder that produces the corpus embeddings;
    ``cross_encoder_model`` is the pair-scoring teacher fine-tuned in the
    augmentation recipe. Both are plain model identifiers so any
    same-shaped checkpoint can be substituted.
    """

    model: str = "sentence-transformers/all-MiniLM-L6-v2"
    cross_encoder_model: str = "google/bert_uncased_L-2_H-128_A-2"
    max_seq_length: int = 510
    batch_size: int = 32
    normalize: bool = True
    finetune: bool = False
    sts_seed_path: str | None = None
    silver_pairs_path: str | None = None
    target_pairs: int = 500
    bins: int = 5
    seed: int = 0
    epochs: int = 1
    engine_command: str = "patsim"

    def __post_init__(self):
        if self.max_seq_length < 1:
            raise ValueError("max_seq_length must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.target_pairs < 1:
            raise ValueError("target_pairs must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides) -> "PipelineConfig":
        """Read a JSON config file, then apply keyword overrides on top."""
        values: dict = {}
        if path is not None:
            values = json.loads(Path(path).read_text(encoding="utf-8"))
            unknown = set(values) - {f.name for f in dataclasses.fields(cls)}
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)
