"""Augmented fine-tuning: cross-encoder teacher, silver pairs, bi-encoder student.

The recipe runs in three steps:

  1. fine-tune a cross-encoder on a small gold STS seed set;
  2. have the engine sample a score-balanced set of in-domain claim pairs
     (through its command-line interface and STS file format), then
     overwrite the engine's cheap lexical silver scores with cross-encoder
     scores;
  3. train the bi-encoder on gold plus silver pairs and re-encode the
     corpus with the adapted model.

Every step failure is reported with the step that raised it.
"""

from __future__ import annotations

import contextlib
import os
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .claims import ClaimDocument, write_texts
from .config import PipelineConfig
from .encode import encode_corpus, load_encoder


@contextlib.contextmanager
def _working_directory(path: Path):
    """The training backends write their default checkpoint directory under
    the working directory; run them inside ours to keep the caller's clean."""
    previous = os.getcwd()
    os.chdir(path)
    try:
        yield
    finally:
        os.chdir(previous)


class PipelineStepError(RuntimeError):
    """A fine-tuning step failed; carries the step identity."""

    def __init__(self, step: str, message: str):
        super().__init__(f"{step} failed: {message}")
        self.step = step


def read_sts_file(path: str | Path) -> list[tuple[float, str, str]]:
    """Parse score<TAB>sentence1<TAB>sentence2 rows; scores come back in [0, 1]."""
    rows: list[tuple[float, str, str]] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path} line {lineno}: expected 3 tab-separated fields")
            score = float(parts[0]) / 5.0
            if not 0.0 <= score <= 1.0 + 1e-9:
                raise ValueError(f"{path} line {lineno}: score out of range")
            rows.append((min(score, 1.0), parts[1], parts[2]))
    if not rows:
        raise ValueError(f"no rows in {path}")
    return rows


def write_sts_file(rows: list[tuple[float, str, str]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for score, s1, s2 in rows:
            handle.write(f"{score * 5.0:.4f}\t{s1}\t{s2}\n")


def sample_pairs_via_engine(
    documents: list[ClaimDocument], config: PipelineConfig, work_dir: Path
) -> Path:
    """Ask the engine for a balanced pair sample with lexical silver scores.

    Talks to the engine strictly through its CLI and STS export format.
    """
    texts_path = work_dir / "claims.txt"
    write_texts(documents, texts_path)
    silver_path = work_dir / "silver_lexical.tsv"
    command = [
        config.engine_command,
        "sample-pairs",
        "--texts", str(texts_path),
        "--target", str(config.target_pairs),
        "--bins", str(config.bins),
        "--seed", str(config.seed),
        "--export-sts", str(silver_path),
    ]
    try:
        proc = subprocess.run(command, capture_output=True, text=True, timeout=600)
    except FileNotFoundError as exc:
        raise PipelineStepError(
            "step 2 (pair sampling)",
            f"engine command {config.engine_command!r} not found; install the engine package",
        ) from exc
    if proc.returncode != 0:
        raise PipelineStepError("step 2 (pair sampling)", proc.stderr.strip())
    return silver_path


def _train_cross_encoder(seed_rows: list[tuple[float, str, str]], config: PipelineConfig):
    import torch
    from torch.utils.data import DataLoader
    from sentence_transformers import InputExample
    from sentence_transformers.cross_encoder import CrossEncoder

    torch.manual_seed(config.seed)
    encoder = CrossEncoder(config.cross_encoder_model, num_labels=1, device="cpu")
    examples = [InputExample(texts=[s1, s2], label=score) for score, s1, s2 in seed_rows]
    loader = DataLoader(examples, shuffle=True, batch_size=min(16, len(examples)))
    encoder.fit(
        train_dataloader=loader,
        epochs=config.epochs,
        warmup_steps=min(10, len(loader)),
        show_progress_bar=False,
    )
    return encoder


def _train_bi_encoder(
    train_rows: list[tuple[float, str, str]], config: PipelineConfig, output_dir: Path
):
    import torch
    from torch.utils.data import DataLoader
    from sentence_transformers import InputExample, losses

    torch.manual_seed(config.seed)
    model = load_encoder(config.model, config.max_seq_length)
    examples = [InputExample(texts=[s1, s2], label=score) for score, s1, s2 in train_rows]
    loader = DataLoader(examples, shuffle=True, batch_size=min(16, len(examples)))
    loss = losses.CosineSimilarityLoss(model)
    model.fit(
        train_objectives=[(loader, loss)],
        epochs=config.epochs,
        warmup_steps=min(10, len(loader)),
        show_progress_bar=False,
    )
    model.save(str(output_dir))
    return model


@dataclass(frozen=True)
class FinetuneResult:
    model_dir: str
    encoded_path: str
    silver_path: str
    n_seed_rows: int
    n_silver_rows: int

    def to_dict(self) -> dict:
        return {
            "model_dir": self.model_dir,
            "encoded_path": self.encoded_path,
            "silver_path": self.silver_path,
            "n_seed_rows": self.n_seed_rows,
            "n_silver_rows": self.n_silver_rows,
        }


def finetune_augsbert(
    documents: list[ClaimDocument],
    config: PipelineConfig,
    output_dir: str | Path,
    work_dir: str | Path | None = None,
) -> FinetuneResult:
    """Run the three-step recipe and emit the adapted model plus a
    re-encoded corpus file.

    Needs ``config.sts_seed_path`` (gold pairs) and the engine command on
    PATH. With ``config.finetune`` off, callers should use plain
    :func:`~claimpipe.encode.encode_corpus` instead; this function always
    trains.
    """
    if config.sts_seed_path is None:
        raise ValueError("config.sts_seed_path is required for fine-tuning")
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    if work_dir is None:
        work_dir = Path(tempfile.mkdtemp(prefix="claimpipe-"))
    else:
        work_dir = Path(work_dir)
        work_dir.mkdir(parents=True, exist_ok=True)

    seed_rows = read_sts_file(config.sts_seed_path)

    try:
        with _working_directory(work_dir):
            cross_encoder = _train_cross_encoder(seed_rows, config)
    except PipelineStepError:
        raise
    except Exception as exc:
        raise PipelineStepError("step 1 (cross-encoder fine-tuning)", str(exc)) from exc

    silver_path = sample_pairs_via_engine(documents, config, work_dir)
    try:
        lexical_rows = read_sts_file(silver_path)
        pairs = [(s1, s2) for _, s1, s2 in lexical_rows]
        scores = cross_encoder.predict(pairs, show_progress_bar=False)
        silver_rows = [
            (float(min(max(score, 0.0), 1.0)), s1, s2)
            for score, (s1, s2) in zip(scores, pairs)
        ]
        final_silver = Path(config.silver_pairs_path or output_dir / "silver.tsv")
        write_sts_file(silver_rows, final_silver)
    except PipelineStepError:
        raise
    except Exception as exc:
        raise PipelineStepError("step 2 (silver labeling)", str(exc)) from exc

    try:
        model_dir = (output_dir / "model").resolve()
        with _working_directory(work_dir):
            model = _train_bi_encoder(seed_rows + silver_rows, config, model_dir)
        encoded_path = output_dir / "encoded.jsonl"
        encode_corpus(documents, config, encoded_path, model=model)
    except PipelineStepError:
        raise
    except Exception as exc:
        raise PipelineStepError("step 3 (bi-encoder training)", str(exc)) from exc

    return FinetuneResult(
        model_dir=str(model_dir),
        encoded_path=str(encoded_path),
        silver_path=str(final_silver),
        n_seed_rows=len(seed_rows),
        n_silver_rows=len(silver_rows),
    )


def run_pipeline(
    documents: list[ClaimDocument],
    config: PipelineConfig,
    output_dir: str | Path,
) -> Path:
    """Encode the corpus, fine-tuning first when the config asks for it.

    With the fine-tune toggle off this is exactly the pretrained encoding
    path; the returned path always points at an engine-loadable JSONL file.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    if config.finetune:
        result = finetune_augsbert(documents, config, output_dir)
        return Path(result.encoded_path)
    encoded_path = output_dir / "encoded.jsonl"
    encode_corpus(documents, config, encoded_path)
    return encoded_path
