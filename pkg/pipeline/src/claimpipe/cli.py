"""Pipeline CLI: encode claims, or run the full fine-tuning recipe."""

from __future__ import annotations

import json

import click

from .augment import PipelineStepError, finetune_augsbert
from .claims import read_claims
from .config import PipelineConfig
from .encode import encode_corpus


@click.group()
def main():
    """Claim-text embedding pipeline for the patent similarity engine."""


@main.command()
@click.option("--claims", "claims_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--model", default=None, help="Bi-encoder model identifier.")
@click.option("--max-seq-length", default=None, type=int)
@click.option("--batch-size", default=None, type=int)
def encode(claims_path, output_path, config_path, model, max_seq_length, batch_size):
    """Embed claims and write an engine-format JSONL embedding file."""
    config = PipelineConfig.load(
        config_path, model=model, max_seq_length=max_seq_length, batch_size=batch_size
    )
    try:
        documents = read_claims(claims_path)
        vectors = encode_corpus(documents, config, output_path)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(json.dumps({
        "config": config.to_dict(),
        "claims": claims_path,
        "output": output_path,
        "n_records": len(documents),
        "dim": int(vectors.shape[1]),
    }, indent=2))


@main.command()
@click.option("--claims", "claims_path", required=True, type=click.Path(exists=True))
@click.option("--sts-seed", "sts_seed", required=True, type=click.Path(exists=True))
@click.option("--output-dir", required=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--target-pairs", default=None, type=int)
@click.option("--epochs", default=None, type=int)
@click.option("--seed", default=None, type=int)
def finetune(claims_path, sts_seed, output_dir, config_path, target_pairs, epochs, seed):
    """Run the three-step augmented fine-tuning recipe at toy scale."""
    config = PipelineConfig.load(
        config_path,
        sts_seed_path=sts_seed,
        target_pairs=target_pairs,
        epochs=epochs,
        seed=seed,
        finetune=True,
    )
    try:
        documents = read_claims(claims_path)
        result = finetune_augsbert(documents, config, output_dir)
    except (PipelineStepError, ValueError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(json.dumps({
        "config": config.to_dict(),
        "claims": claims_path,
        **result.to_dict(),
    }, indent=2))


if __name__ == "__main__":
    main()
