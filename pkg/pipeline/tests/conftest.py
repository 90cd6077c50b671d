"""Fixtures: synthetic claims, STS seed files, model and engine availability."""

from __future__ import annotations

import json
import shutil

import numpy as np
import pytest

from claimpipe import PipelineConfig, load_encoder

TOPICS = {
    "A01B": ["soil", "plough", "furrow", "tillage", "harrow", "seedbed"],
    "C07D": ["heterocyclic", "compound", "substituent", "pyridine", "synthesis", "reagent"],
    "D04H": ["nonwoven", "fabric", "fiber", "web", "bonding", "filament"],
    "F16L": ["pipe", "coupling", "sealing", "flange", "conduit", "gasket"],
    "G06F": ["processor", "memory", "instruction", "register", "cache", "execution"],
    "H04L": ["packet", "router", "protocol", "network", "transmission", "node"],
}


def claim_sentence(code: str, i: int, rng: np.random.Generator) -> str:
    words = TOPICS[code]
    picked = rng.choice(words, size=4, replace=False)
    return (
        f"A {picked[0]} apparatus comprising a {picked[1]} assembly, "
        f"a {picked[2]} unit coupled to the {picked[3]} element, "
        f"and a controller configured to operate variant {i}."
    )


def make_claims_file(path, n=100, seed=0, duplicate_pair=False):
    """Synthetic claims JSONL spanning six CPC subclasses."""
    rng = np.random.default_rng(seed)
    codes = list(TOPICS)
    records = []
    for i in range(n):
        code = codes[i % len(codes)]
        records.append({
            "patent_id": f"{9000000 + i}",
            "labels": [code],
            "claim_text": claim_sentence(code, i, rng),
        })
    if duplicate_pair:
        records[1]["claim_text"] = records[0]["claim_text"]
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
    return records


def make_sts_seed(path, n=100, seed=1):
    """Gold-style seed pairs: near-paraphrases scored high, cross-topic low."""
    rng = np.random.default_rng(seed)
    codes = list(TOPICS)
    rows = []
    for i in range(n):
        code = codes[i % len(codes)]
        a = claim_sentence(code, i, rng)
        if i % 2 == 0:
            b = a.replace("comprising", "that includes")
            score = 4.5
        else:
            other = codes[(i + 3) % len(codes)]
            b = claim_sentence(other, i + 1000, rng)
            score = 0.5
        rows.append(f"{score:.4f}\t{a}\t{b}")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(rows) + "\n")


@pytest.fixture(scope="session")
def encoder():
    config = PipelineConfig()
    try:
        return load_encoder(config.model, config.max_seq_length)
    except Exception as exc:  # model not cached and not downloadable
        pytest.skip(f"bi-encoder unavailable: {exc}")


@pytest.fixture(scope="session")
def engine_cli():
    command = PipelineConfig().engine_command
    if shutil.which(command) is None:
        pytest.skip(f"engine command {command!r} not on PATH")
    return command
