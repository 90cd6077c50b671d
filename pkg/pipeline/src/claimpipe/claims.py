"""Claim documents: the text-side input records of the pipeline."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

CPC_CODE_RE = re.compile(r"[A-Z][0-9]{2}[A-Z]\Z")


@dataclass(frozen=True)
class ClaimDocument:
    """One patent's first claim with its CPC subclass labels."""

    patent_id: str
    claim_text: str
    labels: tuple[str, ...]


def read_claims(path: str | Path) -> list[ClaimDocument]:
    """Parse a claims JSONL file.

    Each line holds ``patent_id``, ``labels``, and either ``claim_text``
    (a string) or ``claims`` (a list, of which only the first entry is
    used: the first claim is the backbone of the claim hierarchy and the
    one the pipeline embeds).
    """
    path = Path(path)
    documents: list[ClaimDocument] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {lineno}: invalid JSON ({exc.msg})") from exc

            pid = obj.get("patent_id")
            if not isinstance(pid, str) or not pid:
                raise ValueError(f"line {lineno}: missing or empty patent_id")

            text = obj.get("claim_text")
            if text is None and isinstance(obj.get("claims"), list) and obj["claims"]:
                text = obj["claims"][0]
            if not isinstance(text, str) or not text.strip():
                raise ValueError(f"line {lineno}: record {pid} has no claim text")

            labels = obj.get("labels")
            if not isinstance(labels, list) or not labels:
                raise ValueError(f"line {lineno}: record {pid} has no labels")
            for code in labels:
                if not isinstance(code, str) or not CPC_CODE_RE.fullmatch(code):
                    raise ValueError(
                        f"line {lineno}: record {pid} has invalid CPC code {code!r}"
                    )

            documents.append(ClaimDocument(pid, text.strip(), tuple(labels)))
    if not documents:
        raise ValueError(f"no claims in {path}")
    return documents


def write_texts(documents: list[ClaimDocument], path: str | Path) -> None:
    """One scrubbed claim per line, the engine's plain-text pair-sampling input."""
    scrub = str.maketrans({"\t": " ", "\n": " ", "\r": " "})
    with Path(path).open("w", encoding="utf-8") as handle:
        for doc in documents:
            handle.write(doc.claim_text.translate(scrub) + "\n")
