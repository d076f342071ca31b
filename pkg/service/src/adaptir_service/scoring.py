"""Scoring backends.

The lexical backend restates the reference overlap scorer here so the
service package stays free of any dependency on the training toolkit.
The cross-encoder backend loads transformer checkpoints lazily, so the
package imports fine without torch installed.
"""

from __future__ import annotations

import os
import re
from typing import Sequence

_TOKEN_RE = re.compile(r"[a-z0-9]+")

DOC_WORD_LIMIT = 350
DEVICE_ENV_VAR = "ADAPTIR_SERVICE_DEVICE"
BACKENDS = ("lexical", "cross_encoder")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character."""
    return _TOKEN_RE.findall(text.lower())


def truncate_words(text: str, limit: int = DOC_WORD_LIMIT) -> str:
    """Keep only the first ``limit`` whitespace-separated words."""
    words = text.split()
    if len(words) <= limit:
        return text
    return " ".join(words[:limit])


class LexicalBackend:
    """Fraction of distinct query tokens that also occur in the document."""

    name = "lexical"

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        scores = []
        for query_text, doc_text in pairs:
            q_tokens = set(tokenize(query_text))
            if not q_tokens:
                scores.append(0.0)
                continue
            d_tokens = set(tokenize(doc_text))
            scores.append(len(q_tokens & d_tokens) / len(q_tokens))
        return scores


class CrossEncoderBackend:
    """Transformer relevance scorer; every score lands in [0, 1].

    Classification checkpoints score with a sigmoid (single logit) or a
    softmax over classes, taking the last class as "relevant". Generative
    true/false checkpoints score with a two-way softmax over the first
    generated token's true and false logits. Documents are cut to the
    first 350 words before tokenization.
    """

    name = "cross_encoder"

    def __init__(self, model_name: str, batch_size: int = 16, device: str | None = None):
        import torch
        from transformers import AutoConfig, AutoTokenizer

        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        self._torch = torch
        self.batch_size = batch_size
        self.device = device or os.environ.get(DEVICE_ENV_VAR) or (
            "cuda" if torch.cuda.is_available() else "cpu"
        )
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.generative = bool(AutoConfig.from_pretrained(model_name).is_encoder_decoder)
        if self.generative:
            from transformers import AutoModelForSeq2SeqLM

            self.model = AutoModelForSeq2SeqLM.from_pretrained(model_name)
            self.true_id = self._single_token_id("true")
            self.false_id = self._single_token_id("false")
        else:
            from transformers import AutoModelForSequenceClassification

            self.model = AutoModelForSequenceClassification.from_pretrained(model_name)
        self.model.to(self.device)
        self.model.eval()

    def _single_token_id(self, word: str) -> int:
        ids = self.tokenizer.encode(word, add_special_tokens=False)
        if not ids:
            raise ValueError(f"model tokenizer cannot encode {word!r}")
        return ids[0]

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        scores: list[float] = []
        for start in range(0, len(pairs), self.batch_size):
            batch = [(q, truncate_words(d)) for q, d in pairs[start:start + self.batch_size]]
            scores.extend(self._score_batch(batch))
        return scores

    def _score_batch(self, batch: list[tuple[str, str]]) -> list[float]:
        torch = self._torch
        with torch.no_grad():
            if self.generative:
                texts = [f"Query: {q} Document: {d} Relevant:" for q, d in batch]
                enc = self.tokenizer(texts, padding=True, truncation=True, return_tensors="pt")
                enc = enc.to(self.device)
                decoder_input = torch.full(
                    (len(batch), 1),
                    self.model.config.decoder_start_token_id,
                    dtype=torch.long,
                    device=self.device,
                )
                logits = self.model(**enc, decoder_input_ids=decoder_input).logits[:, 0, :]
                two_way = logits[:, [self.true_id, self.false_id]]
                return torch.softmax(two_way, dim=-1)[:, 0].tolist()
            enc = self.tokenizer(
                [q for q, _ in batch],
                [d for _, d in batch],
                padding=True,
                truncation=True,
                return_tensors="pt",
            ).to(self.device)
            logits = self.model(**enc).logits
            if logits.shape[-1] == 1:
                return torch.sigmoid(logits[:, 0]).tolist()
            return torch.softmax(logits, dim=-1)[:, -1].tolist()


def build_backend(name: str, model_name: str = "", batch_size: int = 16):
    """Instantiate a backend by CLI name."""
    if name == "lexical":
        return LexicalBackend()
    if name == "cross_encoder":
        if not model_name:
            raise ValueError("cross_encoder backend needs a model name or path")
        return CrossEncoderBackend(model_name, batch_size=batch_size)
    raise ValueError(f"backend must be one of {BACKENDS}, got {name!r}")
