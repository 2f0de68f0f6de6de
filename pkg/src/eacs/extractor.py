"""Extractive model: classify each statement of a snippet as important or not.

Statements are encoded token-by-token with an LSTM, the resulting statement
vectors are passed through a second LSTM so each statement sees its
neighbors (importance is relative within a snippet), and a 2-way softmax
head predicts the label. Training targets come from the greedy labeling
oracle; binary cross entropy is computed on P(label=1).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import numcore as nc
from .corpus import Corpus, RawPair, Vocabulary, build_vocabulary, tokenize_comment
from .errors import EmptyCorpus, EmptySnippet, ShapeError, TruncationWarning
from .oracle import label_statements
from .segmenter import SegmentedSnippet, Statement, segment

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-7


@dataclass
class ExtractorConfig:
    embed_dim: int = 64
    hidden_dim: int = 64
    batch_size: int = 8
    lr: float = 3e-3
    dropout: float = 0.1
    epochs: int = 300
    max_statement_tokens: int = 30
    max_statements: int = 30
    seed: int = 13
    weight_decay: float = 0.01
    val_fraction: float = 0.0
    vocab_size: int = 2000
    min_freq: int = 1
    dtype: str = "float32"

    def np_dtype(self):
        return np.dtype(self.dtype)


class ExtractorModel:
    """Token LSTM -> statement vectors -> context LSTM -> softmax head."""

    def __init__(self, vocab_size: int, config: ExtractorConfig, rng: np.random.Generator):
        self.config = config
        self.vocab_size = vocab_size
        e, h = config.embed_dim, config.hidden_dim
        dt = config.np_dtype()

        def weight(name, shape):
            return nc.Parameter(name, nc.xavier_uniform(rng, shape, dtype=dt))

        def zeros(name, shape):
            return nc.Parameter(name, np.zeros(shape, dtype=dt))

        self.embedding = weight("embedding", (vocab_size, e))
        self.tok_wx = weight("tok_wx", (e, 4 * h))
        self.tok_wh = weight("tok_wh", (h, 4 * h))
        self.tok_b = zeros("tok_b", (4 * h,))
        self.ctx_wx = weight("ctx_wx", (h, 4 * h))
        self.ctx_wh = weight("ctx_wh", (h, 4 * h))
        self.ctx_b = zeros("ctx_b", (4 * h,))
        self.cls_w = weight("cls_w", (h, 2))
        self.cls_b = zeros("cls_b", (2,))

    def parameters(self) -> list[nc.Parameter]:
        return [
            self.embedding,
            self.tok_wx,
            self.tok_wh,
            self.tok_b,
            self.ctx_wx,
            self.ctx_wh,
            self.ctx_b,
            self.cls_w,
            self.cls_b,
        ]

    def hyperparameters(self) -> dict:
        c = self.config
        return {
            "embed_dim": c.embed_dim,
            "hidden_dim": c.hidden_dim,
            "dropout": c.dropout,
            "max_statement_tokens": c.max_statement_tokens,
            "max_statements": c.max_statements,
            "vocab_size": self.vocab_size,
        }

    def encode_statements(
        self,
        stmt_ids: Sequence[np.ndarray],
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> nc.Tensor:
        """Contextualized statement embedding matrix, one row per statement."""
        p = self.config.dropout
        rows = []
        for ids in stmt_ids:
            emb = nc.embedding_lookup(self.embedding, ids)
            emb = nc.dropout(emb, p, rng, train=train)
            rows.append(nc.lstm_over(emb, self.tok_wx, self.tok_wh, self.tok_b))
        mat = nc.concat(rows, axis=0) if len(rows) > 1 else rows[0]
        mat = nc.dropout(mat, p, rng, train=train)
        return nc.lstm_over(mat, self.ctx_wx, self.ctx_wh, self.ctx_b, collect=True)

    def classify_statements(self, embeddings: nc.Tensor) -> nc.Tensor:
        """Per-statement probability pairs; each row sums to 1."""
        if embeddings.shape[-1] != self.config.hidden_dim:
            raise ShapeError(
                f"embedding width {embeddings.shape[-1]} != hidden {self.config.hidden_dim}"
            )
        logits = nc.add(nc.matmul(embeddings, self.cls_w), self.cls_b)
        return nc.softmax(logits, axis=-1)

    def statement_probs(
        self,
        stmt_ids: Sequence[np.ndarray],
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> nc.Tensor:
        return self.classify_statements(self.encode_statements(stmt_ids, train=train, rng=rng))


def extractor_loss(probs: nc.Tensor, gold: np.ndarray) -> nc.Tensor:
    """Mean binary cross entropy of P(label=1) against 0/1 gold labels.

    Probabilities are clamped to [1e-7, 1 - 1e-7] so a fully wrong statement
    costs about 16.1 rather than infinity.
    """
    gold = np.asarray(gold, dtype=np.float64).reshape(-1, 1)
    if probs.data.ndim != 2 or probs.shape[1] != 2 or probs.shape[0] != gold.shape[0]:
        raise ShapeError(f"probs {probs.shape} vs gold {gold.shape}")
    p1 = nc.clip(nc.slice_axis(probs, 1, 2, axis=-1), PROB_CLAMP, 1.0 - PROB_CLAMP)
    pos = nc.mul(nc.log(p1), gold)
    neg = nc.mul(nc.log(nc.sub(1.0, p1)), 1.0 - gold)
    return nc.mul(nc.mean_all(nc.add(pos, neg)), -1.0)


@dataclass
class ExtractorSample:
    pair_id: int
    snippet: SegmentedSnippet
    stmt_ids: list[np.ndarray]
    labels: np.ndarray
    comment_tokens: list[str]


def truncate_snippet(snippet: SegmentedSnippet, max_statements: int) -> SegmentedSnippet:
    if len(snippet.statements) <= max_statements:
        return snippet
    warnings.warn(
        f"snippet truncated from {len(snippet.statements)} to {max_statements} statements",
        TruncationWarning,
        stacklevel=2,
    )
    return SegmentedSnippet(
        language=snippet.language,
        statements=snippet.statements[:max_statements],
        full_tokens=snippet.full_tokens,
    )


def build_extractor_dataset(
    pairs: Sequence[RawPair],
    language: str,
    vocab: Vocabulary,
    config: ExtractorConfig,
) -> list[ExtractorSample]:
    samples = []
    for pair in pairs:
        try:
            snippet = truncate_snippet(segment(pair.code, language), config.max_statements)
            comment = tokenize_comment(pair.comment)
        except EmptySnippet:
            continue
        labeled = label_statements(snippet, comment)
        stmt_ids = [
            vocab.encode(st.tokens[: config.max_statement_tokens]) for st in snippet.statements
        ]
        samples.append(
            ExtractorSample(
                pair_id=pair.id,
                snippet=snippet,
                stmt_ids=stmt_ids,
                labels=np.array(labeled.labels, dtype=np.int64),
                comment_tokens=comment,
            )
        )
    return samples


@dataclass
class TrainHistory:
    epochs: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)

    def log_epoch(self, epoch: int, train: float, val: float) -> None:
        self.epochs.append(epoch)
        self.train_loss.append(train)
        self.val_loss.append(val)
        log.info("epoch %d: train loss %.6f, val loss %.6f", epoch, train, val)


@dataclass
class ExtractorTrainResult:
    model: ExtractorModel
    vocab: Vocabulary
    history: TrainHistory
    best_epoch: int


def _dataset_loss(model: ExtractorModel, samples: Sequence[ExtractorSample]) -> float:
    total = 0.0
    for s in samples:
        probs = model.statement_probs(s.stmt_ids, train=False)
        total += extractor_loss(probs, s.labels).item()
    return total / len(samples)


def label_accuracy(model: ExtractorModel, samples: Sequence[ExtractorSample]) -> float:
    """Fraction of statements whose argmax label matches the oracle label."""
    hit = 0
    total = 0
    for s in samples:
        probs = model.statement_probs(s.stmt_ids, train=False).data
        pred = (probs[:, 1] > probs[:, 0]).astype(np.int64)
        hit += int((pred == s.labels).sum())
        total += len(s.labels)
    return hit / max(total, 1)


def train_extractor(
    corpus: Corpus | Sequence[RawPair],
    config: ExtractorConfig,
    language: str = "java",
    vocab: Optional[Vocabulary] = None,
) -> ExtractorTrainResult:
    """Oracle labeling + minibatch AdamW; returns the best-validation model.

    With ``val_fraction`` 0 the validation loss is measured on the training
    set itself (desk-scale default).
    """
    pairs = list(corpus)
    if not pairs:
        raise EmptyCorpus("no pairs to train on")
    if vocab is None:
        vocab = build_vocabulary(pairs, min_freq=config.min_freq, max_size=config.vocab_size)
    samples = build_extractor_dataset(pairs, language, vocab, config)
    if not samples:
        raise EmptyCorpus("no usable samples after segmentation")

    init_rng, shuffle_rng, drop_rng = nc.rng_streams(config.seed)
    model = ExtractorModel(len(vocab), config, init_rng)
    params = model.parameters()
    opt = nc.AdamW(
        params, lr=config.lr, weight_decay=config.weight_decay
    )

    n_val = int(len(samples) * config.val_fraction)
    train_set = samples[: len(samples) - n_val] if n_val else samples
    val_set = samples[len(samples) - n_val :] if n_val else samples

    history = TrainHistory()
    best_val = float("inf")
    best_epoch = -1
    best_state = [p.data.copy() for p in params]
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(train_set))
        for start in range(0, len(order), config.batch_size):
            batch = [train_set[i] for i in order[start : start + config.batch_size]]
            opt.zero_grad()
            with nc.Tape() as tape:
                loss = None
                for s in batch:
                    probs = model.statement_probs(s.stmt_ids, train=True, rng=drop_rng)
                    term = extractor_loss(probs, s.labels)
                    loss = term if loss is None else nc.add(loss, term)
                loss = nc.mul(loss, 1.0 / len(batch))
                tape.backward(loss, params=params)
            opt.step()
        train_loss = _dataset_loss(model, train_set)
        val_loss = train_loss if val_set is train_set else _dataset_loss(model, val_set)
        history.log_epoch(epoch, train_loss, val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_state = [p.data.copy() for p in params]
    for p, data in zip(params, best_state):
        p.data = data
    return ExtractorTrainResult(model=model, vocab=vocab, history=history, best_epoch=best_epoch)


def predict_important(
    code: str,
    model: ExtractorModel,
    vocab: Vocabulary,
    language: str = "java",
) -> tuple[list[Statement], list[int]]:
    """Statements predicted important, in source order.

    A tie at exactly P=0.5 resolves to label 0; when nothing is labeled 1 the
    single highest-P(1) statement is returned so downstream encoders always
    receive input.
    """
    snippet = truncate_snippet(segment(code, language), model.config.max_statements)
    stmt_ids = [
        vocab.encode(st.tokens[: model.config.max_statement_tokens])
        for st in snippet.statements
    ]
    probs = model.statement_probs(stmt_ids, train=False).data
    indices = [i for i in range(len(snippet.statements)) if probs[i, 1] > probs[i, 0]]
    if not indices:
        indices = [int(np.argmax(probs[:, 1]))]
    return [snippet.statements[i] for i in indices], indices
