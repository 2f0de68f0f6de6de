"""Versioned binary checkpoints.

Layout: one UTF-8 JSON header line (format version, model kind,
hyperparameters, fusion order, vocabulary token list), then per parameter in
declaration order a ``name dim0 dim1 ...`` line followed by the raw
little-endian float32 values. Save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .abstracter import AbstracterConfig, AbstracterModel
from .corpus import Vocabulary
from .errors import CorruptCheckpoint, IoError, VersionError
from .extractor import ExtractorConfig, ExtractorModel

FORMAT_VERSION = 1
KINDS = ("extractor", "abstracter")


@dataclass
class Checkpoint:
    kind: str
    hyperparameters: dict
    fusion_order: Optional[str]
    vocabulary: list[str]
    params: list[tuple[str, np.ndarray]]


def save_checkpoint(ckpt: Checkpoint, path: str) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "kind": ckpt.kind,
        "hyperparameters": ckpt.hyperparameters,
        "fusion_order": ckpt.fusion_order,
        "vocabulary": ckpt.vocabulary,
    }
    header_line = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    try:
        with open(path, "wb") as fh:
            fh.write(header_line.encode("utf-8") + b"\n")
            for name, arr in ckpt.params:
                if " " in name:
                    raise ValueError(f"parameter name {name!r} contains a space")
                shape = " ".join(str(d) for d in arr.shape)
                fh.write(f"{name} {shape}\n".encode("utf-8"))
                fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    except OSError as exc:
        raise IoError(f"cannot write checkpoint {path}: {exc}") from exc


def _read_line(fh, path: str) -> bytes:
    line = fh.readline()
    if not line.endswith(b"\n"):
        raise CorruptCheckpoint(f"{path}: truncated before end of a header line")
    return line[:-1]


def load_checkpoint(path: str) -> Checkpoint:
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise IoError(f"cannot read checkpoint {path}: {exc}") from exc
    with fh:
        try:
            header = json.loads(_read_line(fh, path).decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise CorruptCheckpoint(f"{path}: invalid header") from exc
        version = header.get("format_version")
        if version != FORMAT_VERSION:
            raise VersionError(f"{path}: format version {version!r}, expected {FORMAT_VERSION}")
        kind = header.get("kind")
        if kind not in KINDS:
            raise CorruptCheckpoint(f"{path}: unknown model kind {kind!r}")
        params: list[tuple[str, np.ndarray]] = []
        while True:
            line = fh.readline()
            if not line:
                break
            if not line.endswith(b"\n"):
                raise CorruptCheckpoint(f"{path}: truncated parameter header")
            fields = line[:-1].decode("utf-8").split(" ")
            name, dims = fields[0], fields[1:]
            try:
                shape = tuple(int(d) for d in dims)
            except ValueError as exc:
                raise CorruptCheckpoint(f"{path}: bad shape for {name!r}") from exc
            nbytes = int(np.prod(shape, dtype=np.int64)) * 4
            blob = fh.read(nbytes)
            if len(blob) != nbytes:
                raise CorruptCheckpoint(f"{path}: truncated values for {name!r}")
            params.append((name, np.frombuffer(blob, dtype="<f4").reshape(shape).copy()))
    return Checkpoint(
        kind=kind,
        hyperparameters=header.get("hyperparameters", {}),
        fusion_order=header.get("fusion_order"),
        vocabulary=list(header.get("vocabulary", [])),
        params=params,
    )


def checkpoint_from_extractor(model: ExtractorModel, vocab: Vocabulary) -> Checkpoint:
    return Checkpoint(
        kind="extractor",
        hyperparameters=model.hyperparameters(),
        fusion_order=None,
        vocabulary=list(vocab.index_to_token),
        params=[(p.name, p.data) for p in model.parameters()],
    )


def checkpoint_from_abstracter(model: AbstracterModel, vocab: Vocabulary) -> Checkpoint:
    return Checkpoint(
        kind="abstracter",
        hyperparameters=model.hyperparameters(),
        fusion_order=model.config.fusion,
        vocabulary=list(vocab.index_to_token),
        params=[(p.name, p.data) for p in model.parameters()],
    )


def _load_params(model, ckpt: Checkpoint, path_hint: str) -> None:
    expected = model.parameters()
    if len(expected) != len(ckpt.params):
        raise CorruptCheckpoint(
            f"{path_hint}: {len(ckpt.params)} parameters, expected {len(expected)}"
        )
    for p, (name, arr) in zip(expected, ckpt.params):
        if p.name != name or p.data.shape != arr.shape:
            raise CorruptCheckpoint(
                f"{path_hint}: parameter {name!r}{arr.shape} does not match "
                f"{p.name!r}{p.data.shape}"
            )
        p.data = arr.astype(p.data.dtype)


def extractor_from_checkpoint(ckpt: Checkpoint, path_hint: str = "checkpoint") -> tuple[ExtractorModel, Vocabulary]:
    if ckpt.kind != "extractor":
        raise CorruptCheckpoint(f"{path_hint}: kind {ckpt.kind!r}, expected extractor")
    hp = ckpt.hyperparameters
    config = ExtractorConfig(
        embed_dim=int(hp["embed_dim"]),
        hidden_dim=int(hp["hidden_dim"]),
        dropout=float(hp.get("dropout", 0.0)),
        max_statement_tokens=int(hp.get("max_statement_tokens", 30)),
        max_statements=int(hp.get("max_statements", 30)),
    )
    vocab = Vocabulary(ckpt.vocabulary)
    model = ExtractorModel(len(vocab), config, np.random.default_rng(0))
    _load_params(model, ckpt, path_hint)
    return model, vocab


def abstracter_from_checkpoint(ckpt: Checkpoint, path_hint: str = "checkpoint") -> tuple[AbstracterModel, Vocabulary]:
    if ckpt.kind != "abstracter":
        raise CorruptCheckpoint(f"{path_hint}: kind {ckpt.kind!r}, expected abstracter")
    hp = ckpt.hyperparameters
    config = AbstracterConfig(
        embed_dim=int(hp["embed_dim"]),
        hidden_dim=int(hp["hidden_dim"]),
        dropout=float(hp.get("dropout", 0.0)),
        max_statement_tokens=int(hp.get("max_statement_tokens", 30)),
        max_code_tokens=int(hp.get("max_code_tokens", 120)),
        max_comment_tokens=int(hp.get("max_comment_tokens", 30)),
        fusion=ckpt.fusion_order or "abex",
        share_embeddings=bool(hp.get("share_embeddings", True)),
    )
    vocab = Vocabulary(ckpt.vocabulary)
    model = AbstracterModel(len(vocab), config, np.random.default_rng(0))
    _load_params(model, ckpt, path_hint)
    return model, vocab


def save_extractor(model: ExtractorModel, vocab: Vocabulary, path: str) -> None:
    save_checkpoint(checkpoint_from_extractor(model, vocab), path)


def save_abstracter(model: AbstracterModel, vocab: Vocabulary, path: str) -> None:
    save_checkpoint(checkpoint_from_abstracter(model, vocab), path)


def load_extractor(path: str) -> tuple[ExtractorModel, Vocabulary]:
    return extractor_from_checkpoint(load_checkpoint(path), path)


def load_abstracter(path: str) -> tuple[AbstracterModel, Vocabulary]:
    return abstracter_from_checkpoint(load_checkpoint(path), path)
