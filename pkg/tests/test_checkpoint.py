import json

import numpy as np
import pytest

from eacs.abstracter import AbstracterConfig, AbstracterModel
from eacs.checkpoint import (
    load_abstracter,
    load_checkpoint,
    load_extractor,
    save_abstracter,
    save_checkpoint,
    save_extractor,
)
from eacs.corpus import RESERVED_TOKENS, Vocabulary
from eacs.errors import CorruptCheckpoint, IoError, VersionError
from eacs.extractor import ExtractorConfig, ExtractorModel


@pytest.fixture()
def vocab():
    return Vocabulary(list(RESERVED_TOKENS) + [f"tok{i}" for i in range(8)])


@pytest.fixture()
def ex_model(vocab):
    config = ExtractorConfig(embed_dim=6, hidden_dim=6)
    return ExtractorModel(len(vocab), config, np.random.default_rng(4))


class TestRoundTrip:
    def test_extractor_arrays_bit_identical(self, tmp_path, vocab, ex_model):
        path = str(tmp_path / "ex.ckpt")
        save_extractor(ex_model, vocab, path)
        loaded, loaded_vocab = load_extractor(path)
        assert loaded_vocab == vocab
        for orig, new in zip(ex_model.parameters(), loaded.parameters()):
            assert orig.data.astype("<f4").tobytes() == new.data.astype("<f4").tobytes()

    def test_save_load_save_bytes_identical(self, tmp_path, vocab, ex_model):
        one = tmp_path / "a.ckpt"
        two = tmp_path / "b.ckpt"
        save_extractor(ex_model, vocab, str(one))
        save_checkpoint(load_checkpoint(str(one)), str(two))
        assert one.read_bytes() == two.read_bytes()

    def test_abstracter_roundtrip_fusion_preserved(self, tmp_path, vocab):
        config = AbstracterConfig(embed_dim=6, hidden_dim=6, fusion="exab")
        model = AbstracterModel(len(vocab), config, np.random.default_rng(2))
        path = str(tmp_path / "ab.ckpt")
        save_abstracter(model, vocab, path)
        loaded, _ = load_abstracter(path)
        assert loaded.config.fusion == "exab"
        sample = np.array([4, 5, 6])
        assert np.allclose(
            loaded.encode_abstractive(sample).data, model.encode_abstractive(sample).data
        )

    def test_loaded_predictions_match(self, tmp_path, vocab, ex_model):
        path = str(tmp_path / "ex.ckpt")
        save_extractor(ex_model, vocab, path)
        loaded, _ = load_extractor(path)
        ids = [np.array([4, 5]), np.array([6])]
        assert np.allclose(
            ex_model.statement_probs(ids).data, loaded.statement_probs(ids).data
        )


class TestCorruption:
    def test_version_mismatch(self, tmp_path, vocab, ex_model):
        path = tmp_path / "ex.ckpt"
        save_extractor(ex_model, vocab, str(path))
        blob = path.read_bytes()
        header, rest = blob.split(b"\n", 1)
        doc = json.loads(header)
        doc["format_version"] = 99
        tampered = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode() + b"\n" + rest
        path.write_bytes(tampered)
        with pytest.raises(VersionError):
            load_checkpoint(str(path))

    def test_truncated_mid_array(self, tmp_path, vocab, ex_model):
        path = tmp_path / "ex.ckpt"
        save_extractor(ex_model, vocab, str(path))
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 7])
        with pytest.raises(CorruptCheckpoint):
            load_checkpoint(str(path))

    def test_garbage_header(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"not a checkpoint\n")
        with pytest.raises(CorruptCheckpoint):
            load_checkpoint(str(path))

    def test_wrong_kind(self, tmp_path, vocab, ex_model):
        path = str(tmp_path / "ex.ckpt")
        save_extractor(ex_model, vocab, path)
        with pytest.raises(CorruptCheckpoint):
            load_abstracter(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            load_checkpoint(str(tmp_path / "nope.ckpt"))

    def test_unknown_kind_rejected(self, tmp_path):
        path = tmp_path / "odd.ckpt"
        header = {
            "format_version": 1, "kind": "mystery", "hyperparameters": {},
            "fusion_order": None, "vocabulary": [],
        }
        path.write_bytes(json.dumps(header).encode() + b"\n")
        with pytest.raises(CorruptCheckpoint):
            load_checkpoint(str(path))
