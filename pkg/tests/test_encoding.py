import numpy as np
import pytest

from conftest import make_record
from crossbot.encoding import HashingTextEncoder, encode_corpus
from crossbot.errors import EncodingError
from crossbot.instruction import build_instruction
from crossbot.profile import render_profile


class TestHashingEncoder:
    def test_deterministic(self):
        enc = HashingTextEncoder(n_features=256)
        a = enc.encode("the quick brown fox")
        b = enc.encode("the quick brown fox")
        assert np.array_equal(a, b)

    def test_one_word_change_changes_vector(self):
        enc = HashingTextEncoder(n_features=256)
        a = enc.encode("the quick brown fox")
        b = enc.encode("the quick brown cat")
        assert not np.array_equal(a, b)

    def test_unit_norm(self):
        enc = HashingTextEncoder(n_features=512)
        rng = np.random.default_rng(0)
        words = ["alpha", "beta", "gamma", "delta", "follow", "bot", "human", "x1"]
        for _ in range(50):
            text = " ".join(rng.choice(words, size=rng.integers(1, 30)))
            assert np.linalg.norm(enc.encode(text)) == pytest.approx(1.0, abs=1e-9)

    def test_empty_document_rejected(self):
        enc = HashingTextEncoder()
        with pytest.raises(EncodingError):
            enc.encode("")
        with pytest.raises(EncodingError):
            enc.encode("   \n  ")

    def test_case_insensitive(self):
        enc = HashingTextEncoder(n_features=128)
        assert np.array_equal(enc.encode("Hello World"), enc.encode("hello world"))

    def test_transform_shape_and_get_params(self):
        enc = HashingTextEncoder(n_features=64)
        X = enc.transform(["one doc", "two docs"])
        assert X.shape == (2, 64)
        assert enc.get_params()["n_features"] == 64
        assert enc.fit(["x"]) is enc

    def test_dtype_option(self):
        enc = HashingTextEncoder(n_features=32, dtype="float32")
        assert enc.encode("hello").dtype == np.float32


def test_encode_corpus_labels_and_domains():
    records = [
        make_record("u1", label=0, domain=0, profile={"description": "human desc"}),
        make_record("u2", label=1, domain=None, profile={"description": "bot desc"}),
    ]
    docs = [build_instruction(r, render_profile(r.profile)) for r in records]
    X, y, domains = encode_corpus(docs, HashingTextEncoder(n_features=128))
    assert X.shape == (2, 128)
    assert y.tolist() == [0, 1]
    assert domains.tolist() == [0, -1]
