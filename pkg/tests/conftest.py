import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fixture_corpus_dir(tmp_path):
    """Three small documents with overlapping vocabulary."""
    docs = [
        "the cat sat on the mat\n\nthe cat ate the fish",
        "a dog chased the cat\n\nthe dog sat on a log",
        "fish swim in the sea\n\nthe cat watches the fish swim",
    ]
    d = tmp_path / "corpus"
    d.mkdir()
    for i, text in enumerate(docs):
        (d / f"doc{i}.txt").write_text(text, encoding="utf-8")
    return d
