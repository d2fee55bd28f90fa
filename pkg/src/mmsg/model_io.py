"""Model persistence: a directory with a versioned manifest, raw float32
matrices (little-endian, row-major, mmap-friendly) and the vocabulary file.

Files are written deterministically so identical runs produce byte-identical
model directories. theta/phi rows are renormalized after the float32
round-trip so loaded models keep exact row-stochasticity.
"""

from __future__ import annotations

import json
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from .corpus import Vocabulary
from .embeddings import EmbeddingState
from .errors import DataError
from .inference import TOPIC_MODES, VECTOR_MODES, TrainedModel

FORMAT_NAME = "mmsg-model"
FORMAT_VERSION = 1


def _write_matrix(path: Path, arr: np.ndarray) -> list[int]:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    arr.tofile(path)
    return list(arr.shape)


def _read_matrix(path: Path, shape) -> np.ndarray:
    arr = np.fromfile(path, dtype="<f4")
    expected = int(np.prod(shape))
    if arr.size != expected:
        raise DataError(f"{path}: expected {expected} float32 values, found {arr.size}")
    return arr.reshape(shape).astype(np.float64)


def save_model(model: TrainedModel, path: str | Path, metadata: dict | None = None) -> None:
    """Write the model into ``path`` (created fresh; replaced atomically)."""
    path = Path(path)
    parent = path.parent
    parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=path.name + ".tmp-", dir=parent))
    try:
        arrays: dict[str, dict] = {}
        arrays["theta"] = {"file": "theta.f32", "shape": _write_matrix(tmp / "theta.f32", model.theta)}
        if model.mode in TOPIC_MODES:
            arrays["phi"] = {"file": "phi.f32", "shape": _write_matrix(tmp / "phi.f32", model.phi)}
        if model.mode in VECTOR_MODES:
            es = model.embeddings
            arrays["topic_vecs"] = {
                "file": "topic_vecs.f32",
                "shape": _write_matrix(tmp / "topic_vecs.f32", es.topic_vecs),
            }
            arrays["out_vecs"] = {
                "file": "out_vecs.f32",
                "shape": _write_matrix(tmp / "out_vecs.f32", es.out_vecs),
            }
            arrays["bias"] = {"file": "bias.f32", "shape": _write_matrix(tmp / "bias.f32", es.bias)}
        model.vocab.save(tmp / "vocab.txt")
        manifest = {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "mode": model.mode,
            "n_topics": model.n_topics,
            "n_words": len(model.vocab),
            "dim": model.embeddings.dim if model.embeddings is not None else None,
            "arrays": arrays,
            "metadata": metadata or {},
        }
        with open(tmp / "manifest.json", "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
        if path.exists():
            shutil.rmtree(path)
        os.replace(tmp, path)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def load_manifest(path: str | Path) -> dict:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"{path} is not a model directory (no manifest.json)")
    with open(manifest_path, encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("format") != FORMAT_NAME:
        raise DataError(f"{path}: unrecognized model format {manifest.get('format')!r}")
    if manifest.get("version") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model version {manifest.get('version')!r}")
    return manifest


def load_model(path: str | Path) -> TrainedModel:
    path = Path(path)
    manifest = load_manifest(path)
    vocab = Vocabulary.load(path / "vocab.txt")
    arrays = manifest["arrays"]

    def read(name: str) -> np.ndarray:
        entry = arrays[name]
        return _read_matrix(path / entry["file"], entry["shape"])

    theta = read("theta")
    theta /= theta.sum(axis=1, keepdims=True)
    phi = None
    if "phi" in arrays:
        phi = read("phi")
        phi /= phi.sum(axis=1, keepdims=True)
    embeddings = None
    if "topic_vecs" in arrays:
        embeddings = EmbeddingState(
            topic_vecs=read("topic_vecs"),
            out_vecs=read("out_vecs"),
            bias=read("bias").reshape(-1),
        )
    return TrainedModel(
        vocab=vocab, theta=theta, mode=manifest["mode"], phi=phi, embeddings=embeddings
    )


def write_word2vec(path: str | Path, names: list[str], vectors: np.ndarray) -> None:
    """word2vec text format: `<count> <dim>` header then one named row per line."""
    vectors = np.asarray(vectors)
    dim = vectors.shape[1] if vectors.ndim == 2 else 0
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{len(names)} {dim}\n")
        for name, row in zip(names, vectors):
            coords = " ".join(f"{x:.9g}" for x in row)
            f.write(f"{name} {coords}\n")


def read_word2vec(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        count, dim = int(header[0]), int(header[1])
        names, rows = [], []
        for line in f:
            parts = line.rstrip("\n").split(" ")
            names.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if len(names) != count:
        raise DataError(f"{path}: header says {count} rows, found {len(names)}")
    mat = np.array(rows, dtype=np.float64) if rows else np.zeros((0, dim))
    return names, mat


def write_tsv_vectors(path: str | Path, names: list[str], vectors: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for name, row in zip(names, vectors):
            coords = "\t".join(f"{x:.9g}" for x in row)
            f.write(f"{name}\t{coords}\n")
