"""Binary model file format.

Layout: magic bytes CMBK, format version u16, a length-prefixed UTF-8 JSON
header (config, lexicon, feature schema, embedding vocabulary), then one
blob per named parameter: length-prefixed UTF-8 name, u8 rank, u32 extents,
raw little-endian float32 data.  All integers are little-endian.  Saving a
loaded model reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .config import RunConfig
from .model import JointModel
from .vocab import EmbeddingMatrix, FeatureSchema, Lexicon

MAGIC = b"CMBK"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def _header_dict(model):
    emb = model.embeddings
    words = sorted(emb.vocab, key=emb.vocab.get)
    return {
        "config": model.cfg.to_dict(),
        "lexicon": model.lexicon.to_dict(),
        "schema": model.schema.to_dict(),
        "embedding": {
            "vocab": words,
            "trainable": emb.trainable,
            "dim": emb.dim,
            "first_row": min(emb.vocab.values()) if emb.vocab else 0,
        },
    }


def _blobs(model):
    emb = model.embeddings
    out = []
    if not emb.trainable:
        out.append(("embedding.vectors", emb.vectors))
        out.append(("embedding.unknown", emb.unknown_vector))
    out.extend((name, p.data) for name, p in model.params.items())
    return out


def _write_blob(handle, name, array):
    data = np.ascontiguousarray(array, dtype="<f4")
    raw_name = name.encode("utf-8")
    handle.write(struct.pack("<I", len(raw_name)))
    handle.write(raw_name)
    handle.write(struct.pack("<B", data.ndim))
    for extent in data.shape:
        handle.write(struct.pack("<I", extent))
    handle.write(data.tobytes())


def save_model(model, path):
    header = json.dumps(_header_dict(model), sort_keys=True,
                        separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<H", VERSION))
        handle.write(struct.pack("<I", len(header)))
        handle.write(header)
        for name, array in _blobs(model):
            _write_blob(handle, name, array)


def _read_exact(handle, count, what):
    data = handle.read(count)
    if len(data) != count:
        raise ModelFormatError(f"truncated model file while reading {what}")
    return data


def _read_blobs(handle):
    blobs = {}
    order = []
    while True:
        prefix = handle.read(4)
        if not prefix:
            break
        if len(prefix) != 4:
            raise ModelFormatError("truncated model file in blob header")
        (name_len,) = struct.unpack("<I", prefix)
        name = _read_exact(handle, name_len, "blob name").decode("utf-8")
        (rank,) = struct.unpack("<B", _read_exact(handle, 1, "blob rank"))
        shape = tuple(
            struct.unpack("<I", _read_exact(handle, 4, "blob extent"))[0]
            for _ in range(rank)
        )
        count = int(np.prod(shape, dtype=np.int64)) if rank else 1
        raw = _read_exact(handle, 4 * count, f"blob data for {name}")
        blobs[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        order.append(name)
    return blobs, order


def load_model(path):
    """Rebuild a JointModel from a saved file.

    Unknown future format versions are rejected; so are missing or
    unexpected parameter blobs.
    """
    with open(path, "rb") as handle:
        magic = _read_exact(handle, 4, "magic")
        if magic != MAGIC:
            raise ModelFormatError(f"not a model file (magic {magic!r})")
        (version,) = struct.unpack("<H", _read_exact(handle, 2, "version"))
        if version != VERSION:
            raise ModelFormatError(
                f"unsupported model format version {version} (expected {VERSION})"
            )
        (header_len,) = struct.unpack("<I", _read_exact(handle, 4, "header length"))
        header = json.loads(_read_exact(handle, header_len, "header").decode("utf-8"))
        blobs, _ = _read_blobs(handle)

    cfg = RunConfig.from_dict(header["config"])
    lexicon = Lexicon.from_dict(header["lexicon"])
    schema = FeatureSchema.from_dict(header["schema"])
    emb_info = header["embedding"]
    first_row = emb_info.get("first_row", 0)
    vocab = {w: i + first_row for i, w in enumerate(emb_info["vocab"])}
    if emb_info["trainable"]:
        table = blobs.get("encoder.word_table")
        if table is None:
            raise ModelFormatError("missing encoder.word_table blob")
        embeddings = EmbeddingMatrix(vocab, table, table[0], trainable=True)
    else:
        try:
            vectors = blobs.pop("embedding.vectors")
            unknown = blobs.pop("embedding.unknown")
        except KeyError as exc:
            raise ModelFormatError(f"missing embedding blob: {exc}") from None
        embeddings = EmbeddingMatrix(vocab, vectors, unknown, trainable=False)

    model = JointModel(cfg, lexicon, schema, embeddings)
    missing = set(model.params) - set(blobs)
    extra = set(blobs) - set(model.params)
    if missing or extra:
        raise ModelFormatError(
            f"parameter mismatch: missing {sorted(missing)}, extra {sorted(extra)}"
        )
    for name, p in model.params.items():
        if blobs[name].shape != p.data.shape:
            raise ModelFormatError(
                f"shape mismatch for {name}: file {blobs[name].shape}, "
                f"model {p.data.shape}"
            )
        np.copyto(p.data, blobs[name])
    return model
