"""Versioned binary model files.

Layout: magic ``ABSA``, format version (u16-LE), a length-prefixed (u32-LE)
canonical-JSON manifest (task, label set, vocabularies, dimensions), then one
blob per parameter: u16-LE name length, name (UTF-8), rank (u8), each
dimension (u32-LE), and row-major float32-LE data, in the model's canonical
parameter order until end of file.

Parameters are stored at 32-bit precision and upcast to the 64-bit compute
precision on load; save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
import struct
from typing import BinaryIO

import numpy as np

from . import autodiff as ad
from .charcnn import CharCnnParams
from .crf import CrfParams
from .embeddings import RESERVED, EmbeddingTable, Vocabulary
from .errors import FormatError
from .ian import AttnParams, IanModel
from .ote import OteModel
from .recurrent import BgruParams, GruParams

MAGIC = b"ABSA"
VERSION = 1


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True).encode("utf-8")


def _write_param(fh: BinaryIO, name: str, data: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    fh.write(struct.pack("<H", len(encoded)))
    fh.write(encoded)
    fh.write(struct.pack("<B", data.ndim))
    for dim in data.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def _read_params(fh: BinaryIO) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    while True:
        head = fh.read(2)
        if not head:
            return out
        if len(head) != 2:
            raise FormatError("truncated parameter header")
        (name_len,) = struct.unpack("<H", head)
        name = fh.read(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", fh.read(1))
        shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(rank))
        count = int(np.prod(shape)) if shape else 1
        raw = fh.read(4 * count)
        if len(raw) != 4 * count:
            raise FormatError(f"truncated data for parameter {name!r}")
        out[name] = np.frombuffer(raw, dtype="<f4").astype(
            np.float64).reshape(shape)


def _manifest(model) -> dict:
    if isinstance(model, OteModel):
        return {
            "task": "ote",
            "label_set": model.label_set,
            "vocab": model.word_table.vocabulary.non_reserved(),
            "word_dim": model.word_table.dim,
            "word_trainable": model.word_table.trainable,
            "char_alphabet": model.char_cnn.char_table.vocabulary
                                  .non_reserved(),
            "char_dim": model.char_cnn.char_table.dim,
            "char_filters": model.char_cnn.num_filters,
            "char_window": model.char_cnn.window,
            "hidden_dim": model.bgru.forward.hidden_dim,
            "dropout": model.dropout_rate,
        }
    if isinstance(model, IanModel):
        return {
            "task": "polarity",
            "classes": model.classes,
            "vocab": model.word_table.vocabulary.non_reserved(),
            "word_dim": model.word_table.dim,
            "word_trainable": model.word_table.trainable,
            "hidden_dim": 2 * model.context_bgru.forward.hidden_dim,
            "dropout": model.dropout_rate,
        }
    raise FormatError(f"cannot serialize {type(model).__name__}")


def save_model(model, path) -> None:
    manifest = _canonical_json(_manifest(model))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<I", len(manifest)))
        fh.write(manifest)
        for name, tensor in model.named_parameters().items():
            _write_param(fh, name, tensor.data)


def model_task(path) -> str:
    with open(path, "rb") as fh:
        manifest, _ = _read_header(fh)
    return manifest["task"]


def _read_header(fh: BinaryIO) -> tuple[dict, int]:
    if fh.read(4) != MAGIC:
        raise FormatError("not a model file (bad magic)")
    (version,) = struct.unpack("<H", fh.read(2))
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}")
    (mlen,) = struct.unpack("<I", fh.read(4))
    manifest = json.loads(fh.read(mlen).decode("utf-8"))
    return manifest, version


def _gru_from(params: dict[str, np.ndarray], prefix: str) -> GruParams:
    t = {k: ad.parameter(params[f"{prefix}.{k}"])
         for k in ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r",
                   "w_h", "u_h", "b_h")}
    hidden, inp = t["w_z"].shape
    return GruParams(**t, input_dim=inp, hidden_dim=hidden)


def _bgru_from(params: dict[str, np.ndarray], prefix: str) -> BgruParams:
    return BgruParams(_gru_from(params, f"{prefix}.fwd"),
                      _gru_from(params, f"{prefix}.bwd"))


def _table_from(tokens: list[str], matrix: np.ndarray, dim: int,
                trainable: bool) -> EmbeddingTable:
    vocab = Vocabulary(tokens)
    if matrix.shape != (len(vocab), dim):
        raise FormatError(
            f"embedding matrix {matrix.shape} does not match vocabulary "
            f"({len(vocab)} tokens after {len(RESERVED)} reserved) x {dim}")
    return EmbeddingTable(vocab, ad.parameter(matrix), dim, trainable)


def load_model(path):
    """Reconstruct an OteModel or IanModel from a model file."""
    with open(path, "rb") as fh:
        manifest, _ = _read_header(fh)
        params = _read_params(fh)
    try:
        if manifest["task"] == "ote":
            return _load_ote(manifest, params)
        if manifest["task"] == "polarity":
            return _load_ian(manifest, params)
    except KeyError as exc:
        raise FormatError(f"model file missing field {exc}") from None
    raise FormatError(f"unknown task {manifest['task']!r}")


def _load_ote(man: dict, params: dict[str, np.ndarray]) -> OteModel:
    word = _table_from(man["vocab"], params["word.matrix"],
                       man["word_dim"], man["word_trainable"])
    char_table = _table_from(man["char_alphabet"], params["char.table"],
                             man["char_dim"], True)
    char_cnn = CharCnnParams(char_table, ad.parameter(params["char.filters"]),
                             ad.parameter(params["char.bias"]),
                             man["char_filters"], man["char_window"])
    crf = CrfParams(ad.parameter(params["crf.transitions"]),
                    list(man["label_set"]))
    return OteModel(word, char_cnn, _bgru_from(params, "bgru"),
                    ad.parameter(params["proj.w"]),
                    ad.parameter(params["proj.b"]),
                    crf, man["dropout"], list(man["label_set"]))


def _load_ian(man: dict, params: dict[str, np.ndarray]) -> IanModel:
    word = _table_from(man["vocab"], params["word.matrix"],
                       man["word_dim"], man["word_trainable"])
    return IanModel(
        word,
        _bgru_from(params, "ctx_bgru"),
        _bgru_from(params, "tgt_bgru"),
        AttnParams(ad.parameter(params["ctx_attn.w"]),
                   ad.parameter(params["ctx_attn.b"])),
        AttnParams(ad.parameter(params["tgt_attn.w"]),
                   ad.parameter(params["tgt_attn.b"])),
        ad.parameter(params["cls.w"]),
        ad.parameter(params["cls.b"]),
        man["dropout"], list(man["classes"]))
