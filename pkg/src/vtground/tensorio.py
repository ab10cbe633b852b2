"""Binary persistence: tensor files, model archives, galleries, and the
vocabulary artifact.

Tensor body layout (magic "CCT1"): u32 little-endian rank, rank u32 dims,
then row-major 32-bit little-endian IEEE-754 payload.

Model archive: u32 tensor count; per tensor a u16 name length, the UTF-8
name, and an embedded tensor body; then a trailing JSON config echo.

Gallery file (magic "CCG1"): u16 model-hash length + hash, u32 entry
count; per entry u16 video-id length + id, then tensor bodies for the
second-scale span table (N x 2), G1, and G2.
"""

import hashlib
import io
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .concepts import ConceptVocabulary
from .corpus import EmbeddingTable
from .errors import DataError

TENSOR_MAGIC = b"CCT1"
GALLERY_MAGIC = b"CCG1"


def write_tensor(fh, array):
    array = np.ascontiguousarray(array, dtype="<f4")
    fh.write(TENSOR_MAGIC)
    fh.write(struct.pack("<I", array.ndim))
    for dim in array.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(array.tobytes())


def read_tensor(fh):
    magic = fh.read(4)
    if magic != TENSOR_MAGIC:
        raise DataError(f"bad tensor magic {magic!r}")
    (rank,) = struct.unpack("<I", fh.read(4))
    dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
    count = int(np.prod(dims)) if dims else 1
    payload = fh.read(4 * count)
    if len(payload) != 4 * count:
        raise DataError("truncated tensor payload")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def save_tensor(path, array):
    with open(path, "wb") as fh:
        write_tensor(fh, array)


def load_tensor(path):
    try:
        fh = open(path, "rb")
    except OSError as e:
        raise DataError(f"cannot open tensor file {path}: {e}") from e
    with fh:
        return read_tensor(fh)


# -- model archives ----------------------------------------------------------


def save_model(path, params, config_dict):
    """params: dict name -> array-like (Tensor .data or ndarray)."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(params)))
        for name, value in params.items():
            data = value.data if hasattr(value, "data") else value
            encoded = name.encode()
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            write_tensor(fh, data)
        fh.write(json.dumps(config_dict, sort_keys=True).encode())


def load_model(path):
    """Returns (params as float64 arrays, config dict, sha256 of the file)."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as e:
        raise DataError(f"cannot open model archive {path}: {e}") from e
    digest = hashlib.sha256(blob).hexdigest()
    fh = io.BytesIO(blob)
    (count,) = struct.unpack("<I", fh.read(4))
    params = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", fh.read(2))
        name = fh.read(name_len).decode()
        if name in params:
            raise DataError(f"duplicate tensor name {name!r} in {path}")
        params[name] = read_tensor(fh).astype(np.float64)
    try:
        config = json.loads(fh.read().decode())
    except json.JSONDecodeError as e:
        raise DataError(f"bad config echo in model archive {path}: {e}") from e
    return params, config, digest


def model_file_hash(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# -- galleries ---------------------------------------------------------------


@dataclass
class GalleryEntry:
    video_id: str
    spans_s: np.ndarray  # N x 2
    g1: np.ndarray       # N x d_q, phi1 of the guided proposals
    g2: np.ndarray       # N x d_q, phi2 of the guided proposals


def save_gallery(path, model_hash, entries):
    with open(path, "wb") as fh:
        fh.write(GALLERY_MAGIC)
        encoded_hash = model_hash.encode()
        fh.write(struct.pack("<H", len(encoded_hash)))
        fh.write(encoded_hash)
        fh.write(struct.pack("<I", len(entries)))
        for entry in entries:
            vid = entry.video_id.encode()
            fh.write(struct.pack("<H", len(vid)))
            fh.write(vid)
            write_tensor(fh, entry.spans_s)
            write_tensor(fh, entry.g1)
            write_tensor(fh, entry.g2)


def load_gallery(path):
    """Returns (model_hash, dict video_id -> GalleryEntry)."""
    try:
        fh = open(path, "rb")
    except OSError as e:
        raise DataError(f"cannot open gallery file {path}: {e}") from e
    with fh:
        if fh.read(4) != GALLERY_MAGIC:
            raise DataError(f"{path} is not a gallery file")
        (hash_len,) = struct.unpack("<H", fh.read(2))
        model_hash = fh.read(hash_len).decode()
        (count,) = struct.unpack("<I", fh.read(4))
        entries = {}
        for _ in range(count):
            (vid_len,) = struct.unpack("<H", fh.read(2))
            vid = fh.read(vid_len).decode()
            spans = read_tensor(fh).astype(np.float64)
            g1 = read_tensor(fh).astype(np.float64)
            g2 = read_tensor(fh).astype(np.float64)
            entries[vid] = GalleryEntry(vid, spans, g1, g2)
    return model_hash, entries


# -- vocabulary artifact -----------------------------------------------------


def save_vocabulary(dir_path, vocab, table, stop_hash):
    """Write the vocabulary artifact: a JSON manifest plus tensor blobs for
    concept embeddings, G, A, and the query-time token embedding table."""
    os.makedirs(dir_path, exist_ok=True)
    tokens = sorted(table.vectors)
    manifest = {
        "concepts": vocab.concepts,
        "min_freq": vocab.min_freq,
        "stopword_sha256": stop_hash,
        "embedding_dim": table.dim,
        "unseen_concepts": sorted(vocab.unseen),
        "tokens": tokens,
    }
    with open(os.path.join(dir_path, "manifest.json"), "w") as fh:
        json.dump(manifest, fh)
    save_tensor(os.path.join(dir_path, "concept_embeddings.ten"), vocab.embeddings)
    save_tensor(os.path.join(dir_path, "relation_graph.ten"), vocab.relation_graph)
    save_tensor(os.path.join(dir_path, "normalized_adjacency.ten"),
                vocab.normalized_adjacency)
    save_tensor(os.path.join(dir_path, "token_embeddings.ten"),
                np.stack([table.vectors[t] for t in tokens]) if tokens
                else np.zeros((0, table.dim)))


def load_vocabulary(dir_path):
    """Returns (ConceptVocabulary with G/A attached, EmbeddingTable)."""
    manifest_path = os.path.join(dir_path, "manifest.json")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except OSError as e:
        raise DataError(f"cannot open vocabulary manifest {manifest_path}: {e}") from e
    vocab = ConceptVocabulary(
        concepts=list(manifest["concepts"]),
        embeddings=load_tensor(
            os.path.join(dir_path, "concept_embeddings.ten")).astype(np.float64),
        min_freq=int(manifest["min_freq"]),
        relation_graph=load_tensor(
            os.path.join(dir_path, "relation_graph.ten")).astype(np.float64),
        normalized_adjacency=load_tensor(
            os.path.join(dir_path, "normalized_adjacency.ten")).astype(np.float64),
        adjacency_normalized=True,
        unseen=set(manifest.get("unseen_concepts", ())),
    )
    tokens = manifest["tokens"]
    matrix = load_tensor(
        os.path.join(dir_path, "token_embeddings.ten")).astype(np.float64)
    table = EmbeddingTable({t: matrix[i] for i, t in enumerate(tokens)},
                           int(manifest["embedding_dim"]))
    return vocab, table


def load_features_dir(dir_path, video_ids=None):
    """Read <video_id>.ten clip features; duration metadata lives next to
    them in durations.json."""
    durations_path = os.path.join(dir_path, "durations.json")
    try:
        with open(durations_path) as fh:
            durations = json.load(fh)
    except OSError as e:
        raise DataError(f"cannot open {durations_path}: {e}") from e
    from .encoders import ClipFeatureSequence
    wanted = video_ids if video_ids is not None else sorted(durations)
    features = {}
    for vid in wanted:
        path = os.path.join(dir_path, f"{vid}.ten")
        if not os.path.exists(path):
            raise DataError(f"missing clip feature file for video_id={vid!r}: {path}")
        features[vid] = ClipFeatureSequence(
            vid, float(durations[vid]), load_tensor(path).astype(np.float64))
    return features


def save_features_dir(dir_path, features):
    os.makedirs(dir_path, exist_ok=True)
    durations = {}
    for vid, seq in features.items():
        save_tensor(os.path.join(dir_path, f"{vid}.ten"), seq.features)
        durations[vid] = seq.duration_s
    with open(os.path.join(dir_path, "durations.json"), "w") as fh:
        json.dump(durations, fh)
