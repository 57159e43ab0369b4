"""Versioned checkpoint blobs for :class:`TopicModel`.

Layout: a magic line, one line of canonical JSON metadata (hyperparameters,
vocabulary, sampler settings, RNG state, array manifest, payload SHA-256),
then the raw little-endian array payload.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .cells import NeighborhoodSpec
from .model import Hyperparams, InconsistentCounts, TopicModel
from .stream import VocabularyLayout, WordObservation

MAGIC = b"SCENETOPICS-CHECKPOINT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _sparse_cells(n_c: np.ndarray, k_high: int) -> np.ndarray:
    idx = np.argwhere(n_c[..., :k_high] != 0)
    counts = n_c[tuple(idx.T)] if len(idx) else np.empty(0, np.int32)
    return np.column_stack([idx, counts]).astype("<i8") if len(idx) else np.empty((0, 5), "<i8")


def save_checkpoint(model: TopicModel) -> bytes:
    tb, ob = model.tables, model.obs
    n = ob.n
    active = np.flatnonzero(tb.n_k)
    k_high = int(active[-1]) + 1 if len(active) else 0
    arrays = {
        "words": ob.words[:n],
        "x": ob.x[:n],
        "y": ob.y[:n],
        "t": ob.t[:n],
        "z": ob.z[:n],
        "n_vk": tb.n_vk[:, :k_high],
        "n_k": tb.n_k[:k_high],
        "n_c": _sparse_cells(tb.n_c, k_high),
    }
    manifest, chunks = [], []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype="<i8")
        manifest.append({"name": name, "shape": list(arr.shape)})
        chunks.append(arr.tobytes())
    payload = b"".join(chunks)
    meta = {
        "format": FORMAT_VERSION,
        "hyper": {"alpha": model.hyper.alpha, "beta": model.hyper.beta, "gamma": model.hyper.gamma},
        "channels": [[name, size] for name, size in model.layout.channels],
        "cell_size": model.cell_size,
        "spatial_radius": model.neighborhood.spatial_radius,
        "temporal_radius": model.neighborhood.temporal_radius,
        "iters_per_step": model.iters_per_step,
        "seed": model.seed,
        "rng": model.rng.bit_generator.state,
        "cursor": model.cursor,
        "grid": list(tb.n_c.shape[1:3]),
        "N": tb.N,
        "arrays": manifest,
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    header = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("ascii")
    return MAGIC + b"\n" + header + b"\n" + payload


def load_checkpoint(blob: bytes) -> TopicModel:
    """Rebuild a model from :func:`save_checkpoint` output; corrupt or truncated blobs raise."""
    first = blob.find(b"\n")
    if first < 0 or blob[:first] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    second = blob.find(b"\n", first + 1)
    if second < 0:
        raise CheckpointError("truncated checkpoint header")
    try:
        meta = json.loads(blob[first + 1 : second])
    except ValueError:
        raise CheckpointError("corrupt checkpoint header") from None
    if meta.get("format") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {meta.get('format')}")
    payload = blob[second + 1 :]
    if len(payload) != meta["payload_bytes"]:
        raise CheckpointError(f"truncated checkpoint: {len(payload)} of {meta['payload_bytes']} payload bytes")
    if hashlib.sha256(payload).hexdigest() != meta["payload_sha256"]:
        raise CheckpointError("checkpoint payload checksum mismatch")

    arrays, off = {}, 0
    for entry in meta["arrays"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        arr = np.frombuffer(payload, dtype="<i8", count=count, offset=off).reshape(entry["shape"])
        arrays[entry["name"]] = arr.astype(np.int64)
        off += 8 * count

    layout = VocabularyLayout(tuple((name, int(size)) for name, size in meta["channels"]))
    model = TopicModel(
        layout,
        hyper=Hyperparams(**meta["hyper"]),
        neighborhood=NeighborhoodSpec(meta["spatial_radius"], meta["temporal_radius"]),
        cell_size=meta["cell_size"],
        iters_per_step=meta["iters_per_step"],
        seed=meta["seed"],
    )
    words, z = arrays["words"], arrays["z"]
    obs = [WordObservation(int(t), int(x), int(y), int(w))
           for t, x, y, w in zip(arrays["t"], arrays["x"], arrays["y"], words)]
    model._append(obs)
    n = len(obs)
    model.obs.z[:n] = z

    k_high = arrays["n_k"].shape[0]
    tb = model.tables
    tb.grow_topics(max(tb.k_cap, k_high))
    ny, nx = meta["grid"]
    if len(obs):
        tb.ensure_grid(int(arrays["t"].max()), ny - 1, nx - 1)
    else:
        tb.ensure_grid(0, ny - 1, nx - 1)
    tb.n_vk[:, :k_high] = arrays["n_vk"]
    tb.n_k[:k_high] = arrays["n_k"]
    cells = arrays["n_c"]
    if len(cells):
        tb.n_c[cells[:, 0], cells[:, 1], cells[:, 2], cells[:, 3]] = cells[:, 4]
    tb.state[:] = (int((tb.n_k > 0).sum()), int(tb.n_k.sum()))
    model.cursor = meta["cursor"]
    model.rng.bit_generator.state = meta["rng"]
    try:
        model.audit()
    except InconsistentCounts as exc:
        raise CheckpointError(f"checkpoint count tables inconsistent: {exc}") from None
    if tb.N != meta["N"]:
        raise CheckpointError("checkpoint observation total mismatch")
    return model
