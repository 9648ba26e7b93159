"""Portable model archives and the inference latency benchmark.

Archive layout (all integers little-endian)::

    b"SLNS" | u32 version | u64 manifest length | u64 payload length
    | manifest JSON (UTF-8) | concatenated array payload
    | u32 CRC32 of every preceding byte

The manifest describes the schema, specs, preprocessing and, for each array,
its name, dtype (``<f8`` or ``<i8``), shape, offset and byte length inside
the payload. Reading parses JSON and raw buffers only.
"""
from __future__ import annotations

import json
import struct
import time
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .data import FeatureSchema, Standardizer
from .ensemble import SuperLearner, SuperLearnerModel, SuperLearnerSpec
from .exceptions import (ArchiveError, BadMagicError, ChecksumError, DataError,
                         MalformedArchiveError, TruncatedArchiveError, UnsupportedVersionError)
from .learners import LearnerSpec, make_learner, output_width

MAGIC = b"SLNS"
VERSION = 1
_HEAD = struct.Struct("<4sIQQ")
_CRC = struct.Struct("<I")


# ------------------------------------------------------------------ encoding


class _Blobs:
    def __init__(self):
        self.entries: list[dict] = []
        self.chunks: list[bytes] = []
        self.offset = 0

    def add(self, name: str, array) -> str:
        a = np.asarray(array)
        if a.dtype.kind in "iub":
            data = a.astype("<i8")
        elif a.dtype.kind == "f":
            data = a.astype("<f8")
        else:
            raise ArchiveError(f"array {name!r} has unsupported dtype {a.dtype}")
        raw = np.ascontiguousarray(data).tobytes()
        self.entries.append({"name": name, "dtype": data.dtype.str, "shape": list(a.shape),
                             "offset": self.offset, "nbytes": len(raw)})
        self.chunks.append(raw)
        self.offset += len(raw)
        return name


def _learner_entry(prefix: str, spec: LearnerSpec, model, blobs: _Blobs) -> dict:
    meta, arrays = model._export()
    names = {key: blobs.add(f"{prefix}.{key}", arr) for key, arr in sorted(arrays.items())}
    return {"spec": spec.to_dict(), "meta": meta, "arrays": names}


def serialize(model: SuperLearnerModel) -> bytes:
    est = model.estimator
    blobs = _Blobs()
    spec = est.spec_
    manifest = {
        "format": "stackreduce-archive",
        "schema": model.schema.to_dict(),
        "spec": spec.to_dict(),
        "n_features_in": int(est.n_features_in_),
        "feature_subset": est.subset_.tolist(),
        "categorical": {str(k): int(v) for k, v in sorted((est.categorical or {}).items())},
        "classes": est.classes_.tolist() if spec.task == "classify" else None,
        "standardizer": {
            "categorical": [int(j) for j in est.standardizer_.categorical],
            "eps": float(est.standardizer_.eps),
            "mean": blobs.add("standardizer.mean", est.standardizer_.mean_),
            "scale": blobs.add("standardizer.scale", est.standardizer_.scale_),
        },
        "bases": [_learner_entry(f"base{b}", s, m, blobs)
                  for b, (s, m) in enumerate(zip(spec.base_specs, est.bases_))],
        "meta": _learner_entry("meta", spec.meta_spec, est.meta_, blobs),
    }
    manifest["blobs"] = blobs.entries
    text = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(blobs.chunks)
    body = _HEAD.pack(MAGIC, VERSION, len(text), len(payload)) + text + payload
    return body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)


def save_model(model: SuperLearnerModel, path) -> int:
    """Write the archive; returns the number of bytes written."""
    data = serialize(model)
    Path(path).write_bytes(data)
    return len(data)


# ------------------------------------------------------------------ decoding


def _split(data: bytes) -> tuple[dict, memoryview]:
    if len(data) < _HEAD.size + _CRC.size:
        if len(data) >= 4 and data[:4] != MAGIC:
            raise BadMagicError("not a model archive (bad magic bytes)")
        raise TruncatedArchiveError(f"archive of {len(data)} bytes is too short")
    magic, version, mlen, plen = _HEAD.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError("not a model archive (bad magic bytes)")
    if version != VERSION:
        raise UnsupportedVersionError(f"archive version {version} is not supported "
                                      f"(expected {VERSION})")
    expected = _HEAD.size + mlen + plen + _CRC.size
    if expected > len(data):
        raise TruncatedArchiveError(f"archive holds {len(data)} of {expected} bytes")
    if expected < len(data):
        raise MalformedArchiveError("trailing bytes after the archive checksum")
    body, (crc,) = data[:-_CRC.size], _CRC.unpack_from(data, len(data) - _CRC.size)
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise ChecksumError("archive checksum mismatch (corrupted or truncated file)")
    try:
        manifest = json.loads(bytes(body[_HEAD.size:_HEAD.size + mlen]).decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise MalformedArchiveError(f"unreadable manifest: {exc}") from None
    if not isinstance(manifest, dict):
        raise MalformedArchiveError("manifest is not a JSON object")
    return manifest, memoryview(body)[_HEAD.size + mlen:]


def _arrays(manifest: dict, payload: memoryview) -> dict[str, np.ndarray]:
    out, end = {}, 0
    for entry in manifest["blobs"]:
        dtype = np.dtype(entry["dtype"])
        if dtype.str not in ("<f8", "<i8"):
            raise MalformedArchiveError(f"blob {entry['name']!r} has dtype {dtype.str}")
        shape = tuple(int(s) for s in entry["shape"])
        lo, nbytes = int(entry["offset"]), int(entry["nbytes"])
        if nbytes != int(np.prod(shape, dtype=np.int64)) * 8 or lo < 0 \
                or lo + nbytes > len(payload):
            raise MalformedArchiveError(f"blob {entry['name']!r} disagrees with its shape")
        arr = np.frombuffer(payload[lo:lo + nbytes], dtype=dtype).reshape(shape)
        out[entry["name"]] = arr.astype(dtype.newbyteorder("="), copy=True)
        end = max(end, lo + nbytes)
    if end != len(payload):
        raise MalformedArchiveError("payload length disagrees with the manifest")
    return out


def _restore_learner(entry: dict, arrays: dict, categorical) -> tuple[LearnerSpec, object]:
    spec = LearnerSpec.from_dict(entry["spec"])
    model = make_learner(spec, categorical)
    model._restore(entry["meta"], {key: arrays[name] for key, name in entry["arrays"].items()})
    return spec, model


def deserialize(data: bytes) -> SuperLearnerModel:
    manifest, payload = _split(bytes(data))
    try:
        return _build(manifest, _arrays(manifest, payload))
    except ArchiveError:
        raise
    except (KeyError, TypeError, ValueError, IndexError, AttributeError) as exc:
        raise MalformedArchiveError(f"inconsistent archive manifest: {exc!r}") from None


def _build(manifest: dict, arrays: dict) -> SuperLearnerModel:
    if manifest.get("format") != "stackreduce-archive":
        raise MalformedArchiveError("manifest does not describe a model archive")
    schema = FeatureSchema.from_dict(manifest["schema"])
    spec = SuperLearnerSpec.from_dict(manifest["spec"])
    categorical = {int(k): int(v) for k, v in manifest["categorical"].items()}
    est = SuperLearner(spec, feature_subset=manifest["feature_subset"], categorical=categorical)
    est.spec_ = spec
    est.n_features_in_ = int(manifest["n_features_in"])
    est.subset_ = np.asarray(manifest["feature_subset"], dtype=np.int64)
    if est.subset_.size == 0 or est.subset_.min() < 0 or est.subset_.max() >= est.n_features_in_:
        raise MalformedArchiveError("feature subset outside the input width")
    est.cat_ = {p: categorical[int(j)] for p, j in enumerate(est.subset_) if int(j) in categorical}
    if spec.task == "classify":
        est.classes_ = np.asarray(manifest["classes"], dtype=np.int64)
    st = manifest["standardizer"]
    scaler = Standardizer(categorical=tuple(st["categorical"]), eps=float(st["eps"]))
    scaler.mean_, scaler.scale_ = arrays[st["mean"]], arrays[st["scale"]]
    scaler.n_features_in_ = scaler.mean_.shape[0]
    if scaler.n_features_in_ != est.subset_.size or scaler.scale_.shape != scaler.mean_.shape:
        raise MalformedArchiveError("standardizer width disagrees with the feature subset")
    est.standardizer_ = scaler
    bases = [_restore_learner(e, arrays, est.cat_) for e in manifest["bases"]]
    est.bases_ = [m for _, m in bases]
    if len(est.bases_) != len(spec.base_specs):
        raise MalformedArchiveError("base learner count disagrees with the stored learner specs")
    for m in est.bases_:
        if m.n_features_in_ != est.subset_.size:
            raise MalformedArchiveError("base learner width disagrees with the feature subset")
    _, est.meta_ = _restore_learner(manifest["meta"], arrays, None)
    width = sum(est.n_classes_ if spec.task == "classify" else output_width(m)
                for m in est.bases_)
    if est.meta_.n_features_in_ != width:
        raise MalformedArchiveError("meta learner width disagrees with the base outputs")
    return SuperLearnerModel(schema=schema, estimator=est)


def load_model(path) -> SuperLearnerModel:
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise ArchiveError(f"model archive {path} does not exist") from None
    return deserialize(data)


def model_bytes(model: SuperLearnerModel) -> int:
    return len(serialize(model))


# ----------------------------------------------------------------- benchmark


@dataclass
class BenchReport:
    sample_sizes: list[int]
    mean_s: list[float]
    std_s: list[float]
    median_s: list[float]
    per_sample_us: list[float]
    model_bytes: int
    reps: int
    warmup_reps: int
    outputs_match: bool
    raw_s: list[list[float]] = field(default_factory=list)

    TIMING_FIELDS = ("mean_s", "std_s", "median_s", "per_sample_us", "raw_s")

    def to_dict(self, include_timing: bool = True) -> dict:
        out = asdict(self)
        if not include_timing:
            for key in self.TIMING_FIELDS:
                out.pop(key)
        return out


def bench_inference(model: SuperLearnerModel, X, sample_sizes: Sequence[int] = (1, 10, 100, 500),
                    reps: int = 10, warmup: int = 3, seed: int = 0) -> BenchReport:
    """Time ``predict`` on seeded row subsets, single-threaded.

    Each size gets ``warmup`` untimed calls and ``reps`` timed calls; every
    timed output is compared against an untimed reference prediction.
    """
    X = np.asarray(X, dtype=np.float64)
    sizes = [int(s) for s in sample_sizes]
    if reps < 3:
        raise DataError("reps must be >= 3")
    if not sizes or min(sizes) < 1:
        raise DataError("sample sizes must be positive")
    if X.ndim != 2 or X.shape[0] < max(sizes):
        raise DataError(f"benchmark needs at least {max(sizes)} rows, got {X.shape[0]}")
    rng = np.random.default_rng(seed)
    predict = model.estimator.predict_output
    means, stds, medians, per_sample, raws = [], [], [], [], []
    match = True
    with threadpool_limits(limits=1):
        for size in sizes:
            rows = np.ascontiguousarray(X[np.sort(rng.choice(X.shape[0], size, replace=False))])
            reference = predict(rows)
            for _ in range(warmup):
                predict(rows)
            times = []
            for _ in range(reps):
                t0 = time.perf_counter()
                out = predict(rows)
                times.append(time.perf_counter() - t0)
                match &= bool(np.array_equal(out, reference))
            times = np.asarray(times)
            means.append(float(times.mean()))
            stds.append(float(times.std(ddof=1)))
            medians.append(float(np.median(times)))
            per_sample.append(float(times.mean() / size * 1e6))
            raws.append(times.tolist())
    return BenchReport(sizes, means, stds, medians, per_sample, model_bytes(model), reps, warmup,
                       match, raws)
