"""On-disk formats: model JSON, NOIR sample binary, PMIB container, recovery JSON.

NOIR layout (little-endian)::

    magic "NOIR" | u16 version | u32 n | u64 N | N rows of ceil(n/64) u64 words

bit ``i`` of a row (word ``i // 64``, bit ``i % 64``) is ``s_i``.

PMIB layout (little-endian)::

    magic "PMIB" | u16 version | u32 n | u32 |S_a| | u32 |S_b| | u32 |S_c| | u8 source
    S_a, S_b, S_c as u32 lists
    pmi_ab, pmi_bc, pmi_ca, pmit as f64, row-major
    u32 m (0 = no whitening), then Q_a, Q_b, Q_c as f64 when m > 0
"""
import json
import struct

import numpy as np

from .errors import InvalidInputError
from .model import NoisyOrModel, SampleBatch
from .pmi import Partition, PmiBlocks
from .whitening import WhiteningSet

SCHEMA_VERSION = 1
NOIR_MAGIC = b"NOIR"
NOIR_VERSION = 1
PMIB_MAGIC = b"PMIB"
PMIB_VERSION = 1
_SOURCES = ("empirical", "population")

_NOIR_HEADER = struct.Struct("<4sHIQ")
_PMIB_HEADER = struct.Struct("<4sHIIIIB")


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: not valid JSON ({exc})") from exc


def save_model(model, path, extra=None):
    d = model.to_dict()
    d["schema_version"] = SCHEMA_VERSION
    if extra:
        d.update(extra)
    _dump_json(d, path)


def load_model(path):
    d = _load_json(path)
    try:
        return NoisyOrModel.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"{path}: malformed model file ({exc})") from exc


def write_samples(batch, path):
    with open(path, "wb") as fh:
        fh.write(_NOIR_HEADER.pack(NOIR_MAGIC, NOIR_VERSION, batch.n, batch.N))
        fh.write(np.ascontiguousarray(batch.bits, dtype="<u8").tobytes())


def read_samples(path):
    with open(path, "rb") as fh:
        head = fh.read(_NOIR_HEADER.size)
        if len(head) != _NOIR_HEADER.size:
            raise InvalidInputError(f"{path}: truncated header")
        magic, version, n, N = _NOIR_HEADER.unpack(head)
        if magic != NOIR_MAGIC:
            raise InvalidInputError(f"{path}: bad magic {magic!r}")
        if version != NOIR_VERSION:
            raise InvalidInputError(f"{path}: unsupported version {version}")
        wpr = -(-n // 64)
        data = np.frombuffer(fh.read(), dtype="<u8")
    if data.size != N * wpr:
        raise InvalidInputError(f"{path}: expected {N * wpr} words, found {data.size}")
    return SampleBatch(n=n, N=N, bits=data.reshape(N, wpr).astype(np.uint64))


def write_pmib(blocks, path, white=None):
    part = blocks.part
    sizes = [len(s) for s in part.blocks]
    with open(path, "wb") as fh:
        fh.write(_PMIB_HEADER.pack(PMIB_MAGIC, PMIB_VERSION, part.n, *sizes,
                                   _SOURCES.index(blocks.source)))
        for s in part.blocks:
            fh.write(np.asarray(s, dtype="<u4").tobytes())
        for arr in (blocks.pmi_ab, blocks.pmi_bc, blocks.pmi_ca, blocks.pmit):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        fh.write(struct.pack("<I", white.m if white is not None else 0))
        if white is not None:
            for Q in white.Qs:
                fh.write(np.ascontiguousarray(Q, dtype="<f8").tobytes())


def read_pmib(path):
    """Returns ``(blocks, white)``; ``white`` is None when the file carries none."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _PMIB_HEADER.size:
        raise InvalidInputError(f"{path}: truncated header")
    magic, version, n, na, nb, nc, src = _PMIB_HEADER.unpack_from(buf)
    if magic != PMIB_MAGIC:
        raise InvalidInputError(f"{path}: bad magic {magic!r}")
    if version != PMIB_VERSION:
        raise InvalidInputError(f"{path}: unsupported version {version}")
    off = _PMIB_HEADER.size

    def take(dtype, count, shape=None):
        nonlocal off
        size = np.dtype(dtype).itemsize * count
        if off + size > len(buf):
            raise InvalidInputError(f"{path}: truncated body")
        arr = np.frombuffer(buf, dtype=dtype, count=count, offset=off)
        off += size
        return arr.reshape(shape) if shape else arr

    idx = [take("<u4", k).astype(np.int64) for k in (na, nb, nc)]
    part = Partition(*idx)
    if part.n != n:
        raise InvalidInputError(f"{path}: partition sizes do not sum to n={n}")
    ab = take("<f8", na * nb, (na, nb))
    bc = take("<f8", nb * nc, (nb, nc))
    ca = take("<f8", nc * na, (nc, na))
    t = take("<f8", na * nb * nc, (na, nb, nc))
    blocks = PmiBlocks(part, ab.copy(), bc.copy(), ca.copy(), t.copy(), source=_SOURCES[src])
    (m,) = struct.unpack_from("<I", take("<u1", 4))
    white = None
    if m:
        Qs = [take("<f8", k * k, (k, k)).copy() for k in (na, nb, nc)]
        white = WhiteningSet(*Qs, m=m)
    return blocks, white


def pmi_to_json(blocks):
    return {"schema_version": SCHEMA_VERSION, "source": blocks.source,
            "partition": blocks.part.to_dict(), "pmi_ab": blocks.pmi_ab.tolist(),
            "pmi_bc": blocks.pmi_bc.tolist(), "pmi_ca": blocks.pmi_ca.tolist(),
            "pmit": blocks.pmit.tolist()}


def pmi_from_json(d):
    arr = lambda k: np.asarray(d[k], dtype=float)
    return PmiBlocks(Partition.from_dict(d["partition"]), arr("pmi_ab"), arr("pmi_bc"),
                     arr("pmi_ca"), arr("pmit"), source=d["source"])


def recovery_to_json(result, cfg, seeds):
    return {
        "schema_version": SCHEMA_VERSION,
        "W_hat": result.W_hat.tolist(),
        "partition": result.partition.to_dict(),
        "seeds": seeds,
        "stage_timings_ms": result.timings_ms,
        "config": cfg.to_dict(),
        "accept_scores": [float(s) for s in result.components.accept_scores],
    }


def save_json(obj, path):
    _dump_json(obj, path)


def load_json(path):
    return _load_json(path)
