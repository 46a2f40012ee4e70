"""On-disk libraries of pre-trained control filters.

Subband library layout (all little-endian)::

    b"SASF"  u32 version
    u32 meta_len, meta block (see ``_META``), 32-byte prototype digest
    u32 n_records
    per record: u16 i, u16 m, L_s x complex128, u32 n_bits, ceil(n_bits/8) packed bits
    u32 CRC-32 of everything above

The fullband (SFANC baseline) library uses magic ``b"SAFB"`` with
real float64 time-domain weights of length L per record.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .errors import (
    ChecksumError,
    DimensionError,
    DuplicateRecordError,
    FormatError,
    IncompatibleBankError,
    IncompleteDatabaseError,
    RangeError,
    TruncationError,
    VersionError,
)
from .features import FeatureConfig

SUBBAND_MAGIC = b"SASF"
FULLBAND_MAGIC = b"SAFB"
VERSION = 1

# L, M, K, V, I, sample_rate, segment_len, fft_len, overlap, window
_META = struct.Struct("<5Id2Id8s")
_FB_META = struct.Struct("<3Id2Id8s")


@dataclass(frozen=True)
class DatabaseMeta:
    L: int
    M: int
    K: int
    V: int
    num_noises: int
    sample_rate_hz: float
    features: FeatureConfig
    prototype_digest: bytes

    def __post_init__(self):
        if self.M < 4 or self.M % 2:
            raise DimensionError("M must be even and >= 4")
        if self.L % self.D:
            raise DimensionError(f"L={self.L} is not divisible by D={self.D}")
        if self.V != self.features.fft_len:
            raise DimensionError("signature length must equal the feature FFT length")
        if len(self.prototype_digest) != 32:
            raise DimensionError("prototype digest must be 32 bytes")

    @property
    def D(self) -> int:
        return self.M // 2

    @property
    def Ls(self) -> int:
        return self.L // self.D

    @property
    def num_subbands(self) -> int:
        return self.M // 2 + 1


@dataclass(frozen=True)
class SubFilterRecord:
    noise_index: int
    subband: int
    weights_freq: np.ndarray
    signature: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights_freq, dtype=complex)
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "weights_freq", w)
        object.__setattr__(self, "signature", np.asarray(self.signature, dtype=np.uint8))


@dataclass
class SubbandDatabase:
    meta: DatabaseMeta
    records: Dict[Tuple[int, int], SubFilterRecord] = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def insert(self, record: SubFilterRecord) -> "SubbandDatabase":
        i, m = record.noise_index, record.subband
        if not (0 <= i < self.meta.num_noises) or not (0 <= m < self.meta.num_subbands):
            raise RangeError(f"record (i={i}, m={m}) outside the {self.meta.num_noises}x"
                             f"{self.meta.num_subbands} grid")
        if (i, m) in self.records:
            raise DuplicateRecordError(f"cell (i={i}, m={m}) is already filled")
        if record.weights_freq.shape != (self.meta.Ls,):
            raise DimensionError(f"weights must have length L_s={self.meta.Ls}")
        if record.signature.shape != (self.meta.V,):
            raise DimensionError(f"signature must have length V={self.meta.V}")
        self.records[(i, m)] = record
        return self

    @property
    def is_complete(self) -> bool:
        return len(self.records) == self.meta.num_noises * self.meta.num_subbands

    def require_complete(self) -> None:
        if not self.is_complete:
            missing = [
                (i, m)
                for i in range(self.meta.num_noises)
                for m in range(self.meta.num_subbands)
                if (i, m) not in self.records
            ]
            raise IncompleteDatabaseError(f"missing cells: {missing}")

    def require_bank(self, bank) -> None:
        if bank.digest != self.meta.prototype_digest or bank.M != self.meta.M:
            raise IncompatibleBankError("database was trained with a different analysis bank")

    @property
    def combination_count(self) -> int:
        return self.meta.num_noises ** self.meta.num_subbands

    def query(self, m: int) -> List[Tuple[int, np.ndarray, np.ndarray]]:
        return db_query(self, m)

    def bins(self, selection) -> np.ndarray:
        """(M/2+1, L_s) frequency-domain weights for one index per subband."""
        return np.stack([self.records[(int(i), m)].weights_freq for m, i in enumerate(selection)])


def db_insert(db: SubbandDatabase, record: SubFilterRecord) -> SubbandDatabase:
    return db.insert(record)


def db_query(db: SubbandDatabase, m: int):
    db.require_complete()
    if not (0 <= m < db.meta.num_subbands):
        raise RangeError(f"subband {m} outside 0..{db.meta.num_subbands - 1}")
    return [
        (i, db.records[(i, m)].signature, db.records[(i, m)].weights_freq)
        for i in range(db.meta.num_noises)
    ]


@dataclass(frozen=True)
class FullbandRecord:
    filter_index: int
    weights_time: np.ndarray
    signature: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights_time, dtype=float)
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "weights_time", w)
        object.__setattr__(self, "signature", np.asarray(self.signature, dtype=np.uint8))


@dataclass
class FullbandDatabase:
    L: int
    V: int
    sample_rate_hz: float
    features: FeatureConfig
    records: List[FullbandRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def insert(self, record: FullbandRecord) -> "FullbandDatabase":
        if record.filter_index != len(self.records):
            raise RangeError("fullband records must be inserted in index order")
        if record.weights_time.shape != (self.L,) or record.signature.shape != (self.V,):
            raise DimensionError("record does not match the database dimensions")
        self.records.append(record)
        return self


# ---------------------------------------------------------------- encoding

def _encode_features(f: FeatureConfig):
    return f.segment_len, f.fft_len, f.overlap, f.window.encode("ascii").ljust(8, b"\0")


def _decode_features(seg, nfft, overlap, window) -> FeatureConfig:
    return FeatureConfig(seg, nfft, overlap, window.rstrip(b"\0").decode("ascii"))


def _pack_bits(bits: np.ndarray) -> bytes:
    return struct.pack("<I", len(bits)) + np.packbits(bits).tobytes()


def _write_with_crc(path, chunks) -> None:
    body = b"".join(chunks)
    with open(os.fspath(path), "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def encode_subband(db: SubbandDatabase) -> List[bytes]:
    db.require_complete()
    m_ = db.meta
    meta = _META.pack(m_.L, m_.M, m_.K, m_.V, m_.num_noises, m_.sample_rate_hz,
                      *_encode_features(m_.features)) + m_.prototype_digest
    chunks = [SUBBAND_MAGIC, struct.pack("<II", VERSION, len(meta)), meta,
              struct.pack("<I", len(db.records))]
    for (i, m) in sorted(db.records):
        rec = db.records[(i, m)]
        chunks.append(struct.pack("<HH", i, m))
        chunks.append(rec.weights_freq.astype("<c16").tobytes())
        chunks.append(_pack_bits(rec.signature))
    return chunks


def db_save(db: SubbandDatabase, path) -> None:
    _write_with_crc(path, encode_subband(db))


def save_fullband(db: FullbandDatabase, path) -> None:
    meta = _FB_META.pack(db.L, db.V, len(db.records), db.sample_rate_hz,
                         *_encode_features(db.features))
    chunks = [FULLBAND_MAGIC, struct.pack("<II", VERSION, len(meta)), meta]
    for rec in db.records:
        chunks.append(struct.pack("<H", rec.filter_index))
        chunks.append(rec.weights_time.astype("<f8").tobytes())
        chunks.append(_pack_bits(rec.signature))
    _write_with_crc(path, chunks)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncationError(
                f"file ends at byte {len(self.buf)}, needed {self.pos + n}"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, st):
        if isinstance(st, str):
            st = struct.Struct(st)
        return st.unpack(self.take(st.size))

    def bits(self, expected: int) -> np.ndarray:
        (n,) = self.unpack("<I")
        if n != expected:
            raise FormatError(f"signature has {n} bits, expected {expected}")
        raw = np.frombuffer(self.take((n + 7) // 8), dtype=np.uint8)
        return np.unpackbits(raw)[:n]


def _open(path, magic: bytes) -> Tuple[_Reader, int]:
    with open(os.fspath(path), "rb") as fh:
        buf = fh.read()
    rd = _Reader(buf)
    got = rd.take(4)
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    (version, meta_len) = rd.unpack("<II")
    if version != VERSION:
        raise VersionError(f"file version {version}, supported {VERSION}")
    return rd, meta_len


def _check_crc(rd: _Reader) -> None:
    body_end = rd.pos
    (crc,) = rd.unpack("<I")
    if rd.pos != len(rd.buf):
        raise FormatError(f"{len(rd.buf) - rd.pos} trailing bytes after checksum")
    if zlib.crc32(rd.buf[:body_end]) != crc:
        raise ChecksumError("CRC-32 mismatch")


def db_load(path) -> SubbandDatabase:
    rd, meta_len = _open(path, SUBBAND_MAGIC)
    if meta_len != _META.size + 32:
        raise FormatError("unexpected meta block size")
    L, M, K, V, I, rate, seg, nfft, overlap, window = rd.unpack(_META)
    digest = rd.take(32)
    meta = DatabaseMeta(L, M, K, V, I, rate, _decode_features(seg, nfft, overlap, window), digest)
    (n_records,) = rd.unpack("<I")
    db = SubbandDatabase(meta)
    for _ in range(n_records):
        i, m = rd.unpack("<HH")
        w = np.frombuffer(rd.take(16 * meta.Ls), dtype="<c16").astype(complex)
        db.insert(SubFilterRecord(i, m, w, rd.bits(V)))
    _check_crc(rd)
    db.require_complete()
    return db


def load_fullband(path) -> FullbandDatabase:
    rd, meta_len = _open(path, FULLBAND_MAGIC)
    if meta_len != _FB_META.size:
        raise FormatError("unexpected meta block size")
    L, V, n_records, rate, seg, nfft, overlap, window = rd.unpack(_FB_META)
    db = FullbandDatabase(L, V, rate, _decode_features(seg, nfft, overlap, window))
    for _ in range(n_records):
        (idx,) = rd.unpack("<H")
        w = np.frombuffer(rd.take(8 * L), dtype="<f8").astype(float)
        db.insert(FullbandRecord(idx, w, rd.bits(V)))
    _check_crc(rd)
    return db


def detect_kind(path) -> str:
    with open(os.fspath(path), "rb") as fh:
        magic = fh.read(4)
    if magic == SUBBAND_MAGIC:
        return "subband"
    if magic == FULLBAND_MAGIC:
        return "fullband"
    raise FormatError(f"unrecognised magic {magic!r}")


def weight_payload_bytes(db: SubbandDatabase) -> int:
    """Bytes spent on filter weights in the saved file."""
    return len(db.records) * db.meta.Ls * 16


def equivalent_fullband_bytes(db: SubbandDatabase) -> int:
    """Bytes for the same number of filters kept as L-bin complex spectra."""
    return len(db.records) * db.meta.L * 16


def describe(db) -> dict:
    """JSON-ready summary: meta plus per-record signature occupancy."""
    if isinstance(db, SubbandDatabase):
        m = db.meta
        return {
            "kind": "subband",
            "meta": {
                "L": m.L, "M": m.M, "D": m.D, "L_s": m.Ls, "K": m.K, "V": m.V,
                "I": m.num_noises, "sample_rate_hz": m.sample_rate_hz,
                "features": {
                    "segment_len": m.features.segment_len, "fft_len": m.features.fft_len,
                    "overlap": m.features.overlap, "window": m.features.window,
                },
                "prototype_sha256": m.prototype_digest.hex(),
                "combinations": db.combination_count,
            },
            "records": [
                {"i": i, "m": mm, "occupancy": float(np.mean(r.signature)),
                 "weight_norm": float(np.linalg.norm(r.weights_freq))}
                for (i, mm), r in sorted(db.records.items())
            ],
        }
    return {
        "kind": "fullband",
        "meta": {"L": db.L, "V": db.V, "sample_rate_hz": db.sample_rate_hz,
                 "features": {"segment_len": db.features.segment_len,
                              "fft_len": db.features.fft_len,
                              "overlap": db.features.overlap, "window": db.features.window}},
        "records": [
            {"index": r.filter_index, "occupancy": float(np.mean(r.signature)),
             "weight_norm": float(np.linalg.norm(r.weights_time))}
            for r in db.records
        ],
    }
