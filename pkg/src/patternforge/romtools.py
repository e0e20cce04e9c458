"""ROM images of sampling patterns and a trigger-timing model of the ADC driver.

``.crsp`` record layout (big-endian)::

    0   4  magic  b"CRSP"
    4   1  format version (1)
    5   1  width  bytes per sampling point
    6   2  reserved, zero
    8   4  k_grid
    12  4  count
    16  .. count fixed-width indices

``width = ceil(log2(k_grid) / 8)`` bytes, the smallest whole-byte word able to
count ``k_grid`` states. When ``k_grid`` is exactly ``2**(8*width)`` the last
grid index does not fit and is stored as 0, the value the driver's wrapping
grid counter holds at that instant; index 0 is otherwise invalid, so decoding
is unambiguous.

An archive is a sequence of records, each preceded by its byte length as a
4-byte big-endian integer.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable

import numpy as np

from . import kernels
from .core import Pattern

MAGIC = b"CRSP"
VERSION = 1
HEADER = struct.Struct(">4sBBHII")
HEADER_SIZE = HEADER.size  # 16
DEFAULT_CLOCK_DIV = 8


class RomError(ValueError):
    pass


class BadMagic(RomError):
    pass


class UnsupportedVersion(RomError):
    pass


class TruncatedPayload(RomError):
    pass


class NonMonotonic(RomError):
    pass


class IndexOutOfRange(RomError):
    pass


def word_width(k_grid: int) -> int:
    """Bytes per sampling point: ``ceil(log2(k_grid) / 8)``, in integer arithmetic."""
    if k_grid < 2:
        raise ValueError("k_grid must be >= 2")
    return ((k_grid - 1).bit_length() + 7) // 8


def memory_footprint(k_s: int, k_grid: int) -> int:
    """Bytes needed to store ``k_s`` sampling points of a ``k_grid`` grid."""
    if k_s < 0:
        raise ValueError("k_s must be >= 0")
    return k_s * word_width(k_grid)


def patterns_in_memory(memory: int, k_s: int, k_grid: int) -> int:
    """How many whole patterns fit in ``memory`` bytes."""
    per = memory_footprint(k_s, k_grid)
    return memory // per if per else 0


@dataclass(frozen=True)
class RomImage:
    width: int
    k_grid: int
    count: int
    payload: bytes

    def __post_init__(self):
        if len(self.payload) != self.width * self.count:
            raise TruncatedPayload(
                f"payload is {len(self.payload)} bytes, expected {self.width * self.count}"
            )

    def to_bytes(self) -> bytes:
        return HEADER.pack(MAGIC, VERSION, self.width, 0, self.k_grid, self.count) + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "RomImage":
        if len(data) < HEADER_SIZE:
            raise TruncatedPayload(f"record is {len(data)} bytes, shorter than the header")
        magic, version, width, _, k_grid, count = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise BadMagic(f"bad magic {magic!r}")
        if version != VERSION:
            raise UnsupportedVersion(f"format version {version}")
        if k_grid < 2 or width != word_width(k_grid):
            raise RomError(f"width {width} does not match k_grid {k_grid}")
        payload = data[HEADER_SIZE:]
        if len(payload) < width * count:
            raise TruncatedPayload(f"payload is {len(payload)} bytes, expected {width * count}")
        if len(payload) > width * count:
            raise RomError("trailing bytes after payload")
        return cls(width, k_grid, count, payload)


def encode_rom(p: Pattern) -> RomImage:
    w = word_width(p.k_grid)
    words = p.indices.astype(np.uint64) % np.uint64(1 << (8 * w))
    # big-endian fixed width: take the low ``w`` bytes of each 8-byte word
    raw = words.astype(">u8").view(np.uint8).reshape(-1, 8)[:, 8 - w :]
    return RomImage(w, p.k_grid, len(p), raw.tobytes())


def _decode_words(img: RomImage) -> np.ndarray:
    w = img.width
    raw = np.frombuffer(img.payload, dtype=np.uint8).reshape(img.count, w)
    padded = np.zeros((img.count, 8), dtype=np.uint8)
    padded[:, 8 - w :] = raw
    return padded.view(">u8").reshape(-1).astype(np.int64)


def decode_rom(img: RomImage, t_grid=1) -> Pattern:
    idx = _decode_words(img)
    if img.k_grid == 1 << (8 * img.width):
        idx[idx == 0] = img.k_grid
    if idx.size and (idx.min() < 1 or idx.max() > img.k_grid):
        raise IndexOutOfRange(f"index outside 1..{img.k_grid}")
    if np.any(np.diff(idx) <= 0):
        raise NonMonotonic("non-monotonic indices in ROM payload")
    return Pattern(idx, img.k_grid, t_grid)


# -- archives ---------------------------------------------------------------


def write_archive(fh: BinaryIO, images: Iterable[RomImage]) -> None:
    for img in images:
        rec = img.to_bytes()
        fh.write(struct.pack(">I", len(rec)))
        fh.write(rec)


def read_archive(fh: BinaryIO) -> list[RomImage]:
    out = []
    while True:
        head = fh.read(4)
        if not head:
            return out
        if len(head) < 4:
            raise TruncatedPayload("truncated record length")
        (size,) = struct.unpack(">I", head)
        rec = fh.read(size)
        if len(rec) < size:
            raise TruncatedPayload("truncated record")
        out.append(RomImage.from_bytes(rec))


# -- driver -----------------------------------------------------------------


@dataclass(frozen=True)
class TriggerTrace:
    """Input-clock cycles at which "sample now" asserts."""

    events: np.ndarray

    def gaps(self) -> np.ndarray:
        return np.diff(self.events)


def simulate_driver(img: RomImage, clock_div: int = DEFAULT_CLOCK_DIV, backend: str | None = None) -> TriggerTrace:
    """Replay ``img`` through a grid counter clocked every ``clock_div`` input cycles.

    The compiled backend steps the counter cycle by cycle; the numpy backend
    evaluates the closed form ``index * clock_div``.
    """
    if clock_div < 1:
        raise ValueError("clock_div must be >= 1")
    idx = decode_rom(img).indices.astype(np.int64)
    return TriggerTrace(kernels.backend(backend).driver_trace(np.ascontiguousarray(idx), clock_div))


# -- memory size vs PDF uniformity -----------------------------------------


def ep_vs_memory(bag, memories: Iterable[int]) -> list[tuple[int, int, float | None]]:
    """``(memory, patterns stored, e_p)`` using the first patterns of ``bag``
    that fit in each memory size."""
    from .evaluation import MetricAccumulator, finalize
    from .generators import bag_from_rows

    d = bag.params
    rows = []
    for m in memories:
        k = min(patterns_in_memory(m, d.k_req, d.k_grid), len(bag))
        if k == 0:
            rows.append((m, 0, None))
            continue
        sub = bag_from_rows(bag.kind, d, bag.sigma2, bag.seed, bag.indices[:k], bag.lengths[:k])
        rows.append((m, k, finalize(MetricAccumulator.for_params(d).add_bag(sub)).e_p))
    return rows
