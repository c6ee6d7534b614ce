"""Bucket-count sketches of discrete streams.

A ``Sketch`` holds the J bucket counters produced by hashing every stream
item through one hash function; a ``MultiSketch`` stacks M such rows with
independent hash seeds over the same stream.  Sketches are linear: the
sketch of a concatenated stream equals the elementwise merge of per-part
sketches, which is what makes sharded ingestion work.

The queried bucket count is always an upper bound on the true frequency
of the queried key, since collisions only ever add to a counter.

File format (little-endian): magic ``SKRV1``, u32 M, u32 J, u64 n, then
per row the two u64 hash seeds, then the M*J u64 counters in row-major
order.  A single-row sketch is stored as M=1.
"""

from __future__ import annotations

import csv
import struct
from typing import BinaryIO, Iterable

import numpy as np

from .errors import CounterOverflowError, IncompatibleSketchError
from .hashing import HashFunction, draw_hash, splitmix64_stream

_MAGIC = b"SKRV1"
_COUNTER_MAX = np.iinfo(np.uint64).max


class Sketch:
    """Single-view sketch: J counters plus the hash function that fills them."""

    def __init__(self, hash_fn: HashFunction, counts=None, n: int = 0):
        self.hash_fn = hash_fn
        if counts is None:
            counts = np.zeros(hash_fn.width, dtype=np.uint64)
        else:
            counts = np.asarray(counts, dtype=np.uint64).copy()
            if counts.shape != (hash_fn.width,):
                raise ValueError("counts length must equal the hash width")
        self.counts = counts
        self.n = int(n)
        if self.n != int(self.counts.sum()):
            raise ValueError("n must equal the sum of the counts")

    @classmethod
    def empty(cls, rng: np.random.Generator, width: int) -> "Sketch":
        return cls(draw_hash(rng, width))

    @property
    def width(self) -> int:
        return self.hash_fn.width

    def update(self, key) -> None:
        """Hash one item and increment its bucket."""
        j = self.hash_fn.bucket_of(key)
        if self.counts[j] >= _COUNTER_MAX:
            raise CounterOverflowError(f"bucket {j} is at the 64-bit counter limit")
        self.counts[j] += np.uint64(1)
        self.n += 1

    def add_many(self, keys: Iterable) -> None:
        """Bulk update; equivalent to repeated ``update`` calls."""
        buckets = self.hash_fn.buckets_of(keys)
        add = np.bincount(buckets, minlength=self.width).astype(np.uint64)
        if np.any(self.counts > _COUNTER_MAX - add):
            raise CounterOverflowError("a bucket counter would exceed 64 bits")
        self.counts += add
        self.n += int(add.sum())

    def bucket_count(self, key) -> int:
        """Counter of the bucket the key hashes to (>= its true frequency)."""
        return int(self.counts[self.hash_fn.bucket_of(key)])

    def merge(self, other: "Sketch") -> "Sketch":
        """Elementwise sum of two sketches built with the same hash function."""
        if (
            other.hash_fn != self.hash_fn
        ):
            raise IncompatibleSketchError("sketches use different widths or seeds")
        if np.any(self.counts > _COUNTER_MAX - other.counts):
            raise CounterOverflowError("merged counter would exceed 64 bits")
        return Sketch(self.hash_fn, self.counts + other.counts, self.n + other.n)

    def __eq__(self, other):
        return (
            isinstance(other, Sketch)
            and self.hash_fn == other.hash_fn
            and self.n == other.n
            and np.array_equal(self.counts, other.counts)
        )

    def __repr__(self):
        return f"Sketch(J={self.width}, n={self.n})"


class MultiSketch:
    """M independent sketch rows over the same stream, all of width J."""

    def __init__(self, rows: list[Sketch]):
        if not rows:
            raise ValueError("a MultiSketch needs at least one row")
        widths = {r.width for r in rows}
        if len(widths) != 1:
            raise ValueError("all rows must share the same width")
        ns = {r.n for r in rows}
        if len(ns) != 1:
            raise ValueError("all rows must have seen the same stream")
        self.rows = rows

    @classmethod
    def from_master_seed(cls, master_seed: int, num_hashes: int, width: int) -> "MultiSketch":
        """Build M empty rows with seeds expanded from one 64-bit master seed.

        Uses a splitmix64 stream so the whole sketch is reproducible from a
        single integer.
        """
        words = splitmix64_stream(master_seed, 2 * num_hashes)
        rows = []
        from .hashing import MERSENNE_P

        for l in range(num_hashes):
            a = 1 + words[2 * l] % (MERSENNE_P - 1)
            b = words[2 * l + 1] % MERSENNE_P
            rows.append(Sketch(HashFunction(a, b, width)))
        return cls(rows)

    @property
    def num_hashes(self) -> int:
        return len(self.rows)

    @property
    def width(self) -> int:
        return self.rows[0].width

    @property
    def n(self) -> int:
        return self.rows[0].n

    def update(self, key) -> None:
        for row in self.rows:
            row.update(key)

    def add_many(self, keys: Iterable) -> None:
        keys = list(keys) if not isinstance(keys, np.ndarray) else keys
        for row in self.rows:
            row.add_many(keys)

    def bucket_counts(self, key) -> list[int]:
        """One bucket count per row, each an upper bound on the frequency."""
        return [row.bucket_count(key) for row in self.rows]

    def merge(self, other: "MultiSketch") -> "MultiSketch":
        if other.num_hashes != self.num_hashes:
            raise IncompatibleSketchError("different number of rows")
        return MultiSketch([a.merge(b) for a, b in zip(self.rows, other.rows)])

    def __eq__(self, other):
        return isinstance(other, MultiSketch) and self.rows == other.rows

    def __repr__(self):
        return f"MultiSketch(M={self.num_hashes}, J={self.width}, n={self.n})"


def write_sketch(fh: BinaryIO, sketch: Sketch | MultiSketch) -> None:
    """Serialize a sketch in the SKRV1 binary layout."""
    rows = sketch.rows if isinstance(sketch, MultiSketch) else [sketch]
    m, j, n = len(rows), rows[0].width, rows[0].n
    fh.write(_MAGIC)
    fh.write(struct.pack("<IIQ", m, j, n))
    for row in rows:
        fh.write(struct.pack("<QQ", row.hash_fn.seed_a, row.hash_fn.seed_b))
    counts = np.concatenate([row.counts for row in rows]).astype("<u8")
    fh.write(counts.tobytes())


def read_sketch(fh: BinaryIO) -> Sketch | MultiSketch:
    """Read a sketch written by ``write_sketch``; returns a Sketch when M=1."""
    magic = fh.read(5)
    if magic != _MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    m, j, n = struct.unpack("<IIQ", fh.read(16))
    seeds = [struct.unpack("<QQ", fh.read(16)) for _ in range(m)]
    raw = fh.read(8 * m * j)
    if len(raw) != 8 * m * j:
        raise ValueError("truncated sketch file")
    counts = np.frombuffer(raw, dtype="<u8").reshape(m, j)
    rows = [
        Sketch(HashFunction(a, b, j), counts[l], int(counts[l].sum()))
        for l, (a, b) in enumerate(seeds)
    ]
    if any(row.n != n for row in rows):
        raise ValueError("row count total disagrees with header n")
    if m == 1:
        return rows[0]
    return MultiSketch(rows)


def write_counts_csv(fh, sketch: Sketch | MultiSketch) -> None:
    """Export counters as (row, bucket, count) CSV rows."""
    rows = sketch.rows if isinstance(sketch, MultiSketch) else [sketch]
    writer = csv.writer(fh)
    writer.writerow(["row", "bucket", "count"])
    for l, row in enumerate(rows):
        for j, c in enumerate(row.counts.tolist()):
            writer.writerow([l, j, c])
