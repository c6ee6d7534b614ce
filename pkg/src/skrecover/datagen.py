"""Synthetic stream generators with exact ground truth, plus stream replay.

Symbols are 64-bit integers assigned in order of first appearance, so a
stream is just an int64 array and per-symbol truth is an array indexed by
symbol id.  The Pitman-Yor urn uses the same O(1)-per-step selection
trick as the power-law urn in ``fitting``: an existing symbol's weight
(count - discount) is split into (count - 1) unit weights, one per
repeat arrival, plus a single (1 - discount) weight per distinct symbol.

``replay`` feeds one stream to any combination of sketches, a prefix
retainer (which also tracks exact full-stream counts for the retained
keys, as interval calibration needs), and a ground-truth accumulator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .sketch import MultiSketch, Sketch


@dataclass(frozen=True)
class GroundTruth:
    """Exact per-symbol counts for a finished stream."""

    counts: np.ndarray  # counts[symbol_id], all >= 1
    n: int

    def __post_init__(self):
        if int(self.counts.sum()) != self.n:
            raise ValueError("counts must sum to n")

    @classmethod
    def from_stream(cls, stream: np.ndarray) -> "GroundTruth":
        stream = np.asarray(stream)
        if stream.size == 0:
            return cls(counts=np.zeros(0, dtype=np.int64), n=0)
        counts = np.bincount(stream).astype(np.int64)
        if np.any(counts == 0):
            raise ValueError("symbol ids must be dense (assigned by first appearance)")
        return cls(counts=counts, n=int(stream.size))

    @property
    def num_distinct(self) -> int:
        return int(self.counts.size)

    def freq_of_freq(self) -> np.ndarray:
        """m[i] = number of distinct symbols appearing exactly i+1 times."""
        if self.counts.size == 0:
            return np.zeros(0, dtype=np.int64)
        return np.bincount(self.counts)[1:]

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh)
        writer.writerow(["symbol", "count"])
        for s, c in enumerate(self.counts.tolist()):
            writer.writerow([s, c])


def relabel_first_appearance(stream: np.ndarray) -> np.ndarray:
    """Map arbitrary symbols to dense ids 0, 1, ... in first-appearance order."""
    stream = np.asarray(stream)
    _, first_idx, inverse = np.unique(stream, return_index=True, return_inverse=True)
    order = np.argsort(first_idx, kind="stable")
    rank = np.empty(order.size, dtype=np.int64)
    rank[order] = np.arange(order.size)
    return rank[inverse]


def gen_pyp(
    rng: np.random.Generator, gamma: float, sigma: float, n: int
) -> tuple[np.ndarray, GroundTruth]:
    """Sequential two-parameter urn with strength gamma and discount sigma.

    After i draws with k distinct symbols, the next draw is new with
    probability (gamma + k sigma) / (gamma + i) and repeats symbol h with
    probability (count_h - sigma) / (gamma + i).
    """
    if not 0 <= sigma < 1:
        raise ValueError("sigma must lie in [0, 1)")
    if gamma <= -sigma:
        raise ValueError("gamma must exceed -sigma")
    if n < 1:
        raise ValueError("n must be >= 1")

    uniforms = rng.random(n)
    stream = np.empty(n, dtype=np.int64)
    stream[0] = 0
    counts = [1]
    k = 1
    nonfirst: list[int] = []
    for i in range(1, n):
        r = uniforms[i] * (gamma + i)
        if r < gamma + k * sigma:
            stream[i] = k
            counts.append(1)
            k += 1
        else:
            r -= gamma + k * sigma
            if r < i - k:
                symbol = nonfirst[int(r)]
            else:
                symbol = int((r - (i - k)) / (1.0 - sigma))
                symbol = min(symbol, k - 1)
            counts[symbol] += 1
            nonfirst.append(symbol)
            stream[i] = symbol
    truth = GroundTruth(counts=np.asarray(counts, dtype=np.int64), n=n)
    return stream, truth


def _alias_table(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias method setup: O(1) categorical draws after O(V) build."""
    v = probs.size
    scaled = probs * v
    alias = np.zeros(v, dtype=np.int64)
    accept = np.ones(v)
    small = [i for i in range(v) if scaled[i] < 1.0]
    large = [i for i in range(v) if scaled[i] >= 1.0]
    scaled = scaled.copy()
    while small and large:
        s = small.pop()
        l = large.pop()
        accept[s] = scaled[s]
        alias[s] = l
        scaled[l] = scaled[l] + scaled[s] - 1.0
        (small if scaled[l] < 1.0 else large).append(l)
    for i in large + small:
        accept[i] = 1.0
    return accept, alias


def gen_zipf(
    rng: np.random.Generator, c: float, vocab: int = 10**6, n: int = 1
) -> tuple[np.ndarray, GroundTruth]:
    """IID draws with p_k proportional to k^(-c) over ranks 1..vocab.

    The support is truncated at ``vocab``; symbols are relabeled to dense
    ids by first appearance.
    """
    if vocab is None:
        raise ValueError("an unbounded vocabulary is not supported; pass a finite vocab")
    if c <= 1:
        raise ValueError("the tail parameter must exceed 1")
    if vocab < 1 or n < 1:
        raise ValueError("vocab and n must be >= 1")
    ranks = np.arange(1, vocab + 1, dtype=float)
    probs = ranks**-c
    probs /= probs.sum()
    accept, alias = _alias_table(probs)
    cells = rng.integers(0, vocab, size=n)
    keep = rng.random(n) < accept[cells]
    raw = np.where(keep, cells, alias[cells])
    stream = relabel_first_appearance(raw)
    return stream, GroundTruth.from_stream(stream)


class PrefixRetainer:
    """Keeps the first m stream items and their exact full-stream counts."""

    def __init__(self, m: int):
        if m < 1:
            raise ValueError("m must be >= 1")
        self.m = m
        self.prefix: list = []
        self._counts: dict = {}

    def consume(self, stream: np.ndarray) -> None:
        stream = np.asarray(stream)
        room = self.m - len(self.prefix)
        if room > 0:
            self.prefix.extend(stream[:room].tolist())
            for key in set(self.prefix):
                self._counts.setdefault(key, 0)
        if self._counts:
            keys, counts = np.unique(stream, return_counts=True)
            lookup = dict(zip(keys.tolist(), counts.tolist()))
            for key in self._counts:
                self._counts[key] += lookup.get(key, 0)

    def retained_pairs(self) -> list[tuple]:
        """(key, exact count) for each retained item, duplicates included."""
        return [(key, self._counts[key]) for key in self.prefix]

    def distinct_counts(self) -> dict:
        return dict(self._counts)


def replay(
    stream: np.ndarray,
    sketches=(),
    retainer: PrefixRetainer | None = None,
    with_truth: bool = False,
) -> GroundTruth | None:
    """One pass over a stream feeding every sink.

    ``sketches`` may hold ``Sketch`` and/or ``MultiSketch`` values.  When
    ``with_truth`` is set the exact ground truth is computed and returned.
    """
    stream = np.asarray(stream)
    if isinstance(sketches, (Sketch, MultiSketch)):
        sketches = (sketches,)
    for sk in sketches:
        sk.add_many(stream)
    if retainer is not None:
        retainer.consume(stream)
    if with_truth:
        return GroundTruth.from_stream(stream)
    return None
