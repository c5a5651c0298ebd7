"""Monte Carlo sampling of detector outcomes d = M.e from a detector model.

Samples are stored column-major and bit-packed: one packed row of n sample
bits per detector, built by XOR-accumulating the incidence columns of the
drawn mechanism bits. Sampling is chunked with counter-based Philox streams
(one high-counter block per chunk), so batches are bit-reproducible for a
given (model, region, n, seed, stream) regardless of scheduling. Only
mechanisms incident to the requested region are drawn; the restriction
leaves the marginal unchanged.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .spacetime import DetectorModel

FORMAT_VERSION = 1


class PatternWidthExceeded(ValueError):
    """Histogram pattern wider than the configured cap."""

    def __init__(self, width: int, cap: int):
        super().__init__(f"pattern width {width} exceeds cap {cap} bits")
        self.width = width
        self.cap = cap


def stream_key(seed: int, stream: str) -> np.ndarray:
    """Derive a 128-bit Philox key from a root seed and a stream name."""
    digest = hashlib.sha256(f"{seed}/{stream}".encode()).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def _chunk_generator(key: np.ndarray, chunk: int) -> np.random.Generator:
    # High counter words: each chunk owns a disjoint 2^128-block slice.
    return np.random.Generator(np.random.Philox(counter=chunk << 128, key=key))


@dataclass
class SampleBatch:
    """Bit-packed detector outcome samples with RNG provenance.

    ``rows[j]`` holds the n sample bits of ``region[j]``, packed 8 per byte
    little-endian.
    """

    region: Tuple[int, ...]
    n_samples: int
    rows: np.ndarray  # (width, ceil(n/8)) uint8
    chunk_bounds: Tuple[int, ...]
    seed: int
    stream: str
    model_hash: str

    @property
    def region_width(self) -> int:
        return len(self.region)

    @property
    def n_chunks(self) -> int:
        return len(self.chunk_bounds) - 1

    def chunk_slice(self, i: int) -> slice:
        return slice(self.chunk_bounds[i], self.chunk_bounds[i + 1])

    def row_bits(self, j: int) -> np.ndarray:
        """Unpacked 0/1 bits of one detector row."""
        return np.unpackbits(self.rows[j], bitorder="little", count=self.n_samples)

    @property
    def patterns(self) -> np.ndarray:
        """One little-endian word per sample (regions up to 64 bits)."""
        return subset_patterns(self, self.region)

    def save(self, path: str) -> None:
        """Flat binary file (packed rows) plus a JSON sidecar."""
        with open(path, "wb") as f:
            f.write(self.rows.tobytes())
        sidecar = {
            "version": FORMAT_VERSION,
            "region": list(self.region),
            "n_samples": self.n_samples,
            "chunk_bounds": list(self.chunk_bounds),
            "seed": self.seed,
            "stream": self.stream,
            "model_hash": self.model_hash,
        }
        with open(path + ".json", "w") as f:
            json.dump(sidecar, f, sort_keys=True)

    @staticmethod
    def load(path: str) -> "SampleBatch":
        with open(path + ".json") as f:
            meta = json.load(f)
        width = len(meta["region"])
        n = meta["n_samples"]
        raw = np.fromfile(path, dtype=np.uint8).reshape(width, (n + 7) // 8)
        return SampleBatch(
            region=tuple(meta["region"]),
            n_samples=n,
            rows=raw,
            chunk_bounds=tuple(meta["chunk_bounds"]),
            seed=meta["seed"],
            stream=meta["stream"],
            model_hash=meta["model_hash"],
        )


def sample_batch(
    model: DetectorModel,
    region: Sequence[int],
    n: int,
    seed: int,
    stream: str = "sampling",
    n_chunks: int = 32,
) -> SampleBatch:
    """Draw n detector-outcome samples restricted to ``region``.

    Each sample draws independent mechanism bits e_k ~ Bernoulli(p_k) for the
    region-incident mechanisms and emits (M.e mod 2) restricted to the region.
    """
    region = tuple(region)
    if not region:
        raise ValueError("region must be nonempty")
    if n < 1:
        raise ValueError("need at least one sample")
    n_chunks = min(n_chunks, n)
    pos = {d: j for j, d in enumerate(region)}
    mech_rows: List[Tuple[float, List[int]]] = []
    for k in model.region_mechanisms(region):
        mech = model.mechanisms[k]
        rows = [pos[d] for d in mech.detectors if d in pos]
        mech_rows.append((mech.p, rows))
    key = stream_key(seed, stream)
    # Interior chunk boundaries are byte-aligned so packed rows concatenate.
    bounds = [0]
    for i in range(1, n_chunks):
        b = 8 * round(i * n / (8 * n_chunks))
        bounds.append(min(max(b, bounds[-1]), n))
    bounds.append(n)
    packed = np.zeros((len(region), (n + 7) // 8), dtype=np.uint8)
    for c in range(n_chunks):
        lo, hi = bounds[c], bounds[c + 1]
        if hi == lo:
            continue
        gen = _chunk_generator(key, c)
        m = hi - lo
        acc = np.zeros((len(region), m), dtype=np.uint8)
        for p, rows in mech_rows:
            bits = (gen.random(m) < p).astype(np.uint8)
            for j in rows:
                acc[j] ^= bits
        # Chunk boundaries are byte-aligned except possibly the last chunk.
        if lo % 8 == 0:
            span = slice(lo // 8, lo // 8 + (m + 7) // 8)
            packed[:, span] = np.packbits(acc, axis=1, bitorder="little")
        else:  # pragma: no cover - bounds are byte-aligned by construction
            for j in range(len(region)):
                for i, b in enumerate(acc[j]):
                    if b:
                        packed[j, (lo + i) // 8] ^= 1 << ((lo + i) % 8)
    return SampleBatch(
        region=region,
        n_samples=n,
        rows=packed,
        chunk_bounds=tuple(bounds),
        seed=seed,
        stream=stream,
        model_hash=model.model_hash(),
    )


def subset_patterns(batch: SampleBatch, sub_region: Sequence[int]) -> np.ndarray:
    """Repack each sample onto the bits of ``sub_region`` (subset of region)."""
    if len(sub_region) > 64:
        raise PatternWidthExceeded(len(sub_region), 64)
    pos = {d: j for j, d in enumerate(batch.region)}
    out = np.zeros(batch.n_samples, dtype=np.uint64)
    for j, d in enumerate(sub_region):
        if d not in pos:
            raise ValueError(f"detector {d} not in batch region")
        bits = batch.row_bits(pos[d]).astype(np.uint64)
        out |= bits << np.uint64(j)
    return out


def marginalize(
    batch: SampleBatch,
    sub_region: Sequence[int],
    cap: int = 24,
    per_chunk: bool = False,
):
    """Exact histogram of sample patterns over a sub-region.

    Returns {pattern: count}; with ``per_chunk`` a list of per-chunk
    histograms is returned alongside. Patterns wider than ``cap`` bits are
    refused.
    """
    sub_region = list(sub_region)
    if len(sub_region) > cap:
        raise PatternWidthExceeded(len(sub_region), cap)
    sp = subset_patterns(batch, sub_region)
    values, counts = np.unique(sp, return_counts=True)
    total = {int(v): int(c) for v, c in zip(values, counts)}
    if not per_chunk:
        return total
    chunked: List[Dict[int, int]] = []
    for i in range(batch.n_chunks):
        v, c = np.unique(sp[batch.chunk_slice(i)], return_counts=True)
        chunked.append({int(x): int(y) for x, y in zip(v, c)})
    return total, chunked
