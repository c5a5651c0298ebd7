"""Union-find matching decoder on the detector graph.

Mechanisms touching one or two detectors are the graph edges (one-detector
mechanisms connect to a virtual boundary node). Clusters grow from fired
detectors in half-edge steps, merge through a union-find structure until
every cluster has even parity (boundary-attached clusters are always valid),
then a spanning forest of each cluster is peeled to produce a correction
whose detector image reproduces the observed pattern exactly. Ties are
broken by lowest detector index throughout, so decoding is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .sampler import stream_key, _chunk_generator
from .spacetime import DetectorModel

BOUNDARY = -1


class InfeasibleSyndrome(ValueError):
    """Detector pattern outside the image of the incidence matrix."""


@dataclass
class DecodeResult:
    correction: List[int]  # mechanism indices
    logical_flips: np.ndarray  # predicted flip per protected logical bit
    success: Optional[bool] = None  # set when ground truth is known


class _Graph:
    """Edge list of the decoding graph for one detector model."""

    def __init__(self, model: DetectorModel):
        self.model = model
        self.edges: List[Tuple[int, int, int]] = []  # (u, v, mechanism)
        self.adj: List[List[int]] = [[] for _ in range(model.n_detectors + 1)]
        for k, mech in enumerate(model.mechanisms):
            dets = list(mech.detectors)
            if not dets:
                continue
            if len(dets) == 1:
                u, v = dets[0], BOUNDARY
            else:
                u, v = dets
            e = len(self.edges)
            self.edges.append((u, v, k))
            self.adj[u].append(e)
            self.adj[v if v != BOUNDARY else model.n_detectors].append(e)

    def other(self, e: int, node: int) -> int:
        u, v, _ = self.edges[e]
        return v if node == u else u


def _graph_for(model: DetectorModel) -> _Graph:
    graph = getattr(model, "_decoder_graph", None)
    if graph is None:
        graph = _Graph(model)
        model._decoder_graph = graph
    return graph


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if rb < ra:  # lowest-index root wins: deterministic tie-breaking
            ra, rb = rb, ra
        self.parent[rb] = ra
        return ra


def decode(model: DetectorModel, detector_bits: np.ndarray) -> DecodeResult:
    """Union-find decode of one detector pattern.

    Returns a correction whose detector image equals the input pattern and
    its predicted logical action.
    """
    bits = np.asarray(detector_bits, dtype=np.uint8)
    if bits.shape != (model.n_detectors,):
        raise ValueError("detector pattern length mismatch")
    graph = _graph_for(model)
    fired = [int(i) for i in np.flatnonzero(bits)]
    if not fired:
        return DecodeResult([], np.zeros(len(model.logicals), dtype=np.uint8))

    n = model.n_detectors
    bnode = n  # index used for the virtual boundary in adjacency
    uf = _UnionFind(n + 1)
    parity = bits.astype(np.int8).tolist() + [0]
    has_boundary = [False] * (n + 1)
    has_boundary[bnode] = True
    growth = [0] * len(graph.edges)
    grown: List[int] = []
    # Clusters start as the fired detectors; grow half-edges around odd,
    # non-boundary clusters, merging through the union-find until none remain.
    in_cluster = [False] * (n + 1)
    fringe: Dict[int, List[int]] = {}
    for v in fired:
        in_cluster[v] = True
        fringe[v] = list(graph.adj[v])

    def absorb(root: int, node: int) -> None:
        if not in_cluster[node]:
            in_cluster[node] = True
            uf.parent[uf.find(node)] = uf.find(root)
            fringe[uf.find(root)].extend(
                e for e in graph.adj[node] if growth[e] < 2
            )

    for _ in range(4 * (len(graph.edges) + 1)):
        odd = sorted(r for r in fringe if parity[r] % 2 == 1 and not has_boundary[r])
        if not odd:
            break
        newly_full: List[int] = []
        progressed = False
        for r in odd:
            keep: List[int] = []
            for e in fringe[r]:
                if growth[e] >= 2:
                    continue
                growth[e] += 1
                progressed = True
                if growth[e] == 2:
                    newly_full.append(e)
                else:
                    keep.append(e)
            fringe[r] = keep
        if not progressed:
            raise InfeasibleSyndrome("odd cluster cannot grow; pattern outside image")
        for e in sorted(newly_full):
            u, v, _ = graph.edges[e]
            vu = v if v != BOUNDARY else bnode
            grown.append(e)
            ru = uf.find(u)
            if not in_cluster[u]:
                # u outside any cluster: attach it to vu's cluster.
                absorb(uf.find(vu), u)
                continue
            if not in_cluster[vu] and vu != bnode:
                absorb(ru, vu)
                continue
            rv = uf.find(vu)
            if vu == bnode:
                has_boundary[ru] = True
                continue
            if ru == rv:
                continue
            merged = uf.union(ru, rv)
            other = rv if merged == ru else ru
            parity[merged] += parity[other]
            has_boundary[merged] = has_boundary[merged] or has_boundary[other]
            merged_fringe = fringe.pop(merged, [])
            merged_fringe.extend(fringe.pop(other, []))
            fringe[merged] = merged_fringe
    else:
        raise InfeasibleSyndrome("cluster growth did not converge")

    # Peel a spanning forest of the grown edges.
    correction: List[int] = []
    residual = bits.copy()
    adj_grown: Dict[int, List[int]] = {}
    for e in grown:
        u, v, _ = graph.edges[e]
        vu = v if v != BOUNDARY else bnode
        adj_grown.setdefault(u, []).append(e)
        adj_grown.setdefault(vu, []).append(e)
    visited = [False] * (n + 1)
    for root in sorted(adj_grown):
        if visited[root]:
            continue
        # BFS spanning tree, then peel leaves upward.
        order = [root]
        visited[root] = True
        tree_edge: Dict[int, int] = {}
        parent: Dict[int, int] = {root: root}
        head = 0
        while head < len(order):
            node = order[head]
            head += 1
            for e in sorted(adj_grown.get(node, [])):
                u, v, _ = graph.edges[e]
                vu = v if v != BOUNDARY else bnode
                nxt = vu if node == u else u
                if not visited[nxt]:
                    visited[nxt] = True
                    parent[nxt] = node
                    tree_edge[nxt] = e
                    order.append(nxt)
        flip = residual.copy()
        for node in reversed(order):
            if node == root:
                continue
            lit = node != bnode and flip[node] == 1
            if lit:
                e = tree_edge[node]
                correction.append(graph.edges[e][2])
                flip[node] ^= 1
                par = parent[node]
                if par != bnode:
                    flip[par] ^= 1
        if root != bnode and flip[root] == 1:
            raise InfeasibleSyndrome("residual parity at cluster root")
        for node in order:
            if node != bnode:
                residual[node] = flip[node]

    if np.any(residual):
        raise InfeasibleSyndrome("correction does not reproduce the pattern")

    flips = np.zeros(len(model.logicals), dtype=np.uint8)
    for k in correction:
        for l in model.mechanisms[k].logical_flips:
            flips[l] ^= 1
    return DecodeResult(sorted(correction), flips)


def wilson_interval(k: int, n: int, z: float = 1.96) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return (0.0, 1.0)
    p = k / n
    z2 = z * z
    denom = 1 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


@dataclass
class RatePoint:
    L: int
    T: int
    p: float
    q: float
    shots: int
    logical_errors: int
    rate: float
    ci_low: float
    ci_high: float


def logical_error_rate(
    model: DetectorModel, shots: int, seed: int, stream: str = "decoder"
) -> RatePoint:
    """Fraction of shots where the decoded correction mis-assigns a logical bit.

    Error patterns are drawn from the model's mechanism probabilities with the
    named counter-based stream, decoded, and compared against ground truth.
    """
    if shots < 1:
        raise ValueError("need at least one shot")
    probs = model.mechanism_probs()
    act = model.logical_action()
    inc = model.incidence()
    key = stream_key(seed, stream)
    failures = 0
    chunk = 4096
    done = 0
    c = 0
    while done < shots:
        m = min(chunk, shots - done)
        gen = _chunk_generator(key, c)
        errors = (gen.random((m, probs.size)) < probs[None, :]).astype(np.uint8)
        dets = errors @ inc.T % 2
        truth = errors @ act.T % 2
        for i in range(m):
            result = decode(model, dets[i])
            if np.any(result.logical_flips != truth[i]):
                failures += 1
        done += m
        c += 1
    rate = failures / shots
    lo, hi = wilson_interval(failures, shots)
    code = model.code
    return RatePoint(
        L=code.space_shape[0],
        T=model.rounds,
        p=model.noise.p_x,
        q=model.noise.q,
        shots=shots,
        logical_errors=failures,
        rate=rate,
        ci_low=lo,
        ci_high=hi,
    )


class NoCrossingError(ValueError):
    """Logical-error-rate curves do not bracket a crossing."""


@dataclass
class ThresholdEstimate:
    p_cross: float
    spread: float
    crossings: List[Tuple[int, int, float]]  # (L1, L2, crossing)


def threshold_estimate(curves: Dict[int, List[Tuple[float, float]]]) -> ThresholdEstimate:
    """Pairwise curve-crossing estimate from (p, rate) curves per size.

    Uses local linear interpolation of rate differences between consecutive
    grid points; reports the mean crossing and the spread across size pairs.
    """
    sizes = sorted(curves)
    if len(sizes) < 2:
        raise NoCrossingError("need at least two sizes")
    crossings: List[Tuple[int, int, float]] = []
    for i in range(len(sizes)):
        for j in range(i + 1, len(sizes)):
            l1, l2 = sizes[i], sizes[j]
            a = dict(curves[l1])
            b = dict(curves[l2])
            ps = sorted(set(a) & set(b))
            if len(ps) < 2:
                continue
            diffs = [a[p] - b[p] for p in ps]
            # Rate differences vanish deep below threshold and at saturation,
            # so noise can fabricate shallow sign changes there; the genuine
            # crossing is the steepest one.
            best = None
            for k in range(len(ps) - 1):
                d0, d1 = diffs[k], diffs[k + 1]
                if d0 == d1:
                    continue
                if d0 <= 0 <= d1 or d1 <= 0 <= d0:
                    frac = abs(d0) / abs(d1 - d0)
                    cross = ps[k] + frac * (ps[k + 1] - ps[k])
                    slope = abs(d1 - d0)
                    if best is None or slope > best[0]:
                        best = (slope, cross)
            if best is not None:
                crossings.append((l1, l2, best[1]))
    if not crossings:
        lines = [f"L={l}: " + ",".join(f"{p:.3f}:{r:.4f}" for p, r in curves[l]) for l in sizes]
        raise NoCrossingError("no bracketed crossing between any size pair:\n" + "\n".join(lines))
    values = [c for (_, _, c) in crossings]
    mean = float(np.mean(values))
    spread = float(np.max(values) - np.min(values)) / 2 if len(values) > 1 else 0.0
    return ThresholdEstimate(p_cross=mean, spread=spread, crossings=crossings)
