"""Shannon entropies of detector and syndrome distributions.

Three routes with different trust levels: plug-in (optionally Miller-Madow
corrected) estimates from sampled histograms, an exact brute-force oracle
that enumerates region-incident mechanisms, and a GF(2)-rank oracle valid at
p = 1/2 where the detector distribution is uniform over the image of the
incidence matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .codes import CssCode
from .gf2 import gf2_nullspace, gf2_rank, gf2_solve
from .sampler import SampleBatch, marginalize
from .spacetime import DetectorModel, NoiseModel, build_detector_model

LN2 = math.log(2.0)


class BruteForceCapExceeded(ValueError):
    def __init__(self, count: int, cap: int, what: str = "mechanisms"):
        super().__init__(f"{count} {what} exceed brute-force cap {cap}")
        self.count = count
        self.cap = cap


@dataclass
class EntropyEstimate:
    value: float  # bits
    std_error: float
    estimator: str
    n_samples: int
    support: int


def _entropy_bits(probs: np.ndarray) -> float:
    p = probs[probs > 0.0]
    return float(-(p * np.log2(p)).sum())


def _plugin_value(counts: np.ndarray, n: int, correction: str) -> Tuple[float, int]:
    counts = counts[counts > 0]
    p = counts / n
    h = float(-(p * np.log2(p)).sum())
    support = int(counts.size)
    if correction == "miller_madow":
        h += (support - 1) / (2.0 * n * LN2)
    elif correction != "none":
        raise ValueError(f"unknown correction {correction!r}")
    return h, support


def plugin_entropy(
    counts,
    n: int,
    correction: str = "miller_madow",
    width: Optional[int] = None,
    chunk_counts: Optional[Sequence[Dict[int, int]]] = None,
) -> EntropyEstimate:
    """Plug-in entropy of a counts table, in bits.

    ``counts`` is a {pattern: count} dict or an array of counts summing to n.
    With ``chunk_counts`` the standard error comes from a delete-one-chunk
    jackknife; otherwise from the delta-method variance of the plug-in.
    The value is clamped to [0, width] when a region width is given.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(counts, dict):
        arr = np.array(list(counts.values()), dtype=np.float64)
    else:
        arr = np.asarray(counts, dtype=np.float64)
    if arr.sum() != n:
        raise ValueError("counts do not sum to n")
    h, support = _plugin_value(arr, n, correction)
    if chunk_counts is not None and len(chunk_counts) > 1:
        keys = sorted(counts.keys()) if isinstance(counts, dict) else range(len(arr))
        key_pos = {k: i for i, k in enumerate(keys)}
        full = np.zeros(len(keys))
        for k, i in key_pos.items():
            full[i] = counts[k] if isinstance(counts, dict) else arr[k]
        loo = []
        for ch in chunk_counts:
            rest = full.copy()
            m = 0
            for k, c in ch.items():
                rest[key_pos[k]] -= c
                m += c
            loo.append(_plugin_value(rest, n - m, correction)[0])
        loo = np.array(loo)
        m_ch = len(loo)
        std = math.sqrt(max(0.0, (m_ch - 1) / m_ch * ((loo - loo.mean()) ** 2).sum()))
        kind = f"plugin+{correction}+jackknife"
    else:
        p = arr[arr > 0] / n
        var = float((p * np.log2(p) ** 2).sum() - (-(p * np.log2(p)).sum()) ** 2) / n
        std = math.sqrt(max(var, 0.0))
        kind = f"plugin+{correction}"
    lo, hi = 0.0, float(width) if width is not None else math.inf
    h = min(max(h, lo), hi)
    return EntropyEstimate(h, std, kind, n, support)


def _xor_dp_table(masks: Sequence[int], probs: Sequence[float], width: int) -> np.ndarray:
    """Exact pattern distribution from independent XOR contributions."""
    size = 1 << width
    table = np.zeros(size, dtype=np.float64)
    table[0] = 1.0
    idx = np.arange(size, dtype=np.uint64)
    for mask, p in zip(masks, probs):
        if mask == 0:
            continue
        perm = (idx ^ np.uint64(mask)).astype(np.int64)
        table = (1.0 - p) * table + p * table[perm]
    return table


def _xor_dp_sparse(masks: Sequence[int], probs: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Pattern-list variant for wide regions with few mechanisms."""
    patterns = np.zeros(1, dtype=np.uint64)
    weight = np.ones(1, dtype=np.float64)
    for mask, p in zip(masks, probs):
        if mask == 0:
            weight = weight * (1.0 - p) + weight * p
            continue
        patterns = np.concatenate([patterns, patterns ^ np.uint64(mask)])
        weight = np.concatenate([weight * (1.0 - p), weight * p])
    values, inverse = np.unique(patterns, return_inverse=True)
    probs_out = np.zeros(values.size, dtype=np.float64)
    np.add.at(probs_out, inverse, weight)
    return values, probs_out


def exact_region_dist(
    model: DetectorModel, region: Sequence[int], cap: int = 22
) -> Tuple[np.ndarray, np.ndarray]:
    """Exact joint distribution of detector bits on a region.

    Returns (patterns, probabilities); patterns pack region bits
    little-endian in the given order. Refused above ``cap`` incident
    mechanisms.
    """
    region = list(region)
    if not region:
        raise ValueError("region must be nonempty")
    mechs = model.region_mechanisms(region)
    if len(mechs) > cap:
        raise BruteForceCapExceeded(len(mechs), cap)
    pos = {d: j for j, d in enumerate(region)}
    masks = []
    probs = []
    for k in mechs:
        mask = 0
        for d in model.mechanisms[k].detectors:
            if d in pos:
                mask |= 1 << pos[d]
        masks.append(mask)
        probs.append(model.mechanisms[k].p)
    width = len(region)
    if width <= 24:
        table = _xor_dp_table(masks, probs, width)
        values = np.flatnonzero(table > 0.0).astype(np.uint64)
        return values, table[values.astype(np.int64)]
    return _xor_dp_sparse(masks, probs)


def marginal_entropy(values: np.ndarray, probs: np.ndarray, positions: Sequence[int]) -> float:
    """Entropy of a bit-subset marginal of an exact pattern distribution."""
    sub = np.zeros(values.size, dtype=np.uint64)
    for j, p in enumerate(positions):
        sub |= ((values >> np.uint64(p)) & np.uint64(1)) << np.uint64(j)
    agg_vals, inverse = np.unique(sub, return_inverse=True)
    agg = np.zeros(agg_vals.size, dtype=np.float64)
    np.add.at(agg, inverse, probs)
    return _entropy_bits(agg)


def exact_entropy(model: DetectorModel, region: Sequence[int], cap: int = 22) -> float:
    """Exact H(d_region) in bits by mechanism enumeration."""
    values, probs = exact_region_dist(model, region, cap=cap)
    return _entropy_bits(probs)


def rank_entropy_half(model: DetectorModel, region: Sequence[int]) -> float:
    """H(d_region) at p = 1/2 everywhere: GF(2) rank of the region rows of M.

    The detector distribution is then uniform over the image of the region
    submatrix, so the entropy is its rank in bits.
    """
    for mech in model.mechanisms:
        if mech.p != 0.5:
            raise ValueError("rank oracle requires every mechanism at p = 1/2")
    rows = []
    for d in region:
        row = 0
        for k in model.incident_mechanisms(d):
            row |= 1 << k
        rows.append(row)
    return float(gf2_rank(rows))


@dataclass
class DecompositionReport:
    """Raw-syndrome entropy decomposition H(s) = H(d) + |s| - |d|."""

    h_s: float
    h_d: float
    n_syndromes: int
    n_deterministic: int
    residual: float
    deterministic_are_detector_combos: bool
    rank_frame: int


def _syndrome_structure(
    model: DetectorModel, region: Sequence[Tuple[str, int, int]]
) -> Tuple[List[int], List[int], int]:
    """Mechanism masks and teleportation-frame masks per region syndrome bit.

    Frame columns are the X-measurement outcomes of code-qubit copies whose
    byproducts enter each measured syndrome: half-integer layers below a
    Z-check instance, integer layers (from 0) below an X-check instance.
    """
    code = model.code
    T = model.rounds
    mech_masks: List[int] = []
    frame_masks: List[int] = []
    ucols: Dict[Tuple[int, int], int] = {}

    def ucol(i: int, tick: int) -> int:
        key = (i, tick)
        if key not in ucols:
            ucols[key] = len(ucols)
        return ucols[key]

    for sector, c, r in region:
        n_checks = code.n_z_checks if sector == "z" else code.n_x_checks
        if not (0 <= c < n_checks and 1 <= r <= T + 1):
            raise ValueError(f"syndrome ({sector},{c},{r}) outside the run")
        sup = set(int(i) for i in code.check_support(sector, c))
        mm = 0
        for k, mech in enumerate(model.mechanisms):
            if sector == "z":
                hit = (
                    mech.kind == "data_x" and mech.index in sup and mech.time < r
                ) or (mech.kind == "readout" and mech.sector == "z" and mech.index == c and mech.time == r)
            else:
                hit = (
                    mech.kind == "data_z" and mech.index in sup and mech.time <= r - 2
                ) or (mech.kind == "readout" and mech.sector == "x" and mech.index == c and mech.time == r)
            if hit:
                mm |= 1 << k
        fm = 0
        for i in sup:
            for t in range(r):
                tick = 2 * t + 1 if sector == "z" else 2 * t
                fm |= 1 << ucol(i, tick)
        mech_masks.append(mm)
        frame_masks.append(fm)
    return mech_masks, frame_masks, len(ucols)


def entropy_decomposition_check(
    code: CssCode,
    rounds: int,
    noise: NoiseModel,
    region: Sequence[Tuple[str, int, int]],
    cap: int = 24,
) -> DecompositionReport:
    """Verify H(s) = H(d) + |s| - |d| on a region of raw syndrome bits.

    Raw syndromes carry the uniformly random teleportation byproducts of the
    measurement-based implementation, so only frame-free combinations are
    deterministic; these must be combinations of detectors. H(s) is computed
    from the frame structure plus the exact distribution of the deterministic
    combinations, H(d) independently through the detector incidence matrix.
    """
    model = build_detector_model(code, rounds, noise)
    if model.n_mechanisms > cap:
        raise BruteForceCapExceeded(model.n_mechanisms, cap)
    region = list(region)
    mech_masks, frame_masks, n_ucols = _syndrome_structure(model, region)
    n_s = len(region)

    # Combinations of region syndromes whose frames cancel: the left
    # nullspace of the frame matrix.
    col_rows = []
    for u in range(n_ucols):
        col = 0
        for i, fm in enumerate(frame_masks):
            if (fm >> u) & 1:
                col |= 1 << i
        col_rows.append(col)
    combo_basis = gf2_nullspace(col_rows, n_s)
    n_d = len(combo_basis)
    rank_frame = n_s - n_d

    # Mechanism footprint of each deterministic combination (syndrome route).
    sigma_masks = []
    for combo in combo_basis:
        m = 0
        for i in range(n_s):
            if (combo >> i) & 1:
                m ^= mech_masks[i]
        sigma_masks.append(m)

    # Each deterministic combination must be a combination of detector rows.
    det_rows = []
    for d in range(model.n_detectors):
        row = 0
        for k in model.incident_mechanisms(d):
            row |= 1 << k
        det_rows.append(row)
    det_combos = [gf2_solve(det_rows, m) for m in sigma_masks]
    combos_ok = all(w is not None for w in det_combos)

    probs = [m.p for m in model.mechanisms]

    def label_entropy(label_masks: List[int]) -> float:
        per_mech = []
        for k in range(model.n_mechanisms):
            lab = 0
            for j, m in enumerate(label_masks):
                if (m >> k) & 1:
                    lab |= 1 << j
            per_mech.append(lab)
        table = _xor_dp_table(per_mech, probs, len(label_masks))
        return _entropy_bits(table)

    h_labels_sigma = label_entropy(sigma_masks) if n_d else 0.0
    if combos_ok and n_d:
        m_route = []
        for w in det_combos:
            m = 0
            for d in range(model.n_detectors):
                if (w >> d) & 1:
                    m ^= det_rows[d]
            m_route.append(m)
        h_d = label_entropy(m_route)
    else:
        h_d = float("nan") if not combos_ok else 0.0

    h_s = (n_s - n_d) + h_labels_sigma
    residual = h_s - (h_d + n_s - n_d) if combos_ok else float("nan")
    return DecompositionReport(
        h_s=h_s,
        h_d=h_d,
        n_syndromes=n_s,
        n_deterministic=n_d,
        residual=residual,
        deterministic_are_detector_combos=combos_ok,
        rank_frame=rank_frame,
    )


def full_syndrome_region(model: DetectorModel) -> List[Tuple[str, int, int]]:
    """All (sector, check, round) syndrome coordinates including the perfect round."""
    out = []
    for sector, n_checks in (("z", model.code.n_z_checks), ("x", model.code.n_x_checks)):
        for c in range(n_checks):
            for r in range(1, model.rounds + 2):
                out.append((sector, c, r))
    return out


def entropy_from_batch(
    batch: SampleBatch,
    sub_region: Sequence[int],
    correction: str = "miller_madow",
    cap: int = 24,
) -> EntropyEstimate:
    """Plug-in entropy of a sampled batch marginal with jackknife errors."""
    total, chunked = marginalize(batch, sub_region, cap=cap, per_chunk=True)
    return plugin_entropy(
        total,
        batch.n_samples,
        correction=correction,
        width=len(sub_region),
        chunk_counts=chunked,
    )
