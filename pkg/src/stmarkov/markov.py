"""Tripartition geometry, CMI estimation, and Markov-length extraction.

Two tripartition layouts on a sector's detector lattice (space wraps, time is
open):

* ``ring``: A is a (w_A)^D block, B the full Chebyshev annulus of width w_B
  around it, C a (w_C)^D probe block at distance w_B + 1 along the first
  space axis. Feasible for small w_B; used for oracle-scale checks.
* ``strip``: A, B, C are time-stacked blocks sharing A's spatial footprint,
  with B the w_B-deep buffer between A and C. The stack runs along the open
  time axis so no wraparound path connects A and C from behind, and widths
  stay small enough for sampled histograms at every rung of the w_B ladder.
  The measured decay length tracks the critical response of the noise model
  with a finite-width downward displacement of its peak location.

CMI is reported in bits; the decay convention is I ~ exp(-dist/xi), so the
fitted xi is an e-folding length in lattice units.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product as iproduct
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .codes import repetition_code, toric_code
from .entropy import LN2, exact_region_dist, marginal_entropy
from .sampler import PatternWidthExceeded, sample_batch, subset_patterns
from .spacetime import DetectorModel, NoiseModel, Tripartition, build_detector_model

FLOOR_SIGMA = 3.0


class FitError(ValueError):
    """Markov-length fit could not be performed; carries the reason."""


@dataclass
class CmiPoint:
    dist: int
    cmi: float
    std_error: float
    method: str
    n_samples: int
    descriptor: Dict[str, object] = field(default_factory=dict)
    support_abc: int = 0
    reliable: bool = True  # False when the histogram support crowds n


@dataclass
class MarkovFit:
    xi: float
    xi_stderr: float
    slope_log2: float
    slope_stderr: float
    r_squared: float
    window: Tuple[int, int]
    n_used: int
    points: List[CmiPoint]


def _sector_lattice(model: DetectorModel, sector: str) -> Dict[Tuple[int, ...], int]:
    return {
        d.coords: i for i, d in enumerate(model.detectors) if d.sector == sector
    }


def _wrap_block(start: int, width: int, size: int, periodic: bool) -> List[int]:
    if width > size:
        raise ValueError(f"block width {width} exceeds lattice extent {size}")
    if periodic:
        return [(start + k) % size for k in range(width)]
    return list(range(start, start + width))


def build_tripartition(
    model: DetectorModel,
    wA: int = 2,
    wB: int = 1,
    wC: int = 2,
    anchor: Optional[Tuple[int, ...]] = None,
    mode: str = "ring",
    sector: str = "z",
    cap: int = 24,
    bulk_margin: int = 1,
) -> Tripartition:
    """Build an (A, B, C) detector tripartition with dist(A, C) = w_B + 1.

    Regions stay ``bulk_margin`` detectors away from the temporal boundaries
    (0 admits the boundary rows themselves, for oracle-scale checks). Refuses
    layouts whose total width exceeds the histogram cap (shrink w_C, or w_B
    for ring mode).
    """
    if mode not in ("ring", "strip"):
        raise ValueError(f"unknown tripartition mode {mode!r}")
    if min(wA, wC) < 1 or wB < 0:
        raise ValueError("widths must satisfy wA, wC >= 1 and wB >= 0")
    lattice = _sector_lattice(model, sector)
    if not lattice:
        raise ValueError(f"model has no detectors in sector {sector!r}")
    space = model.code.space_shape
    D = len(space)
    T = model.rounds
    t_lo, t_hi = bulk_margin, T - bulk_margin  # inclusive bulk band
    if t_hi < t_lo:
        raise ValueError("model too short in time for a bulk tripartition")

    def cells(space_starts, widths, t_start, t_width) -> List[Tuple[int, ...]]:
        axes = [
            _wrap_block(space_starts[d], widths[d], space[d], periodic=True)
            for d in range(D)
        ]
        times = _wrap_block(t_start, t_width, T + 1, periodic=False)
        if min(times) < t_lo or max(times) > t_hi:
            raise ValueError(
                f"time extent {times} leaves the bulk band [{t_lo},{t_hi}]"
            )
        out = [(*pos, t) for pos in iproduct(*axes) for t in times]
        if len(set(out)) != len(out):
            raise ValueError("region wraps onto itself; reduce widths")
        return out

    if mode == "strip":
        total_t = wA + wB + wC
        if anchor is None:
            a_sp = tuple((space[d] - wA) // 2 for d in range(D))
            t0 = max(t_lo, (T + 1 - total_t) // 2)
        else:
            a_sp, t0 = tuple(anchor[:-1]), anchor[-1]
        a = cells(a_sp, [wA] * D, t0, wA)
        b = cells(a_sp, [wA] * D, t0 + wA, wB) if wB else []
        c = cells(a_sp, [wA] * D, t0 + wA + wB, wC)
    else:
        if anchor is None:
            a_sp = tuple((space[d] - wA) // 2 for d in range(D))
            t0 = max(t_lo, (T + 1 - wA) // 2)
        else:
            a_sp, t0 = tuple(anchor[:-1]), anchor[-1]
        a = cells(a_sp, [wA] * D, t0, wA)
        a_set = set(a)

        def chebyshev_to_a(coord) -> int:
            best = None
            for cell in a_set:
                dist = abs(coord[-1] - cell[-1])
                for d in range(D):
                    delta = abs(coord[d] - cell[d])
                    dist = max(dist, min(delta, space[d] - delta))
                best = dist if best is None else min(best, dist)
            return best

        b = []
        if wB:
            for coord in lattice:
                if t_lo <= coord[-1] <= t_hi and 1 <= chebyshev_to_a(coord) <= wB:
                    b.append(coord)
        c_sp = ((a_sp[0] + wA + wB) % space[0],) + a_sp[1:]
        c = cells(c_sp, [wC] + [min(wC, wA)] * (D - 1), t0, min(wC, wA))

    def to_idx(coords) -> Tuple[int, ...]:
        missing = [xy for xy in coords if xy not in lattice]
        if missing:
            raise ValueError(f"region cells outside the detector lattice: {missing[:3]}")
        return tuple(sorted(lattice[xy] for xy in coords))

    tri = Tripartition(
        a=to_idx(a),
        b=to_idx(b),
        c=to_idx(c),
        dist_ac=0,
        descriptor={
            "mode": mode,
            "wA": wA,
            "wB": wB,
            "wC": wC,
            "sector": sector,
            "anchor": tuple(a_sp) + (t0,),
        },
    )
    dist = min(
        model.detector_distance(i, j) for i in tri.a for j in tri.c
    )
    if dist != wB + 1:
        raise ValueError(
            f"A-C separation {dist} != wB+1 = {wB + 1}; lattice too small for this ladder"
        )
    tri = Tripartition(tri.a, tri.b, tri.c, dist, tri.descriptor)
    width = len(tri.all_detectors)
    if width > cap:
        raise PatternWidthExceeded(width, cap)
    validate_tripartition(model, tri)
    return tri


def validate_tripartition(model: DetectorModel, tri: Tripartition) -> None:
    """Check the separation property: no mechanism touches both A and C."""
    if tri.dist_ac >= 2:
        a_set, c_set = set(tri.a), set(tri.c)
        for mech in model.mechanisms:
            dets = set(mech.detectors)
            if dets & a_set and dets & c_set:
                raise ValueError(f"mechanism {mech} spans A and C")


def _entropy_counts(counts: np.ndarray, n: int, width: int, correction: bool) -> float:
    c = counts[counts > 0].astype(np.float64)
    p = c / n
    h = float(-(p * np.log2(p)).sum())
    if correction:
        h += (c.size - 1) / (2.0 * n * LN2)
    return min(max(h, 0.0), float(width))


def _sampled_entropies(batch, subsets, correction: bool):
    """Full-sample and leave-one-chunk-out entropies plus supports per subset."""
    n = batch.n_samples
    n_chunks = batch.n_chunks
    chunk_ids = np.empty(n, dtype=np.int64)
    for i in range(n_chunks):
        chunk_ids[batch.chunk_slice(i)] = i
    chunk_sizes = np.array(
        [batch.chunk_bounds[i + 1] - batch.chunk_bounds[i] for i in range(n_chunks)]
    )
    full = []
    loo = []
    supports = []
    for sub in subsets:
        sp = subset_patterns(batch, sub)
        _, inverse = np.unique(sp, return_inverse=True)
        k = int(inverse.max()) + 1 if inverse.size else 0
        cc = np.zeros((k, n_chunks), dtype=np.int64)
        np.add.at(cc, (inverse, chunk_ids), 1)
        totals = cc.sum(axis=1)
        full.append(_entropy_counts(totals, n, len(sub), correction))
        supports.append(k)
        h_loo = np.empty(n_chunks)
        for i in range(n_chunks):
            h_loo[i] = _entropy_counts(
                totals - cc[:, i], n - int(chunk_sizes[i]), len(sub), correction
            )
        loo.append(h_loo)
    return full, loo, supports


def cmi(
    model: DetectorModel,
    tri: Tripartition,
    method: str = "sampled",
    n: int = 10**6,
    seed: int = 0,
    stream: str = "cmi",
    correction: bool = True,
    exact_cap: int = 24,
) -> CmiPoint:
    """I(A:C|B) = H(AB) + H(BC) - H(B) - H(ABC) over detector bits.

    Sampled estimates draw one batch over A∪B∪C and estimate all four
    entropies from it, with a delete-one-chunk jackknife on the combined
    statistic. Values at the noise floor may come out slightly negative and
    are reported as-is. ``exact`` enumerates region-incident mechanisms.
    """
    region = list(tri.all_detectors)
    ab = sorted(set(tri.a) | set(tri.b))
    bc = sorted(set(tri.b) | set(tri.c))
    b = sorted(tri.b)
    if method == "exact":
        values, probs = exact_region_dist(model, region, cap=exact_cap)
        pos = {d: j for j, d in enumerate(region)}

        def h(sub):
            if not sub:
                return 0.0
            return marginal_entropy(values, probs, [pos[d] for d in sub])

        value = h(ab) + h(bc) - h(b) - h(region)
        return CmiPoint(tri.dist_ac, value, 0.0, "exact", 0, dict(tri.descriptor))
    if method != "sampled":
        raise ValueError(f"unknown method {method!r}")
    batch = sample_batch(model, region, n, seed, stream=stream)
    return cmi_from_batch(batch, tri, correction=correction)


# Plug-in histograms stop being trustworthy once the observed support is a
# sizable fraction of the sample count (the residual bias after Miller-Madow
# then rivals small CMI signals); such points are flagged, not used in fits.
SUPPORT_FACTOR = 100


def cmi_from_batch(batch, tri: Tripartition, correction: bool = True) -> CmiPoint:
    """CMI estimate of a tripartition from an existing sample batch."""
    region = list(tri.all_detectors)
    ab = sorted(set(tri.a) | set(tri.b))
    bc = sorted(set(tri.b) | set(tri.c))
    b = sorted(tri.b)
    subsets = [ab, bc, b, region] if b else [ab, bc, region]
    full, loo, supports = _sampled_entropies(batch, subsets, correction)
    if b:
        value = full[0] + full[1] - full[2] - full[3]
        cmi_loo = loo[0] + loo[1] - loo[2] - loo[3]
        support_abc = supports[3]
    else:
        value = full[0] + full[1] - full[2]
        cmi_loo = loo[0] + loo[1] - loo[2]
        support_abc = supports[2]
    n = batch.n_samples
    n_chunks = batch.n_chunks
    mean = cmi_loo.mean()
    var = (n_chunks - 1) / n_chunks * ((cmi_loo - mean) ** 2).sum()
    std = math.sqrt(max(var, 0.0))
    return CmiPoint(
        tri.dist_ac,
        value,
        std,
        f"sampled(n={n},seed={batch.seed})",
        n,
        dict(tri.descriptor),
        support_abc=support_abc,
        reliable=support_abc * SUPPORT_FACTOR <= n,
    )


def averaged_cmi_ladder(
    model: DetectorModel,
    wB_list: Sequence[int],
    n: int,
    seed: int,
    wA: int = 2,
    wC: int = 2,
    mode: str = "strip",
    sector: str = "z",
    cap: int = 24,
    stream: str = "cmi",
    anchor_stride: Optional[int] = None,
    correction: bool = True,
) -> List[CmiPoint]:
    """One CmiPoint per ladder rung, averaged over spatial anchor translates.

    A single batch covering the ladder's time band is drawn; every rung and
    every translate is evaluated on the same shots, and the jackknife runs on
    the translate-averaged statistic (which handles the overlap correlations).
    Rungs whose joint histograms crowd the sample count are flagged
    unreliable.
    """
    space = model.code.space_shape
    T = model.rounds
    wB_max = max(wB_list)
    extent = wA + wB_max + wC
    t0 = max(1, (T + 1 - extent) // 2)
    if t0 + extent - 1 > T - 1:
        raise ValueError(f"ladder extent {extent} does not fit the time bulk")
    if anchor_stride is None:
        anchor_stride = max(2, space[0] // 8)  # ~8 translates at any size
    anchors = [x for x in range(0, space[0], anchor_stride)]
    lattice = _sector_lattice(model, sector)
    band = sorted(
        idx
        for coords, idx in lattice.items()
        if t0 <= coords[-1] <= t0 + extent - 1
    )
    batch = sample_batch(model, band, n, seed, stream=stream)
    points: List[CmiPoint] = []
    for wB in wB_list:
        tris = []
        for x in anchors:
            anchor = (x,) + tuple((space[d] - wA) // 2 for d in range(1, len(space))) + (t0,)
            tris.append(
                build_tripartition(
                    model, wA=wA, wB=wB, wC=wC, anchor=anchor, mode=mode,
                    sector=sector, cap=cap,
                )
            )
        values = []
        loos = []
        supports = []
        for tri in tris:
            pt_region = list(tri.all_detectors)
            ab = sorted(set(tri.a) | set(tri.b))
            bc = sorted(set(tri.b) | set(tri.c))
            bb = sorted(tri.b)
            subsets = [ab, bc, bb, pt_region] if bb else [ab, bc, pt_region]
            full, loo, sup = _sampled_entropies(batch, subsets, correction)
            if bb:
                values.append(full[0] + full[1] - full[2] - full[3])
                loos.append(loo[0] + loo[1] - loo[2] - loo[3])
                supports.append(sup[3])
            else:
                values.append(full[0] + full[1] - full[2])
                loos.append(loo[0] + loo[1] - loo[2])
                supports.append(sup[2])
        value = float(np.mean(values))
        loo_mean = np.mean(loos, axis=0)
        n_chunks = batch.n_chunks
        mean = loo_mean.mean()
        var = (n_chunks - 1) / n_chunks * ((loo_mean - mean) ** 2).sum()
        support_abc = max(supports)
        points.append(
            CmiPoint(
                tris[0].dist_ac,
                value,
                math.sqrt(max(var, 0.0)),
                f"sampled(n={n},seed={seed},anchors={len(anchors)})",
                n,
                dict(tris[0].descriptor),
                support_abc=support_abc,
                reliable=support_abc * SUPPORT_FACTOR <= n,
            )
        )
    return points


def cmi_rank_half(model: DetectorModel, tri: Tripartition) -> float:
    """Rank-formula CMI valid when every mechanism has p = 1/2."""
    from .entropy import rank_entropy_half

    ab = sorted(set(tri.a) | set(tri.b))
    bc = sorted(set(tri.b) | set(tri.c))
    b = sorted(tri.b)
    region = list(tri.all_detectors)
    h_b = rank_entropy_half(model, b) if b else 0.0
    return (
        rank_entropy_half(model, ab)
        + rank_entropy_half(model, bc)
        - h_b
        - rank_entropy_half(model, region)
    )


def markov_length(
    points: Sequence[CmiPoint],
    min_points: int = 3,
    floor_sigma: float = FLOOR_SIGMA,
) -> MarkovFit:
    """Weighted log-linear fit of CMI vs distance; xi is the e-folding length.

    Points below the noise floor (cmi <= floor_sigma * stderr) are dropped;
    fewer than ``min_points`` usable points is a fit failure.
    """
    usable = [
        pt
        for pt in points
        if pt.reliable
        and pt.cmi > 0
        and (pt.std_error == 0.0 or pt.cmi > floor_sigma * pt.std_error)
    ]
    if len(usable) < min_points:
        raise FitError(
            f"only {len(usable)} of {len(points)} points usable (above the noise "
            f"floor and within histogram validity); need {min_points}"
        )
    x = np.array([pt.dist for pt in usable], dtype=np.float64)
    y = np.array([math.log2(pt.cmi) for pt in usable])
    sig = np.array(
        [
            pt.std_error / (pt.cmi * LN2) if pt.std_error > 0 else 0.0
            for pt in usable
        ]
    )
    if np.any(sig > 0):
        sig[sig == 0] = sig[sig > 0].min()
        w = 1.0 / sig**2
    else:
        w = np.ones_like(x)
    sw = w.sum()
    sx = (w * x).sum()
    sy = (w * y).sum()
    sxx = (w * x * x).sum()
    sxy = (w * x * y).sum()
    delta = sw * sxx - sx * sx
    if delta <= 0:
        raise FitError("degenerate abscissas")
    slope = (sw * sxy - sx * sy) / delta
    intercept = (sxx * sy - sx * sxy) / delta
    slope_var = sw / delta
    if slope >= 0:
        raise FitError(f"CMI does not decay with distance (slope {slope:.3g} >= 0)")
    resid = y - (intercept + slope * x)
    ybar = sy / sw
    ss_res = float((w * resid**2).sum())
    ss_tot = float((w * (y - ybar) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    xi = -1.0 / (slope * LN2)
    xi_err = math.sqrt(slope_var) / (slope**2 * LN2)
    return MarkovFit(
        xi=xi,
        xi_stderr=xi_err,
        slope_log2=slope,
        slope_stderr=math.sqrt(slope_var),
        r_squared=r2,
        window=(int(x.min()), int(x.max())),
        n_used=len(usable),
        points=list(points),
    )


# -- sweeps -------------------------------------------------------------------


@dataclass
class PeakEstimate:
    p_peak: float
    xi_peak: float
    interior: bool


@dataclass
class SweepCell:
    L: int
    T: int
    p: float
    points: List[CmiPoint]
    fit: Optional[MarkovFit]
    fit_error: Optional[str]


@dataclass
class SweepResult:
    cells: List[SweepCell]
    peaks: Dict[int, PeakEstimate]

    def xi_table(self) -> Dict[Tuple[int, float], Optional[float]]:
        return {
            (c.L, c.p): (c.fit.xi if c.fit else None) for c in self.cells
        }


def interpolate_peak(ps: Sequence[float], xis: Sequence[float]) -> PeakEstimate:
    """Quadratic interpolation around the grid maximum of xi(p)."""
    ps = list(ps)
    xis = list(xis)
    i = int(np.argmax(xis))
    if i == 0 or i == len(ps) - 1:
        return PeakEstimate(ps[i], xis[i], interior=False)
    h = ps[i + 1] - ps[i]
    denom = xis[i - 1] - 2 * xis[i] + xis[i + 1]
    if denom >= 0:
        return PeakEstimate(ps[i], xis[i], interior=True)
    offset = 0.5 * (xis[i - 1] - xis[i + 1]) / denom
    p_peak = ps[i] + offset * h
    xi_peak = xis[i] - 0.25 * (xis[i - 1] - xis[i + 1]) * offset
    return PeakEstimate(float(p_peak), float(xi_peak), interior=True)


def make_code(family: str, L: int):
    if family == "repetition":
        return repetition_code(L)
    if family == "toric":
        return toric_code(L)
    raise ValueError(f"unknown code family {family!r}")


def _sweep_cell(args) -> SweepCell:
    (family, L, T, p, p_z, q_mode, ladder, n, seed, wA, wC, mode, cap, method,
     anchor_stride, correction) = args
    code = make_code(family, L)
    q = p if q_mode == "p" else 0.0
    noise = NoiseModel(p_x=p, p_z=p_z, q=q)
    model = build_detector_model(code, T, noise)
    if p == 0 or model.n_mechanisms == 0:
        return SweepCell(L=L, T=T, p=p, points=[], fit=None, fit_error="all CMI at zero")
    if method == "exact":
        points = []
        for wB in ladder:
            tri = build_tripartition(model, wA=wA, wB=wB, wC=wC, mode=mode, cap=cap)
            points.append(cmi(model, tri, method="exact", exact_cap=10**9))
    elif method == "sampled":
        stream = f"cmi/L{L}/T{T}/p{p:.6g}"
        points = averaged_cmi_ladder(
            model, ladder, n, seed, wA=wA, wC=wC, mode=mode, cap=cap, stream=stream,
            anchor_stride=anchor_stride, correction=correction,
        )
    else:
        raise ValueError(f"unknown sweep method {method!r}")
    fit = None
    err = None
    if all(pt.cmi <= 0 for pt in points):
        err = "all CMI at zero"
    else:
        try:
            fit = markov_length(points)
        except FitError as exc:
            err = str(exc)
    return SweepCell(L=L, T=T, p=p, points=points, fit=fit, fit_error=err)


def sweep(
    family: str,
    sizes: Sequence[Tuple[int, int]],
    p_grid: Sequence[float],
    ladder: Sequence[int] = (1, 2, 3),
    n: int = 10**6,
    seed: int = 0,
    wA: int = 2,
    wC: int = 2,
    mode: str = "strip",
    p_z: float = 0.0,
    q_mode: str = "p",
    cap: int = 24,
    jobs: int = 1,
    method: str = "sampled",
    anchor_stride: Optional[int] = None,
    correction: bool = True,
) -> SweepResult:
    """Markov-length sweep over sizes and error rates.

    Each grid cell fits xi from a w_B ladder of tripartitions (sampled cells
    average over spatial anchor translates); fit failures are recorded as
    gaps. Per-cell RNG streams are derived from the cell coordinates, so
    results are independent of execution order.
    """
    tasks = [
        (family, L, T, p, p_z, q_mode, tuple(ladder), n, seed, wA, wC, mode, cap,
         method, anchor_stride, correction)
        for (L, T) in sizes
        for p in p_grid
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_sweep_cell, tasks))
    else:
        cells = [_sweep_cell(t) for t in tasks]
    peaks: Dict[int, PeakEstimate] = {}
    for L, _ in sizes:
        per_l = [(c.p, c.fit.xi) for c in cells if c.L == L and c.fit is not None]
        if len(per_l) >= 1:
            ps, xis = zip(*sorted(per_l))
            peaks[L] = interpolate_peak(ps, xis)
    return SweepResult(cells=cells, peaks=peaks)
