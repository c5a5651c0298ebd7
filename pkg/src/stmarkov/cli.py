"""Command-line front end: runs, sweeps, verification, and ingestion.

Configuration comes from flags or a JSON config file (flags override the
file). Every output embeds the config, its hash, the code hash, the root
seed, and the tool version; all randomness is derived from the root seed
through named streams, so reruns with the same config are byte-identical.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .codes import repetition_code, toric_code
from .decoder import logical_error_rate, threshold_estimate, NoCrossingError
from .entropy import entropy_decomposition_check, full_syndrome_region
from .foliation import detector_cells, foliate, lbl_stabilizers
from .markov import (
    FitError,
    MarkovFit,
    _sweep_cell,
    build_tripartition,
    cmi,
    cmi_from_batch,
    cmi_rank_half,
    interpolate_peak,
    make_code,
    markov_length,
)
from .sampler import SampleBatch, sample_batch
from .spacetime import (
    DetectorModel,
    NoiseModel,
    Tripartition,
    build_detector_model,
    detectors_from_errors,
)
from .tableau import evaluate_detectors, init_graph_state, measure_x_all

INTERCHANGE_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    code: str = "repetition"
    L: int = 16
    rounds: int = 16
    p: float = 0.1
    q: Optional[float] = None  # defaults to p
    p_z: float = 0.0
    wA: int = 2
    wB_max: int = 5
    wC: int = 2
    mode: str = "strip"
    samples: int = 1_000_000
    seed: int = 0
    estimator: str = "miller_madow"
    method: str = "sampled"
    jobs: int = 1
    out: Optional[str] = None
    csv: Optional[str] = None

    def validate(self) -> None:
        for name in ("p", "p_z"):
            v = getattr(self, name)
            if not (0.0 <= v <= 0.5):
                raise ConfigError(f"{name}={v}: probability out of [0, 0.5]")
        if self.q is not None and not (0.0 <= self.q <= 0.5):
            raise ConfigError(f"q={self.q}: probability out of [0, 0.5]")
        if self.code not in ("repetition", "toric"):
            raise ConfigError(f"code={self.code!r}: unknown family")
        if self.L < 3 and self.code == "repetition":
            raise ConfigError("L < 3 for repetition code")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.wA < 1 or self.wC < 1 or self.wB_max < 0:
            raise ConfigError("tripartition widths must be positive (wB_max >= 0)")
        if self.method not in ("sampled", "exact"):
            raise ConfigError(f"method={self.method!r} not in sampled|exact")
        if self.estimator not in ("miller_madow", "none"):
            raise ConfigError(f"estimator={self.estimator!r} not in miller_madow|none")

    def noise(self) -> NoiseModel:
        q = self.p if self.q is None else self.q
        return NoiseModel(p_x=self.p, p_z=self.p_z, q=q)

    def as_dict(self) -> Dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        text = json.dumps(self.as_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    base: Dict = {}
    if getattr(args, "config", None):
        with open(args.config) as f:
            text = f.read()
        try:
            base = json.loads(text)
        except json.JSONDecodeError:
            # key=value lines
            base = {}
            for line in text.splitlines():
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"config line not key=value: {line!r}")
                k, v = line.split("=", 1)
                base[k.strip()] = json.loads(v.strip())
    cfg = ExperimentConfig()
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for k, v in base.items():
        if k not in fields:
            raise ConfigError(f"unknown config key {k!r}")
        setattr(cfg, k, v)
    for f in fields:
        v = getattr(args, f, None)
        if v is not None:
            setattr(cfg, f, v)
    cfg.validate()
    return cfg


def _emit_json(path: Optional[str], payload: Dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=1)
    if path:
        with open(path, "w") as f:
            f.write(text + "\n")
    else:
        print(text)


def _fit_record(fit: Optional[MarkovFit], error: Optional[str]) -> Dict:
    if fit is None:
        return {"error": error or "fit failed"}
    return {
        "xi": fit.xi,
        "xi_stderr": fit.xi_stderr,
        "slope_log2": fit.slope_log2,
        "slope_stderr": fit.slope_stderr,
        "r_squared": fit.r_squared,
        "window": list(fit.window),
        "n_used": fit.n_used,
    }


def _point_records(cfg: ExperimentConfig, points) -> List[Dict]:
    out = []
    for pt in points:
        out.append(
            {
                "wB": pt.descriptor.get("wB"),
                "dist": pt.dist,
                "cmi_bits": pt.cmi,
                "cmi_stderr": pt.std_error,
                "support_abc": pt.support_abc,
                "reliable": pt.reliable,
                "method": pt.method,
            }
        )
    return out


def _write_cmi_csv(path: str, cfg: ExperimentConfig, rows: List[Tuple]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["code", "L", "T", "p", "q", "wA", "wB", "dist", "cmi_bits", "cmi_stderr"]
        )
        for row in rows:
            writer.writerow(row)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    code = make_code(cfg.code, cfg.L)
    q = cfg.p if cfg.q is None else cfg.q
    cell = _sweep_cell(
        (
            cfg.code,
            cfg.L,
            cfg.rounds,
            cfg.p,
            cfg.p_z,
            "p" if cfg.q is None else "fixed",
            tuple(range(1, cfg.wB_max + 1)),
            cfg.samples,
            cfg.seed,
            cfg.wA,
            cfg.wC,
            cfg.mode,
            24,
            cfg.method,
            None,
            cfg.estimator == "miller_madow",
        )
        if cfg.q is None or cfg.q == cfg.p
        else None
    )
    if cell is None:
        # Arbitrary q: build directly.
        model = build_detector_model(code, cfg.rounds, cfg.noise())
        points = []
        for wB in range(1, cfg.wB_max + 1):
            tri = build_tripartition(model, wA=cfg.wA, wB=wB, wC=cfg.wC, mode=cfg.mode)
            points.append(
                cmi(model, tri, method=cfg.method, n=cfg.samples, seed=cfg.seed,
                    stream=f"cmi/wB{wB}", correction=cfg.estimator == "miller_madow")
            )
        fit, err = None, None
        try:
            fit = markov_length(points)
        except FitError as exc:
            err = str(exc)
    else:
        points, fit, err = cell.points, cell.fit, cell.fit_error
    payload = {
        "version": __version__,
        "config": cfg.as_dict(),
        "config_hash": cfg.config_hash(),
        "code_hash": hashlib.sha256(code.to_json().encode()).hexdigest()[:16],
        "seed": cfg.seed,
        "fit": _fit_record(fit, err),
        "points": _point_records(cfg, points),
    }
    _emit_json(cfg.out, payload)
    if cfg.csv:
        rows = [
            (cfg.code, cfg.L, cfg.rounds, cfg.p, q, cfg.wA,
             pt.descriptor.get("wB"), pt.dist, repr(pt.cmi), repr(pt.std_error))
            for pt in points
        ]
        _write_cmi_csv(cfg.csv, cfg, rows)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    sizes = _parse_sizes(args.sizes) if args.sizes else [(cfg.L, cfg.rounds)]
    p_grid = (
        [float(x) for x in args.p_grid.split(",")]
        if args.p_grid
        else [0.05, 0.07, 0.09, 0.11, 0.13, 0.15, 0.17]
    )
    for p in p_grid:
        if not (0.0 <= p <= 0.5):
            raise ConfigError(f"p={p}: probability out of [0, 0.5]")
    ladder = tuple(range(1, cfg.wB_max + 1))
    out = cfg.out or "sweep.json"
    progress_path = out + ".cells.jsonl"
    done: Dict[Tuple[int, float], Dict] = {}
    if args.resume and os.path.exists(progress_path):
        with open(progress_path) as f:
            for line in f:
                rec = json.loads(line)
                done[(rec["L"], rec["p"])] = rec

    grid = [(L, T, p) for (L, T) in sizes for p in p_grid]
    pending = [
        (cfg.code, L, T, p, cfg.p_z, "p", ladder, cfg.samples, cfg.seed,
         cfg.wA, cfg.wC, cfg.mode, 24, cfg.method, None,
         cfg.estimator == "miller_madow")
        for (L, T, p) in grid
        if (L, p) not in done and p != 0.0
    ]
    if cfg.jobs > 1 and pending:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            computed = list(pool.map(_sweep_cell, pending))
    else:
        computed = [_sweep_cell(t) for t in pending]
    fresh = {(c.L, c.p): c for c in computed}
    cells = []
    with open(progress_path, "a" if args.resume else "w") as progress:
        for (L, T, p) in grid:
            key = (L, p)
            if key in done:
                cells.append(done[key])
                continue
            if p == 0.0:
                rec = {"L": L, "T": T, "p": p, "points": [],
                       "fit": {"error": "all CMI at zero"}}
            else:
                cell = fresh[key]
                rec = {
                    "L": L,
                    "T": T,
                    "p": p,
                    "points": _point_records(cfg, cell.points),
                    "fit": _fit_record(cell.fit, cell.fit_error),
                }
            progress.write(json.dumps(rec, sort_keys=True) + "\n")
            progress.flush()
            cells.append(rec)

    peaks = {}
    for (L, _) in sizes:
        series = [
            (c["p"], c["fit"]["xi"])
            for c in cells
            if c["L"] == L and "xi" in c["fit"]
        ]
        if len(series) >= 2:
            ps, xis = zip(*sorted(series))
            peak = interpolate_peak(ps, xis)
            peaks[str(L)] = {
                "p_peak": peak.p_peak,
                "xi_peak": peak.xi_peak,
                "interior": peak.interior,
            }
            if not peak.interior:
                peaks[str(L)]["note"] = "no interior maximum"
        else:
            peaks[str(L)] = {"note": "no interior maximum", "fits": len(series)}

    payload = {
        "version": __version__,
        "config": cfg.as_dict(),
        "config_hash": cfg.config_hash(),
        "code_hashes": {
            str(L): hashlib.sha256(make_code(cfg.code, L).to_json().encode()).hexdigest()[:16]
            for (L, _) in sizes
        },
        "seed": cfg.seed,
        "cells": cells,
        "peaks": peaks,
    }

    decoder_csv = None
    if args.decoder_shots:
        curves: Dict[int, List[Tuple[float, float]]] = {}
        decoder_rows = []
        for (L, T) in sizes:
            pts = []
            for p in p_grid:
                model = build_detector_model(
                    make_code(cfg.code, L), T, NoiseModel(p_x=p, p_z=cfg.p_z, q=p)
                )
                rp = logical_error_rate(model, args.decoder_shots, cfg.seed)
                pts.append((p, rp.rate))
                decoder_rows.append(
                    (L, T, p, p, rp.shots, rp.logical_errors,
                     repr(rp.rate), repr(rp.ci_low), repr(rp.ci_high))
                )
            curves[L] = pts
        try:
            est = threshold_estimate(curves)
            payload["decoder_crossing"] = {"p_cross": est.p_cross, "spread": est.spread}
        except NoCrossingError as exc:
            payload["decoder_crossing"] = {"error": str(exc)}
        decoder_csv = out + ".decoder.csv"
        with open(decoder_csv, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(
                ["L", "T", "p", "q", "shots", "logical_errors", "rate", "ci_low", "ci_high"]
            )
            for row in decoder_rows:
                writer.writerow(row)

    _emit_json(out, payload)
    if cfg.csv:
        rows = []
        for c in cells:
            for pt in c["points"]:
                rows.append(
                    (cfg.code, c["L"], c["T"], c["p"], c["p"], cfg.wA,
                     pt["wB"], pt["dist"], repr(pt["cmi_bits"]), repr(pt["cmi_stderr"]))
                )
        _write_cmi_csv(cfg.csv, cfg, rows)
    return 0


def _parse_sizes(text: str) -> List[Tuple[int, int]]:
    sizes = []
    for part in text.split(","):
        if "x" not in part:
            raise ConfigError(f"size {part!r} not of the form LxT")
        l, t = part.split("x")
        sizes.append((int(l), int(t)))
    return sizes


# -- verify -------------------------------------------------------------------


def _verify_correspondence(inject_fault: bool, n_random: int = 100) -> Tuple[str, str]:
    code = repetition_code(4)
    m_f = 3
    noise = NoiseModel.phenomenological(0.1)
    model = build_detector_model(code, m_f - 1, noise)
    rs = foliate(code, m_f)
    rows = [model.det_index[key] for key in rs.detector_keys]
    base = init_graph_state(rs)
    rng = np.random.default_rng(12345)

    def map_sites(mech):
        sites = rs.map_mechanism(mech)
        if inject_fault and mech.kind == "data_x":
            # Test hook: deliberately mis-map rule 1 to the integer layer.
            kind, i, tick = rs.sites[sites[0]]
            sites = [rs.site_index[(kind, i, tick + 1)]]
        return sites

    configs = []
    for k in range(model.n_mechanisms):
        e = np.zeros(model.n_mechanisms, dtype=np.uint8)
        e[k] = 1
        configs.append(e)
    for _ in range(n_random):
        configs.append((rng.random(model.n_mechanisms) < 0.25).astype(np.uint8))
    for e in configs:
        circuit_bits = detectors_from_errors(model, e)[rows]
        sites: List[int] = []
        for k in np.flatnonzero(e):
            sites.extend(map_sites(model.mechanisms[k]))
        tab = base.copy()
        tab.apply_z(sites)
        outcomes = measure_x_all(tab, rs, rng)
        bits = evaluate_detectors(outcomes, rs.cells)
        if not np.array_equal(bits, circuit_bits):
            return "FAIL", "tableau pipeline disagrees with circuit detectors"
    return "PASS", f"{len(configs)} error configurations bit-exact"


def _verify_audit() -> Tuple[str, str]:
    for code, m_f in ((repetition_code(4), 3), (toric_code(2), 2)):
        rs = foliate(code, m_f)
        gens = rs.graph_generators()
        tab = init_graph_state(rs)
        for op in detector_cells(rs) + lbl_stabilizers(rs):
            for g in gens:
                if not op.commutes(g):
                    return "FAIL", f"operator anticommutes with a generator ({code.name})"
            if tab.expectation(op) != 1:
                return "FAIL", f"operator expectation != +1 ({code.name})"
    return "PASS", "cells and linking stabilizers commute, expectation +1"


def _verify_decomposition(L: int = 3, T: int = 2) -> Tuple[str, str]:
    code = repetition_code(L)
    noise = NoiseModel.phenomenological(0.1)
    model = build_detector_model(code, T, noise)
    report = entropy_decomposition_check(code, T, noise, full_syndrome_region(model))
    if not report.deterministic_are_detector_combos:
        return "FAIL", "deterministic components are not detector combinations"
    if abs(report.residual) > 1e-10:
        return "FAIL", f"decomposition residual {report.residual:.2e}"
    return "PASS", f"residual {report.residual:.1e}"


def _verify_sampler_oracle(samples: int = 200_000) -> Tuple[str, str]:
    from .spacetime import detector_flip_probability

    model = build_detector_model(repetition_code(4), 3, NoiseModel.phenomenological(0.1))
    rng = np.random.default_rng(7)
    dets = sorted(rng.choice(model.n_detectors, size=5, replace=False).tolist())
    batch = sample_batch(model, dets, samples, seed=99)
    for j, d in enumerate(dets):
        freq = batch.row_bits(j).mean()
        expect = detector_flip_probability(model, d)
        sigma = math.sqrt(max(expect * (1 - expect), 1e-9) / samples)
        if abs(freq - expect) > 4 * sigma:
            return "FAIL", f"detector {d}: rate {freq:.4f} vs formula {expect:.4f}"
    tri = build_tripartition(model, wA=1, wB=1, wC=1, anchor=(1, 1), mode="strip",
                             bulk_margin=0)
    exact_pt = cmi(model, tri, method="exact", exact_cap=24)
    sam = cmi(model, tri, n=samples, seed=100)
    if abs(sam.cmi - exact_pt.cmi) > 3 * sam.std_error + 2e-3:
        return "FAIL", f"sampled CMI {sam.cmi:.5f} vs exact {exact_pt.cmi:.5f}"
    return "PASS", "flip rates and CMI within tolerance of oracles"


def _verify_rank(size: int = 10) -> Tuple[str, str]:
    model = build_detector_model(
        repetition_code(size), size, NoiseModel(p_x=0.5, p_z=0.0, q=0.5)
    )
    rng = np.random.default_rng(11)
    for _ in range(10):
        anchor = (int(rng.integers(0, size)), int(rng.integers(1, size - 4)))
        tri = build_tripartition(model, wA=1, wB=1, wC=1, anchor=anchor, mode="strip",
                                 cap=64)
        if cmi_rank_half(model, tri) != 0.0:
            return "FAIL", f"rank CMI nonzero at p=1/2 for anchor {anchor}"
    return "PASS", "rank-formula CMI vanishes across separating tripartitions"


def cmd_verify(args: argparse.Namespace) -> int:
    L = args.L or 3
    T = args.rounds or 2
    checks = [
        ("foliation_correspondence", lambda: _verify_correspondence(args.inject_fault)),
        ("stabilizer_audit", _verify_audit),
        ("entropy_decomposition", lambda: _verify_decomposition(L, T)),
        ("sampler_vs_oracle", _verify_sampler_oracle),
        ("rank_oracle", _verify_rank),
    ]
    failed = False
    for name, fn in checks:
        try:
            status, detail = fn()
        except Exception as exc:  # cap refusals etc. degrade to SKIPPED
            from .entropy import BruteForceCapExceeded
            from .sampler import PatternWidthExceeded

            if isinstance(exc, (BruteForceCapExceeded, PatternWidthExceeded)):
                status, detail = "SKIPPED", str(exc)
            else:
                status, detail = "FAIL", f"{type(exc).__name__}: {exc}"
        print(f"{status:7s} {name}: {detail}")
        failed = failed or status == "FAIL"
    return 1 if failed else 0


# -- ingest -------------------------------------------------------------------


def export_interchange(batch: SampleBatch, model: DetectorModel, path: str) -> None:
    """Write a batch in the detector-sample interchange format.

    One JSON header line, then one hex row per sample (little-endian bit
    order over the header's detector list).
    """
    header = {
        "version": INTERCHANGE_VERSION,
        "detectors": [
            {
                "sector": model.detectors[d].sector,
                "check": model.detectors[d].check,
                "round": model.detectors[d].t,
                "coords": list(model.detectors[d].coords),
            }
            for d in batch.region
        ],
        "n_rows": batch.n_samples,
        "space_shape": list(model.code.space_shape),
        "rounds": model.rounds,
        "seed": batch.seed,
        "stream": batch.stream,
        "model_hash": batch.model_hash,
    }
    width = batch.region_width
    digits = (width + 3) // 4
    bit_matrix = np.stack([batch.row_bits(j) for j in range(width)])  # width x n
    with open(path, "w") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for i in range(batch.n_samples):
            value = 0
            for j in range(width):
                if bit_matrix[j, i]:
                    value |= 1 << j
            f.write(format(value, f"0{digits}x") + "\n")


class IngestedRecords:
    """Detector layout + samples reconstructed from an interchange file.

    Quacks like enough of a DetectorModel for tripartition geometry; no
    mechanism information is available, so incidence-based checks are
    skipped.
    """

    def __init__(self, header: Dict, rows: np.ndarray):
        from .spacetime import Detector

        schemes = {"sector", "check", "round", "coords"}
        self.detectors = []
        for rec in header["detectors"]:
            if not schemes.issubset(rec):
                raise ConfigError(
                    f"unknown coordinate scheme {sorted(rec)}; expected fields {sorted(schemes)}"
                )
            self.detectors.append(
                Detector(rec["sector"], rec["check"], rec["round"], tuple(rec["coords"]))
            )
        self.space_shape = tuple(header["space_shape"])
        self.rounds = header["rounds"]
        self.mechanisms: List = []
        code = repetition_code(max(3, self.space_shape[0]))
        self.code = dataclasses.replace(code, space_shape=self.space_shape)
        self.rows = rows

    def detector_distance(self, i: int, j: int) -> int:
        a, b = self.detectors[i], self.detectors[j]
        best = abs(a.coords[-1] - b.coords[-1])
        for dim, size in enumerate(self.space_shape):
            d = abs(a.coords[dim] - b.coords[dim])
            best = max(best, min(d, size - d))
        return best


def read_interchange(path: str) -> Tuple[Dict, SampleBatch]:
    with open(path) as f:
        header = json.loads(f.readline())
        if header.get("version") != INTERCHANGE_VERSION:
            raise ConfigError(f"unsupported interchange version {header.get('version')}")
        width = len(header["detectors"])
        n = header["n_rows"]
        digits = (width + 3) // 4
        rows = np.zeros((width, (n + 7) // 8), dtype=np.uint8)
        for i in range(n):
            line = f.readline().strip()
            if len(line) != digits:
                raise ConfigError(f"row {i + 1}: expected {digits} hex digits, got {line!r}")
            value = int(line, 16)
            for j in range(width):
                if (value >> j) & 1:
                    rows[j, i // 8] |= 1 << (i % 8)
    n_chunks = min(32, n)
    bounds = [0]
    for k in range(1, n_chunks):
        bounds.append(min(max(8 * round(k * n / (8 * n_chunks)), bounds[-1]), n))
    bounds.append(n)
    batch = SampleBatch(
        region=tuple(range(width)),
        n_samples=n,
        rows=rows,
        chunk_bounds=tuple(bounds),
        seed=header.get("seed", 0),
        stream=header.get("stream", "ingest"),
        model_hash=header.get("model_hash", ""),
    )
    return header, batch


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    if os.path.exists(args.path + ".json"):
        # Sampler-native batch (flat binary + sidecar): rebuild the model
        # from the config and check it matches the batch's provenance.
        batch = SampleBatch.load(args.path)
        model = build_detector_model(make_code(cfg.code, cfg.L), cfg.rounds, cfg.noise())
        if batch.model_hash and batch.model_hash != model.model_hash():
            raise ConfigError(
                f"batch was sampled from model {batch.model_hash}, config gives "
                f"{model.model_hash()}"
            )
        header = {
            "version": INTERCHANGE_VERSION,
            "detectors": [
                {
                    "sector": model.detectors[d].sector,
                    "check": model.detectors[d].check,
                    "round": model.detectors[d].t,
                    "coords": list(model.detectors[d].coords),
                }
                for d in batch.region
            ],
            "n_rows": batch.n_samples,
            "space_shape": list(model.code.space_shape),
            "rounds": model.rounds,
            "model_hash": batch.model_hash,
        }
        batch = dataclasses.replace(batch, region=tuple(range(batch.region_width)))
    else:
        header, batch = read_interchange(args.path)
    records = IngestedRecords(header, batch.rows)
    lattice = {d.coords: i for i, d in enumerate(records.detectors) if d.sector == "z"}
    points = []
    for wB in range(1, cfg.wB_max + 1):
        try:
            tri = _ingest_tripartition(records, lattice, cfg, wB)
        except ValueError as exc:
            print(f"skipping wB={wB}: {exc}", file=sys.stderr)
            continue
        points.append(cmi_from_batch(batch, tri))
    fit, err = None, None
    try:
        fit = markov_length(points)
    except FitError as exc:
        err = str(exc)
    payload = {
        "version": __version__,
        "config": cfg.as_dict(),
        "config_hash": cfg.config_hash(),
        "source": {
            "path": os.path.basename(args.path),
            "model_hash": header.get("model_hash", ""),
            "n_rows": header["n_rows"],
        },
        "seed": cfg.seed,
        "fit": _fit_record(fit, err),
        "points": _point_records(cfg, points),
    }
    _emit_json(cfg.out, payload)
    return 0


def _ingest_tripartition(records, lattice, cfg: ExperimentConfig, wB: int) -> Tripartition:
    """Strip tripartition over ingested detector coordinates."""
    space = records.space_shape
    T = records.rounds
    extent = cfg.wA + wB + cfg.wC
    t0 = max(1, (T + 1 - (cfg.wA + cfg.wB_max + cfg.wC)) // 2)
    a_sp = tuple((space[d] - cfg.wA) // 2 for d in range(len(space)))

    def block(t_start, t_width):
        cells = []
        for offs in np.ndindex(*([cfg.wA] * len(space))):
            for dt in range(t_width):
                coord = tuple((a_sp[d] + offs[d]) % space[d] for d in range(len(space)))
                coord = coord + (t_start + dt,)
                if coord not in lattice:
                    raise ValueError(f"cell {coord} missing from ingested detectors")
                cells.append(lattice[coord])
        return tuple(sorted(cells))

    a = block(t0, cfg.wA)
    b = block(t0 + cfg.wA, wB) if wB else ()
    c = block(t0 + cfg.wA + wB, cfg.wC)
    dist = min(records.detector_distance(i, j) for i in a for j in c)
    return Tripartition(a, b, c, dist, {"mode": "strip", "wA": cfg.wA, "wB": wB, "wC": cfg.wC})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stmarkov",
        description="Spacetime Markov length estimation for syndrome-extraction circuits",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="JSON or key=value config file")
        sp.add_argument("--code", choices=["repetition", "toric"])
        sp.add_argument("--L", type=int)
        sp.add_argument("--rounds", type=int)
        sp.add_argument("--p", type=float)
        sp.add_argument("--q", type=float)
        sp.add_argument("--p-z", dest="p_z", type=float)
        sp.add_argument("--wA", type=int)
        sp.add_argument("--wB-max", dest="wB_max", type=int)
        sp.add_argument("--wC", type=int)
        sp.add_argument("--mode", choices=["ring", "strip"])
        sp.add_argument("--samples", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--method", choices=["sampled", "exact"])
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--out")
        sp.add_argument("--csv")

    run_p = sub.add_parser("run", help="one (L, p) CMI ladder -> JSON/CSV")
    add_common(run_p)
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="grid over sizes and p")
    add_common(sweep_p)
    sweep_p.add_argument("--sizes", help="comma-separated LxT pairs, e.g. 16x16,24x24")
    sweep_p.add_argument("--p-grid", dest="p_grid", help="comma-separated p values")
    sweep_p.add_argument("--decoder-shots", dest="decoder_shots", type=int, default=0)
    sweep_p.add_argument("--resume", action="store_true")
    sweep_p.set_defaults(func=cmd_sweep)

    verify_p = sub.add_parser("verify", help="run the correspondence and oracle suite")
    verify_p.add_argument("--inject-fault", dest="inject_fault", action="store_true",
                          help="test hook: mis-map circuit X errors")
    verify_p.add_argument("--L", type=int, help="size for the brute-force checks")
    verify_p.add_argument("--rounds", type=int)
    verify_p.set_defaults(func=cmd_verify)

    ingest_p = sub.add_parser("ingest", help="analyze external detector samples")
    add_common(ingest_p)
    ingest_p.add_argument("path", help="interchange file (JSON header + hex rows)")
    ingest_p.set_defaults(func=cmd_ingest)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # Geometry/shape errors triggered by the configuration surface here.
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
