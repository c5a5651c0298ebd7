import numpy as np
import pytest

from oracles import enumerate_region_distribution

from stmarkov.codes import repetition_code
from stmarkov.sampler import (
    PatternWidthExceeded,
    SampleBatch,
    marginalize,
    sample_batch,
    stream_key,
    subset_patterns,
)
from stmarkov.spacetime import NoiseModel, build_detector_model


def small_model(p=0.1, q=None, L=4, T=3):
    noise = NoiseModel(p_x=p, p_z=0.0, q=p if q is None else q)
    return build_detector_model(repetition_code(L), T, noise)


def test_zero_noise_all_zero():
    model = small_model(p=0.0, q=0.25)
    region = list(range(6))
    batch = sample_batch(model, region, 500, seed=1)
    # Only readout mechanisms exist; pick a region with none incident.
    quiet_model = build_detector_model(
        repetition_code(4), 3, NoiseModel(p_x=0.0, p_z=0.0, q=0.0)
    )
    assert quiet_model.n_mechanisms == 0
    quiet = sample_batch(quiet_model, region, 500, seed=1)
    assert not np.any(quiet.patterns)
    assert batch.n_samples == 500


def test_single_detector_half_probability():
    model = build_detector_model(
        repetition_code(3), 1, NoiseModel(p_x=0.0, p_z=0.0, q=0.5)
    )
    det = model.det_index[("z", 0, 1)]  # only the round-1 readout touches it
    n = 100_000
    batch = sample_batch(model, [det], n, seed=3)
    freq = batch.patterns.astype(bool).mean()
    sigma = 0.5 / np.sqrt(n)
    assert abs(freq - 0.5) < 3 * sigma


def test_bulk_flip_rate_matches_parity_formula():
    model = small_model(p=0.1)
    det = model.det_index[("z", 1, 1)]
    n = 200_000
    batch = sample_batch(model, [det], n, seed=11)
    freq = batch.patterns.astype(bool).mean()
    expect = 0.2952  # (1 - 0.8^4) / 2, four incident mechanisms at p = 0.1
    sigma = np.sqrt(expect * (1 - expect) / n)
    assert abs(freq - expect) < 3 * sigma


def test_reproducibility_bit_identical():
    model = small_model()
    region = [model.det_index[("z", c, t)] for c in range(3) for t in (1, 2)]
    a = sample_batch(model, region, 10_001, seed=42)
    b = sample_batch(model, region, 10_001, seed=42)
    assert np.array_equal(a.patterns, b.patterns)
    c = sample_batch(model, region, 10_001, seed=43)
    assert not np.array_equal(a.patterns, c.patterns)
    d = sample_batch(model, region, 10_001, seed=42, stream="other")
    assert not np.array_equal(a.patterns, d.patterns)


def test_stream_keys_distinct():
    assert not np.array_equal(stream_key(1, "sampling"), stream_key(1, "decoder"))
    assert not np.array_equal(stream_key(1, "sampling"), stream_key(2, "sampling"))


def test_locality_restriction_matches_full_enumeration():
    """Region-incident sampling agrees with the all-mechanism exact marginal."""
    model = small_model(p=0.12, L=3, T=2)  # 12 mechanisms: enumerable in full
    region = [model.det_index[("z", 0, 0)], model.det_index[("z", 1, 1)]]
    exact_all = enumerate_region_distribution(model, region, all_mechanisms=True)
    exact_local = enumerate_region_distribution(model, region)
    for pattern in set(exact_all) | set(exact_local):
        assert exact_all.get(pattern, 0.0) == pytest.approx(
            exact_local.get(pattern, 0.0), abs=1e-12
        )
    n = 200_000
    batch = sample_batch(model, region, n, seed=5)
    counts = marginalize(batch, region)
    for pattern, pr in exact_all.items():
        freq = counts.get(pattern, 0) / n
        sigma = np.sqrt(pr * (1 - pr) / n) + 1e-9
        assert abs(freq - pr) < 4 * sigma


def test_marginalize_totals_and_subsets():
    model = small_model()
    region = [model.det_index[("z", c, 1)] for c in range(4)]
    batch = sample_batch(model, region, 5000, seed=9)
    counts = marginalize(batch, region)
    assert sum(counts.values()) == 5000
    total, chunked = marginalize(batch, region[:2], per_chunk=True)
    assert sum(total.values()) == 5000
    merged = {}
    for ch in chunked:
        for k, v in ch.items():
            merged[k] = merged.get(k, 0) + v
    assert merged == total


def test_marginalize_requires_subset_and_cap():
    model = small_model()
    region = [model.det_index[("z", c, 1)] for c in range(3)]
    batch = sample_batch(model, region, 100, seed=2)
    with pytest.raises(ValueError):
        subset_patterns(batch, [model.det_index[("z", 3, 1)]])
    with pytest.raises(PatternWidthExceeded):
        marginalize(batch, region, cap=2)


def test_two_independent_half_detectors_uniform():
    model = build_detector_model(
        repetition_code(4), 1, NoiseModel(p_x=0.0, p_z=0.0, q=0.5)
    )
    region = [model.det_index[("z", 0, 1)], model.det_index[("z", 2, 1)]]
    n = 80_000
    batch = sample_batch(model, region, n, seed=17)
    counts = marginalize(batch, region)
    sigma = np.sqrt(0.25 * 0.75 * n)
    for pattern in range(4):
        assert abs(counts.get(pattern, 0) - n / 4) < 3 * sigma


def test_empty_region_and_bad_n():
    model = small_model()
    with pytest.raises(ValueError):
        sample_batch(model, [], 10, seed=0)
    with pytest.raises(ValueError):
        sample_batch(model, [0], 0, seed=0)


def test_save_load_roundtrip(tmp_path):
    model = small_model()
    region = [model.det_index[("z", c, t)] for c in range(3) for t in (0, 1)]
    batch = sample_batch(model, region, 3333, seed=7)
    path = str(tmp_path / "batch.bin")
    batch.save(path)
    again = SampleBatch.load(path)
    assert np.array_equal(again.patterns, batch.patterns)
    assert again.region == batch.region
    assert again.model_hash == batch.model_hash
    assert again.chunk_bounds == batch.chunk_bounds


def test_packed_rows_consistent_with_patterns():
    model = small_model()
    region = [0, 5, 9]
    batch = sample_batch(model, region, 100, seed=1)
    assert batch.rows.shape == (3, 13)
    bits = batch.row_bits(1)
    assert np.array_equal(
        bits, ((batch.patterns >> np.uint64(1)) & np.uint64(1)).astype(np.uint8)
    )


def test_wide_region_sampling():
    """Regions wider than 64 bits are supported through packed rows."""
    model = build_detector_model(
        repetition_code(12), 8, NoiseModel.phenomenological(0.1)
    )
    region = list(range(model.n_detectors))
    assert len(region) > 64
    batch = sample_batch(model, region, 2000, seed=13)
    assert batch.rows.shape[0] == len(region)
    # A narrow marginal of the wide batch matches a direct narrow batch's law.
    sub = region[:3]
    freq_wide = marginalize(batch, sub)
    narrow = sample_batch(model, sub, 2000, seed=13)
    freq_narrow = marginalize(narrow, sub)
    n = 2000
    for pattern in set(freq_wide) | set(freq_narrow):
        a = freq_wide.get(pattern, 0) / n
        b = freq_narrow.get(pattern, 0) / n
        assert abs(a - b) < 4 * np.sqrt(max(a, b, 0.01) / n) + 0.02
