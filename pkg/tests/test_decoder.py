import numpy as np
import pytest

from stmarkov.codes import repetition_code, toric_code
from stmarkov.decoder import (
    InfeasibleSyndrome,
    NoCrossingError,
    decode,
    logical_error_rate,
    threshold_estimate,
    wilson_interval,
)
from stmarkov.spacetime import NoiseModel, build_detector_model, detectors_from_errors


def model_for(L, T, p, q=None):
    noise = NoiseModel(p_x=p, p_z=0.0, q=p if q is None else q)
    return build_detector_model(repetition_code(L), T, noise)


def test_empty_pattern():
    model = model_for(5, 4, 0.1)
    result = decode(model, np.zeros(model.n_detectors, dtype=np.uint8))
    assert result.correction == []
    assert not np.any(result.logical_flips)


def test_single_mechanisms_exhaustive():
    model = model_for(8, 8, 0.1)
    act = model.logical_action()
    for k in range(model.n_mechanisms):
        e = np.zeros(model.n_mechanisms, dtype=np.uint8)
        e[k] = 1
        dets = detectors_from_errors(model, e)
        result = decode(model, dets)
        corr = np.zeros(model.n_mechanisms, dtype=np.uint8)
        for j in result.correction:
            corr[j] ^= 1
        assert np.array_equal(detectors_from_errors(model, corr), dets)
        # The residual (correction + truth) must act trivially on the logicals.
        residual_flips = (act @ ((corr ^ e).astype(np.uint8))) % 2
        assert not np.any(residual_flips), f"mechanism {k}"


def test_weight_two_exhaustive():
    model = model_for(6, 6, 0.1)
    act = model.logical_action()
    n = model.n_mechanisms
    for k1 in range(n):
        for k2 in range(k1 + 1, n):
            e = np.zeros(n, dtype=np.uint8)
            e[k1] = 1
            e[k2] = 1
            dets = detectors_from_errors(model, e)
            result = decode(model, dets)
            corr = np.zeros(n, dtype=np.uint8)
            for j in result.correction:
                corr[j] ^= 1
            assert np.array_equal(detectors_from_errors(model, corr), dets)
            residual = (act @ ((corr ^ e).astype(np.uint8))) % 2
            assert not np.any(residual), f"pair {k1},{k2}"


def test_random_patterns_validity_and_determinism():
    model = model_for(12, 12, 0.12)
    rng = np.random.default_rng(3)
    probs = model.mechanism_probs()
    for _ in range(50):
        e = (rng.random(model.n_mechanisms) < probs).astype(np.uint8)
        dets = detectors_from_errors(model, e)
        r1 = decode(model, dets)
        r2 = decode(model, dets)
        assert r1.correction == r2.correction
        corr = np.zeros(model.n_mechanisms, dtype=np.uint8)
        for j in r1.correction:
            corr[j] ^= 1
        assert np.array_equal(detectors_from_errors(model, corr), dets)


def test_toric_perfect_measurement_decoding():
    code = toric_code(4)
    model = build_detector_model(code, 1, NoiseModel.perfect_measurement(0.08))
    rng = np.random.default_rng(9)
    probs = model.mechanism_probs()
    act = model.logical_action()
    ok = 0
    for _ in range(60):
        e = (rng.random(model.n_mechanisms) < probs).astype(np.uint8)
        dets = detectors_from_errors(model, e)
        result = decode(model, dets)
        corr = np.zeros(model.n_mechanisms, dtype=np.uint8)
        for j in result.correction:
            corr[j] ^= 1
        assert np.array_equal(detectors_from_errors(model, corr), dets)
        if not np.any((act @ ((corr ^ e).astype(np.uint8))) % 2):
            ok += 1
    assert ok > 40  # well below threshold, most shots recover


def test_infeasible_pattern_rejected():
    model = model_for(5, 4, 0.1)
    bad = np.zeros(model.n_detectors, dtype=np.uint8)
    bad[model.det_index[("z", 2, 1)]] = 1  # single fired detector: odd parity
    with pytest.raises(InfeasibleSyndrome):
        decode(model, bad)


def test_rate_zero_noise():
    model = build_detector_model(repetition_code(5), 3, NoiseModel(0.0, 0.0, 0.25))
    point = logical_error_rate(model, 500, seed=1)
    assert point.logical_errors == 0
    assert point.rate == 0.0


def test_rate_half_noise_randomizes_logical():
    model = build_detector_model(repetition_code(5), 2, NoiseModel(0.5, 0.0, 0.5))
    point = logical_error_rate(model, 2000, seed=2)
    assert point.ci_low < 0.5 < point.ci_high


def test_subthreshold_suppression():
    small = model_for(8, 8, 0.05)
    big = model_for(16, 16, 0.05)
    r_small = logical_error_rate(small, 3000, seed=5)
    r_big = logical_error_rate(big, 3000, seed=6)
    assert r_big.rate < r_small.rate


def test_rate_reproducible():
    model = model_for(8, 8, 0.09)
    a = logical_error_rate(model, 1000, seed=7)
    b = logical_error_rate(model, 1000, seed=7)
    assert a.logical_errors == b.logical_errors


def test_wilson_interval_behaviour():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and hi < 0.05
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi


def test_threshold_synthetic_crossing():
    curves = {
        8: [(p, 0.3 + 1.0 * (p - 0.10)) for p in (0.06, 0.08, 0.10, 0.12, 0.14)],
        16: [(p, 0.3 + 2.0 * (p - 0.10)) for p in (0.06, 0.08, 0.10, 0.12, 0.14)],
    }
    est = threshold_estimate(curves)
    assert est.p_cross == pytest.approx(0.10, abs=1e-9)
    assert est.spread == 0.0


def test_threshold_requires_bracketing():
    curves = {
        8: [(p, 0.1 + p) for p in (0.05, 0.10)],
        16: [(p, 0.2 + p) for p in (0.05, 0.10)],
    }
    with pytest.raises(NoCrossingError):
        threshold_estimate(curves)
