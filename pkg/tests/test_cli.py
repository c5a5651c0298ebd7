import json
import os

import numpy as np

from stmarkov.cli import export_interchange, main, read_interchange
from stmarkov.markov import build_tripartition, cmi_from_batch
from stmarkov.sampler import sample_batch
from stmarkov.spacetime import NoiseModel, build_detector_model
from stmarkov.codes import repetition_code


def run_cli(args):
    return main(args)


def test_run_writes_json_and_csv(tmp_path):
    out = str(tmp_path / "run.json")
    csv_path = str(tmp_path / "run.csv")
    code = run_cli(
        [
            "run", "--code", "repetition", "--L", "8", "--rounds", "8",
            "--p", "0.09", "--q", "0.09", "--wA", "2", "--wB-max", "2",
            "--samples", "30000", "--seed", "42", "--out", out, "--csv", csv_path,
        ]
    )
    assert code == 0
    payload = json.loads(open(out).read())
    assert payload["config"]["seed"] == 42
    assert "config_hash" in payload and "code_hash" in payload
    assert len(payload["points"]) == 2  # ladder wB = 1..wB_max
    header = open(csv_path).readline().strip()
    assert header == "code,L,T,p,q,wA,wB,dist,cmi_bits,cmi_stderr"


def test_run_byte_identical(tmp_path):
    out = str(tmp_path / "a.json")
    args = [
        "run", "--code", "repetition", "--L", "8", "--rounds", "8",
        "--p", "0.11", "--wB-max", "1", "--samples", "20000", "--seed", "7",
        "--out", out,
    ]
    assert run_cli(args) == 0
    first = open(out, "rb").read()
    assert run_cli(args) == 0
    assert open(out, "rb").read() == first


def test_bad_probability_exit_code():
    assert run_cli(["run", "--p", "0.7", "--L", "8"]) == 2


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps({"L": 8, "rounds": 8, "p": 0.09, "samples": 5000, "wB_max": 1})
    )
    out = str(tmp_path / "o.json")
    assert run_cli(["run", "--config", str(cfg), "--p", "0.11", "--out", out]) == 0
    payload = json.loads(open(out).read())
    assert payload["config"]["p"] == 0.11
    assert payload["config"]["L"] == 8


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run_cli(["run", "--config", str(cfg)]) == 2


def test_sweep_shape_and_resume(tmp_path):
    out = str(tmp_path / "sweep.json")
    args = [
        "sweep", "--code", "repetition", "--sizes", "8x8",
        "--p-grid", "0.07,0.11", "--wB-max", "1", "--samples", "20000",
        "--seed", "3", "--out", out,
    ]
    assert run_cli(args) == 0
    payload = json.loads(open(out).read())
    assert len(payload["cells"]) == 2
    assert "peaks" in payload
    cells_file = out + ".cells.jsonl"
    lines = open(cells_file).read().splitlines()
    assert len(lines) == 2
    # Drop one cell from the progress file; --resume recomputes only that one.
    open(cells_file, "w").write(lines[0] + "\n")
    assert run_cli(args + ["--resume"]) == 0
    payload2 = json.loads(open(out).read())
    assert payload2["cells"] == payload["cells"]


def test_verify_passes_and_fault_hook_fails():
    assert run_cli(["verify"]) == 0
    assert run_cli(["verify", "--inject-fault"]) == 1


def make_band_batch(tmp_path, n=20000):
    model = build_detector_model(repetition_code(8), 8, NoiseModel.phenomenological(0.1))
    extent = 2 + 1 + 2  # wA + wB_max + wC with wB_max = 1
    t0 = max(1, (model.rounds + 1 - extent) // 2)
    band = sorted(
        i for i, d in enumerate(model.detectors) if t0 <= d.t <= t0 + extent - 1
    )
    batch = sample_batch(model, band, n, seed=5)
    path = str(tmp_path / "samples.txt")
    export_interchange(batch, model, path)
    return model, batch, band, path


def test_ingest_roundtrip_matches_in_process(tmp_path):
    model, batch, band, path = make_band_batch(tmp_path)
    out = str(tmp_path / "ingest.json")
    assert run_cli(["ingest", path, "--wB-max", "1", "--samples", "20000",
                    "--L", "8", "--rounds", "8", "--out", out]) == 0
    payload = json.loads(open(out).read())
    # In-process analysis over the same batch and geometry.
    pos = {d: j for j, d in enumerate(band)}
    for rec in payload["points"]:
        tri = build_tripartition(
            model, wA=2, wB=rec["wB"], wC=2, mode="strip",
        )
        point = cmi_from_batch(batch, tri)
        assert rec["cmi_bits"] == point.cmi
        assert rec["cmi_stderr"] == point.std_error


def test_ingest_rejects_truncated_row(tmp_path):
    _, _, _, path = make_band_batch(tmp_path, n=50)
    lines = open(path).read().splitlines()
    lines[3] = lines[3][:-1]  # truncate a data row
    bad = str(tmp_path / "bad.txt")
    open(bad, "w").write("\n".join(lines) + "\n")
    assert run_cli(["ingest", bad, "--L", "8", "--rounds", "8"]) == 2


def test_ingest_rejects_unknown_scheme(tmp_path):
    _, _, _, path = make_band_batch(tmp_path, n=10)
    lines = open(path).read().splitlines()
    header = json.loads(lines[0])
    for rec in header["detectors"]:
        del rec["round"]
        rec["when"] = 0
    lines[0] = json.dumps(header)
    bad = str(tmp_path / "bad2.txt")
    open(bad, "w").write("\n".join(lines) + "\n")
    assert run_cli(["ingest", bad, "--L", "8", "--rounds", "8"]) == 2


def test_interchange_read_back(tmp_path):
    model, batch, band, path = make_band_batch(tmp_path, n=300)
    header, again = read_interchange(path)
    assert header["n_rows"] == 300
    for j in range(len(band)):
        assert np.array_equal(again.row_bits(j), batch.row_bits(j))


def test_sweep_decoder_csv_and_peak_flag(tmp_path):
    out = str(tmp_path / "s.json")
    csv_path = str(tmp_path / "s.csv")
    code = run_cli(
        [
            "sweep", "--code", "repetition", "--sizes", "8x8,12x12",
            "--p-grid", "0.06,0.10", "--wB-max", "1", "--samples", "20000",
            "--seed", "4", "--out", out, "--csv", csv_path, "--decoder-shots", "400",
        ]
    )
    assert code == 0
    payload = json.loads(open(out).read())
    assert "decoder_crossing" in payload
    header = open(out + ".decoder.csv").readline().strip()
    assert header == "L,T,p,q,shots,logical_errors,rate,ci_low,ci_high"
    # A two-point grid cannot host an interior maximum.
    for key, peak in payload["peaks"].items():
        assert peak.get("interior") in (False, None) or "note" in peak
        if peak.get("interior") is False:
            assert peak["note"] == "no interior maximum"
    assert open(csv_path).readline().startswith("code,L,T,p,q")


def test_ingest_native_batch_roundtrip(tmp_path):
    model = build_detector_model(repetition_code(8), 8, NoiseModel.phenomenological(0.1))
    extent = 2 + 1 + 2
    t0 = max(1, (model.rounds + 1 - extent) // 2)
    band = sorted(i for i, d in enumerate(model.detectors) if t0 <= d.t <= t0 + extent - 1)
    batch = sample_batch(model, band, 20000, seed=5)
    path = str(tmp_path / "batch.bin")
    batch.save(path)
    out = str(tmp_path / "native.json")
    assert run_cli(["ingest", path, "--code", "repetition", "--L", "8", "--rounds", "8",
                    "--p", "0.1", "--wB-max", "1", "--out", out]) == 0
    payload = json.loads(open(out).read())
    tri = build_tripartition(model, wA=2, wB=1, wC=2, mode="strip")
    point = cmi_from_batch(batch, tri)
    got = [rec for rec in payload["points"] if rec["wB"] == 1][0]
    assert got["cmi_bits"] == point.cmi


def test_ingest_native_batch_wrong_model(tmp_path):
    model = build_detector_model(repetition_code(8), 8, NoiseModel.phenomenological(0.1))
    batch = sample_batch(model, [0, 1, 2], 100, seed=5)
    path = str(tmp_path / "batch.bin")
    batch.save(path)
    assert run_cli(["ingest", path, "--code", "repetition", "--L", "8", "--rounds", "8",
                    "--p", "0.2"]) == 2


def test_sweep_jobs_numerically_deterministic(tmp_path):
    a = str(tmp_path / "a.json")
    b = str(tmp_path / "b.json")
    args = ["sweep", "--code", "repetition", "--sizes", "8x8",
            "--p-grid", "0.07,0.11", "--wB-max", "1", "--samples", "20000",
            "--seed", "3"]
    assert run_cli(args + ["--out", a]) == 0
    assert run_cli(args + ["--out", b, "--jobs", "2"]) == 0
    pa = json.loads(open(a).read())
    pb = json.loads(open(b).read())
    assert pa["cells"] == pb["cells"]
