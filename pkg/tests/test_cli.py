import csv
import json

import pytest

from swiftkv.cli import main


def _read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_verify_exp_passes(tmp_path, capsys):
    out = tmp_path / "exp.json"
    assert main(["verify", "exp", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["passed"]
    assert any("exp2_frac" in r["check"] for r in report["checks"])


def test_verify_fxp_stdout(capsys):
    assert main(["verify", "fxp"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["suite"] == "fxp" and report["passed"]


def test_verify_unknown_suite_rejected():
    with pytest.raises(SystemExit) as e:
        main(["verify", "nope"])
    assert e.value.code == 2


def test_sweep_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--out", str(out)]) == 0
    rows = _read_csv(out)
    assert {"method", "n", "block_size", "cycles", "latency_us",
            "speedup_vs_native"} <= set(rows[0])
    methods = {r["method"] for r in rows}
    assert methods == {"swiftkv", "streaming", "flash", "native"}
    # flash appears once per block size per N
    flash_512 = [r for r in rows if r["method"] == "flash" and r["n"] == "512"]
    assert sorted(r["block_size"] for r in flash_512) == ["16", "32", "8"]
    summary = _read_csv(tmp_path / "sweep_summary.csv")
    by_method = {r["method"]: r for r in summary}
    assert float(by_method["swiftkv"]["speedup_fpga_measured"]) == 7.16
    assert float(by_method["swiftkv"]["speedup_model"]) > 1.0


def test_sweep_json_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert main(["sweep", "--format", "json", "--n-range", "64,512",
                     "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sweep_rejects_unknown_method():
    assert main(["sweep", "--methods", "swiftkv,warp"]) == 2


def test_sweep_custom_config(tmp_path):
    cfg = tmp_path / "hw.json"
    cfg.write_text(json.dumps({"freq_hz": 450e6}))
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", str(cfg), "--n-range", "512",
                 "--methods", "swiftkv", "--out", str(out)]) == 0
    row = _read_csv(out)[0]
    assert float(row["latency_us"]) == pytest.approx(2192 / 450e6 * 1e6, rel=1e-3)


def test_sweep_plot(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--n-range", "64,512", "--plot",
                 "--out", str(out)]) == 0
    png = tmp_path / "sweep.png"
    assert png.is_file() and png.read_bytes()[:4] == b"\x89PNG"


def test_decode_outputs_and_trace(tmp_path, toy_bundle):
    out = tmp_path / "decode.jsonl"
    trace = tmp_path / "trace.jsonl"
    assert main(["decode", "--bundle", str(toy_bundle), "--n-tokens", "3",
                 "--out", str(out), "--trace", str(trace),
                 "--compare-ref"]) == 0
    lines = [json.loads(line) for line in out.read_text().splitlines()]
    assert [r["t"] for r in lines] == [0, 1, 2]
    assert all(len(r["output_raw"]) == 64 for r in lines)
    assert all(r["cosine_ref"] > 0.99 for r in lines)
    assert all(r["argmax_match"] for r in lines)
    trace_rows = [json.loads(line) for line in trace.read_text().splitlines()]
    assert trace_rows and {"t", "s_raw", "branch"} <= set(trace_rows[0])


def test_decode_deterministic(tmp_path, toy_bundle):
    outs = []
    for name in ("a.jsonl", "b.jsonl"):
        p = tmp_path / name
        assert main(["decode", "--bundle", str(toy_bundle), "--n-tokens", "2",
                     "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_decode_missing_bundle(tmp_path):
    assert main(["decode", "--bundle", str(tmp_path / "nope")]) == 2


def test_report_latency(tmp_path):
    out = tmp_path / "report.json"
    assert main(["report", "--kind", "latency_breakdown", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["kind"] == "latency_breakdown"
    assert 0.02 <= rep["attention_share"] <= 0.08
    assert rep["attention_share_fpga_measured"] == 0.0319


def test_report_gops(tmp_path):
    out = tmp_path / "gops.json"
    assert main(["report", "--kind", "gops", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["gemv_gops_model"] == pytest.approx(1843.2)
    assert rep["gemv_gops_fpga_measured"] == 1836.0


def test_report_unknown_geometry():
    assert main(["report", "--geometry", "gpt-99"]) == 2


def test_report_plot(tmp_path):
    out = tmp_path / "report.json"
    assert main(["report", "--plot", "--out", str(out)]) == 0
    assert (tmp_path / "report.png").is_file()


def test_dump_lut(tmp_path):
    out = tmp_path / "lut.csv"
    assert main(["dump-lut", "--out", str(out)]) == 0
    rows = _read_csv(out)
    assert len(rows) == 32
    assert rows[0]["raw_entry"] == "131072"


def test_dump_rope(tmp_path):
    out = tmp_path / "rope.csv"
    assert main(["dump-rope", "--d", "8", "--out", str(out)]) == 0
    assert len(_read_csv(out)) == 4


def test_make_toy_and_decode(tmp_path, capsys):
    target = tmp_path / "toy"
    assert main(["make-toy", "--out", str(target), "--seed", "3"]) == 0
    assert (target / "config.json").is_file()
    assert main(["decode", "--bundle", str(target), "--n-tokens", "1"]) == 0
