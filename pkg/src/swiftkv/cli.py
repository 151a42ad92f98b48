"""Command-line front end: verification suites, cycle-model sweeps, toy
decode runs, latency/throughput reports, and constant dumps.

All commands are deterministic under a fixed --seed; identical invocations
produce byte-identical CSV/JSON.  SWIFTKV_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bundle, fxp, rope, verify
from .cyclemodel import (GEOMETRIES, HwConfig, MEASURED_SPEEDUP_N512,
                         cycles_flash_block, cycles_native, cycles_streaming,
                         cycles_swiftkv, gemv_gops, token_latency_summary)
from .expo import build_lut, lut_rows

DEFAULT_N_GRID = "64,128,256,512,1024,2048,4096,8192"


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("SWIFTKV_THREADS", "1")))
    except ValueError:
        return 1


def _write_text(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: r.get(c, "") for c in columns})
    return buf.getvalue()


def cmd_verify(args) -> int:
    kwargs = {"seed": args.seed}
    if args.suite == "attention":
        if args.d:
            kwargs["d"] = args.d
        if args.n:
            kwargs["t_max"] = args.n
    rows = verify.SUITES[args.suite](**kwargs)
    report = {"suite": args.suite, "seed": args.seed, "checks": rows,
              "passed": all(r["passed"] for r in rows)}
    _write_text(json.dumps(report, indent=2) + "\n", args.out)
    return 0 if report["passed"] else 1


def _sweep_rows(methods, n_values, block_sizes, cfg: HwConfig, d_head: int):
    jobs = []
    for n in n_values:
        for m in methods:
            if m == "flash":
                for b in block_sizes:
                    jobs.append((m, n, b))
            else:
                jobs.append((m, n, 0))

    def run(job):
        m, n, b = job
        if m == "swiftkv":
            cyc = cycles_swiftkv(n, d_head, cfg)
        elif m == "native":
            cyc = cycles_native(n, d_head, cfg)
        elif m == "streaming":
            cyc = cycles_streaming(n, d_head, cfg)
        elif m == "flash":
            cyc = cycles_flash_block(n, d_head, b, cfg)
        else:
            raise ValueError(f"unknown method {m}")
        return {"method": m, "n": n, "block_size": b or "", "cycles": cyc,
                "latency_us": round(cyc / cfg.freq_hz * 1e6, 4),
                "speedup_vs_native": round(cycles_native(n, d_head, cfg) / cyc, 4)}

    with ThreadPoolExecutor(max_workers=_thread_cap()) as pool:
        rows = list(pool.map(run, jobs))
    rows.sort(key=lambda r: (r["method"], r["n"], r["block_size"] or 0))
    return rows


def _sweep_summary(cfg: HwConfig, d_head: int) -> list[dict]:
    """Model speedups at N=512 next to the measured figures reported for
    the FPGA implementation this model parameterizes (never asserted)."""
    n = 512
    native = cycles_native(n, d_head, cfg)
    model = {
        "swiftkv": native / cycles_swiftkv(n, d_head, cfg),
        "streaming": native / cycles_streaming(n, d_head, cfg),
        "flash_block_32": native / cycles_flash_block(n, d_head, 32, cfg),
    }
    return [{"method": m, "n": n, "speedup_model": round(model[m], 4),
             "speedup_fpga_measured": MEASURED_SPEEDUP_N512[m]}
            for m in sorted(model)]


def cmd_sweep(args) -> int:
    cfg = _load_hw_config(args.config)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    n_values = _parse_ints(args.n_range)
    block_sizes = _parse_ints(args.block_sizes)
    bad = set(methods) - {"swiftkv", "native", "streaming", "flash"}
    if bad:
        print(f"unknown methods: {sorted(bad)}", file=sys.stderr)
        return 2
    rows = _sweep_rows(methods, n_values, block_sizes, cfg, args.d_head)
    summary = _sweep_summary(cfg, args.d_head)
    if args.format == "json":
        _write_text(json.dumps({"rows": rows, "summary_n512": summary},
                               indent=2) + "\n", args.out)
    else:
        main_csv = _rows_to_csv(rows, ["method", "n", "block_size", "cycles",
                                       "latency_us", "speedup_vs_native"])
        summary_csv = _rows_to_csv(summary, ["method", "n", "speedup_model",
                                             "speedup_fpga_measured"])
        if args.out:
            Path(args.out).write_text(main_csv)
            Path(_sibling(args.out, "_summary")).write_text(summary_csv)
        else:
            sys.stdout.write(main_csv + "\n" + summary_csv)
    if args.plot:
        from .plots import plot_sweep
        target = _sibling(args.out, "", ".png") if args.out else "sweep.png"
        plot_sweep(rows, target)
    return 0


def cmd_decode(args) -> int:
    try:
        model = bundle.load_bundle(args.bundle)
    except bundle.BundleError as e:
        print(f"bundle error: {e}", file=sys.stderr)
        return 2
    d = model.config.d_model
    rng = np.random.default_rng(args.seed)
    x0 = rng.uniform(-1, 1, d)
    trace = [] if args.trace else None
    from .pipeline import run_decode
    outs = run_decode(model, fxp.from_real_vec(x0), args.n_tokens, trace=trace)
    refs = None
    if args.compare_ref:
        from .oracle import reference_run_decode
        ref_layers = bundle.load_reference_layers(args.bundle)
        refs = reference_run_decode(ref_layers, x0, args.n_tokens)
    lines = []
    for t, o in enumerate(outs):
        rec = {"t": t, "output_raw": [int(v) for v in o]}
        if refs is not None:
            of = o / fxp.SCALE
            rec["cosine_ref"] = round(verify._cosine(of, refs[t]), 6)
            rec["argmax_match"] = bool(np.argmax(o) == np.argmax(refs[t]))
        lines.append(json.dumps(rec))
    _write_text("".join(line + "\n" for line in lines), args.out)
    if args.trace:
        Path(args.trace).write_text(
            "".join(json.dumps(r) + "\n" for r in trace))
    return 0


def cmd_report(args) -> int:
    if args.geometry not in GEOMETRIES:
        print(f"unknown geometry {args.geometry!r}; known: "
              f"{sorted(GEOMETRIES)}", file=sys.stderr)
        return 2
    cfg = _load_hw_config(args.config)
    geom = GEOMETRIES[args.geometry]
    if args.kind == "gops":
        out = {"kind": "gops", "gemv_gops_model": gemv_gops(cfg),
               "gemv_gops_fpga_measured": 1836.0}
    else:
        out = token_latency_summary(geom, args.n, cfg)
        out["kind"] = "latency_breakdown"
        out["attention_share_fpga_measured"] = 0.0319
        if args.plot:
            from .plots import plot_latency_breakdown
            target = _sibling(args.out, "", ".png") if args.out else "breakdown.png"
            plot_latency_breakdown(out["phases"], target)
    _write_text(json.dumps(out, indent=2) + "\n", args.out)
    return 0


def cmd_dump_lut(args) -> int:
    rows = [{"index": i, "raw_entry": e, "raw_slope": s}
            for i, e, s in lut_rows(build_lut())]
    _write_text(_rows_to_csv(rows, ["index", "raw_entry", "raw_slope"]), args.out)
    return 0


def cmd_dump_rope(args) -> int:
    cache = rope.make_cache(args.d, args.base)
    rows = [{"index": i, "raw_a": a, "raw_b": b}
            for i, a, b in rope.constants_rows(cache)]
    _write_text(_rows_to_csv(rows, ["index", "raw_a", "raw_b"]), args.out)
    return 0


def cmd_make_toy(args) -> int:
    path = bundle.make_toy_bundle(args.out, seed=args.seed,
                                  n_layers=args.n_layers, d_model=args.d_model,
                                  n_heads=args.n_heads, ffn_dim=args.ffn_dim)
    print(str(path))
    return 0


def _sibling(out: str | None, suffix: str, ext: str | None = None) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + suffix + (ext or p.suffix)))


def _parse_ints(text: str) -> list[int]:
    if not text.strip():
        return []
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise SystemExit(2)


def _load_hw_config(path: str | None) -> HwConfig:
    if not path:
        return HwConfig()
    try:
        return HwConfig.from_json(path)
    except (OSError, json.JSONDecodeError, TypeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swiftkv")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run an oracle-backed property suite")
    v.add_argument("suite", choices=sorted(verify.SUITES))
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--d", type=int, default=0, help="head dim (attention suite)")
    v.add_argument("--n", type=int, default=0, help="max context (attention suite)")
    v.add_argument("--out")
    v.set_defaults(fn=cmd_verify)

    s = sub.add_parser("sweep", help="cycle-model sweep over context lengths")
    s.add_argument("--methods", default="swiftkv,streaming,flash,native")
    s.add_argument("--n-range", default=DEFAULT_N_GRID,
                   help="comma-separated context lengths")
    s.add_argument("--block-sizes", default="8,16,32")
    s.add_argument("--d-head", type=int, default=128)
    s.add_argument("--config", help="HwConfig JSON path")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--out")
    s.add_argument("--plot", action="store_true",
                   help="render a cycles-vs-N figure next to the CSV")
    s.set_defaults(fn=cmd_sweep)

    d = sub.add_parser("decode", help="run a model bundle for n tokens")
    d.add_argument("--bundle", required=True)
    d.add_argument("--n-tokens", type=int, default=16)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--trace", help="write per-token scan traces (JSON lines)")
    d.add_argument("--compare-ref", action="store_true")
    d.add_argument("--out")
    d.set_defaults(fn=cmd_decode)

    r = sub.add_parser("report", help="latency breakdown / throughput report")
    r.add_argument("--kind", choices=("latency_breakdown", "gops"),
                   default="latency_breakdown")
    r.add_argument("--geometry", default="llama2-7b")
    r.add_argument("--n", type=int, default=512)
    r.add_argument("--config", help="HwConfig JSON path")
    r.add_argument("--plot", action="store_true")
    r.add_argument("--out")
    r.set_defaults(fn=cmd_report)

    dl = sub.add_parser("dump-lut", help="exp LUT constants as CSV")
    dl.add_argument("--out")
    dl.set_defaults(fn=cmd_dump_lut)

    dr = sub.add_parser("dump-rope", help="rotation constants as CSV")
    dr.add_argument("--d", type=int, default=128)
    dr.add_argument("--base", type=float, default=10000.0)
    dr.add_argument("--out")
    dr.set_defaults(fn=cmd_dump_rope)

    mt = sub.add_parser("make-toy", help="generate a deterministic toy bundle")
    mt.add_argument("--out", required=True)
    mt.add_argument("--seed", type=int, default=0)
    mt.add_argument("--n-layers", type=int, default=2)
    mt.add_argument("--d-model", type=int, default=64)
    mt.add_argument("--n-heads", type=int, default=4)
    mt.add_argument("--ffn-dim", type=int, default=128)
    mt.set_defaults(fn=cmd_make_toy)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
