"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to
stderr as a single line.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import formats, kernels, perfmodel
from .checksum import checksum, format_checksum
from .dist import MODES, CostParams, build_halo, partition, run_mode, split_order_oracle
from .dist.trace import timeline_to_csv, write_chrome_trace
from .matrix import (
    CsrMatrix,
    generate,
    histogram,
    load_matrix,
    parse_generator,
    save_jgd,
    write_matrix_market,
)

COMMANDS = ("convert", "histogram", "footprint", "spmv-check", "model", "dist-run", "generate")
MODE_ALIASES = {"plain": "vector_plain", "naive": "vector_naive_overlap", "task": "task_mode",
                **{m: m for m in MODES}}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(sub: argparse.ArgumentParser, matrix: bool = True, matrix_required: bool = True) -> None:
    if matrix:
        src = sub.add_mutually_exclusive_group(required=matrix_required)
        src.add_argument("--input", type=Path, help="Matrix Market (.mtx) or JGD1 file")
        src.add_argument("--generate-spec", metavar="FAMILY[:ARGS]",
                         help="synthetic matrix, e.g. uniform:1,4 clustered:0.8,144,20 adversarial")
        sub.add_argument("--rows", type=int, default=1024, help="rows of a generated matrix")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--format", choices=["ellpack", "ellpack-r", "pjds", "all"], default="all")
    sub.add_argument("--warp-size", "--block-rows", dest="block_rows", type=int,
                     default=formats.DEFAULT_WARP_SIZE)
    sub.add_argument("--precision", choices=sorted(formats.VALUE_BYTES), default="DP")
    sub.add_argument("--output", type=Path)
    sub.add_argument("--json", action="store_true", help="structured JSON output")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pjds", description=__doc__.splitlines()[0])
    subs = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _common(subs.add_parser("convert", help="convert between .mtx and JGD1 (by output extension)"))
    _common(subs.add_parser("histogram", help="row length histogram (bin size 1)"))
    _common(subs.add_parser("footprint", help="storage of ELLPACK, ELLPACK-R and pJDS"))

    s = subs.add_parser("spmv-check", help="run every kernel against the CSR reference")
    _common(s)
    s.add_argument("--chunks", type=int, default=4)
    s.add_argument("--tol", type=float, default=1e-13)

    s = subs.add_parser("model", help="PCIe-aware bandwidth model and N_nzr thresholds")
    _common(s, matrix_required=False)
    s.add_argument("--ratio", type=float, help="B_gpu / B_pci")
    s.add_argument("--b-gpu", type=float, default=perfmodel.FERMI_ECC_BANDWIDTH, help="bytes/s")
    s.add_argument("--b-pci", type=float, help="bytes/s (default B_gpu/10)")
    s.add_argument("--alpha", default="1", help="RHS reuse factor in [1/N_nzr, 1] or 'reciprocal'")
    s.add_argument("--nnzr", type=float, help="average non-zeros per row (instead of a matrix)")
    s.add_argument("--split", action="store_true", help="two-pass local/nonlocal kernel")
    s.add_argument("--residency", type=float, default=1.0,
                   help="fraction of RHS/LHS that crosses PCIe per spMVM")

    s = subs.add_parser("dist-run", help="distributed spMVM on an in-process rank fabric")
    _common(s)
    s.add_argument("--ranks", type=int, default=4)
    s.add_argument("--mode", choices=sorted(MODE_ALIASES) + ["all"], default="all")
    s.add_argument("--cost", default="default",
                   help="'default' or comma separated overrides, e.g. link_latency=5e-6")
    s.add_argument("--balance", choices=["rows", "nnz"], default="rows")
    s.add_argument("--timeline", type=Path, help="write the simulated timeline as CSV")
    s.add_argument("--trace", type=Path, help="write a Chrome trace-event JSON file")

    s = subs.add_parser("generate", help="write a synthetic matrix")
    _common(s)
    return p


def _load(args) -> CsrMatrix:
    if args.input is not None:
        return load_matrix(args.input)
    return generate(parse_generator(args.generate_spec, args.rows, args.seed))


def _emit(args, text: str, doc) -> None:
    out = json.dumps(doc, indent=2) + "\n" if args.json else text.rstrip("\n") + "\n"
    if args.output is not None:
        args.output.write_text(out)
    else:
        sys.stdout.write(out)


def _table(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells)


def _save_matrix(m: CsrMatrix, path: Path) -> None:
    if path.suffix.lower() in (".jgd", ".jgd1", ".bin"):
        save_jgd(path, m)
    else:
        write_matrix_market(path, m)


def cmd_convert(args) -> None:
    if args.output is None:
        raise UsageError("convert needs --output (.jgd for JGD1, anything else for Matrix Market)")
    m = _load(args)
    _save_matrix(m, args.output)
    doc = {"n_rows": m.n_rows, "n_cols": m.n_cols, "nnz": m.nnz, "output": str(args.output)}
    if args.json:
        sys.stdout.write(json.dumps(doc) + "\n")
    else:
        sys.stdout.write(f"wrote {m.n_rows}x{m.n_cols} nnz={m.nnz} to {args.output}\n")


def cmd_generate(args) -> None:
    if args.generate_spec is None:
        raise UsageError("generate needs --generate-spec")
    m = _load(args)
    if args.output is None:
        if args.json:
            raise UsageError("generate --json needs --output for the matrix itself")
        write_matrix_market(sys.stdout, m)
        return
    _save_matrix(m, args.output)
    if args.json:
        sys.stdout.write(json.dumps({**histogram(m).to_dict(), "output": str(args.output)}) + "\n")
    else:
        sys.stdout.write(f"wrote {m.n_rows}x{m.n_cols} nnz={m.nnz} to {args.output}\n")


def cmd_histogram(args) -> None:
    h = histogram(_load(args))
    rows = [[k, v, f"{v / h.n_rows:.6f}"] for k, v in sorted(h.bins.items())]
    text = _table(["row_length", "rows", "fraction"], rows)
    text += (f"\n# n_rows={h.n_rows} nnz={h.nnz} min={h.min_len} max={h.max_len} "
             f"mean={h.mean_len:.6g}")
    _emit(args, text, h.to_dict())


def _build(m: CsrMatrix, which: str, b: int):
    out = []
    if which in ("ellpack", "all"):
        out.append(formats.build_ellpack(m, b))
    if which in ("ellpack-r", "all"):
        out.append(formats.build_ellpack_r(m, b))
    if which in ("pjds", "all"):
        out.append(formats.build_pjds(m, b))
    return out


def cmd_footprint(args) -> None:
    m = _load(args)
    reports = [formats.footprint(f, args.precision) for f in _build(m, args.format, args.block_rows)]
    rows = [[r.format, r.stored_entries, r.bytes_values, r.bytes_indices, r.bytes_aux,
             r.bytes_total, f"{r.padding_overhead_fraction:.6g}", f"{r.data_reduction_vs_ellpack:.6g}"]
            for r in reports]
    text = _table(["format", "stored", "bytes_values", "bytes_indices", "bytes_aux", "bytes_total",
                   "padding_overhead", "data_reduction"], rows)
    text += f"\n# nnz={m.nnz} n_rows={m.n_rows} block_rows={args.block_rows} precision={args.precision}"
    _emit(args, text, {"nnz": m.nnz, "n_rows": m.n_rows, "block_rows": args.block_rows,
                       "reports": [r.to_dict() for r in reports]})


def cmd_spmv_check(args) -> int:
    m = _load(args)
    x = np.random.default_rng(args.seed + 1).uniform(-1.0, 1.0, m.n_cols)
    ref = kernels.spmv_csr(m, x)
    scale = max(float(np.abs(ref).max(initial=0.0)), np.finfo(float).tiny)
    results, ok = [], True
    for f in _build(m, args.format, args.block_rows):
        y, stats = kernels.spmv(f, x)
        par = kernels.spmv_parallel(f, x, args.chunks)
        bitwise_parallel = bool(np.array_equal(par.view(np.uint64), y.view(np.uint64)))
        if isinstance(f, formats.PjdsMatrix):
            y = formats.permute_vector(y, f.permutation, "inverse")
        err = float(np.abs(y - ref).max(initial=0.0)) / scale
        passed = err <= args.tol and bitwise_parallel
        ok &= passed
        results.append({"format": f.format_name, "rel_err_inf": err, "parallel_bitwise": bitwise_parallel,
                        "passed": passed, **stats.__dict__})
    rows = [[r["format"], f"{r['rel_err_inf']:.3e}", r["parallel_bitwise"], r["useful_fma"],
             r["padded_fma"], r["idle_lane_cycles"], "PASS" if r["passed"] else "FAIL"] for r in results]
    text = _table(["format", "rel_err_inf", "parallel_bitwise", "useful_fma", "padded_fma",
                   "idle_lane_cycles", "result"], rows)
    text += f"\n# reference checksum {format_checksum(checksum(ref))}"
    _emit(args, text, {"checksum": format_checksum(checksum(ref)), "tol": args.tol, "results": results})
    if not ok:
        raise DataError("kernel results disagree with the CSR reference")
    return 0


def _alpha(text: str):
    if text == perfmodel.RECIPROCAL:
        return text
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"--alpha must be a number or 'reciprocal', got {text!r}") from None


def cmd_model(args) -> None:
    alpha = _alpha(args.alpha)
    if args.ratio is not None:
        b_pci = args.b_gpu / args.ratio
    else:
        b_pci = args.b_pci if args.b_pci is not None else args.b_gpu / 10
    ratio = args.b_gpu / b_pci

    thresholds = {
        "ratio": ratio,
        "alpha": alpha,
        "n_nzr_upper_50pct": perfmodel.threshold_upper(ratio, alpha, args.precision, args.split)
        if ratio > 1 else None,
        "n_nzr_lower_10pct": perfmodel.threshold_lower(ratio, alpha, args.precision, args.split),
    }
    for bound in ("upper", "lower"):
        quoted = perfmodel.QUOTED_THRESHOLDS.get((bound, ratio, alpha))
        if quoted is not None:
            thresholds[f"quoted_{bound}"] = quoted

    have_matrix = args.input is not None or args.generate_spec is not None
    if not have_matrix and args.nnzr is None:
        lines = [f"B_gpu/B_pci                  {ratio:.6g}", f"alpha                        {alpha}"]
        up = thresholds["n_nzr_upper_50pct"]
        lines.append("N_nzr upper (>50% penalty)   "
                     + ("none, B_gpu <= B_pci" if up is None else f"{up:.6g}")
                     + (f"  (quoted {thresholds['quoted_upper']})" if "quoted_upper" in thresholds else ""))
        lines.append(f"N_nzr lower (<10% penalty)   {thresholds['n_nzr_lower_10pct']:.6g}"
                     + (f"  (quoted {thresholds['quoted_lower']})" if "quoted_lower" in thresholds else ""))
        _emit(args, "\n".join(lines), thresholds)
        return

    summary = histogram(_load(args)) if have_matrix else None
    params = perfmodel.ModelParams(
        n_nzr=args.nnzr if summary is None else summary.mean_len,
        b_gpu=args.b_gpu, b_pci=b_pci, alpha=alpha,
        n_rows=1 if summary is None else summary.n_rows,
        precision=args.precision, split_kernel=args.split, pci_residency=args.residency,
    )
    rep = perfmodel.report(params, summary)
    _emit(args, rep.to_table(), {**rep.to_dict(), "thresholds": thresholds})


def _cost(text: str) -> CostParams:
    if text in ("default", ""):
        return CostParams()
    fields = {}
    for item in text.split(","):
        key, _, val = item.partition("=")
        key = key.strip()
        if key not in CostParams.__dataclass_fields__ or not val:
            raise UsageError(f"bad --cost item {item!r}")
        fields[key] = val.strip() if key == "precision" else float(val)
    return CostParams(**fields)


def cmd_dist_run(args) -> None:
    m = _load(args)
    cost = _cost(args.cost)
    plan, blocks = partition(m, args.ranks, args.balance)
    sched = build_halo(plan, blocks)
    x = np.random.default_rng(args.seed + 1).uniform(-1.0, 1.0, m.n_cols)
    oracle = split_order_oracle(m, plan, x)
    modes = list(MODES) if args.mode == "all" else [MODE_ALIASES[args.mode]]
    results = [run_mode(mode, blocks, sched, x, cost=cost, plan=plan, warp_size=args.block_rows)
               for mode in modes]
    ref_sum = format_checksum(checksum(oracle))
    doc = {
        "ranks": args.ranks, "halo_volume": sched.total_volume, "oracle_checksum": ref_sum,
        "modes": [{
            "mode": r.mode,
            "checksum": format_checksum(checksum(r.y)),
            "matches_oracle": bool(np.array_equal(r.y.view(np.uint64), oracle.view(np.uint64))),
            "simulated_time_s": r.simulated_time,
        } for r in results],
    }
    lines = [f"# ranks={args.ranks} halo_volume={sched.total_volume} oracle_checksum={ref_sum}"]
    lines += [f"# {d['mode']}: checksum={d['checksum']} matches_oracle={d['matches_oracle']} "
              f"simulated_time={d['simulated_time_s']:.6e} s" for d in doc["modes"]]
    # with several modes the exported timeline is the last one run (task mode for --mode all)
    timeline = results[-1].timeline
    if args.timeline is not None:
        args.timeline.write_text(timeline_to_csv(timeline))
    if args.trace is not None:
        write_chrome_trace(args.trace, timeline)
    if args.json:
        doc["timeline"] = [e.__dict__ for e in timeline]
    text = "\n".join(lines)
    if args.timeline is None:
        text += "\n" + timeline_to_csv(timeline)
    _emit(args, text, doc)
    if not all(d["matches_oracle"] for d in doc["modes"]):
        raise DataError("distributed result differs from the split-order reference")


HANDLERS = {
    "convert": cmd_convert, "histogram": cmd_histogram, "footprint": cmd_footprint,
    "spmv-check": cmd_spmv_check, "model": cmd_model, "dist-run": cmd_dist_run,
    "generate": cmd_generate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
