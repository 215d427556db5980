"""Command-line surface: compress, decompress, verify, analyze, bench, stats."""

from __future__ import annotations

import argparse
import json
import shutil
import subprocess
import sys
from pathlib import Path
from time import perf_counter

import numpy as np

from .analytics import (
    MetricsReport,
    adjusted_mutual_information,
    approximation_ratio,
    compute_ratios,
    original_size_bytes,
    silhouette,
    sse_on,
    transfer_labels,
    weighted_kmeans,
)
from .bitmatrix import IntegrityError, QuantizeError, bit_stats, quantize_dataset
from .codec import Archive, base_centroids, compress_with_stats, decompress, extract_condensed
from .dataio import IngestError, load_csv, tables_equal, write_csv
from .selection import greedy_select_bits, select_compression_bits
from .synth import sensor_table

EXTERNAL_COMPRESSORS = {
    "bzip2": ["bzip2", "-9", "-c"],
    "gzip": ["gzip", "-9", "-c"],
    "xz": ["xz", "-9", "-c"],
    "zstd": ["zstd", "-19", "-q", "-c"],
    "lz4": ["lz4", "-12", "-c"],
}


def _parse_kinds(text: str | None, d: int | None = None):
    if text is None:
        return None
    kinds = []
    for item in text.split(","):
        item = item.strip().lower()
        if item in ("", "auto"):
            kinds.append(None)
        elif item in ("int", "float", "float_raw"):
            kinds.append(item)
        else:
            raise IngestError(f"unknown column kind {item!r}")
    if d is not None and len(kinds) != d:
        raise IngestError(f"{d} columns but {len(kinds)} kinds given")
    return kinds


def _parse_floats(text: str | None):
    if text is None:
        return None
    return [float(x) for x in text.split(",")]


def _emit(payload: dict, as_json: bool, lines: list[str]) -> None:
    if as_json:
        print(json.dumps(payload, indent=2, default=_json_default))
    else:
        for line in lines:
            print(line)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _trace_rows(trace) -> list[dict]:
    return [
        {
            "position": e.position,
            "entropy": e.entropy,
            "n_b": e.leaf_count,
            "size_bits": e.size_bits,
            "improved": e.improved,
        }
        for e in trace.entries
    ]


def cmd_compress(args) -> int:
    columns, names, kinds = load_csv(
        args.input, kinds=_parse_kinds(args.kinds), precision=args.precision
    )
    archive, stats = compress_with_stats(
        columns,
        kinds,
        m_max=args.m_max,
        tau=args.tau,
        importance=_parse_floats(args.importance),
        exact_truncation=args.exact_truncation,
        method=args.method,
        column_names=names,
    )
    out = Path(args.output) if args.output else Path(args.input).with_suffix(".egd")
    archive.write(out)
    orig_bytes = original_size_bytes(archive)
    payload = {
        "command": "compress",
        "config": {
            "input": str(args.input),
            "output": str(out),
            "m_max": archive.m_max,
            "tau": archive.tau,
            "importance": _parse_floats(args.importance),
            "exact_truncation": args.exact_truncation,
            "method": args.method,
            "kinds": kinds,
            "precision": args.precision,
        },
        "n": archive.n,
        "d": archive.d,
        "m": archive.m,
        "n_b": archive.n_b,
        "l_b": archive.selection.l_b,
        "l_d": archive.selection.l_d,
        "chunk_width": archive.chunk_width,
        "selected_bits": list(archive.selection.positions),
        "size_bits": archive.size_bits,
        "size_bytes": archive.size_bytes,
        "original_bytes": orig_bytes,
        "cr": archive.size_bytes / orig_bytes,
        "configuration_seconds": stats.configuration_seconds,
        "total_seconds": stats.total_seconds,
        "trace": _trace_rows(stats.trace),
    }
    _emit(
        payload,
        args.json,
        [
            f"wrote {out} ({archive.size_bytes} bytes, {archive.size_bits} bits modeled)",
            f"n={archive.n} d={archive.d} m={archive.m} bases={archive.n_b} "
            f"base_bits={archive.selection.l_b}/{archive.chunk_width}",
            f"CR={payload['cr']:.4f}  configuration={stats.configuration_seconds:.3f}s",
        ],
    )
    return 0


def cmd_decompress(args) -> int:
    archive = Archive.read(args.archive)
    columns = decompress(archive)
    names = archive.column_names or [f"c{j}" for j in range(archive.d)]
    write_csv(args.output, columns, names)
    if not args.json:
        print(f"wrote {args.output} ({archive.n} rows, {archive.d} columns)")
    else:
        _emit({"command": "decompress", "rows": archive.n, "columns": archive.d}, True, [])
    return 0


def cmd_verify(args) -> int:
    archive = Archive.read(args.archive)
    kinds = [p.kind for p in archive.params]
    precision = max(p.original_precision for p in archive.params)
    columns, _, _ = load_csv(args.original, kinds=kinds, precision=precision)
    restored = decompress(archive)
    ok, mismatch = tables_equal(restored, columns)
    payload = {"command": "verify", "pass": ok, "first_mismatch": mismatch}
    if ok:
        _emit(payload, args.json, [f"PASS: {args.archive} reconstructs {args.original} bit-exactly"])
        return 0
    if mismatch is None:
        _emit(payload, args.json, ["FAIL: table shapes differ"])
    else:
        row, col = mismatch
        _emit(payload, args.json, [f"FAIL: first mismatch at row {row}, column {col}"])
    return 1


def cmd_stats(args) -> int:
    archive = Archive.read(args.archive)
    model = archive.size_model()
    payload = {
        "command": "stats",
        "n": archive.n,
        "d": archive.d,
        "m": archive.m,
        "n_b": archive.n_b,
        "tau": archive.tau,
        "m_max": archive.m_max,
        "l_b": model.l_b,
        "l_d": model.l_d,
        "l_w": model.l_w,
        "l_id": model.l_id,
        "s_params_bits": model.s_params,
        "size_bits": archive.size_bits,
        "size_bytes": archive.size_bytes,
        "sections": archive.section_sizes(),
        "selected_bits": list(archive.selection.positions),
        "analytic_bits": list(archive.analytic_bits.positions),
        "columns": [
            {
                "name": archive.column_names[j] if archive.column_names else f"c{j}",
                "kind": p.kind,
                "decimal_scale": p.decimal_scale,
                "offset": p.offset,
                "bit_width": p.bit_width,
                "precision": p.original_precision,
            }
            for j, p in enumerate(archive.params)
        ],
    }
    lines = [
        f"{args.archive}: n={archive.n} d={archive.d} m={archive.m} bases={archive.n_b}",
        f"base/deviation bits: {model.l_b}/{model.l_d}  id bits: {model.l_id}  weight bits: {model.l_w}",
        f"modeled size: {archive.size_bits} bits  on disk: {archive.size_bytes} bytes",
        "sections: " + ", ".join(f"{k}={v}B" for k, v in archive.section_sizes().items()),
    ]
    _emit(payload, args.json, lines)
    return 0


def analyze_archive(
    archive: Archive,
    *,
    mode: str,
    k: int,
    repeats: int,
    inits: int,
    seed: int,
    sample_size: int,
    configuration_time: float | None = None,
) -> tuple[list[MetricsReport], dict]:
    """Cluster the archive's analytics view against full-data references."""
    columns = decompress(archive)
    full = np.column_stack([c.astype(np.float64) for c in columns])
    orig_bytes = original_size_bytes(archive)
    ratios = compute_ratios(archive, orig_bytes, mode)
    if mode == "condensed":
        summary = extract_condensed(archive)
        points = summary.samples
        weights = summary.weights.astype(np.float64)
    elif mode == "centroid":
        centroids, counts = base_centroids(archive)
        keep = counts > 0
        points = centroids[keep]
        weights = counts[keep].astype(np.float64)
    else:
        raise ValueError(f"unknown analytics mode {mode!r}")
    if len(points) < k:
        raise ValueError(
            f"{mode} summary holds {len(points)} points, fewer than k={k}"
        )
    reports = []
    rng = np.random.default_rng(seed)
    for _ in range(repeats):
        seed_full = int(rng.integers(2**31))
        seed_comp = int(rng.integers(2**31))
        seed_sil = int(rng.integers(2**31))
        t0 = perf_counter()
        reference = weighted_kmeans(full, None, k, inits=inits, seed=seed_full)
        t_full = perf_counter() - t0
        t0 = perf_counter()
        compressed = weighted_kmeans(points, weights, k, inits=inits, seed=seed_comp)
        t_comp = perf_counter() - t0
        ar = approximation_ratio(sse_on(full, compressed.centers), reference.sse)
        transferred = transfer_labels(full, compressed.centers)
        ami = adjusted_mutual_information(reference.labels, transferred)
        sil = silhouette(full, transferred, sample_size=sample_size, seed=seed_sil)
        reports.append(
            MetricsReport(
                mode=mode,
                cr=ratios["cr"],
                adr=ratios["adr"],
                ar=ar,
                ami=ami,
                silhouette=sil,
                configuration_time=configuration_time,
                clustering_time=t_comp,
                full_clustering_time=t_full,
                k=k,
                seed=seed_comp,
            )
        )
    extras = {"summary_points": len(points), "original_bytes": orig_bytes}
    return reports, extras


def _median_or_none(values):
    vals = [v for v in values if v is not None]
    return float(np.median(vals)) if vals else None


def cmd_analyze(args) -> int:
    archive = Archive.read(args.archive)
    modes = ["condensed", "centroid"] if args.mode == "both" else [args.mode]
    all_rows: list[dict] = []
    summaries: dict[str, dict] = {}
    for mode in modes:
        reports, extras = analyze_archive(
            archive,
            mode=mode,
            k=args.k,
            repeats=args.repeats,
            inits=args.inits,
            seed=args.seed,
            sample_size=args.sample_size,
            configuration_time=args.config_seconds,
        )
        for i, rep in enumerate(reports):
            all_rows.append(
                {
                    "mode": mode,
                    "repeat": i,
                    "cr": rep.cr,
                    "adr": rep.adr,
                    "ar": rep.ar,
                    "ami": rep.ami,
                    "silhouette": rep.silhouette,
                    "clustering_time": rep.clustering_time,
                    "full_clustering_time": rep.full_clustering_time,
                }
            )
        summaries[mode] = {
            "cr": reports[0].cr,
            "adr": reports[0].adr,
            "ar_median": _median_or_none([r.ar for r in reports]),
            "ami_median": _median_or_none([r.ami for r in reports]),
            "silhouette_median": _median_or_none([r.silhouette for r in reports]),
            "clustering_time_median": _median_or_none([r.clustering_time for r in reports]),
            "full_clustering_time_median": _median_or_none(
                [r.full_clustering_time for r in reports]
            ),
            **extras,
        }
    payload = {
        "command": "analyze",
        "config": {
            "archive": str(args.archive),
            "mode": args.mode,
            "k": args.k,
            "repeats": args.repeats,
            "inits": args.inits,
            "seed": args.seed,
            "sample_size": args.sample_size,
        },
        "repeats": all_rows,
        "summary": summaries,
    }
    lines = []
    for mode, s in summaries.items():
        sil = f"{s['silhouette_median']:.3f}" if s["silhouette_median"] is not None else "undefined"
        ar = f"{s['ar_median']:.4f}" if s["ar_median"] is not None else "undefined"
        lines.append(
            f"{mode}: CR={s['cr']:.4f} ADR={s['adr']:.4f} AR={ar} "
            f"AMI={s['ami_median']:.3f} silhouette={sil} "
            f"cluster_time={s['clustering_time_median']:.3f}s "
            f"(full {s['full_clustering_time_median']:.3f}s)"
        )
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        from .report import fig_clusters, write_rows_csv

        write_rows_csv(out / "metrics.csv", all_rows)
        with open(out / "report.json", "w") as fh:
            json.dump(payload, fh, indent=2, default=_json_default)
        if not args.no_plots:
            columns = decompress(archive)
            full = np.column_stack([c.astype(np.float64) for c in columns])
            for mode in modes:
                if mode == "condensed":
                    summary = extract_condensed(archive)
                    points, weights = summary.samples, summary.weights.astype(np.float64)
                else:
                    centroids, counts = base_centroids(archive)
                    keep = counts > 0
                    points, weights = centroids[keep], counts[keep].astype(np.float64)
                result = weighted_kmeans(points, weights, args.k, inits=args.inits, seed=args.seed)
                labels = transfer_labels(full, result.centers)
                fig_clusters(full, labels, result.centers, out / f"clusters_{mode}.png")
        lines.append(f"reports written to {out}")
    _emit(payload, args.json, lines)
    return 0


def _binary_rendering(columns) -> bytes:
    return b"".join(np.ascontiguousarray(c).tobytes() for c in columns)


def _run_external(name: str, data: bytes) -> tuple[str, int | None, float | None]:
    argv = EXTERNAL_COMPRESSORS[name]
    if shutil.which(argv[0]) is None:
        return "unavailable", None, None
    t0 = perf_counter()
    try:
        proc = subprocess.run(argv, input=data, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL)
    except OSError:
        return "failed", None, None
    if proc.returncode != 0:
        return "failed", None, None
    return "ok", len(proc.stdout), perf_counter() - t0


def cmd_bench(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from .report import fig_cr_boxplot, fig_scaling, write_rows_csv

    payload: dict = {
        "command": "bench",
        "config": {
            "datasets": [str(p) for p in args.datasets],
            "external": args.external,
            "scaling": args.scaling,
            "m_max": args.m_max,
            "tau": args.tau,
            "seed": args.seed,
        },
    }
    lines: list[str] = []

    if args.datasets:
        externals = (
            list(EXTERNAL_COMPRESSORS)
            if args.external == "auto"
            else [x for x in args.external.split(",") if x]
            if args.external not in (None, "none")
            else []
        )
        for name in externals:
            if name not in EXTERNAL_COMPRESSORS:
                raise IngestError(f"unknown external compressor {name!r}")
        rows = []
        for ds in args.datasets:
            columns, names, kinds = load_csv(ds, precision=args.precision)
            label = Path(ds).name
            archive, stats = compress_with_stats(
                columns, kinds, m_max=args.m_max, tau=args.tau, column_names=names
            )
            orig = original_size_bytes(archive)
            rows.append(
                {
                    "dataset": label,
                    "method": "entrogd",
                    "status": "ok",
                    "cr": archive.size_bytes / orig,
                    "seconds": stats.configuration_seconds,
                    "bytes": archive.size_bytes,
                }
            )
            g_archive, g_stats = compress_with_stats(
                columns, kinds, tau=args.tau, method="greedy", column_names=names
            )
            rows.append(
                {
                    "dataset": label,
                    "method": "greedy",
                    "status": "ok",
                    "cr": g_archive.size_bytes / orig,
                    "seconds": g_stats.configuration_seconds,
                    "bytes": g_archive.size_bytes,
                }
            )
            raw = _binary_rendering(columns)
            for name in externals:
                status, nbytes, secs = _run_external(name, raw)
                rows.append(
                    {
                        "dataset": label,
                        "method": name,
                        "status": status,
                        "cr": (nbytes / len(raw)) if nbytes is not None else None,
                        "seconds": secs,
                        "bytes": nbytes,
                    }
                )
        write_rows_csv(out / "bench.csv", rows)
        cr_by_method: dict[str, list[float]] = {}
        for row in rows:
            if row["cr"] is not None:
                cr_by_method.setdefault(row["method"], []).append(row["cr"])
        if not args.no_plots:
            fig_cr_boxplot(cr_by_method, out / "cr_boxplot.png")
        payload["rows"] = rows
        for row in rows:
            cr = f"{row['cr']:.4f}" if row["cr"] is not None else "-"
            lines.append(f"{row['dataset']:<24} {row['method']:<10} {row['status']:<12} CR={cr}")

    if args.scaling:
        dims = [int(x) for x in args.dims.split(",")]
        times_entropy = []
        times_greedy = []
        for d in dims:
            table = sensor_table(args.scaling_n, d, seed=args.seed)
            matrix = quantize_dataset(table)
            e_runs, g_runs = [], []
            for _ in range(args.reps):
                t0 = perf_counter()
                stats = bit_stats(matrix)
                select_compression_bits(matrix, stats, m=0, tau=args.tau)
                e_runs.append(perf_counter() - t0)
                t0 = perf_counter()
                greedy_select_bits(matrix, tau=args.tau)
                g_runs.append(perf_counter() - t0)
            times_entropy.append(float(np.median(e_runs)))
            times_greedy.append(float(np.median(g_runs)))
        log_d = np.log(dims)
        slopes = {
            "entropy": float(np.polyfit(log_d, np.log(times_entropy), 1)[0]),
            "greedy": float(np.polyfit(log_d, np.log(times_greedy), 1)[0]),
        }
        scaling_rows = [
            {
                "d": d,
                "entropy_seconds": te,
                "greedy_seconds": tg,
                "speedup": tg / te,
            }
            for d, te, tg in zip(dims, times_entropy, times_greedy)
        ]
        write_rows_csv(out / "scaling.csv", scaling_rows)
        if not args.no_plots:
            fig_scaling(dims, times_entropy, times_greedy, slopes, out / "scaling.png")
        payload["scaling"] = {"rows": scaling_rows, "slopes": slopes, "n": args.scaling_n}
        lines.append(
            f"scaling slopes: entropy={slopes['entropy']:.2f} greedy={slopes['greedy']:.2f} "
            f"(speedup at d={dims[-1]}: {times_greedy[-1] / times_entropy[-1]:.1f}x)"
        )

    lines.append(f"bench output written to {out}")
    _emit(payload, args.json, lines)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entrogd",
        description="Entropy-guided generalized deduplication: lossless compression "
        "with clustering-ready condensed samples.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress a CSV into an archive")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="archive path (default: input with .egd)")
    p.add_argument("--m-max", type=int, default=None, help="condensed sample budget")
    p.add_argument("--tau", type=int, default=10, help="plateau threshold (default 10)")
    p.add_argument("--importance", help="comma-separated feature importances")
    p.add_argument("--exact-truncation", action="store_true", help="merge samples down to m-max")
    p.add_argument("--method", choices=["entropy", "greedy"], default="entropy")
    p.add_argument("--kinds", help="comma-separated column kinds (int/float/float_raw/auto)")
    p.add_argument("--precision", type=int, choices=[32, 64], default=64)
    p.add_argument("--json", action="store_true", help="machine-readable stdout")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="restore the original CSV from an archive")
    p.add_argument("archive")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("verify", help="check an archive against its source CSV")
    p.add_argument("archive")
    p.add_argument("original")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stats", help="print archive parameters and sizes")
    p.add_argument("archive")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("analyze", help="cluster on the compressed representation")
    p.add_argument("archive")
    p.add_argument("-k", type=int, required=True, help="number of clusters")
    p.add_argument("--mode", choices=["condensed", "centroid", "both"], default="condensed")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--inits", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-size", type=int, default=10_000, help="silhouette sample size")
    p.add_argument("--config-seconds", type=float, default=None,
                   help="configuration time from the compress run, echoed into the report")
    p.add_argument("--out-dir", help="write report.json, metrics.csv, and figures here")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bench", help="compare compressors and selection scaling")
    p.add_argument("datasets", nargs="*", help="CSV datasets to compress")
    p.add_argument("--external", default="auto",
                   help="comma list of external tools, 'auto', or 'none'")
    p.add_argument("--scaling", action="store_true", help="run the d-scaling comparison")
    p.add_argument("--scaling-n", type=int, default=20_000)
    p.add_argument("--dims", default="4,8,16,32")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--m-max", type=int, default=None)
    p.add_argument("--tau", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precision", type=int, choices=[32, 64], default=64)
    p.add_argument("--out-dir", default="bench_out")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (QuantizeError, IngestError, IntegrityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
