"""Experiment harness: runs query workloads over sweeps and emits plot-ready
CSV files, one per experiment family.

Families
--------
distance : average distance of the 1st/2nd/3rd/5th/kth diverse answer per
           min_div setting (non-diverse fillers are excluded).
score    : average result score per min_div, plus, when the instance is
           small enough for the exhaustive oracle, the average and worst
           score ratio against the optimum and the answer overlap on
           non-optimal cases.
reads    : fraction of tuples read per (k, min_div) cell.
pruning  : tuples read with pruning on vs off, plus result hashes proving
           the answers are unchanged.
partial  : tuples read through the projected global index vs a dedicated
           index built on exactly the queried dimensions, per query
           dimensionality.

Every CSV starts with provenance comment lines (dataset checksum, seeds,
config digest), so a byte-identical file certifies a reproduced run.
"""

from __future__ import annotations

import hashlib
import time
from pathlib import Path

import numpy as np

from kndn import datagen, kernels, model, oracle, rtree, solver

DEFAULTS = {
    "data.path": "",
    "data.schema": "",
    "data.n": "50000",
    "data.dims": "6",
    "data.theta": "1.0",
    "data.values": "1000",
    "data.seed": "7",
    "workload.count": "100",
    "workload.seed": "11",
    "query.k": "10",
    "query.decay": "0.1",
    "query.metric": "euclidean",
    "query.aggregate": "harmonic",
    "sweep.min_div": "0,0.05,0.1,0.2",
    "sweep.k": "1,10",
    "partial.dims": "",
    "oracle.n_limit": "400",
    "oracle.k_limit": "5",
    "index.branching": "64",
    "index.fill": "0.7",
    "families": "distance,score,reads,pruning,partial",
    "out.dir": "bench_out",
}


class ConfigError(ValueError):
    """A malformed or inconsistent bench configuration."""


def load_config(path=None, overrides=None) -> dict[str, str]:
    """Layered key-value config: defaults, then file entries, then overrides."""
    cfg = dict(DEFAULTS)
    if path is not None:
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            cfg[key] = value
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = str(value)
    return cfg


def _floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip() != ""]


def _ints(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip() != ""]


def config_digest(cfg: dict[str, str]) -> str:
    h = hashlib.sha1()
    for key in sorted(cfg):
        h.update(f"{key}={cfg[key]};".encode())
    return h.hexdigest()


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header_lines, columns, rows) -> None:
    with Path(path).open("w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def load_dataset(cfg: dict[str, str]) -> model.Dataset:
    if cfg["data.path"]:
        return model.load_csv(cfg["data.path"], cfg["data.schema"] or None)
    return datagen.gen_zipf(
        n=int(cfg["data.n"]),
        d=int(cfg["data.dims"]),
        theta=float(cfg["data.theta"]),
        v=int(cfg["data.values"]),
        seed=int(cfg["data.seed"]),
    )


def _workload(cfg, dataset, k, min_div) -> list[model.Query]:
    attrs = [spec.name for spec in dataset.schema if spec.kind == model.NUMERIC]
    return datagen.gen_workload(
        int(cfg["workload.count"]),
        attrs,
        int(cfg["workload.seed"]),
        k=k,
        min_div=min_div,
        decay=float(cfg["query.decay"]),
        metric=cfg["query.metric"],
        aggregate=cfg["query.aggregate"],
    )


def run_bench(cfg: dict[str, str], progress=None) -> list[Path]:
    """Run every requested family and return the written CSV paths."""
    out_dir = Path(cfg["out.dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(cfg)
    config = rtree.RTreeConfig(int(cfg["index.branching"]), float(cfg["index.fill"]))
    tree = rtree.build(dataset, config=config)
    header = [
        "dataset_checksum = " + dataset.checksum(),
        "workload_seed = " + cfg["workload.seed"],
        "config_digest = " + config_digest(cfg),
    ]
    families = [f.strip() for f in cfg["families"].split(",") if f.strip()]
    written = []
    for family in families:
        if progress is not None:
            progress(family)
        if family == "distance":
            rows = family_distance(cfg, dataset, tree)
            columns = ["min_div", "k", "n_queries", "avg_d1", "avg_d2", "avg_d3", "avg_d5", "avg_dk"]
            path = out_dir / "distance.csv"
        elif family == "score":
            columns, rows, warnings = family_score(cfg, dataset, tree)
            path = out_dir / "score.csv"
            write_csv(path, header + warnings, columns, rows)
            written.append(path)
            continue
        elif family == "reads":
            rows = family_reads(cfg, dataset, tree)
            columns = ["k", "min_div", "n_queries", "mean_tuples_read", "frac_read",
                       "mean_nodes_expanded", "mean_pqueue_peak"]
            path = out_dir / "reads.csv"
        elif family == "pruning":
            rows = family_pruning(cfg, dataset, tree)
            columns = ["min_div", "k", "n_queries", "mean_reads_pruned",
                       "mean_reads_unpruned", "results_identical"]
            path = out_dir / "pruning.csv"
        elif family == "partial":
            rows = family_partial(cfg, dataset)
            columns = ["point_dims", "min_div", "n_queries", "mean_reads_global",
                       "mean_reads_dedicated", "read_ratio"]
            path = out_dir / "partial.csv"
        else:
            raise ConfigError(f"unknown experiment family {family!r}")
        write_csv(path, header, columns, rows)
        written.append(path)
    return written


def family_distance(cfg, dataset, tree):
    k = int(cfg["query.k"])
    picks = [1, 2, 3, 5, k]
    rows = []
    for min_div in _floats(cfg["sweep.min_div"]):
        queries = _workload(cfg, dataset, k, min_div)
        sums = {p: 0.0 for p in picks}
        counts = {p: 0 for p in picks}
        for query in queries:
            result = solver.buffered_greedy(dataset, tree, query)
            diverse = [a for a in result.answers if a.diverse]
            for p in picks:
                if len(diverse) >= p:
                    sums[p] += diverse[p - 1].distance
                    counts[p] += 1
        row = [min_div, k, len(queries)]
        for p in picks:
            row.append(sums[p] / counts[p] if counts[p] else "")
        rows.append(row)
    return rows


def family_score(cfg, dataset, tree):
    k = int(cfg["query.k"])
    n_limit = int(cfg["oracle.n_limit"])
    k_limit = int(cfg["oracle.k_limit"])
    with_oracle = dataset.n <= n_limit and k <= k_limit
    warnings = []
    if with_oracle:
        columns = ["min_div", "k", "n_queries", "avg_score", "avg_ratio", "worst_ratio",
                   "avg_overlap_nonoptimal", "n_nonoptimal"]
    else:
        columns = ["min_div", "k", "n_queries", "avg_score"]
        warnings.append(
            f"warning: oracle columns omitted, instance (n={dataset.n}, k={k}) "
            f"exceeds oracle limits (n<={n_limit}, k<={k_limit})"
        )
    rows = []
    for min_div in _floats(cfg["sweep.min_div"]):
        queries = _workload(cfg, dataset, k, min_div)
        scores, ratios, overlaps = [], [], []
        for query in queries:
            result = solver.buffered_greedy(dataset, tree, query)
            scores.append(result.score)
            if with_oracle:
                best = oracle.optimal_kndn(dataset, query, n_limit=n_limit, k_limit=k_limit)
                ratio = result.score / best.score
                ratios.append(ratio)
                if ratio < 1.0 - 1e-9:
                    common = len(set(result.ids) & set(best.ids))
                    overlaps.append(common / max(len(best.ids), 1))
        row = [min_div, k, len(queries), float(np.mean(scores))]
        if with_oracle:
            row.extend([
                float(np.mean(ratios)),
                float(np.min(ratios)),
                float(np.mean(overlaps)) if overlaps else 1.0,
                len(overlaps),
            ])
        rows.append(row)
    return columns, rows, warnings


def family_reads(cfg, dataset, tree):
    rows = []
    for k in _ints(cfg["sweep.k"]):
        for min_div in _floats(cfg["sweep.min_div"]):
            queries = _workload(cfg, dataset, k, min_div)
            reads, nodes, peaks = [], [], []
            for query in queries:
                result = solver.buffered_greedy(dataset, tree, query)
                reads.append(result.stats.tuples_read)
                nodes.append(result.stats.nodes_expanded)
                peaks.append(result.stats.pqueue_peak)
            rows.append([
                k, min_div, len(queries), float(np.mean(reads)),
                float(np.mean(reads) / dataset.n), float(np.mean(nodes)),
                float(np.mean(peaks)),
            ])
    return rows


def family_pruning(cfg, dataset, tree):
    k = int(cfg["query.k"])
    rows = []
    for min_div in _floats(cfg["sweep.min_div"]):
        queries = _workload(cfg, dataset, k, min_div)
        pruned_reads, plain_reads = [], []
        identical = True
        for query in queries:
            with_prune = solver.buffered_greedy(dataset, tree, query, prune=True)
            without = solver.buffered_greedy(dataset, tree, query, prune=False)
            pruned_reads.append(with_prune.stats.tuples_read)
            plain_reads.append(without.stats.tuples_read)
            if with_prune.result_hash() != without.result_hash():
                identical = False
        rows.append([
            min_div, k, len(queries), float(np.mean(pruned_reads)),
            float(np.mean(plain_reads)), int(identical),
        ])
    return rows


def family_partial(cfg, dataset):
    """Projected global index vs an index built on exactly the queried dims."""
    k = int(cfg["query.k"])
    config = rtree.RTreeConfig(int(cfg["index.branching"]), float(cfg["index.fill"]))
    numeric = [spec.name for spec in dataset.schema if spec.kind == model.NUMERIC]
    dims_list = _ints(cfg["partial.dims"]) if cfg["partial.dims"] else list(range(1, len(numeric) + 1))
    global_tree = rtree.build(dataset, config=config)
    rows = []
    for m in dims_list:
        attrs = numeric[:m]
        dedicated = rtree.build(dataset, dims=attrs, config=config)
        for min_div in _floats(cfg["sweep.min_div"]):
            count = int(cfg["workload.count"])
            queries = datagen.gen_workload(
                count, attrs, int(cfg["workload.seed"]), k=k, min_div=min_div,
                decay=float(cfg["query.decay"]), metric=cfg["query.metric"],
                aggregate=cfg["query.aggregate"], diversity=numeric,
            )
            reads_global, reads_dedicated = [], []
            for query in queries:
                reads_global.append(
                    solver.buffered_greedy(dataset, global_tree, query).stats.tuples_read
                )
                reads_dedicated.append(
                    solver.buffered_greedy(dataset, dedicated, query).stats.tuples_read
                )
            mg, md = float(np.mean(reads_global)), float(np.mean(reads_dedicated))
            rows.append([m, min_div, len(queries), mg, md, mg / md if md else ""])
    return rows


def compare_oracle(dataset, tree, queries, *, n_limit=400, k_limit=5):
    """Score ratios and answer overlap of the greedy solver against the
    exhaustive optimum, per query."""
    rows = []
    for query in queries:
        result = solver.buffered_greedy(dataset, tree, query)
        best = oracle.optimal_kndn(dataset, query, n_limit=n_limit, k_limit=k_limit)
        common = len(set(result.ids) & set(best.ids))
        rows.append({
            "min_div": query.min_div,
            "score": result.score,
            "optimal_score": best.score,
            "ratio": result.score / best.score,
            "overlap": common / max(len(best.ids), 1),
            "ids": result.ids,
            "optimal_ids": best.ids,
        })
    return rows


def bench_kernels(repeat: int = 20000, seed: int = 3, dims: int = 6):
    """Micro-benchmark of each hot kernel on both backends, plus a macro
    query comparison.  Returns (rows, unavailable) where rows are
    (kernel, backend, ns_per_call)."""
    rng = np.random.default_rng(seed)
    row_a = rng.random(dims)
    row_b = rng.random(dims)
    low = np.minimum(row_a, row_b).copy()
    high = np.maximum(row_a, row_b).copy()
    qcols = np.arange(dims, dtype=np.int64)
    qvals = rng.random(dims)
    dcols = np.arange(dims, dtype=np.int64)
    is_cat = np.zeros(dims, dtype=np.uint8)
    sim_flat = np.empty(0)
    sim_off = np.full(dims, -1, dtype=np.int64)
    from kndn.diversity import make_weights

    weights = make_weights(dims, 0.1)
    static = np.zeros(dims)
    coords = rng.random((64, dims))

    cases = {
        "spatial_distance": lambda b: b.spatial_distance(row_a, qcols, qvals, 0),
        "mbr_mindist": lambda b: b.mbr_mindist(low, high, qcols, qvals, 0),
        "divdist_rows": lambda b: b.divdist_rows(
            row_a, row_b, dcols, is_cat, sim_flat, sim_off, weights
        ),
        "mbr_divdist_bound": lambda b: b.mbr_divdist_bound(
            low, high, qcols, row_a, static, weights
        ),
        "batch_spatial_64": lambda b: b.batch_spatial(coords, qcols, qvals, 0),
    }
    rows = []
    unavailable = []
    for name in ("python", "compiled"):
        try:
            backend = kernels.get_backend(name)
        except ImportError:
            unavailable.append(name)
            continue
        for label, fn in cases.items():
            fn(backend)
            start = time.perf_counter()
            for _ in range(repeat):
                fn(backend)
            elapsed = time.perf_counter() - start
            rows.append((label, name, elapsed / repeat * 1e9))
    return rows, unavailable


def bench_query_backends(n: int = 20000, d: int = 4, count: int = 20, seed: int = 5):
    """End-to-end solver timing per backend on one generated workload."""
    dataset = datagen.gen_zipf(n=n, d=d, seed=seed)
    tree = rtree.build(dataset)
    attrs = [spec.name for spec in dataset.schema]
    queries = datagen.gen_workload(count, attrs, seed + 1, k=10, min_div=0.1)
    rows = []
    for name in ("python", "compiled"):
        try:
            backend = kernels.get_backend(name)
        except ImportError:
            continue
        start = time.perf_counter()
        ids = None
        for query in queries:
            result = solver.buffered_greedy(dataset, tree, query, backend=backend)
            ids = result.ids
        elapsed = time.perf_counter() - start
        rows.append((name, elapsed / count * 1e3, ids))
    return rows
