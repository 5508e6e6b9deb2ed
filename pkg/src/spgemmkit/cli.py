"""Command-line front end: run the multiply engine, the memory-mode
simulator, and the graph/propagation workloads; manage the reference
corpus; emit JSON/CSV reports.

Exit codes: 0 success, 1 verification failure, 2 input or configuration
error.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import click
import numpy as np

from . import corpus as corpus_mod
from ._accel import NUMBA_ENABLED
from .aia import CacheConfig, compare_modes
from .apps import MclParams, graph_contract, mcl
from .core import CsrMatrix, csr_from_dense, oracle_spgemm
from .engine import SpgemmConfig, count_intermediate_products, group_rows, spgemm
from .errors import MismatchError, SpgemmKitError
from .mmio import load_matrix_market, save_matrix_market
from .propagation import gradient_check
from .report import (AIA_CSV_FIELDS, BenchReport, aia_csv_rows, gflops,
                     make_run_id, write_csv)

VERIFY_REL_TOL = 1e-12


def _common_options(f):
    f = click.option("--workers", type=int, default=None,
                     help="Engine worker threads (default: hardware count).")(f)
    f = click.option("--seed", type=int, default=None,
                     help="Seed for randomized commands; recorded in the report.")(f)
    f = click.option("--json", "json_path", type=click.Path(dir_okay=False),
                     default=None, help="Also write the JSON report to this path.")(f)
    f = click.option("--csv", "csv_path", type=click.Path(dir_okay=False),
                     default=None, help="Write plot-ready CSV rows to this path.")(f)
    return f


def _exit_for(exc: Exception) -> int:
    return 1 if isinstance(exc, MismatchError) else 2


def _run(body) -> None:
    try:
        body()
    except (SpgemmKitError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_for(exc))


def _load(path: str) -> CsrMatrix:
    return load_matrix_market(path)


def _environment(config: SpgemmConfig, seed, cache: CacheConfig | None = None) -> dict:
    env = {
        "worker_count": config.effective_workers,
        "seed": seed,
        "numba": NUMBA_ENABLED,
    }
    if cache is not None:
        env["cache"] = {
            "capacity_bytes": cache.capacity_bytes,
            "line_bytes": cache.line_bytes,
            "associativity": cache.associativity,
            "replacement": cache.replacement,
            "levels": cache.levels,
        }
    return env


def _emit(report: BenchReport, json_path) -> None:
    text = report.to_json()
    click.echo(text, nl=False)
    if json_path:
        Path(json_path).write_text(text)


def _verify_product(engine_out: CsrMatrix, oracle_out: CsrMatrix) -> None:
    same_structure = (
        engine_out.shape == oracle_out.shape
        and np.array_equal(engine_out.row_ptr, oracle_out.row_ptr)
        and np.array_equal(engine_out.col_idx, oracle_out.col_idx)
    )
    if not same_structure:
        raise MismatchError("engine and oracle disagree on output structure",
                            expected=oracle_out.nnz, actual=engine_out.nnz)
    if engine_out.nnz:
        scale = np.maximum(np.abs(oracle_out.values), 1.0)
        worst = float((np.abs(engine_out.values - oracle_out.values) / scale).max())
        if worst > VERIFY_REL_TOL:
            raise MismatchError("engine and oracle values diverge",
                                expected=f"<= {VERIFY_REL_TOL}", actual=worst)


@click.group()
def main() -> None:
    """Sparse matrix-multiply engine, memory-mode simulator, and graph
    workloads."""


@main.command("spgemm")
@click.argument("input_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("input_b", type=click.Path(exists=True, dir_okay=False), required=False)
@click.option("--verify", is_flag=True, help="Also run the brute-force oracle and compare.")
@click.option("--warmup/--no-warmup", default=True,
              help="Run one untimed multiply first (default on).")
@click.option("--bitonic", is_flag=True, help="Sort output rows with the bitonic network.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Write the product matrix to this Matrix Market file.")
@_common_options
def cmd_spgemm(input_a, input_b, verify, warmup, bitonic, out_path,
               workers, seed, json_path, csv_path) -> None:
    """Multiply A*A (one input) or A*B (two inputs) with the hash engine."""

    def body():
        config = SpgemmConfig(worker_count=workers, use_bitonic_sort=bitonic)
        a = _load(input_a)
        b = _load(input_b) if input_b else a
        if warmup:
            spgemm(a, b, config)
        product, stats = spgemm(a, b, config)

        results = [{
            "kind": "engine",
            "variant": "hash-engine",
            "total_ip": stats.total_ip,
            "nnz_out": stats.nnz_out,
            "seconds": {
                "grouping": stats.seconds_grouping,
                "allocation": stats.seconds_allocation,
                "accumulation": stats.seconds_accumulation,
                "total": stats.seconds_total,
            },
            "flops": stats.flops,
            "gflops": gflops(stats.flops),
        }]
        if verify:
            t0 = time.perf_counter()
            reference = oracle_spgemm(a, b)
            oracle_seconds = time.perf_counter() - t0
            _verify_product(product, reference)
            oracle_flops = 2.0 * stats.total_ip / oracle_seconds if oracle_seconds else 0.0
            results.append({
                "kind": "engine",
                "variant": "naive-oracle",
                "total_ip": stats.total_ip,
                "nnz_out": reference.nnz,
                "seconds": {"total": oracle_seconds},
                "flops": oracle_flops,
                "gflops": gflops(oracle_flops),
            })
            results.append({"kind": "verify", "passed": True})
        if out_path:
            save_matrix_market(out_path, product)

        name = Path(input_a).stem
        report = BenchReport(
            command="spgemm",
            run_id=make_run_id("spgemm", {
                "input": name, "second": input_b and Path(input_b).stem,
                "verify": verify, "bitonic": bitonic,
                "workers": workers, "seed": seed,
            }),
            input={"name": name, "rows": a.n_rows, "cols": a.n_cols, "nnz": a.nnz,
                   "second_input": Path(input_b).stem if input_b else None},
            environment=_environment(config, seed),
            results=results,
        )
        _emit(report, json_path)
        if csv_path:
            write_csv(csv_path,
                      ["matrix", "variant", "phase", "seconds"],
                      [{"matrix": name, "variant": r["variant"], "phase": phase,
                        "seconds": f"{secs:.9f}"}
                       for r in results if r["kind"] == "engine"
                       for phase, secs in r["seconds"].items()])

    _run(body)


@main.command("aia")
@click.argument("input_a", type=click.Path(exists=True, dir_okay=False))
@click.option("--phase", type=click.Choice(["allocation", "accumulation", "both"]),
              default="both", help="Which phase's access plan to simulate.")
@click.option("--cache-kib", type=int, default=128, help="Cache capacity in KiB.")
@click.option("--line-bytes", type=int, default=64, help="Cache line size in bytes.")
@click.option("--assoc", type=int, default=4, help="Cache associativity.")
@_common_options
def cmd_aia(input_a, phase, cache_kib, line_bytes, assoc,
            workers, seed, json_path, csv_path) -> None:
    """Compare baseline and engine-assisted memory modes on a matrix's
    self-product access plan."""

    def body():
        config = SpgemmConfig(worker_count=workers)
        cache = CacheConfig(capacity_bytes=cache_kib * 1024,
                            line_bytes=line_bytes, associativity=assoc)
        a = _load(input_a)
        plan = group_rows(count_intermediate_products(a, a), config)
        phases = ("allocation", "accumulation") if phase == "both" else (phase,)
        mode_report = compare_modes(a, a, plan, cache, phases=phases)

        results = []
        for ph, cells in mode_report.phases.items():
            for mode, cell in cells.items():
                results.append({
                    "kind": "sim", "mode": mode, "phase": ph,
                    "round_trips": cell.round_trips,
                    "accesses": cell.accesses,
                    "hits": cell.hits,
                    "misses": cell.misses,
                    "hit_ratio": cell.hit_ratio,
                    "bytes_moved": cell.bytes_moved,
                })

        name = Path(input_a).stem
        report = BenchReport(
            command="aia",
            run_id=make_run_id("aia", {
                "input": name, "phase": phase, "cache_kib": cache_kib,
                "line_bytes": line_bytes, "assoc": assoc,
                "workers": workers, "seed": seed,
            }),
            input={"name": name, "rows": a.n_rows, "cols": a.n_cols, "nnz": a.nnz},
            environment=_environment(config, seed, cache),
            results=results,
        )
        _emit(report, json_path)
        if csv_path:
            write_csv(csv_path, AIA_CSV_FIELDS, aia_csv_rows(name, mode_report))

    _run(body)


@main.command("mcl")
@click.argument("input_a", type=click.Path(exists=True, dir_okay=False))
@click.option("--expansion", "-e", type=int, default=2, help="Expansion exponent.")
@click.option("--inflation", "-r", type=float, default=2.0, help="Inflation exponent.")
@click.option("--theta", type=float, default=1e-4, help="Pruning threshold.")
@click.option("--topk", type=int, default=None, help="Top-k kept per column (default: all).")
@click.option("--max-iter", type=int, default=100, help="Iteration cap.")
@click.option("--eps", type=float, default=1e-6, help="Convergence tolerance.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Write `node cluster` lines to this file.")
@_common_options
def cmd_mcl(input_a, expansion, inflation, theta, topk, max_iter, eps, out_path,
            workers, seed, json_path, csv_path) -> None:
    """Cluster a graph with the flow-based expand/prune/inflate loop."""

    def body():
        config = SpgemmConfig(worker_count=workers)
        params = MclParams(e=expansion, r=inflation, theta=theta, k=topk,
                           max_iter=max_iter, eps=eps)
        g = _load(input_a)
        t0 = time.perf_counter()
        assignment, iterations = mcl(g, params, config)
        seconds = time.perf_counter() - t0

        if out_path:
            with open(out_path, "w") as fh:
                for node, cluster in enumerate(assignment.cluster_of_node):
                    fh.write(f"{node} {int(cluster)}\n")

        name = Path(input_a).stem
        report = BenchReport(
            command="mcl",
            run_id=make_run_id("mcl", {
                "input": name, "e": expansion, "r": inflation, "theta": theta,
                "k": topk, "max_iter": max_iter, "eps": eps,
                "workers": workers, "seed": seed,
            }),
            input={"name": name, "rows": g.n_rows, "cols": g.n_cols, "nnz": g.nnz},
            environment=_environment(config, seed),
            results=[{
                "kind": "app",
                "app": "mcl",
                "n_clusters": assignment.n_clusters,
                "iterations": iterations,
                "seconds": {"total": seconds},
            }],
        )
        _emit(report, json_path)
        if csv_path:
            write_csv(csv_path, ["matrix", "n_clusters", "iterations", "seconds"],
                      [{"matrix": name, "n_clusters": assignment.n_clusters,
                        "iterations": iterations, "seconds": f"{seconds:.9f}"}])

    _run(body)


@main.command("contract")
@click.argument("input_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("labels_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Write the contracted matrix to this Matrix Market file.")
@_common_options
def cmd_contract(input_a, labels_file, out_path,
                 workers, seed, json_path, csv_path) -> None:
    """Coarsen a graph by merging nodes that share a label (one label per
    line, 1-based)."""

    def body():
        config = SpgemmConfig(worker_count=workers)
        g = _load(input_a)
        labels = np.loadtxt(labels_file, dtype=np.int64, ndmin=1)
        t0 = time.perf_counter()
        contracted = graph_contract(g, labels, config)
        seconds = time.perf_counter() - t0
        if out_path:
            save_matrix_market(out_path, contracted)

        name = Path(input_a).stem
        report = BenchReport(
            command="contract",
            run_id=make_run_id("contract", {
                "input": name, "labels": Path(labels_file).stem,
                "workers": workers, "seed": seed,
            }),
            input={"name": name, "rows": g.n_rows, "cols": g.n_cols, "nnz": g.nnz,
                   "second_input": Path(labels_file).stem},
            environment=_environment(config, seed),
            results=[{
                "kind": "app",
                "app": "contract",
                "rows_out": contracted.n_rows,
                "nnz_out": contracted.nnz,
                "mass_in": float(g.values.sum()),
                "mass_out": float(contracted.values.sum()),
                "seconds": {"total": seconds},
            }],
        )
        _emit(report, json_path)

    _run(body)


@main.command("gnncheck")
@click.option("--n", "n_nodes", type=int, default=8, help="Node count.")
@click.option("--f", "n_features", type=int, default=4, help="Feature width.")
@click.option("--k", "top_k", type=int, default=2, help="Entries kept per feature row.")
@click.option("--step", type=float, default=1e-6, help="Finite-difference step.")
@click.option("--tol", type=float, default=1e-5, help="Maximum accepted relative error.")
@click.option("--global-k", is_flag=True, help="Select top entries matrix-wide instead of per row.")
@_common_options
def cmd_gnncheck(n_nodes, n_features, top_k, step, tol, global_k,
                 workers, seed, json_path, csv_path) -> None:
    """Finite-difference check of the masked propagation backward pass on a
    random instance."""

    def body():
        config = SpgemmConfig(worker_count=workers)
        rng = np.random.default_rng(0 if seed is None else seed)
        dense_a = (rng.random((n_nodes, n_nodes)) < 0.4).astype(np.float64)
        a = csr_from_dense(dense_a)
        x = rng.standard_normal((n_nodes, n_features))
        w = rng.standard_normal((n_features, n_features))
        scope = "global" if global_k else "row"
        error = gradient_check(a, x, w, top_k, step=step, scope=scope, config=config)

        name = f"random-n{n_nodes}-f{n_features}"
        report = BenchReport(
            command="gnncheck",
            run_id=make_run_id("gnncheck", {
                "n": n_nodes, "f": n_features, "k": top_k, "step": step,
                "tol": tol, "scope": scope, "workers": workers, "seed": seed,
            }),
            input={"name": name, "rows": n_nodes, "cols": n_nodes, "nnz": a.nnz},
            environment=_environment(config, seed),
            results=[{
                "kind": "app",
                "app": "gnncheck",
                "max_rel_error": error,
                "tolerance": tol,
                "passed": error < tol,
            }],
        )
        _emit(report, json_path)
        if error >= tol:
            raise MismatchError("gradient check exceeded tolerance",
                                expected=f"< {tol}", actual=error)

    _run(body)


@main.command("corpus")
@click.argument("action", type=click.Choice(["fetch", "verify"]))
@click.argument("names", nargs=-1)
@click.option("--include-large", is_flag=True,
              help="Also cover the large-memory matrices.")
@_common_options
def cmd_corpus(action, names, include_large,
               workers, seed, json_path, csv_path) -> None:
    """Download (fetch) or check (verify) the reference matrices."""

    def body():
        config = SpgemmConfig(worker_count=workers)
        if names:
            entries = [corpus_mod.entry_for(n) for n in names]
        elif action == "fetch":
            entries = [e for e in corpus_mod.CORPUS
                       if include_large or not e.large_memory]
        else:
            entries = corpus_mod.available_entries(include_large or None)

        results = []
        for entry in entries:
            if action == "fetch":
                path = corpus_mod.fetch(entry.name)
                click.echo(f"fetched {entry.name} -> {path}", err=True)
                results.append({"kind": "corpus", "name": entry.name, "fetched": True})
            else:
                outcome = corpus_mod.verify(entry.name, config)
                note = ("informational" if outcome["nnz_a2_informational"]
                        else "exact")
                click.echo(
                    f"verified {entry.name}: total_ip={outcome['total_ip']} "
                    f"nnz_a2={outcome['nnz_a2']} ({note})", err=True)
                results.append({"kind": "corpus", **outcome})
        if not entries:
            click.echo("no corpus matrices present locally; nothing to verify", err=True)

        report = BenchReport(
            command="corpus",
            run_id=make_run_id("corpus", {
                "action": action, "names": sorted(e.name for e in entries),
                "workers": workers, "seed": seed,
            }),
            input={"name": f"corpus-{action}"},
            environment=_environment(config, seed),
            results=results,
        )
        _emit(report, json_path)

    _run(body)


if __name__ == "__main__":
    main()
