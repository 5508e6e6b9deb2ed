"""End-to-end CLI behavior: exit codes, report schema, and artifact files."""

import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from spgemmkit import load_matrix_market, validate_report
from spgemmkit.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, *args, **kwargs):
    result = runner.invoke(main, [str(a) for a in args], **kwargs)
    if result.exception and not isinstance(result.exception, SystemExit):
        raise result.exception
    return result


def report_of(result):
    document = json.loads(result.stdout)
    validate_report(document)
    return document


# -------------------------------------------------------------- spgemm ----


def test_spgemm_verify_roundtrip(runner, fixtures_dir):
    result = invoke(runner, "spgemm", fixtures_dir / "a3.mtx", "--verify")
    assert result.exit_code == 0
    doc = report_of(result)
    assert doc["command"] == "spgemm"
    engine = next(r for r in doc["results"] if r.get("variant") == "hash-engine")
    assert engine["total_ip"] == 9
    assert engine["nnz_out"] == 5
    assert any(r["kind"] == "verify" and r["passed"] for r in doc["results"])


def test_spgemm_two_inputs_and_product_file(runner, fixtures_dir, tmp_path):
    out = tmp_path / "product.mtx"
    result = invoke(runner, "spgemm", fixtures_dir / "a3.mtx",
                    fixtures_dir / "path3.mtx", "--out", out)
    assert result.exit_code == 0
    doc = report_of(result)
    assert doc["input"]["second_input"] == "path3"
    a = load_matrix_market(fixtures_dir / "a3.mtx").to_dense()
    b = load_matrix_market(fixtures_dir / "path3.mtx").to_dense()
    np.testing.assert_allclose(load_matrix_market(out).to_dense(), a @ b)


def test_spgemm_writes_json_and_csv(runner, fixtures_dir, tmp_path):
    json_path = tmp_path / "report.json"
    csv_path = tmp_path / "rows.csv"
    result = invoke(runner, "spgemm", fixtures_dir / "a3.mtx", "--verify",
                    "--json", json_path, "--csv", csv_path)
    assert result.exit_code == 0
    assert json.loads(json_path.read_text()) == json.loads(result.stdout)
    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))
    assert {r["variant"] for r in rows} == {"hash-engine", "naive-oracle"}
    engine_phases = {r["phase"] for r in rows if r["variant"] == "hash-engine"}
    assert engine_phases == {"grouping", "allocation", "accumulation", "total"}
    assert all(float(r["seconds"]) >= 0.0 for r in rows)


def test_spgemm_bad_input_exits_2(runner, fixtures_dir):
    result = invoke(runner, "spgemm", fixtures_dir / "bad.mtx")
    assert result.exit_code == 2
    assert "error:" in result.stderr


def test_spgemm_missing_file_exits_2(runner, tmp_path):
    result = invoke(runner, "spgemm", tmp_path / "nope.mtx")
    assert result.exit_code == 2


def test_run_id_is_deterministic(runner, fixtures_dir):
    first = report_of(invoke(runner, "spgemm", fixtures_dir / "a3.mtx"))
    second = report_of(invoke(runner, "spgemm", fixtures_dir / "a3.mtx"))
    assert first["run_id"] == second["run_id"]
    varied = report_of(invoke(runner, "spgemm", fixtures_dir / "a3.mtx",
                              "--bitonic"))
    assert varied["run_id"] != first["run_id"]


# ----------------------------------------------------------------- aia ----


def test_aia_reports_known_round_trips(runner, fixtures_dir, tmp_path):
    csv_path = tmp_path / "aia.csv"
    result = invoke(runner, "aia", fixtures_dir / "a3.mtx",
                    "--cache-kib", 4, "--csv", csv_path)
    assert result.exit_code == 0
    doc = report_of(result)
    cells = {(r["phase"], r["mode"]): r for r in doc["results"]}
    assert cells[("allocation", "baseline")]["round_trips"] == 26
    assert cells[("allocation", "aia")]["round_trips"] == 9
    assert cells[("accumulation", "baseline")]["round_trips"] == 36
    assert cells[("accumulation", "aia")]["round_trips"] == 14
    assert doc["environment"]["cache"]["capacity_bytes"] == 4096

    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert set(rows[0]) == {"matrix", "phase", "mode", "round_trips",
                            "accesses", "hit_ratio"}


def test_aia_single_phase(runner, fixtures_dir):
    result = invoke(runner, "aia", fixtures_dir / "a3.mtx",
                    "--phase", "allocation")
    assert result.exit_code == 0
    doc = report_of(result)
    assert {r["phase"] for r in doc["results"]} == {"allocation"}


def test_aia_rejects_bad_cache_geometry(runner, fixtures_dir):
    result = invoke(runner, "aia", fixtures_dir / "a3.mtx", "--cache-kib", 3)
    assert result.exit_code == 2
    assert "error:" in result.stderr


# ----------------------------------------------------------------- mcl ----


def test_mcl_clusters_and_assignment_file(runner, fixtures_dir, tmp_path):
    out = tmp_path / "clusters.txt"
    result = invoke(runner, "mcl", fixtures_dir / "two_cliques.mtx",
                    "--out", out)
    assert result.exit_code == 0
    doc = report_of(result)
    app = doc["results"][0]
    assert app["n_clusters"] == 2
    assert app["iterations"] >= 1
    lines = out.read_text().splitlines()
    assert [line.split()[0] for line in lines] == [str(i) for i in range(6)]
    clusters = [int(line.split()[1]) for line in lines]
    assert clusters[:3] == [0, 0, 0] and clusters[3:] == [1, 1, 1]


def test_mcl_rejects_bad_parameters(runner, fixtures_dir):
    result = invoke(runner, "mcl", fixtures_dir / "two_cliques.mtx",
                    "--inflation", 0.5)
    assert result.exit_code == 2


# ------------------------------------------------------------ contract ----


def test_contract_writes_coarse_graph(runner, fixtures_dir, tmp_path):
    out = tmp_path / "coarse.mtx"
    result = invoke(runner, "contract", fixtures_dir / "path3.mtx",
                    fixtures_dir / "labels3.txt", "--out", out)
    assert result.exit_code == 0
    doc = report_of(result)
    app = doc["results"][0]
    assert app["rows_out"] == 2
    assert app["nnz_out"] == 3
    assert app["mass_in"] == app["mass_out"] == 4.0
    np.testing.assert_array_equal(load_matrix_market(out).to_dense(),
                                  [[2.0, 1.0], [1.0, 0.0]])


def test_contract_rejects_short_labels(runner, fixtures_dir, tmp_path):
    labels = tmp_path / "short.txt"
    labels.write_text("1\n1\n")
    result = invoke(runner, "contract", fixtures_dir / "path3.mtx", labels)
    assert result.exit_code == 2


# ------------------------------------------------------------ gnncheck ----


def test_gnncheck_passes_by_default(runner):
    result = invoke(runner, "gnncheck", "--n", 6, "--f", 3, "--seed", 7)
    assert result.exit_code == 0
    doc = report_of(result)
    app = doc["results"][0]
    assert app["passed"] is True
    assert app["max_rel_error"] < 1e-5


def test_gnncheck_failure_still_emits_report(runner):
    result = invoke(runner, "gnncheck", "--n", 6, "--f", 3, "--seed", 7,
                    "--tol", 1e-18)
    assert result.exit_code == 1  # verification failure, not usage error
    doc = report_of(result)
    assert doc["results"][0]["passed"] is False
    assert "error:" in result.stderr


def test_gnncheck_global_scope(runner):
    result = invoke(runner, "gnncheck", "--n", 5, "--f", 3, "--k", 2,
                    "--global-k", "--seed", 11)
    assert result.exit_code == 0


# -------------------------------------------------------------- corpus ----


def test_corpus_verify_with_empty_cache(runner, tmp_path):
    result = invoke(runner, "corpus", "verify",
                    env={"SPGEMM_CORPUS_DIR": str(tmp_path)})
    assert result.exit_code == 0
    doc = report_of(result)
    assert doc["results"] == []
    assert "nothing to verify" in result.stderr


def test_corpus_unknown_name_exits_2(runner, tmp_path):
    result = invoke(runner, "corpus", "verify", "no-such-matrix",
                    env={"SPGEMM_CORPUS_DIR": str(tmp_path)})
    assert result.exit_code == 2
    assert "unknown corpus matrix" in result.stderr


def test_corpus_fetch_skips_present_files(runner, fixtures_dir, tmp_path):
    # a file that is already in place is returned without touching the network
    staged = tmp_path / "scircuit.mtx"
    staged.write_text((fixtures_dir / "a3.mtx").read_text())
    result = invoke(runner, "corpus", "fetch", "scircuit",
                    env={"SPGEMM_CORPUS_DIR": str(tmp_path)})
    assert result.exit_code == 0
    assert "fetched scircuit" in result.stderr
