import csv
import json
import logging
from datetime import timedelta

import pytest

from tokennet.cli import main

from conftest import DAY, TOKEN, RpcStub, addr, clique, export_rows, write_export


def planted_edges(core=5, periphery=50):
    edges = clique(range(core))
    edges += [(core + i, i % core) for i in range(periphery)]
    return edges


def star_edges():
    return [(0, i) for i in range(1, 5)]


def two_triangle_edges():
    return [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]


@pytest.fixture
def three_day_export(tmp_path):
    rows = (export_rows(planted_edges(), DAY)
            + export_rows(star_edges(), DAY + timedelta(1))
            + export_rows(two_triangle_edges(), DAY + timedelta(2)))
    return write_export(tmp_path / "export.csv", rows)


def run(*argv):
    return main(["-q", *map(str, argv)])


def read_features(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_tiny_ingest(tmp_path, capsys):
    rows = [
        f"{TOKEN},{addr(0)},{addr(1)},5,2021-04-05 10:00:00 UTC\n",
        f"{TOKEN},{addr(1)},{addr(2)},7,2021-04-05 11:00:00 UTC\n",
        f"{TOKEN},{addr(2)},{addr(2)},9,2021-04-05 12:00:00 UTC\n",
    ]
    src = write_export(tmp_path / "t.csv", rows)
    assert run("ingest", "--token", "T", "--out", tmp_path / "out", src) == 0
    out = capsys.readouterr().out
    assert "days: 1" in out and "rows_filtered_selfloop: 1" in out and "total_value: 12" in out
    doc = json.loads((tmp_path / "out/T/cache/graphs/2021-04-05.json").read_text())
    assert len(doc["edges"]) == 2 and len(doc["nodes"]) == 3


def test_empty_export_is_data_error(tmp_path, capsys):
    src = write_export(tmp_path / "empty.csv", [])
    assert run("ingest", "--token", "T", "--out", tmp_path, src) == 2
    assert "no records" in capsys.readouterr().err


def test_malformed_row_abort_and_skip(tmp_path, capsys):
    rows = export_rows([(0, 1)]) + [f"{TOKEN},{addr(0)},{addr(1)},-3,2021-04-05 00:00:00 UTC\n"]
    src = write_export(tmp_path / "bad.csv", rows)
    assert run("ingest", "--token", "T", "--out", tmp_path, src) == 2
    assert "line 3" in capsys.readouterr().err
    assert run("ingest", "--token", "T", "--out", tmp_path, "--on-error", "skip", src) == 0
    assert "rows_skipped: 1" in capsys.readouterr().out


def test_missing_cache_hint(tmp_path, capsys):
    assert run("analyze", "--token", "T", "--out", tmp_path) == 2
    assert "run `tokennet ingest` first" in capsys.readouterr().err
    assert run("report", "--token", "T", "--out", tmp_path) == 2
    assert "run `tokennet analyze` first" in capsys.readouterr().err


def test_usage_errors_exit_1(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--token", "T", "--replicates", "many"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 1
    assert run("analyze", "--token", "T", "--out", tmp_path, "--alpha", "2") == 1


def test_missing_input_is_io_error(tmp_path):
    assert run("ingest", "--token", "T", "--out", tmp_path, tmp_path / "nope.csv") == 3


def full_pipeline(src, out, *report_args, analyze_args=()):
    assert run("ingest", "--token", "T", "--out", out, src) == 0
    assert run("analyze", "--token", "T", "--out", out, "--replicates", "50", *analyze_args) == 0
    assert run("report", "--token", "T", "--out", out, "--labels", out / "labels.csv", *report_args) == 0
    return out / "T"


def test_pipeline_bundle(three_day_export, tmp_path, monkeypatch):
    monkeypatch.delenv("TOKENNET_RPC_URL", raising=False)
    d = full_pipeline(three_day_export, tmp_path / "out")
    charts = sorted(p.name for p in (d / "charts").glob("*.svg"))
    assert charts == sorted(["n_components.svg", "largest_component_ratio.svg", "modularity.svg",
                             "degree_centrality_std.svg", "n_core.svg", "avg_core_degree.svg", "correlation.svg"])
    for name in ("features.csv", "profiles.csv", "correlation.csv", "run-metadata.json"):
        assert (d / name).exists()

    rows = read_features(d / "features.csv")
    assert [r["date"] for r in rows] == ["2021-04-05", "2021-04-06", "2021-04-07"]
    planted, star, triangles = rows
    assert planted["significant"] == "true" and planted["n_core"] == "5"
    assert float(star["degree_centrality_std"]) == pytest.approx(0.3, abs=1e-12)
    assert triangles["n_components"] == "2" and float(triangles["modularity"]) == pytest.approx(0.5, abs=1e-12)
    # five-node graphs cannot reach significance with 50 replicates; filtered policy zeroes them
    assert star["n_core"] == "0" and star["n_core_raw"] == "1"

    profiles = read_features(d / "profiles.csv")
    assert {p["address"] for p in profiles} == {addr(i) for i in range(5)}
    assert all(p["kind"] == "unknown" for p in profiles)

    meta = json.loads((d / "run-metadata.json").read_text())
    assert meta["days"] == 3 and meta["algorithms"]["significance"]["null_model"] == "gnm"
    assert meta["ingest_stats"]["rows_read"] == len(planted_edges()) + 4 + 6


def test_offline_unknown_kinds_warn(three_day_export, tmp_path, caplog, monkeypatch):
    monkeypatch.delenv("TOKENNET_RPC_URL", raising=False)
    out = tmp_path / "out"
    run("ingest", "--token", "T", "--out", out, three_day_export)
    run("analyze", "--token", "T", "--out", out, "--replicates", "20")
    with caplog.at_level(logging.WARNING):
        assert main(["report", "--token", "T", "--out", str(out), "--labels", str(out / "l.csv")]) == 0
    assert "5 core address(es) left unclassified" in caplog.text


def test_rerun_is_byte_identical(three_day_export, tmp_path):
    a = full_pipeline(three_day_export, tmp_path / "a")
    b = full_pipeline(three_day_export, tmp_path / "b")
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def digest(out):
    return json.loads((out / "T" / "run-metadata.json").read_text())["config_digest"]


def test_digest_tracks_analysis_flags(three_day_export, tmp_path):
    out = tmp_path / "out"
    full_pipeline(three_day_export, out)
    first = digest(out)
    assert run("report", "--token", "T", "--out", out, "--labels", out / "labels.csv") == 0
    assert digest(out) == first
    full_pipeline(three_day_export, out, analyze_args=("--seed", "3"))
    assert digest(out) != first
    full_pipeline(three_day_export, out)
    assert digest(out) == first
    full_pipeline(three_day_export, out, "--correlation", "spearman")
    assert digest(out) != first


def test_single_day_skips_correlation(tmp_path):
    src = write_export(tmp_path / "one.csv", export_rows(two_triangle_edges()))
    d = full_pipeline(src, tmp_path / "out")
    assert not (d / "correlation.csv").exists()
    assert not (d / "charts" / "correlation.svg").exists()
    assert len(list((d / "charts").glob("*.svg"))) == 6


def test_mixed_token_export_needs_filter(tmp_path, capsys):
    other = "0x" + "8" * 40
    src = write_export(tmp_path / "mix.csv", export_rows([(0, 1)]) + export_rows([(2, 3)], token=other))
    assert run("ingest", "--token", "T", "--out", tmp_path, src) == 2
    assert "mixes tokens" in capsys.readouterr().err
    assert run("ingest", "--token", "T", "--out", tmp_path, "--token-address", other, src) == 0


def test_classify_subcommand_with_rpc(tmp_path, capsys, monkeypatch):
    stub = RpcStub({addr(0): "0x6080", addr(1): "0x"})
    try:
        monkeypatch.setenv("TOKENNET_RPC_URL", stub.url)
        labels = tmp_path / "labels.csv"
        assert run("classify", "--labels", labels, addr(0), addr(1).upper().replace("0X", "0x")) == 0
    finally:
        stub.close()
    out = capsys.readouterr().out.splitlines()
    assert out == [f"{addr(0)},CA,", f"{addr(1)},EOA,"]
    assert f"{addr(0)},,CA,rpc" in labels.read_text()


def test_classify_rejects_bad_address(tmp_path):
    assert run("classify", "--labels", tmp_path / "l.csv", "0x1234") == 2


def test_gzip_jsonl_input(tmp_path):
    import gzip
    lines = [json.dumps({"token_address": TOKEN, "from_address": addr(a), "to_address": addr(b),
                         "value": "3", "block_timestamp": "2021-04-05T01:00:00Z"}) + "\n"
             for a, b in star_edges()]
    src = tmp_path / "x.jsonl.gz"
    with gzip.open(src, "wt") as fh:
        fh.writelines(lines)
    assert run("ingest", "--token", "T", "--out", tmp_path, src) == 0
    stats = json.loads((tmp_path / "T/cache/ingest-stats.json").read_text())
    assert stats["total_value"] == "12"
