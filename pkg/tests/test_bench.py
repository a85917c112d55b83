"""Bench harness: CSV schemas, agreement checker, conservation, CLI keys."""

import os

import pytest

from dagmempool import bench
from dagmempool.cli import main as cli_main
from dagmempool.netsim import CommitRecord, SimConfig, InjectSpec, make_transaction, run, tx_fields, tx_id
from dagmempool.types import Committee


def rec(leader, headers=(), payload=(), wave=1):
    return CommitRecord(
        time=1.0,
        trigger_wave=wave,
        wave=wave,
        leader=leader,
        headers=tuple(headers),
        header_rounds=tuple(1 for _ in headers),
        payload=tuple(payload),
        commit_round=3,
        gc_round=0,
    )


L1, L2, L3 = b"\x01" * 32, b"\x02" * 32, b"\x03" * 32


def test_agreement_identical_logs_pass():
    log = [rec(L1, wave=1), rec(L2, wave=2)]
    assert bench.check_agreement([log, list(log), list(log)])


def test_agreement_prefix_passes():
    log = [rec(L1, wave=1), rec(L2, wave=2), rec(L3, wave=3)]
    assert bench.check_agreement([log, log[:1], log[:2]])


def test_agreement_swapped_pair_fails_with_index():
    a = [rec(L1, wave=1), rec(L2, wave=2)]
    b = [rec(L2, wave=1), rec(L1, wave=2)]
    result = bench.check_agreement([a, b])
    assert not result.ok
    assert "index 0" in result.detail


def test_agreement_payload_divergence_fails():
    a = [rec(L1, payload=(b"\x0a" * 32, b"\x0b" * 32))]
    b = [rec(L1, payload=(b"\x0a" * 32, b"\x0c" * 32))]
    result = bench.check_agreement([a, b])
    assert not result.ok
    assert "transaction divergence" in result.detail


def test_csv_roundtrip_and_schema_guard(tmp_path):
    path = str(tmp_path / "t.csv")
    bench.write_csv(path, "throughput", ["a", "b"], [(1, 2), (3, 4)])
    header, rows = bench.read_csv(path, "throughput")
    assert header == ["a", "b"]
    assert rows == [["1", "2"], ["3", "4"]]
    with pytest.raises(bench.SchemaError):
        bench.read_csv(path, "latency")


def test_transaction_layout_roundtrip():
    tx = make_transaction(3, 99, 12.5, True, 512)
    assert len(tx) == 512
    client, seq, ts, probe = tx_fields(tx)
    assert (client, seq) == (3, 99) == tx_id(tx)
    assert probe is True
    assert abs(ts - 12.5) < 1e-5


def test_run_sim_bench_emits_all_csvs(tmp_path):
    cfg = bench.plain_case(1, duration=20.0)
    cfg.inject = InjectSpec(rate=250, until=15.0)
    summary = bench.run_sim_bench(cfg, str(tmp_path))
    for name, schema in [
        ("latency.csv", "latency"),
        ("throughput.csv", "throughput"),
        ("waves.csv", "waves"),
        ("memory.csv", "memory"),
    ]:
        header, rows = bench.read_csv(str(tmp_path / name), schema)
        assert rows, name
    assert summary.agreement.ok
    assert summary.committed_tx > 0
    assert summary.p99_latency_s >= summary.p50_latency_s > 0
    # every sample respects commit >= submit
    _, rows = bench.read_csv(str(tmp_path / "latency.csv"), "latency")
    assert all(float(r[3]) >= float(r[2]) for r in rows)


def test_throughput_tracks_submission_rate(tmp_path):
    cfg = bench.plain_case(2, duration=60.0)
    cfg.inject = InjectSpec(rate=250, until=55.0)  # 1000 tx/s across 4 validators
    summary = bench.run_sim_bench(cfg, str(tmp_path))
    _, rows = bench.read_csv(str(tmp_path / "throughput.csv"), "throughput")
    window = [int(r[1]) for r in rows if 5 <= int(r[0]) <= 50]
    mean_rate = sum(window) / 46.0  # commits are bursty: divide by wall window
    assert abs(mean_rate - 1000.0) / 1000.0 <= 0.05


def test_keys_cli(tmp_path):
    out = str(tmp_path / "keys")
    assert cli_main(["keys", "--n", "4", "--out", out]) == 0
    files = sorted(os.listdir(out))
    assert files == ["committee.json", "validator-0.key", "validator-1.key",
                     "validator-2.key", "validator-3.key"]
    committee = Committee.from_json(open(os.path.join(out, "committee.json")).read())
    assert committee.size == 4 and committee.faults == 1
    # refuses to clobber without --force
    assert cli_main(["keys", "--n", "4", "--out", out]) == 2
    assert cli_main(["keys", "--n", "4", "--out", out, "--force"]) == 0


def test_keys_cli_rejects_small_committee(tmp_path):
    assert cli_main(["keys", "--n", "3", "--out", str(tmp_path / "x")]) == 2


def test_keys_deterministic_ordinals(tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert cli_main(["keys", "--n", "4", "--seed", "9", "--out", a]) == 0
    assert cli_main(["keys", "--n", "4", "--seed", "9", "--out", b]) == 0
    ca = open(os.path.join(a, "committee.json")).read()
    cb = open(os.path.join(b, "committee.json")).read()
    assert ca == cb


def test_conservation_counts_duplicates_not_failures():
    report = run(
        SimConfig(seed=21, n=4, duration=25.0, gc_depth=10,
                  inject=InjectSpec(rate=300, until=18.0))
    )
    cons = bench.conservation(report)
    assert cons.clean
    assert cons.submitted > 0
    assert cons.committed_unique > 0
