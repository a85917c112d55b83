"""Local-cluster benchmark orchestration.

Spawns one process per primary and per worker, drives fixed-rate clients
over the transaction sockets, then collects commit logs, metrics, and
on-disk batch stores to produce the same CSVs as simulation runs.
"""

from __future__ import annotations

import asyncio
import json
import os
import signal
import subprocess
import sys
import time
from dataclasses import dataclass
from typing import Dict, List, Tuple

from . import messages as msg
from .bench import (
    AgreementResult,
    check_agreement,
    latency_rows,
    memory_rows,
    throughput_rows,
    write_csv,
)
from .crypto import KeyPair
from .netsim import CommitRecord, SimConfig, SimReport, make_transaction, tx_id
from .store import DiskBackend
from .transport import TAG_HELLO, frame
from .types import Batch, Committee
from collections import Counter


def generate_committee(n: int, workers: int, seed: int, base_port: int) -> Tuple[Committee, List[KeyPair]]:
    pairs = sorted(
        (KeyPair.from_seed(f"cluster:{seed}:{i}".encode()) for i in range(n)),
        key=lambda kp: kp.public,
    )
    entries = []
    for i, kp in enumerate(pairs):
        base = base_port + i * (workers + 1)
        entries.append(
            (
                kp.public,
                f"127.0.0.1:{base}",
                [f"127.0.0.1:{base + 1 + w}" for w in range(workers)],
            )
        )
    return Committee.from_entries(entries), pairs


def write_keys(out_dir: str, committee: Committee, pairs: List[KeyPair], force: bool = False) -> None:
    os.makedirs(out_dir, exist_ok=True)
    committee_path = os.path.join(out_dir, "committee.json")
    if os.path.exists(committee_path) and not force:
        raise FileExistsError(f"{committee_path} exists; use --force to overwrite")
    by_key = {kp.public: kp for kp in pairs}
    for a in committee.authorities:
        path = os.path.join(out_dir, f"validator-{a.ordinal}.key")
        if os.path.exists(path) and not force:
            raise FileExistsError(f"{path} exists; use --force to overwrite")
        by_key[a.public_key].save(path)
    with open(committee_path, "w", encoding="utf-8") as fh:
        fh.write(committee.to_json())


@dataclass
class ClusterProcs:
    procs: List[subprocess.Popen]

    def terminate(self) -> None:
        for p in self.procs:
            if p.poll() is None:
                p.send_signal(signal.SIGTERM)
        deadline = time.time() + 10
        for p in self.procs:
            try:
                p.wait(timeout=max(0.1, deadline - time.time()))
            except subprocess.TimeoutExpired:
                p.kill()

    def dead(self) -> int:
        return sum(1 for p in self.procs if p.poll() is not None)


def spawn_cluster(out_dir: str, committee_path: str, key_dir: str, workers: int, seed: int, gc_depth: int) -> ClusterProcs:
    committee = Committee.from_json(open(committee_path, encoding="utf-8").read())
    procs: List[subprocess.Popen] = []
    logs = os.path.join(out_dir, "proc-logs")
    os.makedirs(logs, exist_ok=True)

    def launch(args: List[str], name: str) -> None:
        stdout = open(os.path.join(logs, f"{name}.log"), "w")
        procs.append(
            subprocess.Popen(
                [sys.executable, "-m", "dagmempool.cli", "node"] + args,
                stdout=stdout,
                stderr=subprocess.STDOUT,
            )
        )

    for a in committee.authorities:
        key = os.path.join(key_dir, f"validator-{a.ordinal}.key")
        common = ["--keys", key, "--committee", committee_path, "--out", out_dir,
                  "--seed", str(seed), "--gc-depth", str(gc_depth)]
        launch(["--role", "primary"] + common, f"primary-{a.ordinal}")
        for w in range(workers):
            launch(["--role", "worker", "--worker-id", str(w)] + common, f"worker-{a.ordinal}-{w}")
    return ClusterProcs(procs)


# ---------------------------------------------------------------------------
# Fixed-rate clients
# ---------------------------------------------------------------------------


async def _wait_port(addr: str, timeout: float = 15.0) -> None:
    host, port = addr.rsplit(":", 1)
    deadline = time.time() + timeout
    while True:
        try:
            _r, w = await asyncio.open_connection(host, int(port))
            w.close()
            return
        except OSError:
            if time.time() > deadline:
                raise TimeoutError(f"{addr} never came up")
            await asyncio.sleep(0.1)


async def _client(
    addr: str,
    client_id: int,
    rate: float,
    tx_size: int,
    duration: float,
    track_every: int,
    submitted: List[Tuple[Tuple[int, int], float, bool]],
) -> None:
    host, port = addr.rsplit(":", 1)
    reader, writer = await asyncio.open_connection(host, int(port))
    writer.write(frame(bytes((TAG_HELLO,)) + b"\x11" * 32))  # client pseudo-identity
    seq = 0
    carry = 0.0
    tick = 0.02
    start = time.time()
    while time.time() - start < duration:
        carry += rate * tick
        count = int(carry)
        carry -= count
        now = time.time()
        for _ in range(count):
            probe = track_every > 0 and seq % track_every == 0
            tx = make_transaction(client_id, seq, now, probe, tx_size)
            submitted.append(((client_id, seq), now, probe))
            writer.write(frame(msg.TxSubmit(tx).encode()))
            seq += 1
        await writer.drain()
        await asyncio.sleep(tick)
    writer.close()


async def drive_clients(
    committee: Committee,
    rate: float,
    tx_size: int,
    duration: float,
    track_every: int = 100,
) -> List[Tuple[Tuple[int, int], float, bool]]:
    """One client per worker, equal rate split, returns the submission log."""
    addrs = [w for a in committee.authorities for w in a.worker_addrs]
    for addr in addrs:
        await _wait_port(addr)
    for a in committee.authorities:
        await _wait_port(a.primary_addr)
    submitted: List[Tuple[Tuple[int, int], float, bool]] = []
    per_client = rate / len(addrs)
    tasks = [
        asyncio.ensure_future(
            _client(addr, i, per_client, tx_size, duration, track_every, submitted)
        )
        for i, addr in enumerate(addrs)
    ]
    await asyncio.gather(*tasks)
    return submitted


# ---------------------------------------------------------------------------
# Collection
# ---------------------------------------------------------------------------


def parse_commit_log(path: str) -> List[CommitRecord]:
    out: List[CommitRecord] = []
    if not os.path.exists(path):
        return out
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            doc = json.loads(line)
            out.append(
                CommitRecord(
                    time=doc["t"],
                    trigger_wave=doc["trigger"],
                    wave=doc["wave"],
                    leader=bytes.fromhex(doc["leader"]),
                    headers=tuple(bytes.fromhex(h) for h in doc["headers"]),
                    header_rounds=tuple(doc["header_rounds"]),
                    payload=tuple(bytes.fromhex(d) for d in doc["payload"]),
                    commit_round=doc["commit_round"],
                    gc_round=doc["gc"],
                )
            )
    return out


def collect_cluster_report(
    out_dir: str,
    committee: Committee,
    workers: int,
    duration: float,
    submitted: List[Tuple[Tuple[int, int], float, bool]],
    start_time: float,
) -> SimReport:
    n = committee.size
    commit_logs = [
        parse_commit_log(os.path.join(out_dir, f"commits-{i}.jsonl")) for i in range(n)
    ]
    batch_txids: Dict[bytes, List[Tuple[int, int]]] = {}
    batch_sizes: Dict[bytes, int] = {}
    for i in range(n):
        for w in range(workers):
            store_dir = os.path.join(out_dir, f"store-{i}-worker{w}")
            if not os.path.isdir(store_dir):
                continue
            backend = DiskBackend(store_dir, durable=False)
            for key in backend.keys("batches"):
                if key in batch_txids:
                    continue
                raw = backend.get("batches", key)
                if raw is None:
                    continue
                batch = Batch.decode(raw)
                batch_txids[key] = [tx_id(t) for t in batch.transactions]
                batch_sizes[key] = batch.size_bytes()
            backend.close()
    hot_samples: List[Tuple[float, int, int]] = []
    for i in range(n):
        path = os.path.join(out_dir, f"metrics-{i}-primary.jsonl")
        if not os.path.exists(path):
            continue
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                doc = json.loads(line)
                if doc.get("type") == "hot":
                    hot_samples.append((doc["t"] - start_time, i, doc["hot_rounds"]))
    config = SimConfig(seed=0, n=n, workers=workers, duration=duration)
    return SimReport(
        config=config,
        commit_logs=commit_logs,
        outcomes=[[] for _ in range(n)],
        census=Counter(),
        census_bytes=Counter(),
        hot_samples=hot_samples,
        submitted=submitted,
        batch_txids=batch_txids,
        batch_sizes=batch_sizes,
        cert_availability=[],
        equivocations=0,
        final_rounds=[],
    )


def run_cluster_bench(
    out_dir: str,
    nodes: int,
    workers: int,
    rate: float,
    tx_size: int,
    duration: float,
    seed: int,
    gc_depth: int = 50,
    base_port: int = 7400,
) -> Tuple[AgreementResult, dict]:
    """End-to-end local cluster run; returns the agreement verdict and summary."""
    os.makedirs(out_dir, exist_ok=True)
    committee, pairs = generate_committee(nodes, workers, seed, base_port)
    write_keys(out_dir, committee, pairs, force=True)
    committee_path = os.path.join(out_dir, "committee.json")
    procs = spawn_cluster(out_dir, committee_path, out_dir, workers, seed, gc_depth)
    start_time = time.time()
    try:
        submitted = asyncio.run(drive_clients(committee, rate, tx_size, duration))
        time.sleep(2.0)  # drain in-flight commits
        died = procs.dead()
    finally:
        procs.terminate()
    time.sleep(0.5)

    # Normalize wall-clock stamps onto the run-relative axis used by the CSVs.
    submitted = [(txid, t - start_time, probe) for txid, t, probe in submitted]
    report = collect_cluster_report(out_dir, committee, workers, duration, submitted, start_time)
    for log in report.commit_logs:
        for rec in log:
            rec.time -= start_time
    lat = latency_rows(report)
    write_csv(
        os.path.join(out_dir, "latency.csv"),
        "latency",
        ["client", "seq", "submit_s", "commit_s", "wave"],
        [(c, s, f"{a:.6f}", f"{b:.6f}", w) for c, s, a, b, w in lat],
    )
    write_csv(
        os.path.join(out_dir, "throughput.csv"),
        "throughput",
        ["second", "committed_tx", "committed_bytes"],
        throughput_rows(report),
    )
    write_csv(
        os.path.join(out_dir, "memory.csv"),
        "memory",
        ["second", "validator", "hot_rounds"],
        memory_rows(report),
    )
    waves_path = os.path.join(out_dir, "waves.csv")
    wave_rows = _cluster_wave_rows(out_dir)
    write_csv(
        waves_path,
        "waves",
        ["wave", "leader", "leader_present", "support", "committed", "committable"],
        wave_rows,
    )

    agreement = check_agreement(report.commit_logs)
    latencies = sorted(b - a for _c, _s, a, b, _w in lat)
    committed_tx = sum(len(report.batch_txids.get(d, ())) for d in {
        d for rec in report.longest_log() for d in rec.payload
    })
    summary = {
        "died": died,
        "committed_tx": committed_tx,
        "submitted_tx": len(submitted),
        "samples": len(lat),
        "p50_latency_s": latencies[len(latencies) // 2] if latencies else None,
        "p99_latency_s": latencies[min(len(latencies) - 1, int(0.99 * len(latencies)))] if latencies else None,
        "agreement": agreement.ok,
    }
    return agreement, summary


def _cluster_wave_rows(out_dir: str):
    path = os.path.join(out_dir, "metrics-0-primary.jsonl")
    rows = []
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                doc = json.loads(line)
                if doc.get("type") == "wave":
                    rows.append(
                        (
                            doc["wave"],
                            doc["leader"],
                            int(doc["leader_present"]),
                            doc["support"],
                            int(doc["committed"]),
                            "",
                        )
                    )
    return rows
