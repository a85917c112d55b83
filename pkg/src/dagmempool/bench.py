"""Benchmark harness: scenario builders, metrics CSVs, agreement checking,
and conservation accounting over simulator reports.

All CSVs start with a versioned schema line (`#schema=<name>/v1`) followed
by a column header row; the plotting frontend refuses anything else.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .netsim import CommitRecord, CrashSpec, SimConfig, SimReport, Simulation
from .types import Digest

SCHEMA_VERSION = "v1"


# ---------------------------------------------------------------------------
# Scenario builders
# ---------------------------------------------------------------------------


def common_case(seed: int, duration: float = 300.0, n: int = 4, **kw) -> SimConfig:
    """The default statistical scenario: uniform per-message delays with
    validators intermittently lagging, like a WAN node falling behind."""
    return SimConfig(
        seed=seed,
        n=n,
        duration=duration,
        delay=("uniform_jam", 0.02, 0.2),
        jam_window=2.0,
        jam_prob=0.45,
        jam_factor=(2.0, 10.0),
        **kw,
    )


def plain_case(seed: int, duration: float = 30.0, n: int = 4, **kw) -> SimConfig:
    return SimConfig(seed=seed, n=n, duration=duration, delay=("uniform", 0.02, 0.2), **kw)


def adversarial_case(seed: int, duration: float = 300.0, n: int = 4, **kw) -> SimConfig:
    return SimConfig(
        seed=seed,
        n=n,
        duration=duration,
        delay=("uniform", 0.02, 0.2),
        adversary="support_minimizer",
        **kw,
    )


def agreement_configs(count: int, base_seed: int = 0) -> List[SimConfig]:
    """Seeded mix of committee sizes, delays, drops, and 0..f crashes."""
    configs: List[SimConfig] = []
    for i in range(count):
        seed = base_seed * 100_000 + i
        n = 4 if i % 2 == 0 else 7
        f = (n - 1) // 3
        crash_count = i % (f + 1)
        crashes = tuple(
            CrashSpec(ordinal=(i + k) % n, time=0.0 if k % 2 == 0 else 8.0)
            for k in range(crash_count)
        )
        hi = 0.12 + 0.04 * (i % 4)
        configs.append(
            SimConfig(
                seed=seed,
                n=n,
                duration=38.0,
                delay=("uniform", 0.01, hi),
                drop_prob=0.02 * (i % 3),
                drop_cap=20,
                crashes=crashes,
            )
        )
    return configs


# ---------------------------------------------------------------------------
# CSV plumbing
# ---------------------------------------------------------------------------


class SchemaError(ValueError):
    """CSV carries a missing or mismatching schema line."""


def write_csv(path: str, schema: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"#schema={schema}/{SCHEMA_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def read_csv(path: str, expect_schema: str) -> Tuple[List[str], List[List[str]]]:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        want = f"#schema={expect_schema}/{SCHEMA_VERSION}"
        if first != want:
            raise SchemaError(f"{path}: expected '{want}', found '{first}'")
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader if row]


# ---------------------------------------------------------------------------
# Agreement checking
# ---------------------------------------------------------------------------


@dataclass
class AgreementResult:
    ok: bool
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def check_agreement(logs: Sequence[Sequence[CommitRecord]]) -> AgreementResult:
    """Prefix compatibility at leader and transaction granularity.

    Slower validators may have shorter logs; any divergence inside the
    common prefix is a safety violation and reports its first index.
    """
    present = [log for log in logs if log is not None]
    if len(present) < 2:
        return AgreementResult(True, "fewer than two logs")
    leaders = [[rec.leader for rec in log] for log in present]
    reference = max(leaders, key=len)
    for v, seq in enumerate(leaders):
        for i, d in enumerate(seq):
            if d != reference[i]:
                return AgreementResult(
                    False, f"leader divergence at index {i} (validator {v}): "
                    f"{d.hex()[:12]} != {reference[i].hex()[:12]}"
                )
    payloads = [[d for rec in log for d in rec.payload] for log in present]
    ref_payload = max(payloads, key=len)
    for v, seq in enumerate(payloads):
        for i, d in enumerate(seq):
            if d != ref_payload[i]:
                return AgreementResult(
                    False, f"transaction divergence at payload index {i} (validator {v})"
                )
    headers = [[d for rec in log for d in rec.headers] for log in present]
    ref_headers = max(headers, key=len)
    for v, seq in enumerate(headers):
        for i, d in enumerate(seq):
            if d != ref_headers[i]:
                return AgreementResult(
                    False, f"header divergence at emitted index {i} (validator {v})"
                )
    return AgreementResult(True)


# ---------------------------------------------------------------------------
# Conservation and latency accounting
# ---------------------------------------------------------------------------


@dataclass
class ConservationReport:
    submitted: int
    committed_unique: int
    duplicates: int
    missing_before_cutoff: int
    cutoff: float

    @property
    def clean(self) -> bool:
        return self.missing_before_cutoff == 0


def conservation(report: SimReport, cutoff: Optional[float] = None) -> ConservationReport:
    """Every transaction accepted early enough must appear in the committed
    sequence; duplicates from the re-injection race are counted, not failed.

    The default cutoff discounts the re-injection horizon: payload stranded
    in an uncertified header is only recovered once the watermark passes its
    round, gc_depth plus a few rounds later.
    """
    log = report.longest_log()
    committed_counts: Dict[Tuple[int, int], int] = {}
    for rec in log:
        for d in rec.payload:
            for txid in report.batch_txids.get(d, ()):
                committed_counts[txid] = committed_counts.get(txid, 0) + 1
    if cutoff is None:
        end = report.config.duration
        if report.config.inject is not None and report.config.inject.until > 0:
            end = min(end, report.config.inject.until)
        round_time = 0.5
        if log and log[-1].commit_round > 0:
            round_time = log[-1].time / log[-1].commit_round
        cutoff = end - (report.config.gc_depth + 30) * round_time
    crashed = {c.ordinal for c in report.config.crashes}
    submitted_in_window = [
        (txid, t)
        for txid, t, _probe in report.submitted
        if t <= cutoff and txid[0] not in crashed
    ]
    missing = sum(1 for txid, _t in submitted_in_window if txid not in committed_counts)
    duplicates = sum(c - 1 for c in committed_counts.values() if c > 1)
    return ConservationReport(
        submitted=len(report.submitted),
        committed_unique=len(committed_counts),
        duplicates=duplicates,
        missing_before_cutoff=missing,
        cutoff=cutoff,
    )


def latency_rows(report: SimReport) -> List[Tuple[int, int, float, float, int]]:
    """(client, seq, submit_s, commit_s, wave) for tracked probe transactions."""
    log = report.longest_log()
    first_commit: Dict[Digest, Tuple[float, int]] = {}
    for rec in log:
        for d in rec.payload:
            if d not in first_commit:
                first_commit[d] = (rec.time, rec.trigger_wave)
    probes = {txid: t for txid, t, probe in report.submitted if probe}
    rows = []
    for d, (commit_time, wave) in first_commit.items():
        for txid in report.batch_txids.get(d, ()):
            submit = probes.get(txid)
            if submit is not None:
                rows.append((txid[0], txid[1], submit, commit_time, wave))
    rows.sort(key=lambda r: (r[2], r[0], r[1]))
    return rows


def throughput_rows(report: SimReport) -> List[Tuple[int, int, int]]:
    """(second, committed_tx, committed_bytes) from the longest commit log."""
    log = report.longest_log()
    seen: Set[Digest] = set()
    buckets: Dict[int, List[int]] = {}
    for rec in log:
        sec = int(rec.time)
        for d in rec.payload:
            if d in seen:
                continue
            seen.add(d)
            tx = len(report.batch_txids.get(d, ()))
            size = report.batch_sizes.get(d, 0)
            cell = buckets.setdefault(sec, [0, 0])
            cell[0] += tx
            cell[1] += size
    return [(sec, c[0], c[1]) for sec, c in sorted(buckets.items())]


def wave_rows(report: SimReport, committable: Optional[Dict[int, int]] = None):
    """Per-wave outcome rows from the first live honest validator's view."""
    crashed = {c.ordinal for c in report.config.crashes}
    byz = {o for o, _ in report.config.byzantine}
    view = 0
    for o in range(report.config.n):
        if o not in crashed and o not in byz:
            view = o
            break
    rows = []
    for out in report.outcomes[view]:
        rows.append(
            (
                out.wave,
                out.leader_ordinal,
                int(out.leader_present),
                out.support,
                int(out.committed),
                (committable or {}).get(out.wave, ""),
            )
        )
    return rows


def memory_rows(report: SimReport) -> List[Tuple[int, int, int]]:
    return [(int(t), o, span) for t, o, span in report.hot_samples]


# ---------------------------------------------------------------------------
# Final-DAG structural analysis (for waves.csv and lemma checks)
# ---------------------------------------------------------------------------


def union_dag(sim: Simulation):
    """Merged header and certificate view across all validators' stores."""
    headers = {}
    certs_by_round: Dict[int, Dict[int, Digest]] = {}
    for store in sim.stores:
        headers.update(store.all_headers())
        for d, cert in store.all_certificates().items():
            certs_by_round.setdefault(cert.round, {})[
                sim.committee.ordinal_of(cert.author)
            ] = d
    return headers, certs_by_round


def committable_counts(sim: Simulation) -> Dict[int, int]:
    """Per wave: candidates whose proposal-round certificate has f+1 support
    in the union DAG. The liveness lemma demands at least f+1 everywhere."""
    headers, certs_by_round = union_dag(sim)
    threshold = sim.committee.validity
    out: Dict[int, int] = {}
    max_round = max(certs_by_round) if certs_by_round else 0
    wave = 1
    while 2 * wave + 1 <= max_round:
        proposal, vote = 2 * wave - 1, 2 * wave
        candidates = certs_by_round.get(proposal, {})
        vote_digests = certs_by_round.get(vote, {}).values()
        count = 0
        for _ordinal, leader_digest in candidates.items():
            support = 0
            for vd in vote_digests:
                h = headers.get(vd)
                if h is not None and leader_digest in h.parents:
                    support += 1
            if support >= threshold:
                count += 1
        out[wave] = count
        wave += 1
    return out


# ---------------------------------------------------------------------------
# One-call simulation benchmark
# ---------------------------------------------------------------------------


@dataclass
class BenchSummary:
    waves: int
    committed_waves: int
    commit_rate: float
    mean_latency_s: float
    p50_latency_s: float
    p99_latency_s: float
    mean_round_latency: float
    committed_tx: int
    agreement: AgreementResult
    conservation: ConservationReport


def run_sim_bench(config: SimConfig, out_dir: str) -> BenchSummary:
    """Runs one simulation and emits latency/throughput/waves/memory CSVs."""
    sim = Simulation(config)
    report = sim.run()
    committable = committable_counts(sim)

    lat = latency_rows(report)
    write_csv(
        os.path.join(out_dir, "latency.csv"),
        "latency",
        ["client", "seq", "submit_s", "commit_s", "wave"],
        [(c, s, f"{a:.6f}", f"{b:.6f}", w) for c, s, a, b, w in lat],
    )
    tput = throughput_rows(report)
    write_csv(
        os.path.join(out_dir, "throughput.csv"),
        "throughput",
        ["second", "committed_tx", "committed_bytes"],
        tput,
    )
    waves = wave_rows(report, committable)
    write_csv(
        os.path.join(out_dir, "waves.csv"),
        "waves",
        ["wave", "leader", "leader_present", "support", "committed", "committable"],
        waves,
    )
    write_csv(
        os.path.join(out_dir, "memory.csv"),
        "memory",
        ["second", "validator", "hot_rounds"],
        memory_rows(report),
    )

    agreement = check_agreement(report.commit_logs)
    cons = conservation(report)
    latencies = sorted(b - a for _c, _s, a, b, _w in lat)
    rounds_lat: List[int] = []
    for rec in report.longest_log():
        rounds_lat.extend(rec.commit_round - r for r in rec.header_rounds)
    outcomes = report.outcomes[0]
    committed_waves = sum(1 for o in outcomes if o.committed)
    return BenchSummary(
        waves=len(outcomes),
        committed_waves=committed_waves,
        commit_rate=committed_waves / len(outcomes) if outcomes else 0.0,
        mean_latency_s=sum(latencies) / len(latencies) if latencies else float("nan"),
        p50_latency_s=_pct(latencies, 0.50),
        p99_latency_s=_pct(latencies, 0.99),
        mean_round_latency=sum(rounds_lat) / len(rounds_lat) if rounds_lat else float("nan"),
        committed_tx=sum(r[1] for r in tput),
        agreement=agreement,
        conservation=cons,
    )


def _pct(sorted_values: Sequence[float], q: float) -> float:
    if not sorted_values:
        return float("nan")
    idx = min(len(sorted_values) - 1, int(q * len(sorted_values)))
    return sorted_values[idx]
