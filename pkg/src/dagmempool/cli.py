"""Command-line interface: key generation, benchmark runs, agreement checks,
and the internal node entry point used by cluster mode.

    dagmempool keys --n 4 --out keys/
    dagmempool run --mode sim --nodes 4 --rate 1000 --duration 60 --seed 1 --out out/
    dagmempool run --mode cluster --nodes 4 --workers 1 --rate 10000 --duration 60 --out out/
    dagmempool check --logs out/

Exit code 0 means the run completed and the agreement check passed.
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import os
import sys

from . import bench
from .cluster import (
    generate_committee,
    parse_commit_log,
    run_cluster_bench,
    write_keys,
)
from .crypto import KeyPair
from .netsim import CrashSpec, InjectSpec
from .types import Committee


def _cmd_keys(args) -> int:
    if args.n < 4:
        print("error: committee needs at least 4 validators", file=sys.stderr)
        return 2
    committee, pairs = generate_committee(args.n, args.workers, args.seed, args.base_port)
    try:
        write_keys(args.out, committee, pairs, force=args.force)
    except FileExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.n} key files and committee.json to {args.out}")
    return 0


def _cmd_run(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.mode == "sim":
        if args.scenario == "common":
            config = bench.common_case(args.seed, duration=args.duration, n=args.nodes)
        elif args.scenario == "adversarial":
            config = bench.adversarial_case(args.seed, duration=args.duration, n=args.nodes)
        else:
            config = bench.plain_case(args.seed, duration=args.duration, n=args.nodes)
        config.workers = args.workers
        if args.faults:
            config.crashes = tuple(CrashSpec(ordinal=k, time=0.0) for k in range(args.faults))
        if args.rate > 0:
            config.inject = InjectSpec(
                rate=args.rate / args.nodes,
                tx_size=args.tx_size,
                until=max(0.0, args.duration - 5.0),
            )
        summary = bench.run_sim_bench(config, args.out)
        print(f"waves:            {summary.waves}")
        print(f"commit rate:      {summary.commit_rate:.3f}")
        print(f"committed tx:     {summary.committed_tx}")
        print(f"p50 latency:      {summary.p50_latency_s:.3f} s")
        print(f"p99 latency:      {summary.p99_latency_s:.3f} s")
        print(f"mean round lat.:  {summary.mean_round_latency:.2f} rounds")
        print(f"agreement:        {'pass' if summary.agreement.ok else 'FAIL ' + summary.agreement.detail}")
        print(f"conservation:     missing={summary.conservation.missing_before_cutoff} "
              f"duplicates={summary.conservation.duplicates}")
        return 0 if summary.agreement.ok else 1
    else:
        agreement, summary = run_cluster_bench(
            out_dir=args.out,
            nodes=args.nodes,
            workers=args.workers,
            rate=args.rate,
            tx_size=args.tx_size,
            duration=args.duration,
            seed=args.seed,
            base_port=args.base_port,
        )
        for key, value in summary.items():
            print(f"{key}: {value}")
        ok = agreement.ok and summary["died"] <= args.faults
        if not agreement.ok:
            print(f"agreement FAILED: {agreement.detail}")
        return 0 if ok else 1


def _cmd_check(args) -> int:
    logs = []
    for name in sorted(os.listdir(args.logs)):
        if name.startswith("commits-") and name.endswith(".jsonl"):
            logs.append(parse_commit_log(os.path.join(args.logs, name)))
    if len(logs) < 2:
        print("error: need at least two commit logs", file=sys.stderr)
        return 2
    result = bench.check_agreement(logs)
    if result.ok:
        print(f"agreement: pass ({len(logs)} logs)")
        return 0
    print(f"agreement: FAIL — {result.detail}")
    return 1


def _cmd_node(args) -> int:
    from .node import run_primary, run_worker

    keypair = KeyPair.load(args.keys)
    with open(args.committee, encoding="utf-8") as fh:
        committee = Committee.from_json(fh.read())
    coin_seed = f"coin:{args.seed}".encode()
    if args.role == "primary":
        coro = run_primary(keypair, committee, args.out, coin_seed, gc_depth=args.gc_depth)
    else:
        coro = run_worker(keypair, committee, args.out, args.worker_id)
    asyncio.run(coro)
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("DAGMEMPOOL_LOG", "WARNING"))
    parser = argparse.ArgumentParser(prog="dagmempool")
    sub = parser.add_subparsers(dest="command", required=True)

    p_keys = sub.add_parser("keys", help="generate validator keys and a committee file")
    p_keys.add_argument("--n", type=int, required=True)
    p_keys.add_argument("--workers", type=int, default=1)
    p_keys.add_argument("--seed", type=int, default=0)
    p_keys.add_argument("--base-port", type=int, default=7400)
    p_keys.add_argument("--out", required=True)
    p_keys.add_argument("--force", action="store_true")
    p_keys.set_defaults(fn=_cmd_keys)

    p_run = sub.add_parser("run", help="run a benchmark (simulation or local cluster)")
    p_run.add_argument("--mode", choices=["sim", "cluster"], default="sim")
    p_run.add_argument("--nodes", type=int, default=4)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--rate", type=float, default=1000.0, help="total tx/s")
    p_run.add_argument("--tx-size", type=int, default=512)
    p_run.add_argument("--duration", type=float, default=300.0)
    p_run.add_argument("--faults", type=int, default=0)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--scenario", choices=["plain", "common", "adversarial"], default="plain")
    p_run.add_argument("--base-port", type=int, default=7400)
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(fn=_cmd_run)

    p_check = sub.add_parser("check", help="check commit logs for agreement")
    p_check.add_argument("--logs", required=True)
    p_check.set_defaults(fn=_cmd_check)

    p_node = sub.add_parser("node", help="run one validator role (internal)")
    p_node.add_argument("--role", choices=["primary", "worker"], required=True)
    p_node.add_argument("--keys", required=True)
    p_node.add_argument("--committee", required=True)
    p_node.add_argument("--out", required=True)
    p_node.add_argument("--worker-id", type=int, default=0)
    p_node.add_argument("--seed", type=int, default=0)
    p_node.add_argument("--gc-depth", type=int, default=50)
    p_node.set_defaults(fn=_cmd_node)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
