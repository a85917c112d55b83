"""An end-to-end measured simulation run: fixed-rate load, latency samples,
throughput, wave outcomes, memory profile, and the CSV artifacts the
frontend plots. Equivalent to `dagmempool run --mode sim ...`.
"""

import tempfile

from dagmempool import bench
from dagmempool.netsim import InjectSpec

out = tempfile.mkdtemp(prefix="dagmempool-bench-")
config = bench.plain_case(seed=3, duration=45.0)
config.inject = InjectSpec(rate=500, tx_size=512, until=40.0)

summary = bench.run_sim_bench(config, out)

print(f"CSV artifacts in {out}\n")
print(f"waves evaluated:     {summary.waves}")
print(f"direct commit rate:  {summary.commit_rate:.3f}")
print(f"committed tx:        {summary.committed_tx}")
print(f"p50 / p99 latency:   {summary.p50_latency_s:.2f} s / {summary.p99_latency_s:.2f} s")
print(f"mean commit latency: {summary.mean_round_latency:.2f} rounds")
print(f"agreement:           {'pass' if summary.agreement.ok else summary.agreement.detail}")
print(
    "conservation:        "
    f"missing={summary.conservation.missing_before_cutoff} "
    f"duplicates={summary.conservation.duplicates}"
)

print("\nrender figures with, e.g.:")
print(f"  node frontend/dist/cli.js --kind latency-throughput --in {out} --out fig.svg")
