/**
 * The four benchmark figures and their text summaries.
 *
 * Each builder is a pure function of the parsed CSV tables; the returned
 * summary numbers are computed from the same rows the figure draws, so the
 * table and the picture can never disagree.
 */

import path from "node:path";

import { Table, numericColumn, readTable } from "./csv.js";
import { Chart, extent, linearScale, MARGIN, WIDTH, HEIGHT } from "./svg.js";

export const COMMIT_RATE_REFERENCE = 0.74;

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

export interface Figure {
  svg: string;
  summary: Record<string, number | string>;
  empty: boolean;
}

export function percentile(sorted: number[], q: number): number {
  if (sorted.length === 0) return NaN;
  const idx = Math.min(sorted.length - 1, Math.floor(q * sorted.length));
  return sorted[idx];
}

function meanThroughput(tput: Table): { mean: number; peak: number } {
  const seconds = numericColumn(tput, "second");
  const tx = numericColumn(tput, "committed_tx");
  if (seconds.length === 0) return { mean: 0, peak: 0 };
  const span = Math.max(...seconds) - Math.min(...seconds) + 1;
  const total = tx.reduce((a, b) => a + b, 0);
  return { mean: total / span, peak: Math.max(...tx) };
}

export function latencyThroughputFigure(dirs: string[], labels: string[]): Figure {
  const chart = new Chart("Latency vs. throughput", "committed tx/s", "latency (s)");
  const points: Array<{ label: string; tput: number; p50: number; p99: number }> = [];
  for (let i = 0; i < dirs.length; i++) {
    const lat = readTable(path.join(dirs[i], "latency.csv"), "latency");
    const tput = readTable(path.join(dirs[i], "throughput.csv"), "throughput");
    const submit = numericColumn(lat, "submit_s");
    const commit = numericColumn(lat, "commit_s");
    const latencies = submit.map((s, j) => commit[j] - s).sort((a, b) => a - b);
    const { mean } = meanThroughput(tput);
    if (latencies.length === 0) continue;
    points.push({
      label: labels[i] ?? dirs[i],
      tput: mean,
      p50: percentile(latencies, 0.5),
      p99: percentile(latencies, 0.99),
    });
  }
  if (points.length === 0) {
    chart.note("no data");
    return { svg: chart.render(), summary: {}, empty: true };
  }
  const a = chart.plotArea;
  const x = linearScale(extent(points.map((p) => p.tput)), [a.x0, a.x1]);
  const y = linearScale(
    [0, Math.max(...points.map((p) => p.p99)) * 1.1],
    [a.y0, a.y1],
  );
  chart.axes(x, y);
  points.sort((p, q) => p.tput - q.tput);
  chart.polyline(points.map((p) => p.tput), points.map((p) => p.p50), x, y, COLORS[0]);
  chart.dots(points.map((p) => p.tput), points.map((p) => p.p50), x, y, COLORS[0]);
  chart.polyline(points.map((p) => p.tput), points.map((p) => p.p99), x, y, COLORS[1]);
  chart.dots(points.map((p) => p.tput), points.map((p) => p.p99), x, y, COLORS[1]);
  chart.legend([["p50 latency", COLORS[0]], ["p99 latency", COLORS[1]]]);
  const best = points[points.length - 1];
  return {
    svg: chart.render(),
    summary: {
      runs: points.length,
      peak_throughput_tx_s: round3(best.tput),
      p50_latency_s: round3(best.p50),
      p99_latency_s: round3(best.p99),
    },
    empty: false,
  };
}

export function faultsFigure(dirs: string[], labels: string[]): Figure {
  const chart = new Chart("Throughput under faults", "configuration", "committed tx/s");
  const bars: Array<{ label: string; mean: number }> = [];
  for (let i = 0; i < dirs.length; i++) {
    const tput = readTable(path.join(dirs[i], "throughput.csv"), "throughput");
    const { mean } = meanThroughput(tput);
    bars.push({ label: labels[i] ?? dirs[i], mean });
  }
  if (bars.length === 0 || bars.every((b) => b.mean === 0)) {
    chart.note("no data");
    return { svg: chart.render(), summary: {}, empty: true };
  }
  const a = chart.plotArea;
  const x = linearScale([-0.5, bars.length - 0.5], [a.x0, a.x1]);
  const y = linearScale([0, Math.max(...bars.map((b) => b.mean)) * 1.15], [a.y0, a.y1]);
  chart.axes(x, y, Math.max(bars.length - 1, 1));
  chart.bars(bars.map((_, i) => i), bars.map((b) => b.mean), x, y, 46, COLORS[0]);
  const summary: Record<string, number | string> = {};
  bars.forEach((b, i) => (summary[`throughput_${b.label}`] = round3(b.mean)));
  return { svg: chart.render(), summary, empty: false };
}

export function commitRateFigure(dir: string, windowSize = 50): Figure {
  const chart = new Chart("Per-wave commit rate", "wave", "commit frequency");
  const waves = readTable(path.join(dir, "waves.csv"), "waves");
  const waveIds = numericColumn(waves, "wave");
  const committed = numericColumn(waves, "committed");
  if (waveIds.length === 0) {
    chart.note("no data");
    return { svg: chart.render(), summary: {}, empty: true };
  }
  const buckets: Array<{ mid: number; rate: number }> = [];
  for (let start = 0; start < waveIds.length; start += windowSize) {
    const slice = committed.slice(start, start + windowSize);
    const ids = waveIds.slice(start, start + windowSize);
    buckets.push({
      mid: (ids[0] + ids[ids.length - 1]) / 2,
      rate: slice.reduce((s, v) => s + v, 0) / slice.length,
    });
  }
  const a = chart.plotArea;
  const x = linearScale([Math.min(...waveIds), Math.max(...waveIds)], [a.x0, a.x1]);
  const y = linearScale([0, 1], [a.y0, a.y1]);
  chart.axes(x, y);
  const barWidth = Math.max(8, (a.x1 - a.x0) / buckets.length - 6);
  chart.bars(buckets.map((b) => b.mid), buckets.map((b) => b.rate), x, y, barWidth, COLORS[2]);
  chart.hline(COMMIT_RATE_REFERENCE, y, COLORS[1], `reference ${COMMIT_RATE_REFERENCE}`);
  const overall = committed.reduce((s, v) => s + v, 0) / committed.length;
  return {
    svg: chart.render(),
    summary: {
      waves: waveIds.length,
      commit_rate: round3(overall),
      reference: COMMIT_RATE_REFERENCE,
    },
    empty: false,
  };
}

export function memoryFigure(dir: string): Figure {
  const chart = new Chart("Hot-state rounds over time", "time (s)", "rounds in hot state");
  const mem = readTable(path.join(dir, "memory.csv"), "memory");
  const seconds = numericColumn(mem, "second");
  const validators = numericColumn(mem, "validator");
  const spans = numericColumn(mem, "hot_rounds");
  if (seconds.length === 0) {
    chart.note("no data");
    return { svg: chart.render(), summary: {}, empty: true };
  }
  const a = chart.plotArea;
  const x = linearScale(extent(seconds, 0), [a.x0, a.x1]);
  const y = linearScale([0, Math.max(...spans) * 1.15], [a.y0, a.y1]);
  chart.axes(x, y);
  const ids = [...new Set(validators)].sort((p, q) => p - q);
  const legend: Array<[string, string]> = [];
  ids.forEach((v, i) => {
    const xs: number[] = [];
    const ys: number[] = [];
    for (let j = 0; j < seconds.length; j++) {
      if (validators[j] === v) {
        xs.push(seconds[j]);
        ys.push(spans[j]);
      }
    }
    chart.polyline(xs, ys, x, y, COLORS[i % COLORS.length]);
    legend.push([`validator ${v}`, COLORS[i % COLORS.length]]);
  });
  chart.legend(legend);
  return {
    svg: chart.render(),
    summary: {
      samples: seconds.length,
      max_hot_rounds: Math.max(...spans),
      validators: ids.length,
    },
    empty: false,
  };
}

export function summaryTable(summary: Record<string, number | string>): string {
  const keys = Object.keys(summary);
  if (keys.length === 0) return "(no data)\n";
  const width = Math.max(...keys.map((k) => k.length));
  return keys.map((k) => `${k.padEnd(width)}  ${summary[k]}`).join("\n") + "\n";
}

function round3(v: number): number {
  return Math.round(v * 1000) / 1000;
}
