/**
 * plot --kind <latency-throughput|faults|commit-rate|memory> --in <dir[,dir...]> --out <file.svg>
 *
 * Reads the versioned benchmark CSVs from the input directories, writes one
 * deterministic SVG figure, and prints a summary table to stdout. Exit
 * codes: 0 ok, 1 no data, 2 usage or schema error.
 */

import { writeFileSync } from "node:fs";

import { SchemaError } from "./csv.js";
import {
  commitRateFigure,
  faultsFigure,
  Figure,
  latencyThroughputFigure,
  memoryFigure,
  summaryTable,
} from "./figures.js";

interface Args {
  kind: string;
  dirs: string[];
  labels: string[];
  out: string;
}

function parseArgs(argv: string[]): Args {
  const args: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key?.startsWith("--") || value === undefined) {
      throw new Error(`bad argument pair: ${key} ${value ?? ""}`);
    }
    args[key.slice(2)] = value;
  }
  for (const required of ["kind", "in", "out"]) {
    if (!(required in args)) throw new Error(`--${required} is required`);
  }
  const dirs = args["in"].split(",");
  const labels = (args["labels"] ?? "").split(",").filter((s) => s.length > 0);
  return { kind: args["kind"], dirs, labels, out: args["out"] };
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    console.error(
      "usage: plot --kind latency-throughput|faults|commit-rate|memory --in dir[,dir...] --out file.svg [--labels a,b]",
    );
    return 2;
  }
  let figure: Figure;
  try {
    switch (args.kind) {
      case "latency-throughput":
        figure = latencyThroughputFigure(args.dirs, args.labels);
        break;
      case "faults":
        figure = faultsFigure(args.dirs, args.labels);
        break;
      case "commit-rate":
        figure = commitRateFigure(args.dirs[0]);
        break;
      case "memory":
        figure = memoryFigure(args.dirs[0]);
        break;
      default:
        console.error(`unknown figure kind '${args.kind}'`);
        return 2;
    }
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 2;
    }
    throw err;
  }
  writeFileSync(args.out, figure.svg);
  process.stdout.write(summaryTable(figure.summary));
  if (figure.empty) {
    console.error("no data rows in input; wrote placeholder figure");
    return 1;
  }
  return 0;
}

import { pathToFileURL } from "node:url";

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exitCode = main(process.argv.slice(2));
}

