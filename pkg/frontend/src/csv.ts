/**
 * Schema-checked reader for the benchmark CSVs.
 *
 * Every file starts with a `#schema=<name>/v1` line followed by a column
 * header row. Anything else is refused with an explicit version error so
 * figures are never silently rendered from mismatched data.
 */

import { readFileSync } from "node:fs";

export const SCHEMA_VERSION = "v1";

export class SchemaError extends Error {}

export interface Table {
  schema: string;
  columns: string[];
  rows: string[][];
}

export function readTable(path: string, expectSchema: string): Table {
  const text = readFileSync(path, "utf-8");
  const lines = text.split(/\r?\n/);
  const want = `#schema=${expectSchema}/${SCHEMA_VERSION}`;
  if (lines.length === 0 || lines[0].trim() !== want) {
    throw new SchemaError(
      `${path}: expected schema line '${want}', found '${lines[0] ?? ""}'`,
    );
  }
  if (lines.length < 2 || lines[1].trim() === "") {
    throw new SchemaError(`${path}: missing column header row`);
  }
  const columns = splitCsv(lines[1]);
  const rows: string[][] = [];
  for (const line of lines.slice(2)) {
    if (line.trim() === "") continue;
    rows.push(splitCsv(line));
  }
  return { schema: expectSchema, columns, rows };
}

export function column(table: Table, name: string): string[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`column '${name}' not in ${table.columns.join(",")}`);
  }
  return table.rows.map((r) => r[idx]);
}

export function numericColumn(table: Table, name: string): number[] {
  return column(table, name).map((v) => Number(v));
}

/** The benchmark CSVs never quote fields, so a plain split is exact. */
function splitCsv(line: string): string[] {
  return line.split(",").map((s) => s.trim());
}
