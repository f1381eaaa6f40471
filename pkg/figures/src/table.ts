/**
 * Reading the harness's delimited-text tables.
 *
 * Tables are comma-separated with a single header row and no quoting; the
 * harness never emits embedded commas. Values stay as strings here and the
 * figure code converts the numeric columns it needs.
 */
import { readFileSync } from "node:fs";

export interface Table {
  columns: string[];
  rows: string[][];
}

export class MissingColumnError extends Error {
  constructor(public column: string, public path: string) {
    super(`table ${path} has no column "${column}"`);
    this.name = "MissingColumnError";
  }
}

export function readTable(path: string): Table {
  const text = readFileSync(path, "utf8");
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    return { columns: [], rows: [] };
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  return { columns, rows };
}

/** Column values by name; throws MissingColumnError when absent. */
export function column(table: Table, name: string, path = "<table>"): string[] {
  const i = table.columns.indexOf(name);
  if (i < 0) throw new MissingColumnError(name, path);
  return table.rows.map((r) => r[i] ?? "");
}

export function numericColumn(table: Table, name: string, path = "<table>"): number[] {
  return column(table, name, path).map(Number);
}

/**
 * Split rows into series keyed by one column, preserving first-seen key
 * order so the rendering order is the emission order.
 */
export function groupBy(table: Table, key: string, path = "<table>"): Map<string, string[][]> {
  const i = table.columns.indexOf(key);
  if (i < 0) throw new MissingColumnError(key, path);
  const groups = new Map<string, string[][]>();
  for (const row of table.rows) {
    const k = row[i];
    const g = groups.get(k);
    if (g) g.push(row);
    else groups.set(k, [row]);
  }
  return groups;
}
