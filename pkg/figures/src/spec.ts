/** Figure-spec files: a small JSON description of one figure to render. */
import { readFileSync } from "node:fs";
import * as path from "node:path";

export const KINDS = ["rmse-curve", "trajectory-overlay", "denoise-overlay"] as const;
export type FigureKind = (typeof KINDS)[number];

export interface FigureSpec {
  kind: FigureKind;
  /** Input table, resolved relative to the spec file. */
  table: string;
  /** Output SVG path, resolved relative to the spec file. */
  output: string;
  title?: string;
  xlabel?: string;
  ylabel?: string;
}

export class SpecError extends Error {
  constructor(message: string, specPath: string) {
    super(`${specPath}: ${message}`);
    this.name = "SpecError";
  }
}

function requireString(obj: Record<string, unknown>, key: string, specPath: string): string {
  const v = obj[key];
  if (typeof v !== "string" || v.length === 0) {
    throw new SpecError(`missing or non-string field "${key}"`, specPath);
  }
  return v;
}

export function loadSpec(specPath: string): FigureSpec {
  let raw: string;
  try {
    raw = readFileSync(specPath, "utf8");
  } catch {
    throw new SpecError("cannot read spec file", specPath);
  }
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch (e) {
    throw new SpecError(`invalid JSON (${(e as Error).message})`, specPath);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new SpecError("spec must be a JSON object", specPath);
  }
  const rec = obj as Record<string, unknown>;
  const kind = requireString(rec, "kind", specPath);
  if (!(KINDS as readonly string[]).includes(kind)) {
    throw new SpecError(`unknown kind "${kind}" (expected one of: ${KINDS.join(", ")})`, specPath);
  }
  const dir = path.dirname(specPath);
  const spec: FigureSpec = {
    kind: kind as FigureKind,
    table: path.resolve(dir, requireString(rec, "table", specPath)),
    output: path.resolve(dir, requireString(rec, "output", specPath)),
  };
  for (const key of ["title", "xlabel", "ylabel"] as const) {
    if (rec[key] !== undefined) {
      if (typeof rec[key] !== "string") throw new SpecError(`field "${key}" must be a string`, specPath);
      spec[key] = rec[key] as string;
    }
  }
  return spec;
}
