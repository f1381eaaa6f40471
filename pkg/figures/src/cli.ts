#!/usr/bin/env node
/** kaf-render: turn harness tables into SVG figures. */
import { writeFileSync } from "node:fs";
import { loadSpec, SpecError } from "./spec.js";
import { readTable, MissingColumnError } from "./table.js";
import { rmseCurve, trajectoryOverlay, denoiseOverlay } from "./figures.js";

export function renderSpec(specPath: string): string {
  const spec = loadSpec(specPath);
  const table = readTable(spec.table);
  const labels = { x: spec.xlabel, y: spec.ylabel };
  let svg: string;
  switch (spec.kind) {
    case "rmse-curve":
      svg = rmseCurve(table, labels, spec.title, spec.table);
      break;
    case "trajectory-overlay":
      svg = trajectoryOverlay(table, labels, spec.title, spec.table);
      break;
    case "denoise-overlay":
      svg = denoiseOverlay(table, labels, spec.title, spec.table);
      break;
  }
  writeFileSync(spec.output, svg);
  return spec.output;
}

function usage(): void {
  process.stderr.write("usage: kaf-render render <figure-spec.json> [...]\n");
}

export function main(argv: string[]): number {
  if (argv.length < 2 || argv[0] !== "render") {
    usage();
    return 2;
  }
  for (const specPath of argv.slice(1)) {
    try {
      const out = renderSpec(specPath);
      process.stdout.write(`${out}\n`);
    } catch (e) {
      if (e instanceof SpecError || e instanceof MissingColumnError) {
        process.stderr.write(`${e.message}\n`);
        return 1;
      }
      throw e;
    }
  }
  return 0;
}

// invoked directly (not imported by tests)
if (process.argv[1] && /cli\.js$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
