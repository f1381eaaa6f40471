import { describe, expect, it } from "vitest";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { loadSpec, SpecError } from "../src/spec.js";
import { renderSpec } from "../src/cli.js";

function sandbox(): string {
  return mkdtempSync(path.join(tmpdir(), "figcli-"));
}

describe("loadSpec", () => {
  it("resolves table and output relative to the spec file", () => {
    const dir = sandbox();
    const specPath = path.join(dir, "f.json");
    writeFileSync(
      specPath,
      JSON.stringify({ kind: "rmse-curve", table: "in.csv", output: "out.svg" })
    );
    const spec = loadSpec(specPath);
    expect(spec.table).toBe(path.join(dir, "in.csv"));
    expect(spec.output).toBe(path.join(dir, "out.svg"));
  });

  it("rejects unknown kinds with the allowed list", () => {
    const dir = sandbox();
    const specPath = path.join(dir, "f.json");
    writeFileSync(specPath, JSON.stringify({ kind: "pie", table: "a", output: "b" }));
    expect(() => loadSpec(specPath)).toThrow(SpecError);
    expect(() => loadSpec(specPath)).toThrow(/rmse-curve/);
  });

  it("rejects missing fields by name", () => {
    const dir = sandbox();
    const specPath = path.join(dir, "f.json");
    writeFileSync(specPath, JSON.stringify({ kind: "rmse-curve", table: "a" }));
    expect(() => loadSpec(specPath)).toThrow(/"output"/);
  });
});

describe("renderSpec", () => {
  it("writes identical bytes on repeated runs", () => {
    const dir = sandbox();
    writeFileSync(
      path.join(dir, "in.csv"),
      "label,lead_time,rmse\na,0,0.1\na,1,0.2\nb,0,0.3\nb,1,0.1\n"
    );
    const specPath = path.join(dir, "f.json");
    writeFileSync(
      specPath,
      JSON.stringify({ kind: "rmse-curve", table: "in.csv", output: "out.svg", title: "t" })
    );
    renderSpec(specPath);
    const first = readFileSync(path.join(dir, "out.svg"));
    renderSpec(specPath);
    const second = readFileSync(path.join(dir, "out.svg"));
    expect(second.equals(first)).toBe(true);
    expect(first.toString()).toContain("</svg>");
  });
});
