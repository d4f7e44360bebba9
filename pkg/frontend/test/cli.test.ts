import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { run } from "../src/cli.js";
import { CONVERGENCE_CSV, TIMESERIES_CSV } from "./fixtures.js";

let dir: string;

beforeEach(() => {
  dir = mkdtempSync(join(tmpdir(), "plotkit-"));
});

afterEach(() => {
  rmSync(dir, { recursive: true, force: true });
});

describe("cli run", () => {
  it("writes an SVG for each figure kind", () => {
    const ts = join(dir, "timeseries.csv");
    const conv = join(dir, "convergence.csv");
    writeFileSync(ts, TIMESERIES_CSV);
    writeFileSync(conv, CONVERGENCE_CSV);
    for (const [kind, input] of [
      ["bound-vs-observed", ts],
      ["margin", ts],
      ["convergence", conv],
    ] as const) {
      const out = join(dir, `${kind}.svg`);
      expect(run(["--input", input, "--kind", kind, "--output", out])).toBe(out);
      const body = readFileSync(out, "utf8");
      expect(body.length).toBeGreaterThan(500);
      expect(body).toContain("</svg>");
    }
  });

  it("re-renders byte-identical output", () => {
    const ts = join(dir, "timeseries.csv");
    writeFileSync(ts, TIMESERIES_CSV);
    const out = join(dir, "fig.svg");
    run(["--input", ts, "--kind", "margin", "--output", out]);
    const first = readFileSync(out);
    run(["--input", ts, "--kind", "margin", "--output", out]);
    expect(readFileSync(out).equals(first)).toBe(true);
  });

  it("creates missing output directories", () => {
    const ts = join(dir, "timeseries.csv");
    writeFileSync(ts, TIMESERIES_CSV);
    const out = join(dir, "nested", "deep", "fig.svg");
    run(["--input", ts, "--kind", "margin", "--output", out]);
    expect(readFileSync(out, "utf8")).toContain("</svg>");
  });

  it("requires all three flags", () => {
    expect(() => run(["--input", "x.csv"])).toThrow(/missing required flag --kind/);
    expect(() => run([])).toThrow(/missing required flag --input/);
  });

  it("rejects unknown flags", () => {
    expect(() => run(["--frobnicate"])).toThrow();
  });

  it("propagates figure errors", () => {
    const ts = join(dir, "timeseries.csv");
    writeFileSync(ts, TIMESERIES_CSV);
    expect(() =>
      run(["--input", ts, "--kind", "pie", "--output", join(dir, "x.svg")]),
    ).toThrow(/unknown figure kind/);
  });
});
