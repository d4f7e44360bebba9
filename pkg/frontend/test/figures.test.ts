import { describe, expect, it } from "vitest";

import { parseNumericCsv } from "../src/csv.js";
import { FIGURE_KINDS, renderFigure } from "../src/figures.js";
import { CONVERGENCE_CSV, SIGNED_CONVERGENCE_CSV, TIMESERIES_CSV } from "./fixtures.js";

const countMatches = (svg: string, re: RegExp) => (svg.match(re) ?? []).length;

describe("renderFigure", () => {
  it("renders bound-vs-observed with four series", () => {
    const svg = renderFigure("bound-vs-observed", parseNumericCsv(TIMESERIES_CSV));
    expect(svg.startsWith('<svg xmlns="http://www.w3.org/2000/svg"')).toBe(true);
    expect(countMatches(svg, /class="series"/g)).toBe(4);
    expect(svg).toContain("observed (u)");
    expect(svg).toContain("bound B (v)");
  });

  it("renders margin with a zero rule", () => {
    const svg = renderFigure("margin", parseNumericCsv(TIMESERIES_CSV));
    expect(countMatches(svg, /class="series"/g)).toBe(2);
    expect(svg).toContain('stroke-dasharray="5,4"'); // the observed/bound crossing line
  });

  it("renders convergence with one series and point markers per metric", () => {
    const svg = renderFigure("convergence", parseNumericCsv(CONVERGENCE_CSV));
    expect(countMatches(svg, /class="series"/g)).toBe(3);
    expect(countMatches(svg, /<circle /g)).toBe(9);
  });

  it("annotates fitted orders on log-log convergence plots", () => {
    const svg = renderFigure("convergence", parseNumericCsv(CONVERGENCE_CSV));
    // square residual drops ~4x per halving -> order near 2
    expect(svg).toMatch(/square_residual \(order ~ 1\.9\d\)/);
  });

  it("falls back to a linear axis for signed convergence metrics", () => {
    const svg = renderFigure("convergence", parseNumericCsv(SIGNED_CONVERGENCE_CSV));
    expect(svg).toContain("worst_margin");
    expect(svg).not.toMatch(/order ~/);
    expect(svg).not.toContain("NaN");
  });

  it("never emits NaN coordinates", () => {
    for (const kind of ["bound-vs-observed", "margin"]) {
      expect(renderFigure(kind, parseNumericCsv(TIMESERIES_CSV))).not.toContain("NaN");
    }
  });

  it("is deterministic for identical input", () => {
    const table = parseNumericCsv(TIMESERIES_CSV);
    expect(renderFigure("margin", table)).toBe(renderFigure("margin", table));
  });

  it("rejects unknown kinds with the catalog", () => {
    expect(() => renderFigure("pie", parseNumericCsv(TIMESERIES_CSV))).toThrow(
      new RegExp(`unknown figure kind "pie".*${FIGURE_KINDS.join(", ")}`),
    );
  });

  it("reports the missing column when fed the wrong CSV", () => {
    expect(() => renderFigure("margin", parseNumericCsv(CONVERGENCE_CSV))).toThrow(
      /missing column "t"/,
    );
  });

  it("rejects a convergence CSV with no metric columns", () => {
    expect(() => renderFigure("convergence", parseNumericCsv("level,h\n32,0.03125\n"))).toThrow(
      /no metric columns/,
    );
  });
});
