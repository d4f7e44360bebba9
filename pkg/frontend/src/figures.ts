import { scaleLinear, scaleLog, type ScaleContinuousNumeric } from "d3-scale";
import { line as d3line } from "d3-shape";

import { column, type Table } from "./csv.js";

export const FIGURE_KINDS = ["bound-vs-observed", "margin", "convergence"] as const;
export type FigureKind = (typeof FIGURE_KINDS)[number];

const WIDTH = 720;
const HEIGHT = 440;
const MARGIN = { top: 40, right: 200, bottom: 48, left: 68 };
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

interface Series {
  label: string;
  x: number[];
  y: number[];
  color: string;
  dash?: string;
  points?: boolean;
}

interface FigureSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  xLog?: boolean;
  yLog?: boolean;
  zeroRule?: boolean;
}

type Scale = ScaleContinuousNumeric<number, number>;

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

function makeScale(values: number[], log: boolean, range: [number, number]): Scale {
  let [lo, hi] = extent(values);
  if (log) {
    // multiplicative padding; callers guarantee positive values on log axes
    const pad = Math.pow(hi / lo, 0.05) || 1.05;
    return scaleLog().domain([lo / pad, hi * pad]).range(range);
  }
  const span = hi - lo;
  const pad = span > 0 ? 0.05 * span : Math.max(Math.abs(hi), 1) * 0.05;
  return scaleLinear().domain([lo - pad, hi + pad]).range(range);
}

/** d3 tick formatting is deterministic, which keeps re-renders byte-identical. */
function axisSvg(scale: Scale, orient: "x" | "y", cross: number): string {
  const ticks = scale.ticks(6);
  const fmt = scale.tickFormat(6);
  const parts: string[] = [];
  for (const t of ticks) {
    const p = scale(t);
    if (orient === "x") {
      parts.push(
        `<line x1="${p}" y1="${cross}" x2="${p}" y2="${cross + 5}" stroke="#333"/>`,
        `<line x1="${p}" y1="${MARGIN.top}" x2="${p}" y2="${cross}" stroke="#ddd" stroke-width="0.6"/>`,
        `<text x="${p}" y="${cross + 18}" text-anchor="middle" font-size="11">${fmt(t)}</text>`,
      );
    } else {
      parts.push(
        `<line x1="${cross - 5}" y1="${p}" x2="${cross}" y2="${p}" stroke="#333"/>`,
        `<line x1="${cross}" y1="${p}" x2="${WIDTH - MARGIN.right}" y2="${p}" stroke="#ddd" stroke-width="0.6"/>`,
        `<text x="${cross - 8}" y="${p + 3.5}" text-anchor="end" font-size="11">${fmt(t)}</text>`,
      );
    }
  }
  return parts.join("\n");
}

function figureSvg(spec: FigureSpec): string {
  const xs = spec.series.flatMap((s) => s.x);
  const ys = spec.series.flatMap((s) => s.y);
  const xScale = makeScale(xs, spec.xLog ?? false, [MARGIN.left, WIDTH - MARGIN.right]);
  const yValues = spec.zeroRule ? ys.concat([0]) : ys;
  const yScale = makeScale(yValues, spec.yLog ?? false, [HEIGHT - MARGIN.bottom, MARGIN.top]);

  const toPath = d3line<number>()
    .x((_, i) => 0) // replaced per series below
    .y(() => 0);

  const body: string[] = [];
  body.push(`<text x="${WIDTH / 2}" y="22" text-anchor="middle" font-size="15">${spec.title}</text>`);
  body.push(axisSvg(xScale, "x", HEIGHT - MARGIN.bottom));
  body.push(axisSvg(yScale, "y", MARGIN.left));
  body.push(
    `<line x1="${MARGIN.left}" y1="${HEIGHT - MARGIN.bottom}" x2="${WIDTH - MARGIN.right}" y2="${HEIGHT - MARGIN.bottom}" stroke="#333"/>`,
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${HEIGHT - MARGIN.bottom}" stroke="#333"/>`,
    `<text x="${(MARGIN.left + WIDTH - MARGIN.right) / 2}" y="${HEIGHT - 10}" text-anchor="middle" font-size="12">${spec.xLabel}</text>`,
    `<text x="16" y="${(MARGIN.top + HEIGHT - MARGIN.bottom) / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 ${(MARGIN.top + HEIGHT - MARGIN.bottom) / 2})">${spec.yLabel}</text>`,
  );

  if (spec.zeroRule) {
    const y0 = yScale(0);
    body.push(
      `<line x1="${MARGIN.left}" y1="${y0}" x2="${WIDTH - MARGIN.right}" y2="${y0}" stroke="#888" stroke-dasharray="5,4"/>`,
    );
  }

  spec.series.forEach((s, idx) => {
    const gen = toPath
      .x((_, i) => xScale(s.x[i]))
      .y((_, i) => yScale(s.y[i]));
    const d = gen(s.y) ?? "";
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    body.push(
      `<path class="series" d="${d}" fill="none" stroke="${s.color}" stroke-width="1.8"${dash}/>`,
    );
    if (s.points) {
      for (let i = 0; i < s.x.length; i++) {
        body.push(
          `<circle cx="${xScale(s.x[i])}" cy="${yScale(s.y[i])}" r="3" fill="${s.color}"/>`,
        );
      }
    }
    const ly = MARGIN.top + 14 + idx * 20;
    const lx = WIDTH - MARGIN.right + 12;
    body.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 22}" y2="${ly - 4}" stroke="${s.color}" stroke-width="1.8"${dash}/>`,
      `<text x="${lx + 28}" y="${ly}" font-size="11">${s.label}</text>`,
    );
  });

  return [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${WIDTH} ${HEIGHT}" width="${WIDTH}" height="${HEIGHT}" font-family="sans-serif">`,
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
    ...body,
    `</svg>`,
    ``,
  ].join("\n");
}

function boundVsObserved(table: Table): FigureSpec {
  const t = column(table, "t");
  return {
    title: "observed sup of chi^2 t |grad .|^2 vs theorem bound",
    xLabel: "t",
    yLabel: "chi^2 t |grad .|^2",
    series: [
      { label: "observed (u)", x: t, y: column(table, "max_chi2t_grad_u2"), color: PALETTE[0] },
      { label: "bound B (u)", x: t, y: column(table, "bound_u"), color: PALETTE[0], dash: "6,4" },
      { label: "observed (v)", x: t, y: column(table, "max_chi2t_grad_v2"), color: PALETTE[1] },
      { label: "bound B (v)", x: t, y: column(table, "bound_v"), color: PALETTE[1], dash: "6,4" },
    ],
  };
}

function marginFigure(table: Table): FigureSpec {
  const t = column(table, "t");
  return {
    title: "relative margin to the bound (observed/bound - 1)",
    xLabel: "t",
    yLabel: "margin",
    zeroRule: true,
    series: [
      { label: "margin (u)", x: t, y: column(table, "margin_u"), color: PALETTE[0] },
      { label: "margin (v)", x: t, y: column(table, "margin_v"), color: PALETTE[1] },
    ],
  };
}

/** Least-squares slope of log2(y) against log2(h); the fitted convergence order. */
function fittedOrder(h: number[], y: number[]): number {
  const lx = h.map(Math.log2);
  const ly = y.map(Math.log2);
  const n = lx.length;
  const mx = lx.reduce((a, b) => a + b, 0) / n;
  const my = ly.reduce((a, b) => a + b, 0) / n;
  let num = 0;
  let den = 0;
  for (let i = 0; i < n; i++) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return den > 0 ? num / den : NaN;
}

function convergenceFigure(table: Table): FigureSpec {
  const h = column(table, "h");
  column(table, "level"); // presence check; levels label the rows
  const metrics = table.columns.filter((c) => c !== "level" && c !== "h");
  if (metrics.length === 0) {
    throw new Error("convergence CSV has no metric columns beyond level,h");
  }
  const allPositive = metrics.every((m) => column(table, m).every((v) => v > 0));
  const series = metrics.map((m, i) => {
    const y = column(table, m);
    const label =
      allPositive && h.length >= 2 ? `${m} (order ~ ${fittedOrder(h, y).toFixed(2)})` : m;
    return { label, x: h, y, color: PALETTE[i % PALETTE.length], points: true };
  });
  return {
    title: "residual convergence under grid refinement",
    xLabel: "h",
    yLabel: "sup-norm residual",
    xLog: true,
    yLog: allPositive, // signed metrics (e.g. margins) fall back to a linear axis
    series,
  };
}

export function renderFigure(kind: string, table: Table): string {
  switch (kind) {
    case "bound-vs-observed":
      return figureSvg(boundVsObserved(table));
    case "margin":
      return figureSvg(marginFigure(table));
    case "convergence":
      return figureSvg(convergenceFigure(table));
    default:
      throw new Error(`unknown figure kind "${kind}"; expected one of: ${FIGURE_KINDS.join(", ")}`);
  }
}
