/**
 * SVG figure renderers over the simulation lab's CSV tables.
 *
 * Every plotted mark carries a data-value attribute holding the raw CSV
 * cell text it was drawn from, so a figure can always be traced back to
 * the table without re-deriving anything.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { el, fmt, linearScale, textNode, type Scale } from "./svg.js";
import {
  loadTable,
  num,
  TableInputError,
  type FigureSpec,
  type Row,
} from "./tables.js";

/** Canonical legend order; unknown series sort after these, alphabetically. */
export const SERIES_ORDER = [
  "c3p",
  "static",
  "nonergodic",
  "uncoded",
  "rr",
  "hcmm_like",
] as const;

export const PALETTE = [
  "#1f77b4",
  "#ff7f0e",
  "#2ca02c",
  "#d62728",
  "#9467bd",
  "#8c564b",
  "#e377c2",
  "#7f7f7f",
] as const;

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { top: 34, right: 24, bottom: 48, left: 64 };

/** Resolve the series to draw, honoring an explicit filter when given. */
export function orderSeries(names: Set<string>, wanted: readonly string[]): string[] {
  if (wanted.length > 0) {
    const missing = wanted.filter((name) => !names.has(name));
    if (missing.length > 0) {
      throw new TableInputError(`series not in table: ${missing.join(", ")}`);
    }
    return [...wanted];
  }
  const ranked = SERIES_ORDER.filter((name) => names.has(name));
  const rest = [...names]
    .filter((name) => !(SERIES_ORDER as readonly string[]).includes(name))
    .sort();
  return [...ranked, ...rest];
}

function color(index: number): string {
  return PALETTE[index % PALETTE.length] ?? "#000000";
}

interface Point {
  x: number;
  y: number;
  err: number;
  rawX: string;
  rawY: string;
}

/** Sorted numeric points for one series; raw cell text rides along. */
function seriesPoints(rows: Row[], xCol: string, yCol: string, errCol?: string): Point[] {
  const pts = rows.map((row) => ({
    x: num(row, xCol),
    y: num(row, yCol),
    err: errCol === undefined ? 0 : num(row, errCol),
    rawX: row[xCol] ?? "",
    rawY: row[yCol] ?? "",
  }));
  pts.sort((a, b) => a.x - b.x || a.y - b.y);
  return pts;
}

function padDomain(lo: number, hi: number): [number, number] {
  if (lo === hi) return [lo, hi];
  const pad = 0.05 * (hi - lo);
  return [lo - pad, hi + pad];
}

interface Frame {
  x: Scale;
  y: Scale;
  parts: string[];
}

/** Axes, grid ticks, and labels shared by every cartesian figure. */
function buildFrame(
  xDomain: [number, number],
  yDomain: [number, number],
  xLabel: string,
  yLabel: string,
  title: string,
): Frame {
  const x = linearScale(xDomain, [MARGIN.left, WIDTH - MARGIN.right]);
  const y = linearScale(yDomain, [HEIGHT - MARGIN.bottom, MARGIN.top]);
  const parts: string[] = [
    el("rect", { x: 0, y: 0, width: WIDTH, height: HEIGHT, fill: "#ffffff" }),
  ];
  const floor = HEIGHT - MARGIN.bottom;
  for (const tick of x.ticks(6)) {
    const px = x(tick);
    parts.push(
      el("line", { x1: px, y1: floor, x2: px, y2: floor + 5, stroke: "#333333" }),
      el(
        "text",
        { x: px, y: floor + 18, "text-anchor": "middle", "font-size": 11, fill: "#333333" },
        textNode(fmt(tick)),
      ),
    );
  }
  for (const tick of y.ticks(6)) {
    const py = y(tick);
    parts.push(
      el("line", {
        x1: MARGIN.left,
        y1: py,
        x2: WIDTH - MARGIN.right,
        y2: py,
        stroke: "#dddddd",
      }),
      el("line", { x1: MARGIN.left - 5, y1: py, x2: MARGIN.left, y2: py, stroke: "#333333" }),
      el(
        "text",
        {
          x: MARGIN.left - 8,
          y: py + 4,
          "text-anchor": "end",
          "font-size": 11,
          fill: "#333333",
        },
        textNode(fmt(tick)),
      ),
    );
  }
  parts.push(
    el("line", { x1: MARGIN.left, y1: floor, x2: WIDTH - MARGIN.right, y2: floor, stroke: "#333333" }),
    el("line", { x1: MARGIN.left, y1: MARGIN.top, x2: MARGIN.left, y2: floor, stroke: "#333333" }),
    el(
      "text",
      {
        x: (MARGIN.left + WIDTH - MARGIN.right) / 2,
        y: HEIGHT - 10,
        "text-anchor": "middle",
        "font-size": 13,
        fill: "#111111",
      },
      textNode(xLabel),
    ),
    el(
      "text",
      {
        x: 16,
        y: (MARGIN.top + floor) / 2,
        "text-anchor": "middle",
        "font-size": 13,
        fill: "#111111",
        transform: `rotate(-90 16 ${fmt((MARGIN.top + floor) / 2)})`,
      },
      textNode(yLabel),
    ),
  );
  if (title !== "") {
    parts.push(
      el(
        "text",
        { x: WIDTH / 2, y: 20, "text-anchor": "middle", "font-size": 14, fill: "#111111" },
        textNode(title),
      ),
    );
  }
  return { x, y, parts };
}

/** Legend rows inside the top-right corner of the plot area. */
function legend(labels: string[], colors: string[]): string[] {
  const x0 = WIDTH - MARGIN.right - 150;
  const parts: string[] = [];
  labels.forEach((label, i) => {
    const py = MARGIN.top + 14 + 16 * i;
    parts.push(
      el("line", {
        x1: x0,
        y1: py - 4,
        x2: x0 + 18,
        y2: py - 4,
        stroke: colors[i] ?? "#000000",
        "stroke-width": 2,
      }),
      el(
        "text",
        { x: x0 + 24, y: py, "font-size": 11, fill: "#333333" },
        textNode(label),
      ),
    );
  });
  return parts;
}

function errorBar(px: number, yLo: number, yHi: number, stroke: string): string {
  const cap = 3;
  return [
    el("line", { x1: px, y1: yLo, x2: px, y2: yHi, stroke }),
    el("line", { x1: px - cap, y1: yLo, x2: px + cap, y2: yLo, stroke }),
    el("line", { x1: px - cap, y1: yHi, x2: px + cap, y2: yHi, stroke }),
  ].join("");
}

function polyline(points: string, stroke: string): string {
  return el("polyline", { points, fill: "none", stroke, "stroke-width": 1.5 });
}

function svgDocument(parts: string[]): string {
  return el(
    "svg",
    {
      xmlns: "http://www.w3.org/2000/svg",
      width: WIDTH,
      height: HEIGHT,
      viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    },
    ...parts,
  );
}

interface SeriesChartColumns {
  xCol: string;
  seriesCol: string;
  yCol: string;
  errCol: string;
  xLabel: string;
  yLabel: string;
  legendPrefix: string;
}

/** One line with error bars per series; shared by three figure kinds. */
function renderSeriesChart(spec: FigureSpec, cols: SeriesChartColumns): string {
  const table = loadTable(spec.input, [cols.xCol, cols.seriesCol, cols.yCol, cols.errCol]);
  const names = new Set(table.rows.map((row) => row[cols.seriesCol] ?? ""));
  const ordered = orderSeries(names, spec.series ?? []);
  const bySeries = ordered.map((name) =>
    seriesPoints(
      table.rows.filter((row) => row[cols.seriesCol] === name),
      cols.xCol,
      cols.yCol,
      cols.errCol,
    ),
  );
  const all = bySeries.flat();
  const xDomain = padDomain(
    Math.min(...all.map((p) => p.x)),
    Math.max(...all.map((p) => p.x)),
  );
  const yDomain = padDomain(
    Math.min(...all.map((p) => p.y - p.err)),
    Math.max(...all.map((p) => p.y + p.err)),
  );
  const frame = buildFrame(xDomain, yDomain, cols.xLabel, cols.yLabel, spec.title ?? "");
  const parts = frame.parts;
  bySeries.forEach((pts, i) => {
    const stroke = color(i);
    const path = pts.map((p) => `${fmt(frame.x(p.x))},${fmt(frame.y(p.y))}`).join(" ");
    parts.push(polyline(path, stroke));
    for (const p of pts) {
      if (p.err > 0) {
        parts.push(errorBar(frame.x(p.x), frame.y(p.y - p.err), frame.y(p.y + p.err), stroke));
      }
      parts.push(
        el("circle", {
          cx: frame.x(p.x),
          cy: frame.y(p.y),
          r: 3,
          fill: stroke,
          "data-series": ordered[i] ?? "",
          "data-x": p.rawX,
          "data-value": p.rawY,
        }),
      );
    }
  });
  parts.push(
    ...legend(
      ordered.map((name) => `${cols.legendPrefix}${name}`),
      ordered.map((_, i) => color(i)),
    ),
  );
  return svgDocument(parts);
}

function renderDelayVsR(spec: FigureSpec): string {
  return renderSeriesChart(spec, {
    xCol: "R",
    seriesCol: "scheduler",
    yCol: "t_total_mean",
    errCol: "t_total_ci95",
    xLabel: "task rows R",
    yLabel: "completion time (s)",
    legendPrefix: "",
  });
}

function renderImprovementVsN(spec: FigureSpec): string {
  return renderSeriesChart(spec, {
    xCol: "N",
    seriesCol: "baseline",
    yCol: "improvement_pct_mean",
    errCol: "improvement_pct_ci95",
    xLabel: "helpers N",
    yLabel: "completion time improvement (%)",
    legendPrefix: "vs ",
  });
}

function renderEfficiency(spec: FigureSpec): string {
  const table = loadTable(spec.input, [
    "R",
    "scheduler",
    "mean_efficiency_mean",
    "mean_efficiency_ci95",
  ]);
  const rValues = new Set(table.rows.map((row) => num(row, "R")));
  if (rValues.size > 1) {
    return renderSeriesChart(spec, {
      xCol: "R",
      seriesCol: "scheduler",
      yCol: "mean_efficiency_mean",
      errCol: "mean_efficiency_ci95",
      xLabel: "task rows R",
      yLabel: "mean helper efficiency",
      legendPrefix: "",
    });
  }
  // Single task size: a bar per scheduler reads better than one-point lines.
  const names = new Set(table.rows.map((row) => row["scheduler"] ?? ""));
  const ordered = orderSeries(names, spec.series ?? []);
  const bars = ordered.map((name) => {
    const row = table.rows.find((r) => r["scheduler"] === name);
    if (row === undefined) throw new TableInputError(`no rows for series ${name}`);
    return {
      name,
      y: num(row, "mean_efficiency_mean"),
      err: num(row, "mean_efficiency_ci95"),
      rawY: row["mean_efficiency_mean"] ?? "",
    };
  });
  const top = Math.max(...bars.map((b) => b.y + b.err));
  const frame = buildFrame(
    [0, bars.length],
    [0, top * 1.05],
    "scheduler",
    "mean helper efficiency",
    spec.title ?? "",
  );
  const parts = frame.parts;
  const floor = HEIGHT - MARGIN.bottom;
  bars.forEach((bar, i) => {
    const cx = frame.x(i + 0.5);
    const half = 0.3 * (frame.x(1) - frame.x(0));
    parts.push(
      el("rect", {
        x: cx - half,
        y: frame.y(bar.y),
        width: 2 * half,
        height: floor - frame.y(bar.y),
        fill: color(i),
        "data-series": bar.name,
        "data-value": bar.rawY,
      }),
    );
    if (bar.err > 0) {
      parts.push(errorBar(cx, frame.y(bar.y - bar.err), frame.y(bar.y + bar.err), "#333333"));
    }
    parts.push(
      el(
        "text",
        { x: cx, y: floor + 18, "text-anchor": "middle", "font-size": 11, fill: "#333333" },
        textNode(bar.name),
      ),
    );
  });
  return svgDocument(parts);
}

function renderTuOverlay(spec: FigureSpec): string {
  const table = loadTable(spec.input, ["rtt", "mu", "a", "tu_closed_form", "tu_mc"]);
  const keys = new Map<string, { mu: number; a: number }>();
  for (const row of table.rows) {
    const mu = num(row, "mu");
    const a = num(row, "a");
    keys.set(`${mu}|${a}`, { mu, a });
  }
  const groups = [...keys.values()].sort((p, q) => p.mu - q.mu || p.a - q.a);
  const xs = table.rows.map((row) => num(row, "rtt"));
  const ys = table.rows.flatMap((row) => [num(row, "tu_closed_form"), num(row, "tu_mc")]);
  const frame = buildFrame(
    padDomain(Math.min(...xs), Math.max(...xs)),
    padDomain(Math.min(...ys), Math.max(...ys)),
    "data round trip (s)",
    "mean idle per packet (s)",
    spec.title ?? "",
  );
  const parts = frame.parts;
  const labels: string[] = [];
  const colors: string[] = [];
  groups.forEach((group, i) => {
    const stroke = color(i);
    const rows = table.rows
      .filter((row) => num(row, "mu") === group.mu && num(row, "a") === group.a)
      .sort((p, q) => num(p, "rtt") - num(q, "rtt"));
    const path = rows
      .map((row) => `${fmt(frame.x(num(row, "rtt")))},${fmt(frame.y(num(row, "tu_closed_form")))}`)
      .join(" ");
    parts.push(polyline(path, stroke));
    for (const row of rows) {
      const px = frame.x(num(row, "rtt"));
      parts.push(
        el("circle", {
          cx: px,
          cy: frame.y(num(row, "tu_closed_form")),
          r: 2,
          fill: stroke,
          "data-series": `closed form mu=${fmt(group.mu)}`,
          "data-x": row["rtt"] ?? "",
          "data-value": row["tu_closed_form"] ?? "",
        }),
        // Monte carlo estimates draw as crosses over the closed-form line.
        el("path", {
          d: crossPath(px, frame.y(num(row, "tu_mc")), 3),
          stroke,
          fill: "none",
          "data-series": `monte carlo mu=${fmt(group.mu)}`,
          "data-x": row["rtt"] ?? "",
          "data-value": row["tu_mc"] ?? "",
        }),
      );
    }
    labels.push(`mu=${fmt(group.mu)}, a=${fmt(group.a)}`);
    colors.push(stroke);
  });
  parts.push(...legend(labels, colors));
  return svgDocument(parts);
}

function crossPath(cx: number, cy: number, arm: number): string {
  const x0 = fmt(cx - arm);
  const x1 = fmt(cx + arm);
  const y0 = fmt(cy - arm);
  const y1 = fmt(cy + arm);
  return `M ${x0} ${y0} L ${x1} ${y1} M ${x0} ${y1} L ${x1} ${y0}`;
}

const RENDERERS: Record<string, (spec: FigureSpec) => string> = {
  delay_vs_r: renderDelayVsR,
  improvement_vs_n: renderImprovementVsN,
  efficiency: renderEfficiency,
  tu_overlay: renderTuOverlay,
};

/** Render one figure spec to an SVG string. */
export function renderFigure(spec: FigureSpec): string {
  const renderer = RENDERERS[spec.kind];
  if (renderer === undefined) {
    throw new TableInputError(`unknown figure kind '${spec.kind}'`);
  }
  return renderer(spec);
}

/** Render and write the SVG file named by the spec; returns the path. */
export function renderToFile(spec: FigureSpec): string {
  const svg = renderFigure(spec);
  mkdirSync(dirname(spec.output), { recursive: true });
  writeFileSync(spec.output, svg + "\n", "utf-8");
  return spec.output;
}
