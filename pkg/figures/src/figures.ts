/**
 * The three figure kinds rendered from harness tables.
 *
 * rmse-curve          label,lead_time,rmse      one line per label
 * trajectory-overlay  label,t,value             one line per label
 * denoise-overlay     noise,role,t,value        2x2 panels, one per noise kind,
 *                                               with truth/noisy/smoothed roles
 *
 * Series and panel order follow first appearance in the table, which is the
 * harness's deterministic emission order.
 */
import { Table, groupBy, MissingColumnError } from "./table.js";
import {
  COLORS,
  Extent,
  SvgDoc,
  extent,
  fmtTick,
  mergeExtents,
  scaleLinear,
  ticks,
} from "./svg.js";

export interface FigureLabels {
  x?: string;
  y?: string;
}

interface Box {
  x0: number;
  y0: number;
  w: number;
  h: number;
}

interface Series {
  label: string;
  x: number[];
  y: number[];
}

function seriesFrom(table: Table, key: string, xCol: string, yCol: string, path: string): Series[] {
  const xi = table.columns.indexOf(xCol);
  const yi = table.columns.indexOf(yCol);
  if (xi < 0) throw new MissingColumnError(xCol, path);
  if (yi < 0) throw new MissingColumnError(yCol, path);
  const out: Series[] = [];
  for (const [label, rows] of groupBy(table, key, path)) {
    out.push({
      label,
      x: rows.map((r) => Number(r[xi])),
      y: rows.map((r) => Number(r[yi])),
    });
  }
  return out;
}

function dataExtents(series: Series[]): { xd: Extent; yd: Extent } {
  let xd = extent(series[0]?.x ?? []);
  let yd = extent(series[0]?.y ?? []);
  for (const s of series.slice(1)) {
    xd = mergeExtents(xd, extent(s.x));
    yd = mergeExtents(yd, extent(s.y));
  }
  return { xd, yd };
}

function drawAxes(
  doc: SvgDoc,
  box: Box,
  xd: Extent,
  yd: Extent,
  labels: FigureLabels
): { sx: (v: number) => number; sy: (v: number) => number } {
  const sx = scaleLinear(xd, box.x0, box.x0 + box.w);
  const sy = scaleLinear(yd, box.y0 + box.h, box.y0);
  doc.line(box.x0, box.y0 + box.h, box.x0 + box.w, box.y0 + box.h, "#000000");
  doc.line(box.x0, box.y0, box.x0, box.y0 + box.h, "#000000");
  for (const t of ticks(xd)) {
    const x = sx(t);
    doc.line(x, box.y0 + box.h, x, box.y0 + box.h + 4, "#000000");
    doc.text(x, box.y0 + box.h + 16, fmtTick(t), 10, "middle");
  }
  for (const t of ticks(yd)) {
    const y = sy(t);
    doc.line(box.x0 - 4, y, box.x0, y, "#000000");
    doc.text(box.x0 - 6, y + 3, fmtTick(t), 10, "end");
    doc.line(box.x0, y, box.x0 + box.w, y, "#eeeeee");
  }
  if (labels.x) doc.text(box.x0 + box.w / 2, box.y0 + box.h + 32, labels.x, 11, "middle");
  if (labels.y) {
    doc.raw(
      `<text x="0" y="0" font-family="Helvetica, Arial, sans-serif" font-size="11" ` +
        `text-anchor="middle" transform="translate(${(box.x0 - 38).toFixed(2)} ` +
        `${(box.y0 + box.h / 2).toFixed(2)}) rotate(-90)">${labels.y}</text>`
    );
  }
  return { sx, sy };
}

function drawLegend(doc: SvgDoc, box: Box, entries: { label: string; color: string; dash?: string }[]): void {
  let y = box.y0 + 14;
  for (const e of entries) {
    const x = box.x0 + box.w - 150;
    doc.line(x, y - 4, x + 22, y - 4, e.color, 2);
    doc.text(x + 28, y, e.label, 10);
    y += 15;
  }
}

function lineChart(table: Table, key: string, xCol: string, yCol: string, labels: FigureLabels, title: string | undefined, path: string): string {
  const series = seriesFrom(table, key, xCol, yCol, path);
  const doc = new SvgDoc(640, 440);
  const box: Box = { x0: 64, y0: 40, w: 540, h: 340 };
  const { xd, yd } = dataExtents(series);
  const { sx, sy } = drawAxes(doc, box, xd, yd, labels);
  series.forEach((s, i) => {
    doc.polyline(s.x.map(sx), s.y.map(sy), COLORS[i % COLORS.length]);
  });
  drawLegend(
    doc,
    box,
    series.map((s, i) => ({ label: s.label, color: COLORS[i % COLORS.length] }))
  );
  if (title) doc.text(320, 22, title, 13, "middle");
  return doc.render();
}

export function rmseCurve(table: Table, labels: FigureLabels, title: string | undefined, path: string): string {
  return lineChart(
    table,
    "label",
    "lead_time",
    "rmse",
    { x: labels.x ?? "lead time", y: labels.y ?? "RMSE" },
    title,
    path
  );
}

export function trajectoryOverlay(table: Table, labels: FigureLabels, title: string | undefined, path: string): string {
  return lineChart(
    table,
    "label",
    "t",
    "value",
    { x: labels.x ?? "time", y: labels.y ?? "value" },
    title,
    path
  );
}

// role -> style for the denoising panels; the smoothed estimate goes on top
const ROLE_STYLE: Record<string, { color: string; width: number; order: number }> = {
  noisy: { color: "#bbbbbb", width: 1, order: 0 },
  truth: { color: "#000000", width: 1.5, order: 1 },
  smoothed: { color: "#0072b2", width: 1.5, order: 2 },
};

export function denoiseOverlay(table: Table, labels: FigureLabels, title: string | undefined, path: string): string {
  const panels = groupBy(table, "noise", path);
  const ti = table.columns.indexOf("t");
  const vi = table.columns.indexOf("value");
  const ri = table.columns.indexOf("role");
  if (ri < 0) throw new MissingColumnError("role", path);
  if (ti < 0) throw new MissingColumnError("t", path);
  if (vi < 0) throw new MissingColumnError("value", path);

  const doc = new SvgDoc(960, 700);
  if (title) doc.text(480, 22, title, 13, "middle");
  const grid: Box[] = [
    { x0: 64, y0: 56, w: 380, h: 240 },
    { x0: 540, y0: 56, w: 380, h: 240 },
    { x0: 64, y0: 392, w: 380, h: 240 },
    { x0: 540, y0: 392, w: 380, h: 240 },
  ];
  let p = 0;
  for (const [noise, rows] of panels) {
    if (p >= grid.length) break;
    const box = grid[p];
    const roles = new Map<string, { x: number[]; y: number[] }>();
    for (const r of rows) {
      const role = r[ri];
      let s = roles.get(role);
      if (!s) roles.set(role, (s = { x: [], y: [] }));
      s.x.push(Number(r[ti]));
      s.y.push(Number(r[vi]));
    }
    let xd = extent([]);
    let yd = extent([]);
    let first = true;
    for (const s of roles.values()) {
      xd = first ? extent(s.x) : mergeExtents(xd, extent(s.x));
      yd = first ? extent(s.y) : mergeExtents(yd, extent(s.y));
      first = false;
    }
    const { sx, sy } = drawAxes(doc, box, xd, yd, {
      x: labels.x ?? "time",
      y: p % 2 === 0 ? labels.y ?? "value" : undefined,
    });
    const ordered = [...roles.entries()].sort(
      (a, b) => (ROLE_STYLE[a[0]]?.order ?? 9) - (ROLE_STYLE[b[0]]?.order ?? 9)
    );
    for (const [role, s] of ordered) {
      const style = ROLE_STYLE[role] ?? { color: COLORS[3], width: 1 };
      doc.polyline(s.x.map(sx), s.y.map(sy), style.color, style.width);
    }
    doc.text(box.x0 + box.w / 2, box.y0 - 8, noise, 12, "middle");
    p += 1;
  }
  // one shared legend under the grid
  const entries = Object.entries(ROLE_STYLE);
  let x = 330;
  for (const [role, style] of entries) {
    doc.line(x, 676, x + 22, 676, style.color, style.width + 0.5);
    doc.text(x + 28, 680, role, 11);
    x += 110;
  }
  return doc.render();
}
