/**
 * Minimal deterministic SVG output.
 *
 * Everything is emitted with fixed decimal formatting and a fixed font stack
 * so that re-rendering the same tables produces identical bytes. No
 * timestamps, no randomness, no environment lookups.
 */

export interface Extent {
  min: number;
  max: number;
}

export function extent(values: number[]): Extent {
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (min > max) {
    // no finite data; pick a unit range so the scales stay usable
    return { min: 0, max: 1 };
  }
  if (min === max) {
    const pad = min === 0 ? 1 : Math.abs(min) * 0.1;
    return { min: min - pad, max: max + pad };
  }
  return { min, max };
}

export function mergeExtents(a: Extent, b: Extent): Extent {
  return { min: Math.min(a.min, b.min), max: Math.max(a.max, b.max) };
}

/** Linear map from data space onto [r0, r1]. */
export function scaleLinear(domain: Extent, r0: number, r1: number): (v: number) => number {
  const span = domain.max - domain.min;
  return (v: number) => r0 + ((v - domain.min) / span) * (r1 - r0);
}

/** Round tick positions covering the domain, in the spirit of d3.ticks. */
export function ticks(domain: Extent, count = 5): number[] {
  const span = domain.max - domain.min;
  const step0 = span / Math.max(1, count);
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const norm = step0 / mag;
  const step = (norm >= 5 ? 10 : norm >= 2 ? 5 : norm >= 1 ? 2 : 1) * mag;
  const start = Math.ceil(domain.min / step) * step;
  const out: number[] = [];
  for (let v = start; v <= domain.max + step * 1e-9; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

export function fmt(v: number): string {
  // fixed two decimals with no negative zero, for byte-stable coordinates
  const s = v.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

export function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1000 || a < 0.01) return v.toExponential(1).replace("e+", "e");
  const s = a >= 100 ? v.toFixed(0) : a >= 1 ? v.toFixed(1) : v.toFixed(2);
  return s.replace(/\.0+$/, "").replace(/(\.\d*[1-9])0+$/, "$1");
}

export const FONT = "Helvetica, Arial, sans-serif";

// line colors for successive series, a colorblind-safe cycle
export const COLORS = ["#0072b2", "#d55e00", "#009e73", "#cc79a7", "#e69f00", "#56b4e9"];

export class SvgDoc {
  private parts: string[] = [];

  constructor(public width: number, public height: number) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}">`,
      `<rect width="${width}" height="${height}" fill="#ffffff"/>`
    );
  }

  raw(s: string): void {
    this.parts.push(s);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}" stroke-width="${width}"/>`
    );
  }

  polyline(xs: number[], ys: number[], stroke: string, width = 1.5, dash?: string): void {
    if (xs.length === 1) {
      // a one-point series has no extent; draw a short flat segment so it
      // stays visible
      this.line(xs[0] - 12, ys[0], xs[0] + 12, ys[0], stroke, width);
      return;
    }
    const pts = xs.map((x, i) => `${fmt(x)},${fmt(ys[i])}`).join(" ");
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}" ` +
        `stroke-width="${width}"${dashAttr}/>`
    );
  }

  text(x: number, y: number, s: string, size = 12, anchor = "start", fill = "#000000"): void {
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-family="${FONT}" font-size="${size}" ` +
        `text-anchor="${anchor}" fill="${fill}">${escapeXml(s)}</text>`
    );
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
