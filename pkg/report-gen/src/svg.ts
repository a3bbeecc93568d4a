/**
 * Minimal deterministic SVG drawing: multi-panel line charts with optional
 * error bars. Coordinates are rounded to fixed precision and nothing
 * time-dependent enters the output, so rerendering identical data yields
 * identical bytes.
 */

import { Panel, Series } from "./extract.js";

const PANEL_W = 320;
const PANEL_H = 220;
const MARGIN = { top: 28, right: 12, bottom: 34, left: 56 };
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function fmt(v: number): string {
  return Number(v.toFixed(2)).toString();
}

function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 10000 || a < 0.01) return v.toExponential(1);
  return Number(v.toPrecision(4)).toString();
}

interface Range {
  lo: number;
  hi: number;
}

function extent(values: number[]): Range {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return { lo: 0, hi: 1 };
  if (lo === hi) {
    const pad = Math.abs(lo) > 0 ? Math.abs(lo) * 0.1 : 1;
    return { lo: lo - pad, hi: hi + pad };
  }
  return { lo, hi };
}

function scale(r: Range, outLo: number, outHi: number) {
  return (v: number) => outLo + ((v - r.lo) / (r.hi - r.lo)) * (outHi - outLo);
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function drawPanel(panel: Panel, ox: number, oy: number): string {
  const x0 = ox + MARGIN.left;
  const x1 = ox + PANEL_W - MARGIN.right;
  const y0 = oy + PANEL_H - MARGIN.bottom;
  const y1 = oy + MARGIN.top;
  const parts: string[] = [];
  parts.push(
    `<text x="${fmt(ox + PANEL_W / 2)}" y="${fmt(oy + 16)}" text-anchor="middle" ` +
      `font-size="13" font-family="sans-serif" font-weight="bold">${esc(panel.title)}</text>`,
  );

  const xs = panel.series.flatMap((s) => s.x);
  const allY = panel.series.flatMap((s, ) =>
    s.yStd
      ? s.y.flatMap((v, i) => [v - (s.yStd as number[])[i], v + (s.yStd as number[])[i]])
      : s.y,
  );
  if (xs.length === 0) {
    parts.push(
      `<text x="${fmt((x0 + x1) / 2)}" y="${fmt((y0 + y1) / 2)}" text-anchor="middle" ` +
        `font-size="12" font-family="sans-serif" fill="#888">no data</text>`,
    );
    return parts.join("\n");
  }
  const rx = extent(xs);
  const ry = extent(allY);
  const sx = scale(rx, x0, x1);
  const sy = scale(ry, y0, y1);

  // frame and end ticks
  parts.push(
    `<rect x="${fmt(x0)}" y="${fmt(y1)}" width="${fmt(x1 - x0)}" height="${fmt(y0 - y1)}" ` +
      `fill="none" stroke="#bbb"/>`,
  );
  for (const v of [rx.lo, rx.hi]) {
    parts.push(
      `<text x="${fmt(sx(v))}" y="${fmt(y0 + 16)}" text-anchor="middle" ` +
        `font-size="10" font-family="sans-serif">${tickLabel(v)}</text>`,
    );
  }
  for (const v of [ry.lo, ry.hi]) {
    parts.push(
      `<text x="${fmt(x0 - 6)}" y="${fmt(sy(v) + 3)}" text-anchor="end" ` +
        `font-size="10" font-family="sans-serif">${tickLabel(v)}</text>`,
    );
  }

  panel.series.forEach((s: Series, si: number) => {
    const color = PALETTE[si % PALETTE.length];
    if (s.yStd) {
      for (let i = 0; i < s.x.length; i++) {
        const px = fmt(sx(s.x[i]));
        parts.push(
          `<line x1="${px}" y1="${fmt(sy(s.y[i] - s.yStd[i]))}" ` +
            `x2="${px}" y2="${fmt(sy(s.y[i] + s.yStd[i]))}" ` +
            `stroke="${color}" stroke-width="1" opacity="0.6"/>`,
        );
      }
    }
    const pts = s.x.map((v, i) => `${fmt(sx(v))},${fmt(sy(s.y[i]))}`).join(" ");
    if (s.x.length === 1) {
      parts.push(
        `<circle cx="${fmt(sx(s.x[0]))}" cy="${fmt(sy(s.y[0]))}" r="3" fill="${color}"/>`,
      );
    } else {
      parts.push(
        `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"/>`,
      );
    }
    if (panel.series.length > 1) {
      const ly = y1 + 12 + si * 13;
      parts.push(
        `<line x1="${fmt(x1 - 64)}" y1="${fmt(ly - 4)}" x2="${fmt(x1 - 50)}" ` +
          `y2="${fmt(ly - 4)}" stroke="${color}" stroke-width="2"/>`,
        `<text x="${fmt(x1 - 46)}" y="${fmt(ly)}" font-size="10" ` +
          `font-family="sans-serif">${esc(s.label)}</text>`,
      );
    }
  });
  return parts.join("\n");
}

/** Lay panels out on a grid, `cols` wide, and return the full SVG document. */
export function panelFigure(panels: Panel[], cols: number): string {
  const n = Math.max(panels.length, 1);
  const c = Math.min(cols, n);
  const rows = Math.ceil(n / c);
  const width = c * PANEL_W;
  const height = rows * PANEL_H;
  const body = panels
    .map((p, i) => drawPanel(p, (i % c) * PANEL_W, Math.floor(i / c) * PANEL_H))
    .join("\n");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">\n<rect width="${width}" height="${height}" ` +
    `fill="white"/>\n${body}\n</svg>\n`
  );
}

/** Figure-sized stand-in written when an input file holds no records. */
export function placeholderFigure(message: string): string {
  const width = PANEL_W;
  const height = PANEL_H;
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">\n<rect width="${width}" height="${height}" ` +
    `fill="white" stroke="#bbb"/>\n<text x="${width / 2}" y="${height / 2}" ` +
    `text-anchor="middle" font-size="13" font-family="sans-serif" fill="#888">` +
    `${esc(message)}</text>\n</svg>\n`
  );
}
