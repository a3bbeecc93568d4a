/**
 * Data-extraction layer: everything a figure or table shows is computed here
 * as plain arrays, separately from SVG drawing, so goldens compare data and
 * never pixels.
 */

import {
  AggRow,
  CurveRow,
  KpiRecord,
  KPI_PANEL_KEYS,
  REWARD_KEYS,
} from "./schema.js";

export interface Series {
  label: string;
  x: number[];
  y: number[];
  yStd?: number[];
  /** 1-based source lines of the records behind each point. */
  sourceLines: number[];
}

export interface Panel {
  key: string;
  title: string;
  series: Series[];
}

/** Trailing moving average: out[i] = mean(values[max(0,i-w+1) .. i]). */
export function movingAverage(values: number[], window: number): number[] {
  if (window <= 1) return values.slice();
  const out: number[] = [];
  let acc = 0;
  for (let i = 0; i < values.length; i++) {
    acc += values[i];
    if (i >= window) acc -= values[i - window];
    out.push(acc / Math.min(i + 1, window));
  }
  return out;
}

/** Four reward panels (one per hierarchy role) from a training run. */
export function rewardPanels(rows: CurveRow[], smooth = 1): Panel[] {
  return REWARD_KEYS.map((key) => {
    const x = rows.map((r) => r.epoch);
    const y = movingAverage(rows.map((r) => r[key]), smooth);
    return {
      key,
      title: key.replace("_", " "),
      series: [{ label: key, x, y, sourceLines: rows.map((r) => r.lineNo) }],
    };
  });
}

/**
 * Six KPI panels from per-epoch KPI rows. Ratio KPIs can be missing on
 * revenue-free epochs; those points are simply absent from the series.
 */
export function kpiPanels(records: KpiRecord[], smooth = 1): Panel[] {
  return KPI_PANEL_KEYS.map((key) => {
    const x: number[] = [];
    const raw: number[] = [];
    const sourceLines: number[] = [];
    records.forEach((rec, i) => {
      const v = rec[key];
      if (v === undefined) return;
      x.push(rec.epoch ?? i);
      raw.push(v);
      sourceLines.push(rec.lineNo);
    });
    return {
      key,
      title: key,
      series: [{ label: key, x, y: movingAverage(raw, smooth), sourceLines }],
    };
  });
}

function sortedUnique<T>(values: T[]): T[] {
  return [...new Set(values)].sort();
}

const METRIC_ORDER = [...KPI_PANEL_KEYS, "r_total"] as string[];

/** Canonical KPI order first, anything unrecognized alphabetically after. */
function orderedMetrics(values: string[]): string[] {
  const present = new Set(values);
  const known = METRIC_ORDER.filter((m) => present.has(m));
  const extra = sortedUnique(values.filter((m) => !METRIC_ORDER.includes(m)));
  return [...known, ...extra];
}

/**
 * One panel per metric for a sweep axis: x = grid value, one line per
 * method, error bars = std. Methods and grid values are sorted for stable
 * output regardless of row order.
 */
export function sweepPanels(rows: AggRow[]): Panel[] {
  const metrics = orderedMetrics(rows.map((r) => r.metric));
  const methods = sortedUnique(rows.map((r) => r.method));
  return metrics.map((metric) => {
    const series: Series[] = [];
    for (const method of methods) {
      const pts = rows
        .filter((r) => r.metric === metric && r.method === method)
        .sort((a, b) => a.valueNum - b.valueNum);
      if (pts.length === 0) continue;
      series.push({
        label: method,
        x: pts.map((p) => p.valueNum),
        y: pts.map((p) => p.mean),
        yStd: pts.map((p) => p.std),
        sourceLines: pts.map((p) => p.lineNo),
      });
    }
    return { key: metric, title: metric, series };
  });
}

export interface ComparisonTable {
  /** Grid value the table is sliced at (raw label from the CSV). */
  value: string;
  columns: string[];
  rows: Array<{ method: string; cells: Array<number | null> }>;
  sourceLines: number[];
}

/**
 * Method-by-metric table at one grid value, mirroring the nominal
 * performance-comparison layout. Cells are the aggregate means, exactly as
 * written by the producer; metrics a method never reported stay null.
 */
export function comparisonTable(rows: AggRow[], at?: string): ComparisonTable {
  const values = sortedUnique(rows.map((r) => r.value));
  if (values.length === 0) {
    return { value: at ?? "", columns: [], rows: [], sourceLines: [] };
  }
  const value = at ?? (values.includes("1.0") ? "1.0" : values[0]);
  const slice = rows.filter((r) => r.value === value);
  const columns = orderedMetrics(slice.map((r) => r.metric));
  const methods = sortedUnique(slice.map((r) => r.method));
  const sourceLines: number[] = [];
  const out = methods.map((method) => {
    const cells = columns.map((metric) => {
      const row = slice.find((r) => r.method === method && r.metric === metric);
      if (!row) return null;
      sourceLines.push(row.lineNo);
      return row.mean;
    });
    return { method, cells };
  });
  return { value, columns, rows: out, sourceLines };
}
