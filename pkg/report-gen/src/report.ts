/**
 * Report assembly: reads a run's record files, extracts plot data, draws
 * SVG figures with machine-readable caption sidecars, and writes a
 * single-page HTML summary. Inputs are only ever read; outputs are pure
 * functions of the inputs, so reruns are byte-identical.
 */

import { mkdirSync, readFileSync, writeFileSync } from "fs";
import { join } from "path";

import {
  comparisonTable,
  ComparisonTable,
  kpiPanels,
  Panel,
  rewardPanels,
  sweepPanels,
} from "./extract.js";
import {
  parseAggregateCsv,
  parseCurveLines,
  parseKpiLines,
} from "./schema.js";
import { panelFigure, placeholderFigure } from "./svg.js";

export type FigureSet = "curves" | "sweeps" | "summary";

export interface ReportSpec {
  curves?: string;
  kpis?: string;
  aggregate?: string;
  outDir: string;
  figures: ReadonlySet<FigureSet>;
  /** Moving-average window for curve panels; 1 disables smoothing. */
  smooth: number;
  format: "svg";
}

interface InputUse {
  path: string;
  records: number;
  /** 1-based line numbers of every record the figure actually used. */
  lines: number[];
}

interface Caption {
  figure: string;
  title: string;
  smoothing_window?: number;
  panels: Array<{ key: string; points: number }>;
  inputs: InputUse[];
  note?: string;
}

export interface FigureArtifact {
  name: string;
  svg: string;
  caption: Caption;
}

export interface ReportResult {
  written: string[];
  notes: string[];
}

function usedLines(panels: Panel[]): number[] {
  const lines = new Set<number>();
  for (const p of panels) {
    for (const s of p.series) {
      for (const ln of s.sourceLines) lines.add(ln);
    }
  }
  return [...lines].sort((a, b) => a - b);
}

function figure(
  name: string,
  title: string,
  panels: Panel[],
  cols: number,
  input: { path: string; records: number },
  smooth?: number,
): FigureArtifact {
  const caption: Caption = {
    figure: `${name}.svg`,
    title,
    panels: panels.map((p) => ({
      key: p.key,
      points: p.series.reduce((acc, s) => acc + s.x.length, 0),
    })),
    inputs: [{ ...input, lines: usedLines(panels) }],
  };
  if (smooth !== undefined) caption.smoothing_window = smooth;
  return { name, svg: panelFigure(panels, cols), caption };
}

function placeholder(
  name: string,
  title: string,
  path: string,
  note: string,
): FigureArtifact {
  return {
    name,
    svg: placeholderFigure(note),
    caption: {
      figure: `${name}.svg`,
      title,
      panels: [],
      inputs: [{ path, records: 0, lines: [] }],
      note,
    },
  };
}

function writeArtifact(outDir: string, art: FigureArtifact): string[] {
  const svgPath = join(outDir, `${art.name}.svg`);
  const capPath = join(outDir, `${art.name}.caption.json`);
  writeFileSync(svgPath, art.svg);
  writeFileSync(capPath, JSON.stringify(art.caption, null, 2) + "\n");
  return [svgPath, capPath];
}

/** Reward curve figure (and per-epoch KPI figure when kpis are given). */
export function buildCurveFigures(spec: ReportSpec): FigureArtifact[] {
  const out: FigureArtifact[] = [];
  if (spec.curves) {
    const rows = parseCurveLines(readFileSync(spec.curves, "utf8"), spec.curves);
    out.push(
      rows.length === 0
        ? placeholder("rewards", "Reward curves", spec.curves, "no data")
        : figure(
            "rewards",
            "Reward curves",
            rewardPanels(rows, spec.smooth),
            2,
            { path: spec.curves, records: rows.length },
            spec.smooth,
          ),
    );
  }
  if (spec.kpis) {
    const recs = parseKpiLines(readFileSync(spec.kpis, "utf8"), spec.kpis);
    out.push(
      recs.length === 0
        ? placeholder("metrics", "KPI trajectories", spec.kpis, "no data")
        : figure(
            "metrics",
            "KPI trajectories",
            kpiPanels(recs, spec.smooth),
            3,
            { path: spec.kpis, records: recs.length },
            spec.smooth,
          ),
    );
  }
  return out;
}

export interface SweepArtifacts {
  figure: FigureArtifact;
  table: ComparisonTable | null;
}

/** Sweep comparison figure plus the method-by-metric table. */
export function buildSweepArtifacts(spec: ReportSpec): SweepArtifacts {
  const path = spec.aggregate as string;
  const rows = parseAggregateCsv(readFileSync(path, "utf8"), path);
  if (rows.length === 0) {
    return {
      figure: placeholder("sweeps", "Sweep comparison", path, "no data"),
      table: null,
    };
  }
  const panels = sweepPanels(rows);
  const fig = figure("sweeps", `Sweep over ${rows[0].axis}`, panels, 3, {
    path,
    records: rows.length,
  });
  return { figure: fig, table: comparisonTable(rows) };
}

function tableCsv(table: ComparisonTable): string {
  const head = ["method", ...table.columns].join(",");
  const body = table.rows.map((r) =>
    [r.method, ...r.cells.map((c) => (c === null ? "" : String(c)))].join(","),
  );
  return [head, ...body].join("\n") + "\n";
}

function tableHtml(table: ComparisonTable): string {
  const head =
    "<tr><th>method</th>" +
    table.columns.map((c) => `<th>${c}</th>`).join("") +
    "</tr>";
  const body = table.rows
    .map(
      (r) =>
        `<tr><td>${r.method}</td>` +
        r.cells
          .map((c) => `<td>${c === null ? "&mdash;" : c.toFixed(3)}</td>`)
          .join("") +
        "</tr>",
    )
    .join("\n");
  return `<table border="1" cellpadding="4" cellspacing="0">\n${head}\n${body}\n</table>`;
}

function summaryHtml(
  figures: FigureArtifact[],
  table: ComparisonTable | null,
): string {
  const parts: string[] = [
    "<!DOCTYPE html>",
    "<html><head><meta charset=\"utf-8\"><title>Run report</title></head><body>",
    "<h1>Run report</h1>",
  ];
  for (const f of figures) {
    parts.push(`<h2>${f.caption.title}</h2>`);
    if (f.caption.note) parts.push(`<p><em>${f.caption.note}</em></p>`);
    parts.push(f.svg);
    parts.push(
      `<p><small>inputs: ${f.caption.inputs
        .map((i) => `${i.path} (${i.records} records)`)
        .join(", ")}</small></p>`,
    );
  }
  if (table) {
    parts.push(`<h2>Comparison at grid value ${table.value}</h2>`);
    parts.push(tableHtml(table));
  }
  parts.push("</body></html>");
  return parts.join("\n") + "\n";
}

/** Render every selected figure set into spec.outDir. */
export function renderReport(spec: ReportSpec): ReportResult {
  mkdirSync(spec.outDir, { recursive: true });
  const written: string[] = [];
  const notes: string[] = [];
  const figures: FigureArtifact[] = [];
  let table: ComparisonTable | null = null;

  if (spec.figures.has("curves") && (spec.curves || spec.kpis)) {
    for (const art of buildCurveFigures(spec)) {
      written.push(...writeArtifact(spec.outDir, art));
      figures.push(art);
      if (art.caption.note) notes.push(`${art.name}: ${art.caption.note}`);
    }
  }
  if (spec.figures.has("sweeps") && spec.aggregate) {
    const arts = buildSweepArtifacts(spec);
    written.push(...writeArtifact(spec.outDir, arts.figure));
    figures.push(arts.figure);
    if (arts.figure.caption.note) {
      notes.push(`sweeps: ${arts.figure.caption.note}`);
    }
    table = arts.table;
    if (table) {
      const jsonPath = join(spec.outDir, "comparison.json");
      const csvPath = join(spec.outDir, "comparison.csv");
      writeFileSync(jsonPath, JSON.stringify(table, null, 2) + "\n");
      writeFileSync(csvPath, tableCsv(table));
      written.push(jsonPath, csvPath);
    }
  }
  if (spec.figures.has("summary")) {
    const htmlPath = join(spec.outDir, "summary.html");
    writeFileSync(htmlPath, summaryHtml(figures, table));
    written.push(htmlPath);
  }
  return { written, notes };
}
