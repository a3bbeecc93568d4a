#!/usr/bin/env node
/**
 * Batch report renderer.
 *
 *   report-gen --curves runs/x/curves.jsonl --kpis runs/x/kpis.jsonl \
 *              --aggregate sweep/aggregated.csv --out report/
 *
 * Flags: --figures curves,sweeps,summary (default: every set whose input
 * was provided, plus summary), --smooth N (moving-average window, default
 * 1), --format svg. Exit codes: 0 ok, 1 bad input data, 2 usage error.
 */

import { existsSync } from "fs";
import { parseArgs } from "util";

import { FigureSet, renderReport, ReportSpec } from "./report.js";
import { DataError } from "./schema.js";

const FIGURE_SETS: FigureSet[] = ["curves", "sweeps", "summary"];

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs({
      args: argv,
      options: {
        curves: { type: "string" },
        kpis: { type: "string" },
        aggregate: { type: "string" },
        out: { type: "string" },
        figures: { type: "string" },
        smooth: { type: "string", default: "1" },
        format: { type: "string", default: "svg" },
      },
      allowPositionals: false,
    }).values;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }

  if (!args.out) {
    console.error("error: --out is required");
    return 2;
  }
  if (args.format !== "svg") {
    console.error(`error: unsupported format "${args.format}" (only svg)`);
    return 2;
  }
  const smooth = Number(args.smooth);
  if (!Number.isInteger(smooth) || smooth < 1) {
    console.error("error: --smooth must be a positive integer");
    return 2;
  }
  const inputs = { curves: args.curves, kpis: args.kpis, aggregate: args.aggregate };
  if (!inputs.curves && !inputs.kpis && !inputs.aggregate) {
    console.error("error: no inputs; pass --curves, --kpis, or --aggregate");
    return 2;
  }
  for (const [flag, path] of Object.entries(inputs)) {
    if (path && !existsSync(path)) {
      console.error(`error: --${flag} file not found: ${path}`);
      return 2;
    }
  }

  let figures: Set<FigureSet>;
  if (args.figures) {
    figures = new Set<FigureSet>();
    for (const name of args.figures.split(",")) {
      if (!FIGURE_SETS.includes(name as FigureSet)) {
        console.error(
          `error: unknown figure set "${name}" (choose from ${FIGURE_SETS.join(", ")})`,
        );
        return 2;
      }
      figures.add(name as FigureSet);
    }
    if (figures.has("curves") && !inputs.curves && !inputs.kpis) {
      console.error("error: figure set curves needs --curves or --kpis");
      return 2;
    }
    if (figures.has("sweeps") && !inputs.aggregate) {
      console.error("error: figure set sweeps needs --aggregate");
      return 2;
    }
  } else {
    figures = new Set<FigureSet>(["summary"]);
    if (inputs.curves || inputs.kpis) figures.add("curves");
    if (inputs.aggregate) figures.add("sweeps");
  }

  const spec: ReportSpec = {
    curves: inputs.curves,
    kpis: inputs.kpis,
    aggregate: inputs.aggregate,
    outDir: args.out,
    figures,
    smooth,
    format: "svg",
  };
  try {
    const result = renderReport(spec);
    for (const note of result.notes) console.error(`note: ${note}`);
    for (const path of result.written) console.log(path);
    return 0;
  } catch (err) {
    if (err instanceof DataError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const entry = process.argv[1];
if (entry && (entry.endsWith("cli.js") || entry.endsWith("report-gen"))) {
  process.exit(main(process.argv.slice(2)));
}
