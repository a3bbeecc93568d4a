import { readFileSync } from "fs";
import { fileURLToPath } from "url";
import { describe, expect, it } from "vitest";

import {
  comparisonTable,
  kpiPanels,
  movingAverage,
  rewardPanels,
  sweepPanels,
} from "../src/extract";
import {
  KpiRecord,
  parseAggregateCsv,
  parseCurveLines,
} from "../src/schema";

const fixture = (rel: string) =>
  fileURLToPath(new URL(`./fixtures/${rel}`, import.meta.url));

const aggText = readFileSync(fixture("sweep-failure/aggregated.csv"), "utf8");
const aggRows = parseAggregateCsv(aggText, "aggregated.csv");

describe("movingAverage", () => {
  it("window 1 is the identity", () => {
    expect(movingAverage([3, 1, 4], 1)).toEqual([3, 1, 4]);
  });

  it("matches the hand-computed trailing mean", () => {
    expect(movingAverage([1, 2, 3, 4], 2)).toEqual([1, 1.5, 2.5, 3.5]);
    expect(movingAverage([2, 4, 6], 10)).toEqual([2, 3, 4]);
  });

  it("agrees with an independent per-point mean on random data", () => {
    const vals = Array.from({ length: 40 }, (_, i) => Math.sin(i * 0.7) * 10);
    for (const w of [2, 5, 7]) {
      const got = movingAverage(vals, w);
      vals.forEach((_, i) => {
        const windowVals = vals.slice(Math.max(0, i - w + 1), i + 1);
        const want = windowVals.reduce((a, b) => a + b, 0) / windowVals.length;
        expect(got[i]).toBeCloseTo(want, 12);
      });
    }
  });
});

describe("rewardPanels", () => {
  const rows = parseCurveLines(
    readFileSync(fixture("train-mini/curves.jsonl"), "utf8"),
    "curves.jsonl",
  );

  it("produces the four role panels in order", () => {
    const panels = rewardPanels(rows);
    expect(panels.map((p) => p.key)).toEqual([
      "R_general",
      "R_flight",
      "R_maintenance",
      "R_resource",
    ]);
    expect(panels[0].series[0].x).toEqual([0, 1, 2, 3, 4, 5]);
    expect(panels[0].series[0].y).toEqual(rows.map((r) => r.R_general));
  });

  it("smoothing applies movingAverage to the raw series", () => {
    const raw = rows.map((r) => r.R_flight);
    const panels = rewardPanels(rows, 3);
    expect(panels[1].series[0].y).toEqual(movingAverage(raw, 3));
  });
});

describe("kpiPanels", () => {
  it("shows six panels and drops undefined ratio points", () => {
    const recs: KpiRecord[] = [
      { lineNo: 1, epoch: 0, scenario: "s", seed: 0, r_ab: 50, r_ms: 0,
        r_ss: 0, ttc: 10, r_total: 0, costs: {} },
      { lineNo: 2, epoch: 1, scenario: "s", seed: 0, r_ab: 75, r_ms: 50,
        r_ss: 100, ttc: 8, r_total: 20, r_cb: 0.4, r_vcb: 0.5, costs: {} },
    ];
    const panels = kpiPanels(recs);
    expect(panels.map((p) => p.key)).toEqual([
      "r_ab", "r_ms", "r_ss", "ttc", "r_cb", "r_vcb",
    ]);
    const rcb = panels[4].series[0];
    expect(rcb.x).toEqual([1]);
    expect(rcb.y).toEqual([0.4]);
    expect(rcb.sourceLines).toEqual([2]);
    expect(panels[0].series[0].x).toEqual([0, 1]);
  });

  it("falls back to record index when rows carry no epoch", () => {
    const recs: KpiRecord[] = [0, 1, 2].map((i) => ({
      lineNo: i + 1, scenario: "s", seed: i, r_ab: i, r_ms: 0, r_ss: 0,
      ttc: 0, r_total: 0, costs: {},
    }));
    expect(kpiPanels(recs)[0].series[0].x).toEqual([0, 1, 2]);
  });
});

describe("sweepPanels", () => {
  it("one line per method, x sorted by grid value, std carried", () => {
    const panels = sweepPanels(aggRows);
    const rab = panels.find((p) => p.key === "r_ab")!;
    expect(rab.series.map((s) => s.label)).toEqual(["hrl", "rule"]);
    for (const s of rab.series) {
      expect(s.x).toEqual([0.8, 1.0]);
      expect(s.yStd).toHaveLength(2);
    }
  });

  it("canonical metric order comes first", () => {
    const keys = sweepPanels(aggRows).map((p) => p.key);
    expect(keys.slice(0, 4)).toEqual(["r_ab", "r_ms", "r_ss", "ttc"]);
  });

  it("single method and value yields a one-point series", () => {
    const one = aggRows.filter(
      (r) => r.method === "rule" && r.value === "1.0" && r.metric === "r_ms",
    );
    const panels = sweepPanels(one);
    expect(panels).toHaveLength(1);
    expect(panels[0].series).toHaveLength(1);
    expect(panels[0].series[0].x).toEqual([1.0]);
  });
});

describe("comparisonTable", () => {
  it("slices at grid value 1.0 by default", () => {
    expect(comparisonTable(aggRows).value).toBe("1.0");
    expect(comparisonTable(aggRows, "0.8").value).toBe("0.8");
  });

  it("cells equal the raw CSV means exactly", () => {
    // independent re-parse: raw text split, no schema layer involved
    const table = comparisonTable(aggRows);
    const lines = aggText.trim().split("\n").slice(1);
    for (const line of lines) {
      const f = line.split(",");
      if (f[2] !== "1.0") continue;
      const row = table.rows.find((r) => r.method === f[3])!;
      const cell = row.cells[table.columns.indexOf(f[4])];
      expect(cell).toBe(Number(f[5]));
    }
  });

  it("metrics a method never reported stay null", () => {
    const rows = aggRows.filter(
      (r) => !(r.method === "rule" && r.metric === "r_cb"),
    );
    const table = comparisonTable(rows);
    const rule = table.rows.find((r) => r.method === "rule")!;
    expect(rule.cells[table.columns.indexOf("r_cb")]).toBeNull();
  });

  it("empty input yields an empty table", () => {
    const table = comparisonTable([]);
    expect(table.rows).toEqual([]);
    expect(table.columns).toEqual([]);
  });
});
