/**
 * Parsers for the three record files a run directory can hold:
 *
 *   kpis.jsonl       one JSON object per line; per-epoch rows carry "epoch",
 *                    evaluation rows do not; r_cb/r_vcb are omitted (not
 *                    null) when an episode earned no revenue
 *   curves.jsonl     one JSON object per line: epoch plus the four per-role
 *                    reward sums
 *   aggregated.csv   scenario,axis,value,method,metric,mean,std,n
 *
 * Every parsed record keeps its 1-based source line so figures can name the
 * exact inputs they used. Any shape problem raises DataError pointing at the
 * offending line.
 */

export const REWARD_KEYS = [
  "R_general",
  "R_flight",
  "R_maintenance",
  "R_resource",
] as const;

export const KPI_PANEL_KEYS = [
  "r_ab",
  "r_ms",
  "r_ss",
  "ttc",
  "r_cb",
  "r_vcb",
] as const;

export const AGG_HEADER = "scenario,axis,value,method,metric,mean,std,n";

export class DataError extends Error {
  constructor(
    message: string,
    readonly file: string,
    readonly line: number,
  ) {
    super(`${file}:${line}: ${message}`);
    this.name = "DataError";
  }
}

export interface KpiRecord {
  lineNo: number;
  epoch?: number;
  scenario: string;
  seed: number | null;
  r_ab: number;
  r_ms: number;
  r_ss: number;
  ttc: number;
  r_total: number;
  r_cb?: number;
  r_vcb?: number;
  costs: Record<string, number>;
}

export interface CurveRow {
  lineNo: number;
  epoch: number;
  R_general: number;
  R_flight: number;
  R_maintenance: number;
  R_resource: number;
}

export interface AggRow {
  lineNo: number;
  scenario: string;
  axis: string;
  value: string; // raw grid label, e.g. "0.8"
  valueNum: number;
  method: string;
  metric: string;
  mean: number;
  std: number;
  n: number;
}

function jsonLine(raw: string, file: string, lineNo: number): Record<string, unknown> {
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch {
    throw new DataError("not valid JSON", file, lineNo);
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    throw new DataError("expected a JSON object", file, lineNo);
  }
  return parsed as Record<string, unknown>;
}

function num(
  obj: Record<string, unknown>,
  key: string,
  file: string,
  lineNo: number,
): number {
  const v = obj[key];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new DataError(`field "${key}" must be a finite number`, file, lineNo);
  }
  return v;
}

function nonEmptyLines(text: string): Array<[number, string]> {
  const out: Array<[number, string]> = [];
  text.split("\n").forEach((raw, i) => {
    if (raw.trim() !== "") out.push([i + 1, raw]);
  });
  return out;
}

export function parseKpiLines(text: string, file: string): KpiRecord[] {
  const records: KpiRecord[] = [];
  for (const [lineNo, raw] of nonEmptyLines(text)) {
    const obj = jsonLine(raw, file, lineNo);
    if (typeof obj.scenario !== "string") {
      throw new DataError('field "scenario" must be a string', file, lineNo);
    }
    if (obj.seed !== null && typeof obj.seed !== "number") {
      throw new DataError('field "seed" must be a number or null', file, lineNo);
    }
    const costs = obj.costs;
    if (typeof costs !== "object" || costs === null || Array.isArray(costs)) {
      throw new DataError('field "costs" must be an object', file, lineNo);
    }
    for (const [k, v] of Object.entries(costs)) {
      if (typeof v !== "number" || !Number.isFinite(v)) {
        throw new DataError(`cost "${k}" must be a finite number`, file, lineNo);
      }
    }
    const rec: KpiRecord = {
      lineNo,
      scenario: obj.scenario,
      seed: obj.seed as number | null,
      r_ab: num(obj, "r_ab", file, lineNo),
      r_ms: num(obj, "r_ms", file, lineNo),
      r_ss: num(obj, "r_ss", file, lineNo),
      ttc: num(obj, "ttc", file, lineNo),
      r_total: num(obj, "r_total", file, lineNo),
      costs: costs as Record<string, number>,
    };
    if ("epoch" in obj) rec.epoch = num(obj, "epoch", file, lineNo);
    if ("r_cb" in obj) rec.r_cb = num(obj, "r_cb", file, lineNo);
    if ("r_vcb" in obj) rec.r_vcb = num(obj, "r_vcb", file, lineNo);
    records.push(rec);
  }
  return records;
}

export function parseCurveLines(text: string, file: string): CurveRow[] {
  const rows: CurveRow[] = [];
  for (const [lineNo, raw] of nonEmptyLines(text)) {
    const obj = jsonLine(raw, file, lineNo);
    rows.push({
      lineNo,
      epoch: num(obj, "epoch", file, lineNo),
      R_general: num(obj, "R_general", file, lineNo),
      R_flight: num(obj, "R_flight", file, lineNo),
      R_maintenance: num(obj, "R_maintenance", file, lineNo),
      R_resource: num(obj, "R_resource", file, lineNo),
    });
  }
  return rows;
}

export function parseAggregateCsv(text: string, file: string): AggRow[] {
  const lines = nonEmptyLines(text);
  if (lines.length === 0) return [];
  const [headLine, head] = lines[0];
  if (head.trim() !== AGG_HEADER) {
    throw new DataError(
      `header must be "${AGG_HEADER}", got "${head.trim()}"`,
      file,
      headLine,
    );
  }
  const rows: AggRow[] = [];
  for (const [lineNo, raw] of lines.slice(1)) {
    const line = raw.replace(/\r$/, "");
    if (line.includes('"')) {
      throw new DataError("quoted CSV fields are not supported", file, lineNo);
    }
    const fields = line.split(",");
    if (fields.length !== 8) {
      throw new DataError(`expected 8 fields, got ${fields.length}`, file, lineNo);
    }
    const [scenario, axis, value, method, metric, mean, std, n] = fields;
    const meanNum = Number(mean);
    const stdNum = Number(std);
    const nNum = Number(n);
    if (!Number.isFinite(meanNum) || !Number.isFinite(stdNum)) {
      throw new DataError("mean/std must be finite numbers", file, lineNo);
    }
    if (!Number.isInteger(nNum) || nNum < 1) {
      throw new DataError("n must be a positive integer", file, lineNo);
    }
    const valueNum = Number(value);
    if (!Number.isFinite(valueNum)) {
      throw new DataError("value must be numeric", file, lineNo);
    }
    rows.push({
      lineNo,
      scenario,
      axis,
      value,
      valueNum,
      method,
      metric,
      mean: meanNum,
      std: stdNum,
      n: nNum,
    });
  }
  return rows;
}
