/**
 * Run-directory artifact parsing with strict schema validation.
 *
 * The column layouts are the solver CLI's external contract; any deviation
 * aborts with the offending column named rather than rendering nonsense.
 */

import { readFileSync } from "fs";
import path from "path";

export const TIMESERIES_COLUMNS = [
  "t", "udot_min", "udot_max", "theta0", "theta1", "lam_min", "lam_max",
  "mu1", "mu2", "obliq_min", "band_sum_fp", "band_sum_fpl2",
  "stat_residual", "hausdorff",
] as const;

export const FIELD_COLUMNS = [
  "x1", "x2", "u", "du1", "du2", "hess11", "hess12", "hess22",
] as const;

export type TimeseriesRow = Record<(typeof TIMESERIES_COLUMNS)[number], number>;
export type FieldRow = Record<(typeof FIELD_COLUMNS)[number], number>;

export interface BandBounds {
  pass: boolean;
  provenance?: string;
  bounds_fp?: [number, number] | null;
  bounds_fpl2?: [number, number] | null;
}

export interface Summary {
  c_infty: number;
  termination: string;
  theta0: number;
  theta1: number;
  mu1: number;
  mu2: number;
  spacing: number;
  profile: string;
  checks: Record<string, Record<string, unknown>>;
  [key: string]: unknown;
}

export interface DomainSpec {
  kind: "ellipse" | "blend";
  semi_axes: number[] | number[][];
  weights?: number[];
}

export interface RunConfig {
  source: DomainSpec;
  target: DomainSpec;
  profile: string;
  spacing: number;
  [key: string]: unknown;
}

export interface RunArtifacts {
  timeseries: TimeseriesRow[];
  summary: Summary;
  field: FieldRow[];
  config: RunConfig;
}

export class SchemaError extends Error {}

function parseCsv<T extends readonly string[]>(
  text: string,
  columns: T,
  label: string,
): Record<T[number], number>[] {
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`${label}: file is empty`);
  }
  const header = lines[0].split(",");
  if (header.length !== columns.length) {
    throw new SchemaError(
      `${label}: expected ${columns.length} columns, found ${header.length}`,
    );
  }
  for (let i = 0; i < columns.length; i++) {
    if (header[i] !== columns[i]) {
      throw new SchemaError(
        `${label}: column ${i + 1} should be '${columns[i]}', found '${header[i]}'`,
      );
    }
  }
  if (lines.length === 1) {
    throw new SchemaError(`${label}: no data rows`);
  }
  const rows: Record<T[number], number>[] = [];
  for (let r = 1; r < lines.length; r++) {
    const parts = lines[r].split(",");
    if (parts.length !== columns.length) {
      throw new SchemaError(
        `${label}: row ${r} has ${parts.length} fields, expected ${columns.length}`,
      );
    }
    const row = {} as Record<T[number], number>;
    for (let i = 0; i < columns.length; i++) {
      const v = parts[i] === "nan" ? NaN : Number(parts[i]);
      if (parts[i] !== "nan" && !Number.isFinite(v)) {
        throw new SchemaError(
          `${label}: row ${r} column '${columns[i]}' is not numeric: '${parts[i]}'`,
        );
      }
      row[columns[i] as T[number]] = v;
    }
    rows.push(row);
  }
  return rows;
}

function requireKeys(obj: Record<string, unknown>, keys: string[], label: string): void {
  for (const key of keys) {
    if (!(key in obj)) {
      throw new SchemaError(`${label}: missing key '${key}'`);
    }
  }
}

export function loadArtifacts(runDir: string): RunArtifacts {
  const read = (name: string): string => {
    try {
      return readFileSync(path.join(runDir, name), "utf-8");
    } catch {
      throw new SchemaError(`missing run artifact ${name} in ${runDir}`);
    }
  };
  const timeseries = parseCsv(read("timeseries.csv"), TIMESERIES_COLUMNS, "timeseries.csv");
  const field = parseCsv(read("final_u.csv"), FIELD_COLUMNS, "final_u.csv");
  let summary: Summary;
  let config: RunConfig;
  try {
    summary = JSON.parse(read("summary.json"));
  } catch (e) {
    if (e instanceof SchemaError) throw e;
    throw new SchemaError(`summary.json: invalid JSON (${e})`);
  }
  try {
    config = JSON.parse(read("config.json"));
  } catch (e) {
    if (e instanceof SchemaError) throw e;
    throw new SchemaError(`config.json: invalid JSON (${e})`);
  }
  requireKeys(summary, ["c_infty", "termination", "theta0", "theta1", "mu1",
    "mu2", "checks"], "summary.json");
  requireKeys(config, ["source", "target", "profile", "spacing"], "config.json");
  return { timeseries, summary, field, config };
}

/** Effective ellipse semi-axes of {h > 0} for an ellipse or blend spec. */
export function effectiveSemiAxes(spec: DomainSpec): [number, number] {
  if (spec.kind === "ellipse") {
    const [a, b] = spec.semi_axes as number[];
    return [a, b];
  }
  const axes = spec.semi_axes as number[][];
  const weights = spec.weights ?? axes.map(() => 1);
  let c0 = 0;
  let c1 = 0;
  let c2 = 0;
  for (let i = 0; i < axes.length; i++) {
    c0 += weights[i];
    c1 += weights[i] / (axes[i][0] * axes[i][0]);
    c2 += weights[i] / (axes[i][1] * axes[i][1]);
  }
  return [Math.sqrt(c0 / c1), Math.sqrt(c0 / c2)];
}
