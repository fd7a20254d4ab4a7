// Column typing, ordinal encoding, and fold-local imputation.

import { RawTable, isNullLiteral } from "./csv";

export type Task = "classification" | "regression";

export interface Dataset {
  featureNames: string[];
  /** feature matrix with NaN marking missing cells */
  x: number[][];
  /** numeric targets; classification labels are ordinal class ids */
  y: number[];
  classes: string[]; // empty for regression
}

function isNumericColumn(values: (string | null)[]): boolean {
  let saw = false;
  for (const v of values) {
    if (v === null) continue;
    saw = true;
    if (v.trim() === "" || Number.isNaN(Number(v))) return false;
  }
  return saw;
}

/**
 * Turn a parsed CSV into a numeric design matrix: numeric columns parse
 * directly, categorical columns get a stable ordinal code (sorted
 * vocabulary), missing cells become NaN for the imputer.
 */
export function prepare(table: RawTable, target: string, task: Task): Dataset {
  const tIdx = table.header.indexOf(target);
  if (tIdx < 0) {
    throw new Error(`target column '${target}' not found`);
  }
  const cells: (string | null)[][] = table.rows.map((r) =>
    r.map((c) => (isNullLiteral(c) ? null : c))
  );

  const rawTargets = cells.map((r) => r[tIdx]);
  if (rawTargets.some((v) => v === null)) {
    throw new Error("target column contains nulls");
  }
  let y: number[];
  let classes: string[] = [];
  if (task === "classification") {
    classes = [...new Set(rawTargets as string[])].sort();
    if (classes.length < 2) throw new Error("classification target has < 2 classes");
    const code = new Map(classes.map((c, i) => [c, i]));
    y = (rawTargets as string[]).map((v) => code.get(v)!);
  } else {
    y = (rawTargets as string[]).map((v) => {
      const num = Number(v);
      if (Number.isNaN(num)) throw new Error(`non-numeric regression target '${v}'`);
      return num;
    });
  }

  const featureNames: string[] = [];
  const columns: number[][] = [];
  for (let c = 0; c < table.header.length; c++) {
    if (c === tIdx) continue;
    const values = cells.map((r) => r[c]);
    let encoded: number[];
    if (isNumericColumn(values)) {
      encoded = values.map((v) => (v === null ? NaN : Number(v)));
    } else {
      const vocab = [...new Set(values.filter((v): v is string => v !== null))].sort();
      const code = new Map(vocab.map((v, i) => [v, i]));
      encoded = values.map((v) => (v === null ? NaN : code.get(v)!));
    }
    featureNames.push(table.header[c]);
    columns.push(encoded);
  }
  const x = cells.map((_, r) => columns.map((col) => col[r]));
  return { featureNames, x, y, classes };
}

function median(sortedValues: number[]): number {
  const n = sortedValues.length;
  if (n === 0) return 0;
  const mid = Math.floor(n / 2);
  return n % 2 === 1 ? sortedValues[mid] : (sortedValues[mid - 1] + sortedValues[mid]) / 2;
}

/**
 * Median imputation fitted on the training rows only; categorical columns
 * were ordinal-encoded upfront, so their median doubles as the mode-ish
 * central code. Columns that are entirely missing in training impute to 0.
 */
export function fitImputer(x: number[][], trainIdx: number[]): number[] {
  const width = x[0]?.length ?? 0;
  const fill: number[] = [];
  for (let c = 0; c < width; c++) {
    const present = trainIdx
      .map((r) => x[r][c])
      .filter((v) => !Number.isNaN(v))
      .sort((a, b) => a - b);
    fill.push(median(present));
  }
  return fill;
}

export function impute(row: number[], fill: number[]): number[] {
  return row.map((v, c) => (Number.isNaN(v) ? fill[c] : v));
}
