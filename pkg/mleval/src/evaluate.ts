// Seeded 5-fold cross-validated evaluation of a single CSV table.
//
// Folds are derived only from (seed, row count), so evaluating a base table
// and its row-aligned augmented version with the same seed uses identical
// splits and any metric difference comes from the feature columns alone.

import { parseCsv } from "./csv";
import { Dataset, Task, fitImputer, impute, prepare } from "./data";
import { DEFAULT_PARAMS, GbtClassifier, GbtRegressor, GbtParams } from "./gbt";
import { Metric, computeMetric } from "./metrics";
import { mulberry32, shuffledIndices } from "./rng";

export const FOLDS = 5;

export interface EvalResult {
  metric_name: Metric;
  value: number;
  n_train: number;
  n_test: number;
  seed: number;
  per_fold: number[];
}

export function makeFolds(n: number, seed: number, folds: number = FOLDS): number[][] {
  const order = shuffledIndices(n, mulberry32(seed));
  const out: number[][] = Array.from({ length: folds }, () => []);
  order.forEach((row, i) => out[i % folds].push(row));
  return out;
}

function trainPredict(
  data: Dataset,
  task: Task,
  trainIdx: number[],
  testIdx: number[],
  params: GbtParams
): number[] {
  const fill = fitImputer(data.x, trainIdx);
  const xTrain = trainIdx.map((r) => impute(data.x[r], fill));
  const yTrain = trainIdx.map((r) => data.y[r]);
  const xTest = testIdx.map((r) => impute(data.x[r], fill));
  if (task === "classification") {
    const classesInFold = new Set(yTrain);
    if (classesInFold.size < 2) {
      throw new Error("single-class training fold; dataset too small or too skewed");
    }
    const model = new GbtClassifier(params).fit(xTrain, yTrain, data.classes.length);
    return xTest.map((row) => model.predict(row));
  }
  const model = new GbtRegressor(params).fit(xTrain, yTrain);
  return xTest.map((row) => model.predict(row));
}

export function evaluateTable(
  csvText: string,
  target: string,
  task: Task,
  metric: Metric,
  seed: number,
  params: GbtParams = DEFAULT_PARAMS
): EvalResult {
  const data = prepare(parseCsv(csvText), target, task);
  const n = data.y.length;
  if (n < FOLDS) {
    throw new Error(`need at least ${FOLDS} rows, got ${n}`);
  }
  const folds = makeFolds(n, seed);
  const perFold: number[] = [];
  let trainSizes = 0;
  let testSizes = 0;
  for (let f = 0; f < folds.length; f++) {
    const testIdx = folds[f];
    const trainIdx = folds.flatMap((fold, i) => (i === f ? [] : fold));
    const pred = trainPredict(data, task, trainIdx, testIdx, params);
    const truth = testIdx.map((r) => data.y[r]);
    perFold.push(computeMetric(metric, truth, pred));
    trainSizes += trainIdx.length;
    testSizes += testIdx.length;
  }
  const value = perFold.reduce((a, b) => a + b, 0) / perFold.length;
  if (!Number.isFinite(value)) {
    throw new Error("metric value is not finite");
  }
  return {
    metric_name: metric,
    value,
    n_train: Math.round(trainSizes / folds.length),
    n_test: Math.round(testSizes / folds.length),
    seed,
    per_fold: perFold,
  };
}
