export type Metric = "accuracy" | "f1" | "mae" | "rmse";

export function accuracy(truth: number[], pred: number[]): number {
  let hit = 0;
  for (let i = 0; i < truth.length; i++) if (truth[i] === pred[i]) hit++;
  return hit / truth.length;
}

/** Macro-averaged F1 over the classes present in the truth labels. */
export function f1(truth: number[], pred: number[]): number {
  const classes = [...new Set(truth)].sort((a, b) => a - b);
  let total = 0;
  for (const c of classes) {
    let tp = 0;
    let fp = 0;
    let fn = 0;
    for (let i = 0; i < truth.length; i++) {
      if (pred[i] === c && truth[i] === c) tp++;
      else if (pred[i] === c) fp++;
      else if (truth[i] === c) fn++;
    }
    const precision = tp + fp > 0 ? tp / (tp + fp) : 0;
    const recall = tp + fn > 0 ? tp / (tp + fn) : 0;
    total += precision + recall > 0 ? (2 * precision * recall) / (precision + recall) : 0;
  }
  return total / classes.length;
}

export function mae(truth: number[], pred: number[]): number {
  let sum = 0;
  for (let i = 0; i < truth.length; i++) sum += Math.abs(truth[i] - pred[i]);
  return sum / truth.length;
}

export function rmse(truth: number[], pred: number[]): number {
  let sum = 0;
  for (let i = 0; i < truth.length; i++) sum += (truth[i] - pred[i]) ** 2;
  return Math.sqrt(sum / truth.length);
}

export function computeMetric(name: Metric, truth: number[], pred: number[]): number {
  switch (name) {
    case "accuracy":
      return accuracy(truth, pred);
    case "f1":
      return f1(truth, pred);
    case "mae":
      return mae(truth, pred);
    case "rmse":
      return rmse(truth, pred);
  }
}
